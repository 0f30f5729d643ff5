//! Sweeps over one-parameter families of warped metrics.
//!
//! Along a path the signed count can only change where something breaks:
//! strings escape or collapse, a string degenerates, the metric leaves the
//! admissible class, or consecutive slices are not uniformly close. The
//! runner records each of these as an event on the interval between
//! samples.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::census::{self, CensusOptions, CensusReport, GeodesicString, Rational};
use crate::expr::ProfileFamily;
use crate::geometry::{FiberModel, MembershipVerdict, UniformDistance, WarpedMetric, Window};
use crate::loops::{self, HomotopyClass, SolveError, SolveOptions, SolveOutcome, SolveStatus};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("samples must start at 0, end at 1 and increase strictly")]
    BadSamples,
    #[error("string is not critical under the previous metric (gradient norm {0})")]
    NotConverged(f64),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone)]
pub struct MetricPath {
    pub family: ProfileFamily,
    pub fiber: FiberModel,
    pub window: Window,
    pub samples: Vec<f64>,
}

impl MetricPath {
    pub fn new(
        family: ProfileFamily,
        fiber: FiberModel,
        window: Window,
        samples: Vec<f64>,
    ) -> Result<Self, FamilyError> {
        let ok = samples.len() >= 2
            && samples.first() == Some(&0.0)
            && samples.last() == Some(&1.0)
            && samples.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(FamilyError::BadSamples);
        }
        Ok(Self {
            family,
            fiber,
            window,
            samples,
        })
    }

    /// `count` evenly spaced samples on `[0, 1]`.
    pub fn uniform_samples(count: usize) -> Vec<f64> {
        let count = count.max(2);
        (0..count)
            .map(|i| {
                if i + 1 == count {
                    1.0
                } else {
                    i as f64 / (count - 1) as f64
                }
            })
            .collect()
    }

    pub fn slice(&self, s: f64) -> Result<WarpedMetric, crate::geometry::GeometryError> {
        WarpedMetric::new(self.family.slice(s), self.fiber, self.window.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyOptions {
    pub census: CensusOptions,
    /// Sweep from `s = 1` down to `s = 0`.
    pub descending: bool,
    /// Jet order of the uniform distance between consecutive slices.
    pub distance_order: u8,
    pub membership_grid: usize,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            census: CensusOptions::default(),
            descending: false,
            distance_order: 2,
            membership_grid: 1001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Escape,
    LengthCollapse,
    Degeneracy,
    MembershipExit,
    UniformDiscontinuity,
    /// The slice is not a valid metric (for example `f <= 0` somewhere).
    InvalidSlice,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Escape => "escape",
            EventKind::LengthCollapse => "length-collapse",
            EventKind::Degeneracy => "degeneracy",
            EventKind::MembershipExit => "membership-exit",
            EventKind::UniformDiscontinuity => "uniform-discontinuity",
            EventKind::InvalidSlice => "invalid-slice",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// `(lo, hi)` with `lo <= hi`.
    pub interval: (f64, f64),
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationRecord {
    pub from_x0: f64,
    pub status: SolveStatus,
    pub x0: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceRecord {
    pub s: f64,
    /// Set when the slice could not be built or analysed.
    pub error: Option<String>,
    pub membership: Option<MembershipVerdict>,
    pub census: Option<CensusReport>,
    pub continuations: Vec<ContinuationRecord>,
    /// Distance to the previously processed slice.
    pub distance_prev: Option<UniformDistance>,
    pub eps_len: f64,
}

impl SliceRecord {
    pub fn fuller(&self) -> Option<Rational> {
        self.census.as_ref().and_then(|c| c.fuller)
    }

    pub fn strings(&self) -> &[GeodesicString] {
        self.census.as_ref().map_or(&[], |c| &c.strings)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyReport {
    pub class: HomotopyClass,
    /// Records in sweep order.
    pub records: Vec<SliceRecord>,
    pub events: Vec<Event>,
}

impl FamilyReport {
    /// Consecutive intervals where `F` changes with no event recorded on
    /// that interval. Nonempty output contradicts invariance of `F`.
    pub fn unexplained_jumps(&self) -> Vec<(f64, f64)> {
        self.records
            .windows(2)
            .filter_map(|w| {
                let (a, b) = (&w[0], &w[1]);
                let (fa, fb) = (a.fuller()?, b.fuller()?);
                let interval = ordered(a.s, b.s);
                let explained = self.events.iter().any(|e| e.interval == interval);
                (fa != fb && !explained).then_some(interval)
            })
            .collect()
    }

    pub fn event_count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Carries a critical loop from `g_prev` to `g_next`: Newton from the old
/// loop, falling back to descent.
pub fn continue_string(
    g_prev: &WarpedMetric,
    g_next: &WarpedMetric,
    s: &GeodesicString,
    opts: &SolveOptions,
) -> Result<SolveOutcome, FamilyError> {
    let lp = &s.representative;
    let prev_grad = loops::gradient(g_prev, lp).map_err(SolveError::from)?;
    let prev_norm = libm::sqrt(prev_grad.iter().map(|v| v * v).sum());
    if prev_norm > opts.switch_tol {
        return Err(FamilyError::NotConverged(prev_norm));
    }
    match loops::refine_newton(g_next, lp, opts) {
        Ok(out) if out.status != SolveStatus::MaxIter => Ok(out),
        Ok(_) | Err(SolveError::Precondition { .. }) => Ok(loops::minimize(g_next, lp, opts)?),
        Err(e) => Err(e.into()),
    }
}

/// Runs the sweep and assembles the report.
pub fn run_family(path: &MetricPath, class: HomotopyClass, opts: &FamilyOptions) -> FamilyReport {
    let mut order: Vec<f64> = path.samples.clone();
    if opts.descending {
        order.reverse();
    }
    let eps_len = opts
        .census
        .solver
        .eps_len
        .unwrap_or(1e-4 * path.fiber.length() * f64::from(class.winding()).abs());

    let mut records: Vec<SliceRecord> = Vec::with_capacity(order.len());
    let mut prev: Option<(WarpedMetric, Vec<GeodesicString>)> = None;
    for &s in &order {
        let mut record = SliceRecord {
            s,
            error: None,
            membership: None,
            census: None,
            continuations: Vec::new(),
            distance_prev: None,
            eps_len,
        };
        let g = match path.slice(s) {
            Ok(g) => g,
            Err(e) => {
                record.error = Some(e.to_string());
                records.push(record);
                prev = None;
                continue;
            }
        };
        match g.membership(opts.membership_grid) {
            Ok(v) => record.membership = Some(v),
            Err(e) => record.error = Some(e.to_string()),
        }
        let mut prior = Vec::new();
        if let Some((g_prev, strings)) = &prev {
            match g_prev.uniform_distance(&g, opts.distance_order) {
                Ok(d) => record.distance_prev = Some(d),
                Err(e) => record.error = Some(e.to_string()),
            }
            for st in strings {
                match continue_string(g_prev, &g, st, &opts.census.solver) {
                    Ok(out) => {
                        record.continuations.push(ContinuationRecord {
                            from_x0: st.x0,
                            status: out.status,
                            x0: out.curve.mean_x(),
                            length: out.length,
                        });
                        prior.push(out);
                    }
                    Err(e) => record.error = Some(e.to_string()),
                }
            }
        }
        match census::enumerate_with_prior(&g, class, &opts.census, prior) {
            Ok(report) => {
                prev = Some((g, report.strings.clone()));
                record.census = Some(report);
            }
            Err(e) => {
                record.error = Some(e.to_string());
                prev = Some((g, Vec::new()));
            }
        }
        records.push(record);
    }
    let events = detect_events(&records);
    FamilyReport { class, records, events }
}

/// Threshold detectors over consecutive slice records. Events of a record
/// are attached to the interval from the previous record's parameter.
pub fn detect_events(records: &[SliceRecord]) -> Vec<Event> {
    let mut events = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let prev_s = if i == 0 { rec.s } else { records[i - 1].s };
        let interval = ordered(prev_s, rec.s);
        let mut push = |kind: EventKind, detail: String| {
            events.push(Event { interval, kind, detail });
        };
        if let Some(err) = &rec.error {
            push(EventKind::InvalidSlice, err.clone());
        }
        let escaped: Vec<&ContinuationRecord> = rec
            .continuations
            .iter()
            .filter(|c| c.status == SolveStatus::Escaped)
            .collect();
        if !escaped.is_empty() {
            push(
                EventKind::Escape,
                alloc::format!("{} continued string(s) escaped", escaped.len()),
            );
        }
        let string_min = rec.strings().iter().map(|s| s.length).fold(f64::INFINITY, f64::min);
        let escape_min = escaped.iter().map(|c| c.length).fold(f64::INFINITY, f64::min);
        let shortest = string_min.min(escape_min);
        if shortest < rec.eps_len {
            push(
                EventKind::LengthCollapse,
                alloc::format!("length {shortest:e} below {:e}", rec.eps_len),
            );
        }
        let degenerate = rec.strings().iter().filter(|s| s.nullity > 1).count();
        if degenerate > 0 {
            push(
                EventKind::Degeneracy,
                alloc::format!("{degenerate} degenerate string(s)"),
            );
        }
        if let Some(v) = &rec.membership {
            if !v.is_member() {
                let what = if v.nonpositive_everywhere {
                    "ends not negative"
                } else {
                    "positive curvature"
                };
                push(EventKind::MembershipExit, what.to_string());
            }
        }
        if rec.distance_prev.as_ref().is_some_and(|d| d.diverging) {
            push(
                EventKind::UniformDiscontinuity,
                "jet distance diverges at the probes".to_string(),
            );
        }
    }
    events
}
