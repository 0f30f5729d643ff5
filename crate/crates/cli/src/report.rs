//! Report documents and CSV series.
//!
//! Field order is fixed by the struct definitions and every float is
//! written as `{:.16e}` (17 significant digits), so identical inputs give
//! byte-identical output. Non-finite floats are written as `null`.

use geostring_core::census::{CensusReport, GeodesicString, StartKind, StartRecord};
use geostring_core::family::{EventKind, FamilyReport, SliceRecord};
use geostring_core::geometry::{UniformDistance, Witness, TOL_CURV};
use geostring_core::{MembershipVerdict, Rational};
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

pub fn real<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    RawValue::from_string(format_real(*v))
        .map_err(serde::ser::Error::custom)?
        .serialize(s)
}

pub fn real_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => real(v, s),
        None => s.serialize_none(),
    }
}

pub fn real_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&Real(*x))?;
    }
    seq.end()
}

#[derive(Debug, Clone, Copy)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        real(&self.0, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Fraction {
    pub num: i64,
    pub den: i64,
}

impl From<Rational> for Fraction {
    fn from(r: Rational) -> Self {
        Self {
            num: *r.numer(),
            den: *r.denom(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub tol_curv: Real,
    pub tol_grad: Real,
    pub switch_tol: Real,
    pub tol_zero_rel: Real,
    pub eps_len: Real,
    pub dedup_tol: Real,
    pub samples: usize,
}

impl Tolerances {
    pub fn for_config(cfg: &RunConfig) -> Self {
        let census = cfg.census_options();
        let n = census.samples_for(cfg.class());
        let closure = cfg.fiber.length * f64::from(cfg.class.winding.unsigned_abs());
        Self {
            tol_curv: Real(TOL_CURV),
            tol_grad: Real(census.solver.tol_grad_for(n)),
            switch_tol: Real(census.solver.switch_tol),
            tol_zero_rel: Real(census.solver.tol_zero_rel),
            eps_len: Real(census.solver.eps_len.unwrap_or(1e-4 * closure)),
            dedup_tol: Real(census.dedup_tol_for(cfg.fiber.length)),
            samples: n,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessJson {
    pub x: Real,
    pub curvature: Real,
}

impl From<Witness> for WitnessJson {
    fn from(w: Witness) -> Self {
        Self {
            x: Real(w.x),
            curvature: Real(w.curvature),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipJson {
    pub member: bool,
    pub nonpositive_everywhere: bool,
    pub ends_negative: bool,
    pub max_curvature: Real,
    pub witness: Option<WitnessJson>,
    pub end_witness: Option<WitnessJson>,
    pub end_bound: Option<Real>,
}

impl From<&MembershipVerdict> for MembershipJson {
    fn from(v: &MembershipVerdict) -> Self {
        Self {
            member: v.is_member(),
            nonpositive_everywhere: v.nonpositive_everywhere,
            ends_negative: v.ends_negative,
            max_curvature: Real(v.max_curvature),
            witness: v.witness.map(Into::into),
            end_witness: v.end_witness.map(Into::into),
            end_bound: v.end_bound.map(Real),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvaturePoint {
    pub x: Real,
    pub f: Real,
    pub k_base: Real,
    /// `None` for fibers without transverse directions.
    pub k_fiber: Option<Real>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport<'a> {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub tolerances: Tolerances,
    pub membership: MembershipJson,
    pub series: Vec<CurvaturePoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StringJson {
    pub x0: Real,
    pub length: Real,
    pub min_x: Real,
    pub max_x: Real,
    pub morse_index: usize,
    pub nullity: usize,
    pub multiplicity: usize,
    pub transverse_index: Option<usize>,
    pub nondegenerate: bool,
    pub contribution: Option<Fraction>,
}

impl From<&GeodesicString> for StringJson {
    fn from(s: &GeodesicString) -> Self {
        Self {
            x0: Real(s.x0),
            length: Real(s.length),
            min_x: Real(s.representative.min_x()),
            max_x: Real(s.representative.max_x()),
            morse_index: s.morse_index,
            nullity: s.nullity,
            multiplicity: s.multiplicity,
            transverse_index: s.transverse_index,
            nondegenerate: s.nondegenerate,
            contribution: s.contribution().map(Into::into),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StartJson {
    pub kind: &'static str,
    pub x: Option<Real>,
    pub status: &'static str,
    pub iterations: usize,
    pub initial_length: Option<Real>,
    pub final_length: Real,
    pub final_mean_x: Real,
    pub length_monotone: bool,
    pub string: Option<usize>,
    pub duplicate: bool,
}

impl From<&StartRecord> for StartJson {
    fn from(r: &StartRecord) -> Self {
        let (kind, x) = match r.start {
            StartKind::CriticalSeed { x } => ("critical-seed", Some(Real(x))),
            StartKind::Lattice { x } => ("lattice", Some(Real(x))),
            StartKind::Prior => ("prior", None),
        };
        Self {
            kind,
            x,
            status: r.status.as_str(),
            iterations: r.iterations,
            initial_length: r.trace_lengths.first().copied().map(Real),
            final_length: Real(r.final_length),
            final_mean_x: Real(r.final_mean_x),
            length_monotone: r.length_monotone,
            string: r.string,
            duplicate: r.duplicate,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CensusJson<'a> {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub tolerances: Tolerances,
    pub winding: i32,
    #[serde(rename = "F")]
    pub fuller: Option<Fraction>,
    pub regular: bool,
    pub strings: Vec<StringJson>,
    pub escaped_starts: usize,
    pub starts: Vec<StartJson>,
}

impl<'a> CensusJson<'a> {
    pub fn new(cfg: &'a RunConfig, report: &CensusReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: "census",
            config: cfg,
            tolerances: Tolerances::for_config(cfg),
            winding: cfg.class.winding,
            fuller: report.fuller.map(Into::into),
            regular: report.regular,
            strings: report.strings.iter().map(Into::into).collect(),
            escaped_starts: report.escaped_starts().count(),
            starts: report.starts.iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceJson {
    pub value: Real,
    pub window_max: Real,
    pub diverging: bool,
    pub probe_maxima: Vec<Real>,
}

impl From<&UniformDistance> for DistanceJson {
    fn from(d: &UniformDistance) -> Self {
        Self {
            value: Real(d.value),
            window_max: Real(d.window_max),
            diverging: d.diverging,
            probe_maxima: d.probe_maxima.iter().copied().map(Real).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationJson {
    pub from_x0: Real,
    pub status: &'static str,
    pub x0: Real,
    pub length: Real,
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceJson {
    pub s: Real,
    pub error: Option<String>,
    pub membership: Option<MembershipJson>,
    #[serde(rename = "F")]
    pub fuller: Option<Fraction>,
    pub regular: Option<bool>,
    pub strings: Vec<StringJson>,
    pub escaped_starts: usize,
    pub continuations: Vec<ContinuationJson>,
    pub dist_prev: Option<DistanceJson>,
    pub eps_len: Real,
}

impl From<&SliceRecord> for SliceJson {
    fn from(r: &SliceRecord) -> Self {
        Self {
            s: Real(r.s),
            error: r.error.clone(),
            membership: r.membership.as_ref().map(Into::into),
            fuller: r.fuller().map(Into::into),
            regular: r.census.as_ref().map(|c| c.regular),
            strings: r.strings().iter().map(Into::into).collect(),
            escaped_starts: r.census.as_ref().map_or(0, |c| c.escaped_starts().count()),
            continuations: r
                .continuations
                .iter()
                .map(|c| ContinuationJson {
                    from_x0: Real(c.from_x0),
                    status: c.status.as_str(),
                    x0: Real(c.x0),
                    length: Real(c.length),
                })
                .collect(),
            dist_prev: r.distance_prev.as_ref().map(Into::into),
            eps_len: Real(r.eps_len),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EventJson {
    pub lo: Real,
    pub hi: Real,
    pub kind: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct KindCount {
    pub kind: &'static str,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySummary {
    pub slices: usize,
    pub event_count: usize,
    pub events_by_kind: Vec<KindCount>,
    pub unexplained_jumps: Vec<[Real; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyJson<'a> {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub tolerances: Tolerances,
    pub winding: i32,
    pub samples: Vec<Real>,
    pub summary: FamilySummary,
    pub records: Vec<SliceJson>,
    pub events: Vec<EventJson>,
}

const EVENT_KINDS: [EventKind; 6] = [
    EventKind::Escape,
    EventKind::LengthCollapse,
    EventKind::Degeneracy,
    EventKind::MembershipExit,
    EventKind::UniformDiscontinuity,
    EventKind::InvalidSlice,
];

impl<'a> FamilyJson<'a> {
    pub fn new(cfg: &'a RunConfig, samples: &[f64], report: &FamilyReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: "family",
            config: cfg,
            tolerances: Tolerances::for_config(cfg),
            winding: cfg.class.winding,
            samples: samples.iter().copied().map(Real).collect(),
            summary: FamilySummary {
                slices: report.records.len(),
                event_count: report.events.len(),
                events_by_kind: EVENT_KINDS
                    .iter()
                    .map(|&k| KindCount {
                        kind: k.as_str(),
                        count: report.event_count(k),
                    })
                    .collect(),
                unexplained_jumps: report
                    .unexplained_jumps()
                    .into_iter()
                    .map(|(a, b)| [Real(a), Real(b)])
                    .collect(),
            },
            records: report.records.iter().map(Into::into).collect(),
            events: report
                .events
                .iter()
                .map(|e| EventJson {
                    lo: Real(e.interval.0),
                    hi: Real(e.interval.1),
                    kind: e.kind.as_str(),
                    detail: e.detail.clone(),
                })
                .collect(),
        }
    }
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String, serde_json::Error> {
    let mut out = serde_json::to_string_pretty(doc)?;
    out.push('\n');
    Ok(out)
}

fn cell(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(format_real).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, csv::Error> {
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn curvature_csv(series: &[CurvaturePoint]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "f", "k_base", "k_fiber"])?;
    for p in series {
        w.write_record([
            cell(Some(p.x.0)),
            cell(Some(p.f.0)),
            cell(Some(p.k_base.0)),
            cell(p.k_fiber.map(|k| k.0)),
        ])?;
    }
    finish(w)
}

pub fn census_csv(report: &CensusReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "x0",
        "length",
        "morse_index",
        "nullity",
        "multiplicity",
        "transverse_index",
        "nondegenerate",
        "contribution_num",
        "contribution_den",
    ])?;
    for s in &report.strings {
        let c = s.contribution();
        w.write_record([
            cell(Some(s.x0)),
            cell(Some(s.length)),
            s.morse_index.to_string(),
            s.nullity.to_string(),
            s.multiplicity.to_string(),
            s.transverse_index.map(|t| t.to_string()).unwrap_or_default(),
            s.nondegenerate.to_string(),
            c.map(|r| r.numer().to_string()).unwrap_or_default(),
            c.map(|r| r.denom().to_string()).unwrap_or_default(),
        ])?;
    }
    finish(w)
}

/// One row per string per slice (one blank-string row for slices with
/// none). `events` lists the kinds recorded on the interval from the
/// previous slice.
pub fn family_csv(report: &FamilyReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "s",
        "F_num",
        "F_den",
        "x0",
        "length",
        "dist_prev",
        "diverging",
        "events",
    ])?;
    let mut prev: Option<f64> = None;
    for r in &report.records {
        let f = r.fuller();
        let (num, den) = match f {
            Some(f) => (f.numer().to_string(), f.denom().to_string()),
            None => (String::new(), String::new()),
        };
        let events = match prev {
            Some(p) => {
                let interval = if p <= r.s { (p, r.s) } else { (r.s, p) };
                let kinds: Vec<&str> = report
                    .events
                    .iter()
                    .filter(|e| e.interval == interval)
                    .map(|e| e.kind.as_str())
                    .collect();
                kinds.join(";")
            }
            None => String::new(),
        };
        let dist = cell(r.distance_prev.as_ref().map(|d| d.value));
        let diverging = r
            .distance_prev
            .as_ref()
            .map(|d| d.diverging.to_string())
            .unwrap_or_default();
        let strings = r.strings();
        if strings.is_empty() {
            w.write_record([
                cell(Some(r.s)),
                num,
                den,
                String::new(),
                String::new(),
                dist,
                diverging,
                events,
            ])?;
        } else {
            for s in strings {
                w.write_record([
                    cell(Some(r.s)),
                    num.clone(),
                    den.clone(),
                    cell(Some(s.x0)),
                    cell(Some(s.length)),
                    dist.clone(),
                    diverging.clone(),
                    events.clone(),
                ])?;
            }
        }
        prev = Some(r.s);
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_use_seventeen_digits() {
        assert_eq!(format_real(1.0), "1.0000000000000000e0");
        assert_eq!(format_real(-0.1), "-1.0000000000000001e-1");
        assert_eq!(format_real(f64::NAN), "null");
        let doc = serde_json::to_string(&[Real(2.5), Real(f64::INFINITY)]).unwrap();
        assert_eq!(doc, "[2.5000000000000000e0,null]");
        let back: Vec<Option<f64>> = serde_json::from_str(&doc).unwrap();
        assert_eq!(back, vec![Some(2.5), None]);
    }

    #[test]
    fn fractions_are_reduced() {
        assert_eq!(Fraction::from(Rational::new(2, 4)), Fraction { num: 1, den: 2 });
        assert_eq!(
            serde_json::to_string(&Fraction::from(Rational::from_integer(0))).unwrap(),
            r#"{"num":0,"den":1}"#
        );
    }
}
