//! Enumeration of closed geodesic strings in a class and their signed count
//!
//! ```text
//! F(g, w) = sum over strings o of (-1)^(morse(o)) / mult(o)
//! ```
//!
//! as an exact rational. Strings are searched in the totally geodesic
//! cylinder over the fiber geodesic. Transverse fiber directions enter only
//! through the constant-coefficient Jacobi spectrum at critical circles.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_rational::Ratio;
use thiserror::Error;

use crate::geometry::{GeometryError, WarpedMetric};
use crate::linalg::{self, Inertia};
use crate::loops::{self, DiscreteLoop, HomotopyClass, LoopError, SolveError, SolveOptions, SolveOutcome, SolveStatus};

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CensusError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("F is undefined: {0} string(s) are degenerate or have unknown index")]
    Undefined(usize),
    #[error("loop is not critical (gradient norm {0})")]
    NotCritical(f64),
    #[error("transverse index is only defined at critical circles")]
    NotCriticalCircle,
}

impl From<LoopError> for CensusError {
    fn from(e: LoopError) -> Self {
        CensusError::Solve(SolveError::Loop(e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusOptions {
    pub solver: SolveOptions,
    /// Samples per loop; rounded up to a multiple of `|w|`.
    pub n_points: usize,
    /// Multi-start lattice size over the window.
    pub starts: usize,
    /// Loops closer than this are the same string; `1e-5 * l` when unset.
    pub dedup_tol: Option<f64>,
}

impl Default for CensusOptions {
    fn default() -> Self {
        Self {
            solver: SolveOptions::default(),
            n_points: 256,
            starts: 17,
            dedup_tol: None,
        }
    }
}

impl CensusOptions {
    pub fn samples_for(&self, class: HomotopyClass) -> usize {
        let w = class.winding().unsigned_abs() as usize;
        let n = self.n_points.max(loops::MIN_SAMPLES);
        n.div_ceil(w) * w
    }

    pub fn dedup_tol_for(&self, fiber_length: f64) -> f64 {
        self.dedup_tol.unwrap_or(1e-5 * fiber_length)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicString {
    pub representative: DiscreteLoop,
    pub length: f64,
    /// Mean `x`; the base position for critical circles.
    pub x0: f64,
    pub morse_index: usize,
    pub nullity: usize,
    pub multiplicity: usize,
    /// `None` when the loop is not a critical circle and the fiber has
    /// transverse directions.
    pub transverse_index: Option<usize>,
    pub nondegenerate: bool,
}

impl GeodesicString {
    /// `(-1)^(index) / mult`, or `None` when the string does not contribute
    /// a well-defined term.
    pub fn contribution(&self) -> Option<Rational> {
        if !self.nondegenerate {
            return None;
        }
        let total = self.morse_index + self.transverse_index?;
        let sign = if total.is_multiple_of(2) { 1 } else { -1 };
        Some(Rational::new(sign, self.multiplicity as i64))
    }
}

/// Where a candidate loop came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartKind {
    /// Circle at a root of `f'`.
    CriticalSeed { x: f64 },
    /// Multi-start lattice circle.
    Lattice { x: f64 },
    /// Loop handed in by the caller (continuation).
    Prior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartRecord {
    pub start: StartKind,
    pub status: SolveStatus,
    pub final_length: f64,
    pub final_mean_x: f64,
    pub iterations: usize,
    /// Index into [`CensusReport::strings`] of the string this start
    /// produced or duplicated.
    pub string: Option<usize>,
    pub duplicate: bool,
    pub length_monotone: bool,
    pub trace_lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusReport {
    pub strings: Vec<GeodesicString>,
    pub fuller: Option<Rational>,
    pub regular: bool,
    pub samples: usize,
    pub dedup_tol: f64,
    pub starts: Vec<StartRecord>,
}

impl CensusReport {
    pub fn escaped_starts(&self) -> impl Iterator<Item = &StartRecord> {
        self.starts.iter().filter(|s| s.status == SolveStatus::Escaped)
    }
}

/// Roots of `f'` on the window grid: sign changes refined by bisection and
/// Newton, plus exact grid zeros (one per run of consecutive zeros).
pub fn critical_points(g: &WarpedMetric) -> Result<Vec<f64>, GeometryError> {
    let grid = g.window().grid(g.window().grid_n);
    let d1 = |x: f64| g.jet(x).map(|j| j[1]);
    let mut roots = Vec::new();
    let vals: Vec<f64> = grid.iter().map(|&x| d1(x)).collect::<Result<_, _>>()?;
    let mut i = 0;
    while i < grid.len() {
        if vals[i] == 0.0 {
            let start = i;
            while i + 1 < grid.len() && vals[i + 1] == 0.0 {
                i += 1;
            }
            roots.push(grid[(start + i) / 2]);
            i += 1;
            continue;
        }
        if i + 1 < grid.len() && vals[i + 1] != 0.0 && vals[i].signum() != vals[i + 1].signum() {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            let mut flo = vals[i];
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = d1(mid)?;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let mut x = 0.5 * (lo + hi);
            // Polish with Newton on f' using f''.
            for _ in 0..4 {
                let [_, f1, f2] = g.jet(x)?;
                if f2 == 0.0 || f1 == 0.0 {
                    break;
                }
                let next = x - f1 / f2;
                if !(next >= grid[i] && next <= grid[i + 1]) {
                    break;
                }
                x = next;
            }
            roots.push(x);
        }
        i += 1;
    }
    Ok(roots)
}

/// Number of integers `k` with `(2 pi k / length)^2 < curvature`, counting
/// `k = 0` once and each `|k| >= 1` twice.
pub fn jacobi_negative_modes(length: f64, curvature: f64) -> usize {
    if !(curvature > 0.0) {
        return 0;
    }
    let bound = length * libm::sqrt(curvature) / TAU;
    let mut k = 0usize;
    while ((k + 1) as f64) < bound {
        k += 1;
    }
    1 + 2 * k
}

/// True when some Jacobi mode sits within `tol` (relative) of zero.
fn jacobi_has_zero_mode(length: f64, curvature: f64, tol: f64) -> bool {
    if !(curvature >= 0.0) {
        return false;
    }
    let bound = length * libm::sqrt(curvature) / TAU;
    let k = libm::round(bound);
    let mode = (TAU * k / length) * (TAU * k / length);
    (mode - curvature).abs() <= tol * curvature.max(1.0)
}

/// Morse index and nullity of a critical loop from the inertia of the
/// discrete energy Hessian.
pub fn morse_index(g: &WarpedMetric, lp: &DiscreteLoop, opts: &SolveOptions) -> Result<(usize, usize), CensusError> {
    let grad = loops::gradient(g, lp)?;
    let gnorm = libm::sqrt(grad.iter().map(|v| v * v).sum());
    if gnorm > opts.tol_grad_for(lp.n()) {
        return Err(CensusError::NotCritical(gnorm));
    }
    let inertia = hessian_inertia(g, lp, opts)?;
    Ok((inertia.negative, inertia.zero))
}

fn hessian_inertia(g: &WarpedMetric, lp: &DiscreteLoop, opts: &SolveOptions) -> Result<Inertia, CensusError> {
    let h = loops::hessian(g, lp)?;
    let tol = opts.tol_zero_for(&h);
    Ok(linalg::inertia(&h, tol, Some(&loops::banded_ordering(lp.n()))).0)
}

fn wrap(d: f64, period: f64) -> f64 {
    d - period * libm::round(d / period)
}

/// Cover degree of a closed loop: the largest `d` dividing both `n` and
/// `|w|` such that shifting by `n/d` samples moves no sample by more than
/// `tol`.
pub fn multiplicity(lp: &DiscreteLoop, tol: f64) -> usize {
    let n = lp.n();
    let w = lp.class().winding().unsigned_abs() as usize;
    let l = lp.fiber_length();
    let mut best = 1;
    for d in 2..=w.min(n) {
        if !w.is_multiple_of(d) || !n.is_multiple_of(d) {
            continue;
        }
        let shift = n / d;
        let fits = (0..n).all(|i| {
            let dx = lp.xs()[(i + shift) % n] - lp.xs()[i];
            let dth = wrap(lp.lifted_theta(i + shift) - lp.thetas()[i], l);
            libm::sqrt(dx * dx + dth * dth) <= tol
        });
        if fits {
            best = d;
        }
    }
    best
}

/// Phase of a loop relative to uniform spacing, used to quotient by the
/// fiber rotation before comparing loops.
fn phase(lp: &DiscreteLoop) -> f64 {
    let n = lp.n();
    let step = lp.closure() / n as f64;
    lp.thetas()
        .iter()
        .enumerate()
        .map(|(i, t)| t - step * i as f64)
        .sum::<f64>()
        / n as f64
}

/// Minimum over cyclic shifts of the largest pointwise distance, with
/// `theta` taken modulo the fiber length and rotation phase removed.
pub fn loop_distance(a: &DiscreteLoop, b: &DiscreteLoop) -> f64 {
    let n = a.n();
    if n != b.n() || a.class() != b.class() {
        return f64::INFINITY;
    }
    let l = a.fiber_length();
    let (pa, pb) = (phase(a), phase(b));
    (0..n)
        .map(|shift| {
            let mut worst = 0.0f64;
            for i in 0..n {
                let dx = b.xs()[(i + shift) % n] - a.xs()[i];
                let dth = wrap((b.lifted_theta(i + shift) - pb) - (a.thetas()[i] - pa), l);
                worst = worst.max(libm::sqrt(dx * dx + dth * dth));
                if worst.is_nan() {
                    return f64::INFINITY;
                }
            }
            worst
        })
        .fold(f64::INFINITY, f64::min)
}

fn is_circle(lp: &DiscreteLoop, tol: f64) -> bool {
    lp.max_x() - lp.min_x() <= tol
}

/// Index contribution of the transverse fiber directions at a critical
/// circle: `m` times the number of Jacobi modes below the fiber-plane
/// curvature.
pub fn transverse_index(g: &WarpedMetric, s: &GeodesicString, tol: f64) -> Result<usize, CensusError> {
    let m = g.fiber().transverse_dim() as usize;
    if m == 0 {
        return Ok(0);
    }
    transverse_modes(g, &s.representative, s.length, tol).map(|(count, _)| m * count)
}

fn transverse_modes(g: &WarpedMetric, lp: &DiscreteLoop, length: f64, tol: f64) -> Result<(usize, bool), CensusError> {
    if !is_circle(lp, tol) {
        return Err(CensusError::NotCriticalCircle);
    }
    let x0 = lp.mean_x();
    let [f, f1, _] = g.jet(x0).map_err(GeometryError::from)?;
    if f1.abs() > 1e-8 * (1.0 + f.abs()) {
        return Err(CensusError::NotCriticalCircle);
    }
    let k_perp = g.fiber_plane_curvature(x0)?;
    Ok((
        jacobi_negative_modes(length, k_perp),
        jacobi_has_zero_mode(length, k_perp, 1e-9),
    ))
}

/// `sum (-1)^(index) / mult` over nondegenerate strings.
pub fn fuller_sum(strings: &[GeodesicString]) -> Result<Rational, CensusError> {
    let mut total = Rational::from_integer(0);
    let mut undefined = 0;
    for s in strings {
        match s.contribution() {
            Some(c) => total += c,
            None => undefined += 1,
        }
    }
    if undefined > 0 {
        Err(CensusError::Undefined(undefined))
    } else {
        Ok(total)
    }
}

fn build_string(g: &WarpedMetric, out: &SolveOutcome, opts: &CensusOptions) -> Result<GeodesicString, CensusError> {
    let lp = out.curve.clone();
    let tol = opts.dedup_tol_for(lp.fiber_length());
    let inertia = match out.inertia {
        Some(i) => i,
        None => hessian_inertia(g, &lp, &opts.solver)?,
    };
    let mut nondegenerate = inertia.zero == 1;
    let transverse_index = if g.fiber().transverse_dim() == 0 {
        Some(0)
    } else {
        match transverse_modes(g, &lp, out.length, tol) {
            Ok((count, zero_mode)) => {
                if zero_mode {
                    nondegenerate = false;
                }
                Some(g.fiber().transverse_dim() as usize * count)
            }
            Err(CensusError::NotCriticalCircle) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(GeodesicString {
        multiplicity: multiplicity(&lp, tol),
        x0: lp.mean_x(),
        length: out.length,
        morse_index: inertia.negative,
        nullity: inertia.zero,
        transverse_index,
        nondegenerate,
        representative: lp,
    })
}

/// Finds every geodesic string in the class with the default search.
pub fn enumerate(g: &WarpedMetric, class: HomotopyClass, opts: &CensusOptions) -> Result<CensusReport, CensusError> {
    enumerate_with_prior(g, class, opts, Vec::new())
}

/// As [`enumerate`], with already-solved outcomes (for example from
/// continuation) merged in ahead of the search.
pub fn enumerate_with_prior(
    g: &WarpedMetric,
    class: HomotopyClass,
    opts: &CensusOptions,
    prior: Vec<SolveOutcome>,
) -> Result<CensusReport, CensusError> {
    let n = opts.samples_for(class);
    let l = g.fiber().length();
    let dedup_tol = opts.dedup_tol_for(l);
    let a = g.window().half_width;

    let mut outcomes: Vec<(StartKind, SolveOutcome)> = Vec::new();
    for out in prior {
        if out.curve.n() == n && out.curve.class() == class {
            outcomes.push((StartKind::Prior, out));
        }
    }
    for x in critical_points(g)? {
        let init = DiscreteLoop::circle(n, x, class, l)?;
        let out = match loops::refine_newton(g, &init, &opts.solver) {
            Ok(o) if o.status != SolveStatus::MaxIter => o,
            Ok(_) | Err(SolveError::Precondition { .. }) => loops::minimize(g, &init, &opts.solver)?,
            Err(e) => return Err(e.into()),
        };
        outcomes.push((StartKind::CriticalSeed { x }, out));
    }
    let starts = opts.starts.max(1);
    for k in 0..starts {
        let x = if starts == 1 {
            0.0
        } else {
            -a + 2.0 * a * k as f64 / (starts - 1) as f64
        };
        let init = DiscreteLoop::circle(n, x, class, l)?;
        outcomes.push((StartKind::Lattice { x }, loops::minimize(g, &init, &opts.solver)?));
    }

    // Distinct critical loops in discovery order, then sorted by position.
    let mut found: Vec<(SolveOutcome, Vec<usize>)> = Vec::new();
    let mut records = Vec::with_capacity(outcomes.len());
    for (idx, (start, out)) in outcomes.iter().enumerate() {
        let critical = matches!(out.status, SolveStatus::Converged | SolveStatus::Degenerate);
        let mut duplicate = false;
        if critical {
            match found
                .iter_mut()
                .find(|(f, _)| loop_distance(&f.curve, &out.curve) <= dedup_tol)
            {
                Some((_, members)) => {
                    members.push(idx);
                    duplicate = true;
                }
                None => found.push((out.clone(), alloc::vec![idx])),
            }
        }
        records.push(StartRecord {
            start: *start,
            status: out.status,
            final_length: out.length,
            final_mean_x: out.curve.mean_x(),
            iterations: out.iterations,
            string: None,
            duplicate,
            length_monotone: out.trace.windows(2).all(|p| p[1].length <= p[0].length),
            trace_lengths: out.trace.iter().map(|t| t.length).collect(),
        });
    }
    found.sort_by(|(a, _), (b, _)| {
        a.curve
            .mean_x()
            .total_cmp(&b.curve.mean_x())
            .then(a.length.total_cmp(&b.length))
    });
    let mut strings = Vec::with_capacity(found.len());
    for (pos, (out, members)) in found.iter().enumerate() {
        strings.push(build_string(g, out, opts)?);
        for &m in members {
            records[m].string = Some(pos);
        }
    }
    let regular = strings.iter().all(|s| s.contribution().is_some());
    let fuller = if regular { Some(fuller_sum(&strings)?) } else { None };
    Ok(CensusReport {
        strings,
        fuller,
        regular,
        samples: n,
        dedup_tol,
        starts: records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ProfileExpr;
    use crate::geometry::{FiberModel, Window};
    use alloc::vec;

    fn metric_with(text: &str, fiber: FiberModel) -> WarpedMetric {
        WarpedMetric::new(
            ProfileExpr::parse(text).unwrap(),
            fiber,
            Window::new(4.0, 401, vec![10.0, 20.0, 40.0]).unwrap(),
        )
        .unwrap()
    }

    fn metric(text: &str) -> WarpedMetric {
        metric_with(text, FiberModel::circle(TAU).unwrap())
    }

    fn class(w: i32) -> HomotopyClass {
        HomotopyClass::new(w).unwrap()
    }

    fn opts(n: usize) -> CensusOptions {
        CensusOptions {
            n_points: n,
            ..CensusOptions::default()
        }
    }

    #[test]
    fn critical_points_of_double_well() {
        let roots = critical_points(&metric("(x^2-1)^2 + 1/2")).unwrap();
        assert_eq!(roots.len(), 3);
        for (r, e) in roots.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((r - e).abs() < 1e-12, "{r}");
        }
        assert!(critical_points(&metric("exp(x)")).unwrap().is_empty());
        // Constant profiles give one seed per run of grid zeros.
        assert_eq!(critical_points(&metric("2")).unwrap().len(), 1);
    }

    #[test]
    fn jacobi_mode_counts() {
        assert_eq!(jacobi_negative_modes(3.0 * core::f64::consts::PI, 8.0 / 3.0), 5);
        assert_eq!(jacobi_negative_modes(TAU, 1.0), 1);
        assert_eq!(jacobi_negative_modes(TAU, -2.0), 0);
        assert_eq!(jacobi_negative_modes(TAU, 4.0), 3);
        assert!(jacobi_has_zero_mode(TAU, 1.0, 1e-9));
        assert!(!jacobi_has_zero_mode(TAU, 1.5, 1e-9));
    }

    #[test]
    fn multiplicity_of_covers() {
        for w in 1..=3 {
            let lp = DiscreteLoop::circle(48, 0.0, class(w), TAU).unwrap();
            assert_eq!(multiplicity(&lp, 1e-5), w as usize);
        }
        // A perturbed double cover is primitive.
        let lp = DiscreteLoop::circle(48, 0.0, class(2), TAU).unwrap();
        let bumped = lp.perturbed(5, 0.1);
        assert_eq!(multiplicity(&bumped, 1e-5), 1);
    }

    #[test]
    fn loop_distance_quotients_shifts_and_rotation() {
        let lp = DiscreteLoop::circle(32, 0.2, class(1), TAU).unwrap();
        assert!(loop_distance(&lp, &lp.cyclic_shift(7)) < 1e-12);
        let rotated = DiscreteLoop::new(
            lp.xs().to_vec(),
            lp.thetas().iter().map(|t| t + 0.123).collect(),
            class(1),
            TAU,
        )
        .unwrap();
        assert!(loop_distance(&lp, &rotated) < 1e-12);
        let other = DiscreteLoop::circle(32, 0.3, class(1), TAU).unwrap();
        assert!((loop_distance(&lp, &other) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn fuller_sum_examples() {
        let lp = DiscreteLoop::circle(16, 0.0, class(1), TAU).unwrap();
        let s = |index, mult| GeodesicString {
            representative: lp.clone(),
            length: TAU,
            x0: 0.0,
            morse_index: index,
            nullity: 1,
            multiplicity: mult,
            transverse_index: Some(0),
            nondegenerate: true,
        };
        assert_eq!(fuller_sum(&[s(0, 1)]).unwrap(), Rational::from_integer(1));
        assert_eq!(fuller_sum(&[]).unwrap(), Rational::from_integer(0));
        assert_eq!(fuller_sum(&[s(0, 2)]).unwrap(), Rational::new(1, 2));
        assert_eq!(
            fuller_sum(&[s(0, 1), s(5, 1), s(0, 1)]).unwrap(),
            Rational::from_integer(1)
        );
        let mut bad = s(0, 1);
        bad.nondegenerate = false;
        bad.nullity = 2;
        assert_eq!(fuller_sum(&[bad]), Err(CensusError::Undefined(1)));
    }

    #[test]
    fn census_of_g1() {
        let report = enumerate(&metric("x^2+1"), class(1), &opts(64)).unwrap();
        assert_eq!(report.strings.len(), 1);
        let s = &report.strings[0];
        assert!(s.x0.abs() < 1e-9);
        assert_eq!((s.morse_index, s.nullity, s.multiplicity), (0, 1, 1));
        assert_eq!(report.fuller, Some(Rational::from_integer(1)));
    }

    #[test]
    fn census_of_g0_is_empty() {
        let report = enumerate(&metric("exp(x)"), class(1), &opts(64)).unwrap();
        assert!(report.strings.is_empty());
        assert_eq!(report.fuller, Some(Rational::from_integer(0)));
        assert!(report.starts.iter().all(|s| s.status == SolveStatus::Escaped));
    }

    #[test]
    fn census_of_double_well() {
        let report = enumerate(&metric("(x^2-1)^2 + 1/2"), class(1), &opts(64)).unwrap();
        let xs: Vec<f64> = report.strings.iter().map(|s| s.x0).collect();
        assert_eq!(xs.len(), 3, "{xs:?}");
        let idx: Vec<usize> = report.strings.iter().map(|s| s.morse_index).collect();
        assert_eq!(idx, vec![0, 5, 0]);
        assert_eq!(report.fuller, Some(Rational::from_integer(1)));
    }

    #[test]
    fn flat_census_is_irregular() {
        let report = enumerate(&metric("1"), class(1), &CensusOptions { starts: 3, ..opts(32) }).unwrap();
        assert!(!report.regular);
        assert!(report.fuller.is_none());
        assert!(report.strings.iter().all(|s| s.nullity == 2));
    }

    #[test]
    fn transverse_index_examples() {
        let neg = metric_with(
            "x^2+1",
            FiberModel::AbstractGeodesic {
                length: TAU,
                transverse_dim: 2,
                transverse_curvature: -1.0,
            },
        );
        let report = enumerate(&neg, class(1), &opts(32)).unwrap();
        assert_eq!(report.strings.len(), 1);
        assert_eq!(transverse_index(&neg, &report.strings[0], 1e-5).unwrap(), 0);
        assert_eq!(report.fuller, Some(Rational::from_integer(1)));

        let circle = metric("x^2+1");
        let s = &enumerate(&circle, class(1), &opts(32)).unwrap().strings[0];
        assert_eq!(transverse_index(&circle, s, 1e-5).unwrap(), 0);

        // f = 1 with k_perp = 1 on a loop of length 2 pi: k = 0 only.
        let sphere_like = metric_with(
            "1",
            FiberModel::AbstractGeodesic {
                length: TAU,
                transverse_dim: 3,
                transverse_curvature: 1.0,
            },
        );
        let lp = DiscreteLoop::circle(32, 0.0, class(1), TAU).unwrap();
        let s = GeodesicString {
            representative: lp,
            length: TAU,
            x0: 0.0,
            morse_index: 0,
            nullity: 2,
            multiplicity: 1,
            transverse_index: None,
            nondegenerate: false,
        };
        assert_eq!(transverse_index(&sphere_like, &s, 1e-5).unwrap(), 3);

        let off_circle = s.representative.perturbed(3, 0.5);
        let bent = GeodesicString {
            representative: off_circle,
            ..s
        };
        assert_eq!(
            transverse_index(&sphere_like, &bent, 1e-5),
            Err(CensusError::NotCriticalCircle)
        );
    }
}
