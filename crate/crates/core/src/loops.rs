//! Discrete loop space on the universal cover of the cylinder over a fiber
//! geodesic.
//!
//! A loop is `n` samples `(x_i, theta_i)`, with `theta` the lifted fiber
//! arc length. Closing the loop adds `w * l` to `theta` (`w` the winding
//! number, `l` the fiber geodesic length). The discrete energy
//!
//! ```text
//! E = (n/2) * sum_i [ dx_i^2 + f(xm_i)^2 dtheta_i^2 ],   xm_i = (x_i + x_{i+1}) / 2
//! ```
//!
//! has constant-speed closed geodesics as critical points. Vectors over the
//! loop use the layout `[x_0 .. x_{n-1}, theta_0 .. theta_{n-1}]`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::expr::EvalError;
use crate::geometry::WarpedMetric;
use crate::linalg::{self, Inertia, LinalgError, SymMatrix};

pub const MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LoopError {
    #[error("winding number must be nonzero")]
    TrivialClass,
    #[error("a loop needs at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("x and theta sample counts differ")]
    LengthMismatch,
    #[error("loop coordinates must be finite")]
    NonFinite,
    #[error("fiber length must be positive")]
    BadFiberLength,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error("gradient norm {grad_norm} exceeds the Newton switch threshold {switch_tol}")]
    Precondition { grad_norm: f64, switch_tol: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl From<EvalError> for SolveError {
    fn from(e: EvalError) -> Self {
        SolveError::Loop(LoopError::Eval(e))
    }
}

/// Free homotopy class `w` times around the fiber geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HomotopyClass {
    winding: i32,
}

impl HomotopyClass {
    pub fn new(winding: i32) -> Result<Self, LoopError> {
        if winding == 0 {
            Err(LoopError::TrivialClass)
        } else {
            Ok(Self { winding })
        }
    }

    pub fn winding(&self) -> i32 {
        self.winding
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLoop {
    xs: Vec<f64>,
    thetas: Vec<f64>,
    class: HomotopyClass,
    /// `theta_n - theta_0 = w * l`, fixed at construction.
    closure: f64,
}

impl DiscreteLoop {
    pub fn new(xs: Vec<f64>, thetas: Vec<f64>, class: HomotopyClass, fiber_length: f64) -> Result<Self, LoopError> {
        if xs.len() != thetas.len() {
            return Err(LoopError::LengthMismatch);
        }
        if xs.len() < MIN_SAMPLES {
            return Err(LoopError::TooFewSamples(xs.len()));
        }
        if !(fiber_length > 0.0 && fiber_length.is_finite()) {
            return Err(LoopError::BadFiberLength);
        }
        if xs.iter().chain(&thetas).any(|v| !v.is_finite()) {
            return Err(LoopError::NonFinite);
        }
        let closure = f64::from(class.winding) * fiber_length;
        Ok(Self {
            xs,
            thetas,
            class,
            closure,
        })
    }

    /// The constant-`x` loop with uniformly spaced `theta`, starting at 0.
    pub fn circle(n: usize, x: f64, class: HomotopyClass, fiber_length: f64) -> Result<Self, LoopError> {
        let step = f64::from(class.winding) * fiber_length / n as f64;
        let thetas = (0..n).map(|i| step * i as f64).collect();
        Self::new(vec![x; n], thetas, class, fiber_length)
    }

    pub fn n(&self) -> usize {
        self.xs.len()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn class(&self) -> HomotopyClass {
        self.class
    }

    pub fn closure(&self) -> f64 {
        self.closure
    }

    pub fn fiber_length(&self) -> f64 {
        self.closure / f64::from(self.class.winding)
    }

    /// `theta` of sample `i` in the lift continuing past sample `n - 1`.
    pub fn lifted_theta(&self, i: usize) -> f64 {
        let n = self.n();
        let wraps = (i / n) as f64;
        self.thetas[i % n] + wraps * self.closure
    }

    pub fn mean_x(&self) -> f64 {
        self.xs.iter().sum::<f64>() / self.n() as f64
    }

    pub fn min_x(&self) -> f64 {
        self.xs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_x(&self) -> f64 {
        self.xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The same closed curve with its samples relabelled: new sample `i`
    /// is old sample `i + k`.
    pub fn cyclic_shift(&self, k: usize) -> DiscreteLoop {
        let n = self.n();
        let k = k % n;
        let xs = (0..n).map(|i| self.xs[(i + k) % n]).collect();
        let thetas = (0..n).map(|i| self.lifted_theta(i + k)).collect();
        DiscreteLoop {
            xs,
            thetas,
            class: self.class,
            closure: self.closure,
        }
    }

    /// Coordinates as one vector in the solver layout.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.xs.clone();
        v.extend_from_slice(&self.thetas);
        v
    }

    fn add_scaled(&self, delta: &[f64], scale: f64) -> DiscreteLoop {
        let n = self.n();
        let mut out = self.clone();
        for i in 0..n {
            out.xs[i] += scale * delta[i];
            out.thetas[i] += scale * delta[n + i];
        }
        out
    }

    /// Perturbs one coordinate in the solver layout.
    pub fn perturbed(&self, index: usize, h: f64) -> DiscreteLoop {
        let mut out = self.clone();
        let n = self.n();
        if index < n {
            out.xs[index] += h;
        } else {
            out.thetas[index - n] += h;
        }
        out
    }

    fn segment(&self, i: usize) -> (f64, f64, f64) {
        let n = self.n();
        let j = (i + 1) % n;
        let next_theta = if j == 0 {
            self.thetas[0] + self.closure
        } else {
            self.thetas[j]
        };
        let dx = self.xs[j] - self.xs[i];
        let dth = next_theta - self.thetas[i];
        (dx, dth, 0.5 * (self.xs[i] + self.xs[j]))
    }
}

/// Discrete Dirichlet energy.
pub fn energy(g: &WarpedMetric, lp: &DiscreteLoop) -> Result<f64, LoopError> {
    let n = lp.n();
    let mut sum = 0.0;
    for i in 0..n {
        let (dx, dth, mid) = lp.segment(i);
        let f = g.profile().eval(mid)?;
        sum += dx * dx + f * f * dth * dth;
    }
    Ok(0.5 * n as f64 * sum)
}

/// Length of the polygon with midpoint metric coefficients.
pub fn length(g: &WarpedMetric, lp: &DiscreteLoop) -> Result<f64, LoopError> {
    let mut sum = 0.0;
    for i in 0..lp.n() {
        let (dx, dth, mid) = lp.segment(i);
        let f = g.profile().eval(mid)?;
        sum += libm::sqrt(dx * dx + f * f * dth * dth);
    }
    Ok(sum)
}

/// Exact gradient of [`energy`].
pub fn gradient(g: &WarpedMetric, lp: &DiscreteLoop) -> Result<Vec<f64>, LoopError> {
    let n = lp.n();
    let nf = n as f64;
    let mut grad = vec![0.0; 2 * n];
    for i in 0..n {
        let j = (i + 1) % n;
        let (dx, dth, mid) = lp.segment(i);
        let [f, f1, _] = g.jet(mid)?;
        let big_f = f * f;
        let big_f1 = 2.0 * f * f1;
        let mid_term = 0.25 * nf * dth * dth * big_f1;
        grad[i] += -nf * dx + mid_term;
        grad[j] += nf * dx + mid_term;
        grad[n + i] -= nf * big_f * dth;
        grad[n + j] += nf * big_f * dth;
    }
    Ok(grad)
}

/// Exact Hessian of [`energy`], `2n x 2n`.
pub fn hessian(g: &WarpedMetric, lp: &DiscreteLoop) -> Result<SymMatrix, LoopError> {
    let n = lp.n();
    let nf = n as f64;
    let mut h = SymMatrix::zeros(2 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        let (_, dth, mid) = lp.segment(i);
        let [f, f1, f2] = g.jet(mid)?;
        let big_f = f * f;
        let big_f1 = 2.0 * f * f1;
        let big_f2 = 2.0 * (f1 * f1 + f * f2);
        let (xi, xj, ti, tj) = (i, j, n + i, n + j);

        let curv = 0.125 * nf * dth * dth * big_f2;
        h.add(xi, xi, nf + curv);
        h.add(xj, xj, nf + curv);
        h.add(xi, xj, -nf + curv);

        let stiff = nf * big_f;
        h.add(ti, ti, stiff);
        h.add(tj, tj, stiff);
        h.add(ti, tj, -stiff);

        let mixed = 0.5 * nf * big_f1 * dth;
        for x in [xi, xj] {
            h.add(x, ti, -mixed);
            h.add(x, tj, mixed);
        }
    }
    Ok(h)
}

/// Ordering of the solver variables under which loop Hessians are banded:
/// samples are visited `0, n-1, 1, n-2, ...` so cycle neighbours stay
/// within two positions.
pub fn banded_ordering(n: usize) -> Vec<usize> {
    let mut nodes = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0usize, n - 1);
    while lo < hi {
        nodes.push(lo);
        nodes.push(hi);
        lo += 1;
        hi -= 1;
    }
    if lo == hi {
        nodes.push(lo);
    }
    nodes.iter().flat_map(|&k| [k, n + k]).collect()
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|t| t * t).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Final gradient tolerance; `1e-12 * n` when unset.
    pub tol_grad: Option<f64>,
    /// Gradient norm at which descent hands over to Newton.
    pub switch_tol: f64,
    /// Zero-eigenvalue threshold relative to the largest Hessian diagonal.
    pub tol_zero_rel: f64,
    pub max_iter: usize,
    pub max_newton: usize,
    /// Length below which a loop outside the window counts as collapsed;
    /// `1e-4 * l * |w|` when unset.
    pub eps_len: Option<f64>,
    /// Descent iterations between window-exit checkpoints.
    pub checkpoint_every: usize,
    /// Cap on the max-norm of a single Newton step.
    pub max_newton_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_grad: None,
            switch_tol: 1e-3,
            tol_zero_rel: 1e-8,
            max_iter: 20_000,
            max_newton: 60,
            eps_len: None,
            checkpoint_every: 50,
            max_newton_step: 1.0,
        }
    }
}

impl SolveOptions {
    pub fn tol_grad_for(&self, n: usize) -> f64 {
        self.tol_grad.unwrap_or(1e-12 * n as f64)
    }

    pub fn eps_len_for(&self, lp: &DiscreteLoop) -> f64 {
        self.eps_len.unwrap_or(1e-4 * lp.closure().abs())
    }

    pub fn tol_zero_for(&self, h: &SymMatrix) -> f64 {
        self.tol_zero_rel * h.max_abs_diag().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Escaped,
    /// A critical loop whose Hessian has more than one zero mode.
    Degenerate,
    MaxIter,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Escaped => "escaped",
            SolveStatus::Degenerate => "degenerate",
            SolveStatus::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub length: f64,
    pub min_x: f64,
    pub max_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub curve: DiscreteLoop,
    pub energy: f64,
    pub length: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub trace: Vec<TracePoint>,
    /// Hessian inertia at the final loop, for critical outcomes.
    pub inertia: Option<Inertia>,
}

fn trace_point(lp: &DiscreteLoop, length: f64) -> TracePoint {
    TracePoint {
        length,
        min_x: lp.min_x(),
        max_x: lp.max_x(),
    }
}

fn collapsed(g: &WarpedMetric, lp: &DiscreteLoop, len: f64, eps_len: f64) -> bool {
    let a = g.window().half_width;
    len < eps_len && (lp.min_x() < -a || lp.max_x() > a)
}

fn hessian_inertia(g: &WarpedMetric, lp: &DiscreteLoop, opts: &SolveOptions) -> Result<Inertia, LoopError> {
    let h = hessian(g, lp)?;
    let tol = opts.tol_zero_for(&h);
    Ok(linalg::inertia(&h, tol, Some(&banded_ordering(lp.n()))).0)
}

fn outcome(
    g: &WarpedMetric,
    status: SolveStatus,
    lp: DiscreteLoop,
    grad_norm: f64,
    trace: Vec<TracePoint>,
    newton_steps: usize,
    inertia: Option<Inertia>,
) -> Result<SolveOutcome, SolveError> {
    Ok(SolveOutcome {
        status,
        energy: energy(g, &lp)?,
        length: length(g, &lp)?,
        grad_norm,
        iterations: trace.len(),
        newton_steps,
        trace,
        inertia,
        curve: lp,
    })
}

/// Newton refinement near a critical loop. The rotation mode
/// `theta -> theta + c` is removed by pinning `theta_0` in the linear solve
/// and then subtracting the mean `theta` increment.
pub fn refine_newton(g: &WarpedMetric, init: &DiscreteLoop, opts: &SolveOptions) -> Result<SolveOutcome, SolveError> {
    let grad = gradient(g, init)?;
    let grad_norm = norm(&grad);
    if !(grad_norm <= opts.switch_tol) {
        return Err(SolveError::Precondition {
            grad_norm,
            switch_tol: opts.switch_tol,
        });
    }
    newton_loop(g, init.clone(), grad, opts)
}

fn newton_loop(
    g: &WarpedMetric,
    mut lp: DiscreteLoop,
    mut grad: Vec<f64>,
    opts: &SolveOptions,
) -> Result<SolveOutcome, SolveError> {
    let n = lp.n();
    let tol_grad = opts.tol_grad_for(n);
    let eps_len = opts.eps_len_for(&lp);
    let ordering = banded_ordering(n);
    let mut gnorm = norm(&grad);
    let blowup = 1e3 * gnorm.max(opts.switch_tol);
    let mut steps: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    for it in 0..=opts.max_newton {
        let len = length(g, &lp)?;
        trace.push(trace_point(&lp, len));
        if collapsed(g, &lp, len, eps_len) {
            return outcome(g, SolveStatus::Escaped, lp, gnorm, trace, steps.len(), None);
        }
        let contracting = match steps.as_slice() {
            [] => true,
            [.., last] if *last <= 1e-8 => true,
            [.., prev, last] => *last <= 0.5 * prev,
            _ => false,
        };
        if gnorm <= tol_grad && contracting {
            let inertia = hessian_inertia(g, &lp, opts)?;
            let status = if inertia.zero > 1 {
                SolveStatus::Degenerate
            } else {
                SolveStatus::Converged
            };
            return outcome(g, status, lp, gnorm, trace, steps.len(), Some(inertia));
        }
        if it == opts.max_newton || !gnorm.is_finite() || gnorm > blowup {
            break;
        }
        let mut h = hessian(g, &lp)?;
        let pin = n;
        for k in 0..2 * n {
            h.set(pin, k, 0.0);
        }
        h.set(pin, pin, 1.0);
        let mut rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
        rhs[pin] = 0.0;
        let mut delta = match linalg::solve_banded(&h, &rhs, &ordering) {
            Ok(d) => d,
            Err(LinalgError::Singular { .. }) => {
                let inertia = hessian_inertia(g, &lp, opts)?;
                if inertia.zero > 1 {
                    return outcome(g, SolveStatus::Degenerate, lp, gnorm, trace, steps.len(), Some(inertia));
                }
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let mean_theta = delta[n..].iter().sum::<f64>() / n as f64;
        for d in &mut delta[n..] {
            *d -= mean_theta;
        }
        let step = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if step > opts.max_newton_step {
            opts.max_newton_step / step
        } else {
            1.0
        };
        let next = lp.add_scaled(&delta, scale);
        let next_grad = match gradient(g, &next) {
            Ok(gr) => gr,
            Err(LoopError::Eval(_)) => break,
            Err(e) => return Err(e.into()),
        };
        lp = next;
        grad = next_grad;
        gnorm = norm(&grad);
        steps.push(step * scale);
    }
    let len = steps.len();
    outcome(g, SolveStatus::MaxIter, lp, gnorm, trace, len, None)
}

/// Discrete curve shortening: damped descent on the energy, handing over to
/// Newton refinement once the gradient is small.
///
/// Each step solves `(H + mu I) d = -g` with `mu` adapted Levenberg-Marquardt
/// style and accepts it under an Armijo test. Plain gradient flow is too stiff
/// here: its stable step is `O(1/n)` and roundoff in the stiff modes breaks
/// the symmetry of round starts long before the slow modes move.
///
/// Escape is declared when the loop is shorter than `eps_len` while outside
/// the window, or when its mean `x` stays outside the window for three
/// consecutive checkpoints with decreasing length.
pub fn minimize(g: &WarpedMetric, init: &DiscreteLoop, opts: &SolveOptions) -> Result<SolveOutcome, SolveError> {
    let n = init.n();
    let eps_len = opts.eps_len_for(init);
    let half_width = g.window().half_width;
    let ordering = banded_ordering(n);
    let mut nu = 1e-3;
    let mut switch_tol = opts.switch_tol;
    let mut newton_attempts = 0;
    let mut exits = 0;
    let mut last_checkpoint_len = f64::INFINITY;
    let mut lp = init.clone();
    let mut trace = Vec::new();
    let mut newton_steps = 0;

    for iter in 0..opts.max_iter {
        let e = energy(g, &lp)?;
        let grad = gradient(g, &lp)?;
        let gnorm = norm(&grad);
        let len = length(g, &lp)?;
        trace.push(trace_point(&lp, len));
        if collapsed(g, &lp, len, eps_len) {
            return outcome(g, SolveStatus::Escaped, lp, gnorm, trace, newton_steps, None);
        }
        if iter > 0 && iter % opts.checkpoint_every.max(1) == 0 {
            if lp.mean_x().abs() > half_width && len < last_checkpoint_len {
                exits += 1;
            } else {
                exits = 0;
            }
            last_checkpoint_len = len;
            if exits >= 3 {
                return outcome(g, SolveStatus::Escaped, lp, gnorm, trace, newton_steps, None);
            }
        }

        if gnorm <= switch_tol {
            let refined = newton_loop(g, lp.clone(), grad.clone(), opts)?;
            newton_steps += refined.newton_steps;
            if refined.status != SolveStatus::MaxIter {
                let mut out = refined;
                trace.extend(out.trace.drain(1..));
                out.trace = trace;
                out.iterations = iter + out.newton_steps;
                out.newton_steps = newton_steps;
                return Ok(out);
            }
            newton_attempts += 1;
            switch_tol = if newton_attempts >= 3 { 0.0 } else { switch_tol * 1e-2 };
        }

        let h = hessian(g, &lp)?;
        let scale = h.max_abs_diag().max(f64::MIN_POSITIVE);
        let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
        let mut accepted = false;
        while nu < 1e12 {
            let mut shifted = h.clone();
            for i in 0..2 * n {
                shifted.add(i, i, nu * scale);
            }
            let mut delta = match linalg::solve_banded(&shifted, &rhs, &ordering) {
                Ok(d) => d,
                Err(LinalgError::Singular { .. }) => {
                    nu *= 10.0;
                    continue;
                }
                Err(err) => return Err(err.into()),
            };
            let mean_theta = delta[n..].iter().sum::<f64>() / n as f64;
            for d in &mut delta[n..] {
                *d -= mean_theta;
            }
            let slope: f64 = grad.iter().zip(&delta).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                nu *= 10.0;
                continue;
            }
            let step = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let cap = if step > opts.max_newton_step {
                opts.max_newton_step / step
            } else {
                1.0
            };
            let trial = lp.add_scaled(&delta, cap);
            let ok = match energy(g, &trial) {
                Ok(et) => et <= e + 1e-4 * cap * slope,
                Err(_) => false,
            };
            if ok {
                lp = trial;
                nu = (nu / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            nu *= 4.0;
        }
        if !accepted {
            // No descent left at working precision: let Newton decide.
            let mut out = newton_loop(g, lp.clone(), grad, opts)?;
            trace.extend(out.trace.drain(1..));
            out.trace = trace;
            out.newton_steps += newton_steps;
            return Ok(out);
        }
    }
    let grad_norm = norm(&gradient(g, &lp)?);
    outcome(g, SolveStatus::MaxIter, lp, grad_norm, trace, newton_steps, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ProfileExpr;
    use crate::geometry::{FiberModel, Window};
    use core::f64::consts::{PI, TAU};

    fn metric(text: &str) -> WarpedMetric {
        WarpedMetric::new(
            ProfileExpr::parse(text).unwrap(),
            FiberModel::circle(TAU).unwrap(),
            Window::new(8.0, 201, vec![10.0, 20.0, 40.0]).unwrap(),
        )
        .unwrap()
    }

    fn w(k: i32) -> HomotopyClass {
        HomotopyClass::new(k).unwrap()
    }

    #[test]
    fn loop_construction_contracts() {
        assert_eq!(HomotopyClass::new(0), Err(LoopError::TrivialClass));
        assert_eq!(
            DiscreteLoop::circle(4, 0.0, w(1), TAU).unwrap_err(),
            LoopError::TooFewSamples(4)
        );
        let lp = DiscreteLoop::circle(16, 0.5, w(3), 2.0).unwrap();
        assert_eq!(lp.closure(), 6.0);
        assert_eq!(lp.fiber_length(), 2.0);
        assert_eq!(lp.lifted_theta(16), lp.thetas()[0] + 6.0);
    }

    #[test]
    fn energy_of_round_circles() {
        let flat = metric("1");
        let g1 = metric("x^2+1");
        let lp = DiscreteLoop::circle(64, 0.0, w(1), TAU).unwrap();
        for g in [&flat, &g1] {
            assert!((energy(g, &lp).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
            assert!((length(g, &lp).unwrap() - TAU).abs() < 1e-12);
        }
    }

    #[test]
    fn critical_circles_have_zero_gradient() {
        let lp = DiscreteLoop::circle(32, 0.0, w(1), TAU).unwrap();
        for g in [metric("1"), metric("x^2+1")] {
            let grad = gradient(&g, &lp).unwrap();
            assert!(norm(&grad) < 1e-12);
        }
    }

    #[test]
    fn flat_circle_has_two_zero_modes() {
        let g = metric("1");
        let lp = DiscreteLoop::circle(32, 0.3, w(1), TAU).unwrap();
        let inertia = hessian_inertia(&g, &lp, &SolveOptions::default()).unwrap();
        assert_eq!(inertia.zero, 2);
        assert_eq!(inertia.negative, 0);
    }

    #[test]
    fn neck_circle_has_only_rotation_zero_mode() {
        let g = metric("x^2+1");
        let lp = DiscreteLoop::circle(64, 0.0, w(1), TAU).unwrap();
        let inertia = hessian_inertia(&g, &lp, &SolveOptions::default()).unwrap();
        assert_eq!(
            inertia,
            Inertia {
                negative: 0,
                zero: 1,
                positive: 127
            }
        );
    }

    #[test]
    fn hessian_is_banded_under_ordering() {
        let g = metric("x^2+1");
        let lp = DiscreteLoop::circle(20, 0.1, w(1), TAU).unwrap();
        let h = hessian(&g, &lp).unwrap();
        assert!(h.permuted(&banded_ordering(20)).bandwidth() <= 5);
        let odd = DiscreteLoop::circle(21, 0.1, w(1), TAU).unwrap();
        let h = hessian(&g, &odd).unwrap();
        let ord = banded_ordering(21);
        let mut seen = ord.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..42).collect::<Vec<_>>());
        assert!(h.permuted(&ord).bandwidth() <= 5);
    }

    #[test]
    fn minimize_finds_neck_of_g1() {
        let g = metric("x^2+1");
        let init = DiscreteLoop::circle(64, 3.0, w(1), TAU).unwrap();
        let out = minimize(&g, &init, &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert!(out.curve.mean_x().abs() < 1e-9);
        assert!((out.length - TAU).abs() < 1e-9);
        assert!(out.grad_norm <= 1e-12 * 64.0);
    }

    #[test]
    fn minimize_escapes_on_exponential_profile() {
        let g = metric("exp(x)");
        let init = DiscreteLoop::circle(64, 1.0, w(1), TAU).unwrap();
        let out = minimize(&g, &init, &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Escaped);
        assert!(out.length < 1e-4 * TAU);
        assert!(out.trace.windows(2).all(|p| p[1].length <= p[0].length));
    }

    #[test]
    fn flat_cylinder_is_degenerate() {
        let g = metric("1");
        let init = DiscreteLoop::circle(32, 0.5, w(1), TAU).unwrap();
        let out = minimize(&g, &init, &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Degenerate);
        assert_eq!(out.inertia.unwrap().zero, 2);
        let direct = refine_newton(&g, &init, &SolveOptions::default()).unwrap();
        assert_eq!(direct.status, SolveStatus::Degenerate);
    }

    #[test]
    fn refine_newton_rejects_far_loops() {
        let g = metric("x^2+1");
        let init = DiscreteLoop::circle(32, 2.0, w(1), TAU).unwrap();
        assert!(matches!(
            refine_newton(&g, &init, &SolveOptions::default()),
            Err(SolveError::Precondition { .. })
        ));
    }

    #[test]
    fn refine_newton_converges_quickly_near_neck() {
        let g = metric("x^2+1");
        let n = 128;
        let init = DiscreteLoop::circle(n, 1e-4, w(1), TAU).unwrap();
        let out = refine_newton(&g, &init, &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert!(out.grad_norm <= 1e-12 * n as f64);
        assert!(out.newton_steps <= 8);
    }
}
