//! Warped-product metrics `dx^2 + f(x)^2 g_Y` over the real line.
//!
//! Two families of sectional curvature are available in closed form:
//! planes containing `d/dx` have `K = -f''/f`, planes tangent to the fiber
//! (spanned by the fiber geodesic and a transverse fiber direction) have
//! `K = (k_perp - f'^2) / f^2`.

use alloc::vec::Vec;

use thiserror::Error;

use crate::expr::{EvalError, ExprError, Order, ProfileExpr};

/// Curvature values within this of zero count as zero for sign decisions.
pub const TOL_CURV: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("profile is not positive at x = {x} (f = {value})")]
    NonPositiveProfile { x: f64, value: f64 },
    #[error("invalid fiber: {0}")]
    InvalidFiber(&'static str),
    #[error("invalid window: {0}")]
    InvalidWindow(&'static str),
    #[error("x = {x} lies outside the certified region [-{radius}, {radius}]")]
    OutsideRegion { x: f64, radius: f64 },
    #[error("fiber-plane curvature needs a transverse fiber dimension of at least 1")]
    NoTransverseDirections,
    #[error("metrics have different fibers or windows")]
    Mismatched,
}

/// The fiber `Y`, reduced to what the cylinder over a closed geodesic sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiberModel {
    /// `Y = S^1` of the given circumference.
    Circle { length: f64 },
    /// A closed geodesic of `Y` with `transverse_dim` normal directions in
    /// which `Y` has constant sectional curvature `transverse_curvature`
    /// along the geodesic.
    AbstractGeodesic {
        length: f64,
        transverse_dim: u32,
        transverse_curvature: f64,
    },
}

impl FiberModel {
    pub fn circle(length: f64) -> Result<Self, GeometryError> {
        let fiber = FiberModel::Circle { length };
        fiber.validate()?;
        Ok(fiber)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let (length, curvature) = match *self {
            FiberModel::Circle { length } => (length, 0.0),
            FiberModel::AbstractGeodesic {
                length,
                transverse_curvature,
                ..
            } => (length, transverse_curvature),
        };
        if !(length > 0.0 && length.is_finite()) {
            return Err(GeometryError::InvalidFiber("geodesic length must be positive"));
        }
        if !curvature.is_finite() {
            return Err(GeometryError::InvalidFiber("transverse curvature must be finite"));
        }
        Ok(())
    }

    /// Length of the fiber geodesic a class-1 loop traverses.
    pub fn length(&self) -> f64 {
        match *self {
            FiberModel::Circle { length } | FiberModel::AbstractGeodesic { length, .. } => length,
        }
    }

    pub fn transverse_dim(&self) -> u32 {
        match *self {
            FiberModel::Circle { .. } => 0,
            FiberModel::AbstractGeodesic { transverse_dim, .. } => transverse_dim,
        }
    }

    pub fn transverse_curvature(&self) -> f64 {
        match *self {
            FiberModel::Circle { .. } => 0.0,
            FiberModel::AbstractGeodesic {
                transverse_curvature, ..
            } => transverse_curvature,
        }
    }
}

/// Compact analysis window `[-half_width, half_width]` plus probe radii
/// beyond it for end diagnostics. Probes are evaluated at `+r` and `-r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub half_width: f64,
    pub grid_n: usize,
    pub probe_radii: Vec<f64>,
}

impl Window {
    pub fn new(half_width: f64, grid_n: usize, probe_radii: Vec<f64>) -> Result<Self, GeometryError> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(GeometryError::InvalidWindow("half width must be positive"));
        }
        if grid_n < 2 {
            return Err(GeometryError::InvalidWindow("grid needs at least 2 points"));
        }
        if probe_radii.iter().any(|&r| !(r > half_width && r.is_finite())) {
            return Err(GeometryError::InvalidWindow("probe radii must exceed the half width"));
        }
        if probe_radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GeometryError::InvalidWindow("probe radii must be increasing"));
        }
        Ok(Self {
            half_width,
            grid_n,
            probe_radii,
        })
    }

    pub fn grid(&self, n: usize) -> Vec<f64> {
        let a = self.half_width;
        (0..n)
            .map(|i| {
                if 2 * i + 1 == n {
                    0.0
                } else {
                    -a + 2.0 * a * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    /// `-r_k, ..., -r_1, r_1, ..., r_k`.
    pub fn probe_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.probe_radii.iter().rev().map(|r| -r).collect();
        pts.extend(self.probe_radii.iter().copied());
        pts
    }

    /// Radius of the region where curvature queries are answered.
    pub fn certified_radius(&self) -> f64 {
        self.probe_radii.iter().copied().fold(self.half_width, f64::max)
    }
}

/// The metric `dx^2 + f(x)^2 g_Y`.
#[derive(Debug, Clone)]
pub struct WarpedMetric {
    profile: ProfileExpr,
    fiber: FiberModel,
    window: Window,
}

impl WarpedMetric {
    /// Certifies divisions and `f > 0` on the window grid and at the probes.
    pub fn new(profile: ProfileExpr, fiber: FiberModel, window: Window) -> Result<Self, GeometryError> {
        fiber.validate()?;
        let probes = window.probe_points();
        profile.certify(window.half_width, window.grid_n, &probes)?;
        for x in window.grid(window.grid_n).into_iter().chain(probes) {
            let value = profile.eval(x)?;
            if value <= 0.0 {
                return Err(GeometryError::NonPositiveProfile { x, value });
            }
        }
        Ok(Self { profile, fiber, window })
    }

    pub fn profile(&self) -> &ProfileExpr {
        &self.profile
    }

    pub fn fiber(&self) -> &FiberModel {
        &self.fiber
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// `(f, f', f'')` at `x`; no region check.
    pub fn jet(&self, x: f64) -> Result<[f64; 3], EvalError> {
        self.profile.eval_jet(x)
    }

    fn check_region(&self, x: f64) -> Result<(), GeometryError> {
        let radius = self.window.certified_radius();
        if x.abs() <= radius {
            Ok(())
        } else {
            Err(GeometryError::OutsideRegion { x, radius })
        }
    }

    /// Sectional curvature of planes containing `d/dx`: `-f''/f`.
    pub fn base_curvature(&self, x: f64) -> Result<f64, GeometryError> {
        self.check_region(x)?;
        let [f, _, f2] = self.jet(x)?;
        Ok(-f2 / f)
    }

    /// Sectional curvature of planes spanned by the fiber geodesic and a
    /// transverse fiber direction: `(k_perp - f'^2)/f^2`.
    pub fn fiber_plane_curvature(&self, x: f64) -> Result<f64, GeometryError> {
        if self.fiber.transverse_dim() == 0 {
            return Err(GeometryError::NoTransverseDirections);
        }
        self.check_region(x)?;
        let [f, f1, _] = self.jet(x)?;
        Ok((self.fiber.transverse_curvature() - f1 * f1) / (f * f))
    }

    fn max_curvature_at(&self, x: f64) -> Result<f64, GeometryError> {
        let base = self.base_curvature(x)?;
        if self.fiber.transverse_dim() == 0 {
            Ok(base)
        } else {
            Ok(base.max(self.fiber_plane_curvature(x)?))
        }
    }

    /// Sampled membership test for complete metrics with non-positive
    /// curvature and negatively curved ends.
    pub fn membership(&self, grid_n: usize) -> Result<MembershipVerdict, GeometryError> {
        let mut verdict = MembershipVerdict {
            nonpositive_everywhere: true,
            ends_negative: !self.window.probe_radii.is_empty(),
            witness: None,
            end_witness: None,
            end_bound: None,
            max_curvature: f64::NEG_INFINITY,
        };
        let probes = self.window.probe_points();
        for x in self
            .window
            .grid(grid_n.max(2))
            .into_iter()
            .chain(probes.iter().copied())
        {
            let k = self.max_curvature_at(x)?;
            verdict.max_curvature = verdict.max_curvature.max(k);
            if k > TOL_CURV {
                verdict.nonpositive_everywhere = false;
                if verdict.witness.is_none_or(|w| k > w.curvature) {
                    verdict.witness = Some(Witness { x, curvature: k });
                }
            }
        }
        let mut end_max = f64::NEG_INFINITY;
        for &x in &probes {
            let k = self.max_curvature_at(x)?;
            if k > end_max {
                end_max = k;
            }
            if k > -TOL_CURV {
                verdict.ends_negative = false;
                if verdict.end_witness.is_none_or(|w| k > w.curvature) {
                    verdict.end_witness = Some(Witness { x, curvature: k });
                }
            }
        }
        if verdict.ends_negative {
            verdict.end_bound = Some(end_max);
        }
        Ok(verdict)
    }

    /// Sampled uniform `C^k` distance between two warped metrics on the same
    /// fiber and window, measured with the coordinate jet distance
    /// `max_{j <= k} |f^(j) - h^(j)|`.
    pub fn uniform_distance(&self, other: &WarpedMetric, k: u8) -> Result<UniformDistance, GeometryError> {
        if self.fiber != other.fiber || self.window != other.window {
            return Err(GeometryError::Mismatched);
        }
        let orders: &[Order] = match k {
            0 => &[Order::Zero],
            1 => &[Order::Zero, Order::First],
            _ => &[Order::Zero, Order::First, Order::Second],
        };
        let jet_gap = |x: f64| -> Result<f64, GeometryError> {
            let mut gap = 0.0f64;
            for &o in orders {
                let a = self.profile.eval_order(o, x)?;
                let b = other.profile.eval_order(o, x)?;
                gap = gap.max((a - b).abs());
            }
            Ok(gap)
        };
        let mut window_max = 0.0f64;
        for x in self.window.grid(self.window.grid_n) {
            window_max = window_max.max(jet_gap(x)?);
        }
        let mut partial = Vec::with_capacity(self.window.probe_radii.len());
        let mut running = 0.0f64;
        for &r in &self.window.probe_radii {
            running = running.max(jet_gap(r)?).max(jet_gap(-r)?);
            partial.push(running);
        }
        let increasing = partial.len() >= 2 && partial.windows(2).all(|w| w[1] > w[0]);
        let diverging = increasing && partial.last().is_some_and(|&last| last > 10.0 * window_max);
        let value = partial.last().copied().unwrap_or(0.0).max(window_max);
        Ok(UniformDistance {
            value,
            diverging,
            window_max,
            probe_maxima: partial,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub x: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipVerdict {
    pub nonpositive_everywhere: bool,
    pub ends_negative: bool,
    /// Largest positive curvature sample, when non-positivity fails.
    pub witness: Option<Witness>,
    /// Largest end sample, when the ends check fails.
    pub end_witness: Option<Witness>,
    /// Largest curvature at the probes, reported when the ends are negative.
    pub end_bound: Option<f64>,
    pub max_curvature: f64,
}

impl MembershipVerdict {
    pub fn is_member(&self) -> bool {
        self.nonpositive_everywhere && self.ends_negative
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformDistance {
    pub value: f64,
    pub diverging: bool,
    pub window_max: f64,
    /// Running maxima over the probe radii in increasing order.
    pub probe_maxima: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn window() -> Window {
        Window::new(8.0, 1001, vec![10.0, 20.0, 40.0]).unwrap()
    }

    fn metric(text: &str) -> WarpedMetric {
        WarpedMetric::new(
            ProfileExpr::parse(text).unwrap(),
            FiberModel::circle(core::f64::consts::TAU).unwrap(),
            window(),
        )
        .unwrap()
    }

    fn abstract_metric(text: &str, kperp: f64) -> WarpedMetric {
        WarpedMetric::new(
            ProfileExpr::parse(text).unwrap(),
            FiberModel::AbstractGeodesic {
                length: core::f64::consts::TAU,
                transverse_dim: 2,
                transverse_curvature: kperp,
            },
            window(),
        )
        .unwrap()
    }

    #[test]
    fn base_curvature_examples() {
        let g0 = metric("exp(x)");
        for x in [-5.0, 0.0, 3.0] {
            assert!((g0.base_curvature(x).unwrap() + 1.0).abs() < 1e-15);
        }
        assert_eq!(metric("x^2+1").base_curvature(0.0).unwrap(), -2.0);
        assert_eq!(metric("3").base_curvature(1.7).unwrap(), 0.0);
        assert!(matches!(
            metric("x^2+1").base_curvature(41.0),
            Err(GeometryError::OutsideRegion { .. })
        ));
    }

    #[test]
    fn fiber_plane_curvature_examples() {
        let g = abstract_metric("exp(x)", -1.0);
        assert_eq!(g.fiber_plane_curvature(0.0).unwrap(), -2.0);
        for x in [-3.0, 1.0, 5.0] {
            assert!(g.fiber_plane_curvature(x).unwrap() < 0.0);
        }
        let crit = abstract_metric("x^2+1", -1.0);
        assert_eq!(crit.fiber_plane_curvature(0.0).unwrap(), -1.0);
        assert_eq!(abstract_metric("1", 0.0).fiber_plane_curvature(2.0).unwrap(), 0.0);
        assert_eq!(
            metric("1").fiber_plane_curvature(0.0),
            Err(GeometryError::NoTransverseDirections)
        );
    }

    #[test]
    fn membership_examples() {
        let v = metric("x^2+1").membership(1001).unwrap();
        assert!(v.nonpositive_everywhere && v.ends_negative);
        let bound = v.end_bound.unwrap();
        assert!((bound - (-2.0 / 1601.0)).abs() < 1e-15);

        let flat = metric("1").membership(101).unwrap();
        assert!(flat.nonpositive_everywhere);
        assert!(!flat.ends_negative);
        assert!(flat.end_bound.is_none());

        let well = metric("(x^2-1)^2 + 1/2").membership(1001).unwrap();
        assert!(!well.nonpositive_everywhere);
        let w = well.witness.unwrap();
        assert_eq!(w.x, 0.0);
        assert!((w.curvature - 8.0 / 3.0).abs() < 1e-14);

        let g0 = metric("exp(x)").membership(1001).unwrap();
        assert!(g0.is_member());
        let y = abstract_metric("x^2+1", -1.0).membership(1001).unwrap();
        assert!(y.is_member());
    }

    #[test]
    fn nonpositive_profile_rejected() {
        let err = WarpedMetric::new(
            ProfileExpr::parse("x^2 - 1").unwrap(),
            FiberModel::circle(1.0).unwrap(),
            window(),
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::NonPositiveProfile { .. }));
        assert!(FiberModel::circle(0.0).is_err());
        assert!(Window::new(8.0, 10, vec![5.0]).is_err());
        assert!(Window::new(8.0, 10, vec![20.0, 10.0]).is_err());
    }

    #[test]
    fn uniform_distance_examples() {
        let g = metric("x^2+1");
        let same = g.uniform_distance(&g, 2).unwrap();
        assert_eq!((same.value, same.diverging), (0.0, false));

        let d = metric("exp(x)").uniform_distance(&g, 0).unwrap();
        assert!(d.diverging);
        assert!(d.probe_maxima.windows(2).all(|w| w[1] > w[0]));

        let shifted = metric("x^2+1.01").uniform_distance(&g, 0).unwrap();
        assert!((shifted.value - 0.01).abs() < 1e-12);
        assert!(!shifted.diverging);

        let other_fiber = WarpedMetric::new(
            ProfileExpr::parse("x^2+1").unwrap(),
            FiberModel::circle(1.0).unwrap(),
            window(),
        )
        .unwrap();
        assert_eq!(g.uniform_distance(&other_fiber, 0), Err(GeometryError::Mismatched));
    }

    #[test]
    fn curvature_scale_invariant() {
        let f = metric("(x^2-1)^2 + 1/2");
        let cf = metric("3.5*((x^2-1)^2 + 1/2)");
        for x in window().grid(101) {
            let a = f.base_curvature(x).unwrap();
            let b = cf.base_curvature(x).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
