use geostring_core::{FiberModel, ProfileExpr, WarpedMetric, Window};
use proptest::prelude::*;
use std::f64::consts::TAU;

const POOL: &[&str] = &[
    "x^2+1",
    "exp(x)",
    "cosh(x)",
    "(x^2-1)^2 + 1/2",
    "2*x^2+3",
    "exp(x/2) + 1",
    "1",
    "0.9*exp(x) + 0.1*(x^2+1)",
];

fn window() -> Window {
    Window::new(4.0, 201, vec![6.0, 8.0, 12.0]).unwrap()
}

fn metric(text: &str) -> WarpedMetric {
    WarpedMetric::new(
        ProfileExpr::parse(text).unwrap(),
        FiberModel::circle(TAU).unwrap(),
        window(),
    )
    .unwrap()
}

#[test]
fn base_curvature_is_scale_invariant() {
    for text in POOL {
        let g = metric(text);
        for c in [0.5, 2.0, 7.25] {
            let scaled = metric(&format!("{c} * ({text})"));
            for x in window().grid(1001) {
                let a = g.base_curvature(x).unwrap();
                let b = scaled.base_curvature(x).unwrap();
                assert!(
                    (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
                    "{text} c={c} x={x}: {a} vs {b}"
                );
            }
        }
    }
}

#[test]
fn example_memberships() {
    for text in ["exp(x)", "x^2+1"] {
        let v = metric(text).membership(1001).unwrap();
        assert!(v.nonpositive_everywhere && v.ends_negative, "{text}: {v:?}");
    }
    let flat = metric("1").membership(1001).unwrap();
    assert!(flat.nonpositive_everywhere && !flat.ends_negative);
    let bump = metric("(x^2-1)^2 + 1/2").membership(1001).unwrap();
    assert!(!bump.nonpositive_everywhere);
    assert_eq!(bump.witness.unwrap().x, 0.0);
}

#[test]
fn membership_is_deterministic() {
    for text in POOL {
        let g = metric(text);
        assert_eq!(g.membership(1001).unwrap(), g.membership(1001).unwrap());
    }
}

proptest! {
    #[test]
    fn uniform_distance_is_a_pseudometric(
        i in 0..POOL.len(),
        j in 0..POOL.len(),
        k in 0..POOL.len(),
        order in 0u8..3,
    ) {
        let (a, b, c) = (metric(POOL[i]), metric(POOL[j]), metric(POOL[k]));
        let ab = a.uniform_distance(&b, order).unwrap().value;
        let ba = b.uniform_distance(&a, order).unwrap().value;
        let bc = b.uniform_distance(&c, order).unwrap().value;
        let ac = a.uniform_distance(&c, order).unwrap().value;
        prop_assert_eq!(ab, ba);
        prop_assert!(ac <= ab + bc + 1e-12, "{ac} > {ab} + {bc}");
        prop_assert_eq!(a.uniform_distance(&a, order).unwrap().value, 0.0);
    }
}

#[test]
fn distance_flags_divergence_at_the_ends() {
    let d = metric("exp(x)").uniform_distance(&metric("x^2+1"), 2).unwrap();
    assert!(d.diverging);
    let d = metric("x^2+1").uniform_distance(&metric("x^2+1.25"), 2).unwrap();
    assert!(!d.diverging);
    assert!((d.value - 0.25).abs() < 1e-12);
}
