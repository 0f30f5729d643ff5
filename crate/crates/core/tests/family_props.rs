use geostring_core::family::{run_family, EventKind};
use geostring_core::{
    CensusOptions, FamilyOptions, FiberModel, HomotopyClass, MetricPath, ProfileFamily, Rational, Window,
};
use std::f64::consts::TAU;

fn path(text: &str, samples: Vec<f64>) -> MetricPath {
    MetricPath::new(
        ProfileFamily::parse(text).unwrap(),
        FiberModel::circle(TAU).unwrap(),
        Window::new(8.0, 801, vec![10.0, 20.0, 40.0]).unwrap(),
        samples,
    )
    .unwrap()
}

fn options(descending: bool) -> FamilyOptions {
    FamilyOptions {
        census: CensusOptions {
            n_points: 64,
            starts: 9,
            ..CensusOptions::default()
        },
        descending,
        ..FamilyOptions::default()
    }
}

fn w1() -> HomotopyClass {
    HomotopyClass::new(1).unwrap()
}

/// Root of `(1-s) e^x + 2 s x` by bisection; the left side is positive at 0
/// and negative far left for `0 < s < 1`.
fn neck_oracle(s: f64) -> f64 {
    let h = |x: f64| (1.0 - s) * x.exp() + 2.0 * s * x;
    let (mut lo, mut hi) = (-60.0, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn event_free_sweeps_keep_f_constant() {
    for text in ["x^2+1+s", "(x-s/4)^2+1", "x^2+1+s*exp(-x^2)/2"] {
        let report = run_family(&path(text, MetricPath::uniform_samples(6)), w1(), &options(false));
        assert!(report.events.is_empty(), "{text}: {:?}", report.events);
        let fs: Vec<Rational> = report.records.iter().filter_map(|r| r.fuller()).collect();
        assert_eq!(fs.len(), 6);
        assert!(fs.iter().all(|f| *f == Rational::from_integer(1)), "{text}: {fs:?}");
    }
}

#[test]
fn unbounded_deformation_is_flagged_even_when_f_is_constant() {
    let report = run_family(
        &path("(1+s)*(x^2+1)", MetricPath::uniform_samples(4)),
        w1(),
        &options(false),
    );
    assert_eq!(report.event_count(EventKind::UniformDiscontinuity), 3);
    assert!(report
        .records
        .iter()
        .all(|r| r.fuller() == Some(Rational::from_integer(1))));
}

#[test]
fn interpolation_sweep_never_connects_zero_to_one_cleanly() {
    let samples = vec![0.0, 0.002, 0.01, 0.05, 0.2, 0.5, 1.0];
    let report = run_family(&path("(1-s)*exp(x) + s*(x^2+1)", samples), w1(), &options(true));
    let first = report.records.first().unwrap();
    let last = report.records.last().unwrap();
    assert_eq!((first.s, last.s), (1.0, 0.0));
    assert_eq!(first.fuller(), Some(Rational::from_integer(1)));
    assert_eq!(last.fuller(), Some(Rational::from_integer(0)));
    assert!(report.unexplained_jumps().is_empty());
    assert!(report.event_count(EventKind::UniformDiscontinuity) > 0);

    for r in &report.records {
        assert!(r.membership.as_ref().unwrap().is_member(), "s={}", r.s);
        if r.s > 0.0 {
            assert_eq!(r.fuller(), Some(Rational::from_integer(1)), "s={}", r.s);
            let x0 = r.strings()[0].x0;
            assert!(
                (x0 - neck_oracle(r.s)).abs() <= 1e-4,
                "s={}: {x0} vs {}",
                r.s,
                neck_oracle(r.s)
            );
        }
    }
}

#[test]
fn positivity_violation_is_an_event() {
    let report = run_family(
        &path("x^2+1-2*s", MetricPath::uniform_samples(5)),
        w1(),
        &options(false),
    );
    assert!(report.event_count(EventKind::InvalidSlice) > 0);
    assert!(report.records.last().unwrap().error.is_some());
}
