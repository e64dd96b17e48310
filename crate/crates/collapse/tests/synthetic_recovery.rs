use xebsim_collapse::{collapse_cost, fit, synthetic_sweep, SearchSpec, SyntheticSpec, Weighting};

fn spec() -> SearchSpec {
    SearchSpec::new((0.12, 0.20), (0.8, 2.0))
}

#[test]
fn planted_point_beats_displaced_points() {
    let d = synthetic_sweep(&SyntheticSpec::default(), 1).unwrap();
    let r0 = collapse_cost(&d, 0.16, 1.3, Weighting::None).unwrap().value;
    for dn in [-0.3, 0.3] {
        for dp in [-0.03, 0.03] {
            let r = collapse_cost(&d, 0.16 + dp, 1.3 + dn, Weighting::None).unwrap().value;
            assert!(r0 < r, "R({}, {}) = {r} <= {r0}", 1.3 + dn, 0.16 + dp);
        }
    }
}

#[test]
fn recovers_planted_parameters() {
    for seed in 0..10 {
        let d = synthetic_sweep(&SyntheticSpec::default(), seed).unwrap();
        let f = fit(&d, &spec()).unwrap();
        assert!((f.nu - 1.3).abs() < 0.1, "seed {seed}: nu = {}", f.nu);
        assert!((f.p_c - 0.16).abs() < 0.01, "seed {seed}: p_c = {}", f.p_c);
        assert!(f.delta_nu.unwrap() > 0.0 && f.delta_p_c.unwrap() > 0.0);
        assert!(f.flags.is_empty(), "{:?}", f.flags);
    }
}

#[test]
fn fit_is_deterministic_and_outputs_parse() {
    let d = synthetic_sweep(&SyntheticSpec::default(), 3).unwrap();
    let a = fit(&d, &spec()).unwrap();
    let b = fit(&d, &spec()).unwrap();
    assert_eq!(a, b);
    let json = serde_json::to_value(&a).unwrap();
    for key in ["p_c", "nu", "delta_p_c", "delta_nu", "cost", "eta"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    let mut surface = Vec::new();
    a.surface.as_ref().unwrap().write_csv(&mut surface).unwrap();
    assert_eq!(String::from_utf8(surface).unwrap().lines().count(), 1 + 61 * 61);
    let mut rescaled = Vec::new();
    a.write_rescaled_csv(&d, &mut rescaled).unwrap();
    assert_eq!(String::from_utf8(rescaled).unwrap().lines().count(), 1 + 4 * 13);
}

#[test]
fn rejects_bad_search_specs() {
    let d = synthetic_sweep(&SyntheticSpec::default(), 0).unwrap();
    assert!(fit(&d, &SearchSpec::new((0.05, 0.2), (0.8, 2.0))).is_err());
    assert!(fit(&d, &SearchSpec::new((0.12, 0.2), (0.0, 2.0))).is_err());
    assert!(fit(&d, &SearchSpec::new((0.2, 0.12), (0.8, 2.0))).is_err());
}
