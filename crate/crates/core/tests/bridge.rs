use std::f64::consts::PI;

use fkpp_core::bridge::{
    bridge_above_line_exact, bridge_stay_mc, gaussian_tail, interval_survival_exact,
    tube_decay_rate_mc, BarrierLine, TubeSpec,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn exact_probability_is_symmetric_and_increasing(
        a in 0.01f64..5.0, b in 0.01f64..5.0, t in 0.1f64..20.0, da in 0.01f64..1.0,
    ) {
        let p = |y1, y2| bridge_above_line_exact(&BarrierLine::new(y1, y2, t).unwrap());
        prop_assert_eq!(p(a, b), p(b, a));
        // Strict growth is only visible before the value rounds to 1.
        if p(a + da, b) < 1.0 {
            prop_assert!(p(a + da, b) > p(a, b));
        }
        if p(a, b + da) < 1.0 {
            prop_assert!(p(a, b + da) > p(a, b));
        }
        prop_assert!(p(a + da, b) >= p(a, b) && p(a, b + da) >= p(a, b));
        prop_assert!((0.0..=1.0).contains(&p(a, b)));
    }

    #[test]
    fn exact_tail_is_below_both_bounds(x in 0.001f64..30.0) {
        let g = gaussian_tail(x).unwrap();
        prop_assert!(g.exact <= g.chernoff);
        prop_assert!(g.exact <= g.mills);
    }
}

#[test]
fn probability_tends_to_one_for_distant_barriers() {
    let p = bridge_above_line_exact(&BarrierLine::new(50.0, 50.0, 1.0).unwrap());
    assert_eq!(p, 1.0);
    let near = bridge_above_line_exact(&BarrierLine::new(1e-12, 1.0, 1.0).unwrap());
    assert!(near < 1e-11);
}

#[test]
fn gaussian_ordering_on_grid() {
    for i in 0..1000 {
        let x = 0.01 + (10.0 - 0.01) * i as f64 / 999.0;
        let g = gaussian_tail(x).unwrap();
        assert!(g.exact <= g.chernoff && g.exact <= g.mills, "x = {x}");
    }
    let g = gaussian_tail(3.0).unwrap();
    assert!(g.exact <= g.mills && g.mills <= g.chernoff);
    assert!((g.exact - 1.3499e-3).abs() < 1e-7);
    assert!((g.mills - 1.4773e-3).abs() < 1e-7);
}

#[test]
fn series_decays_at_leading_rate() {
    let d = interval_survival_exact(4.0).unwrap().ln() - interval_survival_exact(3.0).unwrap().ln();
    assert!((d + PI * PI / 8.0).abs() < 1e-6);
    assert!(interval_survival_exact(0.05).is_err());
}

#[test]
fn monte_carlo_is_deterministic_and_scales() {
    let b = BarrierLine::new(1.0, 1.0, 2.0).unwrap();
    let a1 = bridge_stay_mc(&b, 10_000, 64, 4, true).unwrap();
    let a2 = bridge_stay_mc(&b, 10_000, 64, 4, true).unwrap();
    assert_eq!(a1, a2);
    let mut ratio = 0.0;
    for seed in 0..6 {
        let small = bridge_stay_mc(&b, 10_000, 64, seed, true).unwrap();
        let large = bridge_stay_mc(&b, 40_000, 64, seed + 50, true).unwrap();
        ratio += large.standard_error / small.standard_error / 6.0;
    }
    assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn corrected_estimate_matches_and_raw_is_biased_high() {
    let b = BarrierLine::new(1.0, 1.0, 2.0).unwrap();
    let exact = bridge_above_line_exact(&b);
    let fixed = bridge_stay_mc(&b, 100_000, 64, 1, true).unwrap();
    assert!(fixed.zscore(exact).abs() <= 3.0);
    let raw = bridge_stay_mc(&b, 100_000, 64, 1, false).unwrap();
    assert!(raw.zscore(exact) > 3.0);
}

#[test]
fn wide_tube_rate() {
    let tube = TubeSpec::new(2.0, 0.0, 2.0).unwrap();
    let times: Vec<f64> = (0..10).map(|i| 2.0 + 2.0 * i as f64).collect();
    let fit = tube_decay_rate_mc(&tube, &times, 100_000, 0.02, 8).unwrap();
    assert!(
        (fit.rate - PI * PI / 32.0).abs() < 0.02,
        "rate {}",
        fit.rate
    );
}
