use fkpp_core::kernels::{build_kernel, KernelSpec};
use fkpp_core::solver::{
    reference_solve, run, DiffusionScheme, Domain, InitialCondition, ReferenceConfig, ScalarField,
    SolverConfig, Stepper,
};
use proptest::prelude::*;

fn uniform_kernel(dx: f64) -> fkpp_core::kernels::SampledKernel {
    build_kernel(KernelSpec::Uniform { half_width: 1.0 }, dx, 1.0).unwrap()
}

fn evolve(field: &mut ScalarField, dt: f64, steps: usize) {
    let k = uniform_kernel(field.domain.dx());
    let mut s = Stepper::new(&k, field.domain, dt, DiffusionScheme::HeatKernel, true).unwrap();
    for _ in 0..steps {
        s.step(field).unwrap();
    }
}

fn logistic(c: f64, t: f64) -> f64 {
    c * t.exp() / (1.0 + c * t.exp_m1())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fields_stay_non_negative(values in prop::collection::vec(0.0f64..3.0, 60), steps in 1usize..40) {
        let d = Domain::new(-10.0, 10.0, 200).unwrap();
        let mut init = vec![0.0; 200];
        init[70..130].copy_from_slice(&values);
        let mut f = ScalarField::new(d, init, 0.0).unwrap();
        evolve(&mut f, 0.02, steps);
        prop_assert!(f.values.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn shifting_data_shifts_solution(k in 1isize..40, width in 5usize..30) {
        let d = Domain::new(-15.0, 15.0, 300).unwrap();
        let bump = |start: usize| {
            let mut v = vec![0.0; 300];
            for (i, x) in v.iter_mut().enumerate().skip(start).take(width) {
                *x = 0.5 + 0.01 * (i - start) as f64;
            }
            ScalarField::new(d, v, 0.0).unwrap()
        };
        let mut a = bump(100);
        let mut b = bump((100 + k) as usize);
        evolve(&mut a, 0.05, 10);
        evolve(&mut b, 0.05, 10);
        let shifted = a.shifted(k);
        for i in 60..240 {
            prop_assert!((shifted.values[i] - b.values[i]).abs() < 1e-12, "cell {i}");
        }
    }

    #[test]
    fn uniform_data_follows_logistic(c in 0.05f64..2.0) {
        let d = Domain::new(-20.0, 20.0, 400).unwrap();
        let t = 3f64.ln();
        let steps = (t / 0.01).round() as usize;
        let dt = t / steps as f64;
        let mut f = ScalarField::from_fn(d, |_| c);
        evolve(&mut f, dt, steps);
        prop_assert!((f.values[200] - logistic(c, t)).abs() < 1e-3);
    }
}

#[test]
fn half_evolves_to_three_quarters() {
    let d = Domain::new(-20.0, 20.0, 400).unwrap();
    let t = 3f64.ln();
    let steps = (t / 0.01).round() as usize;
    let mut f = ScalarField::from_fn(d, |_| 0.5);
    evolve(&mut f, t / steps as f64, steps);
    assert!((f.values[200] - 0.75).abs() < 1e-3);
}

#[test]
fn zero_data_stays_zero_in_both_schemes() {
    let d = Domain::with_spacing(-10.0, 10.0, 0.1).unwrap();
    let k = uniform_kernel(0.1);
    let zero = InitialCondition::Custom {
        values: vec![0.0; d.n],
    };
    let config = SolverConfig {
        dt: 0.05,
        t_final: 1.0,
        snapshot_times: vec![],
        clamp_negative: true,
        diffusion: DiffusionScheme::HeatKernel,
        sample_interval: 0.5,
        levels: vec![0.5],
        exhaustion_guard: 2.0,
    };
    let out = run(&config, &k, d, &zero, &mut []).unwrap();
    assert!(out.final_field.values.iter().all(|v| *v == 0.0));
    let r = reference_solve(&ReferenceConfig::for_domain(&d, 1.0), &k, d, &zero).unwrap();
    assert!(r.values.iter().all(|v| *v == 0.0));
}

#[test]
fn splitting_agrees_with_explicit_reference() {
    let d = Domain::with_spacing(-10.0, 10.0, 0.1).unwrap();
    let k = uniform_kernel(0.1);
    let u0 = InitialCondition::Indicator {
        a: -10.0,
        b: 0.0,
        amplitude: 1.0,
    };
    let config = SolverConfig {
        dt: 0.01,
        t_final: 2.0,
        snapshot_times: vec![],
        clamp_negative: true,
        diffusion: DiffusionScheme::HeatKernel,
        sample_interval: 0.5,
        levels: vec![0.5],
        exhaustion_guard: 2.0,
    };
    let out = run(&config, &k, d, &u0, &mut []).unwrap();
    let r = reference_solve(&ReferenceConfig::for_domain(&d, 2.0), &k, d, &u0).unwrap();
    let err = out
        .final_field
        .values
        .iter()
        .zip(&r.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 2e-3, "max difference {err}");
}

#[test]
fn left_truncation_leaves_the_front_in_place() {
    let front_at = |x_lo: f64| {
        let d = Domain::with_spacing(x_lo, 200.0 * 2f64.sqrt() + 40.0, 0.05).unwrap();
        let k = build_kernel(KernelSpec::Uniform { half_width: 1.0 }, 0.05, 1.0).unwrap();
        let u0 = InitialCondition::Indicator {
            a: x_lo,
            b: 0.0,
            amplitude: 1.0,
        };
        let config = SolverConfig {
            dt: 0.02,
            t_final: 200.0,
            snapshot_times: vec![],
            clamp_negative: true,
            diffusion: DiffusionScheme::HeatKernel,
            sample_interval: 50.0,
            levels: vec![0.5, 0.1],
            exhaustion_guard: 10.0,
        };
        let out = run(&config, &k, d, &u0, &mut []).unwrap();
        out.trace.last().unwrap().fronts.clone()
    };
    let near = front_at(-20.0);
    let far = front_at(-80.0);
    for (a, b) in near.iter().zip(&far) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}
