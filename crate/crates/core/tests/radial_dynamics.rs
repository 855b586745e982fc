use kslab::radial_dynamics::{
    derivative_along_flow, radial_rhs, run_radial, step, RadialRunOptions, RadialState,
    RadialStopReason, StepOutcome,
};
use kslab::transform::{RadialOperator, RadialQuadrature};
use kslab::{bump_initial_data, Params, RadialFunction, RadialProfile};

fn params(g: f64) -> Params {
    Params::new(2, 1.0, g).unwrap()
}

fn quick(markers: usize) -> RadialRunOptions {
    RadialRunOptions {
        markers,
        snapshot_every: 1,
        ..RadialRunOptions::default()
    }
}

fn advanced(o: StepOutcome) -> RadialState {
    match o {
        StepOutcome::Advanced(s) => s,
        StepOutcome::Collided { min_gap, at } => panic!("collision at {at} (gap {min_gap})"),
    }
}

fn no_gaps(s: &RadialState) -> Vec<f64> {
    vec![0.0; s.positions.len() - 1]
}

#[test]
fn rhs_examples() {
    let op = RadialOperator::new(params(1.0));
    let flat = RadialProfile::new(vec![0.0, 0.5, 1.0], vec![1.0; 3]).unwrap();
    let s = RadialState::new(&flat, vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    assert!(radial_rhs(&s, &op).iter().all(|&u| u == 0.0));

    let b = bump_initial_data(1.0, 1.0, 1.0).unwrap();
    let s = RadialState::clustered(&b, 64, 0.9).unwrap();
    let u = radial_rhs(&s, &op);
    assert_eq!(u[0], 0.0);
    assert!(u.iter().all(|&v| v <= 0.0));

    let s = RadialState::new(&b, vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    let u = radial_rhs(&s, &op);
    let direct = op.velocity(&s.profile, 0.5);
    assert!((u[2] - direct).abs() <= 1e-10 * direct.abs());
}

#[test]
fn step_trivial_cases() {
    let op = RadialOperator::new(params(1.0));
    let flat = RadialProfile::new(vec![0.0, 1.0], vec![-1.0, -1.0]).unwrap();
    let s = RadialState::new(&flat, vec![0.0, 0.3, 0.6, 1.0]).unwrap();
    let next = advanced(step(&s, 0.7, &op, &no_gaps(&s)).unwrap());
    assert_eq!(next.positions, s.positions);

    let b = bump_initial_data(1.0, 1.0, 1.0).unwrap();
    let s = RadialState::clustered(&b, 32, 0.9).unwrap();
    let next = advanced(step(&s, 1e-12, &op, &no_gaps(&s)).unwrap());
    for (a, c) in next.positions.iter().zip(&s.positions) {
        assert!((a - c).abs() < 1e-11);
    }
    assert!(step(&s, 0.0, &op, &no_gaps(&s)).is_err());
}

#[test]
fn one_step_error_is_fifth_order() {
    let quad = RadialQuadrature {
        order: 8,
        near_order: 16,
        rel_tol: 0.0,
        max_doublings: 0,
    };
    let op = RadialOperator::with_quadrature(params(1.0), quad);
    let b = bump_initial_data(1.0, 1.0, 1.0).unwrap();
    let s = RadialState::clustered(&b, 32, 0.9).unwrap();
    let gaps = no_gaps(&s);
    let run = |dt: f64, k: usize| {
        let mut st = s.clone();
        for _ in 0..k {
            st = advanced(step(&st, dt / k as f64, &op, &gaps).unwrap());
        }
        st.positions
    };
    let err = |dt: f64| {
        let (one, fine) = (run(dt, 1), run(dt, 16));
        one.iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let ratio = err(0.2) / err(0.1);
    assert!(ratio > 24.0 && ratio < 40.0, "ratio {ratio}");
}

#[test]
fn zero_data_runs_to_the_time_limit() {
    let zero = RadialProfile::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
    let opts = RadialRunOptions {
        t_max: 2.0,
        markers: 16,
        ..RadialRunOptions::default()
    };
    let run = run_radial(&zero, &params(1.0), &opts).unwrap();
    assert_eq!(run.stop_reason, RadialStopReason::TimeLimit);
    for r in &run.series.records {
        assert_eq!(
            (r.sup_grad, r.i_delta, r.bkm_partial, r.origin_value),
            (0.0, 0.0, 0.0, 0.0)
        );
    }
    assert_eq!(run.series.last().unwrap().t, 2.0);
}

#[test]
fn bump_run_invariants() {
    let b = bump_initial_data(1.0, 1.0, 4.0).unwrap();
    let run = run_radial(&b, &params(1.0), &quick(128)).unwrap();
    assert_eq!(run.stop_reason, RadialStopReason::GradientThreshold);
    let grads = run.series.column(|r| r.sup_grad);
    assert!(grads.last().unwrap() / grads[0] > 10.0);

    let fin = &run.final_state;
    let carried: Vec<f64> = fin.labels.iter().map(|&r| b.value(r)).collect();
    assert_eq!(fin.values, carried);
    assert!(fin.values.windows(2).all(|w| w[1] >= w[0]));
    for r in &run.series.records {
        assert!((r.origin_value + 1.0).abs() <= 1e-12);
    }
    let mut prev_end = f64::INFINITY;
    for (_, prof) in &run.snapshots {
        let end = *prof.nodes().last().unwrap();
        assert!(end <= prev_end);
        prev_end = end;
        assert_eq!(prof.nodes()[0], 0.0);
    }
    let times = run.series.times();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn steep_bump_gradient_grows_monotonically() {
    let b = bump_initial_data(1.0, 1.0, 4.0).unwrap();
    let run = run_radial(&b, &params(1.0), &quick(128)).unwrap();
    let grads = run.series.column(|r| r.sup_grad);
    let dips = grads
        .windows(2)
        .filter(|w| w[1] < w[0] * (1.0 - 1e-3))
        .count();
    assert_eq!(dips, 0, "{grads:?}");
}

#[test]
fn doubling_g_halves_the_threshold_time() {
    let b = bump_initial_data(1.0, 1.0, 4.0).unwrap();
    let t1 = run_radial(&b, &params(1.0), &quick(128))
        .unwrap()
        .final_state
        .time;
    let t2 = run_radial(&b, &params(2.0), &quick(128))
        .unwrap()
        .final_state
        .time;
    assert!((t2 / t1 - 0.5).abs() < 0.05 * 0.5, "{t1} {t2}");
}

#[test]
fn scaling_symmetry() {
    let lambda = 2.0;
    let b = bump_initial_data(1.0, 1.0, 1.0).unwrap();
    let b2 = bump_initial_data(1.0, lambda, 1.0).unwrap();
    let opts = RadialRunOptions {
        t_max: 0.6,
        dt_max: 10.0,
        ..quick(64)
    };
    let r1 = run_radial(&b, &params(1.0), &opts).unwrap();
    let opts2 = RadialRunOptions {
        t_max: 0.6 / lambda,
        ..opts
    };
    let r2 = run_radial(&b2, &params(1.0), &opts2).unwrap();
    assert_eq!(r1.steps, r2.steps);
    for (x, y) in r1
        .final_state
        .positions
        .iter()
        .zip(&r2.final_state.positions)
    {
        assert!((x - y).abs() < 1e-10, "{x} {y}");
    }
}

#[test]
fn flow_derivative_reconstructions_agree() {
    let b = bump_initial_data(1.0, 1.0, 1.0).unwrap();
    let opts = RadialRunOptions {
        t_max: 0.3,
        dt_max: 0.05,
        ..quick(256)
    };
    let run = run_radial(&b, &params(1.0), &opts).unwrap();
    let reports = derivative_along_flow(&run, &b, 0.9);
    assert_eq!(reports[0].time, 0.0);
    // at t = 0 the stretch is exactly one; (i) only carries difference error
    assert!(reports[0].max_rel_discrepancy < 1e-3);
    for r in &reports {
        assert!(r.max_rel_discrepancy < 1e-3, "{r:?}");
        assert!(r.min_derivative >= -1e-12);
    }

    let flat = RadialProfile::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
    let run = run_radial(
        &flat,
        &params(1.0),
        &RadialRunOptions {
            t_max: 0.2,
            ..quick(16)
        },
    )
    .unwrap();
    for r in derivative_along_flow(&run, &flat, 0.9) {
        assert!(r.max_rel_discrepancy.abs() < 1e-12 && r.min_derivative.abs() < 1e-12);
    }
}

#[test]
fn collision_is_reported() {
    let b = bump_initial_data(1.0, 1.0, 4.0).unwrap();
    let opts = RadialRunOptions {
        gradient_factor: 1e12,
        collision_ratio: 0.2,
        ..quick(64)
    };
    let run = run_radial(&b, &params(1.0), &opts).unwrap();
    assert_eq!(run.stop_reason, RadialStopReason::MarkersCollided);
}
