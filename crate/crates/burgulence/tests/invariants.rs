//! Cross-module invariants: transform identities, scheme convergence,
//! stationary references and checkpoint/resume equivalence.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use burgulence::checkpoint::Checkpoint;
use burgulence::field::TWO_PI;
use burgulence::forcing::rng;
use burgulence::stats;
use burgulence::{
    ou_reference_variance, BracketSpec, ForcingSpec, GridField, NoiseIncrement, ProbeSet,
    ScalarObservable, Simulation, SpectralField, StepSchedule, Stepper,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn random_band_limited(seed: u64, truncation: usize, amp: f64) -> SpectralField {
    let mut s = SpectralField::zero(truncation).unwrap();
    for k in 1..=truncation {
        let re = rng::standard_normal(seed, 0, k as u64, 0);
        let im = rng::standard_normal(seed, 1, k as u64, 0);
        s.set(k, Complex64::new(re, im) * (amp / k as f64));
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_is_identity_on_band_limited_fields(
        seed in 0u64..1000,
        log_k in 1usize..6,
    ) {
        let truncation = 1 << log_k;
        let n = 4 * truncation;
        let s = random_band_limited(seed, truncation, 1.0);
        let back = s.to_grid(n).unwrap().to_spectral();
        for k in 1..=truncation {
            let d = (s.amplitude(k as i64) - back.amplitude(k as i64)).norm();
            prop_assert!(d < 1e-10, "mode {k} moved by {d:.2e}");
        }
    }

    #[test]
    fn parseval_identity(seed in 0u64..1000) {
        let s = random_band_limited(seed, 16, 0.7);
        let g = s.to_grid(64).unwrap();
        let l2 = g.lp_norm(2.0).unwrap();
        let viaspec = g.to_spectral().sobolev_norm_sq(0);
        prop_assert!((l2 * l2 - viaspec).abs() <= 1e-10 * viaspec.max(1e-30));
    }

    #[test]
    fn riemann_flux_is_monotone(
        ul in -3.0f64..3.0,
        ur in -3.0f64..3.0,
        h in 1e-6f64..0.5,
    ) {
        let f = burgulence::riemann_flux(ul, ur);
        prop_assert!(burgulence::riemann_flux(ul + h, ur) >= f - 1e-12);
        prop_assert!(burgulence::riemann_flux(ul, ur + h) <= f + 1e-12);
        // consistency with the physical flux
        prop_assert!((burgulence::riemann_flux(ul, ul) - 0.5 * ul * ul).abs() < 1e-12);
    }

    #[test]
    fn increment_moment_routes_agree(seed in 0u64..500, k in 1usize..16) {
        let s = random_band_limited(seed, 24, 0.5);
        let g = s.to_grid(128).unwrap();
        let l = k as f64 / 128.0;
        let phys = stats::structure_function(&[&g], 2.0, l).unwrap();
        let spec = stats::structure_sq_spectral(&s, l);
        prop_assert!((phys - spec).abs() <= 1e-8 * spec.max(1e-30));
    }
}

#[test]
fn stepper_strong_self_convergence_order() {
    // one Brownian path at several step sizes against a finer self-reference:
    // the strong error at t = 1 must scale at least linearly
    let n = 128;
    let nu = 0.05;
    let spec = ForcingSpec::inverse_s_bandlimited(4, 1.0, 2718, 0);
    let u0 = random_band_limited(11, 8, 0.3);
    let fine_log2 = 13u32; // dt = 2^-13
    let fine_steps = 1usize << fine_log2;
    let dt_fine = 1.0 / fine_steps as f64;

    let fine_deltas: Vec<SpectralField> = (0..fine_steps)
        .map(|i| spec.sample_increment(dt_fine, i as u64).delta)
        .collect();

    let run_at = |coarsen: u32| -> SpectralField {
        let block = 1usize << coarsen;
        let dt = dt_fine * block as f64;
        let mut stepper = Stepper::new(n, nu).unwrap();
        let mut state = stepper.initial_state(&u0);
        for c in 0..(fine_steps / block) {
            let mut delta = SpectralField::zero(4).unwrap();
            for i in 0..block {
                let fine = &fine_deltas[c * block + i];
                for (k, m) in delta.positive_modes_mut().iter_mut().enumerate() {
                    *m += fine.positive_modes()[k];
                }
            }
            stepper
                .step(&mut state, dt, &NoiseIncrement::new(dt, delta))
                .unwrap();
        }
        state.u
    };

    let reference = run_at(0); // dt = 2^-13, eight times finer than the finest probe
    let mut points = Vec::new();
    for coarsen in [3u32, 4, 5] {
        let u = run_at(coarsen);
        let mut diff = u.clone();
        for (k, m) in diff.positive_modes_mut().iter_mut().enumerate() {
            *m -= reference.amplitude(k as i64 + 1);
        }
        let err = diff.sobolev_norm_sq(0).sqrt();
        points.push((dt_fine * (1u64 << coarsen) as f64, err));
    }
    let fit = stats::loglog_slope(&points).unwrap();
    assert!(
        fit.exponent >= 0.9,
        "strong self-convergence order {:.3} below 0.9 (errors: {points:?})",
        fit.exponent
    );
}

#[test]
fn stationary_energy_balance() {
    // the time mean of nu * |u_x|^2 fluctuates by tens of percent on a single
    // trajectory (shock events dominate it), so a small ensemble is averaged;
    // the mean must match half the input rate
    let nu = 2e-2;
    let members = 8;
    let base = ForcingSpec::inverse_s_bandlimited(4, 1.0, 7001, 0);
    let mut acc = burgulence::MeanAccumulator::default();
    for m in 0..members {
        let mut sim = Simulation::new(
            512,
            nu,
            base.with_member(m),
            StepSchedule::to(15.0),
            ProbeSet::scalars_only(vec![1]),
        )
        .unwrap();
        let out = sim.run(&SpectralField::zero(1).unwrap()).unwrap();
        let series = out.stream.series(ScalarObservable::SobolevSq(1)).unwrap();
        acc.push(nu * stats::time_average(&series, 5.0, 15.0).unwrap());
    }
    let ratio = acc.mean() / base.b_constant(0);
    assert!(
        (ratio - 0.5).abs() < 0.15 * 0.5,
        "dissipation / input ratio {ratio:.3} should be 1/2 within 15% (se {:.3})",
        acc.stderr()
    );
}

#[test]
fn linearized_modes_reach_ou_variance() {
    // quick ensemble check; the full 64-member version runs in the
    // acceptance suite
    let nu = 0.1;
    let members = 8;
    let base = ForcingSpec::inverse_s_bandlimited(4, 1.0, 515, 0);
    let bracket = BracketSpec::new(5.0, 5.0, members).unwrap();
    let streams: Vec<_> = (0..members as u64)
        .map(|m| {
            let mut sim = Simulation::linearized(
                128,
                nu,
                base.with_member(m),
                StepSchedule::to(10.0),
                ProbeSet {
                    low_mode_energy: vec![1, 2, 3, 4],
                    ..ProbeSet::default()
                },
            )
            .unwrap();
            sim.run(&SpectralField::zero(1).unwrap()).unwrap().stream
        })
        .collect();
    for s in 1..=4 {
        let b_s = base
            .coefficients()
            .iter()
            .find(|c| c.0 == s as i32)
            .unwrap()
            .1;
        let oracle = 2.0 * ou_reference_variance(s as i32, nu, b_s).unwrap();
        let (mean, se) =
            stats::bracket_average(&streams, ScalarObservable::LowModeEnergy(s), &bracket).unwrap();
        assert!(
            (mean - oracle).abs() < (4.0 * se).max(0.2 * oracle),
            "mode {s}: measured {mean:.3e} vs oracle {oracle:.3e} (se {se:.1e})"
        );
    }
}

#[test]
fn coupled_noise_contracts_l1_distance() {
    // two solutions on the same noise path: their L1 distance never exceeds
    // its initial value (small slack for the non-monotone spectral scheme)
    let nu = 1e-2;
    let n = 512;
    let spec = ForcingSpec::inverse_s_bandlimited(4, 1.0, 33, 0);
    let mut stepper_a = Stepper::new(n, nu).unwrap();
    let mut stepper_b = Stepper::new(n, nu).unwrap();
    let mut state_a = stepper_a.initial_state(&random_band_limited(1, 4, 0.5));
    let mut state_b = stepper_b.initial_state(&random_band_limited(2, 4, 0.5));

    let sched = StepSchedule::to(3.0);
    let d0 = state_a
        .u
        .to_grid(n)
        .unwrap()
        .l1_distance(&state_b.u.to_grid(n).unwrap());
    let mut step_index = 0u64;
    let mut t = 0.0;
    while t < sched.t_end {
        let sup = stepper_a.sup_norm(&state_a).max(stepper_b.sup_norm(&state_b));
        let dt = sched.step_for(sup, n).min(sched.t_end - t);
        let noise = spec.sample_increment(dt, step_index);
        stepper_a.step(&mut state_a, dt, &noise).unwrap();
        stepper_b.step(&mut state_b, dt, &noise).unwrap();
        t = state_a.t;
        step_index += 1;
        if step_index % 100 == 0 {
            let d = state_a
                .u
                .to_grid(n)
                .unwrap()
                .l1_distance(&state_b.u.to_grid(n).unwrap());
            assert!(
                d <= d0 * 1.01,
                "L1 distance {d:.4e} above initial {d0:.4e} at t = {t:.3}"
            );
        }
    }
}

#[test]
fn resume_is_bit_identical() {
    let spec = ForcingSpec::inverse_s_bandlimited(4, 1.0, 90210, 6);
    let probes = ProbeSet {
        sobolev_orders: vec![0, 1],
        l1_norm: true,
        spectrum_snapshots: true,
        grid_snapshots: true,
        snapshot_window: None,
        ..ProbeSet::default()
    };
    let n = 256;
    let nu = 0.05;
    let sched = StepSchedule::to(2.0);

    let mut whole = Simulation::new(n, nu, spec.clone(), sched.clone(), probes.clone()).unwrap();
    let full = whole.run(&SpectralField::zero(1).unwrap()).unwrap();

    // interrupt mid-run at step granularity (not on a stride boundary)
    let cut = full.steps / 2 + 3;
    let mut first = Simulation::new(n, nu, spec.clone(), sched.clone(), probes.clone()).unwrap();
    let seg1 = first.run_capped(&SpectralField::zero(1).unwrap(), cut).unwrap();
    assert_eq!(seg1.steps, cut);

    // through the binary format, as a resumed process would see it
    let ck = Checkpoint::from_state(&seg1.state, spec.seed(), spec.member_id(), seg1.steps, false);
    let mut buf = Vec::new();
    ck.write_to(&mut buf).unwrap();
    let restored = Checkpoint::read_from(buf.as_slice()).unwrap();
    assert_eq!(restored.step_index, cut);

    let mut second = Simulation::new(n, nu, spec.clone(), sched, probes).unwrap();
    let seg2 = second
        .run_from(restored.to_state().unwrap(), restored.step_index)
        .unwrap();

    assert_eq!(full.state.u, seg2.state.u, "final modes differ");
    assert_eq!(full.state.t, seg2.state.t);
    assert_eq!(full.steps, seg2.steps);

    let merged = seg1.stream.concat_resumed(seg2.stream);
    assert_eq!(full.stream.samples.len(), merged.samples.len());
    for (a, b) in full.stream.samples.iter().zip(&merged.samples) {
        assert_eq!(a.t, b.t);
        assert_eq!(a.sobolev_sq, b.sobolev_sq);
        assert_eq!(a.l1_norm, b.l1_norm);
    }
    assert_eq!(full.stream.snapshots.len(), merged.snapshots.len());
    for (a, b) in full.stream.snapshots.iter().zip(&merged.snapshots) {
        assert_eq!(a.t, b.t);
        assert_eq!(a.spectrum, b.spectrum);
    }
}

#[test]
fn kicked_and_per_step_forcing_have_matching_energy_input() {
    // both forcing modes inject at rate B0/2 into the stationary balance;
    // averaged over a small ensemble to beat trajectory fluctuations
    let base = ForcingSpec::inverse_s_bandlimited(4, 1.0, 46, 0);
    let run = |mode: burgulence::ForcingMode| {
        let mut acc = burgulence::MeanAccumulator::default();
        for m in 0..6 {
            let mut sim = Simulation::new(
                512,
                2e-2,
                base.with_member(m),
                StepSchedule::to(14.0),
                ProbeSet::scalars_only(vec![1]),
            )
            .unwrap()
            .with_forcing_mode(mode);
            let out = sim.run(&SpectralField::zero(1).unwrap()).unwrap();
            let series = out.stream.series(ScalarObservable::SobolevSq(1)).unwrap();
            acc.push(2e-2 * stats::time_average(&series, 4.0, 14.0).unwrap());
        }
        acc.mean()
    };
    let per_step = run(burgulence::ForcingMode::PerStep);
    let kicked = run(burgulence::ForcingMode::Kicked { kick_dt: 0.01 });
    assert!(
        (per_step - 0.5).abs() < 0.12 && (kicked - 0.5).abs() < 0.12,
        "dissipation rates {per_step:.3} / {kicked:.3} should both sit near 0.5"
    );
}

#[test]
fn oleinik_observables_stay_bounded_in_steady_state() {
    // shock-sensitive observables settle to O(1) values under the default band
    let spec = ForcingSpec::inverse_s_bandlimited(4, 1.0, 3003, 0);
    let mut sim = Simulation::new(
        1024,
        1e-2,
        spec,
        StepSchedule::to(10.0),
        ProbeSet {
            oleinik: true,
            ..ProbeSet::default()
        },
    )
    .unwrap();
    let out = sim.run(&SpectralField::zero(1).unwrap()).unwrap();
    for s in out.stream.samples.iter().filter(|s| s.t >= 2.0) {
        let o = s.oleinik.unwrap();
        assert!(o.sup_norm < 10.0 && o.grad_l1 < 40.0 && o.grad_plus_sup < 100.0);
    }
    let grid = GridField::from_fn(8, |x| (TWO_PI * x).sin()).unwrap();
    assert!(grid.oleinik_observables().grad_plus_sup > 0.0);
}
