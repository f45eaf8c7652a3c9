use levelcross::closedform::{compare_with_oracle, match_initial, recover_a1, SeriesSystem};
use levelcross::fields::{detuning_n3, phase_general, FieldConfig, N2Config, N3Config};
use levelcross::oracle::{
    circular_distance, integrate, integrate_with_stops, mean_detuning, monodromy, Drive, FnDrive, OdeOptions,
};
use levelcross::{Complex64, Error, Sign, StateVector};

fn tight() -> OdeOptions {
    OdeOptions::with_tolerances(1e-12, 1e-14)
}

/// (name, detuning, U0, period)
type Family = (String, Box<dyn Fn(f64) -> f64>, f64, f64);

fn families() -> Vec<Family> {
    let general = FieldConfig::new(0.8, 0.4, -0.7, 1.3, 1.0, 0.2).unwrap();
    let n2 = N2Config::scaled_unit(1.0, 2.0).unwrap();
    let n3 = N3Config::new(0.5, -3.0, Sign::Plus).unwrap();
    vec![
        ("general".into(), Box::new(move |t| general.detuning(t)), general.u0, general.period()),
        ("n2".into(), Box::new(move |t| n2.detuning(t)), n2.u0, n2.period()),
        ("n3".into(), Box::new(move |t| n3.detuning(t)), n3.u0, n3.period()),
    ]
}

#[test]
fn norm_is_conserved_over_ten_periods() {
    let opts = OdeOptions::default();
    for (name, det, u0, period) in families() {
        let drive = FnDrive { rabi: move |_| u0, detuning: det };
        let traj = integrate(&drive, StateVector::ground(), (0.0, 10.0 * period), &opts).unwrap();
        assert!(traj.norm_drift <= 100.0 * opts.rtol, "{name}: {}", traj.norm_drift);
    }
}

#[test]
fn tighter_tolerance_reduces_rabi_error() {
    let (u0, d1) = (1.0_f64, 0.4_f64);
    let r = (4.0 * u0 * u0 + d1 * d1).sqrt();
    let drive = FnDrive { rabi: move |_| u0, detuning: move |_| d1 };
    let t_end = 20.0;
    let exact = 4.0 * u0 * u0 / (r * r) * (0.5 * r * t_end).sin().powi(2);
    let errors: Vec<f64> = [1e-5, 1e-7, 1e-9, 1e-11]
        .iter()
        .map(|&rtol| {
            let p =
                integrate(&drive, StateVector::ground(), (0.0, t_end), &OdeOptions::with_tolerances(rtol, rtol * 1e-2))
                    .unwrap()
                    .final_state()
                    .population2();
            (p - exact).abs()
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] < w[0], "{errors:?}");
    }
    // a 5th-order method tracks the tolerance roughly proportionally
    assert!(errors[0] / errors[3] > 1e3, "{errors:?}");
}

#[test]
fn forward_backward_round_trip_all_families() {
    for (name, det, u0, period) in families() {
        let drive = FnDrive { rabi: move |_| u0, detuning: det };
        let s0 = StateVector::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8), 0.1);
        let fwd = integrate(&drive, s0, (0.0, period), &tight()).unwrap().final_state();
        let back = integrate(&drive, fwd, (period, 0.0), &tight()).unwrap().final_state();
        let d = (back.a1 - s0.a1).norm().max((back.a2 - s0.a2).norm()).max((back.phase - s0.phase).abs());
        assert!(d <= 1e-8, "{name}: {d}");
    }
}

#[test]
fn monodromy_exponents_do_not_depend_on_reference_time() {
    let cfg = N2Config::scaled_unit(1.3, 3.0).unwrap();
    let base = monodromy(&cfg, cfg.period(), 0.0, &tight()).unwrap().exponents;
    for t_ref in [0.7, 2.1, -4.0] {
        let e = monodromy(&cfg, cfg.period(), t_ref, &tight()).unwrap().exponents;
        let d = (circular_distance(e[0], base[0], 1.0).max(circular_distance(e[1], base[1], 1.0)))
            .min(circular_distance(e[0], base[1], 1.0).max(circular_distance(e[1], base[0], 1.0)));
        assert!(d <= 1e-9, "t_ref={t_ref}: {d}");
    }
}

#[test]
fn monodromy_example_values() {
    let cfg = N2Config::scaled_unit(1.0, 2.0).unwrap();
    let spec = monodromy(&cfg, cfg.period(), 0.0, &tight()).unwrap();
    let mut e = spec.exponents;
    e.sort_by(f64::total_cmp);
    let s = 2f64.sqrt();
    // {1 − √2, 1 + √2} reduced to [−1/2, 1/2)
    assert!((e[0] - (1.0 - s)).abs() < 1e-9 && (e[1] - (s - 1.0)).abs() < 1e-9, "{e:?}");
    for mu in spec.eigenvalues {
        assert!((mu.norm() - 1.0).abs() < 1e-9);
    }

    // U₀ → 0: both exponents collapse onto Δ₁ − 2 ≡ 0 (mod 1)
    let weak = N2Config::scaled_unit(1e-8, 2.0).unwrap();
    let spec = monodromy(&weak, weak.period(), 0.0, &tight()).unwrap();
    assert!(spec.degenerate);
    for x in spec.exponents {
        assert!(circular_distance(x, 0.0, 1.0) < 1e-7);
    }
}

#[test]
fn mean_detuning_regressions() {
    // (1/T)∫δ_t = Δ₁ + sign(1 − a)Δ₂ for the general family
    for cfg in [
        FieldConfig::new(1.0, 0.4, -0.7, 1.3, 1.0, 0.2).unwrap(),
        FieldConfig::new(1.0, 16.0, -25.0 / 16.0, -15.0 / 16.0, 1.0, 0.0).unwrap(),
        FieldConfig::new(1.0, 3.0, 2.0, 0.0, 2.0, 0.0).unwrap(),
        FieldConfig::new(1.0, 2.5, 0.3, 0.9, 0.7, -1.0).unwrap(),
    ] {
        let mean = mean_detuning(&cfg, cfg.period(), cfg.t0).unwrap();
        let expect = cfg.delta1 + (1.0 - cfg.a).signum() * cfg.delta2;
        assert!((mean - expect).abs() < 1e-10, "{cfg:?}: {mean}");
        let from_phase = phase_general(&cfg, cfg.t0 + cfg.period()) / cfg.period();
        assert!((from_phase - expect).abs() < 1e-12);
    }
    // printed N = 3 detuning at (0.5, −3, +) has a < 1 and Δ₂ = 3: mean Δ₁ + Δ₂ = 0
    let n3 = N3Config::new(0.5, -3.0, Sign::Plus).unwrap();
    let mean = mean_detuning(&n3, n3.period(), 0.0).unwrap();
    assert!(mean.abs() < 1e-10, "{mean}");
    assert!(detuning_n3(0.5, -3.0, Sign::Plus, 0.3).is_ok());
}

#[test]
fn recovered_a1_matches_oracle() {
    let cfg = N2Config::scaled_unit(1.0, 2.0).unwrap();
    let span = 2.0 * cfg.period();
    let traj = integrate(&cfg, StateVector::ground(), (0.0, span), &tight()).unwrap();
    let h = 1e-3;
    for k in 1..40 {
        let t = span * k as f64 / 40.0;
        let a2 = |s: f64| traj.at(s).unwrap().a2;
        let da2 = (a2(t - 2.0 * h) - a2(t + 2.0 * h) + (a2(t + h) - a2(t - h)) * 8.0) / (12.0 * h);
        let s = traj.at(t).unwrap();
        let a1 = recover_a1(cfg.u0, da2, s.phase).unwrap();
        assert!((a1 - s.a1).norm() < 1e-7, "t={t}: {a1} vs {}", s.a1);
    }
}

#[test]
fn matched_closed_form_conserves_norm() {
    let cfg = N2Config::scaled_unit(2.0, 3.0).unwrap();
    let s0 = StateVector::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8), 0.0);
    let m = match_initial(cfg, s0, 0.0).unwrap();
    for k in 0..=300 {
        let t = 5.0 * cfg.period() * k as f64 / 300.0;
        let n = m.state(t).unwrap().norm_sqr();
        assert!((n - 1.0).abs() <= 1e-9 * 5.0, "t={t}: {n}");
    }
}

#[test]
fn matching_in_physical_units_with_offsets() {
    let cfg = N2Config::new(1.4, 3.25, 1.3, 0.4).unwrap();
    let s0 = StateVector::new(Complex64::new(0.0, 0.8), Complex64::new(0.6, 0.0), 0.3);
    let m = match_initial(cfg, s0, 1.7).unwrap();
    let cmp = compare_with_oracle(&m, &cfg, 1.7 + 3.0 * cfg.period(), 301, &tight()).unwrap();
    assert!(cmp.max_deviation < 1e-8, "{}", cmp.max_deviation);
    for (a, o) in cmp.analytic.iter().zip(&cmp.oracle) {
        assert!((a.a1 - o.a1).norm() < 1e-8);
        assert!((a.phase - o.phase).abs() < 1e-8);
    }
}

#[test]
fn floquet_return_of_the_full_state() {
    // One period later the matched state agrees with the oracle in the
    // co-moving basis (a₁e^{iδ}, a₂).
    let cfg = N2Config::scaled_unit(1.0, 2.0).unwrap();
    let m = match_initial(cfg, StateVector::ground(), 0.0).unwrap();
    let t_end = cfg.period();
    let end = m.state(t_end).unwrap();
    let traj = integrate_with_stops(&cfg, StateVector::ground(), (0.0, t_end), &[t_end], &tight()).unwrap();
    let o = traj.final_state();
    let co = |s: &StateVector| s.a1 * Complex64::from_polar(1.0, s.phase);
    assert!((co(&end) - co(&o)).norm() < 1e-9);
    assert!((end.a2 - o.a2).norm() < 1e-9);
}

#[test]
fn untruncated_series_cannot_reach_the_physical_circle() {
    let cfg = FieldConfig::new(0.7, 0.09, 0.3, 0.55, 1.0, 0.0).unwrap();
    let sys = SeriesSystem::new(&cfg, 40).unwrap();
    assert!(!sys.plus.series.terminated);
    assert!(matches!(match_initial(sys, StateVector::ground(), 0.0), Err(Error::Domain(_))));
}
