//! Dissipation wavenumbers, the low-mode functional and the shell budget on
//! fields whose answers follow directly from the definitions.

use std::f64::consts::PI;
use std::sync::Arc;

use cns_core::integrate::{run, KeepStates};
use cns_core::monitor::{
    conservation_report, criterion_f, criterion_integral, dissipation_wavenumber_c, dissipation_wavenumber_u,
    flux_terms, shell_energy, transport_dual_check, wavenumber_log_bound, BudgetWeights, Monitor, MonitorConfig,
};
use cns_core::random::{random_vector, Spectrum};
use cns_core::scaling::scale_transform;
use cns_core::{make_grid, DyadicBank, ModelParams, RealField, SpectralField, State, TorusGrid};

fn scalar(g: &Arc<TorusGrid>, f: impl Fn(&[f64]) -> f64) -> RealField {
    RealField::from_fn(g.clone(), 1, |x, _| f(x)).unwrap()
}

/// `(0, a cos(k x₁))`, divergence-free with pointwise magnitude `|a cos|`.
fn shear(g: &Arc<TorusGrid>, a: f64, k: f64) -> SpectralField {
    RealField::from_fn(g.clone(), 2, |x, c| if c == 1 { a * (k * x[0]).cos() } else { 0.0 })
        .unwrap()
        .to_spectral()
}

fn state(_g: &Arc<TorusGrid>, n: RealField, c: RealField, u: SpectralField) -> State {
    State::from_spectral(0.0, &n.to_spectral(), &c.to_spectral(), &u).unwrap()
}

#[test]
fn velocity_wavenumber_examples() {
    let g = make_grid(2, 128).unwrap();
    let bank = DyadicBank::new(g.clone());
    let cfg = MonitorConfig::default();
    let w = dissipation_wavenumber_u(&bank, &SpectralField::zeros(g.clone(), 2), &cfg);
    assert_eq!((w.lambda, w.q), (1, 0));
    // |k| = 32 sits in shell 5 alone; 2⁻⁵·4 = 0.125 ≥ 0.1
    let w = dissipation_wavenumber_u(&bank, &shear(&g, 4.0, 32.0), &cfg);
    assert_eq!((w.lambda, w.q), (32, 5));
    let w = dissipation_wavenumber_u(&bank, &shear(&g, 1.0, 32.0), &cfg);
    assert_eq!((w.lambda, w.q), (1, 0));
}

#[test]
fn oxygen_wavenumber_examples() {
    let g = make_grid(2, 32).unwrap();
    let bank = DyadicBank::new(g.clone());
    let cfg = MonitorConfig::default();
    assert_eq!(cfg.r, 3.2);
    let w = dissipation_wavenumber_c(&bank, &SpectralField::zeros(g.clone(), 1), &cfg);
    assert_eq!((w.lambda, w.q), (1, 0));
    let unit = scalar(&g, |x| (8.0 * x[0]).cos());
    let norm = unit.lp_norm(cfg.r);
    for (rho, expect) in [(0.02, (8, 3)), (0.001, (1, 0))] {
        let c = unit.to_spectral().scale(rho / norm);
        assert!((bank.shell_norm(&c, 3, cfg.r).unwrap() - rho).abs() < 1e-14);
        let w = dissipation_wavenumber_c(&bank, &c, &cfg);
        assert_eq!((w.lambda, w.q), expect, "rho = {rho}");
    }
    // 2^{9/3.2} · 0.02
    assert!((2f64.powf(9.0 / 3.2) * 0.02 - 0.1405).abs() < 1e-4);
}

#[test]
fn criterion_examples() {
    let g = make_grid(2, 32).unwrap();
    let bank = DyadicBank::new(g.clone());
    let cfg = MonitorConfig::default();
    let zero_u = SpectralField::zeros(g.clone(), 2);
    let flat = state(&g, RealField::zeros(g.clone(), 1), scalar(&g, |_| 2.0), zero_u.clone());
    assert_eq!(criterion_f(&flat, &bank, &cfg).value, 0.0);

    let a = 0.7;
    let s = state(&g, RealField::zeros(g.clone(), 1), scalar(&g, |x| a * x[0].sin()), zero_u);
    let f = criterion_f(&s, &bank, &cfg);
    assert!((f.value - a * a).abs() < 1e-12);

    let b = 1.3;
    let u = RealField::from_fn(g.clone(), 2, |x, c| if c == 1 { b * x[0].sin() } else { 0.0 })
        .unwrap()
        .to_spectral()
        .leray_project();
    let s = state(&g, RealField::zeros(g.clone(), 1), RealField::zeros(g.clone(), 1), u);
    let f = criterion_f(&s, &bank, &cfg);
    assert!((f.value - b).abs() < 1e-12);
    assert_eq!(f.grad_c_part, 0.0);

    assert_eq!(criterion_integral(&[0.0, 0.1, 0.2], &[0.0; 3]).integral, 0.0);
    let c = criterion_integral(&[0.0, 0.2, 0.5], &[2.0; 3]);
    assert!((c.integral - 1.0).abs() < 1e-15);
    assert_eq!(c.max, 2.0);
}

#[test]
fn criterion_integral_of_decaying_oxygen_converges() {
    let g = make_grid(2, 16).unwrap();
    let bank = Arc::new(DyadicBank::new(g.clone()));
    let a: f64 = 0.8;
    let s0 = state(&g, RealField::zeros(g.clone(), 1), scalar(&g, |x| a * x[0].sin()), SpectralField::zeros(g.clone(), 2));
    let params = ModelParams::default_for(2);
    let t_end: f64 = 1.0;
    // ∫ A² e^{-2t} dt
    let exact = a * a * (1.0 - (-2.0 * t_end).exp()) / 2.0;
    let mut errors = Vec::new();
    for dt in [0.05, 0.025] {
        let mut m = Monitor::new(bank.clone(), MonitorConfig::default(), params.clone());
        let traj = run(&s0, t_end, dt, &params, KeepStates::None, |_, s| m.observe(s)).unwrap();
        let last = traj.entries.last().unwrap();
        let times = traj.times();
        let f: Vec<f64> = traj.records().map(|r| r.f.value).collect();
        assert!((criterion_integral(&times, &f).integral - last.record.f_integral).abs() < 1e-15);
        errors.push((last.record.f_integral - exact).abs());
    }
    assert!((errors[0] / errors[1] - 4.0).abs() < 0.2, "{errors:?}");
}

#[test]
fn shell_energy_examples() {
    let g = make_grid(2, 32).unwrap();
    let bank = DyadicBank::new(g.clone());
    let w = BudgetWeights::new(&bank, -0.1);
    let zero = State::zero(&g);
    let e = shell_energy(&zero, &w);
    assert_eq!((e.n, e.c, e.u), (0.0, 0.0, 0.0));
    let one = state(&g, scalar(&g, |x| x[0].cos()), RealField::zeros(g.clone(), 1), SpectralField::zeros(g.clone(), 2));
    assert!((shell_energy(&one, &w).n - 2.0 * PI * PI).abs() < 1e-12);
    // |k| = 1 in shell 0 and |k| = 4 in shell 2, each with ‖·‖₂² = 2π²
    let two = state(
        &g,
        scalar(&g, |x| x[0].cos() + (4.0 * x[1]).cos()),
        scalar(&g, |x| (4.0 * x[1]).cos()),
        SpectralField::zeros(g.clone(), 2),
    );
    let e = shell_energy(&two, &w);
    assert!((e.n - 2.0 * PI * PI * (1.0 + 4f64.powf(-0.2))).abs() < 1e-11);
    assert!((e.c - 2.0 * PI * PI * 4f64.powf(1.8)).abs() < 1e-11);
}

#[test]
fn flux_examples() {
    let g = make_grid(2, 32).unwrap();
    let bank = DyadicBank::new(g.clone());
    let w = BudgetWeights::new(&bank, -0.1);
    let p = ModelParams::default_for(2);
    let n = scalar(&g, |x| x[0].cos());
    let c = scalar(&g, |x| 1.0 + 0.5 * x[1].sin());

    let no_u = state(&g, n.clone(), c.clone(), SpectralField::zeros(g.clone(), 2));
    let f = flux_terms(&no_u, &w, &p);
    assert_eq!((f.i, f.ii, f.iii), (0.0, 0.0, 0.0));
    let no_n = state(&g, RealField::zeros(g.clone(), 1), c, shear(&g, 1.0, 1.0));
    let f = flux_terms(&no_n, &w, &p);
    assert_eq!((f.iii, f.iv, f.v, f.vi), (0.0, 0.0, 0.0, 0.0));

    // n g = (0, -cos x₁) against u = (0, cos x₁): ∫ = -2π², weight 1 at |k| = 1
    let s = state(&g, n, RealField::zeros(g.clone(), 1), shear(&g, 1.0, 1.0));
    assert!((flux_terms(&s, &w, &p).iv - 2.0 * PI * PI).abs() < 1e-12);
}

#[test]
fn transport_term_cancels_on_solenoidal_fields() {
    let g = make_grid(2, 32).unwrap();
    let bank = DyadicBank::new(g.clone());
    let tg = RealField::from_fn(g.clone(), 2, |x, c| match c {
        0 => x[0].sin() * x[1].cos(),
        _ => -x[0].cos() * x[1].sin(),
    })
    .unwrap()
    .to_spectral();
    let rnd = random_vector(&g, 8, 1, Spectrum::smooth(6.0, 0.2)).leray_project();
    for u in [shear(&g, 1.0, 3.0), tg, rnd] {
        let (direct, commutator) = transport_dual_check(&u, &bank, -0.1);
        assert!((direct - commutator).abs() < 1e-10, "{direct} vs {commutator}");
    }
}

#[test]
fn budget_of_linear_runs_closes() {
    let g = make_grid(2, 16).unwrap();
    let bank = Arc::new(DyadicBank::new(g.clone()));
    let params = ModelParams::default_for(2);
    let zero = State::zero(&g);
    let mut m = Monitor::new(bank.clone(), MonitorConfig::default(), params.clone());
    let traj = run(&zero, 0.1, 0.01, &params, KeepStates::None, |_, s| m.observe(s)).unwrap();
    assert!(traj.records().all(|r| r.residual.n == 0.0 && r.residual.c == 0.0 && r.residual.u == 0.0));

    let heat = state(
        &g,
        RealField::zeros(g.clone(), 1),
        scalar(&g, |x| x[0].sin() + 0.3 * (2.0 * x[1]).cos()),
        SpectralField::zeros(g.clone(), 2),
    );
    let mut m = Monitor::new(bank, MonitorConfig::default(), params.clone());
    let traj = run(&heat, 0.5, 0.05, &params, KeepStates::None, |_, s| m.observe(s)).unwrap();
    for r in traj.records() {
        assert!(r.residual.c.abs() < 1e-10, "{}", r.residual.c);
    }
}

#[test]
fn log_bound_examples() {
    let g = make_grid(2, 128).unwrap();
    let bank = Arc::new(DyadicBank::new(g.clone()));
    let params = ModelParams::new(1.0, vec![0.0, 0.0]).unwrap();
    let mut m = Monitor::new(bank.clone(), MonitorConfig::default(), params.clone());
    let still = state(&g, scalar(&g, |x| 1.0 + 0.1 * x[0].cos()), scalar(&g, |_| 1.0), SpectralField::zeros(g.clone(), 2));
    let recs = vec![m.observe(&still)];
    let lb = wavenumber_log_bound(&recs);
    assert_eq!((lb.max_ratio, lb.max_q_u), (0.0, 0));

    let a = 4.0;
    let s = state(&g, RealField::zeros(g.clone(), 1), RealField::zeros(g.clone(), 1), shear(&g, a, 32.0));
    let rec = Monitor::new(bank, MonitorConfig::default(), params).observe(&s);
    // ‖u‖_{Ḣ^{0.9}} = 32^{0.9} · a · √(2π²)
    let sob = 32f64.powf(0.9) * a * (2.0 * PI * PI).sqrt();
    assert!((rec.u_sobolev - sob).abs() < 1e-9 * sob);
    let lb = wavenumber_log_bound(&[rec]);
    assert_eq!(lb.max_q_u, 5);
    assert!((lb.max_ratio - 5.0 / (1.0 + sob.log2())).abs() < 1e-12);
}

#[test]
fn conservation_of_zero_and_heat_runs() {
    let g = make_grid(2, 16).unwrap();
    let bank = Arc::new(DyadicBank::new(g.clone()));
    let params = ModelParams::new(1.0, vec![0.0, 0.0]).unwrap();
    let mut m = Monitor::new(bank.clone(), MonitorConfig::default(), params.clone());
    let traj = run(&State::zero(&g), 0.1, 0.01, &params, KeepStates::None, |_, s| m.observe(s)).unwrap();
    let recs: Vec<_> = traj.records().cloned().collect();
    let rep = conservation_report(&recs);
    assert_eq!((rep.mass_drift, rep.max_c_increase, rep.max_neg_n_frac, rep.max_divergence), (0.0, 0.0, 0.0, 0.0));
    assert!(rep.energy_u.iter().all(|(_, e)| *e == 0.0));

    let heat = state(&g, scalar(&g, |x| 2.0 + x[0].sin() * x[1].cos()), RealField::zeros(g.clone(), 1), SpectralField::zeros(g.clone(), 2));
    let mut m = Monitor::new(bank, MonitorConfig::default(), params.clone());
    let traj = run(&heat, 1.0, 0.01, &params, KeepStates::None, |_, s| m.observe(s)).unwrap();
    let recs: Vec<_> = traj.records().cloned().collect();
    assert!(conservation_report(&recs).mass_drift < 1e-12);
}

#[test]
fn doubling_shifts_velocity_spectrum_by_one_shell() {
    let g = make_grid(2, 64).unwrap();
    let bank = DyadicBank::new(g.clone());
    let p = ModelParams::default_for(2);
    for k in [1.0, 2.0, 4.0] {
        let s = state(&g, RealField::zeros(g.clone(), 1), RealField::zeros(g.clone(), 1), shear(&g, 1.0, k));
        let up = scale_transform(&s, 2.0, &p).unwrap();
        let before = bank.shell_norms(s.u().spec(), 2.0);
        let after = bank.shell_norms(up.state.u().spec(), 2.0);
        let q = k.log2() as i32;
        let (b, a) = (before.get(q).unwrap().l2, after.get(q + 1).unwrap().l2);
        // relabelling keeps ‖·‖₂ on the torus, the amplitude rule multiplies by λ
        assert!((a - 2.0 * b).abs() < 1e-12 * a);
        for sh in &after.shells {
            if sh.q != q + 1 {
                assert!(sh.l2 < 1e-12);
            }
        }
    }
}
