//! Acceptance criteria 1-11. Prints one line per criterion and exits
//! nonzero if any fails.

use std::fs;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use cns_core::config::RunConfig;
use cns_core::harness::{checkpoint_dir, resume_config, resume_simulation, run_simulation};
use cns_core::heat::{heat_solve, parabolic_regularity_check};
use cns_core::initial::{generate_initial, InitialConditionSpec, Preset};
use cns_core::integrate::{run, KeepStates};
use cns_core::monitor::{
    conservation_report, dissipation_wavenumber_c, dissipation_wavenumber_u, wavenumber_log_bound, DiagnosticsRecord,
    Monitor, MonitorConfig,
};
use cns_core::random::{random_scalar, random_vector, Spectrum};
use cns_core::verify::{bernstein_constant, budget_rms, scaling_commutation, standard_budget_data};
use cns_core::{make_grid, DyadicBank, ModelParams, RealField, SpectralField, State, TorusGrid};

type Outcome = Result<String, String>;

/// Every monitored record produced by the runs below, for the checks that
/// must hold at every step of every run.
#[derive(Default)]
struct Seen {
    records: usize,
    max_divergence: f64,
    separation_failures: usize,
}

impl Seen {
    fn absorb(&mut self, recs: &[DiagnosticsRecord]) {
        self.records += recs.len();
        for r in recs {
            self.max_divergence = self.max_divergence.max(r.max_divergence);
            self.separation_failures += !r.separation_ok as usize;
        }
    }
}

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn monitored(s0: &State, params: &ModelParams, t_end: f64, dt: f64, seen: &mut Seen) -> Vec<DiagnosticsRecord> {
    let bank = Arc::new(DyadicBank::new(s0.grid().clone()));
    let mut m = Monitor::new(bank, MonitorConfig::default(), params.clone());
    let traj = run(s0, t_end, dt, params, KeepStates::None, |_, s| m.observe(s)).expect("run completes");
    let recs: Vec<_> = traj.records().cloned().collect();
    seen.absorb(&recs);
    recs
}

fn partition_of_unity() -> Outcome {
    let mut worst: f64 = 0.0;
    for (dim, n) in [(2, 16), (2, 32), (2, 64), (3, 16), (3, 32)] {
        worst = worst.max(DyadicBank::new(make_grid(dim, n).unwrap()).partition_error());
    }
    check(worst < 1e-12, format!("max error {worst:.2e} < 1e-12"))
}

fn bernstein() -> Outcome {
    let a = bernstein_constant(&make_grid(2, 32).unwrap(), 32, 7, 100);
    let b = bernstein_constant(&make_grid(2, 64).unwrap(), 32, 7, 100);
    let var = (a - b).abs() / a.max(b);
    check(var < 0.10, format!("constant {a:.4} (N=32) vs {b:.4} (N=64), variation {var:.3} < 0.10"))
}

fn leray(seen: &Seen) -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, (dim, n)) in [(2, 32), (3, 16)].iter().cycle().take(50).enumerate() {
        let g = make_grid(*dim, *n).unwrap();
        let f = random_vector(&g, 3, i as u64, Spectrum::band(0.0, *n as f64));
        let p = f.leray_project();
        worst = worst.max((&p.leray_project() - &p).l2_norm() / f.l2_norm());
        let grad = random_scalar(&g, 4, i as u64, Spectrum::smooth(8.0, 0.3)).gradient();
        worst = worst.max(grad.leray_project().l2_norm() / grad.l2_norm());
    }
    check(
        worst < 1e-12 && seen.max_divergence < 1e-10 && seen.records > 0,
        format!(
            "projection error {worst:.2e} < 1e-12, max divergence {:.2e} < 1e-10 over {} states",
            seen.max_divergence, seen.records
        ),
    )
}

fn linear_exactness() -> Outcome {
    let g = make_grid(2, 32).unwrap();
    let u0 = random_scalar(&g, 9, 0, Spectrum::smooth(10.0, 0.2));
    let zero = SpectralField::zeros(g.clone(), 1);
    let t = 0.37;
    let traj = heat_solve(&u0, |_| zero.clone(), t, 0.01).unwrap();
    let heat = traj
        .last()
        .coefficients()
        .iter()
        .zip(u0.coefficients())
        .zip(g.k_squared())
        .map(|((a, b), k2)| (a - b * (-k2 * t).exp()).norm())
        .fold(0.0, f64::max);

    let spec = InitialConditionSpec {
        preset: Preset::TaylorGreen,
        amplitude: 1.0,
        ..Default::default()
    };
    let s0 = generate_initial(&spec, &g).unwrap();
    let traj = run(&s0, 0.5, 0.01, &ModelParams::default_for(2), KeepStates::None, |_, _| ()).unwrap();
    let u = traj.final_state.u().real();
    let decay = (-1.0f64).exp();
    let mut tg: f64 = 0.0;
    for i in 0..g.len() {
        let x = g.point(i);
        tg = tg.max((u.component(0)[i] - decay * x[0].sin() * x[1].cos()).abs());
        tg = tg.max((u.component(1)[i] + decay * x[0].cos() * x[1].sin()).abs());
    }
    check(
        heat < 1e-12 && tg < 1e-8,
        format!("heat per-mode error {heat:.2e} < 1e-12, Taylor-Green error {tg:.2e} < 1e-8"),
    )
}

fn parabolic_harness() -> Outcome {
    let g = make_grid(2, 32).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let (u0, f0) = if i % 2 == 0 {
            let k = [1 + (i % 5) as i64, (i % 3) as i64];
            let mode = |phase: f64| {
                RealField::from_fn(g.clone(), 1, |x, _| (k[0] as f64 * x[0] + k[1] as f64 * x[1] + phase).sin())
                    .unwrap()
                    .to_spectral()
            };
            (mode(0.0), mode(1.0).scale((i % 4) as f64))
        } else {
            let shape = Spectrum::smooth(if i % 4 == 1 { 3.0 } else { 8.0 }, 0.3);
            (random_scalar(&g, 21, i, shape), random_scalar(&g, 22, i, shape).scale((i % 3) as f64))
        };
        let omega = (i % 7) as f64;
        let traj = heat_solve(&u0, |t| f0.scale((omega * t).cos()), 1.0, 0.01).unwrap();
        for alpha in [-1.0, 0.0, 1.0] {
            worst = worst.max(parabolic_regularity_check(&traj, alpha).unwrap().ratio_u);
        }
    }
    check(worst <= 1.05, format!("max ratio {worst:.4} <= 1.05 over 50 inputs and 3 exponents"))
}

fn conservation(seen: &mut Seen) -> Outcome {
    let g = make_grid(2, 64).unwrap();
    let spec = InitialConditionSpec {
        preset: Preset::NearHomogeneousBacteria,
        amplitude: 0.2,
        seed: 1,
        ..Default::default()
    };
    let s0 = generate_initial(&spec, &g).unwrap();
    let recs = monitored(&s0, &ModelParams::default_for(2), 1.0, 1e-3, seen);
    let rep = conservation_report(&recs);
    check(
        rep.mass_drift < 1e-8 && rep.max_c_increase <= 1e-8,
        format!(
            "relative mass drift {:.2e} < 1e-8, largest step increase of max c {:.2e} <= 1e-8",
            rep.mass_drift, rep.max_c_increase
        ),
    )
}

fn budget_convergence(seen: &mut Seen) -> Outcome {
    let g = make_grid(2, 32).unwrap();
    let s0 = standard_budget_data(&g, 0).unwrap();
    let p = ModelParams::default_for(2);
    let coarse = budget_rms(&s0, &p, 0.2, 0.005).unwrap();
    let fine = budget_rms(&s0, &p, 0.2, 0.0025).unwrap();
    monitored(&s0, &p, 0.2, 0.005, seen);
    let ratios: Vec<f64> = coarse.iter().zip(&fine).map(|(a, b)| a / b).collect();
    let ok = ratios.iter().all(|r| (r - 4.0).abs() <= 1.0);
    check(ok, format!("ratios (n, c, u) = ({:.3}, {:.3}, {:.3}) within 4 +/- 25%", ratios[0], ratios[1], ratios[2]))
}

fn wavenumbers(seen: &Seen) -> Outcome {
    let cfg = MonitorConfig::default();
    let g = make_grid(2, 128).unwrap();
    let bank = DyadicBank::new(g.clone());
    let shear = |a: f64| {
        RealField::from_fn(g.clone(), 2, |x, c| if c == 1 { a * (32.0 * x[0]).cos() } else { 0.0 })
            .unwrap()
            .to_spectral()
    };
    let u = [shear(4.0), shear(1.0), SpectralField::zeros(g.clone(), 2)].map(|f| {
        let w = dissipation_wavenumber_u(&bank, &f, &cfg);
        (w.lambda, w.q)
    });
    let g = make_grid(2, 32).unwrap();
    let bank = DyadicBank::new(g.clone());
    let unit = RealField::from_fn(g.clone(), 1, |x, _| (8.0 * x[0]).cos()).unwrap();
    let norm = unit.lp_norm(cfg.r);
    let c = [0.02, 0.001].map(|rho| {
        let w = dissipation_wavenumber_c(&bank, &unit.to_spectral().scale(rho / norm), &cfg);
        (w.lambda, w.q)
    });
    let examples = u == [(32, 5), (1, 0), (1, 0)] && c == [(8, 3), (1, 0)];
    check(
        examples && seen.separation_failures == 0 && seen.records > 0,
        format!(
            "examples u {u:?} c {c:?}, separation violated at {} of {} states",
            seen.separation_failures, seen.records
        ),
    )
}

fn scaling() -> Outcome {
    let g = make_grid(2, 64).unwrap();
    let (commute, integ) = scaling_commutation(&g, 0.1, 0.005).unwrap();
    let ratio = commute / integ;
    check(
        ratio <= 10.0,
        format!("commutation {commute:.2e} vs integrator error {integ:.2e}, ratio {ratio:.3} <= 10"),
    )
}

fn log_bound_battery(g: &Arc<TorusGrid>, seen: &mut Seen) -> (f64, i32) {
    let params = ModelParams::default_for(2);
    let mut worst: f64 = 0.0;
    let mut q_max = 0;
    for seed in 0..20 {
        let spec = InitialConditionSpec {
            preset: Preset::RandomSmooth,
            amplitude: 1.0 + 0.1 * seed as f64,
            seed,
            kmax: 4.0,
            decay: 0.3,
            n_mean: 3.0,
            c_mean: 3.0,
            ..Default::default()
        };
        let s0 = generate_initial(&spec, g).unwrap();
        let recs = monitored(&s0, &params, 0.2, 0.005, seen);
        let lb = wavenumber_log_bound(&recs);
        worst = worst.max(lb.max_ratio);
        q_max = q_max.max(lb.max_q_u);
    }
    (worst, q_max)
}

fn log_bound(seen: &mut Seen) -> Outcome {
    let (a, qa) = log_bound_battery(&make_grid(2, 32).unwrap(), seen);
    let (b, qb) = log_bound_battery(&make_grid(2, 64).unwrap(), seen);
    let var = (a - b).abs() / a.max(b);
    check(
        a.is_finite() && b.is_finite() && a > 0.0 && var < 0.20,
        format!("max ratio {a:.4} (N=32, Q_u up to {qa}) vs {b:.4} (N=64, Q_u up to {qb}), variation {var:.3} < 0.20"),
    )
}

fn determinism_and_restart() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let text = "grid.n = 32\nintegrator.dt = 0.005\nintegrator.t_end = 0.2\nic.preset = random_smooth\nic.seed = 3\n\
                output.checkpoint_every = 20";
    let (mut cfg, _) = RunConfig::from_text(text).unwrap();
    cfg.output.dir = dir.path().join("run");
    let files = ["diagnostics.csv", "spectra.csv", "summary.txt"];
    let read = |out: &std::path::Path| files.map(|f| fs::read(out.join(f)).unwrap());
    let full = run_simulation(&cfg).unwrap();
    let first = read(&cfg.output.dir);
    run_simulation(&cfg).unwrap();
    let identical = first == read(&cfg.output.dir);

    let cp = checkpoint_dir(&cfg.output.dir, 20);
    let (mut rcfg, _) = resume_config(&cp, &[]).unwrap();
    rcfg.output.dir = dir.path().join("resumed");
    let resumed = resume_simulation(&cp, &rcfg).unwrap();
    let (a, b) = (&resumed.final_state, &full.final_state);
    let err = [(a.n(), b.n()), (a.c(), b.c()), (a.u(), b.u())]
        .iter()
        .map(|(x, y)| (x.spec() - y.spec()).max_abs_coefficient())
        .fold(0.0, f64::max);
    check(
        identical && err <= 1e-12 && a.time == b.time,
        format!("repeated outputs byte-identical: {identical}, restart difference {err:.2e} <= 1e-12"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut seen = Seen::default();
    // runs that feed the every-step checks of 3 and 8 go first
    let c6 = conservation(&mut seen);
    let c7 = budget_convergence(&mut seen);
    let c10 = log_bound(&mut seen);
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "partition of unity", partition_of_unity()),
        (2, "Bernstein constant", bernstein()),
        (3, "Leray projector", leray(&seen)),
        (4, "linear exactness", linear_exactness()),
        (5, "parabolic regularity", parabolic_harness()),
        (6, "conservation", c6),
        (7, "budget residual convergence", c7),
        (8, "dissipation wavenumbers", wavenumbers(&seen)),
        (9, "scaling commutation", scaling()),
        (10, "wavenumber log bound", c10),
    ];
    results.push((11, "determinism and restart", determinism_and_restart()));
    let mut failed = 0;
    for (i, name, r) in &results {
        match r {
            Ok(msg) => println!("criterion {i:>2} PASS  {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {i:>2} FAIL  {name}: {msg}");
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
