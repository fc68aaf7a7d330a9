//! Self-check suite: each property is measured on seeded data and compared
//! with an upper bound. The JSON report is a pure function of the options.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::grid::{make_grid, TorusGrid};
use crate::heat::{heat_solve, parabolic_regularity_check};
use crate::initial::{generate_initial, InitialConditionSpec, Preset};
use crate::integrate::{run, KeepStates};
use crate::lp::DyadicBank;
use crate::model::{ModelParams, State};
use crate::monitor::{DiagnosticsRecord, Monitor, MonitorConfig};
use crate::random::{normalise_sup, random_beyond_dealias, random_scalar, random_vector, Spectrum};
use crate::scaling::scale_transform;
use crate::field::{RealField, SpectralField};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    /// Runs the budget check with aliased products; that check must fail.
    pub break_dealias: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            dim: 2,
            n: 32,
            seed: 0,
            break_dealias: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub details: BTreeMap<String, f64>,
}

impl PropertyResult {
    fn new(name: &str, measured: f64, bound: f64, details: BTreeMap<String, f64>) -> Self {
        Self {
            name: name.to_string(),
            passed: measured.is_finite() && measured <= bound,
            measured,
            bound,
            details,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub properties: Vec<PropertyResult>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn details<const K: usize>(pairs: [(&str, f64); K]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    let scale = b.l2_norm();
    let diff = (a - b).l2_norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Largest `‖Δ_q F‖_∞ / (λ_q^{d/2} ‖Δ_q F‖₂)` over every shell and `fields`
/// random draws per shell. The draws are band-limited below `N/2` of the
/// coarsest grid considered, `n_band`, so that finer grids see the same
/// functions.
pub fn bernstein_constant(grid: &Arc<TorusGrid>, n_band: usize, seed: u64, fields: usize) -> f64 {
    let bank = DyadicBank::new(grid.clone());
    let spec = Spectrum::band(0.0, (n_band / 2 - 1) as f64);
    let mut worst: f64 = 0.0;
    for q in bank.shells() {
        for i in 0..fields {
            let tag = 1000 * (q + 1) as u64 + i as u64;
            let f = random_scalar(grid, seed, tag, spec);
            let ratio = bank.bernstein_ratio(&f, q, 2.0, f64::INFINITY).expect("valid shell and exponents");
            worst = worst.max(ratio);
        }
    }
    worst
}

fn partition(opts: &VerifyOptions, bank: &DyadicBank) -> PropertyResult {
    let e = bank.partition_error();
    PropertyResult::new("partition_of_unity", e, 1e-12, details([("q_max", bank.q_max() as f64), ("n", opts.n as f64)]))
}

fn bernstein(opts: &VerifyOptions) -> Result<PropertyResult> {
    let coarse = make_grid(opts.dim, opts.n)?;
    let fine = make_grid(opts.dim, 2 * opts.n)?;
    let a = bernstein_constant(&coarse, opts.n, opts.seed, 10);
    let b = bernstein_constant(&fine, opts.n, opts.seed, 10);
    let variation = (a - b).abs() / a.max(b);
    Ok(PropertyResult::new(
        "bernstein",
        variation,
        0.10,
        details([("constant_n", a), ("constant_2n", b)]),
    ))
}

fn leray(opts: &VerifyOptions, grid: &Arc<TorusGrid>) -> PropertyResult {
    let spec = Spectrum::band(0.0, (opts.n / 2) as f64);
    let (mut idem, mut grad, mut div): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..10 {
        let v = random_vector(grid, opts.seed, 200 + i, spec);
        let p = v.leray_project();
        idem = idem.max(rel(&p.leray_project(), &p));
        div = div.max(p.max_divergence() / v.max_abs_coefficient().max(1.0));
        let g = random_scalar(grid, opts.seed, 300 + i, spec).gradient();
        grad = grad.max(g.leray_project().l2_norm() / g.l2_norm());
    }
    let worst = idem.max(grad);
    PropertyResult::new(
        "leray",
        worst,
        1e-12,
        details([("idempotence", idem), ("gradient_annihilation", grad), ("divergence", div)]),
    )
}

fn heat_exactness(opts: &VerifyOptions, grid: &Arc<TorusGrid>) -> Result<PropertyResult> {
    let u0 = random_scalar(grid, opts.seed, 400, Spectrum::smooth(6.0, 0.3));
    let zero = SpectralField::zeros(grid.clone(), 1);
    let t = 0.5;
    let traj = heat_solve(&u0, |_| zero.clone(), t, 0.05)?;
    let exact: Vec<f64> = grid.k_squared().iter().map(|k2| (-k2 * t).exp()).collect();
    let expect = u0.apply_multiplier(&exact);
    let err = (traj.last() - &expect).max_abs_coefficient();
    Ok(PropertyResult::new("heat_exactness", err, 1e-12, details([("t", t)])))
}

/// Random data for the smoothing estimate: a few modes with random
/// amplitudes, and a source that is a random field modulated in time.
fn lemma_ratio(opts: &VerifyOptions, grid: &Arc<TorusGrid>, trials: usize) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for alpha in [-1.0, 0.0, 1.0] {
        let mut worst: f64 = 0.0;
        for i in 0..trials as u64 {
            let kmax = if i % 2 == 0 { 1.5 } else { 5.0 };
            let u0 = random_scalar(grid, opts.seed, 500 + i, Spectrum::smooth(kmax, 0.2));
            let f0 = random_scalar(grid, opts.seed, 600 + i, Spectrum::smooth(kmax, 0.2)).scale((i % 3) as f64);
            let omega = (i % 5) as f64;
            let traj = heat_solve(&u0, |t| f0.scale((omega * t).cos()), 1.0, 0.01)?;
            worst = worst.max(parabolic_regularity_check(&traj, alpha)?.ratio_u);
        }
        out.insert(format!("alpha_{alpha}"), worst);
    }
    Ok(out)
}

/// The standard nonlinear test data plus a perturbation that lives only on
/// the modes the 2/3 rule removes. A dealiased integrator discards it in the
/// first step; an aliased one keeps feeding it into the resolved modes.
pub fn standard_budget_data(grid: &Arc<TorusGrid>, seed: u64) -> Result<State> {
    let spec = InitialConditionSpec {
        preset: Preset::RandomSmooth,
        amplitude: 0.5,
        seed,
        kmax: 4.0,
        decay: 0.5,
        ..Default::default()
    };
    let s0 = generate_initial(&spec, grid)?;
    let amp = 0.3;
    let hn = normalise_sup(&random_beyond_dealias(grid, seed, 101), amp);
    let hc = normalise_sup(&random_beyond_dealias(grid, seed, 102), amp);
    let hu_parts: Vec<SpectralField> = (0..grid.dim() as u64)
        .map(|a| random_beyond_dealias(grid, seed, 103 + a))
        .collect();
    let hu = normalise_sup(&SpectralField::stack(&hu_parts)?.leray_project(), amp);
    State::from_spectral(
        0.0,
        &(s0.n().spec() + &hn),
        &(s0.c().spec() + &hc),
        &(s0.u().spec() + &hu),
    )
}

/// `sqrt(Σ r² dt / T)` of each residual over every step.
pub fn residual_rms(records: &[(f64, DiagnosticsRecord)]) -> [f64; 3] {
    let span: f64 = records.iter().skip(1).map(|(dt, _)| dt).sum();
    let mut acc = [0.0; 3];
    for (dt, r) in records.iter().skip(1) {
        acc[0] += r.residual.n.powi(2) * dt;
        acc[1] += r.residual.c.powi(2) * dt;
        acc[2] += r.residual.u.powi(2) * dt;
    }
    acc.map(|a| (a / span).sqrt())
}

/// Residual RMS for one time step on the standard data to `t_end`.
pub fn budget_rms(s0: &State, params: &ModelParams, t_end: f64, dt: f64) -> Result<[f64; 3]> {
    let bank = Arc::new(DyadicBank::new(s0.grid().clone()));
    let mut monitor = Monitor::new(bank, MonitorConfig::default(), params.clone());
    let traj = run(s0, t_end, dt, params, KeepStates::None, |info, s| (info.dt, monitor.observe(s)))
        .map_err(|f| f.error)?;
    let recs: Vec<(f64, DiagnosticsRecord)> = traj.entries.into_iter().map(|e| e.record).collect();
    Ok(residual_rms(&recs))
}

fn budget(opts: &VerifyOptions, grid: &Arc<TorusGrid>) -> Result<PropertyResult> {
    let s0 = standard_budget_data(grid, opts.seed)?;
    let mut params = ModelParams::default_for(opts.dim);
    params.dealias = !opts.break_dealias;
    let coarse = budget_rms(&s0, &params, 0.2, 0.005)?;
    let fine = budget_rms(&s0, &params, 0.2, 0.0025)?;
    let ratios: Vec<f64> = coarse.iter().zip(&fine).map(|(a, b)| a / b).collect();
    let worst = ratios.iter().map(|r| (r - 4.0).abs() / 4.0).fold(0.0, f64::max);
    Ok(PropertyResult::new(
        "budget_residual_convergence",
        if worst.is_finite() { worst } else { f64::INFINITY },
        0.25,
        details([
            ("ratio_n", ratios[0]),
            ("ratio_c", ratios[1]),
            ("ratio_u", ratios[2]),
            ("rms_n_dt", coarse[0]),
            ("rms_c_dt", coarse[1]),
            ("rms_u_dt", coarse[2]),
        ]),
    ))
}

/// One-mode-per-field data whose fields interact through every coupling.
pub fn single_mode_state(grid: &Arc<TorusGrid>) -> Result<State> {
    let dim = grid.dim();
    let n = RealField::from_fn(grid.clone(), 1, |x, _| 1.0 + 0.5 * x[0].cos())?;
    let c = RealField::from_fn(grid.clone(), 1, |x, _| 1.0 + 0.5 * x[1].sin())?;
    let u = RealField::from_fn(grid.clone(), dim, |x, a| match a {
        0 => 0.5 * x[0].sin() * x[1].cos(),
        1 => -0.5 * x[0].cos() * x[1].sin(),
        _ => 0.0,
    })?;
    State::new(0.0, n, c, u)
}

fn final_state(s0: &State, params: &ModelParams, t_end: f64, dt: f64) -> Result<State> {
    Ok(run(s0, t_end, dt, params, KeepStates::None, |_, _| ()).map_err(|f| f.error)?.final_state)
}

fn state_rel(a: &State, b: &State) -> f64 {
    rel(a.n().spec(), b.n().spec())
        .max(rel(a.c().spec(), b.c().spec()))
        .max(rel(a.u().spec(), b.u().spec()))
}

/// `(commutation error, integrator error)` of the `λ = 2` scaling:
/// simulate-then-scale against scale-then-simulate (with the rescaled step
/// `dt/4`), and the difference between steps `dt` and `dt/2`.
pub fn scaling_commutation(grid: &Arc<TorusGrid>, t_end: f64, dt: f64) -> Result<(f64, f64)> {
    let params = ModelParams::default_for(grid.dim());
    let s0 = single_mode_state(grid)?;
    let lam = 2.0;
    let evolved = final_state(&s0, &params, t_end, dt)?;
    let a = scale_transform(&evolved, lam, &params)?;
    let scaled0 = scale_transform(&s0, lam, &params)?;
    let b = final_state(&scaled0.state, &scaled0.params, t_end / (lam * lam), dt / (lam * lam))?;
    let half = final_state(&s0, &params, t_end, dt / 2.0)?;
    Ok((state_rel(&a.state, &b), state_rel(&evolved, &half)))
}

fn scaling(grid: &Arc<TorusGrid>) -> Result<[PropertyResult; 2]> {
    let params = ModelParams::default_for(grid.dim());
    let s0 = single_mode_state(grid)?;
    let up = scale_transform(&s0, 2.0, &params)?;
    let back = scale_transform(&up.state, 0.5, &up.params)?;
    let round_trip = state_rel(&back.state, &s0);
    let lost = (up.info_loss || back.info_loss) as u8 as f64;
    let (commute, integ) = scaling_commutation(grid, 0.1, 0.005)?;
    Ok([
        PropertyResult::new("scaling_round_trip", round_trip, 1e-12, details([("info_loss", lost)])),
        PropertyResult::new(
            "scaling_commutation",
            commute / integ,
            10.0,
            details([("commutation_error", commute), ("integrator_error", integ)]),
        ),
    ])
}

pub fn verify_suite(opts: &VerifyOptions) -> Result<VerifyReport> {
    let grid = make_grid(opts.dim, opts.n)?;
    let bank = DyadicBank::new(grid.clone());
    let mut properties = vec![
        partition(opts, &bank),
        bernstein(opts)?,
        leray(opts, &grid),
        heat_exactness(opts, &grid)?,
    ];
    let lemma = lemma_ratio(opts, &grid, 10)?;
    let worst = lemma.values().copied().fold(0.0, f64::max);
    properties.push(PropertyResult::new("parabolic_smoothing_ratio", worst, 1.05, lemma));
    properties.push(budget(opts, &grid)?);
    properties.extend(scaling(&grid)?);
    let all_passed = properties.iter().all(|p| p.passed);
    Ok(VerifyReport {
        options: opts.clone(),
        properties,
        all_passed,
    })
}
