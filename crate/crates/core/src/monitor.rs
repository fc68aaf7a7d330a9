//! Regularity diagnostics along a trajectory.
//!
//! Dissipation wavenumbers (the `C₀` cut between inertial and dissipative
//! shells), the low-mode functional
//!
//! ```text
//! f(t) = ‖∇c_{≤Q_c}‖²_∞ + ‖u_{≤Q_u}‖_{B¹_{∞,∞}}
//! ```
//!
//! and the weighted shell-energy budget
//!
//! ```text
//! ½ d/dt Σ λ_q^{2s}   ‖n_q‖² = -D_n + III + VI
//! ½ d/dt Σ λ_q^{2s+2} ‖c_q‖² = -D_c + II + V
//! ½ d/dt Σ λ_q^{2s+2} ‖u_q‖² = -D_u + I - IV
//! ```
//!
//! which holds exactly for the dealiased Galerkin system. Flux terms carry
//! a leading minus sign: `I = -Σ λ_q^{2s+2} ∫ Δ_q((u·∇)u)·u_q`, and so on;
//! `IV` is built from the forcing `n g`, which enters the momentum equation
//! with a plus sign, hence the `-IV` above.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{CnsError, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;
use crate::lp::{lambda, DyadicBank, ShellNorms};
use crate::model::{nonlinear_terms, ModelParams, NonlinearTerms, State};
use crate::quadrature::{exp_trapezoid_weights, trapezoid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorConfig {
    /// Threshold `C₀` of the dissipation wavenumbers.
    pub c0: f64,
    /// Lebesgue exponent of the oxygen wavenumber.
    pub r: f64,
    /// Sobolev weight of the shell budget.
    pub s: f64,
    pub eps: f64,
    /// Output every `cadence` steps.
    pub cadence: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            c0: 0.1,
            r: 3.2,
            s: -0.1,
            eps: 0.0625,
            cadence: 1,
        }
    }
}

impl MonitorConfig {
    /// Rejects unusable values and returns warnings for values outside the
    /// ranges where the regularity estimates apply.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.c0 > 0.0) || !self.c0.is_finite() {
            return Err(CnsError::Config(format!("C0 must be positive, got {}", self.c0)));
        }
        if !(self.r >= 1.0) || !self.r.is_finite() {
            return Err(CnsError::Config(format!("r must be finite and >= 1, got {}", self.r)));
        }
        if !self.s.is_finite() {
            return Err(CnsError::Config("s must be finite".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(CnsError::Config(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if self.cadence == 0 {
            return Err(CnsError::Config("cadence must be at least one step".into()));
        }
        let mut warnings = Vec::new();
        // the default r sits exactly on the upper end, which is accepted
        let r_top = 3.0 / (1.0 - self.eps);
        if !(self.r > 3.0 && self.r <= r_top) {
            warnings.push(format!("r = {} outside the admissible range (3, 3/(1-eps)) = (3, {r_top})", self.r));
        }
        if !(self.s > -0.5 && self.s < 0.0) {
            warnings.push(format!("s = {} outside (-1/2, 0)", self.s));
        }
        if self.r >= 3.0 / (1.0 + self.s) {
            warnings.push(format!("r = {} not below 3/(1+s) = {}", self.r, 3.0 / (1.0 + self.s)));
        }
        Ok(warnings)
    }
}

/// `(Λ, Q)` with `Λ = 2^Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Wavenumber {
    pub lambda: u64,
    pub q: i32,
}

impl Wavenumber {
    fn at(q: i32) -> Self {
        Self { lambda: 1u64 << q, q }
    }
}

/// Smallest `q ∈ {0, 1, ...}` with `level(p) < C₀` for every shell `p > q`.
fn first_quiet_shell(levels: impl Iterator<Item = (i32, f64)>, c0: f64) -> Wavenumber {
    let q = levels
        .filter(|&(p, v)| p >= 1 && v >= c0)
        .map(|(p, _)| p)
        .max()
        .unwrap_or(0);
    Wavenumber::at(q)
}

/// `Λ_u` from precomputed shell norms of `u`.
pub fn wavenumber_u_from_norms(norms: &ShellNorms, c0: f64) -> Wavenumber {
    first_quiet_shell(norms.shells.iter().map(|s| (s.q, s.linf / s.lambda)), c0)
}

/// `Λ_c` from shell norms of `c` computed with exponent `r`.
pub fn wavenumber_c_from_norms(norms: &ShellNorms, c0: f64) -> Wavenumber {
    let w = 3.0 / norms.r;
    first_quiet_shell(norms.shells.iter().map(|s| (s.q, s.lambda.powf(w) * s.lr)), c0)
}

/// `Λ_u = min{λ_q : λ_p^{-1} ‖u_p‖_∞ < C₀ ∀p > q}`.
pub fn dissipation_wavenumber_u(bank: &DyadicBank, u: &SpectralField, cfg: &MonitorConfig) -> Wavenumber {
    wavenumber_u_from_norms(&bank.shell_norms(u, f64::INFINITY), cfg.c0)
}

/// `Λ_c = min{λ_q : λ_p^{3/r} ‖c_p‖_r < C₀ ∀p > q}`.
pub fn dissipation_wavenumber_c(bank: &DyadicBank, c: &SpectralField, cfg: &MonitorConfig) -> Wavenumber {
    wavenumber_c_from_norms(&bank.shell_norms(c, cfg.r), cfg.c0)
}

/// Whether every shell above `Q_u` satisfies `λ_q^{-1} ‖u_q‖_∞ < C₀` and
/// every shell above `Q_c` satisfies `λ_q^{3/r} ‖c_q‖_r < C₀`.
pub fn separation_holds(u: &ShellNorms, c: &ShellNorms, wu: Wavenumber, wc: Wavenumber, c0: f64) -> bool {
    let w = 3.0 / c.r;
    u.shells.iter().filter(|s| s.q > wu.q).all(|s| s.linf / s.lambda < c0)
        && c.shells.iter().filter(|s| s.q > wc.q).all(|s| s.lambda.powf(w) * s.lr < c0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionF {
    pub value: f64,
    /// `‖∇c_{≤Q_c}‖²_∞`
    pub grad_c_part: f64,
    /// `‖u_{≤Q_u}‖_{B¹_{∞,∞}}`
    pub besov_u_part: f64,
    pub wn_u: Wavenumber,
    pub wn_c: Wavenumber,
}

/// `f` with given wavenumbers.
pub fn criterion_f_at(state: &State, bank: &DyadicBank, wn_u: Wavenumber, wn_c: Wavenumber) -> CriterionF {
    let c_low = bank.project_low(state.c().spec(), wn_c.q).expect("Q_c >= 0");
    let grad = c_low.gradient().to_real().lp_norm(f64::INFINITY);
    let u_low = bank.project_low(state.u().spec(), wn_u.q).expect("Q_u >= 0");
    let besov = bank.besov_norm(&u_low, 1.0, f64::INFINITY);
    CriterionF {
        value: grad * grad + besov,
        grad_c_part: grad * grad,
        besov_u_part: besov,
        wn_u,
        wn_c,
    }
}

pub fn criterion_f(state: &State, bank: &DyadicBank, cfg: &MonitorConfig) -> CriterionF {
    let wn_u = dissipation_wavenumber_u(bank, state.u().spec(), cfg);
    let wn_c = dissipation_wavenumber_c(bank, state.c().spec(), cfg);
    criterion_f_at(state, bank, wn_u, wn_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionIntegral {
    /// Trapezoidal `∫ f dt` over the record times.
    pub integral: f64,
    pub max: f64,
}

pub fn criterion_integral(times: &[f64], f: &[f64]) -> CriterionIntegral {
    CriterionIntegral {
        integral: trapezoid(times, f),
        max: f.iter().copied().fold(0.0, f64::max),
    }
}

/// Shell weights `Σ_q λ_q^{2σ} φ_q(k)²` for `σ = s` and `σ = s + 1`.
#[derive(Debug, Clone)]
pub struct BudgetWeights {
    pub s: f64,
    pub w_s: Vec<f64>,
    pub w_s1: Vec<f64>,
}

impl BudgetWeights {
    pub fn new(bank: &DyadicBank, s: f64) -> Self {
        Self {
            s,
            w_s: bank.shell_weight(s),
            w_s1: bank.shell_weight(s + 1.0),
        }
    }
}

/// `Σ_k w(k) Re(conj a(k) b(k)) (2π)^dim` over all components.
fn weighted_inner(a: &SpectralField, b: &SpectralField, w: &[f64]) -> f64 {
    let len = w.len();
    let sum: f64 = a
        .coefficients()
        .iter()
        .zip(b.coefficients())
        .enumerate()
        .map(|(i, (x, y))| w[i % len] * (x.conj() * y).re)
        .sum();
    sum * a.grid().volume()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Triple {
    pub n: f64,
    pub c: f64,
    pub u: f64,
}

/// `(Σ λ^{2s}‖n_q‖², Σ λ^{2s+2}‖c_q‖², Σ λ^{2s+2}‖u_q‖²)`.
pub fn shell_energy(state: &State, w: &BudgetWeights) -> Triple {
    Triple {
        n: state.n().spec().weighted_energy(&w.w_s),
        c: state.c().spec().weighted_energy(&w.w_s1),
        u: state.u().spec().weighted_energy(&w.w_s1),
    }
}

/// `(Σ λ^{2s}‖∇n_q‖², Σ λ^{2s+2}‖∇c_q‖², Σ λ^{2s+2}‖∇u_q‖²)`.
pub fn dissipation(state: &State, w: &BudgetWeights) -> Triple {
    let k2 = state.grid().k_squared();
    let ws: Vec<f64> = w.w_s.iter().zip(k2).map(|(a, b)| a * b).collect();
    let ws1: Vec<f64> = w.w_s1.iter().zip(k2).map(|(a, b)| a * b).collect();
    Triple {
        n: state.n().spec().weighted_energy(&ws),
        c: state.c().spec().weighted_energy(&ws1),
        u: state.u().spec().weighted_energy(&ws1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FluxTerms {
    /// `-Σ λ^{2s+2} ∫ Δ_q((u·∇)u)·u_q`
    pub i: f64,
    /// `-Σ λ^{2s+2} ∫ Δ_q(u·∇c) c_q`
    pub ii: f64,
    /// `-Σ λ^{2s} ∫ Δ_q(u·∇n) n_q`
    pub iii: f64,
    /// `-Σ λ^{2s+2} ∫ Δ_q(n g)·u_q`
    pub iv: f64,
    /// `-Σ λ^{2s+2} ∫ Δ_q(n c) c_q`
    pub v: f64,
    /// `-Σ λ^{2s} ∫ Δ_q(χ∇·(n∇c)) n_q`
    pub vi: f64,
}

impl FluxTerms {
    pub fn as_array(&self) -> [f64; 6] {
        [self.i, self.ii, self.iii, self.iv, self.v, self.vi]
    }
}

/// State fields as the integrator sees them: dealiased, velocity projected.
fn galerkin_fields(state: &State) -> (SpectralField, SpectralField, SpectralField) {
    (
        state.n().spec().dealias(),
        state.c().spec().dealias(),
        state.u().spec().dealias().leray_project(),
    )
}

fn fluxes_from(nl: &NonlinearTerms, y: &(SpectralField, SpectralField, SpectralField), w: &BudgetWeights) -> FluxTerms {
    let (n, c, u) = y;
    FluxTerms {
        i: -weighted_inner(u, &nl.advect_u, &w.w_s1),
        ii: -weighted_inner(c, &nl.advect_c, &w.w_s1),
        iii: -weighted_inner(n, &nl.advect_n, &w.w_s),
        iv: -weighted_inner(u, &nl.buoyancy, &w.w_s1),
        v: -weighted_inner(c, &nl.consumption, &w.w_s1),
        vi: -weighted_inner(n, &nl.chemotaxis, &w.w_s),
    }
}

/// The six flux terms with dealiased products.
pub fn flux_terms(state: &State, w: &BudgetWeights, params: &ModelParams) -> FluxTerms {
    let nl = nonlinear_terms(state, params, true);
    fluxes_from(&nl, &galerkin_fields(state), w)
}

/// `I` evaluated directly and through the commutator form
/// `-Σ λ^{2s+2} ∫ (Δ_q((u·∇)u) - (u·∇)u_q)·u_q`, which differ by the
/// transport terms `∫ (u·∇)u_q·u_q`; both agree when `∇·u = 0`.
pub fn transport_dual_check(u: &SpectralField, bank: &DyadicBank, s: f64) -> (f64, f64) {
    let grid = u.grid().clone();
    let dim = grid.dim();
    let u = u.dealias();
    let ur = u.to_real();
    let grads: Vec<_> = (0..dim).map(|a| u.component_field(a).gradient()).collect();
    let advect = |grads: &[SpectralField]| -> SpectralField {
        let parts: Vec<SpectralField> = grads
            .iter()
            .map(|g| crate::field::pointwise_dot(&ur, &g.to_real()).to_spectral().dealias())
            .collect();
        SpectralField::stack(&parts).expect("components share a grid")
    };
    let full = advect(&grads);
    let (mut direct, mut commutator) = (0.0, 0.0);
    for q in bank.shells() {
        let phi = bank.multiplier(q).expect("shell in range");
        let weight = lambda(q).powf(2.0 * s + 2.0);
        let uq = u.apply_multiplier(phi);
        let shell_of_full = full.apply_multiplier(phi);
        let transport = advect(&grads.iter().map(|g| g.apply_multiplier(phi)).collect::<Vec<_>>());
        direct -= weight * shell_of_full.inner(&uq);
        commutator -= weight * (&shell_of_full - &transport).inner(&uq);
    }
    (direct, commutator)
}

/// Per-mode data of one observed state needed to close the budget across
/// the following step.
#[derive(Debug, Clone)]
struct BudgetProbe {
    time: f64,
    /// `½|ŷ(k)|²` summed over components, for n, c, u.
    energy: [Vec<f64>; 3],
    /// `Re(conj ŷ(k) T̂(k))` with `T` the nonlinear tendency.
    power: [Vec<f64>; 3],
}

fn mode_sums(a: &SpectralField, b: &SpectralField, half: bool) -> Vec<f64> {
    let len = a.grid().len();
    let mut out = vec![0.0; len];
    for (i, (x, y)) in a.coefficients().iter().zip(b.coefficients()).enumerate() {
        out[i % len] += (x.conj() * y).re;
    }
    if half {
        out.iter_mut().for_each(|v| *v *= 0.5);
    }
    out
}

impl BudgetProbe {
    fn new(time: f64, y: &(SpectralField, SpectralField, SpectralField), nl: &NonlinearTerms) -> Self {
        let t = nl.tendency();
        Self {
            time,
            energy: [
                mode_sums(&y.0, &y.0, true),
                mode_sums(&y.1, &y.1, true),
                mode_sums(&y.2, &y.2, true),
            ],
            power: [mode_sums(&y.0, &t.n, false), mode_sums(&y.1, &t.c, false), mode_sums(&y.2, &t.u, false)],
        }
    }
}

/// Budget residuals across one step, per field: the weighted sum over modes
/// of `[e₁ - e^{-z} e₀ - dt (w₀ P₀ + w₁ P₁)] / dt` with `z = 2|k|² dt`, the
/// exponential-trapezoid discretisation of `ė = -2|k|² e + P`.
fn budget_residual(
    grid: &TorusGrid,
    w: &BudgetWeights,
    a: &BudgetProbe,
    b: &BudgetProbe,
) -> Triple {
    let dt = b.time - a.time;
    if !(dt > 0.0) {
        return Triple::default();
    }
    let k2 = grid.k_squared();
    let vol = grid.volume();
    let mut out = [0.0; 3];
    for (idx, &kk) in k2.iter().enumerate() {
        let z = 2.0 * kk * dt;
        let decay = (-z).exp();
        let (w0, w1) = exp_trapezoid_weights(z);
        for f in 0..3 {
            let weight = if f == 0 { w.w_s[idx] } else { w.w_s1[idx] };
            if weight == 0.0 {
                continue;
            }
            let r = b.energy[f][idx] - decay * a.energy[f][idx] - dt * (w0 * a.power[f][idx] + w1 * b.power[f][idx]);
            out[f] += weight * r;
        }
    }
    Triple {
        n: out[0] * vol / dt,
        c: out[1] * vol / dt,
        u: out[2] * vol / dt,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectra {
    pub n: ShellNorms,
    pub c: ShellNorms,
    pub u: ShellNorms,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub wn_u: Wavenumber,
    pub wn_c: Wavenumber,
    pub f: CriterionF,
    /// Trapezoidal `∫ f dt` from the first observed state.
    pub f_integral: f64,
    pub flux: FluxTerms,
    pub dissipation: Triple,
    pub energy: Triple,
    /// Budget residual across the step ending here; zero for the first record.
    pub residual: Triple,
    pub mass_n: f64,
    pub max_c: f64,
    /// `½ ‖u‖₂²`.
    pub energy_u: f64,
    pub neg_n_frac: f64,
    pub max_divergence: f64,
    /// `‖u‖_{Ḣ^{s+1}}`.
    pub u_sobolev: f64,
    pub separation_ok: bool,
    pub spectra: Spectra,
}

/// Stateful per-step observer.
#[derive(Debug, Clone)]
pub struct Monitor {
    bank: Arc<DyadicBank>,
    cfg: MonitorConfig,
    params: ModelParams,
    weights: BudgetWeights,
    prev: Option<BudgetProbe>,
    last_f: Option<(f64, f64)>,
    f_integral: f64,
}

impl Monitor {
    pub fn new(bank: Arc<DyadicBank>, cfg: MonitorConfig, params: ModelParams) -> Self {
        let weights = BudgetWeights::new(&bank, cfg.s);
        Self {
            bank,
            cfg,
            params,
            weights,
            prev: None,
            last_f: None,
            f_integral: 0.0,
        }
    }

    /// Starts the running `∫ f dt` at `value`, for continued runs.
    pub fn with_f_integral(mut self, value: f64) -> Self {
        self.f_integral = value;
        self
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.cfg
    }

    pub fn bank(&self) -> &DyadicBank {
        &self.bank
    }

    pub fn weights(&self) -> &BudgetWeights {
        &self.weights
    }

    pub fn observe(&mut self, state: &State) -> DiagnosticsRecord {
        let bank = &*self.bank;
        let grid = state.grid().clone();
        let spectra = Spectra {
            n: bank.shell_norms(state.n().spec(), self.cfg.r),
            c: bank.shell_norms(state.c().spec(), self.cfg.r),
            u: bank.shell_norms(state.u().spec(), self.cfg.r),
        };
        let wn_u = wavenumber_u_from_norms(&spectra.u, self.cfg.c0);
        let wn_c = wavenumber_c_from_norms(&spectra.c, self.cfg.c0);
        let f = criterion_f_at(state, bank, wn_u, wn_c);
        if let Some((t0, f0)) = self.last_f {
            self.f_integral += 0.5 * (state.time - t0) * (f0 + f.value);
        }
        self.last_f = Some((state.time, f.value));

        let y = galerkin_fields(state);
        let nl = nonlinear_terms(state, &self.params, true);
        let flux = fluxes_from(&nl, &y, &self.weights);
        let probe = BudgetProbe::new(state.time, &y, &nl);
        let residual = match &self.prev {
            Some(prev) => budget_residual(&grid, &self.weights, prev, &probe),
            None => Triple::default(),
        };
        self.prev = Some(probe);

        let n_vals = state.n().real().values();
        let negative = n_vals.iter().filter(|&&v| v < 0.0).count();
        DiagnosticsRecord {
            time: state.time,
            wn_u,
            wn_c,
            f,
            f_integral: self.f_integral,
            flux,
            dissipation: dissipation(state, &self.weights),
            energy: shell_energy(state, &self.weights),
            residual,
            mass_n: state.n().spec().mean(0) * grid.volume(),
            max_c: state.c().real().max(),
            energy_u: 0.5 * state.u().spec().l2_norm().powi(2),
            neg_n_frac: negative as f64 / n_vals.len() as f64,
            max_divergence: state.max_divergence(),
            u_sobolev: state.u().spec().homogeneous_sobolev_norm(self.cfg.s + 1.0),
            separation_ok: separation_holds(&spectra.u, &spectra.c, wn_u, wn_c, self.cfg.c0),
            spectra,
        }
    }
}

/// `max_t Q_u / (1 + log₂⁺ ‖u‖_{Ḣ^{s+1}})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogBound {
    pub max_ratio: f64,
    pub at_time: f64,
    pub max_q_u: i32,
}

pub fn wavenumber_log_bound(records: &[DiagnosticsRecord]) -> LogBound {
    let mut out = LogBound {
        max_ratio: 0.0,
        at_time: records.first().map_or(0.0, |r| r.time),
        max_q_u: 0,
    };
    for r in records {
        let denom = 1.0 + r.u_sobolev.log2().max(0.0);
        let ratio = r.wn_u.q as f64 / denom;
        if ratio > out.max_ratio {
            out.max_ratio = ratio;
            out.at_time = r.time;
        }
        out.max_q_u = out.max_q_u.max(r.wn_u.q);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationReport {
    /// `max_t |∫n(t) - ∫n(0)|`, relative to `|∫n(0)|` when that is nonzero.
    pub mass_drift: f64,
    /// Largest single-step increase of `max c` (zero if it never grows).
    pub max_c_increase: f64,
    pub energy_u: Vec<(f64, f64)>,
    pub max_neg_n_frac: f64,
    pub max_divergence: f64,
}

pub fn conservation_report(records: &[DiagnosticsRecord]) -> ConservationReport {
    let m0 = records.first().map_or(0.0, |r| r.mass_n);
    let scale = if m0 != 0.0 { m0.abs() } else { 1.0 };
    let mass_drift = records.iter().map(|r| (r.mass_n - m0).abs() / scale).fold(0.0, f64::max);
    let max_c_increase = records
        .windows(2)
        .map(|w| w[1].max_c - w[0].max_c)
        .fold(0.0, f64::max);
    ConservationReport {
        mass_drift,
        max_c_increase,
        energy_u: records.iter().map(|r| (r.time, r.energy_u)).collect(),
        max_neg_n_frac: records.iter().map(|r| r.neg_n_frac).fold(0.0, f64::max),
        max_divergence: records.iter().map(|r| r.max_divergence).fold(0.0, f64::max),
    }
}
