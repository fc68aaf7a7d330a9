//! Named initial-condition presets.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{CnsError, Result};
use crate::field::{RealField, SpectralField};
use crate::grid::TorusGrid;
use crate::model::State;
use crate::random::{normalise_sup, random_scalar, random_vector, Spectrum};

const TAG_N: u64 = 1;
const TAG_C: u64 = 2;
const TAG_U: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Zero,
    /// `A sin(k·x)` in one field, everything else zero.
    SingleMode,
    TaylorGreen,
    /// Smooth random perturbations of all three fields around constant states.
    RandomSmooth,
    /// `n = n̄ (1 + A ρ)`, `c = c̄`, `u = 0`.
    NearHomogeneousBacteria,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Zero,
        Preset::SingleMode,
        Preset::TaylorGreen,
        Preset::RandomSmooth,
        Preset::NearHomogeneousBacteria,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Zero => "zero",
            Preset::SingleMode => "single_mode",
            Preset::TaylorGreen => "taylor_green",
            Preset::RandomSmooth => "random_smooth",
            Preset::NearHomogeneousBacteria => "near_homogeneous_bacteria",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = CnsError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CnsError::Config(format!("unknown initial-condition preset '{s}'")))
    }
}

/// Field populated by the `single_mode` preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    N,
    C,
    U,
}

impl FromStr for Target {
    type Err = CnsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(Target::N),
            "c" => Ok(Target::C),
            "u" => Ok(Target::U),
            _ => Err(CnsError::Config(format!("unknown field '{s}', expected n, c or u"))),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::N => "n",
            Target::C => "c",
            Target::U => "u",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditionSpec {
    pub preset: Preset,
    pub amplitude: f64,
    pub seed: u64,
    /// Wavevector of `single_mode`; missing entries are zero.
    pub mode: Vec<i64>,
    pub target: Target,
    /// Largest populated `|k|` of the random presets.
    pub kmax: f64,
    /// Spectral decay rate of the random presets.
    pub decay: f64,
    pub n_mean: f64,
    pub c_mean: f64,
}

impl Default for InitialConditionSpec {
    fn default() -> Self {
        Self {
            preset: Preset::Zero,
            amplitude: 0.1,
            seed: 0,
            mode: vec![1],
            target: Target::C,
            kmax: 4.0,
            decay: 0.5,
            n_mean: 1.0,
            c_mean: 1.0,
        }
    }
}

fn scalar_fn<F>(grid: &Arc<TorusGrid>, f: F) -> Result<RealField>
where
    F: Fn(&[f64]) -> f64,
{
    RealField::from_fn(grid.clone(), 1, |x, _| f(x))
}

/// Unit vector orthogonal to `k` (nonzero), built from the coordinate axis
/// least aligned with it.
fn transverse(k: &[f64]) -> Vec<f64> {
    let d = k.len();
    let axis = (0..d)
        .min_by(|&a, &b| k[a].abs().total_cmp(&k[b].abs()))
        .expect("nonempty");
    let k2: f64 = k.iter().map(|v| v * v).sum();
    let mut v: Vec<f64> = (0..d)
        .map(|a| if a == axis { 1.0 } else { 0.0 } - k[axis] * k[a] / k2)
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn single_mode(spec: &InitialConditionSpec, grid: &Arc<TorusGrid>) -> Result<State> {
    let dim = grid.dim();
    if spec.mode.len() > dim {
        return Err(CnsError::Config(format!(
            "mode has {} entries on a {dim}-dimensional grid",
            spec.mode.len()
        )));
    }
    let mut k = vec![0i64; dim];
    k[..spec.mode.len()].copy_from_slice(&spec.mode);
    let half = (grid.n() / 2) as i64;
    if k.iter().any(|c| c.abs() >= half) {
        return Err(CnsError::Config(format!("mode {k:?} does not fit below the Nyquist frequency")));
    }
    let kf: Vec<f64> = k.iter().map(|&c| c as f64).collect();
    let a = spec.amplitude;
    let wave = |x: &[f64]| a * kf.iter().zip(x).map(|(k, x)| k * x).sum::<f64>().sin();
    let zero_s = RealField::zeros(grid.clone(), 1);
    match spec.target {
        Target::N => State::new(0.0, scalar_fn(grid, wave)?, zero_s.clone(), RealField::zeros(grid.clone(), dim)),
        Target::C => State::new(0.0, zero_s.clone(), scalar_fn(grid, wave)?, RealField::zeros(grid.clone(), dim)),
        Target::U => {
            if k.iter().all(|&c| c == 0) {
                return Err(CnsError::Config("a velocity mode needs a nonzero wavevector".into()));
            }
            let dir = transverse(&kf);
            let u = RealField::from_fn(grid.clone(), dim, |x, c| dir[c] * wave(x))?;
            State::new(0.0, zero_s.clone(), zero_s, u)
        }
    }
}

fn taylor_green(amp: f64, grid: &Arc<TorusGrid>) -> Result<State> {
    let dim = grid.dim();
    let u = RealField::from_fn(grid.clone(), dim, |x, c| {
        let z = if dim == 3 { x[2].cos() } else { 1.0 };
        match c {
            0 => amp * x[0].sin() * x[1].cos() * z,
            1 => -amp * x[0].cos() * x[1].sin() * z,
            _ => 0.0,
        }
    })?;
    State::new(0.0, RealField::zeros(grid.clone(), 1), RealField::zeros(grid.clone(), 1), u)
}

fn with_mean(f: &SpectralField, mean: f64) -> SpectralField {
    let mut out = f.clone();
    out.coefficients_mut()[0] += mean;
    out
}

/// Builds the initial state for `spec`; reproducible from the seed alone.
pub fn generate_initial(spec: &InitialConditionSpec, grid: &Arc<TorusGrid>) -> Result<State> {
    if !spec.amplitude.is_finite() || !spec.n_mean.is_finite() || !spec.c_mean.is_finite() {
        return Err(CnsError::Config("initial-condition parameters must be finite".into()));
    }
    let shape = Spectrum::smooth(spec.kmax, spec.decay);
    match spec.preset {
        Preset::Zero => Ok(State::zero(grid)),
        Preset::SingleMode => single_mode(spec, grid),
        Preset::TaylorGreen => taylor_green(spec.amplitude, grid),
        Preset::RandomSmooth => {
            if spec.amplitude.abs() > spec.n_mean.min(spec.c_mean) {
                return Err(CnsError::Config(
                    "random_smooth amplitude must not exceed the mean densities".into(),
                ));
            }
            let a = spec.amplitude;
            let n = with_mean(&normalise_sup(&random_scalar(grid, spec.seed, TAG_N, shape), a), spec.n_mean);
            let c = with_mean(&normalise_sup(&random_scalar(grid, spec.seed, TAG_C, shape), a), spec.c_mean);
            let u = normalise_sup(&random_vector(grid, spec.seed, TAG_U, shape).leray_project(), a);
            State::from_spectral(0.0, &n, &c, &u)
        }
        Preset::NearHomogeneousBacteria => {
            if spec.amplitude.abs() > 1.0 {
                return Err(CnsError::Config(
                    "near_homogeneous_bacteria amplitude is relative and must not exceed 1".into(),
                ));
            }
            let rho = normalise_sup(&random_scalar(grid, spec.seed, TAG_N, shape), spec.amplitude * spec.n_mean);
            let n = with_mean(&rho, spec.n_mean);
            let c = with_mean(&SpectralField::zeros(grid.clone(), 1), spec.c_mean);
            let u = SpectralField::zeros(grid.clone(), grid.dim());
            State::from_spectral(0.0, &n, &c, &u)
        }
    }
}
