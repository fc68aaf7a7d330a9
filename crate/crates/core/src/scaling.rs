//! The natural scaling of the system,
//!
//! ```text
//! n_λ(t, x) = λ² n(λ²t, λx),  c_λ(t, x) = c(λ²t, λx),  u_λ(t, x) = λ u(λ²t, λx),
//! ```
//!
//! restricted to `λ = 2^m` so that the spatial dilation is a relabelling
//! `k ↦ λk` of the integer lattice. Modes that leave the lattice (or, for
//! `m < 0`, are not divisible by `2^{-m}`) are dropped and reported.

use crate::error::{CnsError, Result};
use crate::field::SpectralField;
use crate::model::{ModelParams, State};

#[derive(Debug, Clone)]
pub struct ScaledState {
    /// The rescaled data, stamped at time `t / λ²`.
    pub state: State,
    /// Parameters under which the rescaled data solve the same system.
    pub params: ModelParams,
    pub info_loss: bool,
    /// Fraction of the squared coefficient mass, before amplitude scaling,
    /// that was dropped.
    pub lost_fraction: f64,
}

/// Dropped mass below this fraction is transform round-off.
const LOSS_FLOOR: f64 = 1e-20;

/// `log₂ λ` when `λ` is an exact power of two.
fn dyadic_exponent(lam: f64) -> Option<i32> {
    if !(lam > 0.0) || !lam.is_finite() {
        return None;
    }
    let m = lam.log2().round() as i32;
    (2f64.powi(m) == lam).then_some(m)
}

/// Relabels `k ↦ λk` and multiplies by `amp`. Returns the new field with the
/// dropped and total squared coefficient mass.
fn relabel(f: &SpectralField, m: i32, amp: f64) -> (SpectralField, f64, f64) {
    let grid = f.grid().clone();
    let len = grid.len();
    let mut out = SpectralField::zeros(grid.clone(), f.components());
    let (mut lost, mut total) = (0.0, 0.0);
    let mut target = [0i64; 3];
    for c in 0..f.components() {
        let src = f.component(c);
        for (idx, z) in src.iter().enumerate() {
            let mass = z.norm_sqr();
            if mass == 0.0 {
                continue;
            }
            total += mass;
            let k = grid.wavevector(idx);
            let mut ok = true;
            for a in 0..grid.dim() {
                target[a] = if m >= 0 {
                    k[a] << m
                } else {
                    let d = 1i64 << (-m);
                    ok &= k[a] % d == 0;
                    k[a] / d
                };
            }
            // the Nyquist plane has no partner at -k and cannot carry a real mode
            let half = (grid.n() / 2) as i64;
            ok &= target[..grid.dim()].iter().all(|t| t.abs() < half);
            match grid.index_of(&target[..grid.dim()]) {
                Some(j) if ok => out.coefficients_mut()[c * len + j] = *z * amp,
                _ => lost += mass,
            }
        }
    }
    (out, lost, total)
}

/// Applies the scaling with `λ = 2^m`.
pub fn scale_transform(state: &State, lam: f64, params: &ModelParams) -> Result<ScaledState> {
    let m = dyadic_exponent(lam)
        .ok_or_else(|| CnsError::InvalidArgument(format!("scale factor must be a power of two, got {lam}")))?;
    if m == 0 {
        return Ok(ScaledState {
            state: state.clone(),
            params: params.clone(),
            info_loss: false,
            lost_fraction: 0.0,
        });
    }
    let (n, ln, tn) = relabel(state.n().spec(), m, lam * lam);
    let (c, lc, tc) = relabel(state.c().spec(), m, 1.0);
    let (u, lu, tu) = relabel(state.u().spec(), m, lam);
    let (lost, total) = (ln + lc + lu, tn + tc + tu);
    let lost_fraction = if total > 0.0 { lost / total } else { 0.0 };
    let scaled = State::from_spectral(state.time / (lam * lam), &n, &c, &u)?;
    Ok(ScaledState {
        state: scaled,
        params: params.scaled(lam),
        info_loss: lost_fraction > LOSS_FLOOR,
        lost_fraction,
    })
}
