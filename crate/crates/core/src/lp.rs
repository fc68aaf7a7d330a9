//! Littlewood-Paley decomposition on the integer lattice.
//!
//! The radial cutoff `χ` equals 1 on `[0, 3/4]`, 0 on `[1, ∞)` and is joined
//! by the standard smooth step in between. Shell multipliers are
//! `φ_{-1} = χ(|k|)` and `φ_q(k) = φ(|k| / 2^q)` with `φ(t) = χ(t/2) - χ(t)`,
//! so the shells telescope to a partition of unity.

use std::ops::RangeInclusive;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{CnsError, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;

fn smooth_bump(a: f64) -> f64 {
    if a > 0.0 {
        (-1.0 / a).exp()
    } else {
        0.0
    }
}

/// Smooth monotone step from 0 at `a <= 0` to 1 at `a >= 1`.
fn smooth_step(a: f64) -> f64 {
    let h = smooth_bump(a);
    let h1 = smooth_bump(1.0 - a);
    h / (h + h1)
}

/// The radial low-pass profile `χ(t)`.
pub fn cutoff_profile(t: f64) -> f64 {
    if t <= 0.75 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        smooth_step((1.0 - t) / 0.25)
    }
}

/// The annular profile `φ(t) = χ(t/2) - χ(t)`.
pub fn annulus_profile(t: f64) -> f64 {
    cutoff_profile(0.5 * t) - cutoff_profile(t)
}

/// Dyadic frequency `λ_q = 2^q`, with the low block weighted as 1.
pub fn lambda(q: i32) -> f64 {
    if q < 0 {
        1.0
    } else {
        2f64.powi(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellNorm {
    pub q: i32,
    pub lambda: f64,
    pub l2: f64,
    pub linf: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellNorms {
    pub r: f64,
    pub shells: Vec<ShellNorm>,
}

impl ShellNorms {
    pub fn get(&self, q: i32) -> Option<&ShellNorm> {
        self.shells.iter().find(|s| s.q == q)
    }

    pub fn sum_l2_squared(&self) -> f64 {
        self.shells.iter().map(|s| s.l2 * s.l2).sum()
    }
}

#[derive(Debug, Clone)]
pub struct DyadicBank {
    grid: Arc<TorusGrid>,
    q_max: i32,
    /// `multipliers[q + 1][idx] = φ_q(k_idx)`
    multipliers: Vec<Vec<f64>>,
}

impl DyadicBank {
    pub fn new(grid: Arc<TorusGrid>) -> Self {
        let q_max = (grid.max_wavenumber().log2() - 1e-12).ceil() as i32;
        let kmag = grid.k_magnitude();
        let mut multipliers = Vec::with_capacity(q_max as usize + 2);
        multipliers.push(kmag.iter().map(|&t| cutoff_profile(t)).collect());
        for q in 0..=q_max {
            let inv = 1.0 / lambda(q);
            multipliers.push(kmag.iter().map(|&t| annulus_profile(t * inv)).collect());
        }
        Self {
            grid,
            q_max,
            multipliers,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn q_max(&self) -> i32 {
        self.q_max
    }

    pub fn shells(&self) -> RangeInclusive<i32> {
        -1..=self.q_max
    }

    fn check_shell(&self, q: i32) -> Result<()> {
        if q < -1 || q > self.q_max {
            Err(CnsError::ShellOutOfRange { q, q_max: self.q_max })
        } else {
            Ok(())
        }
    }

    fn check_grid(&self, f: &SpectralField) {
        assert!(
            **f.grid() == *self.grid,
            "field grid {:?} does not match bank grid {:?}",
            f.grid(),
            self.grid
        );
    }

    pub fn multiplier(&self, q: i32) -> Result<&[f64]> {
        self.check_shell(q)?;
        Ok(&self.multipliers[(q + 1) as usize])
    }

    /// Largest deviation of `Σ_q φ_q(k)` from 1 over the lattice.
    pub fn partition_error(&self) -> f64 {
        (0..self.grid.len())
            .map(|idx| {
                let total: f64 = self.multipliers.iter().map(|m| m[idx]).sum();
                (total - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `Δ_q F`.
    pub fn project_shell(&self, f: &SpectralField, q: i32) -> Result<SpectralField> {
        self.check_grid(f);
        Ok(f.apply_multiplier(self.multiplier(q)?))
    }

    /// `F_{≤Q} = Σ_{q=-1}^{Q} Δ_q F`; `Q >= q_max` returns `F` itself.
    pub fn project_low(&self, f: &SpectralField, q_top: i32) -> Result<SpectralField> {
        self.check_grid(f);
        if q_top < -1 {
            return Err(CnsError::ShellOutOfRange { q: q_top, q_max: self.q_max });
        }
        if q_top >= self.q_max {
            return Ok(f.clone());
        }
        let mut symbol = vec![0.0; self.grid.len()];
        for m in &self.multipliers[..=(q_top + 1) as usize] {
            for (s, v) in symbol.iter_mut().zip(m) {
                *s += v;
            }
        }
        Ok(f.apply_multiplier(&symbol))
    }

    /// Per-mode weight `Σ_q λ_q^{2s} φ_q(k)²`, so that
    /// `Σ_q λ_q^{2s} ‖Δ_q F‖₂² = Σ_k w(k) |F̂(k)|² (2π)^dim`.
    pub fn shell_weight(&self, s: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.grid.len()];
        for q in self.shells() {
            let lam = lambda(q).powf(2.0 * s);
            for (wi, phi) in w.iter_mut().zip(&self.multipliers[(q + 1) as usize]) {
                *wi += lam * phi * phi;
            }
        }
        w
    }

    /// `‖Δ_q F‖_p` for a single shell.
    pub fn shell_norm(&self, f: &SpectralField, q: i32, p: f64) -> Result<f64> {
        let shell = self.project_shell(f, q)?;
        Ok(if p == 2.0 {
            shell.l2_norm()
        } else {
            shell.to_real().lp_norm(p)
        })
    }

    pub fn shell_norms(&self, f: &SpectralField, r: f64) -> ShellNorms {
        let shells = self
            .shells()
            .map(|q| {
                let shell = f.apply_multiplier(&self.multipliers[(q + 1) as usize]);
                let real = shell.to_real();
                ShellNorm {
                    q,
                    lambda: lambda(q),
                    l2: shell.l2_norm(),
                    linf: real.lp_norm(f64::INFINITY),
                    lr: real.lp_norm(r),
                }
            })
            .collect();
        ShellNorms { r, shells }
    }

    /// `‖F‖_{B^s_{p,∞}} = sup_q λ_q^s ‖Δ_q F‖_p` over the lattice shells.
    pub fn besov_norm(&self, f: &SpectralField, s: f64, p: f64) -> f64 {
        self.shells()
            .map(|q| lambda(q).powf(s) * self.shell_norm(f, q, p).expect("shell in range"))
            .fold(0.0, f64::max)
    }

    /// `‖F_q‖_r / (λ_q^{d(1/s - 1/r)} ‖F_q‖_s)`, or 0 for an empty shell.
    pub fn bernstein_ratio(&self, f: &SpectralField, q: i32, s: f64, r: f64) -> Result<f64> {
        if !(1.0 <= s && s <= r) {
            return Err(CnsError::InvalidArgument(format!(
                "need 1 <= s <= r, got s = {s}, r = {r}"
            )));
        }
        let shell = self.project_shell(f, q)?;
        let real = shell.to_real();
        let low = real.lp_norm(s);
        if low == 0.0 {
            return Ok(0.0);
        }
        let inv = |p: f64| if p.is_infinite() { 0.0 } else { 1.0 / p };
        let d = self.grid.dim() as f64;
        let scale = lambda(q).powf(d * (inv(s) - inv(r)));
        Ok(real.lp_norm(r) / (scale * low))
    }
}
