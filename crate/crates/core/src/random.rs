//! Seeded random fields that do not depend on the grid resolution.
//!
//! Each Fourier coefficient is drawn from a generator keyed by
//! `(seed, tag, k)`, and spectra are band-limited below every supported
//! Nyquist frequency, so two grids sample the same trigonometric polynomial.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::field::SpectralField;
use crate::grid::TorusGrid;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one lattice point of one field.
pub fn mode_rng(seed: u64, tag: u64, k: &[i64]) -> ChaCha8Rng {
    let mut h = splitmix(seed ^ splitmix(tag));
    for &c in k {
        h = splitmix(h ^ c as u64);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Envelope and support of a random spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    /// Modes with `|k| <= kmax` are populated.
    pub kmax: f64,
    /// Modes with `|k| < kmin` are left empty; `kmin = 0` keeps the mean.
    pub kmin: f64,
    /// Coefficient standard deviation `e^{-decay |k|}`.
    pub decay: f64,
}

impl Spectrum {
    pub fn smooth(kmax: f64, decay: f64) -> Self {
        Self {
            kmax,
            kmin: 1.0,
            decay,
        }
    }

    /// Flat spectrum on the annulus `kmin <= |k| <= kmax`.
    pub fn band(kmin: f64, kmax: f64) -> Self {
        Self { kmax, kmin, decay: 0.0 }
    }
}

/// `k` is the representative of the pair `{k, -k}` when its first nonzero
/// entry is positive.
fn is_representative(k: &[i64]) -> bool {
    k.iter().find(|&&c| c != 0).map_or(true, |&c| c > 0)
}

/// A real scalar field with independent complex Gaussian coefficients.
pub fn random_scalar(grid: &Arc<TorusGrid>, seed: u64, tag: u64, spec: Spectrum) -> SpectralField {
    fill(grid, seed, tag, spec.decay, |_, mag| mag <= spec.kmax && mag >= spec.kmin)
}

/// Flat-spectrum content on the modes removed by the 2/3 rule (some
/// `|k_i| > ⌊N/3⌋`), Nyquist planes excluded. Unlike the other fields here it
/// depends on the resolution.
pub fn random_beyond_dealias(grid: &Arc<TorusGrid>, seed: u64, tag: u64) -> SpectralField {
    let cut = grid.dealias_cutoff();
    fill(grid, seed, tag, 0.0, |k, _| k.iter().any(|c| c.abs() > cut))
}

fn fill<P>(grid: &Arc<TorusGrid>, seed: u64, tag: u64, decay: f64, keep: P) -> SpectralField
where
    P: Fn(&[i64], f64) -> bool,
{
    let dim = grid.dim();
    let half = (grid.n() / 2) as i64;
    let mut out = SpectralField::zeros(grid.clone(), 1);
    for idx in 0..grid.len() {
        let k = &grid.wavevector(idx)[..dim];
        let mag = grid.k_magnitude()[idx];
        if !keep(k, mag) || k.iter().any(|c| c.abs() >= half) || !is_representative(k) {
            continue;
        }
        let mut rng = mode_rng(seed, tag, k);
        let sigma = (-decay * mag).exp();
        let re: f64 = StandardNormal.sample(&mut rng);
        let z = if mag == 0.0 {
            Complex64::new(sigma * re, 0.0)
        } else {
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * (sigma / std::f64::consts::SQRT_2)
        };
        let j = grid.negated_index(idx);
        let coefs = out.coefficients_mut();
        coefs[idx] = z;
        coefs[j] = z.conj();
    }
    out
}

/// A vector field whose components are independent scalar draws.
pub fn random_vector(grid: &Arc<TorusGrid>, seed: u64, tag: u64, spec: Spectrum) -> SpectralField {
    let parts: Vec<SpectralField> = (0..grid.dim() as u64)
        .map(|a| random_scalar(grid, seed, tag.wrapping_mul(31).wrapping_add(a + 1), spec))
        .collect();
    SpectralField::stack(&parts).expect("components share a grid")
}

/// `Σ_k |coef(k)|`, an upper bound for the pointwise magnitude of every
/// component that does not depend on the grid.
pub fn coefficient_sum(f: &SpectralField) -> f64 {
    (0..f.components())
        .map(|c| f.component(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Rescales `f` so that [`coefficient_sum`] equals `amp` (zero stays zero).
pub fn normalise_sup(f: &SpectralField, amp: f64) -> SpectralField {
    let s = coefficient_sum(f);
    if s > 0.0 {
        f.scale(amp / s)
    } else {
        f.clone()
    }
}
