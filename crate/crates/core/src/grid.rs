//! Periodic lattice on the torus `[0, 2π)^dim`.
//!
//! Spectral arrays use FFT ordering along every axis: storage index `j`
//! holds wavenumber `j` for `j <= N/2` and `j - N` otherwise, so each axis
//! covers `{-N/2+1, ..., N/2}`. Flat indices are row-major with axis 0
//! slowest.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{CnsError, Result};

pub const MAX_DIM: usize = 3;

/// Integer wavevector, padded with zeros past `dim`.
pub type Wavevector = [i64; MAX_DIM];

pub struct TorusGrid {
    dim: usize,
    n: usize,
    len: usize,
    cutoff: i64,
    kvec: Vec<Wavevector>,
    k2: Vec<f64>,
    kmag: Vec<f64>,
    mask: Vec<bool>,
    neg: Vec<usize>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("dealias_cutoff", &self.cutoff)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

/// Builds a shared grid. `n_per_axis` must be a power of two no smaller than 8.
pub fn make_grid(dim: usize, n_per_axis: usize) -> Result<Arc<TorusGrid>> {
    TorusGrid::new(dim, n_per_axis).map(Arc::new)
}

#[inline]
fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(CnsError::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(CnsError::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        let len = n.pow(dim as u32);
        let cutoff = (n / 3) as i64;
        let mut kvec = Vec::with_capacity(len);
        let mut neg = Vec::with_capacity(len);
        for idx in 0..len {
            let mut k = [0i64; MAX_DIM];
            let mut neg_idx = 0usize;
            let mut rem = idx;
            let mut stride = len;
            for ka in k.iter_mut().take(dim) {
                stride /= n;
                let j = rem / stride;
                rem %= stride;
                *ka = wavenumber(j, n);
                neg_idx += ((n - j) % n) * stride;
            }
            kvec.push(k);
            neg.push(neg_idx);
        }
        let k2: Vec<f64> = kvec
            .iter()
            .map(|k| k.iter().map(|&c| (c * c) as f64).sum())
            .collect();
        let kmag = k2.iter().map(|v| v.sqrt()).collect();
        let mask = kvec
            .iter()
            .map(|k| k.iter().all(|c| c.abs() <= cutoff))
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            dim,
            n,
            len,
            cutoff,
            kvec,
            k2,
            kmag,
            mask,
            neg,
            forward,
            inverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of lattice points, `N^dim`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Largest retained `|k_i|` under the 2/3 rule, `floor(N/3)`.
    pub fn dealias_cutoff(&self) -> i64 {
        self.cutoff
    }

    pub fn wavevector(&self, idx: usize) -> &Wavevector {
        &self.kvec[idx]
    }

    pub fn wavevectors(&self) -> &[Wavevector] {
        &self.kvec
    }

    pub fn k_squared(&self) -> &[f64] {
        &self.k2
    }

    pub fn k_magnitude(&self) -> &[f64] {
        &self.kmag
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.mask
    }

    /// Flat index of `-k` for the wavevector stored at `idx`.
    pub fn negated_index(&self, idx: usize) -> usize {
        self.neg[idx]
    }

    /// Flat index of the wavevector `k`, if it lies on the lattice.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        let n = self.n as i64;
        let mut idx = 0usize;
        for axis in 0..self.dim {
            let ka = k.get(axis).copied().unwrap_or(0);
            if ka <= -n / 2 || ka > n / 2 {
                return None;
            }
            let j = ka.rem_euclid(n) as usize;
            idx = idx * self.n + j;
        }
        if k.iter().skip(self.dim).any(|&c| c != 0) {
            return None;
        }
        Some(idx)
    }

    /// True when `k_axis = N/2` (the unpaired Nyquist plane).
    pub fn is_nyquist(&self, idx: usize, axis: usize) -> bool {
        self.kvec[idx][axis] == (self.n / 2) as i64
    }

    /// Largest lattice `|k|`.
    pub fn max_wavenumber(&self) -> f64 {
        let half = (self.n / 2) as f64;
        (self.dim as f64).sqrt() * half
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Quadrature weight of one grid cell, `(2π/N)^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Torus volume `(2π)^dim`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    /// Physical coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        let mut rem = idx;
        let mut stride = self.len;
        let h = self.spacing();
        for xa in x.iter_mut().take(self.dim) {
            stride /= self.n;
            *xa = (rem / stride) as f64 * h;
            rem %= stride;
        }
        x
    }

    /// Unnormalised forward DFT over all axes, in place.
    pub(crate) fn fft_forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Unnormalised inverse DFT over all axes, in place.
    pub(crate) fn fft_inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.len(), self.len);
        let n = self.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // contiguous last axis
        plan.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim - 1 {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..self.len).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[start + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[start + j * stride] = *v;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_cutoffs() {
        let g = TorusGrid::new(2, 8).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.dealias_cutoff(), 2);
        let g = TorusGrid::new(3, 16).unwrap();
        assert_eq!(g.len(), 4096);
        assert_eq!(g.dealias_cutoff(), 5);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(TorusGrid::new(2, 7).is_err());
        assert!(TorusGrid::new(4, 8).is_err());
        assert!(TorusGrid::new(1, 8).is_err());
        assert!(TorusGrid::new(2, 4).is_err());
    }

    #[test]
    fn wavevector_table_has_unique_zero_and_symmetric_mask() {
        for (dim, n) in [(2, 8), (2, 16), (3, 8)] {
            let g = TorusGrid::new(dim, n).unwrap();
            assert_eq!(g.wavevectors().len(), g.len());
            let zeros = g.wavevectors().iter().filter(|k| k.iter().all(|&c| c == 0)).count();
            assert_eq!(zeros, 1);
            for idx in 0..g.len() {
                let j = g.negated_index(idx);
                assert_eq!(g.dealias_mask()[idx], g.dealias_mask()[j]);
                assert_eq!(g.negated_index(j), idx);
                for a in 0..dim {
                    let (k, mk) = (g.wavevector(idx)[a], g.wavevector(j)[a]);
                    assert!(k + mk == 0 || (k == (n / 2) as i64 && mk == k));
                }
            }
        }
    }

    #[test]
    fn index_of_inverts_table() {
        let g = TorusGrid::new(3, 8).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.index_of(g.wavevector(idx)), Some(idx));
        }
        assert_eq!(g.index_of(&[-4, 0, 0]), None);
        assert_eq!(g.index_of(&[5, 0, 0]), None);
    }
}
