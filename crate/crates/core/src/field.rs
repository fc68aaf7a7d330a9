//! Physical-space and spectral representations of scalar and vector fields.
//!
//! `SpectralField` coefficients are normalised so that `coef(k)` multiplies
//! `e^{i k·x}`; the forward transform divides by `N^dim`. Vector fields are
//! stored component-major.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{CnsError, Result};
use crate::grid::TorusGrid;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Arc<TorusGrid>,
    components: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Arc<TorusGrid>,
    components: usize,
    coefs: Vec<Complex64>,
}

fn check_components(grid: &TorusGrid, components: usize) -> Result<()> {
    if components == 1 || components == grid.dim() {
        Ok(())
    } else {
        Err(CnsError::ShapeMismatch(format!(
            "{components} components on a {}-dimensional grid",
            grid.dim()
        )))
    }
}

impl RealField {
    pub fn new(grid: Arc<TorusGrid>, components: usize, values: Vec<f64>) -> Result<Self> {
        check_components(&grid, components)?;
        if values.len() != components * grid.len() {
            return Err(CnsError::ShapeMismatch(format!(
                "expected {} values, got {}",
                components * grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(CnsError::NonFinite { index });
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    pub fn zeros(grid: Arc<TorusGrid>, components: usize) -> Self {
        let len = grid.len() * components;
        Self {
            grid,
            components,
            values: vec![0.0; len],
        }
    }

    /// Samples `f(x, component)` at every grid point.
    pub fn from_fn<F>(grid: Arc<TorusGrid>, components: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64], usize) -> f64,
    {
        let mut values = Vec::with_capacity(components * grid.len());
        for c in 0..components {
            for idx in 0..grid.len() {
                let x = grid.point(idx);
                values.push(f(&x[..grid.dim()], c));
            }
        }
        Self::new(grid, components, values)
    }

    pub(crate) fn from_values_unchecked(grid: Arc<TorusGrid>, components: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), components * grid.len());
        Self {
            grid,
            components,
            values,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let len = self.grid.len();
        &self.values[c * len..(c + 1) * len]
    }

    pub fn component_field(&self, c: usize) -> RealField {
        Self::from_values_unchecked(self.grid.clone(), 1, self.component(c).to_vec())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise Euclidean magnitude over components.
    pub fn magnitude(&self) -> Vec<f64> {
        if self.components == 1 {
            return self.values.iter().map(|v| v.abs()).collect();
        }
        let len = self.grid.len();
        (0..len)
            .map(|i| {
                (0..self.components)
                    .map(|c| self.values[c * len + i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Lebesgue norm over the torus with grid quadrature; `p = f64::INFINITY`
    /// gives the maximum over grid points.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let mag = self.magnitude();
        if p.is_infinite() {
            return mag.iter().fold(0.0, |m, &v| m.max(v));
        }
        let dv = self.grid.cell_volume();
        let sum: f64 = if p == 2.0 {
            mag.iter().map(|v| v * v).sum()
        } else {
            mag.iter().map(|v| v.powf(p)).sum()
        };
        (sum * dv).powf(1.0 / p)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Grid quadrature of `∫ f dx` for each component.
    pub fn integral(&self, c: usize) -> f64 {
        self.component(c).iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn to_spectral(&self) -> SpectralField {
        let len = self.grid.len();
        let scale = 1.0 / len as f64;
        let mut coefs = Vec::with_capacity(self.values.len());
        for c in 0..self.components {
            let mut buf: Vec<Complex64> = self
                .component(c)
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            self.grid.fft_forward(&mut buf);
            coefs.extend(buf.into_iter().map(|z| z * scale));
        }
        SpectralField {
            grid: self.grid.clone(),
            components: self.components,
            coefs,
        }
    }
}

/// Pointwise product of two scalar fields.
pub fn pointwise_product(a: &RealField, b: &RealField) -> RealField {
    debug_assert_eq!(a.components, 1);
    debug_assert_eq!(b.components, 1);
    let values = a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
    RealField::from_values_unchecked(a.grid.clone(), 1, values)
}

/// `Σ_j a_j ∂_j b` style contraction: returns `Σ_j a_j * b_j` pointwise for two
/// vector fields of equal width.
pub fn pointwise_dot(a: &RealField, b: &RealField) -> RealField {
    debug_assert_eq!(a.components, b.components);
    let len = a.grid.len();
    let mut values = vec![0.0; len];
    for c in 0..a.components {
        for ((v, x), y) in values.iter_mut().zip(a.component(c)).zip(b.component(c)) {
            *v += x * y;
        }
    }
    RealField::from_values_unchecked(a.grid.clone(), 1, values)
}

/// Physical-space product followed by the 2/3-rule truncation.
pub fn dealiased_product(a: &RealField, b: &RealField) -> SpectralField {
    pointwise_product(a, b).to_spectral().dealias()
}

impl SpectralField {
    pub fn zeros(grid: Arc<TorusGrid>, components: usize) -> Self {
        let len = grid.len() * components;
        Self {
            grid,
            components,
            coefs: vec![ZERO; len],
        }
    }

    pub fn from_coefficients(grid: Arc<TorusGrid>, components: usize, coefs: Vec<Complex64>) -> Result<Self> {
        check_components(&grid, components)?;
        if coefs.len() != components * grid.len() {
            return Err(CnsError::ShapeMismatch(format!(
                "expected {} coefficients, got {}",
                components * grid.len(),
                coefs.len()
            )));
        }
        if let Some(index) = coefs.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CnsError::NonFinite { index });
        }
        Ok(Self {
            grid,
            components,
            coefs,
        })
    }

    pub(crate) fn from_coefficients_unchecked(grid: Arc<TorusGrid>, components: usize, coefs: Vec<Complex64>) -> Self {
        Self {
            grid,
            components,
            coefs,
        }
    }

    /// Builds a vector field from scalar components.
    pub fn stack(parts: &[SpectralField]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| CnsError::ShapeMismatch("no components to stack".into()))?;
        let grid = first.grid.clone();
        let mut coefs = Vec::with_capacity(parts.len() * grid.len());
        for p in parts {
            if p.components != 1 || *p.grid != *grid {
                return Err(CnsError::ShapeMismatch("stack expects scalar fields on one grid".into()));
            }
            coefs.extend_from_slice(&p.coefs);
        }
        check_components(&grid, parts.len())?;
        Ok(Self::from_coefficients_unchecked(grid, parts.len(), coefs))
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coefs[c * len..(c + 1) * len]
    }

    pub fn component_field(&self, c: usize) -> SpectralField {
        Self::from_coefficients_unchecked(self.grid.clone(), 1, self.component(c).to_vec())
    }

    /// Coefficient of `e^{i k·x}` in component `c`, if `k` is on the lattice.
    pub fn coefficient(&self, c: usize, k: &[i64]) -> Option<Complex64> {
        self.grid.index_of(k).map(|idx| self.component(c)[idx])
    }

    pub fn mean(&self, c: usize) -> f64 {
        self.component(c)[0].re
    }

    pub fn to_real(&self) -> RealField {
        let len = self.grid.len();
        let mut values = Vec::with_capacity(self.coefs.len());
        let mut buf = vec![ZERO; len];
        for c in 0..self.components {
            buf.copy_from_slice(self.component(c));
            self.grid.fft_inverse(&mut buf);
            values.extend(buf.iter().map(|z| z.re));
        }
        RealField::from_values_unchecked(self.grid.clone(), self.components, values)
    }

    fn map_modes<F>(&self, f: F) -> SpectralField
    where
        F: Fn(usize, usize, Complex64) -> Complex64,
    {
        let len = self.grid.len();
        let coefs = self
            .coefs
            .iter()
            .enumerate()
            .map(|(i, &z)| f(i / len, i % len, z))
            .collect();
        Self::from_coefficients_unchecked(self.grid.clone(), self.components, coefs)
    }

    /// Multiplies every component by a real per-wavevector symbol.
    pub fn apply_multiplier(&self, symbol: &[f64]) -> SpectralField {
        debug_assert_eq!(symbol.len(), self.grid.len());
        self.map_modes(|_, idx, z| z * symbol[idx])
    }

    /// `∂/∂x_axis`, i.e. multiplication by `i k_axis`. The unpaired Nyquist
    /// plane along `axis` is zeroed so the result stays real.
    pub fn derivative(&self, axis: usize) -> SpectralField {
        assert!(axis < self.grid.dim(), "axis {axis} out of range");
        let g = &self.grid;
        self.map_modes(|_, idx, z| {
            if g.is_nyquist(idx, axis) {
                ZERO
            } else {
                z * Complex64::new(0.0, g.wavevector(idx)[axis] as f64)
            }
        })
    }

    /// Gradient of a scalar field as a `dim`-component field.
    pub fn gradient(&self) -> SpectralField {
        debug_assert_eq!(self.components, 1);
        let parts: Vec<_> = (0..self.grid.dim()).map(|a| self.derivative(a)).collect();
        Self::stack(&parts).expect("gradient components share a grid")
    }

    /// Divergence of a `dim`-component field.
    pub fn divergence(&self) -> SpectralField {
        debug_assert_eq!(self.components, self.grid.dim());
        let len = self.grid.len();
        let mut out = vec![ZERO; len];
        for a in 0..self.components {
            let d = self.component_field(a).derivative(a);
            for (o, z) in out.iter_mut().zip(d.coefs) {
                *o += z;
            }
        }
        Self::from_coefficients_unchecked(self.grid.clone(), 1, out)
    }

    pub fn laplacian(&self) -> SpectralField {
        let k2 = self.grid.k_squared();
        self.map_modes(|_, idx, z| -z * k2[idx])
    }

    /// Divergence-free projection `û - k (k·û)/|k|²`; the mean mode passes
    /// through unchanged.
    pub fn leray_project(&self) -> SpectralField {
        let dim = self.grid.dim();
        assert_eq!(self.components, dim, "Leray projection needs a vector field");
        let len = self.grid.len();
        let mut out = self.coefs.clone();
        for idx in 1..len {
            let k = self.grid.wavevector(idx);
            let k2 = self.grid.k_squared()[idx];
            let mut kdotu = ZERO;
            for a in 0..dim {
                kdotu += self.coefs[a * len + idx] * k[a] as f64;
            }
            let factor = kdotu / k2;
            for a in 0..dim {
                out[a * len + idx] -= factor * k[a] as f64;
            }
        }
        Self::from_coefficients_unchecked(self.grid.clone(), self.components, out)
    }

    /// Zeroes every coefficient outside the 2/3-rule mask.
    pub fn dealias(&self) -> SpectralField {
        let mask = self.grid.dealias_mask();
        self.map_modes(|_, idx, z| if mask[idx] { z } else { ZERO })
    }

    /// `max_k |k·û(k)|` over the lattice.
    pub fn max_divergence(&self) -> f64 {
        let dim = self.grid.dim();
        debug_assert_eq!(self.components, dim);
        let len = self.grid.len();
        (0..len)
            .map(|idx| {
                let k = self.grid.wavevector(idx);
                (0..dim)
                    .map(|a| self.coefs[a * len + idx] * k[a] as f64)
                    .sum::<Complex64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|coef(-k) - conj(coef(k))|`.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let len = self.grid.len();
        let mut worst: f64 = 0.0;
        for c in 0..self.components {
            let comp = self.component(c);
            for idx in 0..len {
                let j = self.grid.negated_index(idx);
                worst = worst.max((comp[j] - comp[idx].conj()).norm());
            }
        }
        worst
    }

    /// `Σ_k w(k) |coef(k)|² (2π)^dim`, summed over components.
    pub fn weighted_energy(&self, weight: &[f64]) -> f64 {
        let len = self.grid.len();
        let sum: f64 = self
            .coefs
            .iter()
            .enumerate()
            .map(|(i, z)| weight[i % len] * z.norm_sqr())
            .sum();
        sum * self.grid.volume()
    }

    /// Real `L²` inner product `∫ f·g dx` evaluated spectrally.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        debug_assert_eq!(self.components, other.components);
        let sum: f64 = self
            .coefs
            .iter()
            .zip(&other.coefs)
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        sum * self.grid.volume()
    }

    /// `L²` norm via Parseval.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.coefs.iter().map(|z| z.norm_sqr()).sum();
        (sum * self.grid.volume()).sqrt()
    }

    /// Direct-form Sobolev norm `(Σ_{k≠0} |k|^{2s} |coef|² + |coef(0)|²)^{1/2}`
    /// scaled by the torus volume.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.sobolev_sum(s, true).sqrt()
    }

    /// Homogeneous variant of [`sobolev_norm`](Self::sobolev_norm): the mean
    /// mode is dropped.
    pub fn homogeneous_sobolev_norm(&self, s: f64) -> f64 {
        self.sobolev_sum(s, false).sqrt()
    }

    fn sobolev_sum(&self, s: f64, with_mean: bool) -> f64 {
        let len = self.grid.len();
        let k2 = self.grid.k_squared();
        let mut sum = 0.0;
        for (i, z) in self.coefs.iter().enumerate() {
            let idx = i % len;
            let w = if idx == 0 {
                if with_mean {
                    1.0
                } else {
                    0.0
                }
            } else {
                k2[idx].powf(s)
            };
            sum += w * z.norm_sqr();
        }
        sum * self.grid.volume()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coefs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.coefs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, a: f64) -> SpectralField {
        self.map_modes(|_, _, z| z * a)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> SpectralField {
        debug_assert_eq!(self.coefs.len(), other.coefs.len());
        let coefs = self
            .coefs
            .iter()
            .zip(&other.coefs)
            .map(|(x, y)| x + y * a)
            .collect();
        Self::from_coefficients_unchecked(self.grid.clone(), self.components, coefs)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn sin_x1(grid: &Arc<TorusGrid>) -> RealField {
        RealField::from_fn(grid.clone(), 1, |x, _| x[0].sin()).unwrap()
    }

    #[test]
    fn sine_has_expected_coefficients() {
        let g = make_grid(2, 16).unwrap();
        let f = sin_x1(&g).to_spectral();
        let plus = f.coefficient(0, &[1, 0]).unwrap();
        let minus = f.coefficient(0, &[-1, 0]).unwrap();
        assert!((plus - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((minus - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let rest: f64 = f
            .coefficients()
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let k = g.wavevector(*i);
                !(k[1] == 0 && k[0].abs() == 1)
            })
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max);
        assert!(rest < 1e-15);
    }

    #[test]
    fn constant_field_is_mean_mode() {
        let g = make_grid(2, 8).unwrap();
        let f = RealField::from_fn(g.clone(), 1, |_, _| 3.0).unwrap().to_spectral();
        assert!((f.component(0)[0] - Complex64::new(3.0, 0.0)).norm() < 1e-15);
        assert!(f.component(0)[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn derivative_examples() {
        let g = make_grid(2, 16).unwrap();
        let d = sin_x1(&g).to_spectral().derivative(0).to_real();
        for idx in 0..g.len() {
            assert!((d.values()[idx] - g.point(idx)[0].cos()).abs() < 1e-13);
        }
        let c = RealField::from_fn(g.clone(), 1, |_, _| 2.5).unwrap().to_spectral();
        assert!(c.derivative(1).max_abs_coefficient() < 1e-15);

        let f = RealField::from_fn(g.clone(), 1, |x, _| (2.0 * x[1]).sin() * x[0].cos()).unwrap();
        let df = f.to_spectral().derivative(1).to_real();
        for idx in 0..g.len() {
            let x = g.point(idx);
            let exact = 2.0 * (2.0 * x[1]).cos() * x[0].cos();
            assert!((df.values()[idx] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn leray_examples() {
        let g = make_grid(2, 16).unwrap();
        // gradient of sin(x1 + x2)
        let grad = RealField::from_fn(g.clone(), 2, |x, _| (x[0] + x[1]).cos()).unwrap();
        assert!(grad.to_spectral().leray_project().max_abs_coefficient() < 1e-15);

        let shear = RealField::from_fn(g.clone(), 2, |x, c| if c == 0 { x[1].sin() } else { 0.0 })
            .unwrap()
            .to_spectral();
        let p = shear.leray_project();
        assert!((&p - &shear).max_abs_coefficient() < 1e-16);

        let parallel = RealField::from_fn(g.clone(), 2, |x, c| if c == 0 { x[0].sin() } else { 0.0 })
            .unwrap()
            .to_spectral()
            .leray_project();
        assert!(parallel.coefficient(0, &[1, 0]).unwrap().norm() < 1e-16);
        assert!(parallel.coefficient(1, &[1, 0]).unwrap().norm() < 1e-16);
    }

    #[test]
    fn leray_keeps_mean_mode() {
        let g = make_grid(2, 8).unwrap();
        let f = RealField::from_fn(g.clone(), 2, |_, c| 1.0 + c as f64).unwrap().to_spectral();
        let p = f.leray_project();
        assert!((p.mean(0) - 1.0).abs() < 1e-15);
        assert!((p.mean(1) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dealias_examples() {
        let g = make_grid(2, 8).unwrap();
        let high = RealField::from_fn(g.clone(), 1, |x, _| (3.0 * x[0]).cos()).unwrap();
        assert!(high.to_spectral().dealias().max_abs_coefficient() < 1e-15);
        let low = sin_x1(&g).to_spectral();
        assert!((&low.dealias() - &low).max_abs_coefficient() < 1e-15);

        // sin²(2x) = (1 - cos 4x)/2; cos 4x lies outside the retained band.
        let s2 = RealField::from_fn(g.clone(), 1, |x, _| (2.0 * x[0]).sin()).unwrap();
        let prod = dealiased_product(&s2, &s2);
        assert!((prod.component(0)[0].re - 0.5).abs() < 1e-15);
        assert!(prod.component(0)[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn norms_of_a_sine() {
        let g = make_grid(2, 16).unwrap();
        let f = sin_x1(&g);
        let l2 = (2.0 * PI * PI).sqrt();
        assert!((f.lp_norm(2.0) - l2).abs() < 1e-12);
        assert!((f.to_spectral().l2_norm() - l2).abs() < 1e-12);
        assert!((f.lp_norm(f64::INFINITY) - 1.0).abs() < 1e-15);

        let s = RealField::from_fn(g.clone(), 1, |x, _| (2.0 * x[0]).sin()).unwrap();
        let sf = s.to_spectral();
        assert!((sf.sobolev_norm(1.0) - 2.0 * s.lp_norm(2.0)).abs() < 1e-12);
    }
}
