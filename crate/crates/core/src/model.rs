//! The chemotaxis-Navier-Stokes right-hand side with constant sensitivity,
//! constant buoyancy direction and linear oxygen consumption:
//!
//! ```text
//! n_t = Δn - u·∇n - χ ∇·(n ∇c)
//! c_t = Δc - u·∇c - n c
//! u_t = P(Δu - (u·∇)u + n g),   ∇·u = 0
//! ```
//!
//! `P` is the Leray projector; the pressure is never formed.

use std::sync::Arc;

use crate::error::{CnsError, Result};
use crate::field::{dealiased_product, pointwise_dot, pointwise_product, RealField, SpectralField};
use crate::grid::TorusGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Chemotactic sensitivity.
    pub chi: f64,
    /// Constant gravitational acceleration `∇Φ`, one entry per axis.
    pub grav: Vec<f64>,
    /// Apply the 2/3 rule to nonlinear products. Turning this off is a
    /// debugging aid only.
    pub dealias: bool,
}

impl ModelParams {
    pub fn new(chi: f64, grav: Vec<f64>) -> Result<Self> {
        if !chi.is_finite() || grav.iter().any(|g| !g.is_finite()) {
            return Err(CnsError::InvalidArgument("model parameters must be finite".into()));
        }
        if !(2..=3).contains(&grav.len()) {
            return Err(CnsError::InvalidArgument(format!(
                "gravity needs 2 or 3 components, got {}",
                grav.len()
            )));
        }
        Ok(Self {
            chi,
            grav,
            dealias: true,
        })
    }

    /// `χ = 1` with unit buoyancy down the last axis.
    pub fn default_for(dim: usize) -> Self {
        let mut grav = vec![0.0; dim];
        grav[dim - 1] = -1.0;
        Self {
            chi: 1.0,
            grav,
            dealias: true,
        }
    }

    /// Parameters of the rescaled problem: under `u ↦ λu(λ²t, λx)` the
    /// buoyancy term keeps its form only if `g ↦ λg`.
    pub fn scaled(&self, lam: f64) -> Self {
        Self {
            chi: self.chi,
            grav: self.grav.iter().map(|g| g * lam).collect(),
            dealias: self.dealias,
        }
    }
}

/// A field in both representations; `spec` is always the transform of
/// `real`, so a state rebuilt from its physical values is bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    real: RealField,
    spec: SpectralField,
}

impl FieldPair {
    pub fn from_real(real: RealField) -> Self {
        let spec = real.to_spectral();
        Self { real, spec }
    }

    pub fn from_spectral(spec: &SpectralField) -> Self {
        Self::from_real(spec.to_real())
    }

    pub fn real(&self) -> &RealField {
        &self.real
    }

    pub fn spec(&self) -> &SpectralField {
        &self.spec
    }
}

/// The solution triple `(n, c, u)` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    n: FieldPair,
    c: FieldPair,
    u: FieldPair,
}

impl State {
    pub fn new(time: f64, n: RealField, c: RealField, u: RealField) -> Result<Self> {
        let grid = n.grid().clone();
        if **c.grid() != *grid || **u.grid() != *grid {
            return Err(CnsError::ShapeMismatch("state fields live on different grids".into()));
        }
        if n.components() != 1 || c.components() != 1 || u.components() != grid.dim() {
            return Err(CnsError::ShapeMismatch(
                "state needs scalar n, scalar c and a dim-component u".into(),
            ));
        }
        for f in [&n, &c, &u] {
            if !f.all_finite() {
                return Err(CnsError::NonFinite {
                    index: f.values().iter().position(|v| !v.is_finite()).unwrap_or(0),
                });
            }
        }
        Ok(Self {
            time,
            n: FieldPair::from_real(n),
            c: FieldPair::from_real(c),
            u: FieldPair::from_real(u),
        })
    }

    pub fn from_spectral(time: f64, n: &SpectralField, c: &SpectralField, u: &SpectralField) -> Result<Self> {
        Self::new(time, n.to_real(), c.to_real(), u.to_real())
    }

    pub fn zero(grid: &Arc<TorusGrid>) -> Self {
        let dim = grid.dim();
        Self::new(
            0.0,
            RealField::zeros(grid.clone(), 1),
            RealField::zeros(grid.clone(), 1),
            RealField::zeros(grid.clone(), dim),
        )
        .expect("zero state is valid")
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.n.real.grid()
    }

    pub fn n(&self) -> &FieldPair {
        &self.n
    }

    pub fn c(&self) -> &FieldPair {
        &self.c
    }

    pub fn u(&self) -> &FieldPair {
        &self.u
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// `max_k |k·û(k)|`.
    pub fn max_divergence(&self) -> f64 {
        self.u.spec.max_divergence()
    }

    pub fn all_finite(&self) -> bool {
        self.n.real.all_finite() && self.c.real.all_finite() && self.u.real.all_finite()
    }
}

/// Nonlinear products of the system, each dealiased and without sign.
#[derive(Debug, Clone)]
pub struct NonlinearTerms {
    /// `u·∇n`
    pub advect_n: SpectralField,
    /// `χ ∇·(n ∇c)`
    pub chemotaxis: SpectralField,
    /// `u·∇c`
    pub advect_c: SpectralField,
    /// `n c`
    pub consumption: SpectralField,
    /// `(u·∇)u`
    pub advect_u: SpectralField,
    /// `n g` with its spatial mean removed.
    pub buoyancy: SpectralField,
}

fn product(a: &RealField, b: &RealField, dealias: bool) -> SpectralField {
    if dealias {
        dealiased_product(a, b)
    } else {
        pointwise_product(a, b).to_spectral()
    }
}

fn transport(u: &RealField, grad: &RealField, dealias: bool) -> SpectralField {
    let s = pointwise_dot(u, grad).to_spectral();
    if dealias {
        s.dealias()
    } else {
        s
    }
}

/// Evaluates every nonlinear product from the state's current fields.
pub fn nonlinear_terms(state: &State, params: &ModelParams, dealias: bool) -> NonlinearTerms {
    let grid = state.grid().clone();
    let dim = grid.dim();
    let (n_hat, c_hat, u_hat) = if dealias {
        (
            state.n.spec.dealias(),
            state.c.spec.dealias(),
            state.u.spec.dealias(),
        )
    } else {
        (state.n.spec.clone(), state.c.spec.clone(), state.u.spec.clone())
    };
    let n = n_hat.to_real();
    let c = c_hat.to_real();
    let u = u_hat.to_real();

    let grad_n = n_hat.gradient().to_real();
    let grad_c_hat = c_hat.gradient();
    let grad_c = grad_c_hat.to_real();

    let advect_n = transport(&u, &grad_n, dealias);
    let advect_c = transport(&u, &grad_c, dealias);
    let consumption = product(&n, &c, dealias);

    let flux_parts: Vec<SpectralField> = (0..dim)
        .map(|a| product(&n, &grad_c.component_field(a), dealias))
        .collect();
    let flux = SpectralField::stack(&flux_parts).expect("flux components share a grid");
    let chemotaxis = flux.divergence().scale(params.chi);

    let advect_parts: Vec<SpectralField> = (0..dim)
        .map(|a| {
            let grad_ua = u_hat.component_field(a).gradient().to_real();
            transport(&u, &grad_ua, dealias)
        })
        .collect();
    let advect_u = SpectralField::stack(&advect_parts).expect("advection components share a grid");

    let mut n_fluct = n_hat.clone();
    n_fluct.coefficients_mut()[0] = num_complex::Complex64::new(0.0, 0.0);
    let buoy_parts: Vec<SpectralField> = params.grav.iter().map(|&g| n_fluct.scale(g)).collect();
    let buoyancy = SpectralField::stack(&buoy_parts).expect("buoyancy components share a grid");

    NonlinearTerms {
        advect_n,
        chemotaxis,
        advect_c,
        consumption,
        advect_u,
        buoyancy,
    }
}

/// Right-hand side split into the stiff diagonal part and the rest.
#[derive(Debug, Clone)]
pub struct Tendency {
    pub n: SpectralField,
    pub c: SpectralField,
    pub u: SpectralField,
}

impl NonlinearTerms {
    /// `(-u·∇n - χ∇·(n∇c), -u·∇c - nc, P(-(u·∇)u + n g))`.
    pub fn tendency(&self) -> Tendency {
        Tendency {
            n: -&(&self.advect_n + &self.chemotaxis),
            c: -&(&self.advect_c + &self.consumption),
            u: (&self.buoyancy - &self.advect_u).leray_project(),
        }
    }
}

/// Full tendency of the system, including diffusion.
pub fn rhs(state: &State, params: &ModelParams) -> Tendency {
    let nl = nonlinear_terms(state, params, params.dealias).tendency();
    Tendency {
        n: &state.n.spec.laplacian() + &nl.n,
        c: &state.c.spec.laplacian() + &nl.c,
        u: &state.u.spec.laplacian().leray_project() + &nl.u,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn equilibrium_has_no_tendency() {
        let g = make_grid(2, 16).unwrap();
        let s = State::new(
            0.0,
            RealField::zeros(g.clone(), 1),
            RealField::from_fn(g.clone(), 1, |_, _| 0.7).unwrap(),
            RealField::zeros(g.clone(), 2),
        )
        .unwrap();
        let t = rhs(&s, &ModelParams::default_for(2));
        assert!(t.n.max_abs_coefficient() < 1e-16);
        assert!(t.c.max_abs_coefficient() < 1e-16);
        assert!(t.u.max_abs_coefficient() < 1e-16);
    }

    #[test]
    fn pure_diffusion_of_oxygen() {
        let g = make_grid(2, 16).unwrap();
        let s = State::new(
            0.0,
            RealField::zeros(g.clone(), 1),
            RealField::from_fn(g.clone(), 1, |x, _| x[0].sin()).unwrap(),
            RealField::zeros(g.clone(), 2),
        )
        .unwrap();
        let tc = rhs(&s, &ModelParams::default_for(2)).c.to_real();
        for idx in 0..g.len() {
            let err = (tc.values()[idx] + g.point(idx)[0].sin()).abs();
            assert!(err < 1e-13, "idx {idx}: {err}");
        }
    }

    #[test]
    fn state_rejects_mismatched_fields() {
        let g = make_grid(2, 8).unwrap();
        let h = make_grid(2, 16).unwrap();
        assert!(State::new(
            0.0,
            RealField::zeros(g.clone(), 1),
            RealField::zeros(h.clone(), 1),
            RealField::zeros(g.clone(), 2)
        )
        .is_err());
        assert!(State::new(
            0.0,
            RealField::zeros(g.clone(), 1),
            RealField::zeros(g.clone(), 1),
            RealField::zeros(g.clone(), 1)
        )
        .is_err());
    }

    #[test]
    fn scaled_params_stretch_gravity() {
        let p = ModelParams::default_for(3).scaled(2.0);
        assert_eq!(p.grav, vec![0.0, 0.0, -2.0]);
        assert!(ModelParams::new(f64::NAN, vec![0.0, 1.0]).is_err());
    }
}
