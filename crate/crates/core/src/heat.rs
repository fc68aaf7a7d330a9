//! Forced heat equation `u_t - Δu = f` and the parabolic smoothing check.
//!
//! Each mode is propagated exactly by `e^{-|k|² h}`; the forcing enters
//! through the exponential trapezoid, so piecewise-linear-in-time sources
//! are integrated without error.

use crate::error::{CnsError, Result};
use crate::field::SpectralField;
use crate::integrate::Schedule;
use crate::quadrature::{exp_trapezoid_weights, trapezoid};

#[derive(Debug, Clone)]
pub struct HeatTrajectory {
    pub times: Vec<f64>,
    pub solution: Vec<SpectralField>,
    /// Source sampled at `times`.
    pub forcing: Vec<SpectralField>,
}

impl HeatTrajectory {
    pub fn last(&self) -> &SpectralField {
        self.solution.last().expect("trajectory holds the initial datum")
    }
}

/// Solves from `u0` at `t = 0` to `t_end` with step `dt`; the final step is
/// shortened to land on `t_end`.
pub fn heat_solve<F>(u0: &SpectralField, forcing: F, t_end: f64, dt: f64) -> Result<HeatTrajectory>
where
    F: Fn(f64) -> SpectralField,
{
    let schedule = Schedule::new(0.0, dt, t_end)?;
    let grid = u0.grid().clone();
    let k2 = grid.k_squared();
    let f0 = forcing(0.0);
    if **f0.grid() != *grid || f0.components() != u0.components() {
        return Err(CnsError::ShapeMismatch("forcing does not match the initial datum".into()));
    }
    let mut times = vec![0.0];
    let mut solution = vec![u0.clone()];
    let mut sources = vec![f0];
    let mut cached_h = f64::NAN;
    let (mut decay, mut w0, mut w1) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..schedule.n_steps() {
        let (ta, tb) = (schedule.time(k), schedule.time(k + 1));
        let h = tb - ta;
        if h != cached_h {
            decay = k2.iter().map(|a| (-a * h).exp()).collect();
            let w: Vec<(f64, f64)> = k2.iter().map(|a| exp_trapezoid_weights(a * h)).collect();
            w0 = w.iter().map(|p| h * p.0).collect();
            w1 = w.iter().map(|p| h * p.1).collect();
            cached_h = h;
        }
        let fb = forcing(tb);
        let next = {
            let ua = solution.last().expect("nonempty");
            let fa = sources.last().expect("nonempty");
            &(&ua.apply_multiplier(&decay) + &fa.apply_multiplier(&w0)) + &fb.apply_multiplier(&w1)
        };
        times.push(tb);
        solution.push(next);
        sources.push(fb);
    }
    Ok(HeatTrajectory {
        times,
        solution,
        forcing: sources,
    })
}

/// Time-integrated norms of a heat trajectory with smoothing index `α`,
/// all homogeneous (the mean mode carries no weight).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicReport {
    pub alpha: f64,
    /// `‖u‖²_{L²(0,T; Ḣ^{α+2})}`
    pub u_norm_sq: f64,
    /// `‖u_t‖²_{L²(0,T; Ḣ^α)}`
    pub ut_norm_sq: f64,
    /// `‖u₀‖²_{Ḣ^{α+1}}`
    pub u0_norm_sq: f64,
    /// `‖f‖²_{L²(0,T; Ḣ^α)}`
    pub f_norm_sq: f64,
    pub ratio_u: f64,
    pub ratio_ut: f64,
}

fn sq(f: &SpectralField, s: f64) -> f64 {
    f.homogeneous_sobolev_norm(s).powi(2)
}

/// Compares the gained regularity of `u` with the data, using trapezoidal
/// quadrature at the stored times. `u_t` is evaluated from the equation.
pub fn parabolic_regularity_check(traj: &HeatTrajectory, alpha: f64) -> Result<ParabolicReport> {
    let len = traj.times.len();
    if len == 0 || traj.solution.len() != len || traj.forcing.len() != len {
        return Err(CnsError::Trajectory(
            "heat trajectory needs one solution and one source sample per time".into(),
        ));
    }
    let grid = traj.solution[0].grid();
    if traj
        .solution
        .iter()
        .chain(&traj.forcing)
        .any(|f| **f.grid() != **grid || f.components() != traj.solution[0].components())
    {
        return Err(CnsError::Trajectory("heat trajectory mixes grids or shapes".into()));
    }
    let u_series: Vec<f64> = traj.solution.iter().map(|u| sq(u, alpha + 2.0)).collect();
    let ut_series: Vec<f64> = traj
        .solution
        .iter()
        .zip(&traj.forcing)
        .map(|(u, f)| sq(&(&u.laplacian() + f), alpha))
        .collect();
    let f_series: Vec<f64> = traj.forcing.iter().map(|f| sq(f, alpha)).collect();
    let u_norm_sq = trapezoid(&traj.times, &u_series);
    let ut_norm_sq = trapezoid(&traj.times, &ut_series);
    let f_norm_sq = trapezoid(&traj.times, &f_series);
    let u0_norm_sq = sq(&traj.solution[0], alpha + 1.0);
    let data = u0_norm_sq + f_norm_sq;
    let ratio = |x: f64| if data > 0.0 { x / data } else { 0.0 };
    Ok(ParabolicReport {
        alpha,
        u_norm_sq,
        ut_norm_sq,
        u0_norm_sq,
        f_norm_sq,
        ratio_u: ratio(u_norm_sq),
        ratio_ut: ratio(ut_norm_sq),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::RealField;
    use crate::grid::make_grid;

    #[test]
    fn free_decay_and_constant_source_are_exact() {
        let g = make_grid(2, 8).unwrap();
        let s = RealField::from_fn(g.clone(), 1, |x, _| x[0].sin()).unwrap().to_spectral();
        let zero = SpectralField::zeros(g.clone(), 1);

        let free = heat_solve(&s, |_| zero.clone(), 1.0, 0.1).unwrap();
        let amp = free.last().coefficient(0, &[1, 0]).unwrap().im;
        assert!((amp + 0.5 * (-1.0f64).exp()).abs() < 1e-15);

        let forced = heat_solve(&zero, |_| s.clone(), 1.0, 0.3).unwrap();
        assert_eq!(forced.times.last(), Some(&1.0));
        let amp = forced.last().coefficient(0, &[1, 0]).unwrap().im;
        assert!((amp + 0.5 * (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn zero_data_give_zero_ratio() {
        let g = make_grid(2, 8).unwrap();
        let zero = SpectralField::zeros(g, 1);
        let traj = heat_solve(&zero, |_| zero.clone(), 0.5, 0.1).unwrap();
        let rep = parabolic_regularity_check(&traj, 0.0).unwrap();
        assert_eq!(rep.ratio_u, 0.0);
        assert_eq!(rep.ratio_ut, 0.0);
    }

    #[test]
    fn inconsistent_trajectory_is_rejected() {
        let g = make_grid(2, 8).unwrap();
        let zero = SpectralField::zeros(g, 1);
        let mut traj = heat_solve(&zero, |_| zero.clone(), 0.5, 0.1).unwrap();
        traj.forcing.pop();
        assert!(parabolic_regularity_check(&traj, 0.0).is_err());
    }
}
