//! Integrating-factor Runge-Kutta time stepping.
//!
//! Diffusion is propagated exactly per mode (`e^{-|k|² dt}`); the nonlinear
//! terms use Heun's method in the integrating-factor variables:
//!
//! ```text
//! y*  = E (y0 + dt N(y0))
//! y1  = E y0 + dt/2 (E N(y0) + N(y*))
//! ```
//!
//! The velocity is re-projected after each stage.

use log::warn;

use crate::error::{CnsError, Result};
use crate::field::SpectralField;
use crate::model::{nonlinear_terms, ModelParams, State};

/// Per-mode decay factors for one step size, reused across steps.
#[derive(Debug, Clone)]
struct DecayCache {
    dt: f64,
    factors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Integrator {
    params: ModelParams,
    cache: Option<DecayCache>,
    cfl_warn: bool,
}

fn apply(factors: &[f64], f: &SpectralField) -> SpectralField {
    f.apply_multiplier(factors)
}

/// Courant number `dt · max|u| · N / (2π)` on the grid.
pub fn courant_number(state: &State, dt: f64) -> f64 {
    let umax = state.u().real().lp_norm(f64::INFINITY);
    dt * umax / state.grid().spacing()
}

impl Integrator {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            cache: None,
            cfl_warn: true,
        }
    }

    pub fn with_cfl_warning(mut self, on: bool) -> Self {
        self.cfl_warn = on;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn factors(&mut self, state: &State, dt: f64) -> &[f64] {
        let stale = self.cache.as_ref().map_or(true, |c| c.dt != dt || c.factors.len() != state.grid().len());
        if stale {
            let factors = state.grid().k_squared().iter().map(|k2| (-k2 * dt).exp()).collect();
            self.cache = Some(DecayCache { dt, factors });
        }
        &self.cache.as_ref().expect("cache filled").factors
    }

    /// Advances `state` by `dt`, returning the new state.
    pub fn step(&mut self, state: &State, dt: f64) -> Result<State> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(CnsError::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if self.cfl_warn {
            let cfl = courant_number(state, dt);
            if cfl > 0.5 {
                warn!("CFL number {cfl:.3} exceeds 0.5 at t = {}", state.time);
            }
        }
        let params = self.params.clone();
        let e = self.factors(state, dt).to_vec();
        let t1 = state.time + dt;

        let (n0, c0, u0) = if params.dealias {
            (
                state.n().spec().dealias(),
                state.c().spec().dealias(),
                state.u().spec().dealias().leray_project(),
            )
        } else {
            (
                state.n().spec().clone(),
                state.c().spec().clone(),
                state.u().spec().leray_project(),
            )
        };
        let k0 = nonlinear_terms(state, &params, params.dealias).tendency();

        let n_star = apply(&e, &n0.axpy(dt, &k0.n));
        let c_star = apply(&e, &c0.axpy(dt, &k0.c));
        let u_star = apply(&e, &u0.axpy(dt, &k0.u)).leray_project();
        let stage = State::from_spectral(t1, &n_star, &c_star, &u_star)
            .map_err(|_| CnsError::BlowUp { time: t1 })?;
        let k1 = nonlinear_terms(&stage, &params, params.dealias).tendency();

        let half = 0.5 * dt;
        let combine = |y0: &SpectralField, a: &SpectralField, b: &SpectralField| {
            apply(&e, &y0.axpy(half, a)).axpy(half, b)
        };
        let n1 = combine(&n0, &k0.n, &k1.n);
        let c1 = combine(&c0, &k0.c, &k1.c);
        let u1 = combine(&u0, &k0.u, &k1.u).leray_project();
        if !(n1.all_finite() && c1.all_finite() && u1.all_finite()) {
            return Err(CnsError::BlowUp { time: t1 });
        }
        State::from_spectral(t1, &n1, &c1, &u1).map_err(|_| CnsError::BlowUp { time: t1 })
    }
}

/// One integrating-factor RK2 step.
pub fn step_imex(state: &State, dt: f64, params: &ModelParams) -> Result<State> {
    Integrator::new(params.clone()).step(state, dt)
}

/// Step times anchored at a fixed origin: step `k` ends at `t_origin + k dt`
/// except the last, which is shortened to land on `t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub t_origin: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl Schedule {
    pub fn new(t_origin: f64, dt: f64, t_end: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(CnsError::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if !t_end.is_finite() || !t_origin.is_finite() {
            return Err(CnsError::InvalidArgument("schedule times must be finite".into()));
        }
        Ok(Self { t_origin, dt, t_end })
    }

    pub fn n_steps(&self) -> usize {
        let span = self.t_end - self.t_origin;
        if span <= 0.0 {
            return 0;
        }
        let raw = span / self.dt;
        // absorb round-off so that e.g. 1.0 / 0.1 counts as 10 steps
        (raw - 1e-9 * raw.max(1.0)).ceil().max(1.0) as usize
    }

    pub fn time(&self, k: usize) -> f64 {
        if k >= self.n_steps() {
            self.t_end
        } else {
            self.t_origin + k as f64 * self.dt
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub time: f64,
    /// Length of the step that produced this state; zero for the first entry.
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryEntry<R> {
    pub info: StepInfo,
    pub record: R,
    pub state: Option<State>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeepStates {
    None,
    All,
    Every(usize),
}

impl KeepStates {
    fn keeps(&self, step: usize) -> bool {
        match *self {
            KeepStates::None => false,
            KeepStates::All => true,
            KeepStates::Every(k) => k > 0 && step % k == 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<R> {
    pub schedule: Schedule,
    pub entries: Vec<TrajectoryEntry<R>>,
    pub final_state: State,
}

impl<R> Trajectory<R> {
    pub fn records(&self) -> impl Iterator<Item = &R> {
        self.entries.iter().map(|e| &e.record)
    }

    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.info.time).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A failed run together with everything observed before the failure.
#[derive(Debug)]
pub struct RunFailure<R> {
    pub error: CnsError,
    pub partial: Trajectory<R>,
}

impl<R: std::fmt::Debug> std::fmt::Display for RunFailure<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} after {} observed states", self.error, self.partial.entries.len())
    }
}

impl<R: std::fmt::Debug> std::error::Error for RunFailure<R> {}

/// Integrates from `s0` to `t_end`, calling `observer` on the initial state
/// and after every step.
pub fn run<R, F>(
    s0: &State,
    t_end: f64,
    dt: f64,
    params: &ModelParams,
    keep: KeepStates,
    observer: F,
) -> std::result::Result<Trajectory<R>, RunFailure<R>>
where
    F: FnMut(&StepInfo, &State) -> R,
{
    let schedule = match Schedule::new(s0.time, dt, t_end) {
        Ok(s) => s,
        Err(error) => {
            return Err(RunFailure {
                error,
                partial: Trajectory {
                    schedule: Schedule {
                        t_origin: s0.time,
                        dt,
                        t_end,
                    },
                    entries: Vec::new(),
                    final_state: s0.clone(),
                },
            })
        }
    };
    run_schedule(s0, schedule, 0, params, keep, observer)
}

/// Continues a run along `schedule` from `state`, which must sit at
/// `schedule.time(start_step)`.
pub fn run_schedule<R, F>(
    state: &State,
    schedule: Schedule,
    start_step: usize,
    params: &ModelParams,
    keep: KeepStates,
    mut observer: F,
) -> std::result::Result<Trajectory<R>, RunFailure<R>>
where
    F: FnMut(&StepInfo, &State) -> R,
{
    let n_steps = schedule.n_steps();
    let mut trajectory = Trajectory {
        schedule,
        entries: Vec::new(),
        final_state: state.clone(),
    };
    if start_step >= n_steps {
        return Ok(trajectory);
    }
    let mut integrator = Integrator::new(params.clone());
    let mut current = state.clone().with_time(schedule.time(start_step));
    let mut record = |info: StepInfo, s: &State, traj: &mut Trajectory<R>| {
        let rec = observer(&info, s);
        traj.entries.push(TrajectoryEntry {
            info,
            record: rec,
            state: keep.keeps(info.step).then(|| s.clone()),
        });
    };
    record(
        StepInfo {
            step: start_step,
            time: current.time,
            dt: 0.0,
        },
        &current,
        &mut trajectory,
    );
    for k in start_step..n_steps {
        let t_next = schedule.time(k + 1);
        let dt = t_next - schedule.time(k);
        match integrator.step(&current, dt) {
            Ok(next) => {
                current = next.with_time(t_next);
                record(
                    StepInfo {
                        step: k + 1,
                        time: t_next,
                        dt,
                    },
                    &current,
                    &mut trajectory,
                );
            }
            Err(error) => {
                trajectory.final_state = current;
                return Err(RunFailure {
                    error,
                    partial: trajectory,
                });
            }
        }
    }
    trajectory.final_state = current;
    Ok(trajectory)
}
