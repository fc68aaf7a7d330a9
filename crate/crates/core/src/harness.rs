//! Run orchestration: initial data, time stepping with the monitor attached,
//! diagnostics output and checkpoints.
//!
//! Files written to `output.dir`:
//!
//! - `diagnostics.csv`: one row at steps `0, c, 2c, …` and at the last step,
//!   `c` being the monitor cadence;
//! - `summary.txt`: configuration echo and extremal values;
//! - `spectra.csv`: shell norms of the initial and final states;
//! - `checkpoints/step_XXXXXXXX/`: when `output.checkpoint_every > 0`.
//!
//! The monitor observes every step; the cadence only thins the table.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};

use crate::config::RunConfig;
use crate::error::{CnsError, Result};
use crate::grid::make_grid;
use crate::initial::generate_initial;
use crate::integrate::{Integrator, Schedule};
use crate::io::{load_checkpoint, save_checkpoint, write_spectra_csv, CheckpointMeta, DiagnosticsWriter, Summary};
use crate::lp::DyadicBank;
use crate::model::State;
use crate::monitor::{DiagnosticsRecord, Monitor};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_PROPERTY: i32 = 4;

/// Exit status for an error that aborted a command.
pub fn exit_code_for(err: &CnsError) -> i32 {
    match err {
        CnsError::Io(_) => EXIT_IO,
        CnsError::BlowUp { .. } => EXIT_BLOWUP,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    BlowUp,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub error: Option<String>,
    /// Index of the last step reached.
    pub last_step: usize,
    pub steps_scheduled: usize,
    pub rows: usize,
    pub final_state: State,
    pub summary: Summary,
    pub warnings: Vec<String>,
    pub output_dir: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Completed => EXIT_SUCCESS,
            RunStatus::BlowUp => EXIT_BLOWUP,
        }
    }
}

/// Row `k` of a schedule with `total` steps is written when it is a
/// multiple of the cadence or the last one.
pub fn is_output_step(k: usize, cadence: usize, total: usize) -> bool {
    k % cadence == 0 || k == total
}

/// `⌈steps / cadence⌉ + 1`.
pub fn expected_rows(steps: usize, cadence: usize) -> usize {
    steps.div_ceil(cadence) + 1
}

pub fn checkpoint_dir(output: &Path, step: usize) -> PathBuf {
    output.join("checkpoints").join(format!("step_{step:08}"))
}

/// Extremal values over every observed state.
#[derive(Debug, Clone)]
struct Extremes {
    first: DiagnosticsRecord,
    last: DiagnosticsRecord,
    f_max: (f64, f64),
    q_u_max: i32,
    q_c_max: i32,
    mass_drift: f64,
    max_c_increase: f64,
    neg_n_frac_max: f64,
    max_divergence: f64,
    log_ratio_max: f64,
    separation_ok: bool,
}

impl Extremes {
    fn new(r: &DiagnosticsRecord) -> Self {
        let mut e = Self {
            first: r.clone(),
            last: r.clone(),
            f_max: (r.time, r.f.value),
            q_u_max: r.wn_u.q,
            q_c_max: r.wn_c.q,
            mass_drift: 0.0,
            max_c_increase: 0.0,
            neg_n_frac_max: r.neg_n_frac,
            max_divergence: r.max_divergence,
            log_ratio_max: 0.0,
            separation_ok: true,
        };
        e.absorb_common(r);
        e
    }

    fn absorb_common(&mut self, r: &DiagnosticsRecord) {
        if r.f.value > self.f_max.1 {
            self.f_max = (r.time, r.f.value);
        }
        self.q_u_max = self.q_u_max.max(r.wn_u.q);
        self.q_c_max = self.q_c_max.max(r.wn_c.q);
        let m0 = self.first.mass_n;
        let scale = if m0 != 0.0 { m0.abs() } else { 1.0 };
        self.mass_drift = self.mass_drift.max((r.mass_n - m0).abs() / scale);
        self.neg_n_frac_max = self.neg_n_frac_max.max(r.neg_n_frac);
        self.max_divergence = self.max_divergence.max(r.max_divergence);
        let ratio = r.wn_u.q as f64 / (1.0 + r.u_sobolev.log2().max(0.0));
        self.log_ratio_max = self.log_ratio_max.max(ratio);
        self.separation_ok &= r.separation_ok;
    }

    fn absorb(&mut self, r: &DiagnosticsRecord) {
        self.max_c_increase = self.max_c_increase.max(r.max_c - self.last.max_c);
        self.absorb_common(r);
        self.last = r.clone();
    }
}

struct Driver<'a> {
    cfg: &'a RunConfig,
    schedule: Schedule,
    writer: DiagnosticsWriter,
    monitor: Monitor,
    extremes: Option<Extremes>,
    last_written: Option<usize>,
}

impl Driver<'_> {
    fn observe(&mut self, step: usize, state: &State) -> Result<()> {
        let rec = self.monitor.observe(state);
        if is_output_step(step, self.cfg.monitor.cadence, self.schedule.n_steps()) {
            self.writer.write(&rec)?;
            self.last_written = Some(step);
        }
        match &mut self.extremes {
            Some(e) => e.absorb(&rec),
            None => self.extremes = Some(Extremes::new(&rec)),
        }
        Ok(())
    }

    /// Keeps the last observed state in the table after a failure.
    fn flush_last(&mut self, step: usize) -> Result<()> {
        if self.last_written != Some(step) {
            if let Some(e) = &self.extremes {
                let rec = e.last.clone();
                self.writer.write(&rec)?;
                self.last_written = Some(step);
            }
        }
        Ok(())
    }

    fn checkpoint(&self, step: usize, state: &State) -> Result<()> {
        let meta = CheckpointMeta {
            dim: self.cfg.dim,
            n_per_axis: self.cfg.n,
            time: state.time,
            dt: self.schedule.dt,
            chi: self.cfg.model.chi,
            grav: self.cfg.model.grav.clone(),
            seed: self.cfg.ic.seed,
            dealias: self.cfg.model.dealias,
            step,
            t_origin: self.schedule.t_origin,
            t_end: self.schedule.t_end,
            f_integral: self.extremes.as_ref().map_or(0.0, |e| e.last.f_integral),
        };
        let dir = checkpoint_dir(&self.cfg.output.dir, step);
        save_checkpoint(&dir, state, &meta)?;
        info!("checkpoint written to {}", dir.display());
        Ok(())
    }
}

fn prepare_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write_test");
    fs::write(&probe, b"")?;
    fs::remove_file(probe)?;
    Ok(())
}

fn drive(
    cfg: &RunConfig,
    state0: State,
    schedule: Schedule,
    start_step: usize,
    f_integral0: f64,
    warnings: Vec<String>,
) -> Result<RunOutcome> {
    let out_dir = cfg.output.dir.clone();
    prepare_output(&out_dir)?;
    let grid = state0.grid().clone();
    let bank = Arc::new(DyadicBank::new(grid));
    let monitor = Monitor::new(bank, cfg.monitor, cfg.model.clone()).with_f_integral(f_integral0);
    let mut driver = Driver {
        cfg,
        schedule,
        writer: DiagnosticsWriter::create(&out_dir.join("diagnostics.csv"))?,
        monitor,
        extremes: None,
        last_written: None,
    };
    let total = schedule.n_steps();
    let mut integrator = Integrator::new(cfg.model.clone()).with_cfl_warning(cfg.cfl_warn);
    let mut state = state0.with_time(schedule.time(start_step));
    let initial = state.clone();
    driver.observe(start_step, &state)?;

    let mut step = start_step;
    let mut failure = None;
    while step < total {
        let t_next = schedule.time(step + 1);
        match integrator.step(&state, t_next - schedule.time(step)) {
            Ok(next) => {
                state = next.with_time(t_next);
                step += 1;
                driver.observe(step, &state)?;
                let every = cfg.output.checkpoint_every;
                if every > 0 && (step % every == 0 || step == total) {
                    driver.checkpoint(step, &state)?;
                }
            }
            Err(err @ CnsError::BlowUp { .. }) => {
                warn!("{err}; diagnostics up to t = {} are kept", state.time);
                driver.flush_last(step)?;
                failure = Some(err.to_string());
                break;
            }
            Err(err) => return Err(err),
        }
    }

    let status = if failure.is_some() {
        RunStatus::BlowUp
    } else {
        RunStatus::Completed
    };
    let ext = driver.extremes.take().expect("initial state observed");
    if cfg.output.spectra {
        let (a, b) = (&ext.first.spectra, &ext.last.spectra);
        let (t0, t1) = (ext.first.time, ext.last.time);
        write_spectra_csv(
            &out_dir.join("spectra.csv"),
            &[(t0, "n", &a.n), (t0, "c", &a.c), (t0, "u", &a.u), (t1, "n", &b.n), (t1, "c", &b.c), (t1, "u", &b.u)],
        )?;
    }
    let rows = driver.writer.rows();
    let mut outcome = RunOutcome {
        status,
        error: failure,
        last_step: step,
        steps_scheduled: total,
        rows,
        final_state: state,
        summary: Summary::default(),
        warnings,
        output_dir: out_dir.clone(),
    };
    outcome.summary = build_summary(cfg, &outcome, &ext, start_step, &initial);
    fs::write(out_dir.join("summary.txt"), outcome.summary.render())?;
    Ok(outcome)
}

fn build_summary(cfg: &RunConfig, out: &RunOutcome, e: &Extremes, start_step: usize, initial: &State) -> Summary {
    let mut s = Summary::default();
    s.note("critical (scaling-invariant) regularity of (n, c, u): H^{-1/2} x H^{3/2} x H^{1/2}");
    s.note("(s1, s2, s3) = (-1/2, 1/2, 3/2) for (n, u, c)");
    s.put(
        "status",
        match out.status {
            RunStatus::Completed => "completed",
            RunStatus::BlowUp => "blowup",
        },
    );
    s.put("exit_code", out.exit_code());
    if let Some(err) = &out.error {
        s.put("error", err);
    }
    s.put("start_step", start_step);
    s.put("last_step", out.last_step);
    s.put("steps_scheduled", out.steps_scheduled);
    s.put("rows", out.rows);
    s.put("t_start", initial.time);
    s.put("t_final", e.last.time);
    s.put("warnings", out.warnings.len());
    for (i, w) in out.warnings.iter().enumerate() {
        s.put(&format!("warning.{i}"), w);
    }
    s.put("f_max", e.f_max.1);
    s.put("f_max_t", e.f_max.0);
    s.put("f_integral", e.last.f_integral);
    s.put("Q_u_max", e.q_u_max);
    s.put("Q_c_max", e.q_c_max);
    s.put("log_bound_ratio_max", e.log_ratio_max);
    s.put("separation_ok_all", e.separation_ok);
    s.put("mass_n_initial", e.first.mass_n);
    s.put("mass_n_final", e.last.mass_n);
    s.put("mass_drift_rel", e.mass_drift);
    s.put("max_c_initial", e.first.max_c);
    s.put("max_c_final", e.last.max_c);
    s.put("max_c_increase", e.max_c_increase);
    s.put("energy_u_initial", e.first.energy_u);
    s.put("energy_u_final", e.last.energy_u);
    s.put("neg_n_frac_max", e.neg_n_frac_max);
    s.put("max_divergence", e.max_divergence);
    for (k, v) in cfg.to_key_values() {
        s.put(&format!("config.{k}"), v);
    }
    s
}

fn initial_state(cfg: &RunConfig) -> Result<State> {
    let grid = make_grid(cfg.dim, cfg.n)?;
    match &cfg.ic_snapshot {
        Some(dir) => {
            let (state, meta) = load_checkpoint(dir)?;
            if (meta.dim, meta.n_per_axis) != (cfg.dim, cfg.n) {
                return Err(CnsError::Config(format!(
                    "grid mismatch: snapshot is {}^{}, configuration asks for {}^{}",
                    meta.n_per_axis, meta.dim, cfg.n, cfg.dim
                )));
            }
            Ok(state)
        }
        None => generate_initial(&cfg.ic, &grid),
    }
}

/// Runs the configured simulation from its initial data.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunOutcome> {
    let warnings = cfg.validate()?;
    for w in &warnings {
        warn!("{w}");
    }
    let s0 = initial_state(cfg)?;
    let schedule = Schedule::new(s0.time, cfg.dt, cfg.t_end)?;
    drive(cfg, s0, schedule, 0, 0.0, warnings)
}

/// Configuration of a continued run: the checkpoint's grid, model and
/// schedule, with `overrides` applied on top.
pub fn resume_config(checkpoint: &Path, overrides: &[(String, String)]) -> Result<(RunConfig, Vec<String>)> {
    let meta = read_meta(checkpoint)?;
    let grav = meta.grav.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(", ");
    let mut base = vec![
        ("grid.dim".to_string(), meta.dim.to_string()),
        ("grid.n".to_string(), meta.n_per_axis.to_string()),
        ("model.chi".to_string(), meta.chi.to_string()),
        ("model.grav".to_string(), grav),
        ("model.dealias".to_string(), meta.dealias.to_string()),
        ("integrator.dt".to_string(), meta.dt.to_string()),
        ("integrator.t_end".to_string(), meta.t_end.to_string()),
        ("ic.seed".to_string(), meta.seed.to_string()),
    ];
    base.extend_from_slice(overrides);
    RunConfig::from_text_with_overrides("", &base)
}

fn read_meta(checkpoint: &Path) -> Result<CheckpointMeta> {
    let text = fs::read_to_string(checkpoint.join("manifest.txt"))?;
    CheckpointMeta::from_manifest(&text)
}

/// Continues a checkpointed run on the schedule it was started with.
///
/// The grid, time step and model must match the checkpoint; only the end
/// time, monitor and output settings may change.
pub fn resume_simulation(checkpoint: &Path, cfg: &RunConfig) -> Result<RunOutcome> {
    let warnings = cfg.validate()?;
    let (state, meta) = load_checkpoint(checkpoint)?;
    if (meta.dim, meta.n_per_axis) != (cfg.dim, cfg.n) {
        return Err(CnsError::Config(format!(
            "grid mismatch on restart: checkpoint is {}^{}, configuration asks for {}^{}",
            meta.n_per_axis, meta.dim, cfg.n, cfg.dim
        )));
    }
    if meta.dt != cfg.dt || meta.chi != cfg.model.chi || meta.grav != cfg.model.grav || meta.dealias != cfg.model.dealias {
        return Err(CnsError::Config(
            "restart must keep the time step and model parameters of the checkpoint".into(),
        ));
    }
    let schedule = Schedule::new(meta.t_origin, meta.dt, cfg.t_end)?;
    if schedule.time(meta.step) != meta.time {
        return Err(CnsError::CorruptSnapshot(format!(
            "checkpoint time {} is not step {} of its schedule",
            meta.time, meta.step
        )));
    }
    drive(cfg, state, schedule, meta.step, meta.f_integral, warnings)
}
