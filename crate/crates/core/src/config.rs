//! Run configuration: flat `section.key = value` text.
//!
//! A bare key (`C0 = 0.1`) is accepted when exactly one section defines it.
//! Unknown keys are errors; values outside the monitor's admissible ranges
//! are returned as warnings.

use std::path::{Path, PathBuf};

use crate::error::{CnsError, Result};
use crate::grid::make_grid;
use crate::initial::InitialConditionSpec;
use crate::io::{parse_key_values, parse_list};
use crate::model::ModelParams;
use crate::monitor::MonitorConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write a checkpoint every this many steps and at the end; 0 disables.
    pub checkpoint_every: usize,
    pub spectra: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            checkpoint_every: 0,
            spectra: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub n: usize,
    pub model: ModelParams,
    pub dt: f64,
    pub t_end: f64,
    pub cfl_warn: bool,
    pub monitor: MonitorConfig,
    pub ic: InitialConditionSpec,
    /// Checkpoint directory whose fields replace the preset.
    pub ic_snapshot: Option<PathBuf>,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            n: 32,
            model: ModelParams::default_for(2),
            dt: 1e-3,
            t_end: 0.1,
            cfl_warn: true,
            monitor: MonitorConfig::default(),
            ic: InitialConditionSpec::default(),
            ic_snapshot: None,
            output: OutputConfig::default(),
        }
    }
}

pub const KEYS: [&str; 26] = [
    "grid.dim",
    "grid.n",
    "model.chi",
    "model.grav",
    "model.dealias",
    "integrator.dt",
    "integrator.t_end",
    "integrator.cfl_warn",
    "monitor.C0",
    "monitor.r",
    "monitor.s",
    "monitor.eps",
    "monitor.cadence",
    "ic.preset",
    "ic.amplitude",
    "ic.seed",
    "ic.mode",
    "ic.field",
    "ic.kmax",
    "ic.decay",
    "ic.n_mean",
    "ic.c_mean",
    "ic.snapshot",
    "output.dir",
    "output.checkpoint_every",
    "output.spectra",
];

/// Resolves a possibly bare key to its full dotted name.
pub fn resolve_key(key: &str) -> Result<&'static str> {
    if let Some(k) = KEYS.iter().find(|k| **k == key) {
        return Ok(k);
    }
    let matches: Vec<&'static str> = KEYS
        .iter()
        .copied()
        .filter(|k| k.split_once('.').map(|(_, b)| b) == Some(key))
        .collect();
    match matches.as_slice() {
        [one] => Ok(one),
        [] => Err(CnsError::Config(format!("unknown key '{key}'"))),
        _ => Err(CnsError::Config(format!("ambiguous key '{key}', use one of {matches:?}"))),
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| CnsError::Config(format!("{key}: cannot parse '{v}': {e}")))
}

/// Gravity is read as given and checked against the dimension in
/// [`RunConfig::validate`].
fn parse_grav(v: &str) -> Result<Vec<f64>> {
    parse_list(v).map_err(|e| CnsError::Config(format!("model.grav: {e}")))
}

impl RunConfig {
    /// Sets one key; `raw_key` may be bare.
    pub fn set(&mut self, raw_key: &str, v: &str) -> Result<()> {
        let key = resolve_key(raw_key)?;
        match key {
            "grid.dim" => self.dim = parse(key, v)?,
            "grid.n" => self.n = parse(key, v)?,
            "model.chi" => self.model.chi = parse(key, v)?,
            "model.grav" => self.model.grav = parse_grav(v)?,
            "model.dealias" => self.model.dealias = parse(key, v)?,
            "integrator.dt" => self.dt = parse(key, v)?,
            "integrator.t_end" => self.t_end = parse(key, v)?,
            "integrator.cfl_warn" => self.cfl_warn = parse(key, v)?,
            "monitor.C0" => self.monitor.c0 = parse(key, v)?,
            "monitor.r" => self.monitor.r = parse(key, v)?,
            "monitor.s" => self.monitor.s = parse(key, v)?,
            "monitor.eps" => self.monitor.eps = parse(key, v)?,
            "monitor.cadence" => self.monitor.cadence = parse(key, v)?,
            "ic.preset" => self.ic.preset = v.parse()?,
            "ic.amplitude" => self.ic.amplitude = parse(key, v)?,
            "ic.seed" => self.ic.seed = parse(key, v)?,
            "ic.mode" => {
                self.ic.mode = v
                    .split(',')
                    .map(|p| parse::<i64>(key, p.trim()))
                    .collect::<Result<_>>()?
            }
            "ic.field" => self.ic.target = v.parse()?,
            "ic.kmax" => self.ic.kmax = parse(key, v)?,
            "ic.decay" => self.ic.decay = parse(key, v)?,
            "ic.n_mean" => self.ic.n_mean = parse(key, v)?,
            "ic.c_mean" => self.ic.c_mean = parse(key, v)?,
            "ic.snapshot" => self.ic_snapshot = (!v.is_empty()).then(|| PathBuf::from(v)),
            "output.dir" => self.output.dir = PathBuf::from(v),
            "output.checkpoint_every" => self.output.checkpoint_every = parse(key, v)?,
            "output.spectra" => self.output.spectra = parse(key, v)?,
            _ => unreachable!("every entry of KEYS is handled"),
        }
        Ok(())
    }

    /// Applies `key = value` text on top of the defaults, then validates.
    /// Gravity defaults to the last axis of the configured dimension.
    pub fn from_text(text: &str) -> Result<(Self, Vec<String>)> {
        Self::from_text_with_overrides(text, &[])
    }

    pub fn from_text_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<(Self, Vec<String>)> {
        let mut cfg = Self::default();
        let mut grav_set = false;
        let entries = parse_key_values(text)?;
        let all = entries
            .iter()
            .map(|(line, k, v)| (Some(*line), k.as_str(), v.as_str()))
            .chain(overrides.iter().map(|(k, v)| (None, k.as_str(), v.as_str())));
        for (line, k, v) in all {
            cfg.set(k, v).map_err(|e| match line {
                Some(l) => CnsError::Config(format!("line {l}: {e}")),
                None => CnsError::Config(format!("override --{k}: {e}")),
            })?;
            grav_set |= resolve_key(k)? == "model.grav";
        }
        if !grav_set {
            cfg.model.grav = ModelParams::default_for(cfg.dim.clamp(2, 3)).grav;
        }
        let warnings = cfg.validate()?;
        Ok((cfg, warnings))
    }

    pub fn from_path(path: &Path) -> Result<(Self, Vec<String>)> {
        Self::from_path_with_overrides(path, &[])
    }

    pub fn from_path_with_overrides(path: &Path, overrides: &[(String, String)]) -> Result<(Self, Vec<String>)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CnsError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text_with_overrides(&text, overrides)
    }

    /// Hard errors for unusable values; warnings for monitor parameters
    /// outside the ranges where the estimates apply.
    pub fn validate(&self) -> Result<Vec<String>> {
        make_grid(self.dim, self.n).map_err(|e| CnsError::Config(e.to_string()))?;
        ModelParams::new(self.model.chi, self.model.grav.clone()).map_err(|e| CnsError::Config(e.to_string()))?;
        if self.model.grav.len() != self.dim {
            return Err(CnsError::Config(format!(
                "model.grav has {} components on a {}-dimensional grid",
                self.model.grav.len(),
                self.dim
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(CnsError::Config(format!("integrator.dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(CnsError::Config(format!(
                "integrator.t_end must be finite and nonnegative, got {}",
                self.t_end
            )));
        }
        if !(self.ic.kmax >= 0.0) || !(self.ic.decay >= 0.0) {
            return Err(CnsError::Config("ic.kmax and ic.decay must be nonnegative".into()));
        }
        let mut warnings = self.monitor.validate()?;
        if !self.model.dealias {
            warnings.push("model.dealias = false: nonlinear products are aliased".into());
        }
        Ok(warnings)
    }

    /// All keys with their current values, in [`KEYS`] order.
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mode = self.ic.mode.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let values = [
            self.dim.to_string(),
            self.n.to_string(),
            self.model.chi.to_string(),
            join(&self.model.grav),
            self.model.dealias.to_string(),
            self.dt.to_string(),
            self.t_end.to_string(),
            self.cfl_warn.to_string(),
            self.monitor.c0.to_string(),
            self.monitor.r.to_string(),
            self.monitor.s.to_string(),
            self.monitor.eps.to_string(),
            self.monitor.cadence.to_string(),
            self.ic.preset.to_string(),
            self.ic.amplitude.to_string(),
            self.ic.seed.to_string(),
            mode,
            self.ic.target.to_string(),
            self.ic.kmax.to_string(),
            self.ic.decay.to_string(),
            self.ic.n_mean.to_string(),
            self.ic.c_mean.to_string(),
            self.ic_snapshot.as_ref().map_or(String::new(), |p| p.display().to_string()),
            self.output.dir.display().to_string(),
            self.output.checkpoint_every.to_string(),
            self.output.spectra.to_string(),
        ];
        KEYS.into_iter().zip(values).collect()
    }

    pub fn render(&self) -> String {
        self.to_key_values()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::{Preset, Target};

    #[test]
    fn minimal_file_takes_defaults() {
        let (cfg, warnings) = RunConfig::from_text("grid.dim = 3\ngrid.n = 16\n").unwrap();
        assert!(warnings.is_empty());
        assert_eq!((cfg.dim, cfg.n), (3, 16));
        assert_eq!(cfg.model.grav, vec![0.0, 0.0, -1.0]);
        assert_eq!(cfg.monitor, MonitorConfig::default());
        assert_eq!(cfg.ic.preset, Preset::Zero);
    }

    #[test]
    fn bare_keys_and_warnings() {
        let (cfg, w) = RunConfig::from_text("C0 = 0.2\nmonitor.r = 2.5\n").unwrap();
        assert_eq!(cfg.monitor.c0, 0.2);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("outside the admissible range (3, 3/(1-eps))"));
    }

    #[test]
    fn errors_are_reported() {
        for bad in [
            "grid.size = 3",
            "grid.n = 12",
            "grid.n = abc",
            "monitor.cadence = 0",
            "model.grav = 0, 0, -1",
            "ic.preset = vortex",
            "integrator.dt = -1",
            "no equals sign",
        ] {
            assert!(
                matches!(RunConfig::from_text(bad), Err(CnsError::Config(_))),
                "{bad} should be rejected"
            );
        }
    }

    #[test]
    fn render_round_trips() {
        let text = "grid.n = 64\nic.preset = single_mode\nic.mode = 2, -1\nic.field = u\nic.snapshot = a/b\nmodel.grav = 0.5, -2\n";
        let (cfg, _) = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.ic.target, Target::U);
        assert_eq!(cfg.ic.mode, vec![2, -1]);
        let (again, _) = RunConfig::from_text(&cfg.render()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn overrides_apply_last() {
        let o = vec![("grid.n".to_string(), "16".to_string()), ("seed".to_string(), "9".to_string())];
        let (cfg, _) = RunConfig::from_text_with_overrides("grid.n = 64\n", &o).unwrap();
        assert_eq!(cfg.n, 16);
        assert_eq!(cfg.ic.seed, 9);
        let bad = vec![("nope".to_string(), "1".to_string())];
        assert!(RunConfig::from_text_with_overrides("", &bad).is_err());
    }
}
