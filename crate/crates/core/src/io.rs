//! Snapshot, checkpoint and diagnostics files.
//!
//! Snapshot layout (all little-endian):
//!
//! | offset | type    | content                         |
//! |--------|---------|---------------------------------|
//! | 0      | 4 bytes | magic `CNSF`                    |
//! | 4      | u32     | format version (1)              |
//! | 8      | u32     | dim                             |
//! | 12     | u32     | points per axis `N`             |
//! | 16     | u32     | components                      |
//! | 20     | u32     | reserved, 0                     |
//! | 24     | f64     | time                            |
//! | 32     | f64 ... | `components × N^dim` values     |
//!
//! Values are component-major, then row-major over grid points with axis 0
//! slowest. A checkpoint is a directory holding `manifest.txt` and one
//! snapshot per field (`n.bin`, `c.bin`, `u.bin`).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{CnsError, Result};
use crate::field::RealField;
use crate::grid::TorusGrid;
use crate::lp::ShellNorms;
use crate::model::State;
use crate::monitor::DiagnosticsRecord;

pub const MAGIC: &[u8; 4] = b"CNSF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dim: usize,
    pub n: usize,
    pub components: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_field(field: &RealField, time: f64) -> Self {
        let grid = field.grid();
        Self {
            dim: grid.dim(),
            n: grid.n(),
            components: field.components(),
            time,
            values: field.values().to_vec(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        for v in [VERSION, self.dim as u32, self.n as u32, self.components as u32, 0] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.time.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |msg: &str| CnsError::CorruptSnapshot(msg.to_string());
        if bytes.len() < HEADER_LEN {
            return Err(corrupt("file shorter than the header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
        let (version, dim, n, components) = (word(0), word(1) as usize, word(2) as usize, word(3) as usize);
        if version != VERSION {
            return Err(corrupt(&format!("unsupported version {version}")));
        }
        if !(2..=3).contains(&dim) || n == 0 || !(components == 1 || components == dim) {
            return Err(corrupt(&format!("inconsistent header dim={dim} N={n} components={components}")));
        }
        let time = f64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes"));
        let count = n
            .checked_pow(dim as u32)
            .and_then(|v| v.checked_mul(components))
            .ok_or_else(|| corrupt("header size overflows"))?;
        if bytes.len() != HEADER_LEN + 8 * count {
            return Err(corrupt(&format!(
                "expected {} payload bytes, found {}",
                8 * count,
                bytes.len() - HEADER_LEN
            )));
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self {
            dim,
            n,
            components,
            time,
            values,
        })
    }

    /// Attaches the values to `grid`, which must have the recorded shape.
    pub fn into_field(self, grid: &Arc<TorusGrid>) -> Result<RealField> {
        if grid.dim() != self.dim || grid.n() != self.n {
            return Err(CnsError::ShapeMismatch(format!(
                "snapshot is {}^{}, grid is {}^{}",
                self.n,
                self.dim,
                grid.n(),
                grid.dim()
            )));
        }
        RealField::new(grid.clone(), self.components, self.values)
    }
}

pub fn write_snapshot(path: &Path, field: &RealField, time: f64) -> Result<()> {
    fs::write(path, Snapshot::from_field(field, time).to_bytes())?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    Snapshot::from_bytes(&fs::read(path)?)
}

/// Flat `key = value` documents; `#` starts a comment line.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CnsError::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(CnsError::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((i + 1, key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Everything besides the fields that a continued run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub dim: usize,
    pub n_per_axis: usize,
    pub time: f64,
    pub dt: f64,
    pub chi: f64,
    pub grav: Vec<f64>,
    pub seed: u64,
    pub dealias: bool,
    /// Index of the step that produced the state.
    pub step: usize,
    pub t_origin: f64,
    pub t_end: f64,
    /// Running `∫ f dt` up to `time`.
    pub f_integral: f64,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| CnsError::Config(format!("bad number '{}': {e}", p.trim())))
        })
        .collect()
}

impl CheckpointMeta {
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        put("dim", self.dim.to_string());
        put("n_per_axis", self.n_per_axis.to_string());
        put("time", self.time.to_string());
        put("dt", self.dt.to_string());
        put("chi", self.chi.to_string());
        put("grav", join(&self.grav));
        put("seed", self.seed.to_string());
        put("dealias", self.dealias.to_string());
        put("step", self.step.to_string());
        put("t_origin", self.t_origin.to_string());
        put("t_end", self.t_end.to_string());
        put("f_integral", self.f_integral.to_string());
        s
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let map: BTreeMap<String, String> = parse_key_values(text)
            .map_err(|e| CnsError::CorruptSnapshot(format!("manifest: {e}")))?
            .into_iter()
            .map(|(_, k, v)| (k, v))
            .collect();
        let get = |k: &str| {
            map.get(k)
                .ok_or_else(|| CnsError::CorruptSnapshot(format!("manifest lacks '{k}'")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| CnsError::CorruptSnapshot(format!("manifest key '{k}' has bad value '{v}'")))
        }
        Ok(Self {
            dim: num("dim", get("dim")?)?,
            n_per_axis: num("n_per_axis", get("n_per_axis")?)?,
            time: num("time", get("time")?)?,
            dt: num("dt", get("dt")?)?,
            chi: num("chi", get("chi")?)?,
            grav: parse_list(get("grav")?).map_err(|e| CnsError::CorruptSnapshot(format!("manifest: {e}")))?,
            seed: num("seed", get("seed")?)?,
            dealias: num("dealias", get("dealias")?)?,
            step: num("step", get("step")?)?,
            t_origin: num("t_origin", get("t_origin")?)?,
            t_end: num("t_end", get("t_end")?)?,
            f_integral: num("f_integral", get("f_integral")?)?,
        })
    }
}

pub fn save_checkpoint(dir: &Path, state: &State, meta: &CheckpointMeta) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_snapshot(&dir.join("n.bin"), state.n().real(), state.time)?;
    write_snapshot(&dir.join("c.bin"), state.c().real(), state.time)?;
    write_snapshot(&dir.join("u.bin"), state.u().real(), state.time)?;
    fs::write(dir.join("manifest.txt"), meta.to_manifest())?;
    Ok(())
}

/// Loads a checkpoint, rebuilding the grid from the manifest.
pub fn load_checkpoint(dir: &Path) -> Result<(State, CheckpointMeta)> {
    let meta = CheckpointMeta::from_manifest(&fs::read_to_string(dir.join("manifest.txt"))?)?;
    let grid = crate::grid::make_grid(meta.dim, meta.n_per_axis)?;
    let field = |name: &str| -> Result<RealField> {
        let snap = read_snapshot(&dir.join(name))?;
        if snap.time != meta.time {
            return Err(CnsError::CorruptSnapshot(format!(
                "{name} is stamped {} but the manifest says {}",
                snap.time, meta.time
            )));
        }
        snap.into_field(&grid)
    };
    let state = State::new(meta.time, field("n.bin")?, field("c.bin")?, field("u.bin")?)?;
    Ok((state, meta))
}

pub const CSV_COLUMNS: [&str; 25] = [
    "t",
    "Lambda_u",
    "Q_u",
    "Lambda_c",
    "Q_c",
    "f",
    "f_grad_c_part",
    "f_besov_u_part",
    "f_integral_to_t",
    "I",
    "II",
    "III",
    "IV",
    "V",
    "VI",
    "D_n",
    "D_c",
    "D_u",
    "residual_n",
    "residual_c",
    "residual_u",
    "mass_n",
    "max_c",
    "energy_u",
    "neg_n_frac",
];

fn csv_error(e: csv::Error) -> CnsError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CnsError::Io(io),
        other => CnsError::Config(format!("csv: {other:?}")),
    }
}

fn record_row(r: &DiagnosticsRecord) -> Vec<String> {
    let mut row = vec![
        r.time.to_string(),
        r.wn_u.lambda.to_string(),
        r.wn_u.q.to_string(),
        r.wn_c.lambda.to_string(),
        r.wn_c.q.to_string(),
        r.f.value.to_string(),
        r.f.grad_c_part.to_string(),
        r.f.besov_u_part.to_string(),
        r.f_integral.to_string(),
    ];
    row.extend(r.flux.as_array().iter().map(|v| v.to_string()));
    for v in [
        r.dissipation.n,
        r.dissipation.c,
        r.dissipation.u,
        r.residual.n,
        r.residual.c,
        r.residual.u,
        r.mass_n,
        r.max_c,
        r.energy_u,
        r.neg_n_frac,
    ] {
        row.push(v.to_string());
    }
    row
}

/// Row-at-a-time diagnostics table, flushed after every row so that an
/// interrupted run leaves a readable file.
pub struct DiagnosticsWriter {
    w: csv::Writer<fs::File>,
    rows: usize,
}

impl DiagnosticsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(CSV_COLUMNS).map_err(csv_error)?;
        w.flush()?;
        Ok(Self { w, rows: 0 })
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        self.w.write_record(record_row(r)).map_err(csv_error)?;
        self.w.flush()?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

pub fn write_diagnostics_csv<'a, I>(path: &Path, records: I) -> Result<()>
where
    I: IntoIterator<Item = &'a DiagnosticsRecord>,
{
    let mut w = DiagnosticsWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    Ok(())
}

/// Reads the diagnostics table back as `(header, rows)`.
pub fn read_diagnostics_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let header = r.headers().map_err(csv_error)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        rows.push(
            rec.iter()
                .map(|v| v.parse::<f64>().map_err(|e| CnsError::Config(format!("csv value '{v}': {e}"))))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok((header, rows))
}

/// Appends shell spectra of one snapshot, one row per field and shell.
pub fn write_spectra_csv(path: &Path, snapshots: &[(f64, &str, &ShellNorms)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,field,q,lambda_q,l2_norm,linf_norm,lr_norm")?;
    for (t, name, norms) in snapshots {
        for s in &norms.shells {
            writeln!(w, "{t},{name},{},{},{},{},{}", s.q, s.lambda, s.l2, s.linf, s.lr)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Flat `key = value` run summary, keys in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    notes: Vec<String>,
    entries: Vec<(String, String)>,
}

impl Summary {
    /// Adds a `#` comment line printed above the entries.
    pub fn note(&mut self, text: &str) {
        self.notes.push(text.to_string());
    }

    pub fn put(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let notes = self.notes.iter().map(|n| format!("# {n}\n"));
        notes.chain(self.entries.iter().map(|(k, v)| format!("{k} = {v}\n"))).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(Self {
            notes: Vec::new(),
            entries: parse_key_values(text)?.into_iter().map(|(_, k, v)| (k, v)).collect(),
        })
    }
}
