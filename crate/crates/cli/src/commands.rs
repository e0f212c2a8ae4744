use std::fmt::Write;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use newton_core::bank::{build_bank, default_encoder, entry_raw_features};
use newton_core::camera::{view_rotation, Camera};
use newton_core::catalog::{lookup, CatalogEntry, SCENARIOS};
use newton_core::matching::{encode, predict, train_encoder, EncoderParams, FusionConfig, MatchResult, TrainConfig};
use newton_core::metrics::{
    angular_error, default_threshold, f_measure, mhd, resample_common, DEFAULT_RESAMPLE_POINTS,
};
use newton_core::store::{read_params, write_atomic, write_params, BankFile, QueryRecord, QuerySet};
use newton_core::{Curve3D, Error, TrajectoryState};

use crate::report::{Metric, Report};
use crate::svg::{Glyph, Scene, FORCE_COLOR, VELOCITY_COLOR};
use crate::{CliError, CliResult, BANK_DIR_ENV, BANK_FILE_NAME};

/// Explicit path if given, otherwise `bank.nbk` inside `$NEWTON_BANK_DIR`.
pub fn resolve_bank_path(explicit: Option<&Path>) -> CliResult<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.to_path_buf());
    }
    match std::env::var_os(BANK_DIR_ENV) {
        Some(dir) if !dir.is_empty() => Ok(PathBuf::from(dir).join(BANK_FILE_NAME)),
        _ => Err(CliError::Usage(format!(
            "no --bank given and {BANK_DIR_ENV} is not set"
        ))),
    }
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        }),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    ensure_parent(path)?;
    Ok(write_atomic(path, text.as_bytes())?)
}

/// Builds the bank with the encoder stored at `encoder`, or the identity encoder.
pub fn bank_build(out: &Path, encoder: Option<&Path>) -> CliResult<BankFile> {
    let enc = match encoder {
        Some(p) => read_params(p)?,
        None => default_encoder(),
    };
    let file = build_bank(&enc)?;
    ensure_parent(out)?;
    file.write(out)?;
    Ok(file)
}

pub fn bank_inspect(path: &Path) -> CliResult<String> {
    let file = BankFile::read(path)?;
    let mut out = String::new();
    let _ = writeln!(out, "bank {}", path.display());
    let _ = writeln!(out, "entries {}", file.bank.len());
    let _ = writeln!(out, "descriptor_dim {}", file.bank.descriptor_dim());
    let _ = writeln!(out, "raw_dim {}", file.raw_dim);
    let _ = writeln!(out, "payload_bytes {}", file.payload_len());
    for s in SCENARIOS.iter() {
        let views = file.bank.catalog().iter().filter(|e| e.scenario_id == s.id).count();
        let _ = writeln!(out, "scenario {} {:?} views {}", s.id, s.motion_class, views);
    }
    Ok(out)
}

/// Positions of `states` in the entry's camera orientation.
pub fn entry_curve(entry: &CatalogEntry, states: &[TrajectoryState]) -> CliResult<Curve3D> {
    let r = view_rotation(&entry.viewpoint);
    Ok(Curve3D::from_track(states.iter().map(|s| r * s.position).collect())?)
}

/// Image flow direction of a state, zero when the object is at rest.
pub fn state_flow(cam: &Camera, state: &TrajectoryState) -> CliResult<Vector2<f64>> {
    if state.velocity_dir.norm() == 0.0 {
        return Ok(Vector2::zeros());
    }
    Ok(cam.project_flow(state)?)
}

/// Query set with one record per bank state, carrying its own ground truth.
pub fn bank_queries(bank_path: &Path, out: &Path) -> CliResult<QuerySet> {
    let file = BankFile::read(bank_path)?;
    let mut records = Vec::new();
    for (entry, states) in file.bank.catalog().iter().zip(&file.states) {
        let cam = Camera::canonical(&entry.viewpoint);
        for (i, raw) in entry_raw_features(entry, states).iter().enumerate() {
            records.push(QueryRecord {
                id: format!("e{}s{}", entry.entry_id, i + 1),
                features: raw.to_vec(),
                entry_id: Some(entry.entry_id),
                flow: Some(state_flow(&cam, &states[i])?),
                curve: Some(entry_curve(entry, &states[i..])?),
            });
        }
    }
    let set = QuerySet { records };
    ensure_parent(out)?;
    set.write(out)?;
    Ok(set)
}

fn load_params(path: Option<&Path>, file: &BankFile, raw_dim: usize) -> CliResult<EncoderParams> {
    let params = match path {
        Some(p) => read_params(p)?,
        None => EncoderParams::identity(file.raw_dim, file.bank.descriptor_dim(), file.bank.len()),
    };
    if params.descriptor_dim() != file.bank.descriptor_dim() || params.entries() != file.bank.len() {
        return Err(CliError::Data(format!(
            "encoder produces {}-dim descriptors over {} entries, bank has {} over {}",
            params.descriptor_dim(),
            params.entries(),
            file.bank.descriptor_dim(),
            file.bank.len()
        )));
    }
    if params.raw_dim() != raw_dim {
        return Err(CliError::Data(format!(
            "query has {raw_dim} raw features, encoder expects R = {}",
            params.raw_dim()
        )));
    }
    Ok(params)
}

fn fusion(lambda: f64) -> CliResult<FusionConfig> {
    FusionConfig::new(lambda).map_err(|e| CliError::Usage(e.to_string()))
}

fn read_queries(path: &Path) -> CliResult<QuerySet> {
    let set = QuerySet::read(path)?;
    if set.records.is_empty() {
        return Err(CliError::Data(format!("{} holds no query records", path.display())));
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryInput {
    Features(Vec<f64>),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOptions {
    pub lambda: f64,
    pub params: Option<PathBuf>,
    /// SVG with the predicted curve of every query.
    pub svg: Option<PathBuf>,
    /// CSV of the per-state similarities of the predicted entry.
    pub sims: Option<PathBuf>,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            params: None,
            svg: None,
            sims: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub id: String,
    pub result: MatchResult,
}

impl QueryOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} h={} s_h={} confidence={:.6}",
            self.id,
            self.result.entry_id,
            self.result.state,
            self.result.confidence()
        )
    }
}

fn entry_index(file: &BankFile, entry_id: u16) -> CliResult<usize> {
    file.bank
        .index_of(entry_id)
        .ok_or_else(|| CliError::Data(format!("entry {entry_id} is not in the bank")))
}

fn predict_all(
    file: &BankFile,
    set: &QuerySet,
    params: &EncoderParams,
    cfg: &FusionConfig,
) -> CliResult<Vec<MatchResult>> {
    set.records
        .iter()
        .map(|r| Ok(predict(&encode(&r.features, params)?, &file.bank, params, cfg)?))
        .collect()
}

pub fn query(bank_path: &Path, input: &QueryInput, opts: &QueryOptions) -> CliResult<Vec<QueryOutcome>> {
    let cfg = fusion(opts.lambda)?;
    let file = BankFile::read(bank_path)?;
    let set = match input {
        QueryInput::Features(f) => QuerySet {
            records: vec![QueryRecord {
                id: "q1".into(),
                features: f.clone(),
                entry_id: None,
                flow: None,
                curve: None,
            }],
        },
        QueryInput::File(p) => read_queries(p)?,
    };
    let raw_dim = set.raw_dim().unwrap_or(0);
    let params = load_params(opts.params.as_deref(), &file, raw_dim)?;
    let results = predict_all(&file, &set, &params, &cfg)?;
    let outcomes: Vec<QueryOutcome> = set
        .records
        .iter()
        .zip(results)
        .map(|(r, result)| QueryOutcome {
            id: r.id.clone(),
            result,
        })
        .collect();

    if let Some(path) = &opts.svg {
        let mut scene = Scene::default();
        for o in &outcomes {
            let idx = entry_index(&file, o.result.entry_id)?;
            let entry = &file.bank.catalog()[idx];
            let cam = Camera::canonical(&entry.viewpoint);
            let pts = cam.project_states(&file.states[idx][o.result.state - 1..])?;
            scene
                .polylines
                .push((o.id.clone(), pts.iter().map(|p| Vector2::new(p.u, p.v)).collect()));
        }
        write_text(path, &scene.to_svg())?;
    }
    if let Some(path) = &opts.sims {
        let mut csv = String::from("id,entry_id,state,similarity\n");
        for o in &outcomes {
            for (i, s) in o.result.per_state_sims.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{},{}", o.id, o.result.entry_id, i + 1, s);
            }
        }
        write_text(path, &csv)?;
    }
    Ok(outcomes)
}

fn missing(set: &QuerySet, what: &str, has: impl Fn(&QueryRecord) -> bool) -> CliResult<()> {
    let ids: Vec<&str> = set.records.iter().filter(|r| !has(r)).map(|r| r.id.as_str()).collect();
    if ids.is_empty() {
        Ok(())
    } else {
        Err(Error::Ingestion(format!("records without ground-truth {what}: {}", ids.join(", "))).into())
    }
}

/// Scores every query against its ground truth. Records are grouped by
/// their ground-truth scenario, or the predicted one when no label is given.
pub fn eval(
    bank_path: &Path,
    queries: &Path,
    metric: Metric,
    lambda: f64,
    threshold: Option<f64>,
    params: Option<&Path>,
) -> CliResult<Report> {
    let cfg = fusion(lambda)?;
    if let Some(t) = threshold {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage(format!("--threshold must be positive, got {t}")));
        }
    }
    let file = BankFile::read(bank_path)?;
    let set = read_queries(queries)?;
    match metric {
        Metric::FMeasure | Metric::Mhd => missing(&set, "curve", |r| r.curve.is_some())?,
        Metric::Flow => missing(&set, "flow", |r| r.flow.is_some())?,
    }
    let params = load_params(params, &file, set.raw_dim().unwrap_or(0))?;
    let results = predict_all(&file, &set, &params, &cfg)?;
    let mut scores = Vec::with_capacity(results.len());
    for (rec, m) in set.records.iter().zip(&results) {
        let idx = entry_index(&file, m.entry_id)?;
        let entry = &file.bank.catalog()[idx];
        let states = &file.states[idx][m.state - 1..];
        let value = match metric {
            Metric::FMeasure | Metric::Mhd => {
                let gt = rec.curve.as_ref().expect("checked above");
                let pred = entry_curve(entry, states)?;
                let (pred, gt) = resample_common(&pred, gt, DEFAULT_RESAMPLE_POINTS)?;
                if metric == Metric::FMeasure {
                    let tau = threshold.unwrap_or_else(|| default_threshold(&gt));
                    f_measure(&pred, &gt, tau)?.f
                } else {
                    mhd(&pred, &gt)?
                }
            }
            Metric::Flow => {
                let cam = Camera::canonical(&entry.viewpoint);
                angular_error(&state_flow(&cam, &states[0])?, &rec.flow.expect("checked above"))
            }
        };
        let scenario = match rec.entry_id {
            Some(e) => lookup(e)?.scenario_id,
            None => entry.scenario_id,
        };
        scores.push((scenario, value));
    }
    Ok(Report::from_scores(metric, &scores))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub iters: usize,
    pub seed: u64,
    pub lambda: f64,
    /// Starting parameters; defaults to the bank encoder with a seeded Gaussian head.
    pub init: Option<PathBuf>,
    pub out: PathBuf,
    /// Loss CSV; defaults to `<out>.loss.csv`.
    pub loss: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub params_path: PathBuf,
    pub loss_path: PathBuf,
    pub losses: Vec<f64>,
}

fn default_loss_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".loss.csv");
    out.with_file_name(name)
}

pub fn train(bank_path: &Path, queries: &Path, opts: &TrainOptions) -> CliResult<TrainSummary> {
    let cfg = fusion(opts.lambda)?;
    if opts.iters == 0 {
        return Err(CliError::Usage("--iters must be at least 1".into()));
    }
    let file = BankFile::read(bank_path)?;
    let set = read_queries(queries)?;
    missing(&set, "entry_id", |r| r.entry_id.is_some())?;
    let raw_dim = set.raw_dim().unwrap_or(0);
    let init = match &opts.init {
        Some(p) => load_params(Some(p), &file, raw_dim)?,
        None => EncoderParams::identity(raw_dim, file.bank.descriptor_dim(), file.bank.len()),
    };
    let dataset: Vec<(Vec<f64>, u16)> = set
        .records
        .iter()
        .map(|r| (r.features.clone(), r.entry_id.expect("checked above")))
        .collect();
    let config = TrainConfig {
        iters: opts.iters,
        seed: opts.seed,
        fusion: cfg,
        ..TrainConfig::default()
    };
    let outcome = train_encoder(&dataset, &file.bank, &config, init)?;

    ensure_parent(&opts.out)?;
    write_params(&opts.out, &outcome.params)?;
    let loss_path = opts.loss.clone().unwrap_or_else(|| default_loss_path(&opts.out));
    let mut csv = String::from("iter,lr,loss\n");
    for (i, l) in outcome.losses.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{}", i + 1, config.learning_rate(i), l);
    }
    write_text(&loss_path, &csv)?;
    Ok(TrainSummary {
        params_path: opts.out.clone(),
        loss_path,
        losses: outcome.losses,
    })
}

/// Projected trajectory of one entry with velocity and force glyphs per state.
pub fn plot(bank_path: &Path, entry_id: u16, out: &Path) -> CliResult<String> {
    let entry = lookup(entry_id)?;
    let file = BankFile::read(bank_path)?;
    let idx = entry_index(&file, entry_id)?;
    let states = &file.states[idx];
    let cam = Camera::canonical(&entry.viewpoint);
    let pts: Vec<Vector2<f64>> = cam
        .project_states(states)?
        .iter()
        .map(|p| Vector2::new(p.u, p.v))
        .collect();
    let mut scene = Scene::default();
    if pts.iter().all(|p| p == &pts[0]) {
        scene.markers.push(pts[0]);
    } else {
        scene.polylines.push((format!("entry-{entry_id}"), pts.clone()));
        scene.markers.extend(pts.iter().copied());
    }
    for (s, at) in states.iter().zip(&pts) {
        scene.glyphs.push(Glyph {
            at: *at,
            dir: state_flow(&cam, s)?,
            color: VELOCITY_COLOR,
        });
        scene.glyphs.push(Glyph {
            at: *at,
            dir: cam.project_direction(&s.position, &s.force_dir)?,
            color: FORCE_COLOR,
        });
    }
    let svg = scene.to_svg();
    write_text(out, &svg)?;
    Ok(svg)
}
