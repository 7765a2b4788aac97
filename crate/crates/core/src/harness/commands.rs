use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ControlConfig, ExperimentConfig, Split};
use super::{files_with_suffix, line_chart, load_diagram, read_text, sha256_hex, stem_of, write_atomic};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::generators::{generate_corpus, Manifest};
use crate::metamodel::{extract_training_point, fit_polynomial, run_controller, ControlOptions, ControllerTrace, MetaModel};
use crate::model::{InfluenceDiagram, Policy};
use crate::refinement::{run_refinement, RefineOptions, RefinementProfile, StopReason};

/// Columns of the plot-ready controller series; one `ev_star_hat_<k>` column
/// per model is inserted after `ev_i`.
pub const SERIES_HEADER: [&str; 6] = ["step", "ev_i", "cum_cost", "ev_ii", "lvr", "diff_value"];

const PROFILE_SUFFIX: &str = ".profile.json";

/// Writes the diagrams and manifest of each requested corpus.
pub fn cmd_generate(cfg: &ExperimentConfig, splits: &[Split]) -> Result<Vec<Manifest>> {
    let exec = Execution::with_width(cfg.parallelism);
    let mut manifests = Vec::new();
    for &split in splits {
        let c = cfg.corpus(split);
        let corpus = generate_corpus(&c.name, &c.template, c.count, cfg.base_seed(split), exec)?;
        let dir = cfg.corpus_dir(split);
        let jobs: Vec<(&str, &InfluenceDiagram)> =
            corpus.manifest.entries.iter().map(|e| e.path.as_str()).zip(&corpus.diagrams).collect();
        exec.map(&jobs, |(path, d)| write_atomic(&dir.join(path), d.to_json().as_bytes()))
            .into_iter()
            .collect::<Result<()>>()?;
        write_atomic(&dir.join("manifest.json"), corpus.manifest.to_json().as_bytes())?;
        manifests.push(corpus.manifest);
    }
    Ok(manifests)
}

/// What [`cmd_refine`] works on.
#[derive(Clone, Debug, PartialEq)]
pub enum RefineTarget {
    /// Every problem of a generated corpus.
    Corpus(Split),
    /// One diagram file; results go to `profiles/single`.
    Problem(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefineOutcome {
    pub problem: String,
    pub refinements: usize,
    pub final_ev: f64,
    pub ev_star: Option<f64>,
    pub stop_reason: StopReason,
    pub csv: PathBuf,
}

struct Job {
    id: String,
    path: PathBuf,
    seed: Option<u64>,
}

/// Refines each target problem, writing `<id>.csv`, `<id>.profile.json` and
/// `<id>.policy.json`. Problems the exact solver can handle within the cap
/// get their optimum recorded in the profile.
pub fn cmd_refine(cfg: &ExperimentConfig, target: &RefineTarget, budget: Option<usize>) -> Result<Vec<RefineOutcome>> {
    let (jobs, out_dir, budget) = match target {
        RefineTarget::Corpus(split) => {
            let dir = cfg.corpus_dir(*split);
            let manifest_path = dir.join("manifest.json");
            let text = read_text(&manifest_path)?;
            let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(&manifest_path, e))?;
            let out = cfg.profile_dir(*split);
            write_atomic(&out.join("manifest.json"), text.as_bytes())?;
            let jobs = manifest
                .entries
                .iter()
                .map(|e| Job { id: e.id.clone(), path: dir.join(&e.path), seed: Some(e.seed) })
                .collect();
            (jobs, out, budget.unwrap_or(cfg.budget(*split)))
        }
        RefineTarget::Problem(path) => {
            let job = Job { id: stem_of(path, ".json"), path: path.clone(), seed: None };
            (vec![job], cfg.out.join("profiles").join("single"), budget.unwrap_or(cfg.refine.budget))
        }
    };
    let options = RefineOptions { max_steps: budget, record_wall_time: cfg.refine.record_wall_time, check_bookkeeping: false };
    Execution::with_width(cfg.parallelism)
        .map(&jobs, |job| refine_one(job, &out_dir, &options, cfg.refine.solve_cap))
        .into_iter()
        .collect()
}

fn refine_one(job: &Job, out_dir: &Path, options: &RefineOptions, cap: u64) -> Result<RefineOutcome> {
    let diagram = load_diagram(&job.path)?;
    let mut profile = run_refinement(&diagram, options)?;
    profile.problem = job.id.clone();
    profile.seed = job.seed;
    profile.ev_star = optimum(&diagram, cap)?;
    let csv = out_dir.join(format!("{}.csv", job.id));
    write_atomic(&csv, profile.to_csv()?.as_bytes())?;
    write_atomic(&out_dir.join(format!("{}{PROFILE_SUFFIX}", job.id)), profile.to_json().as_bytes())?;
    write_atomic(&out_dir.join(format!("{}.policy.json", job.id)), profile.policy.to_json().as_bytes())?;
    Ok(RefineOutcome {
        problem: job.id.clone(),
        refinements: profile.steps.len() - 1,
        final_ev: profile.final_ev(),
        ev_star: profile.ev_star,
        stop_reason: profile.stop_reason,
        csv,
    })
}

fn optimum(diagram: &InfluenceDiagram, cap: u64) -> Result<Option<f64>> {
    match crate::inference::solve_optimal(diagram, cap) {
        Ok(s) => Ok(Some(s.value)),
        Err(Error::TooLarge { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub problem: String,
    pub value: f64,
    pub states_expanded: u64,
    pub policy: Policy,
}

/// Solves one diagram exactly and writes `solutions/<id>.solution.json`.
pub fn cmd_solve(cfg: &ExperimentConfig, problem: &Path, cap: Option<u64>) -> Result<(SolveOutcome, PathBuf)> {
    let diagram = load_diagram(problem)?;
    let s = crate::inference::solve_optimal(&diagram, cap.unwrap_or(cfg.refine.solve_cap))?;
    let id = stem_of(problem, ".json");
    let outcome = SolveOutcome { problem: id.clone(), value: s.value, states_expanded: s.states_expanded, policy: s.policy };
    let path = cfg.solution_dir().join(format!("{id}.solution.json"));
    write_atomic(&path, to_json(&outcome).as_bytes())?;
    Ok((outcome, path))
}

pub(crate) fn load_profiles(dir: &Path) -> Result<Vec<RefinementProfile>> {
    files_with_suffix(dir, PROFILE_SUFFIX)?
        .iter()
        .map(|p| RefinementProfile::from_json(&read_text(p)?).map_err(|e| Error::parse(p, e)))
        .collect()
}

pub(crate) fn load_model(path: &Path) -> Result<MetaModel> {
    let model = MetaModel::from_json(&read_text(path)?).map_err(|e| Error::parse(path, e))?;
    MetaModel::new(model.degree, model.coefficients.clone()).map_err(|e| Error::parse(path, e))?;
    Ok(model)
}

/// Fits a model of `degree` to the row `step` of every profile in
/// `profiles`, writing it to `out`. The hash of the corpus manifest copied
/// next to the profiles becomes the model's provenance.
pub fn cmd_fit(profiles: &Path, degree: usize, step: usize, out: &Path) -> Result<MetaModel> {
    let points = load_profiles(profiles)?
        .iter()
        .map(|p| extract_training_point(p, step))
        .collect::<Result<Vec<_>>>()?;
    let mut model = fit_polynomial(&points, degree)?;
    let manifest = profiles.join("manifest.json");
    if manifest.exists() {
        model.provenance = Some(sha256_hex(read_text(&manifest)?.as_bytes()));
    }
    write_atomic(out, model.to_json().as_bytes())?;
    Ok(model)
}

/// Predicted optimum at every recorded step of one profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub problem: String,
    /// Model file names, in column order.
    pub models: Vec<String>,
    pub ev_star: Option<f64>,
    pub rows: Vec<PredictionRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub step: usize,
    pub ev_i: f64,
    pub h: f64,
    pub estimates: Vec<f64>,
}

impl Prediction {
    pub fn to_csv(&self) -> Result<String> {
        let mut header = vec!["step".to_string(), "ev_i".into(), "h".into()];
        header.extend((1..=self.models.len()).map(|k| format!("ev_star_hat_{k}")));
        csv_string(header, self.rows.iter().map(|r| {
            let mut rec = vec![r.step.to_string(), r.ev_i.to_string(), r.h.to_string()];
            rec.extend(r.estimates.iter().map(f64::to_string));
            rec
        }))
    }
}

/// Applies each model to every step of every profile in `profiles`.
pub fn cmd_predict(models: &[PathBuf], profiles: &Path, out_dir: &Path) -> Result<Vec<Prediction>> {
    if models.is_empty() {
        return Err(Error::Invalid("predict needs at least one model".into()));
    }
    let loaded = models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = models.iter().map(|p| stem_of(p, ".json")).collect();
    let mut out = Vec::new();
    for profile in load_profiles(profiles)? {
        let rows = profile
            .steps
            .iter()
            .map(|s| PredictionRow {
                step: s.step,
                ev_i: s.ev_i,
                h: s.h,
                estimates: loaded.iter().map(|m| m.predict(s.ev_i, s.h)).collect(),
            })
            .collect();
        let p = Prediction { problem: profile.problem.clone(), models: names.clone(), ev_star: profile.ev_star, rows };
        write_atomic(&out_dir.join(format!("{}.prediction.json", p.problem)), to_json(&p).as_bytes())?;
        write_atomic(&out_dir.join(format!("{}.prediction.csv", p.problem)), p.to_csv()?.as_bytes())?;
        out.push(p);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ControlOutcome {
    pub trace: ControllerTrace,
    /// Non-fatal problems, such as predictions outside the diagram's value range.
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Runs the stopping controller on one diagram, the first model driving it.
/// Writes the trace CSV, the plot series CSV, a summary line and optionally
/// SVG charts of both.
pub fn cmd_control(problem: &Path, models: &[PathBuf], options: &ControlConfig, out_dir: &Path) -> Result<ControlOutcome> {
    let diagram = load_diagram(problem)?;
    let loaded = models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    let opts = ControlOptions { max_steps: options.budget, clamp: options.clamp, record_wall_time: false };
    let trace = run_controller(&diagram, &loaded, &options.cost, &opts)?;

    let values = diagram.value_tree.leaf_values();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut warnings = Vec::new();
    if let Some(first) = trace.rows.first() {
        for (path, est) in models.iter().zip(&first.estimates) {
            if *est < lo - 1e-9 || *est > hi + 1e-9 {
                warnings.push(format!(
                    "{}: predicted optimum {est} lies outside the value range [{lo}, {hi}] of {}",
                    path.display(),
                    problem.display()
                ));
            }
        }
    }

    let id = stem_of(problem, ".json");
    let mut files = Vec::new();
    let mut emit = |name: String, contents: String| -> Result<()> {
        let path = out_dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        files.push(path);
        Ok(())
    };
    emit(format!("{id}.trace.csv"), trace.to_csv()?)?;
    emit(format!("{id}.series.csv"), series_csv(&trace, loaded.len())?)?;
    emit(format!("{id}.summary.txt"), format!("{id}: {}\n", trace.summary()))?;
    if options.svg {
        let steps: Vec<f64> = trace.rows.iter().map(|r| r.step as f64).collect();
        let column = |f: &dyn Fn(&crate::metamodel::TraceRow) -> f64| trace.rows.iter().map(f).collect::<Vec<f64>>();
        let mut value = vec![("EV_I".to_string(), column(&|r| r.ev_i))];
        for k in 0..loaded.len() {
            value.push((format!("EV_I* estimate {}", k + 1), column(&|r| r.estimates[k])));
        }
        value.push(("EV_II".into(), column(&|r| r.ev_ii)));
        value.push(("cumulative cost".into(), column(&|r| r.cum_cost)));
        emit(format!("{id}.svg"), line_chart(&format!("{id}: value"), &steps, &value))?;
        let diff = vec![
            ("LVR".to_string(), column(&|r| r.lvr)),
            ("incremental cost".into(), column(&|r| r.inc_cost)),
            ("differential value".into(), column(&|r| r.diff_value)),
        ];
        emit(format!("{id}.diff.svg"), line_chart(&format!("{id}: differential value"), &steps, &diff))?;
    }
    Ok(ControlOutcome { trace, warnings, files })
}

fn series_csv(trace: &ControllerTrace, n_models: usize) -> Result<String> {
    let mut header: Vec<String> = SERIES_HEADER[..2].iter().map(|s| s.to_string()).collect();
    header.extend((1..=n_models).map(|k| format!("ev_star_hat_{k}")));
    header.extend(SERIES_HEADER[2..].iter().map(|s| s.to_string()));
    csv_string(header, trace.rows.iter().map(|r| {
        let mut rec = vec![r.step.to_string(), r.ev_i.to_string()];
        rec.extend(r.estimates.iter().map(f64::to_string));
        rec.extend([r.cum_cost, r.ev_ii, r.lvr, r.diff_value].iter().map(f64::to_string));
        rec
    }))
}

pub(crate) fn csv_string(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes")
}

/// Directories directly below `root`, sorted; empty when `root` is absent.
pub(crate) fn subdirs(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
