use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::commands::{load_profiles, subdirs, to_json, Prediction};
use super::{files_with_suffix, read_text, write_atomic};
use crate::error::{Error, Result};

/// Count, mean and population standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        if values.is_empty() {
            return Stat::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Stat { n: values.len(), mean, std: var.sqrt() }
    }

    /// Statistics of the union of the samples behind `parts`.
    pub fn pooled(parts: &[Stat]) -> Stat {
        let n: usize = parts.iter().map(|s| s.n).sum();
        if n == 0 {
            return Stat::default();
        }
        let mean = parts.iter().map(|s| s.n as f64 * s.mean).sum::<f64>() / n as f64;
        let second = parts
            .iter()
            .map(|s| s.n as f64 * (s.std * s.std + (s.mean - mean) * (s.mean - mean)))
            .sum::<f64>()
            / n as f64;
        Stat { n, mean, std: second.max(0.0).sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelColumn {
    pub model: String,
    /// Estimate at the last recorded step.
    pub estimate: f64,
    pub trajectory: Vec<f64>,
    /// Estimate minus the current `EV_I`, over all steps.
    pub gap_current: Stat,
    /// Estimate minus the best-known value, over all steps.
    pub gap_best: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    pub problem: String,
    pub final_ev: f64,
    pub best_known: f64,
    /// `optimum` when solved exactly, `profiles` when the best recorded `EV_I`.
    pub best_known_source: String,
    pub models: Vec<ModelColumn>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub model: String,
    pub estimate: Stat,
    pub gap_current: Stat,
    pub gap_best: Stat,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub models: Vec<String>,
    pub problems: Vec<ProblemReport>,
    pub best_known: Stat,
    pub aggregate: Vec<AggregateRow>,
}

impl Report {
    pub fn from_problems(models: Vec<String>, problems: Vec<ProblemReport>) -> Report {
        let best: Vec<f64> = problems.iter().map(|p| p.best_known).collect();
        let aggregate = models
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let est: Vec<f64> = problems.iter().map(|p| p.models[k].estimate).collect();
                let cur: Vec<Stat> = problems.iter().map(|p| p.models[k].gap_current).collect();
                let best: Vec<Stat> = problems.iter().map(|p| p.models[k].gap_best).collect();
                AggregateRow { model: m.clone(), estimate: Stat::of(&est), gap_current: Stat::pooled(&cur), gap_best: Stat::pooled(&best) }
            })
            .collect();
        Report { models, problems, best_known: Stat::of(&best), aggregate }
    }

    /// One row per problem with each model's final estimate and the best-known value.
    pub fn table(&self) -> String {
        let width = self.problems.iter().map(|p| p.problem.len()).max().unwrap_or(0).max(7);
        let mut s = format!("{:<width$}", "problem");
        for m in &self.models {
            write!(s, "  {m:>12}").unwrap();
        }
        writeln!(s, "  {:>12}", "best known").unwrap();
        for p in &self.problems {
            write!(s, "{:<width$}", p.problem).unwrap();
            for c in &p.models {
                write!(s, "  {:>12.4}", c.estimate).unwrap();
            }
            writeln!(s, "  {:>12.4}", p.best_known).unwrap();
        }
        if self.problems.is_empty() {
            return s;
        }
        write!(s, "{:<width$}", "mean").unwrap();
        for a in &self.aggregate {
            write!(s, "  {:>12.4}", a.estimate.mean).unwrap();
        }
        writeln!(s, "  {:>12.4}", self.best_known.mean).unwrap();
        for a in &self.aggregate {
            writeln!(
                s,
                "{}: estimate - current {:.4} (std {:.4}), estimate - best known {:.4} (std {:.4}) over {} steps",
                a.model, a.gap_current.mean, a.gap_current.std, a.gap_best.mean, a.gap_best.std, a.gap_current.n
            )
            .unwrap();
        }
        s
    }
}

/// Builds the report from the predictions in `predictions`. The best-known
/// value of a problem is its optimum when known, otherwise the largest `EV_I`
/// in any profile of that problem under `profiles_root`. Writes
/// `report.json` and `report.txt` to `out_dir`.
pub fn cmd_report(predictions: &Path, profiles_root: &Path, out_dir: &Path) -> Result<Report> {
    if !predictions.is_dir() {
        return Err(Error::Invalid(format!("predictions directory {} does not exist", predictions.display())));
    }
    let preds = files_with_suffix(predictions, ".prediction.json")?
        .iter()
        .map(|p| serde_json::from_str::<Prediction>(&read_text(p)?).map_err(|e| Error::parse(p, e)))
        .collect::<Result<Vec<_>>>()?;
    let mut recorded = Vec::new();
    for dir in std::iter::once(profiles_root.to_path_buf()).chain(subdirs(profiles_root)?) {
        if dir.is_dir() {
            recorded.extend(load_profiles(&dir)?);
        }
    }
    let models = preds.first().map(|p| p.models.clone()).unwrap_or_default();
    let mut problems = Vec::new();
    for p in &preds {
        if p.models != models {
            return Err(Error::Invalid(format!("prediction for `{}` uses models {:?}, expected {models:?}", p.problem, p.models)));
        }
        if p.rows.is_empty() {
            return Err(Error::Invalid(format!("prediction for `{}` has no rows", p.problem)));
        }
        let (best_known, source) = match p.ev_star {
            Some(v) => (v, "optimum"),
            None => {
                let seen = recorded.iter().filter(|r| r.problem == p.problem).map(|r| r.best_ev());
                let own = p.rows.iter().map(|r| r.ev_i);
                (seen.chain(own).fold(f64::NEG_INFINITY, f64::max), "profiles")
            }
        };
        let columns = models
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let trajectory: Vec<f64> = p.rows.iter().map(|r| r.estimates[k]).collect();
                let cur: Vec<f64> = p.rows.iter().zip(&trajectory).map(|(r, e)| e - r.ev_i).collect();
                let best: Vec<f64> = trajectory.iter().map(|e| e - best_known).collect();
                ModelColumn {
                    model: m.clone(),
                    estimate: *trajectory.last().expect("rows are nonempty"),
                    gap_current: Stat::of(&cur),
                    gap_best: Stat::of(&best),
                    trajectory,
                }
            })
            .collect();
        problems.push(ProblemReport {
            problem: p.problem.clone(),
            final_ev: p.rows.last().expect("rows are nonempty").ev_i,
            best_known,
            best_known_source: source.into(),
            models: columns,
        });
    }
    let report = Report::from_problems(models, problems);
    write_atomic(&out_dir.join("report.json"), to_json(&report).as_bytes())?;
    write_atomic(&out_dir.join("report.txt"), report.table().as_bytes())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn pooling_matches_direct_statistics(
            parts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 1..20), 1..8)
        ) {
            let stats: Vec<Stat> = parts.iter().map(|p| Stat::of(p)).collect();
            let all: Vec<f64> = parts.concat();
            let direct = Stat::of(&all);
            let pooled = Stat::pooled(&stats);
            prop_assert_eq!(pooled.n, direct.n);
            prop_assert!((pooled.mean - direct.mean).abs() < 1e-12);
            prop_assert!((pooled.std - direct.std).abs() < 1e-12);
        }
    }

    #[test]
    fn population_std() {
        let s = Stat::of(&[1.0, 3.0]);
        assert_eq!((s.n, s.mean, s.std), (2, 2.0, 1.0));
        assert_eq!(Stat::of(&[]), Stat::default());
    }

    #[test]
    fn empty_report_has_header_only() {
        let r = Report::from_problems(vec!["m".into()], Vec::new());
        assert_eq!(r.table().lines().count(), 1);
    }
}
