use serde::{Deserialize, Serialize};

use super::{Refinement, Refiner};
use crate::error::{Error, Result};
use crate::model::{Context, Policy};

pub const PROFILE_HEADER: [&str; 8] = ["step", "ev_i", "h", "n_refinable", "decision", "split_var", "delta_ev", "wall_ms"];

/// State of the policy after `step` refinements. `h` and `n_refinable`
/// describe the next refinement (the largest `H` among refinable leaves and
/// their count); the remaining fields describe the refinement that produced
/// this row and are empty on row 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub step: usize,
    pub ev_i: f64,
    pub h: f64,
    pub n_refinable: usize,
    pub decision: Option<String>,
    pub context: Option<Context>,
    pub split_var: Option<String>,
    pub delta_ev: f64,
    pub wall_ms: f64,
}

impl RefinementStep {
    pub(crate) fn initial(ev_i: f64, r: &Refiner) -> Self {
        RefinementStep {
            step: 0,
            ev_i,
            h: r.next_candidate().map_or(0.0, |c| c.h),
            n_refinable: r.n_refinable(),
            decision: None,
            context: None,
            split_var: None,
            delta_ev: 0.0,
            wall_ms: 0.0,
        }
    }

    pub(crate) fn after(step: usize, r: &Refiner, done: Refinement, wall_ms: f64) -> Self {
        RefinementStep {
            step,
            ev_i: r.ev_i(),
            h: r.next_candidate().map_or(0.0, |c| c.h),
            n_refinable: r.n_refinable(),
            decision: Some(done.decision),
            context: Some(done.context),
            split_var: Some(done.split_var),
            delta_ev: done.delta_ev,
            wall_ms,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Budget,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementProfile {
    pub problem: String,
    pub seed: Option<u64>,
    pub steps: Vec<RefinementStep>,
    /// Optimal value when the diagram was solved exactly.
    pub ev_star: Option<f64>,
    pub stop_reason: StopReason,
    pub policy: Policy,
}

impl RefinementProfile {
    pub fn ev_i(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.ev_i).collect()
    }

    pub fn final_ev(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.ev_i)
    }

    pub fn best_ev(&self) -> f64 {
        self.steps.iter().map(|s| s.ev_i).fold(f64::NEG_INFINITY, f64::max)
    }

    /// First step whose value is within `tol` of the known optimum.
    pub fn convergence_step(&self, tol: f64) -> Option<usize> {
        let star = self.ev_star?;
        self.steps.iter().find(|s| s.ev_i >= star - tol).map(|s| s.step)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(PROFILE_HEADER).map_err(csv_err)?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.ev_i.to_string(),
                s.h.to_string(),
                s.n_refinable.to_string(),
                s.decision.clone().unwrap_or_default(),
                s.split_var.clone().unwrap_or_default(),
                s.delta_ev.to_string(),
                s.wall_ms.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}
