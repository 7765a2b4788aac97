use serde::{Deserialize, Serialize};

use super::{CostModel, MetaModel};
use crate::error::{Error, Result};
use crate::inference::Network;
use crate::model::InfluenceDiagram;
use crate::refinement::{RefinementProfile, RefinementStep, Refiner, StopReason};

pub const TRACE_HEADER: [&str; 9] = ["step", "ev_i", "ev_star_hat", "n_refinable", "lvr", "inc_cost", "diff_value", "cum_cost", "ev_ii"];

/// Latent value of one refinement: the estimated optimality gap spread over
/// the refinable contexts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentValue {
    pub lvr: f64,
    /// No refinable context is left.
    pub converged: bool,
}

pub fn latent_value(ev_star_est: f64, ev_i: f64, n_refinable: usize) -> LatentValue {
    if n_refinable == 0 {
        LatentValue { lvr: 0.0, converged: true }
    } else {
        LatentValue { lvr: (ev_star_est - ev_i) / n_refinable as f64, converged: false }
    }
}

/// Comprehensive value `EV_II(t) = EV_I(t) - c(t)` along a profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComprehensiveProfile {
    pub ev_ii: Vec<f64>,
    pub cum_cost: Vec<f64>,
    /// Earliest step with the largest `EV_II`.
    pub argmax: usize,
}

pub fn comprehensive_profile(profile: &RefinementProfile, cost: &CostModel) -> ComprehensiveProfile {
    comprehensive(&profile.ev_i(), cost)
}

fn comprehensive(ev_i: &[f64], cost: &CostModel) -> ComprehensiveProfile {
    let cum_cost: Vec<f64> = (0..ev_i.len()).map(|t| cost.cumulative(t)).collect();
    let ev_ii: Vec<f64> = ev_i.iter().zip(&cum_cost).map(|(v, c)| v - c).collect();
    let mut argmax = 0;
    for (t, v) in ev_ii.iter().enumerate() {
        if *v > ev_ii[argmax] {
            argmax = t;
        }
    }
    ComprehensiveProfile { ev_ii, cum_cost, argmax }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlStop {
    Converged,
    Budget,
    NegativeDifferential,
}

impl ControlStop {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControlStop::Converged => "converged",
            ControlStop::Budget => "budget",
            ControlStop::NegativeDifferential => "negative differential",
        }
    }
}

/// The controller's view of the policy after `step` refinements, and the
/// decision about refinement `step + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub ev_i: f64,
    pub h: f64,
    /// Estimate of the driving model.
    pub ev_star_hat: f64,
    /// Estimates of every model, driving model first.
    pub estimates: Vec<f64>,
    pub n_refinable: usize,
    pub lvr: f64,
    /// Cost of the next refinement, `c(step + 1) - c(step)`.
    pub inc_cost: f64,
    pub diff_value: f64,
    pub cum_cost: f64,
    pub ev_ii: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerTrace {
    pub cost: CostModel,
    pub rows: Vec<TraceRow>,
    pub stop_step: usize,
    pub stop_reason: ControlStop,
    /// Earliest executed step with the largest `EV_II`.
    pub ev_ii_argmax: usize,
    /// The refinement run the controller drove.
    pub profile: RefinementProfile,
}

impl ControllerTrace {
    /// Steps the controller ran past the best comprehensive value.
    pub fn lag(&self) -> i64 {
        self.stop_step as i64 - self.ev_ii_argmax as i64
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        w.write_record(TRACE_HEADER).map_err(err)?;
        for r in &self.rows {
            w.write_record(
                [r.step as f64, r.ev_i, r.ev_star_hat, r.n_refinable as f64, r.lvr, r.inc_cost, r.diff_value, r.cum_cost, r.ev_ii]
                    .iter()
                    .map(|v| v.to_string()),
            )
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary(&self) -> String {
        format!(
            "stop step {} ({}), EV_II maximized at step {}, lag {}",
            self.stop_step,
            self.stop_reason.as_str(),
            self.ev_ii_argmax,
            self.lag()
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlOptions {
    pub max_steps: usize,
    pub clamp: bool,
    pub record_wall_time: bool,
}

impl Default for ControlOptions {
    fn default() -> Self {
        ControlOptions { max_steps: 30, clamp: false, record_wall_time: false }
    }
}

/// Refines while the differential value `LVR - (c(t+1) - c(t))` is positive.
///
/// Before refinement `t + 1` the first model predicts the optimum from the
/// current `EV_I` and the `H` of the leaf that would be refined next. The run
/// stops when nothing is refinable, after `max_steps` refinements, or when the
/// differential value is `<= 0` for a step that costs something. A step of
/// zero cost is never declined, so under the zero cost model the controller
/// follows plain refinement exactly.
pub fn run_controller(diagram: &InfluenceDiagram, models: &[MetaModel], cost: &CostModel, options: &ControlOptions) -> Result<ControllerTrace> {
    if models.is_empty() {
        return Err(Error::Invalid("controller needs at least one model".into()));
    }
    let mut r = Refiner::new(Network::compile(diagram)?)?;
    let mut steps = vec![RefinementStep::initial(r.ev_i(), &r)];
    let mut rows = Vec::new();
    let stop = loop {
        let t = rows.len();
        let cur = &steps[t];
        let estimates: Vec<f64> = models.iter().map(|m| m.predict_with(cur.ev_i, cur.h, options.clamp)).collect();
        let lv = latent_value(estimates[0], cur.ev_i, cur.n_refinable);
        let (cum_cost, _) = cost.step_cost(t);
        let (_, inc_cost) = cost.step_cost(t + 1);
        let diff_value = lv.lvr - inc_cost;
        rows.push(TraceRow {
            step: t,
            ev_i: cur.ev_i,
            h: cur.h,
            ev_star_hat: estimates[0],
            estimates,
            n_refinable: cur.n_refinable,
            lvr: lv.lvr,
            inc_cost,
            diff_value,
            cum_cost,
            ev_ii: cur.ev_i - cum_cost,
        });
        if lv.converged {
            break ControlStop::Converged;
        }
        if t >= options.max_steps {
            break ControlStop::Budget;
        }
        if diff_value <= 0.0 && inc_cost > 0.0 {
            break ControlStop::NegativeDifferential;
        }
        let start = std::time::Instant::now();
        let done = r.step()?.expect("a refinable leaf exists");
        let wall_ms = if options.record_wall_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        steps.push(RefinementStep::after(t + 1, &r, done, wall_ms));
    };
    let ev_ii_argmax = comprehensive(&steps.iter().map(|s| s.ev_i).collect::<Vec<_>>(), cost).argmax;
    let stop_step = rows.len() - 1;
    Ok(ControllerTrace {
        cost: *cost,
        rows,
        stop_step,
        stop_reason: stop,
        ev_ii_argmax,
        profile: RefinementProfile {
            problem: String::new(),
            seed: None,
            steps,
            ev_star: None,
            stop_reason: if stop == ControlStop::Converged { StopReason::Exhausted } else { StopReason::Budget },
            policy: r.policy(),
        },
    })
}
