use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cumulative computation cost as a function of the number of refinements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CostModel {
    Zero,
    /// `c(t) = rate * t`
    Linear { rate: f64 },
    /// `c(t) = a * (r^t - 1)`
    Exponential { a: f64, r: f64 },
}

impl CostModel {
    pub fn linear(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::Invalid(format!("linear cost rate must be >= 0, got {rate}")));
        }
        Ok(CostModel::Linear { rate })
    }

    pub fn exponential(a: f64, r: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && r.is_finite() && r > 1.0) {
            return Err(Error::Invalid(format!("exponential cost needs a > 0 and r > 1, got a = {a}, r = {r}")));
        }
        Ok(CostModel::Exponential { a, r })
    }

    pub fn cumulative(&self, t: usize) -> f64 {
        match *self {
            CostModel::Zero => 0.0,
            CostModel::Linear { rate } => rate * t as f64,
            CostModel::Exponential { a, r } => a * (r.powi(t as i32) - 1.0),
        }
    }

    /// `(c(t), c(t) - c(t - 1))`, with zero increment at `t = 0`.
    pub fn step_cost(&self, t: usize) -> (f64, f64) {
        let c = self.cumulative(t);
        let inc = if t == 0 { 0.0 } else { c - self.cumulative(t - 1) };
        (c, inc)
    }
}

pub fn step_cost(cost: &CostModel, t: usize) -> (f64, f64) {
    cost.step_cost(t)
}

impl FromStr for CostModel {
    type Err = Error;

    /// `zero`, `linear:<rate>` or `exp:<a>,<r>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Invalid(format!("cost model `{s}`: {why}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("expected a number"));
        let (kind, params) = s.split_once(':').unwrap_or((s, ""));
        match kind.trim() {
            "zero" if params.is_empty() => Ok(CostModel::Zero),
            "linear" => CostModel::linear(num(params)?),
            "exp" | "exponential" => {
                let (a, r) = params.split_once(',').ok_or_else(|| bad("expected exp:<a>,<r>"))?;
                CostModel::exponential(num(a)?, num(r)?)
            }
            _ => Err(bad("expected zero, linear:<rate> or exp:<a>,<r>")),
        }
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostModel::Zero => write!(f, "zero"),
            CostModel::Linear { rate } => write!(f, "linear:{rate}"),
            CostModel::Exponential { a, r } => write!(f, "exp:{a},{r}"),
        }
    }
}

impl TryFrom<String> for CostModel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CostModel> for String {
    fn from(c: CostModel) -> String {
        c.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_values() {
        assert_eq!(CostModel::Zero.step_cost(17), (0.0, 0.0));
        let (c, inc) = CostModel::linear(0.01).unwrap().step_cost(5);
        assert!((c - 0.05).abs() < 1e-15 && (inc - 0.01).abs() < 1e-15);
        let (c, inc) = CostModel::exponential(0.001, 1.5).unwrap().step_cost(3);
        assert!((c - 0.002375).abs() < 1e-15);
        assert!((inc - 0.001125).abs() < 1e-15);
    }

    #[test]
    fn parse_round_trip() {
        for s in ["zero", "linear:0.01", "exp:0.001,1.5"] {
            assert_eq!(s.parse::<CostModel>().unwrap().to_string(), s);
        }
        for s in ["", "linear", "exp:1", "exp:0,2", "exp:1,0.5", "quadratic:1", "linear:-1"] {
            assert!(s.parse::<CostModel>().is_err(), "{s}");
        }
    }

    #[test]
    fn starts_at_zero() {
        for c in [CostModel::Zero, CostModel::linear(0.2).unwrap(), CostModel::exponential(0.5, 2.0).unwrap()] {
            assert_eq!(c.step_cost(0), (0.0, 0.0));
        }
    }
}
