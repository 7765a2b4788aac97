use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refinement::RefinementProfile;

/// Relative size below which a diagonal entry of `R` counts as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPoint {
    pub problem: String,
    pub step: usize,
    pub ev_i: f64,
    pub h: f64,
    pub ev_star: f64,
}

/// The `(EV_I, H)` pair recorded after `step` refinements, labelled with the
/// profile's optimum.
pub fn extract_training_point(profile: &RefinementProfile, step: usize) -> Result<TrainingPoint> {
    let row = profile.steps.get(step).ok_or(Error::ProfileTooShort { step, len: profile.steps.len() })?;
    let ev_star = profile.ev_star.ok_or_else(|| Error::MissingOptimum(profile.problem.clone()))?;
    let point = TrainingPoint { problem: profile.problem.clone(), step, ev_i: row.ev_i, h: row.h, ev_star };
    if ![point.ev_i, point.h, point.ev_star].iter().all(|v| v.is_finite()) {
        return Err(Error::Invalid(format!("non-finite training point from `{}`", profile.problem)));
    }
    Ok(point)
}

/// Number of monomials of total degree at most `degree` in two variables.
pub fn monomial_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Monomials in the order `1, x, y, x^2, xy, y^2, x^3, x^2 y, x y^2, y^3`.
pub fn basis(degree: usize, x: f64, y: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(monomial_count(degree));
    for total in 0..=degree {
        for j in 0..=total {
            out.push(x.powi((total - j) as i32) * y.powi(j as i32));
        }
    }
    out
}

/// Polynomial surface predicting the optimal value from `(EV_I, H)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub sse: f64,
    pub n_points: usize,
    /// SHA-256 of the manifest of the training corpus, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl MetaModel {
    pub fn new(degree: usize, coefficients: Vec<f64>) -> Result<Self> {
        check_degree(degree)?;
        if coefficients.len() != monomial_count(degree) {
            return Err(Error::Invalid(format!(
                "degree {degree} needs {} coefficients, got {}",
                monomial_count(degree),
                coefficients.len()
            )));
        }
        Ok(MetaModel { degree, coefficients, sse: 0.0, n_points: 0, provenance: None })
    }

    pub fn predict(&self, ev_i: f64, h: f64) -> f64 {
        basis(self.degree, ev_i, h).iter().zip(&self.coefficients).map(|(b, c)| b * c).sum()
    }

    /// As [`MetaModel::predict`], optionally clamped to `[0, 1]`.
    pub fn predict_with(&self, ev_i: f64, h: f64, clamp: bool) -> f64 {
        let v = self.predict(ev_i, h);
        if clamp {
            v.clamp(0.0, 1.0)
        } else {
            v
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Unclamped prediction.
pub fn predict_ev_star(model: &MetaModel, ev_i: f64, h: f64) -> f64 {
    model.predict(ev_i, h)
}

fn check_degree(degree: usize) -> Result<()> {
    if (1..=3).contains(&degree) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("degree must be 1, 2 or 3, got {degree}")))
    }
}

/// Ordinary least squares through a QR factorization of the design matrix.
pub fn fit_polynomial(points: &[TrainingPoint], degree: usize) -> Result<MetaModel> {
    check_degree(degree)?;
    let k = monomial_count(degree);
    if points.len() < k {
        return Err(Error::TooFewPoints { got: points.len(), needed: k });
    }
    let x = design_matrix(points, degree);
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.ev_star));
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if scale == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= RANK_TOLERANCE * scale) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().transpose() * &y;
    let beta = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
    let residual = &y - &x * &beta;
    Ok(MetaModel {
        degree,
        coefficients: beta.iter().copied().collect(),
        sse: residual.dot(&residual),
        n_points: points.len(),
        provenance: None,
    })
}

pub(crate) fn design_matrix(points: &[TrainingPoint], degree: usize) -> DMatrix<f64> {
    let k = monomial_count(degree);
    DMatrix::from_fn(points.len(), k, |i, j| basis(degree, points[i].ev_i, points[i].h)[j])
}

/// Predictions of a model over a regular probe grid on `[0, 1]^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationReport {
    pub degree: usize,
    pub grid_points: usize,
    pub min_prediction: f64,
    pub max_prediction: f64,
    /// `(ev_i, h, prediction)` for every probe outside `[0, 1]`.
    pub outside: Vec<(f64, f64, f64)>,
}

pub fn extrapolation_report(model: &MetaModel, resolution: usize) -> ExtrapolationReport {
    let n = resolution.max(2);
    let mut report = ExtrapolationReport {
        degree: model.degree,
        grid_points: n * n,
        min_prediction: f64::INFINITY,
        max_prediction: f64::NEG_INFINITY,
        outside: Vec::new(),
    };
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
            let v = model.predict(x, y);
            report.min_prediction = report.min_prediction.min(v);
            report.max_prediction = report.max_prediction.max(v);
            if !(0.0..=1.0).contains(&v) {
                report.outside.push((x, y, v));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Policy;
    use crate::refinement::{RefinementStep, StopReason};

    fn point(x: f64, y: f64, t: f64) -> TrainingPoint {
        TrainingPoint { problem: String::new(), step: 0, ev_i: x, h: y, ev_star: t }
    }

    fn profile(len: usize, ev_star: Option<f64>) -> RefinementProfile {
        RefinementProfile {
            problem: "p".into(),
            seed: None,
            steps: (0..len)
                .map(|i| RefinementStep {
                    step: i,
                    ev_i: 0.5 + 0.001 * i as f64,
                    h: 0.3,
                    n_refinable: i + 1,
                    decision: None,
                    context: None,
                    split_var: None,
                    delta_ev: 0.0,
                    wall_ms: 0.0,
                })
                .collect(),
            ev_star,
            stop_reason: StopReason::Budget,
            policy: Policy::default(),
        }
    }

    #[test]
    fn basis_order() {
        assert_eq!(basis(3, 2.0, 3.0), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0, 8.0, 12.0, 18.0, 27.0]);
        assert_eq!(monomial_count(1), 3);
        assert_eq!(monomial_count(2), 6);
    }

    #[test]
    fn extraction() {
        let p = extract_training_point(&profile(60, Some(0.9)), 10).unwrap();
        assert_eq!((p.ev_i, p.h, p.ev_star, p.step), (0.51, 0.3, 0.9, 10));
        assert!(matches!(
            extract_training_point(&profile(5, Some(0.9)), 10),
            Err(Error::ProfileTooShort { step: 10, len: 5 })
        ));
        assert!(matches!(extract_training_point(&profile(20, None), 10), Err(Error::MissingOptimum(_))));
    }

    #[test]
    fn recovers_a_plane() {
        let pts: Vec<_> = (0..20)
            .map(|i| {
                let (x, y) = ((i % 5) as f64 / 4.0, (i / 5) as f64 / 3.0);
                point(x, y, 0.1 + 0.8 * x + 0.2 * y)
            })
            .collect();
        let m = fit_polynomial(&pts, 1).unwrap();
        for (c, want) in m.coefficients.iter().zip([0.1, 0.8, 0.2]) {
            assert!((c - want).abs() < 1e-9);
        }
        assert!(m.sse < 1e-20);
    }

    #[test]
    fn exactly_determined() {
        let pts = [point(0.0, 0.0, 0.3), point(1.0, 0.0, 0.9), point(0.0, 1.0, 0.1)];
        let m = fit_polynomial(&pts, 1).unwrap();
        assert!(m.sse < 1e-12);
        assert!((m.predict(1.0, 0.0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn degenerate_designs() {
        let same = vec![point(0.5, 0.2, 0.7); 10];
        assert!(matches!(fit_polynomial(&same, 1), Err(Error::RankDeficient)));
        let few = [point(0.0, 0.0, 0.0), point(1.0, 1.0, 1.0)];
        assert!(matches!(fit_polynomial(&few, 1), Err(Error::TooFewPoints { got: 2, needed: 3 })));
        assert!(fit_polynomial(&few, 4).is_err());
    }

    #[test]
    fn published_coefficient_sets() {
        let m1 = MetaModel::new(1, vec![0.1328, 0.8415, 0.1753]).unwrap();
        assert!((predict_ev_star(&m1, 0.5, 0.2) - 0.58861).abs() < 1e-12);
        let m2 = MetaModel::new(1, vec![0.0388, 0.9252, 0.1384]).unwrap();
        assert!((predict_ev_star(&m2, 1.0, 0.0) - 0.9640).abs() < 1e-12);
        assert_eq!(m2.predict_with(1.0, 1.0, true), 1.0);
        assert!(MetaModel::new(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn extrapolation_flags_out_of_range() {
        let m = MetaModel::new(1, vec![0.1, 0.8, 0.2]).unwrap();
        let r = extrapolation_report(&m, 11);
        assert_eq!(r.grid_points, 121);
        assert!((r.max_prediction - 1.1).abs() < 1e-12);
        assert!(r.outside.iter().all(|p| p.2 > 1.0));
        assert!(!r.outside.is_empty());
    }
}
