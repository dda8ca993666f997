//! One-vs-rest L2-regularized logistic regression fitted by damped Newton steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::encoding::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};

const MARGIN_CLAMP: f64 = 500.0;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    #[default]
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// Inverse regularization strength; the penalty is `||w||^2 / (2C)`.
    #[serde(rename = "C", alias = "c")]
    pub c: f64,
    #[serde(default)]
    pub penalty: Penalty,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            penalty: Penalty::L2,
            max_iter: 100,
            tol: 1e-4,
        }
    }
}

impl LogisticParams {
    pub fn paper() -> Self {
        Self {
            c: 0.1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// K rows of d weights.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

/// Objective value after each accepted iterate, one history per class.
/// Entry 0 is the objective at the zero initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticTrace {
    pub objective: Vec<Vec<f64>>,
    pub final_gradient_norm: Vec<f64>,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Binary<'a> {
    x: &'a FeatureMatrix,
    signs: Vec<f64>,
    inv_c: f64,
}

impl Binary<'_> {
    fn margin(&self, row: &[f64], w: &DVector<f64>) -> f64 {
        let d = row.len();
        let m: f64 = row.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>() + w[d];
        m.clamp(-MARGIN_CLAMP, MARGIN_CLAMP)
    }

    fn penalty(&self, w: &DVector<f64>) -> f64 {
        let d = w.len() - 1;
        0.5 * self.inv_c * w.rows(0, d).norm_squared()
    }

    fn objective(&self, w: &DVector<f64>) -> f64 {
        let loss: f64 = self
            .x
            .rows()
            .zip(&self.signs)
            .map(|(row, s)| softplus(-s * self.margin(row, w)))
            .sum();
        loss + self.penalty(w)
    }

    fn gradient_hessian(&self, w: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let d = w.len() - 1;
        let mut g = DVector::zeros(d + 1);
        let mut h = DMatrix::zeros(d + 1, d + 1);
        for (row, s) in self.x.rows().zip(&self.signs) {
            let m = self.margin(row, w);
            let coef = -s * sigmoid(-s * m);
            let p = sigmoid(m);
            let curv = p * (1.0 - p);
            for a in 0..=d {
                let xa = if a < d { row[a] } else { 1.0 };
                g[a] += coef * xa;
                if curv > 0.0 {
                    for b in a..=d {
                        let xb = if b < d { row[b] } else { 1.0 };
                        h[(a, b)] += curv * xa * xb;
                    }
                }
            }
        }
        for a in 0..=d {
            if a < d {
                g[a] += self.inv_c * w[a];
                h[(a, a)] += self.inv_c;
            }
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        (g, h)
    }
}

/// Minimizes one binary problem. Returns the solution, the objective
/// history and the final gradient norm.
fn fit_binary(problem: &Binary<'_>, params: &LogisticParams) -> (DVector<f64>, Vec<f64>, f64) {
    let dim = problem.x.n_cols() + 1;
    let mut w = DVector::zeros(dim);
    let mut f = problem.objective(&w);
    let mut history = vec![f];
    let (mut g, mut h) = problem.gradient_hessian(&w);
    for _ in 0..params.max_iter {
        if g.norm() <= params.tol {
            break;
        }
        // A tiny ridge keeps the intercept block invertible on separable data.
        for a in 0..dim {
            h[(a, a)] += 1e-10;
        }
        let direction = match h.clone().cholesky() {
            Some(chol) => -chol.solve(&g),
            None => -g.clone(),
        };
        let slope = g.dot(&direction);
        let direction = if slope < 0.0 { direction } else { -g.clone() };
        let slope = g.dot(&direction);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &w + step * &direction;
            let fc = problem.objective(&candidate);
            if fc <= f + ARMIJO_C * step * slope {
                accepted = Some((candidate, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((next, f_next)) = accepted else {
            break;
        };
        let decrease = f - f_next;
        w = next;
        f = f_next;
        history.push(f);
        (g, h) = problem.gradient_hessian(&w);
        if decrease < params.tol && g.norm() <= 10.0 * params.tol {
            break;
        }
    }
    let gnorm = g.norm();
    (w, history, gnorm)
}

fn check_input(x: &FeatureMatrix, y: &LabelVector) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::shape(format!("{} labels", x.n_rows()), y.len()));
    }
    if x.n_rows() < y.n_classes() {
        return Err(Error::InvalidInput(format!(
            "logistic fit needs at least {} rows, got {}",
            y.n_classes(),
            x.n_rows()
        )));
    }
    if x.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    let present = y.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::Degenerate("degenerate one-class fit".into()));
    }
    Ok(())
}

pub fn fit_logistic(
    x: &FeatureMatrix,
    y: &LabelVector,
    params: &LogisticParams,
) -> Result<LogisticModel> {
    fit_logistic_traced(x, y, params).map(|(m, _)| m)
}

pub fn fit_logistic_traced(
    x: &FeatureMatrix,
    y: &LabelVector,
    params: &LogisticParams,
) -> Result<(LogisticModel, LogisticTrace)> {
    params.validate()?;
    check_input(x, y)?;
    let d = x.n_cols();
    let mut weights = Vec::with_capacity(y.n_classes());
    let mut intercepts = Vec::with_capacity(y.n_classes());
    let mut trace = LogisticTrace {
        objective: Vec::new(),
        final_gradient_norm: Vec::new(),
    };
    for k in 0..y.n_classes() {
        let problem = Binary {
            x,
            signs: y
                .labels()
                .iter()
                .map(|&l| if l == k { 1.0 } else { -1.0 })
                .collect(),
            inv_c: 1.0 / params.c,
        };
        let (w, history, gnorm) = fit_binary(&problem, params);
        weights.push(w.rows(0, d).iter().copied().collect());
        intercepts.push(w[d]);
        trace.objective.push(history);
        trace.final_gradient_norm.push(gnorm);
    }
    Ok((
        LogisticModel {
            weights,
            intercepts,
        },
        trace,
    ))
}

impl LogisticModel {
    pub fn n_features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.intercepts.len()
    }

    /// Raw per-class margins `w_k . x + b_k`.
    pub fn decision_function(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features() {
            return Err(Error::shape(
                format!("{} features", self.n_features()),
                row.len(),
            ));
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect())
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let scores: Vec<f64> = self
            .decision_function(row)?
            .into_iter()
            .map(|m| sigmoid(m.clamp(-MARGIN_CLAMP, MARGIN_CLAMP)))
            .collect();
        let total: f64 = scores.iter().sum();
        Ok(scores.into_iter().map(|s| s / total).collect())
    }
}

pub fn logistic_predict_proba(model: &LogisticModel, row: &[f64]) -> Result<Vec<f64>> {
    model.predict_proba(row)
}
