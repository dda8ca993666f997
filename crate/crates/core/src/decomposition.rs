//! Principal component analysis.
//!
//! Components come from the eigendecomposition of the population covariance
//! of the centered input. Inputs are expected to be standardized already.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::encoding::FeatureMatrix;
use crate::error::{Error, Result};

/// Fraction of variance kept when no threshold is configured.
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    /// One orthonormal direction per row, by descending variance. The
    /// largest-magnitude entry of each row is non-negative.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    /// Set when the input has no variance at all.
    pub degenerate: bool,
}

pub fn fit_pca(x: &FeatureMatrix) -> Result<PcaModel> {
    let (n, d) = (x.n_rows(), x.n_cols());
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidInput("PCA needs at least one feature".into()));
    }

    let mut means = vec![0.0; d];
    for row in x.rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in x.rows() {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&means) {
            *c = v - m;
        }
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut components = Vec::with_capacity(d);
    let mut explained_variance = Vec::with_capacity(d);
    for &k in &order {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let lead = v.iter().enumerate().fold(
            0,
            |best, (i, x)| if x.abs() > v[best].abs() { i } else { best },
        );
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        // Round-off can leave tiny negative eigenvalues on rank-deficient input.
        explained_variance.push(eig.eigenvalues[k].max(0.0));
    }

    let total: f64 = explained_variance.iter().sum();
    let degenerate =
        total <= f64::EPSILON * d as f64 * means.iter().fold(1.0_f64, |a, m| a.max(m.abs()));
    let explained_ratio = if degenerate {
        explained_variance.iter_mut().for_each(|v| *v = 0.0);
        vec![1.0 / d as f64; d]
    } else {
        explained_variance.iter().map(|v| v / total).collect()
    };

    Ok(PcaModel {
        feature_names: x.feature_names().to_vec(),
        means,
        components,
        explained_variance,
        explained_ratio,
        degenerate,
    })
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    /// Projects `(x - means)` onto the first `k` components.
    pub fn transform(&self, x: &FeatureMatrix, k: usize) -> Result<FeatureMatrix> {
        let d = self.n_features();
        if x.n_cols() != d {
            return Err(Error::shape(format!("{d} features"), x.n_cols()));
        }
        if k == 0 || k > d {
            return Err(Error::InvalidParameter(format!(
                "component count {k} outside 1..={d}"
            )));
        }
        let mut values = Vec::with_capacity(x.n_rows() * k);
        for row in x.rows() {
            for comp in &self.components[..k] {
                values.push(
                    comp.iter()
                        .zip(row)
                        .zip(&self.means)
                        .map(|((c, v), m)| c * (v - m))
                        .sum(),
                );
            }
        }
        FeatureMatrix::new(
            values,
            x.n_rows(),
            (1..=k).map(|i| format!("PC{i}")).collect(),
        )
    }

    /// Maps scores back to feature space and re-adds the means.
    pub fn inverse(&self, scores: &FeatureMatrix) -> Result<FeatureMatrix> {
        let d = self.n_features();
        let k = scores.n_cols();
        if k > d {
            return Err(Error::shape(format!("at most {d} score columns"), k));
        }
        let mut values = Vec::with_capacity(scores.n_rows() * d);
        for row in scores.rows() {
            for j in 0..d {
                let back: f64 = row
                    .iter()
                    .zip(&self.components)
                    .map(|(s, comp)| s * comp[j])
                    .sum();
                values.push(back + self.means[j]);
            }
        }
        FeatureMatrix::new(values, scores.n_rows(), self.feature_names.clone())
    }

    /// `(k, cumulative explained ratio)` for k = 1..=d.
    pub fn variance_curve(&self) -> Vec<(usize, f64)> {
        self.explained_ratio
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .enumerate()
            .map(|(i, c)| (i + 1, c))
            .collect()
    }
}

pub fn pca_transform(model: &PcaModel, x: &FeatureMatrix, k: usize) -> Result<FeatureMatrix> {
    model.transform(x, k)
}

pub fn pca_inverse(model: &PcaModel, scores: &FeatureMatrix) -> Result<FeatureMatrix> {
    model.inverse(scores)
}

/// Smallest `k` whose cumulative ratio reaches `threshold`.
pub fn select_components(explained_ratio: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "variance threshold {threshold} outside (0, 1]"
        )));
    }
    if explained_ratio.is_empty() {
        return Err(Error::InvalidInput("no explained-variance ratios".into()));
    }
    let total: f64 = explained_ratio.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "explained ratios sum to {total}, not 1"
        )));
    }
    let mut cumulative = 0.0;
    for (i, r) in explained_ratio.iter().enumerate() {
        cumulative += r;
        // Absorb summation round-off so a threshold of 1.0 is reachable.
        if cumulative >= threshold - 1e-12 {
            return Ok(i + 1);
        }
    }
    Ok(explained_ratio.len())
}
