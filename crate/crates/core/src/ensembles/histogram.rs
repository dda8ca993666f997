//! Feature binning and gradient histograms for the boosting machine.

use serde::{Deserialize, Serialize};

use super::efb::bundle_masks;
use crate::encoding::FeatureMatrix;
use crate::error::{Error, Result};

/// Largest merged-bin count a bundle may reach.
const MAX_BUNDLE_BINS: usize = u16::MAX as usize;

fn midpoint(a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    if m >= b {
        a
    } else {
        m
    }
}

/// Per-feature upper bin edges. A value `x` falls in bin
/// `#{t in thresholds : t < x}`, so `bin <= b` exactly when `x <= thresholds[b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub thresholds: Vec<Vec<f64>>,
}

impl BinMapper {
    /// Exact edges between consecutive distinct values when a feature has at
    /// most `n_bins` of them, otherwise quantile edges.
    pub fn fit(x: &FeatureMatrix, n_bins: usize) -> Result<Self> {
        if !(2..=MAX_BUNDLE_BINS).contains(&n_bins) {
            return Err(Error::InvalidParameter(format!(
                "n_bins must lie in 2..={MAX_BUNDLE_BINS}, got {n_bins}"
            )));
        }
        let thresholds = (0..x.n_cols())
            .map(|f| feature_edges(x.column(f), n_bins))
            .collect();
        Ok(Self { thresholds })
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.thresholds[feature].len() + 1
    }

    pub fn bin(&self, feature: usize, value: f64) -> usize {
        self.thresholds[feature].partition_point(|t| *t < value)
    }
}

fn feature_edges(mut values: Vec<f64>, n_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct = values.clone();
    distinct.dedup();
    if distinct.len() <= n_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = values.len();
    let mut edges: Vec<f64> = Vec::with_capacity(n_bins - 1);
    for j in 1..n_bins {
        let rank = ((j * n) as f64 / n_bins as f64).ceil() as usize;
        let v = values[rank.saturating_sub(1).min(n - 1)];
        let above = distinct.partition_point(|d| *d <= v);
        if above < distinct.len() {
            let edge = midpoint(v, distinct[above]);
            if edges.last().is_none_or(|&last| edge > last) {
                edges.push(edge);
            }
        }
    }
    edges
}

/// A histogram column: either one feature, or several features merged by
/// exclusive bundling around their most frequent ("default") bins.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Group {
    Single(usize),
    Bundle {
        features: Vec<usize>,
        /// Default bin of each member.
        defaults: Vec<usize>,
        /// Merged code of member `j`'s first non-default bin is `offsets[j] + 1`.
        offsets: Vec<usize>,
    },
}

/// Column-major binned training data.
#[derive(Debug, Clone)]
pub(crate) struct BinnedData {
    /// Bin of every feature and row.
    pub bins: Vec<Vec<u16>>,
    pub n_bins: Vec<usize>,
    pub groups: Vec<Group>,
    /// Histogram code per group and row.
    pub codes: Vec<Vec<u16>>,
    /// Start of each group's slice in a flat histogram.
    pub offsets: Vec<usize>,
    pub total_bins: usize,
    /// Group and slot of each feature.
    pub feature_slot: Vec<(usize, usize)>,
}

impl BinnedData {
    pub fn new(x: &FeatureMatrix, mapper: &BinMapper, bundle: Option<usize>) -> Self {
        let d = x.n_cols();
        let n = x.n_rows();
        let bins: Vec<Vec<u16>> = (0..d)
            .map(|f| {
                x.column(f)
                    .into_iter()
                    .map(|v| mapper.bin(f, v) as u16)
                    .collect()
            })
            .collect();
        let n_bins: Vec<usize> = (0..d).map(|f| mapper.n_bins(f)).collect();

        let groups: Vec<Group> = match bundle {
            None => (0..d).map(Group::Single).collect(),
            Some(max_conflict) => {
                let defaults: Vec<usize> = bins
                    .iter()
                    .zip(&n_bins)
                    .map(|(col, &nb)| {
                        let mut counts = vec![0usize; nb];
                        col.iter().for_each(|&b| counts[b as usize] += 1);
                        (0..nb).fold(0, |best, b| if counts[b] > counts[best] { b } else { best })
                    })
                    .collect();
                let masks: Vec<Vec<bool>> = bins
                    .iter()
                    .zip(&defaults)
                    .map(|(col, &def)| col.iter().map(|&b| b as usize != def).collect())
                    .collect();
                let members = bundle_masks(&masks, max_conflict, |members, f| {
                    let used: usize = members.iter().map(|&m| n_bins[m] - 1).sum();
                    1 + used + n_bins[f] - 1 <= MAX_BUNDLE_BINS
                });
                members
                    .into_iter()
                    .map(|features| {
                        if features.len() == 1 {
                            return Group::Single(features[0]);
                        }
                        let mut offsets = Vec::with_capacity(features.len());
                        let mut next = 0;
                        for &f in &features {
                            offsets.push(next);
                            next += n_bins[f] - 1;
                        }
                        Group::Bundle {
                            defaults: features.iter().map(|&f| defaults[f]).collect(),
                            features,
                            offsets,
                        }
                    })
                    .collect()
            }
        };

        let mut codes = Vec::with_capacity(groups.len());
        let mut offsets = Vec::with_capacity(groups.len());
        let mut feature_slot = vec![(0, 0); d];
        let mut total_bins = 0;
        for (g, group) in groups.iter().enumerate() {
            offsets.push(total_bins);
            match group {
                Group::Single(f) => {
                    feature_slot[*f] = (g, 0);
                    codes.push(bins[*f].clone());
                    total_bins += n_bins[*f];
                }
                Group::Bundle {
                    features,
                    defaults,
                    offsets: member_offsets,
                } => {
                    for (j, &f) in features.iter().enumerate() {
                        feature_slot[f] = (g, j);
                    }
                    let col = (0..n)
                        .map(|r| {
                            features
                                .iter()
                                .zip(defaults)
                                .zip(member_offsets)
                                .find_map(|((&f, &def), &off)| {
                                    let b = bins[f][r] as usize;
                                    (b != def)
                                        .then(|| (off + 1 + if b < def { b } else { b - 1 }) as u16)
                                })
                                .unwrap_or(0)
                        })
                        .collect();
                    codes.push(col);
                    total_bins += 1 + features.iter().map(|&f| n_bins[f] - 1).sum::<usize>();
                }
            }
        }
        Self {
            bins,
            n_bins,
            groups,
            codes,
            offsets,
            total_bins,
            feature_slot,
        }
    }

    pub fn build(&self, rows: &[usize], grad: &[f64], hess: &[f64]) -> Histogram {
        let mut stats = vec![BinStats::default(); self.total_bins];
        for (col, &start) in self.codes.iter().zip(&self.offsets) {
            let slice = &mut stats[start..];
            for &r in rows {
                let s = &mut slice[col[r] as usize];
                s.g += grad[r];
                s.h += hess[r];
                s.count += 1;
            }
        }
        Histogram { stats }
    }

    /// Per-bin statistics of one feature, rebuilding the default bin of
    /// bundled features from the node totals.
    pub fn feature_stats(
        &self,
        hist: &Histogram,
        feature: usize,
        total: BinStats,
    ) -> Vec<BinStats> {
        let (g, slot) = self.feature_slot[feature];
        let start = self.offsets[g];
        let nb = self.n_bins[feature];
        match &self.groups[g] {
            Group::Single(_) => hist.stats[start..start + nb].to_vec(),
            Group::Bundle {
                defaults, offsets, ..
            } => {
                let def = defaults[slot];
                let base = start + 1 + offsets[slot];
                let mut out = vec![BinStats::default(); nb];
                let mut rest = total;
                for (b, o) in out.iter_mut().enumerate() {
                    if b == def {
                        continue;
                    }
                    *o = hist.stats[base + if b < def { b } else { b - 1 }];
                    rest = rest.minus(o);
                }
                out[def] = rest;
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct BinStats {
    pub g: f64,
    pub h: f64,
    pub count: usize,
}

impl BinStats {
    pub fn minus(self, other: &BinStats) -> BinStats {
        BinStats {
            g: self.g - other.g,
            h: self.h - other.h,
            count: self.count - other.count,
        }
    }

    pub fn plus(self, other: &BinStats) -> BinStats {
        BinStats {
            g: self.g + other.g,
            h: self.h + other.h,
            count: self.count + other.count,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Histogram {
    pub stats: Vec<BinStats>,
}

impl Histogram {
    /// Sibling histogram: `self` (the parent) minus `child`.
    pub fn subtract(mut self, child: &Histogram) -> Histogram {
        for (p, c) in self.stats.iter_mut().zip(&child.stats) {
            *p = p.minus(c);
        }
        self
    }
}
