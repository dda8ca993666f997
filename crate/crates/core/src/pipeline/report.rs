//! Run artifacts: CSV tables, JSON documents and the manifest listing them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::ProfileReport;
use crate::decomposition::PcaModel;
use crate::encoding::{BinSpec, LabelVector};
use crate::error::{Error, Result};
use crate::evaluation::{metrics_csv_row, ConfusionMatrix, MetricsReport, METRICS_CSV_HEADER};
use crate::learners::FeatureImportance;
use crate::tuning::SearchOutcome;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedArtifact {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<String>,
    pub skipped: Vec<SkippedArtifact>,
}

/// Writes artifacts into one directory and remembers what it wrote, so a
/// failed run can remove its partial output.
#[derive(Debug)]
pub struct Emitter {
    dir: PathBuf,
    created_dir: bool,
    manifest: Manifest,
}

impl Emitter {
    pub fn create(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            manifest: Manifest::default(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) {
        if !self.manifest.files.iter().any(|f| f == name) {
            self.manifest.files.push(name.to_string());
        }
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.path(name);
        self.record(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, &text)
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))?;
        let text = String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))?;
        self.text(name, &text)
    }

    /// Registers an artifact written by another component.
    pub fn adopt(&mut self, name: &str) {
        self.record(name);
    }

    pub fn skip(&mut self, name: &str, reason: impl Into<String>) {
        self.manifest.skipped.push(SkippedArtifact {
            name: name.to_string(),
            reason: reason.into(),
        });
    }

    pub fn finish(mut self) -> Result<Manifest> {
        self.record(MANIFEST_FILE);
        self.manifest.files.sort();
        let manifest = self.manifest.clone();
        self.json(MANIFEST_FILE, &manifest)?;
        Ok(manifest)
    }

    /// Removes everything written so far, and the directory if this emitter made it.
    pub fn discard(self) {
        for name in &self.manifest.files {
            let _ = std::fs::remove_file(self.dir.join(name));
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

pub fn emit_profile(em: &mut Emitter, profile: &ProfileReport) -> Result<()> {
    em.json("profile.json", profile)?;
    em.csv(
        "correlation.csv",
        &["a", "b", "r", "degenerate"],
        profile
            .correlations
            .entries()
            .into_iter()
            .map(|e| vec![e.a, e.b, num(e.r), e.degenerate.to_string()]),
    )?;
    em.csv(
        "los_histogram.csv",
        &["los", "count"],
        profile
            .los_histogram
            .iter()
            .map(|(d, c)| vec![d.to_string(), c.to_string()]),
    )?;
    em.csv(
        "groupby.csv",
        &["column", "category", "mean_los", "count"],
        profile.groupby.iter().flat_map(|t| {
            t.rows.iter().map(|r| {
                vec![
                    t.column.clone(),
                    r.category.clone(),
                    num(r.mean_los),
                    r.count.to_string(),
                ]
            })
        }),
    )?;
    em.csv(
        "cost_vs_los.csv",
        &["column", "los", "count", "mean"],
        profile.currency_by_los.iter().flat_map(|t| {
            t.rows.iter().map(|r| {
                vec![
                    t.column.clone(),
                    r.los.to_string(),
                    r.count.to_string(),
                    num(r.mean),
                ]
            })
        }),
    )?;
    Ok(())
}

/// Label counts per bin over all encoded rows, with the train/test breakdown.
pub fn bin_count_rows(
    bins: &BinSpec,
    all: &LabelVector,
    train: &LabelVector,
    test: &LabelVector,
) -> Vec<Vec<String>> {
    let (a, tr, te) = (
        all.class_counts(),
        train.class_counts(),
        test.class_counts(),
    );
    bins.bins()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            vec![
                i.to_string(),
                b.label.clone(),
                b.lo.to_string(),
                b.hi.to_string(),
                a.get(i).copied().unwrap_or(0).to_string(),
                tr.get(i).copied().unwrap_or(0).to_string(),
                te.get(i).copied().unwrap_or(0).to_string(),
            ]
        })
        .collect()
}

pub const BIN_COUNTS_HEADER: [&str; 7] = [
    "bin",
    "label",
    "lo",
    "hi",
    "count",
    "train_count",
    "test_count",
];

pub fn emit_pca(em: &mut Emitter, pca: &PcaModel, kept: usize) -> Result<()> {
    em.csv(
        "pca_variance.csv",
        &["component", "explained_ratio", "cumulative", "kept"],
        pca.variance_curve()
            .into_iter()
            .zip(&pca.explained_ratio)
            .map(|((k, c), r)| vec![k.to_string(), num(*r), num(c), (k <= kept).to_string()]),
    )?;
    Ok(())
}

pub fn emit_importance(em: &mut Emitter, importance: &FeatureImportance) -> Result<()> {
    em.csv(
        "feature_importance.csv",
        &["rank", "feature", "importance"],
        importance
            .scores
            .iter()
            .enumerate()
            .map(|(i, s)| vec![(i + 1).to_string(), s.name.clone(), num(s.score)]),
    )?;
    Ok(())
}

pub fn emit_metrics(
    em: &mut Emitter,
    model_name: &str,
    labels: &[String],
    cm: &ConfusionMatrix,
    report: &MetricsReport,
) -> Result<()> {
    em.json("metrics.json", report)?;
    em.csv(
        "metrics.csv",
        &METRICS_CSV_HEADER,
        [metrics_csv_row(model_name, report)],
    )?;
    let mut header = vec!["actual"];
    header.extend(labels.iter().map(String::as_str));
    em.csv(
        "confusion_matrix.csv",
        &header,
        labels.iter().zip(&cm.counts).map(|(label, row)| {
            std::iter::once(label.clone())
                .chain(row.iter().map(u64::to_string))
                .collect::<Vec<_>>()
        }),
    )?;
    em.csv(
        "per_class_metrics.csv",
        &["bin", "precision", "recall", "f1", "support", "degenerate"],
        labels.iter().zip(&report.per_class).map(|(label, c)| {
            vec![
                label.clone(),
                num(c.precision),
                num(c.recall),
                num(c.f1),
                c.support.to_string(),
                c.degenerate.to_string(),
            ]
        }),
    )?;
    Ok(())
}

pub fn emit_search(em: &mut Emitter, outcome: &SearchOutcome) -> Result<()> {
    em.json("search.json", outcome)?;
    em.csv(
        "search_trials.csv",
        &["trial", "seed", "params", "objective", "error"],
        outcome.trials.iter().map(|t| {
            vec![
                t.index.to_string(),
                t.seed.to_string(),
                serde_json::to_string(&t.sampled).unwrap_or_default(),
                t.objective.map(num).unwrap_or_default(),
                t.error.clone().unwrap_or_default(),
            ]
        }),
    )?;
    Ok(())
}

/// Combines the metrics of several runs into one table, one row per run.
pub fn metrics_table(rows: &[(String, MetricsReport)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_CSV_HEADER)?;
    for (name, report) in rows {
        w.write_record(metrics_csv_row(name, report))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discard_removes_partial_output() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("run");
        let mut em = Emitter::create(&dir).unwrap();
        em.csv("a.csv", &["x"], [["1"]]).unwrap();
        em.json("b.json", &vec![1, 2]).unwrap();
        assert!(dir.join("a.csv").exists());
        em.discard();
        assert!(!dir.exists());
    }

    #[test]
    fn discard_keeps_foreign_files() {
        let root = tempfile::tempdir().unwrap();
        std::fs::write(root.path().join("keep.txt"), "x").unwrap();
        let mut em = Emitter::create(root.path()).unwrap();
        em.text("mine.txt", "y").unwrap();
        em.discard();
        assert!(root.path().join("keep.txt").exists());
        assert!(!root.path().join("mine.txt").exists());
    }

    #[test]
    fn manifest_lists_files_and_skips() {
        let root = tempfile::tempdir().unwrap();
        let mut em = Emitter::create(root.path()).unwrap();
        em.text("z.txt", "").unwrap();
        em.text("a.txt", "").unwrap();
        em.skip("pca_variance.csv", "pca disabled");
        let m = em.finish().unwrap();
        assert_eq!(m.files, vec!["a.txt", "manifest.json", "z.txt"]);
        assert_eq!(m.skipped.len(), 1);
        let on_disk: Manifest = serde_json::from_str(
            &std::fs::read_to_string(root.path().join(MANIFEST_FILE)).unwrap(),
        )
        .unwrap();
        assert_eq!(on_disk, m);
    }
}
