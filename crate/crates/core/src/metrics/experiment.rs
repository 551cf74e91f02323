use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{standardize, stratified_split_indices, Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sampler::{oversample, OversampleConfig, Strategy};
use crate::tree::{Forest, ForestSpec, ProbabilisticClassifier};

use super::{MetricsReport, ScoredPredictions, Scores, Summary};

/// A row of the results table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// No augmentation.
    Base,
    Oversample(Strategy),
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Base => "base",
            Method::Oversample(s) => s.as_str(),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "base" {
            Ok(Method::Base)
        } else {
            s.parse().map(Method::Oversample)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub repeats: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub forest: ForestSpec,
    /// Decision threshold for F1 and G-mean.
    pub threshold: f64,
    /// Shared settings; the strategy field is overridden per method.
    pub oversample: OversampleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            repeats: 10,
            test_fraction: 0.2,
            seed: 0,
            forest: ForestSpec::evaluation_default(),
            threshold: 0.5,
            oversample: OversampleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RepeatOutcome {
    Scored(Scores),
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    pub repeats: Vec<RepeatOutcome>,
    /// Over successful repeats; `None` if every repeat failed.
    pub report: Option<MetricsReport>,
}

impl MethodResult {
    pub fn failures(&self) -> usize {
        self.repeats
            .iter()
            .filter(|r| matches!(r, RepeatOutcome::Failed(_)))
            .count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub dataset: String,
    pub rows: Vec<MethodResult>,
}

/// Fits the evaluation forest on `train` and scores `test`.
pub fn evaluate(
    train: &LabeledDataset,
    test: &LabeledDataset,
    forest: ForestSpec,
    threshold: f64,
    rng: RngStream,
) -> Result<Scores> {
    let y: Vec<usize> = train.labels.iter().map(|&l| usize::from(l == Label::Minor)).collect();
    let model = Forest::fit(&train.features, &y, 2, forest, rng)?;
    let scores = model.predict_proba(&test.features)?.into_iter().map(|p| p[1]).collect();
    Scores::compute(&ScoredPredictions::new(scores, test.labels.clone())?, threshold)
}

/// Standardizes once, then for each repeat `r` splits with stream `r`,
/// augments the training part with every method and scores the test part.
/// The base row is always present and comes first.
pub fn run_experiment(
    dataset: &str,
    data: &LabeledDataset,
    methods: &[Method],
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if config.repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    data.require_both_classes()?;
    config.oversample.validate()?;
    let (data, _) = standardize(data)?;
    let mut order = vec![Method::Base];
    for &m in methods {
        if !order.contains(&m) {
            order.push(m);
        }
    }

    let per_repeat: Vec<Vec<RepeatOutcome>> = (0..config.repeats)
        .into_par_iter()
        .map(|r| -> Result<Vec<RepeatOutcome>> {
            let stream = RngStream::new(config.seed, r as u64);
            let (tr, te) = stratified_split_indices(&data.labels, config.test_fraction, stream.named("split"))?;
            let (train, test) = (data.subset(&tr), data.subset(&te));
            Ok(order
                .iter()
                .map(|&m| {
                    let augmented = match m {
                        Method::Base => Ok(train.clone()),
                        Method::Oversample(s) => {
                            oversample(&train, &config.oversample.with_strategy(s), stream.named("augment"))
                                .map(|a| a.data)
                        }
                    };
                    match augmented
                        .and_then(|t| evaluate(&t, &test, config.forest, config.threshold, stream.named("forest")))
                    {
                        Ok(s) => RepeatOutcome::Scored(s),
                        Err(e) => RepeatOutcome::Failed(e.to_string()),
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let rows = order
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let repeats: Vec<RepeatOutcome> = per_repeat.iter().map(|r| r[k].clone()).collect();
            let ok: Vec<Scores> = repeats
                .iter()
                .filter_map(|r| match r {
                    RepeatOutcome::Scored(s) => Some(*s),
                    RepeatOutcome::Failed(_) => None,
                })
                .collect();
            MethodResult {
                method,
                report: MetricsReport::from_repeats(ok),
                repeats,
            }
        })
        .collect();
    Ok(ExperimentReport {
        dataset: dataset.to_string(),
        rows,
    })
}

impl ExperimentReport {
    /// Competition ranks (1 = best) of each row's mean for metric `k`;
    /// rows without a summary get no rank.
    pub fn ranks(&self, k: usize) -> Vec<Option<usize>> {
        let means: Vec<Option<f64>> = self
            .rows
            .iter()
            .map(|r| r.report.as_ref().map(|rep| rep.summary[k].mean))
            .collect();
        means
            .iter()
            .map(|m| m.map(|v| 1 + means.iter().flatten().filter(|&&o| o > v).count()))
            .collect()
    }

    fn summary(&self, row: usize, k: usize) -> Option<Summary> {
        self.rows[row].report.as_ref().map(|r| r.summary[k])
    }

    /// Comma-separated table, one line per method.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("dataset,method");
        for name in Scores::NAMES {
            let _ = write!(out, ",{name}_mean,{name}_stderr,{name}_rank");
        }
        out.push_str(",failed_repeats\n");
        let ranks: Vec<Vec<Option<usize>>> = (0..4).map(|k| self.ranks(k)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{},{}", self.dataset, row.method.label());
            for k in 0..4 {
                match self.summary(i, k) {
                    Some(s) => {
                        let _ = write!(out, ",{:.6},{:.6},{}", s.mean, s.stderr, ranks[k][i].unwrap_or(0));
                    }
                    None => out.push_str(",failed,failed,"),
                }
            }
            let _ = writeln!(out, ",{}", row.failures());
        }
        out
    }

    /// Aligned plain-text table with `mean±stderr (rank)` cells.
    pub fn to_aligned(&self) -> String {
        let ranks: Vec<Vec<Option<usize>>> = (0..4).map(|k| self.ranks(k)).collect();
        let mut cells: Vec<Vec<String>> = vec![["method", "AUPRC", "AUC", "F1", "G-mean", "failed"]
            .iter()
            .map(|s| s.to_string())
            .collect()];
        for (i, row) in self.rows.iter().enumerate() {
            let mut line = vec![row.method.label().to_string()];
            for k in 0..4 {
                line.push(match self.summary(i, k) {
                    Some(s) => format!("{:.3}±{:.3} ({})", s.mean, s.stderr, ranks[k][i].unwrap_or(0)),
                    None => "failed".into(),
                });
            }
            line.push(row.failures().to_string());
            cells.push(line);
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|c| cells.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = format!("# {}\n", self.dataset);
        for line in &cells {
            let padded: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
                .collect();
            out.push_str(padded.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}
