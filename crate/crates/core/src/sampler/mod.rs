//! Oversampling strategies: the SMOTE family, latent-filter baselines and the
//! full difficulty-aware pipeline.

mod filter;
mod pipeline;
mod smote;

pub use filter::{
    ddhs_filter, dfbs_filter, group_adaptive_filter, FilterConfig, FilterEntry, FilterReport, DDHS_RETAIN,
    POOLED_RETAIN,
};
pub use pipeline::{smote_cls_pipeline, Ablation, CvaeSettings, LatentExport, SmoteClsRun};
pub use smote::{
    borderline_select, effective_k, enn_retain, kmsmote, proportional_allocation, smote, smote_from_seeds,
    smote_interpolate, Interpolation, KmSmoteDraws, SmoteDraws,
};

use std::fmt;
use std::str::FromStr;

use crate::data::{Label, LabeledDataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    Smote,
    BorderlineSmote,
    SmoteEnn,
    KmSmote,
    SmoteCls(Ablation),
    DfbsFilterSmote,
    DdhsFilterSmote,
    LatentSmoteDecode,
    CvaeGenerate,
}

impl Strategy {
    pub const ALL: [Strategy; 12] = [
        Strategy::Smote,
        Strategy::BorderlineSmote,
        Strategy::SmoteEnn,
        Strategy::KmSmote,
        Strategy::SmoteCls(Ablation::Full),
        Strategy::SmoteCls(Ablation::WithoutDisentangle),
        Strategy::SmoteCls(Ablation::WithoutSegment),
        Strategy::SmoteCls(Ablation::WithoutAdaptive),
        Strategy::DfbsFilterSmote,
        Strategy::DdhsFilterSmote,
        Strategy::LatentSmoteDecode,
        Strategy::CvaeGenerate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Smote => "smote",
            Strategy::BorderlineSmote => "bsmote",
            Strategy::SmoteEnn => "smote_enn",
            Strategy::KmSmote => "kmsmote",
            Strategy::SmoteCls(Ablation::Full) => "smote_cls",
            Strategy::SmoteCls(Ablation::WithoutDisentangle) => "smote_cls_wo_dis",
            Strategy::SmoteCls(Ablation::WithoutSegment) => "smote_cls_wo_seg",
            Strategy::SmoteCls(Ablation::WithoutAdaptive) => "smote_cls_wo_af",
            Strategy::DfbsFilterSmote => "dfbs_filter_smote",
            Strategy::DdhsFilterSmote => "ddhs_filter_smote",
            Strategy::LatentSmoteDecode => "latent_smote_decode",
            Strategy::CvaeGenerate => "cvae_generate",
        }
    }

    /// Whether the strategy guarantees the balance contract.
    pub fn balances(self) -> bool {
        self != Strategy::SmoteEnn
    }

    pub fn valid_tokens() -> String {
        Strategy::ALL.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy `{s}`; valid: {}", Strategy::valid_tokens())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OversampleConfig {
    pub strategy: Strategy,
    /// Target minor-to-major ratio.
    pub rho: f64,
    pub k_smote: usize,
    /// Neighbors for relabeling and the borderline rule.
    pub k_knn: usize,
    pub k_enn: usize,
    pub kmeans_clusters: usize,
    pub kmeans_threshold: f64,
    pub ddhs_retain: f64,
    pub filter: FilterConfig,
    pub cvae: CvaeSettings,
}

impl Default for OversampleConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::SmoteCls(Ablation::Full),
            rho: 1.0,
            k_smote: 5,
            k_knn: 5,
            k_enn: 3,
            kmeans_clusters: 8,
            kmeans_threshold: 0.5,
            ddhs_retain: DDHS_RETAIN,
            filter: FilterConfig::default(),
            cvae: CvaeSettings::default(),
        }
    }
}

impl OversampleConfig {
    pub fn with_strategy(self, strategy: Strategy) -> Self {
        Self { strategy, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if self.k_smote == 0 || self.k_knn == 0 || self.k_enn == 0 || self.kmeans_clusters == 0 {
            return Err(Error::invalid("neighbor and cluster counts must be >= 1"));
        }
        self.filter.validate()?;
        self.cvae.train.validate()
    }
}

/// Number of synthetic minors needed so that minors reach `ceil(rho * majors)`.
pub fn synthetic_target(n_major: usize, n_minor: usize, rho: f64) -> usize {
    ((rho * n_major as f64).ceil() as usize).saturating_sub(n_minor)
}

/// Origin of an output row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Provenance {
    /// Row of the input dataset.
    Original(usize),
    /// Data-space interpolation; `seed` and `neighbor` are input rows and
    /// `pool` indexes [`Augmented::pools`].
    Interpolated(Interpolation),
    /// Produced by the decoder.
    Decoded,
}

impl Provenance {
    pub fn is_synthetic(self) -> bool {
        !matches!(self, Provenance::Original(_))
    }
}

#[derive(Clone, Debug)]
pub struct Augmented {
    /// Original rows (possibly edited) followed by synthetic minors.
    pub data: LabeledDataset,
    pub provenance: Vec<Provenance>,
    /// Candidate pools (input row ids) that interpolations drew from.
    pub pools: Vec<Vec<usize>>,
    pub filter: Option<FilterReport>,
    pub latent: Option<LatentExport>,
}

impl Augmented {
    pub fn synthetic_count(&self) -> usize {
        self.provenance.iter().filter(|p| p.is_synthetic()).count()
    }
}

/// Appends interpolated rows. `pool_rows[p]` maps pool-local indices of pool
/// `p` back to input rows.
fn assemble(
    data: &LabeledDataset,
    draws: SmoteDraws,
    pools: Vec<Vec<usize>>,
    local: bool,
    filter: Option<FilterReport>,
    latent: Option<LatentExport>,
) -> Result<Augmented> {
    let mut provenance: Vec<Provenance> = (0..data.len()).map(Provenance::Original).collect();
    for s in &draws.sources {
        let (seed, neighbor) = if local {
            (pools[s.pool][s.seed], pools[s.pool][s.neighbor])
        } else {
            (s.seed, s.neighbor)
        };
        provenance.push(Provenance::Interpolated(Interpolation { seed, neighbor, ..*s }));
    }
    Ok(Augmented {
        data: data.with_minor_rows(&draws.points)?,
        provenance,
        pools,
        filter,
        latent,
    })
}

pub(crate) fn decoded(
    data: &LabeledDataset,
    rows: &Matrix,
    filter: Option<FilterReport>,
    latent: Option<LatentExport>,
) -> Result<Augmented> {
    let mut provenance: Vec<Provenance> = (0..data.len()).map(Provenance::Original).collect();
    provenance.extend(std::iter::repeat_n(Provenance::Decoded, rows.rows()));
    Ok(Augmented {
        data: data.with_minor_rows(rows)?,
        provenance,
        pools: vec![],
        filter,
        latent,
    })
}

/// SMOTE over a pool of input rows.
pub(crate) fn smote_on_rows(
    data: &LabeledDataset,
    pool: Vec<usize>,
    target: usize,
    k_s: usize,
    rng: RngStream,
    filter: Option<FilterReport>,
    latent: Option<LatentExport>,
) -> Result<Augmented> {
    let draws = smote(&data.features.select_rows(&pool), target, k_s, rng)?;
    assemble(data, draws, vec![pool], true, filter, latent)
}

/// Runs the configured strategy on `data` (assumed standardized).
pub fn oversample(data: &LabeledDataset, config: &OversampleConfig, rng: RngStream) -> Result<Augmented> {
    config.validate()?;
    data.require_both_classes()?;
    let minors = data.indices_of(Label::Minor);
    let target = synthetic_target(data.count(Label::Major), minors.len(), config.rho);
    let rng = rng.named(config.strategy.as_str());
    match config.strategy {
        Strategy::Smote => smote_on_rows(data, minors, target, config.k_smote, rng, None, None),
        Strategy::BorderlineSmote => {
            let danger = borderline_select(data, config.k_knn)?;
            if danger.is_empty() {
                return smote_on_rows(data, minors, target, config.k_smote, rng, None, None);
            }
            let pool = data.features.select_rows(&minors);
            let seeds: Vec<usize> = danger
                .iter()
                .map(|d| minors.binary_search(d).expect("danger rows are minors"))
                .collect();
            let draws = smote_from_seeds(&pool, &seeds, target, config.k_smote, rng)?;
            assemble(data, draws, vec![minors], true, None, None)
        }
        Strategy::SmoteEnn => {
            let full = smote_on_rows(data, minors, target, config.k_smote, rng, None, None)?;
            let keep = enn_retain(&full.data, config.k_enn)?;
            Ok(Augmented {
                data: full.data.subset(&keep),
                provenance: keep.iter().map(|&i| full.provenance[i]).collect(),
                pools: full.pools,
                filter: None,
                latent: None,
            })
        }
        Strategy::KmSmote => {
            let out = kmsmote(
                data,
                config.kmeans_clusters,
                config.kmeans_threshold,
                target,
                config.k_smote,
                rng,
            )?;
            let k = out.assignment.iter().max().map_or(0, |m| m + 1);
            let mut pools = vec![vec![]; k];
            for &c in &out.eligible {
                pools[c] = minors.iter().copied().filter(|&i| out.assignment[i] == c).collect();
            }
            assemble(data, out.draws, pools, false, None, None)
        }
        Strategy::SmoteCls(ablation) => Ok(smote_cls_pipeline(data, config, ablation, rng)?.augmented),
        Strategy::DfbsFilterSmote
        | Strategy::DdhsFilterSmote
        | Strategy::LatentSmoteDecode
        | Strategy::CvaeGenerate => pipeline::latent_baseline(data, config, target, rng),
    }
}
