use crate::cvae::{fit_cvae, ClassifierKind, CvaeModel, CvaeSpec, PriorLayout, PriorPreset, TrainConfig, TrainReport};
use crate::data::{Label, LabeledDataset, Matrix};
use crate::error::{Error, Result};
use crate::neighbors::{relabel, PseudoLabel, PseudoLabeledDataset};
use crate::rng::RngStream;

use super::filter::{ddhs_filter, dfbs_filter, group_adaptive_filter, FilterReport};
use super::{decoded, smote, smote_on_rows, synthetic_target, Augmented, OversampleConfig, Strategy};

/// Model settings shared by every latent strategy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvaeSettings {
    pub preset: PriorPreset,
    pub classifier: ClassifierKind,
    pub latent_dim: Option<usize>,
    pub train: TrainConfig,
}

impl Default for CvaeSettings {
    fn default() -> Self {
        Self {
            preset: PriorPreset::Default,
            classifier: ClassifierKind::Forest,
            latent_dim: None,
            train: TrainConfig::default(),
        }
    }
}

impl CvaeSettings {
    fn spec(&self, layout: PriorLayout) -> CvaeSpec {
        CvaeSpec {
            layout,
            classifier: self.classifier,
            latent_dim: self.latent_dim,
            train: self.train,
        }
    }
}

/// Which parts of the pipeline are switched off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Ablation {
    #[default]
    Full,
    /// Plain class-conditional prior (both components standard normal) and a
    /// pooled filter.
    WithoutDisentangle,
    /// Two separated class components, no difficulty split, pooled filter.
    WithoutSegment,
    /// Four difficulty components but one pooled filter.
    WithoutAdaptive,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::WithoutDisentangle,
        Ablation::WithoutSegment,
        Ablation::WithoutAdaptive,
        Ablation::Full,
    ];

    pub fn layout(self, preset: PriorPreset) -> PriorLayout {
        match self {
            Ablation::Full | Ablation::WithoutAdaptive => PriorLayout::Difficulty(preset),
            Ablation::WithoutSegment => PriorLayout::ClassSeparated,
            Ablation::WithoutDisentangle => PriorLayout::ClassStandard,
        }
    }

    pub fn adaptive(self) -> bool {
        self == Ablation::Full
    }

    pub fn label(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::WithoutDisentangle => "w/o dis",
            Ablation::WithoutSegment => "w/o seg",
            Ablation::WithoutAdaptive => "w/o af",
        }
    }
}

/// Per-row latent view for threshold tuning. Density and kept flag are only
/// defined for minor rows.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentExport {
    pub z: Matrix,
    pub labels: Vec<Label>,
    pub pseudo: Vec<PseudoLabel>,
    pub density: Vec<Option<f64>>,
    pub kept: Vec<Option<bool>>,
}

impl LatentExport {
    pub(crate) fn new(z: Matrix, pl: &PseudoLabeledDataset, report: Option<&FilterReport>) -> Self {
        let n = z.rows();
        let mut density = vec![None; n];
        let mut kept = vec![None; n];
        if let Some(r) = report {
            for e in &r.entries {
                density[e.index] = Some(e.density);
                kept[e.index] = Some(e.kept);
            }
        }
        Self {
            z,
            labels: pl.base.labels.clone(),
            pseudo: pl.pseudo_labels.clone(),
            density,
            kept,
        }
    }
}

pub struct SmoteClsRun {
    pub augmented: Augmented,
    pub report: FilterReport,
    pub model: CvaeModel,
    pub pseudo: PseudoLabeledDataset,
    pub training: TrainReport,
}

/// Relabel, fit the frozen classifier, train the model, embed the minors,
/// density-filter them and interpolate among the survivors in data space.
pub fn smote_cls_pipeline(
    data: &LabeledDataset,
    config: &OversampleConfig,
    ablation: Ablation,
    rng: RngStream,
) -> Result<SmoteClsRun> {
    config.validate()?;
    data.require_both_classes()?;
    let pseudo = relabel(data, config.k_knn)?;
    let spec = config.cvae.spec(ablation.layout(config.cvae.preset));
    let (model, training) = fit_cvae(&pseudo, &spec, rng.named("cvae"))?;
    let emb = model.embed(&data.features)?;

    let minors = pseudo.minor_indices();
    let groups: Vec<PseudoLabel> = minors.iter().map(|&i| pseudo.pseudo_labels[i]).collect();
    let filter_cfg = super::FilterConfig {
        adaptive: config.filter.adaptive && ablation.adaptive(),
        ..config.filter
    };
    let report = group_adaptive_filter(&emb.z.select_rows(&minors), &minors, &groups, &filter_cfg)?;
    let retained = report.retained();
    if retained.len() < 2 {
        return Err(Error::OverFiltered { kept: retained.len() });
    }
    let target = synthetic_target(pseudo.major_count(), minors.len(), config.rho);
    let latent = LatentExport::new(emb.z, &pseudo, Some(&report));
    let augmented = smote_on_rows(
        data,
        retained,
        target,
        config.k_smote,
        rng.named("smote"),
        Some(report.clone()),
        Some(latent),
    )?;
    Ok(SmoteClsRun {
        augmented,
        report,
        model,
        pseudo,
        training,
    })
}

/// Baselines built on the same model: centroid and pooled-density filters
/// followed by data-space SMOTE, latent interpolation with decoding, and
/// sampling the minor prior component.
pub(crate) fn latent_baseline(
    data: &LabeledDataset,
    config: &OversampleConfig,
    target: usize,
    rng: RngStream,
) -> Result<Augmented> {
    let pseudo = relabel(data, config.k_knn)?;
    let layout = match config.strategy {
        Strategy::DfbsFilterSmote | Strategy::DdhsFilterSmote => PriorLayout::ClassStandard,
        _ => PriorLayout::ClassSeparated,
    };
    let (model, _) = fit_cvae(&pseudo, &config.cvae.spec(layout), rng.named("cvae"))?;
    let minors = pseudo.minor_indices();
    let emb = model.embed(&data.features)?;
    let latent = LatentExport::new(emb.z.clone(), &pseudo, None);
    let smote_rng = rng.named("smote");
    match config.strategy {
        Strategy::DfbsFilterSmote => {
            let kept = dfbs_filter(&emb.z, &data.labels)?;
            if kept.len() < 2 {
                return Err(Error::OverFiltered { kept: kept.len() });
            }
            smote_on_rows(data, kept, target, config.k_smote, smote_rng, None, Some(latent))
        }
        Strategy::DdhsFilterSmote => {
            let pos = ddhs_filter(&emb.z.select_rows(&minors), config.ddhs_retain)?;
            if pos.len() < 2 {
                return Err(Error::OverFiltered { kept: pos.len() });
            }
            let kept = pos.iter().map(|&p| minors[p]).collect();
            smote_on_rows(data, kept, target, config.k_smote, smote_rng, None, Some(latent))
        }
        Strategy::LatentSmoteDecode => {
            let z = smote(&emb.z.select_rows(&minors), target, config.k_smote, smote_rng)?.points;
            decoded(data, &model.decode(&z)?, None, Some(latent))
        }
        Strategy::CvaeGenerate => {
            let prior = model.prior();
            let c = model.conditioning().minor_components()[0];
            let sd = prior.variances[c].sqrt();
            let mut r = smote_rng.rng();
            let mut z = Matrix::zeros(target, model.latent_dim());
            for i in 0..target {
                for j in 0..model.latent_dim() {
                    z.set(i, j, prior.means[c][j] + sd * r.normal());
                }
            }
            decoded(data, &model.decode(&z)?, None, Some(latent))
        }
        other => Err(Error::invalid(format!("{other} is not a latent baseline"))),
    }
}
