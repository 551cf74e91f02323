//! Conditional VAE with a Gaussian-mixture prior.

mod classifier;
mod kl;
mod model;
mod prior;

pub use classifier::{ClassifierKind, MlpClassifier, MlpSpec, PseudoClassifier};
pub use kl::{categorical_kl, kl_diag_gaussians, kl_upper_bound, kl_upper_bound_parts};
pub use model::{
    latent_dim_for, CvaeGradients, CvaeModel, Draws, Embedding, KlReduction, LossBreakdown, TrainConfig, TrainReport,
};
pub use prior::{empirical_weights, Conditioning, GmmPrior, PriorPreset, PRIOR_VARIANCE};

use crate::data::Label;
use crate::error::Result;
use crate::neighbors::PseudoLabeledDataset;
use crate::rng::RngStream;

/// Which prior (and therefore which conditioning) a model is fitted with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorLayout {
    /// Four difficulty-aware components.
    Difficulty(PriorPreset),
    /// Two class components pushed to opposite corners.
    ClassSeparated,
    /// Two class components, both standard normal.
    ClassStandard,
}

impl PriorLayout {
    pub fn conditioning(self) -> Conditioning {
        match self {
            PriorLayout::Difficulty(_) => Conditioning::Difficulty,
            _ => Conditioning::Class,
        }
    }

    pub fn build(self, h: usize, weights: Vec<f64>) -> Result<GmmPrior> {
        match self {
            PriorLayout::Difficulty(p) => GmmPrior::difficulty(p, h, weights),
            PriorLayout::ClassSeparated => GmmPrior::class_separated(h, weights),
            PriorLayout::ClassStandard => GmmPrior::class_standard(h, weights),
        }
    }
}

/// Everything needed to fit a model end to end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvaeSpec {
    pub layout: PriorLayout,
    pub classifier: ClassifierKind,
    /// `None` picks the width from the input dimension.
    pub latent_dim: Option<usize>,
    pub train: TrainConfig,
}

impl Default for CvaeSpec {
    fn default() -> Self {
        Self {
            layout: PriorLayout::Difficulty(PriorPreset::Default),
            classifier: ClassifierKind::Forest,
            latent_dim: None,
            train: TrainConfig::default(),
        }
    }
}

/// Component id of each row under a conditioning.
pub fn component_ids(data: &PseudoLabeledDataset, conditioning: Conditioning) -> Vec<usize> {
    match conditioning {
        Conditioning::Difficulty => data.pseudo_labels.iter().map(|p| p.index()).collect(),
        Conditioning::Class => data
            .base
            .labels
            .iter()
            .map(|&l| usize::from(l == Label::Minor))
            .collect(),
    }
}

/// Fits the frozen classifier on component ids, builds the prior with
/// empirical weights, then trains the encoder and decoder.
pub fn fit_cvae(data: &PseudoLabeledDataset, spec: &CvaeSpec, rng: RngStream) -> Result<(CvaeModel, TrainReport)> {
    spec.train.validate()?;
    let x = &data.base.features;
    let h = spec.latent_dim.unwrap_or_else(|| latent_dim_for(x.cols()));
    let conditioning = spec.layout.conditioning();
    let k = conditioning.components();
    let ids = component_ids(data, conditioning);
    let classifier = PseudoClassifier::fit(spec.classifier, x, &ids, k, h, rng.named("classifier"))?;
    let prior = spec.layout.build(h, empirical_weights(&ids, k))?;
    let mut model = CvaeModel::new(x.cols(), classifier, prior, conditioning, rng.named("init"))?;
    let report = model.train(x, &spec.train, rng.named("train"))?;
    Ok((model, report))
}
