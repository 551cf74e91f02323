//! The frozen classifier that supplies mixture weights to the encoder.

use std::fmt;
use std::str::FromStr;

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, Optimizer, OptimizerKind};
use crate::rng::RngStream;
use crate::tree::{Forest, ForestSpec, ProbabilisticClassifier};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ClassifierKind {
    #[default]
    Forest,
    Mlp,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Forest => "forest",
            ClassifierKind::Mlp => "mlp",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forest" => Ok(ClassifierKind::Forest),
            "mlp" => Ok(ClassifierKind::Mlp),
            other => Err(Error::invalid(format!(
                "unknown classifier `{other}` (expected forest or mlp)"
            ))),
        }
    }
}

/// Softmax MLP trained with cross-entropy.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpClassifier {
    pub net: DenseNet,
}

#[derive(Clone, Copy, Debug)]
pub struct MlpSpec {
    pub hidden: [usize; 2],
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl MlpSpec {
    pub fn for_latent_dim(h: usize) -> Self {
        Self {
            hidden: [8 * h, 4 * h],
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
        }
    }
}

impl MlpClassifier {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, spec: MlpSpec, rng: RngStream) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Empty("classifier training set"));
        }
        let widths = [x.cols(), spec.hidden[0], spec.hidden[1], n_classes];
        let mut net = DenseNet::init(
            &widths,
            &[Activation::Relu, Activation::Relu, Activation::Softmax],
            rng.named("init"),
        )?;
        let mut opt = Optimizer::new(OptimizerKind::Adam, spec.learning_rate, net.param_count())?;
        let mut r = rng.named("batches").rng();
        let mut order: Vec<usize> = (0..x.rows()).collect();
        for _ in 0..spec.epochs {
            r.shuffle(&mut order);
            for chunk in order.chunks(spec.batch_size.max(1)) {
                let xb = x.select_rows(chunk);
                let cache = net.forward(&xb)?;
                let out = cache.output();
                let mut up = Matrix::zeros(chunk.len(), n_classes);
                let scale = 1.0 / chunk.len() as f64;
                for (i, &row) in chunk.iter().enumerate() {
                    let p = out.get(i, y[row]).max(1e-12);
                    up.set(i, y[row], -scale / p);
                }
                let (g, _) = net.backward(&cache, &up)?;
                opt.step(net.params_mut(), &g)?;
            }
        }
        Ok(Self { net })
    }
}

impl ProbabilisticClassifier for MlpClassifier {
    fn n_classes(&self) -> usize {
        self.net.output_width()
    }

    fn n_features(&self) -> usize {
        self.net.input_width()
    }

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        self.net.forward_row(row).expect("input width checked by caller")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PseudoClassifier {
    Forest(Forest),
    Mlp(MlpClassifier),
}

impl PseudoClassifier {
    pub fn fit(
        kind: ClassifierKind,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        latent_dim: usize,
        rng: RngStream,
    ) -> Result<Self> {
        match kind {
            ClassifierKind::Forest => Ok(PseudoClassifier::Forest(Forest::fit(
                x,
                y,
                n_classes,
                ForestSpec::pseudo_label_default(),
                rng,
            )?)),
            ClassifierKind::Mlp => Ok(PseudoClassifier::Mlp(MlpClassifier::fit(
                x,
                y,
                n_classes,
                MlpSpec::for_latent_dim(latent_dim),
                rng,
            )?)),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            PseudoClassifier::Forest(_) => ClassifierKind::Forest,
            PseudoClassifier::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    fn inner(&self) -> &dyn ProbabilisticClassifier {
        match self {
            PseudoClassifier::Forest(f) => f,
            PseudoClassifier::Mlp(m) => m,
        }
    }
}

impl ProbabilisticClassifier for PseudoClassifier {
    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        self.inner().predict_proba_row(row)
    }
}
