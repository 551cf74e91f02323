use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, Optimizer, OptimizerKind};
use crate::rng::{RngStream, StreamRng};
use crate::tree::ProbabilisticClassifier;

use super::classifier::PseudoClassifier;
use super::kl::{categorical_kl, kl_logvar_isotropic};
use super::prior::{Conditioning, GmmPrior};

/// Latent width rule: 4 for inputs with more than 90 features, else 2.
pub fn latent_dim_for(input_dim: usize) -> usize {
    if input_dim > 90 {
        4
    } else {
        2
    }
}

/// How the KL term is weighted against a batch of reconstructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KlReduction {
    /// Reconstruction summed over the batch plus one batch-averaged KL term,
    /// i.e. an effective per-sample weight of `beta / batch_size`.
    #[default]
    PerBatch,
    /// Per-sample `reconstruction + beta * KL`, averaged over the batch.
    PerSample,
}

impl KlReduction {
    pub fn as_str(self) -> &'static str {
        match self {
            KlReduction::PerBatch => "batch",
            KlReduction::PerSample => "sample",
        }
    }
}

impl std::str::FromStr for KlReduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(KlReduction::PerBatch),
            "sample" => Ok(KlReduction::PerSample),
            other => Err(Error::invalid(format!(
                "unknown KL reduction `{other}` (expected batch or sample)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// KL weight.
    pub beta: f64,
    pub kl_reduction: KlReduction,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            kl_reduction: KlReduction::PerBatch,
            learning_rate: 1e-3,
            epochs: 300,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    /// Per-sample KL weight actually applied during training.
    pub fn effective_beta(&self) -> f64 {
        match self.kl_reduction {
            KlReduction::PerBatch => self.beta / self.batch_size.max(1) as f64,
            KlReduction::PerSample => self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be non-negative, got {}", self.beta)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Per-row component choices and Gaussian noise for one reparameterized pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Draws {
    pub components: Vec<usize>,
    pub noise: Matrix,
}

impl Draws {
    /// Ancestral draw: component from the classifier weights, then `eps ~ N(0, I)`.
    pub fn sample(weights: &[Vec<f64>], latent_dim: usize, rng: &mut StreamRng) -> Self {
        let components = weights.iter().map(|w| rng.categorical(w)).collect();
        let mut noise = Matrix::zeros(weights.len(), latent_dim);
        noise.as_mut_slice().iter_mut().for_each(|e| *e = rng.normal());
        Self { components, noise }
    }
}

/// Batch-mean loss terms. `total = reconstruction + beta * (kl_gaussian + kl_categorical)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub kl_gaussian: f64,
    pub kl_categorical: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvaeGradients {
    pub encoder: Vec<f64>,
    pub heads: Vec<f64>,
    pub decoder: Vec<f64>,
}

impl CvaeGradients {
    pub fn flatten(&self) -> Vec<f64> {
        [self.encoder.as_slice(), &self.heads, &self.decoder].concat()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<LossBreakdown>,
}

/// Deterministic latent positions and the component each row was placed in.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub z: Matrix,
    pub components: Vec<usize>,
}

/// Conditional VAE whose encoder is a classifier-weighted mixture of
/// per-component Gaussian heads on a shared trunk.
#[derive(Clone, Debug, PartialEq)]
pub struct CvaeModel {
    pub(crate) encoder: DenseNet,
    pub(crate) heads: DenseNet,
    pub(crate) decoder: DenseNet,
    pub(crate) classifier: PseudoClassifier,
    pub(crate) prior: GmmPrior,
    pub(crate) conditioning: Conditioning,
}

fn argmax(w: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in w.iter().enumerate() {
        if v > w[best] {
            best = i;
        }
    }
    best
}

impl CvaeModel {
    /// Trunk `d -> 8h -> 4h -> 2h`, one `(mu, logvar)` head pair per
    /// component, decoder `h -> 2h -> 4h -> 8h -> d`.
    pub fn new(
        input_dim: usize,
        classifier: PseudoClassifier,
        prior: GmmPrior,
        conditioning: Conditioning,
        rng: RngStream,
    ) -> Result<Self> {
        let h = prior.latent_dim();
        let k = prior.components();
        if k != conditioning.components() || classifier.n_classes() != k {
            return Err(Error::invalid(format!(
                "prior has {k} components, conditioning expects {}, classifier predicts {}",
                conditioning.components(),
                classifier.n_classes()
            )));
        }
        if classifier.n_features() != input_dim {
            return Err(Error::DimensionMismatch {
                expected: input_dim,
                got: classifier.n_features(),
            });
        }
        use Activation::{Linear, Relu};
        let encoder = DenseNet::init(
            &[input_dim, 8 * h, 4 * h, 2 * h],
            &[Relu, Relu, Relu],
            rng.named("encoder"),
        )?;
        let heads = DenseNet::init(&[2 * h, k * 2 * h], &[Linear], rng.named("heads"))?;
        let decoder = DenseNet::init(
            &[h, 2 * h, 4 * h, 8 * h, input_dim],
            &[Relu, Relu, Relu, Linear],
            rng.named("decoder"),
        )?;
        Ok(Self {
            encoder,
            heads,
            decoder,
            classifier,
            prior,
            conditioning,
        })
    }

    pub(crate) fn from_parts(
        encoder: DenseNet,
        heads: DenseNet,
        decoder: DenseNet,
        classifier: PseudoClassifier,
        prior: GmmPrior,
        conditioning: Conditioning,
    ) -> Result<Self> {
        let h = prior.latent_dim();
        let k = prior.components();
        let d = encoder.input_width();
        let consistent = encoder.output_width() == heads.input_width()
            && heads.output_width() == k * 2 * h
            && decoder.input_width() == h
            && decoder.output_width() == d
            && classifier.n_classes() == k
            && classifier.n_features() == d
            && conditioning.components() == k;
        if !consistent {
            return Err(Error::Checkpoint("inconsistent architecture".into()));
        }
        Ok(Self {
            encoder,
            heads,
            decoder,
            classifier,
            prior,
            conditioning,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_width()
    }

    pub fn latent_dim(&self) -> usize {
        self.prior.latent_dim()
    }

    pub fn components(&self) -> usize {
        self.prior.components()
    }

    pub fn prior(&self) -> &GmmPrior {
        &self.prior
    }

    pub fn conditioning(&self) -> Conditioning {
        self.conditioning
    }

    pub fn classifier(&self) -> &PseudoClassifier {
        &self.classifier
    }

    pub fn encoder(&self) -> &DenseNet {
        &self.encoder
    }

    pub fn heads(&self) -> &DenseNet {
        &self.heads
    }

    pub fn decoder(&self) -> &DenseNet {
        &self.decoder
    }

    pub fn decoder_mut(&mut self) -> &mut DenseNet {
        &mut self.decoder
    }

    pub fn heads_mut(&mut self) -> &mut DenseNet {
        &mut self.heads
    }

    /// Classifier probabilities `f(c | x)` per row.
    pub fn component_weights(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.classifier.predict_proba(x)
    }

    /// Encoder head outputs per row: `(mu_c, logvar_c)` for every component.
    pub fn encode(&self, x: &Matrix) -> Result<Vec<Vec<(Vec<f64>, Vec<f64>)>>> {
        let out = self.head_outputs(x)?;
        let h = self.latent_dim();
        Ok(out
            .iter_rows()
            .map(|row| {
                (0..self.components())
                    .map(|c| {
                        let base = c * 2 * h;
                        (row[base..base + h].to_vec(), row[base + h..base + 2 * h].to_vec())
                    })
                    .collect()
            })
            .collect())
    }

    fn head_outputs(&self, x: &Matrix) -> Result<Matrix> {
        let trunk = self.encoder.forward(x)?;
        Ok(self.heads.forward(trunk.output())?.output().clone())
    }

    /// `z = mu_c(x)` with `c = argmax_k f(k | x)`; no sampling.
    pub fn embed(&self, x: &Matrix) -> Result<Embedding> {
        let weights = self.component_weights(x)?;
        self.embed_with_weights(x, &weights)
    }

    pub fn embed_with_weights(&self, x: &Matrix, weights: &[Vec<f64>]) -> Result<Embedding> {
        let out = self.head_outputs(x)?;
        let h = self.latent_dim();
        let mut z = Matrix::zeros(x.rows(), h);
        let mut components = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let c = argmax(&weights[i]);
            let base = c * 2 * h;
            z.row_mut(i).copy_from_slice(&out.row(i)[base..base + h]);
            components.push(c);
        }
        Ok(Embedding { z, components })
    }

    /// One reparameterized posterior draw per row.
    pub fn sample_posterior(&self, x: &Matrix, rng: RngStream) -> Result<(Matrix, Vec<usize>)> {
        let weights = self.component_weights(x)?;
        let draws = Draws::sample(&weights, self.latent_dim(), &mut rng.rng());
        let out = self.head_outputs(x)?;
        Ok((self.reparameterize(&out, &draws), draws.components))
    }

    fn reparameterize(&self, head_out: &Matrix, draws: &Draws) -> Matrix {
        let h = self.latent_dim();
        let mut z = Matrix::zeros(head_out.rows(), h);
        for i in 0..head_out.rows() {
            let base = draws.components[i] * 2 * h;
            let row = head_out.row(i);
            for j in 0..h {
                let sigma = (0.5 * row[base + h + j]).exp();
                z.set(i, j, row[base + j] + sigma * draws.noise.get(i, j));
            }
        }
        z
    }

    /// Decoder mean `D(z)`.
    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        Ok(self.decoder.forward(z)?.output().clone())
    }

    /// Batch-mean loss with fixed draws, and its gradients with respect to
    /// every trainable parameter. The classifier is frozen, so the categorical
    /// KL contributes to the value but not to the gradients.
    pub fn loss_and_gradients(
        &self,
        x: &Matrix,
        weights: &[Vec<f64>],
        draws: &Draws,
        beta: f64,
    ) -> Result<(LossBreakdown, CvaeGradients)> {
        let b = x.rows();
        if b == 0 {
            return Err(Error::Empty("loss batch"));
        }
        if weights.len() != b || draws.components.len() != b {
            return Err(Error::DimensionMismatch {
                expected: b,
                got: weights.len().min(draws.components.len()),
            });
        }
        let h = self.latent_dim();
        let k = self.components();
        let scale = 1.0 / b as f64;

        let trunk = self.encoder.forward(x)?;
        let head_cache = self.heads.forward(trunk.output())?;
        let out = head_cache.output();
        let z = self.reparameterize(out, draws);
        let dec = self.decoder.forward(&z)?;
        let xhat = dec.output();

        let mut loss = LossBreakdown::default();
        let mut d_xhat = Matrix::zeros(b, x.cols());
        for i in 0..b {
            for j in 0..x.cols() {
                let r = xhat.get(i, j) - x.get(i, j);
                loss.reconstruction += r.abs();
                d_xhat.set(i, j, scale * r.signum() * f64::from(u8::from(r != 0.0)));
            }
        }

        let (g_dec, d_z) = self.decoder.backward(&dec, &d_xhat)?;
        let mut d_out = Matrix::zeros(b, k * 2 * h);
        for i in 0..b {
            let row = out.row(i);
            let c = draws.components[i];
            let base = c * 2 * h;
            for j in 0..h {
                let sigma = (0.5 * row[base + h + j]).exp();
                let g = d_z.get(i, j);
                d_out.row_mut(i)[base + j] += g;
                d_out.row_mut(i)[base + h + j] += g * draws.noise.get(i, j) * 0.5 * sigma;
            }
            for comp in 0..k {
                let w = weights[i][comp];
                if w == 0.0 {
                    continue;
                }
                let off = comp * 2 * h;
                let (mu, logvar) = (&row[off..off + h], &row[off + h..off + 2 * h]);
                let mean = &self.prior.means[comp];
                let s2 = self.prior.variances[comp];
                loss.kl_gaussian += w * kl_logvar_isotropic(mu, logvar, mean, s2);
                let dr = d_out.row_mut(i);
                for j in 0..h {
                    dr[off + j] += scale * beta * w * (mu[j] - mean[j]) / s2;
                    dr[off + h + j] += scale * beta * w * 0.5 * (logvar[j].exp() / s2 - 1.0);
                }
            }
            loss.kl_categorical += categorical_kl(&weights[i], &self.prior.weights)?;
        }
        let (g_heads, d_trunk) = self.heads.backward(&head_cache, &d_out)?;
        let (g_enc, _) = self.encoder.backward(&trunk, &d_trunk)?;

        loss.reconstruction *= scale;
        loss.kl_gaussian *= scale;
        loss.kl_categorical *= scale;
        loss.total = loss.reconstruction + beta * (loss.kl_gaussian + loss.kl_categorical);
        if !loss.total.is_finite() {
            return Err(Error::NonFinite(format!("loss {}", loss.total)));
        }
        Ok((
            loss,
            CvaeGradients {
                encoder: g_enc,
                heads: g_heads,
                decoder: g_dec,
            },
        ))
    }

    /// All trainable parameters: encoder, heads, decoder.
    pub fn trainable_params(&self) -> Vec<f64> {
        [self.encoder.params(), self.heads.params(), self.decoder.params()].concat()
    }

    pub fn set_trainable_params(&mut self, flat: &[f64]) -> Result<()> {
        let (ne, nh, nd) = (
            self.encoder.param_count(),
            self.heads.param_count(),
            self.decoder.param_count(),
        );
        if flat.len() != ne + nh + nd {
            return Err(Error::DimensionMismatch {
                expected: ne + nh + nd,
                got: flat.len(),
            });
        }
        self.encoder.params_mut().copy_from_slice(&flat[..ne]);
        self.heads.params_mut().copy_from_slice(&flat[ne..ne + nh]);
        self.decoder.params_mut().copy_from_slice(&flat[ne + nh..]);
        Ok(())
    }

    /// Minibatch training with the frozen classifier supplying component
    /// weights. Returns the per-epoch mean loss, per sample, under the
    /// effective KL weight.
    pub fn train(&mut self, x: &Matrix, config: &TrainConfig, rng: RngStream) -> Result<TrainReport> {
        config.validate()?;
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        let mut report = TrainReport::default();
        if config.epochs == 0 {
            return Ok(report);
        }
        if x.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let weights = self.component_weights(x)?;
        let mut opt_enc = Optimizer::new(config.optimizer, config.learning_rate, self.encoder.param_count())?;
        let mut opt_heads = Optimizer::new(config.optimizer, config.learning_rate, self.heads.param_count())?;
        let mut opt_dec = Optimizer::new(config.optimizer, config.learning_rate, self.decoder.param_count())?;
        let mut r = rng.rng();
        let mut order: Vec<usize> = (0..x.rows()).collect();
        let h = self.latent_dim();
        let beta = config.effective_beta();

        for epoch in 0..config.epochs {
            r.shuffle(&mut order);
            let mut epoch_loss = LossBreakdown::default();
            for chunk in order.chunks(config.batch_size) {
                let xb = x.select_rows(chunk);
                let wb: Vec<Vec<f64>> = chunk.iter().map(|&i| weights[i].clone()).collect();
                let draws = Draws::sample(&wb, h, &mut r);
                let diverged = |e: Error| match e {
                    Error::NonFinite(_) => Error::Diverged { epoch, loss: f64::NAN },
                    other => other,
                };
                let (loss, grads) = self.loss_and_gradients(&xb, &wb, &draws, beta).map_err(diverged)?;
                opt_enc
                    .step(self.encoder.params_mut(), &grads.encoder)
                    .map_err(diverged)?;
                opt_heads
                    .step(self.heads.params_mut(), &grads.heads)
                    .map_err(diverged)?;
                opt_dec
                    .step(self.decoder.params_mut(), &grads.decoder)
                    .map_err(diverged)?;
                let share = chunk.len() as f64 / x.rows() as f64;
                epoch_loss.total += share * loss.total;
                epoch_loss.reconstruction += share * loss.reconstruction;
                epoch_loss.kl_gaussian += share * loss.kl_gaussian;
                epoch_loss.kl_categorical += share * loss.kl_categorical;
            }
            if !epoch_loss.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: epoch_loss.total,
                });
            }
            report.epoch_losses.push(epoch_loss);
        }
        Ok(report)
    }
}
