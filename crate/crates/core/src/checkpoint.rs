//! Binary model checkpoints.
//!
//! Little-endian throughout. Layout: magic, `u32` version, conditioning tag,
//! the encoder trunk, the head layer and the decoder (each as layer shapes
//! followed by flat `f64` parameters), the prior, then the frozen classifier.
//! Decoding validates every count against the bytes that remain, so malformed
//! input yields an error instead of a panic or a huge allocation.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::cvae::{Conditioning, CvaeModel, GmmPrior, MlpClassifier, PseudoClassifier};
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, LayerShape};
use crate::tree::{DecisionTree, Forest, Node, ProbabilisticClassifier};

pub const MAGIC: &[u8; 8] = b"SCLSCKPT";
pub const VERSION: u32 = 1;

const FOREST_TAG: u8 = 0;
const MLP_TAG: u8 = 1;
const LEAF_TAG: u8 = 0;
const SPLIT_TAG: u8 = 1;

pub fn encode(model: &CvaeModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    // writes into a Vec cannot fail
    let w = &mut out;
    w.write_u32::<LE>(VERSION).unwrap();
    w.write_u8(model.conditioning().tag()).unwrap();
    for net in [model.encoder(), model.heads(), model.decoder()] {
        write_net(w, net);
    }
    let prior = model.prior();
    w.write_u32::<LE>(prior.components() as u32).unwrap();
    w.write_u32::<LE>(prior.latent_dim() as u32).unwrap();
    for m in &prior.means {
        write_f64s(w, m);
    }
    write_f64s(w, &prior.variances);
    write_f64s(w, &prior.weights);
    match model.classifier() {
        PseudoClassifier::Forest(f) => {
            w.write_u8(FOREST_TAG).unwrap();
            w.write_u32::<LE>(f.trees().len() as u32).unwrap();
            w.write_u32::<LE>(f.n_classes() as u32).unwrap();
            w.write_u32::<LE>(f.n_features() as u32).unwrap();
            for t in f.trees() {
                w.write_u32::<LE>(t.nodes().len() as u32).unwrap();
                for node in t.nodes() {
                    match node {
                        Node::Leaf { distribution } => {
                            w.write_u8(LEAF_TAG).unwrap();
                            write_f64s(w, distribution);
                        }
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            w.write_u8(SPLIT_TAG).unwrap();
                            w.write_u32::<LE>(*feature as u32).unwrap();
                            w.write_f64::<LE>(*threshold).unwrap();
                            w.write_u32::<LE>(*left as u32).unwrap();
                            w.write_u32::<LE>(*right as u32).unwrap();
                        }
                    }
                }
            }
        }
        PseudoClassifier::Mlp(m) => {
            w.write_u8(MLP_TAG).unwrap();
            write_net(w, &m.net);
        }
    }
    out
}

fn write_f64s(w: &mut Vec<u8>, v: &[f64]) {
    for &x in v {
        w.write_f64::<LE>(x).unwrap();
    }
}

fn write_net(w: &mut Vec<u8>, net: &DenseNet) {
    w.write_u32::<LE>(net.layers().len() as u32).unwrap();
    for l in net.layers() {
        w.write_u32::<LE>(l.input as u32).unwrap();
        w.write_u32::<LE>(l.output as u32).unwrap();
        w.write_u8(l.activation.tag()).unwrap();
    }
    write_f64s(w, net.params());
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    fn u8(&mut self) -> Result<u8> {
        self.cur.read_u8().map_err(|_| bad("truncated"))
    }

    fn u32(&mut self) -> Result<usize> {
        self.cur
            .read_u32::<LE>()
            .map(|v| v as usize)
            .map_err(|_| bad("truncated"))
    }

    /// A count of items that each occupy at least `min_bytes`.
    fn count(&mut self, min_bytes: usize, what: &str) -> Result<usize> {
        let n = self.u32()?;
        if n.saturating_mul(min_bytes) > self.remaining() {
            return Err(bad(format!("{what} count {n} exceeds the input")));
        }
        Ok(n)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        if n.saturating_mul(8) > self.remaining() {
            return Err(bad("truncated"));
        }
        (0..n)
            .map(|_| self.cur.read_f64::<LE>().map_err(|_| bad("truncated")))
            .collect()
    }

    fn finite(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let v = self.f64s(n)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(bad(format!("non-finite {what}")));
        }
        Ok(v)
    }

    fn net(&mut self) -> Result<DenseNet> {
        let n = self.count(9, "layer")?;
        if n == 0 {
            return Err(bad("network without layers"));
        }
        let mut layers = Vec::with_capacity(n);
        let mut total = 0usize;
        for _ in 0..n {
            let (input, output) = (self.u32()?, self.u32()?);
            let activation = Activation::from_tag(self.u8()?).ok_or_else(|| bad("unknown activation"))?;
            if input == 0 || output == 0 {
                return Err(bad("zero-width layer"));
            }
            total = input
                .checked_mul(output)
                .and_then(|w| w.checked_add(output))
                .and_then(|p| p.checked_add(total))
                .ok_or_else(|| bad("parameter count overflows"))?;
            layers.push(LayerShape {
                input,
                output,
                activation,
            });
        }
        let params = self.finite(total, "network parameter")?;
        DenseNet::from_layers(layers, Some(params)).map_err(|e| bad(e.to_string()))
    }

    fn tree(&mut self, n_classes: usize, n_features: usize) -> Result<DecisionTree> {
        let n = self.count(1, "node")?;
        if n == 0 {
            return Err(bad("tree without nodes"));
        }
        let mut nodes = Vec::with_capacity(n);
        for id in 0..n {
            match self.u8()? {
                LEAF_TAG => {
                    let distribution = self.finite(n_classes, "leaf distribution")?;
                    if distribution.iter().any(|&p| p < 0.0) {
                        return Err(bad("negative leaf probability"));
                    }
                    nodes.push(Node::Leaf { distribution });
                }
                SPLIT_TAG => {
                    let feature = self.u32()?;
                    let threshold = self.f64s(1)?[0];
                    let (left, right) = (self.u32()?, self.u32()?);
                    // children always follow their parent, which rules out cycles
                    if feature >= n_features || threshold.is_nan() || [left, right].iter().any(|&c| c <= id || c >= n) {
                        return Err(bad(format!("invalid split at node {id}")));
                    }
                    nodes.push(Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    });
                }
                t => return Err(bad(format!("unknown node tag {t}"))),
            }
        }
        Ok(DecisionTree {
            nodes,
            n_classes,
            n_features,
        })
    }
}

pub fn decode(bytes: &[u8]) -> Result<CvaeModel> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let mut r = Reader {
        cur: Cursor::new(&bytes[MAGIC.len()..]),
    };
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(bad(format!("unsupported version {version}")));
    }
    let conditioning = Conditioning::from_tag(r.u8()?).ok_or_else(|| bad("unknown conditioning"))?;
    let encoder = r.net()?;
    let heads = r.net()?;
    let decoder = r.net()?;
    let k = r.u32()?;
    let h = r.u32()?;
    if k == 0 || h == 0 || k.saturating_mul(h).saturating_mul(8) > r.remaining() {
        return Err(bad("invalid prior shape"));
    }
    let means = (0..k).map(|_| r.finite(h, "prior mean")).collect::<Result<Vec<_>>>()?;
    let variances = r.f64s(k)?;
    let weights = r.f64s(k)?;
    let prior = GmmPrior::new(means, variances, weights).map_err(|e| bad(e.to_string()))?;
    let classifier = match r.u8()? {
        FOREST_TAG => {
            let n_trees = r.count(5, "tree")?;
            let n_classes = r.u32()?;
            let n_features = r.u32()?;
            if n_classes != k {
                return Err(bad("forest class count disagrees with prior"));
            }
            let trees = (0..n_trees)
                .map(|_| r.tree(n_classes, n_features))
                .collect::<Result<Vec<_>>>()?;
            PseudoClassifier::Forest(Forest::from_trees(trees).map_err(|e| bad(e.to_string()))?)
        }
        MLP_TAG => {
            let net = r.net()?;
            if net.layers().last().map(|l| l.activation) != Some(Activation::Softmax) {
                return Err(bad("classifier network must end in softmax"));
            }
            PseudoClassifier::Mlp(MlpClassifier { net })
        }
        t => return Err(bad(format!("unknown classifier tag {t}"))),
    };
    if r.remaining() != 0 {
        return Err(bad(format!("{} trailing bytes", r.remaining())));
    }
    let checks = [encoder.layers(), heads.layers(), decoder.layers()];
    if checks
        .iter()
        .any(|ls| ls.iter().any(|l| l.activation == Activation::Softmax))
    {
        return Err(bad("softmax inside the autoencoder"));
    }
    CvaeModel::from_parts(encoder, heads, decoder, classifier, prior, conditioning)
}

pub fn save(model: &CvaeModel, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<CvaeModel> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode(&buf)
}
