//! Gini decision trees and bootstrap random forests.

use rayon::prelude::*;

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};

/// Anything that maps a feature row to a class-probability simplex.
pub trait ProbabilisticClassifier: Send + Sync {
    fn n_classes(&self) -> usize;
    fn n_features(&self) -> usize;
    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64>;

    fn predict_proba(&self, rows: &Matrix) -> Result<Vec<Vec<f64>>> {
        if rows.cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: rows.cols(),
            });
        }
        Ok(rows.iter_rows().map(|r| self.predict_proba_row(r)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeSpec {
    /// `None` grows until purity or `min_leaf`.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeSpec {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf {
        /// Class frequencies of the training rows that reached the leaf.
        distribution: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    pub(crate) nodes: Vec<Node>,
    pub(crate) n_classes: usize,
    pub(crate) n_features: usize,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    spec: TreeSpec,
    rng: StreamRng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, samples: &[usize]) -> usize {
        let mut distribution = vec![0.0; self.n_classes];
        for &i in samples {
            distribution[self.y[i]] += 1.0;
        }
        let n = samples.len() as f64;
        distribution.iter_mut().for_each(|c| *c /= n);
        self.nodes.push(Node::Leaf { distribution });
        self.nodes.len() - 1
    }

    fn best_split(&mut self, samples: &[usize]) -> Option<BestSplit> {
        let d = self.x.cols();
        let mut order: Vec<usize> = (0..d).collect();
        self.rng.shuffle(&mut order);
        let budget = self.spec.max_features.unwrap_or(d).clamp(1, d);
        let min_leaf = self.spec.min_leaf.max(1);
        let n = samples.len();

        let mut best: Option<BestSplit> = None;
        let mut visited = 0;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut total = vec![0.0; self.n_classes];
        for &i in samples {
            total[self.y[i]] += 1.0;
        }
        for &feature in &order {
            if visited >= budget {
                break;
            }
            pairs.clear();
            pairs.extend(samples.iter().map(|&i| (self.x.get(i, feature), self.y[i])));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[n - 1].0 {
                // constant features do not count toward the budget
                continue;
            }
            visited += 1;
            let mut left = vec![0.0; self.n_classes];
            for pos in 0..n - 1 {
                left[pairs[pos].1] += 1.0;
                let nl = pos + 1;
                let nr = n - nl;
                if pairs[pos].0 == pairs[pos + 1].0 || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let score = nl as f64 * gini(&left, nl as f64) + nr as f64 * gini(&right, nr as f64);
                if best.as_ref().is_none_or(|b| score < b.score) {
                    let (a, b) = (pairs[pos].0, pairs[pos + 1].0);
                    let mut threshold = a / 2.0 + b / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let first = self.y[samples[0]];
        let pure = samples.iter().all(|&i| self.y[i] == first);
        let depth_capped = self.spec.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_capped || samples.len() < 2 * self.spec.min_leaf.max(1) {
            return self.leaf(&samples);
        }
        let Some(split) = self.best_split(&samples) else {
            return self.leaf(&samples);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.x.get(i, split.feature) <= split.threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            distribution: Vec::new(),
        });
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

impl DecisionTree {
    /// Fits on the rows listed in `samples` (repeats allowed, as in a bootstrap).
    pub fn fit_on(
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        samples: Vec<usize>,
        spec: TreeSpec,
        rng: RngStream,
    ) -> Result<Self> {
        if samples.is_empty() || x.is_empty() {
            return Err(Error::Empty("tree training set"));
        }
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(Error::invalid(format!(
                "class id {bad} out of range for {n_classes} classes"
            )));
        }
        let mut b = Builder {
            x,
            y,
            n_classes,
            spec,
            rng: rng.rng(),
            nodes: Vec::new(),
        };
        b.grow(samples, 0);
        Ok(Self {
            nodes: b.nodes,
            n_classes,
            n_features: x.cols(),
        })
    }

    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, spec: TreeSpec, rng: RngStream) -> Result<Self> {
        Self::fit_on(x, y, n_classes, (0..x.rows()).collect(), spec, rng)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_distribution(&self, row: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { distribution } => return distribution,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

impl ProbabilisticClassifier for DecisionTree {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        self.leaf_distribution(row).to_vec()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestSpec {
    pub n_trees: usize,
    pub tree: TreeSpec,
    /// Draw a same-size bootstrap sample per tree.
    pub bootstrap: bool,
}

impl ForestSpec {
    /// Pseudo-label classifier defaults: 200 unlimited-depth trees.
    pub fn pseudo_label_default() -> Self {
        Self {
            n_trees: 200,
            tree: TreeSpec::default(),
            bootstrap: true,
        }
    }

    /// Evaluation classifier defaults: 100 unlimited-depth trees.
    pub fn evaluation_default() -> Self {
        Self {
            n_trees: 100,
            tree: TreeSpec::default(),
            bootstrap: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    pub(crate) trees: Vec<DecisionTree>,
    pub(crate) n_classes: usize,
    pub(crate) n_features: usize,
}

impl Forest {
    /// Fits `spec.n_trees` trees; tree `t` draws from `rng.substream(t)`, so the
    /// result does not depend on thread scheduling. Features per split default
    /// to `ceil(sqrt(d))`.
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, spec: ForestSpec, rng: RngStream) -> Result<Self> {
        if spec.n_trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        if x.is_empty() {
            return Err(Error::Empty("forest training set"));
        }
        let n = x.rows();
        let mut tree_spec = spec.tree;
        if tree_spec.max_features.is_none() {
            tree_spec.max_features = Some((x.cols() as f64).sqrt().ceil() as usize);
        }
        let trees = (0..spec.n_trees)
            .into_par_iter()
            .map(|t| {
                let stream = rng.substream(t as u64);
                let samples = if spec.bootstrap {
                    let mut r = stream.named("bootstrap").rng();
                    (0..n).map(|_| r.index(n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit_on(x, y, n_classes, samples, tree_spec, stream.named("splits"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            trees,
            n_classes,
            n_features: x.cols(),
        })
    }

    pub fn from_trees(trees: Vec<DecisionTree>) -> Result<Self> {
        let first = trees.first().ok_or(Error::Empty("forest without trees"))?;
        let (n_classes, n_features) = (first.n_classes, first.n_features);
        if trees
            .iter()
            .any(|t| t.n_classes != n_classes || t.n_features != n_features)
        {
            return Err(Error::invalid("trees disagree on class or feature count"));
        }
        Ok(Self {
            trees,
            n_classes,
            n_features,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}

impl ProbabilisticClassifier for Forest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.leaf_distribution(row)) {
                *acc += v;
            }
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
        p
    }
}
