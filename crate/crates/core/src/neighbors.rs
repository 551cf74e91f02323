//! Brute-force Euclidean neighbor search, the KNN difficulty relabeling,
//! edited-nearest-neighbor cleaning and k-means clustering.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{squared_distance, Label, LabeledDataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Exhaustive neighbor index over a reference matrix.
#[derive(Clone, Copy, Debug)]
pub struct NeighborIndex<'a> {
    reference: &'a Matrix,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(reference: &'a Matrix) -> Self {
        Self { reference }
    }

    pub fn len(&self) -> usize {
        self.reference.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.rows() == 0
    }

    /// The `k` nearest reference rows to `query`, sorted by distance with ties
    /// broken toward the lower row index. With `exclude` set, that row is never
    /// returned (leave-one-out).
    pub fn query(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<Neighbor>> {
        if query.len() != self.reference.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.reference.cols(),
                got: query.len(),
            });
        }
        let available = self.len() - usize::from(exclude.is_some_and(|e| e < self.len()));
        if k == 0 || k > available {
            return Err(Error::invalid(format!(
                "k = {k} must lie in 1..={available} (available reference points)"
            )));
        }
        let mut all: Vec<(f64, usize)> = (0..self.len())
            .filter(|&i| Some(i) != exclude)
            .map(|i| (squared_distance(query, self.reference.row(i)), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < all.len() {
            all.select_nth_unstable_by(k - 1, cmp);
            all.truncate(k);
        }
        all.sort_unstable_by(cmp);
        Ok(all
            .into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect())
    }

    /// Leave-one-out neighbor lists for every reference row.
    pub fn self_neighbors(&self, k: usize) -> Result<Vec<Vec<usize>>> {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                self.query(self.reference.row(i), k, Some(i))
                    .map(|ns| ns.into_iter().map(|n| n.index).collect())
            })
            .collect()
    }
}

/// Majority vote over neighbor labels; ties go to the major class.
pub fn majority_vote(labels: impl IntoIterator<Item = Label>) -> Label {
    let (mut minor, mut major) = (0usize, 0usize);
    for l in labels {
        match l {
            Label::Minor => minor += 1,
            Label::Major => major += 1,
        }
    }
    if minor > major {
        Label::Minor
    } else {
        Label::Major
    }
}

/// KNN classifier `f_K`: majority label among the `k` nearest references.
pub fn knn_predict(
    reference: &Matrix,
    labels: &[Label],
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Result<Label> {
    if reference.is_empty() {
        return Err(Error::Empty("reference set"));
    }
    let index = NeighborIndex::new(reference);
    let ns = index.query(query, k, exclude)?;
    Ok(majority_vote(ns.iter().map(|n| labels[n.index])))
}

/// Class-and-difficulty tag. The discriminants fix the component order used by
/// the prior, the classifier and every export: `M, M*, m, m*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PseudoLabel {
    EasyMajor = 0,
    HardMajor = 1,
    EasyMinor = 2,
    HardMinor = 3,
}

impl PseudoLabel {
    pub const ALL: [PseudoLabel; 4] = [
        PseudoLabel::EasyMajor,
        PseudoLabel::HardMajor,
        PseudoLabel::EasyMinor,
        PseudoLabel::HardMinor,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn class(self) -> Label {
        match self {
            PseudoLabel::EasyMajor | PseudoLabel::HardMajor => Label::Major,
            PseudoLabel::EasyMinor | PseudoLabel::HardMinor => Label::Minor,
        }
    }

    pub fn is_hard(self) -> bool {
        matches!(self, PseudoLabel::HardMajor | PseudoLabel::HardMinor)
    }

    /// The relabeling map: starred when the KNN prediction disagrees with `y`.
    pub fn from_vote(y: Label, predicted: Label) -> Self {
        match (y, predicted == y) {
            (Label::Major, true) => PseudoLabel::EasyMajor,
            (Label::Major, false) => PseudoLabel::HardMajor,
            (Label::Minor, true) => PseudoLabel::EasyMinor,
            (Label::Minor, false) => PseudoLabel::HardMinor,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PseudoLabel::EasyMajor => "M",
            PseudoLabel::HardMajor => "M*",
            PseudoLabel::EasyMinor => "m",
            PseudoLabel::HardMinor => "m*",
        }
    }
}

impl fmt::Display for PseudoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PseudoLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown pseudo label `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct PseudoLabeledDataset {
    pub base: LabeledDataset,
    pub pseudo_labels: Vec<PseudoLabel>,
    /// Row indices per pseudo label, in `PseudoLabel::ALL` order.
    pub groups: [Vec<usize>; 4],
}

impl PseudoLabeledDataset {
    pub fn from_parts(base: LabeledDataset, pseudo_labels: Vec<PseudoLabel>) -> Result<Self> {
        if pseudo_labels.len() != base.len() {
            return Err(Error::DimensionMismatch {
                expected: base.len(),
                got: pseudo_labels.len(),
            });
        }
        let mut groups: [Vec<usize>; 4] = Default::default();
        for (i, (p, y)) in pseudo_labels.iter().zip(&base.labels).enumerate() {
            if p.class() != *y {
                return Err(Error::invalid(format!(
                    "pseudo label {p} at row {i} disagrees with class {y}"
                )));
            }
            groups[p.index()].push(i);
        }
        Ok(Self {
            base,
            pseudo_labels,
            groups,
        })
    }

    pub fn group(&self, p: PseudoLabel) -> &[usize] {
        &self.groups[p.index()]
    }

    pub fn minor_indices(&self) -> Vec<usize> {
        let mut v = [self.group(PseudoLabel::EasyMinor), self.group(PseudoLabel::HardMinor)].concat();
        v.sort_unstable();
        v
    }

    pub fn major_count(&self) -> usize {
        self.group(PseudoLabel::EasyMajor).len() + self.group(PseudoLabel::HardMajor).len()
    }
}

/// Assigns difficulty pseudo-labels with a leave-one-out `k`-NN vote.
pub fn relabel(data: &LabeledDataset, k: usize) -> Result<PseudoLabeledDataset> {
    data.require_both_classes()?;
    if data.len() <= k {
        return Err(Error::TooFewRows {
            needed: k,
            have: data.len(),
        });
    }
    let index = NeighborIndex::new(&data.features);
    let pseudo = index
        .self_neighbors(k)?
        .into_iter()
        .enumerate()
        .map(|(i, ns)| {
            let predicted = majority_vote(ns.iter().map(|&j| data.labels[j]));
            PseudoLabel::from_vote(data.labels[i], predicted)
        })
        .collect();
    PseudoLabeledDataset::from_parts(data.clone(), pseudo)
}

/// Edited nearest neighbors: indices of rows whose leave-one-out `k`-NN vote
/// agrees with their own label.
pub fn enn_edit(features: &Matrix, labels: &[Label], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("ENN needs k >= 1"));
    }
    if features.rows() <= k {
        return Err(Error::TooFewRows {
            needed: k,
            have: features.rows(),
        });
    }
    let lists = NeighborIndex::new(features).self_neighbors(k)?;
    Ok(lists
        .into_iter()
        .enumerate()
        .filter(|(i, ns)| majority_vote(ns.iter().map(|&j| labels[j])) == labels[*i])
        .map(|(i, _)| i)
        .collect())
}

#[derive(Clone, Debug)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub centroids: Matrix,
    pub iterations: usize,
}

pub const KMEANS_MAX_ITER: usize = 300;

/// Lloyd's k-means with k-means++ seeding. Empty clusters are reseeded to the
/// point farthest from its current centroid.
pub fn kmeans(points: &Matrix, k: usize, rng: RngStream) -> Result<Clustering> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "k-means needs 1 <= k <= rows, got k = {k}, rows = {n}"
        )));
    }
    let d = points.cols();
    let mut r = rng.rng();

    // k-means++ seeding
    let mut centroids = Matrix::zeros(0, d);
    let first = r.index(n);
    centroids.push_row(points.row(first))?;
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(first)))
        .collect();
    while centroids.rows() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            r.categorical(&nearest)
        } else {
            // all remaining points coincide with a centroid
            (0..n).find(|&i| nearest[i] == 0.0 && i != first).unwrap_or(0)
        };
        centroids.push_row(points.row(next))?;
        let c = centroids.rows() - 1;
        for i in 0..n {
            nearest[i] = nearest[i].min(squared_distance(points.row(i), centroids.row(c)));
        }
    }

    let assign = |centroids: &Matrix| -> Vec<usize> {
        (0..n)
            .map(|i| {
                let p = points.row(i);
                (0..k)
                    .min_by(|&a, &b| {
                        squared_distance(p, centroids.row(a))
                            .total_cmp(&squared_distance(p, centroids.row(b)))
                            .then(a.cmp(&b))
                    })
                    .unwrap_or(0)
            })
            .collect()
    };

    let mut assignment = assign(&centroids);
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignment[i]] += 1;
            for (s, v) in sums.row_mut(assignment[i]).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let cnt = counts[c] as f64;
                let row = sums.row(c).iter().map(|s| s / cnt).collect::<Vec<_>>();
                centroids.row_mut(c).copy_from_slice(&row);
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = squared_distance(points.row(a), centroids.row(assignment[a]));
                        let db = squared_distance(points.row(b), centroids.row(assignment[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                let p = points.row(far).to_vec();
                centroids.row_mut(c).copy_from_slice(&p);
                counts[assignment[far]] -= 1;
                counts[c] = 1;
                assignment[far] = c;
            }
        }
        let next = assign(&centroids);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Ok(Clustering {
        assignment,
        centroids,
        iterations,
    })
}
