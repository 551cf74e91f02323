use crate::data::{Label, LabeledDataset, Matrix};
use crate::error::{Error, Result};
use crate::neighbors::{enn_edit, kmeans, NeighborIndex};
use crate::rng::RngStream;

/// `x_i + u (x_nn - x_i)`.
pub fn smote_interpolate(x_i: &[f64], x_nn: &[f64], u: f64) -> Result<Vec<f64>> {
    if x_i.len() != x_nn.len() {
        return Err(Error::DimensionMismatch {
            expected: x_i.len(),
            got: x_nn.len(),
        });
    }
    Ok(x_i.iter().zip(x_nn).map(|(a, b)| a + u * (b - a)).collect())
}

/// Where one synthetic row came from: the seed and neighbor rows of the
/// candidate pool and the interpolation weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interpolation {
    pub pool: usize,
    pub seed: usize,
    pub neighbor: usize,
    pub u: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoteDraws {
    pub points: Matrix,
    /// Indices refer to rows of the candidate matrix passed in.
    pub sources: Vec<Interpolation>,
}

impl SmoteDraws {
    fn empty(cols: usize) -> Self {
        Self {
            points: Matrix::zeros(0, cols),
            sources: vec![],
        }
    }
}

/// Neighbor count actually used for a pool of `m` candidates.
pub fn effective_k(k_s: usize, m: usize) -> usize {
    k_s.min(m.saturating_sub(1))
}

/// Plain SMOTE over `candidates`: every candidate may seed.
pub fn smote(candidates: &Matrix, target: usize, k_s: usize, rng: RngStream) -> Result<SmoteDraws> {
    let seeds: Vec<usize> = (0..candidates.rows()).collect();
    smote_from_seeds(candidates, &seeds, target, k_s, rng)
}

/// SMOTE where only `seeds` start an interpolation; neighbors are searched
/// among all `candidates`.
pub fn smote_from_seeds(
    candidates: &Matrix,
    seeds: &[usize],
    target: usize,
    k_s: usize,
    rng: RngStream,
) -> Result<SmoteDraws> {
    if target == 0 {
        return Ok(SmoteDraws::empty(candidates.cols()));
    }
    if k_s == 0 {
        return Err(Error::invalid("SMOTE needs k >= 1"));
    }
    if candidates.rows() < 2 {
        return Err(Error::InsufficientMinority(candidates.rows()));
    }
    if seeds.is_empty() {
        return Err(Error::Empty("SMOTE seed set"));
    }
    let k = effective_k(k_s, candidates.rows());
    let index = NeighborIndex::new(candidates);
    let lists: Vec<Vec<usize>> = seeds
        .iter()
        .map(|&s| {
            index
                .query(candidates.row(s), k, Some(s))
                .map(|ns| ns.into_iter().map(|n| n.index).collect())
        })
        .collect::<Result<_>>()?;
    let mut r = rng.rng();
    let mut points = Matrix::zeros(0, candidates.cols());
    let mut sources = Vec::with_capacity(target);
    for _ in 0..target {
        let which = r.index(seeds.len());
        let seed = seeds[which];
        let neighbor = lists[which][r.index(k)];
        let u = r.unit();
        points.push_row(&smote_interpolate(candidates.row(seed), candidates.row(neighbor), u)?)?;
        sources.push(Interpolation {
            pool: 0,
            seed,
            neighbor,
            u,
        });
    }
    Ok(SmoteDraws { points, sources })
}

/// Borderline-1 danger set: minors whose leave-one-out `k` neighbors hold
/// `m'` majors with `k/2 <= m' < k`.
pub fn borderline_select(data: &LabeledDataset, k: usize) -> Result<Vec<usize>> {
    data.require_both_classes()?;
    if k == 0 {
        return Err(Error::invalid("borderline selection needs k >= 1"));
    }
    if data.len() <= k {
        return Err(Error::TooFewRows {
            needed: k,
            have: data.len(),
        });
    }
    let index = NeighborIndex::new(&data.features);
    let mut danger = vec![];
    for i in data.indices_of(Label::Minor) {
        let ns = index.query(data.features.row(i), k, Some(i))?;
        let majors = ns.iter().filter(|n| data.labels[n.index] == Label::Major).count();
        if 2 * majors >= k && majors < k {
            danger.push(i);
        }
    }
    Ok(danger)
}

/// Per-cluster SMOTE over clusters whose minority fraction exceeds
/// `threshold`. Indices in the returned sources refer to dataset rows, and
/// `pool` is the cluster id.
#[derive(Clone, Debug, PartialEq)]
pub struct KmSmoteDraws {
    pub draws: SmoteDraws,
    pub assignment: Vec<usize>,
    pub eligible: Vec<usize>,
}

/// Splits `total` across `weights` in proportion, handing remainders to the
/// largest fractional parts (lower index first on ties).
pub fn proportional_allocation(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut alloc: Vec<usize> = weights.iter().map(|&w| total * w / sum).collect();
    let mut rest: Vec<(usize, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| ((total * w) % sum, i))
        .collect();
    rest.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let missing = total - alloc.iter().sum::<usize>();
    for &(_, i) in rest.iter().take(missing) {
        alloc[i] += 1;
    }
    alloc
}

pub fn kmsmote(
    data: &LabeledDataset,
    k_clusters: usize,
    threshold: f64,
    target: usize,
    k_s: usize,
    rng: RngStream,
) -> Result<KmSmoteDraws> {
    data.require_both_classes()?;
    let k = k_clusters.min(data.len());
    let clustering = kmeans(&data.features, k, rng.named("kmeans"))?;
    let mut minors: Vec<Vec<usize>> = vec![vec![]; k];
    let mut sizes = vec![0usize; k];
    for (i, &c) in clustering.assignment.iter().enumerate() {
        sizes[c] += 1;
        if data.labels[i] == Label::Minor {
            minors[c].push(i);
        }
    }
    let eligible: Vec<usize> = (0..k)
        .filter(|&c| minors[c].len() >= 2 && minors[c].len() as f64 / sizes[c] as f64 > threshold)
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleCluster { threshold });
    }
    let budget = proportional_allocation(target, &eligible.iter().map(|&c| minors[c].len()).collect::<Vec<_>>());
    let mut draws = SmoteDraws::empty(data.dim());
    for (slot, &c) in eligible.iter().enumerate() {
        let pool = data.features.select_rows(&minors[c]);
        let part = smote(&pool, budget[slot], k_s, rng.substream(c as u64))?;
        for (row, src) in part.points.iter_rows().zip(part.sources) {
            draws.points.push_row(row)?;
            draws.sources.push(Interpolation {
                pool: c,
                seed: minors[c][src.seed],
                neighbor: minors[c][src.neighbor],
                u: src.u,
            });
        }
    }
    Ok(KmSmoteDraws {
        draws,
        assignment: clustering.assignment,
        eligible,
    })
}

/// Indices (into `combined`) that survive ENN editing of the SMOTE-augmented set.
pub fn enn_retain(combined: &LabeledDataset, k_enn: usize) -> Result<Vec<usize>> {
    enn_edit(&combined.features, &combined.labels, k_enn)
}
