//! Product-Gaussian kernel density estimation with Scott's-rule bandwidths.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::data::Matrix;
use crate::error::{Error, Result};

pub const BANDWIDTH_FLOOR: f64 = 1e-6;

/// `b_j = sd_j * m^(-1 / (h + 4))` with the unbiased sample deviation,
/// floored at [`BANDWIDTH_FLOOR`].
pub fn scott_bandwidth(points: &Matrix) -> Result<Vec<f64>> {
    let m = points.rows();
    if m < 2 {
        return Err(Error::TooFewRows { needed: 1, have: m });
    }
    let h = points.cols();
    let factor = (m as f64).powf(-1.0 / (h as f64 + 4.0));
    let means = points.column_means();
    let mut ss = vec![0.0; h];
    for row in points.iter_rows() {
        for j in 0..h {
            let d = row[j] - means[j];
            ss[j] += d * d;
        }
    }
    Ok(ss
        .iter()
        .map(|s| ((s / (m - 1) as f64).sqrt() * factor).max(BANDWIDTH_FLOOR))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct KdeModel {
    support: Matrix,
    bandwidth: Vec<f64>,
}

impl KdeModel {
    pub fn fit(points: &Matrix) -> Result<Self> {
        let bandwidth = scott_bandwidth(points)?;
        Self::with_bandwidth(points.clone(), bandwidth)
    }

    pub fn with_bandwidth(support: Matrix, bandwidth: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Empty("kde support"));
        }
        if bandwidth.len() != support.cols() {
            return Err(Error::DimensionMismatch {
                expected: support.cols(),
                got: bandwidth.len(),
            });
        }
        if bandwidth.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::invalid("bandwidths must be positive and finite"));
        }
        let bandwidth = bandwidth.into_iter().map(|b| b.max(BANDWIDTH_FLOOR)).collect();
        Ok(Self { support, bandwidth })
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn support(&self) -> &Matrix {
        &self.support
    }

    /// Mean of product kernels centred on every support point. Evaluated as
    /// `exp(log_norm - max) * sum exp(e_i - max)` so far-away queries
    /// underflow gracefully instead of summing zeros of different scale.
    pub fn density_at(&self, z: &[f64]) -> f64 {
        self.log_density_at(z).exp()
    }

    pub fn log_density_at(&self, z: &[f64]) -> f64 {
        let log_norm: f64 = self
            .bandwidth
            .iter()
            .map(|b| -0.5 * (2.0 * PI * b * b).ln())
            .sum::<f64>()
            - (self.support.rows() as f64).ln();
        let exponents: Vec<f64> = self
            .support
            .iter_rows()
            .map(|s| {
                -0.5 * s
                    .iter()
                    .zip(z)
                    .zip(&self.bandwidth)
                    .map(|((a, b), w)| ((b - a) / w).powi(2))
                    .sum::<f64>()
            })
            .collect();
        let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = exponents.iter().map(|e| (e - max).exp()).sum();
        log_norm + max + sum.ln()
    }

    pub fn densities(&self, points: &Matrix) -> Vec<f64> {
        (0..points.rows())
            .into_par_iter()
            .map(|i| self.density_at(points.row(i)))
            .collect()
    }
}

/// Result of a quantile cut.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileCut {
    pub retained: Vec<usize>,
    /// `-inf` when nothing is filtered.
    pub threshold: f64,
    pub densities: Vec<f64>,
}

/// Lower-interpolated `p`-quantile of `values`.
pub fn lower_quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (p * (sorted.len() - 1) as f64).floor() as usize;
    sorted[pos.min(sorted.len() - 1)]
}

/// Keeps points whose density strictly exceeds the `(1 - q)`-quantile of the
/// densities. `q = 1` keeps everything.
pub fn retain_by_quantile(densities: &[f64], q: f64) -> Result<QuantileCut> {
    if densities.is_empty() {
        return Err(Error::Empty("density set"));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!("retain fraction must be in (0, 1], got {q}")));
    }
    if q == 1.0 {
        return Ok(QuantileCut {
            retained: (0..densities.len()).collect(),
            threshold: f64::NEG_INFINITY,
            densities: densities.to_vec(),
        });
    }
    let threshold = lower_quantile(densities, 1.0 - q);
    Ok(QuantileCut {
        retained: (0..densities.len()).filter(|&i| densities[i] > threshold).collect(),
        threshold,
        densities: densities.to_vec(),
    })
}

/// Fits a KDE on `points`, evaluates each point's own density and cuts.
/// A single point cannot define a bandwidth, so it is kept as-is.
pub fn filter_points(points: &Matrix, q: f64) -> Result<QuantileCut> {
    if points.rows() == 1 {
        return Ok(QuantileCut {
            retained: vec![0],
            threshold: f64::NEG_INFINITY,
            densities: vec![f64::NAN],
        });
    }
    let kde = KdeModel::fit(points)?;
    retain_by_quantile(&kde.densities(points), q)
}

/// Keeps points whose density strictly exceeds a raw threshold.
pub fn retain_above(densities: &[f64], threshold: f64) -> Vec<usize> {
    (0..densities.len()).filter(|&i| densities[i] > threshold).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn scott_factor() {
        let mut r = RngStream::new(1, 0).rng();
        let rows: Vec<[f64; 2]> = (0..100).map(|_| [r.normal(), r.normal()]).collect();
        let x = Matrix::from_rows(&rows, 2).unwrap();
        let b = scott_bandwidth(&x).unwrap();
        let f = 100f64.powf(-1.0 / 6.0);
        assert!((f - 0.46416).abs() < 1e-5);
        for j in 0..2 {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / 100.0;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
            assert!((b[j] - sd * f).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_dimension_floors() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]], 2).unwrap();
        assert_eq!(scott_bandwidth(&x).unwrap()[0], BANDWIDTH_FLOOR);
        assert!(scott_bandwidth(&Matrix::from_rows(&[[1.0]], 1).unwrap()).is_err());
    }

    #[test]
    fn kernel_peak_and_tail() {
        let k = KdeModel::with_bandwidth(Matrix::from_rows(&[[0.0]], 1).unwrap(), vec![1.0]).unwrap();
        assert!((k.density_at(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!(k.density_at(&[100.0]) < 1e-30);
    }

    #[test]
    fn matches_naive_sum() {
        let mut r = RngStream::new(3, 0).rng();
        let rows: Vec<[f64; 3]> = (0..40).map(|_| [r.normal(), r.normal(), 2.0 * r.normal()]).collect();
        let x = Matrix::from_rows(&rows, 3).unwrap();
        let k = KdeModel::fit(&x).unwrap();
        let b = k.bandwidth().to_vec();
        for _ in 0..20 {
            let q = [r.normal(), r.normal(), r.normal()];
            let mut naive = 0.0;
            for s in &rows {
                let mut prod = 1.0;
                for j in 0..3 {
                    prod *= (-(q[j] - s[j]).powi(2) / (2.0 * b[j] * b[j])).exp() / (2.0 * PI * b[j] * b[j]).sqrt();
                }
                naive += prod;
            }
            naive /= 40.0;
            assert!((k.density_at(&q) - naive).abs() < 1e-12 * naive.max(1e-300));
        }
    }

    #[test]
    fn quantile_drops_lowest() {
        let d: Vec<f64> = (1..=10).map(f64::from).collect();
        let cut = retain_by_quantile(&d, 0.9).unwrap();
        assert_eq!(cut.retained, (1..10).collect::<Vec<_>>());
        let all = retain_by_quantile(&d, 1.0).unwrap();
        assert_eq!(all.retained.len(), 10);
        assert_eq!(all.threshold, f64::NEG_INFINITY);
        assert!(retain_by_quantile(&d, 0.0).is_err());
        assert!(retain_by_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn retained_counts_follow_fraction() {
        let d: Vec<f64> = (0..57).map(|i| ((i * 37) % 57) as f64).collect();
        for q in [0.1, 0.25, 0.6, 0.75, 0.9] {
            let n = retain_by_quantile(&d, q).unwrap().retained.len();
            let target = q * 57.0;
            assert!(n as f64 == target.floor() || n as f64 == target.ceil(), "q={q} n={n}");
        }
    }
}
