//! Two-cluster minority benchmark with uniform majority and label-swap noise.

use std::fmt;

use crate::data::{Label, LabeledDataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const POSITIVE_TOKEN: &str = "positive";
pub const NEGATIVE_TOKEN: &str = "negative";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    G1,
    G2,
    Major,
    Noise,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::G1 => "G1",
            Origin::G2 => "G2",
            Origin::Major => "major",
            Origin::Noise => "noise",
        }
    }
}

impl std::str::FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "G1" => Ok(Origin::G1),
            "G2" => Ok(Origin::G2),
            "major" => Ok(Origin::Major),
            "noise" => Ok(Origin::Noise),
            other => Err(Error::invalid(format!("unknown origin `{other}`"))),
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimSpec {
    pub n_g1: usize,
    pub n_g2: usize,
    pub n_major: usize,
    pub n_noise: usize,
    pub g1_mean: [f64; 2],
    pub g2_mean: [f64; 2],
    pub cluster_variance: f64,
    /// Half-width of the square majority support.
    pub major_half_width: f64,
    /// Draw noise as fresh uniform points instead of relabeling majors.
    pub fresh_noise: bool,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            n_g1: 80,
            n_g2: 20,
            n_major: 1500,
            n_noise: 50,
            g1_mean: [-0.3, 0.0],
            g2_mean: [0.3, 0.0],
            cluster_variance: 0.01,
            major_half_width: 1.0,
            fresh_noise: false,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.fresh_noise && self.n_noise > self.n_major {
            return Err(Error::invalid(format!(
                "n-noise ({}) cannot exceed n-major ({})",
                self.n_noise, self.n_major
            )));
        }
        if !(self.cluster_variance >= 0.0 && self.cluster_variance.is_finite()) {
            return Err(Error::invalid("cluster variance must be non-negative"));
        }
        if !(self.major_half_width > 0.0 && self.major_half_width.is_finite()) {
            return Err(Error::invalid("majority support must have positive width"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Simulated {
    pub data: LabeledDataset,
    /// Ground truth per row. For evaluation only.
    pub origin: Vec<Origin>,
}

impl Simulated {
    pub fn rows_of(&self, origin: Origin) -> Vec<usize> {
        (0..self.origin.len()).filter(|&i| self.origin[i] == origin).collect()
    }
}

/// How a minority filter treated each kind of simulated minor row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseRejection {
    /// Fraction of noise rows the filter dropped.
    pub noise_excluded: f64,
    pub g1_retained: f64,
    pub g2_retained: f64,
}

impl NoiseRejection {
    /// `kept(i)` reports whether minor row `i` survived; rows it returns
    /// `None` for are counted as dropped.
    pub fn measure(origin: &[Origin], kept: impl Fn(usize) -> Option<bool>) -> Self {
        let rate = |o: Origin, want: bool| {
            let rows: Vec<usize> = (0..origin.len()).filter(|&i| origin[i] == o).collect();
            if rows.is_empty() {
                return f64::NAN;
            }
            let hits = rows.iter().filter(|&&i| kept(i).unwrap_or(false) == want).count();
            hits as f64 / rows.len() as f64
        };
        Self {
            noise_excluded: rate(Origin::Noise, false),
            g1_retained: rate(Origin::G1, true),
            g2_retained: rate(Origin::G2, true),
        }
    }
}

/// Rows are laid out G1, G2, majors, noise.
pub fn generate(spec: &SimSpec, rng: RngStream) -> Result<Simulated> {
    spec.validate()?;
    let sd = spec.cluster_variance.sqrt();
    let mut rows: Vec<[f64; 2]> = vec![];
    let mut origin = vec![];
    let mut r = rng.named("clusters").rng();
    for (n, mean, tag) in [
        (spec.n_g1, spec.g1_mean, Origin::G1),
        (spec.n_g2, spec.g2_mean, Origin::G2),
    ] {
        for _ in 0..n {
            rows.push([mean[0] + sd * r.normal(), mean[1] + sd * r.normal()]);
            origin.push(tag);
        }
    }
    let w = spec.major_half_width;
    let mut r = rng.named("majors").rng();
    let mut uniform = || [w * (2.0 * r.unit() - 1.0), w * (2.0 * r.unit() - 1.0)];
    let majors: Vec<[f64; 2]> = (0..spec.n_major).map(|_| uniform()).collect();
    let noise: Vec<[f64; 2]> = if spec.fresh_noise {
        (0..spec.n_noise).map(|_| uniform()).collect()
    } else {
        let mut r = rng.named("noise").rng();
        let mut idx: Vec<usize> = (0..spec.n_major).collect();
        r.shuffle(&mut idx);
        let mut picked = idx[..spec.n_noise].to_vec();
        picked.sort_unstable();
        let noise = picked.iter().map(|&i| majors[i]).collect();
        let mut keep = vec![true; spec.n_major];
        picked.iter().for_each(|&i| keep[i] = false);
        rows.extend(majors.iter().zip(&keep).filter(|(_, &k)| k).map(|(m, _)| *m));
        origin.extend(std::iter::repeat_n(Origin::Major, spec.n_major - spec.n_noise));
        noise
    };
    if spec.fresh_noise {
        rows.extend(&majors);
        origin.extend(std::iter::repeat_n(Origin::Major, spec.n_major));
    }
    rows.extend(&noise);
    origin.extend(std::iter::repeat_n(Origin::Noise, noise.len()));
    let labels = origin
        .iter()
        .map(|o| {
            if *o == Origin::Major {
                Label::Major
            } else {
                Label::Minor
            }
        })
        .collect();
    let features = if rows.is_empty() {
        Matrix::zeros(0, 2)
    } else {
        Matrix::from_rows(&rows, 2)?
    };
    let mut data = LabeledDataset::new(features, labels)?;
    data.schema.feature_names = vec!["x1".into(), "x2".into()];
    // same tokens as the bundled real datasets, so files load with default flags
    data.schema.positive_token = POSITIVE_TOKEN.into();
    data.tokens = data
        .labels
        .iter()
        .map(|&l| {
            if l == Label::Minor {
                POSITIVE_TOKEN
            } else {
                NEGATIVE_TOKEN
            }
            .to_string()
        })
        .collect();
    Ok(Simulated { data, origin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let s = generate(&SimSpec::default(), RngStream::new(1, 0)).unwrap();
        assert_eq!(s.data.len(), 1600);
        assert_eq!(s.data.count(Label::Minor), 150);
        assert_eq!(s.data.count(Label::Major), 1450);
        assert_eq!(s.rows_of(Origin::Noise).len(), 50);
        for i in s.rows_of(Origin::Noise) {
            assert!(s.data.features.row(i).iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn noise_is_removed_from_majors() {
        let spec = SimSpec::default();
        let a = generate(&spec, RngStream::new(4, 0)).unwrap();
        let fresh = generate(
            &SimSpec {
                fresh_noise: true,
                ..spec
            },
            RngStream::new(4, 0),
        )
        .unwrap();
        assert_eq!(fresh.data.count(Label::Major), 1500);
        // relabeled rows are copies of majority draws that no longer appear as majors
        let majors_fresh: Vec<&[f64]> = fresh
            .rows_of(Origin::Major)
            .iter()
            .map(|&i| fresh.data.features.row(i))
            .collect();
        for i in a.rows_of(Origin::Noise) {
            let p = a.data.features.row(i);
            assert!(majors_fresh.contains(&p));
            assert!(!a.rows_of(Origin::Major).iter().any(|&j| a.data.features.row(j) == p));
        }
    }

    #[test]
    fn zero_noise_minors_are_the_clusters() {
        let s = generate(
            &SimSpec {
                n_noise: 0,
                ..SimSpec::default()
            },
            RngStream::new(2, 0),
        )
        .unwrap();
        let minors = s.data.indices_of(Label::Minor);
        assert_eq!(minors.len(), 100);
        assert!(minors.iter().all(|&i| matches!(s.origin[i], Origin::G1 | Origin::G2)));
    }

    #[test]
    fn rejects_excess_noise() {
        let spec = SimSpec {
            n_noise: 2000,
            ..SimSpec::default()
        };
        assert!(generate(&spec, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn cluster_moments() {
        let spec = SimSpec {
            n_g1: 10_000,
            n_g2: 0,
            n_major: 10,
            n_noise: 0,
            ..SimSpec::default()
        };
        let s = generate(&spec, RngStream::new(3, 0)).unwrap();
        let g1 = s.data.features.select_rows(&s.rows_of(Origin::G1));
        let m = g1.column_means();
        let tol = 3.0 * 0.1 / 100.0;
        assert!((m[0] + 0.3).abs() < tol && m[1].abs() < tol, "{m:?}");
    }
}
