use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How rows map onto prior components.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conditioning {
    /// Four components indexed by pseudo label (`M, M*, m, m*`).
    Difficulty,
    /// Two components indexed by class (`M`, `m`).
    Class,
}

impl Conditioning {
    pub fn components(self) -> usize {
        match self {
            Conditioning::Difficulty => 4,
            Conditioning::Class => 2,
        }
    }

    /// Component ids that belong to the minor class.
    pub fn minor_components(self) -> &'static [usize] {
        match self {
            Conditioning::Difficulty => &[2, 3],
            Conditioning::Class => &[1],
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Conditioning::Difficulty => 0,
            Conditioning::Class => 1,
        }
    }

    pub(crate) fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Conditioning::Difficulty),
            1 => Some(Conditioning::Class),
            _ => None,
        }
    }
}

/// Named prior layouts in two dimensions, listed in `M, M*, m, m*` order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PriorPreset {
    /// Easy/hard quadrants: M (-1, 1), M* (1, 1), m (1, -1), m* (-1, -1).
    #[default]
    Default,
    /// Within-class distances exceed between-class distances.
    WideWithinClass,
    /// x axis encodes difficulty, y axis encodes class.
    AxisAligned,
    /// Easy and hard samples of a class share one location.
    Collapsed,
}

impl PriorPreset {
    pub const ALL: [PriorPreset; 4] = [
        PriorPreset::Default,
        PriorPreset::WideWithinClass,
        PriorPreset::AxisAligned,
        PriorPreset::Collapsed,
    ];

    pub fn means_2d(self) -> [[f64; 2]; 4] {
        match self {
            PriorPreset::Default => [[-1.0, 1.0], [1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]],
            PriorPreset::WideWithinClass => [[-2.0, 1.0], [2.0, 1.0], [-2.0, -1.0], [2.0, -1.0]],
            PriorPreset::AxisAligned => [[-1.0, 1.0], [1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]],
            PriorPreset::Collapsed => [[-1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, -1.0]],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PriorPreset::Default => "default",
            PriorPreset::WideWithinClass => "wide",
            PriorPreset::AxisAligned => "axis-aligned",
            PriorPreset::Collapsed => "collapsed",
        }
    }
}

impl fmt::Display for PriorPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PriorPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(PriorPreset::Default),
            "wide" => Ok(PriorPreset::WideWithinClass),
            "axis-aligned" => Ok(PriorPreset::AxisAligned),
            "collapsed" => Ok(PriorPreset::Collapsed),
            other => Err(Error::invalid(format!(
                "unknown prior preset `{other}` (expected default, wide, axis-aligned or collapsed)"
            ))),
        }
    }
}

/// Component variance used by every disentangling prior.
pub const PRIOR_VARIANCE: f64 = 0.1;

/// Tiles a 2-D location across `h` coordinates: `(a, b, a, b, ...)`.
fn tile(mean: [f64; 2], h: usize) -> Vec<f64> {
    (0..h).map(|j| mean[j % 2]).collect()
}

/// Gaussian-mixture prior with isotropic components.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmPrior {
    pub means: Vec<Vec<f64>>,
    /// Shared per-component scalar variance `s_c^2`.
    pub variances: Vec<f64>,
    /// Mixture weights `p(c)`.
    pub weights: Vec<f64>,
}

impl GmmPrior {
    pub fn new(means: Vec<Vec<f64>>, variances: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let k = means.len();
        if k == 0 || variances.len() != k || weights.len() != k {
            return Err(Error::invalid(
                "prior needs matching, non-empty means, variances and weights",
            ));
        }
        let h = means[0].len();
        if h == 0 || means.iter().any(|m| m.len() != h) {
            return Err(Error::invalid("prior means must share one positive dimension"));
        }
        if variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("prior variances must be positive"));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("prior weights must form a simplex"));
        }
        Ok(Self {
            means,
            variances,
            weights,
        })
    }

    /// Four-component difficulty prior from a preset, variance 0.1.
    pub fn difficulty(preset: PriorPreset, h: usize, weights: Vec<f64>) -> Result<Self> {
        let means = preset.means_2d().iter().map(|&m| tile(m, h)).collect();
        Self::new(means, vec![PRIOR_VARIANCE; 4], weights)
    }

    /// Two-component class prior placing the major class at `(1, 1)` and the
    /// minor class at `(-1, -1)`.
    pub fn class_separated(h: usize, weights: Vec<f64>) -> Result<Self> {
        Self::new(
            vec![tile([1.0, 1.0], h), tile([-1.0, -1.0], h)],
            vec![PRIOR_VARIANCE; 2],
            weights,
        )
    }

    /// Two standard-normal components at the origin: class conditioning
    /// without any imposed separation.
    pub fn class_standard(h: usize, weights: Vec<f64>) -> Result<Self> {
        Self::new(vec![vec![0.0; h], vec![0.0; h]], vec![1.0; 2], weights)
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.means[0].len()
    }
}

/// Empirical frequencies of component ids `0..k`.
pub fn empirical_weights(ids: &[usize], k: usize) -> Vec<f64> {
    let mut w = vec![0.0; k];
    for &c in ids {
        w[c] += 1.0;
    }
    let n = ids.len().max(1) as f64;
    w.iter_mut().for_each(|v| *v /= n);
    w
}
