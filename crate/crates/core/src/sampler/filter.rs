use crate::data::{squared_distance, Label, Matrix};
use crate::error::{Error, Result};
use crate::kde::{filter_points, retain_above, KdeModel};
use crate::neighbors::PseudoLabel;

/// Retained fraction used when a single pooled KDE replaces the per-group
/// filter (40% of the minority removed).
pub const POOLED_RETAIN: f64 = 0.6;

/// Retained fraction of the pooled-density baseline filter.
pub const DDHS_RETAIN: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig {
    /// Retained fraction of easy minors.
    pub q_easy: f64,
    /// Retained fraction of hard minors.
    pub q_hard: f64,
    /// Per-group KDEs when set, otherwise one KDE over all minors.
    pub adaptive: bool,
    /// Retained fraction for the pooled filter.
    pub q_pooled: f64,
    /// Raw density cut-offs that override the fractions.
    pub tau_easy: Option<f64>,
    pub tau_hard: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            q_easy: 0.9,
            q_hard: 0.6,
            adaptive: true,
            q_pooled: POOLED_RETAIN,
            tau_easy: None,
            tau_hard: None,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, q) in [
            ("q-easy", self.q_easy),
            ("q-hard", self.q_hard),
            ("pooled fraction", self.q_pooled),
        ] {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::invalid(format!("{name} must be in (0, 1], got {q}")));
            }
        }
        Ok(())
    }
}

/// One minor row's fate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterEntry {
    /// Row in the dataset the filter was run on.
    pub index: usize,
    pub group: PseudoLabel,
    /// KDE density of the row's embedding within its group (or pooled).
    pub density: f64,
    pub kept: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterReport {
    pub entries: Vec<FilterEntry>,
    /// Thresholds for easy and hard groups; equal when pooled.
    pub thresholds: [f64; 2],
}

impl FilterReport {
    /// Kept rows in ascending order.
    pub fn retained(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.entries.iter().filter(|e| e.kept).map(|e| e.index).collect();
        r.sort_unstable();
        r
    }

    /// `(kept, total)` for a group.
    pub fn group_counts(&self, group: PseudoLabel) -> (usize, usize) {
        let members = self.entries.iter().filter(|e| e.group == group);
        let total = members.clone().count();
        (members.filter(|e| e.kept).count(), total)
    }

    pub fn entry(&self, index: usize) -> Option<&FilterEntry> {
        self.entries.iter().find(|e| e.index == index)
    }
}

fn cut(z: &Matrix, q: f64, tau: Option<f64>) -> Result<(Vec<usize>, Vec<f64>, f64)> {
    match tau {
        Some(t) if z.rows() >= 2 => {
            let d = KdeModel::fit(z)?.densities(z);
            Ok((retain_above(&d, t), d, t))
        }
        _ => {
            let c = filter_points(z, q)?;
            Ok((c.retained, c.densities, c.threshold))
        }
    }
}

/// Density filtering of minor embeddings.
///
/// `z` holds one embedding per entry of `rows`; `groups` gives each row's
/// pseudo label (easy or hard minor).
pub fn group_adaptive_filter(
    z: &Matrix,
    rows: &[usize],
    groups: &[PseudoLabel],
    config: &FilterConfig,
) -> Result<FilterReport> {
    config.validate()?;
    if z.is_empty() {
        return Err(Error::Empty("minor embeddings"));
    }
    if rows.len() != z.rows() || groups.len() != z.rows() {
        return Err(Error::DimensionMismatch {
            expected: z.rows(),
            got: rows.len().min(groups.len()),
        });
    }
    if groups.iter().any(|g| g.class() != Label::Minor) {
        return Err(Error::invalid("filter input must contain minor rows only"));
    }
    let mut entries: Vec<FilterEntry> = rows
        .iter()
        .zip(groups)
        .map(|(&index, &group)| FilterEntry {
            index,
            group,
            density: f64::NAN,
            kept: false,
        })
        .collect();
    let mut thresholds = [f64::NEG_INFINITY; 2];

    if !config.adaptive {
        let (kept, dens, tau) = cut(z, config.q_pooled, None)?;
        for (e, d) in entries.iter_mut().zip(dens) {
            e.density = d;
        }
        for i in kept {
            entries[i].kept = true;
        }
        return Ok(FilterReport {
            entries,
            thresholds: [tau, tau],
        });
    }

    let plan = [
        (PseudoLabel::EasyMinor, config.q_easy, config.tau_easy),
        (PseudoLabel::HardMinor, config.q_hard, config.tau_hard),
    ];
    for (slot, (group, q, tau)) in plan.into_iter().enumerate() {
        let members: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] == group).collect();
        if members.is_empty() {
            continue;
        }
        let (kept, dens, t) = cut(&z.select_rows(&members), q, tau)?;
        thresholds[slot] = t;
        for (&m, d) in members.iter().zip(dens) {
            entries[m].density = d;
        }
        for k in kept {
            entries[members[k]].kept = true;
        }
    }
    Ok(FilterReport { entries, thresholds })
}

/// Keeps minor rows that sit closer to the minor latent centroid than to the
/// major one (strictly). Returns dataset row indices.
pub fn dfbs_filter(z: &Matrix, labels: &[Label]) -> Result<Vec<usize>> {
    if labels.len() != z.rows() {
        return Err(Error::DimensionMismatch {
            expected: z.rows(),
            got: labels.len(),
        });
    }
    let centroid = |label: Label| -> Result<Vec<f64>> {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if idx.is_empty() {
            return Err(Error::SingleClass(format!("no {label} rows in the embedding")));
        }
        Ok(z.select_rows(&idx).column_means())
    };
    let (major, minor) = (centroid(Label::Major)?, centroid(Label::Minor)?);
    Ok((0..labels.len())
        .filter(|&i| {
            labels[i] == Label::Minor && squared_distance(z.row(i), &major) > squared_distance(z.row(i), &minor)
        })
        .collect())
}

/// Pooled-KDE filter over all minor embeddings: the top `retain` fraction by
/// density survives. Returned indices are positions within `z`.
pub fn ddhs_filter(z: &Matrix, retain: f64) -> Result<Vec<usize>> {
    if z.rows() < 2 {
        return Err(Error::InsufficientMinority(z.rows()));
    }
    Ok(filter_points(z, retain)?.retained)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn blob(n: usize, seed: u64) -> Matrix {
        let mut r = RngStream::new(seed, 0).rng();
        let rows: Vec<[f64; 2]> = (0..n).map(|_| [r.normal(), r.normal()]).collect();
        Matrix::from_rows(&rows, 2).unwrap()
    }

    #[test]
    fn keep_everything() {
        let z = blob(30, 1);
        let groups: Vec<PseudoLabel> = (0..30)
            .map(|i| {
                if i % 3 == 0 {
                    PseudoLabel::HardMinor
                } else {
                    PseudoLabel::EasyMinor
                }
            })
            .collect();
        let cfg = FilterConfig {
            q_easy: 1.0,
            q_hard: 1.0,
            ..FilterConfig::default()
        };
        let rows: Vec<usize> = (100..130).collect();
        let rep = group_adaptive_filter(&z, &rows, &groups, &cfg).unwrap();
        assert_eq!(rep.retained(), rows);
    }

    #[test]
    fn single_group_drops_lowest_tenth() {
        let z = blob(40, 2);
        let groups = vec![PseudoLabel::EasyMinor; 40];
        let rows: Vec<usize> = (0..40).collect();
        let rep = group_adaptive_filter(&z, &rows, &groups, &FilterConfig::default()).unwrap();
        assert_eq!(rep.group_counts(PseudoLabel::EasyMinor), (36, 40));
        assert_eq!(rep.group_counts(PseudoLabel::HardMinor), (0, 0));
        let min_kept = rep
            .entries
            .iter()
            .filter(|e| e.kept)
            .map(|e| e.density)
            .fold(f64::INFINITY, f64::min);
        let max_dropped = rep
            .entries
            .iter()
            .filter(|e| !e.kept)
            .map(|e| e.density)
            .fold(0.0, f64::max);
        assert!(min_kept > max_dropped);
    }

    #[test]
    fn rejects_major_rows() {
        let z = blob(4, 3);
        let groups = vec![PseudoLabel::EasyMajor; 4];
        assert!(group_adaptive_filter(&z, &[0, 1, 2, 3], &groups, &FilterConfig::default()).is_err());
    }

    #[test]
    fn dfbs_boundary_is_strict() {
        let z = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [1.0, 0.0], [2.0, 0.1], [0.0, 0.1]], 2).unwrap();
        // majors: rows 0 and 4 -> centroid (0, 0.05); minors: 1, 2, 3 -> centroid (5/3, 1/30)
        let labels = [Label::Major, Label::Minor, Label::Minor, Label::Minor, Label::Major];
        let kept = dfbs_filter(&z, &labels).unwrap();
        assert_eq!(kept, vec![1, 2, 3]);
        let sym = Matrix::from_rows(&[[-1.0], [1.0], [0.0], [2.0], [-2.0]], 1).unwrap();
        let labels = [Label::Major, Label::Minor, Label::Minor, Label::Minor, Label::Major];
        // minor centroid 1, major centroid -1.5: point 0.0 is closer to the minor side
        assert_eq!(dfbs_filter(&sym, &labels).unwrap(), vec![1, 2, 3]);
        // minor centroid 1, major centroid -1: the minor at 0 is equidistant
        let eq = Matrix::from_rows(&[[-1.0], [0.0], [2.0]], 1).unwrap();
        assert_eq!(
            dfbs_filter(&eq, &[Label::Major, Label::Minor, Label::Minor]).unwrap(),
            vec![2]
        );
    }

    #[test]
    fn ddhs_drops_outlier() {
        let z = Matrix::from_rows(&[[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [9.0, 9.0]], 2).unwrap();
        assert_eq!(ddhs_filter(&z, 0.75).unwrap(), vec![0, 1, 2]);
        assert_eq!(ddhs_filter(&z, 1.0).unwrap().len(), 4);
    }
}
