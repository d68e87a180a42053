//! Searches over finished sweeps: where benefit changes sign along the
//! degree axis, and the smallest participant fraction that still pays.

use super::{run_sweep, Locality, SweepError, SweepRow, SweepSpec, SweepTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing {
    /// Degree where the interpolated benefit reaches zero.
    At(f64),
    NoCrossing {
        positive_everywhere: bool,
    },
}

impl Crossing {
    /// Crossing degree, with +inf when benefit never drops to zero and -inf
    /// when it is never positive before dropping.
    pub fn as_degree(&self) -> f64 {
        match *self {
            Crossing::At(d) => d,
            Crossing::NoCrossing {
                positive_everywhere: true,
            } => f64::INFINITY,
            Crossing::NoCrossing {
                positive_everywhere: false,
            } => f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub alpha: f64,
    pub crossing: Crossing,
}

/// Groups mean rows by alpha while keeping first-seen order.
fn group_by<'a, K: PartialEq + Copy>(
    rows: impl Iterator<Item = &'a SweepRow>,
    key: impl Fn(&SweepRow) -> K,
) -> Vec<(K, Vec<&'a SweepRow>)> {
    let mut groups: Vec<(K, Vec<&SweepRow>)> = Vec::new();
    for row in rows {
        let k = key(row);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(row),
            None => groups.push((k, vec![row])),
        }
    }
    groups
}

/// First positive-to-nonpositive change of mean benefit along increasing
/// degree, linearly interpolated, for each alpha in the table.
pub fn empirical_boundary(table: &SweepTable) -> Result<Vec<BoundaryPoint>, SweepError> {
    let mut out = Vec::new();
    for (alpha, rows) in group_by(table.means(), |r| r.alpha) {
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.benefit().map(|b| (r.degree(), b)))
            .collect();
        if pts.len() < 2 {
            return Err(SweepError::TooFewPoints {
                alpha,
                points: pts.len(),
            });
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let crossing = pts
            .windows(2)
            .find(|w| w[0].1 > 0.0 && w[1].1 <= 0.0)
            .map(|w| {
                let ((d0, b0), (d1, b1)) = (w[0], w[1]);
                Crossing::At(d0 + (d1 - d0) * b0 / (b0 - b1))
            })
            .unwrap_or(Crossing::NoCrossing {
                positive_everywhere: pts.iter().all(|p| p.1 > 0.0),
            });
        out.push(BoundaryPoint { alpha, crossing });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinAlphaPoint {
    pub locality: Locality,
    pub workers: u32,
    pub degree: f64,
    /// Smallest grid alpha whose mean benefit exceeds two standard errors.
    pub alpha_min: Option<f64>,
}

pub fn min_alpha_from_table(table: &SweepTable) -> Vec<MinAlphaPoint> {
    group_by(table.means(), |r| (r.locality, r.market.workers()))
        .into_iter()
        .map(|((locality, workers), rows)| {
            let alpha_min = rows
                .iter()
                .filter(|r| {
                    r.benefit()
                        .is_some_and(|b| b > 2.0 * r.stderr_benefit.unwrap_or(0.0))
                })
                .map(|r| r.alpha)
                .min_by(f64::total_cmp);
            MinAlphaPoint {
                locality,
                workers,
                degree: rows[0].market.degree(),
                alpha_min,
            }
        })
        .collect()
}

pub fn min_alpha_for_benefit(spec: &SweepSpec) -> Result<Vec<MinAlphaPoint>, SweepError> {
    Ok(min_alpha_from_table(&run_sweep(spec)?))
}
