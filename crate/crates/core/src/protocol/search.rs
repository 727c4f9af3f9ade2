use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::robust::robust_cycle_outage;
use super::{ProtocolConfig, UncertaintyBudget};
use crate::error::{ensure, Result};

/// Bisection range for the SNR search, dB.
pub const SNR_RANGE_DB: (f64, f64) = (-10.0, 60.0);
const SNR_RESOLUTION_DB: f64 = 0.1;

/// Repetition counts to try.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub k1_max: usize,
    pub k2_max: usize,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self { k1_max: 8, k2_max: 8 }
    }
}

/// Outcome of a minimum-SNR search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "MinSnrRecord")]
pub enum MinSnr {
    Feasible {
        snr_db: f64,
        k1: usize,
        k2: usize,
        p_fail: f64,
    },
    Infeasible,
}

/// Flat JSON form: `{"feasible": false}` or the full solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinSnrRecord {
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_fail: Option<f64>,
}

impl From<MinSnr> for MinSnrRecord {
    fn from(m: MinSnr) -> Self {
        match m {
            MinSnr::Feasible { snr_db, k1, k2, p_fail } => Self {
                feasible: true,
                snr_db: Some(snr_db),
                k1: Some(k1),
                k2: Some(k2),
                p_fail: Some(p_fail),
            },
            MinSnr::Infeasible => Self {
                feasible: false,
                snr_db: None,
                k1: None,
                k2: None,
                p_fail: None,
            },
        }
    }
}

impl MinSnr {
    pub fn snr_db(&self) -> Option<f64> {
        match self {
            MinSnr::Feasible { snr_db, .. } => Some(*snr_db),
            MinSnr::Infeasible => None,
        }
    }
}

/// Smallest SNR, over repetition counts in `grid`, at which the robust cycle
/// outage meets `target`.
pub fn min_snr(template: &ProtocolConfig, budget: &UncertaintyBudget, target: f64, grid: SearchGrid) -> Result<MinSnr> {
    ensure(target > 0.0 && target < 1.0, "target", || format!("must lie in (0, 1), got {target}"))?;
    ensure(grid.k1_max >= 1 && grid.k2_max >= 1, "grid", || "repetition limits must be at least 1".into())?;
    template.validate()?;
    budget.validate()?;
    let points: Vec<(usize, usize)> = (1..=grid.k1_max)
        .flat_map(|k1| (1..=grid.k2_max).map(move |k2| (k1, k2)))
        .collect();
    let results = points
        .par_iter()
        .map(|&(k1, k2)| {
            let cfg = template.with_repetitions(k1, k2);
            let outage = |snr: f64| robust_cycle_outage(&cfg, snr, budget).map(|r| r.p_fail);
            let (lo, hi) = SNR_RANGE_DB;
            if outage(hi)? > target {
                return Ok(None);
            }
            let found = if outage(lo)? <= target {
                lo
            } else {
                let (mut lo, mut hi) = (lo, hi);
                while hi - lo > SNR_RESOLUTION_DB {
                    let mid = 0.5 * (lo + hi);
                    if outage(mid)? <= target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            };
            Ok(Some((found, k1, k2, outage(found)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = results.into_iter().flatten().min_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then((a.1 + a.2).cmp(&(b.1 + b.2)))
            .then(a.1.cmp(&b.1))
    });
    Ok(match best {
        Some((snr_db, k1, k2, p_fail)) => MinSnr::Feasible { snr_db, k1, k2, p_fail },
        None => MinSnr::Infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Scheme;

    #[test]
    fn ten_percent_slack_needs_fourteen_nodes() {
        let b = UncertaintyBudget::new(0.1, 0.0, 0.0);
        let grid = SearchGrid { k1_max: 2, k2_max: 2 };
        let r13 = min_snr(&ProtocolConfig::new(Scheme::OccupyCow, 13), &b, 1e-9, grid).unwrap();
        assert_eq!(r13, MinSnr::Infeasible);
        let r14 = min_snr(&ProtocolConfig::new(Scheme::OccupyCow, 14), &b, 1e-9, grid).unwrap();
        assert!(r14.snr_db().is_some());
    }

    #[test]
    fn no_budget_prefers_no_repetitions() {
        let r = min_snr(
            &ProtocolConfig::new(Scheme::OccupyCow, 20),
            &UncertaintyBudget::ZERO,
            1e-9,
            SearchGrid { k1_max: 3, k2_max: 3 },
        )
        .unwrap();
        match r {
            MinSnr::Feasible { k1, k2, p_fail, .. } => {
                assert_eq!((k1, k2), (1, 1));
                assert!(p_fail <= 1e-9);
            }
            MinSnr::Infeasible => panic!("expected feasible"),
        }
    }

    #[test]
    fn infeasible_serializes_as_flag() {
        assert_eq!(serde_json::to_string(&MinSnr::Infeasible).unwrap(), r#"{"feasible":false}"#);
    }
}
