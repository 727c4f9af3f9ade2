//! Cartesian parameter sweeps described by a JSON scenario.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{estimate_outage, LinkSpec, OutageEstimate};
use crate::error::{Error, Result};
use crate::protocol::{robust_cycle_outage, Dynamics, ProtocolConfig, UncertaintyBudget};

/// Axis values; an omitted axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub n: Vec<usize>,
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub p_off: Vec<f64>,
    #[serde(default)]
    pub p_c: Vec<f64>,
    #[serde(default)]
    pub p_g: Vec<f64>,
    #[serde(default)]
    pub k1: Vec<usize>,
    #[serde(default)]
    pub k2: Vec<usize>,
    #[serde(default)]
    pub cap: Vec<Option<usize>>,
    #[serde(default)]
    pub q: Vec<Option<f64>>,
    #[serde(default)]
    pub dynamics: Vec<Dynamics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub base: ProtocolConfig,
    #[serde(default)]
    pub budget: UncertaintyBudget,
    pub axes: Axes,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| Error::Scenario(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        if s.axes.snr_db.is_empty() {
            return Err(Error::Scenario("field `axes.snr_db`: must list at least one value".into()));
        }
        if s.trials == 0 {
            return Err(Error::Scenario("field `trials`: must be at least 1".into()));
        }
        s.base
            .validate()
            .map_err(|e| Error::Scenario(format!("field `base`: {e}")))?;
        Ok(s)
    }

    /// Every grid point, in row-major order with `snr_db` varying fastest.
    pub fn points(&self) -> Vec<(ProtocolConfig, UncertaintyBudget, f64)> {
        fn or<T: Clone>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let a = &self.axes;
        let b = self.base;
        let mut out = Vec::new();
        for n in or(&a.n, b.n) {
            for k1 in or(&a.k1, b.k1) {
                for k2 in or(&a.k2, b.k2) {
                    for cap in or(&a.cap, b.cap) {
                        for q in or(&a.q, b.q) {
                            for dynamics in or(&a.dynamics, b.dynamics) {
                                for p_off in or(&a.p_off, self.budget.p_off) {
                                    for p_c in or(&a.p_c, self.budget.p_c) {
                                        for p_g in or(&a.p_g, self.budget.p_g) {
                                            for &snr in &a.snr_db {
                                                let cfg = ProtocolConfig {
                                                    n,
                                                    k1,
                                                    k2,
                                                    cap,
                                                    q,
                                                    dynamics,
                                                    ..b
                                                };
                                                out.push((cfg, UncertaintyBudget::new(p_off, p_c, p_g), snr));
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub analytic: bool,
    pub monte_carlo: bool,
    /// Record wall time per point (makes output run-dependent).
    pub timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            analytic: true,
            monte_carlo: true,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: ProtocolConfig,
    pub budget: UncertaintyBudget,
    pub snr_db: f64,
    /// None when the analytic form does not cover this point.
    pub analytic: Option<f64>,
    pub estimate: Option<OutageEstimate>,
    pub wall_seconds: Option<f64>,
}

impl SweepRow {
    /// Analytic value inside the simulated 95% interval.
    pub fn agrees(&self) -> Option<bool> {
        Some(self.estimate?.contains(self.analytic?))
    }

    pub const CSV_HEADER: &'static str = "scheme,n,k1,k2,cap,q,dynamics,refresh,snr_db,p_off,p_c,p_g,analytic,p_hat,failures,trials,ci_low,ci_high,agree,wall_seconds";

    pub fn csv_line(&self) -> String {
        use crate::io::{fmt_db, fmt_prob};
        let c = &self.config;
        let opt = |v: Option<String>| v.unwrap_or_default();
        let fields = [
            c.scheme.label().to_string(),
            c.n.to_string(),
            c.k1.to_string(),
            c.k2.to_string(),
            opt(c.cap.map(|v| v.to_string())),
            opt(c.q.map(|v| v.to_string())),
            match c.dynamics {
                Dynamics::QuasiStatic => "quasi-static".into(),
                Dynamics::PhaseRefresh => "phase-refresh".into(),
            },
            match c.refresh {
                crate::protocol::RefreshBoundary::EveryPhase => "every-phase".into(),
                crate::protocol::RefreshBoundary::DownlinkUplink => "downlink-uplink".into(),
            },
            fmt_db(self.snr_db),
            fmt_prob(self.budget.p_off),
            fmt_prob(self.budget.p_c),
            fmt_prob(self.budget.p_g),
            opt(self.analytic.map(fmt_prob)),
            opt(self.estimate.map(|e| fmt_prob(e.p_hat))),
            opt(self.estimate.map(|e| e.failures.to_string())),
            opt(self.estimate.map(|e| e.trials.to_string())),
            opt(self.estimate.map(|e| fmt_prob(e.ci95.0))),
            opt(self.estimate.map(|e| fmt_prob(e.ci95.1))),
            opt(self.agrees().map(|a| a.to_string())),
            opt(self.wall_seconds.map(|w| format!("{w:.3}"))),
        ];
        fields.join(",")
    }
}

/// Evaluate every point of `scenario`, handing each row to `sink` as soon
/// as it is complete.
pub fn sweep(scenario: &Scenario, opts: SweepOptions, mut sink: impl FnMut(&SweepRow) -> Result<()>) -> Result<()> {
    for (k, (cfg, budget, snr)) in scenario.points().into_iter().enumerate() {
        let start = Instant::now();
        cfg.validate()
            .and_then(|_| budget.validate())
            .map_err(|e| Error::Scenario(format!("grid point {k}: {e}")))?;
        let analytic = if opts.analytic {
            match robust_cycle_outage(&cfg, snr, &budget) {
                Ok(r) => Some(r.p_fail),
                Err(Error::AnalyticUnsupported) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let estimate = if opts.monte_carlo {
            let seed = scenario.seed.wrapping_add(k as u64);
            Some(estimate_outage(&cfg, LinkSpec::SnrDb(snr), &budget, scenario.trials, seed)?)
        } else {
            None
        };
        let row = SweepRow {
            config: cfg,
            budget,
            snr_db: snr,
            analytic,
            estimate,
            wall_seconds: opts.timing.then(|| start.elapsed().as_secs_f64()),
        };
        sink(&row)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENARIO: &str = r#"{
        "base": {"scheme": "occupy", "n": 4, "message_bits": 160, "cycle_time": 0.002,
                 "bandwidth": 2e7, "k1": 1, "k2": 1, "dynamics": "quasi-static"},
        "budget": {"p_off": 0.0, "p_c": 0.001, "p_g": 0.001},
        "axes": {"n": [3, 5], "snr_db": [0.0, 5.0], "dynamics": ["quasi-static", "phase-refresh"]},
        "trials": 2000,
        "seed": 3
    }"#;

    #[test]
    fn expands_grid() {
        let s = Scenario::from_json(SCENARIO).unwrap();
        assert_eq!(s.points().len(), 8);
        let mut rows = Vec::new();
        sweep(&s, SweepOptions::default(), |r| {
            rows.push(r.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(rows.len(), 8);
        // phase refresh has no analytic value
        assert!(rows.iter().all(|r| r.analytic.is_some() == (r.config.dynamics == Dynamics::QuasiStatic)));
        assert!(rows.iter().all(|r| r.wall_seconds.is_none()));
        let line = rows[0].csv_line();
        assert_eq!(line.split(',').count(), SweepRow::CSV_HEADER.split(',').count());
    }

    #[test]
    fn malformed_scenarios_name_the_problem() {
        let err = Scenario::from_json("{\n \"base\": 3\n}").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let unknown = SCENARIO.replace("\"trials\"", "\"trails\"");
        let err = Scenario::from_json(&unknown).unwrap_err().to_string();
        assert!(err.contains("trails"), "{err}");
        let empty = SCENARIO.replace("[0.0, 5.0]", "[]");
        let err = Scenario::from_json(&empty).unwrap_err().to_string();
        assert!(err.contains("axes.snr_db"), "{err}");
    }
}
