//! Per-trial critical link failure probability.
//!
//! Without slot events, caps or fade copying, a trial succeeds at link
//! failure probability `p` iff every message has a path whose link draws
//! are all at least `p`. The largest such `p` (the trial's strength) is a
//! max-min over paths, so one pass over the draws gives the outcome of the
//! trial at every `p` at once and P(fail at p) = P(strength < p).

use serde::{Deserialize, Serialize};

use super::{phase_epoch, Phase, TAG_LINK};
use crate::error::{ensure, Result};
use crate::protocol::{spectral_efficiency, ProtocolConfig, Scheme};
use crate::stream::{par_trials, KeyedStream};

fn draw(stream: &KeyedStream, epoch: u64, a: usize, b: usize) -> f64 {
    let (lo, hi) = (a.min(b) as u64, a.max(b) as u64);
    stream.uniform(&[TAG_LINK, epoch, lo, hi])
}

/// Largest link failure probability at which this trial's cycle succeeds.
pub fn cycle_strength(cfg: &ProtocolConfig, stream: &KeyedStream) -> f64 {
    use Phase::*;
    let n = cfg.n;
    let e = |p| phase_epoch(cfg, p);
    let (dlb, ulb) = (e(DownlinkBroadcast), e(UplinkBroadcast));
    let mut strength = 1.0f64;
    // best path strength through relays, stopping once it cannot lower `floor`
    let best = |direct: f64, floor: f64, via: &dyn Fn(usize) -> f64, i: usize| -> f64 {
        let mut s = direct;
        for j in 1..=n {
            if s >= floor {
                break;
            }
            if j != i {
                s = s.max(via(j));
            }
        }
        s
    };
    for i in 1..=n {
        match cfg.scheme {
            Scheme::OccupyCow => {
                let (dlr, ulr) = (e(DownlinkRelay), e(UplinkRelay));
                let d = best(
                    draw(stream, dlb, 0, i),
                    strength,
                    &|j| draw(stream, dlb, 0, j).min(draw(stream, dlr, j, i)),
                    i,
                );
                strength = strength.min(d);
                let u = best(
                    draw(stream, ulb, i, 0),
                    strength,
                    &|j| draw(stream, ulb, i, j).min(draw(stream, ulr, j, 0)),
                    i,
                );
                strength = strength.min(u);
            }
            Scheme::XorCow => {
                let x = e(XorRelay);
                let relay = |j: usize| draw(stream, dlb, 0, j).min(draw(stream, ulb, i, j));
                let d = best(draw(stream, dlb, 0, i), strength, &|j| relay(j).min(draw(stream, x, j, i)), i);
                strength = strength.min(d);
                let u = best(draw(stream, ulb, i, 0), strength, &|j| relay(j).min(draw(stream, x, j, 0)), i);
                strength = strength.min(u);
            }
        }
    }
    strength
}

/// Sorted trial strengths.
pub fn strength_samples(cfg: &ProtocolConfig, trials: u64, seed: u64) -> Result<Vec<f64>> {
    cfg.validate()?;
    ensure(cfg.cap.is_none() && cfg.q.is_none(), "cfg", || "strengths need uncapped independent links".into())?;
    let mut s = par_trials(trials, |t| Ok(cycle_strength(cfg, &KeyedStream::new(seed, t))))?;
    s.sort_by(|a, b| a.total_cmp(b));
    Ok(s)
}

/// Simulated minimum SNR at which the empirical cycle failure rate meets
/// a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McMinSnr {
    pub snr_db: f64,
    /// Largest tolerable link failure probability.
    pub p_link: f64,
    pub trials: u64,
    /// Failures allowed by the target at that trial count.
    pub allowed_failures: u64,
}

/// Minimum SNR for `target` with no uncertainty budget, from simulated
/// trial strengths.
pub fn mc_min_snr(cfg: &ProtocolConfig, target: f64, trials: u64, seed: u64) -> Result<McMinSnr> {
    ensure(target > 0.0 && target < 1.0, "target", || format!("must lie in (0, 1), got {target}"))?;
    let k = (target * trials as f64).floor() as u64;
    ensure(k < trials, "trials", || "too few trials for the target".into())?;
    let s = strength_samples(cfg, trials, seed)?;
    // at p = s[k] at most k trials have strength strictly below p
    let p_link = s[k as usize];
    let rate = spectral_efficiency(cfg);
    let snr = (2f64.powf(rate) - 1.0) / -(-p_link).ln_1p();
    Ok(McMinSnr {
        snr_db: crate::linear_to_db(snr),
        p_link,
        trials,
        allowed_failures: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{simulate_cycle, LinkSpec};
    use crate::protocol::{max_tolerable_plink, Dynamics, RefreshBoundary, UncertaintyBudget};

    fn configs() -> Vec<ProtocolConfig> {
        let mut out = Vec::new();
        for scheme in [Scheme::OccupyCow, Scheme::XorCow] {
            for (dynamics, refresh) in [
                (Dynamics::QuasiStatic, RefreshBoundary::EveryPhase),
                (Dynamics::PhaseRefresh, RefreshBoundary::EveryPhase),
                (Dynamics::PhaseRefresh, RefreshBoundary::DownlinkUplink),
            ] {
                let mut c = ProtocolConfig::new(scheme, 5);
                c.dynamics = dynamics;
                c.refresh = refresh;
                out.push(c);
            }
        }
        out
    }

    #[test]
    fn strength_predicts_simulated_outcome() {
        for cfg in configs() {
            for t in 0..400 {
                let stream = KeyedStream::new(21, t);
                let s = cycle_strength(&cfg, &stream);
                for &p in &[0.1, 0.3, 0.5, 0.7] {
                    let c = simulate_cycle(&cfg, LinkSpec::Probability(p), &UncertaintyBudget::ZERO, stream).unwrap();
                    assert_eq!(c.failed(), p > s, "{cfg:?} trial {t} p {p} strength {s}");
                }
            }
        }
    }

    #[test]
    fn quasi_static_quantile_matches_analytic() {
        let cfg = ProtocolConfig::new(Scheme::OccupyCow, 10);
        let r = mc_min_snr(&cfg, 1e-2, 200_000, 4).unwrap();
        let exact = max_tolerable_plink(10, 1e-2).unwrap();
        assert!((r.p_link / exact - 1.0).abs() < 0.03, "{} vs {exact}", r.p_link);
    }
}
