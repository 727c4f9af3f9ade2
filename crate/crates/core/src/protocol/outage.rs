use super::ProtocolConfig;
use crate::error::{ensure, Result};
use crate::special::{binomial_pmf_table, KahanSum};

/// Raw spectral efficiency in bits/s/Hz needed to fit every slot of the
/// cycle into the cycle time.
pub fn spectral_efficiency(cfg: &ProtocolConfig) -> f64 {
    cfg.message_bits * cfg.slots() as f64 / (cfg.cycle_time * cfg.bandwidth)
}

/// Rayleigh outage `1 - exp(-(2^R - 1) / snr)`.
pub fn link_outage(snr_linear: f64, rate: f64) -> f64 {
    if snr_linear.is_infinite() {
        return 0.0;
    }
    -(-(2f64.powf(rate) - 1.0) / snr_linear).exp_m1()
}

/// Link failure probability with the modeling slack added.
pub fn robust_link(p_w: f64, p_off: f64) -> f64 {
    (p_w + p_off).min(1.0)
}

/// `1 - (1 - x)^k` without cancellation.
pub(crate) fn one_minus_pow_complement(x: f64, k: f64) -> f64 {
    if x >= 1.0 {
        return if k > 0.0 { 1.0 } else { 0.0 };
    }
    -(k * (-x).ln_1p()).exp_m1()
}

fn cycle_outage_with(n: usize, p: f64, relays: impl Fn(usize) -> usize) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    // A = number of nodes with a good controller link.
    let pmf = binomial_pmf_table(n, 1.0 - p);
    let mut acc = KahanSum::default();
    for (a, &w) in pmf.iter().enumerate().take(n) {
        if w == 0.0 {
            continue;
        }
        let unreachable = p.powi(relays(a) as i32);
        acc.add(w * one_minus_pow_complement(unreachable, (n - a) as f64));
    }
    acc.value().clamp(0.0, 1.0)
}

/// Cycle failure probability with independent links that fail with
/// probability `p`, no slot errors and no repetitions.
pub fn ideal_cycle_outage(n: usize, p: f64) -> f64 {
    cycle_outage_with(n, p, |a| a)
}

/// [`ideal_cycle_outage`] when at most `cap` relays may transmit at once.
pub fn capped_cycle_outage(n: usize, p: f64, cap: usize) -> f64 {
    cycle_outage_with(n, p, |a| a.min(cap))
}

/// Largest link failure probability for which [`ideal_cycle_outage`] stays
/// at `target`.
pub fn max_tolerable_plink(n: usize, target: f64) -> Result<f64> {
    ensure(target > 0.0 && target < 1.0, "target", || format!("must lie in (0, 1), got {target}"))?;
    ensure(n >= 1, "n", || "need at least one node".into())?;
    if n == 1 {
        return Ok(target);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // far tighter than needed in p so the outage itself round-trips
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if ideal_cycle_outage(n, mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
