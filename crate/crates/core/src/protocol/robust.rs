//! Cycle failure under the uncertainty budget, quasi-static links.
//!
//! The computation conditions on the set A of nodes with a good controller
//! link. For a node i, `l` counts the other members of A with a good link to
//! i. Given A and l, the delivery of i's two messages depends only on slot
//! events of those messages, so per-node failure is exact; nodes are then
//! combined as if independent given |A|. That is exact for nodes outside A
//! (their links into A are disjoint) and approximate only through links
//! shared by pairs inside A.
//!
//! Slot semantics: a broadcast slot reaches a receiver iff the link is good
//! and neither the transmitter nor the receiver event of that slot fires. A
//! relay slot with r transmitters reaches a destination iff one of them has
//! a good link to it and none of the r transmitter events nor the
//! destination's receiver event fires.

use super::outage::{link_outage, robust_link, spectral_efficiency};
use super::{OutageReport, ProtocolConfig, Scheme, UncertaintyBudget};
use crate::error::{Error, Result};
use crate::special::{binomial_pmf_table, ln_binomial, powi0, KahanSum};

/// Cycle failure probability counting both directions, only downlink
/// messages, and only uplink messages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalOutage {
    pub combined: f64,
    pub downlink: f64,
    pub uplink: f64,
}

/// Per-node failure probabilities for one conditioning on A.
#[derive(Debug, Clone, Copy, Default)]
struct NodeFailure {
    combined: f64,
    downlink: f64,
    uplink: f64,
}

pub fn robust_cycle_outage(cfg: &ProtocolConfig, snr_db: f64, budget: &UncertaintyBudget) -> Result<OutageReport> {
    let rate = spectral_efficiency(cfg);
    let p_link = robust_link(link_outage(crate::db_to_linear(snr_db), rate), budget.p_off);
    let d = robust_cycle_outage_at(cfg, p_link, budget)?;
    Ok(OutageReport {
        p_fail: d.combined,
        p_link,
        spectral_efficiency: rate,
        snr_db,
        per_phase: vec![("downlink".into(), d.downlink), ("uplink".into(), d.uplink)],
    })
}

/// Same as [`robust_cycle_outage`] with the link failure probability
/// given directly (`p_off` is then already included).
pub fn robust_cycle_outage_at(cfg: &ProtocolConfig, p_link: f64, budget: &UncertaintyBudget) -> Result<DirectionalOutage> {
    cfg.validate()?;
    budget.validate()?;
    if cfg.dynamics != super::Dynamics::QuasiStatic || cfg.q.is_some() {
        return Err(Error::AnalyticUnsupported);
    }
    crate::error::ensure((0.0..=1.0).contains(&p_link), "p_link", || format!("must lie in [0, 1], got {p_link}"))?;
    let model = Model::new(cfg, p_link, budget);
    let n = cfg.n;
    let per_node: Vec<(NodeFailure, NodeFailure)> = (0..=n)
        .map(|a| {
            let inside = if a >= 1 { model.node(a - 1, true) } else { NodeFailure::default() };
            let outside = if a < n { model.node(a, false) } else { NodeFailure::default() };
            (inside, outside)
        })
        .collect();
    let weights = binomial_pmf_table(n, 1.0 - p_link);
    let cycle = |pick: fn(&NodeFailure) -> f64| -> f64 {
        let mut acc = KahanSum::default();
        for (a, (&w, (inside, outside))) in weights.iter().zip(&per_node).enumerate() {
            if w == 0.0 {
                continue;
            }
            let term = |count: usize, f: f64| if count == 0 { 0.0 } else { count as f64 * (-f).ln_1p() };
            let log_ok = term(a, pick(inside)) + term(n - a, pick(outside));
            acc.add(w * -log_ok.exp_m1());
        }
        acc.value().clamp(0.0, 1.0)
    };
    Ok(DirectionalOutage {
        combined: cycle(|f| f.combined),
        downlink: cycle(|f| f.downlink),
        uplink: cycle(|f| f.uplink),
    })
}

struct Model {
    scheme: Scheme,
    p: f64,
    p_g: f64,
    cap: usize,
    /// Distribution of the number of uncorrupted initial slots.
    clean: Vec<f64>,
    /// Probability that a linked receiver decodes, by clean-slot count.
    decode: Vec<f64>,
    /// Failure of all k2 relay slots with r transmitters, one of them linked
    /// (certain failure for r = 0).
    relay_fail: Vec<f64>,
    /// `h[m][g]`: E[relay_fail[min(R, cap)]] for R ~ Bin(m, decode[g]).
    h: Vec<Vec<f64>>,
    k2: i32,
    p_c: f64,
}

impl Model {
    fn new(cfg: &ProtocolConfig, p: f64, b: &UncertaintyBudget) -> Self {
        let n = cfg.n;
        let cap = cfg.cap.unwrap_or(n).min(n);
        let clean = binomial_pmf_table(cfg.k1, 1.0 - b.p_c);
        let decode: Vec<f64> = (0..=cfg.k1).map(|g| 1.0 - powi0(b.p_g, g)).collect();
        let relay_fail: Vec<f64> = (0..=n)
            .map(|r| if r == 0 { 1.0 } else { powi0(1.0 - (1.0 - b.p_g) * powi0(1.0 - b.p_c, r), cfg.k2) })
            .collect();
        let h = (0..=n)
            .map(|m| {
                decode
                    .iter()
                    .map(|&q| {
                        binomial_pmf_table(m, q)
                            .iter()
                            .enumerate()
                            .map(|(r, w)| w * relay_fail[r.min(cap)])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Self {
            scheme: cfg.scheme,
            p,
            p_g: b.p_g,
            cap,
            clean,
            decode,
            relay_fail,
            h,
            k2: cfg.k2 as i32,
            p_c: b.p_c,
        }
    }

    fn direct_fail(&self, inside: bool, g: usize) -> f64 {
        if inside {
            powi0(self.p_g, g)
        } else {
            1.0
        }
    }

    /// Failure probabilities for a node with `others` other members of A.
    fn node(&self, others: usize, inside: bool) -> NodeFailure {
        let link_pmf = binomial_pmf_table(others, 1.0 - self.p);
        let mut out = NodeFailure::default();
        for (l, &w) in link_pmf.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let f = match self.scheme {
                Scheme::OccupyCow => self.occupy_given_links(others, l, inside),
                Scheme::XorCow => self.xor_given_links(l, inside),
            };
            out.combined += w * f.combined;
            out.downlink += w * f.downlink;
            out.uplink += w * f.uplink;
        }
        NodeFailure {
            combined: out.combined.clamp(0.0, 1.0),
            downlink: out.downlink.clamp(0.0, 1.0),
            uplink: out.uplink.clamp(0.0, 1.0),
        }
    }

    fn occupy_given_links(&self, others: usize, l: usize, inside: bool) -> NodeFailure {
        let mut dl = 0.0;
        let mut ul = 0.0;
        for (g, &wg) in self.clean.iter().enumerate() {
            if wg == 0.0 {
                continue;
            }
            let direct = self.direct_fail(inside, g);
            if direct == 0.0 {
                continue;
            }
            let q = self.decode[g];
            let none_linked = (1.0 - q).powi(l as i32);
            let dl_relay = if self.cap >= others {
                none_linked * (1.0 - self.h[others - l][g]) + self.h[others][g]
            } else {
                self.capped_downlink_relay(others, l, q)
            };
            // uplink relays are decoders that also reach the controller: the l linked nodes
            let ul_relay = self.h[l][g];
            dl += wg * direct * dl_relay.min(1.0);
            ul += wg * direct * ul_relay.min(1.0);
        }
        NodeFailure {
            combined: dl + ul - dl * ul,
            downlink: dl,
            uplink: ul,
        }
    }

    /// Downlink relay failure when decoders beyond the cap are dropped
    /// uniformly at random.
    fn capped_downlink_relay(&self, others: usize, l: usize, q: f64) -> f64 {
        let linked = binomial_pmf_table(l, q);
        let unlinked = binomial_pmf_table(others - l, q);
        let mut acc = 0.0;
        for (dl, &wl) in linked.iter().enumerate() {
            for (dn, &wn) in unlinked.iter().enumerate() {
                let w = wl * wn;
                if w == 0.0 {
                    continue;
                }
                if dl == 0 {
                    acc += w;
                    continue;
                }
                let c = (dl + dn).min(self.cap);
                // none of the c chosen relays is linked
                let p0 = if c > dn {
                    0.0
                } else {
                    (ln_binomial(dn as u64, c as u64) - ln_binomial((dl + dn) as u64, c as u64)).exp()
                };
                acc += w * (p0 + (1.0 - p0) * self.relay_fail[c]);
            }
        }
        acc
    }

    fn xor_given_links(&self, l: usize, inside: bool) -> NodeFailure {
        let mut out = NodeFailure::default();
        for (gd, &wd) in self.clean.iter().enumerate() {
            for (gu, &wu) in self.clean.iter().enumerate() {
                let w = wd * wu;
                if w == 0.0 {
                    continue;
                }
                let df = self.direct_fail(inside, gd);
                let uf = self.direct_fail(inside, gu);
                if df == 0.0 && uf == 0.0 {
                    continue;
                }
                let (one, both) = self.xor_relay(l, self.decode[gd] * self.decode[gu]);
                out.downlink += w * df * one;
                out.uplink += w * uf * one;
                out.combined += w * ((df * (1.0 - uf) + (1.0 - df) * uf) * one + df * uf * both);
            }
        }
        out
    }

    /// Expected failure of the joint relay phase when one destination, or
    /// both, still need the message; relays ~ Bin(l, q).
    fn xor_relay(&self, l: usize, q: f64) -> (f64, f64) {
        let mut one = 0.0;
        let mut both = 0.0;
        for (x, &w) in binomial_pmf_table(l, q).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            if x == 0 {
                one += w;
                both += w;
                continue;
            }
            let t = (1.0 - self.p_c).powi(x.min(self.cap) as i32);
            let a1 = (1.0 - t * (1.0 - self.p_g)).powi(self.k2);
            let a2 = (1.0 - t + t * self.p_g * self.p_g).powi(self.k2);
            one += w * a1;
            both += w * (2.0 * a1 - a2);
        }
        (one, both)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{ideal_cycle_outage, capped_cycle_outage, Dynamics};

    fn cfg(scheme: Scheme, n: usize) -> ProtocolConfig {
        ProtocolConfig::new(scheme, n)
    }

    #[test]
    fn zero_budget_is_the_ideal_formula() {
        for scheme in [Scheme::OccupyCow, Scheme::XorCow] {
            for n in [1usize, 2, 5, 13, 30] {
                for &p in &[0.0, 0.01, 0.1, 0.4] {
                    let d = robust_cycle_outage_at(&cfg(scheme, n), p, &UncertaintyBudget::ZERO).unwrap();
                    let want = ideal_cycle_outage(n, p);
                    assert!((d.combined - want).abs() <= 1e-12 * want.max(1e-300) + 1e-300, "{scheme:?} {n} {p}");
                }
            }
        }
    }

    #[test]
    fn zero_budget_cap_is_the_capped_formula() {
        for scheme in [Scheme::OccupyCow, Scheme::XorCow] {
            for cap in [1usize, 2, 5] {
                let mut c = cfg(scheme, 9);
                c.cap = Some(cap);
                let d = robust_cycle_outage_at(&c, 0.3, &UncertaintyBudget::ZERO).unwrap();
                // XOR relays hold both messages, so every kept relay is useful
                let want = match scheme {
                    Scheme::OccupyCow => capped_cycle_outage(9, 0.3, cap),
                    Scheme::XorCow => ideal_cycle_outage(9, 0.3),
                };
                assert!((d.combined - want).abs() < 1e-12, "{scheme:?} cap {cap}: {} vs {want}", d.combined);
            }
        }
    }

    #[test]
    fn only_slot_events_with_perfect_links() {
        let (n, k1, k2, pg) = (6usize, 2usize, 2usize, 1e-3);
        let c = cfg(Scheme::OccupyCow, n).with_repetitions(k1, k2);
        let d = robust_cycle_outage_at(&c, 0.0, &UncertaintyBudget::new(0.0, 0.0, pg)).unwrap();
        assert!(d.combined > 0.0);
        assert!(d.combined <= 2.0 * n as f64 * pg.powi((k1 + k2) as i32) * (1.0 + 1e-9));
        // Per message: direct fails w.p. pg^k1, then all k2 relay slots fail at the
        // destination w.p. pg^k2 (some relay decodes with near certainty).
        let per_msg = pg.powi(k1 as i32) * pg.powi(k2 as i32);
        let approx = 1.0 - (1.0 - per_msg).powi(2 * n as i32);
        assert!((d.combined / approx - 1.0).abs() < 1e-3);
    }

    #[test]
    fn single_node_exact() {
        // One node: no relays, fails iff either direct message fails.
        let c = cfg(Scheme::OccupyCow, 1).with_repetitions(2, 1);
        let b = UncertaintyBudget::new(0.0, 0.01, 0.02);
        let p = 0.05;
        let d = robust_cycle_outage_at(&c, p, &b).unwrap();
        let slot_ok = (1.0 - b.p_c) * (1.0 - b.p_g);
        let msg_ok = (1.0 - p) * (1.0 - (1.0 - slot_ok).powi(2));
        // both messages share the link
        let both_ok = (1.0 - p) * (1.0 - (1.0 - slot_ok).powi(2)).powi(2);
        assert!((d.downlink - (1.0 - msg_ok)).abs() < 1e-14);
        assert!((d.combined - (1.0 - both_ok)).abs() < 1e-14);
    }

    #[test]
    fn monotone_in_budget_and_link() {
        let c = cfg(Scheme::OccupyCow, 8).with_repetitions(2, 2);
        let base = UncertaintyBudget::new(0.0, 1e-3, 1e-3);
        let v = |p: f64, b: UncertaintyBudget| robust_cycle_outage_at(&c, p, &b).unwrap().combined;
        assert!(v(0.2, base) < v(0.25, base));
        assert!(v(0.2, base) < v(0.2, UncertaintyBudget { p_c: 2e-3, ..base }));
        assert!(v(0.2, base) < v(0.2, UncertaintyBudget { p_g: 2e-3, ..base }));
    }

    #[test]
    fn rejects_dynamic_models() {
        let mut c = cfg(Scheme::OccupyCow, 4);
        c.dynamics = Dynamics::PhaseRefresh;
        assert_eq!(
            robust_cycle_outage_at(&c, 0.1, &UncertaintyBudget::ZERO),
            Err(Error::AnalyticUnsupported)
        );
        let mut c = cfg(Scheme::OccupyCow, 4);
        c.q = Some(0.5);
        assert!(robust_cycle_outage_at(&c, 0.1, &UncertaintyBudget::ZERO).is_err());
    }

    #[test]
    fn report_fields() {
        let c = cfg(Scheme::OccupyCow, 30);
        let r = robust_cycle_outage(&c, 15.0, &UncertaintyBudget::new(0.01, 0.0, 0.0)).unwrap();
        assert!((r.spectral_efficiency - 0.48).abs() < 1e-12);
        let pw = link_outage(crate::db_to_linear(15.0), 0.48);
        assert!((r.p_link - pw - 0.01).abs() < 1e-15);
        assert_eq!(r.per_phase.len(), 2);
    }
}
