//! Direct simulation of protocol cycles, the ground truth for the analytic
//! engine.
//!
//! Every random event of trial `t` is a keyed draw from
//! `KeyedStream::new(seed, t)`, so draws are evaluated only when the schedule
//! needs them and results do not depend on the parallel schedule. Link draws
//! use the coupling "good iff u >= p_link", which makes each trial's outcome
//! monotone in the link failure probability.

mod strength;
mod sweep;

pub use strength::{cycle_strength, mc_min_snr, strength_samples, McMinSnr};
pub use sweep::{sweep, Scenario, SweepOptions, SweepRow};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::protocol::{
    link_outage, robust_link, spectral_efficiency, Dynamics, ProtocolConfig, RefreshBoundary, Scheme,
    UncertaintyBudget,
};
use crate::spatial::q_fades_from;
use crate::stats::clopper_pearson;
use crate::stream::KeyedStream;

/// Protocol phase, used to address slot events and to pick the channel
/// epoch a phase sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    DownlinkBroadcast,
    DownlinkRelay,
    UplinkBroadcast,
    UplinkRelay,
    XorRelay,
}

impl Phase {
    fn code(self) -> u64 {
        self as u64
    }
}

/// How the link failure probability is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinkSpec {
    /// Nominal SNR in dB; the fade outage follows from the protocol's rate.
    SnrDb(f64),
    /// Fade outage probability, before `p_off` is added.
    Probability(f64),
}

const TAG_LINK: u64 = 1;
const TAG_TX: u64 = 2;
const TAG_RX: u64 = 3;
const TAG_CAP: u64 = 4;
const TAG_Q: u64 = 5;
const TAG_OFF: u64 = 6;

/// Which channel realization a phase sees.
pub fn phase_epoch(cfg: &ProtocolConfig, phase: Phase) -> u64 {
    use Phase::*;
    match (cfg.dynamics, cfg.refresh, cfg.scheme) {
        (Dynamics::QuasiStatic, _, _) => 0,
        (Dynamics::PhaseRefresh, RefreshBoundary::EveryPhase, Scheme::OccupyCow) => match phase {
            DownlinkBroadcast => 0,
            DownlinkRelay => 1,
            UplinkBroadcast => 2,
            UplinkRelay | XorRelay => 3,
        },
        (Dynamics::PhaseRefresh, RefreshBoundary::EveryPhase, Scheme::XorCow) => match phase {
            DownlinkBroadcast | DownlinkRelay => 0,
            UplinkBroadcast | UplinkRelay => 1,
            XorRelay => 2,
        },
        (Dynamics::PhaseRefresh, RefreshBoundary::DownlinkUplink, _) => match phase {
            DownlinkBroadcast | DownlinkRelay => 0,
            UplinkBroadcast | UplinkRelay | XorRelay => 1,
        },
    }
}

fn phases(scheme: Scheme) -> &'static [Phase] {
    match scheme {
        Scheme::OccupyCow => &[
            Phase::DownlinkBroadcast,
            Phase::DownlinkRelay,
            Phase::UplinkBroadcast,
            Phase::UplinkRelay,
        ],
        Scheme::XorCow => &[Phase::DownlinkBroadcast, Phase::UplinkBroadcast, Phase::XorRelay],
    }
}

/// Link model resolved from a [`LinkSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
struct Links {
    /// Used without the q-model: good iff u >= p_link.
    p_link: f64,
    /// Used with the q-model: good iff |h|^2 >= threshold and no p_off event.
    threshold: f64,
    p_off: f64,
}

fn resolve_links(cfg: &ProtocolConfig, link: LinkSpec, budget: &UncertaintyBudget) -> Result<Links> {
    let p_w = match link {
        LinkSpec::SnrDb(snr) => link_outage(crate::db_to_linear(snr), spectral_efficiency(cfg)),
        LinkSpec::Probability(p) => {
            ensure((0.0..=1.0).contains(&p), "p_link", || format!("must lie in [0, 1], got {p}"))?;
            p
        }
    };
    let threshold = if p_w >= 1.0 { f64::INFINITY } else { -(-p_w).ln_1p() };
    Ok(Links {
        p_link: robust_link(p_w, budget.p_off),
        threshold,
        p_off: budget.p_off,
    })
}

/// One simulated cycle. Link and slot states are exposed through keyed
/// accessors that return the same values the simulation used.
#[derive(Debug, Clone)]
pub struct CycleRealization {
    cfg: ProtocolConfig,
    budget: UncertaintyBudget,
    links: Links,
    stream: KeyedStream,
    /// Link states per epoch under the q-model, in enumeration order.
    q_links: Vec<Vec<bool>>,
    /// Indexed by node 1..=n (entry 0 unused).
    pub downlink_delivered: Vec<bool>,
    pub uplink_delivered: Vec<bool>,
}

/// Position of link {a, b} in the enumeration: controller links first, then
/// node pairs in lexicographic order.
fn link_index(n: usize, a: usize, b: usize) -> usize {
    let (a, b) = (a.min(b), a.max(b));
    if a == 0 {
        b - 1
    } else {
        n + (a - 1) * n - (a - 1) * a / 2 + (b - a - 1)
    }
}

impl CycleRealization {
    fn new(cfg: &ProtocolConfig, budget: &UncertaintyBudget, links: Links, stream: KeyedStream) -> Self {
        let n = cfg.n;
        let q_links = match cfg.q {
            None => Vec::new(),
            Some(q) => {
                let epochs = phases(cfg.scheme).iter().map(|&p| phase_epoch(cfg, p)).max().unwrap_or(0) + 1;
                let count = n * (n + 1) / 2;
                (0..epochs)
                    .map(|e| {
                        q_fades_from(&stream, &[TAG_Q, e], count, q)
                            .iter()
                            .enumerate()
                            .map(|(k, h)| {
                                h.norm_sqr() >= links.threshold
                                    && (links.p_off == 0.0 || stream.uniform(&[TAG_OFF, e, k as u64]) >= links.p_off)
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        Self {
            cfg: *cfg,
            budget: *budget,
            links,
            stream,
            q_links,
            downlink_delivered: vec![true; n + 1],
            uplink_delivered: vec![true; n + 1],
        }
    }

    /// Whether link {a, b} is good in `phase` (node 0 is the controller).
    pub fn link_good(&self, phase: Phase, a: usize, b: usize) -> bool {
        let epoch = phase_epoch(&self.cfg, phase);
        if self.cfg.q.is_some() {
            return self.q_links[epoch as usize][link_index(self.cfg.n, a, b)];
        }
        let (lo, hi) = (a.min(b) as u64, a.max(b) as u64);
        self.stream.uniform(&[TAG_LINK, epoch, lo, hi]) >= self.links.p_link
    }

    /// Transmitter event for slot `rep` of message `msg` in `phase`.
    pub fn tx_corrupted(&self, phase: Phase, msg: usize, rep: usize, tx: usize) -> bool {
        self.budget.p_c > 0.0
            && self
                .stream
                .uniform(&[TAG_TX, phase.code(), msg as u64, rep as u64, tx as u64])
                < self.budget.p_c
    }

    /// Receiver event for slot `rep` of message `msg` in `phase`.
    pub fn rx_corrupted(&self, phase: Phase, msg: usize, rep: usize, rx: usize) -> bool {
        self.budget.p_g > 0.0
            && self
                .stream
                .uniform(&[TAG_RX, phase.code(), msg as u64, rep as u64, rx as u64])
                < self.budget.p_g
    }

    pub fn failed(&self) -> bool {
        self.downlink_failed() || self.uplink_failed()
    }

    pub fn downlink_failed(&self) -> bool {
        self.downlink_delivered[1..].iter().any(|d| !d)
    }

    pub fn uplink_failed(&self) -> bool {
        self.uplink_delivered[1..].iter().any(|d| !d)
    }

    /// Whether `rx` decodes one of the k1 initial slots of `msg` from `tx`.
    fn decodes(&self, phase: Phase, msg: usize, tx: usize, rx: usize, clean: &[bool]) -> bool {
        self.link_good(phase, tx, rx)
            && clean
                .iter()
                .enumerate()
                .any(|(r, &c)| c && !self.rx_corrupted(phase, msg, r, rx))
    }

    fn clean_slots(&self, phase: Phase, msg: usize, tx: usize) -> Vec<bool> {
        (0..self.cfg.k1).map(|r| !self.tx_corrupted(phase, msg, r, tx)).collect()
    }

    /// Keep at most `cap` relays, chosen uniformly at random.
    fn apply_cap(&self, phase: Phase, msg: usize, mut relays: Vec<usize>) -> Vec<usize> {
        if let Some(cap) = self.cfg.cap {
            if relays.len() > cap {
                let key = |j: usize| self.stream.uniform(&[TAG_CAP, phase.code(), msg as u64, j as u64]);
                relays.sort_by(|&x, &y| key(x).total_cmp(&key(y)));
                relays.truncate(cap);
            }
        }
        relays
    }

    /// Whether one of the k2 relay slots of `msg` reaches `dest`.
    fn relay_delivers(&self, phase: Phase, msg: usize, relays: &[usize], dest: usize) -> bool {
        if !relays.iter().any(|&j| self.link_good(phase, j, dest)) {
            return false;
        }
        (0..self.cfg.k2).any(|r| {
            !self.rx_corrupted(phase, msg, r, dest) && relays.iter().all(|&j| !self.tx_corrupted(phase, msg, r, j))
        })
    }

    fn run(&mut self) {
        let n = self.cfg.n;
        for i in 1..=n {
            let (dl, ul) = match self.cfg.scheme {
                Scheme::OccupyCow => (self.occupy_downlink(i), self.occupy_uplink(i)),
                Scheme::XorCow => self.xor_node(i),
            };
            self.downlink_delivered[i] = dl;
            self.uplink_delivered[i] = ul;
        }
    }

    fn occupy_downlink(&self, i: usize) -> bool {
        use Phase::*;
        let n = self.cfg.n;
        let clean = self.clean_slots(DownlinkBroadcast, i, 0);
        if self.decodes(DownlinkBroadcast, i, 0, i, &clean) {
            return true;
        }
        let relays: Vec<usize> = (1..=n)
            .filter(|&j| j != i && self.decodes(DownlinkBroadcast, i, 0, j, &clean))
            .collect();
        let relays = self.apply_cap(DownlinkRelay, i, relays);
        self.relay_delivers(DownlinkRelay, i, &relays, i)
    }

    fn occupy_uplink(&self, i: usize) -> bool {
        use Phase::*;
        let n = self.cfg.n;
        let clean = self.clean_slots(UplinkBroadcast, i, i);
        if self.decodes(UplinkBroadcast, i, i, 0, &clean) {
            return true;
        }
        // relays must also reach the controller
        let relays: Vec<usize> = (1..=n)
            .filter(|&j| j != i && self.decodes(UplinkBroadcast, i, i, j, &clean) && self.link_good(UplinkRelay, j, 0))
            .collect();
        let relays = self.apply_cap(UplinkRelay, i, relays);
        self.relay_delivers(UplinkRelay, i, &relays, 0)
    }

    fn xor_node(&self, i: usize) -> (bool, bool) {
        use Phase::*;
        let n = self.cfg.n;
        let clean_d = self.clean_slots(DownlinkBroadcast, i, 0);
        let clean_u = self.clean_slots(UplinkBroadcast, i, i);
        let dl_direct = self.decodes(DownlinkBroadcast, i, 0, i, &clean_d);
        let ul_direct = self.decodes(UplinkBroadcast, i, i, 0, &clean_u);
        if dl_direct && ul_direct {
            return (true, true);
        }
        let relays: Vec<usize> = (1..=n)
            .filter(|&j| {
                j != i
                    && self.decodes(DownlinkBroadcast, i, 0, j, &clean_d)
                    && self.decodes(UplinkBroadcast, i, i, j, &clean_u)
            })
            .collect();
        let relays = self.apply_cap(XorRelay, i, relays);
        let dl = dl_direct || self.relay_delivers(XorRelay, i, &relays, i);
        let ul = ul_direct || self.relay_delivers(XorRelay, i, &relays, 0);
        (dl, ul)
    }
}

/// Simulate one cycle on `stream`.
pub fn simulate_cycle(
    cfg: &ProtocolConfig,
    link: LinkSpec,
    budget: &UncertaintyBudget,
    stream: KeyedStream,
) -> Result<CycleRealization> {
    cfg.validate()?;
    budget.validate()?;
    let links = resolve_links(cfg, link, budget)?;
    let mut c = CycleRealization::new(cfg, budget, links, stream);
    c.run();
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub p_hat: f64,
    pub trials: u64,
    pub failures: u64,
    /// Exact 95% Binomial interval.
    pub ci95: (f64, f64),
    /// Cycles with an undelivered downlink message.
    pub downlink_failures: u64,
    /// Cycles with an undelivered uplink message.
    pub uplink_failures: u64,
}

impl OutageEstimate {
    pub fn from_counts(failures: u64, downlink_failures: u64, uplink_failures: u64, trials: u64) -> Self {
        Self {
            p_hat: failures as f64 / trials as f64,
            trials,
            failures,
            ci95: clopper_pearson(failures, trials, 0.95),
            downlink_failures,
            uplink_failures,
        }
    }

    /// Binomial standard error of `p_hat`.
    pub fn std_error(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.trials as f64).sqrt()
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci95.0 <= p && p <= self.ci95.1
    }
}

const CHUNK: u64 = 4096;

/// Run `f` over `trials` trials in fixed-size chunks and add up the counts.
pub(crate) fn count_trials<const K: usize, F>(trials: u64, f: F) -> Result<[u64; K]>
where
    F: Fn(u64) -> Result<[bool; K]> + Sync + Send,
{
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<[u64; K]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [0u64; K];
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                for (a, hit) in acc.iter_mut().zip(f(t)?) {
                    *a += hit as u64;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = [0u64; K];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(total)
}

/// Fraction of failed cycles over `trials` independent cycles.
pub fn estimate_outage(
    cfg: &ProtocolConfig,
    link: LinkSpec,
    budget: &UncertaintyBudget,
    trials: u64,
    seed: u64,
) -> Result<OutageEstimate> {
    cfg.validate()?;
    budget.validate()?;
    ensure(trials >= 1, "trials", || "need at least one trial".into())?;
    let links = resolve_links(cfg, link, budget)?;
    let [fail, dl, ul] = count_trials(trials, |t| {
        let mut c = CycleRealization::new(cfg, budget, links, KeyedStream::new(seed, t));
        c.run();
        let (d, u) = (c.downlink_failed(), c.uplink_failed());
        Ok([d || u, d, u])
    })?;
    Ok(OutageEstimate::from_counts(fail, dl, ul, trials))
}

/// Cycle failure under phase-refresh channels, estimated by simulation.
pub fn phase_refresh_cycle_outage(cfg: &ProtocolConfig, snr_db: f64, trials: u64, seed: u64) -> Result<OutageEstimate> {
    ensure(cfg.dynamics == Dynamics::PhaseRefresh, "dynamics", || "expected phase-refresh dynamics".into())?;
    ensure(cfg.k1 == 1 && cfg.k2 == 1, "k1/k2", || "phase refresh is defined without repetitions".into())?;
    estimate_outage(cfg, LinkSpec::SnrDb(snr_db), &UncertaintyBudget::ZERO, trials, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{ideal_cycle_outage, robust_cycle_outage_at};

    fn occupy(n: usize) -> ProtocolConfig {
        ProtocolConfig::new(Scheme::OccupyCow, n)
    }

    #[test]
    fn link_indices_enumerate_all_pairs() {
        let n = 5;
        let mut seen = vec![false; n * (n + 1) / 2];
        for a in 0..=n {
            for b in a + 1..=n {
                let k = link_index(n, a, b);
                assert!(!seen[k]);
                seen[k] = true;
                assert_eq!(k, link_index(n, b, a));
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(link_index(n, 0, 1), 0);
        assert_eq!(link_index(n, 1, 2), n);
    }

    #[test]
    fn no_links_always_fail() {
        for scheme in [Scheme::OccupyCow, Scheme::XorCow] {
            let e = estimate_outage(
                &ProtocolConfig::new(scheme, 4),
                LinkSpec::Probability(1.0),
                &UncertaintyBudget::ZERO,
                200,
                1,
            )
            .unwrap();
            assert_eq!(e.failures, 200);
        }
    }

    #[test]
    fn perfect_links_always_succeed() {
        for scheme in [Scheme::OccupyCow, Scheme::XorCow] {
            let e = estimate_outage(
                &ProtocolConfig::new(scheme, 6),
                LinkSpec::Probability(0.0),
                &UncertaintyBudget::ZERO,
                500,
                1,
            )
            .unwrap();
            assert_eq!(e.failures, 0);
            let (lo, hi) = e.ci95;
            assert_eq!(lo, 0.0);
            assert!((hi - (1.0 - 0.025f64.powf(1.0 / 500.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn two_nodes_match_exact_value() {
        let e = estimate_outage(&occupy(2), LinkSpec::Probability(0.1), &UncertaintyBudget::ZERO, 400_000, 3).unwrap();
        assert!((e.p_hat - 0.028).abs() < 3.0 * e.std_error(), "{}", e.p_hat);
    }

    #[test]
    fn quasi_static_is_reciprocal() {
        for t in 0..300 {
            let c = simulate_cycle(&occupy(6), LinkSpec::Probability(0.4), &UncertaintyBudget::ZERO, KeyedStream::new(9, t))
                .unwrap();
            assert_eq!(c.downlink_delivered, c.uplink_delivered);
            for a in 0..=6 {
                for b in 0..=6 {
                    if a != b {
                        assert_eq!(
                            c.link_good(Phase::DownlinkBroadcast, a, b),
                            c.link_good(Phase::UplinkRelay, b, a)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn phase_refresh_redraws_links() {
        let mut cfg = occupy(6);
        cfg.dynamics = Dynamics::PhaseRefresh;
        let c = simulate_cycle(&cfg, LinkSpec::Probability(0.5), &UncertaintyBudget::ZERO, KeyedStream::new(1, 0)).unwrap();
        let differs = (1..=6).any(|j| c.link_good(Phase::DownlinkBroadcast, 0, j) != c.link_good(Phase::UplinkRelay, j, 0));
        assert!(differs);
        assert_eq!(phase_epoch(&cfg, Phase::UplinkRelay), 3);
        cfg.refresh = RefreshBoundary::DownlinkUplink;
        assert_eq!(phase_epoch(&cfg, Phase::DownlinkRelay), 0);
        assert_eq!(phase_epoch(&cfg, Phase::UplinkRelay), 1);
    }

    #[test]
    fn agrees_with_analytic_on_small_configs() {
        let cases = [
            (Scheme::OccupyCow, 5usize, 2usize, 2usize, 0.25, UncertaintyBudget::new(0.0, 0.02, 0.03)),
            (Scheme::XorCow, 5, 2, 1, 0.25, UncertaintyBudget::new(0.0, 0.02, 0.03)),
            (Scheme::OccupyCow, 4, 1, 3, 0.35, UncertaintyBudget::new(0.0, 0.05, 0.0)),
            (Scheme::XorCow, 6, 3, 2, 0.3, UncertaintyBudget::new(0.0, 0.0, 0.05)),
        ];
        for (k, (scheme, n, k1, k2, p, b)) in cases.into_iter().enumerate() {
            let cfg = ProtocolConfig::new(scheme, n).with_repetitions(k1, k2);
            let exact = robust_cycle_outage_at(&cfg, p, &b).unwrap();
            let e = estimate_outage(&cfg, LinkSpec::Probability(p), &b, 300_000, k as u64).unwrap();
            assert!(
                (e.p_hat - exact.combined).abs() < 4.0 * e.std_error(),
                "{scheme:?} n={n}: mc {} analytic {}",
                e.p_hat,
                exact.combined
            );
            let dl = e.downlink_failures as f64 / e.trials as f64;
            assert!((dl - exact.downlink).abs() < 4.0 * (dl * (1.0 - dl) / e.trials as f64).sqrt() + 1e-6);
        }
    }

    #[test]
    fn capped_oracle_matches_capped_formula() {
        let mut cfg = occupy(7);
        cfg.cap = Some(2);
        let e = estimate_outage(&cfg, LinkSpec::Probability(0.35), &UncertaintyBudget::ZERO, 300_000, 5).unwrap();
        let want = crate::protocol::capped_cycle_outage(7, 0.35, 2);
        assert!((e.p_hat - want).abs() < 4.0 * e.std_error(), "{} vs {want}", e.p_hat);
    }

    #[test]
    fn q_one_matches_independent_links() {
        let mut cfg = occupy(5);
        cfg.q = Some(1.0);
        let e = estimate_outage(&cfg, LinkSpec::Probability(0.3), &UncertaintyBudget::ZERO, 200_000, 2).unwrap();
        let want = ideal_cycle_outage(5, 0.3);
        assert!((e.p_hat - want).abs() < 4.0 * e.std_error(), "{} vs {want}", e.p_hat);
    }

    #[test]
    fn q_zero_shares_one_fade() {
        // every link copies the first: all good or all bad
        let mut cfg = occupy(5);
        cfg.q = Some(0.0);
        let e = estimate_outage(&cfg, LinkSpec::Probability(0.3), &UncertaintyBudget::ZERO, 100_000, 2).unwrap();
        assert!((e.p_hat - 0.3).abs() < 4.0 * e.std_error());
    }

    #[test]
    fn estimates_are_deterministic() {
        let cfg = occupy(8).with_repetitions(2, 2);
        let b = UncertaintyBudget::new(0.01, 0.01, 0.01);
        let a = estimate_outage(&cfg, LinkSpec::SnrDb(5.0), &b, 20_000, 77).unwrap();
        let c = estimate_outage(&cfg, LinkSpec::SnrDb(5.0), &b, 20_000, 77).unwrap();
        assert_eq!(a, c);
    }
}
