//! Analytic reliability of the Occupy CoW and XOR-CoW relaying protocols.
//!
//! One cycle carries a downlink message from the controller to each of `n`
//! nodes and an uplink message from each node back. Occupy CoW runs four
//! phases (downlink broadcast, downlink relay, uplink broadcast, uplink
//! relay); XOR-CoW runs three (downlink broadcast, uplink broadcast, and a
//! joint relay phase carrying the XOR of both messages).

mod outage;
mod robust;
mod search;

pub use outage::{
    capped_cycle_outage, ideal_cycle_outage, link_outage, max_tolerable_plink, robust_link, spectral_efficiency,
};
pub use robust::{robust_cycle_outage, robust_cycle_outage_at, DirectionalOutage};
pub use search::{min_snr, MinSnr, MinSnrRecord, SearchGrid, SNR_RANGE_DB};

pub use crate::oracle::phase_refresh_cycle_outage;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[serde(alias = "occupy")]
    OccupyCow,
    #[serde(alias = "xor")]
    XorCow,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::OccupyCow => "occupy-cow",
            Scheme::XorCow => "xor-cow",
        }
    }
}

/// How link states evolve within a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    /// One link state per node pair for the whole cycle; links are reciprocal.
    QuasiStatic,
    /// Link states are redrawn at protocol phase boundaries.
    PhaseRefresh,
}

/// Where phase-refresh dynamics redraw the channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefreshBoundary {
    /// Every phase sees fresh channels.
    #[default]
    EveryPhase,
    /// Channels change only between the downlink and uplink halves.
    DownlinkUplink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub scheme: Scheme,
    /// Number of nodes (the controller is extra).
    pub n: usize,
    /// Message size, bits.
    pub message_bits: f64,
    /// Cycle time, seconds.
    pub cycle_time: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Initial transmissions of every message.
    pub k1: usize,
    /// Relay slots per message.
    pub k2: usize,
    /// Maximum number of simultaneous relays.
    #[serde(default)]
    pub cap: Option<usize>,
    pub dynamics: Dynamics,
    #[serde(default)]
    pub refresh: RefreshBoundary,
    /// Probability that a link fade is fresh rather than a copy of an
    /// earlier link (pessimistic correlation model).
    #[serde(default)]
    pub q: Option<f64>,
}

/// Message size used for the link-failure and SNR curves.
pub const DEFAULT_MESSAGE_BITS: f64 = 160.0;
/// Cycle time used when none is given.
pub const DEFAULT_CYCLE_TIME: f64 = 2e-3;
pub const DEFAULT_BANDWIDTH: f64 = 20e6;

impl ProtocolConfig {
    /// 160-bit messages, 2 ms cycle, 20 MHz, no repetitions, quasi-static.
    pub fn new(scheme: Scheme, n: usize) -> Self {
        Self {
            scheme,
            n,
            message_bits: DEFAULT_MESSAGE_BITS,
            cycle_time: DEFAULT_CYCLE_TIME,
            bandwidth: DEFAULT_BANDWIDTH,
            k1: 1,
            k2: 1,
            cap: None,
            dynamics: Dynamics::QuasiStatic,
            refresh: RefreshBoundary::EveryPhase,
            q: None,
        }
    }

    pub fn with_repetitions(mut self, k1: usize, k2: usize) -> Self {
        self.k1 = k1;
        self.k2 = k2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n >= 1, "n", || "need at least one node".into())?;
        ensure(self.message_bits > 0.0, "message_bits", || "must be positive".into())?;
        ensure(self.cycle_time > 0.0, "cycle_time", || "must be positive".into())?;
        ensure(self.bandwidth > 0.0, "bandwidth", || "must be positive".into())?;
        ensure(self.k1 >= 1, "k1", || "must be at least 1".into())?;
        ensure(self.k2 >= 1, "k2", || "must be at least 1".into())?;
        ensure(self.cap.is_none_or(|c| c >= 1), "cap", || "must be at least 1".into())?;
        ensure(self.q.is_none_or(|q| (0.0..=1.0).contains(&q)), "q", || "must lie in [0, 1]".into())
    }

    /// Slots per cycle.
    pub fn slots(&self) -> usize {
        match self.scheme {
            Scheme::OccupyCow => 2 * self.n * (self.k1 + self.k2),
            Scheme::XorCow => self.n * (2 * self.k1 + self.k2),
        }
    }
}

/// Per-link and per-slot uncertainty allowances.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyBudget {
    /// Additive slack on the modeled link failure probability.
    pub p_off: f64,
    /// Per-slot, per-transmitter corruption probability.
    pub p_c: f64,
    /// Per-slot, per-receiver corruption probability.
    pub p_g: f64,
}

/// Upper ends of the ranges the budget is meant to cover.
pub const P_OFF_RANGE: f64 = 0.1;
pub const P_C_RANGE: f64 = 1e-2;
pub const P_G_RANGE: f64 = 1e-2;

impl UncertaintyBudget {
    pub const ZERO: Self = Self {
        p_off: 0.0,
        p_c: 0.0,
        p_g: 0.0,
    };

    pub fn new(p_off: f64, p_c: f64, p_g: f64) -> Self {
        Self { p_off, p_c, p_g }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    /// Rejects values outside [0, 1]; warns outside the intended ranges.
    pub fn validate(&self) -> Result<()> {
        for (name, v, range) in [
            ("p_off", self.p_off, P_OFF_RANGE),
            ("p_c", self.p_c, P_C_RANGE),
            ("p_g", self.p_g, P_G_RANGE),
        ] {
            ensure((0.0..=1.0).contains(&v), name, || format!("must lie in [0, 1], got {v}"))?;
            if v > range {
                log::warn!("{name} = {v} exceeds its intended range [0, {range}]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub p_fail: f64,
    pub p_link: f64,
    pub spectral_efficiency: f64,
    pub snr_db: f64,
    /// Failure probability counting only one direction at a time.
    pub per_phase: Vec<(String, f64)>,
}
