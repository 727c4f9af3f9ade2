use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::environment::{channel_at, sample_environment, Point, ScatterEnvironment, Trajectory};
use crate::error::{ensure, invalid, Result};
use crate::special::TWO_PI;
use crate::stats::EmpiricalCdf;
use crate::stream::{par_trials, trial_rng, KeyedStream};

const ENVIRONMENT_TAG: u64 = 0x656e_76;
const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Recipe for a family of independent random environments.
///
/// Trial `i` uses an environment seeded from `(master_seed, i)` and a
/// receiver placed uniformly in the central half of the room with a uniform
/// heading. When a trajectory would leave the room the placement is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_scatterers: usize,
    pub room_width: f64,
    pub room_height: f64,
    pub carrier_freq: f64,
    pub master_seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            n_scatterers: 100,
            room_width: 20.0,
            room_height: 20.0,
            carrier_freq: 3e9,
            master_seed: 0,
        }
    }
}

impl EnsembleSpec {
    pub fn wavelength(&self) -> f64 {
        crate::wavelength(self.carrier_freq)
    }

    pub fn environment(&self, trial: u64) -> Result<ScatterEnvironment> {
        let seed = KeyedStream::new(self.master_seed, trial).bits(&[ENVIRONMENT_TAG]);
        sample_environment(self.n_scatterers, self.room_width, self.room_height, self.carrier_freq, seed)
    }

    /// Receiver trajectory for `trial` that stays inside the room for
    /// `duration` seconds. A fixed `heading` overrides the random one.
    pub fn trajectory(&self, trial: u64, speed: f64, duration: f64, heading: Option<f64>) -> Result<Trajectory> {
        let mut rng = trial_rng(self.master_seed, trial);
        let (w, h) = (self.room_width, self.room_height);
        for _ in 0..PLACEMENT_ATTEMPTS {
            let start = Point::new(w * (0.25 + 0.5 * rng.random::<f64>()), h * (0.25 + 0.5 * rng.random::<f64>()));
            let phi = TWO_PI * rng.random::<f64>();
            let traj = Trajectory {
                start,
                speed,
                heading: heading.unwrap_or(phi),
            };
            let end = traj.position(duration);
            if (0.0..=w).contains(&end.x) && (0.0..=h).contains(&end.y) {
                return Ok(traj);
            }
        }
        Err(invalid(
            "room",
            format!("a {:.2} m path does not fit in a {w} x {h} m room", speed * duration),
        ))
    }

    fn validate(&self) -> Result<()> {
        ensure(self.n_scatterers >= 1, "n_scatterers", || "must be at least 1".into())?;
        ensure(self.room_width > 0.0 && self.room_height > 0.0, "room", || "dimensions must be positive".into())?;
        ensure(self.carrier_freq > 0.0, "carrier_freq", || "must be positive".into())
    }
}

/// Empirical distribution of |h|^2 over fresh environments and receiver
/// positions.
pub fn empirical_energy_cdf(spec: &EnsembleSpec, samples: u64) -> Result<EmpiricalCdf> {
    spec.validate()?;
    ensure(samples >= 1, "samples", || "need at least one sample".into())?;
    let energies = par_trials(samples, |i| {
        let env = spec.environment(i)?;
        let traj = spec.trajectory(i, 0.0, 0.0, None)?;
        Ok(channel_at(&env, traj.start).norm_sqr())
    })?;
    Ok(EmpiricalCdf::new(energies))
}

/// Ensemble estimate of E[h(t) h*(0)] at each lag in `lags` (seconds).
pub fn empirical_covariance(
    spec: &EnsembleSpec,
    speed: f64,
    lags: &[f64],
    trials: u64,
    heading: Option<f64>,
) -> Result<Vec<Complex64>> {
    spec.validate()?;
    ensure(trials >= 1, "trials", || "need at least one trial".into())?;
    ensure(lags.iter().all(|&t| t >= 0.0), "lags", || "must be nonnegative".into())?;
    let max_lag = lags.iter().cloned().fold(0.0, f64::max);
    let per_trial = par_trials(trials, |i| {
        let env = spec.environment(i)?;
        let traj = spec.trajectory(i, speed, max_lag, heading)?;
        let h0 = channel_at(&env, traj.start).conj();
        Ok(lags.iter().map(|&t| channel_at(&env, traj.position(t)) * h0).collect::<Vec<_>>())
    })?;
    let mut acc = vec![Complex64::new(0.0, 0.0); lags.len()];
    for row in &per_trial {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|a| a / trials as f64).collect())
}

/// Max-to-min energy ratios within a packet, in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketVariation {
    /// Every trial.
    pub all: EmpiricalCdf,
    /// Trials whose energy at the packet start exceeds the good threshold.
    pub conditioned: EmpiricalCdf,
}

/// Minimum number of samples per packet.
pub const PACKET_POINTS: usize = 50;

/// Distribution of `10 log10(max |h|^2 / min |h|^2)` over a packet of
/// `packet_duration` seconds.
pub fn within_packet_variation(
    spec: &EnsembleSpec,
    speed: f64,
    packet_duration: f64,
    good_threshold_db: f64,
    n_trials: u64,
) -> Result<PacketVariation> {
    spec.validate()?;
    ensure(packet_duration > 0.0, "packet_duration", || format!("must be positive, got {packet_duration}"))?;
    ensure(n_trials >= 10_000, "n_trials", || format!("need at least 10^4 trials, got {n_trials}"))?;
    let good = crate::db_to_linear(good_threshold_db);
    let rows = par_trials(n_trials, |i| {
        let env = spec.environment(i)?;
        let traj = spec.trajectory(i, speed, packet_duration, None)?;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        let mut first = 0.0;
        for k in 0..PACKET_POINTS {
            let t = packet_duration * k as f64 / (PACKET_POINTS - 1) as f64;
            let e = channel_at(&env, traj.position(t)).norm_sqr();
            if k == 0 {
                first = e;
            }
            lo = lo.min(e);
            hi = hi.max(e);
        }
        let ratio_db = if hi == lo { 0.0 } else { 10.0 * (hi / lo).log10() };
        Ok((ratio_db, first > good))
    })?;
    let all = rows.iter().map(|r| r.0).collect();
    let conditioned = rows.iter().filter(|r| r.1).map(|r| r.0).collect();
    Ok(PacketVariation {
        all: EmpiricalCdf::new(all),
        conditioned: EmpiricalCdf::new(conditioned),
    })
}
