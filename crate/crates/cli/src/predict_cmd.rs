use clap::{Args, Subcommand};
use serde::Serialize;
use urllc_core::fading::{channel_at, EnsembleSpec};
use urllc_core::io::{fmt_db, fmt_prob, fmt_real, CsvTable};
use urllc_core::predictor::{
    coherence_distance, default_horizons, energy_exceedance, energy_quantile, misprediction_probability, predict,
    rate_threshold, ObservationSet, PredictionSetup,
};

use crate::fading_cmd::EnsembleArgs;
use crate::output::Outputs;
use crate::{usage, Context};

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct SamplingArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Receiver speed, m/s.
    #[arg(long, default_value_t = 10.0)]
    pub speed: f64,
    /// Length of the observed past, milliseconds.
    #[arg(long, default_value_t = 3.0)]
    pub past_ms: f64,
    /// Spacing of past observations, milliseconds.
    #[arg(long, default_value_t = 1.0)]
    pub sample_ms: f64,
    /// Spectral efficiency that a good channel must support, bit/s/Hz.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
}

impl SamplingArgs {
    fn setup(&self, snr_db: f64, seed: u64) -> anyhow::Result<PredictionSetup> {
        if self.speed <= 0.0 || self.past_ms <= 0.0 || self.sample_ms <= 0.0 {
            return Err(usage("--speed, --past-ms and --sample-ms must be positive"));
        }
        Ok(PredictionSetup {
            ensemble: EnsembleSpec {
                master_seed: seed,
                ..self.ensemble.spec(seed)
            },
            speed: self.speed,
            threshold: rate_threshold(snr_db, self.rate),
            past_window: self.past_ms * 1e-3,
            sample_interval: self.sample_ms * 1e-3,
        })
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictCmd {
    /// Predicted distribution of future channel energy for one trajectory.
    Distribution {
        #[command(flatten)]
        sampling: SamplingArgs,
        /// Nominal SNR setting the good-channel threshold, dB.
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        snr_db: f64,
        /// Environment index within the seeded ensemble.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Horizons tabulated between lambda/1000 and lambda.
        #[arg(long, default_value_t = 31)]
        points: usize,
    },
    /// Misprediction rate of the good/bad call against horizon.
    Misprediction {
        #[command(flatten)]
        sampling: SamplingArgs,
        /// Nominal SNR setting the good-channel threshold, dB.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Horizons between lambda/1000 and lambda.
        #[arg(long, default_value_t = 16)]
        points: usize,
    },
    /// Distance over which the channel stays predictable to a reliability.
    Coherence {
        #[command(flatten)]
        sampling: SamplingArgs,
        /// Tolerated misprediction probability.
        #[arg(long)]
        reliability: f64,
        /// Nominal SNR setting the good-channel threshold, dB.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
}

#[derive(Serialize)]
struct CoherenceRecord {
    reliability: f64,
    snr_db: f64,
    threshold: f64,
    speed_mps: f64,
    distance_m: f64,
    distance_wavelengths: f64,
    time_s: f64,
    trials: u64,
    seed: u64,
}

pub fn run(cmd: &PredictCmd, ctx: &Context, out: &mut Outputs) -> anyhow::Result<()> {
    match cmd {
        PredictCmd::Distribution {
            sampling,
            snr_db,
            trial,
            points,
        } => {
            let setup = sampling.setup(*snr_db, ctx.seed)?;
            let lambda = setup.wavelength();
            let times = setup.observation_times();
            let horizons = default_horizons(lambda, *points);
            let span = horizons.iter().cloned().fold(0.0, f64::max) / setup.speed - times[0];
            let env = setup.ensemble.environment(*trial)?;
            let traj = setup.ensemble.trajectory(*trial, setup.speed, span, None)?;
            let at = |t: f64| channel_at(&env, traj.position(t - times[0]));
            let obs = ObservationSet::new(times.clone(), times.iter().map(|&t| at(t)).collect(), setup.speed, lambda)?;
            let mut t = CsvTable::new([
                "horizon_wavelengths",
                "horizon_m",
                "mu_i",
                "mu_q",
                "sigma2",
                "nu",
                "energy_q05",
                "energy_q50",
                "energy_q95",
                "p_good",
                "true_energy",
            ]);
            t.comment(format!(
                "trial {trial}, past {} ms every {} ms, speed {} m/s, threshold {} (SNR {} dB), seed = {}",
                sampling.past_ms,
                sampling.sample_ms,
                setup.speed,
                fmt_real(setup.threshold),
                fmt_db(*snr_db),
                ctx.seed
            ));
            for &h in &horizons {
                let tf = h / setup.speed;
                let p = predict(&obs, tf)?;
                t.push(vec![
                    fmt_real(h / lambda),
                    fmt_real(h),
                    fmt_real(p.mu_i),
                    fmt_real(p.mu_q),
                    fmt_real(p.sigma2),
                    fmt_real(p.nu),
                    fmt_real(energy_quantile(&p, 0.05)),
                    fmt_real(energy_quantile(&p, 0.5)),
                    fmt_real(energy_quantile(&p, 0.95)),
                    fmt_prob(energy_exceedance(&p, setup.threshold)?),
                    fmt_real(at(tf).norm_sqr()),
                ]);
            }
            out.csv("predict_distribution.csv", &t)
        }
        PredictCmd::Misprediction {
            sampling,
            snr_db,
            trials,
            points,
        } => {
            let setup = sampling.setup(*snr_db, ctx.seed)?;
            let lambda = setup.wavelength();
            let mut t = CsvTable::new(["horizon_wavelengths", "horizon_m", "error_rate", "ci_low", "ci_high"]);
            t.comment(format!(
                "past {} ms every {} ms, speed {} m/s, SNR {} dB, threshold {}, {trials} trials per horizon, seed = {}",
                sampling.past_ms,
                sampling.sample_ms,
                setup.speed,
                fmt_db(*snr_db),
                fmt_real(setup.threshold),
                ctx.seed
            ));
            t.comment(format!("unconditional outage = {}", fmt_prob(setup.unconditional_outage())));
            for h in default_horizons(lambda, *points) {
                let e = misprediction_probability(&setup, h, *trials)?;
                t.push(vec![
                    fmt_real(h / lambda),
                    fmt_real(h),
                    fmt_prob(e.rate),
                    fmt_prob(e.ci_low),
                    fmt_prob(e.ci_high),
                ]);
            }
            out.csv("predict_misprediction.csv", &t)
        }
        PredictCmd::Coherence {
            sampling,
            reliability,
            snr_db,
            trials,
        } => {
            let setup = sampling.setup(*snr_db, ctx.seed)?;
            let d = coherence_distance(&setup, *reliability, *trials)?;
            let rec = CoherenceRecord {
                reliability: *reliability,
                snr_db: *snr_db,
                threshold: setup.threshold,
                speed_mps: setup.speed,
                distance_m: d,
                distance_wavelengths: d / setup.wavelength(),
                time_s: d / setup.speed,
                trials: *trials,
                seed: ctx.seed,
            };
            out.json("predict_coherence.json", &rec)
        }
    }
}
