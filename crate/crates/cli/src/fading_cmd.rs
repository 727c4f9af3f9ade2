use clap::{Args, Subcommand};
use serde::Serialize;
use urllc_core::fading::{
    channel_trace, empirical_covariance, empirical_energy_cdf, energy_bandwidth, psd_estimate, rayleigh_energy_cdf,
    theoretical_covariance, within_packet_variation, EnsembleSpec, PsdOptions,
};
use urllc_core::io::{fmt_prob, fmt_real, CsvTable};

use crate::output::Outputs;
use crate::{usage, Context};

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct EnsembleArgs {
    /// Scatterers per environment.
    #[arg(long = "n", default_value_t = 100)]
    pub n_scatterers: usize,
    /// Carrier frequency, Hz.
    #[arg(long, default_value_t = 3e9)]
    pub fc: f64,
    /// Side of the square room, meters.
    #[arg(long, default_value_t = 20.0)]
    pub room: f64,
}

impl EnsembleArgs {
    pub fn spec(&self, seed: u64) -> EnsembleSpec {
        EnsembleSpec {
            n_scatterers: self.n_scatterers,
            room_width: self.room,
            room_height: self.room,
            carrier_freq: self.fc,
            master_seed: seed,
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingCmd {
    /// Empirical CDF of channel energy against the Rayleigh law.
    Cdf {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Independent environments sampled.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Rows in the output table.
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
    /// Ensemble temporal covariance against the Bessel kernel.
    Covariance {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Receiver speed, m/s.
        #[arg(long, default_value_t = 10.0)]
        speed: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Largest displacement, wavelengths.
        #[arg(long, default_value_t = 1.0)]
        max_wavelengths: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
    /// One-sided power spectral density in spatial frequency.
    Psd {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long, default_value_t = 10.0)]
        speed: f64,
        /// Trace length, seconds.
        #[arg(long, default_value_t = 1.5)]
        duration: f64,
        /// Hz.
        #[arg(long, default_value_t = 4000.0)]
        sample_rate: f64,
        #[arg(long, default_value_t = 100)]
        traces: u64,
        /// Welch segment length in samples.
        #[arg(long)]
        segment: Option<usize>,
    },
    /// Energy-capturing bandwidth against speed and energy fraction.
    Bandwidth {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// m/s, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        speeds: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.99,0.999,0.9999")]
        fractions: Vec<f64>,
        /// Trace length in wavelengths travelled.
        #[arg(long, default_value_t = 150.0)]
        path_wavelengths: f64,
        /// Samples per wavelength travelled.
        #[arg(long, default_value_t = 40.0)]
        samples_per_wavelength: f64,
        #[arg(long, default_value_t = 100)]
        traces: u64,
    },
    /// Max-to-min energy ratio within a packet.
    PacketVariation {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long, default_value_t = 10.0)]
        speed: f64,
        /// Packet duration, microseconds.
        #[arg(long, default_value_t = 50.0)]
        packet_us: f64,
        /// Conditioning threshold on the starting energy, dB relative to the mean.
        #[arg(long, default_value_t = -7.0, allow_hyphen_values = true)]
        threshold_db: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Largest ratio tabulated, dB.
        #[arg(long, default_value_t = 10.0)]
        max_db: f64,
        #[arg(long, default_value_t = 0.05)]
        step_db: f64,
    },
    /// One channel trace and the environment that produced it.
    Trace {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long, default_value_t = 10.0)]
        speed: f64,
        /// Seconds.
        #[arg(long, default_value_t = 0.01)]
        duration: f64,
        /// Hz.
        #[arg(long, default_value_t = 100_000.0)]
        sample_rate: f64,
        /// Environment index within the seeded ensemble.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
}

pub fn run(cmd: &FadingCmd, ctx: &Context, out: &mut Outputs) -> anyhow::Result<()> {
    match cmd {
        FadingCmd::Cdf {
            ensemble,
            samples,
            points,
        } => {
            let spec = ensemble.spec(ctx.seed);
            let cdf = empirical_energy_cdf(&spec, *samples)?;
            let ks = cdf.ks_distance(|x| rayleigh_energy_cdf(x.max(0.0)).unwrap_or(0.0));
            let mut t = CsvTable::new(["energy", "empirical_cdf", "rayleigh_cdf"]);
            t.comment(format!(
                "n_scatterers = {}, samples = {samples}, carrier = {} Hz, seed = {}",
                ensemble.n_scatterers, ensemble.fc, ctx.seed
            ));
            t.comment(format!("KS distance to Exp(1) = {}", fmt_prob(ks)));
            if ensemble.n_scatterers <= 2 {
                t.comment(format!(
                    "warning: {} scatterers are far from Rayleigh; deep fades are much more likely and need roughly 10 dB of extra power",
                    ensemble.n_scatterers
                ));
            }
            for (x, p) in cdf.table(*points) {
                t.push(vec![fmt_real(x), fmt_prob(p), fmt_prob(rayleigh_energy_cdf(x)?)]);
            }
            out.csv("fading_cdf.csv", &t)
        }
        FadingCmd::Covariance {
            ensemble,
            speed,
            trials,
            max_wavelengths,
            points,
        } => {
            if *speed <= 0.0 {
                return Err(usage("--speed must be positive"));
            }
            let spec = ensemble.spec(ctx.seed);
            let lambda = spec.wavelength();
            let points = (*points).max(2);
            let dists: Vec<f64> = (0..points)
                .map(|k| max_wavelengths * k as f64 / (points - 1) as f64)
                .collect();
            let lags: Vec<f64> = dists.iter().map(|d| d * lambda / speed).collect();
            let cov = empirical_covariance(&spec, *speed, &lags, *trials, None)?;
            let mut t = CsvTable::new(["distance_wavelengths", "empirical", "theoretical_j0"]);
            t.comment(format!(
                "|E[h(t) h*(0)]| over {trials} environments, n_scatterers = {}, speed = {speed} m/s, seed = {}",
                ensemble.n_scatterers, ctx.seed
            ));
            for ((d, lag), c) in dists.iter().zip(&lags).zip(&cov) {
                t.push(vec![
                    fmt_real(*d),
                    fmt_real(c.norm()),
                    fmt_real(theoretical_covariance(*speed, *lag, lambda)),
                ]);
            }
            out.csv("fading_covariance.csv", &t)
        }
        FadingCmd::Psd {
            ensemble,
            speed,
            duration,
            sample_rate,
            traces,
            segment,
        } => {
            let spec = ensemble.spec(ctx.seed);
            let opts = PsdOptions {
                duration: *duration,
                sample_rate: *sample_rate,
                n_traces: *traces,
                segment_len: *segment,
            };
            let s = psd_estimate(&spec, *speed, &opts)?;
            let mut t = CsvTable::new(["spatial_freq_cycles_per_m", "psd_per_cycle_per_m"]);
            t.comment(format!(
                "Welch estimate over {traces} traces, speed = {speed} m/s, sample rate = {sample_rate} Hz, seed = {}",
                ctx.seed
            ));
            t.comment(format!(
                "Doppler edge = {} cycles/m, total energy = {}",
                fmt_real(1.0 / spec.wavelength()),
                fmt_real(s.total_energy)
            ));
            for (f, p) in s.frequencies.iter().zip(&s.power_density) {
                t.push(vec![fmt_real(*f), fmt_real(*p)]);
            }
            out.csv("fading_psd.csv", &t)
        }
        FadingCmd::Bandwidth {
            ensemble,
            speeds,
            fractions,
            path_wavelengths,
            samples_per_wavelength,
            traces,
        } => {
            let spec = ensemble.spec(ctx.seed);
            let lambda = spec.wavelength();
            let mut t = CsvTable::new(["speed_mps", "fraction", "bandwidth_cycles_per_m", "bandwidth_hz"]);
            t.comment(format!(
                "traces of {path_wavelengths} wavelengths, {samples_per_wavelength} samples per wavelength, {traces} traces per speed, seed = {}",
                ctx.seed
            ));
            for &v in speeds {
                if v <= 0.0 {
                    return Err(usage("--speeds must be positive"));
                }
                let opts = PsdOptions {
                    duration: path_wavelengths * lambda / v,
                    sample_rate: samples_per_wavelength * v / lambda,
                    n_traces: *traces,
                    segment_len: None,
                };
                let s = psd_estimate(&spec, v, &opts)?;
                for &f in fractions {
                    let b = energy_bandwidth(&s, f)?;
                    t.push(vec![fmt_real(v), fmt_real(f), fmt_real(b), fmt_real(b * v)]);
                }
            }
            out.csv("fading_bandwidth.csv", &t)
        }
        FadingCmd::PacketVariation {
            ensemble,
            speed,
            packet_us,
            threshold_db,
            trials,
            max_db,
            step_db,
        } => {
            if *step_db <= 0.0 || *max_db <= 0.0 {
                return Err(usage("--max-db and --step-db must be positive"));
            }
            let spec = ensemble.spec(ctx.seed);
            let pv = within_packet_variation(&spec, *speed, packet_us * 1e-6, *threshold_db, *trials)?;
            let mut t = CsvTable::new(["ratio_db", "ccdf_all", "ccdf_conditioned"]);
            t.comment(format!(
                "packet = {packet_us} us, speed = {speed} m/s, conditioned on starting energy above {threshold_db} dB, {trials} trials, seed = {}",
                ctx.seed
            ));
            t.comment(format!(
                "99th percentile: all {:.3} dB, conditioned {:.3} dB ({} conditioned trials)",
                pv.all.quantile(0.99),
                pv.conditioned.quantile(0.99),
                pv.conditioned.len()
            ));
            let steps = (max_db / step_db).round() as usize;
            for k in 0..=steps {
                let r = k as f64 * step_db;
                t.push(vec![
                    format!("{r:.2}"),
                    fmt_prob(pv.all.ccdf(r)),
                    fmt_prob(pv.conditioned.ccdf(r)),
                ]);
            }
            out.csv("fading_packet_variation.csv", &t)
        }
        FadingCmd::Trace {
            ensemble,
            speed,
            duration,
            sample_rate,
            trial,
        } => {
            let spec = ensemble.spec(ctx.seed);
            let env = spec.environment(*trial)?;
            let traj = spec.trajectory(*trial, *speed, *duration, None)?;
            let count = (duration * sample_rate).floor() as usize + 1;
            let times: Vec<f64> = (0..count).map(|k| k as f64 / sample_rate).collect();
            let trace = channel_trace(&env, &traj, &times)?;
            out.text("fading_trace.csv", &trace.to_csv())?;
            let mut env_json = env.to_json();
            env_json.push('\n');
            out.text("environment.json", &env_json)
        }
    }
}
