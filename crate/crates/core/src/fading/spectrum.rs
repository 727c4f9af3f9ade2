use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::ensemble::EnsembleSpec;
use super::environment::channel_at;
use crate::error::{ensure, Result};
use crate::special::TWO_PI;
use crate::stream::par_trials;

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Bin centers, cycles per meter.
    pub frequencies: Vec<f64>,
    /// Power per cycle/meter.
    pub power_density: Vec<f64>,
    pub total_energy: f64,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        self.frequencies.get(1).map_or(0.0, |f1| f1 - self.frequencies[0])
    }

    /// Energy at or below `cutoff` cycles/meter.
    pub fn energy_below(&self, cutoff: f64) -> f64 {
        let df = self.bin_width();
        self.frequencies
            .iter()
            .zip(&self.power_density)
            .filter(|(&f, _)| f <= cutoff)
            .map(|(_, &p)| p * df)
            .sum()
    }

    /// CSV with header `spatial_freq_cycles_per_m,psd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("spatial_freq_cycles_per_m,psd_power_per_cycle_per_m\n");
        for (f, p) in self.frequencies.iter().zip(&self.power_density) {
            out.push_str(&format!("{f:e},{p:e}\n"));
        }
        out
    }
}

/// Welch estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdOptions {
    /// Trace length, seconds.
    pub duration: f64,
    /// Hz.
    pub sample_rate: f64,
    pub n_traces: u64,
    /// Samples per Welch segment. Defaults to the largest power of two not
    /// above half the trace length.
    pub segment_len: Option<usize>,
}

fn hann(len: usize) -> Vec<f64> {
    // periodic form, so 50% overlapped windows sum to a constant
    (0..len)
        .map(|k| 0.5 - 0.5 * (TWO_PI * k as f64 / len as f64).cos())
        .collect()
}

/// Averaged modified periodogram (Hann window, 50% overlap, mean removed)
/// over independent traces, folded to one side and expressed in spatial
/// frequency.
pub fn psd_estimate(spec: &EnsembleSpec, speed: f64, opts: &PsdOptions) -> Result<Spectrum> {
    let lambda = spec.wavelength();
    let doppler = speed / lambda;
    ensure(speed > 0.0, "speed", || "must be positive for a spectrum".into())?;
    ensure(opts.sample_rate > 20.0 * doppler, "sample_rate", || {
        format!(
            "{} Hz does not resolve super-Doppler content; need more than 20 x {doppler:.1} Hz",
            opts.sample_rate
        )
    })?;
    ensure(opts.duration * speed >= 100.0 * lambda * (1.0 - 1e-12), "duration", || {
        format!(
            "trace covers {:.3} m; need at least 100 wavelengths ({:.3} m)",
            opts.duration * speed,
            100.0 * lambda
        )
    })?;
    ensure(opts.n_traces >= 1, "n_traces", || "need at least one trace".into())?;
    let n = (opts.duration * opts.sample_rate).round() as usize;
    let seg = opts.segment_len.unwrap_or_else(|| {
        let mut p = 1usize;
        while p * 2 <= n / 2 {
            p *= 2;
        }
        p
    });
    ensure(seg >= 8 && seg <= n, "segment_len", || format!("must lie in [8, {n}], got {seg}"))?;
    let step = (seg / 2).max(1);
    let window = hann(seg);
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let fs = opts.sample_rate;

    let per_trace = par_trials(opts.n_traces, |i| {
        let env = spec.environment(i)?;
        let duration = (n - 1) as f64 / fs;
        let traj = spec.trajectory(i, speed, duration, None)?;
        let mut x: Vec<Complex64> = (0..n).map(|k| channel_at(&env, traj.position(k as f64 / fs))).collect();
        let mean = x.iter().sum::<Complex64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let mut acc = vec![0.0; seg];
        let mut segments = 0usize;
        let mut buf = vec![Complex64::new(0.0, 0.0); seg];
        let mut start = 0;
        while start + seg <= n {
            for (b, (v, w)) in buf.iter_mut().zip(x[start..start + seg].iter().zip(&window)) {
                *b = v * w;
            }
            fft.process(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            segments += 1;
            start += step;
        }
        let scale = 1.0 / (fs * win_power * segments as f64);
        Ok(acc.into_iter().map(|a| a * scale).collect::<Vec<f64>>())
    })?;

    // two-sided density, Hz
    let mut two_sided = vec![0.0; seg];
    for row in &per_trace {
        for (t, v) in two_sided.iter_mut().zip(row) {
            *t += v / opts.n_traces as f64;
        }
    }
    // fold onto nonnegative frequencies
    let half = seg / 2;
    let mut one_sided = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let neg = if k == 0 || (seg % 2 == 0 && k == half) { 0.0 } else { two_sided[seg - k] };
        one_sided.push(two_sided[k] + neg);
    }
    let df_hz = fs / seg as f64;
    let frequencies: Vec<f64> = (0..=half).map(|k| k as f64 * df_hz / speed).collect();
    let power_density: Vec<f64> = one_sided.into_iter().map(|p| p * speed).collect();
    let df = df_hz / speed;
    let total_energy = power_density.iter().map(|p| p * df).sum();
    Ok(Spectrum {
        frequencies,
        power_density,
        total_energy,
    })
}

/// Smallest band `[0, B]` holding at least `fraction` of the spectrum's
/// energy, interpolating linearly inside the crossing bin.
pub fn energy_bandwidth(spec: &Spectrum, fraction: f64) -> Result<f64> {
    ensure(fraction > 0.0 && fraction < 1.0, "fraction", || format!("must lie in (0, 1), got {fraction}"))?;
    ensure(spec.total_energy > 0.0, "spectrum", || "total energy must be positive".into())?;
    let df = spec.bin_width();
    let target = fraction * spec.total_energy;
    let mut cum = 0.0;
    for (k, (&f, &p)) in spec.frequencies.iter().zip(&spec.power_density).enumerate() {
        let next = cum + p * df;
        if next >= target {
            if k == 0 || p == 0.0 {
                return Ok(f);
            }
            let prev_f = spec.frequencies[k - 1];
            return Ok(prev_f + (target - cum) / (p * df) * (f - prev_f));
        }
        cum = next;
    }
    Ok(*spec.frequencies.last().expect("nonempty spectrum"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize) -> Spectrum {
        let frequencies: Vec<f64> = (0..n).map(|k| k as f64).collect();
        Spectrum {
            power_density: vec![1.0; n],
            total_energy: n as f64,
            frequencies,
        }
    }

    #[test]
    fn bandwidth_of_flat_spectrum() {
        let s = flat(101);
        assert!((energy_bandwidth(&s, 0.5).unwrap() - 49.5).abs() < 1e-9);
        assert!((energy_bandwidth(&s, 1.0 - 1e-15).unwrap() - 100.0).abs() < 1e-9);
        assert!(energy_bandwidth(&s, 0.0).is_err());
        assert!(energy_bandwidth(&s, 1.0).is_err());
    }

    #[test]
    fn hann_overlap_adds_to_constant() {
        let w = hann(64);
        for k in 0..32 {
            assert!((w[k] + w[k + 32] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_coarse_sampling_and_short_traces() {
        let spec = EnsembleSpec::default();
        let fd = 10.0 / spec.wavelength();
        let ok = PsdOptions {
            duration: 1.0,
            sample_rate: 40.0 * fd,
            n_traces: 1,
            segment_len: None,
        };
        assert!(psd_estimate(&spec, 10.0, &PsdOptions { sample_rate: 10.0 * fd, ..ok }).is_err());
        assert!(psd_estimate(&spec, 10.0, &PsdOptions { duration: 0.5, ..ok }).is_err());
    }

    #[test]
    fn spectrum_integrates_to_variance() {
        let spec = EnsembleSpec {
            room_width: 40.0,
            room_height: 40.0,
            ..EnsembleSpec::default()
        };
        let fd = 10.0 / spec.wavelength();
        let s = psd_estimate(
            &spec,
            10.0,
            &PsdOptions {
                duration: 1.0,
                sample_rate: 40.0 * fd,
                n_traces: 4,
                segment_len: None,
            },
        )
        .unwrap();
        let integral: f64 = s.power_density.iter().sum::<f64>() * s.bin_width();
        assert!((integral - s.total_energy).abs() <= 1e-9 * s.total_energy);
        assert!(s.power_density.iter().all(|&p| p >= 0.0));
        assert!((s.total_energy - 1.0).abs() < 0.5);
    }
}
