//! Gaussian-process prediction of a future channel from past samples.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fading::{channel_at, EnsembleSpec};
use crate::special::{bessel_j0, marcum_q1, noncentral_chi2_2dof, TWO_PI};
use crate::stats::clopper_pearson;
use crate::stream::par_trials;

/// Past channel samples of a receiver moving at constant speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub times: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    /// m/s
    pub speed: f64,
    /// meters
    pub wavelength: f64,
}

impl ObservationSet {
    pub fn new(times: Vec<f64>, coefficients: Vec<Complex64>, speed: f64, wavelength: f64) -> Result<Self> {
        ensure(!times.is_empty(), "times", || "need at least one observation".into())?;
        ensure(times.len() == coefficients.len(), "coefficients", || {
            format!("{} times but {} coefficients", times.len(), coefficients.len())
        })?;
        ensure(times.windows(2).all(|w| w[1] > w[0]), "times", || "must be strictly increasing".into())?;
        ensure(speed >= 0.0, "speed", || format!("must be nonnegative, got {speed}"))?;
        ensure(wavelength > 0.0, "wavelength", || format!("must be positive, got {wavelength}"))?;
        Ok(Self {
            times,
            coefficients,
            speed,
            wavelength,
        })
    }

    fn kernel(&self, dt: f64) -> f64 {
        0.5 * bessel_j0(TWO_PI * self.speed * dt / self.wavelength)
    }
}

/// Per-component covariances of the observations and the prediction target.
#[derive(Debug, Clone, PartialEq)]
pub struct GpCovariance {
    pub k: DMatrix<f64>,
    pub k_star: DVector<f64>,
    pub k_star_star: f64,
}

pub fn build_covariance(obs: &ObservationSet, t_future: f64) -> GpCovariance {
    let m = obs.times.len();
    let k = DMatrix::from_fn(m, m, |i, j| obs.kernel(obs.times[j] - obs.times[i]));
    let k_star = DVector::from_fn(m, |i, _| obs.kernel(t_future - obs.times[i]));
    GpCovariance {
        k,
        k_star,
        k_star_star: 0.5,
    }
}

/// Conditional law of the future channel: each component is Gaussian with
/// mean `mu_i` / `mu_q` and variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpPrediction {
    pub mu_i: f64,
    pub mu_q: f64,
    pub sigma2: f64,
    pub nu: f64,
    pub t_future: f64,
}

/// Linear predictor `K^-1 K_*` and conditional variance for a fixed
/// observation geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct GpWeights {
    pub weights: DVector<f64>,
    pub sigma2: f64,
}

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Solve for the prediction weights with escalating diagonal jitter.
pub fn gp_weights(cov: &GpCovariance) -> Result<GpWeights> {
    let m = cov.k.nrows();
    let mut jitter = JITTER_START;
    loop {
        let regularized = &cov.k + DMatrix::identity(m, m) * jitter;
        if let Some(chol) = regularized.cholesky() {
            let weights = chol.solve(&cov.k_star);
            let sigma2 = (cov.k_star_star - cov.k_star.dot(&weights)).max(0.0);
            return Ok(GpWeights { weights, sigma2 });
        }
        jitter *= 10.0;
        if jitter > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::SingularCovariance { jitter: JITTER_MAX });
        }
    }
}

impl GpWeights {
    pub fn apply(&self, coefficients: &[Complex64], t_future: f64) -> GpPrediction {
        let mut mu = Complex64::new(0.0, 0.0);
        for (w, h) in self.weights.iter().zip(coefficients) {
            mu += h * *w;
        }
        GpPrediction {
            mu_i: mu.re,
            mu_q: mu.im,
            sigma2: self.sigma2,
            nu: mu.norm(),
            t_future,
        }
    }
}

pub fn predict(obs: &ObservationSet, t_future: f64) -> Result<GpPrediction> {
    let weights = gp_weights(&build_covariance(obs, t_future))?;
    Ok(weights.apply(&obs.coefficients, t_future))
}

/// P(|h(t_future)|^2 > threshold) under the conditional law.
pub fn energy_exceedance(pred: &GpPrediction, threshold: f64) -> Result<f64> {
    ensure(threshold >= 0.0, "threshold", || format!("must be nonnegative, got {threshold}"))?;
    if threshold == 0.0 {
        return Ok(1.0);
    }
    if pred.sigma2 <= 0.0 {
        return Ok(if pred.nu * pred.nu > threshold { 1.0 } else { 0.0 });
    }
    let s = pred.sigma2.sqrt();
    Ok(marcum_q1(pred.nu / s, threshold.sqrt() / s))
}

/// P(|h(t_future)|^2 <= x) under the conditional law.
pub fn energy_cdf(pred: &GpPrediction, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if pred.sigma2 <= 0.0 {
        return if pred.nu * pred.nu <= x { 1.0 } else { 0.0 };
    }
    noncentral_chi2_2dof(pred.nu * pred.nu / pred.sigma2, x / pred.sigma2).0
}

/// Energy quantile of the conditional law, by bisection on the CDF.
pub fn energy_quantile(pred: &GpPrediction, p: f64) -> f64 {
    if pred.sigma2 <= 0.0 {
        return pred.nu * pred.nu;
    }
    let mut lo = 0.0;
    let mut hi = (pred.nu + 10.0 * pred.sigma2.sqrt()).powi(2) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if energy_cdf(pred, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// The `nu` above which the exceedance probability passes 1/2; the good/bad
/// decision is then a threshold on the predicted mean magnitude.
pub fn decision_magnitude(sigma2: f64, threshold: f64) -> f64 {
    if sigma2 <= 0.0 {
        return threshold.sqrt();
    }
    let s = sigma2.sqrt();
    let b = threshold.sqrt() / s;
    if marcum_q1(0.0, b) > 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, b + 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if marcum_q1(mid, b) > 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    0.5 * (lo + hi) * s
}

/// Good-channel energy threshold for `rate` bits/s/Hz at a nominal SNR.
pub fn rate_threshold(snr_db: f64, rate: f64) -> f64 {
    (2f64.powf(rate) - 1.0) / crate::db_to_linear(snr_db)
}

/// Monte Carlo setup for misprediction experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionSetup {
    pub ensemble: EnsembleSpec,
    /// m/s
    pub speed: f64,
    /// Energy above which a channel is good.
    pub threshold: f64,
    /// Length of the observed past window, seconds.
    pub past_window: f64,
    /// Spacing of past samples, seconds.
    pub sample_interval: f64,
}

impl PredictionSetup {
    /// 3 GHz, 10 m/s, 100 scatterers, past 3 ms sampled every millisecond,
    /// threshold from a rate of 1 bit/s/Hz at `snr_db`.
    pub fn paper_default(snr_db: f64, seed: u64) -> Self {
        Self {
            ensemble: EnsembleSpec {
                master_seed: seed,
                ..EnsembleSpec::default()
            },
            speed: 10.0,
            threshold: rate_threshold(snr_db, 1.0),
            past_window: 3e-3,
            sample_interval: 1e-3,
        }
    }

    pub fn wavelength(&self) -> f64 {
        self.ensemble.wavelength()
    }

    /// Observation times relative to the present (the last sample is at 0).
    pub fn observation_times(&self) -> Vec<f64> {
        let count = ((self.past_window / self.sample_interval).round() as usize).max(1);
        (0..count)
            .map(|k| -((count - 1 - k) as f64) * self.sample_interval)
            .collect()
    }

    /// Probability that the channel is bad with no side information.
    pub fn unconditional_outage(&self) -> f64 {
        -(-self.threshold).exp_m1()
    }

    fn validate(&self) -> Result<()> {
        ensure(self.speed > 0.0, "speed", || "must be positive".into())?;
        ensure(self.threshold > 0.0, "threshold", || "must be positive".into())?;
        ensure(self.sample_interval > 0.0, "sample_interval", || "must be positive".into())?;
        ensure(self.past_window > 0.0, "past_window", || "must be positive".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MispredictionEstimate {
    pub horizon_m: f64,
    pub errors: u64,
    pub trials: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Fraction of trials whose good/bad call for the channel `horizon_m`
/// meters ahead disagrees with the truth.
pub fn misprediction_probability(setup: &PredictionSetup, horizon_m: f64, trials: u64) -> Result<MispredictionEstimate> {
    setup.validate()?;
    ensure(horizon_m >= 0.0, "horizon", || format!("must be nonnegative, got {horizon_m}"))?;
    ensure(trials >= 1, "trials", || "need at least one trial".into())?;
    let times = setup.observation_times();
    let t_future = horizon_m / setup.speed;
    let obs_shape = ObservationSet::new(
        times.clone(),
        vec![Complex64::new(0.0, 0.0); times.len()],
        setup.speed,
        setup.wavelength(),
    )?;
    let weights = gp_weights(&build_covariance(&obs_shape, t_future))?;
    let nu_star = decision_magnitude(weights.sigma2, setup.threshold);
    let t0 = times[0];
    let span = t_future - t0;
    let outcomes = par_trials(trials, |i| {
        let env = setup.ensemble.environment(i)?;
        let traj = setup.ensemble.trajectory(i, setup.speed, span, None)?;
        let obs: Vec<Complex64> = times.iter().map(|&t| channel_at(&env, traj.position(t - t0))).collect();
        let pred = weights.apply(&obs, t_future);
        let truth = channel_at(&env, traj.position(t_future - t0)).norm_sqr() > setup.threshold;
        Ok(((pred.nu > nu_star) != truth) as u64)
    })?;
    let errors: u64 = outcomes.iter().sum();
    let (ci_low, ci_high) = clopper_pearson(errors, trials, 0.95);
    Ok(MispredictionEstimate {
        horizon_m,
        errors,
        trials,
        rate: errors as f64 / trials as f64,
        ci_low,
        ci_high,
    })
}

/// Horizons from lambda/1000 to lambda, log spaced.
pub fn default_horizons(wavelength: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|k| wavelength * 10f64.powf(-3.0 + 3.0 * k as f64 / (points - 1) as f64))
        .collect()
}

/// Smallest horizon, in meters, at which misprediction reaches
/// `reliability`. The coarse log grid brackets the first crossing, which
/// is then refined by bisection; every probe reuses the same trials.
pub fn coherence_distance(setup: &PredictionSetup, reliability: f64, trials: u64) -> Result<f64> {
    ensure(reliability > 0.0 && reliability < 1.0, "reliability", || {
        format!("must lie in (0, 1), got {reliability}")
    })?;
    let lambda = setup.wavelength();
    let plateau = [0.25, 0.5, 1.0]
        .iter()
        .map(|f| misprediction_probability(setup, f * lambda, trials).map(|e| e.rate))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if reliability > plateau {
        return Err(Error::UnreachableReliability {
            requested: reliability,
            plateau,
        });
    }
    let rate = |h: f64| misprediction_probability(setup, h, trials).map(|e| e.rate);
    if rate(0.0)? >= reliability {
        return Ok(0.0);
    }
    let grid = default_horizons(lambda, 31);
    let mut lo = 0.0;
    let mut hi = None;
    for &h in &grid {
        if rate(h)? >= reliability {
            hi = Some(h);
            break;
        }
        lo = h;
    }
    let mut hi = match hi {
        Some(h) => h,
        None => return Ok(lambda),
    };
    for _ in 0..20 {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        if rate(mid)? >= reliability {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-3 * hi {
            break;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs3() -> ObservationSet {
        let h = vec![Complex64::new(0.3, -0.8), Complex64::new(0.5, -0.6), Complex64::new(0.7, -0.2)];
        ObservationSet::new(vec![-2e-3, -1e-3, 0.0], h, 10.0, 0.1).unwrap()
    }

    #[test]
    fn single_observation_covariance() {
        let o = ObservationSet::new(vec![0.0], vec![Complex64::new(1.0, 0.0)], 10.0, 0.1).unwrap();
        let c = build_covariance(&o, 0.0);
        assert_eq!(c.k[(0, 0)], 0.5);
        assert_eq!(c.k_star[0], 0.5);
        assert_eq!(c.k_star_star, 0.5);
    }

    #[test]
    fn three_sample_covariance_entries() {
        let o = ObservationSet::new(vec![0.0, 1e-3, 2e-3], vec![Complex64::new(0.0, 0.0); 3], 10.0, 0.1).unwrap();
        let c = build_covariance(&o, 3e-3);
        // J0(0.2 pi) = 0.9037126420924663
        assert!((c.k[(0, 1)] - 0.451_856_321_046_233).abs() < 1e-12);
        for i in 0..3 {
            assert_eq!(c.k[(i, i)] * 2.0, 1.0);
            for j in 0..3 {
                assert_eq!(c.k[(i, j)], c.k[(j, i)]);
            }
        }
    }

    #[test]
    fn predicting_an_observed_time_recovers_it() {
        let o = obs3();
        let p = predict(&o, 0.0).unwrap();
        assert!((Complex64::new(p.mu_i, p.mu_q) - o.coefficients[2]).norm() < 1e-6);
        assert!(p.sigma2 <= 1e-6);
    }

    #[test]
    fn far_future_is_unconditional() {
        let p = predict(&obs3(), 1e4).unwrap();
        assert!(p.nu < 1e-2);
        assert!((p.sigma2 - 0.5).abs() < 1e-2);
    }

    #[test]
    fn variance_grows_with_horizon() {
        let o = obs3();
        assert!(predict(&o, 1e-4).unwrap().sigma2 < predict(&o, 1e-3).unwrap().sigma2);
    }

    #[test]
    fn duplicate_times_rejected() {
        assert!(ObservationSet::new(vec![0.0, 0.0], vec![Complex64::new(0.0, 0.0); 2], 1.0, 0.1).is_err());
    }

    #[test]
    fn exceedance_limits() {
        let p = GpPrediction {
            mu_i: 0.0,
            mu_q: 0.0,
            sigma2: 0.3,
            nu: 0.0,
            t_future: 0.0,
        };
        assert!((energy_exceedance(&p, 0.7).unwrap() - (-0.7f64 / 0.6).exp()).abs() < 1e-12);
        assert_eq!(energy_exceedance(&p, 0.0).unwrap(), 1.0);
        let point = GpPrediction { sigma2: 0.0, nu: 1.0, ..p };
        assert_eq!(energy_exceedance(&point, 0.9).unwrap(), 1.0);
        assert_eq!(energy_exceedance(&point, 1.1).unwrap(), 0.0);
    }

    #[test]
    fn exceedance_matches_monte_carlo() {
        let p = GpPrediction {
            mu_i: 1.0,
            mu_q: 0.0,
            sigma2: 0.25,
            nu: 1.0,
            t_future: 0.0,
        };
        let exact = energy_exceedance(&p, 1.0).unwrap();
        // Q1(2, 2)
        assert!((exact - 0.6035009606119934).abs() < 1e-12, "{exact}");
        let s = crate::stream::KeyedStream::new(17, 0);
        let n = 1_000_000u64;
        // CN(mu, 2 sigma^2): standard complex normal has variance 1/2 per component
        let scale = (2.0 * p.sigma2).sqrt();
        let hits = (0..n)
            .filter(|&i| (Complex64::new(1.0, 0.0) + s.complex_normal(&[i]) * scale).norm_sqr() > 1.0)
            .count();
        let est = hits as f64 / n as f64;
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((est - exact).abs() < 3.0 * se, "{est} vs {exact}");
    }

    #[test]
    fn quantile_inverts_cdf() {
        let p = GpPrediction {
            mu_i: 0.6,
            mu_q: 0.3,
            sigma2: 0.1,
            nu: 0.45f64.sqrt(),
            t_future: 0.0,
        };
        for &q in &[0.05, 0.5, 0.95] {
            assert!((energy_cdf(&p, energy_quantile(&p, q)) - q).abs() < 1e-9);
        }
    }

    #[test]
    fn decision_magnitude_is_the_half_point() {
        for &(s2, th) in &[(0.1, 0.2), (0.01, 1.0), (0.4, 0.05), (0.2, 0.5)] {
            let nu = decision_magnitude(s2, th);
            let pred = GpPrediction {
                mu_i: nu,
                mu_q: 0.0,
                sigma2: s2,
                nu,
                t_future: 0.0,
            };
            let e = energy_exceedance(&pred, th).unwrap();
            assert!(nu == 0.0 && e >= 0.5 || (e - 0.5).abs() < 1e-9, "{s2} {th} {nu} {e}");
        }
    }

    #[test]
    fn observation_times_cover_window() {
        let s = PredictionSetup::paper_default(10.0, 0);
        assert_eq!(s.observation_times(), vec![-2e-3, -1e-3, 0.0]);
        assert!((s.threshold - 0.1).abs() < 1e-12);
    }

    #[test]
    fn dense_sampling_predicts_present() {
        let mut s = PredictionSetup::paper_default(10.0, 3);
        s.sample_interval = 1e-4;
        s.past_window = 1e-3;
        let e = misprediction_probability(&s, 0.0, 20_000).unwrap();
        assert!(e.rate < 1e-4);
    }
}
