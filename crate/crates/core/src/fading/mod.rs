//! Sum-of-scatterers fading: channel coefficients, energy distributions,
//! temporal covariance, spectra and within-packet variation.

mod ensemble;
mod environment;
mod spectrum;

pub use ensemble::{
    empirical_covariance, empirical_energy_cdf, within_packet_variation, EnsembleSpec, PacketVariation,
};
pub use environment::{
    channel_at, channel_trace, sample_environment, ChannelTrace, EnvironmentDocument, Point, ScatterEnvironment,
    Trajectory, ENVIRONMENT_FORMAT_VERSION,
};
pub use spectrum::{energy_bandwidth, psd_estimate, PsdOptions, Spectrum};

use crate::error::{ensure, Result};
use crate::special::{bessel_j0, noncentral_chi2_2dof, TWO_PI};

/// CDF of the unit-mean exponential energy of a Rayleigh channel.
pub fn rayleigh_energy_cdf(x: f64) -> Result<f64> {
    ensure(x >= 0.0, "x", || format!("energy must be nonnegative, got {x}"))?;
    Ok(-(-x).exp_m1())
}

/// CDF of the unit-mean energy of a Rician channel with Rice factor `k_factor`.
///
/// With line-of-sight power K/(K+1) and diffuse power 1/(K+1), the energy
/// scaled by the per-component diffuse variance is noncentral chi-square
/// with two degrees of freedom and noncentrality 2K.
pub fn rician_energy_cdf(x: f64, k_factor: f64) -> Result<f64> {
    ensure(x >= 0.0, "x", || format!("energy must be nonnegative, got {x}"))?;
    ensure(k_factor >= 0.0, "k_factor", || format!("must be nonnegative, got {k_factor}"))?;
    Ok(noncentral_chi2_2dof(2.0 * k_factor, 2.0 * (k_factor + 1.0) * x).0)
}

/// Normalized temporal autocorrelation J0(2 pi v t / lambda).
///
/// The per-component covariance is half of this value.
pub fn theoretical_covariance(speed: f64, t: f64, wavelength: f64) -> f64 {
    bessel_j0(TWO_PI * speed * t / wavelength)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_cdf_values() {
        assert_eq!(rayleigh_energy_cdf(0.0).unwrap(), 0.0);
        assert!((rayleigh_energy_cdf(2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert!(rayleigh_energy_cdf(-1.0).is_err());
    }

    #[test]
    fn rician_reduces_to_rayleigh() {
        for k in 0..200 {
            let x = k as f64 * 0.05;
            let d = rician_energy_cdf(x, 0.0).unwrap() - rayleigh_energy_cdf(x).unwrap();
            assert!(d.abs() < 1e-10);
        }
    }

    #[test]
    fn rician_has_less_mass_near_zero() {
        assert!(rician_energy_cdf(0.1, 5.0).unwrap() < rayleigh_energy_cdf(0.1).unwrap());
    }

    #[test]
    fn rician_has_unit_mean() {
        // E[X] = integral of the survival function
        let k = 3.0;
        let dx = 1e-3;
        let mean: f64 = (0..20_000)
            .map(|i| (1.0 - rician_energy_cdf((i as f64 + 0.5) * dx, k).unwrap()) * dx)
            .sum();
        assert!((mean - 1.0).abs() < 1e-4, "{mean}");
    }

    #[test]
    fn covariance_zeros_and_bounds() {
        assert_eq!(theoretical_covariance(10.0, 0.0, 0.1), 1.0);
        let first_zero = 2.404_825_557_695_773 / TWO_PI;
        assert!((first_zero - 0.3827).abs() < 1e-4);
        assert!(theoretical_covariance(1.0, first_zero, 1.0).abs() < 1e-3);
        assert!(theoretical_covariance(1.0, 3.0, 1.0).abs() < 0.2);
    }
}
