//! Spatial correlation between node positions and the pessimistic
//! q-correlated link generator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::special::{bessel_j0, TWO_PI};
use crate::stream::KeyedStream;

/// Correlation coefficient between fades a `distance` apart.
pub fn spatial_correlation(distance: f64, wavelength: f64) -> Result<f64> {
    ensure(distance >= 0.0, "distance", || format!("must be nonnegative, got {distance}"))?;
    ensure(wavelength > 0.0, "wavelength", || format!("must be positive, got {wavelength}"))?;
    Ok(bessel_j0(TWO_PI * distance / wavelength))
}

/// Law of `h_q` given `h_p`: `CN(rho h_p, sigma^2 (1 - rho^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialFadeConditional {
    pub mean: Complex64,
    pub variance: f64,
    pub rho: f64,
}

pub fn conditional_spatial_fade(
    h_p: Complex64,
    distance: f64,
    wavelength: f64,
    sigma2: f64,
) -> Result<SpatialFadeConditional> {
    ensure(sigma2 > 0.0, "sigma2", || format!("must be positive, got {sigma2}"))?;
    let rho = spatial_correlation(distance, wavelength)?;
    Ok(SpatialFadeConditional {
        mean: h_p * rho,
        variance: sigma2 * (1.0 - rho * rho),
        rho,
    })
}

/// SNR increase, in dB, that restores the unconditional variance when the
/// neighbouring channel is fully faded.
pub fn correlation_variance_penalty_db(rho: f64) -> Result<f64> {
    ensure(rho.abs() < 1.0, "rho", || format!("|rho| must be below 1, got {rho}"))?;
    Ok(-10.0 * (1.0 - rho * rho).log10())
}

const Q_FRESH: u64 = 0x71_01;
const Q_COPY: u64 = 0x71_02;
const Q_FADE: u64 = 0x71_03;

/// Fades for `n_links` links in which each link after the first is, with
/// probability `q`, a fresh CN(0, 1) draw and otherwise an exact copy of a
/// uniformly chosen earlier link.
pub fn q_correlated_link_fades(n_links: usize, q: f64, seed: u64) -> Result<Vec<Complex64>> {
    ensure((0.0..=1.0).contains(&q), "q", || format!("must lie in [0, 1], got {q}"))?;
    ensure(n_links >= 1, "n_links", || "need at least one link".into())?;
    Ok(q_fades_from(&KeyedStream::new(seed, 0), &[], n_links, q))
}

/// Generator body shared with the protocol oracle; draws are addressed by
/// `prefix` so distinct cycles and phases get distinct fades.
pub(crate) fn q_fades_from(stream: &KeyedStream, prefix: &[u64], n_links: usize, q: f64) -> Vec<Complex64> {
    let mut addr = Vec::with_capacity(prefix.len() + 2);
    addr.extend_from_slice(prefix);
    addr.extend_from_slice(&[0, 0]);
    let at = prefix.len();
    let mut fades = Vec::with_capacity(n_links);
    for i in 0..n_links {
        addr[at + 1] = i as u64;
        addr[at] = Q_FRESH;
        let fresh = i == 0 || stream.uniform(&addr) < q;
        if fresh {
            addr[at] = Q_FADE;
            fades.push(stream.complex_normal(&addr));
        } else {
            addr[at] = Q_COPY;
            let j = ((stream.uniform(&addr) * i as f64) as usize).min(i - 1);
            fades.push(fades[j]);
        }
    }
    fades
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::EmpiricalCdf;

    #[test]
    fn correlation_values() {
        assert_eq!(spatial_correlation(0.0, 0.1).unwrap(), 1.0);
        assert!(spatial_correlation(0.3, 0.1).unwrap().abs() < 0.2);
        assert!(spatial_correlation(0.03827, 0.1).unwrap().abs() < 1e-3);
    }

    #[test]
    fn conditional_fade_examples() {
        let c = conditional_spatial_fade(Complex64::new(0.0, 0.0), 0.3, 0.1, 1.0).unwrap();
        assert_eq!(c.mean, Complex64::new(0.0, 0.0));
        assert!(c.variance > 0.96);
        let far = 2.404_825_557_695_773 / TWO_PI;
        let c = conditional_spatial_fade(Complex64::new(1.0, 2.0), far, 1.0, 1.0).unwrap();
        assert!((c.variance - 1.0).abs() < 1e-20 + 1e-15);
        assert!(conditional_spatial_fade(Complex64::new(1.0, 0.0), 0.1, 0.1, 0.0).is_err());
    }

    #[test]
    fn penalty_values() {
        assert_eq!(correlation_variance_penalty_db(0.0).unwrap(), 0.0);
        assert!((correlation_variance_penalty_db(0.2).unwrap() - 0.177).abs() < 5e-4);
        assert!((correlation_variance_penalty_db(0.5).unwrap() - 1.249).abs() < 5e-4);
        assert!(correlation_variance_penalty_db(1.0).is_err());
        assert!(correlation_variance_penalty_db(-1.0).is_err());
    }

    #[test]
    fn total_variance_is_preserved() {
        let s = KeyedStream::new(3, 0);
        let (dist, lambda) = (0.02, 0.1);
        let n = 100_000u64;
        let mut power = 0.0;
        for i in 0..n {
            let hp = s.complex_normal(&[0, i]);
            let c = conditional_spatial_fade(hp, dist, lambda, 1.0).unwrap();
            let hq = c.mean + s.complex_normal(&[1, i]) * c.variance.sqrt();
            power += hq.norm_sqr();
        }
        assert!((power / n as f64 - 1.0).abs() < 0.015);
    }

    #[test]
    fn q_extremes() {
        let all_same = q_correlated_link_fades(8, 0.0, 5).unwrap();
        assert!(all_same.iter().all(|&f| f == all_same[0]));
        let fresh = q_correlated_link_fades(8, 1.0, 5).unwrap();
        for i in 0..8 {
            for j in 0..i {
                assert_ne!(fresh[i], fresh[j]);
            }
        }
        assert!(q_correlated_link_fades(0, 0.5, 1).is_err());
        assert!(q_correlated_link_fades(3, 1.5, 1).is_err());
    }

    #[test]
    fn q_half_distinct_count() {
        let draws = 100_000u64;
        let mut total = 0usize;
        for seed in 0..draws {
            let f = q_correlated_link_fades(10, 0.5, seed).unwrap();
            let mut distinct: Vec<Complex64> = Vec::new();
            for v in f {
                if !distinct.contains(&v) {
                    distinct.push(v);
                }
            }
            total += distinct.len();
        }
        assert!((total as f64 / draws as f64 - 5.5).abs() < 0.05);
    }

    #[test]
    fn q_model_preserves_marginals() {
        let n = 40_000u64;
        let energies: Vec<f64> = (0..n)
            .map(|seed| q_correlated_link_fades(6, 0.3, seed).unwrap()[5].norm_sqr())
            .collect();
        let ks = EmpiricalCdf::new(energies).ks_distance(|x| -(-x).exp_m1());
        // 0.999 critical value is about 1.95 / sqrt(n)
        assert!(ks < 1.95 / (n as f64).sqrt(), "{ks}");
    }
}
