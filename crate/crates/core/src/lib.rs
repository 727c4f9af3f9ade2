//! Channel and protocol models for ultra-reliable low-latency wireless
//! control loops.
//!
//! The crate has four engines:
//!
//! * [`fading`]: the sum-of-scatterers fading process (channel coefficients,
//!   energy CDFs, temporal covariance, spectra, within-packet variation).
//! * [`predictor`]: Gaussian-process prediction of future channel quality,
//!   misprediction rates and reliability-based coherence distance.
//! * [`spatial`]: conditional spatial fades and the pessimistic
//!   q-correlation link generator.
//! * [`protocol`]: analytic cycle-failure probabilities for the Occupy CoW
//!   and XOR-CoW relaying protocols under an uncertainty budget, with the
//!   Monte Carlo ground truth in [`oracle`].

pub mod error;
pub mod fading;
pub mod io;
pub mod oracle;
pub mod predictor;
pub mod protocol;
pub mod spatial;
pub mod special;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Carrier wavelength for a carrier frequency in hertz.
pub fn wavelength(carrier_freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_freq_hz
}

/// dB to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
