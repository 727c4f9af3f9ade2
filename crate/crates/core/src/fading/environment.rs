use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::special::TWO_PI;

/// Point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One static multipath realization: a rectangular room with point
/// scatterers and a transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterEnvironment {
    room_width: f64,
    room_height: f64,
    scatterers: Vec<Point>,
    tx_position: Point,
    carrier_wavelength: f64,
    seed: u64,
    // transmitter-to-scatterer path lengths, in wavelengths
    tx_paths: Vec<f64>,
}

/// Versioned on-disk form of a [`ScatterEnvironment`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentDocument {
    pub format_version: u32,
    pub room_width: f64,
    pub room_height: f64,
    pub scatterers: Vec<Point>,
    pub tx_position: Point,
    pub carrier_wavelength: f64,
    pub seed: u64,
}

pub const ENVIRONMENT_FORMAT_VERSION: u32 = 1;

impl ScatterEnvironment {
    pub fn new(
        room_width: f64,
        room_height: f64,
        scatterers: Vec<Point>,
        tx_position: Point,
        carrier_wavelength: f64,
        seed: u64,
    ) -> Result<Self> {
        ensure(room_width > 0.0 && room_height > 0.0, "room", || {
            format!("dimensions must be positive, got {room_width} x {room_height}")
        })?;
        ensure(!scatterers.is_empty(), "scatterers", || "need at least one scatterer".into())?;
        ensure(carrier_wavelength > 0.0, "carrier_wavelength", || {
            format!("must be positive, got {carrier_wavelength}")
        })?;
        let inside = |p: &Point| p.x >= 0.0 && p.x <= room_width && p.y >= 0.0 && p.y <= room_height;
        ensure(scatterers.iter().all(inside), "scatterers", || "all scatterers must lie inside the room".into())?;
        ensure(inside(&tx_position), "tx_position", || "transmitter must lie inside the room".into())?;
        let tx_paths = scatterers
            .iter()
            .map(|s| s.distance(tx_position) / carrier_wavelength)
            .collect();
        Ok(Self {
            room_width,
            room_height,
            scatterers,
            tx_position,
            carrier_wavelength,
            seed,
            tx_paths,
        })
    }

    pub fn room_width(&self) -> f64 {
        self.room_width
    }

    pub fn room_height(&self) -> f64 {
        self.room_height
    }

    pub fn scatterers(&self) -> &[Point] {
        &self.scatterers
    }

    pub fn tx_position(&self) -> Point {
        self.tx_position
    }

    pub fn wavelength(&self) -> f64 {
        self.carrier_wavelength
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x <= self.room_width && p.y >= 0.0 && p.y <= self.room_height
    }

    pub fn to_document(&self) -> EnvironmentDocument {
        EnvironmentDocument {
            format_version: ENVIRONMENT_FORMAT_VERSION,
            room_width: self.room_width,
            room_height: self.room_height,
            scatterers: self.scatterers.clone(),
            tx_position: self.tx_position,
            carrier_wavelength: self.carrier_wavelength,
            seed: self.seed,
        }
    }

    pub fn from_document(doc: EnvironmentDocument) -> Result<Self> {
        ensure(doc.format_version == ENVIRONMENT_FORMAT_VERSION, "format_version", || {
            format!("unsupported environment format {}", doc.format_version)
        })?;
        Self::new(
            doc.room_width,
            doc.room_height,
            doc.scatterers,
            doc.tx_position,
            doc.carrier_wavelength,
            doc.seed,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("environment serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: EnvironmentDocument =
            serde_json::from_str(s).map_err(|e| Error::Scenario(format!("environment JSON: {e}")))?;
        Self::from_document(doc)
    }
}

/// Draw `n_scatterers` scatterers uniformly over a `width` x `height` room
/// with the transmitter at the room center.
pub fn sample_environment(
    n_scatterers: usize,
    width: f64,
    height: f64,
    carrier_freq: f64,
    seed: u64,
) -> Result<ScatterEnvironment> {
    ensure(n_scatterers >= 1, "n_scatterers", || "must be at least 1".into())?;
    ensure(width > 0.0 && height > 0.0, "room", || format!("dimensions must be positive, got {width} x {height}"))?;
    ensure(carrier_freq > 0.0, "carrier_freq", || format!("must be positive, got {carrier_freq}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scatterers = (0..n_scatterers)
        .map(|_| Point::new(rng.random::<f64>() * width, rng.random::<f64>() * height))
        .collect();
    ScatterEnvironment::new(
        width,
        height,
        scatterers,
        Point::new(width / 2.0, height / 2.0),
        crate::wavelength(carrier_freq),
        seed,
    )
}

/// Channel coefficient at a receiver position:
/// `(1/sqrt n) * sum_i exp(j 2 pi (|rx - s_i| + |tx - s_i|) / lambda)`.
pub fn channel_at(env: &ScatterEnvironment, rx: Point) -> Complex64 {
    let inv_lambda = 1.0 / env.carrier_wavelength;
    let mut re = 0.0;
    let mut im = 0.0;
    for (s, tx_path) in env.scatterers.iter().zip(&env.tx_paths) {
        let cycles = s.distance(rx) * inv_lambda + tx_path;
        let (sin, cos) = (TWO_PI * cycles.fract()).sin_cos();
        re += cos;
        im += sin;
    }
    let scale = 1.0 / (env.scatterers.len() as f64).sqrt();
    Complex64::new(re * scale, im * scale)
}

/// Straight-line constant-speed receiver motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: Point,
    /// m/s
    pub speed: f64,
    /// radians
    pub heading: f64,
}

impl Trajectory {
    pub fn position(&self, t: f64) -> Point {
        let d = self.speed * t;
        Point::new(self.start.x + d * self.heading.cos(), self.start.y + d * self.heading.sin())
    }
}

/// Time-stamped channel coefficients along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTrace {
    pub times: Vec<f64>,
    pub coefficients: Vec<Complex64>,
}

impl ChannelTrace {
    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.coefficients.iter().map(|h| h.norm_sqr())
    }

    /// CSV with a header row: `time_s,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,re,im\n");
        for (t, h) in self.times.iter().zip(&self.coefficients) {
            out.push_str(&format!("{t:e},{:e},{:e}\n", h.re, h.im));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut coefficients = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || lineno == 0 && line.starts_with("time") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse = |i: usize| -> Result<f64> {
                fields
                    .get(i)
                    .and_then(|f| f.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Scenario(format!("trace line {}: bad field {}", lineno + 1, i + 1)))
            };
            times.push(parse(0)?);
            coefficients.push(Complex64::new(parse(1)?, parse(2)?));
        }
        ensure(!times.is_empty(), "trace", || "no samples".into())?;
        ensure(times.windows(2).all(|w| w[1] > w[0]), "trace", || "times must be strictly increasing".into())?;
        Ok(Self { times, coefficients })
    }
}

/// Channel along a trajectory, using exact path lengths at every sample.
pub fn channel_trace(env: &ScatterEnvironment, traj: &Trajectory, times: &[f64]) -> Result<ChannelTrace> {
    ensure(times.windows(2).all(|w| w[1] > w[0]), "times", || "must be strictly increasing".into())?;
    let mut coefficients = Vec::with_capacity(times.len());
    for &t in times {
        let p = traj.position(t);
        if !env.contains(p) {
            return Err(Error::TrajectoryExitsRoom { time: t, x: p.x, y: p.y });
        }
        coefficients.push(channel_at(env, p));
    }
    Ok(ChannelTrace {
        times: times.to_vec(),
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelength_at_three_gigahertz() {
        let env = sample_environment(100, 20.0, 20.0, 3e9, 7).unwrap();
        assert_eq!(env.scatterers().len(), 100);
        assert!((env.wavelength() - 0.09993).abs() < 1e-5);
        assert_eq!(env.tx_position(), Point::new(10.0, 10.0));
        assert!(env.scatterers().iter().all(|&s| env.contains(s)));
    }

    #[test]
    fn same_seed_same_environment() {
        let a = sample_environment(50, 20.0, 20.0, 3e9, 42).unwrap();
        let b = sample_environment(50, 20.0, 20.0, 3e9, 42).unwrap();
        let c = sample_environment(50, 20.0, 20.0, 3e9, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(sample_environment(0, 20.0, 20.0, 3e9, 1).is_err());
        assert!(sample_environment(3, 0.0, 20.0, 3e9, 1).is_err());
        assert!(sample_environment(3, 20.0, -1.0, 3e9, 1).is_err());
        assert!(sample_environment(3, 20.0, 20.0, 0.0, 1).is_err());
    }

    #[test]
    fn single_scatterer_has_unit_magnitude() {
        let env = sample_environment(1, 20.0, 20.0, 3e9, 3).unwrap();
        for k in 0..50 {
            let p = Point::new(1.0 + 0.37 * k as f64, 2.0 + 0.29 * k as f64);
            assert!((channel_at(&env, p).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_scatterer_phase_matches_path_length() {
        let lambda = 0.1;
        let s = Point::new(3.0, 4.0);
        let tx = Point::new(0.0, 0.0);
        let env = ScatterEnvironment::new(10.0, 10.0, vec![s], tx, lambda, 0).unwrap();
        let rx = Point::new(6.0, 8.0);
        let path = s.distance(rx) + s.distance(tx);
        let want = Complex64::from_polar(1.0, TWO_PI * path / lambda);
        assert!((channel_at(&env, rx) - want).norm() < 1e-9);
    }

    #[test]
    fn two_paths_half_wavelength_apart_cancel() {
        // Both scatterers on the tx-rx axis line; path lengths differ by lambda/2.
        let lambda = 0.1;
        let tx = Point::new(1.0, 5.0);
        let rx = Point::new(3.0, 5.0);
        let s1 = Point::new(2.0, 6.0);
        let d1 = s1.distance(tx) + s1.distance(rx);
        // place s2 on the perpendicular bisector so that its path is d1 + lambda/2
        let half = (d1 + lambda / 2.0) / 2.0;
        let y = (half * half - 1.0).sqrt();
        let s2 = Point::new(2.0, 5.0 - y);
        let env = ScatterEnvironment::new(10.0, 10.0, vec![s1, s2], tx, lambda, 0).unwrap();
        assert!(channel_at(&env, rx).norm() < 1e-9);
    }

    #[test]
    fn static_receiver_gives_constant_trace() {
        let env = sample_environment(20, 20.0, 20.0, 3e9, 5).unwrap();
        let traj = Trajectory { start: Point::new(9.0, 11.0), speed: 0.0, heading: 1.0 };
        let times: Vec<f64> = (0..10).map(|k| k as f64 * 1e-3).collect();
        let tr = channel_trace(&env, &traj, &times).unwrap();
        assert!(tr.coefficients.iter().all(|&h| h == tr.coefficients[0]));
        let one = channel_trace(&env, &traj, &[0.0]).unwrap();
        assert_eq!(one.coefficients[0], channel_at(&env, traj.start));
    }

    #[test]
    fn trajectory_exit_reports_first_time() {
        let env = sample_environment(5, 20.0, 20.0, 3e9, 5).unwrap();
        let traj = Trajectory { start: Point::new(19.0, 10.0), speed: 10.0, heading: 0.0 };
        let times = [0.0, 0.05, 0.1, 0.15, 0.2];
        match channel_trace(&env, &traj, &times) {
            Err(Error::TrajectoryExitsRoom { time, .. }) => assert_eq!(time, 0.15),
            other => panic!("expected exit error, got {other:?}"),
        }
    }

    #[test]
    fn coefficient_magnitude_bounded_by_sqrt_n() {
        let env = sample_environment(9, 20.0, 20.0, 3e9, 8).unwrap();
        for k in 0..200 {
            let p = Point::new(5.0 + 0.05 * k as f64, 7.0);
            assert!(channel_at(&env, p).norm() <= 3.0 + 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let env = sample_environment(4, 12.0, 8.0, 2.4e9, 99).unwrap();
        let back = ScatterEnvironment::from_json(&env.to_json()).unwrap();
        assert_eq!(env, back);
        let mut doc = env.to_document();
        doc.format_version = 7;
        assert!(ScatterEnvironment::from_document(doc).is_err());
    }
}
