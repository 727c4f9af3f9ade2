//! Special functions: Bessel J0, Marcum Q of order one, and log-domain
//! Binomial helpers used by the outage engine.

use std::f64::consts::{FRAC_2_PI, PI};

use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

/// Bessel function of the first kind, order zero.
///
/// Power series for |x| <= 8, Miller backward recurrence for 8 < |x| < 25
/// and the Hankel asymptotic expansion beyond. Absolute error stays below
/// 1e-12 on |x| <= 1e4.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 8.0 {
        j0_series(x)
    } else if x < 25.0 {
        j0_miller(x)
    } else {
        j0_asymptotic(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let y = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut comp = 0.0;
    let mut k = 1.0;
    loop {
        term *= y / (k * k);
        // Neumaier summation; the alternating terms peak near 1e2 at x = 8.
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if term.abs() < 1e-18 {
            break;
        }
        k += 1.0;
    }
    sum + comp
}

fn j0_miller(x: f64) -> f64 {
    // Start well above x so the trial solution is dominated by the
    // minimal (Bessel J) solution of the three-term recurrence.
    let start = (2 * ((x as usize + 40) / 2)) as i64;
    let mut j_next = 0.0_f64;
    let mut j_cur = 1e-300_f64;
    let mut norm = 0.0;
    let mut j0 = 0.0;
    let mut k = start;
    while k > 0 {
        let j_prev = 2.0 * k as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // j_cur now holds J_{k-1}
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j_cur;
        }
        if k - 1 == 0 {
            j0 = j_cur;
        }
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
        }
        k -= 1;
    }
    norm += j0;
    j0 / norm
}

fn j0_asymptotic(x: f64) -> f64 {
    // Hankel expansion with mu = 0. t_k = prod_{j<=k} (2j-1)^2 / (k! (8x)^k);
    // P = sum_{k even} (-1)^{k/2} t_k, Q = -sum_{k odd} (-1)^{(k-1)/2} t_k.
    let inv8x = 1.0 / (8.0 * x);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut t = 1.0;
    for k in 1..80u32 {
        let odd = (2 * k - 1) as f64;
        let next = t * odd * odd * inv8x / k as f64;
        if next > t {
            break;
        }
        t = next;
        match k % 4 {
            0 => p += t,
            1 => q -= t,
            2 => p -= t,
            _ => q += t,
        }
        if t < 1e-17 {
            break;
        }
    }
    let (s, c) = x.sin_cos();
    // cos(x - pi/4) and sin(x - pi/4) without rounding x - pi/4
    let cos_chi = (c + s) * std::f64::consts::FRAC_1_SQRT_2;
    let sin_chi = (s - c) * std::f64::consts::FRAC_1_SQRT_2;
    (FRAC_2_PI / x).sqrt() * (p * cos_chi - q * sin_chi)
}

/// Marcum Q function of order one, Q1(a, b).
///
/// Evaluated as the Poisson mixture of chi-square tails that defines the
/// noncentral chi-square law with two degrees of freedom:
/// `Q1(a,b) = sum_j Pois(j; a^2/2) * P(Pois(b^2/2) <= j)`.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    noncentral_chi2_2dof(a * a, b * b).1
}

/// CDF and survival function of the noncentral chi-square law with two
/// degrees of freedom and noncentrality `lambda`, evaluated at `x`.
///
/// Both tails are summed directly so small values of either are accurate.
pub fn noncentral_chi2_2dof(lambda: f64, x: f64) -> (f64, f64) {
    debug_assert!(lambda >= 0.0 && x >= 0.0);
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let mu = 0.5 * lambda; // Poisson mean of the mixing index
    let y = 0.5 * x;
    if mu == 0.0 {
        let cdf = -(-y).exp_m1();
        return (cdf, (-y).exp());
    }
    // Mixture: sf = sum_j w_j * P(Pois(y) <= j), cdf = sum_j w_j * P(Pois(y) > j)
    let mode = mu.floor() as u64;
    let log_w = |j: u64| -> f64 { j as f64 * mu.ln() - mu - ln_gamma(j as f64 + 1.0) };
    let log_pois_y = |j: u64| -> f64 { j as f64 * y.ln() - y - ln_gamma(j as f64 + 1.0) };

    let start_upper = gamma_ur(mode as f64 + 1.0, y); // P(Pois(y) <= mode)
    let start_lower = gamma_lr(mode as f64 + 1.0, y); // P(Pois(y) > mode)

    let mut sf = 0.0;
    let mut cdf = 0.0;
    const CUTOFF: f64 = 1e-14;
    const MAX_TERMS: u64 = 1_000_000;

    // Upward from the mode.
    let mut le = start_upper;
    let mut gt = start_lower;
    let mut w = log_w(mode).exp();
    let mut j = mode;
    let mut terms = 0;
    loop {
        sf += w * le;
        cdf += w * gt;
        terms += 1;
        j += 1;
        w *= mu / j as f64;
        let pj = log_pois_y(j).exp();
        le = (le + pj).min(1.0);
        gt = (gt - pj).max(0.0);
        if (w < CUTOFF * sf.max(cdf).max(1e-300) && j as f64 > mu) || terms > MAX_TERMS {
            break;
        }
        if w == 0.0 {
            break;
        }
    }
    // Downward from the mode.
    let mut le = start_upper;
    let mut gt = start_lower;
    let mut w = log_w(mode).exp();
    let mut j = mode;
    while j > 0 && terms <= MAX_TERMS {
        let pj = log_pois_y(j).exp();
        le = (le - pj).max(0.0);
        gt = (gt + pj).min(1.0);
        w *= j as f64 / mu;
        j -= 1;
        sf += w * le;
        cdf += w * gt;
        terms += 1;
        if w < CUTOFF * sf.max(cdf).max(1e-300) {
            break;
        }
    }
    (cdf.clamp(0.0, 1.0), sf.clamp(0.0, 1.0))
}

/// ln C(n, k).
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Binomial(n, success) probability mass for every count 0..=n.
///
/// Computed in the log domain so that extreme tails underflow cleanly
/// instead of cancelling.
pub fn binomial_pmf_table(n: usize, success: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if success <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if success >= 1.0 {
        out[n] = 1.0;
        return out;
    }
    let ls = success.ln();
    let lf = (-success).ln_1p();
    for (k, slot) in out.iter_mut().enumerate() {
        let lp = ln_binomial(n as u64, k as u64) + k as f64 * ls + (n - k) as f64 * lf;
        *slot = lp.exp();
    }
    out
}

/// Compensated (Neumaier) accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::default();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// `x^k` with the convention `0^0 = 1`.
#[inline]
pub(crate) fn powi0(x: f64, k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        x.powi(k as i32)
    }
}

pub(crate) const TWO_PI: f64 = 2.0 * PI;
