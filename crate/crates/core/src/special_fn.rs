//! Gamma ratios, zonal harmonics and radial moments.
//!
//! Every Gamma ratio goes through log-Gamma differences so that degrees in
//! the tens of thousands do not overflow.

use crate::error::{domain, Result};
use crate::interval::IntervalSet;

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("log_gamma needs x > 0, got {x}"));
    }
    Ok(libm::lgamma(x))
}

fn lgamma_pos(x: f64, what: &str) -> Result<f64> {
    if !(x > 0.0) {
        return domain(format!("{what}: Gamma argument {x} is not positive"));
    }
    Ok(libm::lgamma(x))
}

/// `ln B(a, b)`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    Ok(lgamma_pos(a, "log_beta")? + lgamma_pos(b, "log_beta")? - libm::lgamma(a + b))
}

/// A ratio `exp(log_scale) * Π Γ(num_i + k) / Π Γ(den_j + k)` indexed by degree `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaRatioSpec {
    pub numerator_shifts: Vec<f64>,
    pub denominator_shifts: Vec<f64>,
    /// Natural log of the degree-independent factor.
    pub log_scale: f64,
}

impl GammaRatioSpec {
    pub fn eval(&self, k: usize) -> Result<f64> {
        let k = k as f64;
        let mut acc = self.log_scale;
        for &a in &self.numerator_shifts {
            acc += lgamma_pos(a + k, "gamma ratio numerator")?;
        }
        for &b in &self.denominator_shifts {
            acc -= lgamma_pos(b + k, "gamma ratio denominator")?;
        }
        Ok(acc.exp())
    }

    /// Values for `k = 0..=k_max`. Uses the recurrence `Γ(x+1) = xΓ(x)` after the
    /// first term, so the cost is linear in `k_max`.
    pub fn sequence(&self, k_max: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(k_max + 1);
        let first = self.eval(0)?;
        out.push(first);
        let mut log_v = first.ln();
        let mut sign_ok = first > 0.0;
        for k in 1..=k_max {
            let km = (k - 1) as f64;
            if !sign_ok {
                out.push(self.eval(k)?);
                continue;
            }
            for &a in &self.numerator_shifts {
                log_v += (a + km).ln();
            }
            for &b in &self.denominator_shifts {
                log_v -= (b + km).ln();
            }
            // re-anchor periodically to bound drift
            if k % 4096 == 0 {
                let v = self.eval(k)?;
                log_v = v.ln();
                sign_ok = v > 0.0;
                out.push(v);
            } else {
                out.push(log_v.exp());
            }
        }
        Ok(out)
    }

    /// Coefficients of the fractional derivative of order `t` in dimension `n`.
    pub fn fractional_derivative(t: f64, n: usize) -> Result<Self> {
        let h = n as f64 / 2.0;
        Ok(Self {
            numerator_shifts: vec![t + h],
            denominator_shifts: vec![h],
            log_scale: -lgamma_pos(t + h, "fractional derivative")?,
        })
    }

    /// Coefficients of the weighted harmonic Bergman kernel of order `alpha`.
    pub fn bergman_kernel(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > -1.0) {
            return domain(format!("kernel order alpha must exceed -1, got {alpha}"));
        }
        let h = n as f64 / 2.0;
        Ok(Self {
            numerator_shifts: vec![alpha + 1.0 + h],
            denominator_shifts: vec![h],
            log_scale: std::f64::consts::LN_2 - libm::lgamma(alpha + 1.0),
        })
    }
}

/// `Γ(k+t+n/2) / (Γ(k+n/2) Γ(t+n/2))`, the degree-`k` multiplier of the
/// fractional derivative of order `t`.
pub fn frac_deriv_multiplier(k: usize, t: f64, n: usize) -> Result<f64> {
    check_dim(n)?;
    GammaRatioSpec::fractional_derivative(t, n)?.eval(k)
}

/// `2 Γ(α+1+k+n/2) / (Γ(α+1) Γ(k+n/2))`, the degree-`k` coefficient of `Q_α`.
pub fn kernel_coefficient(k: usize, alpha: f64, n: usize) -> Result<f64> {
    check_dim(n)?;
    GammaRatioSpec::bergman_kernel(alpha, n)?.eval(k)
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return domain(format!("dimension must be at least 2, got {n}"));
    }
    Ok(())
}

/// Dimension of the space of degree-`k` spherical harmonics on the sphere in `R^n`.
pub fn zonal_dimension(k: usize, n: usize) -> f64 {
    if n == 2 {
        return if k == 0 { 1.0 } else { 2.0 };
    }
    let kf = k as f64;
    let mut binom = 1.0;
    for i in 1..=(n - 3) {
        binom *= (kf + i as f64) / i as f64;
    }
    (2.0 * kf + n as f64 - 2.0) / (n as f64 - 2.0) * binom
}

/// Forward three-term recurrence producing `Z_0(s), Z_1(s), ...`, normalized
/// so that `∫ Z_k(<x',y'>) Y(y') dσ(y') = Y(x')` for the probability measure.
#[derive(Debug, Clone)]
pub struct ZonalRecurrence {
    n: usize,
    lambda: f64,
    s: f64,
    k: usize,
    prev: f64,
    cur: f64,
}

impl ZonalRecurrence {
    pub fn new(n: usize, s: f64) -> Self {
        Self { n, lambda: (n as f64 - 2.0) / 2.0, s, k: 0, prev: 0.0, cur: 1.0 }
    }
}

impl Iterator for ZonalRecurrence {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        // `cur` holds T_k (n = 2) or C_k^λ (n >= 3)
        let k = self.k;
        let z = if self.n == 2 {
            if k == 0 { 1.0 } else { 2.0 * self.cur }
        } else {
            (k as f64 + self.lambda) / self.lambda * self.cur
        };
        let next = if self.n == 2 {
            if k == 0 { self.s } else { 2.0 * self.s * self.cur - self.prev }
        } else {
            let kn = (k + 1) as f64;
            (2.0 * (kn + self.lambda - 1.0) * self.s * self.cur
                - (kn + 2.0 * self.lambda - 2.0) * self.prev)
                / kn
        };
        self.prev = self.cur;
        self.cur = next;
        self.k += 1;
        Some(z)
    }
}

/// `Σ_k b_k Z_k(s)` in ascending degree order.
pub fn zonal_sum(n: usize, b: &[f64], s: f64) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    let mut acc = b[0];
    if b.len() == 1 {
        return acc;
    }
    if n == 2 {
        let (mut t0, mut t1) = (1.0, s);
        acc += 2.0 * b[1] * t1;
        for &bk in &b[2..] {
            let t2 = 2.0 * s * t1 - t0;
            acc += 2.0 * bk * t2;
            t0 = t1;
            t1 = t2;
        }
        acc
    } else {
        let lambda = (n as f64 - 2.0) / 2.0;
        let (mut c0, mut c1) = (1.0, 2.0 * lambda * s);
        acc += b[1] * (1.0 + lambda) / lambda * c1;
        for (k, &bk) in b.iter().enumerate().skip(2) {
            let kf = k as f64;
            let c2 = (2.0 * (kf + lambda - 1.0) * s * c1 - (kf + 2.0 * lambda - 2.0) * c0) / kf;
            acc += bk * (kf + lambda) / lambda * c2;
            c0 = c1;
            c1 = c2;
        }
        acc
    }
}

/// Zonal harmonic of degree `k` as a function of the cosine to its pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZonalPolynomial {
    pub degree: usize,
    pub dimension: usize,
}

impl ZonalPolynomial {
    pub fn new(degree: usize, dimension: usize) -> Result<Self> {
        check_dim(dimension)?;
        Ok(Self { degree, dimension })
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        zonal_value(self.degree, self.dimension, s)
    }

    /// `Z_k(1)`, the dimension of the degree-`k` harmonics.
    pub fn at_one(&self) -> f64 {
        zonal_dimension(self.degree, self.dimension)
    }
}

pub fn zonal_value(k: usize, n: usize, s: f64) -> Result<f64> {
    check_dim(n)?;
    if !(s.abs() <= 1.0) {
        return domain(format!("zonal cosine must lie in [-1, 1], got {s}"));
    }
    Ok(ZonalRecurrence::new(n, s).nth(k).expect("infinite iterator"))
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..20_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete Beta `I_x(a, b)` together with its complement.
/// `one_minus_x` is passed separately so that points near `1` keep precision.
pub fn beta_inc_pair(a: f64, b: f64, x: f64, one_minus_x: f64) -> Result<(f64, f64)> {
    if x <= 0.0 {
        return Ok((0.0, 1.0));
    }
    if one_minus_x <= 0.0 {
        return Ok((1.0, 0.0));
    }
    let ln_front = a * x.ln() + b * one_minus_x.ln() - log_beta(a, b)?;
    if x < (a + 1.0) / (a + b + 2.0) {
        let i = ln_front.exp() * beta_continued_fraction(a, b, x) / a;
        Ok((i, 1.0 - i))
    } else {
        let j = ln_front.exp() * beta_continued_fraction(b, a, one_minus_x) / b;
        Ok((1.0 - j, j))
    }
}

/// Mass of `[lo, hi)` under the Beta(c, α+1) law in the variable `u = ρ²`,
/// i.e. `∫_L (1-ρ²)^α ρ^{2c-1} dρ` divided by `B(c, α+1)/2`.
fn regularized_mass(c: f64, alpha: f64, set: &IntervalSet) -> Result<f64> {
    let mut total = 0.0;
    for &(lo, hi) in set.intervals() {
        let (ia, ja) = beta_inc_pair(c, alpha + 1.0, lo * lo, (1.0 - lo) * (1.0 + lo))?;
        let (ib, jb) = beta_inc_pair(c, alpha + 1.0, hi * hi, (1.0 - hi) * (1.0 + hi))?;
        total += if ib < 0.5 { ib - ia } else { ja - jb };
    }
    Ok(total)
}

/// `∫_L (1-ρ²)^α ρ^{2k+n-1} dρ`, exact up to rounding through the incomplete Beta function.
pub fn radial_moment(k: usize, alpha: f64, n: usize, set: &IntervalSet) -> Result<f64> {
    check_dim(n)?;
    if !(alpha > -1.0) {
        return domain(format!("radial moment needs alpha > -1, got {alpha}"));
    }
    if set.is_empty() {
        return Ok(0.0);
    }
    let c = k as f64 + n as f64 / 2.0;
    let half_beta = (log_beta(c, alpha + 1.0)? - std::f64::consts::LN_2).exp();
    Ok(half_beta * regularized_mass(c, alpha, set)?)
}

/// The split weight `kernel_coefficient(k) * radial_moment(k, L)`, computed in
/// its cancelled form: the regularized Beta mass of `L`. Lies in `[0, 1]`.
pub fn split_weight(k: usize, alpha: f64, n: usize, set: &IntervalSet) -> Result<f64> {
    check_dim(n)?;
    if !(alpha > -1.0) {
        return domain(format!("split order must exceed -1, got {alpha}"));
    }
    let c = k as f64 + n as f64 / 2.0;
    Ok(regularized_mass(c, alpha, set)?.clamp(0.0, 1.0))
}
