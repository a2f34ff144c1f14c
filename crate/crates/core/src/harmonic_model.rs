//! Harmonic functions on the ball as zonal expansions about a fixed pole.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, HarmexError, Result};
use crate::special_fn::{zonal_dimension, zonal_sum, GammaRatioSpec};

/// Truncation controls for series with infinitely many terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Tail majorant relative to the full majorant sum.
    pub rel_tol: f64,
    /// Largest degree a single evaluation may use.
    pub max_degree: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_degree: 1 << 16 }
    }
}

/// A harmonic function given by its zonal coefficients `a_k`.
pub trait ZonalSeries: Sync {
    fn dim(&self) -> usize;

    /// `a_0 ..= a_{k_max}`.
    fn coefficients(&self, k_max: usize) -> Result<Vec<f64>>;

    /// `Some(K)` when all coefficients above `K` vanish.
    fn finite_degree(&self) -> Option<usize>;

    /// Degree needed to evaluate at radius `r` within `opts`.
    fn degree_for(&self, r: f64, opts: &EvalOptions) -> Result<usize> {
        match self.finite_degree() {
            Some(k) => Ok(k),
            None => {
                let n = self.dim();
                let mut cache: Vec<f64> = Vec::new();
                let mut term = |k: usize| -> Result<f64> {
                    if k >= cache.len() {
                        let want = (2 * cache.len()).max(k + 1).max(256);
                        cache = self.coefficients(want - 1)?;
                    }
                    Ok(cache[k].abs() * zonal_dimension(k, n) * r.powi(k as i32))
                };
                tail_cutoff(&mut term, opts.rel_tol, 0.0, opts.max_degree)
            }
        }
    }
}

/// Smallest `K` with `Σ_{k>K} t_k` below `max(rel_tol * Σ t_k, abs_tol)`, for
/// nonnegative terms whose consecutive ratios eventually decrease below one.
pub fn tail_cutoff(
    term: &mut dyn FnMut(usize) -> Result<f64>,
    rel_tol: f64,
    abs_tol: f64,
    max_degree: usize,
) -> Result<usize> {
    let mut terms = vec![term(0)?];
    let remainder;
    loop {
        let k = terms.len();
        if k > max_degree + 1 {
            return Err(HarmexError::Resolution(format!(
                "series needs more than {max_degree} terms"
            )));
        }
        let t = term(k)?;
        terms.push(t);
        let prev = terms[k - 1];
        if t == 0.0 && prev == 0.0 {
            remainder = 0.0;
            break;
        }
        let q = if prev > 0.0 { t / prev } else { f64::INFINITY };
        if q < 1.0 {
            let rem = t * q / (1.0 - q);
            let total: f64 = terms.iter().sum();
            if rem <= 1e-3 * (rel_tol * total).max(abs_tol).max(f64::MIN_POSITIVE) {
                remainder = rem;
                break;
            }
        }
    }
    let total: f64 = terms.iter().sum::<f64>() + remainder;
    let tol = (rel_tol * total).max(abs_tol);
    let mut tail = remainder;
    let mut k = terms.len() - 1;
    while k > 0 && tail + terms[k] < tol {
        tail += terms[k];
        k -= 1;
    }
    Ok(k)
}

/// Coefficients `b_k = a_k r^k` ready for summation over cosines at radius `r`.
#[derive(Debug, Clone)]
pub struct RadialSlice {
    pub n: usize,
    pub r: f64,
    pub scaled: Vec<f64>,
}

impl RadialSlice {
    pub fn new(f: &dyn ZonalSeries, r: f64, opts: &EvalOptions) -> Result<Self> {
        if !(0.0..1.0).contains(&r) {
            return domain(format!("radius must lie in [0, 1), got {r}"));
        }
        let k = f.degree_for(r, opts)?;
        let mut scaled = f.coefficients(k)?;
        let mut pow = 1.0;
        for b in scaled.iter_mut() {
            *b *= pow;
            pow *= r;
        }
        Ok(Self { n: f.dim(), r, scaled })
    }

    pub fn value(&self, s: f64) -> f64 {
        zonal_sum(self.n, &self.scaled, s)
    }

    pub fn degree(&self) -> usize {
        self.scaled.len().saturating_sub(1)
    }
}

/// Finite zonal expansion `f(r x') = Σ_{k<=K} a_k r^k Z_k(<x', pole>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalExpansion {
    pub n: usize,
    pub pole: Vec<f64>,
    pub coeffs: Vec<f64>,
}

/// First coordinate vector of `R^n`.
pub fn default_pole(n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    e
}

impl ZonalExpansion {
    pub fn new(n: usize, pole: Vec<f64>, coeffs: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return domain(format!("dimension must be at least 2, got {n}"));
        }
        if pole.len() != n {
            return domain(format!("pole has {} components, expected {n}", pole.len()));
        }
        let norm = pole.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-14 {
            return domain(format!("pole must be a unit vector, |pole| = {norm}"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return domain("expansion coefficients must be finite");
        }
        Ok(Self { n, pole, coeffs })
    }

    pub fn with_default_pole(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(n, default_pole(n), coeffs)
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::with_default_pole(n, vec![c])
    }

    /// Truncation of any series to degree `k_max`.
    pub fn from_series(f: &dyn ZonalSeries, k_max: usize) -> Result<Self> {
        Self::with_default_pole(f.dim(), f.coefficients(k_max)?)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// `f(r x')` where `s = <x', pole>`.
    pub fn evaluate(&self, r: f64, s: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&r) {
            return domain(format!("radius must lie in [0, 1), got {r}"));
        }
        if !(s.abs() <= 1.0) {
            return domain(format!("cosine must lie in [-1, 1], got {s}"));
        }
        let mut pow = 1.0;
        let b: Vec<f64> = self
            .coeffs
            .iter()
            .map(|a| {
                let v = a * pow;
                pow *= r;
                v
            })
            .collect();
        Ok(zonal_sum(self.n, &b, s))
    }

    /// `f(x)` at a point of the ball.
    pub fn evaluate_at(&self, x: &[f64]) -> Result<f64> {
        let (r, s) = polar(x, &self.pole)?;
        self.evaluate(r, s)
    }

    /// Applies the fractional derivative of order `t` coefficientwise.
    pub fn fractional_derivative(&self, t: f64) -> Result<Self> {
        let mult = GammaRatioSpec::fractional_derivative(t, self.n)?.sequence(self.degree())?;
        let coeffs = self.coeffs.iter().zip(mult).map(|(a, m)| a * m).collect();
        Ok(Self { n: self.n, pole: self.pole.clone(), coeffs })
    }

    /// `c * self + other`, both about the same pole.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        if self.n != other.n || self.pole != other.pole {
            return domain("expansions must share dimension and pole");
        }
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|k| {
                c * self.coeffs.get(k).copied().unwrap_or(0.0)
                    + other.coeffs.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        Ok(Self { n: self.n, pole: self.pole.clone(), coeffs })
    }
}

impl ZonalSeries for ZonalExpansion {
    fn dim(&self) -> usize {
        self.n
    }

    fn coefficients(&self, k_max: usize) -> Result<Vec<f64>> {
        Ok((0..=k_max).map(|k| self.coeffs.get(k).copied().unwrap_or(0.0)).collect())
    }

    fn finite_degree(&self) -> Option<usize> {
        Some(self.degree())
    }
}

/// `(|x|, <x/|x|, pole>)`, with cosine `1` at the origin.
pub fn polar(x: &[f64], pole: &[f64]) -> Result<(f64, f64)> {
    if x.len() != pole.len() {
        return domain("point and pole dimensions differ");
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r >= 1.0 {
        return domain(format!("point outside the open ball, |x| = {r}"));
    }
    if r == 0.0 {
        return Ok((0.0, 1.0));
    }
    let s = x.iter().zip(pole).map(|(a, b)| a * b).sum::<f64>() / r;
    Ok((r, s.clamp(-1.0, 1.0)))
}

/// The weighted Bergman kernel `Q_α(·, y)` truncated at degree `k_max`.
/// `|y| = 1` is allowed; the caller keeps evaluation radii below one.
pub fn bergman_kernel(n: usize, alpha: f64, y: &[f64], k_max: usize) -> Result<ZonalExpansion> {
    if y.len() != n {
        return domain(format!("point has {} components, expected {n}", y.len()));
    }
    let rho0 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rho0 > 1.0 + 1e-14 {
        return domain(format!("kernel point must satisfy |y| <= 1, got {rho0}"));
    }
    let pole = if rho0 == 0.0 { default_pole(n) } else { y.iter().map(|v| v / rho0).collect() };
    let c = GammaRatioSpec::bergman_kernel(alpha, n)?.sequence(k_max)?;
    let mut pow = 1.0;
    let coeffs = c
        .into_iter()
        .map(|ck| {
            let v = ck * pow;
            pow *= rho0.min(1.0);
            v
        })
        .collect();
    ZonalExpansion::new(n, pole, coeffs)
}

/// Smallest `K` with `Σ_{k>K} kernel_coefficient(k) α_k ρ^k < tol`.
pub fn truncation_degree(n: usize, alpha: f64, rho_max: f64, tol: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&rho_max) {
        return domain(format!("rho_max must lie in [0, 1), got {rho_max}"));
    }
    if !(tol > 0.0) {
        return domain("tolerance must be positive");
    }
    let spec = GammaRatioSpec::bergman_kernel(alpha, n)?;
    let mut term = |k: usize| -> Result<f64> {
        Ok(spec.eval(k)? * zonal_dimension(k, n) * rho_max.powi(k as i32))
    };
    tail_cutoff(&mut term, 0.0, tol, 1 << 24)
}

/// Kinds of test function, serialized with a `kind` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionKind {
    /// Poisson kernel `P(·, e)`: all coefficients one.
    Poisson,
    /// `Q_β(·, ρ0 e)`.
    QKernel { beta: f64, rho0: f64 },
    /// `P_α = D^{α-1} P(·, e)`.
    PAlpha { alpha: f64 },
    Polynomial { coeffs: Vec<f64> },
    /// Seeded coefficients `U(-1, 1) (k+1)^{-decay}` up to degree `K`.
    Random { seed: u64, decay: f64 },
}

/// A named harmonic test function; kernel kinds are infinite series unless
/// `K` fixes a truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    #[serde(flatten)]
    pub kind: FunctionKind,
    pub n: usize,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
}

const RANDOM_DEFAULT_DEGREE: usize = 10;

impl TestFunctionSpec {
    pub fn new(kind: FunctionKind, n: usize) -> Result<Self> {
        let spec = Self { kind, n, degree: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn poisson(n: usize) -> Self {
        Self { kind: FunctionKind::Poisson, n, degree: None }
    }

    pub fn q_kernel(n: usize, beta: f64, rho0: f64) -> Result<Self> {
        Self::new(FunctionKind::QKernel { beta, rho0 }, n)
    }

    pub fn p_alpha(n: usize, alpha: f64) -> Result<Self> {
        Self::new(FunctionKind::PAlpha { alpha }, n)
    }

    pub fn polynomial(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(FunctionKind::Polynomial { coeffs }, n)
    }

    pub fn random(n: usize, seed: u64, decay: f64, degree: usize) -> Result<Self> {
        let spec = Self { kind: FunctionKind::Random { seed, decay }, n, degree: Some(degree) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return domain(format!("dimension must be at least 2, got {}", self.n));
        }
        match &self.kind {
            FunctionKind::Poisson => {}
            FunctionKind::QKernel { beta, rho0 } => {
                if !(*beta > -1.0) {
                    return domain(format!("q_kernel needs beta > -1, got {beta}"));
                }
                if !(*rho0 > 0.0 && *rho0 <= 1.0) {
                    return domain(format!("q_kernel needs 0 < rho0 <= 1, got {rho0}"));
                }
            }
            FunctionKind::PAlpha { alpha } => {
                if !(alpha - 1.0 + self.n as f64 / 2.0 > 0.0) {
                    return domain(format!("p_alpha needs alpha - 1 + n/2 > 0, got alpha = {alpha}"));
                }
            }
            FunctionKind::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return domain("polynomial needs a non-empty list of finite coefficients");
                }
            }
            FunctionKind::Random { decay, .. } => {
                if !decay.is_finite() {
                    return domain("random decay must be finite");
                }
            }
        }
        Ok(())
    }

    /// Short human-readable identifier.
    pub fn label(&self) -> String {
        let body = match &self.kind {
            FunctionKind::Poisson => "poisson".to_string(),
            FunctionKind::QKernel { beta, rho0 } => format!("q_kernel(beta={beta};rho0={rho0})"),
            FunctionKind::PAlpha { alpha } => format!("p_alpha(alpha={alpha})"),
            FunctionKind::Polynomial { coeffs } => format!("polynomial(deg={})", coeffs.len() - 1),
            FunctionKind::Random { seed, decay } => format!("random(seed={seed};decay={decay})"),
        };
        format!("{body}@n={}", self.n)
    }

    fn family_coefficients(&self, k_max: usize) -> Result<Vec<f64>> {
        let n = self.n;
        Ok(match &self.kind {
            FunctionKind::Poisson => vec![1.0; k_max + 1],
            FunctionKind::QKernel { beta, rho0 } => {
                let mut c = GammaRatioSpec::bergman_kernel(*beta, n)?.sequence(k_max)?;
                let mut pow = 1.0;
                for v in c.iter_mut() {
                    *v *= pow;
                    pow *= rho0;
                }
                c
            }
            FunctionKind::PAlpha { alpha } => {
                GammaRatioSpec::fractional_derivative(alpha - 1.0, n)?.sequence(k_max)?
            }
            FunctionKind::Polynomial { coeffs } => {
                (0..=k_max).map(|k| coeffs.get(k).copied().unwrap_or(0.0)).collect()
            }
            FunctionKind::Random { seed, decay } => {
                let deg = self.degree.unwrap_or(RANDOM_DEFAULT_DEGREE);
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let all: Vec<f64> = (0..=deg)
                    .map(|k| rng.gen_range(-1.0..1.0) * (k as f64 + 1.0).powf(-decay))
                    .collect();
                (0..=k_max).map(|k| all.get(k).copied().unwrap_or(0.0)).collect()
            }
        })
    }

    /// Materializes the function as a finite expansion of degree `k_max`.
    pub fn expansion(&self, k_max: usize) -> Result<ZonalExpansion> {
        self.validate()?;
        ZonalExpansion::with_default_pole(self.n, self.family_coefficients(k_max)?)
    }

    /// True for the boundary-singular kernel kinds evaluated without truncation.
    pub fn is_infinite(&self) -> bool {
        self.finite_degree().is_none()
    }
}

impl ZonalSeries for TestFunctionSpec {
    fn dim(&self) -> usize {
        self.n
    }

    fn coefficients(&self, k_max: usize) -> Result<Vec<f64>> {
        let mut c = self.family_coefficients(k_max)?;
        if let Some(d) = self.finite_degree() {
            for v in c.iter_mut().skip(d + 1) {
                *v = 0.0;
            }
        }
        Ok(c)
    }

    fn finite_degree(&self) -> Option<usize> {
        match &self.kind {
            FunctionKind::Polynomial { coeffs } => Some(coeffs.len() - 1),
            FunctionKind::Random { .. } => Some(self.degree.unwrap_or(RANDOM_DEFAULT_DEGREE)),
            FunctionKind::QKernel { rho0, .. } if *rho0 < 1.0 && self.degree.is_none() => None,
            _ => self.degree,
        }
    }

    fn degree_for(&self, r: f64, opts: &EvalOptions) -> Result<usize> {
        if let Some(k) = self.finite_degree() {
            return Ok(k);
        }
        let rr = match &self.kind {
            FunctionKind::QKernel { rho0, .. } => r * rho0,
            _ => r,
        };
        let n = self.n;
        let mut cache: Vec<f64> = Vec::new();
        let mut term = |k: usize| -> Result<f64> {
            if k >= cache.len() {
                let want = (2 * cache.len()).max(k + 1).max(256);
                let mut c = self.family_coefficients(want - 1)?;
                if let FunctionKind::QKernel { rho0, .. } = &self.kind {
                    // the radius already carries rho0
                    let mut pow = 1.0;
                    for v in c.iter_mut() {
                        if pow > 0.0 {
                            *v /= pow;
                        }
                        pow *= rho0;
                    }
                }
                cache = c;
            }
            Ok(cache[k].abs() * zonal_dimension(k, n) * rr.powi(k as i32))
        };
        tail_cutoff(&mut term, opts.rel_tol, 0.0, opts.max_degree)
    }
}

/// `base` with its first coefficients multiplied by `factors`; higher
/// coefficients are multiplied by `tail_factor`.
pub struct Modulated<'a> {
    pub base: &'a dyn ZonalSeries,
    pub factors: Vec<f64>,
    pub tail_factor: f64,
}

impl ZonalSeries for Modulated<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn coefficients(&self, k_max: usize) -> Result<Vec<f64>> {
        let mut c = self.base.coefficients(k_max)?;
        for (k, v) in c.iter_mut().enumerate() {
            *v *= self.factors.get(k).copied().unwrap_or(self.tail_factor);
        }
        Ok(c)
    }

    fn finite_degree(&self) -> Option<usize> {
        match self.base.finite_degree() {
            Some(d) => Some(d),
            None if self.tail_factor == 0.0 => Some(self.factors.len().saturating_sub(1)),
            None => None,
        }
    }

    fn degree_for(&self, r: f64, opts: &EvalOptions) -> Result<usize> {
        match self.finite_degree() {
            Some(d) => Ok(d),
            None => Ok(self.base.degree_for(r, opts)?.max(self.factors.len().saturating_sub(1))),
        }
    }
}

/// `f(r x')` with `s = <x', pole>` for any series.
pub fn evaluate(f: &dyn ZonalSeries, r: f64, s: f64, opts: &EvalOptions) -> Result<f64> {
    if !(s.abs() <= 1.0) {
        return domain(format!("cosine must lie in [-1, 1], got {s}"));
    }
    Ok(RadialSlice::new(f, r, opts)?.value(s))
}

/// `D^t f`, coefficientwise.
pub fn fractional_derivative(f: &ZonalExpansion, t: f64) -> Result<ZonalExpansion> {
    f.fractional_derivative(t)
}
