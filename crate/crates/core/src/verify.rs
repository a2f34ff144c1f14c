//! Independent oracles and inequality checks for the kernel, the lemmas on
//! kernels and integral means, and the embeddings between the spaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::harmonic_model::{evaluate, truncation_degree, EvalOptions, TestFunctionSpec, ZonalExpansion, ZonalSeries};
use crate::interval::IntervalSet;
use crate::norms::{integral_mean, space_norm, NormOptions, SpaceParams};
use crate::quadrature::{gauss_jacobi, radial_integral_values, GridParams, RadialGrid, SphereRule};
use crate::special_fn::{kernel_coefficient, split_weight, zonal_sum};

/// Allowed relative drift of a fitted constant under refinement.
pub const STABILITY: f64 = 0.2;

/// Header of the CSV rendering of [`CheckReport`]s.
pub const CSV_HEADER: &str = "check,params,max_violation,fitted_C,pass";

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub params: String,
    /// Largest signed excess over the claimed bound; `<= tolerance` passes.
    pub max_violation: f64,
    pub tolerance: f64,
    /// Empirical constant of a `<= C ...` claim.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_c: Option<f64>,
    /// The same constant on the refined sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_c: Option<f64>,
    pub pass: bool,
}

impl CheckReport {
    /// A check of an identity or an explicit inequality.
    pub fn exact(check: &str, params: String, max_violation: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            params,
            max_violation,
            tolerance,
            fitted_c: None,
            refined_c: None,
            pass: max_violation.is_finite() && max_violation <= tolerance,
        }
    }

    /// A check of a `<= C ...` claim: the constant must be finite and move by
    /// at most [`STABILITY`] under refinement.
    pub fn fitted(check: &str, params: String, c: f64, refined: f64) -> Self {
        let drift = (refined / c - 1.0).abs();
        Self {
            check: check.into(),
            params,
            max_violation: drift - STABILITY,
            tolerance: 0.0,
            fitted_c: Some(c),
            refined_c: Some(refined),
            pass: c.is_finite() && refined.is_finite() && c > 0.0 && drift <= STABILITY,
        }
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.fitted_c = Some(c);
        self
    }

    pub fn csv_row(&self) -> String {
        let c = self.fitted_c.map(|c| format!("{c:.6e}")).unwrap_or_default();
        format!("{},{},{:.6e},{},{}", csv_field(&self.check), csv_field(&self.params), self.max_violation, c, self.pass)
    }
}

/// Quotes a CSV field when it holds a separator, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `max_k |w_k([0, 1)) - 1|` for `k <= k_max`: the kernel reproduces every
/// degree in coefficient space.
pub fn check_partition_of_unity(n: usize, alpha: f64, k_max: usize, tol: f64) -> Result<CheckReport> {
    let full = IntervalSet::full();
    let mut worst = 0.0f64;
    for k in 0..=k_max {
        worst = worst.max((split_weight(k, alpha, n, &full)? - 1.0).abs());
    }
    Ok(CheckReport::exact("partition_of_unity", format!("n={n};alpha={alpha};K={k_max}"), worst, tol))
}

/// Probability rule on `[-1, 1]` for the weight `(1 - t^2)^a`.
fn symmetric_rule(m: usize, a: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_jacobi(m, a, a)?;
    let total: f64 = w.iter().sum();
    Ok((x, w.into_iter().map(|v| v / total).collect()))
}

/// `∫_0^1 ∫_S (1-ρ²)^α Q_α(x, ρy') f(ρy') ρ^{n-1} dρ dσ(y')` by tensor quadrature.
///
/// The sphere is parametrized by `s = <y', x'>` and the coordinate `t` of `y'`
/// along the part of the pole orthogonal to `x'`.
fn reproduce_by_quadrature(f: &ZonalExpansion, alpha: f64, r: f64, c: f64) -> Result<f64> {
    let n = f.n;
    let kf = f.degree();
    let kq = if r == 0.0 { 0 } else { truncation_degree(n, alpha, r, 1e-15)?.min(4000) };
    let half = 0.5 * (n as f64 - 3.0);
    let (s_nodes, s_weights) = symmetric_rule((kq + kf) / 2 + 4, half)?;
    let (t_nodes, t_weights) = if n == 2 {
        (vec![-1.0, 1.0], vec![0.5, 0.5])
    } else {
        symmetric_rule(kf / 2 + 2, half - 0.5)?
    };
    let (x, w) = gauss_jacobi((kq + kf + n) / 2 + 16, alpha, 0.0)?;
    let ck: Vec<f64> = (0..=kq).map(|k| kernel_coefficient(k, alpha, n)).collect::<Result<_>>()?;
    let c_perp = (1.0 - c * c).max(0.0).sqrt();
    let scale = 0.5f64.powf(alpha + 1.0);
    let total: f64 = x
        .par_iter()
        .zip(&w)
        .map(|(&xi, &wi)| {
            let rho = 0.5 * (1.0 + xi);
            let radial = (1.0 + rho).powf(alpha) * rho.powi(n as i32 - 1) * wi * scale;
            let mut pow = 1.0;
            let b: Vec<f64> = ck
                .iter()
                .map(|c| {
                    let v = c * pow;
                    pow *= r * rho;
                    v
                })
                .collect();
            let mut pow = 1.0;
            let a: Vec<f64> = f
                .coeffs
                .iter()
                .map(|c| {
                    let v = c * pow;
                    pow *= rho;
                    v
                })
                .collect();
            let sphere: f64 = s_nodes
                .iter()
                .zip(&s_weights)
                .map(|(&s, &ws)| {
                    let s_perp = (1.0 - s * s).max(0.0).sqrt();
                    let inner: f64 = t_nodes
                        .iter()
                        .zip(&t_weights)
                        .map(|(&t, &wt)| wt * zonal_sum(n, &a, (s * c + s_perp * c_perp * t).clamp(-1.0, 1.0)))
                        .sum();
                    ws * zonal_sum(n, &b, s) * inner
                })
                .sum();
            radial * sphere
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total)
}

/// `Σ_k w_k([0, 1)) a_k r^k Z_k(c)`.
fn reproduce_by_coefficients(f: &ZonalExpansion, alpha: f64, r: f64, c: f64) -> Result<f64> {
    let full = IntervalSet::full();
    let mut pow = 1.0;
    let mut b = Vec::with_capacity(f.coeffs.len());
    for (k, a) in f.coeffs.iter().enumerate() {
        b.push(a * pow * split_weight(k, alpha, f.n, &full)?);
        pow *= r;
    }
    Ok(zonal_sum(f.n, &b, c))
}

/// Compares `f(x)` with its reproducing integral by tensor quadrature and
/// with the coefficient route, which must agree to `1e-12`.
pub fn check_reproducing(f: &ZonalExpansion, alpha: f64, points: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
    if !(alpha >= 0.0) {
        return domain(format!("reproducing check needs alpha >= 0, got {alpha}"));
    }
    let mut worst = 0.0f64;
    let mut coef_worst = 0.0f64;
    for x in points {
        let direct = f.evaluate_at(x)?;
        let (r, c) = crate::harmonic_model::polar(x, &f.pole)?;
        let quad = reproduce_by_quadrature(f, alpha, r, c)?;
        let coef = reproduce_by_coefficients(f, alpha, r, c)?;
        worst = worst.max((quad - direct).abs());
        coef_worst = coef_worst.max((coef - direct).abs() / direct.abs().max(1.0));
    }
    let params = format!("n={};alpha={alpha};K={};points={}", f.n, f.degree(), points.len());
    let mut report = CheckReport::exact("reproducing", params, worst, tol);
    report.pass &= coef_worst <= 1e-12;
    Ok(report)
}

/// `count` points uniform in the ball of radius `r_max`.
pub fn sample_points(n: usize, count: usize, r_max: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-r_max..r_max)).collect();
            if x.iter().map(|v| v * v).sum::<f64>() < r_max * r_max {
                break x;
            }
        })
        .collect()
}

/// Series evaluation of the Poisson kernel against `(1-r²)/|x - e|^n` at
/// `count` random `(r, s)` with `r <= r_max`; the error is relative to `max(1, P)`.
pub fn check_poisson(n: usize, r_max: f64, count: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let k = truncation_degree(n, 0.0, r_max, 1e-12)?;
    let p = TestFunctionSpec::poisson(n).expansion(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let r = rng.gen_range(0.0..=r_max);
        let s = rng.gen_range(-1.0..=1.0);
        let exact = (1.0 - r * r) / (1.0 - 2.0 * r * s + r * r).powf(0.5 * n as f64);
        worst = worst.max((p.evaluate(r, s)? - exact).abs() / exact.max(1.0));
    }
    Ok(CheckReport::exact("poisson_closed_form", format!("n={n};r_max={r_max};K={k};points={count}"), worst, tol))
}

/// Finite corpus of `count` functions in dimension `n`: the constant, two
/// fixed polynomials and seeded random expansions.
pub fn embedding_corpus(n: usize, count: usize, seed: u64) -> Result<Vec<TestFunctionSpec>> {
    let mut out = vec![
        TestFunctionSpec::polynomial(n, vec![1.0])?,
        TestFunctionSpec::polynomial(n, vec![0.5, -1.0, 0.25])?,
        TestFunctionSpec::polynomial(n, vec![0.0, 0.0, 0.0, 1.0])?,
    ];
    let mut s = seed;
    while out.len() < count {
        let decay = [0.0, 0.5, 1.0, 2.0][out.len() % 4];
        out.push(TestFunctionSpec::random(n, s, decay, 4 + out.len() % 7)?);
        s = s.wrapping_add(1);
    }
    out.truncate(count);
    Ok(out)
}

/// `‖f‖^p_{B^{∞,q}_α} <= αp ‖f‖^p_{B^{p,q}_α}`; the violation is relative to the right side.
pub fn check_embedding_b(
    corpus: &[TestFunctionSpec],
    p: f64,
    q: f64,
    alpha: f64,
    opts: &NormOptions,
    tol: f64,
) -> Result<CheckReport> {
    let sup = SpaceParams::b_inf_q(q, alpha)?;
    let int = SpaceParams::b_pq(p, q, alpha)?;
    let rows = corpus
        .par_iter()
        .map(|f| {
            let lhs = space_norm(f, &sup, opts)?.as_f64().powf(p);
            let rhs = alpha * p * space_norm(f, &int, opts)?.as_f64().powf(p);
            Ok(((lhs - rhs) / rhs.max(f64::MIN_POSITIVE), lhs / rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = rows.iter().fold(f64::NEG_INFINITY, |a, r| a.max(r.0));
    let c = rows.iter().fold(0.0f64, |a, r| a.max(r.1));
    let params = format!("p={p};q={q};alpha={alpha};functions={}", corpus.len());
    Ok(CheckReport::exact("embedding_b_inf", params, worst, tol).with_constant(c))
}

/// `‖f‖_{A^1_α} <= ‖f‖_{B^{∞,1}_α} / n`.
pub fn check_embedding_a1(corpus: &[TestFunctionSpec], alpha: f64, opts: &NormOptions, tol: f64) -> Result<CheckReport> {
    let sup = SpaceParams::b_inf_q(1.0, alpha)?;
    let berg = SpaceParams::a_p(1.0, alpha)?;
    let rows = corpus
        .par_iter()
        .map(|f| {
            let b = space_norm(f, &sup, opts)?.as_f64() / f.n as f64;
            let a = space_norm(f, &berg, opts)?.as_f64();
            Ok(((a - b) / b.max(f64::MIN_POSITIVE), a / b))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = rows.iter().fold(f64::NEG_INFINITY, |a, r| a.max(r.0));
    let c = rows.iter().fold(0.0f64, |a, r| a.max(r.1));
    Ok(CheckReport::exact("embedding_a1", format!("alpha={alpha};functions={}", corpus.len()), worst, tol).with_constant(c))
}

/// Points `0 = x_0 < ... < x_{m-1} = top` clustering geometrically near `top`.
fn clustered(m: usize, top: f64) -> Vec<f64> {
    let m = m.max(2);
    (0..m).map(|i| 1.0 - (1.0 - top).powf(i as f64 / (m - 1) as f64)).collect()
}

/// Sample box and resolution of the kernel bound checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBox {
    /// Largest `r` and `ρ` sampled.
    pub top: f64,
    /// Samples per axis; the refined box uses `2m - 1` nested samples.
    pub m: usize,
}

impl Default for KernelBox {
    fn default() -> Self {
        Self { top: 0.95, m: 11 }
    }
}

impl KernelBox {
    fn refined(self) -> Self {
        Self { m: 2 * self.m - 1, ..self }
    }
}

/// Where the singular factor of the pointwise kernel bound is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// `|ρx - y'|` with `x = r x'`.
    RhoX,
    /// `|rρ x' - y'|`.
    RRho,
}

fn lemma1_part1_constant(alpha: f64, n: usize, bx: KernelBox, placement: Placement) -> Result<f64> {
    let frac = alpha - alpha.floor();
    let int = alpha.floor();
    let radii = clustered(bx.m, bx.top);
    let thetas: Vec<f64> = (0..bx.m).map(|j| std::f64::consts::PI * j as f64 / (bx.m - 1) as f64).collect();
    let ck: Vec<f64> = (0..=truncation_degree(n, alpha, bx.top * bx.top, 1e-15)?)
        .map(|k| kernel_coefficient(k, alpha, n))
        .collect::<Result<_>>()?;
    let pairs: Vec<(f64, f64)> = radii.iter().flat_map(|&r| radii.iter().map(move |&rho| (r, rho))).collect();
    let c = pairs
        .par_iter()
        .map(|&(r, rho)| {
            let u = r * rho;
            let mut pow = 1.0;
            let b: Vec<f64> = ck
                .iter()
                .map(|c| {
                    let v = c * pow;
                    pow *= u;
                    v
                })
                .collect();
            thetas.iter().fold(0.0f64, |acc, &th| {
                let (sn, cs) = th.sin_cos();
                let dist = match placement {
                    Placement::RhoX => ((rho * r - cs).powi(2) + sn * sn).sqrt(),
                    Placement::RRho => (1.0 - 2.0 * u * cs + u * u).max(0.0).sqrt(),
                };
                let bound = (1.0 - u).powf(-frac) / dist.powf(n as f64 + int) + (1.0 - u).powf(-1.0 - alpha);
                acc.max(zonal_sum(n, &b, cs).abs() / bound)
            })
        })
        .reduce(|| 0.0, f64::max);
    Ok(c)
}

/// Pointwise kernel bound `|Q_α(x, y)| <= C (1-rρ)^{-{α}} |·|^{-(n+[α])} + C (1-rρ)^{-1-α}`.
pub fn check_lemma1_part1(alpha: f64, n: usize, bx: KernelBox, placement: Placement) -> Result<CheckReport> {
    if !(alpha > 0.0) {
        return domain(format!("pointwise kernel bound needs alpha > 0, got {alpha}"));
    }
    let c = lemma1_part1_constant(alpha, n, bx, placement)?;
    let cr = lemma1_part1_constant(alpha, n, bx.refined(), placement)?;
    let tag = match placement {
        Placement::RhoX => "rho_x",
        Placement::RRho => "r_rho",
    };
    Ok(CheckReport::fitted("lemma1_part1", format!("alpha={alpha};n={n};placement={tag};top={};m={}", bx.top, bx.m), c, cr))
}

fn lemma1_part2_constant(beta: f64, n: usize, bx: KernelBox, opts: &NormOptions) -> Result<f64> {
    // the mean depends on r and ρ only through u = rρ
    let q = TestFunctionSpec::q_kernel(n, beta, 1.0)?;
    let us = clustered(bx.m, bx.top);
    let vals = us
        .par_iter()
        .map(|&u| Ok(integral_mean(&q, 1.0, u, opts)? * (1.0 - u).powf(1.0 + beta)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `∫_S |Q_β(rx', y)| dσ(x') <= C (1-rρ)^{-1-β}`.
pub fn check_lemma1_part2(beta: f64, n: usize, bx: KernelBox, opts: &NormOptions) -> Result<CheckReport> {
    if !(beta > -1.0) {
        return domain(format!("kernel mean bound needs beta > -1, got {beta}"));
    }
    let c = lemma1_part2_constant(beta, n, bx, opts)?;
    let cr = lemma1_part2_constant(beta, n, bx.refined(), &opts.refined())?;
    Ok(CheckReport::fitted("lemma1_part2", format!("beta={beta};n={n};top={};m={}", bx.top, bx.m), c, cr))
}

fn lemma1_part3_constant(m_exp: f64, n: usize, bx: KernelBox, per_panel: usize) -> f64 {
    clustered(bx.m, bx.top)
        .into_iter()
        .map(|r| {
            let rule = SphereRule::graded(n, 1.0 - r, per_panel);
            let lhs = rule.integrate(|s| (1.0 - 2.0 * r * s + r * r).powf(-0.5 * m_exp));
            lhs * (1.0 - r).powf(m_exp - n as f64 + 1.0)
        })
        .fold(0.0, f64::max)
}

/// `∫_S |rx' - y'|^{-m} dσ(x') <= C (1-r)^{-(m-n+1)}` for `m > n - 1`.
pub fn check_lemma1_part3(m_exp: f64, n: usize, bx: KernelBox, per_panel: usize) -> Result<CheckReport> {
    if !(m_exp > n as f64 - 1.0) {
        return domain(format!("sphere integral bound needs m > n - 1, got m = {m_exp}, n = {n}"));
    }
    let c = lemma1_part3_constant(m_exp, n, bx, per_panel);
    let cr = lemma1_part3_constant(m_exp, n, bx.refined(), 2 * per_panel);
    Ok(CheckReport::fitted("lemma1_part3", format!("m={m_exp};n={n};top={};m_samples={}", bx.top, bx.m), c, cr))
}

/// Nondecreasing test functions on `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncreasingFn {
    Constant { c: f64 },
    /// `r^e`.
    Power { e: f64 },
    /// `e^{c r}`, `c >= 0`.
    Exp { c: f64 },
    /// `χ_{[r0, 1)}`.
    Step { r0: f64 },
    /// `(1-r)^{-δ}`.
    Singular { delta: f64 },
    /// `M_q(f, r)` of a finite expansion, `q >= 1`.
    Mean { f: TestFunctionSpec, q: f64 },
}

impl IncreasingFn {
    pub fn label(&self) -> String {
        match self {
            Self::Constant { c } => format!("const({c})"),
            Self::Power { e } => format!("r^{e}"),
            Self::Exp { c } => format!("exp({c}r)"),
            Self::Step { r0 } => format!("step({r0})"),
            Self::Singular { delta } => format!("(1-r)^-{delta}"),
            Self::Mean { f, q } => format!("M_{q}[{}]", f.label()),
        }
    }

    /// Values at the nodes of `grid` preceded by the value at `0`; rejects
    /// decreasing samples.
    fn sample(&self, grid: &RadialGrid, opts: &NormOptions) -> Result<Vec<f64>> {
        let pts: Vec<(f64, f64)> =
            std::iter::once((0.0, 1.0)).chain(grid.nodes().iter().copied().zip(grid.gaps().iter().copied())).collect();
        self.sample_at(&pts, opts)
    }

    /// Values at increasing `(r, 1 - r)` pairs.
    fn sample_at(&self, pts: &[(f64, f64)], opts: &NormOptions) -> Result<Vec<f64>> {
        let vals = match self {
            Self::Constant { c } => vec![*c; pts.len()],
            Self::Power { e } => pts.iter().map(|(r, _)| r.powf(*e)).collect(),
            Self::Exp { c } => pts.iter().map(|(r, _)| (c * r).exp()).collect(),
            Self::Step { r0 } => pts.iter().map(|&(r, _)| if r >= *r0 { 1.0 } else { 0.0 }).collect(),
            Self::Singular { delta } => pts.iter().map(|(_, g)| g.powf(-delta)).collect(),
            Self::Mean { f, q } => {
                if f.finite_degree().is_none() || *q < 1.0 {
                    return domain("mean test functions need a finite expansion and q >= 1");
                }
                pts.par_iter().map(|&(r, _)| integral_mean(f, *q, r, opts)).collect::<Result<_>>()?
            }
        };
        if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return domain(format!("{} must be finite and nonnegative", self.label()));
        }
        if vals.windows(2).any(|w| w[1] < w[0] * (1.0 - 1e-12) - 1e-300) {
            return domain(format!("{} is not increasing", self.label()));
        }
        Ok(vals)
    }
}

/// Exponents of the double-integral estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Params {
    pub beta: f64,
    pub s: f64,
    pub gamma: f64,
    pub p: f64,
}

/// Both sides of the double-integral estimate on a dyadic grid; the sums run
/// over the same nodes in either order.
pub fn lemma2_sides(g: &IncreasingFn, lp: Lemma2Params, grid: &RadialGrid, opts: &NormOptions) -> Result<(f64, f64)> {
    let Lemma2Params { beta, s, gamma, p } = lp;
    if !(beta > -1.0 && s > -1.0 && gamma > 0.0 && p > 0.0 && p <= 1.0) {
        return domain(format!("double-integral estimate needs beta, s > -1, gamma > 0, 0 < p <= 1 (got {lp:?})"));
    }
    let vals = g.sample(grid, opts)?;
    let gv = &vals[1..];
    let (gaps, w) = (grid.gaps(), grid.weights());
    let one_minus = |i: usize, j: usize| gaps[i] + gaps[j] - gaps[i] * gaps[j];
    let idx: Vec<usize> = (0..gaps.len()).collect();
    let lhs: f64 = idx
        .par_iter()
        .map(|&j| {
            let inner: f64 = idx.iter().map(|&i| w[i] * gv[i] * gaps[i].powf(beta) * one_minus(i, j).powf(-gamma)).sum();
            w[j] * gaps[j].powf(s) * inner.powf(p)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let rhs: f64 = idx
        .par_iter()
        .map(|&i| {
            let inner: f64 = idx.iter().map(|&j| w[j] * gaps[j].powf(s) * one_minus(i, j).powf(-gamma * p)).sum();
            w[i] * gv[i].powf(p) * gaps[i].powf(beta * p + p - 1.0) * inner
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok((lhs, rhs))
}

fn lemma2_constant(family: &[IncreasingFn], lp: Lemma2Params, grid: &RadialGrid, opts: &NormOptions) -> Result<f64> {
    let mut c = 0.0f64;
    for g in family {
        let (lhs, rhs) = lemma2_sides(g, lp, grid, opts)?;
        if rhs > 0.0 {
            c = c.max(lhs / rhs);
        } else if lhs > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(c)
}

/// The double-integral estimate over a family of increasing `G`: the fitted
/// constant is the largest ratio of the two sides.
pub fn check_lemma2(family: &[IncreasingFn], lp: Lemma2Params, grid: GridParams, opts: &NormOptions) -> Result<CheckReport> {
    let base = RadialGrid::new(grid)?;
    let fine = RadialGrid::new(GridParams { per_annulus: 2 * grid.per_annulus, levels: grid.levels + 8, ..grid })?;
    let c = lemma2_constant(family, lp, &base, opts)?;
    let cr = lemma2_constant(family, lp, &fine, &opts.refined())?;
    let params = format!("beta={};s={};gamma={};p={};family={}", lp.beta, lp.s, lp.gamma, lp.p, family.len());
    Ok(CheckReport::fitted("lemma2", params, c, cr))
}

/// Uniform mesh size of the supremum scan.
const SUP_MESH: usize = 4096;

/// `(sup φ(r)(1-r)^β, β ∫ φ(r)(1-r)^{β-1} dr)`.
pub fn lemma3_sides(phi: &IncreasingFn, beta: f64, grid: &RadialGrid, opts: &NormOptions) -> Result<(f64, f64)> {
    if !(beta > 0.0) {
        return domain(format!("sup-integral estimate needs beta > 0, got {beta}"));
    }
    let vals = phi.sample(grid, opts)?;
    // the supremum also scans a uniform mesh, which the dyadic nodes leave coarse near 0
    let mut pts: Vec<(f64, f64)> = (0..SUP_MESH).map(|i| (i as f64 / SUP_MESH as f64, 1.0 - i as f64 / SUP_MESH as f64)).collect();
    pts.extend(grid.nodes().iter().copied().zip(grid.gaps().iter().copied()));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let fine = phi.sample_at(&pts, opts)?;
    let mut lhs = pts.iter().zip(&fine).fold(0.0f64, |a, ((_, g), v)| a.max(v * g.powf(beta)));
    if let IncreasingFn::Step { r0 } = phi {
        lhs = lhs.max((1.0 - r0).powf(beta));
    }
    let rhs = beta * radial_integral_values(&vals[1..], beta - 1.0, grid).value;
    Ok((lhs, rhs))
}

/// `sup φ(1-r)^β <= β ∫ φ (1-r)^{β-1}` over a family; violations are relative.
pub fn check_lemma3(family: &[IncreasingFn], beta: f64, grid: &RadialGrid, opts: &NormOptions, tol: f64) -> Result<CheckReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut c = 0.0f64;
    for phi in family {
        let (lhs, rhs) = lemma3_sides(phi, beta, grid, opts)?;
        worst = worst.max((lhs - rhs) / rhs.max(f64::MIN_POSITIVE));
        if rhs > 0.0 {
            c = c.max(lhs / rhs);
        }
    }
    Ok(CheckReport::exact("lemma3", format!("beta={beta};family={}", family.len()), worst, tol).with_constant(c))
}

/// Functionals computed by the brute-force planar oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleFunctional {
    /// `M_p(f, r)`, with `p = ∞` allowed.
    Mean {
        #[serde(with = "crate::norms::inf_f64")]
        p: f64,
        r: f64,
    },
    /// `‖f‖_{A^p_α}`.
    BergmanNorm { p: f64, alpha: f64 },
    /// `A_α(f, r) = ∫_{|w| < r} |f(w)| (1-|w|)^α dw`.
    BallAverage { alpha: f64, r: f64 },
    /// `∫_{a <= |y| < b} (1-|y|²)^α Q_α(0, y) dy`, the degree-zero split weight.
    KernelMass { alpha: f64, a: f64, b: f64 },
}

/// Smallest accepted oracle resolution.
pub const MIN_RESOLUTION: usize = 8;

fn planar_value(f: &TestFunctionSpec, r: f64, c: f64, opts: &EvalOptions) -> Result<f64> {
    match f.kind {
        crate::harmonic_model::FunctionKind::Poisson => Ok((1.0 - r * r) / (1.0 - 2.0 * r * c + r * r)),
        _ => evaluate(f, r, c, opts),
    }
}

/// Midpoint sum of `|f|^p` over `m` angles on the circle of radius `r`.
fn circle_sum(f: &TestFunctionSpec, p: f64, r: f64, m: usize, opts: &EvalOptions) -> Result<f64> {
    let vals = (0..m)
        .map(|j| {
            // the sup also samples the angles 0 and π
            let shift = if p.is_infinite() { 0.0 } else { 1.0 };
            let th = std::f64::consts::PI * (2.0 * j as f64 + shift) / m as f64;
            planar_value(f, r, th.cos(), opts).map(f64::abs)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(if p.is_infinite() {
        vals.into_iter().fold(0.0, f64::max)
    } else {
        vals.iter().map(|v| v.powf(p)).sum::<f64>() / m as f64
    })
}

/// `∫_lo^hi h(ρ) dρ` by the midpoint rule in `u` with `ρ = hi - (hi - lo) u²`,
/// which tames endpoint singularities at `hi`.
fn graded_midpoint(lo: f64, hi: f64, m: usize, h: impl Fn(f64) -> Result<f64> + Sync) -> Result<f64> {
    let parts = (0..m)
        .into_par_iter()
        .map(|i| {
            let u = (i as f64 + 0.5) / m as f64;
            let rho = hi - (hi - lo) * u * u;
            Ok(h(rho)? * 2.0 * (hi - lo) * u / m as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

/// Aitken extrapolation of three results at resolutions `m`, `2m`, `4m`.
fn extrapolate(i1: f64, i2: f64, i4: f64) -> f64 {
    let (d1, d2) = (i2 - i1, i4 - i2);
    if d2.abs() <= 1e-15 * i4.abs().max(1e-300) || d1 * d2 <= 0.0 || d2.abs() >= d1.abs() {
        return i4;
    }
    i4 - d2 * d2 / (d2 - d1)
}

fn oracle_at(f: &TestFunctionSpec, func: OracleFunctional, m: usize, opts: &EvalOptions) -> Result<f64> {
    let angles = 4 * m;
    match func {
        OracleFunctional::Mean { p, r } => {
            let s = circle_sum(f, p, r, angles, opts)?;
            Ok(if p.is_infinite() { s } else { s.powf(1.0 / p) })
        }
        OracleFunctional::BergmanNorm { p, alpha } => {
            let v = graded_midpoint(0.0, 1.0, m, |rho| Ok(circle_sum(f, p, rho, angles, opts)? * (1.0 - rho).powf(alpha) * rho))?;
            Ok(v.powf(1.0 / p))
        }
        OracleFunctional::BallAverage { alpha, r } => {
            graded_midpoint(0.0, r, m, |rho| Ok(circle_sum(f, 1.0, rho, angles, opts)? * (1.0 - rho).powf(alpha) * rho))
        }
        OracleFunctional::KernelMass { alpha, a, b } => {
            let c0 = kernel_coefficient(0, alpha, 2)?;
            graded_midpoint(a, b, m, |rho| Ok(c0 * (1.0 - rho * rho).powf(alpha) * rho))
        }
    }
}

/// Dense polar-grid sums on the disk with Aitken extrapolation over
/// resolutions `m`, `2m`, `4m`. Evaluates `f` pointwise, in closed form for
/// the Poisson kernel.
pub fn bruteforce_oracle_n2(f: &TestFunctionSpec, func: OracleFunctional, resolution: usize) -> Result<f64> {
    if f.n != 2 {
        return domain(format!("planar oracle needs n = 2, got {}", f.n));
    }
    if resolution < MIN_RESOLUTION {
        return domain(format!("oracle resolution must be at least {MIN_RESOLUTION}, got {resolution}"));
    }
    f.validate()?;
    let opts = EvalOptions::default();
    let i1 = oracle_at(f, func, resolution, &opts)?;
    let i2 = oracle_at(f, func, 2 * resolution, &opts)?;
    let i4 = oracle_at(f, func, 4 * resolution, &opts)?;
    Ok(extrapolate(i1, i2, i4))
}

/// Library value against the planar oracle.
pub fn check_against_oracle(name: &str, f: &TestFunctionSpec, func: OracleFunctional, library: f64, resolution: usize, tol: f64) -> Result<CheckReport> {
    let oracle = bruteforce_oracle_n2(f, func, resolution)?;
    let params = format!("f={};functional={};resolution={resolution}", f.label(), serde_json::to_string(&func).unwrap_or_default());
    Ok(CheckReport::exact(name, params, (library - oracle).abs(), tol))
}

/// Exponents of the embedding checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingGrid {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for EmbeddingGrid {
    fn default() -> Self {
        Self { p: vec![0.5, 1.0, 2.0], q: vec![1.0, 2.0], alpha: vec![0.5, 1.0, 2.0] }
    }
}

impl EmbeddingGrid {
    /// Every `(p, q, α)` as the pair of spaces it compares.
    pub fn spaces(&self) -> Result<Vec<(f64, f64, f64)>> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &q in &self.q {
                for &a in &self.alpha {
                    SpaceParams::b_pq(p, q, a)?;
                    SpaceParams::b_inf_q(q, a)?;
                    out.push((p, q, a));
                }
            }
        }
        Ok(out)
    }
}

/// Settings of [`run_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteOptions {
    pub seed: u64,
    pub norm: NormOptions,
    pub kernel_box: KernelBox,
    /// Functions per dimension in the embedding corpus.
    pub corpus_size: usize,
    pub embedding: EmbeddingGrid,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            norm: NormOptions::default(),
            kernel_box: KernelBox::default(),
            corpus_size: 12,
            embedding: EmbeddingGrid::default(),
        }
    }
}

impl SuiteOptions {
    pub fn validate(&self) -> Result<()> {
        self.embedding.spaces()?;
        self.norm.radial_grid()?;
        if self.kernel_box.m < 2 || !(0.0..1.0).contains(&self.kernel_box.top) {
            return Err(crate::error::HarmexError::Config(format!("kernel box needs m >= 2 and 0 <= top < 1, got {:?}", self.kernel_box)));
        }
        if self.corpus_size == 0 {
            return Err(crate::error::HarmexError::Config("embedding corpus must not be empty".into()));
        }
        Ok(())
    }
}

type Job<'a> = Box<dyn Fn() -> Result<Vec<CheckReport>> + Send + Sync + 'a>;

/// Runs every check family with moderate sample sizes; reports come back in a
/// fixed order.
pub fn run_suite(opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    opts.validate()?;
    let seed = opts.seed;
    let nopts = &opts.norm;
    let bx = opts.kernel_box;
    let jobs: Vec<Job> = vec![
        Box::new(|| {
            let mut v = Vec::new();
            for n in [2, 3, 4] {
                for a in [0.25, 0.5, 1.0, 2.5] {
                    v.push(check_partition_of_unity(n, a, 50, 1e-10)?);
                }
            }
            Ok(v)
        }),
        Box::new(move || {
            let mut v = Vec::new();
            for n in [2, 3] {
                let f = TestFunctionSpec::random(n, seed, 1.0, 10)?.expansion(10)?;
                let pts = sample_points(n, 20, 0.8, seed);
                for a in [0.0, 0.5, 2.0] {
                    v.push(check_reproducing(&f, a, &pts, 1e-8)?);
                }
            }
            Ok(v)
        }),
        Box::new(move || Ok(vec![check_poisson(2, 0.9, 1000, seed, 1e-9)?, check_poisson(3, 0.9, 1000, seed, 1e-9)?])),
        Box::new(move || {
            let mut v = Vec::new();
            let corpus: Vec<TestFunctionSpec> =
                [2, 3].into_iter().map(|n| embedding_corpus(n, opts.corpus_size, seed)).collect::<Result<Vec<_>>>()?.concat();
            for (p, q, a) in opts.embedding.spaces()? {
                v.push(check_embedding_b(&corpus, p, q, a, nopts, 1e-10)?);
            }
            for &a in &opts.embedding.alpha {
                v.push(check_embedding_a1(&corpus, a, nopts, 1e-10)?);
            }
            Ok(v)
        }),
        Box::new(move || {
            let mut v = Vec::new();
            for a in [0.5, 1.0, 1.5] {
                for n in [2, 3] {
                    for pl in [Placement::RhoX, Placement::RRho] {
                        v.push(check_lemma1_part1(a, n, bx, pl)?);
                    }
                }
            }
            for b in [-0.5, 0.0, 1.0] {
                v.push(check_lemma1_part2(b, 2, bx, nopts)?);
            }
            for (m, n) in [(2.0, 2), (3.0, 3), (4.5, 3)] {
                v.push(check_lemma1_part3(m, n, KernelBox { top: 0.999, ..bx }, nopts.per_panel)?);
            }
            Ok(v)
        }),
        Box::new(move || {
            let family = lemma_family(seed)?;
            let grid = GridParams { levels: 30, per_annulus: 8, tail: 5 };
            let mut v = Vec::new();
            for lp in lemma2_grid() {
                v.push(check_lemma2(&family, lp, grid, nopts)?);
            }
            let rg = RadialGrid::new(GridParams::default())?;
            for b in [0.25, 1.0, 3.0] {
                v.push(check_lemma3(&family, b, &rg, nopts, 1e-10)?);
            }
            Ok(v)
        }),
        Box::new(|| {
            let one = TestFunctionSpec::polynomial(2, vec![1.0])?;
            let pois = TestFunctionSpec::poisson(2);
            let half = IntervalSet::interval(0.0, 0.5)?;
            Ok(vec![
                check_against_oracle(
                    "oracle_bergman_norm",
                    &one,
                    OracleFunctional::BergmanNorm { p: 1.0, alpha: 0.5 },
                    1.0 / (1.5 * 2.5),
                    64,
                    1e-6,
                )?,
                check_against_oracle("oracle_mean", &pois, OracleFunctional::Mean { p: 1.0, r: 0.7 }, 1.0, 64, 1e-6)?,
                check_against_oracle(
                    "oracle_split_weight",
                    &one,
                    OracleFunctional::KernelMass { alpha: 1.0, a: 0.0, b: 0.5 },
                    split_weight(0, 1.0, 2, &half)?,
                    64,
                    1e-8,
                )?,
            ])
        }),
    ];
    let out = jobs.par_iter().map(|job| job()).collect::<Result<Vec<_>>>()?;
    Ok(out.concat())
}

/// The `3^4` grid of `(β, s, γ, p)` exercised by the suite.
pub fn lemma2_grid() -> Vec<Lemma2Params> {
    let mut v = Vec::with_capacity(81);
    for beta in [-0.5, 0.0, 1.0] {
        for s in [-0.5, 0.0, 1.0] {
            for gamma in [0.5, 1.0, 2.0] {
                for p in [0.25, 0.5, 1.0] {
                    v.push(Lemma2Params { beta, s, gamma, p });
                }
            }
        }
    }
    v
}

/// Increasing functions used by the lemma checks.
pub fn lemma_family(seed: u64) -> Result<Vec<IncreasingFn>> {
    Ok(vec![
        IncreasingFn::Constant { c: 1.0 },
        IncreasingFn::Power { e: 1.0 },
        IncreasingFn::Power { e: 2.0 },
        IncreasingFn::Power { e: 4.0 },
        IncreasingFn::Exp { c: 1.0 },
        IncreasingFn::Step { r0: 0.5 },
        IncreasingFn::Step { r0: 0.875 },
        IncreasingFn::Singular { delta: 0.25 },
        IncreasingFn::Mean { f: TestFunctionSpec::random(2, seed, 1.0, 6)?, q: 1.0 },
        IncreasingFn::Mean { f: TestFunctionSpec::random(3, seed + 1, 0.5, 6)?, q: 2.0 },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::log_beta;
    use approx::assert_relative_eq;

    #[test]
    fn reproducing_examples() {
        for a in [0.0, 0.5, 3.0] {
            let one = ZonalExpansion::constant(3, 1.0).unwrap();
            let rep = check_reproducing(&one, a, &[vec![0.0; 3]], 1e-10).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
        let mut coeffs = vec![0.0; 6];
        coeffs[5] = 1.0;
        let mode = ZonalExpansion::with_default_pole(2, coeffs).unwrap();
        let rep = check_reproducing(&mode, 1.0, &sample_points(2, 5, 0.9, 3), 1e-9).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(check_reproducing(&mode, -0.5, &[vec![0.0, 0.0]], 1e-9).is_err());
    }

    #[test]
    fn partition_and_poisson() {
        assert!(check_partition_of_unity(3, 0.5, 50, 1e-10).unwrap().pass);
        let rep = check_poisson(2, 0.9, 200, 1, 1e-9).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn kernel_bound_examples() {
        let bx = KernelBox { top: 0.0, m: 2 };
        // at r = 0 the sphere integral is 1 and so is the bound
        assert_relative_eq!(lemma1_part3_constant(3.0, 3, bx, 12), 1.0, epsilon = 1e-14);
        // at u = 0 the mean of the kernel is its constant term, 2 for β = 0, n = 2
        let c = lemma1_part2_constant(0.0, 2, bx, &NormOptions::default()).unwrap();
        assert_relative_eq!(c, 2.0, epsilon = 1e-12);
        for pl in [Placement::RhoX, Placement::RRho] {
            let rep = check_lemma1_part1(1.0, 2, KernelBox::default(), pl).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
        assert!(check_lemma1_part1(0.0, 2, bx, Placement::RhoX).is_err());
        assert!(check_lemma1_part3(1.0, 2, bx, 8).is_err());
    }

    #[test]
    fn lemma2_examples() {
        let grid = RadialGrid::new(GridParams { levels: 30, per_annulus: 8, tail: 5 }).unwrap();
        let opts = NormOptions::default();
        let lp = Lemma2Params { beta: 0.0, s: 0.5, gamma: 1.0, p: 1.0 };
        let (l, r) = lemma2_sides(&IncreasingFn::Constant { c: 0.0 }, lp, &grid, &opts).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
        let (l, r) = lemma2_sides(&IncreasingFn::Constant { c: 1.0 }, lp, &grid, &opts).unwrap();
        assert_relative_eq!(l / r, 1.0, epsilon = 1e-9);
        // the Poisson kernel is positive with unit mean on every sphere
        let pois = TestFunctionSpec::poisson(3);
        for r in [0.0, 0.3, 0.9] {
            assert_relative_eq!(integral_mean(&pois, 1.0, r, &opts).unwrap(), 1.0, epsilon = 1e-10);
        }
        let bad = IncreasingFn::Singular { delta: -1.0 };
        assert!(lemma2_sides(&bad, lp, &grid, &opts).is_err());
        assert!(lemma2_sides(&IncreasingFn::Constant { c: 1.0 }, Lemma2Params { p: 1.5, ..lp }, &grid, &opts).is_err());
    }

    #[test]
    fn lemma3_examples() {
        let grid = RadialGrid::new(GridParams::default()).unwrap();
        let opts = NormOptions::default();
        for beta in [0.25, 1.0, 3.0] {
            let (l, r) = lemma3_sides(&IncreasingFn::Constant { c: 1.0 }, beta, &grid, &opts).unwrap();
            assert_relative_eq!(l, 1.0);
            assert_relative_eq!(r, 1.0, epsilon = 1e-12);
            let (l, r) = lemma3_sides(&IncreasingFn::Power { e: 1.0 }, beta, &grid, &opts).unwrap();
            let sup = (beta / (1.0 + beta)).powf(beta) / (1.0 + beta);
            let rhs = beta * log_beta(2.0, beta).unwrap().exp();
            assert_relative_eq!(rhs, 1.0 / (1.0 + beta), epsilon = 1e-13);
            assert_relative_eq!(r, rhs, epsilon = 1e-11);
            assert!(l <= sup && l > sup * (1.0 - 1e-5) && l < r, "{l} {sup} {r}");
            let (l, r) = lemma3_sides(&IncreasingFn::Step { r0: 0.75 }, beta, &grid, &opts).unwrap();
            assert_relative_eq!(l, 0.25f64.powf(beta), epsilon = 1e-14);
            assert_relative_eq!(r, 0.25f64.powf(beta), epsilon = 1e-12);
        }
    }

    #[test]
    fn oracle_examples() {
        let one = TestFunctionSpec::polynomial(2, vec![1.0]).unwrap();
        for a in [0.0, 0.5, 2.0] {
            let v = bruteforce_oracle_n2(&one, OracleFunctional::BergmanNorm { p: 1.0, alpha: a }, 64).unwrap();
            assert_relative_eq!(v, 1.0 / ((a + 1.0) * (a + 2.0)), epsilon = 1e-6);
        }
        let pois = TestFunctionSpec::poisson(2);
        let m = bruteforce_oracle_n2(&pois, OracleFunctional::Mean { p: 1.0, r: 0.7 }, 32).unwrap();
        assert_relative_eq!(m, 1.0, epsilon = 1e-6);
        let sup = bruteforce_oracle_n2(&pois, OracleFunctional::Mean { p: f64::INFINITY, r: 0.5 }, 32).unwrap();
        assert_relative_eq!(sup, 3.0, epsilon = 1e-12);
        let w0 = bruteforce_oracle_n2(&one, OracleFunctional::KernelMass { alpha: 1.0, a: 0.0, b: 0.5 }, 64).unwrap();
        assert_relative_eq!(w0, 7.0 / 16.0, epsilon = 1e-8);
        // A_0(1, r) is the area measure r²/2
        let ba = bruteforce_oracle_n2(&one, OracleFunctional::BallAverage { alpha: 0.0, r: 0.6 }, 32).unwrap();
        assert_relative_eq!(ba, 0.18, epsilon = 1e-8);
        assert!(bruteforce_oracle_n2(&one, OracleFunctional::Mean { p: 1.0, r: 0.5 }, 4).is_err());
        assert!(bruteforce_oracle_n2(&TestFunctionSpec::poisson(3), OracleFunctional::Mean { p: 1.0, r: 0.5 }, 32).is_err());
    }

    #[test]
    fn csv_rendering() {
        assert_eq!(CSV_HEADER, "check,params,max_violation,fitted_C,pass");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
        let r = CheckReport::exact("c", "p=1;q=2".into(), -1.0, 0.0);
        assert_eq!(r.csv_row(), "c,p=1;q=2,-1.000000e0,,true");
        let f = CheckReport::fitted("c", String::new(), 2.0, 2.5);
        assert!(!f.pass);
        assert!(CheckReport::fitted("c", String::new(), 2.0, 2.2).pass);
    }
}
