//! Level sets of radial profiles, their logarithmic measure, finiteness
//! diagnostics and the constructive split `f = f1 + f2` used to bracket
//! distances between a space and a smaller one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, HarmexError, Result};
use crate::harmonic_model::{Modulated, TestFunctionSpec, ZonalExpansion, ZonalSeries};
use crate::interval::IntervalSet;
use crate::norms::{
    integral_mean, norm_from_profile, Functional, NormOptions, NormValue,
    ProfileSpec, RadialProfile, SpaceParams, PROFILE_FLOOR,
};
use crate::quadrature::{radial_integral_on, GridParams, radial_integral_values, RadialGrid, RadialIntegral, DIVERGENCE_RATIO};
use crate::special_fn::split_weight;

/// `{r : g(r) >= ε}`.
///
/// Between samples `g` is interpolated linearly in `log(1-r)` (log-log when
/// both samples are positive). Past the last node the set reaches `1` only if
/// the profile's limit is at least `ε`; otherwise it stops at the grid's outer edge.
pub fn level_set(profile: &RadialProfile, epsilon: f64) -> Result<IntervalSet> {
    if !(epsilon > 0.0) {
        return domain(format!("level must be positive, got {epsilon}"));
    }
    let pts: Vec<(f64, f64, f64)> = profile.points().collect();
    let mut pieces = Vec::new();
    let mut start: Option<f64> = None;
    if pts[0].2 >= epsilon {
        start = Some(0.0);
    }
    for w in pts.windows(2) {
        let ((r0, g0, v0), (r1, g1, v1)) = (w[0], w[1]);
        let (in0, in1) = (v0 >= epsilon, v1 >= epsilon);
        if in0 == in1 {
            continue;
        }
        let rc = crossing(epsilon, (g0, v0), (g1, v1)).map_or(if in1 { r1 } else { r0 }, |gc| 1.0 - gc);
        if in1 {
            start = Some(rc.clamp(r0, r1));
        } else if let Some(a) = start.take() {
            pieces.push((a, rc.clamp(r0, r1)));
        }
    }
    if let Some(a) = start {
        let tail = profile.tail();
        let end = if tail.unbounded || tail.limit >= epsilon { 1.0 } else { profile.grid().outer_edge() };
        pieces.push((a, end.max(a)));
    }
    IntervalSet::from_intervals(pieces)
}

/// Gap at which the interpolant between two samples equals `eps`.
fn crossing(eps: f64, (g0, v0): (f64, f64), (g1, v1): (f64, f64)) -> Option<f64> {
    let (x0, x1) = (g0.ln(), g1.ln());
    let t = if v0 > 0.0 && v1 > 0.0 {
        (eps.ln() - v0.ln()) / (v1.ln() - v0.ln())
    } else {
        (eps - v0) / (v1 - v0)
    };
    t.is_finite().then(|| (x0 + t.clamp(0.0, 1.0) * (x1 - x0)).exp())
}

/// `∫ χ_L(r) (1-r)^{-1} dr = Σ ln((1-a_i)/(1-b_i))`, divergent when `L` reaches `1`.
pub fn log_measure(set: &IntervalSet) -> NormValue {
    if set.touches_boundary() {
        return NormValue::Divergent;
    }
    NormValue::Finite(set.intervals().iter().map(|&(a, b)| ((1.0 - a) / (1.0 - b)).ln()).sum())
}

/// The finiteness rule behind the `s2`-type thresholds: the level set misses the
/// last `window` annuli of the profile's asymptotic extension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRule {
    pub window: usize,
}

impl TailRule {
    pub fn new(window: usize) -> Self {
        Self { window }
    }

    /// Whether `∫ χ_{L_ε} (1-r)^{-1} dr` is finite for this profile.
    pub fn holds(&self, profile: &RadialProfile, epsilon: f64) -> Result<bool> {
        if profile.resolved_levels() < self.window {
            return Err(HarmexError::Resolution(format!(
                "profile resolves {} annuli, tail rule needs {}",
                profile.resolved_levels(),
                self.window
            )));
        }
        let tail = profile.tail();
        Ok(!tail.unbounded && tail.limit < epsilon)
    }
}

/// Bisection steps of the threshold search.
pub const THRESHOLD_STEPS: usize = 40;

/// `ε* = inf {ε : rule holds}`, by bisection in `log ε` between the profile
/// maximum and `1e-12` times it. Returns `0` when the rule holds at the floor.
pub fn s2_threshold(profile: &RadialProfile, rule: &TailRule) -> Result<f64> {
    if profile.tail().unbounded {
        return domain("profile is unbounded; the function is outside the ambient space");
    }
    let top = profile.max();
    if top == 0.0 {
        return Ok(0.0);
    }
    let floor = PROFILE_FLOOR * top;
    if rule.holds(profile, floor)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (floor.ln(), (top * (1.0 + 1e-12)).ln());
    if !rule.holds(profile, hi.exp())? {
        return Ok(top);
    }
    for _ in 0..THRESHOLD_STEPS {
        let mid = 0.5 * (lo + hi);
        if rule.holds(profile, mid.exp())? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

/// The smallest `ε` of a decreasing grid for which the rule holds.
pub fn s2_threshold_on_grid(profile: &RadialProfile, epsilon_grid: &[f64], rule: &TailRule) -> Result<Option<f64>> {
    if epsilon_grid.iter().any(|&e| !(e > 0.0)) || epsilon_grid.windows(2).any(|w| w[1] > w[0]) {
        return domain("epsilon grid must be positive and decreasing");
    }
    let mut best = None;
    for &e in epsilon_grid {
        if rule.holds(profile, e)? {
            best = Some(e);
        } else {
            break;
        }
    }
    Ok(best)
}

/// Outcome of a finiteness diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Converges,
    Diverges,
    Inconclusive,
}

/// A double integral's decision with the per-annulus sums of the outer integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitenessDiagnostic {
    pub decision: Decision,
    pub value: f64,
    pub fitted_ratio: f64,
    pub annulus_sums: Vec<f64>,
}

impl FinitenessDiagnostic {
    fn from_sums(sums: Vec<f64>, window: usize) -> Self {
        let ri = RadialIntegral::from_annulus_sums(sums, window);
        let fitted = ri.tail_ratio(window);
        let s = &ri.annulus_sums;
        let jn = s.len();
        let ratios: Vec<f64> = (jn - window..jn - 1)
            .map(|j| if s[j] == 0.0 { if s[j + 1] == 0.0 { 0.0 } else { f64::INFINITY } } else { s[j + 1] / s[j] })
            .collect();
        let max_ratio = ratios.iter().fold(0.0f64, |a, &b| a.max(b));
        let min_ratio = ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let decision = if s[jn - 1] == 0.0 || (fitted < DIVERGENCE_RATIO && max_ratio < 1.0) {
            Decision::Converges
        } else if fitted >= DIVERGENCE_RATIO && min_ratio >= 0.9 {
            Decision::Diverges
        } else {
            Decision::Inconclusive
        };
        let value = if decision == Decision::Converges { ri.annulus_sums.iter().sum::<f64>() + ri.tail } else { f64::INFINITY };
        Self { decision, value, fitted_ratio: fitted, annulus_sums: ri.annulus_sums }
    }
}

fn outer_diagnostic(
    grid: &RadialGrid,
    alpha: f64,
    p: f64,
    inner: impl Fn(f64) -> f64 + Sync,
) -> FinitenessDiagnostic {
    let vals: Vec<f64> = grid.nodes().par_iter().map(|&rho| inner(rho).powf(p)).collect();
    let ri = radial_integral_values(&vals, alpha * p - 1.0, grid);
    FinitenessDiagnostic::from_sums(ri.annulus_sums, grid.tail())
}

fn check_p_small(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return domain(format!("p must lie in (0, 1], got {p}"));
    }
    Ok(())
}

/// `∫_0^1 (∫_0^1 χ_L(r) (1-r)^{t-α} (1-rρ)^{-(t+1)} dr)^p (1-ρ)^{pα-1} dρ`
/// with `L = L_ε` of the profile `(1-r)^α M_1(f, r)`.
pub fn finiteness_diagnostic_t4(
    profile: &RadialProfile,
    alpha: f64,
    t: f64,
    p: f64,
    epsilon: f64,
) -> Result<FinitenessDiagnostic> {
    check_p_small(p)?;
    if !(t > alpha - 1.0) {
        return domain(format!("t must exceed alpha - 1 (t = {t}, alpha = {alpha})"));
    }
    let set = level_set(profile, epsilon)?;
    let grid = profile.grid();
    let params = grid.params();
    if params.levels < params.tail + INNER_MARGIN {
        return Err(HarmexError::Resolution(format!("grid of {} annuli leaves no room for the inner integral", params.levels)));
    }
    // the inner integrand peaks at 1 - r ~ 1 - ρ, so outer nodes stay clear of the grid's edge
    let outer = RadialGrid::new(GridParams { levels: params.levels - INNER_MARGIN, ..params })?;
    if set.is_empty() {
        return Ok(FinitenessDiagnostic::from_sums(vec![0.0; outer.levels()], outer.tail()));
    }
    Ok(outer_diagnostic(&outer, alpha, p, |rho| {
        radial_integral_on(&set, |r, _| (1.0 - r * rho).powf(-(t + 1.0)), t - alpha, grid).value
    }))
}

/// Annuli of the inner grid beyond the outer integral's last node.
pub const INNER_MARGIN: usize = 10;

/// `∫_a^b (1-rρ)^{-(α+1)} dr` summed over the intervals of `set`, in closed form.
pub fn kernel_interval_integral(set: &IntervalSet, rho: f64, alpha: f64) -> f64 {
    set.intervals()
        .iter()
        .map(|&(a, b)| {
            if rho < 1e-9 {
                return (b - a) * (1.0 + 0.5 * (alpha + 1.0) * rho * (a + b));
            }
            // (1-ρb)^{-α} - (1-ρa)^{-α} = e^{v} expm1(u - v)
            let u = -alpha * (-rho * b).ln_1p();
            let v = -alpha * (-rho * a).ln_1p();
            v.exp() * (u - v).exp_m1() / (alpha * rho)
        })
        .sum()
}

/// `∫_0^1 (∫_{L̂} (1-rρ)^{-(α+1)} dr)^p (1-ρ)^{αp-1} dρ` with `L̂ = L̂_ε` of
/// the profile `(1-r)^α M_∞(f, r)`.
pub fn finiteness_diagnostic_t6(profile: &RadialProfile, alpha: f64, p: f64, epsilon: f64) -> Result<FinitenessDiagnostic> {
    check_p_small(p)?;
    if !(alpha > 0.0) {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    let set = level_set(profile, epsilon)?;
    let grid = profile.grid();
    if set.is_empty() {
        return Ok(FinitenessDiagnostic::from_sums(vec![0.0; grid.levels()], grid.tail()));
    }
    Ok(outer_diagnostic(grid, alpha, p, |rho| kernel_interval_integral(&set, rho, alpha)))
}

/// Multipliers `w_k = c_k(order) ∫_L (1-ρ²)^order ρ^{2k+n-1} dρ` for `k <= k_max`.
pub fn split_weights(n: usize, order: f64, set: &IntervalSet, k_max: usize) -> Result<Vec<f64>> {
    (0..=k_max).into_par_iter().map(|k| split_weight(k, order, n, set)).collect()
}

/// `f1 = Σ w_k a_k r^k Z_k`, `f2 = f - f1` coefficientwise.
pub fn split_decomposition(f: &ZonalExpansion, order: f64, set: &IntervalSet) -> Result<(ZonalExpansion, ZonalExpansion)> {
    let w = split_weights(f.n, order, set, f.degree())?;
    let c1 = f.coeffs.iter().zip(&w).map(|(a, w)| a * w).collect();
    let c2 = f.coeffs.iter().zip(&w).map(|(a, w)| a * (1.0 - w)).collect();
    Ok((
        ZonalExpansion { n: f.n, pole: f.pole.clone(), coeffs: c1 },
        ZonalExpansion { n: f.n, pole: f.pole.clone(), coeffs: c2 },
    ))
}

/// Negligible split multiplier.
const HEAD_CUTOFF: f64 = 1e-16;

/// Degree past which every multiplier is below `1e-16`, or `None` when it
/// exceeds `cap`. Requires a set bounded away from `1`.
pub fn split_head_degree(n: usize, order: f64, set: &IntervalSet, cap: usize) -> Result<Option<usize>> {
    if set.touches_boundary() {
        return domain("split head is infinite for a set reaching the boundary");
    }
    if set.is_empty() {
        return Ok(Some(0));
    }
    let small = |k: usize| -> Result<bool> { Ok(split_weight(k, order, n, set)? < HEAD_CUTOFF) };
    let mut hi = 16usize;
    while !small(hi)? {
        if hi >= cap {
            return Ok(None);
        }
        hi = (hi * 2).min(cap);
    }
    let mut lo = 0usize;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if small(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Distance theorems whose two quantities are bracketed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    T3,
    T4,
    T5,
    T6,
    Tfinal,
}

impl Theorem {
    pub const ALL: [Theorem; 5] = [Theorem::T3, Theorem::T4, Theorem::T5, Theorem::T6, Theorem::Tfinal];

    pub fn tag(self) -> &'static str {
        match self {
            Self::T3 => "T3",
            Self::T4 => "T4",
            Self::T5 => "T5",
            Self::T6 => "T6",
            Self::Tfinal => "Tfinal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| HarmexError::Config(format!("unknown theorem tag {s:?} (expected T3, T4, T5, T6 or Tfinal)")))
    }
}

/// Exponents and weights of a distance problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "one")]
    pub p: f64,
    /// Kernel order of the split for the T4 problem; defaults to `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl TheoremParams {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, beta: 1.0, p: 1.0, t: None }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }
}

/// The spaces and split order attached to a theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceSetup {
    pub ambient: SpaceParams,
    pub small: SpaceParams,
    pub split_order: f64,
}

impl DistanceSetup {
    pub fn new(theorem: Theorem, tp: &TheoremParams) -> Result<Self> {
        let TheoremParams { alpha, beta, p, t } = *tp;
        let need = |ok: bool, msg: String| if ok { Ok(()) } else { Err(HarmexError::Domain(format!("{}: {msg}", theorem.tag()))) };
        match theorem {
            Theorem::T3 | Theorem::T5 | Theorem::Tfinal => need(p >= 1.0 && p.is_finite(), format!("p must lie in [1, inf) (got {p})"))?,
            Theorem::T4 | Theorem::T6 => need(p > 0.0 && p <= 1.0, format!("p must lie in (0, 1] (got {p})"))?,
        }
        if theorem != Theorem::Tfinal {
            need(alpha > 0.0, format!("alpha must be > 0 (got {alpha})"))?;
        }
        let setup = match theorem {
            Theorem::T3 | Theorem::T4 => {
                let order = if theorem == Theorem::T4 { t.unwrap_or(alpha) } else { alpha };
                let mut small = SpaceParams::b_pq(p, 1.0, alpha)?;
                if theorem == Theorem::T4 {
                    small.t = Some(order);
                }
                small.validate()?;
                Self { ambient: SpaceParams::b_inf_q(1.0, alpha)?, small, split_order: order }
            }
            Theorem::T5 | Theorem::T6 => {
                Self { ambient: SpaceParams::a_inf(alpha)?, small: SpaceParams::b_p_inf(p, alpha)?, split_order: alpha }
            }
            Theorem::Tfinal => Self {
                ambient: SpaceParams::m_beta(alpha, beta)?,
                small: SpaceParams::m_p_beta(p, alpha, beta)?,
                split_order: alpha + beta + 1.0,
            },
        };
        Ok(setup)
    }
}

/// Controls of [`distance_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceOptions {
    pub norm: NormOptions,
    /// Largest head degree of `f1`; larger splits are skipped.
    pub head_cap: usize,
    /// Explicit `ε` values; otherwise multiples of `ε*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_grid: Option<Vec<f64>>,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self { norm: NormOptions::default(), head_cap: 8192, epsilon_grid: None }
    }
}

/// Multiples of a positive `ε*` tried by default.
pub const EPSILON_FACTORS: [f64; 6] = [1.05, 1.1, 1.25, 1.5, 2.0, 3.0];

/// One `ε` of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub level_set: IntervalSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head_degree: Option<usize>,
    /// Ambient norm of `f2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s1_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    /// Decision of the double-integral criterion (T4, T6).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    /// Kernel majorant of the ambient norm of `f2` (T5, T6).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub majorant: Option<f64>,
    /// `ε sup_r (1-r)^α ∫_{I∖L̂} (1-rρ)^{-(1+α)} dρ`, the constant-free closed-form bound on `f2` (T5, T6).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_majorant: Option<f64>,
    /// `sup (1-r)^α φ(r)` (T5, T6).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_sup: Option<f64>,
    /// `(∫ ψ^p (1-r)^{-1} dr)^{1/p}` (T5, T6).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_norm: Option<NormValue>,
}

/// Diagnostics attached to a [`DistancePair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceDiagnostics {
    pub profile_limit: f64,
    pub resolved_levels: usize,
    /// Largest profile value per annulus.
    pub annulus_maxima: Vec<f64>,
    pub rows: Vec<EpsilonRow>,
    /// Small-space norm of the best `f1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1_small_norm: Option<NormValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1_annulus_sums: Option<Vec<f64>>,
}

/// Threshold estimate and constructive distance bound for one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistancePair {
    pub theorem: Theorem,
    pub function: String,
    pub s2_estimate: f64,
    pub s1_upper: f64,
    pub epsilon_star: f64,
    /// `s1_upper / ε*` when `ε* > 0`.
    pub ratio: Option<f64>,
    pub ambient_norm: NormValue,
    pub rejected: bool,
    pub best_epsilon: Option<f64>,
    pub level_set: IntervalSet,
    pub diagnostics: DistanceDiagnostics,
}

fn profile_refiner<'a>(
    f: &'a dyn ZonalSeries,
    spec: &'a ProfileSpec,
    opts: &'a NormOptions,
) -> Option<Box<dyn Fn(f64) -> Result<f64> + Sync + 'a>> {
    match spec.functional {
        Functional::Mean { q } => Some(Box::new(move |r: f64| {
            Ok(integral_mean(f, q, r, opts)? * (1.0 - r).powf(spec.weight) * r.powf(spec.radius_power))
        })),
        Functional::BallAverage { .. } => None,
    }
}

/// Norm of `f` in `params` together with its profile.
pub fn norm_with_profile(f: &dyn ZonalSeries, params: &SpaceParams, opts: &NormOptions) -> Result<(NormValue, RadialProfile)> {
    let spec = params.profile_spec(f.dim());
    let profile = RadialProfile::compute(f, &spec, opts)?;
    let refine = profile_refiner(f, &spec, opts);
    let v = norm_from_profile(&profile, params, refine.as_deref())?;
    Ok((v, profile))
}

/// `S(u) = M_1(Q_α(·, e), u)` through the bounded profile `(1-u)^{1+α} S(u)`.
struct KernelMeanModel {
    profile: RadialProfile,
    alpha: f64,
}

impl KernelMeanModel {
    fn new(n: usize, alpha: f64, opts: &NormOptions) -> Result<Self> {
        let q = TestFunctionSpec::q_kernel(n, alpha, 1.0)?;
        let profile = RadialProfile::compute(&q, &ProfileSpec::mean(1.0, 1.0 + alpha), opts)?;
        Ok(Self { profile, alpha })
    }

    fn eval(&self, u: f64) -> f64 {
        self.profile.value_at(u) * (1.0 - u).powf(-(1.0 + self.alpha))
    }
}

/// `sup_r (1-r)^α ∫_{I∖L̂} (1+ρ)^α ĝ(ρ) ρ^{n-1} S(rρ) dρ`, the kernel majorant of
/// the `A^∞_α` norm of `f2`.
fn t5_majorant(profile: &RadialProfile, complement: &IntervalSet, alpha: f64, n: usize, kernel: &KernelMeanModel) -> f64 {
    let grid = profile.grid();
    let nn = n as i32;
    grid.nodes()
        .par_iter()
        .zip(grid.gaps())
        .map(|(&r, &gap)| {
            let inner = radial_integral_on(
                complement,
                |rho, _| (1.0 + rho).powf(alpha) * profile.value_at(rho) * rho.powi(nn - 1) * kernel.eval(r * rho),
                0.0,
                grid,
            );
            gap.powf(alpha) * inner.value
        })
        .reduce(|| 0.0, f64::max)
}

/// `ψ(r) = (1-r)^α ∫_{L̂} (1-rρ)^{-(1+α)} dρ` on the grid: its supremum and log-weighted `L^p` norm.
fn psi_summary(grid: &RadialGrid, set: &IntervalSet, alpha: f64, p: f64) -> (f64, NormValue) {
    let psi: Vec<f64> = grid.nodes().iter().zip(grid.gaps()).map(|(&r, &g)| g.powf(alpha) * kernel_interval_integral(set, r, alpha)).collect();
    let sup = psi.iter().fold(0.0f64, |a, &b| a.max(b));
    let vals: Vec<f64> = psi.iter().map(|v| v.powf(p)).collect();
    let ri = radial_integral_values(&vals, -1.0, grid);
    let norm = if ri.divergent { NormValue::Divergent } else { NormValue::Finite(ri.value.powf(1.0 / p)) };
    (sup, norm)
}

fn default_epsilons(epsilon_star: f64, top: f64) -> Vec<f64> {
    if epsilon_star > 0.0 {
        EPSILON_FACTORS.iter().map(|c| c * epsilon_star).collect()
    } else {
        (1..=16).map(|j| top * 10f64.powf(-0.5 * j as f64)).collect()
    }
}

/// Estimates `ε*` from the ambient profile of `f` and sweeps `ε` over a grid,
/// splitting `f = f1 + f2` on each level set and recording the ambient norm
/// of `f2` as an upper bound for the distance.
pub fn distance_report(
    f: &TestFunctionSpec,
    theorem: Theorem,
    params: &TheoremParams,
    opts: &DistanceOptions,
) -> Result<DistancePair> {
    f.validate()?;
    let setup = DistanceSetup::new(theorem, params)?;
    let nopts = &opts.norm;
    let (ambient_norm, profile) = norm_with_profile(f, &setup.ambient, nopts)?;
    let annulus_maxima: Vec<f64> = (0..profile.grid().levels()).map(|j| profile.annulus_max(j)).collect();
    let mut diagnostics = DistanceDiagnostics {
        profile_limit: profile.tail().limit,
        resolved_levels: profile.resolved_levels(),
        annulus_maxima,
        rows: Vec::new(),
        f1_small_norm: None,
        f1_annulus_sums: None,
    };
    if !ambient_norm.is_finite() {
        return Ok(DistancePair {
            theorem,
            function: f.label(),
            s2_estimate: f64::INFINITY,
            s1_upper: f64::INFINITY,
            epsilon_star: f64::INFINITY,
            ratio: None,
            ambient_norm,
            rejected: true,
            best_epsilon: None,
            level_set: IntervalSet::full(),
            diagnostics,
        });
    }
    let rule = TailRule::new(profile.grid().tail());
    let epsilon_star = s2_threshold(&profile, &rule)?;
    let epsilons = match &opts.epsilon_grid {
        Some(g) => g.clone(),
        None => default_epsilons(epsilon_star, profile.max()),
    };
    let n = f.n;
    let alpha = params.alpha;
    let kernel = match theorem {
        Theorem::T5 | Theorem::T6 => Some(KernelMeanModel::new(n, alpha, nopts)?),
        _ => None,
    };
    let rows: Vec<EpsilonRow> = epsilons
        .par_iter()
        .map(|&eps| {
            let set = level_set(&profile, eps)?;
            let mut row = EpsilonRow {
                epsilon: eps,
                level_set: set.clone(),
                head_degree: None,
                s1_upper: None,
                skipped: None,
                decision: None,
                majorant: None,
                phi_majorant: None,
                psi_sup: None,
                psi_norm: None,
            };
            row.decision = match theorem {
                Theorem::T4 => Some(finiteness_diagnostic_t4(&profile, alpha, setup.split_order, params.p, eps)?.decision),
                Theorem::T6 => Some(finiteness_diagnostic_t6(&profile, alpha, params.p, eps)?.decision),
                _ => None,
            };
            if set.touches_boundary() {
                row.skipped = Some("level set reaches the boundary".into());
                return Ok(row);
            }
            let head = match f.finite_degree() {
                Some(d) if d <= opts.head_cap => Some(d),
                _ => split_head_degree(n, setup.split_order, &set, opts.head_cap)?,
            };
            let Some(k1) = head else {
                row.skipped = Some(format!("split head exceeds degree {}", opts.head_cap));
                return Ok(row);
            };
            row.head_degree = Some(k1);
            let w = split_weights(n, setup.split_order, &set, k1)?;
            let f2 = Modulated { base: f, factors: w.iter().map(|w| 1.0 - w).collect(), tail_factor: 1.0 };
            let (norm2, _) = norm_with_profile(&f2, &setup.ambient, nopts)?;
            row.s1_upper = norm2.value();
            if let Some(kernel) = &kernel {
                let complement = set.complement();
                row.majorant = Some(t5_majorant(&profile, &complement, alpha, n, kernel));
                row.phi_majorant = Some(eps * psi_summary(profile.grid(), &complement, alpha, params.p).0);
                let (sup, norm) = psi_summary(profile.grid(), &set, alpha, params.p);
                row.psi_sup = Some(sup);
                row.psi_norm = Some(norm);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = rows
        .iter()
        .filter_map(|r| r.s1_upper.map(|s| (s, r)))
        .fold(None::<(f64, &EpsilonRow)>, |acc, (s, r)| match acc {
            Some((b, _)) if b <= s => acc,
            _ => Some((s, r)),
        });
    let (s1_upper, best_epsilon, level_set_best) = match best {
        Some((s, r)) => (s, Some(r.epsilon), r.level_set.clone()),
        None => (f64::INFINITY, None, IntervalSet::full()),
    };
    if let Some(eps) = best_epsilon {
        let set = &level_set_best;
        let k1 = rows.iter().find(|r| r.epsilon == eps).and_then(|r| r.head_degree).unwrap_or(0);
        let w = split_weights(n, setup.split_order, set, k1)?;
        let f1 = Modulated { base: f, factors: w, tail_factor: 0.0 };
        let (small, prof1) = norm_with_profile(&f1, &setup.small, nopts)?;
        diagnostics.f1_small_norm = Some(small);
        if !setup.small.is_sup() {
            diagnostics.f1_annulus_sums = Some(prof1.log_integral(setup.small.p).annulus_sums);
        }
    }
    diagnostics.rows = rows;
    let ratio = (epsilon_star > 0.0 && s1_upper.is_finite()).then(|| s1_upper / epsilon_star);
    Ok(DistancePair {
        theorem,
        function: f.label(),
        s2_estimate: epsilon_star,
        s1_upper,
        epsilon_star,
        ratio,
        ambient_norm,
        rejected: false,
        best_epsilon,
        level_set: level_set_best,
        diagnostics,
    })
}
