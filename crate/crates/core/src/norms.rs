//! Integral means, radial profiles and the norms built from them.
//!
//! Every norm in scope has the form `sup_r g(r)` or `(∫ g(r)^p (1-r)^{-1} dr)^{1/p}`
//! for a nonnegative profile `g(r) = (1-r)^a r^b F(r)`, where `F` is an
//! integral mean `M_q(f, r)` or a ball average `A_α(f, r)`.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, HarmexError, Result};
use crate::harmonic_model::{EvalOptions, RadialSlice, ZonalSeries};
use crate::interval::IntervalSet;
use crate::quadrature::{
    gauss_legendre, radial_integral_on, radial_integral_values, GridParams, RadialGrid,
    RadialIntegral, SphereRule,
};

/// Numerical controls shared by all profile and norm computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    pub grid: GridParams,
    pub eval: EvalOptions,
    /// Deepest annulus sampled directly for infinite series.
    pub max_level: usize,
    /// Gauss points per angular panel.
    pub per_panel: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self { grid: GridParams::default(), eval: EvalOptions::default(), max_level: 8, per_panel: 12 }
    }
}

impl NormOptions {
    pub fn radial_grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grid)
    }

    /// Twice as many points per annulus.
    pub fn refined(&self) -> Self {
        let mut o = *self;
        o.grid.per_annulus *= 2;
        o.per_panel += o.per_panel / 2;
        o
    }

    /// Number of annuli sampled directly for `f`.
    pub fn resolved_levels(&self, f: &dyn ZonalSeries) -> usize {
        let levels = self.grid.levels;
        match f.finite_degree() {
            Some(k) if k <= FULL_RESOLUTION_DEGREE => levels,
            Some(k) => {
                let deg_levels = (usize::BITS - (k + 1).leading_zeros()) as usize + 4;
                levels.min(self.max_level.max(deg_levels))
            }
            None => levels.min(self.max_level),
        }
    }
}

/// Finite expansions up to this degree are sampled on every annulus.
pub const FULL_RESOLUTION_DEGREE: usize = 1024;

const GOLDEN_STEPS: usize = 40;

fn sphere_rule_for(n: usize, r: f64, degree: usize, per_panel: usize) -> SphereRule {
    let scale = (1.0 - r).max(1.0 / (degree as f64 + 1.0));
    let uniform = if degree <= 512 { (degree / 2).max(8) } else { 8 };
    SphereRule::graded_with(n, scale, per_panel, uniform)
}

fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..GOLDEN_STEPS {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    if gc >= gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// `M_p` of one radial slice.
pub fn slice_mean(slice: &RadialSlice, p: f64, per_panel: usize) -> f64 {
    let rule = sphere_rule_for(slice.n, slice.r, slice.degree(), per_panel);
    if p.is_infinite() {
        let vals: Vec<f64> = rule.nodes.iter().map(|&s| slice.value(s).abs()).collect();
        let (mut best, mut idx) = (slice.value(1.0).abs(), None);
        for (i, &v) in vals.iter().enumerate() {
            if v > best {
                best = v;
                idx = Some(i);
            }
        }
        best = best.max(slice.value(-1.0).abs());
        if let Some(i) = idx {
            let th = |j: usize| rule.nodes[j].clamp(-1.0, 1.0).acos();
            let lo = if i == 0 { 0.0 } else { th(i - 1) };
            let hi = if i + 1 == vals.len() { std::f64::consts::PI } else { th(i + 1) };
            let (_, v) = golden_max(|t| slice.value(t.cos()).abs(), lo.min(hi), lo.max(hi));
            best = best.max(v);
        }
        return best;
    }
    let m = rule.integrate(|s| slice.value(s).abs().powf(p));
    m.powf(1.0 / p)
}

/// `M_p(f, r) = (∫_S |f(r x')|^p dσ)^{1/p}`, with `p = ∞` the maximum over the sphere.
pub fn integral_mean(f: &dyn ZonalSeries, p: f64, r: f64, opts: &NormOptions) -> Result<f64> {
    if !(p > 0.0) {
        return domain(format!("integral mean exponent must be positive, got {p}"));
    }
    let slice = RadialSlice::new(f, r, &opts.eval)?;
    Ok(slice_mean(&slice, p, opts.per_panel))
}

/// `∫_{|w| <= r_max} |f(w)|^p (1-|w|)^α dw` with `dw = r^{n-1} dr dσ`.
pub fn ball_integral(
    f: &dyn ZonalSeries,
    p: f64,
    alpha: f64,
    r_max: f64,
    opts: &NormOptions,
) -> Result<f64> {
    if !(alpha > -1.0) {
        return domain(format!("ball integral weight needs alpha > -1, got {alpha}"));
    }
    if !(0.0..1.0).contains(&r_max) {
        return domain(format!("r_max must lie in [0, 1), got {r_max}"));
    }
    if !(p > 0.0 && p.is_finite()) {
        return domain(format!("ball integral exponent must be positive and finite, got {p}"));
    }
    let grid = opts.radial_grid()?;
    let set = IntervalSet::interval(0.0, r_max)?;
    let n = f.dim() as i32;
    let err = std::sync::Mutex::new(None);
    let out = radial_integral_on(
        &set,
        |r, _| match integral_mean(f, p, r, opts) {
            Ok(m) => m.powf(p) * r.powi(n - 1),
            Err(e) => {
                err.lock().unwrap().get_or_insert(e);
                0.0
            }
        },
        alpha,
        &grid,
    );
    match err.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(out.value),
    }
}

/// Exponent that may be `+∞`; serialized as a number or the string `"inf"`.
pub mod inf_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

fn default_q() -> f64 {
    1.0
}

fn default_p() -> f64 {
    1.0
}

/// Families of spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceFamily {
    #[serde(rename = "A_p_alpha")]
    APAlpha,
    #[serde(rename = "A_inf_alpha")]
    AInfAlpha,
    #[serde(rename = "B_pq")]
    BPQ,
    #[serde(rename = "B_inf_q")]
    BInfQ,
    #[serde(rename = "B_p_inf")]
    BPInf,
    #[serde(rename = "M_beta_alpha")]
    MBetaAlpha,
    #[serde(rename = "M_p_beta_alpha")]
    MPBetaAlpha,
}

impl SpaceFamily {
    pub fn tag(self) -> &'static str {
        match self {
            Self::APAlpha => "A_p_alpha",
            Self::AInfAlpha => "A_inf_alpha",
            Self::BPQ => "B_pq",
            Self::BInfQ => "B_inf_q",
            Self::BPInf => "B_p_inf",
            Self::MBetaAlpha => "M_beta_alpha",
            Self::MPBetaAlpha => "M_p_beta_alpha",
        }
    }
}

/// A space selected from a family together with its exponents and weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub family: SpaceFamily,
    #[serde(with = "inf_f64", default = "default_p")]
    pub p: f64,
    #[serde(with = "inf_f64", default = "default_q")]
    pub q: f64,
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl SpaceParams {
    pub fn new(family: SpaceFamily, p: f64, q: f64, alpha: f64, beta: f64) -> Result<Self> {
        let s = Self { family, p, q, alpha, beta, t: None };
        s.validate()?;
        Ok(s)
    }

    pub fn b_pq(p: f64, q: f64, alpha: f64) -> Result<Self> {
        Self::new(SpaceFamily::BPQ, p, q, alpha, 0.0)
    }

    pub fn b_inf_q(q: f64, alpha: f64) -> Result<Self> {
        Self::new(SpaceFamily::BInfQ, f64::INFINITY, q, alpha, 0.0)
    }

    pub fn b_p_inf(p: f64, alpha: f64) -> Result<Self> {
        Self::new(SpaceFamily::BPInf, p, f64::INFINITY, alpha, 0.0)
    }

    pub fn a_p(p: f64, alpha: f64) -> Result<Self> {
        Self::new(SpaceFamily::APAlpha, p, 1.0, alpha, 0.0)
    }

    pub fn a_inf(alpha: f64) -> Result<Self> {
        Self::new(SpaceFamily::AInfAlpha, f64::INFINITY, f64::INFINITY, alpha, 0.0)
    }

    pub fn m_beta(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(SpaceFamily::MBetaAlpha, f64::INFINITY, 1.0, alpha, beta)
    }

    pub fn m_p_beta(p: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(SpaceFamily::MPBetaAlpha, p, 1.0, alpha, beta)
    }

    pub fn validate(&self) -> Result<()> {
        let fam = self.family.tag();
        let bad = |what: &str, v: f64| -> Result<()> {
            Err(HarmexError::Domain(format!("{fam}: {what} (got {v})")))
        };
        if !(self.p > 0.0) || self.p.is_nan() {
            return bad("p must lie in (0, inf]", self.p);
        }
        if !self.alpha.is_finite() {
            return bad("alpha must be finite", self.alpha);
        }
        match self.family {
            SpaceFamily::BPQ | SpaceFamily::BInfQ | SpaceFamily::BPInf => {
                if !(self.q >= 1.0) {
                    return bad("q must lie in [1, inf]", self.q);
                }
                if !(self.alpha > 0.0) {
                    return bad("alpha must be > 0", self.alpha);
                }
            }
            SpaceFamily::APAlpha | SpaceFamily::AInfAlpha => {
                if !(self.alpha >= 0.0) {
                    return bad("alpha must be >= 0", self.alpha);
                }
            }
            SpaceFamily::MBetaAlpha | SpaceFamily::MPBetaAlpha => {
                if !(self.alpha > -1.0) {
                    return bad("alpha must be > -1", self.alpha);
                }
                if !(self.beta > 0.0 && self.beta.is_finite()) {
                    return bad("beta must be > 0", self.beta);
                }
            }
        }
        if matches!(self.family, SpaceFamily::BPQ | SpaceFamily::BPInf | SpaceFamily::MPBetaAlpha)
            && self.p.is_infinite()
        {
            return bad("p must be finite for an integral-type family", self.p);
        }
        if let Some(t) = self.t {
            if !(t > self.alpha - 1.0) {
                return bad("t must be > alpha - 1", t);
            }
        }
        Ok(())
    }

    /// Profile whose supremum or log-weighted `L^p` norm gives this space's norm.
    pub fn profile_spec(&self, n: usize) -> ProfileSpec {
        let (a, q) = (self.alpha, self.q);
        match self.family {
            SpaceFamily::APAlpha if self.p.is_finite() => ProfileSpec {
                functional: Functional::Mean { q: self.p },
                weight: (a + 1.0) / self.p,
                radius_power: (n as f64 - 1.0) / self.p,
            },
            SpaceFamily::APAlpha | SpaceFamily::AInfAlpha => {
                ProfileSpec::mean(f64::INFINITY, a)
            }
            SpaceFamily::BPQ | SpaceFamily::BInfQ => ProfileSpec::mean(q, a),
            SpaceFamily::BPInf => ProfileSpec::mean(f64::INFINITY, a),
            SpaceFamily::MBetaAlpha | SpaceFamily::MPBetaAlpha => ProfileSpec {
                functional: Functional::BallAverage { alpha: a },
                weight: self.beta,
                radius_power: 0.0,
            },
        }
    }

    /// True when the norm is a supremum over `r`.
    pub fn is_sup(&self) -> bool {
        matches!(self.family, SpaceFamily::AInfAlpha | SpaceFamily::BInfQ | SpaceFamily::MBetaAlpha)
            || (self.family == SpaceFamily::APAlpha && self.p.is_infinite())
    }
}

/// Radial functional underlying a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "snake_case")]
pub enum Functional {
    /// `M_q(f, r)`.
    Mean {
        #[serde(with = "inf_f64")]
        q: f64,
    },
    /// `A_α(f, r)`.
    BallAverage { alpha: f64 },
}

/// `g(r) = (1-r)^weight r^radius_power F(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    #[serde(flatten)]
    pub functional: Functional,
    pub weight: f64,
    pub radius_power: f64,
}

impl ProfileSpec {
    pub fn mean(q: f64, weight: f64) -> Self {
        Self { functional: Functional::Mean { q }, weight, radius_power: 0.0 }
    }

    pub fn ball_average(alpha: f64, weight: f64) -> Self {
        Self { functional: Functional::BallAverage { alpha }, weight, radius_power: 0.0 }
    }

    fn factor(&self, r: f64, gap: f64) -> f64 {
        let w = if self.weight == 0.0 { 1.0 } else { gap.powf(self.weight) };
        let rp = if self.radius_power == 0.0 { 1.0 } else { r.powf(self.radius_power) };
        w * rp
    }
}

/// Limit behaviour of a profile past the deepest sampled annulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileTail {
    /// Estimated `lim_{r→1} g(r)`.
    pub limit: f64,
    /// Geometric rate of approach per annulus.
    pub ratio: f64,
    /// The profile grows without bound.
    pub unbounded: bool,
}

/// Relative floor under which a profile limit counts as zero.
pub const PROFILE_FLOOR: f64 = 1e-12;

/// Nonnegative profile values on a radial grid. Annuli beyond the sampled
/// ones are filled from a geometric (Aitken) model of the approach to the limit.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    grid: RadialGrid,
    origin: f64,
    values: Vec<f64>,
    resolved_levels: usize,
    tail: ProfileTail,
}

impl RadialProfile {
    /// Builds a profile from the value at `r = 0` and values at the nodes of the
    /// first `resolved.len() / M` annuli.
    pub fn from_resolved(grid: RadialGrid, origin: f64, resolved: Vec<f64>) -> Result<Self> {
        let m = grid.per_annulus();
        if resolved.is_empty() || resolved.len() % m != 0 || resolved.len() > grid.nodes().len() {
            return domain("profile values must fill whole annuli of the grid");
        }
        if resolved.iter().chain([&origin]).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return domain("profile values must be finite and nonnegative");
        }
        let jr = resolved.len() / m;
        if jr < grid.tail().max(3) {
            return Err(HarmexError::Resolution(format!(
                "profile resolves {jr} annuli, fewer than the tail window {}",
                grid.tail().max(3)
            )));
        }
        let scale = resolved.iter().fold(origin, |a, &b| a.max(b));
        let last = |j: usize| resolved[(j + 1) * m - 1];
        let (v0, v1, v2) = (last(jr - 3), last(jr - 2), last(jr - 1));
        let (d1, d2) = (v1 - v0, v2 - v1);
        let mut tail = ProfileTail { limit: v2, ratio: 0.0, unbounded: false };
        if d2.abs() > 1e-14 * scale && d1 != 0.0 {
            let q = d2 / d1;
            if (0.0..1.0).contains(&q) {
                tail = ProfileTail { limit: v2 + d2 * q / (1.0 - q), ratio: q, unbounded: false };
            } else if q >= 1.0 && d2 > 0.0 {
                tail = ProfileTail { limit: f64::INFINITY, ratio: q, unbounded: true };
            } else if q >= 1.0 {
                tail = ProfileTail { limit: 0.0, ratio: 0.5, unbounded: false };
            }
        }
        if !tail.unbounded {
            tail.limit = tail.limit.max(0.0);
            if tail.limit < PROFILE_FLOOR * scale {
                tail.limit = 0.0;
            }
        }
        let mut values = resolved;
        let base = (jr - 1) * m;
        for j in jr..grid.levels() {
            for i in 0..m {
                let v = values[base + i];
                let ext = if tail.unbounded {
                    v
                } else {
                    tail.limit + (v - tail.limit) * tail.ratio.powi((j + 1 - jr) as i32)
                };
                values.push(ext.max(0.0));
            }
        }
        Ok(Self { grid, origin, values, resolved_levels: jr, tail })
    }

    /// `g` sampled for `f` on the grid of `opts`.
    pub fn compute(f: &dyn ZonalSeries, spec: &ProfileSpec, opts: &NormOptions) -> Result<Self> {
        let grid = opts.radial_grid()?;
        let jr = opts.resolved_levels(f);
        let count = jr * grid.per_annulus();
        let (nodes, gaps) = (&grid.nodes()[..count], &grid.gaps()[..count]);
        let (origin, resolved) = match spec.functional {
            Functional::Mean { q } => {
                let vals = nodes
                    .par_iter()
                    .zip(gaps)
                    .map(|(&r, &g)| Ok(integral_mean(f, q, r, opts)? * spec.factor(r, g)))
                    .collect::<Result<Vec<f64>>>()?;
                (integral_mean(f, q, 0.0, opts)? * spec.factor(0.0, 1.0), vals)
            }
            Functional::BallAverage { alpha } => {
                let a = ball_average_values(f, alpha, &grid, jr, opts)?;
                let vals = a.iter().zip(nodes.iter().zip(gaps)).map(|(v, (&r, &g))| v * spec.factor(r, g)).collect();
                (0.0, vals)
            }
        };
        Self::from_resolved(grid, origin, resolved)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// Value at `r = 0`.
    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// Values at every grid node, sampled or extended.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn resolved_levels(&self) -> usize {
        self.resolved_levels
    }

    pub fn tail(&self) -> ProfileTail {
        self.tail
    }

    /// Largest value on the grid together with the tail limit.
    pub fn max(&self) -> f64 {
        self.values.iter().fold(self.origin.max(self.tail.limit), |a, &b| a.max(b))
    }

    /// Largest value in annulus `j`.
    pub fn annulus_max(&self, j: usize) -> f64 {
        let m = self.grid.per_annulus();
        self.values[j * m..(j + 1) * m].iter().fold(0.0, |a, &b| a.max(b))
    }

    /// `(r, 1 - r, g)` at `r = 0` and every grid node, in increasing `r`.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        std::iter::once((0.0, 1.0, self.origin)).chain(
            self.grid.nodes().iter().zip(self.grid.gaps()).zip(&self.values).map(|((&r, &g), &v)| (r, g, v)),
        )
    }

    /// Interpolated value, piecewise linear in `log(1-r)` (log-log when both
    /// neighbours are positive). Past the last node the tail limit is used.
    pub fn value_at(&self, r: f64) -> f64 {
        let gap = 1.0 - r;
        let gaps = self.grid.gaps();
        if gap <= *gaps.last().unwrap() {
            return if self.tail.unbounded { *self.values.last().unwrap() } else { self.tail.limit };
        }
        let idx = gaps.partition_point(|&g| g > gap);
        let (g0, v0) = if idx == 0 { (1.0, self.origin) } else { (gaps[idx - 1], self.values[idx - 1]) };
        let (g1, v1) = (gaps[idx], self.values[idx]);
        interpolate_log_gap(gap, (g0, v0), (g1, v1))
    }

    /// `sup_r g(r)`.
    pub fn sup(&self) -> NormValue {
        if self.tail.unbounded {
            NormValue::Divergent
        } else {
            NormValue::Finite(self.max())
        }
    }

    /// `∫_0^1 g(r)^p (1-r)^{-1} dr` with its annulus diagnostics.
    pub fn log_integral(&self, p: f64) -> RadialIntegral {
        let vals: Vec<f64> = self.values.iter().map(|v| v.powf(p)).collect();
        let mut out = radial_integral_values(&vals, -1.0, &self.grid);
        if self.tail.unbounded {
            out.divergent = true;
            out.value = f64::INFINITY;
        }
        out
    }

    /// `(∫_0^1 g^p (1-r)^{-1} dr)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> NormValue {
        let i = self.log_integral(p);
        if i.divergent {
            NormValue::Divergent
        } else {
            NormValue::Finite(i.value.max(0.0).powf(1.0 / p))
        }
    }
}

/// Interpolates between `(gap0, v0)` and `(gap1, v1)` linearly in `log gap`,
/// using `log v` when both values are positive.
pub fn interpolate_log_gap(gap: f64, (g0, v0): (f64, f64), (g1, v1): (f64, f64)) -> f64 {
    let (x0, x1, x) = (g0.ln(), g1.ln(), gap.ln());
    let t = if x1 == x0 { 0.0 } else { (x - x0) / (x1 - x0) };
    if v0 > 0.0 && v1 > 0.0 {
        (v0.ln() + t * (v1.ln() - v0.ln())).exp()
    } else {
        v0 + t * (v1 - v0)
    }
}

/// `∫_{-1}^{x_i} ℓ_m(x) dx` for the Lagrange basis on the Gauss nodes.
fn partial_lagrange_weights(x: &[f64]) -> Vec<Vec<f64>> {
    let m = x.len();
    let (gx, gw) = gauss_legendre(m.max(2));
    let basis = |k: usize, t: f64| -> f64 {
        (0..m).filter(|&j| j != k).map(|j| (t - x[j]) / (x[k] - x[j])).product()
    };
    x.iter()
        .map(|&xi| {
            let half = 0.5 * (xi + 1.0);
            (0..m)
                .map(|k| gx.iter().zip(&gw).map(|(&s, &w)| w * half * basis(k, -1.0 + half * (s + 1.0))).sum())
                .collect()
        })
        .collect()
}

/// `A_α(f, r)` at the nodes of the first `levels` annuli, by cumulative
/// integration of `M_1(f, ρ) ρ^{n-1} (1-ρ)^α`.
fn ball_average_values(
    f: &dyn ZonalSeries,
    alpha: f64,
    grid: &RadialGrid,
    levels: usize,
    opts: &NormOptions,
) -> Result<Vec<f64>> {
    if !(alpha > -1.0) {
        return domain(format!("ball average needs alpha > -1, got {alpha}"));
    }
    let m = grid.per_annulus();
    let count = levels * m;
    let n = f.dim() as i32;
    let h = grid.nodes()[..count]
        .par_iter()
        .zip(&grid.gaps()[..count])
        .map(|(&r, &g)| Ok(integral_mean(f, 1.0, r, opts)? * r.powi(n - 1) * g.powf(alpha)))
        .collect::<Result<Vec<f64>>>()?;
    let (x, w) = grid.reference_rule();
    let partial = partial_lagrange_weights(x);
    let mut out = Vec::with_capacity(count);
    let mut before = 0.0;
    for j in 0..levels {
        let scale = 0.5f64.powi(j as i32) / 4.0;
        let hj = &h[j * m..(j + 1) * m];
        for row in &partial {
            let part: f64 = row.iter().zip(hj).map(|(a, b)| a * b).sum();
            out.push((before + scale * part).max(0.0));
        }
        before += scale * w.iter().zip(hj).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(out)
}

/// `r ↦ A_α(f, r)` on the grid of `opts`.
pub fn ball_average_profile(f: &dyn ZonalSeries, alpha: f64, opts: &NormOptions) -> Result<RadialProfile> {
    RadialProfile::compute(f, &ProfileSpec::ball_average(alpha, 0.0), opts)
}

/// A norm value or a divergence tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormValue {
    Finite(f64),
    Divergent,
}

impl NormValue {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Divergent => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Self::Finite(_))
    }

    /// `+∞` for a divergent norm.
    pub fn as_f64(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

impl Serialize for NormValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(v) => s.serialize_f64(*v),
            Self::Divergent => s.serialize_str("divergent"),
        }
    }
}

impl<'de> Deserialize<'de> for NormValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Self::Finite(v)),
            Raw::Str(s) if s == "divergent" => Ok(Self::Divergent),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unexpected norm value {s:?}"))),
        }
    }
}

/// Grid description attached to norm records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub levels: usize,
    pub per_annulus: usize,
    pub tail: usize,
    pub resolved_levels: usize,
}

/// Serialized norm result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub family: SpaceFamily,
    pub params: SpaceParams,
    pub value: NormValue,
    pub grid_meta: GridMeta,
}

/// Norm of a sampled profile; `refine` evaluates `g` at any radius and is used
/// for a golden-section pass around the largest sampled value.
pub fn norm_from_profile(
    profile: &RadialProfile,
    params: &SpaceParams,
    refine: Option<&(dyn Fn(f64) -> Result<f64> + Sync)>,
) -> Result<NormValue> {
    if !params.is_sup() {
        return Ok(profile.lp_norm(params.p));
    }
    let NormValue::Finite(mut best) = profile.sup() else {
        return Ok(NormValue::Divergent);
    };
    if let Some(g) = refine {
        let nodes = profile.grid().nodes();
        let count = profile.resolved_levels() * profile.grid().per_annulus();
        let vals = &profile.values()[..count];
        let (i, &v) = vals.iter().enumerate().fold((0, &f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        if v >= best * (1.0 - 1e-3) && i + 1 < count {
            let lo = if i == 0 { 0.0 } else { nodes[i - 1] };
            let hi = nodes[i + 1];
            let err = std::sync::Mutex::new(None);
            let (_, gv) = golden_max(
                |r| {
                    g(r).unwrap_or_else(|e| {
                        err.lock().unwrap().get_or_insert(e);
                        0.0
                    })
                },
                lo,
                hi,
            );
            if let Some(e) = err.into_inner().unwrap() {
                return Err(e);
            }
            best = best.max(gv);
        }
    }
    Ok(NormValue::Finite(best))
}

/// The norm of `f` in the space selected by `params`.
pub fn space_norm(f: &dyn ZonalSeries, params: &SpaceParams, opts: &NormOptions) -> Result<NormValue> {
    Ok(space_norm_record(f, params, opts)?.value)
}

/// [`space_norm`] with its serialization metadata.
pub fn space_norm_record(f: &dyn ZonalSeries, params: &SpaceParams, opts: &NormOptions) -> Result<NormRecord> {
    params.validate()?;
    let spec = params.profile_spec(f.dim());
    let profile = RadialProfile::compute(f, &spec, opts)?;
    let value = match spec.functional {
        Functional::Mean { q } => {
            let g = |r: f64| -> Result<f64> { Ok(integral_mean(f, q, r, opts)? * spec.factor(r, 1.0 - r)) };
            norm_from_profile(&profile, params, Some(&g))?
        }
        Functional::BallAverage { .. } => norm_from_profile(&profile, params, None)?,
    };
    let grid = profile.grid();
    Ok(NormRecord {
        family: params.family,
        params: *params,
        value,
        grid_meta: GridMeta {
            levels: grid.levels(),
            per_annulus: grid.per_annulus(),
            tail: grid.tail(),
            resolved_levels: profile.resolved_levels(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic_model::{TestFunctionSpec, ZonalExpansion};
    use approx::assert_relative_eq;

    fn one(n: usize) -> ZonalExpansion {
        ZonalExpansion::constant(n, 1.0).unwrap()
    }

    #[test]
    fn means_of_constants() {
        let f = ZonalExpansion::constant(3, -2.5).unwrap();
        let opts = NormOptions::default();
        for &p in &[0.5, 1.0, 2.0, f64::INFINITY] {
            for &r in &[0.0, 0.4, 0.999] {
                assert_relative_eq!(integral_mean(&f, p, r, &opts).unwrap(), 2.5, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn poisson_means() {
        let opts = NormOptions::default();
        for n in [2usize, 3, 4] {
            let f = TestFunctionSpec::poisson(n);
            for &r in &[0.1, 0.5, 0.9, 0.99, 0.999] {
                let m1 = integral_mean(&f, 1.0, r, &opts).unwrap();
                assert_relative_eq!(m1, 1.0, epsilon = 1e-9);
                let minf = integral_mean(&f, f64::INFINITY, r, &opts).unwrap();
                let exact = (1.0 + r) / (1.0 - r).powi(n as i32 - 1);
                assert_relative_eq!(minf, exact, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn b_norms_of_one() {
        let opts = NormOptions::default();
        for &p in &[0.5, 1.0, 2.0] {
            for &q in &[1.0, 2.0] {
                for &a in &[0.5, 1.0, 2.0] {
                    let v = space_norm(&one(2), &SpaceParams::b_pq(p, q, a).unwrap(), &opts).unwrap();
                    assert_relative_eq!(v.as_f64(), (a * p).powf(-1.0 / p), max_relative = 1e-10);
                    let s = space_norm(&one(3), &SpaceParams::b_inf_q(q, a).unwrap(), &opts).unwrap();
                    assert_relative_eq!(s.as_f64(), 1.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn a_norms_of_one_and_kernels() {
        let opts = NormOptions::default();
        let v = space_norm(&one(3), &SpaceParams::a_p(1.0, 0.0).unwrap(), &opts).unwrap();
        assert_relative_eq!(v.as_f64(), 1.0 / 3.0, max_relative = 1e-10);
        // P_γ has sup (1-r)^{n+γ-2} M_∞ bounded; the Bergman kernel Q_{α-1} does not
        for n in [2usize, 3] {
            let gamma = 1.5;
            let alpha = n as f64 + gamma - 2.0;
            let f = TestFunctionSpec::p_alpha(n, gamma).unwrap();
            let params = SpaceParams::a_inf(alpha).unwrap();
            let v = space_norm(&f, &params, &opts).unwrap();
            assert!(v.as_f64().is_finite() && v.as_f64() > 0.0);
            let prof = RadialProfile::compute(&f, &params.profile_spec(n), &opts).unwrap();
            let last: Vec<f64> = (prof.resolved_levels() - 5..prof.resolved_levels()).map(|j| prof.annulus_max(j)).collect();
            let (lo, hi) = last.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
            assert!(lo > 0.0 && hi / lo < 1.5, "{last:?}");
            let q = TestFunctionSpec::q_kernel(n, 0.0, 1.0).unwrap();
            assert_eq!(space_norm(&q, &SpaceParams::a_inf(1.0).unwrap(), &opts).unwrap(), NormValue::Divergent);
        }
    }

    #[test]
    fn bergman_kernel_in_b_inf_one() {
        let opts = NormOptions::default();
        for &alpha in &[0.5, 1.0, 2.0] {
            let f = TestFunctionSpec::q_kernel(2, alpha - 1.0, 1.0).unwrap();
            let sup = space_norm(&f, &SpaceParams::b_inf_q(1.0, alpha).unwrap(), &opts).unwrap();
            assert!(sup.is_finite(), "alpha={alpha}");
            let int = space_norm(&f, &SpaceParams::b_pq(1.0, 1.0, alpha).unwrap(), &opts).unwrap();
            assert_eq!(int, NormValue::Divergent);
        }
    }

    #[test]
    fn ball_average_examples() {
        let opts = NormOptions::default();
        let zero = ZonalExpansion::constant(2, 0.0).unwrap();
        let prof = ball_average_profile(&zero, 0.5, &opts).unwrap();
        assert!(prof.values().iter().all(|&v| v == 0.0));
        let prof = ball_average_profile(&one(2), 0.0, &opts).unwrap();
        let count = prof.resolved_levels() * prof.grid().per_annulus();
        for (&r, &v) in prof.grid().nodes()[..count].iter().zip(prof.values()) {
            assert_relative_eq!(v, r * r / 2.0, epsilon = 1e-13);
        }
        let w = prof.values();
        assert!(w.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn ball_integral_mass_and_homogeneity() {
        let opts = NormOptions::default();
        for n in [2usize, 3, 4] {
            let v = ball_integral(&one(n), 1.0, 0.0, 1.0 - 1e-12, &opts).unwrap();
            assert_relative_eq!(v, 1.0 / n as f64, epsilon = 1e-10);
            let c = ZonalExpansion::constant(n, -3.0).unwrap();
            let w = ball_integral(&c, 2.0, 0.5, 0.8, &opts).unwrap();
            let u = ball_integral(&one(n), 2.0, 0.5, 0.8, &opts).unwrap();
            assert_relative_eq!(w, 9.0 * u, max_relative = 1e-12);
        }
        assert!(ball_integral(&one(2), 1.0, 0.0, 1.0, &opts).is_err());
    }

    #[test]
    fn single_mode_ball_integral() {
        // ∫ |a r^k Z_k|^2 (1-r)^α r^{n-1} dr dσ = a^2 α_k ∫ r^{2k+n-1} (1-r)^α dr
        let opts = NormOptions::default();
        let (k, a, alpha) = (3usize, 0.7, 1.5);
        let mut c = vec![0.0; k + 1];
        c[k] = a;
        let f = ZonalExpansion::with_default_pole(2, c).unwrap();
        let v = ball_integral(&f, 2.0, alpha, 0.9, &opts).unwrap();
        let g = |r: f64| a * a * 2.0 * r.powi(2 * k as i32 + 1) * (1.0 - r).powf(alpha);
        let m = 20000;
        let h = 0.9 / m as f64;
        let simpson: f64 = (0..m)
            .map(|i| {
                let x = i as f64 * h;
                h / 6.0 * (g(x) + 4.0 * g(x + h / 2.0) + g(x + h))
            })
            .sum();
        assert_relative_eq!(v, simpson, max_relative = 1e-9);
    }

    #[test]
    fn means_increase_with_radius() {
        let opts = NormOptions::default();
        let f = TestFunctionSpec::random(3, 17, 0.5, 12).unwrap();
        for &q in &[1.0, 2.0, f64::INFINITY] {
            let prof = RadialProfile::compute(&f, &ProfileSpec::mean(q, 0.0), &opts).unwrap();
            let vals: Vec<f64> = std::iter::once(prof.origin()).chain(prof.values().iter().copied()).collect();
            for w in vals.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].max(1.0), "q={q}: {} < {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn profile_limits() {
        let opts = NormOptions::default();
        let poly = TestFunctionSpec::polynomial(2, vec![1.0, 0.5, -0.25]).unwrap();
        let prof = RadialProfile::compute(&poly, &ProfileSpec::mean(1.0, 0.5), &opts).unwrap();
        assert_eq!(prof.tail().limit, 0.0);
        let pois = TestFunctionSpec::poisson(2);
        let prof = RadialProfile::compute(&pois, &ProfileSpec::mean(f64::INFINITY, 1.0), &opts).unwrap();
        assert_relative_eq!(prof.tail().limit, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn params_validation_and_json() {
        assert!(SpaceParams::b_pq(1.0, 1.0, -2.0).unwrap_err().to_string().contains("alpha must be > 0"));
        assert!(SpaceParams::b_pq(1.0, 0.5, 1.0).is_err());
        assert!(SpaceParams::m_beta(-1.0, 1.0).is_err());
        assert!(SpaceParams::m_beta(0.0, 0.0).is_err());
        assert!(SpaceParams::a_p(1.0, 0.0).is_ok());
        let p = SpaceParams::a_inf(1.0).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains(r#""p":"inf""#), "{s}");
        let back: SpaceParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let d = serde_json::to_string(&NormValue::Divergent).unwrap();
        assert_eq!(d, r#""divergent""#);
    }
}
