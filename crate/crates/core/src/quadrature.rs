//! Quadrature on the sphere (reduced to the cosine to a pole), on the radius
//! `[0, 1)` with dyadic annuli clustered at the boundary, and on the ball.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::interval::IntervalSet;
use crate::special_fn::log_beta;

pub use crate::norms::ball_integral;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * pm - pm1) / (z * z - 1.0);
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m == 1 {
        return (vec![0.0], vec![2.0]);
    }
    (x, w)
}

/// Gauss-Jacobi rule for the weight `(1-x)^a (1+x)^b` on `[-1, 1]`
/// (Golub-Welsch on the Jacobi matrix).
pub fn gauss_jacobi(m: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if m == 0 || !(a > -1.0) || !(b > -1.0) {
        return domain(format!("gauss_jacobi needs m >= 1, a, b > -1 (m={m}, a={a}, b={b})"));
    }
    let ab = a + b;
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let kf = k as f64;
        jac[(k, k)] = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k + 1 < m {
            let j = (k + 1) as f64;
            let num = j * (j + a) * (j + b) * (j + ab);
            let den = (2.0 * j + ab - 1.0) * (2.0 * j + ab + 1.0);
            let off = 2.0 / (2.0 * j + ab) * (num / den).sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + log_beta(a + 1.0, b + 1.0)?).exp();
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(pairs.into_iter().unzip())
}

/// Normalizer making `c_n sin^{n-2}θ dθ` a probability measure on `[0, π]`.
pub fn sphere_normalizer(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    (libm::lgamma(h) - libm::lgamma(h - 0.5)).exp() / std::f64::consts::PI.sqrt()
}

/// A rule for `∫_S g(<x', y0>) dσ(x')` written as `Σ w_i g(s_i)`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Rule exact for zonal polynomials of degree `<= degree`. Midpoint rule
    /// in the angle for `n = 2`, Gauss-Jacobi in the cosine otherwise.
    pub fn exact(n: usize, degree: usize) -> Result<Self> {
        if n < 2 {
            return domain(format!("dimension must be at least 2, got {n}"));
        }
        if degree < 1 {
            return domain("sphere rule degree must be at least 1");
        }
        let m = degree / 2 + 1;
        if n == 2 {
            let nodes = (0..m)
                .map(|i| ((i as f64 + 0.5) * std::f64::consts::PI / m as f64).cos())
                .collect();
            return Ok(Self { n, nodes, weights: vec![1.0 / m as f64; m] });
        }
        let e = (n as f64 - 3.0) / 2.0;
        let (nodes, w) = gauss_jacobi(m, e, e)?;
        let total: f64 = w.iter().sum();
        let weights = w.into_iter().map(|x| x / total).collect();
        Ok(Self { n, nodes, weights })
    }

    /// Composite Gauss-Legendre rule in the angle, graded geometrically toward
    /// the pole down to angular width `scale`. Suited to integrands peaked at
    /// `s = 1` with width of order `scale`.
    pub fn graded(n: usize, scale: f64, per_panel: usize) -> Self {
        Self::graded_with(n, scale, per_panel, 8)
    }

    /// As [`SphereRule::graded`] with `uniform` equal panels on `[π/8, π]`.
    pub fn graded_with(n: usize, scale: f64, per_panel: usize, uniform: usize) -> Self {
        use std::f64::consts::PI;
        let scale = scale.clamp(1e-15, PI / 8.0);
        let mut edges = vec![0.0];
        let mut e = scale;
        while e < PI / 8.0 {
            edges.push(e);
            e *= 2.0;
        }
        let uniform = uniform.max(1);
        let start = PI / 8.0;
        for i in 0..=uniform {
            edges.push(start + (PI - start) * i as f64 / uniform as f64);
        }
        let (gx, gw) = gauss_legendre(per_panel);
        let cn = sphere_normalizer(n);
        let mut nodes = Vec::with_capacity(edges.len() * per_panel);
        let mut weights = Vec::with_capacity(edges.len() * per_panel);
        for win in edges.windows(2) {
            let (a, b) = (win[0], win[1]);
            let half = 0.5 * (b - a);
            for (x, w) in gx.iter().zip(&gw) {
                let th = a + half * (x + 1.0);
                nodes.push(th.cos());
                weights.push(cn * half * w * th.sin().powi(n as i32 - 2));
            }
        }
        Self { n, nodes, weights }
    }

    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&s, &w)| w * g(s)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `∫_S g(<x', y0>) dσ(x')` with a rule exact through `degree`.
pub fn sphere_integral(g: impl Fn(f64) -> f64, n: usize, degree: usize) -> Result<f64> {
    Ok(SphereRule::exact(n, degree)?.integrate(g))
}

/// Grid parameters shared by the radial computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Number of dyadic annuli `[1-2^{-j}, 1-2^{-j-1})`.
    pub levels: usize,
    /// Gauss points per annulus.
    pub per_annulus: usize,
    /// Annuli in the boundary tail window used by finiteness rules.
    pub tail: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { levels: 40, per_annulus: 8, tail: 5 }
    }
}

/// Composite Gauss grid on `[0, 1)` with one panel per dyadic annulus.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    params: GridParams,
    ref_nodes: Vec<f64>,
    ref_weights: Vec<f64>,
    nodes: Vec<f64>,
    gaps: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(params: GridParams) -> Result<Self> {
        let GridParams { levels, per_annulus, tail } = params;
        if levels < 2 || per_annulus < 1 || tail < 2 || tail > levels {
            return domain(format!("invalid radial grid {params:?}"));
        }
        let (gx, gw) = gauss_legendre(per_annulus);
        let mut nodes = Vec::with_capacity(levels * per_annulus);
        let mut gaps = Vec::with_capacity(levels * per_annulus);
        let mut weights = Vec::with_capacity(levels * per_annulus);
        for j in 0..levels {
            let g = 0.5f64.powi(j as i32);
            for (x, w) in gx.iter().zip(&gw) {
                // gap = 1 - r runs from 2^{-j} down to 2^{-j-1}
                let gap = g * (3.0 - x) / 4.0;
                gaps.push(gap);
                nodes.push(1.0 - gap);
                weights.push(w * g / 4.0);
            }
        }
        Ok(Self { params, ref_nodes: gx, ref_weights: gw, nodes, gaps, weights })
    }

    pub fn with_levels(levels: usize, per_annulus: usize) -> Result<Self> {
        Self::new(GridParams { levels, per_annulus, ..GridParams::default() })
    }

    pub fn params(&self) -> GridParams {
        self.params
    }

    pub fn levels(&self) -> usize {
        self.params.levels
    }

    pub fn per_annulus(&self) -> usize {
        self.params.per_annulus
    }

    pub fn tail(&self) -> usize {
        self.params.tail
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `1 - r` at every node, computed without cancellation.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn reference_rule(&self) -> (&[f64], &[f64]) {
        (&self.ref_nodes, &self.ref_weights)
    }

    /// Bounds of annulus `j`.
    pub fn annulus(&self, j: usize) -> (f64, f64) {
        (1.0 - 0.5f64.powi(j as i32), 1.0 - 0.5f64.powi(j as i32 + 1))
    }

    pub fn annulus_of_node(&self, i: usize) -> usize {
        i / self.params.per_annulus
    }

    /// Start of the unresolved boundary layer `1 - 2^{-J}`.
    pub fn outer_edge(&self) -> f64 {
        1.0 - 0.5f64.powi(self.params.levels as i32)
    }

    /// The same grid with every annulus carrying twice as many points.
    pub fn refined(&self) -> Self {
        let mut p = self.params;
        p.per_annulus *= 2;
        Self::new(p).expect("refining a valid grid")
    }
}

/// Result of a radial integral with its convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialIntegral {
    pub value: f64,
    /// Geometric extrapolation of the contribution beyond the last annulus.
    pub tail: f64,
    pub annulus_sums: Vec<f64>,
    pub divergent: bool,
}

/// Ratio at or above which a non-vanishing annulus sequence is declared divergent.
pub const DIVERGENCE_RATIO: f64 = 0.95;

impl RadialIntegral {
    pub fn from_annulus_sums(annulus_sums: Vec<f64>, tail_window: usize) -> Self {
        let jn = annulus_sums.len();
        let last = annulus_sums[jn - 1].abs();
        let first = annulus_sums[jn - tail_window].abs();
        let fitted = if last == 0.0 {
            0.0
        } else if first == 0.0 {
            f64::INFINITY
        } else {
            (last / first).powf(1.0 / (tail_window as f64 - 1.0))
        };
        let divergent = last > 0.0 && fitted >= DIVERGENCE_RATIO;
        let tail = if divergent || last == 0.0 {
            0.0
        } else {
            let prev = annulus_sums[jn - 2].abs();
            let q = if prev > 0.0 && last < prev { last / prev } else { fitted };
            annulus_sums[jn - 1] * q / (1.0 - q)
        };
        let sum: f64 = annulus_sums.iter().sum();
        Self { value: if divergent { f64::INFINITY } else { sum + tail }, tail, annulus_sums, divergent }
    }

    /// Largest ratio between consecutive annulus sums over the tail window.
    pub fn tail_ratio(&self, tail_window: usize) -> f64 {
        let s = &self.annulus_sums;
        let jn = s.len();
        let (a, b) = (s[jn - tail_window].abs(), s[jn - 1].abs());
        if b == 0.0 {
            0.0
        } else if a == 0.0 {
            f64::INFINITY
        } else {
            (b / a).powf(1.0 / (tail_window as f64 - 1.0))
        }
    }
}

/// `∫_0^1 h(r) (1-r)^γ dr` from values of `h` at the grid nodes.
pub fn radial_integral_values(values: &[f64], gamma: f64, grid: &RadialGrid) -> RadialIntegral {
    assert_eq!(values.len(), grid.nodes().len());
    let m = grid.per_annulus();
    let sums = (0..grid.levels())
        .map(|j| {
            (j * m..(j + 1) * m)
                .map(|i| values[i] * grid.gaps()[i].powf(gamma) * grid.weights()[i])
                .sum()
        })
        .collect();
    RadialIntegral::from_annulus_sums(sums, grid.tail())
}

/// `∫_0^1 h(r) (1-r)^γ dr` by composite Gauss over the dyadic annuli.
/// `h` receives `(r, 1 - r)`.
pub fn radial_integral(h: impl Fn(f64, f64) -> f64, gamma: f64, grid: &RadialGrid) -> RadialIntegral {
    let values: Vec<f64> =
        grid.nodes().iter().zip(grid.gaps()).map(|(&r, &g)| h(r, g)).collect();
    radial_integral_values(&values, gamma, grid)
}

/// `∫_L h(r) (1-r)^γ dr` over an interval set, splitting pieces at annulus
/// edges. A set reaching `1` gets an analytic tail past the last annulus
/// (finite only for `γ > -1`). `h` receives `(r, 1 - r)`.
pub fn radial_integral_on(
    set: &IntervalSet,
    h: impl Fn(f64, f64) -> f64,
    gamma: f64,
    grid: &RadialGrid,
) -> RadialIntegral {
    let (gx, gw) = grid.reference_rule();
    let mut sums = vec![0.0; grid.levels()];
    for &(a, b) in set.intervals() {
        for (j, sum) in sums.iter_mut().enumerate() {
            let (lo, hi) = grid.annulus(j);
            let (pa, pb) = (a.max(lo), b.min(hi));
            if pa >= pb {
                continue;
            }
            let gap_a = if pa == lo { 0.5f64.powi(j as i32) } else { 1.0 - pa };
            let gap_b = if pb == hi { 0.5f64.powi(j as i32 + 1) } else { 1.0 - pb };
            let half = 0.5 * (gap_a - gap_b);
            for (x, w) in gx.iter().zip(gw) {
                let gap = gap_a - half * (x + 1.0);
                *sum += w * half * h(1.0 - gap, gap) * gap.powf(gamma);
            }
        }
    }
    let mut out = RadialIntegral::from_annulus_sums(sums.clone(), grid.tail());
    let edge = grid.outer_edge();
    if set.touches_boundary() {
        let gap = 1.0 - edge;
        let hv = h(edge, gap);
        if gamma > -1.0 {
            out.tail = hv * gap.powf(gamma + 1.0) / (gamma + 1.0);
            out.divergent = false;
            out.value = sums.iter().sum::<f64>() + out.tail;
        } else if hv != 0.0 {
            out.divergent = true;
            out.value = f64::INFINITY;
        }
    } else {
        // the set ends inside the grid; nothing beyond it contributes
        out.tail = 0.0;
        out.divergent = false;
        out.value = sums.iter().sum();
    }
    out
}
