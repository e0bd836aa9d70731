//! Legendre polynomials on [-1, 1] and the shifted basis on [0, 1].
//!
//! Values come from the three-term recurrence
//! `(n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}` and derivatives from
//! `P'_{n+1} = (2n+1) P_n + P'_{n-1}` (applied once more for `P''`).
//! The shifted basis is `phi_n(x) = P_n(2x - 1)`; under orthonormal
//! normalization it is scaled by `sqrt(2n + 1)` so that it has unit norm
//! on [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROOT_MAX_ITER: usize = 100;
const ROOT_RESIDUAL_TARGET: f64 = 1e-14;
const ROOT_RESIDUAL_ACCEPT: f64 = 1e-13;
const ROOT_POLISH_ULPS: usize = 8;

/// Evaluates `P_n(x)`.
pub fn legendre(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    p
}

/// `[P_k(x), P'_k(x), P''_k(x)]` for every `k` in `0..out.len()`.
pub fn legendre_table(x: f64, out: &mut [[f64; 3]]) {
    let len = out.len();
    if len == 0 {
        return;
    }
    out[0] = [1.0, 0.0, 0.0];
    if len == 1 {
        return;
    }
    out[1] = [x, 1.0, 0.0];
    for k in 1..len - 1 {
        let kf = k as f64;
        let [p, dp, _] = out[k];
        let [pm, dpm, ddpm] = out[k - 1];
        out[k + 1] = [
            ((2.0 * kf + 1.0) * x * p - kf * pm) / (kf + 1.0),
            (2.0 * kf + 1.0) * p + dpm,
            (2.0 * kf + 1.0) * dp + ddpm,
        ];
    }
}

/// `[P_n(x), P'_n(x), P''_n(x)]`.
pub fn legendre_derivs(n: usize, x: f64) -> [f64; 3] {
    let mut table = vec![[0.0; 3]; n + 1];
    legendre_table(x, &mut table);
    table[n]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `phi_n(x) = P_n(2x - 1)`, so `phi_n(1) = 1`.
    Classical,
    /// `sqrt(2n + 1) P_n(2x - 1)`, unit norm on [0, 1].
    #[default]
    Orthonormal,
}

impl Normalization {
    pub fn scale(self, n: usize) -> f64 {
        match self {
            Normalization::Classical => 1.0,
            Normalization::Orthonormal => ((2 * n + 1) as f64).sqrt(),
        }
    }
}

/// Shifted Legendre basis `phi_0 .. phi_N` on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub order: usize,
    #[serde(default)]
    pub normalization: Normalization,
}

impl BasisSpec {
    pub fn orthonormal(order: usize) -> Self {
        Self {
            order,
            normalization: Normalization::Orthonormal,
        }
    }

    pub fn classical(order: usize) -> Self {
        Self {
            order,
            normalization: Normalization::Classical,
        }
    }

    /// Number of basis functions, `N + 1`.
    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, n: usize, x: f64, deriv: usize) -> Result<f64> {
        eval_shifted(n, x, deriv, self.normalization)
    }

    /// Values, first and second derivatives of every basis function at `x`.
    pub fn eval_all_derivs(&self, x: f64) -> Vec<[f64; 3]> {
        let mut table = vec![[0.0; 3]; self.len()];
        legendre_table(2.0 * x - 1.0, &mut table);
        for (n, row) in table.iter_mut().enumerate() {
            let s = self.normalization.scale(n);
            row[0] *= s;
            row[1] *= 2.0 * s;
            row[2] *= 4.0 * s;
        }
        table
    }

    /// `d^deriv phi_n / dx^deriv` at `x` for every `n`.
    pub fn eval_all(&self, x: f64, deriv: usize) -> Result<Vec<f64>> {
        if deriv > 2 {
            return Err(Error::UnsupportedDerivative(deriv));
        }
        Ok(self.eval_all_derivs(x).iter().map(|r| r[deriv]).collect())
    }
}

/// `d^deriv/dx^deriv [phi_n(x)]` with `phi_n(x) = P_n(2x - 1)` (times the
/// normalization factor).
pub fn eval_shifted(n: usize, x: f64, deriv: usize, normalization: Normalization) -> Result<f64> {
    if deriv > 2 {
        return Err(Error::UnsupportedDerivative(deriv));
    }
    let d = legendre_derivs(n, 2.0 * x - 1.0);
    let chain = (1u32 << deriv) as f64;
    Ok(normalization.scale(n) * chain * d[deriv])
}

/// Roots of `P_n` in increasing order.
///
/// Each root is isolated in the bracket given by Bruns' inequality and
/// polished by Newton's method started from the corresponding Chebyshev
/// point; a step leaving the bracket falls back to bisection. Roots are
/// computed for `x >= 0` and mirrored, so the result is exactly symmetric.
pub fn legendre_roots(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("P_0 has no roots"));
    }
    let nf = n as f64;
    let half = n / 2;
    let mut positive = Vec::with_capacity(half);
    for k in 1..=half {
        let kf = k as f64;
        // k-th largest root lies in (cos(k pi/(n+1/2)), cos((k-1/2) pi/(n+1/2)))
        let mut lo = (kf * std::f64::consts::PI / (nf + 0.5)).cos();
        let mut hi = ((kf - 0.5) * std::f64::consts::PI / (nf + 0.5)).cos();
        let p_lo_sign = legendre(n, lo).signum();
        let mut x = ((kf - 0.5) * std::f64::consts::PI / nf).cos();
        if x <= lo || x >= hi {
            x = 0.5 * (lo + hi);
        }
        let mut converged = false;
        for _ in 0..ROOT_MAX_ITER {
            let [p, dp, _] = legendre_derivs(n, x);
            if p == 0.0 {
                converged = true;
                break;
            }
            if p.signum() == p_lo_sign {
                lo = x;
            } else {
                hi = x;
            }
            let mut next = x - p / dp;
            if !(next > lo.min(hi) && next < lo.max(hi)) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - x).abs();
            x = next;
            if step <= 2.0 * f64::EPSILON * x.abs()
                || (p.abs() <= ROOT_RESIDUAL_TARGET && step < 1e-15)
            {
                converged = true;
                break;
            }
        }
        // Newton stops within a few ulps; keep the neighbouring float with the
        // smallest evaluated residual.
        let mut residual = legendre(n, x).abs();
        let mut probe = x;
        for _ in 0..ROOT_POLISH_ULPS {
            probe = probe.next_up();
            let r = legendre(n, probe).abs();
            if r < residual {
                residual = r;
                x = probe;
            }
        }
        probe = x;
        for _ in 0..ROOT_POLISH_ULPS {
            probe = probe.next_down();
            let r = legendre(n, probe).abs();
            if r < residual {
                residual = r;
                x = probe;
            }
        }
        if !converged || residual >= ROOT_RESIDUAL_ACCEPT {
            return Err(Error::NoConvergence {
                degree: n,
                residual,
            });
        }
        positive.push(x);
    }
    let mut roots: Vec<f64> = positive.iter().map(|r| -r).collect();
    if n % 2 == 1 {
        roots.push(0.0);
    }
    roots.extend(positive.iter().rev());
    Ok(roots)
}

/// Gauss-Legendre rule mapped onto [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `n`-point Gauss-Legendre rule on [0, 1]; exact for degree `2n - 1`.
pub fn gauss_rule(n: usize) -> Result<QuadratureRule> {
    let roots = legendre_roots(n)?;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for t in roots {
        let dp = legendre_derivs(n, t)[1];
        // 2 / ((1 - t^2) P'^2) on [-1, 1], halved by the map to [0, 1]
        weights.push(1.0 / ((1.0 - t * t) * dp * dp));
        nodes.push(0.5 * (t + 1.0));
    }
    Ok(QuadratureRule { nodes, weights })
}

/// `<f, g> = int_0^1 f g dx`, approximated by `rule`.
pub fn inner_product(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, rule: &QuadratureRule) -> f64 {
    rule.integrate(|x| f(x) * g(x))
}
