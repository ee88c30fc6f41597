//! Shifted Legendre polynomials on [0,1] and Gauss–Lobatto quadrature.
//!
//! `P_n` here always denotes the shifted polynomial, normalised by
//! `P_n(1) = 1`, so that `∫_0^1 P_n P_m = δ_nm / (2n+1)`.

use std::f64::consts::PI;

use crate::error::{HbvmError, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Evaluates `P_n(x)` with the three-term recurrence
/// `(n+1) P_{n+1} = (2n+1)(2x-1) P_n - n P_{n-1}`.
pub fn eval_legendre(n: usize, x: f64) -> f64 {
    let (p, _) = eval_pair(n, x);
    p
}

/// Returns `(P_n(x), P_{n-1}(x))`, with `P_{-1} = 0`.
fn eval_pair(n: usize, x: f64) -> (f64, f64) {
    let u = 2.0 * x - 1.0;
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * u * cur - jf * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Values `P_0(x), ..., P_n(x)`.
pub fn eval_legendre_all(n: usize, x: f64) -> Vec<f64> {
    let u = 2.0 * x - 1.0;
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(u);
    }
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * u * out[j] - jf * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// Evaluates `P_n'(x)` using `P_{n+1}' = P_{n-1}' + 2(2n+1) P_n`.
pub fn eval_legendre_deriv(n: usize, x: f64) -> f64 {
    let p = eval_legendre_all(n, x);
    // d_prev = P'_{j-1}, d_cur = P'_j
    let mut d_prev = 0.0;
    let mut d_cur = 0.0;
    for (j, &pj) in p.iter().enumerate().take(n) {
        let jf = j as f64;
        let next = d_prev + 2.0 * (2.0 * jf + 1.0) * pj;
        d_prev = d_cur;
        d_cur = next;
    }
    d_cur
}

/// `∫_0^x P_n(t) dt`, via `2(2n+1) ∫_0^x P_n = P_{n+1}(x) - P_{n-1}(x)` for `n ≥ 1`.
///
/// For `n ≥ 1` and `x = 1` the two terms are both exactly one, so the result is
/// exactly zero.
pub fn integrate_legendre(n: usize, x: f64) -> f64 {
    if n == 0 {
        return x;
    }
    let p = eval_legendre_all(n + 1, x);
    (p[n + 1] - p[n - 1]) / (2.0 * (2.0 * n as f64 + 1.0))
}

/// A `(k+1)`-point Gauss–Lobatto rule on [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct LobattoRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LobattoRule {
    /// Builds the rule whose nodes are the zeros of `(x²-x) P_k'(x)`.
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(HbvmError::InvalidArgument(
                "a Lobatto rule needs k >= 1 (at least two points)".into(),
            ));
        }
        let kf = k as f64;
        let mut nodes = vec![0.0; k + 1];
        nodes[k] = 1.0;
        for (i, node) in nodes.iter_mut().enumerate().take(k).skip(1) {
            let mut x = 0.5 * (1.0 - (PI * i as f64 / kf).cos());
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                let p = eval_legendre(k, x);
                let dp = eval_legendre_deriv(k, x);
                // (x²-x) P'' = k(k+1) P - (2x-1) P'
                let d2p = (kf * (kf + 1.0) * p - (2.0 * x - 1.0) * dp) / (x * x - x);
                let dx = dp / d2p;
                x -= dx;
                if dx.abs() <= NEWTON_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged || !(0.0..=1.0).contains(&x) {
                return Err(HbvmError::RootFinding { index: i, npoints: k + 1 });
            }
            *node = x;
        }

        let scale = 1.0 / (kf * (kf + 1.0));
        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&t| {
                let p = eval_legendre(k, t);
                scale / (p * p)
            })
            .collect();

        // Enforce exact reflection symmetry about 1/2.
        let raw_nodes = nodes.clone();
        let raw_weights = weights.clone();
        for i in 0..=k {
            nodes[i] = 0.5 * (raw_nodes[i] + 1.0 - raw_nodes[k - i]);
            weights[i] = 0.5 * (raw_weights[i] + raw_weights[k - i]);
        }
        nodes[0] = 0.0;
        nodes[k] = 1.0;

        Ok(Self { nodes, weights })
    }

    /// Number of intervals `k`; the rule has `k + 1` points.
    pub fn k(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn npoints(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule to `f` on [0,1].
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &b)| b * f(t))
            .sum()
    }
}
