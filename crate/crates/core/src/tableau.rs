//! Runge–Kutta tableaux of HBVM(k,s) and Lobatto IIIA, with validators.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{HbvmError, Result};
use crate::legendre::{eval_legendre_all, integrate_legendre, LobattoRule};

/// Relative singular-value threshold used for the numerical rank of `C`.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Tolerance used when testing the simplifying assumptions B, C and D.
pub const SIMPLIFYING_TOLERANCE: f64 = 1e-11;

/// A stiffly accurate Runge–Kutta tableau on the `k+1` Lobatto nodes.
///
/// `coeffs` is the `(k+1)×(k+1)` matrix usually written `A` in Butcher
/// notation. For HBVM(k,s) it has rank `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    k: usize,
    s: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    coeffs: DMatrix<f64>,
}

/// Orders reported by [`ButcherTableau::simplifying_conditions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplifyingOrders {
    /// Largest `q` with `B(q)`: the weights integrate `t^{l-1}` exactly for `l ≤ q`.
    pub b_order: usize,
    /// Largest `q` with `C(q)`.
    pub c_order: usize,
    /// Largest `q` with `D(q)`.
    pub d_order: usize,
}

impl SimplifyingOrders {
    /// Highest monomial degree integrated exactly by the weights.
    pub fn quadrature_degree(&self) -> Option<usize> {
        self.b_order.checked_sub(1)
    }
}

fn check_ks(k: usize, s: usize) -> Result<()> {
    if s == 0 || s > k {
        return Err(HbvmError::InvalidMethod(format!(
            "HBVM(k,s) requires 1 <= s <= k, got k={k}, s={s}"
        )));
    }
    Ok(())
}

impl ButcherTableau {
    /// Builds HBVM(k,s): `C = Ī D_s P̄ᵀ Ω̄`, i.e.
    /// `C_ij = Σ_{l<s} (2l+1) ∫_0^{t_i} P_l · P_l(t_j) · b_j`.
    pub fn hbvm(k: usize, s: usize) -> Result<Self> {
        check_ks(k, s)?;
        let rule = LobattoRule::new(k)?;
        let nodes = rule.nodes().to_vec();
        let weights = rule.weights().to_vec();
        let n = k + 1;

        let integrals: Vec<Vec<f64>> = nodes
            .iter()
            .map(|&t| (0..s).map(|l| integrate_legendre(l, t)).collect())
            .collect();
        let values: Vec<Vec<f64>> = nodes.iter().map(|&t| eval_legendre_all(s, t)).collect();

        let coeffs = DMatrix::from_fn(n, n, |i, j| {
            (0..s)
                .map(|l| (2 * l + 1) as f64 * integrals[i][l] * values[j][l])
                .sum::<f64>()
                * weights[j]
        });

        Ok(Self { k, s, nodes, weights, coeffs })
    }

    /// The classical Lobatto IIIA collocation tableau on `s+1` nodes.
    ///
    /// Entries are `∫_0^{c_i} L_j(x) dx` with `L_j` the Lagrange basis, computed
    /// from the monomial expansion of each `L_j`. This does not go through the
    /// Legendre machinery, so it serves as an independent check of
    /// [`ButcherTableau::hbvm`] with `k = s`.
    pub fn lobatto_iiia(s: usize) -> Result<Self> {
        check_ks(s, s)?;
        let rule = LobattoRule::new(s)?;
        let nodes = rule.nodes().to_vec();
        let weights = rule.weights().to_vec();
        let n = s + 1;

        let mut coeffs = DMatrix::zeros(n, n);
        for j in 0..n {
            // monomial coefficients of L_j, lowest degree first
            let mut poly = vec![1.0];
            for m in (0..n).filter(|&m| m != j) {
                let denom = nodes[j] - nodes[m];
                let mut next = vec![0.0; poly.len() + 1];
                for (d, &c) in poly.iter().enumerate() {
                    next[d + 1] += c / denom;
                    next[d] -= c * nodes[m] / denom;
                }
                poly = next;
            }
            for i in 0..n {
                let c = nodes[i];
                let mut acc = 0.0;
                let mut pow = c;
                for (d, &a) in poly.iter().enumerate() {
                    acc += a * pow / (d + 1) as f64;
                    pow *= c;
                }
                coeffs[(i, j)] = acc;
            }
        }
        Ok(Self { k: s, s, nodes, weights, coeffs })
    }

    /// Assembles a tableau from raw parts, checking only the shapes.
    pub fn from_parts(
        k: usize,
        s: usize,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        coeffs: DMatrix<f64>,
    ) -> Result<Self> {
        let n = k + 1;
        if nodes.len() != n {
            return Err(HbvmError::Dimension { expected: n, got: nodes.len() });
        }
        if weights.len() != n {
            return Err(HbvmError::Dimension { expected: n, got: weights.len() });
        }
        if coeffs.nrows() != n || coeffs.ncols() != n {
            return Err(HbvmError::Dimension { expected: n, got: coeffs.nrows().max(coeffs.ncols()) });
        }
        Ok(Self { k, s, nodes, weights, coeffs })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Number of silent stages, `k - s`.
    pub fn r(&self) -> usize {
        self.k - self.s
    }

    pub fn stages(&self) -> usize {
        self.k + 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.coeffs
    }

    /// Numerical rank of `C`: singular values above `RANK_TOLERANCE · σ_max`.
    pub fn rank(&self) -> usize {
        let sv = self.singular_values();
        let max = sv.first().copied().unwrap_or(0.0);
        if max == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&v| v > RANK_TOLERANCE * max).count()
    }

    /// Singular values of `C` in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.coeffs.clone().singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// Largest orders for which the simplifying assumptions hold within
    /// [`SIMPLIFYING_TOLERANCE`].
    ///
    /// * `B(q)`: `Σ b_i t_i^{l-1} = 1/l`, `l = 1..q`
    /// * `C(q)`: `Σ_j C_ij t_j^{l-1} = t_i^l / l`, `l = 1..q`
    /// * `D(q)`: `Σ_i b_i t_i^{l-1} C_ij = b_j (1 - t_j^l) / l`, `l = 1..q`
    pub fn simplifying_conditions(&self) -> SimplifyingOrders {
        let n = self.stages();
        let t = &self.nodes;
        let b = &self.weights;
        let c = &self.coeffs;
        let tol = SIMPLIFYING_TOLERANCE;

        let b_holds = |l: i32| {
            let sum: f64 = (0..n).map(|i| b[i] * t[i].powi(l - 1)).sum();
            (sum - 1.0 / l as f64).abs() <= tol
        };
        let c_holds = |l: i32| {
            (0..n).all(|i| {
                let sum: f64 = (0..n).map(|j| c[(i, j)] * t[j].powi(l - 1)).sum();
                (sum - t[i].powi(l) / l as f64).abs() <= tol
            })
        };
        let d_holds = |l: i32| {
            (0..n).all(|j| {
                let sum: f64 = (0..n).map(|i| b[i] * t[i].powi(l - 1) * c[(i, j)]).sum();
                (sum - b[j] * (1.0 - t[j].powi(l)) / l as f64).abs() <= tol
            })
        };
        let largest = |holds: &dyn Fn(i32) -> bool, cap: usize| {
            (1..=cap as i32).take_while(|&l| holds(l)).count()
        };

        SimplifyingOrders {
            b_order: largest(&b_holds, 4 * n),
            c_order: largest(&c_holds, 2 * n),
            d_order: largest(&d_holds, 2 * n),
        }
    }

    /// Max-norm of `E_k L C E_{k+1} - L C`, where `L` is the `k×(k+1)`
    /// forward-difference matrix and `E_n` reverses the order of `n` entries.
    /// Zero (to round-off) for a symmetric method.
    pub fn symmetry_residual(&self) -> f64 {
        let k = self.k;
        let n = k + 1;
        let c = &self.coeffs;
        // (L C)_ij = C_{i+1,j} - C_{i,j}
        let lc = |i: usize, j: usize| c[(i + 1, j)] - c[(i, j)];
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..n {
                let reflected = lc(k - 1 - i, n - 1 - j);
                worst = worst.max((reflected - lc(i, j)).abs());
            }
        }
        worst
    }

    /// Stability function `R(z) = 1 + z bᵀ (I - zC)^{-1} 𝟙`.
    pub fn stability_function(&self, z: Complex64) -> Result<Complex64> {
        let n = self.stages();
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let id = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            id - z * self.coeffs[(i, j)]
        });
        let rhs = nalgebra::DVector::<Complex64>::from_element(n, Complex64::new(1.0, 0.0));
        let lu = m.lu();
        let x = lu
            .solve(&rhs)
            .ok_or_else(|| HbvmError::Singular(format!("I - zC is singular at z = {z}")))?;
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(HbvmError::Singular(format!("I - zC is singular at z = {z}")));
        }
        let dot: Complex64 = self.weights.iter().zip(x.iter()).map(|(&b, &v)| v * b).sum();
        Ok(Complex64::new(1.0, 0.0) + z * dot)
    }

    /// JSON record `{"k","s","nodes","weights","C"}` with every number printed
    /// to 17 significant digits.
    pub fn to_json(&self) -> String {
        let fmt_vec = |v: &mut dyn Iterator<Item = f64>| {
            let items: Vec<String> = v.map(fmt17).collect();
            format!("[{}]", items.join(", "))
        };
        let rows: Vec<String> = (0..self.stages())
            .map(|i| fmt_vec(&mut self.coeffs.row(i).iter().copied()))
            .collect();
        format!(
            "{{\n  \"k\": {},\n  \"s\": {},\n  \"nodes\": {},\n  \"weights\": {},\n  \"C\": [\n    {}\n  ]\n}}\n",
            self.k,
            self.s,
            fmt_vec(&mut self.nodes.iter().copied()),
            fmt_vec(&mut self.weights.iter().copied()),
            rows.join(",\n    ")
        )
    }

    /// Parses the record written by [`ButcherTableau::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Record {
            k: usize,
            s: usize,
            nodes: Vec<f64>,
            weights: Vec<f64>,
            #[serde(rename = "C")]
            c: Vec<Vec<f64>>,
        }
        let rec: Record = serde_json::from_str(text).map_err(|e| HbvmError::Parse(e.to_string()))?;
        let n = rec.k + 1;
        if rec.c.len() != n || rec.c.iter().any(|row| row.len() != n) {
            return Err(HbvmError::Parse(format!("C must be {n}x{n}")));
        }
        let coeffs = DMatrix::from_fn(n, n, |i, j| rec.c[i][j]);
        Self::from_parts(rec.k, rec.s, rec.nodes, rec.weights, coeffs)
    }

    /// CSV with header `i,t,b,C_0,...,C_k`, one row per stage.
    pub fn to_csv(&self) -> String {
        let n = self.stages();
        let mut out = String::from("i,t,b");
        for j in 0..n {
            out.push_str(&format!(",C_{j}"));
        }
        out.push('\n');
        for i in 0..n {
            out.push_str(&format!("{},{},{}", i, fmt17(self.nodes[i]), fmt17(self.weights[i])));
            for j in 0..n {
                out.push(',');
                out.push_str(&fmt17(self.coeffs[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Formats a float with 17 significant digits, which round-trips binary64.
pub fn fmt17(x: f64) -> String {
    if x == 0.0 {
        // keeps the sign of -0.0
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    format!("{x:.16e}")
}
