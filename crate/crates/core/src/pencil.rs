//! Block-method form `A ŷ = h B f(ŷ)` of HBVM(k,s).
//!
//! The k+1 Lobatto abscissae are split into s+1 fundamental abscissae
//! `c_0 = 0 < ... < c_s = 1` and r = k-s silent ones. The first s rows of the
//! pencil are the orthogonality conditions written at the fundamental
//! abscissae; the last r rows interpolate the silent stages from the
//! fundamental ones and carry no `f` contribution.

use nalgebra::{DMatrix, DVector};

use crate::error::{HbvmError, Result};
use crate::legendre::{eval_legendre_all, integrate_legendre, LobattoRule};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockPencil {
    k: usize,
    s: usize,
    nodes: Vec<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    fundamental: Vec<usize>,
    silent: Vec<usize>,
}

/// Evenly spread fundamental indices `round(j k / s)`, `j = 0..s`.
pub fn default_fundamental_indices(k: usize, s: usize) -> Vec<usize> {
    (0..=s)
        .map(|j| ((j * k) as f64 / s as f64).round() as usize)
        .collect()
}

impl BlockPencil {
    pub fn new(k: usize, s: usize, fundamental_indices: &[usize]) -> Result<Self> {
        if s == 0 || s > k {
            return Err(HbvmError::InvalidMethod(format!(
                "HBVM(k,s) requires 1 <= s <= k, got k={k}, s={s}"
            )));
        }
        let ind_s = fundamental_indices;
        if ind_s.len() != s + 1
            || ind_s[0] != 0
            || ind_s[s] != k
            || ind_s.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(HbvmError::InvalidArgument(format!(
                "fundamental indices must be {} strictly increasing entries from 0 to {k}, got {ind_s:?}",
                s + 1
            )));
        }
        let ind_r: Vec<usize> = (0..=k).filter(|i| !ind_s.contains(i)).collect();

        let rule = LobattoRule::new(k)?;
        let t = rule.nodes();
        let w = rule.weights();
        let n = k + 1;

        // B(0..s, j) = Σ_l ∫_0^{c_i} P_l (2l+1) P_l(t_j) b_j
        let values: Vec<Vec<f64>> = t.iter().map(|&x| eval_legendre_all(s, x)).collect();
        let int_fund = DMatrix::from_fn(s, s, |i, l| integrate_legendre(l, t[ind_s[i + 1]]));

        let mut a = DMatrix::zeros(k, n);
        let mut b = DMatrix::zeros(k, n);
        for i in 0..s {
            a[(i, ind_s[0])] = -1.0;
            a[(i, ind_s[i + 1])] = 1.0;
            for j in 0..n {
                b[(i, j)] = (0..s)
                    .map(|l| int_fund[(i, l)] * (2 * l + 1) as f64 * values[j][l])
                    .sum::<f64>()
                    * w[j];
            }
        }

        if !ind_r.is_empty() {
            // M = I_{s-1}^{-1} (-e | I_s), an s×(s+1) matrix
            let mut rhs = DMatrix::zeros(s, s + 1);
            for i in 0..s {
                rhs[(i, 0)] = -1.0;
                rhs[(i, i + 1)] = 1.0;
            }
            let m = int_fund
                .clone()
                .lu()
                .solve(&rhs)
                .ok_or_else(|| HbvmError::Singular("interpolation matrix at fundamental abscissae".into()))?;
            for (row, &tau_idx) in ind_r.iter().enumerate() {
                let i = s + row;
                let tau = t[tau_idx];
                let int_tau: Vec<f64> = (0..s).map(|l| integrate_legendre(l, tau)).collect();
                a[(i, tau_idx)] = 1.0;
                for (col, &fi) in ind_s.iter().enumerate() {
                    let mut v: f64 = -(0..s).map(|l| int_tau[l] * m[(l, col)]).sum::<f64>();
                    if col == 0 {
                        v -= 1.0;
                    }
                    a[(i, fi)] = v;
                }
            }
        }

        Ok(Self {
            k,
            s,
            nodes: t.to_vec(),
            a,
            b,
            fundamental: ind_s.to_vec(),
            silent: ind_r,
        })
    }

    /// Pencil with [`default_fundamental_indices`].
    pub fn with_default_indices(k: usize, s: usize) -> Result<Self> {
        Self::new(k, s, &default_fundamental_indices(k, s))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn fundamental_indices(&self) -> &[usize] {
        &self.fundamental
    }

    pub fn silent_indices(&self) -> &[usize] {
        &self.silent
    }

    /// One step of the pencil applied to `y' = λ y`, with `z = hλ`.
    /// Returns the value at `t_k = 1`.
    pub fn linear_step(&self, z: f64, y0: f64) -> Result<f64> {
        let k = self.k;
        let m = &self.a - &self.b * z;
        let lhs = m.columns(1, k).into_owned();
        let rhs = DVector::from_iterator(k, m.column(0).iter().map(|&v| -v * y0));
        let u = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| HbvmError::Singular(format!("pencil A - zB at z = {z}")))?;
        Ok(u[k - 1])
    }
}
