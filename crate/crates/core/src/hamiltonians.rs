//! Canonical Hamiltonian systems `y' = J ∇H(y)`.
//!
//! States are laid out as `y = (q_1..q_m, p_1..p_m)`, so that
//! `J = [[0, I], [-I, 0]]` gives `q' = ∂H/∂p` and `p' = -∂H/∂q`.

use crate::error::{HbvmError, Result};

/// A Hamiltonian problem in canonical form.
pub trait CanonicalSystem: Send + Sync {
    fn name(&self) -> &str;

    /// Number of degrees of freedom `m`; the state has length `2m`.
    fn half_dim(&self) -> usize;

    fn dim(&self) -> usize {
        2 * self.half_dim()
    }

    /// Total degree of `H` when it is a polynomial.
    fn poly_degree(&self) -> Option<u32>;

    fn initial_state(&self) -> Vec<f64>;

    fn energy(&self, y: &[f64]) -> Result<f64>;

    /// Writes `∇H(y)` into `out`.
    fn gradient_into(&self, y: &[f64], out: &mut [f64]) -> Result<()>;

    fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(y, &mut g)?;
        Ok(g)
    }

    /// Writes `f(y) = J ∇H(y)` into `out`.
    fn vector_field_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.gradient_into(y, out)?;
        let m = self.half_dim();
        for i in 0..m {
            let gq = out[i];
            out[i] = out[m + i];
            out[m + i] = -gq;
        }
        Ok(())
    }

    fn vector_field(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut f = vec![0.0; self.dim()];
        self.vector_field_into(y, &mut f)?;
        Ok(f)
    }
}

fn check_len(expected: usize, y: &[f64]) -> Result<()> {
    if y.len() != expected {
        return Err(HbvmError::Dimension { expected, got: y.len() });
    }
    Ok(())
}

/// `J v = (v_p, -v_q)` for `v = (v_q, v_p)`.
pub fn apply_j(v: &[f64]) -> Result<Vec<f64>> {
    if !v.len().is_multiple_of(2) {
        return Err(HbvmError::InvalidArgument(format!(
            "J acts on even-length vectors, got length {}",
            v.len()
        )));
    }
    let m = v.len() / 2;
    let mut out = Vec::with_capacity(v.len());
    out.extend_from_slice(&v[m..]);
    out.extend(v[..m].iter().map(|x| -x));
    Ok(out)
}

/// Central differences `(H(y + εe_i) - H(y - εe_i)) / 2ε`.
pub fn finite_difference_gradient(
    system: &dyn CanonicalSystem,
    y: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(HbvmError::InvalidArgument(format!("step must be positive, got {step}")));
    }
    check_len(system.dim(), y)?;
    let mut probe = y.to_vec();
    let mut grad = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        probe[i] = y[i] + step;
        let up = system.energy(&probe)?;
        probe[i] = y[i] - step;
        let down = system.energy(&probe)?;
        probe[i] = y[i];
        grad.push((up - down) / (2.0 * step));
    }
    Ok(grad)
}

/// `H = p³/3 - p/2 + q⁶/30 + q⁴/4 - q³/3 + 1/6`, a degree-6 polynomial
/// Hamiltonian on which Lobatto IIIA shows a linear energy drift.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fhp;

impl CanonicalSystem for Fhp {
    fn name(&self) -> &str {
        "fhp"
    }

    fn half_dim(&self) -> usize {
        1
    }

    fn poly_degree(&self) -> Option<u32> {
        Some(6)
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0, 1.0]
    }

    fn energy(&self, y: &[f64]) -> Result<f64> {
        check_len(2, y)?;
        let (q, p) = (y[0], y[1]);
        let q3 = q * q * q;
        Ok(p * p * p / 3.0 - p / 2.0 + q3 * q3 / 30.0 + q3 * q / 4.0 - q3 / 3.0 + 1.0 / 6.0)
    }

    fn gradient_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(2, y)?;
        let (q, p) = (y[0], y[1]);
        let q2 = q * q;
        out[0] = q2 * q2 * q / 5.0 + q2 * q - q2;
        out[1] = p * p - 0.5;
        Ok(())
    }
}

/// Fermi–Pasta–Ulam chain: alternating stiff harmonic springs (frequency ω)
/// and soft quartic springs, with fixed ends `q_0 = q_{2n+1} = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Fpu {
    /// Number of stiff springs; the chain has `2 * pairs` masses.
    pub pairs: usize,
    pub omega: f64,
}

impl Default for Fpu {
    fn default() -> Self {
        Self { pairs: 3, omega: 50.0 }
    }
}

impl Fpu {
    /// Position `q_i` for `i = 0..=2n+1`, with the ghost ends pinned at zero.
    fn position(&self, q: &[f64], i: usize) -> f64 {
        if i == 0 || i == q.len() + 1 {
            0.0
        } else {
            q[i - 1]
        }
    }
}

impl CanonicalSystem for Fpu {
    fn name(&self) -> &str {
        "fpu"
    }

    fn half_dim(&self) -> usize {
        2 * self.pairs
    }

    fn poly_degree(&self) -> Option<u32> {
        Some(4)
    }

    fn initial_state(&self) -> Vec<f64> {
        let n = self.half_dim();
        let mut y = vec![0.0; 2 * n];
        for (i, q) in y.iter_mut().take(n).enumerate() {
            *q = i as f64 / 10.0;
        }
        y
    }

    fn energy(&self, y: &[f64]) -> Result<f64> {
        let n = self.half_dim();
        check_len(2 * n, y)?;
        let (q, p) = y.split_at(n);
        let kinetic = 0.5 * p.iter().map(|v| v * v).sum::<f64>();
        let stiff = (1..=self.pairs)
            .map(|i| {
                let d = self.position(q, 2 * i) - self.position(q, 2 * i - 1);
                d * d
            })
            .sum::<f64>()
            * self.omega
            * self.omega
            / 4.0;
        let soft = (0..=self.pairs)
            .map(|i| {
                let d = self.position(q, 2 * i + 1) - self.position(q, 2 * i);
                let d2 = d * d;
                d2 * d2
            })
            .sum::<f64>();
        Ok(kinetic + stiff + soft)
    }

    fn gradient_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.half_dim();
        check_len(2 * n, y)?;
        let (q, p) = y.split_at(n);
        out[..n].fill(0.0);
        let half_w2 = self.omega * self.omega / 2.0;
        for i in 1..=self.pairs {
            // d/dq of ω²/4 (q_{2i} - q_{2i-1})²
            let d = self.position(q, 2 * i) - self.position(q, 2 * i - 1);
            out[2 * i - 1] += half_w2 * d;
            out[2 * i - 2] -= half_w2 * d;
        }
        for i in 0..=self.pairs {
            let (hi, lo) = (2 * i + 1, 2 * i);
            let d = self.position(q, hi) - self.position(q, lo);
            let force = 4.0 * d * d * d;
            if hi <= n {
                out[hi - 1] += force;
            }
            if lo >= 1 {
                out[lo - 1] -= force;
            }
        }
        out[n..].copy_from_slice(p);
        Ok(())
    }
}

/// Charged particle in the magnetic field of an infinite straight wire
/// (Biot–Savart potential). Non-polynomial; singular on the wire `ρ = 0`.
///
/// `H = [(p_x - αx/ρ²)² + (p_y - αy/ρ²)² + (p_z + α log ρ)²] / 2M`
#[derive(Debug, Clone, Copy)]
pub struct BiotSavart {
    /// `α = e B_0`.
    pub alpha: f64,
    /// Particle mass.
    pub mass: f64,
}

impl Default for BiotSavart {
    fn default() -> Self {
        Self { alpha: -1.0, mass: 1.0 }
    }
}

impl BiotSavart {
    fn rho2(y: &[f64]) -> Result<f64> {
        let rho2 = y[0] * y[0] + y[1] * y[1];
        if rho2 == 0.0 || !rho2.is_finite() {
            return Err(HbvmError::Domain(format!(
                "Biot-Savart potential is singular at x = {}, y = {}",
                y[0], y[1]
            )));
        }
        Ok(rho2)
    }
}

impl CanonicalSystem for BiotSavart {
    fn name(&self) -> &str {
        "biot"
    }

    fn half_dim(&self) -> usize {
        3
    }

    fn poly_degree(&self) -> Option<u32> {
        None
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.5, 10.0, 0.0, -0.1, -0.3, 0.0]
    }

    fn energy(&self, y: &[f64]) -> Result<f64> {
        check_len(6, y)?;
        let rho2 = Self::rho2(y)?;
        let a = self.alpha;
        let u = y[3] - a * y[0] / rho2;
        let v = y[4] - a * y[1] / rho2;
        let w = y[5] + a * 0.5 * rho2.ln();
        Ok((u * u + v * v + w * w) / (2.0 * self.mass))
    }

    fn gradient_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(6, y)?;
        let rho2 = Self::rho2(y)?;
        let (x, yy) = (y[0], y[1]);
        let a = self.alpha;
        let inv_m = 1.0 / self.mass;
        let rho4 = rho2 * rho2;
        let u = y[3] - a * x / rho2;
        let v = y[4] - a * yy / rho2;
        let w = y[5] + a * 0.5 * rho2.ln();
        // ∂(x/ρ²)/∂x = (y²-x²)/ρ⁴, ∂(x/ρ²)/∂y = ∂(y/ρ²)/∂x = -2xy/ρ⁴,
        // ∂(y/ρ²)/∂y = (x²-y²)/ρ⁴, ∇log ρ = (x, y)/ρ²
        let dxx = (yy * yy - x * x) / rho4;
        let dxy = -2.0 * x * yy / rho4;
        let dyy = -dxx;
        out[0] = inv_m * (-a * (u * dxx + v * dxy) + w * a * x / rho2);
        out[1] = inv_m * (-a * (u * dxy + v * dyy) + w * a * yy / rho2);
        out[2] = 0.0;
        out[3] = inv_m * u;
        out[4] = inv_m * v;
        out[5] = inv_m * w;
        Ok(())
    }
}

/// `H = (q² + p²)/2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Harmonic;

impl CanonicalSystem for Harmonic {
    fn name(&self) -> &str {
        "harmonic"
    }

    fn half_dim(&self) -> usize {
        1
    }

    fn poly_degree(&self) -> Option<u32> {
        Some(2)
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![1.0, 0.0]
    }

    fn energy(&self, y: &[f64]) -> Result<f64> {
        check_len(2, y)?;
        Ok(0.5 * (y[0] * y[0] + y[1] * y[1]))
    }

    fn gradient_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(2, y)?;
        out.copy_from_slice(y);
        Ok(())
    }
}

pub fn problem_fhp() -> Fhp {
    Fhp
}

pub fn problem_fpu() -> Fpu {
    Fpu::default()
}

pub fn problem_biot() -> BiotSavart {
    BiotSavart::default()
}

pub fn problem_harmonic() -> Harmonic {
    Harmonic
}

/// Names accepted by [`problem_by_name`].
pub const PROBLEM_NAMES: [&str; 4] = ["fhp", "fpu", "biot", "harmonic"];

pub fn problem_by_name(name: &str) -> Result<Box<dyn CanonicalSystem>> {
    match name {
        "fhp" => Ok(Box::new(problem_fhp())),
        "fpu" => Ok(Box::new(problem_fpu())),
        "biot" => Ok(Box::new(problem_biot())),
        "harmonic" => Ok(Box::new(problem_harmonic())),
        other => Err(HbvmError::UnknownProblem(other.to_string())),
    }
}
