//! Stage solver and time-stepping driver for HBVM(k,s).
//!
//! One step from `y0` with stepsize `h` looks for the derivative of the stage
//! polynomial in the Legendre basis, `σ'(τ) = Σ_{j<s} γ_j P_j(τ)`, such that
//!
//! ```text
//! γ_j = (2j+1) Σ_{i=0..k} b_i P_j(t_i) f(Y_i),   Y_i = y0 + h Σ_{l<s} γ_l ∫_0^{t_i} P_l
//! ```
//!
//! The unknowns live in an `s·2m` dimensional space no matter how many
//! Lobatto points are used; the silent stages only cost vector-field
//! evaluations. The new approximation is `y1 = Y_k = y0 + h γ_0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{HbvmError, Result};
use crate::hamiltonians::CanonicalSystem;
use crate::legendre::{eval_legendre_all, integrate_legendre};
use crate::tableau::ButcherTableau;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMode {
    /// Plain fixed-point iteration on the Legendre coefficients.
    #[default]
    FixedPoint,
    /// Simplified Newton iteration with the vector-field Jacobian frozen at `y0`.
    NewtonLike,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub mode: SolverMode,
    /// Convergence threshold on `|h| · max|Δγ|`, relative to `1 + max|y0|`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { mode: SolverMode::FixedPoint, tolerance: 1e-13, max_iterations: 100 }
    }
}

impl SolverOptions {
    pub fn newton() -> Self {
        Self { mode: SolverMode::NewtonLike, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(HbvmError::InvalidArgument(format!(
                "solver tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(HbvmError::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Legendre coefficients `γ_0, ..., γ_{s-1}` of `σ'` over one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCoefficients {
    pub gamma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub iterations: usize,
    /// Last scaled increment `|h| · max|Δγ|`.
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub y1: Vec<f64>,
    pub coefficients: StageCoefficients,
    pub diagnostics: StepDiagnostics,
}

/// Precomputed Legendre data for one tableau.
#[derive(Debug, Clone)]
pub struct HbvmStepper {
    s: usize,
    stages: usize,
    /// `∫_0^{t_i} P_l`, indexed `[i][l]`.
    integrals: Vec<Vec<f64>>,
    /// `(2j+1) b_i P_j(t_i)`, indexed `[j][i]`.
    projection: Vec<Vec<f64>>,
}

impl HbvmStepper {
    pub fn new(tab: &ButcherTableau) -> Self {
        let s = tab.s();
        let nodes = tab.nodes();
        let weights = tab.weights();
        let integrals = nodes
            .iter()
            .map(|&t| (0..s).map(|l| integrate_legendre(l, t)).collect())
            .collect();
        let values: Vec<Vec<f64>> = nodes.iter().map(|&t| eval_legendre_all(s, t)).collect();
        let projection = (0..s)
            .map(|j| {
                (0..nodes.len())
                    .map(|i| (2 * j + 1) as f64 * weights[i] * values[i][j])
                    .collect()
            })
            .collect();
        Self { s, stages: nodes.len(), integrals, projection }
    }

    /// Evaluates the right-hand side `Φ(γ)` of the coefficient equations.
    #[allow(clippy::too_many_arguments)]
    fn rhs(
        &self,
        system: &dyn CanonicalSystem,
        y0: &[f64],
        f0: &[f64],
        h: f64,
        gamma: &[f64],
        out: &mut [f64],
        stage: &mut [f64],
        field: &mut [f64],
    ) -> Result<()> {
        let dim = y0.len();
        out.fill(0.0);
        for i in 0..self.stages {
            if i == 0 {
                field.copy_from_slice(f0);
            } else {
                stage.copy_from_slice(y0);
                for l in 0..self.s {
                    let c = h * self.integrals[i][l];
                    for (y, g) in stage.iter_mut().zip(&gamma[l * dim..(l + 1) * dim]) {
                        *y += c * g;
                    }
                }
                system.vector_field_into(stage, field)?;
            }
            for j in 0..self.s {
                let w = self.projection[j][i];
                for (o, f) in out[j * dim..(j + 1) * dim].iter_mut().zip(field.iter()) {
                    *o += w * f;
                }
            }
        }
        Ok(())
    }

    /// Scaled residual `|h| · max|Φ(γ) - γ|` of a set of coefficients.
    pub fn residual(
        &self,
        system: &dyn CanonicalSystem,
        y0: &[f64],
        h: f64,
        coeffs: &StageCoefficients,
    ) -> Result<f64> {
        let dim = system.dim();
        let gamma: Vec<f64> = coeffs.gamma.iter().flatten().copied().collect();
        let f0 = system.vector_field(y0)?;
        let mut phi = vec![0.0; gamma.len()];
        let mut stage = vec![0.0; dim];
        let mut field = vec![0.0; dim];
        self.rhs(system, y0, &f0, h, &gamma, &mut phi, &mut stage, &mut field)?;
        Ok(h.abs() * max_abs_diff(&phi, &gamma))
    }

    pub fn step(
        &self,
        system: &dyn CanonicalSystem,
        y0: &[f64],
        h: f64,
        opts: &SolverOptions,
    ) -> Result<StepOutcome> {
        opts.validate()?;
        let dim = system.dim();
        if y0.len() != dim {
            return Err(HbvmError::Dimension { expected: dim, got: y0.len() });
        }
        let s = self.s;
        if h == 0.0 {
            return Ok(StepOutcome {
                y1: y0.to_vec(),
                coefficients: StageCoefficients { gamma: vec![vec![0.0; dim]; s] },
                diagnostics: StepDiagnostics { iterations: 0, increment: 0.0 },
            });
        }

        let f0 = system.vector_field(y0)?;
        let mut gamma = vec![0.0; s * dim];
        gamma[..dim].copy_from_slice(&f0);
        let mut phi = vec![0.0; s * dim];
        let mut stage = vec![0.0; dim];
        let mut field = vec![0.0; dim];

        let threshold = opts.tolerance * (1.0 + y0.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        let newton = match opts.mode {
            SolverMode::FixedPoint => None,
            SolverMode::NewtonLike => Some(self.newton_matrix(system, y0, h)?),
        };

        let mut increment = f64::INFINITY;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_iterations {
            iterations += 1;
            self.rhs(system, y0, &f0, h, &gamma, &mut phi, &mut stage, &mut field)?;
            match &newton {
                None => {
                    increment = h.abs() * max_abs_diff(&phi, &gamma);
                    gamma.copy_from_slice(&phi);
                }
                Some(lu) => {
                    let residual = DVector::from_iterator(
                        gamma.len(),
                        gamma.iter().zip(&phi).map(|(g, p)| p - g),
                    );
                    let delta = lu.solve(&residual).ok_or_else(|| {
                        HbvmError::Singular("simplified Newton matrix".into())
                    })?;
                    for (g, d) in gamma.iter_mut().zip(delta.iter()) {
                        *g += d;
                    }
                    increment = h.abs() * delta.amax();
                }
            }
            if !increment.is_finite() {
                break;
            }
            if increment <= threshold {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(HbvmError::NoConvergence { iterations, increment });
        }

        let last = self.stages - 1;
        let mut y1 = y0.to_vec();
        for l in 0..s {
            let c = h * self.integrals[last][l];
            for (y, g) in y1.iter_mut().zip(&gamma[l * dim..(l + 1) * dim]) {
                *y += c * g;
            }
        }
        Ok(StepOutcome {
            y1,
            coefficients: StageCoefficients {
                gamma: gamma.chunks(dim).map(|c| c.to_vec()).collect(),
            },
            diagnostics: StepDiagnostics { iterations, increment },
        })
    }

    /// LU factors of `I - h (M ⊗ ∂f/∂y(y0))`, with
    /// `M_jl = Σ_i (2j+1) b_i P_j(t_i) ∫_0^{t_i} P_l`.
    fn newton_matrix(
        &self,
        system: &dyn CanonicalSystem,
        y0: &[f64],
        h: f64,
    ) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let dim = y0.len();
        let s = self.s;
        let jac = vector_field_jacobian(system, y0)?;
        let mut m = DMatrix::zeros(s, s);
        for j in 0..s {
            for l in 0..s {
                m[(j, l)] = (0..self.stages)
                    .map(|i| self.projection[j][i] * self.integrals[i][l])
                    .sum::<f64>();
            }
        }
        let n = s * dim;
        let mut g = DMatrix::identity(n, n);
        for j in 0..s {
            for l in 0..s {
                let c = h * m[(j, l)];
                if c == 0.0 {
                    continue;
                }
                for a in 0..dim {
                    for b in 0..dim {
                        g[(j * dim + a, l * dim + b)] -= c * jac[(a, b)];
                    }
                }
            }
        }
        Ok(g.lu())
    }
}

/// Central-difference Jacobian of `f = J∇H`.
pub fn vector_field_jacobian(system: &dyn CanonicalSystem, y: &[f64]) -> Result<DMatrix<f64>> {
    let dim = y.len();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut probe = y.to_vec();
    let mut up = vec![0.0; dim];
    let mut down = vec![0.0; dim];
    for c in 0..dim {
        let eps = 1e-6 * (1.0 + y[c].abs());
        probe[c] = y[c] + eps;
        system.vector_field_into(&probe, &mut up)?;
        probe[c] = y[c] - eps;
        system.vector_field_into(&probe, &mut down)?;
        probe[c] = y[c];
        for r in 0..dim {
            jac[(r, c)] = (up[r] - down[r]) / (2.0 * eps);
        }
    }
    Ok(jac)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| {
        let d = (x - y).abs();
        if d.is_nan() {
            f64::NAN
        } else {
            m.max(d)
        }
    })
}

/// One HBVM step from `y0` with stepsize `h` (which may be negative).
pub fn hbvm_step(
    tab: &ButcherTableau,
    system: &dyn CanonicalSystem,
    y0: &[f64],
    h: f64,
    opts: &SolverOptions,
) -> Result<StepOutcome> {
    HbvmStepper::new(tab).step(system, y0, h, opts)
}

/// One step of a generic Runge–Kutta tableau by fixed-point iteration on all
/// `k+1` stage values `Y_i = y0 + h Σ_j C_ij f(Y_j)`.
///
/// This ignores the low-rank structure of HBVM tableaux and is used as a
/// reference for [`hbvm_step`]. Returns `y0 + h Σ_j b_j f(Y_j)`.
pub fn rk_step(
    tab: &ButcherTableau,
    system: &dyn CanonicalSystem,
    y0: &[f64],
    h: f64,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    opts.validate()?;
    let dim = system.dim();
    if y0.len() != dim {
        return Err(HbvmError::Dimension { expected: dim, got: y0.len() });
    }
    let n = tab.stages();
    let c = tab.coeffs();
    let threshold = opts.tolerance * (1.0 + y0.iter().fold(0.0f64, |a, v| a.max(v.abs())));

    let mut stages: Vec<Vec<f64>> = vec![y0.to_vec(); n];
    let mut fields: Vec<Vec<f64>> = vec![vec![0.0; dim]; n];
    let mut increment = f64::INFINITY;
    for iteration in 1..=opts.max_iterations {
        for (y, f) in stages.iter().zip(fields.iter_mut()) {
            system.vector_field_into(y, f)?;
        }
        increment = 0.0;
        for i in 0..n {
            for d in 0..dim {
                let v = y0[d] + h * (0..n).map(|j| c[(i, j)] * fields[j][d]).sum::<f64>();
                increment = f64::max(increment, (v - stages[i][d]).abs());
                stages[i][d] = v;
            }
        }
        if !increment.is_finite() {
            return Err(HbvmError::NoConvergence { iterations: iteration, increment });
        }
        if increment <= threshold {
            for (y, f) in stages.iter().zip(fields.iter_mut()) {
                system.vector_field_into(y, f)?;
            }
            let b = tab.weights();
            return Ok((0..dim)
                .map(|d| y0[d] + h * (0..n).map(|j| b[j] * fields[j][d]).sum::<f64>())
                .collect());
        }
    }
    Err(HbvmError::NoConvergence { iterations: opts.max_iterations, increment })
}

/// A completed constant-step integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `|H(y_n) - H(y_0)|`.
    pub energy_error: Vec<f64>,
    /// Nonlinear iterations used by each step; zero for the initial point.
    pub solver_iterations: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn max_energy_error(&self) -> f64 {
        self.energy_error.iter().copied().fold(0.0, f64::max)
    }
}

/// Takes `n_steps` steps of size `h > 0`, stopping at the first failed step.
pub fn integrate(
    tab: &ButcherTableau,
    system: &dyn CanonicalSystem,
    y0: &[f64],
    h: f64,
    n_steps: usize,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    if n_steps > 0 && !(h > 0.0) {
        return Err(HbvmError::InvalidArgument(format!("stepsize must be positive, got {h}")));
    }
    opts.validate()?;
    let stepper = HbvmStepper::new(tab);
    let h0 = system.energy(y0)?;
    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        energy_error: Vec::with_capacity(n_steps + 1),
        solver_iterations: Vec::with_capacity(n_steps + 1),
    };
    traj.times.push(0.0);
    traj.states.push(y0.to_vec());
    traj.energy_error.push(0.0);
    traj.solver_iterations.push(0);

    let mut y = y0.to_vec();
    for n in 1..=n_steps {
        let out = stepper
            .step(system, &y, h, opts)
            .map_err(|e| HbvmError::StepFailed { step: n, source: Box::new(e) })?;
        y = out.y1;
        let energy = system
            .energy(&y)
            .map_err(|e| HbvmError::StepFailed { step: n, source: Box::new(e) })?;
        traj.times.push(n as f64 * h);
        traj.states.push(y.clone());
        traj.energy_error.push((energy - h0).abs());
        traj.solver_iterations.push(out.diagnostics.iterations);
    }
    Ok(traj)
}

/// `max|Φ_{-h}(Φ_h(y0)) - y0|` for an arbitrary one-step map.
pub fn adjoint_residual<F>(mut step: F, y0: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
{
    let forward = step(y0, h)?;
    let back = step(&forward, -h)?;
    Ok(max_abs_diff(&back, y0))
}

/// Time-reversal check of the HBVM step: zero up to solver tolerance for
/// symmetric methods.
pub fn adjoint_consistency_check(
    tab: &ButcherTableau,
    system: &dyn CanonicalSystem,
    y0: &[f64],
    h: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let stepper = HbvmStepper::new(tab);
    adjoint_residual(|y, dt| stepper.step(system, y, dt, opts).map(|o| o.y1), y0, h)
}

/// `|H(y1) - H(y0)|` after a single step.
pub fn per_step_energy_error(
    tab: &ButcherTableau,
    system: &dyn CanonicalSystem,
    y0: &[f64],
    h: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let out = hbvm_step(tab, system, y0, h, opts)?;
    Ok((system.energy(&out.y1)? - system.energy(y0)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{problem_fhp, problem_harmonic, CanonicalSystem};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_step_is_identity() {
        let tab = ButcherTableau::hbvm(4, 2).unwrap();
        let y0 = [0.2, 0.9];
        let out = hbvm_step(&tab, &problem_fhp(), &y0, 0.0, &SolverOptions::default()).unwrap();
        assert_eq!(out.y1, y0.to_vec());
        assert_eq!(
            per_step_energy_error(&tab, &problem_fhp(), &y0, 0.0, &SolverOptions::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn trapezoidal_step_on_harmonic_oscillator() {
        let tab = ButcherTableau::hbvm(1, 1).unwrap();
        let sys = problem_harmonic();
        let out = hbvm_step(&tab, &sys, &[1.0, 0.0], 0.1, &SolverOptions::default()).unwrap();
        // (I - h/2 A)^{-1} (I + h/2 A) y0, A = [[0,1],[-1,0]]
        assert_abs_diff_eq!(out.y1[0], 0.995_012_468_827_930_2, epsilon = 1e-13);
        assert_abs_diff_eq!(out.y1[1], -0.099_750_623_441_396_51, epsilon = 1e-13);
        assert!((sys.energy(&out.y1).unwrap() - 0.5).abs() <= 1e-14);
    }

    #[test]
    fn converged_coefficients_have_small_residual() {
        let tab = ButcherTableau::hbvm(6, 2).unwrap();
        let sys = problem_fhp();
        let y0 = sys.initial_state();
        let opts = SolverOptions::default();
        let stepper = HbvmStepper::new(&tab);
        let out = stepper.step(&sys, &y0, 0.16, &opts).unwrap();
        assert_eq!(out.coefficients.gamma.len(), 2);
        let r = stepper.residual(&sys, &y0, 0.16, &out.coefficients).unwrap();
        assert!(r <= opts.tolerance * 2.0, "residual {r}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let tab = ButcherTableau::hbvm(2, 2).unwrap();
        let opts = SolverOptions { max_iterations: 2, ..SolverOptions::default() };
        let err = hbvm_step(&tab, &problem_fhp(), &[0.0, 1.0], 0.16, &opts).unwrap_err();
        assert!(matches!(err, HbvmError::NoConvergence { iterations: 2, .. }));
        assert!(err.is_solver_failure());
    }

    #[test]
    fn fixed_point_diverges_on_huge_steps() {
        let tab = ButcherTableau::hbvm(2, 2).unwrap();
        let err = hbvm_step(&tab, &problem_fhp(), &[0.0, 1.0], 5.0, &SolverOptions::default());
        assert!(matches!(err, Err(HbvmError::NoConvergence { .. })));
    }

    #[test]
    fn invalid_options() {
        let tab = ButcherTableau::hbvm(1, 1).unwrap();
        let bad = SolverOptions { tolerance: 0.0, ..SolverOptions::default() };
        assert!(hbvm_step(&tab, &problem_harmonic(), &[1.0, 0.0], 0.1, &bad).is_err());
        let bad = SolverOptions { max_iterations: 0, ..SolverOptions::default() };
        assert!(hbvm_step(&tab, &problem_harmonic(), &[1.0, 0.0], 0.1, &bad).is_err());
        assert!(matches!(
            hbvm_step(&tab, &problem_harmonic(), &[1.0], 0.1, &SolverOptions::default()),
            Err(HbvmError::Dimension { .. })
        ));
    }

    #[test]
    fn empty_trajectory() {
        let tab = ButcherTableau::hbvm(1, 1).unwrap();
        let traj = integrate(&tab, &problem_harmonic(), &[1.0, 0.0], 0.1, 0, &SolverOptions::default())
            .unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.states[0], vec![1.0, 0.0]);
        assert_eq!(traj.energy_error, vec![0.0]);
    }

    #[test]
    fn trajectory_bookkeeping() {
        let tab = ButcherTableau::hbvm(2, 2).unwrap();
        let traj = integrate(&tab, &problem_fhp(), &[0.0, 1.0], 0.1, 25, &SolverOptions::default())
            .unwrap();
        assert_eq!(traj.len(), 26);
        assert_eq!(traj.solver_iterations.len(), 26);
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(traj.energy_error[0], 0.0);
        assert!(traj.solver_iterations[1..].iter().all(|&n| n >= 1));
    }

    #[test]
    fn newton_and_fixed_point_agree() {
        let tab = ButcherTableau::hbvm(6, 2).unwrap();
        let sys = problem_fhp();
        let y0 = [0.1, 0.9];
        let a = hbvm_step(&tab, &sys, &y0, 0.16, &SolverOptions::default()).unwrap();
        let b = hbvm_step(&tab, &sys, &y0, 0.16, &SolverOptions::newton()).unwrap();
        assert!(max_abs_diff(&a.y1, &b.y1) <= 1e-12);
    }

    #[test]
    fn explicit_euler_is_not_self_adjoint() {
        let sys = problem_harmonic();
        let euler = |y: &[f64], h: f64| -> Result<Vec<f64>> {
            let f = sys.vector_field(y)?;
            Ok(y.iter().zip(&f).map(|(a, b)| a + h * b).collect())
        };
        let r = adjoint_residual(euler, &[1.0, 0.0], 0.1).unwrap();
        assert!(r >= 1e-3, "{r}");
    }
}
