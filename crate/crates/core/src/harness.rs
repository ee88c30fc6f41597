//! Convergence studies and energy-drift experiments.

use rayon::prelude::*;

use crate::error::{HbvmError, Result};
use crate::hamiltonians::CanonicalSystem;
use crate::integrator::{integrate, SolverOptions, Trajectory};
use crate::tableau::ButcherTableau;

/// Steps discarded at the start of a drift series before fitting the slope.
pub const DRIFT_TRANSIENT_STEPS: usize = 10;

/// Relative slack allowed when checking that a horizon is a whole number of steps.
const GRID_TOLERANCE: f64 = 1e-9;

/// Error estimates for a sequence of halved stepsizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub stepsizes: Vec<f64>,
    /// Max-norm difference between consecutive levels on the coarser grid.
    pub errors: Vec<f64>,
    /// `log2(errors[i] / errors[i+1])`.
    pub orders: Vec<f64>,
    /// Integration horizon shared by all levels.
    pub t_end: f64,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,error,order\n");
        for (i, (h, e)) in self.stepsizes.iter().zip(&self.errors).enumerate() {
            let order = if i == 0 { String::new() } else { format!("{:.4}", self.orders[i - 1]) };
            out.push_str(&format!("{h:e},{e:.6e},{order}\n"));
        }
        out
    }
}

/// Number of steps of size `h` that make up `t_end`, if it is a whole number.
pub fn steps_for_horizon(t_end: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !(t_end > 0.0) {
        return Err(HbvmError::GridMismatch { t_end, h });
    }
    let ratio = t_end / h;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > GRID_TOLERANCE * ratio.max(1.0) {
        return Err(HbvmError::GridMismatch { t_end, h });
    }
    Ok(n as usize)
}

/// Largest whole multiple of `h` not exceeding `t_end` (at least one step).
pub fn snap_horizon(t_end: f64, h: f64) -> f64 {
    let ratio = t_end / h;
    let n = if (ratio - ratio.round()).abs() <= GRID_TOLERANCE * ratio.max(1.0) {
        ratio.round()
    } else {
        ratio.floor()
    };
    n.max(1.0) * h
}

/// Integrates with `h0, h0/2, ..., h0/2^(levels-1)` (plus one extra halving
/// used as the reference for the finest level) and estimates the error of
/// each level as the max-norm difference from the next finer solution at the
/// grid points they share.
pub fn convergence_study(
    tab: &ButcherTableau,
    system: &dyn CanonicalSystem,
    y0: &[f64],
    h0: f64,
    levels: usize,
    t_end: f64,
    opts: &SolverOptions,
) -> Result<ConvergenceReport> {
    if levels < 2 {
        return Err(HbvmError::InvalidArgument(format!(
            "a convergence study needs at least 2 levels, got {levels}"
        )));
    }
    let n0 = steps_for_horizon(t_end, h0)?;
    let stepsizes: Vec<f64> = (0..=levels).map(|i| h0 / f64::from(1u32 << i)).collect();

    let finals: Vec<Result<Trajectory>> = stepsizes
        .par_iter()
        .enumerate()
        .map(|(i, &h)| integrate(tab, system, y0, h, n0 << i, opts))
        .collect();
    let trajectories = finals.into_iter().collect::<Result<Vec<_>>>()?;

    let errors: Vec<f64> = (0..levels)
        .map(|i| {
            let coarse = &trajectories[i];
            let fine = &trajectories[i + 1];
            coarse
                .states
                .iter()
                .enumerate()
                .map(|(n, yc)| {
                    yc.iter()
                        .zip(&fine.states[2 * n])
                        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let orders = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();

    Ok(ConvergenceReport {
        stepsizes: stepsizes[..levels].to_vec(),
        errors,
        orders,
        t_end,
    })
}

/// Signed energy deviation along a long run, with its fitted linear trend.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub times: Vec<f64>,
    /// `H(y_n) - H(y_0)`.
    pub deviation: Vec<f64>,
    /// Least-squares slope of `deviation` against time, ignoring the first
    /// [`DRIFT_TRANSIENT_STEPS`] steps.
    pub slope: f64,
    pub max_abs_deviation: f64,
}

impl DriftReport {
    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.times.len() * 40);
        out.push_str("step,time,energy_error\n");
        for (n, (t, d)) in self.times.iter().zip(&self.deviation).enumerate() {
            out.push_str(&format!("{n},{t},{d:.6e}\n"));
        }
        out
    }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        sxy += dx * (y[i] - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

pub fn drift_experiment(
    tab: &ButcherTableau,
    system: &dyn CanonicalSystem,
    y0: &[f64],
    h: f64,
    n_steps: usize,
    opts: &SolverOptions,
) -> Result<DriftReport> {
    let traj = integrate(tab, system, y0, h, n_steps, opts)?;
    let h0 = system.energy(y0)?;
    let deviation = traj
        .states
        .iter()
        .map(|y| system.energy(y).map(|e| e - h0))
        .collect::<Result<Vec<_>>>()?;
    let skip = DRIFT_TRANSIENT_STEPS.min(traj.times.len().saturating_sub(2));
    let slope = least_squares_slope(&traj.times[skip..], &deviation[skip..]);
    let max_abs_deviation = deviation.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(DriftReport { times: traj.times, deviation, slope, max_abs_deviation })
}
