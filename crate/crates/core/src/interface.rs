//! Quenched free energy of a copolymer pinned near one flat AB-interface.
//!
//! The interface is the line `y = 0`, with solvent `A` filling the closed
//! upper halfplane (the interface belongs to the `A` side) and solvent `B`
//! the open lower halfplane. Paths make `μL` steps from `(0,0)` to `(L,0)`;
//! a step pays `β` when its monomer is `B` and `-α` when it is `A`, but only
//! if the step lies strictly below the interface.
//!
//! Per-bond rule for "strictly below": a horizontal step at height `y`
//! counts iff `y <= -1`; a vertical step between heights `y-1` and `y`
//! counts iff `y <= 0`. This makes the `μ = 1` path (all right steps along
//! the interface) energy-free, as it must be.

use num_rational::Rational64;
use num_traits::One;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{Letter, MicroDisorder};
use crate::error::{Error, Result};
use crate::lattice::StepDirection;

/// Parameters of one single-interface evaluation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InterfaceSpec {
    width: u32,
    steps: u64,
    pub alpha: f64,
    pub beta: f64,
}

impl InterfaceSpec {
    pub fn new(width: u32, mu: Rational64, alpha: f64, beta: f64) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidSpec("width must be positive".into()));
        }
        if alpha < beta.abs() {
            return Err(Error::InvalidSpec(format!(
                "interaction (α, β) = ({alpha}, {beta}) outside the cone α >= |β|"
            )));
        }
        let steps = mu * Rational64::from_integer(width as i64);
        if mu < Rational64::one() || !steps.is_integer() {
            return Err(Error::InvalidSpec(format!("μ = {mu} must be >= 1 with μL integer")));
        }
        let steps = steps.to_integer() as u64;
        if !(steps - width as u64).is_multiple_of(2) {
            return Err(Error::InvalidSpec(format!(
                "μL - L must be even, got μ = {mu}, L = {width}"
            )));
        }
        Ok(InterfaceSpec {
            width,
            steps,
            alpha,
            beta,
        })
    }

    pub fn from_counts(width: u32, steps: u64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(
            width,
            Rational64::new(steps as i64, width as i64),
            alpha,
            beta,
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn mu(&self) -> f64 {
        self.steps as f64 / self.width as f64
    }

    pub fn mu_rational(&self) -> Rational64 {
        Rational64::new(self.steps as i64, self.width as i64)
    }
}

/// Does the step ending at height `y` lie strictly below the interface?
#[inline]
pub(crate) fn step_below(dir: StepDirection, y_new: i64) -> bool {
    match dir {
        StepDirection::Right | StepDirection::Down => y_new <= -1,
        StepDirection::Up => y_new <= 0,
    }
}

/// `ln Z` of the single-interface model for a fixed disorder word.
///
/// Dynamic programming over `(x, y, last step)`; the step index rides along
/// because the weights depend on the monomer letter. Values are renormalized
/// per step so long words stay in range.
pub fn interface_log_partition(omega: &MicroDisorder, spec: &InterfaceSpec) -> Result<f64> {
    omega.require_len(spec.steps as usize)?;
    let w = spec.width as usize;
    let half = ((spec.steps - spec.width as u64) / 2) as i64;
    let y_min = -half;
    let y_max = half;
    let range = (y_max - y_min + 1) as usize;
    let idx = |x: usize, y: i64, d: usize| (x * range + (y - y_min) as usize) * 3 + d;
    let mut cur = vec![0.0f64; (w + 1) * range * 3];
    let mut next = cur.clone();
    let mut log_scale = 0.0f64;

    // exp(β) for a B monomer, exp(-α) for an A monomer, applied below the line.
    let below_factor = |i: usize| match omega.letter(i) {
        Letter::B => spec.beta.exp(),
        Letter::A => (-spec.alpha).exp(),
    };

    for (d, dir) in StepDirection::ALL.iter().enumerate() {
        let (dx, dy) = dir.delta();
        if dx <= w as i64 && (y_min..=y_max).contains(&dy) {
            let mut v = 1.0;
            if step_below(*dir, dy) {
                v *= below_factor(0);
            }
            cur[idx(dx as usize, dy, d)] = v;
        }
    }
    for i in 1..spec.steps as usize {
        for v in next.iter_mut() {
            *v = 0.0;
        }
        let f = below_factor(i);
        for x in 0..=w {
            for y in y_min..=y_max {
                for last in 0..3 {
                    let c = cur[idx(x, y, last)];
                    if c == 0.0 {
                        continue;
                    }
                    for (d, dir) in StepDirection::ALL.iter().enumerate() {
                        if StepDirection::ALL[last].reverses(*dir) {
                            continue;
                        }
                        let (dx, dy) = dir.delta();
                        let (nx, ny) = (x as i64 + dx, y + dy);
                        if nx > w as i64 || ny < y_min || ny > y_max {
                            continue;
                        }
                        let wgt = if step_below(*dir, ny) { f } else { 1.0 };
                        next[idx(nx as usize, ny, d)] += c * wgt;
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        let m = cur.iter().cloned().fold(0.0f64, f64::max);
        if m > 1e250 || (m > 0.0 && m < 1e-250) {
            let inv = 1.0 / m;
            for v in cur.iter_mut() {
                *v *= inv;
            }
            log_scale += m.ln();
        }
    }
    let z: f64 = (0..3).map(|d| cur[idx(w, 0, d)]).sum();
    if z <= 0.0 {
        return Err(Error::EmptyPathSet);
    }
    Ok(z.ln() + log_scale)
}

/// Free energy per step `φ^ω_L(μ) = ln Z / (μL)`.
pub fn phi_omega(omega: &MicroDisorder, spec: &InterfaceSpec) -> Result<f64> {
    Ok(interface_log_partition(omega, spec)? / spec.steps as f64)
}

/// One pass over step counts: `ln Z` at every admissible `μ` node for a
/// fixed word, indexed by `k` with `μL = L + 2k`. Shares one dynamic
/// program across the whole `μ`-grid.
pub(crate) fn interface_sweep(
    omega: &MicroDisorder,
    width: u32,
    max_steps: u64,
    alpha: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    omega.require_len(max_steps as usize)?;
    let w = width as usize;
    let half = ((max_steps - width as u64) / 2) as i64;
    let (y_min, y_max) = (-half, half);
    let range = (y_max - y_min + 1) as usize;
    let idx = |x: usize, y: i64, d: usize| (x * range + (y - y_min) as usize) * 3 + d;
    let mut cur = vec![0.0f64; (w + 1) * range * 3];
    let mut next = cur.clone();
    let mut log_scale = 0.0f64;
    let below_factor = |i: usize| match omega.letter(i) {
        Letter::B => beta.exp(),
        Letter::A => (-alpha).exp(),
    };
    let mut out = Vec::with_capacity(((max_steps - width as u64) / 2 + 1) as usize);
    for (d, dir) in StepDirection::ALL.iter().enumerate() {
        let (dx, dy) = dir.delta();
        if dx <= w as i64 && (y_min..=y_max).contains(&dy) {
            let wgt = if step_below(*dir, dy) { below_factor(0) } else { 1.0 };
            cur[idx(dx as usize, dy, d)] = wgt;
        }
    }
    let record = |cur: &[f64], step: u64, log_scale: f64, out: &mut Vec<f64>| {
        if step >= width as u64 && (step - width as u64).is_multiple_of(2) {
            let z: f64 = (0..3).map(|d| cur[idx(w, 0, d)]).sum();
            out.push(if z > 0.0 { z.ln() + log_scale } else { f64::NEG_INFINITY });
        }
    };
    record(&cur, 1, log_scale, &mut out);
    for i in 1..max_steps as usize {
        for v in next.iter_mut() {
            *v = 0.0;
        }
        let f = below_factor(i);
        for x in 0..=w {
            for y in y_min..=y_max {
                for last in 0..3 {
                    let c = cur[idx(x, y, last)];
                    if c == 0.0 {
                        continue;
                    }
                    for (d, dir) in StepDirection::ALL.iter().enumerate() {
                        if StepDirection::ALL[last].reverses(*dir) {
                            continue;
                        }
                        let (dx, dy) = dir.delta();
                        let (nx, ny) = (x as i64 + dx, y + dy);
                        if nx > w as i64 || ny < y_min || ny > y_max {
                            continue;
                        }
                        let wgt = if step_below(*dir, ny) { f } else { 1.0 };
                        next[idx(nx as usize, ny, d)] += c * wgt;
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        let m = cur.iter().cloned().fold(0.0f64, f64::max);
        if m > 1e250 || (m > 0.0 && m < 1e-250) {
            let inv = 1.0 / m;
            for v in cur.iter_mut() {
                *v *= inv;
            }
            log_scale += m.ln();
        }
        record(&cur, i as u64 + 1, log_scale, &mut out);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhiEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u32,
    pub seed: u64,
}

/// Monte-Carlo average of `φ^ω_L(μ)` over disorder words.
///
/// Sample `i` draws its word from stream `(seed, i)`, so the estimate is
/// identical however the samples are scheduled.
pub fn phi_mean(spec: &InterfaceSpec, n_samples: u32, seed: u64) -> Result<PhiEstimate> {
    if n_samples < 2 {
        return Err(Error::InvalidSpec("need at least 2 samples".into()));
    }
    let values: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let omega = MicroDisorder::sample(spec.steps as usize, seed, i as u64);
            phi_omega(&omega, spec)
        })
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(PhiEstimate {
        mean,
        std_error: (var / n).sqrt(),
        n_samples,
        seed,
    })
}

/// Like [`phi_mean`] but also exposes the raw per-sample values.
pub fn phi_samples(spec: &InterfaceSpec, n_samples: u32, seed: u64) -> Result<Vec<f64>> {
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let omega = MicroDisorder::sample(spec.steps as usize, seed, i as u64);
            phi_omega(&omega, spec)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MuScanRow {
    pub mu: f64,
    pub mean: f64,
    pub std_error: f64,
    pub mu_phi: f64,
    pub mu_phi_se: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MuScan {
    pub rows: Vec<MuScanRow>,
    /// Midpoint concavity of `μ φ_L(μ)` holds within 2 standard errors.
    pub concave_ok: bool,
    /// `μ φ_L(μ)` increases along the grid within 2 standard errors.
    pub increasing_ok: bool,
    pub max_concavity_violation: f64,
    pub max_decrease: f64,
}

/// Scan `μ ↦ μ φ_L(μ)` over a grid and check concavity and monotonicity.
///
/// All grid points share disorder substreams (common random numbers), which
/// cancels most of the sampling noise in the differences being tested.
pub fn mu_concavity_scan(
    width: u32,
    mu_grid: &[Rational64],
    alpha: f64,
    beta: f64,
    n_samples: u32,
    seed: u64,
) -> Result<MuScan> {
    if mu_grid.len() < 2 {
        return Err(Error::InvalidSpec("grid needs at least two points".into()));
    }
    let mut specs = Vec::with_capacity(mu_grid.len());
    for pair in mu_grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidSpec("grid must be strictly ascending".into()));
        }
    }
    for &mu in mu_grid {
        specs.push(InterfaceSpec::new(width, mu, alpha, beta)?);
    }
    let rows: Vec<MuScanRow> = specs
        .iter()
        .map(|spec| {
            let est = phi_mean(spec, n_samples, seed)?;
            Ok(MuScanRow {
                mu: spec.mu(),
                mean: est.mean,
                std_error: est.std_error,
                mu_phi: spec.mu() * est.mean,
                mu_phi_se: spec.mu() * est.std_error,
            })
        })
        .collect::<Result<_>>()?;

    let mut max_violation = 0.0f64;
    let mut concave_ok = true;
    for w in rows.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        // b.mu = λ a.mu + (1-λ) c.mu
        let lambda = (c.mu - b.mu) / (c.mu - a.mu);
        let chord = lambda * a.mu_phi + (1.0 - lambda) * c.mu_phi;
        let violation = chord - b.mu_phi;
        let tol = 2.0
            * ((lambda * a.mu_phi_se).powi(2)
                + b.mu_phi_se.powi(2)
                + ((1.0 - lambda) * c.mu_phi_se).powi(2))
            .sqrt();
        max_violation = max_violation.max(violation);
        if violation > tol {
            concave_ok = false;
        }
    }
    let mut max_decrease = 0.0f64;
    let mut increasing_ok = true;
    for w in rows.windows(2) {
        let drop = w[0].mu_phi - w[1].mu_phi;
        let tol = 2.0 * (w[0].mu_phi_se.powi(2) + w[1].mu_phi_se.powi(2)).sqrt();
        max_decrease = max_decrease.max(drop);
        if drop > tol {
            increasing_ok = false;
        }
    }
    Ok(MuScan {
        rows,
        concave_ok,
        increasing_ok,
        max_concavity_violation: max_violation,
        max_decrease,
    })
}
