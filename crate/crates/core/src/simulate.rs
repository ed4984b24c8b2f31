//! Direct computation of the full-model partition function at desk scale.
//!
//! Paths start at `(0, 1)`, make `n` up/down/right steps without vertical
//! backtracking, and may exit each block column at most `M` block rows above
//! or below where they entered it. Step `i` pays `β·1{ω_i=B} - α·1{ω_i=A}`
//! whenever its bond lies in a `B` block of the field.
//!
//! Conventions: blocks are right-closed `(jL, (j+1)L]` in both coordinates;
//! a horizontal bond on a row boundary belongs to the A-block when the two
//! neighbors differ (and to the shared letter otherwise); vertical bonds on
//! the column boundary `x = kL` belong to column `k - 1`, so vertical bonds
//! on the wall `x = 0` fall outside the emulsion and carry no interaction.

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{Letter, MicroDisorder};
use crate::error::{Error, Result};
use crate::field::BlockField;
use crate::lattice::StepDirection;

/// Default step budget of the exact full-model DP.
pub const MAX_FULL_STEPS: u64 = 60;
/// Default block-size budget of the exact full-model DP.
pub const MAX_FULL_BLOCK: u32 = 6;

#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub n: u64,
    pub block_size: u32,
    pub m_cap: u32,
    pub alpha: f64,
    pub beta: f64,
    pub omega: MicroDisorder,
    pub field: BlockField,
}

/// Path-set variants of the direct computation.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct SimOptions {
    /// Cap of `m·L` steps per column, for comparison runs.
    pub per_column_cap: Option<u32>,
    /// Restrict to paths ending on a column boundary (`x ∈ Lℕ`).
    pub boundary_endpoint: bool,
}

impl ModelInstance {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < self.beta.abs() {
            return Err(Error::InvalidSpec(format!(
                "interaction ({}, {}) outside the cone α >= |β|",
                self.alpha, self.beta
            )));
        }
        if self.block_size == 0 || self.block_size as u64 > self.n {
            return Err(Error::InvalidSpec(
                "block size must satisfy 1 <= L <= n".into(),
            ));
        }
        if self.n > MAX_FULL_STEPS || self.block_size > MAX_FULL_BLOCK {
            return Err(Error::BudgetExceeded(format!(
                "full model capped at n <= {MAX_FULL_STEPS}, L <= {MAX_FULL_BLOCK}"
            )));
        }
        self.omega.require_len(self.n as usize)?;
        let l = self.block_size as i64;
        let need_rows = ((self.n as i64 + 2) / l) + 1;
        let need_cols = (self.n as i64) / l + 1;
        if (self.field.height() as i64) < need_rows || (self.field.width() as i64) < need_cols {
            return Err(Error::OutOfField(format!(
                "field needs at least {need_cols} columns and rows to ±{need_rows}"
            )));
        }
        Ok(())
    }
}

/// Block letter of the bond ending at `(x_new, y_new)`, or `None` for wall
/// bonds outside the emulsion.
fn bond_letter(
    field: &BlockField,
    l: i64,
    dir: StepDirection,
    x_new: i64,
    y_new: i64,
) -> Result<Option<Letter>> {
    let (col, row) = match dir {
        StepDirection::Right => {
            let col = (x_new - 1).div_euclid(l);
            if y_new.rem_euclid(l) == 0 {
                let above = y_new.div_euclid(l);
                let lo = field.letter(col, above - 1)?;
                let hi = field.letter(col, above)?;
                return Ok(Some(if lo != hi { Letter::A } else { hi }));
            }
            (col, y_new.div_euclid(l))
        }
        StepDirection::Up => {
            let col = if x_new.rem_euclid(l) == 0 {
                x_new.div_euclid(l) - 1
            } else {
                x_new.div_euclid(l)
            };
            (col, (y_new - 1).div_euclid(l))
        }
        StepDirection::Down => {
            let col = if x_new.rem_euclid(l) == 0 {
                x_new.div_euclid(l) - 1
            } else {
                x_new.div_euclid(l)
            };
            (col, y_new.div_euclid(l))
        }
    };
    if col < 0 {
        return Ok(None);
    }
    Ok(Some(field.letter(col, row)?))
}

/// Block row of the bond that ended at `(x, y)` with direction `dir`.
#[inline]
fn bond_block_row(l: i64, dir: StepDirection, y: i64) -> i64 {
    match dir {
        StepDirection::Right | StepDirection::Up => (y - 1).div_euclid(l),
        StepDirection::Down => y.div_euclid(l),
    }
}

struct FullDp {
    n: usize,
    w: usize,
    y_min: i64,
    range: usize,
    v_off: i64,
    v_range: usize,
    c_range: usize,
}

impl FullDp {
    fn new(n: u64, l: i64, per_column_cap: Option<u32>) -> Self {
        let v_off = (n as i64) / l + 1;
        FullDp {
            n: n as usize,
            w: n as usize,
            y_min: 1 - n as i64,
            range: 2 * n as usize + 1,
            v_off,
            v_range: (2 * v_off + 1) as usize,
            c_range: per_column_cap.map_or(1, |c| c as usize + 1),
        }
    }

    #[inline]
    fn idx(&self, x: usize, y: i64, d: usize, v: i64, c: usize) -> usize {
        ((((x * self.range) + (y - self.y_min) as usize) * 3 + d) * self.v_range
            + (v + self.v_off) as usize)
            * self.c_range
            + c
    }

    fn len(&self) -> usize {
        (self.w + 1) * self.range * 3 * self.v_range * self.c_range
    }
}

/// `ln Z` of the full model. `f64` dynamic programming with per-step
/// renormalization over the state `(x, y, last dir, previous column's exit
/// row, steps in current column)`.
pub fn full_log_partition(instance: &ModelInstance, opts: &SimOptions) -> Result<f64> {
    instance.validate()?;
    let l = instance.block_size as i64;
    let cap = opts.per_column_cap.map(|m| m * instance.block_size);
    let dp = FullDp::new(instance.n, l, cap);
    if dp.len() > 30_000_000 {
        return Err(Error::BudgetExceeded(format!("{} DP states", dp.len())));
    }
    let mut cur = vec![0.0f64; dp.len()];
    let mut next = cur.clone();
    let mut log_scale = 0.0f64;
    let m_cap = instance.m_cap as i64;

    let energy = |i: usize| match instance.omega.letter(i) {
        Letter::B => instance.beta.exp(),
        Letter::A => (-instance.alpha).exp(),
    };

    // First step from (0, 1): v_prev = 0; wall bonds leave the column
    // step-counter at zero.
    for (d, dir) in StepDirection::ALL.iter().enumerate() {
        let (dx, dy) = dir.delta();
        let (nx, ny) = (dx, 1 + dy);
        let letter = bond_letter(&instance.field, l, *dir, nx, ny)?;
        let wgt = match letter {
            Some(Letter::B) => energy(0),
            _ => 1.0,
        };
        let c = usize::from(*dir == StepDirection::Right && cap.is_some());
        cur[dp.idx(nx as usize, ny, d, 0, c)] = wgt;
    }

    for i in 1..dp.n {
        for v in next.iter_mut() {
            *v = 0.0;
        }
        let f = energy(i);
        for x in 0..=i.min(dp.w) {
            for y in (1 - i as i64)..=(1 + i as i64) {
                for last in 0..3 {
                    let last_dir = StepDirection::ALL[last];
                    for v in -dp.v_off..=dp.v_off {
                        for c in 0..dp.c_range {
                            let cell = cur[dp.idx(x, y, last, v, c)];
                            if cell == 0.0 {
                                continue;
                            }
                            for (d, dir) in StepDirection::ALL.iter().enumerate() {
                                if last_dir.reverses(*dir) {
                                    continue;
                                }
                                let (dx, dy) = dir.delta();
                                let (nx, ny) = (x as i64 + dx, y + dy);
                                let mut nv = v;
                                let mut nc = c;
                                if *dir == StepDirection::Right {
                                    if x > 0 && x as i64 % l == 0 {
                                        // Leaving a column: enforce the
                                        // vertical cap on its exit row.
                                        let row = bond_block_row(l, last_dir, y);
                                        if (row - v).abs() > m_cap {
                                            continue;
                                        }
                                        nv = row;
                                    }
                                    if cap.is_some() && x as i64 % l == 0 {
                                        nc = 1;
                                    } else if cap.is_some() {
                                        nc = c + 1;
                                    }
                                } else if cap.is_some() && nx > 0 {
                                    nc = c + 1;
                                }
                                if let Some(limit) = cap {
                                    if nc > limit as usize {
                                        continue;
                                    }
                                }
                                let letter = bond_letter(&instance.field, l, *dir, nx, ny)?;
                                let wgt = match letter {
                                    Some(Letter::B) => f,
                                    _ => 1.0,
                                };
                                next[dp.idx(nx as usize, ny, d, nv, nc)] += cell * wgt;
                            }
                        }
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        let m = cur.iter().cloned().fold(0.0f64, f64::max);
        if m > 1e250 || (m > 0.0 && m < 1e-250) {
            let inv = 1.0 / m;
            for vv in cur.iter_mut() {
                *vv *= inv;
            }
            log_scale += m.ln();
        }
    }

    let mut z = 0.0f64;
    for x in 0..=dp.w {
        if opts.boundary_endpoint && (x == 0 || x as i64 % l != 0) {
            continue;
        }
        for y in dp.y_min..=(1 + dp.n as i64) {
            for last in 0..3 {
                let last_dir = StepDirection::ALL[last];
                for v in -dp.v_off..=dp.v_off {
                    for c in 0..dp.c_range {
                        let cell = cur[dp.idx(x, y, last, v, c)];
                        if cell == 0.0 {
                            continue;
                        }
                        // The final column's exit row also obeys the cap.
                        if x > 0 {
                            let row = bond_block_row(l, last_dir, y);
                            if (row - v).abs() > m_cap {
                                continue;
                            }
                        }
                        z += cell;
                    }
                }
            }
        }
    }
    if z <= 0.0 {
        return Err(Error::EmptyPathSet);
    }
    Ok(z.ln() + log_scale)
}

/// Free energy per monomer `f_n = ln Z / n`.
pub fn finite_free_energy(instance: &ModelInstance, opts: &SimOptions) -> Result<f64> {
    let f = full_log_partition(instance, opts)? / instance.n as f64;
    let bound = 3f64.ln() + instance.alpha.abs();
    if f.abs() > bound + 1e-9 {
        return Err(Error::InvariantViolated(format!(
            "free energy {f} breaks the uniform bound {bound}"
        )));
    }
    Ok(f)
}

/// Exact number of admissible paths (`α = β = 0` route), for validation.
pub fn count_paths(n: u64, block_size: u32, m_cap: u32, opts: &SimOptions) -> Result<BigUint> {
    if n > MAX_FULL_STEPS || block_size == 0 || block_size as u64 > n {
        return Err(Error::BudgetExceeded("count budget exceeded".into()));
    }
    let l = block_size as i64;
    let cap = opts.per_column_cap.map(|m| m * block_size);
    let dp = FullDp::new(n, l, cap);
    let mut cur = vec![BigUint::zero(); dp.len()];
    let mut next = cur.clone();
    let m_cap = m_cap as i64;

    for (d, dir) in StepDirection::ALL.iter().enumerate() {
        let (dx, dy) = dir.delta();
        let c = usize::from(*dir == StepDirection::Right && cap.is_some());
        cur[dp.idx(dx as usize, 1 + dy, d, 0, c)] = BigUint::from(1u32);
    }
    for i in 1..dp.n {
        for v in next.iter_mut() {
            v.set_zero();
        }
        for x in 0..=i.min(dp.w) {
            for y in (1 - i as i64)..=(1 + i as i64) {
                for last in 0..3 {
                    let last_dir = StepDirection::ALL[last];
                    for v in -dp.v_off..=dp.v_off {
                        for c in 0..dp.c_range {
                            let cell = cur[dp.idx(x, y, last, v, c)].clone();
                            if cell.is_zero() {
                                continue;
                            }
                            for (d, dir) in StepDirection::ALL.iter().enumerate() {
                                if last_dir.reverses(*dir) {
                                    continue;
                                }
                                let (dx, dy) = dir.delta();
                                let (nx, ny) = (x as i64 + dx, y + dy);
                                let mut nv = v;
                                let mut nc = c;
                                if *dir == StepDirection::Right {
                                    if x > 0 && x as i64 % l == 0 {
                                        let row = bond_block_row(l, last_dir, y);
                                        if (row - v).abs() > m_cap {
                                            continue;
                                        }
                                        nv = row;
                                    }
                                    if cap.is_some() && x as i64 % l == 0 {
                                        nc = 1;
                                    } else if cap.is_some() {
                                        nc = c + 1;
                                    }
                                } else if cap.is_some() && nx > 0 {
                                    nc = c + 1;
                                }
                                if let Some(limit) = cap {
                                    if nc > limit as usize {
                                        continue;
                                    }
                                }
                                next[dp.idx(nx as usize, ny, d, nv, nc)] += cell.clone();
                            }
                        }
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let mut total = BigUint::zero();
    for x in 0..=dp.w {
        if opts.boundary_endpoint && (x == 0 || x as i64 % l != 0) {
            continue;
        }
        for y in dp.y_min..=(1 + dp.n as i64) {
            for last in 0..3 {
                let last_dir = StepDirection::ALL[last];
                for v in -dp.v_off..=dp.v_off {
                    for c in 0..dp.c_range {
                        let cell = &cur[dp.idx(x, y, last, v, c)];
                        if cell.is_zero() {
                            continue;
                        }
                        if x > 0 {
                            let row = bond_block_row(l, last_dir, y);
                            if (row - v).abs() > m_cap {
                                continue;
                            }
                        }
                        total += cell.clone();
                    }
                }
            }
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub block_size: u32,
    /// `L_n / n`; the mesoscopic regime needs this small.
    pub scale_ratio: f64,
    pub mean: f64,
    pub std: f64,
    pub samples: u32,
    /// `mean - bound` when a variational bound was supplied.
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub variational_bound: Option<f64>,
    /// Set when `L_n/n` fails to shrink along the sweep.
    pub scale_warning: bool,
}

#[derive(Clone, Debug)]
pub struct ConvergenceConfig {
    pub n_list: Vec<u64>,
    pub block_size: u32,
    pub m_cap: u32,
    pub alpha: f64,
    pub beta: f64,
    pub samples: u32,
    pub seed: u64,
}

/// Mean and spread of `f_n` over disorder words for each `n`, next to an
/// optional variational lower bound for matched parameters. Sample `i`
/// always draws word stream `(seed, i)`, so words are nested prefixes
/// across the `n` sweep.
pub fn convergence_report(
    field: &BlockField,
    cfg: &ConvergenceConfig,
    variational_bound: Option<f64>,
) -> Result<ConvergenceReport> {
    if cfg.n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec("n_list must be strictly ascending".into()));
    }
    if cfg.samples == 0 {
        return Err(Error::InvalidSpec("need at least one sample".into()));
    }
    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let values: Vec<f64> = (0..cfg.samples)
            .into_par_iter()
            .map(|i| {
                let omega = MicroDisorder::sample(n as usize, cfg.seed, i as u64);
                let instance = ModelInstance {
                    n,
                    block_size: cfg.block_size,
                    m_cap: cfg.m_cap,
                    alpha: cfg.alpha,
                    beta: cfg.beta,
                    omega,
                    field: field.clone(),
                };
                finite_free_energy(&instance, &SimOptions::default())
            })
            .collect::<Result<_>>()?;
        let count = values.len() as f64;
        let mean = values.iter().sum::<f64>() / count;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
        } else {
            0.0
        };
        rows.push(ConvergenceRow {
            n,
            block_size: cfg.block_size,
            scale_ratio: cfg.block_size as f64 / n as f64,
            mean,
            std,
            samples: cfg.samples,
            gap: variational_bound.map(|b| mean - b),
        });
    }
    let scale_warning = rows
        .windows(2)
        .any(|w| w[1].scale_ratio >= w[0].scale_ratio);
    Ok(ConvergenceReport {
        rows,
        variational_bound,
        scale_warning,
    })
}
