//! Reference implementations by exhaustive enumeration.
//!
//! Everything here recomputes partition sums path by path, with none of the
//! dynamic-programming machinery of the production routines, and exists to
//! cross-validate them (unit tests, acceptance tests, and the `selfcheck`
//! command). Keep these slow and obvious.

use num_rational::Rational64;

use crate::column::{bind_to_width, geometry, ColumnType};
use crate::disorder::{Letter, MicroDisorder};
use crate::error::{Error, Result};
use crate::field::FrequencyMeasure;
use crate::interface::InterfaceSpec;
use crate::lattice::{enumerate_crossings, CrossingSpec, LatticePath, StepDirection};
use crate::simulate::{ModelInstance, SimOptions};
use crate::solver::PsiTable;

fn log_sum_exp(terms: &[f64]) -> Result<f64> {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if terms.is_empty() || !max.is_finite() {
        return Err(Error::EmptyPathSet);
    }
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Single-interface `ln Z` by explicit path enumeration.
pub fn interface_log_partition_brute(omega: &MicroDisorder, spec: &InterfaceSpec) -> Result<f64> {
    omega.require_len(spec.steps() as usize)?;
    let crossing = CrossingSpec::from_counts(spec.width(), spec.steps(), 0)?;
    let paths = enumerate_crossings(&crossing, None, Some(24))?;
    let terms: Vec<f64> = paths
        .iter()
        .map(|path| {
            let mut h = 0.0;
            let mut y = path.start.1;
            for (i, step) in path.steps.iter().enumerate() {
                let (_, dy) = step.delta();
                y += dy;
                // Strictly below the interface: horizontal and downward
                // steps by their height, upward steps by their top.
                let below = match step {
                    StepDirection::Right | StepDirection::Down => y <= -1,
                    StepDirection::Up => y <= 0,
                };
                if below {
                    h += match omega.letter(i) {
                        Letter::B => spec.beta,
                        Letter::A => -spec.alpha,
                    };
                }
            }
            h
        })
        .collect();
    log_sum_exp(&terms)
}

/// Block row of the bond `(from, to)` of a column with height-only disorder,
/// resolving row boundaries by the A-side convention.
fn column_bond_letter_brute(
    theta: &ColumnType,
    width: u32,
    from: (i64, i64),
    to: (i64, i64),
) -> Letter {
    let l = width as i64;
    if from.1 == to.1 {
        // Horizontal bond at height y.
        let y = to.1;
        if y.rem_euclid(l) == 0 {
            let above = y.div_euclid(l);
            let (a, b) = (theta.chi.letter(above - 1), theta.chi.letter(above));
            if a != b {
                Letter::A
            } else {
                b
            }
        } else {
            theta.chi.letter(y.div_euclid(l))
        }
    } else {
        let top = from.1.max(to.1);
        theta.chi.letter((top - 1).div_euclid(l))
    }
}

/// Direct column free energy by explicit enumeration of the crossing set.
pub fn psi_quenched_column_brute(
    omega: &MicroDisorder,
    theta: &ColumnType,
    u: Rational64,
    width: u32,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let geo = geometry(theta)?;
    let bound = bind_to_width(theta, u, width)?;
    omega.require_len(bound.steps as usize)?;
    let crossing = CrossingSpec::from_counts(width, bound.steps, bound.y_exit - bound.y_entry)?;
    let paths = enumerate_crossings(&crossing, None, Some(24))?;
    let l = width as i64;
    let interface_heights = geo.interfaces.height_set();
    let touches = |path: &LatticePath| {
        let mut y = bound.y_entry;
        let on = |y: i64| y.rem_euclid(l) == 0 && interface_heights.contains(&y.div_euclid(l));
        if on(y) {
            return true;
        }
        for step in &path.steps {
            y += step.delta().1;
            if on(y) {
                return true;
            }
        }
        false
    };
    let mut terms = Vec::new();
    for path in &paths {
        if geo.k_theta == 0 {
            let reaches = touches(path);
            if (theta.x == 1 && reaches) || (theta.x == 2 && !reaches) {
                continue;
            }
        }
        let mut h = 0.0;
        let mut pos = (0i64, bound.y_entry);
        for (i, step) in path.steps.iter().enumerate() {
            let (dx, dy) = step.delta();
            let to = (pos.0 + dx, pos.1 + dy);
            if column_bond_letter_brute(theta, width, pos, to) == Letter::B {
                h += match omega.letter(i) {
                    Letter::B => beta,
                    Letter::A => -alpha,
                };
            }
            pos = to;
        }
        terms.push(h);
    }
    Ok(log_sum_exp(&terms)? / bound.steps as f64)
}

/// All `n`-step up/down/right walks from `(0, 1)` without vertical
/// backtracking, visited via a step-word odometer.
fn walk_words(n: usize, mut visit: impl FnMut(&[StepDirection])) {
    let mut word = vec![StepDirection::Right; n];
    loop {
        let ok = word
            .windows(2)
            .all(|w| !w[0].reverses(w[1]));
        if ok {
            visit(&word);
        }
        // Odometer in base 3: Right -> Up -> Down.
        let mut pos = n;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            word[pos] = match word[pos] {
                StepDirection::Right => StepDirection::Up,
                StepDirection::Up => StepDirection::Down,
                StepDirection::Down => {
                    word[pos] = StepDirection::Right;
                    continue;
                }
            };
            break;
        }
    }
}

/// Full-model `ln Z` by exhaustive enumeration (use tiny `n` only).
pub fn full_log_partition_brute(instance: &ModelInstance, opts: &SimOptions) -> Result<f64> {
    instance.validate()?;
    if instance.n > 12 {
        return Err(Error::BudgetExceeded("brute-force full model needs n <= 12".into()));
    }
    let l = instance.block_size as i64;
    let n = instance.n as usize;
    let m_cap = instance.m_cap as i64;
    let cap = opts.per_column_cap.map(|m| (m * instance.block_size) as usize);
    let mut terms = Vec::new();
    let mut err = None;
    walk_words(n, |word| {
        if err.is_some() {
            return;
        }
        match walk_energy(instance, opts, word, l, m_cap, cap) {
            Ok(Some(h)) => terms.push(h),
            Ok(None) => {}
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    log_sum_exp(&terms)
}

/// Energy of one admissible walk, or `None` when the walk violates the
/// vertical cap / endpoint / per-column restrictions.
fn walk_energy(
    instance: &ModelInstance,
    opts: &SimOptions,
    word: &[StepDirection],
    l: i64,
    m_cap: i64,
    cap: Option<usize>,
) -> Result<Option<f64>> {
    let mut pos = (0i64, 1i64);
    let mut h = 0.0;
    let mut v_prev = 0i64;
    let mut bonds_in_column = 0usize;
    let mut last_bond_row: Option<i64> = None;
    for (i, step) in word.iter().enumerate() {
        let (dx, dy) = step.delta();
        let to = (pos.0 + dx, pos.1 + dy);
        // Column bookkeeping happens when a right step leaves x = kL.
        if *step == StepDirection::Right && pos.0 > 0 && pos.0 % l == 0 {
            let row = last_bond_row.expect("a visited column always has a bond");
            if (row - v_prev).abs() > m_cap {
                return Ok(None);
            }
            v_prev = row;
        }
        if let Some(limit) = cap {
            if *step == StepDirection::Right && pos.0 % l == 0 {
                bonds_in_column = 1;
            } else if !(pos.0 == 0 && *step != StepDirection::Right) {
                bonds_in_column += 1;
            }
            if bonds_in_column > limit {
                return Ok(None);
            }
        }
        // Energy: block letter of the bond.
        let letter = full_bond_letter(instance, l, pos, to)?;
        if letter == Some(Letter::B) {
            h += match instance.omega.letter(i) {
                Letter::B => instance.beta,
                Letter::A => -instance.alpha,
            };
        }
        // v-row of this bond.
        let top = pos.1.max(to.1);
        last_bond_row = Some((top - 1).div_euclid(l));
        pos = to;
    }
    if pos.0 > 0 {
        let row = last_bond_row.unwrap();
        if (row - v_prev).abs() > m_cap {
            return Ok(None);
        }
    }
    if opts.boundary_endpoint && (pos.0 == 0 || pos.0 % l != 0) {
        return Ok(None);
    }
    Ok(Some(h))
}

fn full_bond_letter(
    instance: &ModelInstance,
    l: i64,
    from: (i64, i64),
    to: (i64, i64),
) -> Result<Option<Letter>> {
    if from.1 == to.1 {
        // Horizontal: column of the interior, row by the A-side convention.
        let col = from.0.div_euclid(l);
        let y = to.1;
        if y.rem_euclid(l) == 0 {
            let above = y.div_euclid(l);
            let (a, b) = (
                instance.field.letter(col, above - 1)?,
                instance.field.letter(col, above)?,
            );
            return Ok(Some(if a != b { Letter::A } else { b }));
        }
        Ok(Some(instance.field.letter(col, y.div_euclid(l))?))
    } else {
        // Vertical: right-closed column; the wall x = 0 is outside.
        let x = from.0;
        let col = if x.rem_euclid(l) == 0 {
            x.div_euclid(l) - 1
        } else {
            x.div_euclid(l)
        };
        if col < 0 {
            return Ok(None);
        }
        let top = from.1.max(to.1);
        Ok(Some(instance.field.letter(col, (top - 1).div_euclid(l))?))
    }
}

/// Dense per-atom grid search of the ratio objective; the validation route
/// for the Dinkelbach solver. Grids of `points` budgets per atom.
pub fn ratio_grid_search(
    rho: &FrequencyMeasure,
    table: &PsiTable,
    points: usize,
) -> Result<f64> {
    let atoms = rho.atoms.len();
    if atoms == 0 || atoms > 3 {
        return Err(Error::InvalidSpec(
            "grid search is limited to 1..=3 atoms".into(),
        ));
    }
    if table.curves.len() != atoms {
        return Err(Error::InvalidSpec("table does not match the measure".into()));
    }
    let grids: Vec<Vec<f64>> = table
        .curves
        .iter()
        .map(|c| {
            (0..points)
                .map(|k| c.t_theta + (c.m - c.t_theta) * k as f64 / (points - 1) as f64)
                .collect()
        })
        .collect();
    let weights: Vec<f64> = rho.atoms.iter().map(|(_, w)| *w).collect();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; atoms];
    loop {
        let mut num = 0.0;
        let mut den = 0.0;
        for a in 0..atoms {
            let u = grids[a][idx[a]];
            num += weights[a] * table.curves[a].upsi(u);
            den += weights[a] * u;
        }
        best = best.max(num / den);
        // Odometer.
        let mut pos = atoms;
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < points {
                break;
            }
            idx[pos] = 0;
        }
    }
}
