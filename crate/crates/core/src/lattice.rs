//! Directed up/down/right paths crossing a column of width `L`.
//!
//! A crossing with parameters `(u, l)` makes `uL` steps from `(0, 0)` to
//! `(L, lL)`. Self-avoidance for these walks reduces to a local rule: a
//! vertical step never directly reverses the previous vertical step. Counts
//! are exact (`BigUint`); entropies per step are `ln |W| / (uL)`.

use num_bigint::BigUint;
use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Default exhaustive-enumeration cap, in steps.
pub const DEFAULT_ENUM_CAP: u64 = 18;
/// Hard cap for the exact dynamic-programming count, in steps.
pub const MAX_DP_STEPS: u64 = 512;

/// Exact path count.
pub type PathCount = BigUint;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum StepDirection {
    Right,
    Up,
    Down,
}

impl StepDirection {
    pub const ALL: [StepDirection; 3] = [StepDirection::Right, StepDirection::Up, StepDirection::Down];

    #[inline]
    pub fn delta(self) -> (i64, i64) {
        match self {
            StepDirection::Right => (1, 0),
            StepDirection::Up => (0, 1),
            StepDirection::Down => (0, -1),
        }
    }

    /// Would taking `next` after `self` retrace the same edge?
    #[inline]
    pub fn reverses(self, next: StepDirection) -> bool {
        matches!(
            (self, next),
            (StepDirection::Up, StepDirection::Down) | (StepDirection::Down, StepDirection::Up)
        )
    }

    pub fn to_char(self) -> char {
        match self {
            StepDirection::Right => 'R',
            StepDirection::Up => 'U',
            StepDirection::Down => 'D',
        }
    }
}

/// Crossing parameters `(L, u, l)` with `uL` steps and net rise `lL`.
///
/// Admissible parameters satisfy `uL - L - |l|L ∈ 2ℕ₀`: what remains after
/// the `L` right steps and the `|l|L` net vertical steps must pair up into
/// excursions.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct CrossingSpec {
    width: u32,
    steps: u64,
    rise: i64,
}

impl CrossingSpec {
    /// Build from integer data: column width `L`, total steps `uL`, net rise `lL`.
    pub fn from_counts(width: u32, steps: u64, rise: i64) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidSpec("width must be positive".into()));
        }
        let min = width as u64 + rise.unsigned_abs();
        if steps < min || !(steps - min).is_multiple_of(2) {
            return Err(Error::InvalidSpec(format!(
                "steps {steps} not in {{L + |rise| + 2k}} for width {width}, rise {rise}"
            )));
        }
        Ok(CrossingSpec { width, steps, rise })
    }

    /// Build from the per-width-unit rationals `u` (steps) and `l` (rise).
    pub fn new(width: u32, u: Rational64, l: Rational64) -> Result<Self> {
        let lw = Rational64::from_integer(width as i64);
        let steps = u * lw;
        let rise = l * lw;
        if !steps.is_integer() || !rise.is_integer() {
            return Err(Error::InvalidSpec(format!(
                "u*L and l*L must be integers, got {u}*{width} and {l}*{width}"
            )));
        }
        let steps = steps.to_integer();
        if steps < 0 {
            return Err(Error::InvalidSpec("negative step count".into()));
        }
        Self::from_counts(width, steps as u64, rise.to_integer())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn rise(&self) -> i64 {
        self.rise
    }

    pub fn u(&self) -> f64 {
        self.steps as f64 / self.width as f64
    }

    pub fn l(&self) -> f64 {
        self.rise as f64 / self.width as f64
    }

    pub fn u_rational(&self) -> Rational64 {
        Rational64::new(self.steps as i64, self.width as i64)
    }

    pub fn l_rational(&self) -> Rational64 {
        Rational64::new(self.rise, self.width as i64)
    }

    pub fn mirrored(&self) -> CrossingSpec {
        CrossingSpec {
            width: self.width,
            steps: self.steps,
            rise: -self.rise,
        }
    }

    /// Number of up steps (down steps analogous); both are fixed by `(L, uL, lL)`.
    fn up_down(&self) -> (i64, i64) {
        let vertical = (self.steps - self.width as u64) as i64;
        let up = (vertical + self.rise) / 2;
        (up, vertical - up)
    }
}

/// Vertical corridor `(B0·L, B1·L)` confining all interior sites of a crossing.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct VerticalCorridor {
    /// Lower bound `B0`, in width units.
    #[serde(with = "crate::column::ratio_serde")]
    pub lo: Rational64,
    /// Upper bound `B1`, in width units.
    #[serde(with = "crate::column::ratio_serde")]
    pub hi: Rational64,
}

impl VerticalCorridor {
    pub fn new(lo: Rational64, hi: Rational64) -> Self {
        VerticalCorridor { lo, hi }
    }

    /// Corridor bounds in lattice units for the given spec, after validation.
    pub fn bounds_for(&self, spec: &CrossingSpec) -> Result<(i64, i64)> {
        let w = Rational64::from_integer(spec.width as i64);
        let lo = self.lo * w;
        let hi = self.hi * w;
        if !lo.is_integer() || !hi.is_integer() {
            return Err(Error::InvalidSpec(
                "corridor bounds must be multiples of 1/L".into(),
            ));
        }
        if self.hi - self.lo < Rational64::one() {
            return Err(Error::InvalidSpec("corridor must satisfy B1 - B0 >= 1".into()));
        }
        let l = spec.l_rational();
        if self.hi < l.max(Rational64::zero()) || self.lo > l.min(Rational64::zero()) {
            return Err(Error::InvalidSpec(
                "corridor must satisfy B1 >= max(0,l) and B0 <= min(0,l)".into(),
            ));
        }
        Ok((lo.to_integer(), hi.to_integer()))
    }
}

/// A concrete crossing path: start site plus the step word.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LatticePath {
    pub start: (i64, i64),
    pub steps: Vec<StepDirection>,
}

impl LatticePath {
    pub fn end(&self) -> (i64, i64) {
        let mut p = self.start;
        for s in &self.steps {
            let (dx, dy) = s.delta();
            p = (p.0 + dx, p.1 + dy);
        }
        p
    }

    /// All sites visited, start included.
    pub fn sites(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut p = self.start;
        out.push(p);
        for s in &self.steps {
            let (dx, dy) = s.delta();
            p = (p.0 + dx, p.1 + dy);
            out.push(p);
        }
        out
    }
}

impl fmt::Display for LatticePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            write!(f, "{}", s.to_char())?;
        }
        Ok(())
    }
}

/// Exhaustively list `W_L(u, l)`, optionally confined to a corridor.
///
/// The search is a depth-first walk with feasibility pruning, so the cost is
/// proportional to the number of viable prefixes rather than `3^(uL)`.
pub fn enumerate_crossings(
    spec: &CrossingSpec,
    corridor: Option<&VerticalCorridor>,
    cap: Option<u64>,
) -> Result<Vec<LatticePath>> {
    let cap = cap.unwrap_or(DEFAULT_ENUM_CAP);
    if spec.steps > cap {
        return Err(Error::CapExceeded {
            steps: spec.steps,
            cap,
        });
    }
    let bounds = corridor.map(|c| c.bounds_for(spec)).transpose()?;
    let mut out = Vec::new();
    let mut prefix: Vec<StepDirection> = Vec::with_capacity(spec.steps as usize);
    dfs(spec, bounds, 0, 0, None, &mut prefix, &mut out);
    Ok(out)
}

fn dfs(
    spec: &CrossingSpec,
    bounds: Option<(i64, i64)>,
    x: i64,
    y: i64,
    last: Option<StepDirection>,
    prefix: &mut Vec<StepDirection>,
    out: &mut Vec<LatticePath>,
) {
    let taken = prefix.len() as u64;
    if taken == spec.steps {
        if x == spec.width as i64 && y == spec.rise {
            out.push(LatticePath {
                start: (0, 0),
                steps: prefix.clone(),
            });
        }
        return;
    }
    let rem = (spec.steps - taken) as i64;
    for dir in StepDirection::ALL {
        if let Some(prev) = last {
            if prev.reverses(dir) {
                continue;
            }
        }
        let (dx, dy) = dir.delta();
        let (nx, ny) = (x + dx, y + dy);
        let need_x = spec.width as i64 - nx;
        let need_y = (spec.rise - ny).abs();
        if need_x < 0 || need_x + need_y > rem - 1 || (rem - 1 - need_x - need_y) % 2 != 0 {
            continue;
        }
        if let Some((lo, hi)) = bounds {
            // Interior sites only; the final site is exempt.
            if taken + 1 < spec.steps && (ny <= lo || ny >= hi) {
                continue;
            }
        }
        prefix.push(dir);
        dfs(spec, bounds, nx, ny, Some(dir), prefix, out);
        prefix.pop();
    }
}

/// Exact `|W_L(u, l)|` by dynamic programming over `(x, y, last step)`.
pub fn count_crossings_dp(
    spec: &CrossingSpec,
    corridor: Option<&VerticalCorridor>,
) -> Result<PathCount> {
    if spec.steps > MAX_DP_STEPS {
        return Err(Error::BudgetExceeded(format!(
            "{} steps > {} step DP budget",
            spec.steps, MAX_DP_STEPS
        )));
    }
    let bounds = corridor.map(|c| c.bounds_for(spec)).transpose()?;
    let (up, down) = spec.up_down();
    let y_min = -down;
    let y_max = up;
    let w = spec.width as usize;
    let range = (y_max - y_min + 1) as usize;
    let idx = |x: usize, y: i64, d: usize| (x * range + (y - y_min) as usize) * 3 + d;
    let mut cur = vec![BigUint::zero(); (w + 1) * range * 3];
    let mut next = cur.clone();

    // First step; later steps forbid vertical reversal.
    for (d, dir) in StepDirection::ALL.iter().enumerate() {
        let (dx, dy) = dir.delta();
        if let Some(slot) = slot_if_ok(spec, bounds, 1, dx, dy, y_min, y_max) {
            cur[idx(slot.0, slot.1, d)] += 1u32;
        }
    }
    for i in 2..=spec.steps {
        for v in next.iter_mut() {
            v.set_zero();
        }
        for x in 0..=w {
            for y in y_min..=y_max {
                for last in 0..3 {
                    let c = &cur[idx(x, y, last)];
                    if c.is_zero() {
                        continue;
                    }
                    for (d, dir) in StepDirection::ALL.iter().enumerate() {
                        if StepDirection::ALL[last].reverses(*dir) {
                            continue;
                        }
                        let (dx, dy) = dir.delta();
                        if let Some(slot) =
                            slot_if_ok(spec, bounds, i, x as i64 + dx, y + dy, y_min, y_max)
                        {
                            let t = c.clone();
                            next[idx(slot.0, slot.1, d)] += t;
                        }
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let mut total = BigUint::zero();
    for d in 0..3 {
        total += cur[idx(w, spec.rise, d)].clone();
    }
    Ok(total)
}

#[inline]
fn slot_if_ok(
    spec: &CrossingSpec,
    bounds: Option<(i64, i64)>,
    step: u64,
    nx: i64,
    ny: i64,
    y_min: i64,
    y_max: i64,
) -> Option<(usize, i64)> {
    if nx < 0 || nx > spec.width as i64 || ny < y_min || ny > y_max {
        return None;
    }
    if let Some((lo, hi)) = bounds {
        if step < spec.steps && (ny <= lo || ny >= hi) {
            return None;
        }
    }
    Some((nx as usize, ny))
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut res = BigUint::one();
    for i in 0..k {
        res = res * (n - i) / (i + 1);
    }
    res
}

/// Closed-form count of `uL`-step paths whose endpoint column is `L` (any height).
///
/// The sum runs over the number `r` of vertical stretches: `r` of the `L+1`
/// column positions carry a stretch, the `(u-1)L` vertical steps split into
/// `r` nonempty runs (`C((u-1)L - 1, r-1)` compositions), and each run points
/// up or down. The composition factor was fixed by validating the summand
/// against exhaustive enumeration; see `stretch_formula_matches_enumeration`.
pub fn count_crossings_stretch_formula(width: u32, u: Rational64) -> Result<PathCount> {
    if width == 0 {
        return Err(Error::InvalidSpec("width must be positive".into()));
    }
    let steps = u * Rational64::from_integer(width as i64);
    if !steps.is_integer() || u < Rational64::one() {
        return Err(Error::InvalidSpec(format!(
            "u must satisfy u >= 1 with u*L integer, got {u}"
        )));
    }
    let vertical = (steps.to_integer() as u64) - width as u64;
    if vertical == 0 {
        return Ok(BigUint::one());
    }
    let mut total = BigUint::zero();
    let mut pow2 = BigUint::one();
    for r in 1..=(width as u64 + 1).min(vertical) {
        pow2 <<= 1;
        total += binomial(width as u64 + 1, r) * binomial(vertical - 1, r - 1) * pow2.clone();
    }
    Ok(total)
}

/// Natural log of a positive big integer, accurate to ~1 ulp.
pub fn ln_count(count: &BigUint) -> Result<f64> {
    if count.is_zero() {
        return Err(Error::EmptyPathSet);
    }
    let bits = count.bits();
    if bits <= 53 {
        return Ok(count.to_f64().unwrap().ln());
    }
    let shift = bits - 53;
    let top = (count >> shift).to_f64().unwrap();
    Ok(top.ln() + shift as f64 * std::f64::consts::LN_2)
}

/// Entropy per step `κ̃_L(u, l) = ln|W_L(u,l)| / (uL)`; always in `[0, ln 3]`.
pub fn kappa_l(spec: &CrossingSpec) -> Result<f64> {
    let count = count_crossings_dp(spec, None)?;
    Ok(ln_count(&count)? / spec.steps as f64)
}

/// Restricted-entropy variant for a corridor.
pub fn kappa_l_restricted(spec: &CrossingSpec, corridor: &VerticalCorridor) -> Result<f64> {
    let count = count_crossings_dp(spec, Some(corridor))?;
    Ok(ln_count(&count)? / spec.steps as f64)
}

/// `|κ̃_L(u,l,B0,B1) - κ̃_L(u,l)|`; shrinks with `L`.
pub fn kappa_restricted_gap(spec: &CrossingSpec, corridor: &VerticalCorridor) -> Result<f64> {
    Ok((kappa_l_restricted(spec, corridor)? - kappa_l(spec)?).abs())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KappaLimitRow {
    pub width: u32,
    pub steps: u64,
    pub kappa: f64,
    pub running_max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KappaLimit {
    /// Best (largest) finite-width entropy seen: a certified lower bound on
    /// the infinite-width value, which is the supremum over widths.
    pub estimate: f64,
    pub rows: Vec<KappaLimitRow>,
}

/// Evaluate `κ̃_L(u, l)` along increasing widths and report the running maximum.
pub fn kappa_limit(u: Rational64, l: Rational64, widths: &[u32]) -> Result<KappaLimit> {
    let mut rows = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for &w in widths {
        let spec = match CrossingSpec::new(w, u, l) {
            Ok(s) => s,
            Err(_) => continue, // (u, l) not admissible at this width
        };
        let kappa = kappa_l(&spec)?;
        best = best.max(kappa);
        rows.push(KappaLimitRow {
            width: w,
            steps: spec.steps(),
            kappa,
            running_max: best,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidSpec(format!(
            "no width in the list admits (u, l) = ({u}, {l})"
        )));
    }
    Ok(KappaLimit {
        estimate: best,
        rows,
    })
}

/// One-pass float count table: `ln |W_L(i/L, y/L)|` for every step count
/// `i <= max_steps` and endpoint height `y`, with per-step renormalization.
///
/// This is the bulk-evaluation path used to tabulate entropies at large
/// widths; the exact `BigUint` count remains the reference for single specs.
pub struct CountSweep {
    width: u32,
    max_steps: u64,
    y_off: i64,
    stride: usize,
    /// `ln count` at `[step][y + y_off]`, `NEG_INFINITY` where empty.
    logs: Vec<f64>,
}

impl CountSweep {
    pub fn build(width: u32, max_steps: u64) -> CountSweep {
        let w = width as usize;
        let y_off = max_steps as i64;
        let stride = 2 * max_steps as usize + 1;
        let mut logs = vec![f64::NEG_INFINITY; (max_steps as usize + 1) * stride];
        let range = stride;
        let idx = |x: usize, y: i64, d: usize| (x * range + (y + y_off) as usize) * 3 + d;
        let mut cur = vec![0.0f64; (w + 1) * range * 3];
        let mut next = cur.clone();
        let mut log_scale = 0.0f64;
        for (d, dir) in StepDirection::ALL.iter().enumerate() {
            let (dx, dy) = dir.delta();
            if dx <= width as i64 {
                cur[idx(dx as usize, dy, d)] = 1.0;
            }
        }
        for i in 1..=max_steps {
            if i > 1 {
                for v in next.iter_mut() {
                    *v = 0.0;
                }
                for x in 0..=w {
                    for y in -(i as i64 - 1)..=(i as i64 - 1) {
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
                                let nx = x as i64 + dx;
                                if nx < 0 || nx > width as i64 {
                                    continue;
                                }
                                next[idx(nx as usize, y + dy, d)] += c;
                            }
                        }
                    }
                }
                std::mem::swap(&mut cur, &mut next);
                // Renormalize so the table stays finite for long sweeps.
                let m = cur.iter().cloned().fold(0.0f64, f64::max);
                if m > 1e250 {
                    let inv = 1.0 / m;
                    for v in cur.iter_mut() {
                        *v *= inv;
                    }
                    log_scale += m.ln();
                }
            }
            for y in -(i as i64)..=(i as i64) {
                let total: f64 = (0..3).map(|d| cur[idx(w, y, d)]).sum();
                if total > 0.0 {
                    logs[i as usize * stride + (y + y_off) as usize] = total.ln() + log_scale;
                }
            }
        }
        CountSweep {
            width,
            max_steps,
            y_off,
            stride,
            logs,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// `ln |W_L(steps/L, rise/L)|`, or `None` when the set is empty/untabulated.
    pub fn ln_count(&self, steps: u64, rise: i64) -> Option<f64> {
        if steps > self.max_steps || rise.unsigned_abs() > steps {
            return None;
        }
        let v = self.logs[steps as usize * self.stride + (rise + self.y_off) as usize];
        if v == f64::NEG_INFINITY {
            None
        } else {
            Some(v)
        }
    }
}
