//! Column types and the quenched free energy of a single column crossing.
//!
//! A column of width `L` is a vertical strip of blocks whose letters are
//! recorded relative to the entrance block as a window `χ(j)`,
//! `j ∈ [-w, w]`. Rows outside the window continue the edge letter. A
//! crossing is classified by `Θ = (χ, ΔΠ, b0, b1, x)`: block-scale vertical
//! increment `ΔΠ`, entrance height `b0·L`, exit height `(ΔΠ + b1)·L`, and a
//! flag `x` that, for columns whose crossing interval contains no
//! AB-interface, separates paths avoiding every interface (`x = 1`) from
//! paths reaching one (`x = 2`).
//!
//! Block convention: blocks are right-closed, `(jL, (j+1)L]` in each
//! coordinate. A horizontal bond lying exactly on a block boundary belongs
//! to the A-block when the two adjacent blocks differ, and to the shared
//! letter otherwise.

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::disorder::{Letter, MicroDisorder};
use crate::error::{Error, Result};
use crate::lattice::StepDirection;

/// Letters of one column, on a finite window of block rows.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ColumnDisorder {
    letters: Vec<Letter>,
    radius: i32,
}

impl ColumnDisorder {
    /// Window from an odd-length slice centered at row 0.
    pub fn from_window(letters: Vec<Letter>) -> Result<Self> {
        if letters.is_empty() || letters.len().is_multiple_of(2) {
            return Err(Error::WindowMismatch(format!(
                "window length must be odd and positive, got {}",
                letters.len()
            )));
        }
        let radius = (letters.len() / 2) as i32;
        Ok(ColumnDisorder { letters, radius })
    }

    pub fn from_str_window(s: &str) -> Result<Self> {
        Self::from_window(s.chars().map(Letter::from_char).collect::<Result<_>>()?)
    }

    pub fn uniform(letter: Letter, radius: i32) -> Self {
        ColumnDisorder {
            letters: vec![letter; (2 * radius + 1) as usize],
            radius,
        }
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    /// Letter of block row `j`; rows beyond the window continue the edge.
    #[inline]
    pub fn letter(&self, j: i64) -> Letter {
        let j = j.clamp(-(self.radius as i64), self.radius as i64);
        self.letters[(j + self.radius as i64) as usize]
    }

    pub fn window_string(&self) -> String {
        self.letters.iter().map(|l| l.to_char()).collect()
    }

    pub fn flipped(&self) -> Self {
        ColumnDisorder {
            letters: self.letters.iter().map(|l| l.flip()).collect(),
            radius: self.radius,
        }
    }
}

/// Ordered AB-interface heights of a column window, in block units.
///
/// Heights are indexed the conventional way: `… < n(-1) < n(0) <= 0 < n(1) < …`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interfaces {
    heights: Vec<i64>,
}

impl Interfaces {
    pub fn heights(&self) -> &[i64] {
        &self.heights
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    /// `n(i)`: positive indices count interfaces above 0, nonpositive below.
    pub fn n(&self, i: i64) -> Option<i64> {
        let split = self.heights.partition_point(|&h| h <= 0);
        if i >= 1 {
            self.heights.get(split + (i - 1) as usize).copied()
        } else {
            let back = (-i) as usize;
            if back < split {
                Some(self.heights[split - 1 - back])
            } else {
                None
            }
        }
    }

    pub fn n1(&self) -> Option<i64> {
        self.n(1)
    }

    pub fn n0(&self) -> Option<i64> {
        self.n(0)
    }

    pub fn height_set(&self) -> BTreeSet<i64> {
        self.heights.iter().copied().collect()
    }
}

/// Interface heights of the window: boundary `j` is an interface when rows
/// `j - 1` and `j` carry different letters.
pub fn locate_interfaces(chi: &ColumnDisorder) -> Interfaces {
    let r = chi.radius() as i64;
    let mut heights = Vec::new();
    for j in (-r + 1)..=r {
        if chi.letter(j - 1) != chi.letter(j) {
            heights.push(j);
        }
    }
    Interfaces { heights }
}

/// Signed interface count `k_{r,χ}`: `|k|` interfaces lie between heights 1
/// and `rL`, counted negatively below the origin.
pub fn interface_count(chi: &ColumnDisorder, r: i64) -> Result<i64> {
    if r.unsigned_abs() > chi.radius() as u64 {
        return Err(Error::WindowMismatch(format!(
            "row {r} outside window of radius {}",
            chi.radius()
        )));
    }
    let ifs = locate_interfaces(chi);
    if r >= 0 {
        match ifs.n1() {
            None => Ok(0),
            Some(n1) if n1 > r => Ok(0),
            _ => {
                let mut i = 1;
                while let Some(h) = ifs.n(i + 1) {
                    if h > r {
                        break;
                    }
                    i += 1;
                }
                // n(i) <= r < n(i+1)
                if ifs.n(i).unwrap() <= r {
                    Ok(i)
                } else {
                    Ok(0)
                }
            }
        }
    } else {
        match ifs.n0() {
            None => Ok(0),
            Some(n0) if n0 <= r => Ok(0),
            _ => {
                // min{i <= 0 : n(i) >= r + 1} - 1
                let mut i = 0;
                while let Some(h) = ifs.n(i - 1) {
                    if h < r + 1 {
                        break;
                    }
                    i -= 1;
                }
                Ok(i - 1)
            }
        }
    }
}

/// Column-type tuple `Θ = (χ, ΔΠ, b0, b1, x)`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "ColumnTypeRepr", into = "ColumnTypeRepr")]
pub struct ColumnType {
    pub chi: ColumnDisorder,
    pub delta_pi: i32,
    pub b0: Rational64,
    pub b1: Rational64,
    pub x: u8,
}

#[derive(Serialize, Deserialize, Clone)]
struct ColumnTypeRepr {
    chi_window: String,
    delta_pi: i32,
    b0: String,
    b1: String,
    x: u8,
}

impl From<ColumnType> for ColumnTypeRepr {
    fn from(t: ColumnType) -> Self {
        ColumnTypeRepr {
            chi_window: t.chi.window_string(),
            delta_pi: t.delta_pi,
            b0: t.b0.to_string(),
            b1: t.b1.to_string(),
            x: t.x,
        }
    }
}

impl TryFrom<ColumnTypeRepr> for ColumnType {
    type Error = Error;

    fn try_from(r: ColumnTypeRepr) -> Result<Self> {
        ColumnType::new(
            ColumnDisorder::from_str_window(&r.chi_window)?,
            r.delta_pi,
            parse_ratio(&r.b0)?,
            parse_ratio(&r.b1)?,
            r.x,
        )
    }
}

/// Parse a rational from `"p/q"` or a plain integer string.
pub fn parse_ratio(s: &str) -> Result<Rational64> {
    s.parse::<Rational64>()
        .map_err(|e| Error::InvalidSpec(format!("bad rational '{s}': {e}")))
}

/// Serde adapters writing rationals as `"p/q"` strings.
pub mod ratio_serde {
    use num_rational::Rational64;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_ratio(&raw).map_err(D::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[Rational64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for r in v {
                seq.serialize_element(&r.to_string())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational64>, D::Error> {
            let raw = Vec::<String>::deserialize(d)?;
            raw.iter()
                .map(|s| crate::column::parse_ratio(s).map_err(D::Error::custom))
                .collect()
        }
    }
}

impl ColumnType {
    pub fn new(
        chi: ColumnDisorder,
        delta_pi: i32,
        b0: Rational64,
        b1: Rational64,
        x: u8,
    ) -> Result<Self> {
        let unit = Rational64::from_integer(1);
        if b0 <= Rational64::zero() || b0 > unit || b1 <= Rational64::zero() || b1 > unit {
            return Err(Error::InvalidSpec(format!(
                "entrance/exit heights must lie in (0, 1], got b0 = {b0}, b1 = {b1}"
            )));
        }
        if x != 1 && x != 2 {
            return Err(Error::InvalidSpec(format!("x must be 1 or 2, got {x}")));
        }
        let k = interface_count(&chi, delta_pi as i64)?;
        if k != 0 && x == 2 {
            return Err(Error::InvalidSpec(
                "x = 2 is only admissible for columns without a crossed interface".into(),
            ));
        }
        Ok(ColumnType {
            chi,
            delta_pi,
            b0,
            b1,
            x,
        })
    }

    /// Net rise per width unit of the crossing, `ΔΠ + b1 - b0`.
    pub fn rise(&self) -> Rational64 {
        Rational64::from_integer(self.delta_pi as i64) + self.b1 - self.b0
    }

    pub fn k_theta(&self) -> i64 {
        interface_count(&self.chi, self.delta_pi as i64).expect("validated at construction")
    }
}

/// Crossing class of a column type.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum ColumnClass {
    /// An AB-interface separates entrance and exit (`k ≠ 0`, `x = 1`).
    Int,
    /// No interface in between; paths must avoid all interfaces (`x = 1`).
    NintAvoid,
    /// No interface in between; paths must reach one (`x = 2`).
    NintReach,
}

/// Everything the free-energy formulas need to know about a column type.
#[derive(Clone, Debug)]
pub struct ColumnGeometry {
    pub class: ColumnClass,
    pub interfaces: Interfaces,
    pub k_theta: i64,
    /// Minimal steps per width unit needed by an admissible crossing.
    pub t_theta: Rational64,
    /// Minimal vertical distance crossed in A-blocks (interface class).
    pub l_a: Rational64,
    /// Minimal vertical distance crossed in B-blocks (interface class).
    pub l_b: Rational64,
    /// Vertical distance between entrance and exit points.
    pub l_nint: Rational64,
    /// Minimal detour to touch an interface and come back, when one exists.
    pub l_int: Option<Rational64>,
}

fn reach_detour(
    ifs: &Interfaces,
    delta_pi: i64,
    b0: Rational64,
    b1: Rational64,
) -> Option<Rational64> {
    let dp = Rational64::from_integer(delta_pi);
    let up = ifs
        .n1()
        .map(|n1| Rational64::from_integer(2 * n1) - b0 - b1 - dp);
    let down = ifs
        .n0()
        .map(|n0| Rational64::from_integer(2 * n0.abs()) + b0 + b1 + dp);
    match (up, down) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Assemble the geometry of a column type.
pub fn geometry(theta: &ColumnType) -> Result<ColumnGeometry> {
    let ifs = locate_interfaces(&theta.chi);
    let k = theta.k_theta();
    let dp = Rational64::from_integer(theta.delta_pi as i64);
    let l_nint = (dp + theta.b1 - theta.b0).abs();
    let l_int = if k == 0 {
        reach_detour(&ifs, theta.delta_pi as i64, theta.b0, theta.b1)
    } else {
        None
    };

    let class = if k != 0 {
        ColumnClass::Int
    } else if theta.x == 1 {
        ColumnClass::NintAvoid
    } else {
        ColumnClass::NintReach
    };

    let one = Rational64::from_integer(1);
    let t_theta = match class {
        ColumnClass::Int | ColumnClass::NintAvoid => one + l_nint,
        ColumnClass::NintReach => {
            let detour = l_int.ok_or_else(|| {
                Error::Infeasible("x = 2 requires an interface somewhere in the window".into())
            })?;
            one + detour
        }
    };

    let (mut l_a, mut l_b) = (Rational64::zero(), Rational64::zero());
    if k != 0 {
        for (lo, hi) in interface_segments(theta, &ifs, k) {
            let len = hi - lo;
            debug_assert!(len >= Rational64::zero());
            match segment_letter(&theta.chi, lo, hi) {
                Letter::A => l_a += len,
                Letter::B => l_b += len,
            }
        }
    }

    Ok(ColumnGeometry {
        class,
        interfaces: ifs,
        k_theta: k,
        t_theta,
        l_a,
        l_b,
        l_nint,
        l_int,
    })
}

/// Vertical intervals `(lo, hi)` between consecutive crossed interfaces,
/// entrance and exit included, each free of interior interfaces.
fn interface_segments(
    theta: &ColumnType,
    ifs: &Interfaces,
    k: i64,
) -> Vec<(Rational64, Rational64)> {
    let ratio = |h: i64| Rational64::from_integer(h);
    let exit = Rational64::from_integer(theta.delta_pi as i64) + theta.b1;
    let mut segs = Vec::new();
    if theta.delta_pi > 0 {
        segs.push((theta.b0, ratio(ifs.n(1).unwrap())));
        for j in 2..=k {
            segs.push((ratio(ifs.n(j - 1).unwrap()), ratio(ifs.n(j).unwrap())));
        }
        segs.push((ratio(ifs.n(k).unwrap()), exit));
    } else {
        let k_abs = -k;
        segs.push((ratio(ifs.n(0).unwrap()), theta.b0));
        for j in 2..=k_abs {
            segs.push((ratio(ifs.n(-j + 1).unwrap()), ratio(ifs.n(-j + 2).unwrap())));
        }
        segs.push((exit, ratio(ifs.n(k + 1).unwrap())));
    }
    segs
}

/// Letter of the blocks spanned by an interface-free interval.
fn segment_letter(chi: &ColumnDisorder, lo: Rational64, hi: Rational64) -> Letter {
    if lo == hi {
        // Zero-length segment (entrance or exit sitting on an interface);
        // it contributes no distance, either attribution works.
        return chi.letter(lo.floor().to_integer());
    }
    let mid = (lo + hi) / Rational64::from_integer(2);
    chi.letter(mid.floor().to_integer())
}

/// Minimal steps per width unit to cross a column of the given type.
pub fn minimal_time(theta: &ColumnType) -> Result<Rational64> {
    Ok(geometry(theta)?.t_theta)
}

/// Distance between two column types: exponentially weighted window
/// mismatches plus the increments' and heights' offsets. The flag `x` does
/// not enter.
pub fn column_distance(a: &ColumnType, b: &ColumnType) -> Result<f64> {
    if a.chi.radius() != b.chi.radius() {
        return Err(Error::WindowMismatch(format!(
            "radii {} and {} differ",
            a.chi.radius(),
            b.chi.radius()
        )));
    }
    let mut d = 0.0;
    for j in -(a.chi.radius() as i64)..=a.chi.radius() as i64 {
        if a.chi.letter(j) != b.chi.letter(j) {
            d += (0.5f64).powi(j.unsigned_abs() as i32);
        }
    }
    d += (a.delta_pi - b.delta_pi).abs() as f64;
    let to_f = |r: Rational64| *r.numer() as f64 / *r.denom() as f64;
    d += (to_f(a.b0) - to_f(b.b0)).abs();
    d += (to_f(a.b1) - to_f(b.b1)).abs();
    Ok(d)
}

/// Lattice-unit data of one bound crossing: entry/exit heights and steps.
pub(crate) struct BoundCrossing {
    pub steps: u64,
    pub y_entry: i64,
    pub y_exit: i64,
}

pub(crate) fn bind_to_width(theta: &ColumnType, u: Rational64, width: u32) -> Result<BoundCrossing> {
    let lw = Rational64::from_integer(width as i64);
    let y_entry = theta.b0 * lw;
    let y_exit = (Rational64::from_integer(theta.delta_pi as i64) + theta.b1) * lw;
    if !y_entry.is_integer() || !y_exit.is_integer() {
        return Err(Error::InvalidSpec(format!(
            "b0 = {} and b1 = {} are not multiples of 1/{width}",
            theta.b0, theta.b1
        )));
    }
    let t = minimal_time(theta)?;
    let steps = u * lw;
    if !steps.is_integer() {
        return Err(Error::InvalidSpec(format!("u·L must be an integer, got {u}·{width}")));
    }
    let excess = (u - t) * lw;
    if excess < Rational64::zero() || !excess.is_integer() || excess.to_integer() % 2 != 0 {
        return Err(Error::Infeasible(format!(
            "u = {u} is not in t + 2ℕ₀/L for t = {t}, L = {width}"
        )));
    }
    Ok(BoundCrossing {
        steps: steps.to_integer() as u64,
        y_entry: y_entry.to_integer(),
        y_exit: y_exit.to_integer(),
    })
}

/// Letter of the block containing a bond, in a column whose disorder varies
/// only with height. `y_new` is the height after the step.
#[inline]
pub(crate) fn bond_row_letter(
    chi: &ColumnDisorder,
    width: u32,
    dir: StepDirection,
    y_new: i64,
) -> Letter {
    let l = width as i64;
    match dir {
        StepDirection::Right => {
            if y_new.rem_euclid(l) == 0 {
                let above = y_new.div_euclid(l);
                let (lo, hi) = (chi.letter(above - 1), chi.letter(above));
                if lo != hi {
                    Letter::A
                } else {
                    hi
                }
            } else {
                chi.letter(y_new.div_euclid(l))
            }
        }
        StepDirection::Up => chi.letter((y_new - 1).div_euclid(l)),
        StepDirection::Down => chi.letter(y_new.div_euclid(l)),
    }
}

#[inline]
fn site_on_interface(set: &BTreeSet<i64>, width: u32, y: i64) -> bool {
    let l = width as i64;
    y.rem_euclid(l) == 0 && set.contains(&y.div_euclid(l))
}

/// Direct quenched free energy per step of one column crossing:
/// `(1/uL) ln Σ_π exp H(π)` over the path set selected by `Θ`.
///
/// The dynamic program runs over `(x, y, last step, touched-interface)`;
/// the touched bit implements the `x`-flag dichotomy for interface-free
/// columns.
pub fn psi_quenched_column(
    omega: &MicroDisorder,
    theta: &ColumnType,
    u: Rational64,
    width: u32,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let geo = geometry(theta)?;
    let bound = bind_to_width(theta, u, width)?;
    let steps = bound.steps;
    if steps > 4096 {
        return Err(Error::BudgetExceeded(format!("{steps} steps in one column")));
    }
    omega.require_len(steps as usize)?;
    let set = geo.interfaces.height_set();
    let track_touch = geo.k_theta == 0;
    let want_touch = theta.x == 2;

    let w = width as usize;
    let y_min = bound.y_entry - steps as i64;
    let y_max = bound.y_entry + steps as i64;
    let range = (y_max - y_min + 1) as usize;
    let flags = if track_touch { 2 } else { 1 };
    let idx = |x: usize, y: i64, d: usize, t: usize| {
        ((x * range + (y - y_min) as usize) * 3 + d) * flags + t
    };
    let mut cur = vec![0.0f64; (w + 1) * range * 3 * flags];
    let mut next = cur.clone();
    let mut log_scale = 0.0f64;

    let start_touch = usize::from(track_touch && site_on_interface(&set, width, bound.y_entry));
    let step_weight = |i: usize, dir: StepDirection, y_new: i64| -> f64 {
        if bond_row_letter(&theta.chi, width, dir, y_new) == Letter::B {
            match omega.letter(i) {
                Letter::B => beta.exp(),
                Letter::A => (-alpha).exp(),
            }
        } else {
            1.0
        }
    };

    for (d, dir) in StepDirection::ALL.iter().enumerate() {
        let (dx, dy) = dir.delta();
        let (nx, ny) = (dx, bound.y_entry + dy);
        if nx > w as i64 {
            continue;
        }
        let touched = if track_touch {
            (start_touch == 1 || site_on_interface(&set, width, ny)) as usize
        } else {
            0
        };
        cur[idx(nx as usize, ny, d, touched)] = step_weight(0, *dir, ny);
    }
    for i in 1..steps as usize {
        for v in next.iter_mut() {
            *v = 0.0;
        }
        for x in 0..=w {
            for y in (y_min + (steps as i64 - i as i64 - 1)).max(y_min)
                ..=(y_max - (steps as i64 - i as i64 - 1)).min(y_max)
            {
                for last in 0..3 {
                    for t in 0..flags {
                        let c = cur[idx(x, y, last, t)];
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
                            let nt = if track_touch {
                                (t == 1 || site_on_interface(&set, width, ny)) as usize
                            } else {
                                0
                            };
                            next[idx(nx as usize, ny, d, nt)] += c * step_weight(i, *dir, ny);
                        }
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
    let want = usize::from(track_touch && want_touch);
    let z: f64 = (0..3).map(|d| cur[idx(w, bound.y_exit, d, want)]).sum();
    if z <= 0.0 {
        return Err(Error::EmptyPathSet);
    }
    Ok((z.ln() + log_scale) / steps as f64)
}
