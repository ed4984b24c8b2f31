//! Variational single-column free energies.
//!
//! For a column whose crossing interval contains an AB-interface the free
//! energy per step is a supremum over how the path splits its width budget
//! (`h`) and step budget (`a`) between A-blocks, B-blocks and the
//! interfaces:
//!
//! `ψ_int(u, l_A, l_B) = sup [ g(a_A, h_A, l_A) + g(a_B, h_B, l_B)
//!                             + a_B (β-α)/2 + g'(a_I, h_I) ] / u`
//!
//! over `h_A + h_B + h_I = 1`, `a_A + a_B + a_I = u`, `a_A >= h_A + l_A`,
//! `a_B >= h_B + l_B`, `a_I >= h_I`, with `g(a, h, l) = a κ̃(a/h, l/h)` and
//! `g'(a, h) = a φ(a/h)` (both `0` at `h = 0`).
//!
//! For interface-free columns, paths avoiding every interface have the
//! closed form `κ̃(u, l_nint) + (β-α)/2·1{χ(0)=B}`, and paths required to
//! reach one maximize a two-variable ratio over the interface share
//! `(h_I, u_I)`.
//!
//! Optimizers follow a fixed recipe: a coarse feasible grid (step 1/16)
//! seeds a clamped pattern search with halving steps. The dense grid
//! searches in this module are the independent validation route for the
//! optimizers and are also run by the self-check suite.

use serde::{Deserialize, Serialize};

use crate::column::{geometry, ColumnClass, ColumnType};
use crate::disorder::Letter;
use crate::error::{Error, Result};
use crate::oracle::{KappaTable, PhiTable};

/// Optimal split of width shares (`h`) and step budgets (`a`).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Allocation {
    pub h_a: f64,
    pub h_b: f64,
    pub h_i: f64,
    pub a_a: f64,
    pub a_b: f64,
    pub a_i: f64,
}

impl Allocation {
    /// Largest violation over all constraints of the feasible set.
    pub fn max_violation(&self, u: f64, l_a: f64, l_b: f64) -> f64 {
        let mut v: f64 = 0.0;
        for h in [self.h_a, self.h_b, self.h_i] {
            v = v.max(-h).max(h - 1.0);
        }
        v = v.max((self.h_a + self.h_b + self.h_i - 1.0).abs());
        v = v.max((self.a_a + self.a_b + self.a_i - u).abs());
        v = v.max(self.h_a + l_a - self.a_a);
        v = v.max(self.h_b + l_b - self.a_b);
        v = v.max(self.h_i - self.a_i);
        v
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsiVar {
    pub value: f64,
    pub allocation: Allocation,
}

/// Free coordinates of the interface-class problem: width shares plus the
/// nonnegative step slacks above each lower bound. Feasibility is then
/// `h_a + h_b <= 1`, `s_a + s_b <= slack`.
#[derive(Clone, Copy)]
struct IntPoint {
    h_a: f64,
    h_b: f64,
    s_a: f64,
    s_b: f64,
}

struct IntProblem<'a> {
    u: f64,
    l_a: f64,
    l_b: f64,
    slack: f64,
    coupling: f64,
    kappa: &'a KappaTable,
    phi: &'a PhiTable,
}

impl IntProblem<'_> {
    fn alloc(&self, p: IntPoint) -> Allocation {
        let a_a = p.h_a + self.l_a + p.s_a;
        let a_b = p.h_b + self.l_b + p.s_b;
        let h_i = 1.0 - p.h_a - p.h_b;
        Allocation {
            h_a: p.h_a,
            h_b: p.h_b,
            h_i,
            a_a,
            a_b,
            a_i: self.u - a_a - a_b,
        }
    }

    fn objective(&self, p: IntPoint) -> f64 {
        let al = self.alloc(p);
        let q = self.kappa.g_entropy(al.a_a, al.h_a, self.l_a)
            + self.kappa.g_entropy(al.a_b, al.h_b, self.l_b)
            + al.a_b * self.coupling
            + self.phi.g_interface(al.a_i, al.h_i);
        q / self.u
    }

    fn clamp(&self, mut p: IntPoint) -> IntPoint {
        p.h_a = p.h_a.clamp(0.0, 1.0);
        p.h_b = p.h_b.clamp(0.0, 1.0 - p.h_a);
        p.s_a = p.s_a.clamp(0.0, self.slack);
        p.s_b = p.s_b.clamp(0.0, self.slack - p.s_a);
        p
    }
}

const COARSE: u32 = 16;
const SEEDS: usize = 6;

/// `ψ_int(u, l_A, l_B; α, β)` with its maximizing allocation.
#[allow(clippy::too_many_arguments)]
pub fn psi_int_variational(
    u: f64,
    l_a: f64,
    l_b: f64,
    alpha: f64,
    beta: f64,
    kappa: &KappaTable,
    phi: &PhiTable,
    tol: f64,
) -> Result<PsiVar> {
    let slack = u - 1.0 - l_a - l_b;
    if slack < -1e-12 || l_a < 0.0 || l_b < 0.0 {
        return Err(Error::Infeasible(format!(
            "need u >= 1 + l_A + l_B, got u = {u}, l_A = {l_a}, l_B = {l_b}"
        )));
    }
    let prob = IntProblem {
        u,
        l_a,
        l_b,
        slack: slack.max(0.0),
        coupling: 0.5 * (beta - alpha),
        kappa,
        phi,
    };

    // Coarse feasible grid.
    let mut seeds: Vec<(f64, IntPoint)> = Vec::new();
    let fr = |i: u32| i as f64 / COARSE as f64;
    for ia in 0..=COARSE {
        for ib in 0..=(COARSE - ia) {
            for ja in 0..=COARSE {
                for jb in 0..=(COARSE - ja) {
                    let p = IntPoint {
                        h_a: fr(ia),
                        h_b: fr(ib),
                        s_a: fr(ja) * prob.slack,
                        s_b: fr(jb) * prob.slack,
                    };
                    let v = prob.objective(p);
                    consider(&mut seeds, v, p);
                }
            }
        }
    }

    let mut best_v = f64::NEG_INFINITY;
    let mut best_p = seeds[0].1;
    for &(_, seed) in &seeds {
        let (v, p) = refine_int(&prob, seed, tol);
        if v > best_v {
            best_v = v;
            best_p = p;
        }
    }
    Ok(PsiVar {
        value: best_v,
        allocation: prob.alloc(best_p),
    })
}

fn consider(seeds: &mut Vec<(f64, IntPoint)>, v: f64, p: IntPoint) {
    if !v.is_finite() {
        return;
    }
    if seeds.len() < SEEDS {
        seeds.push((v, p));
        seeds.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        return;
    }
    if v > seeds.last().unwrap().0 {
        seeds.pop();
        seeds.push((v, p));
        seeds.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    }
}

/// Clamped pattern search with halving steps from 1/16 down past `tol`.
/// Probes include two-coordinate diagonals so boundary ridges (shares
/// summing to one, slacks summing to the budget) can be tracked.
fn refine_int(prob: &IntProblem, start: IntPoint, tol: f64) -> (f64, IntPoint) {
    let mut p = prob.clamp(start);
    let mut best = prob.objective(p);
    let mut step = 1.0 / COARSE as f64;
    let min_step = (tol * 1e-3).max(1e-12);
    let apply = |p: IntPoint, deltas: [f64; 4]| {
        let scale = prob.slack.max(1.0);
        prob.clamp(IntPoint {
            h_a: p.h_a + deltas[0],
            h_b: p.h_b + deltas[1],
            s_a: p.s_a + deltas[2] * scale,
            s_b: p.s_b + deltas[3] * scale,
        })
    };
    while step > min_step {
        let mut improved = false;
        let mut probes: Vec<[f64; 4]> = Vec::with_capacity(32);
        for coord in 0..4 {
            for sign in [1.0f64, -1.0] {
                let mut d = [0.0; 4];
                d[coord] = sign * step;
                probes.push(d);
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let mut d = [0.0; 4];
                    d[i] = si * step;
                    d[j] = sj * step;
                    probes.push(d);
                }
            }
        }
        for d in probes {
            let q = apply(p, d);
            let v = prob.objective(q);
            if v > best + 1e-15 {
                best = v;
                p = q;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, p)
}

/// Dense grid search over the same feasible set; the validation route for
/// [`psi_int_variational`]. `res` is the number of grid cells per unit.
#[allow(clippy::too_many_arguments)]
pub fn psi_int_grid(
    u: f64,
    l_a: f64,
    l_b: f64,
    alpha: f64,
    beta: f64,
    kappa: &KappaTable,
    phi: &PhiTable,
    res: u32,
) -> Result<f64> {
    let slack = u - 1.0 - l_a - l_b;
    if slack < -1e-12 {
        return Err(Error::Infeasible("u < 1 + l_A + l_B".into()));
    }
    let prob = IntProblem {
        u,
        l_a,
        l_b,
        slack: slack.max(0.0),
        coupling: 0.5 * (beta - alpha),
        kappa,
        phi,
    };
    let fr = |i: u32| i as f64 / res as f64;
    let mut best = f64::NEG_INFINITY;
    for ia in 0..=res {
        for ib in 0..=(res - ia) {
            for ja in 0..=res {
                for jb in 0..=(res - ja) {
                    let v = prob.objective(IntPoint {
                        h_a: fr(ia),
                        h_b: fr(ib),
                        s_a: fr(ja) * prob.slack,
                        s_b: fr(jb) * prob.slack,
                    });
                    if v > best {
                        best = v;
                    }
                }
            }
        }
    }
    Ok(best)
}

struct ReachProblem<'a> {
    u: f64,
    l_int: f64,
    coupling_b: f64,
    kappa: &'a KappaTable,
    phi: &'a PhiTable,
}

impl ReachProblem<'_> {
    /// Upper bound of the interface step budget at a given share.
    fn ui_max(&self, h_i: f64) -> f64 {
        self.u + h_i - 1.0 - self.l_int
    }

    fn clamp(&self, (h_i, u_i): (f64, f64)) -> (f64, f64) {
        let h = h_i.clamp(0.0, 1.0);
        (h, u_i.clamp(h, self.ui_max(h)))
    }

    fn objective(&self, (h_i, u_i): (f64, f64)) -> f64 {
        let rest = self.u - u_i;
        let q = self.kappa.g_entropy(rest, 1.0 - h_i, self.l_int)
            + rest * self.coupling_b
            + self.phi.g_interface(u_i, h_i);
        q / self.u
    }
}

/// `ψ` of an interface-free column: closed form for the avoiding class,
/// a two-variable supremum for the reaching class.
#[allow(clippy::too_many_arguments)]
pub fn psi_nint(
    u: f64,
    l_nint: f64,
    l_int: Option<f64>,
    chi0: Letter,
    x: u8,
    alpha: f64,
    beta: f64,
    kappa: &KappaTable,
    phi: &PhiTable,
    tol: f64,
) -> Result<f64> {
    let coupling_b = if chi0 == Letter::B {
        0.5 * (beta - alpha)
    } else {
        0.0
    };
    match x {
        1 => {
            if u < 1.0 + l_nint - 1e-12 {
                return Err(Error::Infeasible(format!("u = {u} < 1 + l_nint = {}", 1.0 + l_nint)));
            }
            Ok(kappa.kappa(u.max(1.0 + l_nint), l_nint) + coupling_b)
        }
        2 => {
            let l_int = l_int.ok_or_else(|| {
                Error::Infeasible("reaching class needs an interface in the window".into())
            })?;
            if u < 1.0 + l_int - 1e-12 {
                return Err(Error::Infeasible(format!("u = {u} < t = {}", 1.0 + l_int)));
            }
            let prob = ReachProblem {
                u,
                l_int,
                coupling_b,
                kappa,
                phi,
            };
            let mut seeds: Vec<(f64, (f64, f64))> = Vec::new();
            for ih in 0..=COARSE {
                let h_i = ih as f64 / COARSE as f64;
                let (lo, hi) = (h_i, prob.ui_max(h_i));
                for iu in 0..=COARSE {
                    let u_i = lo + (hi - lo) * iu as f64 / COARSE as f64;
                    let v = prob.objective((h_i, u_i));
                    if v.is_finite() {
                        seeds.push((v, (h_i, u_i)));
                    }
                }
            }
            seeds.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            seeds.truncate(SEEDS);
            let mut best = f64::NEG_INFINITY;
            for &(_, seed) in &seeds {
                let v = refine_reach(&prob, seed, tol);
                best = best.max(v);
            }
            Ok(best)
        }
        other => Err(Error::InvalidSpec(format!("x must be 1 or 2, got {other}"))),
    }
}

fn refine_reach(prob: &ReachProblem, start: (f64, f64), tol: f64) -> f64 {
    let mut p = prob.clamp(start);
    let mut best = prob.objective(p);
    let mut step = 1.0 / COARSE as f64;
    let min_step = (tol * 1e-3).max(1e-12);
    let scale = (prob.u - 1.0 - prob.l_int).max(1.0);
    while step > min_step {
        let mut improved = false;
        // Diagonal probes track the sheared feasible boundary
        // `u_I = u + h_I - 1 - l_int`.
        for (dh, du) in [
            (step, 0.0),
            (-step, 0.0),
            (0.0, step * scale),
            (0.0, -step * scale),
            (step, step * scale),
            (step, -step * scale),
            (-step, step * scale),
            (-step, -step * scale),
            (step, step),
            (-step, -step),
        ] {
            let q = prob.clamp((p.0 + dh, p.1 + du));
            let v = prob.objective(q);
            if v > best + 1e-15 {
                best = v;
                p = q;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Dense grid validation route for the reaching class.
#[allow(clippy::too_many_arguments)]
pub fn psi_nint_grid(
    u: f64,
    l_int: f64,
    chi0: Letter,
    alpha: f64,
    beta: f64,
    kappa: &KappaTable,
    phi: &PhiTable,
    res: u32,
) -> Result<f64> {
    if u < 1.0 + l_int - 1e-12 {
        return Err(Error::Infeasible("u below the reach-and-return time".into()));
    }
    let prob = ReachProblem {
        u,
        l_int,
        coupling_b: if chi0 == Letter::B { 0.5 * (beta - alpha) } else { 0.0 },
        kappa,
        phi,
    };
    let mut best = f64::NEG_INFINITY;
    for ih in 0..=res {
        let h_i = ih as f64 / res as f64;
        let (lo, hi) = (h_i, prob.ui_max(h_i));
        for iu in 0..=res {
            let u_i = lo + (hi - lo) * iu as f64 / res as f64;
            let v = prob.objective((h_i, u_i));
            if v > best {
                best = v;
            }
        }
    }
    Ok(best)
}

/// Variational `ψ(Θ, u)` dispatched on the crossing class of `Θ`.
pub fn psi_for_type(
    theta: &ColumnType,
    u: f64,
    alpha: f64,
    beta: f64,
    kappa: &KappaTable,
    phi: &PhiTable,
    tol: f64,
) -> Result<f64> {
    let geo = geometry(theta)?;
    let to_f = |r: num_rational::Rational64| *r.numer() as f64 / *r.denom() as f64;
    match geo.class {
        ColumnClass::Int => Ok(psi_int_variational(
            u,
            to_f(geo.l_a),
            to_f(geo.l_b),
            alpha,
            beta,
            kappa,
            phi,
            tol,
        )?
        .value),
        ColumnClass::NintAvoid => psi_nint(
            u,
            to_f(geo.l_nint),
            geo.l_int.map(to_f),
            theta.chi.letter(0),
            1,
            alpha,
            beta,
            kappa,
            phi,
            tol,
        ),
        ColumnClass::NintReach => psi_nint(
            u,
            to_f(geo.l_nint),
            geo.l_int.map(to_f),
            theta.chi.letter(0),
            2,
            alpha,
            beta,
            kappa,
            phi,
            tol,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn kappa() -> &'static KappaTable {
        static T: OnceLock<KappaTable> = OnceLock::new();
        T.get_or_init(|| KappaTable::build(8, 10.0).unwrap())
    }

    fn phi(alpha: f64, beta: f64) -> PhiTable {
        PhiTable::build(8, 10.0, 16, 3, alpha, beta).unwrap()
    }

    #[test]
    fn symmetric_couplings_make_solvents_equivalent() {
        // α = β kills the solvent asymmetry, so swapping (l_A, l_B) must not
        // move the optimum. The pattern searches approach the common value
        // from mirrored directions over a kinked interpolant, hence the
        // coarser tolerance than the termination tol.
        let p = phi(1.0, 1.0);
        let a = psi_int_variational(4.0, 1.5, 0.5, 1.0, 1.0, kappa(), &p, 1e-6).unwrap();
        let b = psi_int_variational(4.0, 0.5, 1.5, 1.0, 1.0, kappa(), &p, 1e-6).unwrap();
        assert!((a.value - b.value).abs() < 2e-4, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn pinned_corner_is_feasible_and_matches_line_scan() {
        // l_A = u - 1, l_B = 0: the step budget is forced, only shares move.
        let p = phi(2.0, 1.0);
        let u = 3.0;
        let out = psi_int_variational(u, u - 1.0, 0.0, 2.0, 1.0, kappa(), &p, 1e-7).unwrap();
        assert!(out.allocation.max_violation(u, u - 1.0, 0.0) <= 1e-9);
        assert!((out.allocation.a_a - (out.allocation.h_a + u - 1.0)).abs() <= 1e-7 + 1e-9);
        let mut line_best = f64::NEG_INFINITY;
        for i in 0..=4096u32 {
            let h_a = i as f64 / 4096.0;
            let v = (kappa().g_entropy(h_a + u - 1.0, h_a, u - 1.0)
                + p.g_interface(1.0 - h_a, 1.0 - h_a))
                / u;
            line_best = line_best.max(v);
        }
        assert!(
            (out.value - line_best).abs() < 2e-6,
            "{} vs {line_best}",
            out.value
        );
    }

    #[test]
    fn optimizer_matches_dense_grid_int() {
        let p = phi(2.0, 1.0);
        let opt = psi_int_variational(4.0, 1.0, 1.0, 2.0, 1.0, kappa(), &p, 1e-6)
            .unwrap()
            .value;
        let grid = psi_int_grid(4.0, 1.0, 1.0, 2.0, 1.0, kappa(), &p, 64).unwrap();
        assert!(opt >= grid - 2e-6, "optimizer {opt} below grid {grid}");
        assert!(opt <= grid + 0.05, "optimizer {opt} implausibly above grid {grid}");
    }

    #[test]
    fn avoiding_class_closed_forms() {
        let p0 = phi(1.0, 1.0);
        // χ(0) = A: no coupling shift.
        let v = psi_nint(3.0, 1.0, None, Letter::A, 1, 1.0, 1.0, kappa(), &p0, 1e-6).unwrap();
        assert!((v - kappa().kappa(3.0, 1.0)).abs() < 1e-12);
        // χ(0) = B with α = β: shift vanishes.
        let v = psi_nint(3.0, 1.0, None, Letter::B, 1, 1.0, 1.0, kappa(), &p0, 1e-6).unwrap();
        assert!((v - kappa().kappa(3.0, 1.0)).abs() < 1e-12);
        // χ(0) = B with α > β: shifted down by (α-β)/2.
        let p = phi(2.0, 1.0);
        let v = psi_nint(3.0, 1.0, None, Letter::B, 1, 2.0, 1.0, kappa(), &p, 1e-6).unwrap();
        assert!((v - (kappa().kappa(3.0, 1.0) - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn reaching_class_matches_dense_grid() {
        let p = phi(2.0, 1.0);
        for (u, l_int, chi0) in [(3.0, 1.0, Letter::A), (4.0, 0.5, Letter::B), (2.5, 1.5, Letter::B)] {
            let opt = psi_nint(u, 0.0, Some(l_int), chi0, 2, 2.0, 1.0, kappa(), &p, 1e-6).unwrap();
            let grid = psi_nint_grid(u, l_int, chi0, 2.0, 1.0, kappa(), &p, 64).unwrap();
            assert!(opt >= grid - 2e-6, "({u},{l_int}): optimizer {opt} below grid {grid}");
            assert!(opt <= grid + 0.05);
        }
    }

    #[test]
    fn infeasible_budgets_error() {
        let p = phi(1.0, 0.0);
        assert!(psi_int_variational(2.0, 1.5, 0.5, 1.0, 0.0, kappa(), &p, 1e-6).is_err());
        assert!(psi_nint(1.5, 1.0, Some(1.0), Letter::A, 2, 1.0, 0.0, kappa(), &p, 1e-6).is_err());
        assert!(psi_nint(1.5, 1.0, None, Letter::A, 2, 1.0, 0.0, kappa(), &p, 1e-6).is_err());
    }
}
