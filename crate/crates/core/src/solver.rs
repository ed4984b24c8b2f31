//! Maximization of the ratio functional over per-type step budgets.
//!
//! For a finitely supported frequency measure `ρ` over column types and step
//! budgets `u_Θ ∈ [t_Θ, m]`, the objective is
//!
//! `V(ρ, u) = Σ_Θ ρ(Θ) u_Θ ψ(Θ, u_Θ) / Σ_Θ ρ(Θ) u_Θ`.
//!
//! The maximum is found by root-finding in `y` on
//! `F(y) = Σ_Θ ρ(Θ) max_u (u ψ(Θ, u) - y u)` (Dinkelbach): `F` is strictly
//! decreasing (every inner slope is at most `-t_Θ <= -1`) and its root is
//! the optimal ratio. The inner maximizer is found by golden-section on the
//! concave objective, then snapped to the best table node — the interpolated
//! objective is piecewise linear in `u`, so maxima sit on nodes or interval
//! ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FrequencyMeasure;
use crate::oracle::{KappaTable, PhiTable};
use crate::psi_var::psi_for_type;

/// `u ↦ ψ(Θ, u)` for one atom, tabulated on `[t_Θ, m]` and interpolated
/// linearly in `u·ψ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsiCurve {
    pub t_theta: f64,
    pub m: f64,
    us: Vec<f64>,
    upsi: Vec<f64>,
}

impl PsiCurve {
    pub fn from_values(t_theta: f64, m: f64, us: Vec<f64>, psis: Vec<f64>) -> Result<Self> {
        if us.len() != psis.len() || us.is_empty() {
            return Err(Error::InvalidSpec("curve needs matching nonempty grids".into()));
        }
        let upsi = us.iter().zip(&psis).map(|(u, p)| u * p).collect();
        Ok(PsiCurve {
            t_theta,
            m,
            us,
            upsi,
        })
    }

    /// Tabulate `f` on `nodes` points of `[t, m]`.
    pub fn from_fn(t: f64, m: f64, nodes: usize, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        if m < t {
            return Err(Error::Infeasible(format!("cap m = {m} below minimal time t = {t}")));
        }
        let n = nodes.max(2);
        let mut us = Vec::with_capacity(n);
        let mut psis = Vec::with_capacity(n);
        if m == t {
            let v = f(t)?;
            return Self::from_values(t, m, vec![t], vec![v]);
        }
        for k in 0..n {
            let u = t + (m - t) * k as f64 / (n - 1) as f64;
            us.push(u);
            psis.push(f(u)?);
        }
        Self::from_values(t, m, us, psis)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.us.iter().zip(&self.upsi).map(|(u, v)| (*u, *v))
    }

    /// `u·ψ(u)`, linear between nodes.
    pub fn upsi(&self, u: f64) -> f64 {
        let n = self.us.len();
        if n == 1 || u <= self.us[0] {
            return self.upsi[0];
        }
        if u >= self.us[n - 1] {
            return self.upsi[n - 1];
        }
        let i = self.us.partition_point(|x| *x <= u) - 1;
        let (u0, u1) = (self.us[i], self.us[i + 1]);
        let f = (u - u0) / (u1 - u0);
        self.upsi[i] * (1.0 - f) + self.upsi[i + 1] * f
    }

    pub fn psi(&self, u: f64) -> f64 {
        self.upsi(u) / u
    }

    /// Exact maximum of `ψ` over the curve (attained at a node, since `ψ`
    /// is monotone along each linear segment of `u·ψ`).
    pub fn max_psi(&self) -> f64 {
        self.us
            .iter()
            .zip(&self.upsi)
            .map(|(u, v)| v / u)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Worst midpoint-concavity defect of `u·ψ` over the grid (`<= 0` when
    /// perfectly concave).
    pub fn concavity_defect(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for w in self.us.windows(3).zip(self.upsi.windows(3)) {
            let (us, vs) = w;
            let lambda = (us[2] - us[1]) / (us[2] - us[0]);
            let chord = lambda * vs[0] + (1.0 - lambda) * vs[2];
            worst = worst.max(chord - vs[1]);
        }
        if worst == f64::NEG_INFINITY {
            0.0
        } else {
            worst
        }
    }
}

/// Per-atom ψ curves aligned with a measure's atoms.
pub struct PsiTable {
    pub curves: Vec<PsiCurve>,
    pub alpha: f64,
    pub beta: f64,
}

impl PsiTable {
    /// Build curves for every atom of `rho` from the variational formulas.
    pub fn build(
        rho: &FrequencyMeasure,
        alpha: f64,
        beta: f64,
        kappa: &KappaTable,
        phi: &PhiTable,
        tol: f64,
        nodes: usize,
    ) -> Result<PsiTable> {
        let m = rho.support_cap.1 as f64;
        let curves = rho
            .atoms
            .iter()
            .map(|(theta, _)| {
                let geo = crate::column::geometry(theta)?;
                let t = *geo.t_theta.numer() as f64 / *geo.t_theta.denom() as f64;
                PsiCurve::from_fn(t, m, nodes, |u| {
                    psi_for_type(theta, u, alpha, beta, kappa, phi, tol)
                })
            })
            .collect::<Result<_>>()?;
        Ok(PsiTable {
            curves,
            alpha,
            beta,
        })
    }

    pub fn from_curves(curves: Vec<PsiCurve>, alpha: f64, beta: f64) -> PsiTable {
        PsiTable {
            curves,
            alpha,
            beta,
        }
    }
}

/// `V(ρ, u)` at explicit budgets.
pub fn ratio_value(rho: &FrequencyMeasure, budgets: &[f64], table: &PsiTable) -> Result<f64> {
    if budgets.len() != rho.atoms.len() || rho.atoms.len() != table.curves.len() {
        return Err(Error::InvalidSpec("budgets must align with the atoms".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (((_, w), u), curve) in rho.atoms.iter().zip(budgets).zip(&table.curves) {
        if *u < curve.t_theta - 1e-9 || *u > curve.m + 1e-9 {
            return Err(Error::Infeasible(format!(
                "budget {u} outside [{}, {}]",
                curve.t_theta, curve.m
            )));
        }
        num += w * curve.upsi(*u);
        den += w * u;
    }
    Ok(num / den)
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximizer of `u ψ(u) - y u` over `[t_Θ, m]`: golden-section on the
/// concave objective, then snapped to the best node/endpoint.
pub fn inner_argmax(curve: &PsiCurve, y: f64) -> f64 {
    let s = |u: f64| curve.upsi(u) - y * u;
    let (mut lo, mut hi) = (curve.t_theta, curve.m);
    if hi - lo > 1e-12 {
        let mut x1 = hi - GOLDEN * (hi - lo);
        let mut x2 = lo + GOLDEN * (hi - lo);
        let (mut f1, mut f2) = (s(x1), s(x2));
        for _ in 0..200 {
            if hi - lo < 1e-10 {
                break;
            }
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + GOLDEN * (hi - lo);
                f2 = s(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - GOLDEN * (hi - lo);
                f1 = s(x1);
            }
        }
    }
    let golden_u = 0.5 * (lo + hi);
    let golden_v = s(golden_u);
    let mut node_u = curve.t_theta;
    let mut node_v = s(curve.t_theta);
    for cand in std::iter::once(curve.m).chain(curve.nodes().map(|(u, _)| u)) {
        if (curve.t_theta..=curve.m).contains(&cand) {
            let v = s(cand);
            if v > node_v {
                node_v = v;
                node_u = cand;
            }
        }
    }
    // The best node can only lose to the golden point through rounding.
    if node_v >= golden_v - 1e-9 * (1.0 + golden_v.abs()) {
        node_u
    } else {
        golden_u
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverResult {
    /// The maximized ratio, evaluated at the returned budgets.
    pub value: f64,
    pub y_star: f64,
    pub u_star: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Every `(y, F(y))` pair evaluated; `F` must decrease in `y`.
    pub f_evals: Vec<(f64, f64)>,
}

fn f_of(rho: &FrequencyMeasure, table: &PsiTable, y: f64) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut us = Vec::with_capacity(table.curves.len());
    for ((_, w), curve) in rho.atoms.iter().zip(&table.curves) {
        let u = inner_argmax(curve, y);
        total += w * (curve.upsi(u) - y * u);
        us.push(u);
    }
    (total, us)
}

/// Maximize `V(ρ, ·)` by bisection on the Dinkelbach root function.
///
/// Atoms at zero distance with equal flags are merged up front (identical
/// types contribute one budget). The bracket starts at the uniform free
/// energy bound `±(ln 3 + α)`, widened if a synthetic table exceeds it.
pub fn solve_ratio(
    rho: &FrequencyMeasure,
    table: &PsiTable,
    tol: f64,
    max_iter: usize,
) -> Result<SolverResult> {
    if rho.atoms.is_empty() {
        return Err(Error::EmptyInput("measure has no atoms".into()));
    }
    if rho.atoms.len() != table.curves.len() {
        return Err(Error::InvalidSpec("table does not match the measure".into()));
    }
    let bound = 3f64.ln() + table.alpha.abs();
    let psi_lo = table
        .curves
        .iter()
        .flat_map(|c| c.nodes().map(|(u, v)| v / u))
        .fold(f64::INFINITY, f64::min);
    let psi_hi = table
        .curves
        .iter()
        .flat_map(|c| c.nodes().map(|(u, v)| v / u))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut lo = (-bound).min(psi_lo) - 0.5;
    let mut hi = bound.max(psi_hi) + 0.5;
    let mut evals = Vec::new();
    let mut converged = None;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let y = 0.5 * (lo + hi);
        let (f, us) = f_of(rho, table, y);
        evals.push((y, f));
        if f.abs() <= tol {
            converged = Some((y, us));
            break;
        }
        if f > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
    }
    let Some((y_star, u_star)) = converged else {
        return Err(Error::NoConvergence {
            iterations,
            lo,
            hi,
        });
    };
    let residual = {
        let mut total = 0.0;
        for (((_, w), u), curve) in rho.atoms.iter().zip(&u_star).zip(&table.curves) {
            total += w * (curve.upsi(*u) - y_star * u);
        }
        total.abs()
    };
    let value = ratio_value(rho, &u_star, table)?;
    Ok(SolverResult {
        value,
        y_star,
        u_star,
        iterations,
        residual,
        f_evals: evals,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BestBound {
    pub value: f64,
    pub best_index: usize,
    pub per_measure: Vec<SolverResult>,
}

/// Solve every measure and keep the best ratio: a lower bound for the full
/// model's free energy. Ties keep the first index.
#[allow(clippy::too_many_arguments)]
pub fn best_lower_bound(
    measures: &[FrequencyMeasure],
    alpha: f64,
    beta: f64,
    kappa: &KappaTable,
    phi: &PhiTable,
    tol: f64,
    nodes: usize,
    max_iter: usize,
) -> Result<BestBound> {
    if measures.is_empty() {
        return Err(Error::EmptyInput("no measures supplied".into()));
    }
    let mut per_measure: Vec<SolverResult> = Vec::with_capacity(measures.len());
    let mut best_index = 0;
    for (i, rho) in measures.iter().enumerate() {
        let rho = rho.merged();
        let table = PsiTable::build(&rho, alpha, beta, kappa, phi, tol, nodes)?;
        let result = solve_ratio(&rho, &table, tol, max_iter)?;
        if i > 0 && result.value > per_measure[best_index].value {
            best_index = i;
        }
        per_measure.push(result);
    }
    Ok(BestBound {
        value: per_measure[best_index].value,
        best_index,
        per_measure,
    })
}
