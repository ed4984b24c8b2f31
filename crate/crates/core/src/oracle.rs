//! Tabulated oracles for the two microscopic ingredients of the column
//! formulas: the crossing entropy `κ̃(u, l)` and the single-interface free
//! energy `φ(μ)`.
//!
//! Both limits are only available numerically, so they are approximated at a
//! configured finite width and interpolated. The admissible set
//! `{(u, l) : u >= 1 + |l|}` maps to the quarter-plane `s, t >= 0` under
//! `s = ((u-1) + l)·L/2`, `t = ((u-1) - l)·L/2`, where the admissible lattice
//! is exactly `ℕ₀²`; the entropy table lives on that grid and is bilinearly
//! interpolated. Queries beyond the tabulated range clamp to the boundary
//! node, which the ratio structure only ever hits at negligible weight
//! (`h → 0` with the extension `g(a, 0, l) = 0`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::MicroDisorder;
use crate::error::{Error, Result};
use crate::interface;
use crate::lattice::CountSweep;

/// Weights below this are treated as an empty solvent share.
pub const H_EPS: f64 = 1e-12;

/// Bilinear table of `G(u, l) = u·κ̃_L(u, l)` on the admissible lattice.
pub struct KappaTable {
    width: u32,
    s_max: usize,
    /// `G` at node `(s, t)`, row-major in `s`.
    g: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KappaProvenance {
    pub width: u32,
    pub u_max: f64,
}

impl KappaTable {
    /// Tabulate at width `width` for ratios up to `u_max` at every
    /// admissible slope (the diagonal coordinate reaches `(u_max - 1)·L`).
    pub fn build(width: u32, u_max: f64) -> Result<KappaTable> {
        if width == 0 || u_max < 1.0 {
            return Err(Error::InvalidSpec("need width >= 1 and u_max >= 1".into()));
        }
        let s_max = (((u_max - 1.0) * width as f64).ceil() as usize).max(1);
        let max_steps = width as u64 + 2 * s_max as u64;
        let sweep = CountSweep::build(width, max_steps);
        let n = s_max + 1;
        let mut g = vec![0.0f64; n * n];
        for s in 0..n {
            for t in 0..n {
                let steps = width as u64 + (s + t) as u64;
                let rise = s as i64 - t as i64;
                let ln = sweep
                    .ln_count(steps, rise)
                    .ok_or_else(|| Error::BudgetExceeded("entropy sweep too small".into()))?;
                g[s * n + t] = ln / width as f64;
            }
        }
        Ok(KappaTable { width, s_max, g })
    }

    pub fn provenance(&self) -> KappaProvenance {
        KappaProvenance {
            width: self.width,
            u_max: 1.0 + self.s_max as f64 / self.width as f64,
        }
    }

    fn node(&self, s: usize, t: usize) -> f64 {
        self.g[s * (self.s_max + 1) + t]
    }

    /// `G(u, l) = u·κ̃(u, l)`, interpolated on the lattice.
    ///
    /// Each unit cell is split into two triangles along the diagonal that
    /// points in the `u` direction, so the interpolant is piecewise linear
    /// along every line of fixed slope — queries of `u ↦ G(u, l)` stay
    /// concave up to the node data.
    pub fn g_of(&self, u: f64, l: f64) -> f64 {
        let half_l = self.width as f64 / 2.0;
        let mut s = (u - 1.0 + l) * half_l;
        let mut t = (u - 1.0 - l) * half_l;
        if s < 0.0 {
            debug_assert!(s > -1e-6, "query (u={u}, l={l}) outside the admissible set");
            s = 0.0;
        }
        if t < 0.0 {
            debug_assert!(t > -1e-6, "query (u={u}, l={l}) outside the admissible set");
            t = 0.0;
        }
        let cap = self.s_max as f64;
        let s = s.min(cap);
        let t = t.min(cap);
        let (s0, t0) = ((s.floor() as usize).min(self.s_max - 1), (t.floor() as usize).min(self.s_max - 1));
        let (fs, ft) = (s - s0 as f64, t - t0 as f64);
        let g00 = self.node(s0, t0);
        let g11 = self.node(s0 + 1, t0 + 1);
        if fs >= ft {
            let g10 = self.node(s0 + 1, t0);
            g00 + fs * (g10 - g00) + ft * (g11 - g10)
        } else {
            let g01 = self.node(s0, t0 + 1);
            g00 + ft * (g01 - g00) + fs * (g11 - g01)
        }
    }

    /// Entropy per step `κ̃(u, l)`.
    pub fn kappa(&self, u: f64, l: f64) -> f64 {
        if u <= 1.0 + l.abs() + 1e-15 && l.abs() < 1e-12 && (u - 1.0).abs() < 1e-12 {
            return 0.0;
        }
        self.g_of(u, l) / u
    }

    /// Diagnostic hook: scale every node so validation suites can prove
    /// they catch a corrupted table.
    #[doc(hidden)]
    pub fn with_scaled_nodes(mut self, factor: f64) -> Self {
        for v in &mut self.g {
            *v *= factor;
        }
        self
    }

    /// `a·κ̃(a/h, l/h)` with the continuous extension `0` at `h = 0`.
    pub fn g_entropy(&self, a: f64, h: f64, l: f64) -> f64 {
        if h <= H_EPS {
            return 0.0;
        }
        if a < h + l.abs() - 1e-9 {
            return f64::NEG_INFINITY; // infeasible share
        }
        h * self.g_of(a / h, l / h)
    }
}

/// Interpolated disorder-averaged single-interface free energy `φ(μ)`.
pub struct PhiTable {
    width: u32,
    alpha: f64,
    beta: f64,
    n_samples: u32,
    seed: u64,
    /// Node `k` sits at `μ = 1 + 2k/L`.
    means: Vec<f64>,
    ses: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhiProvenance {
    pub width: u32,
    pub mu_max: f64,
    pub n_samples: u32,
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
}

impl PhiTable {
    /// Monte-Carlo table over disorder substreams `(seed, sample)`.
    pub fn build(
        width: u32,
        mu_max: f64,
        n_samples: u32,
        seed: u64,
        alpha: f64,
        beta: f64,
    ) -> Result<PhiTable> {
        if width == 0 || mu_max < 1.0 || n_samples < 2 {
            return Err(Error::InvalidSpec(
                "need width >= 1, mu_max >= 1, at least 2 samples".into(),
            ));
        }
        if alpha < beta.abs() {
            return Err(Error::InvalidSpec(format!(
                "interaction (α, β) = ({alpha}, {beta}) outside the cone α >= |β|"
            )));
        }
        let nodes = (((mu_max - 1.0) * width as f64) / 2.0).ceil() as usize + 1;
        let max_steps = width as u64 + 2 * (nodes as u64 - 1);
        let per_sample: Vec<Vec<f64>> = (0..n_samples)
            .into_par_iter()
            .map(|i| {
                let omega = MicroDisorder::sample(max_steps as usize, seed, i as u64);
                interface::interface_sweep(&omega, width, max_steps, alpha, beta)
            })
            .collect::<Result<_>>()?;
        let mut means = Vec::with_capacity(nodes);
        let mut ses = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let steps = (width as u64 + 2 * k as u64) as f64;
            let vals: Vec<f64> = per_sample.iter().map(|v| v[k] / steps).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            means.push(mean);
            ses.push((var / n).sqrt());
        }
        Ok(PhiTable {
            width,
            alpha,
            beta,
            n_samples,
            seed,
            means,
            ses,
        })
    }

    pub fn provenance(&self) -> PhiProvenance {
        PhiProvenance {
            width: self.width,
            mu_max: self.mu_max(),
            n_samples: self.n_samples,
            seed: self.seed,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu_max(&self) -> f64 {
        1.0 + 2.0 * (self.means.len() as f64 - 1.0) / self.width as f64
    }

    pub fn node_mu(&self, k: usize) -> f64 {
        1.0 + 2.0 * k as f64 / self.width as f64
    }

    pub fn node_means(&self) -> &[f64] {
        &self.means
    }

    pub fn node_ses(&self) -> &[f64] {
        &self.ses
    }

    /// `M(μ) = μ·φ(μ)` — the concave object — linear between nodes and held
    /// constant beyond the table (a conservative, concavity-preserving
    /// extension of an increasing concave function).
    pub fn mu_phi(&self, mu: f64) -> f64 {
        let node_m = |k: usize| self.node_mu(k) * self.means[k];
        let pos = (mu - 1.0) * self.width as f64 / 2.0;
        if pos <= 0.0 {
            return node_m(0);
        }
        let max = (self.means.len() - 1) as f64;
        if pos >= max {
            return node_m(self.means.len() - 1);
        }
        let k = pos.floor() as usize;
        let f = pos - k as f64;
        node_m(k) * (1.0 - f) + node_m(k + 1) * f
    }

    /// `φ(μ)`, from the interpolated `μ·φ(μ)`.
    pub fn phi(&self, mu: f64) -> f64 {
        self.mu_phi(mu) / mu.max(1.0)
    }

    /// `a·φ(a/h) = h·M(a/h)` with the continuous extension `0` at `h = 0`.
    pub fn g_interface(&self, a: f64, h: f64) -> f64 {
        if h <= H_EPS {
            return 0.0;
        }
        if a < h - 1e-9 {
            return f64::NEG_INFINITY; // infeasible share
        }
        h * self.mu_phi((a / h).max(1.0))
    }
}
