//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Every tolerance is pinned here. Grid-search comparisons are one-sided in
//! the defect-detecting direction (an optimizer must dominate every grid
//! point up to its tolerance); the slack grid points may leave *below* the
//! continuum optimum is bounded separately as a coarseness allowance.

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_rational::Rational64;
use num_traits::Zero;

use memulsion_core::brute;
use memulsion_core::check::random_columns;
use memulsion_core::column::psi_quenched_column;
use memulsion_core::disorder::MicroDisorder;
use memulsion_core::field::{sample_measures, BlockField, MeasureSampling, SampleStrategy};
use memulsion_core::interface::{mu_concavity_scan, phi_omega, phi_samples, InterfaceSpec};
use memulsion_core::lattice::{
    count_crossings_dp, count_crossings_stretch_formula, enumerate_crossings, kappa_l,
    ln_count, CrossingSpec,
};
use memulsion_core::oracle::{KappaTable, PhiTable};
use memulsion_core::psi_var::{psi_int_grid, psi_int_variational, psi_nint, psi_nint_grid};
use memulsion_core::simulate::{
    count_paths, finite_free_energy, full_log_partition, ModelInstance, SimOptions,
};
use memulsion_core::solver::{best_lower_bound, solve_ratio, PsiCurve, PsiTable};
use memulsion_core::{FrequencyMeasure, Letter};

/// Optimizer tolerance used throughout (criterion 8).
const TOL: f64 = 1e-6;
/// Documented grid tolerance for midpoint-concavity checks of tabulated
/// curves (criterion 9): covers the optimizer tolerance and the node noise
/// of the finite-width oracle tables (measured defects stay below 1e-4 on
/// the regression atoms; both interpolants are linear along fixed-slope
/// query lines, so they add no convexity of their own).
const EPS_CONCAVITY: f64 = 5e-4;
/// Allowance for how far a 1/64 grid may fall below the continuum optimum.
const GRID_COARSENESS: f64 = 5e-3;

fn kappa_table() -> &'static KappaTable {
    static T: OnceLock<KappaTable> = OnceLock::new();
    T.get_or_init(|| KappaTable::build(32, 13.0).expect("entropy table"))
}

fn phi_table() -> &'static PhiTable {
    static T: OnceLock<PhiTable> = OnceLock::new();
    T.get_or_init(|| PhiTable::build(8, 12.0, 32, 7, 2.0, 1.0).expect("interface table"))
}

fn all_specs(max_steps: u64) -> Vec<CrossingSpec> {
    let mut out = Vec::new();
    for steps in 1..=max_steps {
        for width in 1..=steps as u32 {
            for rise in -(steps as i64)..=steps as i64 {
                if let Ok(spec) = CrossingSpec::from_counts(width, steps, rise) {
                    out.push(spec);
                }
            }
        }
    }
    out
}

#[test]
fn criterion_01_path_count_oracle_equivalence() {
    let specs = all_specs(14);
    assert!(specs.len() >= 250, "family unexpectedly small: {}", specs.len());
    for spec in &specs {
        let listed = enumerate_crossings(spec, None, None).unwrap().len();
        let counted = count_crossings_dp(spec, None).unwrap();
        assert_eq!(
            BigUint::from(listed),
            counted,
            "count mismatch at {spec:?}"
        );
    }
    println!(
        "[PASS] criterion 01: DP count equals enumeration on {} crossing sets (exact)",
        specs.len()
    );
}

#[test]
fn criterion_02_stretch_formula_resolution() {
    // The printed closed form had a composition factor that fails already at
    // (L=1, u=3); the adopted factor C(vertical-1, r-1) must give 8 there.
    assert_eq!(
        count_crossings_stretch_formula(1, Rational64::from_integer(3)).unwrap(),
        BigUint::from(8u32)
    );
    let mut checked = 0;
    for steps in 1..=14u64 {
        for width in 1..=steps as u32 {
            if steps % width as u64 != 0 {
                continue;
            }
            let u = Rational64::new(steps as i64, width as i64);
            let formula = count_crossings_stretch_formula(width, u).unwrap();
            let mut enumerated = BigUint::zero();
            for rise in -(steps as i64)..=steps as i64 {
                if let Ok(spec) = CrossingSpec::from_counts(width, steps, rise) {
                    enumerated += enumerate_crossings(&spec, None, None).unwrap().len();
                }
            }
            assert_eq!(formula, enumerated, "stretch formula at L={width}, steps={steps}");
            checked += 1;
        }
    }
    println!("[PASS] criterion 02: stretch formula exact on {checked} endpoint-column counts");
}

#[test]
fn criterion_03_entropy_bounds_and_symmetry() {
    let ln3 = 3f64.ln();
    let specs = all_specs(14);
    for spec in &specs {
        let kappa = kappa_l(spec).unwrap();
        assert!(
            (0.0..=ln3 + 1e-12).contains(&kappa),
            "entropy {kappa} out of [0, ln 3] at {spec:?}"
        );
        assert_eq!(
            count_crossings_dp(spec, None).unwrap(),
            count_crossings_dp(&spec.mirrored(), None).unwrap(),
            "rise symmetry broken at {spec:?}"
        );
    }
    println!(
        "[PASS] criterion 03: {} entropies in [0, ln 3] with exact rise symmetry",
        specs.len()
    );
}

#[test]
fn criterion_04_interface_zero_case() {
    for width in [2u32, 4, 8] {
        let spec = InterfaceSpec::new(width, Rational64::from_integer(1), 2.0, 1.0).unwrap();
        for sample in 0..100u64 {
            let omega = MicroDisorder::sample(width as usize, 909, sample);
            let phi = phi_omega(&omega, &spec).unwrap();
            assert!(
                phi.abs() <= 1e-12,
                "φ(1) = {phi} at width {width}, sample {sample}"
            );
        }
    }
    println!("[PASS] criterion 04: φ(1) = 0 to 1e-12 on 300 disorder draws");
}

#[test]
fn criterion_05_zero_coupling_reduction() {
    for (width, steps) in [(2u32, 6u64), (2, 12), (4, 12), (8, 16)] {
        let spec = InterfaceSpec::from_counts(width, steps, 0.0, 0.0).unwrap();
        let omega = MicroDisorder::sample(steps as usize, 11, 0);
        let phi = phi_omega(&omega, &spec).unwrap();
        let kappa = kappa_l(&CrossingSpec::from_counts(width, steps, 0).unwrap()).unwrap();
        assert!(
            (phi - kappa).abs() <= 1e-10 * kappa.abs().max(1.0),
            "φ = {phi} vs κ̃ = {kappa}"
        );
    }
    let field = BlockField::sample(0.5, 24, 24, 77).unwrap();
    for (n, block, m_cap) in [(12u64, 2u32, 1u32), (10, 2, 2), (12, 3, 1)] {
        let instance = ModelInstance {
            n,
            block_size: block,
            m_cap,
            alpha: 0.0,
            beta: 0.0,
            omega: MicroDisorder::sample(n as usize, 5, 0),
            field: field.clone(),
        };
        let lnz = full_log_partition(&instance, &SimOptions::default()).unwrap();
        let count = count_paths(n, block, m_cap, &SimOptions::default()).unwrap();
        let expect = ln_count(&count).unwrap();
        assert!(
            (lnz - expect).abs() <= 1e-10 * expect.abs().max(1.0),
            "ln Z = {lnz} vs ln|paths| = {expect} at n={n}"
        );
    }
    println!("[PASS] criterion 05: zero-coupling reductions within 1e-10 relative error");
}

#[test]
fn criterion_06_concentration_trend() {
    let sample_std = |width: u32| {
        let spec = InterfaceSpec::new(width, Rational64::from_integer(3), 2.0, 1.0).unwrap();
        let values = phi_samples(&spec, 200, 2026).unwrap();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let s4 = sample_std(4);
    let s16 = sample_std(16);
    assert!(
        s16 < s4,
        "sample std did not decrease: L=4 gives {s4}, L=16 gives {s16}"
    );
    println!("[PASS] criterion 06: φ sample std decreases {s4:.5} -> {s16:.5} from L=4 to L=16");
}

#[test]
fn criterion_07_column_psi_oracle() {
    let cases = random_columns(50, 424242, 12);
    for (i, (theta, u, width)) in cases.iter().enumerate() {
        let steps = (*u * Rational64::from_integer(*width as i64)).to_integer() as usize;
        let omega = MicroDisorder::sample(steps, 6060, i as u64);
        let direct = psi_quenched_column(&omega, theta, *u, *width, 2.0, 1.0).unwrap();
        let brute = brute::psi_quenched_column_brute(&omega, theta, *u, *width, 2.0, 1.0).unwrap();
        assert!(
            (direct - brute).abs() <= 1e-10 * brute.abs().max(1.0),
            "column {i}: DP {direct} vs enumeration {brute}"
        );
    }
    println!("[PASS] criterion 07: column free energy matches enumeration on 50 random columns");
}

#[test]
fn criterion_08_variational_vs_grid() {
    let kappa = kappa_table();
    let phi = phi_table();
    let int_instances: [(f64, f64, f64); 10] = [
        (3.0, 0.5, 0.5),
        (4.0, 1.0, 1.0),
        (4.0, 1.5, 0.5),
        (3.5, 0.25, 1.0),
        (5.0, 2.0, 1.0),
        (2.5, 0.5, 0.75),
        (6.0, 1.0, 2.0),
        (4.5, 0.0, 1.5),
        (3.0, 1.0, 0.0),
        (5.5, 2.5, 1.5),
    ];
    for &(u, l_a, l_b) in &int_instances {
        let opt = psi_int_variational(u, l_a, l_b, 2.0, 1.0, kappa, phi, TOL)
            .unwrap()
            .value;
        let grid = psi_int_grid(u, l_a, l_b, 2.0, 1.0, kappa, phi, 64).unwrap();
        assert!(
            opt >= grid - 2.0 * TOL,
            "ψ_int({u}, {l_a}, {l_b}): optimizer {opt} below 1/64 grid {grid}"
        );
        assert!(
            opt <= grid + GRID_COARSENESS,
            "ψ_int({u}, {l_a}, {l_b}): optimizer {opt} suspiciously above grid {grid}"
        );
    }
    let reach_instances: [(f64, f64, Letter); 10] = [
        (3.0, 1.0, Letter::A),
        (3.0, 1.0, Letter::B),
        (4.0, 0.5, Letter::A),
        (4.0, 0.5, Letter::B),
        (2.5, 1.25, Letter::B),
        (5.0, 2.0, Letter::A),
        (2.0, 0.5, Letter::B),
        (6.0, 1.5, Letter::B),
        (3.5, 0.25, Letter::A),
        (4.5, 3.0, Letter::B),
    ];
    for &(u, l_int, chi0) in &reach_instances {
        let opt = psi_nint(u, 0.0, Some(l_int), chi0, 2, 2.0, 1.0, kappa, phi, TOL).unwrap();
        let grid = psi_nint_grid(u, l_int, chi0, 2.0, 1.0, kappa, phi, 64).unwrap();
        assert!(
            opt >= grid - 2.0 * TOL,
            "ψ_reach({u}, {l_int}): optimizer {opt} below 1/64 grid {grid}"
        );
        assert!(opt <= grid + GRID_COARSENESS);
    }
    println!("[PASS] criterion 08: variational optimizers dominate 1/64 grids on 20 instances (tol {TOL})");
}

#[test]
fn criterion_09_concavity_suites() {
    // u·ψ(Θ, u) midpoint concavity for tables built over sampled atoms.
    let field = BlockField::sample(0.5, 32, 24, 2121).unwrap();
    let cfg = MeasureSampling {
        m_cap: 1,
        step_cap: 3,
        n_cols: 6,
        b_grid: 2,
        window_radius: 3,
        seed: 33,
    };
    let measures = sample_measures(&field, &cfg, &SampleStrategy::RandomWalk, 3).unwrap();
    let mut curves = 0;
    for rho in &measures {
        let table = PsiTable::build(rho, 2.0, 1.0, kappa_table(), phi_table(), TOL, 33).unwrap();
        for curve in &table.curves {
            let defect = curve.concavity_defect();
            assert!(
                defect <= EPS_CONCAVITY,
                "u·ψ concavity defect {defect} beyond the documented {EPS_CONCAVITY}"
            );
            curves += 1;
        }
    }
    // μ·φ_L(μ): exact monotone concave check at zero coupling, then the
    // disordered case within two standard errors.
    let grid: Vec<Rational64> = (0..6).map(|k| Rational64::new(4 + 2 * k, 4)).collect();
    let clean = mu_concavity_scan(4, &grid, 0.0, 0.0, 4, 1).unwrap();
    assert!(clean.concave_ok && clean.increasing_ok);
    let noisy = mu_concavity_scan(8, &grid, 2.0, 1.0, 200, 17).unwrap();
    assert!(
        noisy.concave_ok,
        "μφ concavity violated: {}",
        noisy.max_concavity_violation
    );
    assert!(noisy.increasing_ok, "μφ decreased: {}", noisy.max_decrease);
    println!(
        "[PASS] criterion 09: u·ψ concave on {curves} curves (eps {EPS_CONCAVITY}); μφ concave and increasing"
    );
}

#[test]
fn criterion_10_fractional_solver() {
    // Synthetic instances against the aligned dense u-grid (129 ⊇ nodes).
    let make = |weights: &[f64]| {
        let atoms = random_columns(weights.len(), 3131, 8)
            .into_iter()
            .zip(weights)
            .map(|((theta, _, _), w)| (theta, *w))
            .collect();
        FrequencyMeasure {
            atoms,
            support_cap: (1, 4),
        }
    };
    let shapes: Vec<Vec<PsiCurve>> = vec![
        vec![PsiCurve::from_fn(1.0, 4.0, 65, |u| Ok(0.55 - 0.07 * (u - 2.2) * (u - 2.2))).unwrap()],
        vec![
            PsiCurve::from_fn(1.0, 4.0, 65, |u| Ok(0.5 - 0.06 * (u - 2.0) * (u - 2.0))).unwrap(),
            PsiCurve::from_fn(1.5, 4.0, 65, |u| Ok(0.2 + 0.25 / u)).unwrap(),
        ],
        vec![
            PsiCurve::from_fn(1.0, 4.0, 65, |u| Ok(0.4 - 0.03 * (u - 1.5) * (u - 1.5))).unwrap(),
            PsiCurve::from_fn(2.0, 4.0, 65, |u| Ok(0.1 + 0.3 / u)).unwrap(),
            PsiCurve::from_fn(1.5, 4.0, 65, |u| Ok(0.35 - 0.02 * u)).unwrap(),
        ],
    ];
    let weights: Vec<Vec<f64>> = vec![vec![1.0], vec![0.5, 0.5], vec![0.2, 0.5, 0.3]];
    for (curves, ws) in shapes.into_iter().zip(weights) {
        let rho = make(&ws);
        let table = PsiTable::from_curves(curves, 2.0, 1.0);
        let out = solve_ratio(&rho, &table, 1e-8, 200).unwrap();
        let grid = brute::ratio_grid_search(&rho, &table, 129).unwrap();
        assert!(
            (out.value - grid).abs() <= 3e-6,
            "{} atoms: solver {} vs grid {grid}",
            ws.len(),
            out.value
        );
        assert!(out.residual <= 1e-8);
        let mut evals = out.f_evals.clone();
        evals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for pair in evals.windows(2) {
            assert!(
                pair[1].1 < pair[0].1,
                "F not strictly decreasing: {:?} -> {:?}",
                pair[0],
                pair[1]
            );
        }
        if ws.len() == 1 {
            assert_eq!(out.value, table.curves[0].max_psi(), "single atom not exact");
        }
    }
    println!("[PASS] criterion 10: ratio solver within 3e-6 of grid search, F strictly decreasing");
}

#[test]
fn criterion_11_cap_monotonicity_and_endpoint_sandwich() {
    let field = BlockField::sample(0.5, 24, 24, 555).unwrap();
    // ln Z nondecreasing in the vertical cap M (path sets are nested); the
    // 1e-12 slack is floating-point accumulation only.
    for (n, block, seed) in [(12u64, 2u32, 0u64), (16, 2, 1), (12, 3, 2)] {
        let mut prev = f64::NEG_INFINITY;
        for m_cap in 1..=4u32 {
            let instance = ModelInstance {
                n,
                block_size: block,
                m_cap,
                alpha: 2.0,
                beta: 1.0,
                omega: MicroDisorder::sample(n as usize, 8080, seed),
                field: field.clone(),
            };
            let lnz = full_log_partition(&instance, &SimOptions::default()).unwrap();
            assert!(
                lnz >= prev - 1e-12,
                "ln Z decreased in M at n={n}: {prev} -> {lnz}"
            );
            prev = lnz;
        }
    }
    // Boundary-endpoint sandwich: ln Z - c·L <= ln Z* <= ln Z with the
    // pinned c = 2(ln 3 + α) (rerouting at most ~2L boundary steps, each
    // worth at most ln 3 in entropy and α in energy).
    let c = 2.0 * (3f64.ln() + 2.0);
    let mut measured: f64 = 0.0;
    for (n, block, seed) in [(12u64, 2u32, 3u64), (16, 2, 4), (12, 3, 5), (18, 3, 6)] {
        let instance = ModelInstance {
            n,
            block_size: block,
            m_cap: 1,
            alpha: 2.0,
            beta: 1.0,
            omega: MicroDisorder::sample(n as usize, 8181, seed),
            field: field.clone(),
        };
        let full = full_log_partition(&instance, &SimOptions::default()).unwrap();
        let star = full_log_partition(
            &instance,
            &SimOptions {
                per_column_cap: None,
                boundary_endpoint: true,
            },
        )
        .unwrap();
        assert!(star <= full + 1e-12, "Z* exceeded Z at n={n}");
        let gap_per_block = (full - star) / block as f64;
        measured = measured.max(gap_per_block);
        assert!(
            gap_per_block <= c,
            "sandwich broken at n={n}: gap/L = {gap_per_block} > c = {c}"
        );
    }
    println!(
        "[PASS] criterion 11: ln Z monotone in M; endpoint sandwich holds (measured c = {measured:.3}, pinned {c:.3})"
    );
}

struct GoldenRun {
    mean_fn: f64,
    bound: f64,
    gap: f64,
}

fn golden_pipeline() -> GoldenRun {
    let alpha = 2.0;
    let beta = 1.0;
    let field = BlockField::sample(0.5, 64, 48, 4242).unwrap();
    let cfg = MeasureSampling {
        m_cap: 1,
        step_cap: 3,
        n_cols: 8,
        b_grid: 2,
        window_radius: 3,
        seed: 99,
    };
    let measures = sample_measures(&field, &cfg, &SampleStrategy::RandomWalk, 6).unwrap();
    let bound = best_lower_bound(
        &measures,
        alpha,
        beta,
        kappa_table(),
        phi_table(),
        TOL,
        33,
        200,
    )
    .unwrap();
    let n = 32u64;
    let samples = 8u64;
    let mut total = 0.0;
    for sample in 0..samples {
        let instance = ModelInstance {
            n,
            block_size: 2,
            m_cap: 1,
            alpha,
            beta,
            omega: MicroDisorder::sample(n as usize, 31, sample),
            field: field.clone(),
        };
        total += finite_free_energy(&instance, &SimOptions::default()).unwrap();
    }
    let mean_fn = total / samples as f64;
    GoldenRun {
        mean_fn,
        bound: bound.value,
        gap: mean_fn - bound.value,
    }
}

#[test]
fn criterion_12_end_to_end_coherence() {
    // Fixed golden instance: p = 1/2, M = 1, m = 3, α = 2, β = 1. The gap
    // between the finite-size mean free energy and the sampled-measure
    // variational lower bound is recorded; no convergence tolerance is
    // claimed — the infinite-volume limit is out of reach at this scale,
    // so only finiteness and bit-exact reproducibility are asserted.
    let first = golden_pipeline();
    let second = golden_pipeline();
    assert!(first.mean_fn.is_finite() && first.bound.is_finite());
    assert_eq!(first.mean_fn.to_bits(), second.mean_fn.to_bits());
    assert_eq!(first.bound.to_bits(), second.bound.to_bits());
    assert_eq!(first.gap.to_bits(), second.gap.to_bits());
    println!(
        "[PASS] criterion 12: golden run reproducible; mean f_32 = {:.6}, variational bound = {:.6}, gap = {:.6}",
        first.mean_fn, first.bound, first.gap
    );
}
