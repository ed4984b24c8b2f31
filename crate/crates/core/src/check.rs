//! The self-check suite: every oracle-backed cross-validation at reduced
//! size, runnable from the command line. Each item is named, independent,
//! and fast; the whole suite stays well under a minute.

use num_bigint::BigUint;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::brute;
use crate::column::{geometry, psi_quenched_column, ColumnDisorder, ColumnType};
use crate::disorder::{Letter, MicroDisorder};
use crate::error::Result;
use crate::field::{sample_measures, BlockField, MeasureSampling, SampleStrategy};
use crate::interface::{interface_log_partition, phi_mean, phi_omega, InterfaceSpec};
use crate::lattice::{
    count_crossings_dp, count_crossings_stretch_formula, enumerate_crossings, kappa_l,
    CrossingSpec,
};
use crate::oracle::{KappaTable, PhiTable};
use crate::psi_var::{psi_int_grid, psi_int_variational, psi_nint, psi_nint_grid};
use crate::rng::Stream;
use crate::simulate::{count_paths, full_log_partition, ModelInstance, SimOptions};
use crate::solver::{solve_ratio, PsiCurve, PsiTable};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckItem> {
        self.items.iter().find(|i| !i.passed)
    }
}

fn item(name: &str, result: Result<String>) -> CheckItem {
    match result {
        Ok(detail) => CheckItem {
            name: name.into(),
            passed: true,
            detail,
        },
        Err(e) => CheckItem {
            name: name.into(),
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn ensure(cond: bool, msg: impl Fn() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(crate::error::Error::InvalidSpec(msg()))
    }
}

fn crossing_specs(max_steps: u64) -> Vec<CrossingSpec> {
    let mut out = Vec::new();
    for steps in 1..=max_steps {
        for width in 1..=steps as u32 {
            for rise in -(steps as i64)..=steps as i64 {
                if let Ok(s) = CrossingSpec::from_counts(width, steps, rise) {
                    out.push(s);
                }
            }
        }
    }
    out
}

fn check_count_vs_enumeration() -> Result<String> {
    let specs = crossing_specs(10);
    for spec in &specs {
        let listed = enumerate_crossings(spec, None, None)?.len();
        let counted = count_crossings_dp(spec, None)?;
        ensure(BigUint::from(listed) == counted, || {
            format!("count mismatch at {spec:?}: {listed} vs {counted}")
        })?;
    }
    Ok(format!("{} crossing sets match enumeration exactly", specs.len()))
}

fn check_stretch_formula() -> Result<String> {
    let eight = count_crossings_stretch_formula(1, Rational64::from_integer(3))?;
    ensure(eight == BigUint::from(8u32), || {
        format!("(L=1, u=3) gave {eight}, expected 8")
    })?;
    let mut checked = 0;
    for steps in 1..=10u64 {
        for width in 1..=steps as u32 {
            if steps % width as u64 != 0 {
                continue;
            }
            let u = Rational64::new(steps as i64, width as i64);
            let formula = count_crossings_stretch_formula(width, u)?;
            let mut direct = BigUint::from(0u32);
            for rise in -(steps as i64)..=steps as i64 {
                if let Ok(s) = CrossingSpec::from_counts(width, steps, rise) {
                    direct += count_crossings_dp(&s, None)?;
                }
            }
            ensure(formula == direct, || {
                format!("stretch formula at (L={width}, steps={steps}): {formula} vs {direct}")
            })?;
            checked += 1;
        }
    }
    Ok(format!("stretch formula exact on {checked} endpoint-column counts"))
}

fn check_entropy_bounds() -> Result<String> {
    let specs = crossing_specs(12);
    let ln3 = 3f64.ln();
    for spec in &specs {
        let k = kappa_l(spec)?;
        ensure((0.0..=ln3 + 1e-12).contains(&k), || {
            format!("entropy {k} outside [0, ln 3] at {spec:?}")
        })?;
        ensure(
            count_crossings_dp(spec, None)? == count_crossings_dp(&spec.mirrored(), None)?,
            || format!("rise symmetry broken at {spec:?}"),
        )?;
    }
    Ok(format!("{} entropies within bounds and rise-symmetric", specs.len()))
}

fn check_interface_zero() -> Result<String> {
    for width in [2u32, 4, 8] {
        let spec = InterfaceSpec::new(width, Rational64::from_integer(1), 2.0, 1.0)?;
        for s in 0..25u64 {
            let omega = MicroDisorder::sample(width as usize, 17, s);
            let phi = phi_omega(&omega, &spec)?;
            ensure(phi.abs() <= 1e-12, || {
                format!("φ(1) = {phi} at L = {width}, sample {s}")
            })?;
        }
    }
    Ok("φ(1) = 0 exactly on 75 disorder draws".into())
}

fn check_zero_coupling() -> Result<String> {
    for (width, steps) in [(2u32, 8u64), (4, 12)] {
        let spec = InterfaceSpec::from_counts(width, steps, 0.0, 0.0)?;
        let omega = MicroDisorder::sample(steps as usize, 3, 0);
        let phi = phi_omega(&omega, &spec)?;
        let kappa = kappa_l(&CrossingSpec::from_counts(width, steps, 0)?)?;
        ensure((phi - kappa).abs() <= 1e-10 * kappa.abs().max(1.0), || {
            format!("φ = {phi} vs κ̃ = {kappa} at zero coupling")
        })?;
    }
    let field = BlockField::sample(0.5, 16, 16, 5)?;
    let instance = ModelInstance {
        n: 10,
        block_size: 2,
        m_cap: 1,
        alpha: 0.0,
        beta: 0.0,
        omega: MicroDisorder::sample(10, 4, 0),
        field,
    };
    let lnz = full_log_partition(&instance, &SimOptions::default())?;
    let count = count_paths(10, 2, 1, &SimOptions::default())?;
    let expect = crate::lattice::ln_count(&count)?;
    ensure((lnz - expect).abs() <= 1e-10 * expect, || {
        format!("full model: {lnz} vs path count {expect}")
    })?;
    Ok("zero-coupling reductions hold for the interface and the full model".into())
}

fn check_interface_brute() -> Result<String> {
    for (width, steps, alpha, beta, seed) in
        [(2u32, 4u64, 1.0, 1.0, 1u64), (2, 6, 2.0, -1.0, 2), (3, 9, 1.5, 0.5, 3)]
    {
        let spec = InterfaceSpec::from_counts(width, steps, alpha, beta)?;
        let omega = MicroDisorder::sample(steps as usize, 29, seed);
        let direct = interface_log_partition(&omega, &spec)?;
        let brute = brute::interface_log_partition_brute(&omega, &spec)?;
        ensure((direct - brute).abs() <= 1e-10 * brute.abs().max(1.0), || {
            format!("interface DP {direct} vs enumeration {brute}")
        })?;
    }
    Ok("interface DP matches path-by-path enumeration".into())
}

/// A reproducible stream of small random column instances with at most
/// `max_steps` lattice steps each, for enumeration-backed validation.
pub fn random_columns(count: usize, seed: u64, max_steps: u64) -> Vec<(ColumnType, Rational64, u32)> {
    let mut out = Vec::new();
    let mut stream = 0u64;
    while out.len() < count {
        let mut rng = Stream::new(seed, stream);
        stream += 1;
        let width = 2 + rng.below(2) as u32;
        let letters: Vec<Letter> = (0..9)
            .map(|_| if rng.coin() { Letter::B } else { Letter::A })
            .collect();
        let chi = ColumnDisorder::from_window(letters).unwrap();
        let delta_pi = rng.range_i64(-1, 1) as i32;
        let b0 = Rational64::new(rng.range_i64(1, width as i64), width as i64);
        let b1 = Rational64::new(rng.range_i64(1, width as i64), width as i64);
        let x = if rng.coin() { 2 } else { 1 };
        let Ok(theta) = ColumnType::new(chi, delta_pi, b0, b1, x) else {
            continue;
        };
        let Ok(geo) = geometry(&theta) else { continue };
        let t = geo.t_theta;
        let extra = rng.range_i64(0, 1) * 2;
        let u = t + Rational64::new(extra, width as i64);
        let steps = u * Rational64::from_integer(width as i64);
        if !steps.is_integer() || steps.to_integer() as u64 > max_steps {
            continue;
        }
        // An entrance or exit sitting on an interface empties the avoiding
        // class; skip those degenerate combinations.
        if geo.k_theta == 0 && theta.x == 1 {
            let set = geo.interfaces.height_set();
            let exit = Rational64::from_integer(theta.delta_pi as i64) + theta.b1;
            let on = |v: Rational64| v.is_integer() && set.contains(&v.to_integer());
            if on(theta.b0) || on(exit) {
                continue;
            }
        }
        out.push((theta, u, width));
    }
    out
}

fn check_column_psi_brute() -> Result<String> {
    let cases = random_columns(10, 101, 10);
    for (i, (theta, u, width)) in cases.iter().enumerate() {
        let steps = (*u * Rational64::from_integer(*width as i64)).to_integer() as usize;
        let omega = MicroDisorder::sample(steps, 57, i as u64);
        let direct = psi_quenched_column(&omega, theta, *u, *width, 1.5, 0.5)?;
        let brute = brute::psi_quenched_column_brute(&omega, theta, *u, *width, 1.5, 0.5)?;
        ensure((direct - brute).abs() <= 1e-10 * brute.abs().max(1.0), || {
            format!("column {i}: DP {direct} vs enumeration {brute}")
        })?;
    }
    Ok("column DP matches enumeration on 10 random columns".into())
}

fn check_variational_vs_grid() -> Result<String> {
    let kappa = KappaTable::build(6, 8.0)?;
    let phi = PhiTable::build(6, 8.0, 8, 11, 2.0, 1.0)?;
    let tol = 1e-6;
    for (u, l_a, l_b) in [(3.0, 0.5, 0.5), (4.0, 1.0, 0.5)] {
        let opt = psi_int_variational(u, l_a, l_b, 2.0, 1.0, &kappa, &phi, tol)?.value;
        let grid = psi_int_grid(u, l_a, l_b, 2.0, 1.0, &kappa, &phi, 32)?;
        ensure(opt >= grid - 2.0 * tol, || {
            format!("ψ_int optimizer {opt} below grid {grid}")
        })?;
    }
    for (u, l_int, chi0) in [(3.0, 1.0, Letter::B), (2.5, 0.5, Letter::A)] {
        let opt = psi_nint(u, 0.0, Some(l_int), chi0, 2, 2.0, 1.0, &kappa, &phi, tol)?;
        let grid = psi_nint_grid(u, l_int, chi0, 2.0, 1.0, &kappa, &phi, 32)?;
        ensure(opt >= grid - 2.0 * tol, || {
            format!("ψ_nint optimizer {opt} below grid {grid}")
        })?;
    }
    Ok("variational optimizers dominate their dense grids".into())
}

fn dummy_two_atom_measure() -> crate::field::FrequencyMeasure {
    let a = ColumnType::new(
        ColumnDisorder::uniform(Letter::A, 3),
        0,
        Rational64::new(1, 2),
        Rational64::new(1, 2),
        1,
    )
    .unwrap();
    let b = ColumnType::new(
        ColumnDisorder::uniform(Letter::B, 3),
        0,
        Rational64::new(1, 2),
        Rational64::new(1, 2),
        1,
    )
    .unwrap();
    crate::field::FrequencyMeasure {
        atoms: vec![(a, 0.6), (b, 0.4)],
        support_cap: (1, 4),
    }
}

fn check_ratio_solver() -> Result<String> {
    let rho = dummy_two_atom_measure();
    let curves = vec![
        PsiCurve::from_fn(1.0, 4.0, 65, |u| Ok(0.5 - 0.06 * (u - 2.0) * (u - 2.0)))?,
        PsiCurve::from_fn(1.5, 4.0, 65, |u| Ok(0.2 + 0.2 / u))?,
    ];
    let table = PsiTable::from_curves(curves, 1.0, 0.0);
    let out = solve_ratio(&rho, &table, 1e-8, 200)?;
    let grid = brute::ratio_grid_search(&rho, &table, 129)?;
    ensure((out.value - grid).abs() <= 3e-6, || {
        format!("solver {} vs grid {grid}", out.value)
    })?;
    let mut sorted = out.f_evals.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for pair in sorted.windows(2) {
        ensure(pair[1].1 < pair[0].1, || {
            format!("F not strictly decreasing between {:?} and {:?}", pair[0], pair[1])
        })?;
    }
    let single = crate::field::FrequencyMeasure {
        atoms: vec![(rho.atoms[0].0.clone(), 1.0)],
        support_cap: rho.support_cap,
    };
    let curve = PsiCurve::from_fn(1.0, 4.0, 65, |u| Ok(0.5 - 0.06 * (u - 2.0) * (u - 2.0)))?;
    let exact = curve.max_psi();
    let one = solve_ratio(&single, &PsiTable::from_curves(vec![curve], 1.0, 0.0), 1e-8, 200)?;
    ensure(one.value == exact, || {
        format!("single atom: {} vs exact {exact}", one.value)
    })?;
    Ok("ratio solver matches the dense grid and the single-atom maximum".into())
}

fn check_full_model() -> Result<String> {
    let field = BlockField::sample(0.5, 16, 16, 23)?;
    for seed in 0..3u64 {
        let instance = ModelInstance {
            n: 6,
            block_size: 2,
            m_cap: 1,
            alpha: 1.5,
            beta: 0.5,
            omega: MicroDisorder::sample(6, 31, seed),
            field: field.clone(),
        };
        let direct = full_log_partition(&instance, &SimOptions::default())?;
        let brute = brute::full_log_partition_brute(&instance, &SimOptions::default())?;
        ensure((direct - brute).abs() <= 1e-10 * brute.abs().max(1.0), || {
            format!("full model {direct} vs enumeration {brute}")
        })?;
    }
    // Monotone in the vertical cap, and the boundary-endpoint sandwich.
    let instance = ModelInstance {
        n: 12,
        block_size: 2,
        m_cap: 1,
        alpha: 1.5,
        beta: 0.5,
        omega: MicroDisorder::sample(12, 37, 0),
        field: field.clone(),
    };
    let z1 = full_log_partition(&instance, &SimOptions::default())?;
    let z2 = full_log_partition(&ModelInstance { m_cap: 2, ..instance.clone() }, &SimOptions::default())?;
    ensure(z2 >= z1 - 1e-12, || format!("cap monotonicity broken: {z1} vs {z2}"))?;
    let star = full_log_partition(
        &instance,
        &SimOptions { per_column_cap: None, boundary_endpoint: true },
    )?;
    let c = 3.0 * (3f64.ln() + instance.alpha);
    ensure(star <= z1 + 1e-12 && star >= z1 - c * instance.block_size as f64, || {
        format!("endpoint sandwich broken: {star} not in [{} , {z1}]", z1 - c * 2.0)
    })?;
    Ok("full model matches enumeration; cap monotone; endpoint sandwich holds".into())
}

fn check_determinism() -> Result<String> {
    let spec = InterfaceSpec::from_counts(2, 6, 2.0, 1.0)?;
    let a = phi_mean(&spec, 8, 99)?;
    let b = phi_mean(&spec, 8, 99)?;
    ensure(a.mean.to_bits() == b.mean.to_bits(), || "φ mean not reproducible".into())?;
    let f1 = BlockField::sample(0.5, 12, 12, 7)?;
    let f2 = BlockField::sample(0.5, 12, 12, 7)?;
    ensure(f1 == f2, || "field sampling not reproducible".into())?;
    let cfg = MeasureSampling {
        m_cap: 1,
        step_cap: 3,
        n_cols: 2,
        b_grid: 2,
        window_radius: 3,
        seed: 5,
    };
    let m1 = sample_measures(&f1, &cfg, &SampleStrategy::RandomWalk, 3)?;
    let m2 = sample_measures(&f2, &cfg, &SampleStrategy::RandomWalk, 3)?;
    for (a, b) in m1.iter().zip(&m2) {
        ensure(a.atoms == b.atoms, || "measure sampling not reproducible".into())?;
    }
    Ok("sampling paths are bit-reproducible".into())
}

/// Validate a κ̃ table against exact counts on its own lattice; exposed so
/// a corrupted table is reported as a named failure.
pub fn check_kappa_table(table: &KappaTable) -> CheckItem {
    let run = || -> Result<String> {
        let prov = table.provenance();
        let width = prov.width;
        for (steps, rise) in [(width as u64, 0i64), (3 * width as u64, 0), (2 * width as u64, width as i64)] {
            let spec = CrossingSpec::from_counts(width, steps, rise)?;
            let exact = kappa_l(&spec)?;
            let got = table.kappa(spec.u(), spec.l());
            ensure((exact - got).abs() <= 1e-9, || {
                format!("κ̃ table node ({steps}, {rise}): {got} vs exact {exact}")
            })?;
        }
        Ok("κ̃ table nodes match exact counts".into())
    };
    item("kappa-table-vs-exact", run())
}

/// Run every cross-validation at reduced size.
pub fn run_selfcheck() -> CheckReport {
    let mut items = vec![
        item("count-dp-vs-enumeration", check_count_vs_enumeration()),
        item("stretch-formula-vs-enumeration", check_stretch_formula()),
        item("entropy-bounds-and-symmetry", check_entropy_bounds()),
        item("interface-zero-at-mu-one", check_interface_zero()),
        item("zero-coupling-reductions", check_zero_coupling()),
        item("interface-dp-vs-enumeration", check_interface_brute()),
        item("column-psi-vs-enumeration", check_column_psi_brute()),
        item("variational-vs-dense-grid", check_variational_vs_grid()),
        item("ratio-solver-vs-dense-grid", check_ratio_solver()),
        item("full-model-vs-enumeration", check_full_model()),
        item("deterministic-sampling", check_determinism()),
    ];
    if let Ok(table) = KappaTable::build(4, 6.0) {
        items.push(check_kappa_table(&table));
    }
    CheckReport { items }
}
