//! Subcommand implementations.
//!
//! Every run resolves its parameters (config file first, CLI flags win),
//! embeds the resolved parameter set in its output record, and re-runs
//! bit-identically from that record via `--config`.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use memulsion_core::column::{geometry, psi_quenched_column, ColumnClass, ColumnDisorder, ColumnType};
use memulsion_core::field::{
    sample_measures, BlockField, FrequencyMeasure, MeasureSampling, SampleStrategy,
};
use memulsion_core::interface::{mu_concavity_scan, phi_mean, InterfaceSpec, MuScan, PhiEstimate};
use memulsion_core::lattice::{
    count_crossings_dp, enumerate_crossings, kappa_l, kappa_limit, kappa_restricted_gap,
    ln_count, CrossingSpec, KappaLimit, VerticalCorridor,
};
use memulsion_core::oracle::{KappaProvenance, KappaTable, PhiProvenance, PhiTable};
use memulsion_core::psi_var::{psi_for_type, psi_int_variational, Allocation};
use memulsion_core::simulate::{
    convergence_report, finite_free_energy, ConvergenceConfig, ConvergenceReport, ModelInstance,
    SimOptions,
};
use memulsion_core::solver::best_lower_bound;
use memulsion_core::MicroDisorder;

use crate::util::{
    compute, emit, load_config, parse_ratio_arg, pick, require, schema, write_csv, CliError,
};

const LN3: f64 = 1.0986122886681098;

fn rat_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

// ---------------------------------------------------------------- kappa --

#[derive(Args, Clone, Default)]
pub struct KappaArgs {
    /// Load parameters from a stored record or config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the per-width sweep as CSV here (with --widths).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Column width L.
    #[arg(long = "L")]
    pub width: Option<u32>,
    /// Steps per width unit (rational, e.g. 3 or 7/2).
    #[arg(long)]
    pub u: Option<String>,
    /// Net rise per width unit (rational, signed).
    #[arg(long)]
    pub l: Option<String>,
    /// Corridor lower bound B0 (rational, width units).
    #[arg(long = "B0")]
    pub corridor_lo: Option<String>,
    /// Corridor upper bound B1.
    #[arg(long = "B1")]
    pub corridor_hi: Option<String>,
    /// Cross-check the count by exhaustive enumeration.
    #[arg(long)]
    pub enumerate: bool,
    /// Enumeration cap in steps (default 18).
    #[arg(long)]
    pub cap: Option<u64>,
    /// Also evaluate at these widths and report the running maximum.
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<u32>>,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct KappaParams {
    #[serde(rename = "L")]
    pub width: u32,
    pub u: String,
    pub l: String,
    #[serde(rename = "B0", skip_serializing_if = "Option::is_none")]
    pub corridor_lo: Option<String>,
    #[serde(rename = "B1", skip_serializing_if = "Option::is_none")]
    pub corridor_hi: Option<String>,
    pub enumerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<u32>>,
}

#[derive(Serialize)]
struct KappaResult {
    steps: u64,
    rise: i64,
    /// Exact path count, decimal.
    count: String,
    kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    restricted: Option<KappaRestricted>,
    #[serde(skip_serializing_if = "Option::is_none")]
    enumerated: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    limit: Option<KappaLimit>,
}

#[derive(Serialize)]
struct KappaRestricted {
    count: String,
    kappa: f64,
    gap: f64,
}

pub fn run_kappa(args: KappaArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: Option<KappaParams> = args.config.as_deref().map(load_config).transpose()?;
    let params = KappaParams {
        width: require(pick(args.width, file.as_ref().map(|f| f.width)), "L")?,
        u: require(pick(args.u, file.as_ref().map(|f| f.u.clone())), "u")?,
        l: require(pick(args.l, file.as_ref().map(|f| f.l.clone())), "l")?,
        corridor_lo: pick(args.corridor_lo, file.as_ref().and_then(|f| f.corridor_lo.clone())),
        corridor_hi: pick(args.corridor_hi, file.as_ref().and_then(|f| f.corridor_hi.clone())),
        enumerate: args.enumerate || file.as_ref().is_some_and(|f| f.enumerate),
        cap: pick(args.cap, file.as_ref().and_then(|f| f.cap)),
        widths: pick(args.widths, file.as_ref().and_then(|f| f.widths.clone())),
    };
    let u = parse_ratio_arg(&params.u, "u")?;
    let l = parse_ratio_arg(&params.l, "l")?;
    let spec = CrossingSpec::new(params.width, u, l).map_err(schema)?;
    let corridor = match (&params.corridor_lo, &params.corridor_hi) {
        (Some(lo), Some(hi)) => {
            let c = VerticalCorridor::new(
                parse_ratio_arg(lo, "B0")?,
                parse_ratio_arg(hi, "B1")?,
            );
            c.bounds_for(&spec).map_err(schema)?;
            Some(c)
        }
        (None, None) => None,
        _ => return Err(CliError::Schema("--B0 and --B1 must be given together".into())),
    };

    let count = count_crossings_dp(&spec, None).map_err(compute)?;
    let kappa = kappa_l(&spec).map_err(compute)?;
    if !(0.0..=LN3 + 1e-12).contains(&kappa) {
        return Err(CliError::Invariant(format!("κ̃ = {kappa} outside [0, ln 3]")));
    }
    let restricted = corridor
        .as_ref()
        .map(|c| -> Result<KappaRestricted, CliError> {
            let rcount = count_crossings_dp(&spec, Some(c)).map_err(compute)?;
            Ok(KappaRestricted {
                count: rcount.to_string(),
                kappa: ln_count(&rcount).map_err(compute)? / spec.steps() as f64,
                gap: kappa_restricted_gap(&spec, c).map_err(compute)?,
            })
        })
        .transpose()?;
    let enumerated = if params.enumerate {
        let paths = enumerate_crossings(&spec, corridor.as_ref(), params.cap).map_err(compute)?;
        let listed = paths.len() as u64;
        let reference = match &restricted {
            Some(r) => r.count.clone(),
            None => count.to_string(),
        };
        if listed.to_string() != reference {
            return Err(CliError::Invariant(format!(
                "enumeration found {listed} paths, dynamic programming {reference}"
            )));
        }
        Some(listed)
    } else {
        None
    };
    let limit = params
        .widths
        .as_ref()
        .map(|ws| kappa_limit(u, l, ws).map_err(compute))
        .transpose()?;
    if let (Some(csv), Some(table)) = (&args.csv, &limit) {
        let rows: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.width.to_string(),
                    r.steps.to_string(),
                    r.kappa.to_string(),
                    r.running_max.to_string(),
                ]
            })
            .collect();
        write_csv(csv, &["width", "steps", "kappa", "running_max"], &rows)?;
    }

    let result = KappaResult {
        steps: spec.steps(),
        rise: spec.rise(),
        count: count.to_string(),
        kappa,
        restricted,
        enumerated,
        limit,
    };
    emit("kappa", &params, &result, started, args.out.as_deref())
}

// ------------------------------------------------------------------ phi --

#[derive(Args, Clone, Default)]
pub struct PhiArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write scan rows as CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Strip width L.
    #[arg(long = "L")]
    pub width: Option<u32>,
    /// Steps per width unit (rational, >= 1, μL - L even).
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Disorder samples.
    #[arg(long)]
    pub samples: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scan this μ grid (comma-separated rationals) instead of a single μ.
    #[arg(long = "mu-grid", value_delimiter = ',')]
    pub mu_grid: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct PhiParams {
    #[serde(rename = "L")]
    pub width: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<String>,
    pub alpha: f64,
    pub beta: f64,
    pub samples: u32,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_grid: Option<Vec<String>>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum PhiResult {
    Single(PhiEstimate),
    Scan(MuScan),
}

pub fn run_phi(args: PhiArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: Option<PhiParams> = args.config.as_deref().map(load_config).transpose()?;
    let params = PhiParams {
        width: require(pick(args.width, file.as_ref().map(|f| f.width)), "L")?,
        mu: pick(args.mu, file.as_ref().and_then(|f| f.mu.clone())),
        alpha: require(pick(args.alpha, file.as_ref().map(|f| f.alpha)), "alpha")?,
        beta: require(pick(args.beta, file.as_ref().map(|f| f.beta)), "beta")?,
        samples: pick(args.samples, file.as_ref().map(|f| f.samples)).unwrap_or(100),
        seed: pick(args.seed, file.as_ref().map(|f| f.seed)).unwrap_or(0),
        mu_grid: pick(args.mu_grid, file.as_ref().and_then(|f| f.mu_grid.clone())),
    };
    let result = match &params.mu_grid {
        Some(grid_raw) => {
            let grid: Vec<Rational64> = grid_raw
                .iter()
                .map(|s| parse_ratio_arg(s, "mu-grid"))
                .collect::<Result<_, _>>()?;
            let scan = mu_concavity_scan(
                params.width,
                &grid,
                params.alpha,
                params.beta,
                params.samples,
                params.seed,
            )
            .map_err(schema)?;
            if let Some(csv) = &args.csv {
                let rows: Vec<Vec<String>> = scan
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.mu.to_string(),
                            r.mean.to_string(),
                            r.std_error.to_string(),
                            r.mu_phi.to_string(),
                            r.mu_phi_se.to_string(),
                        ]
                    })
                    .collect();
                write_csv(csv, &["mu", "mean", "std_error", "mu_phi", "mu_phi_se"], &rows)?;
            }
            PhiResult::Scan(scan)
        }
        None => {
            let mu = parse_ratio_arg(require(params.mu.as_deref(), "mu")?, "mu")?;
            let spec = InterfaceSpec::new(params.width, mu, params.alpha, params.beta)
                .map_err(schema)?;
            let est = phi_mean(&spec, params.samples, params.seed).map_err(compute)?;
            if est.mean.abs() > LN3 + params.alpha + 1e-9 {
                return Err(CliError::Invariant(format!(
                    "φ = {} breaks the uniform bound",
                    est.mean
                )));
            }
            PhiResult::Single(est)
        }
    };
    emit("phi", &params, &result, started, args.out.as_deref())
}

// ------------------------------------------------------------------ psi --

#[derive(Args, Clone, Default)]
pub struct PsiArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Column letters, odd-length window centered on the entrance row
    /// (e.g. AABBA).
    #[arg(long)]
    pub chi: Option<String>,
    /// Block-scale vertical increment ΔΠ.
    #[arg(long = "delta-pi", allow_hyphen_values = true)]
    pub delta_pi: Option<i32>,
    /// Entrance height b0 in (0, 1].
    #[arg(long)]
    pub b0: Option<String>,
    /// Exit height b1 in (0, 1].
    #[arg(long)]
    pub b1: Option<String>,
    /// Interface flag (1 or 2).
    #[arg(long)]
    pub x: Option<u8>,
    /// Steps per width unit.
    #[arg(long)]
    pub u: Option<String>,
    /// Column width for the direct computation.
    #[arg(long = "L")]
    pub width: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Explicit monomer word (letters), overrides --omega-seed.
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long = "omega-seed")]
    pub omega_seed: Option<u64>,
    /// Also evaluate the variational formula.
    #[arg(long)]
    pub variational: bool,
    /// Entropy-oracle width (default 32).
    #[arg(long = "L-oracle")]
    pub l_oracle: Option<u32>,
    /// Interface-oracle width (default 32).
    #[arg(long = "phi-width")]
    pub phi_width: Option<u32>,
    #[arg(long = "phi-samples")]
    pub phi_samples: Option<u32>,
    #[arg(long = "phi-seed")]
    pub phi_seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct PsiParams {
    pub chi: String,
    pub delta_pi: i32,
    pub b0: String,
    pub b1: String,
    pub x: u8,
    pub u: String,
    #[serde(rename = "L")]
    pub width: u32,
    pub alpha: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<String>,
    pub omega_seed: u64,
    pub variational: bool,
    pub l_oracle: u32,
    pub phi_width: u32,
    pub phi_samples: u32,
    pub phi_seed: u64,
    pub tol: f64,
}

#[derive(Serialize)]
struct PsiGeometry {
    class: ColumnClass,
    k_theta: i64,
    t_theta: String,
    l_a: String,
    l_b: String,
    l_nint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_int: Option<String>,
}

#[derive(Serialize)]
struct PsiResult {
    geometry: PsiGeometry,
    direct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    variational: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    allocation: Option<Allocation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa_oracle: Option<KappaProvenance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_oracle: Option<PhiProvenance>,
}

pub fn run_psi(args: PsiArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: Option<PsiParams> = args.config.as_deref().map(load_config).transpose()?;
    let params = PsiParams {
        chi: require(pick(args.chi, file.as_ref().map(|f| f.chi.clone())), "chi")?,
        delta_pi: require(pick(args.delta_pi, file.as_ref().map(|f| f.delta_pi)), "delta-pi")?,
        b0: require(pick(args.b0, file.as_ref().map(|f| f.b0.clone())), "b0")?,
        b1: require(pick(args.b1, file.as_ref().map(|f| f.b1.clone())), "b1")?,
        x: pick(args.x, file.as_ref().map(|f| f.x)).unwrap_or(1),
        u: require(pick(args.u, file.as_ref().map(|f| f.u.clone())), "u")?,
        width: require(pick(args.width, file.as_ref().map(|f| f.width)), "L")?,
        alpha: require(pick(args.alpha, file.as_ref().map(|f| f.alpha)), "alpha")?,
        beta: require(pick(args.beta, file.as_ref().map(|f| f.beta)), "beta")?,
        omega: pick(args.omega, file.as_ref().and_then(|f| f.omega.clone())),
        omega_seed: pick(args.omega_seed, file.as_ref().map(|f| f.omega_seed)).unwrap_or(0),
        variational: args.variational || file.as_ref().is_some_and(|f| f.variational),
        l_oracle: pick(args.l_oracle, file.as_ref().map(|f| f.l_oracle)).unwrap_or(32),
        phi_width: pick(args.phi_width, file.as_ref().map(|f| f.phi_width)).unwrap_or(32),
        phi_samples: pick(args.phi_samples, file.as_ref().map(|f| f.phi_samples)).unwrap_or(32),
        phi_seed: pick(args.phi_seed, file.as_ref().map(|f| f.phi_seed)).unwrap_or(7),
        tol: pick(args.tol, file.as_ref().map(|f| f.tol)).unwrap_or(1e-6),
    };
    if params.alpha < params.beta.abs() {
        return Err(CliError::Schema(format!(
            "(α, β) = ({}, {}) outside the cone α >= |β|",
            params.alpha, params.beta
        )));
    }
    let chi = ColumnDisorder::from_str_window(&params.chi).map_err(schema)?;
    let theta = ColumnType::new(
        chi,
        params.delta_pi,
        parse_ratio_arg(&params.b0, "b0")?,
        parse_ratio_arg(&params.b1, "b1")?,
        params.x,
    )
    .map_err(schema)?;
    let geo = geometry(&theta).map_err(schema)?;
    let u = parse_ratio_arg(&params.u, "u")?;
    let steps = (u * Rational64::from_integer(params.width as i64)).to_integer() as usize;

    let omega = match &params.omega {
        Some(word) => MicroDisorder::from_str_word(word).map_err(schema)?,
        None => MicroDisorder::sample(steps, params.omega_seed, 0),
    };
    let direct = psi_quenched_column(&omega, &theta, u, params.width, params.alpha, params.beta)
        .map_err(compute)?;
    if direct.abs() > LN3 + params.alpha + 1e-9 {
        return Err(CliError::Invariant(format!("ψ = {direct} breaks the uniform bound")));
    }

    let (variational, allocation, kappa_prov, phi_prov) = if params.variational {
        let u_max = (rat_f64(u) + 4.0).max(13.0);
        let kappa = KappaTable::build(params.l_oracle, u_max).map_err(compute)?;
        let phi = PhiTable::build(
            params.phi_width,
            12.0,
            params.phi_samples,
            params.phi_seed,
            params.alpha,
            params.beta,
        )
        .map_err(compute)?;
        let value = psi_for_type(
            &theta,
            rat_f64(u),
            params.alpha,
            params.beta,
            &kappa,
            &phi,
            params.tol,
        )
        .map_err(compute)?;
        let allocation = if geo.class == ColumnClass::Int {
            Some(
                psi_int_variational(
                    rat_f64(u),
                    rat_f64(geo.l_a),
                    rat_f64(geo.l_b),
                    params.alpha,
                    params.beta,
                    &kappa,
                    &phi,
                    params.tol,
                )
                .map_err(compute)?
                .allocation,
            )
        } else {
            None
        };
        (
            Some(value),
            allocation,
            Some(kappa.provenance()),
            Some(phi.provenance()),
        )
    } else {
        (None, None, None, None)
    };

    let result = PsiResult {
        geometry: PsiGeometry {
            class: geo.class,
            k_theta: geo.k_theta,
            t_theta: geo.t_theta.to_string(),
            l_a: geo.l_a.to_string(),
            l_b: geo.l_b.to_string(),
            l_nint: geo.l_nint.to_string(),
            l_int: geo.l_int.map(|v| v.to_string()),
        },
        direct,
        variational,
        allocation,
        kappa_oracle: kappa_prov,
        phi_oracle: phi_prov,
    };
    emit("psi", &params, &result, started, args.out.as_deref())
}

// ------------------------------------------------------------- measures --

#[derive(Args, Clone, Default)]
pub struct MeasureFlags {
    /// Oil probability p of the block field.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long = "field-seed")]
    pub field_seed: Option<u64>,
    /// Largest column index of the field.
    #[arg(long = "field-width")]
    pub field_width: Option<u32>,
    /// Field rows span -height..=height.
    #[arg(long = "field-height")]
    pub field_height: Option<u32>,
    /// Vertical cap M.
    #[arg(long = "M")]
    pub m_cap: Option<u32>,
    /// Per-column step cap m (>= M + 2).
    #[arg(long = "m")]
    pub step_cap: Option<u32>,
    /// Columns per trajectory (the N of the empirical measure).
    #[arg(long = "N")]
    pub n_cols: Option<usize>,
    /// How many measures to sample.
    #[arg(long)]
    pub measures: Option<usize>,
    /// Denominator of the entrance-height grid {1/b, …, 1}.
    #[arg(long = "b-grid")]
    pub b_grid: Option<u32>,
    /// Window radius recorded per column (default m).
    #[arg(long)]
    pub window: Option<i32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
pub struct MeasuresArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub flags: MeasureFlags,
    /// Persist the sampled field as JSON here.
    #[arg(long = "save-field")]
    pub save_field: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct MeasuresParams {
    pub p: f64,
    pub field_seed: u64,
    pub field_width: u32,
    pub field_height: u32,
    #[serde(rename = "M")]
    pub m_cap: u32,
    #[serde(rename = "m")]
    pub step_cap: u32,
    #[serde(rename = "N")]
    pub n_cols: usize,
    pub measures: usize,
    pub b_grid: u32,
    pub window: i32,
    pub seed: u64,
}

#[derive(Serialize)]
struct MeasuresResult {
    a_fraction: f64,
    measures: Vec<FrequencyMeasure>,
}

pub fn resolve_measures_params(
    flags: &MeasureFlags,
    file: Option<&MeasuresParams>,
) -> Result<MeasuresParams, CliError> {
    let m_cap = pick(flags.m_cap, file.map(|f| f.m_cap)).unwrap_or(1);
    let step_cap = pick(flags.step_cap, file.map(|f| f.step_cap)).unwrap_or(m_cap + 2);
    Ok(MeasuresParams {
        p: pick(flags.p, file.map(|f| f.p)).unwrap_or(0.5),
        field_seed: pick(flags.field_seed, file.map(|f| f.field_seed)).unwrap_or(0),
        field_width: pick(flags.field_width, file.map(|f| f.field_width)).unwrap_or(64),
        field_height: pick(flags.field_height, file.map(|f| f.field_height)).unwrap_or(48),
        m_cap,
        step_cap,
        n_cols: pick(flags.n_cols, file.map(|f| f.n_cols)).unwrap_or(8),
        measures: pick(flags.measures, file.map(|f| f.measures)).unwrap_or(4),
        b_grid: pick(flags.b_grid, file.map(|f| f.b_grid)).unwrap_or(4),
        window: pick(flags.window, file.map(|f| f.window)).unwrap_or(step_cap as i32),
        seed: pick(flags.seed, file.map(|f| f.seed)).unwrap_or(0),
    })
}

pub fn sample_for(params: &MeasuresParams) -> Result<(BlockField, Vec<FrequencyMeasure>), CliError> {
    let field = BlockField::sample(
        params.p,
        params.field_width,
        params.field_height,
        params.field_seed,
    )
    .map_err(schema)?;
    let cfg = MeasureSampling {
        m_cap: params.m_cap,
        step_cap: params.step_cap,
        n_cols: params.n_cols,
        b_grid: params.b_grid,
        window_radius: params.window,
        seed: params.seed,
    };
    let measures =
        sample_measures(&field, &cfg, &SampleStrategy::RandomWalk, params.measures)
            .map_err(compute)?;
    for m in &measures {
        m.validate()
            .map_err(|e| CliError::Invariant(e.to_string()))?;
    }
    Ok((field, measures))
}

pub fn run_measures(args: MeasuresArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: Option<MeasuresParams> = args.config.as_deref().map(load_config).transpose()?;
    let params = resolve_measures_params(&args.flags, file.as_ref())?;
    let (field, measures) = sample_for(&params)?;
    if let Some(path) = &args.save_field {
        let text = serde_json::to_string_pretty(&field)
            .map_err(|e| CliError::Compute(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| CliError::Compute(e.to_string()))?;
    }
    let result = MeasuresResult {
        a_fraction: field.a_fraction(),
        measures,
    };
    emit("measures", &params, &result, started, args.out.as_deref())
}

// ---------------------------------------------------------------- varfe --

#[derive(Args, Clone, Default)]
pub struct VarfeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write one CSV row per (p, α, β) grid point.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub measures: MeasureFlags,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sweep these α values (overrides --alpha).
    #[arg(long = "alpha-list", value_delimiter = ',')]
    pub alpha_list: Option<Vec<f64>>,
    /// Sweep these β values.
    #[arg(long = "beta-list", value_delimiter = ',')]
    pub beta_list: Option<Vec<f64>>,
    /// Sweep these p values.
    #[arg(long = "p-list", value_delimiter = ',')]
    pub p_list: Option<Vec<f64>>,
    #[arg(long = "L-oracle")]
    pub l_oracle: Option<u32>,
    #[arg(long = "phi-width")]
    pub phi_width: Option<u32>,
    #[arg(long = "phi-samples")]
    pub phi_samples: Option<u32>,
    #[arg(long = "phi-seed")]
    pub phi_seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// ψ-curve nodes per atom.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct VarfeParams {
    #[serde(flatten)]
    pub measures: MeasuresParams,
    pub alpha_list: Vec<f64>,
    pub beta_list: Vec<f64>,
    pub p_list: Vec<f64>,
    pub l_oracle: u32,
    pub phi_width: u32,
    pub phi_samples: u32,
    pub phi_seed: u64,
    pub tol: f64,
    pub nodes: usize,
    pub max_iter: usize,
}

#[derive(Serialize)]
struct VarfeRow {
    p: f64,
    alpha: f64,
    beta: f64,
    value: f64,
    best_measure: usize,
    residual: f64,
    iterations: usize,
    y_star: f64,
    u_star: Vec<f64>,
}

#[derive(Serialize)]
struct VarfeResult {
    rows: Vec<VarfeRow>,
    kappa_oracle: KappaProvenance,
}

pub fn run_varfe(args: VarfeArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: Option<VarfeParams> = args.config.as_deref().map(load_config).transpose()?;
    let base = resolve_measures_params(&args.measures, file.as_ref().map(|f| &f.measures))?;
    let alpha = args.alpha.unwrap_or(2.0);
    let beta = args.beta.unwrap_or(1.0);
    let params = VarfeParams {
        alpha_list: pick(args.alpha_list, file.as_ref().map(|f| f.alpha_list.clone()))
            .unwrap_or_else(|| vec![alpha]),
        beta_list: pick(args.beta_list, file.as_ref().map(|f| f.beta_list.clone()))
            .unwrap_or_else(|| vec![beta]),
        p_list: pick(args.p_list, file.as_ref().map(|f| f.p_list.clone()))
            .unwrap_or_else(|| vec![base.p]),
        l_oracle: pick(args.l_oracle, file.as_ref().map(|f| f.l_oracle)).unwrap_or(32),
        phi_width: pick(args.phi_width, file.as_ref().map(|f| f.phi_width)).unwrap_or(32),
        phi_samples: pick(args.phi_samples, file.as_ref().map(|f| f.phi_samples)).unwrap_or(32),
        phi_seed: pick(args.phi_seed, file.as_ref().map(|f| f.phi_seed)).unwrap_or(7),
        tol: pick(args.tol, file.as_ref().map(|f| f.tol)).unwrap_or(1e-6),
        nodes: pick(args.nodes, file.as_ref().map(|f| f.nodes)).unwrap_or(33),
        max_iter: pick(args.max_iter, file.as_ref().map(|f| f.max_iter)).unwrap_or(200),
        measures: base,
    };
    for &a in &params.alpha_list {
        for &b in &params.beta_list {
            if a < b.abs() {
                return Err(CliError::Schema(format!(
                    "(α, β) = ({a}, {b}) outside the cone α >= |β|"
                )));
            }
        }
    }
    let u_max = (params.measures.step_cap as f64 + 4.0).max(13.0);
    let kappa = KappaTable::build(params.l_oracle, u_max).map_err(compute)?;
    let mut rows = Vec::new();
    for &p in &params.p_list {
        let mut point = params.measures.clone();
        point.p = p;
        let (_field, measures) = sample_for(&point)?;
        for &a in &params.alpha_list {
            for &b in &params.beta_list {
                let phi = PhiTable::build(
                    params.phi_width,
                    12.0,
                    params.phi_samples,
                    params.phi_seed,
                    a,
                    b,
                )
                .map_err(compute)?;
                let bound = best_lower_bound(
                    &measures,
                    a,
                    b,
                    &kappa,
                    &phi,
                    params.tol,
                    params.nodes,
                    params.max_iter,
                )
                .map_err(compute)?;
                let best = &bound.per_measure[bound.best_index];
                if best.residual > params.tol {
                    return Err(CliError::Invariant(format!(
                        "solver residual {} above tol {}",
                        best.residual, params.tol
                    )));
                }
                rows.push(VarfeRow {
                    p,
                    alpha: a,
                    beta: b,
                    value: bound.value,
                    best_measure: bound.best_index,
                    residual: best.residual,
                    iterations: best.iterations,
                    y_star: best.y_star,
                    u_star: best.u_star.clone(),
                });
            }
        }
    }
    if let Some(csv) = &args.csv {
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.p.to_string(),
                    r.alpha.to_string(),
                    r.beta.to_string(),
                    r.value.to_string(),
                    r.best_measure.to_string(),
                    r.residual.to_string(),
                    r.iterations.to_string(),
                ]
            })
            .collect();
        write_csv(
            csv,
            &["p", "alpha", "beta", "value", "best_measure", "residual", "iterations"],
            &table,
        )?;
    }
    let result = VarfeResult {
        rows,
        kappa_oracle: kappa.provenance(),
    };
    emit("varfe", &params, &result, started, args.out.as_deref())
}

// ------------------------------------------------------------- simulate --

#[derive(Args, Clone, Default)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Chain lengths to evaluate (ascending).
    #[arg(long = "n-list", value_delimiter = ',')]
    pub n_list: Option<Vec<u64>>,
    /// Block size L_n.
    #[arg(long = "block-size")]
    pub block_size: Option<u32>,
    #[arg(long = "M")]
    pub m_cap: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long = "field-seed")]
    pub field_seed: Option<u64>,
    #[arg(long = "field-width")]
    pub field_width: Option<u32>,
    #[arg(long = "field-height")]
    pub field_height: Option<u32>,
    /// Disorder samples per n.
    #[arg(long)]
    pub samples: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also compute the matched variational lower bound.
    #[arg(long = "with-bound")]
    pub with_bound: bool,
    /// Per-column step cap m for the restricted-path comparison run.
    #[arg(long = "per-column-cap")]
    pub per_column_cap: Option<u32>,
    /// Restrict endpoints to column boundaries.
    #[arg(long = "boundary-endpoint")]
    pub boundary_endpoint: bool,
    /// Measure sampling for the bound: columns per trajectory.
    #[arg(long = "N")]
    pub n_cols: Option<usize>,
    #[arg(long)]
    pub measures: Option<usize>,
    #[arg(long = "b-grid")]
    pub b_grid: Option<u32>,
    #[arg(long = "m")]
    pub step_cap: Option<u32>,
    #[arg(long = "measure-seed")]
    pub measure_seed: Option<u64>,
    #[arg(long = "L-oracle")]
    pub l_oracle: Option<u32>,
    #[arg(long = "phi-width")]
    pub phi_width: Option<u32>,
    #[arg(long = "phi-samples")]
    pub phi_samples: Option<u32>,
    #[arg(long = "phi-seed")]
    pub phi_seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct SimulateParams {
    pub n_list: Vec<u64>,
    pub block_size: u32,
    #[serde(rename = "M")]
    pub m_cap: u32,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub field_seed: u64,
    pub field_width: u32,
    pub field_height: u32,
    pub samples: u32,
    pub seed: u64,
    pub with_bound: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_column_cap: Option<u32>,
    pub boundary_endpoint: bool,
    #[serde(rename = "N")]
    pub n_cols: usize,
    pub measures: usize,
    pub b_grid: u32,
    #[serde(rename = "m")]
    pub step_cap: u32,
    pub measure_seed: u64,
    pub l_oracle: u32,
    pub phi_width: u32,
    pub phi_samples: u32,
    pub phi_seed: u64,
    pub tol: f64,
}

pub fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: Option<SimulateParams> = args.config.as_deref().map(load_config).transpose()?;
    let m_cap = pick(args.m_cap, file.as_ref().map(|f| f.m_cap)).unwrap_or(1);
    let params = SimulateParams {
        n_list: pick(args.n_list, file.as_ref().map(|f| f.n_list.clone()))
            .unwrap_or_else(|| vec![8, 16, 32]),
        block_size: pick(args.block_size, file.as_ref().map(|f| f.block_size)).unwrap_or(2),
        m_cap,
        alpha: pick(args.alpha, file.as_ref().map(|f| f.alpha)).unwrap_or(2.0),
        beta: pick(args.beta, file.as_ref().map(|f| f.beta)).unwrap_or(1.0),
        p: pick(args.p, file.as_ref().map(|f| f.p)).unwrap_or(0.5),
        field_seed: pick(args.field_seed, file.as_ref().map(|f| f.field_seed)).unwrap_or(0),
        field_width: pick(args.field_width, file.as_ref().map(|f| f.field_width)).unwrap_or(64),
        field_height: pick(args.field_height, file.as_ref().map(|f| f.field_height)).unwrap_or(48),
        samples: pick(args.samples, file.as_ref().map(|f| f.samples)).unwrap_or(8),
        seed: pick(args.seed, file.as_ref().map(|f| f.seed)).unwrap_or(0),
        with_bound: args.with_bound || file.as_ref().is_some_and(|f| f.with_bound),
        per_column_cap: pick(args.per_column_cap, file.as_ref().and_then(|f| f.per_column_cap)),
        boundary_endpoint: args.boundary_endpoint
            || file.as_ref().is_some_and(|f| f.boundary_endpoint),
        n_cols: pick(args.n_cols, file.as_ref().map(|f| f.n_cols)).unwrap_or(8),
        measures: pick(args.measures, file.as_ref().map(|f| f.measures)).unwrap_or(4),
        b_grid: pick(args.b_grid, file.as_ref().map(|f| f.b_grid)).unwrap_or(2),
        step_cap: pick(args.step_cap, file.as_ref().map(|f| f.step_cap)).unwrap_or(m_cap + 2),
        measure_seed: pick(args.measure_seed, file.as_ref().map(|f| f.measure_seed)).unwrap_or(99),
        l_oracle: pick(args.l_oracle, file.as_ref().map(|f| f.l_oracle)).unwrap_or(32),
        phi_width: pick(args.phi_width, file.as_ref().map(|f| f.phi_width)).unwrap_or(32),
        phi_samples: pick(args.phi_samples, file.as_ref().map(|f| f.phi_samples)).unwrap_or(32),
        phi_seed: pick(args.phi_seed, file.as_ref().map(|f| f.phi_seed)).unwrap_or(7),
        tol: pick(args.tol, file.as_ref().map(|f| f.tol)).unwrap_or(1e-6),
    };
    if params.alpha < params.beta.abs() {
        return Err(CliError::Schema(format!(
            "(α, β) = ({}, {}) outside the cone α >= |β|",
            params.alpha, params.beta
        )));
    }
    let field = BlockField::sample(
        params.p,
        params.field_width,
        params.field_height,
        params.field_seed,
    )
    .map_err(schema)?;

    let bound = if params.with_bound {
        let mp = MeasuresParams {
            p: params.p,
            field_seed: params.field_seed,
            field_width: params.field_width,
            field_height: params.field_height,
            m_cap: params.m_cap,
            step_cap: params.step_cap,
            n_cols: params.n_cols,
            measures: params.measures,
            b_grid: params.b_grid,
            window: params.step_cap as i32,
            seed: params.measure_seed,
        };
        let (_f, measures) = sample_for(&mp)?;
        let kappa = KappaTable::build(params.l_oracle, (params.step_cap as f64 + 4.0).max(13.0))
            .map_err(compute)?;
        let phi = PhiTable::build(
            params.phi_width,
            12.0,
            params.phi_samples,
            params.phi_seed,
            params.alpha,
            params.beta,
        )
        .map_err(compute)?;
        Some(
            best_lower_bound(
                &measures,
                params.alpha,
                params.beta,
                &kappa,
                &phi,
                params.tol,
                33,
                200,
            )
            .map_err(compute)?
            .value,
        )
    } else {
        None
    };

    let cfg = ConvergenceConfig {
        n_list: params.n_list.clone(),
        block_size: params.block_size,
        m_cap: params.m_cap,
        alpha: params.alpha,
        beta: params.beta,
        samples: params.samples,
        seed: params.seed,
    };
    let report = convergence_report(&field, &cfg, bound).map_err(compute)?;
    if let Some(csv) = &args.csv {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.block_size.to_string(),
                    r.scale_ratio.to_string(),
                    r.mean.to_string(),
                    r.std.to_string(),
                    r.samples.to_string(),
                    r.gap.map(|g| g.to_string()).unwrap_or_default(),
                ]
            })
            .collect();
        write_csv(
            csv,
            &["n", "block_size", "scale_ratio", "mean", "std", "samples", "gap"],
            &rows,
        )?;
    }
    // Variant runs on the smallest n, for the sandwich diagnostics.
    let variant = if params.per_column_cap.is_some() || params.boundary_endpoint {
        let n = params.n_list[0];
        let instance = ModelInstance {
            n,
            block_size: params.block_size,
            m_cap: params.m_cap,
            alpha: params.alpha,
            beta: params.beta,
            omega: MicroDisorder::sample(n as usize, params.seed, 0),
            field: field.clone(),
        };
        let opts = SimOptions {
            per_column_cap: params.per_column_cap,
            boundary_endpoint: params.boundary_endpoint,
        };
        Some(finite_free_energy(&instance, &opts).map_err(compute)?)
    } else {
        None
    };

    #[derive(Serialize)]
    struct SimulateResult {
        report: ConvergenceReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        restricted_variant_f: Option<f64>,
    }
    emit(
        "simulate",
        &params,
        &SimulateResult {
            report,
            restricted_variant_f: variant,
        },
        started,
        args.out.as_deref(),
    )
}

// ------------------------------------------------------------ selfcheck --

#[derive(Args, Clone, Default)]
pub struct SelfcheckArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_selfcheck(args: SelfcheckArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let report = memulsion_core::check::run_selfcheck();
    for item in &report.items {
        let tag = if item.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {}", item.name, item.detail);
    }
    #[derive(Serialize)]
    struct Empty {}
    emit("selfcheck", &Empty {}, &report, started, args.out.as_deref())?;
    if let Some(failure) = report.first_failure() {
        return Err(CliError::Invariant(format!(
            "self-check item '{}' failed: {}",
            failure.name, failure.detail
        )));
    }
    Ok(())
}
