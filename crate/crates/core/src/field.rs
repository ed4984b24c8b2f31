//! The mesoscopic block field and empirical column-type frequencies.
//!
//! A field assigns each block `(i, j)`, `i ∈ 0..=width`, `j ∈ -height..=height`,
//! an independent letter (`A` with probability `p`). Coarse-grained paths
//! step through columns left to right; the empirical measure of the column
//! types they visit is the mesoscopic ingredient of the ratio formula. The
//! admissible set of those measures has no constructive description, so
//! measures are produced by sampling (or supplied) and every downstream
//! result is reported as a lower bound.

use num_bigint::BigUint;
use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;

use crate::column::{geometry, ColumnDisorder, ColumnType};
use crate::disorder::Letter;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// One sampled (or deserialized) block field.
#[derive(Clone, PartialEq, Debug)]
pub struct BlockField {
    p: f64,
    seed: u64,
    width: u32,
    height: u32,
    cells: Vec<Letter>,
}

impl BlockField {
    /// I.i.d. field: block `(i, j)` is `A` with probability `p`.
    ///
    /// Each cell draws from its own substream keyed by `(seed, cell index)`,
    /// so the field does not depend on sampling order.
    pub fn sample(p: f64, width: u32, height: u32, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || p == 0.0 || p == 1.0 {
            return Err(Error::InvalidSpec(format!("p must lie strictly in (0,1), got {p}")));
        }
        let rows = 2 * height as usize + 1;
        let cols = width as usize + 1;
        let mut cells = Vec::with_capacity(rows * cols);
        for idx in 0..rows * cols {
            let mut s = Stream::new(seed, idx as u64);
            cells.push(if s.bernoulli(p) { Letter::A } else { Letter::B });
        }
        Ok(BlockField {
            p,
            seed,
            width,
            height,
            cells,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Largest column index.
    pub fn width(&self) -> u32 {
        self.width
    }

    /// Rows span `-height ..= height`.
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    fn index(&self, col: i64, row: i64) -> Result<usize> {
        if col < 0 || col > self.width as i64 || row.unsigned_abs() > self.height as u64 {
            return Err(Error::OutOfField(format!(
                "block ({col}, {row}) outside 0..={} x -{}..={}",
                self.width, self.height, self.height
            )));
        }
        Ok(col as usize * (2 * self.height as usize + 1) + (row + self.height as i64) as usize)
    }

    pub fn letter(&self, col: i64, row: i64) -> Result<Letter> {
        Ok(self.cells[self.index(col, row)?])
    }

    /// Replace one block; used to probe locality of derived quantities.
    pub fn with_letter(mut self, col: i64, row: i64, letter: Letter) -> Result<Self> {
        let idx = self.index(col, row)?;
        self.cells[idx] = letter;
        Ok(self)
    }

    /// Column window of radius `radius` centered at `center_row`.
    pub fn column_window(&self, col: i64, center_row: i64, radius: i32) -> Result<ColumnDisorder> {
        let mut letters = Vec::with_capacity(2 * radius as usize + 1);
        for j in -(radius as i64)..=radius as i64 {
            letters.push(self.letter(col, center_row + j)?);
        }
        ColumnDisorder::from_window(letters)
    }

    /// Fraction of `A` blocks.
    pub fn a_fraction(&self) -> f64 {
        let a = self.cells.iter().filter(|l| **l == Letter::A).count();
        a as f64 / self.cells.len() as f64
    }
}

fn rle_encode(letters: &[Letter]) -> String {
    let mut out = String::new();
    let mut iter = letters.iter();
    let Some(&first) = iter.next() else {
        return out;
    };
    let (mut run_letter, mut run) = (first, 1u32);
    for &l in iter {
        if l == run_letter {
            run += 1;
        } else {
            out.push(run_letter.to_char());
            out.push_str(&run.to_string());
            run_letter = l;
            run = 1;
        }
    }
    out.push(run_letter.to_char());
    out.push_str(&run.to_string());
    out
}

fn rle_decode(s: &str, expect: usize) -> Result<Vec<Letter>> {
    let mut out = Vec::with_capacity(expect);
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        let letter = Letter::from_char(c)?;
        let mut digits = String::new();
        while let Some(d) = chars.peek() {
            if d.is_ascii_digit() {
                digits.push(*d);
                chars.next();
            } else {
                break;
            }
        }
        let run: usize = digits
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("bad run length in RLE row '{s}'")))?;
        out.extend(std::iter::repeat_n(letter, run));
    }
    if out.len() != expect {
        return Err(Error::InvalidSpec(format!(
            "RLE row '{s}' decodes to {} letters, expected {expect}",
            out.len()
        )));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct BlockFieldRepr {
    p: f64,
    seed: u64,
    width: u32,
    height: u32,
    /// One run-length-encoded string per row, from `-height` to `height`.
    rows: Vec<String>,
}

impl Serialize for BlockField {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let cols = self.width as i64;
        let rows = (-(self.height as i64)..=self.height as i64)
            .map(|row| {
                let letters: Vec<Letter> = (0..=cols)
                    .map(|col| self.letter(col, row).unwrap())
                    .collect();
                rle_encode(&letters)
            })
            .collect();
        BlockFieldRepr {
            p: self.p,
            seed: self.seed,
            width: self.width,
            height: self.height,
            rows,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BlockField {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = BlockFieldRepr::deserialize(deserializer)?;
        let expect_rows = 2 * repr.height as usize + 1;
        if repr.rows.len() != expect_rows {
            return Err(D::Error::custom(format!(
                "expected {expect_rows} rows, got {}",
                repr.rows.len()
            )));
        }
        let cols = repr.width as usize + 1;
        let mut cells = vec![Letter::A; cols * expect_rows];
        for (r, row) in repr.rows.iter().enumerate() {
            let letters = rle_decode(row, cols).map_err(D::Error::custom)?;
            for (c, &l) in letters.iter().enumerate() {
                cells[c * expect_rows + r] = l;
            }
        }
        Ok(BlockField {
            p: repr.p,
            seed: repr.seed,
            width: repr.width,
            height: repr.height,
            cells,
        })
    }
}

/// Block-scale skeleton of a path: per-column vertical increments, the
/// entrance/exit heights within each column, and the interface flags.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CoarseTrajectory {
    pub pi_increments: Vec<i32>,
    #[serde(with = "crate::column::ratio_serde::vec")]
    pub b: Vec<Rational64>,
    pub x: Vec<u8>,
}

impl CoarseTrajectory {
    pub fn new(pi_increments: Vec<i32>, b: Vec<Rational64>, x: Vec<u8>) -> Result<Self> {
        if b.len() != pi_increments.len() + 1 || x.len() != pi_increments.len() {
            return Err(Error::InvalidSpec(format!(
                "lengths must satisfy |b| = |ΔΠ|+1 and |x| = |ΔΠ|, got {} / {} / {}",
                pi_increments.len(),
                b.len(),
                x.len()
            )));
        }
        let unit = Rational64::one();
        if b.iter().any(|v| *v <= Rational64::zero() || *v > unit) {
            return Err(Error::InvalidSpec("entrance heights must lie in (0, 1]".into()));
        }
        Ok(CoarseTrajectory {
            pi_increments,
            b,
            x,
        })
    }

    pub fn columns(&self) -> usize {
        self.pi_increments.len()
    }

    /// Block rows at which each column is entered (`Π_0 = 0`).
    pub fn rows(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.pi_increments.len());
        let mut acc = 0i64;
        for dp in &self.pi_increments {
            out.push(acc);
            acc += *dp as i64;
        }
        out
    }

    pub fn max_increment(&self) -> u32 {
        self.pi_increments
            .iter()
            .map(|d| d.unsigned_abs())
            .max()
            .unwrap_or(0)
    }
}

/// Per-column admissible values of the interface flag.
#[derive(Clone, Debug)]
pub struct AdmissibleX {
    pub per_column: Vec<Vec<u8>>,
}

impl AdmissibleX {
    pub fn count(&self) -> BigUint {
        self.per_column
            .iter()
            .fold(BigUint::one(), |acc, opts| acc * BigUint::from(opts.len()))
    }

    /// Lazily enumerate the full sequences in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = Vec<u8>> + '_ {
        let n = self.per_column.len();
        let mut odometer = vec![0usize; n];
        let mut done = self.per_column.iter().any(|o| o.is_empty());
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let item: Vec<u8> = odometer
                .iter()
                .zip(&self.per_column)
                .map(|(&i, opts)| opts[i])
                .collect();
            // Advance.
            let mut pos = n;
            loop {
                if pos == 0 {
                    done = true;
                    break;
                }
                pos -= 1;
                odometer[pos] += 1;
                if odometer[pos] < self.per_column[pos].len() {
                    break;
                }
                odometer[pos] = 0;
            }
            Some(item)
        })
    }
}

/// Which interface flags are admissible in each column of a flagless
/// trajectory: `x = 1` always, `x = 2` only for interface-free increments
/// whose reach-and-return time stays within the per-column step cap.
pub fn admissible_x(
    field: &BlockField,
    pi_increments: &[i32],
    b: &[Rational64],
    m_cap: u32,
    step_cap: u32,
    window_radius: i32,
) -> Result<AdmissibleX> {
    if b.len() != pi_increments.len() + 1 {
        return Err(Error::InvalidSpec("|b| must equal |ΔΠ| + 1".into()));
    }
    let mut per_column = Vec::with_capacity(pi_increments.len());
    let mut row = 0i64;
    for (j, &dp) in pi_increments.iter().enumerate() {
        if dp.unsigned_abs() > m_cap {
            return Err(Error::InvalidSpec(format!(
                "|ΔΠ_{j}| = {} exceeds the vertical cap {m_cap}",
                dp.abs()
            )));
        }
        let chi = field.column_window(j as i64, row, window_radius)?;
        let mut opts = vec![1u8];
        if let Ok(theta2) = ColumnType::new(chi, dp, b[j], b[j + 1], 2) {
            if let Ok(geo) = geometry(&theta2) {
                if geo.t_theta <= Rational64::from_integer(step_cap as i64) {
                    opts.push(2);
                }
            }
        }
        per_column.push(opts);
        row += dp as i64;
    }
    Ok(AdmissibleX { per_column })
}

/// A finitely supported probability measure over column types.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrequencyMeasure {
    pub atoms: Vec<(ColumnType, f64)>,
    /// `(M, m)`: vertical-increment cap and per-column step cap.
    pub support_cap: (u32, u32),
}

impl FrequencyMeasure {
    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// Combine duplicated atoms (zero distance and equal flag means equal
    /// tuples at matching windows), summing their weights.
    pub fn merged(&self) -> FrequencyMeasure {
        let mut atoms: Vec<(ColumnType, f64)> = Vec::with_capacity(self.atoms.len());
        for (theta, w) in &self.atoms {
            if let Some(slot) = atoms.iter_mut().find(|(t, _)| t == theta) {
                slot.1 += w;
            } else {
                atoms.push((theta.clone(), *w));
            }
        }
        FrequencyMeasure {
            atoms,
            support_cap: self.support_cap,
        }
    }

    /// Normalization and support-cap invariants.
    pub fn validate(&self) -> Result<()> {
        if (self.total_weight() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "weights sum to {}, not 1",
                self.total_weight()
            )));
        }
        let (m_cap, step_cap) = self.support_cap;
        for (theta, w) in &self.atoms {
            if *w < 0.0 {
                return Err(Error::InvalidSpec("negative weight".into()));
            }
            if theta.delta_pi.unsigned_abs() > m_cap {
                return Err(Error::InvalidSpec(format!(
                    "atom increment {} exceeds cap {m_cap}",
                    theta.delta_pi
                )));
            }
            let geo = geometry(theta)?;
            if geo.t_theta > Rational64::from_integer(step_cap as i64) {
                return Err(Error::InvalidSpec(format!(
                    "atom needs {} steps per width unit, cap is {step_cap}",
                    geo.t_theta
                )));
            }
        }
        Ok(())
    }
}

/// Empirical distribution of the first `n_cols` column types of a trajectory.
#[allow(clippy::needless_range_loop)] // j indexes four parallel sequences
pub fn empirical_measure(
    field: &BlockField,
    trajectory: &CoarseTrajectory,
    n_cols: usize,
    m_cap: u32,
    step_cap: u32,
    window_radius: i32,
) -> Result<FrequencyMeasure> {
    if trajectory.columns() < n_cols || n_cols == 0 {
        return Err(Error::InvalidSpec(format!(
            "trajectory has {} columns, need at least {n_cols} (nonzero)",
            trajectory.columns()
        )));
    }
    let rows = trajectory.rows();
    let mut counts: BTreeMap<String, (ColumnType, usize)> = BTreeMap::new();
    for j in 0..n_cols {
        let dp = trajectory.pi_increments[j];
        if dp.unsigned_abs() > m_cap {
            return Err(Error::InvalidSpec(format!(
                "|ΔΠ_{j}| = {} exceeds the vertical cap {m_cap}",
                dp.abs()
            )));
        }
        let chi = field.column_window(j as i64, rows[j], window_radius)?;
        let theta = ColumnType::new(chi, dp, trajectory.b[j], trajectory.b[j + 1], trajectory.x[j])?;
        let geo = geometry(&theta)?;
        if geo.t_theta > Rational64::from_integer(step_cap as i64) {
            return Err(Error::InvalidSpec(format!(
                "column {j} needs {} steps per width unit, cap is {step_cap}",
                geo.t_theta
            )));
        }
        let key = format!(
            "{}|{}|{}|{}|{}",
            theta.chi.window_string(),
            theta.delta_pi,
            theta.b0,
            theta.b1,
            theta.x
        );
        counts.entry(key).or_insert((theta, 0)).1 += 1;
    }
    let atoms = counts
        .into_values()
        .map(|(theta, c)| (theta, c as f64 / n_cols as f64))
        .collect();
    Ok(FrequencyMeasure {
        atoms,
        support_cap: (m_cap, step_cap),
    })
}

/// How trajectories are produced when sampling measures.
#[derive(Clone, Debug)]
pub enum SampleStrategy {
    /// Uniform increments on `{-M..M}` (clipped to the field), uniform
    /// heights on the `b`-grid, uniform flag among admissible values.
    RandomWalk,
    /// Caller-supplied trajectories, one measure each.
    Supplied(Vec<CoarseTrajectory>),
}

/// Sampling parameters for [`sample_measures`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MeasureSampling {
    pub m_cap: u32,
    pub step_cap: u32,
    /// Columns per trajectory (the `N` of the empirical measure).
    pub n_cols: usize,
    /// Denominator of the entrance-height grid `{1/L, …, 1}`.
    pub b_grid: u32,
    pub window_radius: i32,
    pub seed: u64,
}

/// Draw `n_measures` members of the sampled-measure family for this field.
///
/// Measure `k` uses substream `(seed, k)`; the output is independent of
/// scheduling and worker count.
pub fn sample_measures(
    field: &BlockField,
    cfg: &MeasureSampling,
    strategy: &SampleStrategy,
    n_measures: usize,
) -> Result<Vec<FrequencyMeasure>> {
    if cfg.step_cap < cfg.m_cap + 2 {
        return Err(Error::InvalidSpec(format!(
            "step cap m = {} must be at least M + 2 = {}",
            cfg.step_cap,
            cfg.m_cap + 2
        )));
    }
    if cfg.b_grid == 0 || cfg.n_cols == 0 {
        return Err(Error::InvalidSpec("b-grid and column count must be positive".into()));
    }
    match strategy {
        SampleStrategy::Supplied(trajs) => trajs
            .iter()
            .take(n_measures)
            .map(|t| {
                empirical_measure(field, t, cfg.n_cols.min(t.columns()), cfg.m_cap, cfg.step_cap, cfg.window_radius)
            })
            .collect(),
        SampleStrategy::RandomWalk => (0..n_measures)
            .map(|k| {
                let traj = sample_walk(field, cfg, k as u64)?;
                empirical_measure(field, &traj, cfg.n_cols, cfg.m_cap, cfg.step_cap, cfg.window_radius)
            })
            .collect(),
    }
}

fn sample_walk(field: &BlockField, cfg: &MeasureSampling, stream: u64) -> Result<CoarseTrajectory> {
    if (field.width() as usize) < cfg.n_cols - 1 {
        return Err(Error::OutOfField(format!(
            "field has columns 0..={}, trajectory needs {}",
            field.width(),
            cfg.n_cols
        )));
    }
    let bound = field.height() as i64 - cfg.window_radius as i64;
    if bound < 0 {
        return Err(Error::OutOfField("field shorter than the window radius".into()));
    }
    let mut rng = Stream::new(cfg.seed, stream);
    let mut b = Vec::with_capacity(cfg.n_cols + 1);
    for _ in 0..=cfg.n_cols {
        let num = rng.below(cfg.b_grid as u64) as i64 + 1;
        b.push(Rational64::new(num, cfg.b_grid as i64));
    }
    let mut increments = Vec::with_capacity(cfg.n_cols);
    let mut row = 0i64;
    for _ in 0..cfg.n_cols {
        let m = cfg.m_cap as i64;
        let allowed: Vec<i64> = (-m..=m).filter(|d| (row + d).abs() <= bound).collect();
        if allowed.is_empty() {
            return Err(Error::OutOfField("no admissible vertical increment".into()));
        }
        let dp = *rng.pick(&allowed);
        increments.push(dp as i32);
        row += dp;
    }
    let options = admissible_x(
        field,
        &increments,
        &b,
        cfg.m_cap,
        cfg.step_cap,
        cfg.window_radius,
    )?;
    let x: Vec<u8> = options
        .per_column
        .iter()
        .map(|opts| *rng.pick(opts))
        .collect();
    CoarseTrajectory::new(increments, b, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic_and_balanced() {
        let f1 = BlockField::sample(0.5, 99, 99, 7).unwrap();
        let f2 = BlockField::sample(0.5, 99, 99, 7).unwrap();
        assert_eq!(f1, f2);
        let frac = f1.a_fraction();
        assert!((0.44..=0.56).contains(&frac), "A-fraction {frac}");

        let skew = BlockField::sample(0.999, 99, 49, 3).unwrap();
        assert!(skew.a_fraction() > 0.99);
    }

    #[test]
    fn p_bounds_are_enforced() {
        assert!(BlockField::sample(0.0, 4, 4, 1).is_err());
        assert!(BlockField::sample(1.0, 4, 4, 1).is_err());
    }

    #[test]
    fn field_json_roundtrip() {
        let f = BlockField::sample(0.3, 12, 5, 11).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"rows\""));
        let back: BlockField = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn rle_is_exact() {
        let row = vec![Letter::A, Letter::A, Letter::B, Letter::A, Letter::A, Letter::A];
        let enc = rle_encode(&row);
        assert_eq!(enc, "A2B1A3");
        assert_eq!(rle_decode(&enc, 6).unwrap(), row);
        assert!(rle_decode(&enc, 7).is_err());
    }

    fn grid_half() -> Rational64 {
        Rational64::new(1, 2)
    }

    #[test]
    fn single_column_measure() {
        let field = BlockField::sample(0.5, 4, 8, 5).unwrap();
        let traj =
            CoarseTrajectory::new(vec![0], vec![grid_half(), grid_half()], vec![1]).unwrap();
        let m = empirical_measure(&field, &traj, 1, 1, 3, 3).unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].1, 1.0);
        m.validate().unwrap();
    }

    #[test]
    fn repeated_types_merge() {
        // All-A field: identical flat columns everywhere.
        let mut field = BlockField::sample(0.5, 6, 8, 5).unwrap();
        for col in 0..=6 {
            for row in -8..=8 {
                field = field.with_letter(col, row, Letter::A).unwrap();
            }
        }
        let traj = CoarseTrajectory::new(
            vec![0, 0, 0, 0],
            vec![grid_half(); 5],
            vec![1, 1, 1, 1],
        )
        .unwrap();
        let m = empirical_measure(&field, &traj, 4, 1, 3, 3).unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].1, 1.0);

        // Three flat columns and one rising column: weights 3/4 and 1/4.
        let traj = CoarseTrajectory::new(
            vec![0, 1, 0, 0],
            vec![grid_half(); 5],
            vec![1, 1, 1, 1],
        )
        .unwrap();
        let m = empirical_measure(&field, &traj, 4, 1, 3, 3).unwrap();
        assert_eq!(m.atoms.len(), 2);
        let mut weights: Vec<f64> = m.atoms.iter().map(|(_, w)| *w).collect();
        weights.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(weights, vec![0.25, 0.75]);
    }

    #[test]
    fn admissible_flags_follow_the_classification() {
        // All-A field: no interfaces anywhere, so x = 2 is never admissible.
        let mut field = BlockField::sample(0.5, 3, 8, 5).unwrap();
        for col in 0..=3 {
            for row in -8..=8 {
                field = field.with_letter(col, row, Letter::A).unwrap();
            }
        }
        let opts = admissible_x(&field, &[0, 0], &[grid_half(); 3], 1, 3, 3).unwrap();
        assert_eq!(opts.per_column, vec![vec![1], vec![1]]);

        // Put an interface right above the walk in column 0: x = 2 opens up.
        let field = field.with_letter(0, 1, Letter::B).unwrap();
        let opts = admissible_x(&field, &[0, 0], &[grid_half(); 3], 1, 3, 3).unwrap();
        assert_eq!(opts.per_column[0], vec![1, 2]);
        assert_eq!(opts.count(), BigUint::from(2u32));
        assert_eq!(opts.iter().count(), 2);

        // A far interface fails the step cap: reach time 1 + 2·4 - 1 = 8 > 3.
        let mut far = BlockField::sample(0.5, 3, 8, 6).unwrap();
        for col in 0..=3 {
            for row in -8..=8 {
                far = far.with_letter(col, row, Letter::A).unwrap();
            }
        }
        let far = far.with_letter(0, 4, Letter::B).unwrap();
        let opts = admissible_x(&far, &[0, 0], &[grid_half(); 3], 1, 3, 4).unwrap();
        assert_eq!(opts.per_column[0], vec![1]);
    }

    #[test]
    fn sampled_measures_are_reproducible_members() {
        let field = BlockField::sample(0.5, 16, 24, 21).unwrap();
        let cfg = MeasureSampling {
            m_cap: 1,
            step_cap: 3,
            n_cols: 8,
            b_grid: 4,
            window_radius: 3,
            seed: 77,
        };
        let a = sample_measures(&field, &cfg, &SampleStrategy::RandomWalk, 5).unwrap();
        let b = sample_measures(&field, &cfg, &SampleStrategy::RandomWalk, 5).unwrap();
        assert_eq!(a.len(), 5);
        for (ma, mb) in a.iter().zip(&b) {
            assert_eq!(ma.atoms.len(), mb.atoms.len());
            for ((ta, wa), (tb, wb)) in ma.atoms.iter().zip(&mb.atoms) {
                assert_eq!(ta, tb);
                assert_eq!(wa.to_bits(), wb.to_bits());
            }
            ma.validate().unwrap();
        }
        assert!(sample_measures(&field, &cfg, &SampleStrategy::RandomWalk, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn golden_sampled_measures() {
        // Frozen output of a fixed (field seed, walk seed) pair; sampling is
        // integer-only, so this is platform-independent.
        let field = BlockField::sample(0.5, 8, 12, 2020).unwrap();
        let cfg = MeasureSampling {
            m_cap: 1,
            step_cap: 3,
            n_cols: 2,
            b_grid: 2,
            window_radius: 3,
            seed: 11,
        };
        let ms = sample_measures(&field, &cfg, &SampleStrategy::RandomWalk, 2).unwrap();
        let flat: Vec<String> = ms
            .iter()
            .flat_map(|m| {
                m.atoms.iter().map(|(t, w)| {
                    format!(
                        "{}|{}|{}|{}|{}@{w}",
                        t.chi.window_string(),
                        t.delta_pi,
                        t.b0,
                        t.b1,
                        t.x
                    )
                })
            })
            .collect();
        assert_eq!(
            flat,
            vec![
                "AAABBBB|0|1|1|1@0.5",
                "BBABBBA|0|1/2|1|1@0.5",
                "AAAABBB|0|1/2|1|1@0.5",
                "BBABBBA|-1|1|1/2|1@0.5",
            ]
        );
    }

    #[test]
    fn supplied_trajectories_build_their_measures() {
        let field = BlockField::sample(0.5, 8, 12, 2020).unwrap();
        let cfg = MeasureSampling {
            m_cap: 1,
            step_cap: 3,
            n_cols: 3,
            b_grid: 2,
            window_radius: 3,
            seed: 0,
        };
        let traj = CoarseTrajectory::new(
            vec![0, 1, -1],
            vec![grid_half(), grid_half(), Rational64::one(), grid_half()],
            vec![1, 1, 1],
        )
        .unwrap();
        let ms = sample_measures(
            &field,
            &cfg,
            &SampleStrategy::Supplied(vec![traj.clone()]),
            1,
        )
        .unwrap();
        assert_eq!(ms.len(), 1);
        ms[0].validate().unwrap();
        let direct = empirical_measure(&field, &traj, 3, 1, 3, 3).unwrap();
        assert_eq!(ms[0].atoms, direct.atoms);
    }

    #[test]
    fn measures_depend_only_on_visited_windows() {
        let field = BlockField::sample(0.5, 16, 24, 21).unwrap();
        let cfg = MeasureSampling {
            m_cap: 1,
            step_cap: 3,
            n_cols: 4,
            b_grid: 4,
            window_radius: 3,
            seed: 13,
        };
        let before = sample_measures(&field, &cfg, &SampleStrategy::RandomWalk, 3).unwrap();
        // Rows near the top are untouchable: |Π| <= height - radius = 21,
        // so windows never reach row 24; columns beyond n_cols are unread.
        let field = field
            .clone()
            .with_letter(0, 24, Letter::B)
            .unwrap()
            .with_letter(12, 0, Letter::B)
            .unwrap();
        let after = sample_measures(&field, &cfg, &SampleStrategy::RandomWalk, 3).unwrap();
        for (ma, mb) in before.iter().zip(&after) {
            assert_eq!(ma.atoms, mb.atoms);
        }
    }
}
