//! Discrete margins, their Sklar composition with a copula, and the
//! distribution-function axioms on the induced joint grid.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::cdf_coords;
use crate::error::{Error, Result};
use crate::generator::{Archimedean, Generator};
use crate::numeric::neumaier_sum;
use crate::volume::{h_volume, Evaluator, HyperBox, Violation, MAX_DIM};

/// Largest joint table [`pmf_table`] will build.
pub const MAX_CELLS: u128 = 10_000_000;

/// Cells in `[-NEGATIVE_TOL, 0)` are floating-point noise and get clamped.
pub const NEGATIVE_TOL: f64 = 1e-12;

/// Probe offset used for the right-continuity check.
const RIGHT_PROBE: f64 = 1.0 / (1u64 << 40) as f64;

/// A right-continuous step d.f. with finitely many jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepSpec", into = "StepSpec")]
pub struct StepDistribution {
    points: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepSpec {
    jumps: Vec<(f64, f64)>,
}

impl TryFrom<StepSpec> for StepDistribution {
    type Error = Error;

    fn try_from(spec: StepSpec) -> Result<Self> {
        StepDistribution::new(spec.jumps)
    }
}

impl From<StepDistribution> for StepSpec {
    fn from(d: StepDistribution) -> Self {
        StepSpec {
            jumps: d.points.into_iter().zip(d.cdf).collect(),
        }
    }
}

impl StepDistribution {
    /// `jumps` holds `(x_i, F(x_i))` with strictly increasing `x_i`,
    /// non-decreasing `F(x_i) ∈ (0,1]`, and `F(x_r) = 1`.
    pub fn new(jumps: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        if jumps.is_empty() {
            return bad("at least one jump point is required".into());
        }
        for (i, &(x, f)) in jumps.iter().enumerate() {
            if !x.is_finite() {
                return bad(format!("jump {i}: x = {x} is not finite"));
            }
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("jump {i}: F = {f} is outside (0, 1]"));
            }
        }
        for (i, w) in jumps.windows(2).enumerate() {
            if !(w[0].0 < w[1].0) {
                return bad(format!(
                    "jump points must be strictly increasing: x_{i} = {}, x_{} = {}",
                    w[0].0,
                    i + 1,
                    w[1].0
                ));
            }
            if w[0].1 > w[1].1 {
                return bad(format!("F must be non-decreasing at x = {}", w[1].0));
            }
        }
        let last = jumps[jumps.len() - 1].1;
        if last != 1.0 {
            return bad(format!("F at the last jump must be 1, got {last}"));
        }
        let (points, cdf) = jumps.into_iter().unzip();
        Ok(StepDistribution { points, cdf })
    }

    /// Two-point law on `{0, 1}` with `P(X = 0) = p0`.
    pub fn bernoulli(p0: f64) -> Result<Self> {
        StepDistribution::new(vec![(0.0, p0), (1.0, 1.0)])
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Two columns `x, F`; a header row and `#` comments are allowed.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut jumps = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Parse(format!(
                    "row {}: expected 2 columns (x, F), found {}",
                    line + 1,
                    rec.len()
                )));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(x), Ok(f)) => jumps.push((x, f)),
                _ if line == 0 => continue, // header
                _ => {
                    return Err(Error::Parse(format!(
                        "row {}: cannot parse '{}', '{}' as numbers",
                        line + 1,
                        &rec[0],
                        &rec[1]
                    )))
                }
            }
        }
        StepDistribution::new(jumps)
    }

    /// Reads JSON when the content starts with `{`, CSV otherwise.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if text.trim_start().starts_with('{') {
            StepDistribution::from_json(&text)
        } else {
            StepDistribution::from_csv(text.as_bytes())
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn jump_count(&self) -> usize {
        self.points.len()
    }

    /// Probability mass at each jump point.
    pub fn masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cdf
            .iter()
            .map(|&f| {
                let m = f - prev;
                prev = f;
                m
            })
            .collect()
    }

    /// Index of the last jump point `≤ x`, if any.
    fn index_at(&self, x: f64) -> Option<usize> {
        self.points.partition_point(|&p| p <= x).checked_sub(1)
    }

    /// Half the smallest gap between consecutive jump points.
    fn half_min_gap(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
            / 2.0
    }
}

/// Right-continuous evaluation; `F(−∞) = 0`, `F(+∞) = 1`. NaN maps to 0.
pub fn eval_cdf(f: &StepDistribution, x: f64) -> f64 {
    f.index_at(x).map_or(0.0, |i| f.cdf[i])
}

fn check_margins(margins: &[StepDistribution]) -> Result<()> {
    if !(2..=MAX_DIM).contains(&margins.len()) {
        return Err(Error::Dimension {
            found: margins.len(),
            min: 2,
            max: MAX_DIM,
        });
    }
    Ok(())
}

/// `H(x) = C(F_1(x_1), …, F_d(x_d))` as an [`Evaluator`].
pub struct JointCdf<'a, G: ?Sized> {
    g: &'a G,
    margins: &'a [StepDistribution],
}

impl<'a, G: Archimedean + ?Sized> JointCdf<'a, G> {
    pub fn new(g: &'a G, margins: &'a [StepDistribution]) -> Result<Self> {
        check_margins(margins)?;
        Ok(JointCdf { g, margins })
    }
}

impl<G: Archimedean + ?Sized> Evaluator for JointCdf<'_, G> {
    fn arity(&self) -> Option<usize> {
        Some(self.margins.len())
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let u: Vec<f64> = self
            .margins
            .iter()
            .zip(x)
            .map(|(m, &xi)| eval_cdf(m, xi))
            .collect();
        cdf_coords(self.g, &u)
    }
}

/// Sklar composition at a single point.
pub fn joint_cdf<G: Archimedean + ?Sized>(
    g: &G,
    margins: &[StepDistribution],
    x: &[f64],
) -> Result<f64> {
    let h = JointCdf::new(g, margins)?;
    if x.len() != margins.len() {
        return Err(Error::DimensionMismatch {
            expected: margins.len(),
            found: x.len(),
        });
    }
    Ok(h.eval(x))
}

/// Joint probability table over the product of the margins' jump points.
/// Cells are stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct JointGrid {
    margins: Vec<StepDistribution>,
    generator: Option<Generator>,
    shape: Vec<usize>,
    cells: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub total_mass: f64,
    pub min_cell: f64,
    pub certified: bool,
}

impl JointGrid {
    /// Wraps an externally built table; only the shape is checked.
    pub fn from_cells(margins: Vec<StepDistribution>, cells: Vec<f64>) -> Result<Self> {
        check_margins(&margins)?;
        let shape: Vec<usize> = margins.iter().map(StepDistribution::jump_count).collect();
        let expected: usize = shape.iter().product();
        if cells.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: cells.len(),
            });
        }
        Ok(JointGrid {
            margins,
            generator: None,
            shape,
            cells,
        })
    }

    pub fn margins(&self) -> &[StepDistribution] {
        &self.margins
    }

    pub fn generator(&self) -> Option<&Generator> {
        self.generator.as_ref()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn get(&self, index: &[usize]) -> Option<f64> {
        if index.len() != self.dim() || index.iter().zip(&self.shape).any(|(i, n)| i >= n) {
            return None;
        }
        Some(self.cells[self.flat(index)])
    }

    fn flat(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut index = vec![0; self.dim()];
        for (slot, &n) in index.iter_mut().zip(&self.shape).rev() {
            *slot = flat % n;
            flat /= n;
        }
        index
    }

    pub fn total_mass(&self) -> f64 {
        neumaier_sum(self.cells.iter().copied())
    }

    pub fn min_cell(&self) -> f64 {
        self.cells.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sums over every axis but `axis`.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let mut buckets = vec![Vec::new(); self.shape[axis]];
        for (flat, &p) in self.cells.iter().enumerate() {
            buckets[self.unflatten(flat)[axis]].push(p);
        }
        buckets.into_iter().map(neumaier_sum).collect()
    }

    /// Half-open box `(x_{i-1}, x_i]` per axis, as a closed box whose lower
    /// corner sits strictly between the neighbouring jumps.
    pub fn cell_box(&self, index: &[usize]) -> HyperBox {
        let (lower, upper) = self
            .margins
            .iter()
            .zip(index)
            .map(|(m, &i)| {
                let lo = if i == 0 {
                    f64::NEG_INFINITY
                } else {
                    m.points[i] - m.half_min_gap()
                };
                (lo, m.points[i])
            })
            .unzip();
        HyperBox::new(lower, upper).expect("jump points are ordered")
    }

    pub fn summary(&self, certified: bool) -> GridSummary {
        GridSummary {
            total_mass: self.total_mass(),
            min_cell: self.min_cell(),
            certified,
        }
    }

    /// One row per cell: indices, support point per axis, probability.
    pub fn write_csv<W: Write>(&self, w: W, fmt: impl Fn(f64) -> String) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let d = self.dim();
        let header: Vec<String> = (1..=d)
            .map(|k| format!("i{k}"))
            .chain((1..=d).map(|k| format!("x{k}")))
            .chain(std::iter::once("probability".to_string()))
            .collect();
        out.write_record(&header)?;
        for (flat, &p) in self.cells.iter().enumerate() {
            let idx = self.unflatten(flat);
            let row: Vec<String> = idx
                .iter()
                .map(|i| i.to_string())
                .chain(
                    idx.iter()
                        .zip(&self.margins)
                        .map(|(&i, m)| fmt(m.points[i])),
                )
                .chain(std::iter::once(fmt(p)))
                .collect();
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Builds the joint table: each cell is `V_H` of the composed d.f. over the
/// jump-aligned box bracketing that support point.
pub fn pmf_table(g: &Generator, margins: Vec<StepDistribution>) -> Result<JointGrid> {
    let mut grid = pmf_table_with(g, margins)?;
    grid.generator = Some(*g);
    Ok(grid)
}

/// [`pmf_table`] for any generator implementation. The grid does not
/// record the generator.
pub fn pmf_table_with<G: Archimedean + ?Sized>(
    g: &G,
    margins: Vec<StepDistribution>,
) -> Result<JointGrid> {
    check_margins(&margins)?;
    let shape: Vec<usize> = margins.iter().map(StepDistribution::jump_count).collect();
    let count: u128 = shape.iter().map(|&n| n as u128).product();
    if count > MAX_CELLS {
        return Err(Error::Capacity {
            cells: count,
            limit: MAX_CELLS,
        });
    }
    let mut grid = JointGrid {
        margins,
        generator: None,
        shape,
        cells: Vec::new(),
    };
    let h = JointCdf::new(g, &grid.margins)?;
    let mut cells: Vec<f64> = (0..count as usize)
        .into_par_iter()
        .map(|flat| h_volume(&h, &grid.cell_box(&grid.unflatten(flat))))
        .collect::<Result<_>>()?;
    for (flat, p) in cells.iter_mut().enumerate() {
        if *p < -NEGATIVE_TOL {
            return Err(Error::NegativeCell {
                index: grid.unflatten(flat),
                mass: *p,
            });
        }
        if *p < 0.0 {
            log::debug!("clamping cell {:?} mass {} to 0", grid.unflatten(flat), p);
            *p = 0.0;
        }
    }
    grid.cells = cells;
    Ok(grid)
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub evaluated: u64,
    pub failures: u64,
    pub first_counterexample: Option<String>,
}

impl CheckOutcome {
    fn new(name: &'static str) -> Self {
        CheckOutcome {
            name,
            evaluated: 0,
            failures: 0,
            first_counterexample: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.evaluated += 1;
        if !ok {
            self.failures += 1;
            if self.first_counterexample.is_none() {
                self.first_counterexample = Some(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    /// Boxes with negative volume, cells included.
    pub violations: Vec<Violation>,
}

/// The step d.f. induced by a table: `H(x) = Σ_{cells ≤ x} p`.
struct TableCdf<'a> {
    grid: &'a JointGrid,
    cumulative: Vec<f64>,
}

impl<'a> TableCdf<'a> {
    fn new(grid: &'a JointGrid) -> Self {
        let mut cumulative = grid.cells.clone();
        let mut stride = 1;
        for axis in (0..grid.dim()).rev() {
            let n = grid.shape[axis];
            for flat in 0..cumulative.len() {
                if (flat / stride) % n != 0 {
                    cumulative[flat] += cumulative[flat - stride];
                }
            }
            stride *= n;
        }
        TableCdf { grid, cumulative }
    }
}

impl Evaluator for TableCdf<'_> {
    fn arity(&self) -> Option<usize> {
        Some(self.grid.dim())
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut index = Vec::with_capacity(x.len());
        for (m, &xi) in self.grid.margins.iter().zip(x) {
            match m.index_at(xi) {
                Some(i) => index.push(i),
                None => return 0.0,
            }
        }
        self.cumulative[self.grid.flat(&index)]
    }
}

/// Checks groundedness, right-continuity and non-negative volumes of the
/// d.f. induced by `grid`, on every cell plus `sample_boxes` random boxes
/// (half jump-aligned, half not). Failures are data in the report.
pub fn certify_df_axioms(grid: &JointGrid, sample_boxes: usize, seed: u64) -> CertificationReport {
    let h = TableCdf::new(grid);
    let d = grid.dim();
    let mut violations = Vec::new();

    let mut grounded = CheckOutcome::new("grounded");
    for axis in 0..d {
        let mut x = vec![f64::INFINITY; d];
        x[axis] = f64::NEG_INFINITY;
        let value = h.eval(&x);
        grounded.record(value == 0.0, || {
            format!("H = {value} with x_{} = -inf", axis + 1)
        });
    }
    let top = h.eval(&vec![f64::INFINITY; d]);
    grounded.record((top - 1.0).abs() <= NEGATIVE_TOL, || {
        format!("H(+inf, ..) = {top}")
    });

    let mut right = CheckOutcome::new("right_continuous");
    let mut consistent = CheckOutcome::new("table_matches_composed_cdf");
    let composed = grid
        .generator
        .as_ref()
        .map(|g| JointCdf::new(g, &grid.margins).expect("validated margins"));
    for flat in 0..grid.cells.len() {
        let idx = grid.unflatten(flat);
        let node: Vec<f64> = idx
            .iter()
            .zip(&grid.margins)
            .map(|(&i, m)| m.points[i])
            .collect();
        let at = h.eval(&node);
        for axis in 0..d {
            let mut probe = node.clone();
            probe[axis] += RIGHT_PROBE.min(grid.margins[axis].half_min_gap());
            let table_ok = h.eval(&probe) == at;
            let composed_ok = composed
                .as_ref()
                .is_none_or(|c| c.eval(&probe) == c.eval(&node));
            right.record(table_ok && composed_ok, || {
                format!("jump at {node:?} along axis {}", axis + 1)
            });
        }
        if let Some(c) = &composed {
            let expected = c.eval(&node);
            consistent.record((at - expected).abs() <= NEGATIVE_TOL, || {
                format!("H_table{node:?} = {at}, C(F(x)) = {expected}")
            });
        }
    }

    let mut cells = CheckOutcome::new("cell_volumes_nonnegative");
    for (flat, &p) in grid.cells.iter().enumerate() {
        let ok = p >= -NEGATIVE_TOL;
        let idx = grid.unflatten(flat);
        cells.record(ok, || format!("cell {idx:?} has mass {p}"));
        if !ok {
            violations.push(Violation {
                region: grid.cell_box(&idx),
                volume: p,
            });
        }
    }

    let mut sampled = CheckOutcome::new("sampled_box_volumes_nonnegative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..sample_boxes {
        let b = if i % 2 == 0 {
            aligned_box(&mut rng, grid)
        } else {
            free_box(&mut rng, grid)
        };
        let volume = h_volume(&h, &b).expect("arity matches grid");
        let ok = volume >= -NEGATIVE_TOL;
        sampled.record(ok, || format!("V_H = {volume} on {b:?}"));
        if !ok {
            violations.push(Violation { region: b, volume });
        }
    }

    let checks = vec![grounded, right, consistent, cells, sampled];
    CertificationReport {
        passed: checks.iter().all(CheckOutcome::passed),
        checks,
        violations,
    }
}

fn aligned_box<R: Rng>(rng: &mut R, grid: &JointGrid) -> HyperBox {
    let (lower, upper) = grid
        .margins
        .iter()
        .map(|m| {
            let n = m.jump_count();
            // index n stands for −∞ on the lower side
            let a = rng.random_range(0..=n);
            let b = rng.random_range(0..n);
            let lo = if a == n || a > b {
                f64::NEG_INFINITY
            } else {
                m.points[a]
            };
            (lo, m.points[b])
        })
        .unzip();
    HyperBox::new(lower, upper).expect("ordered corners")
}

fn free_box<R: Rng>(rng: &mut R, grid: &JointGrid) -> HyperBox {
    let (lower, upper) = grid
        .margins
        .iter()
        .map(|m| {
            let lo = m.points[0] - 1.0;
            let hi = m.points[m.jump_count() - 1] + 1.0;
            let a = rng.random_range(lo..hi);
            let b = rng.random_range(lo..hi);
            (a.min(b), a.max(b))
        })
        .unzip();
    HyperBox::new(lower, upper).expect("ordered corners")
}
