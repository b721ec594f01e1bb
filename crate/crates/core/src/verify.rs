//! The invariant suite run by `archvol verify`.
//!
//! Each generator gets its own RNG stream derived from the seed, suites run
//! in parallel, and results are merged in a fixed order, so a given seed
//! always produces the same report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::copula::cdf_coords;
use crate::cpower::{axiom_witness, cpower_trace, CPowers, StopReason};
use crate::error::Error;
use crate::generator::{bisect_inverse, Archimedean};
use crate::margins::{certify_df_axioms, pmf_table_with, JointCdf, StepDistribution};
use crate::volume::{
    d_increasing_check, partition_volume_sum, recursive_volume, sample_unit_boxes, vertex_sign,
    CopulaFn, Partition2D, DEFAULT_TOL,
};

const ROUND_TRIP_TOL: f64 = 1e-9;
const ORACLE_TOL: f64 = 1e-9;
const NONINCREASING_STEPS: u64 = 1_000;
const ORACLE_STEPS: u64 = 10_000;
const RANDOM_BOXES: usize = 10_000;
const RANDOM_PARTITIONS: usize = 20;
const WITNESS_DRAWS: usize = 100;
const WITNESS_BUDGET: u64 = 100_000;

/// A generator with φ shifted up by a constant, so φ(1) ≠ 0. Used as a
/// negative control for the suite.
#[derive(Debug, Clone)]
pub struct PhiShift<G> {
    pub inner: G,
    pub shift: f64,
}

impl<G: Archimedean> Archimedean for PhiShift<G> {
    fn phi_unchecked(&self, t: f64) -> f64 {
        self.inner.phi_unchecked(t) + self.shift
    }

    fn inverse_unchecked(&self, y: f64) -> f64 {
        if y <= self.shift {
            1.0
        } else {
            self.inner.inverse_unchecked(y - self.shift)
        }
    }

    fn phi_at_zero(&self) -> f64 {
        self.inner.phi_at_zero() + self.shift
    }

    fn max_dim(&self) -> Option<usize> {
        self.inner.max_dim()
    }

    fn label(&self) -> String {
        format!("faulty[{} + {}]", self.inner.label(), self.shift)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub name: &'static str,
    pub checks: u64,
    pub failures: u64,
    pub skipped: u64,
    pub first_counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub generators: Vec<String>,
    pub passed: bool,
    pub invariants: Vec<InvariantReport>,
}

impl VerifyReport {
    pub fn invariant(&self, name: &str) -> Option<&InvariantReport> {
        self.invariants.iter().find(|i| i.name == name)
    }
}

struct Tally<'a> {
    label: &'a str,
    report: InvariantReport,
}

impl<'a> Tally<'a> {
    fn new(name: &'static str, label: &'a str) -> Self {
        Tally {
            label,
            report: InvariantReport {
                name,
                checks: 0,
                failures: 0,
                skipped: 0,
                first_counterexample: None,
            },
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) -> bool {
        self.report.checks += 1;
        if !ok {
            self.report.failures += 1;
            if self.report.first_counterexample.is_none() {
                self.report.first_counterexample = Some(format!("{}: {}", self.label, detail()));
            }
        }
        ok
    }

    fn skip(&mut self) {
        self.report.skipped += 1;
    }
}

fn interior_grid() -> impl Iterator<Item = f64> + Clone {
    (1..=99).map(|i| i as f64 / 100.0)
}

fn fine_grid() -> impl Iterator<Item = f64> + Clone {
    (0..=1000).map(|i| i as f64 / 1000.0)
}

fn tenths() -> impl Iterator<Item = f64> + Clone {
    (1..=9).map(|i| i as f64 / 10.0)
}

fn c2<G: Archimedean + ?Sized>(g: &G, u: f64, v: f64) -> f64 {
    cdf_coords(g, &[u, v])
}

fn generator_suite<'a>(g: &dyn Archimedean, label: &'a str) -> Vec<Tally<'a>> {
    let mut phi_one = Tally::new("generator.phi_one_is_zero", label);
    let value = g.phi(1.0);
    phi_one.check(matches!(value, Ok(v) if v == 0.0), || {
        format!("phi(1) = {value:?}")
    });

    let mut decreasing = Tally::new("generator.strictly_decreasing", label);
    let ts: Vec<f64> = fine_grid().collect();
    for w in ts.windows(2) {
        let (a, b) = (g.phi_unchecked(w[0]), g.phi_unchecked(w[1]));
        decreasing.check(a > b, || {
            format!("phi({}) = {a} <= phi({}) = {b}", w[0], w[1])
        });
    }

    let mut round_trip = Tally::new("generator.round_trip", label);
    for t in std::iter::once(0.0)
        .chain(interior_grid())
        .chain(std::iter::once(1.0))
    {
        let back = g.pseudo_inverse(g.phi_unchecked(t));
        round_trip.check((back - t).abs() <= ROUND_TRIP_TOL, || {
            format!("pseudo_inverse(phi({t})) = {back}")
        });
    }

    let mut clamp = Tally::new("generator.pseudo_inverse_monotone_clamp", label);
    let phi0 = g.phi_at_zero();
    let xs: Vec<f64> = if phi0.is_finite() {
        (0..=100).map(|k| phi0 * k as f64 / 50.0).collect()
    } else {
        (-60..=60).map(|k| 10f64.powf(k as f64 / 10.0)).collect()
    };
    for w in xs.windows(2) {
        let (a, b) = (g.pseudo_inverse(w[0]), g.pseudo_inverse(w[1]));
        clamp.check(a >= b, || {
            format!("pseudo_inverse increases between x = {} and {}", w[0], w[1])
        });
    }
    for &x in xs.iter().filter(|&&x| x > phi0) {
        let p = g.pseudo_inverse(x);
        clamp.check(p == 0.0, || {
            format!("pseudo_inverse({x}) = {p} past phi(0) = {phi0}")
        });
    }

    let mut bisect = Tally::new("generator.bisection_matches_inverse", label);
    for &t in &ts {
        let y = g.phi_unchecked(t);
        if !y.is_finite() {
            bisect.skip();
            continue;
        }
        let closed = g.pseudo_inverse(y);
        match bisect_inverse(g, y) {
            Ok(numeric) => {
                bisect.check((numeric - closed).abs() <= ROUND_TRIP_TOL, || {
                    format!("y = {y}: bisection {numeric} vs closed form {closed}")
                });
            }
            Err(e) => {
                bisect.check(false, || format!("y = {y}: {e}"));
            }
        }
    }

    vec![phi_one, decreasing, round_trip, clamp, bisect]
}

fn copula_suite<'a>(g: &dyn Archimedean, label: &'a str) -> Vec<Tally<'a>> {
    let mut frechet = Tally::new("copula.frechet_bounds", label);
    let mut upper_bound = Tally::new("copula.strict_upper_bound", label);
    let mut monotone = Tally::new("copula.monotone", label);
    let mut symmetric = Tally::new("copula.symmetric", label);
    let grid: Vec<f64> = interior_grid().collect();
    for &u in &grid {
        for (j, &v) in grid.iter().enumerate() {
            let c = c2(g, u, v);
            let lo = (u + v - 1.0).max(0.0) - 1e-12;
            let hi = u.min(v) + 1e-12;
            frechet.check(c >= lo && c <= hi, || format!("C({u}, {v}) = {c}"));
            upper_bound.check(c < u.min(v), || format!("C({u}, {v}) = {c} >= min(u, v)"));
            let swapped = c2(g, v, u);
            symmetric.check(c == swapped, || {
                format!("C({u}, {v}) = {c}, C({v}, {u}) = {swapped}")
            });
            if let Some(&v_next) = grid.get(j + 1) {
                let c_next = c2(g, u, v_next);
                monotone.check(c <= c_next, || {
                    format!("C({u}, {v}) = {c} > C({u}, {v_next}) = {c_next}")
                });
            }
        }
    }

    let mut grounded = Tally::new("copula.grounded", label);
    let mut margins = Tally::new("copula.margins", label);
    for u in fine_grid() {
        let (a, b) = (c2(g, u, 0.0), c2(g, 0.0, u));
        grounded.check(a == 0.0 && b == 0.0, || {
            format!("C({u}, 0) = {a}, C(0, {u}) = {b}")
        });
        let (a, b) = (c2(g, u, 1.0), c2(g, 1.0, u));
        margins.check(a == u && b == u, || {
            format!("C({u}, 1) = {a}, C(1, {u}) = {b}")
        });
    }

    vec![frechet, upper_bound, grounded, margins, monotone, symmetric]
}

fn volume_suite<'a>(g: &dyn Archimedean, label: &'a str, rng: &mut ChaCha8Rng) -> Vec<Tally<'a>> {
    let mut increasing = Tally::new("volume.two_increasing", label);
    let boxes = sample_unit_boxes(rng, 2, RANDOM_BOXES);
    match d_increasing_check(&CopulaFn(g), &boxes, DEFAULT_TOL) {
        Ok(found) => {
            increasing.report.checks += (boxes.len() - found.len()) as u64;
            for v in found {
                increasing.check(false, || format!("V = {} on {:?}", v.volume, v.region));
            }
        }
        Err(e) => {
            increasing.check(false, || e.to_string());
        }
    }

    let mut additivity = Tally::new("volume.partition_additivity", label);
    let mut refinement = Tally::new("volume.refinement_stability", label);
    for _ in 0..RANDOM_PARTITIONS {
        let u = rng.random_range(0.01..=1.0);
        let v = rng.random_range(0.01..=1.0);
        let m = rng.random_range(1..=50);
        let p = rng.random_range(1..=50);
        let Ok(mut part) = Partition2D::random(rng, u, v, m, p) else {
            additivity.skip();
            continue;
        };
        let sum = partition_volume_sum(g, &part);
        let corner = c2(g, u, v);
        additivity.check((sum - corner).abs() <= DEFAULT_TOL, || {
            format!("sum over {m}x{p} cells = {sum}, C({u}, {v}) = {corner}")
        });
        let cut = rng.random_range(0.0..u);
        if part.insert_u_cut(cut) {
            let refined = partition_volume_sum(g, &part);
            refinement.check((refined - sum).abs() <= DEFAULT_TOL, || {
                format!("inserting u-cut {cut} moved the sum from {sum} to {refined}")
            });
        } else {
            refinement.skip();
        }
    }

    let mut signs = Tally::new("volume.sign_sum_zero", label);
    for d in 1..=8usize {
        let total: f64 = (0..1u32 << d).map(|mask| vertex_sign(mask, d)).sum();
        signs.check(total == 0.0, || format!("signs sum to {total} in d = {d}"));
    }

    let mut recursive = Tally::new("volume.recursive_nonincreasing", label);
    let mut vanishing = Tally::new("volume.recursive_vanishes", label);
    for u in tenths() {
        let mut prev = None;
        for n in 1..=100 {
            match recursive_volume(g, u, n) {
                Ok(vol) => {
                    if let Some(p) = prev {
                        recursive.check(vol <= p + 1e-15, || {
                            format!("V^{}({u}) = {vol} > V^{}({u}) = {p}", n, n - 1)
                        });
                    }
                    prev = Some(vol);
                }
                Err(e) => {
                    recursive.check(false, || format!("u = {u}, n = {n}: {e}"));
                    break;
                }
            }
        }
        let eps = 1e-6;
        match cpower_trace(g, u, eps, WITNESS_BUDGET) {
            Ok(t) if t.stop_reason == StopReason::BelowEpsilon => {
                for n in t.len..t.len + 10 {
                    let vol = recursive_volume(g, u, n);
                    vanishing.check(matches!(vol, Ok(x) if x < eps), || {
                        format!("V^{n}({u}) = {vol:?} past the limit index {}", t.len)
                    });
                }
            }
            Ok(_) => vanishing.skip(),
            Err(e) => {
                vanishing.check(false, || format!("u = {u}: {e}"));
            }
        }
    }

    vec![
        increasing, additivity, refinement, signs, recursive, vanishing,
    ]
}

fn cpower_suite<'a>(g: &dyn Archimedean, label: &'a str, rng: &mut ChaCha8Rng) -> Vec<Tally<'a>> {
    let mut nonincreasing = Tally::new("cpower.nonincreasing", label);
    let mut first_step = Tally::new("cpower.strict_first_step", label);
    for u in interior_grid() {
        let Ok(iter) = CPowers::new(g, u) else {
            continue;
        };
        let mut prev: Option<f64> = None;
        for (n, f) in iter.take((NONINCREASING_STEPS + 1) as usize) {
            if let Some(p) = prev {
                nonincreasing.check(f <= p, || {
                    format!("u = {u}: f_{n} = {f} > f_{} = {p}", n - 1)
                });
                if n == 2 {
                    first_step.check(f < p, || format!("u = {u}: f_2 = {f} >= f_1"));
                }
            }
            prev = Some(f);
        }
    }

    let mut oracle = Tally::new("cpower.phi_space_oracle", label);
    for u in tenths() {
        let phi_u = g.phi_unchecked(u);
        let Ok(iter) = CPowers::new(g, u) else {
            continue;
        };
        let mut worst = (0u64, 0.0f64);
        for (n, f) in iter.take(ORACLE_STEPS as usize) {
            let expected = g.pseudo_inverse(n as f64 * phi_u);
            let err = (f - expected).abs();
            if !(err <= worst.1) {
                worst = (n, err);
            }
        }
        oracle.check(worst.1 <= ORACLE_TOL, || {
            format!(
                "u = {u}: |f_n - phi^[-1](n phi(u))| = {} at n = {}",
                worst.1, worst.0
            )
        });
    }

    let mut minimal = Tally::new("cpower.witness_minimality", label);
    for _ in 0..WITNESS_DRAWS {
        let u = rng.random_range(0.01..0.99);
        let v = rng.random_range(0.01..0.99);
        match axiom_witness(g, u, v, WITNESS_BUDGET) {
            Ok(w) => {
                let ok = w.verify(g).unwrap_or(false);
                minimal.check(ok, || format!("witness {w:?} fails recomputation"));
            }
            Err(Error::Exhausted { .. }) => minimal.skip(),
            Err(e) => {
                minimal.check(false, || format!("u = {u}, v = {v}: {e}"));
            }
        }
    }

    let mut idempotent = Tally::new("cpower.idempotent_stability", label);
    for (u, iter) in [0.0, 1.0].map(|u| (u, CPowers::new(g, u))) {
        let Ok(iter) = iter else { continue };
        for (n, f) in iter.take(NONINCREASING_STEPS as usize) {
            idempotent.check(f == u, || format!("f_{n}({u}) = {f}"));
        }
        let res = axiom_witness(g, u, 0.5, 10);
        idempotent.check(matches!(res, Err(Error::Idempotent { .. })), || {
            format!("axiom_witness at u = {u} returned {res:?}")
        });
    }

    vec![nonincreasing, first_step, oracle, minimal, idempotent]
}

fn fixture_margins() -> Vec<Vec<StepDistribution>> {
    let a = StepDistribution::new(vec![(0.0, 0.2), (1.0, 0.7), (5.0, 1.0)]).unwrap();
    let b = StepDistribution::bernoulli(0.5).unwrap();
    let c = StepDistribution::new(vec![(-1.0, 0.1), (0.0, 0.4), (2.0, 0.9), (3.0, 1.0)]).unwrap();
    vec![
        vec![b.clone(), b.clone()],
        vec![a.clone(), c.clone()],
        vec![a, b, c],
    ]
}

fn margins_suite<'a>(g: &dyn Archimedean, label: &'a str, seed: u64) -> Vec<Tally<'a>> {
    let mut mass = Tally::new("margins.mass_conservation", label);
    let mut recovery = Tally::new("margins.margin_recovery", label);
    let mut axioms = Tally::new("margins.df_axioms", label);
    let mut rays = Tally::new("margins.monotone_rays", label);
    for margins in fixture_margins() {
        let d = margins.len();
        if g.max_dim().is_some_and(|max| d > max) {
            for t in [&mut mass, &mut recovery, &mut axioms, &mut rays] {
                t.skip();
            }
            continue;
        }
        if let Ok(h) = JointCdf::new(g, &margins) {
            use crate::volume::Evaluator;
            for axis in 0..d {
                let mut x: Vec<f64> = margins.iter().map(|m| m.points()[0]).collect();
                let mut prev = f64::NEG_INFINITY;
                for k in 0..=60 {
                    x[axis] = -2.0 + k as f64 * 0.125;
                    let value = h.eval(&x);
                    rays.check(value >= prev, || {
                        format!("H decreases along axis {axis} at {x:?}")
                    });
                    prev = value;
                }
            }
        }
        let grid = match pmf_table_with(g, margins.clone()) {
            Ok(grid) => grid,
            Err(e) => {
                mass.check(false, || format!("d = {d}: {e}"));
                continue;
            }
        };
        let total = grid.total_mass();
        mass.check((total - 1.0).abs() <= 1e-12, || {
            format!("d = {d}: total mass {total}")
        });
        for (axis, m) in margins.iter().enumerate() {
            let got = grid.marginal(axis);
            for (i, (p, want)) in got.iter().zip(m.masses()).enumerate() {
                recovery.check((p - want).abs() <= 1e-12, || {
                    format!("d = {d}, axis {axis}, atom {i}: {p} vs {want}")
                });
            }
        }
        let report = certify_df_axioms(&grid, 200, seed);
        axioms.check(report.passed, || format!("d = {d}: {:?}", report.checks));
    }
    vec![mass, recovery, axioms, rays]
}

fn run_suite(g: &dyn Archimedean, label: &str, seed: u64) -> Vec<InvariantReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = generator_suite(g, label);
    out.extend(copula_suite(g, label));
    out.extend(volume_suite(g, label, &mut rng));
    out.extend(cpower_suite(g, label, &mut rng));
    out.extend(margins_suite(g, label, seed));
    out.into_iter().map(|t| t.report).collect()
}

/// Runs every invariant suite over `generators`.
pub fn verify_all(generators: &[Box<dyn Archimedean>], seed: u64) -> VerifyReport {
    let labels: Vec<String> = generators.iter().map(|g| g.label()).collect();
    let per_generator: Vec<Vec<InvariantReport>> = generators
        .par_iter()
        .zip(labels.par_iter())
        .enumerate()
        .map(|(i, (g, label))| {
            let stream = seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            run_suite(g.as_ref(), label, stream)
        })
        .collect();

    let mut merged: Vec<InvariantReport> = Vec::new();
    for reports in per_generator {
        for r in reports {
            match merged.iter_mut().find(|m| m.name == r.name) {
                Some(m) => {
                    m.checks += r.checks;
                    m.failures += r.failures;
                    m.skipped += r.skipped;
                    if m.first_counterexample.is_none() {
                        m.first_counterexample = r.first_counterexample;
                    }
                }
                None => merged.push(r),
            }
        }
    }
    VerifyReport {
        seed,
        generators: labels,
        passed: merged.iter().all(|r| r.failures == 0),
        invariants: merged,
    }
}
