//! C-power iteration `f_1(u) = u`, `f_{n+1}(u) = C(u, f_n(u))`, limit
//! detection, and Archimedean-axiom witnesses.
//!
//! Every loop here asserts `f_{n+1} ≤ f_n` and rejects interior fixed points;
//! either event means the generator implementation is broken, and is
//! reported as an error rather than returned as data.

use std::collections::VecDeque;

use serde::Serialize;

use crate::copula::bivariate_unchecked;
use crate::error::{Error, Result};
use crate::generator::Archimedean;

/// Iteration budget used when the caller does not supply one.
pub const DEFAULT_N_MAX: u64 = 1_000_000;

/// Number of trailing values a [`CPowerTrace`] keeps.
pub const TRACE_TAIL: usize = 1_000;

pub(crate) fn check_unit(what: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: x,
            domain: "[0, 1]",
        })
    }
}

/// `u ∈ (0,1)`; the endpoints are reported as idempotents.
pub(crate) fn check_open_unit(u: f64) -> Result<()> {
    check_unit("u", u)?;
    if u == 0.0 || u == 1.0 {
        return Err(Error::Idempotent { u });
    }
    Ok(())
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain {
            what: "n",
            value: 0.0,
            domain: "n >= 1",
        });
    }
    Ok(())
}

/// Infinite iterator over `(n, f_n(u))`, starting at `(1, u)`.
pub struct CPowers<'a, G: ?Sized> {
    g: &'a G,
    u: f64,
    n: u64,
    current: f64,
}

impl<'a, G: Archimedean + ?Sized> CPowers<'a, G> {
    pub fn new(g: &'a G, u: f64) -> Result<Self> {
        check_unit("u", u)?;
        Ok(CPowers {
            g,
            u,
            n: 0,
            current: u,
        })
    }
}

impl<G: Archimedean + ?Sized> Iterator for CPowers<'_, G> {
    type Item = (u64, f64);

    fn next(&mut self) -> Option<(u64, f64)> {
        if self.n > 0 {
            self.current = bivariate_unchecked(self.g, self.u, self.current);
        }
        self.n += 1;
        Some((self.n, self.current))
    }
}

/// `f_n(u)`.
pub fn c_power<G: Archimedean + ?Sized>(g: &G, u: f64, n: u64) -> Result<f64> {
    check_n(n)?;
    let mut f = CPowers::new(g, u)?;
    Ok(f.nth((n - 1) as usize).map(|(_, v)| v).unwrap_or(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BelowEpsilon,
    FixedPointInterior,
    MaxIterations,
    Idempotent,
}

/// A C-power run. Only every power-of-two index plus the last
/// [`TRACE_TAIL`] values are kept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CPowerTrace {
    pub u: f64,
    /// Index of the last computed value.
    pub len: u64,
    pub stop_reason: StopReason,
    /// Last computed value.
    pub limit_estimate: f64,
    /// `(n, f_n)` pairs in increasing `n`; the first is `(1, u)`.
    pub checkpoints: Vec<(u64, f64)>,
}

struct Recorder {
    powers: Vec<(u64, f64)>,
    tail: VecDeque<(u64, f64)>,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            powers: Vec::new(),
            tail: VecDeque::with_capacity(TRACE_TAIL),
        }
    }

    fn push(&mut self, n: u64, f: f64) {
        if n.is_power_of_two() {
            self.powers.push((n, f));
        }
        if self.tail.len() == TRACE_TAIL {
            self.tail.pop_front();
        }
        self.tail.push_back((n, f));
    }

    fn finish(self, u: f64, stop_reason: StopReason) -> CPowerTrace {
        let (len, limit_estimate) = *self.tail.back().expect("trace holds f_1");
        let first_tail = self.tail.front().map_or(u64::MAX, |p| p.0);
        let mut checkpoints: Vec<_> = self
            .powers
            .into_iter()
            .filter(|p| p.0 < first_tail)
            .collect();
        checkpoints.extend(self.tail);
        CPowerTrace {
            u,
            len,
            stop_reason,
            limit_estimate,
            checkpoints,
        }
    }
}

/// Iterates until `f_n < epsilon`, `n = n_max`, or `u` is an idempotent.
///
/// An exact repeat `f_{n+1} = f_n` inside `(0,1)` is returned as
/// [`Error::FixedPointInterior`], carrying the trace up to that point.
pub fn cpower_trace<G: Archimedean + ?Sized>(
    g: &G,
    u: f64,
    epsilon: f64,
    n_max: u64,
) -> Result<CPowerTrace> {
    check_unit("u", u)?;
    if !(epsilon > 0.0) {
        return Err(Error::Domain {
            what: "epsilon",
            value: epsilon,
            domain: "epsilon > 0",
        });
    }
    check_n(n_max)?;
    let mut rec = Recorder::new();
    rec.push(1, u);
    if u == 0.0 || u == 1.0 {
        return Ok(rec.finish(u, StopReason::Idempotent));
    }
    let (mut n, mut f) = (1u64, u);
    loop {
        if f < epsilon {
            return Ok(rec.finish(u, StopReason::BelowEpsilon));
        }
        if n >= n_max {
            return Ok(rec.finish(u, StopReason::MaxIterations));
        }
        let next = bivariate_unchecked(g, u, f);
        if next > f {
            return Err(Error::NotMonotone { n, prev: f, next });
        }
        n += 1;
        rec.push(n, next);
        if next == f && f > 0.0 {
            return Err(Error::FixedPointInterior {
                u,
                n: n - 1,
                value: f,
                trace: Box::new(rec.finish(u, StopReason::FixedPointInterior)),
            });
        }
        f = next;
    }
}

/// The minimal `N` with `f_N(u) < v`, and its bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxiomWitness {
    pub u: f64,
    pub v: f64,
    #[serde(rename = "N")]
    pub n: u64,
    /// `f_{N-1}(u)`, or `u` itself when `N = 1`.
    pub f_prev: f64,
    /// `f_N(u)`.
    pub f_at: f64,
}

impl AxiomWitness {
    /// `f_N < v`, and `v ≤ f_{N-1}` unless `N = 1`.
    pub fn is_minimal(&self) -> bool {
        self.f_at < self.v && (self.n == 1 || self.v <= self.f_prev)
    }

    /// Recomputes `f_{N-1}` and `f_N` from scratch and checks the bracket.
    pub fn verify<G: Archimedean + ?Sized>(&self, g: &G) -> Result<bool> {
        let f_at = c_power(g, self.u, self.n)?;
        let f_prev = if self.n == 1 {
            self.u
        } else {
            c_power(g, self.u, self.n - 1)?
        };
        Ok(f_at == self.f_at && f_prev == self.f_prev && self.is_minimal())
    }
}

/// Finds the minimal `N ≤ n_max` with `f_N(u) < v` for `u, v ∈ (0,1)`.
pub fn axiom_witness<G: Archimedean + ?Sized>(
    g: &G,
    u: f64,
    v: f64,
    n_max: u64,
) -> Result<AxiomWitness> {
    check_open_unit(u)?;
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Domain {
            what: "v",
            value: v,
            domain: "(0, 1)",
        });
    }
    check_n(n_max)?;
    let (mut n, mut prev, mut f) = (1u64, u, u);
    loop {
        if f < v {
            return Ok(AxiomWitness {
                u,
                v,
                n,
                f_prev: prev,
                f_at: f,
            });
        }
        if n >= n_max {
            return Err(Error::Exhausted { n_max, f_last: f });
        }
        let next = bivariate_unchecked(g, u, f);
        if next > f {
            return Err(Error::NotMonotone { n, prev: f, next });
        }
        if next == f {
            // f ≥ v > 0 here, so this is an interior fixed point
            let mut rec = Recorder::new();
            rec.push(n, f);
            rec.push(n + 1, next);
            return Err(Error::FixedPointInterior {
                u,
                n,
                value: f,
                trace: Box::new(rec.finish(u, StopReason::FixedPointInterior)),
            });
        }
        n += 1;
        prev = f;
        f = next;
    }
}

/// Certificate for `lim f_n(u) = 0`: true iff the trace drops below
/// `epsilon` within `n_max` steps.
pub fn limit_is_zero<G: Archimedean + ?Sized>(
    g: &G,
    u: f64,
    epsilon: f64,
    n_max: u64,
) -> Result<bool> {
    check_open_unit(u)?;
    let trace = cpower_trace(g, u, epsilon, n_max)?;
    Ok(trace.stop_reason == StopReason::BelowEpsilon)
}
