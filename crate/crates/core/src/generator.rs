//! Archimedean generator families.
//!
//! A generator is a continuous, strictly decreasing map φ: [0,1] → [0,∞]
//! with φ(1) = 0. When φ(0) = +∞ the generator is *strict* and its inverse
//! is defined on all of [0,∞]; otherwise values past φ(0) are clamped to 0
//! by the pseudo-inverse.
//!
//! All four shipped families have closed-form inverses. A bracketing
//! bisection inverse is provided as well; it only needs φ and is the
//! fallback for generators without a closed form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance in `t` for [`bisect_inverse`].
pub const BISECTION_TOL: f64 = 1e-12;
/// Hard iteration cap for [`bisect_inverse`].
pub const BISECTION_MAX_ITER: usize = 200;

/// Evaluation interface shared by every generator, including test doubles.
///
/// Implementors supply the unchecked kernels; the checked entry points are
/// provided.
pub trait Archimedean: Send + Sync {
    /// φ(t) for `t ∈ [0,1]`. No domain check.
    fn phi_unchecked(&self, t: f64) -> f64;

    /// The inverse of φ for `y ∈ [0, φ(0)]`. No domain check.
    fn inverse_unchecked(&self, y: f64) -> f64;

    /// φ(0), `+∞` for strict generators.
    fn phi_at_zero(&self) -> f64;

    fn label(&self) -> String;

    /// Largest dimension in which the generator yields a copula, `None`
    /// when it does in every dimension.
    fn max_dim(&self) -> Option<usize> {
        None
    }

    fn is_strict(&self) -> bool {
        self.phi_at_zero() == f64::INFINITY
    }

    fn phi(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain {
                what: "t",
                value: t,
                domain: "[0, 1]",
            });
        }
        Ok(self.phi_unchecked(t))
    }

    /// φ⁻¹(y) for `0 ≤ y ≤ φ(0)`. Values past φ(0) must go through
    /// [`Archimedean::pseudo_inverse`].
    fn phi_inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0 && y <= self.phi_at_zero()) {
            return Err(Error::Domain {
                what: "y",
                value: y,
                domain: "[0, phi(0)]",
            });
        }
        Ok(self.pseudo_inverse(y))
    }

    /// φ^[−1](x): the inverse on `[0, φ(0)]` and 0 beyond. `x` must be
    /// non-negative; `+∞` is allowed.
    fn pseudo_inverse(&self, x: f64) -> f64 {
        debug_assert!(!(x < 0.0), "pseudo_inverse called with x = {x}");
        if x >= self.phi_at_zero() {
            0.0
        } else if x == 0.0 {
            1.0
        } else {
            self.inverse_unchecked(x).clamp(0.0, 1.0) + 0.0
        }
    }
}

/// Inverts φ by bisection on `[0,1]`, to [`BISECTION_TOL`] in `t`.
///
/// Only φ is evaluated, so this is independent of any closed-form inverse.
pub fn bisect_inverse<G: Archimedean + ?Sized>(g: &G, y: f64) -> Result<f64> {
    let phi_lo = g.phi_unchecked(0.0);
    let phi_hi = g.phi_unchecked(1.0);
    if !(y >= phi_hi && y <= phi_lo) {
        return Err(Error::NonBracketing { y, phi_lo, phi_hi });
    }
    // invariant: φ(lo) ≥ y ≥ φ(hi)
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_TOL {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if g.phi_unchecked(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BisectionStalled {
        iterations: BISECTION_MAX_ITER,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Clayton,
    Gumbel,
    Frank,
    Independence,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Clayton,
        Family::Gumbel,
        Family::Frank,
        Family::Independence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Clayton => "clayton",
            Family::Gumbel => "gumbel",
            Family::Frank => "frank",
            Family::Independence => "independence",
        }
    }

    pub fn admissible(self) -> &'static str {
        match self {
            Family::Clayton => "theta >= -1 and theta != 0",
            Family::Gumbel => "theta >= 1",
            Family::Frank => "theta != 0 (finite)",
            Family::Independence => "no theta",
        }
    }

    /// θ values exercised by the verification suite. Empty for
    /// parameter-free families.
    pub fn default_thetas(self) -> &'static [f64] {
        match self {
            Family::Clayton => &[-0.5, 0.5, 1.0, 2.0, 5.0],
            Family::Gumbel => &[1.0, 1.5, 2.0, 5.0],
            Family::Frank => &[-5.0, -1.0, 1.0, 5.0],
            Family::Independence => &[],
        }
    }

    fn admits(self, theta: Option<f64>) -> bool {
        match (self, theta) {
            (Family::Independence, None) => true,
            (Family::Independence, Some(_)) | (_, None) => false,
            (Family::Clayton, Some(t)) => t.is_finite() && t >= -1.0 && t != 0.0,
            (Family::Gumbel, Some(t)) => t.is_finite() && t >= 1.0,
            (Family::Frank, Some(t)) => t.is_finite() && t != 0.0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// A validated generator: family plus parameter.
///
/// θ is checked once, at construction. The JSON form is
/// `{"family": "clayton", "theta": 1.0}`; `independence` takes no θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorSpec", into = "GeneratorSpec")]
pub struct Generator {
    family: Family,
    theta: Option<f64>,
    phi_at_zero: f64,
    // Frank: expm1(-θ) and expm1(θ)
    em1_neg: f64,
    em1_pos: f64,
}

impl Generator {
    pub fn new(family: Family, theta: Option<f64>) -> Result<Self> {
        if !family.admits(theta) {
            return Err(Error::InvalidTheta {
                family: family.name(),
                admissible: family.admissible(),
                theta,
            });
        }
        let th = theta.unwrap_or(0.0);
        let phi_at_zero = match family {
            Family::Clayton if th < 0.0 => -1.0 / th,
            _ => f64::INFINITY,
        };
        Ok(Generator {
            family,
            theta,
            phi_at_zero,
            em1_neg: (-th).exp_m1(),
            em1_pos: th.exp_m1(),
        })
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        Self::new(Family::Clayton, Some(theta))
    }

    pub fn gumbel(theta: f64) -> Result<Self> {
        Self::new(Family::Gumbel, Some(theta))
    }

    pub fn frank(theta: f64) -> Result<Self> {
        Self::new(Family::Frank, Some(theta))
    }

    pub fn independence() -> Self {
        Self::new(Family::Independence, None).expect("independence has no parameter")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// Every family crossed with its default θ grid.
    pub fn default_grid() -> Vec<Generator> {
        Self::grid(&Family::ALL, None)
    }

    /// `families` crossed with `thetas` (or each family's default grid).
    /// Parameter-free families contribute a single generator; θ values a
    /// family does not admit are skipped.
    pub fn grid(families: &[Family], thetas: Option<&[f64]>) -> Vec<Generator> {
        let mut out = Vec::new();
        for &family in families {
            if family == Family::Independence {
                out.push(Generator::independence());
                continue;
            }
            let ts = thetas.unwrap_or_else(|| family.default_thetas());
            out.extend(
                ts.iter()
                    .filter_map(|&t| Generator::new(family, Some(t)).ok()),
            );
        }
        out
    }

    fn theta_value(&self) -> f64 {
        self.theta.unwrap_or(0.0)
    }
}

impl Archimedean for Generator {
    fn phi_unchecked(&self, t: f64) -> f64 {
        if t == 1.0 {
            return 0.0;
        }
        let theta = self.theta_value();
        match self.family {
            Family::Independence => -t.ln(),
            Family::Gumbel => (-t.ln()).powf(theta),
            Family::Clayton => {
                // (t^-θ − 1)/θ; expm1 form when t^-θ is close to 1
                let x = -theta * t.ln();
                if x.abs() < 0.5 {
                    x.exp_m1() / theta
                } else {
                    (t.powf(-theta) - 1.0) / theta
                }
            }
            Family::Frank => {
                // −ln[(e^-θt − 1)/(e^-θ − 1)]
                if t < 0.5 {
                    -((-theta * t).exp_m1() / self.em1_neg).ln()
                } else {
                    let d = -(-theta * t).exp() * (-theta * (1.0 - t)).exp_m1();
                    -(d / self.em1_neg).ln_1p()
                }
            }
        }
    }

    fn inverse_unchecked(&self, y: f64) -> f64 {
        let theta = self.theta_value();
        match self.family {
            Family::Independence => (-y).exp(),
            Family::Gumbel => (-y.powf(1.0 / theta)).exp(),
            Family::Clayton => {
                let x = theta * y;
                if x.abs() < 0.5 {
                    (-x.ln_1p() / theta).exp()
                } else {
                    (1.0 + x).max(0.0).powf(-1.0 / theta)
                }
            }
            Family::Frank => {
                if y <= 1.0 {
                    1.0 - (self.em1_pos * -(-y).exp_m1()).ln_1p() / theta
                } else {
                    -((-y).exp() * self.em1_neg).ln_1p() / theta
                }
            }
        }
    }

    fn phi_at_zero(&self) -> f64 {
        self.phi_at_zero
    }

    fn max_dim(&self) -> Option<usize> {
        // Clayton needs θ ≥ −1/(d−1); Frank with θ < 0 is 2-monotone only
        match (self.family, self.theta_value()) {
            (Family::Clayton, t) if t < 0.0 => Some((1.0 - 1.0 / t).floor() as usize),
            (Family::Frank, t) if t < 0.0 => Some(2),
            _ => None,
        }
    }

    fn label(&self) -> String {
        match self.theta {
            Some(t) => format!("{}(theta={t})", self.family),
            None => self.family.to_string(),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSpec {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
}

impl TryFrom<GeneratorSpec> for Generator {
    type Error = Error;

    fn try_from(spec: GeneratorSpec) -> Result<Self> {
        Generator::new(spec.family.parse()?, spec.theta)
    }
}

impl From<Generator> for GeneratorSpec {
    fn from(g: Generator) -> Self {
        GeneratorSpec {
            family: g.family.name().to_string(),
            theta: g.theta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn phi_examples() {
        let c1 = Generator::clayton(1.0).unwrap();
        assert_eq!(c1.phi(1.0).unwrap(), 0.0);
        assert_eq!(c1.phi(0.5).unwrap(), 1.0);
        assert_abs_diff_eq!(c1.phi_inverse(1.0).unwrap(), 0.5, epsilon = 1e-15);

        let c_neg = Generator::clayton(-0.5).unwrap();
        assert_eq!(c_neg.phi(0.0).unwrap(), 2.0);
        assert_eq!(c_neg.phi_at_zero(), 2.0);
        assert!(!c_neg.is_strict());
    }

    #[test]
    fn phi_of_zero_is_infinite_for_strict_generators() {
        for g in Generator::default_grid() {
            if g.is_strict() {
                assert_eq!(g.phi(0.0).unwrap(), f64::INFINITY, "{g}");
            } else {
                assert_eq!(g.phi(0.0).unwrap(), g.phi_at_zero(), "{g}");
            }
            assert_eq!(g.phi(1.0).unwrap().to_bits(), 0.0_f64.to_bits(), "{g}");
        }
    }

    #[test]
    fn phi_inverse_examples() {
        for g in Generator::default_grid() {
            assert_eq!(g.phi_inverse(0.0).unwrap(), 1.0);
        }
        let c1 = Generator::clayton(1.0).unwrap();
        assert_abs_diff_eq!(c1.phi_inverse(2.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c1.phi(1.0 / 3.0).unwrap(), 2.0, epsilon = 1e-14);

        let g2 = Generator::gumbel(2.0).unwrap();
        let y = std::f64::consts::LN_2.powi(2);
        assert_abs_diff_eq!(g2.phi_inverse(y).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(bisect_inverse(&g2, y).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn phi_inverse_rejects_values_past_phi_zero() {
        let g = Generator::clayton(-0.5).unwrap();
        assert!(matches!(g.phi_inverse(2.5), Err(Error::Domain { .. })));
        assert!(g.phi_inverse(-1.0).is_err());
        assert!(g.phi_inverse(f64::NAN).is_err());
        assert_eq!(g.phi_inverse(2.0).unwrap(), 0.0);
    }

    #[test]
    fn pseudo_inverse_examples() {
        let c_neg = Generator::clayton(-0.5).unwrap();
        assert_eq!(c_neg.pseudo_inverse(3.0), 0.0);
        assert_eq!(c_neg.pseudo_inverse(f64::INFINITY), 0.0);
        assert_eq!(c_neg.pseudo_inverse(1.0), 0.25);
        assert_eq!(c_neg.phi(0.25).unwrap(), 1.0);
        let c1 = Generator::clayton(1.0).unwrap();
        assert_eq!(c1.pseudo_inverse(0.0), 1.0);
        assert_eq!(c1.pseudo_inverse(f64::INFINITY), 0.0);
    }

    #[test]
    fn phi_rejects_out_of_domain() {
        let g = Generator::frank(1.0).unwrap();
        for t in [-0.1, 1.0 + 1e-12, f64::NAN, f64::INFINITY] {
            assert!(matches!(g.phi(t), Err(Error::Domain { .. })), "t = {t}");
        }
    }

    #[test]
    fn theta_validation() {
        assert!(Generator::clayton(0.0).is_err());
        assert!(Generator::clayton(-1.5).is_err());
        assert!(Generator::clayton(-1.0).is_ok());
        assert!(Generator::gumbel(0.99).is_err());
        assert!(Generator::frank(0.0).is_err());
        assert!(Generator::frank(f64::NAN).is_err());
        assert!(Generator::new(Family::Independence, Some(1.0)).is_err());
        assert!(Generator::new(Family::Clayton, None).is_err());
    }

    #[test]
    fn json_round_trip_and_diagnostics() {
        let g = Generator::from_json(r#"{"family":"clayton","theta":1.0}"#).unwrap();
        assert_eq!(g, Generator::clayton(1.0).unwrap());
        let back = serde_json::to_string(&g).unwrap();
        assert_eq!(back, r#"{"family":"clayton","theta":1.0}"#);
        let ind = Generator::from_json(r#"{"family":"independence"}"#).unwrap();
        assert_eq!(
            serde_json::to_string(&ind).unwrap(),
            r#"{"family":"independence"}"#
        );

        let err = Generator::from_json(r#"{"family":"joe","theta":2}"#).unwrap_err();
        assert!(
            err.to_string().contains("unknown generator family"),
            "{err}"
        );
        let err = Generator::from_json(r#"{"family":"gumbel","theta":0.5}"#).unwrap_err();
        assert!(err.to_string().contains("theta >= 1"), "{err}");
    }

    #[test]
    fn frank_is_stable_for_tiny_theta() {
        // φ → −ln t as θ → 0
        let g = Generator::frank(1e-9).unwrap();
        for t in [0.01, 0.3, 0.7, 0.999] {
            let phi = g.phi(t).unwrap();
            assert!(
                (phi + f64::ln(t)).abs() < 1e-6 * (1.0 - t).max(1e-3),
                "t = {t}: {phi}"
            );
            assert_abs_diff_eq!(g.pseudo_inverse(phi), t, epsilon = 1e-9);
        }
        // (t^-θ − 1)/θ = −ln t + θ (ln t)^2 / 2 + O(θ^2)
        let theta = 1e-9;
        let c = Generator::clayton(theta).unwrap();
        for t in [0.01, 0.3, 0.7, 0.999] {
            let lt = f64::ln(t);
            assert_abs_diff_eq!(
                c.phi(t).unwrap(),
                -lt + theta * lt * lt / 2.0,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn max_dim_per_family() {
        assert_eq!(Generator::clayton(-0.5).unwrap().max_dim(), Some(3));
        assert_eq!(Generator::clayton(-1.0).unwrap().max_dim(), Some(2));
        assert_eq!(Generator::clayton(-0.2).unwrap().max_dim(), Some(6));
        assert_eq!(Generator::clayton(2.0).unwrap().max_dim(), None);
        assert_eq!(Generator::frank(-5.0).unwrap().max_dim(), Some(2));
        assert_eq!(Generator::frank(5.0).unwrap().max_dim(), None);
        assert_eq!(Generator::gumbel(5.0).unwrap().max_dim(), None);
        assert_eq!(Generator::independence().max_dim(), None);
    }

    #[test]
    fn bisection_rejects_non_bracketing_targets() {
        let g = Generator::clayton(-0.5).unwrap();
        assert!(matches!(
            bisect_inverse(&g, 2.5),
            Err(Error::NonBracketing { .. })
        ));
        assert!(matches!(
            bisect_inverse(&g, -0.1),
            Err(Error::NonBracketing { .. })
        ));
    }
}
