//! Archimedean copula evaluation, `C(u) = φ^[−1](Σ_j φ(u_j))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::Archimedean;

/// A point of `[0,1]^d`, `d ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitPoint(Vec<f64>);

impl UnitPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Dimension {
                found: coords.len(),
                min: 2,
                max: usize::MAX,
            });
        }
        if let Some(&bad) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::Domain {
                what: "coordinate",
                value: bad,
                domain: "[0, 1]",
            });
        }
        Ok(UnitPoint(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for UnitPoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        UnitPoint::new(v)
    }
}

impl From<UnitPoint> for Vec<f64> {
    fn from(p: UnitPoint) -> Self {
        p.0
    }
}

/// `C(u)` at a validated point.
pub fn cdf<G: Archimedean + ?Sized>(g: &G, u: &UnitPoint) -> f64 {
    cdf_coords(g, u.coords())
}

/// `C(u, v)`; the hot path for C-power iteration.
pub fn cdf_bivariate<G: Archimedean + ?Sized>(g: &G, u: f64, v: f64) -> Result<f64> {
    for (what, x) in [("u", u), ("v", v)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain {
                what,
                value: x,
                domain: "[0, 1]",
            });
        }
    }
    Ok(bivariate_unchecked(g, u, v))
}

#[inline]
pub(crate) fn bivariate_unchecked<G: Archimedean + ?Sized>(g: &G, u: f64, v: f64) -> f64 {
    cdf_coords(g, &[u, v])
}

/// Copula value at raw coordinates assumed to lie in `[0,1]`.
///
/// Coordinates equal to 1 contribute φ(1) = 0 and are skipped, so margins
/// are exact: `C(u, 1, …, 1) = u`. Any zero coordinate short-circuits to 0.
/// The φ-sum accumulates left to right.
pub(crate) fn cdf_coords<G: Archimedean + ?Sized>(g: &G, coords: &[f64]) -> f64 {
    if coords.contains(&0.0) {
        return 0.0;
    }
    let mut below_one = coords.iter().copied().filter(|&c| c < 1.0);
    let Some(first) = below_one.next() else {
        return 1.0;
    };
    let mut sum = g.phi_unchecked(first);
    let mut terms = 1;
    for c in below_one {
        sum += g.phi_unchecked(c);
        terms += 1;
        if sum == f64::INFINITY {
            return 0.0;
        }
    }
    if terms == 1 {
        return first;
    }
    g.pseudo_inverse(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Generator;
    use approx::assert_abs_diff_eq;

    fn c2(g: &Generator, u: f64, v: f64) -> f64 {
        cdf_bivariate(g, u, v).unwrap()
    }

    #[test]
    fn cdf_examples() {
        let c1 = Generator::clayton(1.0).unwrap();
        let p = UnitPoint::new(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(cdf(&c1, &p), 1.0 / 3.0, epsilon = 1e-16);

        let c_neg = Generator::clayton(-0.5).unwrap();
        let p = UnitPoint::new(vec![0.25, 0.25]).unwrap();
        assert_eq!(cdf(&c_neg, &p), 0.0);

        let ind = Generator::independence();
        let p = UnitPoint::new(vec![0.3, 0.4, 0.5]).unwrap();
        assert_abs_diff_eq!(cdf(&ind, &p), 0.06, epsilon = 1e-15);
    }

    #[test]
    fn bivariate_examples() {
        let c1 = Generator::clayton(1.0).unwrap();
        assert_abs_diff_eq!(c2(&c1, 0.5, 1.0 / 3.0), 0.25, epsilon = 1e-16);
        let g2 = Generator::gumbel(2.0).unwrap();
        // 2^(−√2), mpmath: 0.37521422724648177367
        assert_abs_diff_eq!(c2(&g2, 0.5, 0.5), 0.375_214_227_246_481_8, epsilon = 1e-15);
        for g in Generator::default_grid() {
            assert_eq!(c2(&g, 0.7, 0.0), 0.0);
            assert_eq!(c2(&g, 0.0, 0.0), 0.0);
            assert_eq!(c2(&g, 1.0, 1.0), 1.0);
        }
    }

    #[test]
    fn margins_are_exact() {
        for g in Generator::default_grid() {
            for i in 0..=100 {
                let u = i as f64 / 100.0;
                assert_eq!(c2(&g, u, 1.0), u);
                assert_eq!(c2(&g, 1.0, u), u);
            }
        }
    }

    #[test]
    fn higher_dimensional_margins_reduce_to_lower_dimension() {
        let g = Generator::frank(5.0).unwrap();
        let p3 = UnitPoint::new(vec![0.3, 1.0, 0.6]).unwrap();
        assert_eq!(cdf(&g, &p3), c2(&g, 0.3, 0.6));
    }

    #[test]
    fn unit_point_validation() {
        assert!(matches!(
            UnitPoint::new(vec![0.5]),
            Err(Error::Dimension { .. })
        ));
        assert!(UnitPoint::new(vec![0.5, 1.5]).is_err());
        assert!(UnitPoint::new(vec![f64::NAN, 0.5]).is_err());
        assert!(serde_json::from_str::<UnitPoint>("[0.1, 0.2]").is_ok());
        assert!(serde_json::from_str::<UnitPoint>("[0.1]").is_err());
    }

    #[test]
    fn bivariate_rejects_out_of_domain() {
        let g = Generator::independence();
        assert!(cdf_bivariate(&g, -0.1, 0.5).is_err());
        assert!(cdf_bivariate(&g, 0.5, 1.1).is_err());
    }

    #[test]
    fn non_strict_zero_region() {
        // Clayton θ = −1 is the lower Fréchet bound W(u,v) = max(u+v−1, 0)
        let w = Generator::clayton(-1.0).unwrap();
        assert_eq!(c2(&w, 0.3, 0.6), 0.0);
        assert_abs_diff_eq!(c2(&w, 0.7, 0.6), 0.3, epsilon = 1e-15);
    }
}
