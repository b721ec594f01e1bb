//! Textbook closed forms, written without any of the library's numerical
//! safeguards, used as independent oracles.

#![allow(dead_code)]

use archvol::{Family, Generator};

/// φ(t), straight from the family definitions.
pub fn phi(family: Family, theta: f64, t: f64) -> f64 {
    match family {
        Family::Clayton => (t.powf(-theta) - 1.0) / theta,
        Family::Gumbel => (-t.ln()).powf(theta),
        Family::Frank => -(((-theta * t).exp() - 1.0) / ((-theta).exp() - 1.0)).ln(),
        Family::Independence => -t.ln(),
    }
}

/// φ(0): `+∞` except for Clayton with θ < 0.
pub fn phi_zero(family: Family, theta: f64) -> f64 {
    match family {
        Family::Clayton if theta < 0.0 => -1.0 / theta,
        _ => f64::INFINITY,
    }
}

/// φ^[−1](y): the algebraic inverse, 0 at or past φ(0).
pub fn psi(family: Family, theta: f64, y: f64) -> f64 {
    if y >= phi_zero(family, theta) {
        return 0.0;
    }
    match family {
        Family::Clayton => (1.0 + theta * y).powf(-1.0 / theta),
        Family::Gumbel => (-y.powf(1.0 / theta)).exp(),
        Family::Frank => -(1.0 + (-y).exp() * ((-theta).exp() - 1.0)).ln() / theta,
        Family::Independence => (-y).exp(),
    }
}

pub fn parts(g: &Generator) -> (Family, f64) {
    (g.family(), g.theta().unwrap_or(0.0))
}

/// `f_n(u) = φ^[−1](n φ(u))`, evaluated directly in φ-space.
pub fn power_in_phi_space(g: &Generator, u: f64, n: u64) -> f64 {
    let (family, theta) = parts(g);
    psi(family, theta, n as f64 * phi(family, theta, u))
}

/// Clayton θ = 1 by hand: `C(u,v) = (1/u + 1/v − 1)^(−1)`.
pub fn clayton_one(u: f64, v: f64) -> f64 {
    1.0 / (1.0 / u + 1.0 / v - 1.0)
}

pub fn side_product(lower: &[f64], upper: &[f64]) -> f64 {
    lower.iter().zip(upper).map(|(a, b)| b - a).product()
}
