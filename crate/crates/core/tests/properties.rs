mod common;

use archvol::volume::vertex_sign;
use archvol::{
    c_power, cdf_bivariate, eval_cdf, h_volume, joint_cdf, partition_volume_sum, pmf_table,
    Archimedean, CopulaFn, Generator, HyperBox, Partition2D, StepDistribution,
};
use proptest::prelude::*;

fn generator() -> impl Strategy<Value = Generator> {
    prop_oneof![
        (-1.0..10.0f64)
            .prop_filter("theta != 0", |t| t.abs() > 1e-6)
            .prop_map(|t| Generator::clayton(t).unwrap()),
        (1.0..10.0f64).prop_map(|t| Generator::gumbel(t).unwrap()),
        (-20.0..20.0f64)
            .prop_filter("theta != 0", |t| t.abs() > 1e-6)
            .prop_map(|t| Generator::frank(t).unwrap()),
        Just(Generator::independence()),
    ]
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn step_distribution() -> impl Strategy<Value = StepDistribution> {
    prop::collection::btree_set(-1000i32..1000, 1..6).prop_flat_map(|xs| {
        let k = xs.len();
        prop::collection::vec(0.05..1.0f64, k).prop_map(move |w| {
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            let jumps = xs
                .iter()
                .zip(&w)
                .enumerate()
                .map(|(i, (&x, p))| {
                    acc += p / total;
                    (x as f64 / 10.0, if i + 1 == k { 1.0 } else { acc })
                })
                .collect();
            StepDistribution::new(jumps).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn inverse_undoes_phi(g in generator(), t in 0.001..0.999f64) {
        let y = g.phi(t).unwrap();
        prop_assume!(y > 1e-300 && y < g.phi_at_zero());
        prop_assert!((g.phi_inverse(y).unwrap() - t).abs() <= 1e-8);
    }

    #[test]
    fn pseudo_inverse_is_monotone_and_clamped(g in generator(), a in 0.0..50.0f64, b in 0.0..50.0f64) {
        let (lo, hi) = (a.min(b), a.max(b));
        let (p_lo, p_hi) = (g.pseudo_inverse(lo), g.pseudo_inverse(hi));
        prop_assert!(p_hi <= p_lo);
        prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
        if hi >= g.phi_at_zero() {
            prop_assert_eq!(p_hi, 0.0);
        }
    }

    #[test]
    fn phi_matches_textbook_form(g in generator(), t in 0.05..0.95f64) {
        let (family, theta) = common::parts(&g);
        let want = common::phi(family, theta, t);
        prop_assert!((g.phi(t).unwrap() - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn frechet_bounds_and_symmetry(g in generator(), u in unit(), v in unit()) {
        let c = cdf_bivariate(&g, u, v).unwrap();
        prop_assert!(c >= (u + v - 1.0).max(0.0) - 1e-12);
        prop_assert!(c <= u.min(v));
        prop_assert_eq!(c, cdf_bivariate(&g, v, u).unwrap());
    }

    #[test]
    fn boundary_conditions(g in generator(), u in unit()) {
        prop_assert_eq!(cdf_bivariate(&g, u, 0.0).unwrap(), 0.0);
        prop_assert_eq!(cdf_bivariate(&g, u, 1.0).unwrap(), u);
    }

    #[test]
    fn vertex_signs_cancel(d in 1usize..=12) {
        let total: f64 = (0..1u32 << d).map(|m| vertex_sign(m, d)).sum();
        prop_assert_eq!(total, 0.0);
    }

    #[test]
    fn volume_is_nonnegative(g in generator(), a in unit(), b in unit(), c in unit(), d in unit()) {
        let bx = HyperBox::new(vec![a.min(b), c.min(d)], vec![a.max(b), c.max(d)]).unwrap();
        prop_assert!(h_volume(&CopulaFn(&g), &bx).unwrap() >= -1e-12);
    }

    #[test]
    fn grounded_volume_is_the_copula(g in generator(), u in unit(), v in unit()) {
        let vol = h_volume(&CopulaFn(&g), &HyperBox::grounded(&[u, v]).unwrap()).unwrap();
        prop_assert!((vol - cdf_bivariate(&g, u, v).unwrap()).abs() <= 1e-15);
    }

    #[test]
    fn refinement_preserves_partition_sum(
        g in generator(),
        u in 0.01..=1.0f64,
        v in 0.01..=1.0f64,
        m in 1usize..20,
        p in 1usize..20,
        cut in 0.0..1.0f64,
    ) {
        let mut part = Partition2D::uniform(u, v, m, p).unwrap();
        let before = partition_volume_sum(&g, &part);
        prop_assert!((before - cdf_bivariate(&g, u, v).unwrap()).abs() <= 1e-12);
        part.insert_u_cut(cut * u);
        prop_assert!((partition_volume_sum(&g, &part) - before).abs() <= 1e-12);
    }

    #[test]
    fn c_powers_do_not_increase(g in generator(), u in unit(), n in 1u64..200) {
        prop_assert!(c_power(&g, u, n + 1).unwrap() <= c_power(&g, u, n).unwrap());
    }

    #[test]
    fn step_cdf_is_right_continuous(f in step_distribution()) {
        for (&x, &value) in f.points().iter().zip(f.cdf_values()) {
            prop_assert_eq!(eval_cdf(&f, x), value);
            prop_assert_eq!(eval_cdf(&f, x + 1e-9), value);
            prop_assert!(eval_cdf(&f, x - 1e-9) < value);
        }
        prop_assert_eq!(eval_cdf(&f, f64::NEG_INFINITY), 0.0);
        prop_assert_eq!(eval_cdf(&f, f64::INFINITY), 1.0);
    }

    #[test]
    fn pmf_table_conserves_mass_and_margins(
        g in generator(),
        a in step_distribution(),
        b in step_distribution(),
    ) {
        let grid = pmf_table(&g, vec![a.clone(), b.clone()]).unwrap();
        prop_assert!((grid.total_mass() - 1.0).abs() <= 1e-12);
        prop_assert!(grid.min_cell() >= 0.0);
        for (axis, m) in [a, b].iter().enumerate() {
            for (got, want) in grid.marginal(axis).iter().zip(m.masses()) {
                prop_assert!((got - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn joint_cdf_composes_margins(g in generator(), a in step_distribution(), x in -110.0..110.0f64) {
        let margins = vec![a.clone(), a.clone()];
        let h = joint_cdf(&g, &margins, &[x, f64::INFINITY]).unwrap();
        prop_assert_eq!(h, eval_cdf(&a, x));
    }
}
