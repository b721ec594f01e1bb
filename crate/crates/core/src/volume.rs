//! H-volumes of boxes by the signed vertex sum, d-increasingness checks, and
//! the two-dimensional partition and recursive-volume constructions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::cdf_coords;
use crate::cpower::{c_power, check_open_unit};
use crate::error::{Error, Result};
use crate::generator::Archimedean;
use crate::numeric::neumaier_sum;

/// Largest dimension accepted by [`h_volume`] (2^20 vertex evaluations).
pub const MAX_DIM: usize = 20;

/// Default absolute tolerance for additivity and d-increasing checks.
pub const DEFAULT_TOL: f64 = 1e-12;

/// A function whose H-volume can be taken.
pub trait Evaluator {
    /// Fixed input dimension, if any.
    fn arity(&self) -> Option<usize> {
        None
    }

    fn eval(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> Evaluator for F {
    fn eval(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// An Archimedean copula viewed as an [`Evaluator`] on `[0,1]^d`.
pub struct CopulaFn<'a, G: ?Sized>(pub &'a G);

impl<G: Archimedean + ?Sized> Evaluator for CopulaFn<'_, G> {
    fn eval(&self, x: &[f64]) -> f64 {
        cdf_coords(self.0, x)
    }
}

/// Axis-aligned box `[a, b] = [a_1, b_1] × … × [a_d, b_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxSpec")]
pub struct HyperBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct BoxSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoxSpec> for HyperBox {
    type Error = Error;

    fn try_from(spec: BoxSpec) -> Result<Self> {
        HyperBox::new(spec.lower, spec.upper)
    }
}

impl HyperBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidBox("dimension must be at least 1".into()));
        }
        for (k, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if a.is_nan() || b.is_nan() || a > b {
                return Err(Error::InvalidBox(format!(
                    "axis {k}: need lower <= upper, got [{a}, {b}]"
                )));
            }
        }
        Ok(HyperBox { lower, upper })
    }

    /// `[0, corner_1] × … × [0, corner_d]`.
    pub fn grounded(corner: &[f64]) -> Result<Self> {
        HyperBox::new(vec![0.0; corner.len()], corner.to_vec())
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(a, b)| a == b)
    }

    /// Product of side lengths.
    pub fn side_product(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }
}

/// Sign of the vertex selected by `mask` (bit k set: `c_k = b_k`). +1 when
/// an even number of coordinates sit at the lower endpoint.
pub fn vertex_sign(mask: u32, dim: usize) -> f64 {
    let lower_count = dim as u32 - mask.count_ones();
    if lower_count.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `V_H([a,b]) = Σ_c sign(c) H(c)` over the 2^d vertices, in binary-counting
/// vertex order. Zero-width boxes return exactly 0.
pub fn h_volume<E: Evaluator + ?Sized>(h: &E, b: &HyperBox) -> Result<f64> {
    let d = b.dim();
    if let Some(arity) = h.arity() {
        if arity != d {
            return Err(Error::DimensionMismatch {
                expected: arity,
                found: d,
            });
        }
    }
    if d > MAX_DIM {
        return Err(Error::Dimension {
            found: d,
            min: 1,
            max: MAX_DIM,
        });
    }
    if b.is_degenerate() {
        return Ok(0.0);
    }
    let mut vertex = vec![0.0; d];
    let mut sum = 0.0;
    for mask in 0..(1u32 << d) {
        for (k, c) in vertex.iter_mut().enumerate() {
            *c = if (mask >> k) & 1 == 1 {
                b.upper[k]
            } else {
                b.lower[k]
            };
        }
        let value = h.eval(&vertex);
        if vertex_sign(mask, d) > 0.0 {
            sum += value;
        } else {
            sum -= value;
        }
    }
    Ok(sum)
}

/// Grid partition of `[0,u] × [0,v]` into `m × p` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionSpec")]
pub struct Partition2D {
    u_cuts: Vec<f64>,
    v_cuts: Vec<f64>,
}

#[derive(Deserialize)]
struct PartitionSpec {
    u_cuts: Vec<f64>,
    v_cuts: Vec<f64>,
}

impl TryFrom<PartitionSpec> for Partition2D {
    type Error = Error;

    fn try_from(spec: PartitionSpec) -> Result<Self> {
        Partition2D::new(spec.u_cuts, spec.v_cuts)
    }
}

fn validate_cuts(axis: &str, cuts: &[f64]) -> Result<()> {
    if cuts.len() < 2 {
        return Err(Error::InvalidPartition(format!(
            "{axis} cuts need at least two points"
        )));
    }
    if cuts[0] != 0.0 {
        return Err(Error::InvalidPartition(format!(
            "{axis} cuts must start at 0, got {}",
            cuts[0]
        )));
    }
    if let Some(w) = cuts.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidPartition(format!(
            "{axis} cuts must be strictly increasing: {} then {}",
            w[0], w[1]
        )));
    }
    let last = cuts[cuts.len() - 1];
    if last > 1.0 {
        return Err(Error::InvalidPartition(format!(
            "{axis} cuts must end inside [0,1], got {last}"
        )));
    }
    Ok(())
}

impl Partition2D {
    pub fn new(u_cuts: Vec<f64>, v_cuts: Vec<f64>) -> Result<Self> {
        validate_cuts("u", &u_cuts)?;
        validate_cuts("v", &v_cuts)?;
        Ok(Partition2D { u_cuts, v_cuts })
    }

    /// Equal-width `m × p` grid over `[0,u] × [0,v]`.
    pub fn uniform(u: f64, v: f64, m: usize, p: usize) -> Result<Self> {
        let grid = |end: f64, cells: usize| -> Vec<f64> {
            (0..=cells)
                .map(|i| {
                    if i == cells {
                        end
                    } else {
                        end * i as f64 / cells as f64
                    }
                })
                .collect()
        };
        Partition2D::new(grid(u, m.max(1)), grid(v, p.max(1)))
    }

    /// Random partition with `m × p` cells, cuts drawn uniformly.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        u: f64,
        v: f64,
        m: usize,
        p: usize,
    ) -> Result<Self> {
        let draw = |rng: &mut R, end: f64, cells: usize| -> Vec<f64> {
            let mut cuts: Vec<f64> = (1..cells).map(|_| rng.random::<f64>() * end).collect();
            cuts.push(0.0);
            cuts.push(end);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            cuts
        };
        let u_cuts = draw(rng, u, m.max(1));
        let v_cuts = draw(rng, v, p.max(1));
        Partition2D::new(u_cuts, v_cuts)
    }

    pub fn u_cuts(&self) -> &[f64] {
        &self.u_cuts
    }

    pub fn v_cuts(&self) -> &[f64] {
        &self.v_cuts
    }

    /// Upper-right corner `(u, v)` of the partitioned box.
    pub fn corner(&self) -> (f64, f64) {
        (
            self.u_cuts[self.u_cuts.len() - 1],
            self.v_cuts[self.v_cuts.len() - 1],
        )
    }

    pub fn cell_count(&self) -> usize {
        (self.u_cuts.len() - 1) * (self.v_cuts.len() - 1)
    }

    /// Refines the u-grid with one more cut. Returns false if `x` is not
    /// strictly inside the range or is already a cut.
    pub fn insert_u_cut(&mut self, x: f64) -> bool {
        insert_cut(&mut self.u_cuts, x)
    }

    pub fn insert_v_cut(&mut self, x: f64) -> bool {
        insert_cut(&mut self.v_cuts, x)
    }
}

fn insert_cut(cuts: &mut Vec<f64>, x: f64) -> bool {
    let last = cuts[cuts.len() - 1];
    if !(x > 0.0 && x < last) {
        return false;
    }
    match cuts.binary_search_by(|c| c.total_cmp(&x)) {
        Ok(_) => false,
        Err(i) => {
            cuts.insert(i, x);
            true
        }
    }
}

/// `Σ_{k,j} V_C(B_{k,j})`, each cell by the four-corner formula. The signed
/// corner terms go straight into one compensated sum in row-major cell
/// order, so cancellation between neighbouring cells is not rounded away.
pub fn partition_volume_sum<G: Archimedean + ?Sized>(g: &G, part: &Partition2D) -> f64 {
    let (us, vs) = (&part.u_cuts, &part.v_cuts);
    let cols = vs.len();
    let corner: Vec<f64> = us
        .iter()
        .flat_map(|&u| vs.iter().map(move |&v| cdf_coords(g, &[u, v])))
        .collect();
    let at = |k: usize, j: usize| corner[k * cols + j];
    let terms = (0..us.len() - 1).flat_map(|k| {
        (0..vs.len() - 1)
            .flat_map(move |j| [at(k + 1, j + 1), -at(k, j + 1), -at(k + 1, j), at(k, j)])
    });
    neumaier_sum(terms)
}

/// A box whose H-volume fell below `-tol`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    #[serde(rename = "box")]
    pub region: HyperBox,
    pub volume: f64,
}

/// Boxes with `V_H < -tol`. An empty result certifies d-increasingness on
/// the sample.
pub fn d_increasing_check<E: Evaluator + ?Sized>(
    h: &E,
    boxes: &[HyperBox],
    tol: f64,
) -> Result<Vec<Violation>> {
    let mut out = Vec::new();
    for b in boxes {
        let volume = h_volume(h, b)?;
        if volume < -tol {
            out.push(Violation {
                region: b.clone(),
                volume,
            });
        }
    }
    Ok(out)
}

/// `count` random boxes in `[0,1]^dim`, corners uniform per axis.
pub fn sample_unit_boxes<R: Rng + ?Sized>(rng: &mut R, dim: usize, count: usize) -> Vec<HyperBox> {
    (0..count)
        .map(|_| {
            let (lower, upper) = (0..dim)
                .map(|_| {
                    let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
                    (a.min(b), a.max(b))
                })
                .unzip();
            HyperBox { lower, upper }
        })
        .collect()
}

/// `V_C^n(u) = V_C([0,u] × [0, f_n(u)])`, which equals `f_{n+1}(u)`.
pub fn recursive_volume<G: Archimedean + ?Sized>(g: &G, u: f64, n: u64) -> Result<f64> {
    check_open_unit(u)?;
    let f_n = c_power(g, u, n)?;
    h_volume(&CopulaFn(g), &HyperBox::grounded(&[u, f_n])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Generator;
    use approx::assert_abs_diff_eq;

    fn unit_box(lower: &[f64], upper: &[f64]) -> HyperBox {
        HyperBox::new(lower.to_vec(), upper.to_vec()).unwrap()
    }

    #[test]
    fn h_volume_examples() {
        let ind = Generator::independence();
        let b = unit_box(&[0.2, 0.1], &[0.5, 0.4]);
        assert_abs_diff_eq!(
            h_volume(&CopulaFn(&ind), &b).unwrap(),
            0.09,
            epsilon = 1e-15
        );

        let c1 = Generator::clayton(1.0).unwrap();
        let b = unit_box(&[0.0, 0.0], &[0.5, 1.0 / 3.0]);
        assert_abs_diff_eq!(h_volume(&CopulaFn(&c1), &b).unwrap(), 0.25, epsilon = 1e-16);

        let b = unit_box(&[0.0; 3], &[0.5; 3]);
        assert_abs_diff_eq!(
            h_volume(&CopulaFn(&ind), &b).unwrap(),
            0.125,
            epsilon = 1e-15
        );
    }

    #[test]
    fn degenerate_boxes_have_zero_volume() {
        let h = |x: &[f64]| x.iter().map(|v| v.sin() + 3.0 * v).sum::<f64>();
        for k in 0..3 {
            let mut lo = vec![0.1, 0.2, 0.3];
            let hi = vec![0.7, 0.8, 0.9];
            lo[k] = hi[k];
            assert_eq!(h_volume(&h, &unit_box(&lo, &hi)).unwrap(), 0.0);
        }
    }

    #[test]
    fn arity_and_dimension_errors() {
        struct Fixed;
        impl Evaluator for Fixed {
            fn arity(&self) -> Option<usize> {
                Some(3)
            }
            fn eval(&self, _: &[f64]) -> f64 {
                0.0
            }
        }
        let b = unit_box(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(
            h_volume(&Fixed, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        let big = unit_box(&[0.0; 21], &[1.0; 21]);
        let ind = Generator::independence();
        assert!(matches!(
            h_volume(&CopulaFn(&ind), &big),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn box_validation() {
        assert!(HyperBox::new(vec![0.5], vec![0.4]).is_err());
        assert!(HyperBox::new(vec![0.1, 0.2], vec![0.4]).is_err());
        assert!(HyperBox::new(vec![], vec![]).is_err());
        assert!(HyperBox::new(vec![f64::NAN], vec![0.4]).is_err());
        let b: HyperBox = serde_json::from_str(r#"{"lower":[0.1],"upper":[0.2]}"#).unwrap();
        assert_eq!(b.dim(), 1);
        assert!(serde_json::from_str::<HyperBox>(r#"{"lower":[0.3],"upper":[0.2]}"#).is_err());
    }

    #[test]
    fn partition_examples() {
        let c1 = Generator::clayton(1.0).unwrap();
        let part = Partition2D::new(vec![0.0, 0.3, 0.6], vec![0.0, 0.3, 0.6]).unwrap();
        assert_abs_diff_eq!(partition_volume_sum(&c1, &part), 3.0 / 7.0, epsilon = 1e-15);

        let trivial = Partition2D::new(vec![0.0, 0.4], vec![0.0, 0.7]).unwrap();
        assert_eq!(
            partition_volume_sum(&c1, &trivial),
            cdf_coords(&c1, &[0.4, 0.7])
        );

        let ind = Generator::independence();
        let grid = Partition2D::uniform(0.5, 0.5, 100, 100).unwrap();
        assert_eq!(grid.cell_count(), 10_000);
        // V_Π([0,0.5]^2) = 0.5 · 0.5
        assert_abs_diff_eq!(partition_volume_sum(&ind, &grid), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition2D::new(vec![0.1, 0.5], vec![0.0, 0.5]).is_err());
        assert!(Partition2D::new(vec![0.0, 0.5, 0.5], vec![0.0, 0.5]).is_err());
        assert!(Partition2D::new(vec![0.0], vec![0.0, 0.5]).is_err());
        assert!(Partition2D::new(vec![0.0, 1.5], vec![0.0, 0.5]).is_err());
        let mut p = Partition2D::new(vec![0.0, 0.5], vec![0.0, 0.5]).unwrap();
        assert!(p.insert_u_cut(0.25));
        assert!(!p.insert_u_cut(0.25));
        assert!(!p.insert_u_cut(0.5));
        assert!(!p.insert_v_cut(0.0));
        assert_eq!(p.u_cuts(), &[0.0, 0.25, 0.5]);
    }

    #[test]
    fn max_function_is_not_two_increasing() {
        let h = |x: &[f64]| x[0].max(x[1]);
        let b = unit_box(&[0.2, 0.2], &[0.8, 0.8]);
        let found = d_increasing_check(&h, std::slice::from_ref(&b), 1e-12).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].region, b);
        assert_abs_diff_eq!(found[0].volume, -0.6, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_boxes_never_violate() {
        let g = Generator::gumbel(2.0).unwrap();
        let boxes: Vec<_> = (1..10)
            .map(|i| {
                let x = i as f64 / 10.0;
                unit_box(&[x, 0.1], &[x, 0.9])
            })
            .collect();
        assert!(d_increasing_check(&CopulaFn(&g), &boxes, 0.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn recursive_volume_examples() {
        let c1 = Generator::clayton(1.0).unwrap();
        assert_abs_diff_eq!(
            recursive_volume(&c1, 0.5, 1).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(recursive_volume(&c1, 0.5, 3).unwrap(), 0.2, epsilon = 1e-15);
        let ind = Generator::independence();
        assert_abs_diff_eq!(
            recursive_volume(&ind, 0.5, 10).unwrap(),
            2f64.powi(-11),
            epsilon = 1e-16
        );
        assert!(matches!(
            recursive_volume(&c1, 1.0, 2),
            Err(Error::Idempotent { .. })
        ));
        assert!(matches!(
            recursive_volume(&c1, 0.0, 2),
            Err(Error::Idempotent { .. })
        ));
    }

    #[test]
    fn recursive_volume_is_the_next_power() {
        let g = Generator::frank(-1.0).unwrap();
        for n in 1..50 {
            assert_eq!(
                recursive_volume(&g, 0.8, n).unwrap(),
                c_power(&g, 0.8, n + 1).unwrap()
            );
        }
    }
}
