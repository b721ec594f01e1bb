//! Archimedean copulas built from generator families, H-volumes of boxes,
//! C-power iteration, and certified witnesses for the Archimedean axiom,
//! including joint distributions with discrete (step) margins.
//!
//! ```
//! use archvol::{axiom_witness, Generator};
//!
//! let g = Generator::clayton(1.0).unwrap();
//! let w = axiom_witness(&g, 0.5, 0.3, 1_000).unwrap();
//! assert_eq!(w.n, 3);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod copula;
pub mod cpower;
pub mod error;
pub mod generator;
pub mod margins;
pub mod numeric;
pub mod output;
pub mod verify;
pub mod volume;

pub use copula::{cdf, cdf_bivariate, UnitPoint};
pub use cpower::{
    axiom_witness, c_power, cpower_trace, limit_is_zero, AxiomWitness, CPowerTrace, CPowers,
    StopReason,
};
pub use error::{Error, Result};
pub use generator::{bisect_inverse, Archimedean, Family, Generator};
pub use margins::{
    certify_df_axioms, eval_cdf, joint_cdf, pmf_table, CertificationReport, JointGrid,
    StepDistribution,
};
pub use volume::{
    d_increasing_check, h_volume, partition_volume_sum, recursive_volume, CopulaFn, Evaluator,
    HyperBox, Partition2D, Violation,
};
