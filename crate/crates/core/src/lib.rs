//! Transfer operators on interval maps and finite spaces.
//!
//! The numeric core is generic over [`Scalar`] (`f32`, `f64`); couplings
//! additionally work over exact fields such as `num_rational::Ratio<i64>`.

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod ifs;
pub mod interval;
pub mod markov;
pub mod measures;
pub mod numeric;
pub mod report;
pub mod scalar;
pub mod transferop;

pub use dynamics::{Branch, BranchCount, BranchMap, SolenoidPoint, SymbolWord};
pub use error::{Error, Result};
pub use hilbert::{Coupling, HilbertPair, KoopmanSystem};
pub use ifs::{IfsMeasure, ProbabilityVector};
pub use interval::{Grid, Interval};
pub use markov::{FiberedOperator, RieszFamily};
pub use measures::{ClosedForm, Measure, UlamMatrix};
pub use report::Check;
pub use scalar::Scalar;
pub use transferop::{FunctionOnGrid, TransferOperator};

pub type BranchMapF64 = BranchMap<f64>;
pub type BranchMapF32 = BranchMap<f32>;
pub type TransferOperatorF64 = TransferOperator<f64>;
pub type TransferOperatorF32 = TransferOperator<f32>;
pub type MeasureF64 = Measure<f64>;
pub type MeasureF32 = Measure<f32>;
pub type UlamMatrixF64 = UlamMatrix<f64>;
pub type UlamMatrixF32 = UlamMatrix<f32>;
pub type KoopmanSystemF64 = KoopmanSystem<f64>;
pub type KoopmanSystemF32 = KoopmanSystem<f32>;
pub type IfsMeasureF64 = IfsMeasure<f64>;
pub type IfsMeasureF32 = IfsMeasure<f32>;
pub type ProbabilityVectorF64 = ProbabilityVector<f64>;
pub type HilbertPairF64 = HilbertPair<f64>;
pub type RieszFamilyF64 = RieszFamily<f64>;
pub type FiberedOperatorF64 = FiberedOperator<f64>;
pub type CouplingF64 = Coupling<f64>;
pub type CouplingRational = Coupling<num_rational::Ratio<i64>>;
