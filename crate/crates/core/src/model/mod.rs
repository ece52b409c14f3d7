//! Physical parameters, the variable change `(p, T, q) ↔ (ϖ, τ, ς)`, the
//! permeability law and the test problems.

pub mod cases;
pub mod coefficients;
pub mod params;
pub mod permeability;

pub use cases::{
    build_case, build_case_with_layout, default_layout, default_params, BarryMercer, BoundaryLayout, BoundaryPoint, ExactSolution, ExactState, Manufactured,
    Problem, SegmentConditions,
};
pub use coefficients::DerivedCoefficients;
pub use params::{PhysicalParams, Tensor2};
pub use permeability::PermeabilityLaw;
