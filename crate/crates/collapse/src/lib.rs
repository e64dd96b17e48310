//! Finite-size-scaling collapse of sweep data onto `χ = F(L^{1/ν}(p - p_c))`.

pub mod cost;
pub mod data;
pub mod error;
pub mod fit;
pub mod pchip;
pub mod synthetic;

pub use cost::{collapse_cost, rescale, Cost, Weighting};
pub use data::{Row, Series, SweepData};
pub use error::{CollapseError, Result};
pub use fit::{fit, fit_p_c, CollapseFit, CostSurface, SearchSpec, Widths};
pub use pchip::Pchip;
pub use synthetic::{synthetic_sweep, SyntheticSpec};
