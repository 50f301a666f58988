//! Mixed stress-displacement elements for 2D linear elasticity on triangles,
//! with the companion Kouhia-Stenberg primal scheme and the reduced mixed
//! and primal variants.

pub mod assembly;
pub mod dense;
pub mod elasticity;
pub mod error;
pub mod fe_spaces;
pub mod local_fe;
pub mod mesh;
pub mod quadrature;
pub mod schemes;
pub mod solve;
pub mod sparse;
pub mod study;
pub mod verify;

pub use error::{Error, Result};
