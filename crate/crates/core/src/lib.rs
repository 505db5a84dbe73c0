//! Analytical die-to-die 3D mixed-size placement for face-to-face bonded ICs.
//!
//! The engine partitions standard cells and macros across a top and a bottom
//! die with heterogeneous technology profiles, inserts one hybrid bonding
//! terminal (HBT) per die-crossing net and minimizes die-to-die HPWL plus
//! the HBT cost.
//!
//! Stages, in flow order:
//!
//! * [`gp`]: 3D electrostatic global placement (and the multi-die 2D mode),
//!   driven by [`wirelength`] and [`density`].
//! * [`rotation`]: exact macro rotation assignment.
//! * [`legalize`]: die-by-die macro, cell and HBT legalization.
//! * [`dp`]: local reordering, global swap and one HBT remap pass.
//! * [`flow`]: the end-to-end driver, synthetic benchmarks and the
//!   independent solution checker.

pub mod density;
pub mod dp;
pub mod error;
pub mod flow;
pub mod gp;
pub mod legalize;
pub mod model;
mod par;
pub mod rotation;
pub mod wirelength;

pub use error::{PlaceError, Result};
pub use model::{Design, Die, Rotation, Solution};
