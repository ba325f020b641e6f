//! Energy-optimal joint computation and communication cooperation for a
//! user, a helper node and an access point with an edge server.

pub mod bench;
pub mod dual;
pub mod ellipsoid;
pub mod error;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod p1;
pub mod p2;
mod polish;
pub mod scenario;
pub mod sweep;

pub use bench::{run_benchmark, Scheme};
pub use error::{Error, Result};
pub use model::{Allocation, Geometry, SystemParams};
pub use p1::{solve_p1, SolveReport, SolveStatus};
pub use p2::solve_p2;
