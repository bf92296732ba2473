//! Simulator and library for entanglement-based quantum networks.
//!
//! The layers, bottom to top:
//! - [`clifford`] / [`graphstate`]: graph states with tracked local-Clifford
//!   byproducts and the full measurement/merge calculus.
//! - [`oracle`]: dense state-vector ground truth for small systems.
//! - [`netstate`]: GHZ network states held by device chains, with
//!   symmetrization and shielding against leaves and failures.
//! - [`routing`]: Steiner-tree routing of GHZ states across router regions.
//! - [`stack`]: end-to-end request handling down to client delivery.

pub mod clifford;
pub mod graphstate;
pub mod netstate;
pub mod oracle;
pub mod routing;
pub mod run;
pub mod scenario;
pub mod stack;
