//! Flat-surface dynamics toolkit: exact Eaton-lens optics, slit-fold
//! skeletons on tori and planes, cyclic pillowcase covers, event-driven
//! directional flows with integer deck bookkeeping, and interval-exchange /
//! skew-product diagnostics for ergodicity versus trapping.
//!
//! The crate is organised bottom-up:
//!
//! * [`geom`] — planar primitives (vectors, lattices, segments, ray hits);
//! * [`lens`] — closed-form Eaton lens transits plus a geodesic ODE oracle;
//! * [`skeleton`] — slit-folds, pillow-folds, chip-folds and built-in skeletons;
//! * [`census`] — singularity census of a skeleton by sector tracing;
//! * [`covers`] — cyclic pillowcase covers, genus/fiber calculus, SL2(Z) action;
//! * [`config`] — concrete lens/slit configurations (the `gamma_w` curve,
//!   admissibility, separation, railed rescaling);
//! * [`flow`] — event-driven tracing with deck bookkeeping and trap statistics;
//! * [`iet`] — Poincaré return maps, homology cocycles, skew orbits and the
//!   rigidity-time essential-value scanner.

pub mod census;
pub mod config;
pub mod covers;
pub mod flow;
pub mod geom;
pub mod iet;
pub mod lens;
pub mod skeleton;

pub use geom::{Lattice, Segment, Vec2, EPS_GEOM};
