//! Exact simulator and closed-form calculator for a multi-defender,
//! single-attacker perimeter defense game on a ring.
//!
//! A team of `n` slow defenders guards a circular boundary of circumference
//! `C`; each covers a closed arc of fixed length centered on itself. A single
//! faster attacker starts on a covered point and tries to stand on an
//! uncovered one. The [`analytic`] module carries the closed-form win
//! conditions, the [`engine`] decides individual plays exactly by event-driven
//! integration, [`strategy`] implements the coordinated defender rule and a
//! brute-force attacker search, [`sweep`] recovers the win boundary
//! empirically, and [`verify`] stress-tests all of it on seeded random draws.

pub mod analytic;
pub mod engine;
pub mod geometry;
pub mod model;
pub mod strategy;
pub mod sweep;
pub mod verify;

pub use geometry::Direction;
pub use model::{AttackerStrategy, GameState, ScenarioParams};
