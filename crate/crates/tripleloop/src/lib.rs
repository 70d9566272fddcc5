//! Deterministic multi-modality control-loop simulation testbed.
//!
//! Runs the same SAE-L2-style driving stack through three loop topologies of
//! differing plant fidelity — a lagged vehicle-analog plant (VIL), an ideal
//! software plant (SIL), and open-loop trajectory replay (MIL) — under
//! parameterized weather/lighting degradation of a synthetic perception model,
//! then computes surrogate safety metrics and cross-modality correlation
//! statistics for diagnosing and predicting closed-loop response from
//! perception output alone.
//!
//! Everything is seeded and fixed-timestep (10 ms dynamics, 20 Hz logging),
//! so repeated experiments are byte-identical.

pub mod analysis;
pub mod control;
pub mod dynamics;
pub mod harness;
pub mod perception;
pub mod runner;
pub mod scenario;
pub mod world;
