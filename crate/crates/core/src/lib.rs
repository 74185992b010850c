//! Simulation and learning stack for 6-DoF docking of an eight-propeller
//! microgravity free-flyer.

pub mod checkpoint;
pub mod env;
pub mod error;
pub mod eval;
pub mod math;
pub mod policy;
pub mod ppo;
pub mod propulsion;
pub mod seeding;
