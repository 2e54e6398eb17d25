//! Reinforcement-learned epsilon relaxation for constrained expensive
//! optimization.
//!
//! An L-SHADE optimizer ranks candidates by relaxed constraint violation
//! first and objective second. A small Double-DQN agent picks the
//! relaxation level every generation from ten population features.

pub mod cop;
pub mod dqn;
pub mod env;
pub mod features;
pub mod harness;
pub mod lshade;
pub mod problems;
pub mod seed;
