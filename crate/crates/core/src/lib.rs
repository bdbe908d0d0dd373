pub mod error;
pub mod gp;
pub mod problem;
pub mod solver;
pub mod environment;
pub mod cmtab;
pub mod baselines;
pub mod harness;
