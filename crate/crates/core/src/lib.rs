pub mod cli;
pub mod cruise;
pub mod mpc;
pub mod optim;
pub mod polytope;
pub mod sets;
pub mod tol;
