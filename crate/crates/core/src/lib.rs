pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod grouping;
pub mod inverse;
pub mod io;
pub mod linalg;
pub mod potential;
pub mod problem;
pub mod propagate;
pub mod spectral;
pub mod stability;
