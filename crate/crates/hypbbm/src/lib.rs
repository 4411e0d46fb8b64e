//! Monte Carlo engine for branching Brownian motion on the hyperbolic plane.
//!
//! A Yule tree drives binary fission; along every edge a particle diffuses
//! by hyperbolic Brownian motion, simulated in half-plane coordinates where
//! the vertical component has an exact update. Estimators recover the
//! population law, spread rates, escape speed, and the limiting boundary
//! measure from replica ensembles.

pub mod branching;
pub mod config;
pub mod estimators;
pub mod experiment;
pub mod geometry;
pub mod kernel;
pub mod moebius;
pub mod motion;
pub mod rng;
pub mod stats;
pub mod verify;
pub mod yule;
