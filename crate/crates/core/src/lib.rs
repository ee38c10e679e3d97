//! Delaunay continuum Potts model toolkit.
//!
//! Geometry and triangulation ([`geom`], [`delaunay`]), interaction
//! potentials and analytic thresholds ([`potentials`], [`thresholds`]),
//! pseudo-periodic boundary configurations ([`pseudo_periodic`]), the
//! grand-canonical sampler ([`sampler`]), the random-cluster coupling
//! ([`random_cluster`]), coarse graining ([`coarse_grain`]), lattice
//! site-bond percolation ([`site_bond`]) and the experiment driver
//! ([`experiments`]).

pub mod cells;
pub mod delaunay;
pub mod geom;
pub mod potentials;
pub mod thresholds;
pub mod pseudo_periodic;
pub mod rng;
pub mod random_cluster;
pub mod sampler;
pub mod unionfind;
pub mod coarse_grain;
pub mod site_bond;
pub mod stats;
pub mod experiments;
