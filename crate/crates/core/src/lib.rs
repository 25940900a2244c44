//! X-ray Sobolev distances between point clouds and to the standard normal.
//!
//! The crate is organised by role:
//!
//! * [`cloud`], [`special`], [`quadrature`], [`sampling`]: foundations.
//! * [`energy`]: the Ḣ¹ (energy distance) kernel, Dirac-to-normal profiles
//!   and their gradients.
//! * [`sobolev`]: the inhomogeneous H^s kernels and precomputed tables.
//! * [`oracle`]: Monte-Carlo and exact reference computations.
//! * [`train`]: particle flow and a small dense auto-encoder trained with the
//!   latent distance to N(0, I).

pub mod cloud;
pub mod energy;
pub mod error;
pub mod oracle;
pub mod parallel;
pub mod quadrature;
pub mod sampling;
pub mod sobolev;
pub mod special;
pub mod train;

pub use cloud::{Direction, PointCloud, WeightedCloud};
pub use energy::{
    latent_loss, latent_loss_gradient, xi_gradient, xi_poisson_exact, xs_energy_distance_sq,
    EnergyLossReport, SobolevKernel, XiEvaluator, XiMethod,
};
pub use error::{Error, Result};
pub use quadrature::{make_quadrature, QuadratureKind, QuadratureRule};
pub use sampling::{sample_normal_cloud, sample_sphere, OracleEstimate, Seed};
pub use sobolev::{build_kernel_table, HsParams, KernelTable, QuadOrders, TableMethod};
