//! Radio environment: grid topology, large-scale gains, and temporally
//! correlated small-scale Rayleigh fading.

mod bessel;
mod fading;
mod topology;

pub use bessel::bessel_j0;
pub use fading::{
    init_fading, jakes_rho, large_scale_gains, path_loss_db, ChannelState, GainTensor,
};
pub use topology::{Topology, TopologyConfig};
