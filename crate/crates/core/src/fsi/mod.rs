//! Immersed-boundary coupling between the fish and the lattice, and the
//! fish's rigid-body dynamics.

mod body;
mod coupling;
mod kernel;

pub use body::{
    build_markers, compute_loads, penalty_forcing, rigid_dynamics_step, rotate, BodyLoads, Deformation, FishConfiguration,
    Kinematics, Outline,
};
pub use coupling::{prescribed_forcing, Swimmer, TickReport};
pub use kernel::{delta, interpolate_velocity, spread_force, Stencil};
