//! Domain edges, solid obstacles and the post-streaming boundary pass.

use super::field::DistributionField;
use super::lattice::{equilibrium, C, CS2, OPP, Q, W};
use crate::error::{Error, Result};

/// Treatment of one side of the rectangular domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Edge {
    Periodic,
    /// Half-way bounce-back wall.
    NoSlip,
    /// Specular reflection.
    FreeSlip,
    /// Velocity Dirichlet via non-equilibrium bounce-back. West side only.
    VelocityInlet { u: [f64; 2] },
    /// Zero-gradient extrapolation. East side only.
    Outflow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edges {
    pub west: Edge,
    pub east: Edge,
    pub south: Edge,
    pub north: Edge,
}

impl Edges {
    pub fn periodic() -> Self {
        Edges {
            west: Edge::Periodic,
            east: Edge::Periodic,
            south: Edge::Periodic,
            north: Edge::Periodic,
        }
    }

    /// Periodic in x with no-slip walls at the south and north sides.
    pub fn channel() -> Self {
        Edges {
            south: Edge::NoSlip,
            north: Edge::NoSlip,
            ..Edges::periodic()
        }
    }

    /// Inlet on the west, outflow on the east, free-slip lateral sides.
    pub fn wind_tunnel(u_in: f64) -> Self {
        Edges {
            west: Edge::VelocityInlet { u: [u_in, 0.0] },
            east: Edge::Outflow,
            south: Edge::FreeSlip,
            north: Edge::FreeSlip,
        }
    }

    fn validate(&self) -> Result<()> {
        let pair = |a: Edge, b: Edge, axis: &str| -> Result<()> {
            if (a == Edge::Periodic) != (b == Edge::Periodic) {
                return Err(Error::Config(format!(
                    "periodic {axis} edges must be paired"
                )));
            }
            Ok(())
        };
        pair(self.west, self.east, "x")?;
        pair(self.south, self.north, "y")?;
        if matches!(self.east, Edge::VelocityInlet { .. })
            || matches!(self.south, Edge::VelocityInlet { .. } | Edge::Outflow)
            || matches!(self.north, Edge::VelocityInlet { .. } | Edge::Outflow)
            || self.west == Edge::Outflow
        {
            return Err(Error::Config(
                "inlet is supported on the west edge and outflow on the east edge only".into(),
            ));
        }
        Ok(())
    }
}

/// Grid extent, edge kinds and the solid-cell mask.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub nx: usize,
    pub ny: usize,
    pub edges: Edges,
    solid: Vec<bool>,
}

impl Geometry {
    pub fn new(nx: usize, ny: usize, edges: Edges) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::Config(format!("grid {nx}x{ny} is too small")));
        }
        edges.validate()?;
        Ok(Geometry {
            nx,
            ny,
            edges,
            solid: vec![false; nx * ny],
        })
    }

    /// Flags every cell whose center lies within `radius` of `center`.
    pub fn add_disc(&mut self, center: [f64; 2], radius: f64) {
        for y in 0..self.ny {
            for x in 0..self.nx {
                let dx = x as f64 - center[0];
                let dy = y as f64 - center[1];
                if dx * dx + dy * dy <= radius * radius {
                    self.solid[y * self.nx + x] = true;
                }
            }
        }
    }

    #[inline]
    pub fn is_solid(&self, x: usize, y: usize) -> bool {
        self.solid[y * self.nx + x]
    }

    pub fn solid_mask(&self) -> &[bool] {
        &self.solid
    }

    pub fn solid_count(&self) -> usize {
        self.solid.iter().filter(|s| **s).count()
    }
}

/// West-edge velocity node: density from the known populations, unknown
/// non-equilibrium parts by bounce-back, then every population rebuilt
/// from equilibrium plus the regularized non-equilibrium stress.
fn regularized_inlet(f: &mut [f64; Q], u: [f64; 2]) {
    let rho = (f[0] + f[2] + f[4] + 2.0 * (f[3] + f[6] + f[7])) / (1.0 - u[0]);
    let feq = equilibrium(rho, u);
    let mut neq = [0.0; Q];
    for i in 0..Q {
        neq[i] = f[i] - feq[i];
    }
    for i in [1, 5, 8] {
        neq[i] = neq[OPP[i]];
    }
    let mut pi = [0.0; 3];
    for i in 0..Q {
        let (cx, cy) = (C[i][0] as f64, C[i][1] as f64);
        pi[0] += cx * cx * neq[i];
        pi[1] += cx * cy * neq[i];
        pi[2] += cy * cy * neq[i];
    }
    for i in 0..Q {
        let (cx, cy) = (C[i][0] as f64, C[i][1] as f64);
        let q = (cx * cx - CS2) * pi[0] + 2.0 * cx * cy * pi[1] + (cy * cy - CS2) * pi[2];
        f[i] = feq[i] + W[i] / (2.0 * CS2 * CS2) * q;
    }
}

/// Fills the populations that streaming could not supply: the inlet
/// column through [`regularized_inlet`] and the outflow column by copying
/// its upstream neighbour.
pub fn apply_boundaries(field: &mut DistributionField, geom: &Geometry) {
    let (nx, ny) = (geom.nx, geom.ny);
    if let Edge::VelocityInlet { u } = geom.edges.west {
        for y in 0..ny {
            if geom.is_solid(0, y) {
                continue;
            }
            regularized_inlet(field.cell_mut(0, y), u);
        }
    }
    if geom.edges.east == Edge::Outflow {
        for y in 0..ny {
            if geom.is_solid(nx - 1, y) || geom.is_solid(nx - 2, y) {
                continue;
            }
            let src = *field.cell(nx - 2, y);
            *field.cell_mut(nx - 1, y) = src;
        }
    }
}

/// Cylinder-in-a-stream setup in lattice units.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub nx: usize,
    pub ny: usize,
    pub u_in: f64,
    /// Cylinder diameter in cells.
    pub diameter: f64,
    /// Cylinder center in cells.
    pub center: [f64; 2],
    pub reynolds: f64,
    /// Overrides the relaxation time derived from `reynolds` when set.
    pub tau_override: Option<f64>,
}

impl FlowConfig {
    pub fn viscosity(&self) -> f64 {
        self.u_in * self.diameter / self.reynolds
    }

    /// BGK relaxation time, `3 nu + 1/2`.
    pub fn tau(&self) -> f64 {
        self.tau_override
            .unwrap_or(3.0 * self.u_in * self.diameter / self.reynolds + 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        let tau = self.tau();
        if !(tau > 0.5) {
            return Err(Error::Config(format!(
                "relaxation time tau = {tau} must exceed 0.5 for BGK stability"
            )));
        }
        if !(self.u_in > 0.0 && self.u_in < super::lattice::CS2.sqrt()) {
            return Err(Error::Config(format!(
                "inlet speed {} must lie in (0, c_s)",
                self.u_in
            )));
        }
        let r = 0.5 * self.diameter;
        let [cx, cy] = self.center;
        if !(self.diameter > 0.0
            && cx - r > 1.0
            && cy - r > 1.0
            && cx + r < (self.nx - 2) as f64
            && cy + r < (self.ny - 2) as f64)
        {
            return Err(Error::Config(
                "cylinder must lie fully inside the grid interior".into(),
            ));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry> {
        self.validate()?;
        let mut g = Geometry::new(self.nx, self.ny, Edges::wind_tunnel(self.u_in))?;
        g.add_disc(self.center, 0.5 * self.diameter);
        Ok(g)
    }
}
