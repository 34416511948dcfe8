use rayon::prelude::*;

use super::boundary::{Edge, Geometry};
use super::lattice::{equilibrium, guo_source, C, CS2, MIRROR_X, MIRROR_Y, OPP, Q};
use crate::error::{Error, Result};

/// Nine populations per cell, row-major (`(y * nx + x) * 9 + i`), double-buffered.
#[derive(Clone, Debug)]
pub struct DistributionField {
    pub nx: usize,
    pub ny: usize,
    pub tau: f64,
    /// Ticks completed since initialization.
    pub tick: u64,
    f: Vec<f64>,
    post: Vec<f64>,
}

/// Body force per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ForceField {
    pub nx: usize,
    pub ny: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl ForceField {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        ForceField {
            nx,
            ny,
            gx: vec![0.0; nx * ny],
            gy: vec![0.0; nx * ny],
        }
    }

    pub fn uniform(nx: usize, ny: usize, g: [f64; 2]) -> Self {
        ForceField {
            nx,
            ny,
            gx: vec![g[0]; nx * ny],
            gy: vec![g[1]; nx * ny],
        }
    }

    pub fn clear(&mut self) {
        self.gx.iter_mut().for_each(|v| *v = 0.0);
        self.gy.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Sum of the force over all cells (unit cell area).
    pub fn total(&self) -> [f64; 2] {
        [self.gx.iter().sum(), self.gy.iter().sum()]
    }
}

/// Density, velocity, pressure and body force per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroField {
    pub nx: usize,
    pub ny: usize,
    pub rho: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub p: Vec<f64>,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl MacroField {
    pub fn new(nx: usize, ny: usize) -> Self {
        let n = nx * ny;
        MacroField {
            nx,
            ny,
            rho: vec![1.0; n],
            ux: vec![0.0; n],
            uy: vec![0.0; n],
            p: vec![CS2; n],
            gx: vec![0.0; n],
            gy: vec![0.0; n],
        }
    }

    /// Builds a field directly from per-cell velocities at unit density.
    pub fn from_velocity(nx: usize, ny: usize, u: impl Fn(usize, usize) -> [f64; 2]) -> Self {
        let mut m = MacroField::new(nx, ny);
        for y in 0..ny {
            for x in 0..nx {
                let [a, b] = u(x, y);
                m.ux[y * nx + x] = a;
                m.uy[y * nx + x] = b;
            }
        }
        m
    }

    #[inline]
    pub fn velocity(&self, x: usize, y: usize) -> [f64; 2] {
        let k = y * self.nx + x;
        [self.ux[k], self.uy[k]]
    }

    /// Adds `g` to the stored body force and applies the half-force
    /// velocity correction `u += g / (2 rho)`.
    pub fn apply_force(&mut self, g: &ForceField) {
        for k in 0..self.rho.len() {
            if g.gx[k] != 0.0 || g.gy[k] != 0.0 {
                let half = 0.5 / self.rho[k];
                self.ux[k] += g.gx[k] * half;
                self.uy[k] += g.gy[k] * half;
                self.gx[k] += g.gx[k];
                self.gy[k] += g.gy[k];
            }
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        (0..self.rho.len())
            .map(|k| 0.5 * self.rho[k] * (self.ux[k] * self.ux[k] + self.uy[k] * self.uy[k]))
            .sum()
    }
}

impl DistributionField {
    pub fn uniform(nx: usize, ny: usize, tau: f64, rho: f64, u: [f64; 2]) -> Self {
        Self::from_fn(nx, ny, tau, |_, _| (rho, u))
    }

    /// Equilibrium initialization from a per-cell `(rho, u)` function.
    pub fn from_fn(
        nx: usize,
        ny: usize,
        tau: f64,
        state: impl Fn(usize, usize) -> (f64, [f64; 2]),
    ) -> Self {
        let mut f = vec![0.0; nx * ny * Q];
        for y in 0..ny {
            for x in 0..nx {
                let (rho, u) = state(x, y);
                let k = (y * nx + x) * Q;
                f[k..k + Q].copy_from_slice(&equilibrium(rho, u));
            }
        }
        DistributionField {
            nx,
            ny,
            tau,
            tick: 0,
            post: vec![0.0; f.len()],
            f,
        }
    }

    /// Wraps raw populations, e.g. from a warm-start file.
    pub fn from_raw(nx: usize, ny: usize, tau: f64, tick: u64, f: Vec<f64>) -> Result<Self> {
        if f.len() != nx * ny * Q {
            return Err(Error::Shape(format!(
                "expected {} populations, got {}",
                nx * ny * Q,
                f.len()
            )));
        }
        Ok(DistributionField {
            nx,
            ny,
            tau,
            tick,
            post: vec![0.0; f.len()],
            f,
        })
    }

    pub fn populations(&self) -> &[f64] {
        &self.f
    }

    #[inline]
    pub fn cell(&self, x: usize, y: usize) -> &[f64; Q] {
        let k = (y * self.nx + x) * Q;
        self.f[k..k + Q].try_into().unwrap()
    }

    #[inline]
    pub fn cell_mut(&mut self, x: usize, y: usize) -> &mut [f64; Q] {
        let k = (y * self.nx + x) * Q;
        (&mut self.f[k..k + Q]).try_into().unwrap()
    }

    pub fn total_mass(&self) -> f64 {
        self.f.iter().sum()
    }

    /// Total lattice momentum `sum f_i c_i` (no half-force term).
    pub fn total_momentum(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for cell in self.f.chunks_exact(Q) {
            for i in 0..Q {
                m[0] += cell[i] * C[i][0] as f64;
                m[1] += cell[i] * C[i][1] as f64;
            }
        }
        m
    }

    /// Density, velocity (with half-force correction), pressure.
    pub fn macroscopics(&self, g: &ForceField, out: &mut MacroField) -> Result<()> {
        let nx = self.nx;
        let cells = block_rows(self.ny) * nx;
        out.rho
            .par_chunks_mut(cells)
            .zip(out.ux.par_chunks_mut(cells))
            .zip(out.uy.par_chunks_mut(cells))
            .zip(out.p.par_chunks_mut(cells))
            .zip(self.f.par_chunks(cells * Q))
            .for_each(|((((rho, ux), uy), p), block)| {
                for (k, c) in block.chunks_exact(Q).enumerate() {
                    let r: f64 = c.iter().sum();
                    let jx = c[1] - c[3] + c[5] - c[6] - c[7] + c[8];
                    let jy = c[2] - c[4] + c[5] + c[6] - c[7] - c[8];
                    rho[k] = r;
                    ux[k] = jx / r;
                    uy[k] = jy / r;
                    p[k] = r * CS2;
                }
            });
        for k in 0..out.rho.len() {
            let r = out.rho[k];
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Diverged {
                    tick: self.tick,
                    reason: format!("density {r} at cell ({}, {})", k % nx, k / nx),
                });
            }
        }
        out.gx.copy_from_slice(&g.gx);
        out.gy.copy_from_slice(&g.gy);
        for k in 0..out.rho.len() {
            if g.gx[k] != 0.0 || g.gy[k] != 0.0 {
                let half = 0.5 / out.rho[k];
                out.ux[k] += g.gx[k] * half;
                out.uy[k] += g.gy[k] * half;
            }
        }
        Ok(())
    }

    /// One BGK collision with Guo forcing followed by pull streaming.
    ///
    /// Returns the momentum-exchange force exerted on solid cells.
    /// Populations that stream in from an inlet or outflow edge are left as
    /// placeholders for [`super::apply_boundaries`].
    pub fn collide_and_stream(&mut self, m: &MacroField, geom: &Geometry) -> Result<[f64; 2]> {
        let (nx, ny) = (self.nx, self.ny);
        let omega = 1.0 / self.tau;
        let prefactor = 1.0 - 0.5 * omega;
        let solid = geom.solid_mask();
        let rows = block_rows(ny);
        let cells = rows * nx;

        let bad = self
            .post
            .par_chunks_mut(cells * Q)
            .zip(self.f.par_chunks(cells * Q))
            .enumerate()
            .map(|(b, (post, f))| {
                let base = b * cells;
                for (c, (dst, src)) in post.chunks_exact_mut(Q).zip(f.chunks_exact(Q)).enumerate() {
                    let k = base + c;
                    if solid[k] {
                        dst.copy_from_slice(src);
                        continue;
                    }
                    let u = [m.ux[k], m.uy[k]];
                    let feq = equilibrium(m.rho[k], u);
                    let mut sum = 0.0;
                    if m.gx[k] != 0.0 || m.gy[k] != 0.0 {
                        let s = guo_source(u, [m.gx[k], m.gy[k]]);
                        for i in 0..Q {
                            let v = src[i] - omega * (src[i] - feq[i]) + prefactor * s[i];
                            sum += v;
                            dst[i] = v;
                        }
                    } else {
                        for i in 0..Q {
                            let v = src[i] - omega * (src[i] - feq[i]);
                            sum += v;
                            dst[i] = v;
                        }
                    }
                    // NaN or Inf in any population poisons the sum
                    if !sum.is_finite() {
                        return Some(k);
                    }
                }
                None
            })
            .find_first(|bad| bad.is_some())
            .flatten();
        if let Some(k) = bad {
            return Err(Error::Diverged {
                tick: self.tick,
                reason: format!("non-finite population at cell ({}, {})", k % nx, k / nx),
            });
        }

        let post = &self.post;
        let edges = geom.edges;
        let forces: Vec<[f64; 2]> = self
            .f
            .par_chunks_mut(cells * Q)
            .enumerate()
            .map(|(b, block)| {
                let mut force = [0.0; 2];
                for (r, row) in block.chunks_mut(nx * Q).enumerate() {
                    let y = b * rows + r;
                    let inner_row = y > 0 && y + 1 < ny;
                    for x in 0..nx {
                        let k = y * nx + x;
                        if solid[k] {
                            continue;
                        }
                        let own = k * Q;
                        if inner_row && x > 0 && x + 1 < nx {
                            for i in 0..Q {
                                let src = (k as isize - OFFSET_CELLS[i] * nx as isize - C[i][0] as isize) as usize;
                                row[x * Q + i] = if solid[src] {
                                    let j = OPP[i];
                                    let fj = post[own + j];
                                    force[0] += 2.0 * fj * C[j][0] as f64;
                                    force[1] += 2.0 * fj * C[j][1] as f64;
                                    fj
                                } else {
                                    post[src * Q + i]
                                };
                            }
                            continue;
                        }
                        for i in 0..Q {
                            let sx = x as i64 - C[i][0] as i64;
                            let sy = y as i64 - C[i][1] as i64;
                            row[x * Q + i] = pull(post, solid, edges, nx, ny, x, y, sx, sy, i, own, &mut force);
                        }
                    }
                }
                force
            })
            .collect();
        self.tick += 1;
        Ok(forces.iter().fold([0.0; 2], |a, f| [a[0] + f[0], a[1] + f[1]]))
    }
}

/// Rows per parallel work item: a few items per worker thread.
fn block_rows(ny: usize) -> usize {
    let items = 4 * rayon::current_num_threads();
    ny.div_ceil(items).max(1)
}

/// Row offset of the source cell for each direction.
const OFFSET_CELLS: [isize; Q] = [0, 0, 1, 0, -1, 1, 1, -1, -1];

#[allow(clippy::too_many_arguments)]
#[inline]
fn pull(
    post: &[f64],
    solid: &[bool],
    edges: super::boundary::Edges,
    nx: usize,
    ny: usize,
    x: usize,
    y: usize,
    sx: i64,
    sy: i64,
    i: usize,
    own: usize,
    force: &mut [f64; 2],
) -> f64 {
    let (nxi, nyi) = (nx as i64, ny as i64);
    let x_out = sx < 0 || sx >= nxi;
    let y_out = sy < 0 || sy >= nyi;
    let bounce = || post[own + OPP[i]];
    if !x_out && !y_out {
        let (sxu, syu) = (sx as usize, sy as usize);
        if solid[syu * nx + sxu] {
            let j = OPP[i];
            let fj = post[own + j];
            force[0] += 2.0 * fj * C[j][0] as f64;
            force[1] += 2.0 * fj * C[j][1] as f64;
            return fj;
        }
        return post[(syu * nx + sxu) * Q + i];
    }
    let wrap = |v: i64, n: i64| v.rem_euclid(n) as usize;
    if y_out && x_out {
        return match (edges.west, edges.south) {
            (Edge::Periodic, Edge::Periodic) => post[(wrap(sy, nyi) * nx + wrap(sx, nxi)) * Q + i],
            _ => bounce(),
        };
    }
    if y_out {
        let side = if sy < 0 { edges.south } else { edges.north };
        return match side {
            Edge::Periodic => post[(wrap(sy, nyi) * nx + sx as usize) * Q + i],
            Edge::FreeSlip => post[(y * nx + sx as usize) * Q + MIRROR_Y[i]],
            _ => bounce(),
        };
    }
    let side = if sx < 0 { edges.west } else { edges.east };
    match side {
        Edge::Periodic => post[(sy as usize * nx + wrap(sx, nxi)) * Q + i],
        Edge::FreeSlip => post[(sy as usize * nx + x) * Q + MIRROR_X[i]],
        Edge::NoSlip => bounce(),
        // Unknown populations, filled by apply_boundaries.
        Edge::VelocityInlet { .. } | Edge::Outflow => post[own + i],
    }
}

/// `omega_z = d(u_y)/dx - d(u_x)/dy` by central differences; the boundary
/// ring copies its nearest interior value.
pub fn vorticity(m: &MacroField) -> Vec<f64> {
    let (nx, ny) = (m.nx, m.ny);
    let mut w = vec![0.0; nx * ny];
    if nx < 3 || ny < 3 {
        return w;
    }
    for y in 1..ny - 1 {
        for x in 1..nx - 1 {
            let k = y * nx + x;
            let dvdx = 0.5 * (m.uy[k + 1] - m.uy[k - 1]);
            let dudy = 0.5 * (m.ux[k + nx] - m.ux[k - nx]);
            w[k] = dvdx - dudy;
        }
    }
    for y in 0..ny {
        let yi = y.clamp(1, ny - 2);
        for x in 0..nx {
            if y == yi && (1..nx - 1).contains(&x) {
                continue;
            }
            let xi = x.clamp(1, nx - 2);
            w[y * nx + x] = w[yi * nx + xi];
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::super::boundary::Edges;
    use super::super::lattice::W;
    use super::*;

    #[test]
    fn rest_state_macroscopics() {
        let f = DistributionField::uniform(4, 3, 0.8, 1.0, [0.0, 0.0]);
        let mut m = MacroField::new(4, 3);
        f.macroscopics(&ForceField::zeros(4, 3), &mut m).unwrap();
        for k in 0..12 {
            assert!((m.rho[k] - 1.0).abs() < 1e-15);
            assert_eq!(m.ux[k], 0.0);
            assert_eq!(m.uy[k], 0.0);
            assert_eq!(m.p[k], m.rho[k] * CS2);
        }
    }

    #[test]
    fn half_force_correction() {
        let f = DistributionField::uniform(4, 3, 0.8, 1.0, [0.0, 0.0]);
        let mut m = MacroField::new(4, 3);
        f.macroscopics(&ForceField::uniform(4, 3, [0.006, 0.0]), &mut m)
            .unwrap();
        for k in 0..12 {
            assert!((m.ux[k] - 0.003).abs() < 1e-15);
        }
    }

    #[test]
    fn equilibrium_velocity_is_recovered() {
        let f = DistributionField::uniform(3, 3, 0.8, 1.0, [0.05, 0.0]);
        let mut m = MacroField::new(3, 3);
        f.macroscopics(&ForceField::zeros(3, 3), &mut m).unwrap();
        assert!((m.ux[4] - 0.05).abs() < 1e-15);
        assert!(m.uy[4].abs() < 1e-16);
    }

    #[test]
    fn negative_density_is_reported() {
        let mut f = DistributionField::uniform(3, 3, 0.8, 1.0, [0.0, 0.0]);
        f.cell_mut(1, 1)[0] = -5.0;
        let mut m = MacroField::new(3, 3);
        let err = f.macroscopics(&ForceField::zeros(3, 3), &mut m).unwrap_err();
        assert!(matches!(err, Error::Diverged { tick: 0, .. }));
    }

    #[test]
    fn nan_population_is_reported_with_tick() {
        let geom = Geometry::new(5, 5, Edges::periodic()).unwrap();
        let mut f = DistributionField::uniform(5, 5, 0.8, 1.0, [0.0, 0.0]);
        let mut m = MacroField::new(5, 5);
        f.macroscopics(&ForceField::zeros(5, 5), &mut m).unwrap();
        f.collide_and_stream(&m, &geom).unwrap();
        m.ux[7] = f64::NAN;
        let err = f.collide_and_stream(&m, &geom).unwrap_err();
        assert!(matches!(err, Error::Diverged { tick: 1, .. }), "{err}");
    }

    #[test]
    fn uniform_rest_state_is_a_fixed_point() {
        let geom = Geometry::new(6, 5, Edges::periodic()).unwrap();
        let mut f = DistributionField::uniform(6, 5, 0.7, 1.0, [0.0, 0.0]);
        let mut m = MacroField::new(6, 5);
        for _ in 0..10 {
            f.macroscopics(&ForceField::zeros(6, 5), &mut m).unwrap();
            f.collide_and_stream(&m, &geom).unwrap();
        }
        for cell in f.populations().chunks(Q) {
            for i in 0..Q {
                assert!((cell[i] - W[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn full_relaxation_at_unit_tau() {
        // Streaming is a permutation, so the post-collision state is
        // observable through the streamed populations of the neighbours.
        let geom = Geometry::new(5, 5, Edges::periodic()).unwrap();
        let mut f = DistributionField::uniform(5, 5, 1.0, 1.0, [0.0, 0.0]);
        f.cell_mut(2, 2)[1] += 0.01;
        f.cell_mut(2, 2)[6] -= 0.003;
        let mut m = MacroField::new(5, 5);
        f.macroscopics(&ForceField::zeros(5, 5), &mut m).unwrap();
        let feq = equilibrium(m.rho[12], m.velocity(2, 2));
        f.collide_and_stream(&m, &geom).unwrap();
        for i in 0..Q {
            let x = (2 + C[i][0]) as usize;
            let y = (2 + C[i][1]) as usize;
            assert!((f.cell(x, y)[i] - feq[i]).abs() < 1e-16);
        }
    }

    #[test]
    fn vorticity_of_rigid_rotation() {
        let omega0 = 0.001;
        let (nx, ny) = (16, 12);
        let m = MacroField::from_velocity(nx, ny, |x, y| {
            let rx = x as f64 - 7.3;
            let ry = y as f64 - 5.1;
            [-omega0 * ry, omega0 * rx]
        });
        let w = vorticity(&m);
        for y in 1..ny - 1 {
            for x in 1..nx - 1 {
                let v = w[y * nx + x];
                assert!(((v - 2.0 * omega0) / (2.0 * omega0)).abs() < 1e-10);
            }
        }
        let uniform = MacroField::from_velocity(nx, ny, |_, _| [0.05, 0.0]);
        assert!(vorticity(&uniform).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn periodic_streaming_conserves_mass() {
        let (nx, ny) = (20, 16);
        let geom = Geometry::new(nx, ny, Edges::periodic()).unwrap();
        let mut f = DistributionField::from_fn(nx, ny, 0.6, |x, y| {
            let a = (x as f64 * 0.7).sin() * 0.01;
            let b = (y as f64 * 0.3).cos() * 0.01;
            (1.0 + a * b * 10.0, [a, b])
        });
        let mass0 = f.total_mass();
        let mut m = MacroField::new(nx, ny);
        let zero = ForceField::zeros(nx, ny);
        for _ in 0..1000 {
            f.macroscopics(&zero, &mut m).unwrap();
            f.collide_and_stream(&m, &geom).unwrap();
        }
        assert!(((f.total_mass() - mass0) / mass0).abs() < 1e-12);
    }
}
