//! Four-point regularized delta kernel with interpolation and spreading
//! between Lagrangian markers and the lattice (spacing h = 1, cell
//! centres at integer coordinates).

use crate::error::{Error, Result};
use crate::lbm::{ForceField, MacroField};

/// One-dimensional four-point kernel.
pub fn delta(r: f64) -> f64 {
    let r = r.abs();
    if r < 1.0 {
        (3.0 - 2.0 * r + (1.0 + 4.0 * r - 4.0 * r * r).sqrt()) / 8.0
    } else if r < 2.0 {
        (5.0 - 2.0 * r - (-7.0 + 12.0 * r - 4.0 * r * r).max(0.0).sqrt()) / 8.0
    } else {
        0.0
    }
}

/// First cell index of the support and the four weights along one axis.
fn axis_weights(x: f64) -> (usize, [f64; 4]) {
    let base = x.floor();
    let i0 = base as isize - 1;
    let mut w = [0.0; 4];
    for (k, wk) in w.iter_mut().enumerate() {
        *wk = delta(x - (i0 + k as isize) as f64);
    }
    (i0 as usize, w)
}

/// Tensor-product stencil of a marker: 4×4 cells starting at `(i0, j0)`.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub i0: usize,
    pub j0: usize,
    pub wx: [f64; 4],
    pub wy: [f64; 4],
}

impl Stencil {
    /// Stencil of `p` on an `nx` × `ny` grid; markers closer than two
    /// cells to an edge are reported as escaped.
    pub fn at(marker: usize, p: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        let [x, y] = p;
        let inside = |v: f64, n: usize| v.is_finite() && v >= 2.0 && v <= n as f64 - 3.0;
        if !(inside(x, nx) && inside(y, ny)) {
            return Err(Error::MarkerEscape { marker, x, y });
        }
        let (i0, wx) = axis_weights(x);
        let (j0, wy) = axis_weights(y);
        Ok(Stencil { i0, j0, wx, wy })
    }

    pub fn for_each(&self, nx: usize, mut f: impl FnMut(usize, f64)) {
        for (b, wy) in self.wy.iter().enumerate() {
            if *wy == 0.0 {
                continue;
            }
            let row = (self.j0 + b) * nx;
            for (a, wx) in self.wx.iter().enumerate() {
                let w = wx * wy;
                if w != 0.0 {
                    f(row + self.i0 + a, w);
                }
            }
        }
    }
}

pub fn stencils(markers: &[[f64; 2]], nx: usize, ny: usize) -> Result<Vec<Stencil>> {
    markers
        .iter()
        .enumerate()
        .map(|(k, p)| Stencil::at(k, *p, nx, ny))
        .collect()
}

/// Fluid velocity at each marker.
pub fn interpolate_velocity(markers: &[[f64; 2]], m: &MacroField) -> Result<Vec<[f64; 2]>> {
    let st = stencils(markers, m.nx, m.ny)?;
    Ok(interpolate_with(&st, m))
}

pub(crate) fn interpolate_with(st: &[Stencil], m: &MacroField) -> Vec<[f64; 2]> {
    st.iter()
        .map(|s| {
            let mut u = [0.0; 2];
            s.for_each(m.nx, |c, w| {
                u[0] += m.ux[c] * w;
                u[1] += m.uy[c] * w;
            });
            u
        })
        .collect()
}

pub(crate) fn interpolate_density(st: &[Stencil], m: &MacroField) -> Vec<f64> {
    st.iter()
        .map(|s| {
            let mut r = 0.0;
            s.for_each(m.nx, |c, w| r += m.rho[c] * w);
            r
        })
        .collect()
}

/// Adds `sum_k F_k ds_k delta(x - X_k)` to `g`.
pub fn spread_force(
    markers: &[[f64; 2]],
    forces: &[[f64; 2]],
    weights: &[f64],
    g: &mut ForceField,
) -> Result<()> {
    if forces.len() != markers.len() || weights.len() != markers.len() {
        return Err(Error::Shape(format!(
            "{} markers, {} forces, {} weights",
            markers.len(),
            forces.len(),
            weights.len()
        )));
    }
    let st = stencils(markers, g.nx, g.ny)?;
    spread_with(&st, forces, weights, g);
    Ok(())
}

pub(crate) fn spread_with(st: &[Stencil], forces: &[[f64; 2]], weights: &[f64], g: &mut ForceField) {
    let nx = g.nx;
    for ((s, f), ds) in st.iter().zip(forces).zip(weights) {
        let (fx, fy) = (f[0] * ds, f[1] * ds);
        s.for_each(nx, |c, w| {
            g.gx[c] += fx * w;
            g.gy[c] += fy * w;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_moments() {
        for k in 0..50 {
            let x = 10.0 + k as f64 / 50.0;
            let (i0, w) = axis_weights(x);
            let sum: f64 = w.iter().sum();
            let first: f64 = (0..4).map(|a| w[a] * ((i0 + a) as f64 - x)).sum();
            let sq: f64 = w.iter().map(|v| v * v).sum();
            assert!((sum - 1.0).abs() < 1e-14);
            assert!(first.abs() < 1e-14);
            assert!((sq - 3.0 / 8.0).abs() < 1e-14);
        }
        assert_eq!(delta(2.0), 0.0);
        assert!((delta(0.0) - 0.5).abs() < 1e-15);
    }

    fn field(nx: usize, ny: usize, u: impl Fn(usize, usize) -> [f64; 2]) -> MacroField {
        MacroField::from_velocity(nx, ny, u)
    }

    #[test]
    fn uniform_and_zero_fields() {
        let markers = [[5.3, 6.7], [10.0, 4.0], [7.77, 8.01]];
        let m = field(16, 12, |_, _| [0.05, 0.0]);
        for u in interpolate_velocity(&markers, &m).unwrap() {
            assert!((u[0] - 0.05).abs() < 1e-12 && u[1].abs() < 1e-12);
        }
        let z = field(16, 12, |_, _| [0.0, 0.0]);
        for u in interpolate_velocity(&markers, &z).unwrap() {
            assert_eq!(u, [0.0, 0.0]);
        }
    }

    #[test]
    fn linear_shear_is_reproduced() {
        let gamma = 0.0123;
        let m = field(20, 20, |x, y| [gamma * y as f64, -0.5 * gamma * x as f64]);
        let markers = [[5.3, 6.7], [9.91, 12.2], [13.5, 3.02]];
        for (p, u) in markers.iter().zip(interpolate_velocity(&markers, &m).unwrap()) {
            assert!((u[0] - gamma * p[1]).abs() < 1e-10);
            assert!((u[1] + 0.5 * gamma * p[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_force_spreads_to_its_weight() {
        let mut g = ForceField::zeros(16, 16);
        spread_force(&[[7.2, 8.9]], &[[1.0, 0.0]], &[0.37], &mut g).unwrap();
        let t = g.total();
        assert!((t[0] - 0.37).abs() < 1e-12 && t[1].abs() < 1e-12);
        let mut z = ForceField::zeros(16, 16);
        spread_force(&[[7.2, 8.9]], &[[0.0, 0.0]], &[0.37], &mut z).unwrap();
        assert!(z.gx.iter().chain(&z.gy).all(|v| *v == 0.0));
    }

    #[test]
    fn spread_and_interpolate_are_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (nx, ny) = (24, 20);
        let m = field(nx, ny, |_, _| [0.0; 2]);
        let mut m = m;
        for k in 0..nx * ny {
            m.ux[k] = rng.gen_range(-1.0..1.0);
            m.uy[k] = rng.gen_range(-1.0..1.0);
        }
        let n = 40;
        let markers: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen_range(2.0..nx as f64 - 3.0), rng.gen_range(2.0..ny as f64 - 3.0)])
            .collect();
        let forces: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let ds: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let mut g = ForceField::zeros(nx, ny);
        spread_force(&markers, &forces, &ds, &mut g).unwrap();
        let grid: f64 = (0..nx * ny).map(|k| g.gx[k] * m.ux[k] + g.gy[k] * m.uy[k]).sum();
        let u = interpolate_velocity(&markers, &m).unwrap();
        let lag: f64 = (0..n).map(|k| ds[k] * (forces[k][0] * u[k][0] + forces[k][1] * u[k][1])).sum();
        assert!((grid - lag).abs() < 1e-12, "{grid} vs {lag}");
    }

    #[test]
    fn markers_near_edges_escape() {
        let m = field(16, 16, |_, _| [0.0; 2]);
        assert!(matches!(
            interpolate_velocity(&[[1.9, 8.0]], &m),
            Err(Error::MarkerEscape { marker: 0, .. })
        ));
        assert!(matches!(
            interpolate_velocity(&[[8.0, 8.0], [8.0, 13.5]], &m),
            Err(Error::MarkerEscape { marker: 1, .. })
        ));
        assert!(interpolate_velocity(&[[2.0, 13.0]], &m).is_ok());
    }
}
