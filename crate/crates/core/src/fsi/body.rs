//! Fish outline, mass properties, momentum-neutral deformation and
//! rigid-body dynamics.

use crate::kinematics::{midline, BodyShape, Gait, MidlineState};

pub fn rotate(v: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Closed outline: positions and arc-length weight per marker.
#[derive(Clone, Debug, PartialEq)]
pub struct Outline {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Outline {
    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|k| {
                let (a, b) = (self.points[k], self.points[(k + 1) % n]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum()
    }

    /// Area and polar second moment about the origin.
    pub fn area_and_polar_moment(&self) -> (f64, f64) {
        let n = self.points.len();
        let (mut a, mut j) = (0.0, 0.0);
        for k in 0..n {
            let (p, q) = (self.points[k], self.points[(k + 1) % n]);
            let c = cross(p, q);
            a += c;
            j += c * (p[0] * p[0] + p[0] * q[0] + q[0] * q[0] + p[1] * p[1] + p[1] * q[1] + q[1] * q[1]);
        }
        ((0.5 * a).abs(), (j / 12.0).abs())
    }
}

/// Marker index layout: upper side from head to tail, then the lower side
/// back towards the head, head and tail stations appearing once.
fn outline_from(stations: &[[f64; 2]], theta: &[f64], widths: &[f64]) -> Vec<[f64; 2]> {
    let n = stations.len();
    let mut pts = Vec::with_capacity(2 * n - 2);
    let side = |k: usize, sign: f64| {
        // body frame: head at the origin, tail towards -x
        let normal = [theta[k].sin(), theta[k].cos()];
        [
            stations[k][0] + sign * widths[k] * normal[0],
            stations[k][1] + sign * widths[k] * normal[1],
        ]
    };
    for k in 0..n {
        pts.push(side(k, 1.0));
    }
    for k in (1..n - 1).rev() {
        pts.push(side(k, -1.0));
    }
    pts
}

fn arc_weights(points: &[[f64; 2]]) -> Vec<f64> {
    let n = points.len();
    let seg = |k: usize| {
        let (a, b) = (points[k], points[(k + 1) % n]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    };
    (0..n).map(|k| 0.5 * (seg((k + n - 1) % n) + seg(k))).collect()
}

/// Slice masses `2 w dl` (unit density) per station, trapezoid weights.
fn slice_masses(shape: &BodyShape, widths: &[f64]) -> Vec<f64> {
    let s = &shape.stations;
    let n = s.len();
    (0..n)
        .map(|k| {
            let left = if k > 0 { s[k] - s[k - 1] } else { 0.0 };
            let right = if k + 1 < n { s[k + 1] - s[k] } else { 0.0 };
            2.0 * widths[k] * 0.5 * (left + right)
        })
        .collect()
}

/// Midline stations in the body frame before centring.
fn body_stations(mid: &MidlineState) -> Vec<[f64; 2]> {
    mid.axial
        .iter()
        .zip(&mid.lateral)
        .map(|(a, p)| [-a, *p])
        .collect()
}

fn centroid(points: &[[f64; 2]], mass: &[f64]) -> [f64; 2] {
    let total: f64 = mass.iter().sum();
    let mut c = [0.0; 2];
    for (p, m) in points.iter().zip(mass) {
        c[0] += m * p[0];
        c[1] += m * p[1];
    }
    [c[0] / total, c[1] / total]
}

/// Body-frame outline about the slice-mass centre.
struct Frame {
    stations: Vec<[f64; 2]>,
    outline: Vec<[f64; 2]>,
}

fn frame(mid: &MidlineState, widths: &[f64], mass: &[f64]) -> Frame {
    let mut stations = body_stations(mid);
    let mut outline = outline_from(&stations, &mid.theta, widths);
    let c = centroid(&stations, mass);
    for p in stations.iter_mut().chain(outline.iter_mut()) {
        p[0] -= c[0];
        p[1] -= c[1];
    }
    Frame { stations, outline }
}

/// Outline markers of `mid` offset by the half-widths of `shape`, centred
/// on the slice-mass centre, rotated by `theta` and translated to `d`.
pub fn build_markers(shape: &BodyShape, mid: &MidlineState, d: [f64; 2], theta: f64) -> Outline {
    let widths = shape.half_widths();
    let mass = slice_masses(shape, &widths);
    let f = frame(mid, &widths, &mass);
    let points: Vec<[f64; 2]> = f
        .outline
        .iter()
        .map(|p| {
            let r = rotate(*p, theta);
            [d[0] + r[0], d[1] + r[1]]
        })
        .collect();
    let weights = arc_weights(&points);
    Outline { points, weights }
}

/// Body-frame deformation at one instant, free of net linear and angular
/// momentum. Positions are relative to the centre of mass, before the
/// counter-rotation `alpha` is applied.
#[derive(Clone, Debug)]
pub struct Deformation {
    pub stations: Vec<[f64; 2]>,
    pub station_velocity: Vec<[f64; 2]>,
    pub outline: Vec<[f64; 2]>,
    pub outline_velocity: Vec<[f64; 2]>,
    /// Rigid spin removed from the raw deformation.
    pub spin: f64,
}

/// The prescribed part of the fish: shape, gait and derived constants.
#[derive(Clone, Debug)]
pub struct Kinematics {
    pub shape: BodyShape,
    pub gait: Gait,
    pub widths: Vec<f64>,
    pub slice_mass: Vec<f64>,
}

const FD_STEP: f64 = 1e-3;

impl Kinematics {
    pub fn new(shape: BodyShape, gait: Gait) -> Self {
        let widths = shape.half_widths();
        let slice_mass = slice_masses(&shape, &widths);
        Kinematics {
            shape,
            gait,
            widths,
            slice_mass,
        }
    }

    fn frame_at(&self, t: f64) -> Frame {
        frame(&midline(t, &self.gait, &self.shape), &self.widths, &self.slice_mass)
    }

    /// Straight rest outline about its mass centre.
    pub fn rest_outline(&self) -> Outline {
        let n = self.shape.station_count();
        let mid = MidlineState::from_angles(&self.shape.stations, &vec![0.0; n]);
        build_markers(&self.shape, &mid, [0.0; 2], 0.0)
    }

    /// Mass and moment of inertia about the mass centre at the given
    /// density, from the rest outline polygon.
    pub fn mass_properties(&self, density: f64) -> (f64, f64) {
        let (a, j) = self.rest_outline().area_and_polar_moment();
        (density * a, density * j)
    }

    pub fn deformation(&self, t: f64) -> Deformation {
        let now = self.frame_at(t);
        let fwd = self.frame_at(t + FD_STEP);
        let back = self.frame_at(t - FD_STEP);
        let diff = |a: &[[f64; 2]], b: &[[f64; 2]]| -> Vec<[f64; 2]> {
            a.iter()
                .zip(b)
                .map(|(p, q)| [(p[0] - q[0]) / (2.0 * FD_STEP), (p[1] - q[1]) / (2.0 * FD_STEP)])
                .collect()
        };
        let mut sv = diff(&fwd.stations, &back.stations);
        let mut ov = diff(&fwd.outline, &back.outline);
        let m = &self.slice_mass;
        let (mut h, mut j) = (0.0, 0.0);
        let mut p = [0.0; 2];
        for k in 0..m.len() {
            let r = now.stations[k];
            h += m[k] * cross(r, sv[k]);
            j += m[k] * (r[0] * r[0] + r[1] * r[1]);
            p[0] += m[k] * sv[k][0];
            p[1] += m[k] * sv[k][1];
        }
        let spin = h / j;
        let total: f64 = m.iter().sum();
        let drift = [p[0] / total, p[1] / total];
        let project = |r: &[[f64; 2]], v: &mut [[f64; 2]]| {
            for (rk, vk) in r.iter().zip(v.iter_mut()) {
                vk[0] += spin * rk[1] - drift[0];
                vk[1] -= spin * rk[0] + drift[1];
            }
        };
        project(&now.stations, &mut sv);
        project(&now.outline, &mut ov);
        Deformation {
            stations: now.stations,
            station_velocity: sv,
            outline: now.outline,
            outline_velocity: ov,
            spin,
        }
    }
}

/// Rigid-body state of the fish.
#[derive(Clone, Debug, PartialEq)]
pub struct FishConfiguration {
    /// Centre of mass, grid units.
    pub d: [f64; 2],
    /// Orientation of the body frame; the head points along `theta`.
    pub theta: f64,
    pub v: [f64; 2],
    pub omega: f64,
    pub mass: f64,
    pub inertia: f64,
    /// Counter-rotation keeping the deformation free of angular momentum.
    pub alpha: f64,
}

impl FishConfiguration {
    pub fn at_rest(d: [f64; 2], theta: f64, mass: f64, inertia: f64) -> Self {
        FishConfiguration {
            d,
            theta,
            v: [0.0; 2],
            omega: 0.0,
            mass,
            inertia,
            alpha: 0.0,
        }
    }

    /// Global position of a body-frame point.
    pub fn to_global(&self, r: [f64; 2]) -> [f64; 2] {
        let q = rotate(r, self.theta + self.alpha);
        [self.d[0] + q[0], self.d[1] + q[1]]
    }

    pub fn momentum(&self) -> [f64; 2] {
        [self.mass * self.v[0], self.mass * self.v[1]]
    }
}

/// Net hydrodynamic force, torque about the mass centre, and power.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BodyLoads {
    pub force: [f64; 2],
    pub torque: f64,
    pub power: f64,
}

/// Direct forcing `rho (U_desired - U_interp) / dt` per marker.
pub fn penalty_forcing(
    desired: &[[f64; 2]],
    interpolated: &[[f64; 2]],
    density: &[f64],
    dt: f64,
) -> Vec<[f64; 2]> {
    assert_eq!(desired.len(), interpolated.len());
    assert_eq!(desired.len(), density.len());
    desired
        .iter()
        .zip(interpolated)
        .zip(density)
        .map(|((d, u), rho)| [rho * (d[0] - u[0]) / dt, rho * (d[1] - u[1]) / dt])
        .collect()
}

/// Reaction of the marker forces on the body.
pub fn compute_loads(
    forces: &[[f64; 2]],
    velocities: &[[f64; 2]],
    positions: &[[f64; 2]],
    weights: &[f64],
    d: [f64; 2],
) -> BodyLoads {
    let mut out = BodyLoads::default();
    for k in 0..forces.len() {
        let (f, ds) = (forces[k], weights[k]);
        let r = [positions[k][0] - d[0], positions[k][1] - d[1]];
        out.force[0] -= f[0] * ds;
        out.force[1] -= f[1] * ds;
        out.torque -= cross(r, f) * ds;
        out.power -= (f[0] * velocities[k][0] + f[1] * velocities[k][1]) * ds;
    }
    out
}

/// Symplectic Euler: velocities first, then positions with the new
/// velocities.
pub fn rigid_dynamics_step(cfg: &FishConfiguration, loads: &BodyLoads, dt: f64) -> FishConfiguration {
    let mut next = cfg.clone();
    next.v[0] += loads.force[0] / cfg.mass * dt;
    next.v[1] += loads.force[1] / cfg.mass * dt;
    next.d[0] += next.v[0] * dt;
    next.d[1] += next.v[1] * dt;
    next.omega += loads.torque / cfg.inertia * dt;
    next.theta += next.omega * dt;
    next
}
