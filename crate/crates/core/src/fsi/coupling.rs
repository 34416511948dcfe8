use super::body::{compute_loads, penalty_forcing, rigid_dynamics_step, rotate, BodyLoads, Deformation, FishConfiguration, Kinematics};
use super::kernel::{interpolate_density, interpolate_with, spread_with, stencils, Stencil};
use crate::error::{Error, Result};
use crate::lbm::{FlowSolver, ForceField};

/// Per-tick record of the coupling.
#[derive(Clone, Debug, Default)]
pub struct TickReport {
    pub loads: BodyLoads,
    /// Mean marker slip before the first forcing pass and after the last.
    pub slip_before: f64,
    pub slip_after: f64,
}

/// A swimming fish immersed in a flow solver.
#[derive(Clone, Debug)]
pub struct Swimmer {
    pub flow: FlowSolver,
    pub kinematics: Kinematics,
    pub body: FishConfiguration,
    /// Time on the gait clock, in ticks.
    pub t: f64,
    pub sub_iterations: usize,
    pass_force: ForceField,
}

impl Swimmer {
    /// Places the fish with its mass centre at `d` and heading `theta`,
    /// at rest, with the gait clock at zero.
    pub fn new(flow: FlowSolver, kinematics: Kinematics, d: [f64; 2], theta: f64, sub_iterations: usize) -> Result<Self> {
        if sub_iterations == 0 {
            return Err(Error::Config("fsi needs at least one forcing pass per tick".into()));
        }
        let (mass, inertia) = kinematics.mass_properties(1.0);
        let pass_force = ForceField::zeros(flow.nx(), flow.ny());
        Ok(Swimmer {
            flow,
            kinematics,
            body: FishConfiguration::at_rest(d, theta, mass, inertia),
            t: 0.0,
            sub_iterations,
            pass_force,
        })
    }

    pub fn deformation(&self) -> Deformation {
        self.kinematics.deformation(self.t)
    }

    /// Current outline markers in grid coordinates.
    pub fn markers(&self) -> Vec<[f64; 2]> {
        self.deformation().outline.iter().map(|p| self.body.to_global(*p)).collect()
    }

    /// Head tip in grid coordinates.
    pub fn head(&self) -> [f64; 2] {
        self.body.to_global(self.deformation().stations[0])
    }

    /// Whether any marker's kernel support touches a solid cell.
    pub fn touches_solid(&self) -> Result<bool> {
        let g = &self.flow.geometry;
        let st = stencils(&self.markers(), g.nx, g.ny)?;
        let mut hit = false;
        for s in &st {
            s.for_each(g.nx, |c, _| hit |= g.solid_mask()[c]);
        }
        Ok(hit)
    }

    fn desired(&self, def: &Deformation, markers: &[[f64; 2]], v: [f64; 2], omega: f64) -> Vec<[f64; 2]> {
        let phi = self.body.theta + self.body.alpha;
        markers
            .iter()
            .zip(&def.outline_velocity)
            .map(|(x, u)| {
                let r = [x[0] - self.body.d[0], x[1] - self.body.d[1]];
                let u = rotate(*u, phi);
                [v[0] - omega * r[1] + u[0], v[1] + omega * r[0] + u[1]]
            })
            .collect()
    }

    /// One coupled tick: forcing passes that solve the body velocity
    /// together with the marker forces, then the fluid tick and the rigid
    /// update.
    pub fn tick(&mut self) -> Result<TickReport> {
        let def = self.deformation();
        let markers: Vec<[f64; 2]> = def.outline.iter().map(|p| self.body.to_global(*p)).collect();
        let weights = outline_weights(&markers);
        let (nx, ny) = (self.flow.nx(), self.flow.ny());
        let st = stencils(&markers, nx, ny)?;

        self.flow.update_macros()?;
        let rho = interpolate_density(&st, &self.flow.macros);
        let d = self.body.d;
        let r: Vec<[f64; 2]> = markers.iter().map(|x| [x[0] - d[0], x[1] - d[1]]).collect();
        let (m, inertia) = (self.body.mass, self.body.inertia);

        // Constant part of the 3x3 system for (V, omega).
        let mut a = 0.0;
        let mut ax = 0.0;
        let mut ay = 0.0;
        let mut arr = 0.0;
        for k in 0..markers.len() {
            let w = rho[k] * weights[k];
            a += w;
            ax += w * r[k][0];
            ay += w * r[k][1];
            arr += w * (r[k][0] * r[k][0] + r[k][1] * r[k][1]);
        }
        let sys = [
            [m + a, 0.0, -ay],
            [0.0, m + a, ax],
            [-ay, ax, inertia + arr],
        ];

        let mut v = self.body.v;
        let mut omega = self.body.omega;
        let mut total = vec![[0.0; 2]; markers.len()];
        let mut report = TickReport::default();
        let mut desired = Vec::new();
        for pass in 0..self.sub_iterations {
            let u = interpolate_with(&st, &self.flow.macros);
            let zero_rigid = self.desired(&def, &markers, [0.0; 2], 0.0);
            // c_k = u_def - U_interp
            let (mut bx, mut by, mut bw) = (m * v[0], m * v[1], inertia * omega);
            for k in 0..markers.len() {
                let w = rho[k] * weights[k];
                let c = [zero_rigid[k][0] - u[k][0], zero_rigid[k][1] - u[k][1]];
                bx -= w * c[0];
                by -= w * c[1];
                bw -= w * (r[k][0] * c[1] - r[k][1] * c[0]);
            }
            let sol = solve3(sys, [bx, by, bw])?;
            v = [sol[0], sol[1]];
            omega = sol[2];
            desired = self.desired(&def, &markers, v, omega);
            let slip = mean_slip(&desired, &u);
            if pass == 0 {
                report.slip_before = slip;
            }
            let f = penalty_forcing(&desired, &u, &rho, 1.0);
            self.pass_force.clear();
            spread_with(&st, &f, &weights, &mut self.pass_force);
            self.flow.macros.apply_force(&self.pass_force);
            for (t, fk) in total.iter_mut().zip(&f) {
                t[0] += fk[0];
                t[1] += fk[1];
            }
        }
        report.slip_after = mean_slip(&desired, &interpolate_with(&st, &self.flow.macros));

        self.flow.advance()?;
        report.loads = compute_loads(&total, &desired, &markers, &weights, d);
        let alpha = self.body.alpha - def.spin;
        self.body = rigid_dynamics_step(&self.body, &report.loads, 1.0);
        self.body.alpha = alpha;
        self.t += 1.0;
        if !(self.body.d.iter().all(|x| x.is_finite()) && self.body.theta.is_finite()) {
            return Err(Error::Diverged {
                tick: self.flow.tick(),
                reason: "non-finite body state".into(),
            });
        }
        Ok(report)
    }

    /// Fluid plus body linear momentum.
    pub fn total_momentum(&self) -> [f64; 2] {
        let f = self.flow.field.total_momentum();
        let b = self.body.momentum();
        [f[0] + b[0], f[1] + b[1]]
    }
}

fn outline_weights(points: &[[f64; 2]]) -> Vec<f64> {
    let n = points.len();
    let seg = |k: usize| {
        let (a, b) = (points[k], points[(k + 1) % n]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    };
    (0..n).map(|k| 0.5 * (seg((k + n - 1) % n) + seg(k))).collect()
}

fn mean_slip(desired: &[[f64; 2]], u: &[[f64; 2]]) -> f64 {
    let s: f64 = desired
        .iter()
        .zip(u)
        .map(|(d, u)| (d[0] - u[0]).hypot(d[1] - u[1]))
        .sum();
    s / desired.len().max(1) as f64
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Result<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return Err(Error::Singular("body velocity update"));
    }
    let mut x = [0.0; 3];
    for col in 0..3 {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        x[col] = det(&m) / d;
    }
    Ok(x)
}

/// Forcing passes for a body held at prescribed marker velocities, with
/// no body dynamics. Returns the slip measured before each pass and
/// after the last one, and leaves the force in `flow.macros`.
pub fn prescribed_forcing(
    flow: &mut FlowSolver,
    markers: &[[f64; 2]],
    desired: &[[f64; 2]],
    passes: usize,
) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    let weights = outline_weights(markers);
    let st: Vec<Stencil> = stencils(markers, flow.nx(), flow.ny())?;
    let rho = interpolate_density(&st, &flow.macros);
    let mut g = ForceField::zeros(flow.nx(), flow.ny());
    let mut slips = Vec::with_capacity(passes + 1);
    let mut total = vec![[0.0; 2]; markers.len()];
    for _ in 0..passes {
        let u = interpolate_with(&st, &flow.macros);
        slips.push(mean_slip(desired, &u));
        let f = penalty_forcing(desired, &u, &rho, 1.0);
        g.clear();
        spread_with(&st, &f, &weights, &mut g);
        flow.macros.apply_force(&g);
        for (t, fk) in total.iter_mut().zip(&f) {
            t[0] += fk[0];
            t[1] += fk[1];
        }
    }
    slips.push(mean_slip(desired, &interpolate_with(&st, &flow.macros)));
    let per_marker = total
        .iter()
        .zip(&weights)
        .map(|(f, w)| [f[0] * w, f[1] * w])
        .collect();
    Ok((slips, per_marker))
}
