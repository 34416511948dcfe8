//! D2Q9 velocity set.
//!
//! ```text
//!   6   2   5
//!    \  |  /
//!   3 - 0 - 1
//!    /  |  \
//!   7   4   8
//! ```

pub const Q: usize = 9;

/// Lattice speed of sound squared.
pub const CS2: f64 = 1.0 / 3.0;

/// Discrete velocities `c_i` in lattice units.
pub const C: [[i32; 2]; Q] = [
    [0, 0],
    [1, 0],
    [0, 1],
    [-1, 0],
    [0, -1],
    [1, 1],
    [-1, 1],
    [-1, -1],
    [1, -1],
];

/// Weights as integer numerators over 36; used by the rational identity checks.
pub const W36: [i64; Q] = [16, 4, 4, 4, 4, 1, 1, 1, 1];

pub const W: [f64; Q] = [
    4.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

/// Index of `-c_i`.
pub const OPP: [usize; Q] = [0, 3, 4, 1, 2, 7, 8, 5, 6];

/// Index of `c_i` with its y component negated.
pub const MIRROR_Y: [usize; Q] = [0, 1, 4, 3, 2, 8, 7, 6, 5];

/// Index of `c_i` with its x component negated.
pub const MIRROR_X: [usize; Q] = [0, 3, 2, 1, 4, 6, 5, 8, 7];

/// Second-order BGK equilibrium for density `rho` and velocity `u`.
#[inline]
pub fn equilibrium(rho: f64, u: [f64; 2]) -> [f64; Q] {
    let uu = u[0] * u[0] + u[1] * u[1];
    let mut feq = [0.0; Q];
    for i in 0..Q {
        let cu = C[i][0] as f64 * u[0] + C[i][1] as f64 * u[1];
        feq[i] = W[i] * rho * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * uu);
    }
    feq
}

/// Guo forcing source term for body force `g` at velocity `u`, without the
/// `(1 - 1/(2 tau))` prefactor.
#[inline]
pub fn guo_source(u: [f64; 2], g: [f64; 2]) -> [f64; Q] {
    let mut s = [0.0; Q];
    for i in 0..Q {
        let cx = C[i][0] as f64;
        let cy = C[i][1] as f64;
        let cu = cx * u[0] + cy * u[1];
        let ax = 3.0 * (cx - u[0]) + 9.0 * cu * cx;
        let ay = 3.0 * (cy - u[1]) + 9.0 * cu * cy;
        s[i] = W[i] * (ax * g[0] + ay * g[1]);
    }
    s
}
