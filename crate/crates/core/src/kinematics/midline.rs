use super::shape::BodyShape;
use super::wave::Gait;

/// Midline in the local frame: deflection angle, lateral and axial
/// coordinates at each station.
#[derive(Clone, Debug, PartialEq)]
pub struct MidlineState {
    pub stations: Vec<f64>,
    pub theta: Vec<f64>,
    pub lateral: Vec<f64>,
    pub axial: Vec<f64>,
}

impl MidlineState {
    /// Integrates `(cos theta, sin theta)` along arc length with the
    /// trapezoid rule, each segment rescaled to its arc length so the
    /// reconstructed curve has exactly the body length.
    pub fn from_angles(stations: &[f64], theta: &[f64]) -> Self {
        assert_eq!(stations.len(), theta.len());
        let n = stations.len();
        let mut lateral = vec![0.0; n];
        let mut axial = vec![0.0; n];
        if n > 0 {
            axial[0] = stations[0];
        }
        for k in 1..n {
            let dl = stations[k] - stations[k - 1];
            let cx = 0.5 * (theta[k - 1].cos() + theta[k].cos());
            let sy = 0.5 * (theta[k - 1].sin() + theta[k].sin());
            let norm = cx.hypot(sy);
            let (ux, uy) = if norm > 0.0 { (cx / norm, sy / norm) } else { (1.0, 0.0) };
            axial[k] = axial[k - 1] + dl * ux;
            lateral[k] = lateral[k - 1] + dl * uy;
        }
        MidlineState {
            stations: stations.to_vec(),
            theta: theta.to_vec(),
            lateral,
            axial,
        }
    }

    pub fn arc_length(&self) -> f64 {
        (1..self.axial.len())
            .map(|k| (self.axial[k] - self.axial[k - 1]).hypot(self.lateral[k] - self.lateral[k - 1]))
            .sum()
    }
}

/// Midline of `shape` under `gait` at time `t` (ticks).
pub fn midline(t: f64, gait: &Gait, shape: &BodyShape) -> MidlineState {
    let theta: Vec<f64> = shape
        .stations
        .iter()
        .map(|l| gait.deflection(l / shape.length, t))
        .collect();
    MidlineState::from_angles(&shape.stations, &theta)
}
