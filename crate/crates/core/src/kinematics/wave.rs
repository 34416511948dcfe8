//! Polynomial undulation waveform, one quintic per half cycle.
//!
//! The waveform is called `h` in some write-ups and `p` in others; here it
//! is [`WavePlan::waveform`]. On half cycle `n` it runs over
//! `zeta in [0, lambda_n / 2]` from the previous maximum deflection to the
//! new one with matched slope and curvature, so consecutive half cycles
//! join with C2 continuity.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Parameters of one half cycle and its waveform coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct WavePlan {
    /// Half-cycle index, 1-based.
    pub index: u64,
    pub theta_prev: f64,
    pub theta_next: f64,
    /// Wavelength of the previous half cycle, in body lengths.
    pub lambda_prev: f64,
    /// Wavelength of this half cycle, in body lengths.
    pub lambda: f64,
    /// Full undulation period in ticks.
    pub period: f64,
    /// Start time of this half cycle in ticks.
    pub start: f64,
    pub coeffs: [f64; 6],
}

/// Solves the six end conditions for the quintic coefficients `c_0..c_5`.
pub fn solve_wave_coeffs(
    theta_prev: f64,
    theta_next: f64,
    lambda_prev: f64,
    lambda: f64,
) -> Result<[f64; 6]> {
    if !(lambda_prev > 0.0 && lambda > 0.0) {
        return Err(Error::Domain {
            what: "wavelength",
            value: lambda_prev.min(lambda),
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let z = 0.5 * lambda;
    let k_prev = (2.0 * PI / lambda_prev).powi(2);
    let k_next = (2.0 * PI / lambda).powi(2);
    let mut a = [[0.0; 6]; 6];
    let mut rhs = [0.0; 6];
    // value, slope, curvature at zeta = 0
    a[0][0] = 1.0;
    rhs[0] = theta_prev;
    a[1][1] = 1.0;
    a[2][2] = 2.0;
    rhs[2] = -theta_prev * k_prev;
    // value, slope, curvature at zeta = lambda / 2
    for k in 0..6 {
        let kf = k as f64;
        a[3][k] = z.powi(k as i32);
        if k >= 1 {
            a[4][k] = kf * z.powi(k as i32 - 1);
        }
        if k >= 2 {
            a[5][k] = kf * (kf - 1.0) * z.powi(k as i32 - 2);
        }
    }
    rhs[3] = theta_next;
    rhs[5] = -theta_next * k_next;
    solve_dense(a, rhs)
}

/// Gaussian elimination with partial pivoting.
fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Result<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Singular("waveform constraints"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..N {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}

impl WavePlan {
    pub fn new(
        index: u64,
        theta_prev: f64,
        theta_next: f64,
        lambda_prev: f64,
        lambda: f64,
        period: f64,
        start: f64,
    ) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Domain {
                what: "period",
                value: period,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        let coeffs = solve_wave_coeffs(theta_prev, theta_next, lambda_prev, lambda)?;
        Ok(WavePlan {
            index,
            theta_prev,
            theta_next,
            lambda_prev,
            lambda,
            period,
            start,
            coeffs,
        })
    }

    pub fn end(&self) -> f64 {
        self.start + 0.5 * self.period
    }

    pub fn waveform(&self, zeta: f64) -> f64 {
        let c = &self.coeffs;
        c[0] + zeta * (c[1] + zeta * (c[2] + zeta * (c[3] + zeta * (c[4] + zeta * c[5]))))
    }

    pub fn waveform_d1(&self, zeta: f64) -> f64 {
        let c = &self.coeffs;
        c[1] + zeta * (2.0 * c[2] + zeta * (3.0 * c[3] + zeta * (4.0 * c[4] + zeta * 5.0 * c[5])))
    }

    pub fn waveform_d2(&self, zeta: f64) -> f64 {
        let c = &self.coeffs;
        2.0 * c[2] + zeta * (6.0 * c[3] + zeta * (12.0 * c[4] + zeta * 20.0 * c[5]))
    }

    /// Phase of station `l / L` at time `t` in the waveform's domain.
    pub fn phase(&self, l_over_len: f64, t: f64) -> f64 {
        self.lambda * (t - self.start) / self.period - l_over_len
    }

    /// The six constraint residuals, each relative to `max(1, |theta|)`.
    pub fn residuals(&self) -> [f64; 6] {
        let z = 0.5 * self.lambda;
        let kp = (2.0 * PI / self.lambda_prev).powi(2);
        let kn = (2.0 * PI / self.lambda).powi(2);
        let sp = self.theta_prev.abs().max(1.0);
        let sn = self.theta_next.abs().max(1.0);
        [
            (self.waveform(0.0) - self.theta_prev).abs() / sp,
            self.waveform_d1(0.0).abs() / sp,
            (self.waveform_d2(0.0) + self.theta_prev * kp).abs() / (sp * kp.max(1.0)),
            (self.waveform(z) - self.theta_next).abs() / sn,
            self.waveform_d1(z).abs() / sn,
            (self.waveform_d2(z) + self.theta_next * kn).abs() / (sn * kn.max(1.0)),
        ]
    }
}

/// Deflection angle of station `l / L` at time `t` under a single plan:
/// linear envelope in `l / L` times the waveform at the travelling phase.
pub fn deflection_angle(l_over_len: f64, t: f64, plan: &WavePlan) -> f64 {
    l_over_len * plan.waveform(plan.phase(l_over_len, t))
}

/// The sequence of half-cycle plans driving the body.
///
/// A station at `l / L` lags the head by `(l / L) T / lambda` ticks, so
/// stations towards the tail still follow earlier half cycles.
#[derive(Clone, Debug)]
pub struct Gait {
    /// Deflection held before the first half cycle.
    pub initial_theta: f64,
    pub lambda: f64,
    pub period: f64,
    plans: Vec<WavePlan>,
    next_index: u64,
    next_start: f64,
}

impl Gait {
    pub fn new(lambda: f64, period: f64) -> Result<Self> {
        if !(lambda > 0.0 && period > 0.0) {
            return Err(Error::Config(format!(
                "gait needs positive wavelength and period (got {lambda}, {period})"
            )));
        }
        Ok(Gait {
            initial_theta: 0.0,
            lambda,
            period,
            plans: Vec::new(),
            next_index: 1,
            next_start: 0.0,
        })
    }

    /// Deflection reached at the end of the most recent half cycle.
    pub fn last_theta(&self) -> f64 {
        self.plans.last().map_or(self.initial_theta, |p| p.theta_next)
    }

    /// Number of half cycles installed so far.
    pub fn half_cycles(&self) -> u64 {
        self.next_index - 1
    }

    pub fn current(&self) -> Option<&WavePlan> {
        self.plans.last()
    }

    /// Appends the next half cycle, ending at deflection `theta_next`.
    /// Starts at `sum_{k<n} T_k / 2`.
    pub fn push(&mut self, theta_next: f64) -> Result<&WavePlan> {
        let plan = WavePlan::new(
            self.next_index,
            self.last_theta(),
            theta_next,
            self.lambda,
            self.lambda,
            self.period,
            self.next_start,
        )?;
        self.next_index += 1;
        self.next_start = plan.end();
        self.plans.push(plan);
        Ok(self.plans.last().unwrap())
    }

    /// Drops half cycles that no station can see at time `t` or later,
    /// keeping one extra period of history.
    pub fn forget_before(&mut self, t: f64) {
        let horizon = t - self.period / self.lambda - self.period;
        let drop = self.plans.iter().take_while(|p| p.end() < horizon).count();
        if drop > 0 && drop < self.plans.len() {
            self.plans.drain(..drop);
        }
    }

    /// Plan active at retarded time `tr`, if any.
    fn plan_at(&self, tr: f64) -> Option<&WavePlan> {
        let first = self.plans.first()?;
        if tr < first.start {
            return None;
        }
        Some(
            self.plans
                .iter()
                .rev()
                .find(|p| p.start <= tr)
                .unwrap_or(first),
        )
    }

    /// `(theta, d theta / dt, d2 theta / dt2)` at station `l / L`.
    pub fn deflection_with_rates(&self, l_over_len: f64, t: f64) -> [f64; 3] {
        let tr = t - l_over_len * self.period / self.lambda;
        match self.plan_at(tr) {
            None => [l_over_len * self.initial_theta, 0.0, 0.0],
            Some(plan) => {
                let rate = plan.lambda / plan.period;
                let zeta = plan.lambda * (tr - plan.start) / plan.period;
                if zeta > 0.5 * plan.lambda {
                    return [l_over_len * plan.theta_next, 0.0, 0.0];
                }
                [
                    l_over_len * plan.waveform(zeta),
                    l_over_len * plan.waveform_d1(zeta) * rate,
                    l_over_len * plan.waveform_d2(zeta) * rate * rate,
                ]
            }
        }
    }

    pub fn deflection(&self, l_over_len: f64, t: f64) -> f64 {
        self.deflection_with_rates(l_over_len, t)[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent route: c0..c2 follow directly from the zeta = 0
    /// conditions; the remaining 3x3 system is solved by Cramer's rule.
    fn oracle(tp: f64, tn: f64, lp: f64, ln: f64) -> [f64; 6] {
        let z = ln / 2.0;
        let c0 = tp;
        let c1 = 0.0;
        let c2 = -tp * (2.0 * PI / lp).powi(2) / 2.0;
        let r0 = tn - (c0 + c1 * z + c2 * z * z);
        let r1 = -(c1 + 2.0 * c2 * z);
        let r2 = -tn * (2.0 * PI / ln).powi(2) - 2.0 * c2;
        let m = [
            [z.powi(3), z.powi(4), z.powi(5)],
            [3.0 * z * z, 4.0 * z.powi(3), 5.0 * z.powi(4)],
            [6.0 * z, 12.0 * z * z, 20.0 * z.powi(3)],
        ];
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(m);
        let r = [r0, r1, r2];
        let mut out = [c0, c1, c2, 0.0, 0.0, 0.0];
        for col in 0..3 {
            let mut mc = m;
            for row in 0..3 {
                mc[row][col] = r[row];
            }
            out[3 + col] = det(mc) / d;
        }
        out
    }

    #[test]
    fn zero_amplitudes_give_zero_polynomial() {
        assert_eq!(solve_wave_coeffs(0.0, 0.0, 1.0, 1.0).unwrap(), [0.0; 6]);
    }

    #[test]
    fn matches_cramer_oracle_and_satisfies_constraints() {
        let c = solve_wave_coeffs(0.3, 0.3, 1.0, 1.0).unwrap();
        let o = oracle(0.3, 0.3, 1.0, 1.0);
        for k in 0..6 {
            assert!((c[k] - o[k]).abs() <= 1e-9 * o[k].abs().max(1.0), "c{k}: {} vs {}", c[k], o[k]);
        }
        let plan = WavePlan::new(1, 0.3, 0.3, 1.0, 1.0, 100.0, 0.0).unwrap();
        assert!(plan.residuals().iter().all(|r| *r < 1e-10), "{:?}", plan.residuals());
    }

    #[test]
    fn alternating_plan_approximates_cosine() {
        let plan = WavePlan::new(1, 0.4, -0.4, 1.0, 1.0, 100.0, 0.0).unwrap();
        for k in 0..=50 {
            let z = 0.5 * k as f64 / 50.0;
            let err = (plan.waveform(z) - 0.4 * (2.0 * PI * z).cos()).abs();
            assert!(err < 0.01, "zeta {z}: {err}");
        }
    }

    #[test]
    fn nonpositive_wavelength_is_rejected() {
        assert!(solve_wave_coeffs(0.1, 0.2, 0.0, 1.0).is_err());
        assert!(solve_wave_coeffs(0.1, 0.2, 1.0, -1.0).is_err());
    }

    #[test]
    fn head_never_deflects() {
        let plan = WavePlan::new(1, 0.2, -0.5, 1.0, 1.0, 80.0, 0.0).unwrap();
        for t in 0..40 {
            assert_eq!(deflection_angle(0.0, t as f64, &plan), 0.0);
        }
        let flat = WavePlan::new(1, 0.0, 0.0, 1.0, 1.0, 80.0, 0.0).unwrap();
        assert_eq!(deflection_angle(0.7, 13.0, &flat), 0.0);
    }

    #[test]
    fn single_plan_formula_agrees_with_gait_for_head_window() {
        let mut g = Gait::new(1.0, 80.0).unwrap();
        g.push(0.3).unwrap();
        let plan = g.push(-0.3).unwrap().clone();
        for t in [40.0, 50.0, 79.0] {
            assert!((g.deflection(0.0, t) - deflection_angle(0.0, t, &plan)).abs() < 1e-15);
            // a station inside the same half cycle
            let s = 0.05;
            if plan.phase(s, t) >= 0.0 {
                assert!((g.deflection(s, t) - deflection_angle(s, t, &plan)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tail_amplitude_stays_near_cap_over_a_cycle() {
        let mut g = Gait::new(1.0, 100.0).unwrap();
        for n in 0..8 {
            g.push(if n % 2 == 0 { 0.5 } else { -0.5 }).unwrap();
        }
        let max = (200..=300)
            .map(|t| g.deflection(1.0, t as f64).abs())
            .fold(0.0, f64::max);
        assert!(max >= 0.5 - 1e-9 && max < 0.5 * 1.05, "max tail deflection {max}");
    }

    #[test]
    fn gait_drops_stale_plans() {
        let mut g = Gait::new(1.0, 10.0).unwrap();
        for n in 0..100 {
            g.push(if n % 2 == 0 { 0.3 } else { -0.3 }).unwrap();
            g.forget_before(5.0 * n as f64);
        }
        let kept = g.plans.len();
        assert!(kept < 10, "{kept}");
        let probe = g.deflection(1.0, 490.0);
        g.forget_before(495.0);
        assert_eq!(g.deflection(1.0, 490.0), probe);
        assert_eq!(g.half_cycles(), 100);
        assert_eq!(g.current().unwrap().start, 99.0 * 5.0);
    }

    #[test]
    fn half_cycle_joins_are_c2_at_every_station() {
        let mut g = Gait::new(1.0, 90.0).unwrap();
        for a in [0.5, -0.25, 0.0, 0.4, -0.5, 0.5, 0.25, -0.1] {
            g.push(a).unwrap();
        }
        let eps = 1e-9;
        for n in 1..8 {
            let boundary = 45.0 * n as f64;
            for k in 0..=20 {
                let s = k as f64 / 20.0;
                let t = boundary + s * g.period / g.lambda;
                let right = g.deflection_with_rates(s, t);
                let left = g.deflection_with_rates(s, t - eps);
                for d in 0..3 {
                    assert!(
                        (right[d] - left[d]).abs() < 1e-8,
                        "join {n}, s {s}, derivative {d}: {} vs {}",
                        left[d],
                        right[d]
                    );
                }
            }
        }
    }

    #[test]
    fn steady_gait_becomes_periodic() {
        let period = 60.0;
        let mut g = Gait::new(1.0, period).unwrap();
        for n in 0..30 {
            g.push(if n % 2 == 0 { 0.3 } else { -0.3 }).unwrap();
        }
        for k in 0..=10 {
            let s = k as f64 / 10.0;
            for t in [700.0, 717.5, 741.0] {
                let a = g.deflection(s, t);
                assert!((a - g.deflection(s, t + period)).abs() < 1e-6);
                assert!((a - g.deflection(s, t + 2.0 * period)).abs() < 1e-6);
            }
        }
    }
}
