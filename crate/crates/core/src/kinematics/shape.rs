use crate::error::{Error, Result};

const WIDTH_COEFFS: [f64; 5] = [0.2610, -0.3112, 0.1371, -0.0791, -0.0078];

/// Body half-width `w / L` at the arc-length fraction `l / L`, clamped
/// below at zero.
pub fn half_width(l_over_len: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&l_over_len) {
        return Err(Error::Domain {
            what: "l/L",
            value: l_over_len,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let s = l_over_len;
    let [a, b, c, d, e] = WIDTH_COEFFS;
    let w = a * s.sqrt() + s * (b + s * (c + s * (d + s * e)));
    Ok(w.max(0.0))
}

/// Body length and the arc-length stations used for the midline.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyShape {
    /// Body length in grid cells.
    pub length: f64,
    /// Arc lengths `l_k` in cells, uniform on `[0, L]`, head first.
    pub stations: Vec<f64>,
}

impl BodyShape {
    pub fn new(length: f64, station_count: usize) -> Result<Self> {
        if !(length > 0.0) || station_count < 2 {
            return Err(Error::Config(format!(
                "body needs positive length and >= 2 stations (got L = {length}, n = {station_count})"
            )));
        }
        let n = station_count - 1;
        let stations = (0..=n).map(|k| length * k as f64 / n as f64).collect();
        Ok(BodyShape { length, stations })
    }

    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    /// Half-width in cells at each station.
    pub fn half_widths(&self) -> Vec<f64> {
        self.stations
            .iter()
            .map(|l| self.length * half_width((l / self.length).min(1.0)).unwrap_or(0.0))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Term-by-term evaluation with explicit powers.
    fn oracle(s: f64) -> f64 {
        0.2610 * s.powf(0.5) - 0.3112 * s + 0.1371 * s.powi(2) - 0.0791 * s.powi(3)
            - 0.0078 * s.powi(4)
    }

    #[test]
    fn closes_at_head_and_tail() {
        assert_eq!(half_width(0.0).unwrap(), 0.0);
        assert!(half_width(1.0).unwrap().abs() < 1e-4);
    }

    #[test]
    fn quarter_length_value() {
        // 0.1305 - 0.0778 + 0.00856875 - 0.0012359375 - 0.000030468750
        let expected = 0.060_002_343_75;
        assert!((half_width(0.25).unwrap() - expected).abs() < 1e-12);
        assert!((oracle(0.25) - expected).abs() < 1e-12);
    }

    #[test]
    fn positive_in_the_interior_and_matches_oracle() {
        for k in 1..1000 {
            let s = k as f64 / 1000.0;
            let w = half_width(s).unwrap();
            assert!(w > 0.0, "w({s}) = {w}");
            assert!((w - oracle(s).max(0.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn outside_unit_interval_is_a_domain_error() {
        assert!(matches!(half_width(-0.01), Err(Error::Domain { .. })));
        assert!(matches!(half_width(1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn stations_cover_the_body() {
        let b = BodyShape::new(40.0, 101).unwrap();
        assert_eq!(b.stations[0], 0.0);
        assert_eq!(*b.stations.last().unwrap(), 40.0);
        let w = b.half_widths();
        assert_eq!(w[0], 0.0);
        assert!(w[100].abs() < 1e-4 * 40.0);
    }
}
