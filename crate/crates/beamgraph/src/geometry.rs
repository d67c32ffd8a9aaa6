//! Angular computations on the circle: departure angles, beam coverage and
//! beam-overlap conflicts.
//!
//! All angles are degrees. The global frame puts 0° along the +x axis and
//! grows counterclockwise; directions are normalized to [0, 360).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2-D point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A potential beam at a gNB: pointing direction and half-power width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamCandidate {
    pub gnb_id: u32,
    /// Pointing direction in degrees, [0, 360).
    pub direction_deg: f64,
    /// Half-power beamwidth in degrees, > 0.
    pub width_deg: f64,
}

/// Normalize an angle to [0, 360).
pub fn normalize_deg(a: f64) -> f64 {
    let r = a % 360.0;
    if r < 0.0 {
        r + 360.0
    } else {
        r
    }
}

/// Shortest angular distance between two directions, in [0, 180].
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (normalize_deg(a) - normalize_deg(b)).abs();
    d.min(360.0 - d)
}

/// Bearing from `from` towards `to` in the global frame, [0, 360).
///
/// Errors on coincident points, where no direction is defined.
pub fn angle_of_departure(from: &Point, to: &Point) -> Result<f64> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::Geometry(format!(
            "bearing undefined for coincident points ({}, {})",
            from.x, from.y
        )));
    }
    Ok(normalize_deg(dy.atan2(dx).to_degrees()))
}

/// True iff a target at bearing `theta_deg` falls inside the beam's
/// half-power cone (evaluated circularly).
pub fn covers(beam: &BeamCandidate, theta_deg: f64) -> bool {
    circular_distance(theta_deg, beam.direction_deg) <= beam.width_deg / 2.0
}

/// True iff two candidates at the same gNB would overlap when both active.
///
/// Touching beams (angular separation exactly equal to the half-sum of the
/// widths) are allowed. Candidates at different gNBs never conflict.
pub fn conflicts(b1: &BeamCandidate, b2: &BeamCandidate) -> bool {
    b1.gnb_id == b2.gnb_id
        && circular_distance(b1.direction_deg, b2.direction_deg)
            < (b1.width_deg + b2.width_deg) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn circular_distance_examples() {
        assert_eq!(circular_distance(10.0, 350.0), 20.0);
        assert_eq!(circular_distance(90.0, 90.0), 0.0);
        assert_eq!(circular_distance(0.0, 180.0), 180.0);
    }

    #[test]
    fn circular_distance_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let a: f64 = rng.gen_range(-720.0..720.0);
            let b: f64 = rng.gen_range(-720.0..720.0);
            let c: f64 = rng.gen_range(-720.0..720.0);
            let dab = circular_distance(a, b);
            assert!((0.0..=180.0).contains(&dab));
            assert_eq!(dab, circular_distance(b, a));
            // triangle inequality, with a little room for rounding
            assert!(dab <= circular_distance(a, c) + circular_distance(c, b) + 1e-9);
        }
    }

    #[test]
    fn angle_of_departure_examples() {
        let g = Point::new(0.0, 0.0);
        assert_eq!(angle_of_departure(&g, &Point::new(100.0, 0.0)).unwrap(), 0.0);
        assert_eq!(angle_of_departure(&g, &Point::new(0.0, 100.0)).unwrap(), 90.0);
        assert_eq!(
            angle_of_departure(&g, &Point::new(-50.0, -50.0)).unwrap(),
            225.0
        );
        assert!(angle_of_departure(&g, &Point::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn covers_examples() {
        let beam = |d, w| BeamCandidate {
            gnb_id: 0,
            direction_deg: d,
            width_deg: w,
        };
        assert!(covers(&beam(28.0, 5.0), 30.0));
        assert!(covers(&beam(1.0, 10.0), 359.0));
        assert!(!covers(&beam(20.0, 15.0), 30.0));
    }

    #[test]
    fn covers_wraps_modulo_360() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let beam = BeamCandidate {
                gnb_id: 0,
                direction_deg: rng.gen_range(0.0..360.0),
                width_deg: rng.gen_range(1.0..30.0),
            };
            let theta: f64 = rng.gen_range(0.0..360.0);
            let k: f64 = rng.gen_range(-3i32..=3) as f64;
            assert_eq!(covers(&beam, theta), covers(&beam, theta + 360.0 * k));
        }
    }

    #[test]
    fn conflicts_examples() {
        let beam = |g, d, w| BeamCandidate {
            gnb_id: g,
            direction_deg: d,
            width_deg: w,
        };
        // overlapping
        assert!(conflicts(&beam(0, 10.0, 10.0), &beam(0, 18.0, 10.0)));
        // touching beams are allowed
        assert!(!conflicts(&beam(0, 10.0, 10.0), &beam(0, 20.0, 10.0)));
        // different gNBs never conflict
        assert!(!conflicts(&beam(0, 10.0, 10.0), &beam(1, 10.0, 10.0)));
        // identical candidates at the same gNB do conflict
        assert!(conflicts(&beam(0, 45.0, 5.0), &beam(0, 45.0, 5.0)));
    }

    #[test]
    fn conflicts_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let b1 = BeamCandidate {
                gnb_id: rng.gen_range(0..3),
                direction_deg: rng.gen_range(0.0..360.0),
                width_deg: [5.0, 10.0, 15.0][rng.gen_range(0..3)],
            };
            let b2 = BeamCandidate {
                gnb_id: rng.gen_range(0..3),
                direction_deg: rng.gen_range(0.0..360.0),
                width_deg: [5.0, 10.0, 15.0][rng.gen_range(0..3)],
            };
            assert_eq!(conflicts(&b1, &b2), conflicts(&b2, &b1));
        }
    }
}
