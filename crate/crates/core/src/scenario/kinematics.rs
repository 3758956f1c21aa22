use std::f64::consts::PI;

use super::StateVector;
use crate::{Error, Result};

/// Maximum longitudinal acceleration, m/s^2.
pub const LONG_ACCEL_MAX: f64 = 4.5;
/// Maximum longitudinal deceleration (magnitude), m/s^2.
pub const LONG_DECEL_MAX: f64 = 9.0;
/// Maximum lateral acceleration, m/s^2.
pub const LAT_ACCEL_MAX: f64 = 7.0;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// One constant-acceleration, constant-curvature step of a point vehicle.
///
/// Speed stops at zero (no reversing). The path is a circular arc of the travelled
/// length, so position is exact for any speed profile. The lateral acceleration
/// `v^2 * curvature` is checked at the larger of the start and end speeds.
pub fn propagate(state: &StateVector, accel: f64, curvature: f64, dt: f64) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let v0 = state.v;
    let (v1, arc_len) = if accel < 0.0 && v0 + accel * dt < 0.0 {
        // stops within the step
        (0.0, -v0 * v0 / (2.0 * accel))
    } else {
        (v0 + accel * dt, v0 * dt + 0.5 * accel * dt * dt)
    };
    let v_peak = v0.max(v1);
    let lateral = v_peak * v_peak * curvature.abs();
    if lateral > LAT_ACCEL_MAX * (1.0 + 1e-12) {
        return Err(Error::LateralLimit {
            curvature,
            speed: v_peak,
            lateral,
            limit: LAT_ACCEL_MAX,
        });
    }
    let psi0 = state.psi;
    let dpsi = curvature * arc_len;
    let (dx, dy) = if dpsi.abs() < 1e-12 {
        (arc_len * psi0.cos(), arc_len * psi0.sin())
    } else {
        (
            ((psi0 + dpsi).sin() - psi0.sin()) / curvature,
            (psi0.cos() - (psi0 + dpsi).cos()) / curvature,
        )
    };
    Ok(StateVector {
        x: state.x + dx,
        y: state.y + dy,
        v: v1,
        psi: normalize_angle(psi0 + dpsi),
        m_ego: state.m_ego,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cruise_straight() {
        let s = StateVector::new(1.0, 2.0, 10.0, 0.0);
        let n = propagate(&s, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(n, StateVector::new(11.0, 2.0, 10.0, 0.0));
    }

    #[test]
    fn full_braking_stops_early() {
        let s = StateVector::new(0.0, 0.0, 10.0, 0.0);
        let n = propagate(&s, -9.0, 0.0, 2.0).unwrap();
        assert_eq!(n.v, 0.0);
        assert!((n.x - 100.0 / 18.0).abs() < 1e-12);
    }

    #[test]
    fn lateral_limit_boundary() {
        let s = StateVector::new(0.0, 0.0, 10.0, 0.0);
        let k = 7.0 / 100.0;
        assert!(propagate(&s, 0.0, k, 0.1).is_ok());
        assert!(propagate(&s, 0.0, -k, 0.1).is_ok());
        assert!(matches!(
            propagate(&s, 0.0, k * 1.001, 0.1),
            Err(Error::LateralLimit { .. })
        ));
        // accelerating raises the end speed above the bound
        assert!(propagate(&s, 1.0, k, 0.1).is_err());
    }

    #[test]
    fn quarter_circle() {
        let r = 20.0;
        let v = 10.0;
        let s = StateVector::new(0.0, 0.0, v, 0.0);
        let t = (PI / 2.0) * r / v;
        let n = propagate(&s, 0.0, 1.0 / r, t).unwrap();
        assert!((n.x - r).abs() < 1e-9 && (n.y - r).abs() < 1e-9);
        assert!((n.psi - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_step() {
        let s = StateVector::new(0.0, 0.0, 1.0, 0.0);
        assert!(propagate(&s, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn angle_normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn straight_keeps_heading(v in 0.0..20.0f64, a in -9.0..4.5f64, psi in -3.1..3.1f64, dt in 0.01..3.0f64) {
            let s = StateVector::new(0.0, 0.0, v, psi);
            let n = propagate(&s, a, 0.0, dt).unwrap();
            prop_assert_eq!(n.psi, s.psi);
            prop_assert!(n.v >= 0.0);
        }

        #[test]
        fn coasting_keeps_speed(v in 0.1..20.0f64, psi in -3.1..3.1f64, dt in 0.01..3.0f64, k in -0.01..0.01f64) {
            let s = StateVector::new(0.0, 0.0, v, psi);
            let n = propagate(&s, 0.0, k, dt).unwrap();
            prop_assert_eq!(n.v, v);
        }
    }
}
