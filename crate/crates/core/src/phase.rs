//! Angle wrapping helpers.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_2pi(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_pi(theta: f64) -> f64 {
    let w = wrap_2pi(theta);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Shortest signed angular distance `a − b`, in `(−π, π]`.
pub fn circular_diff(a: f64, b: f64) -> f64 {
    wrap_pi(a - b)
}
