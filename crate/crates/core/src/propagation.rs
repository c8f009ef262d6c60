//! Straight-ray propagation through a layered dielectric medium.
//!
//! A path between two points is split wherever it crosses a slab face. Each
//! piece accrues phase according to its optical length `l·sqrt(εr)` and
//! loses power at the slab's dB/m rate. Free-space spreading is added once for
//! the whole geometric length. Refraction is not modeled.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::model::{AntennaPattern, AntennaSpec, Frequency, MediumStack, Position, TissueSlab};
use crate::model::SPEED_OF_LIGHT;

/// Lowest gain a horn pattern reports, dB.
pub const HORN_FLOOR_DB: f64 = -30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSegment<'m> {
    pub length: f64,
    pub slab: &'m TissueSlab,
}

/// Segments of a straight path, ordered from source to destination.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSegments<'m> {
    pub segments: Vec<PathSegment<'m>>,
}

impl PathSegments<'_> {
    pub fn geometric_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }
}

/// Parameter interval `[t0, t1]` over which `a + t·d` lies inside `aabb`.
fn clip_to_box(a: Position, d: Position, min: Position, max: Position) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (o, dir, lo, hi) in [
        (a.x, d.x, min.x, max.x),
        (a.y, d.y, min.y, max.y),
        (a.z, d.z, min.z, max.z),
    ] {
        if dir == 0.0 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let (ta, tb) = ((lo - o) / dir, (hi - o) / dir);
            let (near, far) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(near);
            t1 = t1.min(far);
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

/// Splits the segment `a → b` at every slab face it crosses and labels each
/// piece by the material at its midpoint.
pub fn trace_path<'m>(medium: &'m MediumStack, a: Position, b: Position) -> Result<PathSegments<'m>> {
    let d = b - a;
    let total = d.norm();
    if total == 0.0 {
        return Err(Error::DegeneratePath);
    }

    let mut cuts = vec![0.0, 1.0];
    for slab in &medium.slabs {
        if let Some((t0, t1)) = clip_to_box(a, d, slab.extent.min, slab.extent.max) {
            cuts.extend([t0, t1].into_iter().filter(|t| *t > 0.0 && *t < 1.0));
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut segments: Vec<PathSegment<'m>> = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let length = (w[1] - w[0]) * total;
        if length <= 0.0 {
            continue;
        }
        let mid = a + d * (0.5 * (w[0] + w[1]));
        let slab = medium.material_at(mid);
        match segments.last_mut() {
            Some(last) if std::ptr::eq(last.slab, slab) => last.length += length,
            _ => segments.push(PathSegment { length, slab }),
        }
    }
    Ok(PathSegments { segments })
}

/// Optical path length `Σ l·sqrt(εr)`, meters.
pub fn effective_distance(segs: &PathSegments<'_>) -> f64 {
    segs.segments
        .iter()
        .map(|s| s.length * s.slab.rel_permittivity.sqrt())
        .sum()
}

/// Phase accrued over an effective distance, wrapped to `[0, 2π)`.
pub fn path_phase(f: Frequency, d_eff: f64) -> f64 {
    // work in cycles so the wrap only discards whole turns
    let cycles = f.hz() * d_eff / SPEED_OF_LIGHT;
    let frac = cycles - cycles.floor();
    let phase = TAU * frac;
    if phase >= TAU {
        0.0
    } else {
        phase
    }
}

/// Free-space spreading loss `20·log10(4π·d·f/c)`, clamped at 0 dB.
pub fn spreading_loss_db(d_geom: f64, f: Frequency) -> f64 {
    (20.0 * (4.0 * PI * d_geom * f.hz() / SPEED_OF_LIGHT).log10()).max(0.0)
}

/// Tissue absorption plus free-space spreading along the path, dB.
pub fn path_attenuation_db(segs: &PathSegments<'_>, f: Frequency) -> f64 {
    let tissue: f64 = segs
        .segments
        .iter()
        .map(|s| s.length * s.slab.atten_db_per_m(f))
        .sum();
    tissue + spreading_loss_db(segs.geometric_length(), f)
}

/// Antenna pattern gain toward `toward`, dB in `[−30, 0]`.
///
/// Horns roll off as a Gaussian in angle: `−3·(θ / θ½)²` dB, where `θ½` is
/// half the half-power beamwidth.
pub fn pattern_gain_db(ant: &AntennaSpec, toward: Position) -> f64 {
    match ant.pattern {
        AntennaPattern::Omnidirectional => 0.0,
        AntennaPattern::Horn {
            boresight,
            beamwidth_deg,
        } => {
            let dir = toward - ant.position;
            let n = dir.norm();
            if n == 0.0 {
                return 0.0;
            }
            let cos = (dir.dot(boresight) / (n * boresight.norm())).clamp(-1.0, 1.0);
            let theta = cos.acos().to_degrees();
            let ratio = theta / (0.5 * beamwidth_deg);
            (-3.0 * ratio * ratio).max(HORN_FLOOR_DB)
        }
    }
}
