//! Models of the hyperbolic plane and numerically stable distances.
//!
//! Three charts: the unit disk, the upper half-plane, and the logarithmic
//! half-plane chart (u, w) with w = log Im z. All simulation state lives in
//! the log chart; the disk chart is produced only for output and boundary
//! projections, because particles approach the boundary at rates that
//! underflow f64 long before desk-scale horizons are reached.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LN_2: f64 = std::f64::consts::LN_2;
const PI: f64 = std::f64::consts::PI;
const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point ({re}, {im}) lies outside the open unit disk")]
    OutsideDisk { re: f64, im: f64 },
    #[error("point too close to the boundary for the disk chart; stay in log coordinates")]
    OverflowNearBoundary,
}

/// Point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    re: f64,
    im: f64,
}

impl DiskPoint {
    pub const ORIGIN: DiskPoint = DiskPoint { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Result<Self, GeometryError> {
        if !(re * re + im * im < 1.0) || !re.is_finite() || !im.is_finite() {
            return Err(GeometryError::OutsideDisk { re, im });
        }
        Ok(DiskPoint { re, im })
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn norm_sq(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// Point of the upper half-plane in log coordinates: z = u + i e^w.
///
/// w is the stored vertical field; e^w is never materialized except inside
/// chart conversions, so heights like e^(-700) remain exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePoint {
    pub u: f64,
    pub w: f64,
}

impl HalfPlanePoint {
    /// Image of the disk origin: the point i.
    pub const BASE: HalfPlanePoint = HalfPlanePoint { u: 0.0, w: 0.0 };

    pub fn new(u: f64, w: f64) -> Self {
        debug_assert!(u.is_finite() && w.is_finite());
        HalfPlanePoint { u, w }
    }
}

/// Point of the boundary circle, angle normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    angle: f64,
}

impl BoundaryPoint {
    pub fn new(angle: f64) -> Self {
        let mut a = angle.rem_euclid(TAU);
        if a > PI {
            a -= TAU;
        }
        BoundaryPoint { angle: a }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Equality modulo full turns, tolerance 1e-12.
    pub fn approx_eq(&self, other: &BoundaryPoint) -> bool {
        let mut d = (self.angle - other.angle).rem_euclid(TAU);
        if d > PI {
            d -= TAU;
        }
        d.abs() < 1e-12
    }
}

/// Cayley map z -> i(1+z)/(1-z), disk to half-plane, in log coordinates.
pub fn disk_to_halfplane(z: DiskPoint) -> HalfPlanePoint {
    let d = (1.0 - z.re) * (1.0 - z.re) + z.im * z.im;
    let u = -2.0 * z.im / d;
    let v_num = 1.0 - z.norm_sq();
    HalfPlanePoint::new(u, v_num.ln() - d.ln())
}

/// Inverse Cayley map z -> (z-i)/(z+i), half-plane to disk.
///
/// Evaluated with all terms prescaled by max(|u|, e^w, 1) so no intermediate
/// overflows; fails only when the image is not representable strictly inside
/// the disk in f64.
pub fn halfplane_to_disk(p: HalfPlanePoint) -> Result<DiskPoint, GeometryError> {
    if p.w > 709.0 {
        return Err(GeometryError::OverflowNearBoundary);
    }
    let v = p.w.exp();
    let m = p.u.abs().max(v).max(1.0);
    let (us, vs, os) = (p.u / m, v / m, 1.0 / m);
    let den = us * us + (vs + os) * (vs + os);
    let re = (us * us + vs * vs - os * os) / den;
    let im = -2.0 * us * os / den;
    DiskPoint::new(re, im).map_err(|_| GeometryError::OverflowNearBoundary)
}

/// Hyperbolic distance in the disk chart.
///
/// Uses |1 - conj(z) w|^2 - |z - w|^2 = (1-|z|^2)(1-|w|^2) to avoid the
/// cancellation in the textbook quotient when both points sit near the
/// boundary.
pub fn dist_disk(z: DiskPoint, w: DiskPoint) -> f64 {
    let (a, b) = (z.re, z.im);
    let (c, d) = (w.re, w.im);
    // 1 - conj(z) w
    let pr = 1.0 - (a * c + b * d);
    let pi_ = -(a * d - b * c);
    let big = (pr * pr + pi_ * pi_).sqrt();
    let small = (((a - c) * (a - c)) + ((b - d) * (b - d))).sqrt();
    if small == 0.0 {
        return 0.0;
    }
    2.0 * (big + small).ln() - (1.0 - z.norm_sq()).ln() - (1.0 - w.norm_sq()).ln()
}

// log(sinh x) for x > 0 without overflow.
fn ln_sinh(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    x - LN_2 + (-(-2.0 * x).exp()).ln_1p()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Hyperbolic distance in the half-plane, computed entirely in log space.
///
/// With e = 2 sinh^2(dw/2) + du^2 e^-(w1+w2) / 2 the distance is
/// arcosh(1 + e) = log(1 + e + sqrt(e(e+2))); log e is formed by log-sum-exp
/// so points with w ~ -700 still give exact distances.
pub fn dist_halfplane(p: HalfPlanePoint, q: HalfPlanePoint) -> f64 {
    let dw = p.w - q.w;
    let du = p.u - q.u;
    let l_vert = if dw == 0.0 {
        f64::NEG_INFINITY
    } else {
        LN_2 + 2.0 * ln_sinh(dw.abs() / 2.0)
    };
    let l_horiz = if du == 0.0 {
        f64::NEG_INFINITY
    } else {
        2.0 * du.abs().ln() - LN_2 - (p.w + q.w)
    };
    let le = log_add_exp(l_vert, l_horiz);
    if le == f64::NEG_INFINITY {
        return 0.0;
    }
    if le > 350.0 {
        // arcosh(1+e) = log(2e) + O(1/e)
        return LN_2 + le;
    }
    let e = le.exp();
    (e + (e * (e + 2.0)).sqrt()).ln_1p()
}

/// The bounded correction rho(p, i) + w, which tends to log(1 + u^2) as the
/// point falls toward the boundary.
///
/// Closed form log(s + sqrt((u^2 + (1-y)^2)(s + 2y))) - log 2 with y = e^w,
/// s = 1 + u^2 + y^2; the factor u^2 + (1-y)^2 is s - 2y computed without
/// cancellation. For w > 0 the same expression is evaluated scaled by e^-2w.
pub fn rho_minus_log_im(p: HalfPlanePoint) -> f64 {
    let u2 = p.u * p.u;
    if p.w <= 0.0 {
        let y = p.w.exp();
        let s = 1.0 + u2 + y * y;
        let near = u2 + (1.0 - y) * (1.0 - y);
        (s + (near * (s + 2.0 * y)).sqrt()).ln() - LN_2
    } else {
        let yr = (-p.w).exp();
        let s = yr * yr * (1.0 + u2) + 1.0;
        let near = u2 * yr * yr + (1.0 - yr) * (1.0 - yr);
        2.0 * p.w + (s + (near * (s + 2.0 * yr)).sqrt()).ln() - LN_2
    }
}

/// Distance to the reference point i (the disk origin).
pub fn dist_to_base(p: HalfPlanePoint) -> f64 {
    rho_minus_log_im(p) - p.w
}

/// Boundary angle of a disk point; the origin projects to angle 0.
pub fn radial_projection(z: DiskPoint) -> BoundaryPoint {
    BoundaryPoint::new(z.im.atan2(z.re))
}

/// Boundary angle of a half-plane point, stable arbitrarily close to the
/// boundary (no disk materialization).
pub fn radial_projection_halfplane(p: HalfPlanePoint) -> BoundaryPoint {
    if p.w > 709.0 {
        // image approaches +1 from inside
        return BoundaryPoint::new(0.0);
    }
    let v = p.w.exp();
    let m = p.u.abs().max(v).max(1.0);
    let (us, vs, os) = (p.u / m, v / m, 1.0 / m);
    BoundaryPoint::new((-2.0 * us * os).atan2(us * us + vs * vs - os * os))
}

/// 1 - |z|^2 of the disk image of p, in log space. Used by tests that check
/// boundary approach far past f64 disk resolution.
pub fn log_one_minus_norm_sq(p: HalfPlanePoint) -> f64 {
    // 1 - |z|^2 = 4v / (u^2 + (v+1)^2)
    let v = p.w.exp();
    let m = p.u.abs().max(v).max(1.0);
    let (us, vs, os) = (p.u / m, v / m, 1.0 / m);
    let den = us * us + (vs + os) * (vs + os);
    (4.0f64).ln() + p.w - 2.0 * m.ln() - den.ln()
}
