//! Poisson kernel of the disk, arc masses of harmonic measure, and the
//! closed-form tail ceilings used by the statistical tests.

use crate::geometry::{BoundaryPoint, DiskPoint};

const PI: f64 = std::f64::consts::PI;
const TAU: f64 = std::f64::consts::TAU;

/// Poisson kernel (1 - |z0|^2) / |xi - z0|^2.
pub fn poisson_kernel(z0: DiskPoint, xi: BoundaryPoint) -> f64 {
    let dx = xi.angle().cos() - z0.re();
    let dy = xi.angle().sin() - z0.im();
    (1.0 - z0.norm_sq()) / (dx * dx + dy * dy)
}

// Antiderivative of the normalized kernel for a real center r in [0, 1):
// F(phi) = phi / 2pi + atan(r sin phi / (1 - r cos phi)) / pi. Smooth and
// increasing on all of R (the denominator never vanishes for r < 1), so arc
// endpoints rounded across +-pi need no seam handling.
fn poisson_antiderivative(r: f64, phi: f64) -> f64 {
    phi / TAU + (r * phi.sin() / (1.0 - r * phi.cos())).atan() / PI
}

/// Harmonic-measure mass of the boundary arc (a, b) seen from z0,
/// normalized so the full circle has mass 1. Requires a <= b <= a + 2 pi.
pub fn poisson_arc_mass(z0: DiskPoint, a: f64, b: f64) -> f64 {
    assert!(b >= a && b - a <= TAU + 1e-12);
    let r = z0.norm_sq().sqrt();
    if r == 0.0 {
        return (b - a) / TAU;
    }
    let theta0 = z0.im().atan2(z0.re());
    poisson_antiderivative(r, b - theta0) - poisson_antiderivative(r, a - theta0)
}

/// The piecewise power x^(3/2) above 1, x^(1/2) below.
pub fn psi(x: f64) -> f64 {
    if x >= 1.0 {
        x.powf(1.5)
    } else {
        x.sqrt()
    }
}

/// Gaussian-type upper ceiling for the heat kernel tail at distance R, time t.
///
/// The leading constant is not pinned by theory; it is a configurable shape
/// parameter and the tests only use the decay rate.
#[derive(Debug, Clone, Copy)]
pub struct HeatKernelBound {
    pub leading_constant: f64,
}

impl Default for HeatKernelBound {
    fn default() -> Self {
        HeatKernelBound { leading_constant: 10.0 }
    }
}

impl HeatKernelBound {
    /// Log of the ceiling; finite even where the ceiling itself underflows.
    pub fn eval_log(&self, r: f64, t: f64) -> f64 {
        assert!(r >= 0.0 && t > 0.0);
        let x = (1.0 + r) / t;
        let quad = (r + t / 2.0) * (r + t / 2.0) / (2.0 * t);
        self.leading_constant.ln() + psi(x).ln() - 0.5 * (1.0 + r).ln() - quad
    }

    pub fn eval(&self, r: f64, t: f64) -> f64 {
        self.eval_log(r, t).exp()
    }
}

/// Tail ceiling K exp(-(c - 1/2)^2 / 2) for the unit-time maximal excursion.
pub fn max_excursion_bound(c: f64, k: f64) -> f64 {
    k * (-(c - 0.5) * (c - 0.5) / 2.0).exp()
}
