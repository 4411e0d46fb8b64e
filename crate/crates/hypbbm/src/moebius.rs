//! Orientation-preserving isometries of the disk as normalized pairs (a, c)
//! acting by z -> (az + c)/(conj(c) z + conj(a)), |a|^2 - |c|^2 = 1.
//!
//! The subgroup fixing the boundary point 1 acts simply transitively on the
//! disk; its element sending 0 to z0 is the transport map attached to every
//! tree edge.

use crate::geometry::{BoundaryPoint, DiskPoint, GeometryError, HalfPlanePoint};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    const ZERO: Complex = Complex { re: 0.0, im: 0.0 };
    const ONE: Complex = Complex { re: 1.0, im: 0.0 };

    fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    fn conj(self) -> Self {
        Complex { re: self.re, im: -self.im }
    }

    fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    fn add(self, o: Complex) -> Self {
        Complex { re: self.re + o.re, im: self.im + o.im }
    }

    fn mul(self, o: Complex) -> Self {
        Complex {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn scale(self, s: f64) -> Self {
        Complex { re: self.re * s, im: self.im * s }
    }

    fn div(self, o: Complex) -> Self {
        self.mul(o.conj()).scale(1.0 / o.norm_sq())
    }
}

/// Normalized Möbius transformation of the disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusMap {
    a: Complex,
    c: Complex,
}

impl MoebiusMap {
    pub const IDENTITY: MoebiusMap = MoebiusMap { a: Complex::ONE, c: Complex::ZERO };

    // renormalizes by the positive real 1/sqrt(|a|^2 - |c|^2); a complex
    // rescaling would change the map
    fn normalized(a: Complex, c: Complex) -> Self {
        let det = a.norm_sq() - c.norm_sq();
        debug_assert!(det > 0.0, "not a disk automorphism: det = {det}");
        let s = 1.0 / det.sqrt();
        MoebiusMap { a: a.scale(s), c: c.scale(s) }
    }

    /// The unique boundary-1-fixing element mapping 0 to z0.
    pub fn gamma(z0: DiskPoint) -> Self {
        // a = 1 - z0, c = z0 (1 - conj(z0)); a + c = 1 - |z0|^2 is real
        let z = Complex::new(z0.re(), z0.im());
        let a = Complex::ONE.add(z.scale(-1.0));
        let c = z.mul(Complex::ONE.add(z.conj().scale(-1.0)));
        MoebiusMap::normalized(a, c)
    }

    /// Rotation of the disk about 0 by `theta`.
    pub fn rotation(theta: f64) -> Self {
        let half = theta / 2.0;
        MoebiusMap { a: Complex::new(half.cos(), half.sin()), c: Complex::ZERO }
    }

    /// Whether the map fixes the boundary point 1 (a + c real, tolerance
    /// scaled to the entry size so far-translating elements are not misread).
    pub fn is_affine(&self) -> bool {
        let scale = (self.a.norm_sq() + self.c.norm_sq()).sqrt().max(1.0);
        (self.a.im + self.c.im).abs() < 1e-10 * scale
    }

    pub fn apply(&self, z: DiskPoint) -> Result<DiskPoint, GeometryError> {
        let zc = Complex::new(z.re(), z.im());
        let num = self.a.mul(zc).add(self.c);
        let den = self.c.conj().mul(zc).add(self.a.conj());
        let out = num.div(den);
        DiskPoint::new(out.re, out.im).map_err(|_| GeometryError::OverflowNearBoundary)
    }

    pub fn apply_boundary(&self, xi: BoundaryPoint) -> BoundaryPoint {
        let z = Complex::new(xi.angle().cos(), xi.angle().sin());
        let num = self.a.mul(z).add(self.c);
        let den = self.c.conj().mul(z).add(self.a.conj());
        let out = num.mul(den.conj());
        BoundaryPoint::new(out.im.atan2(out.re))
    }

    /// Group product: (g.compose(h))(z) = g(h(z)).
    ///
    /// The action is invariant under positive real rescaling of (a, c), so
    /// when the entries are large enough that |a|^2 - |c|^2 cancels away we
    /// rescale by the entry size instead of the determinant. Everything
    /// downstream (apply, inverse, further products) is scale-free.
    pub fn compose(&self, h: &MoebiusMap) -> MoebiusMap {
        let a = self.a.mul(h.a).add(self.c.mul(h.c.conj()));
        let c = self.a.mul(h.c).add(self.c.mul(h.a.conj()));
        let big = a.norm_sq().max(c.norm_sq());
        let det = a.norm_sq() - c.norm_sq();
        if det > big * 1e-6 && det.is_finite() {
            let s = 1.0 / det.sqrt();
            MoebiusMap { a: a.scale(s), c: c.scale(s) }
        } else {
            let s = 1.0 / big.sqrt();
            MoebiusMap { a: a.scale(s), c: c.scale(s) }
        }
    }

    pub fn inverse(&self) -> MoebiusMap {
        MoebiusMap { a: self.a.conj(), c: self.c.scale(-1.0) }
    }

    /// Action on the half-plane for boundary-1-fixing maps: z -> alpha z + beta,
    /// returned as (beta, log alpha). Such maps act on the log chart by
    /// (u, w) -> (beta + alpha u, w + log alpha), exactly.
    pub fn affine_params(&self) -> Option<(f64, f64)> {
        if !self.is_affine() {
            return None;
        }
        // half-plane coordinates of the image of the disk origin, in closed
        // form so far-from-origin images need no disk representation:
        // gamma(0) = c / conj(a), u = -2 im(c a) / |conj(a) - c|^2,
        // e^w = (|a|^2 - |c|^2) / |conj(a) - c|^2, all scale-invariant
        let det = self.a.norm_sq() - self.c.norm_sq();
        if det <= 0.0 {
            return None;
        }
        let d = Complex::new(self.a.re - self.c.re, -self.a.im - self.c.im);
        let dn = d.norm_sq();
        let beta = -2.0 * self.c.mul(self.a).im / dn;
        Some((beta, det.ln() - dn.ln()))
    }

    /// Exact affine action on the log chart; None if the map does not fix 1.
    pub fn apply_halfplane(&self, p: HalfPlanePoint) -> Option<HalfPlanePoint> {
        let (beta, log_alpha) = self.affine_params()?;
        Some(HalfPlanePoint::new(beta + log_alpha.exp() * p.u, p.w + log_alpha))
    }
}
