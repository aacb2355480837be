//! Compactly supported smooth sources with closed-form derivatives, their
//! odd/periodic image expansions, and the wave operator.
//!
//! Every source is a linear combination of product bumps
//! `A * prod_i b((u_i - c_i)/w_i)` with `b(s) = exp(-1/(1 - s^2))` inside
//! `|s| < 1` and zero outside.  Exact evaluation of the bump and its first
//! two derivatives removes interpolation error from everything downstream:
//! quadratures see analytic integrands, image maps act on centers alone, and
//! momentum transforms factor per axis.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::geometry::{SpacetimeBox, SpacetimePoint};

/// Values of `1 - s^2` below this are treated as outside the support; the
/// true function and all derivatives vanish there faster than any power,
/// and the guard keeps `1/(1 - s^2)` from overflowing.
const EDGE_GUARD: f64 = 1e-12;

/// The bump profile `b(s) = exp(-1/(1-s^2))` for `|s| < 1`, else 0.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 - EDGE_GUARD {
        return 0.0;
    }
    (-1.0 / (1.0 - s * s)).exp()
}

/// `b'(s) = -2s/(1-s^2)^2 * b(s)`.
pub fn bump_d1(s: f64) -> f64 {
    if s.abs() >= 1.0 - EDGE_GUARD {
        return 0.0;
    }
    let m = 1.0 - s * s;
    -2.0 * s / (m * m) * (-1.0 / m).exp()
}

/// `b''(s) = [-2/(1-s^2)^2 - 8s^2/(1-s^2)^3 + 4s^2/(1-s^2)^4] * b(s)`.
pub fn bump_d2(s: f64) -> f64 {
    if s.abs() >= 1.0 - EDGE_GUARD {
        return 0.0;
    }
    let m = 1.0 - s * s;
    let s2 = s * s;
    let b = (-1.0 / m).exp();
    b * (-2.0 / (m * m) - 8.0 * s2 / (m * m * m) + 4.0 * s2 / (m * m * m * m))
}

/// A single product bump; the elementary smooth compactly supported source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpTestFunction {
    /// Center in coordinate order `(t, x, y, z)`.
    pub center: [f64; 4],
    /// Support half-widths per axis; the support is the closed box
    /// `center +/- halfwidths`.
    pub halfwidths: [f64; 4],
    pub amplitude: f64,
}

impl BumpTestFunction {
    pub fn new(center: [f64; 4], halfwidths: [f64; 4], amplitude: f64) -> Self {
        let b = BumpTestFunction { center, halfwidths, amplitude };
        b.validate().expect("invalid bump parameters");
        b
    }

    pub fn centered(p: &SpacetimePoint, halfwidths: [f64; 4], amplitude: f64) -> Self {
        Self::new(p.coords(), halfwidths, amplitude)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            if !self.center[i].is_finite() {
                return Err(validation("bump center must be finite"));
            }
            if !(self.halfwidths[i] > 0.0) || !self.halfwidths[i].is_finite() {
                return Err(validation(format!(
                    "bump halfwidths must be positive and finite, got {}",
                    self.halfwidths[i]
                )));
            }
        }
        if !self.amplitude.is_finite() {
            return Err(validation("bump amplitude must be finite"));
        }
        Ok(())
    }

    fn scaled_coord(&self, axis: usize, p: &SpacetimePoint) -> f64 {
        (p.coords()[axis] - self.center[axis]) / self.halfwidths[axis]
    }

    pub fn value(&self, p: &SpacetimePoint) -> f64 {
        let mut v = self.amplitude;
        for axis in 0..4 {
            v *= bump(self.scaled_coord(axis, p));
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }

    /// First derivative along one coordinate axis.
    pub fn deriv1(&self, axis: usize, p: &SpacetimePoint) -> f64 {
        let mut v = self.amplitude;
        for a in 0..4 {
            let s = self.scaled_coord(a, p);
            v *= if a == axis { bump_d1(s) / self.halfwidths[a] } else { bump(s) };
        }
        v
    }

    /// Pure second derivative along one coordinate axis.
    pub fn deriv2(&self, axis: usize, p: &SpacetimePoint) -> f64 {
        let mut v = self.amplitude;
        for a in 0..4 {
            let s = self.scaled_coord(a, p);
            v *= if a == axis {
                bump_d2(s) / (self.halfwidths[a] * self.halfwidths[a])
            } else {
                bump(s)
            };
        }
        v
    }

    pub fn support_box(&self) -> SpacetimeBox {
        let mut min = self.center;
        let mut max = self.center;
        for i in 0..4 {
            min[i] -= self.halfwidths[i];
            max[i] += self.halfwidths[i];
        }
        SpacetimeBox { min, max }
    }

    pub fn translated_z(&self, dz: f64) -> Self {
        let mut center = self.center;
        center[3] += dz;
        BumpTestFunction { center, ..self.clone() }
    }

    /// Pullback under `z -> -z`; exact because the profile is even.
    pub fn reflected_z(&self) -> Self {
        let mut center = self.center;
        center[3] = -center[3];
        BumpTestFunction { center, ..self.clone() }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BumpTestFunction { amplitude: self.amplitude * factor, ..self.clone() }
    }
}

/// Finite linear combination of product bumps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TestFunction {
    pub terms: Vec<BumpTestFunction>,
}

impl TestFunction {
    pub fn new(terms: Vec<BumpTestFunction>) -> Self {
        TestFunction { terms }
    }

    pub fn zero() -> Self {
        TestFunction { terms: Vec::new() }
    }

    pub fn single(term: BumpTestFunction) -> Self {
        TestFunction { terms: vec![term] }
    }

    pub fn validate(&self) -> Result<()> {
        for term in &self.terms {
            term.validate()?;
        }
        Ok(())
    }

    pub fn value(&self, p: &SpacetimePoint) -> f64 {
        self.terms.iter().map(|b| b.value(p)).sum()
    }

    pub fn deriv1(&self, axis: usize, p: &SpacetimePoint) -> f64 {
        self.terms.iter().map(|b| b.deriv1(axis, p)).sum()
    }

    pub fn deriv2(&self, axis: usize, p: &SpacetimePoint) -> f64 {
        self.terms.iter().map(|b| b.deriv2(axis, p)).sum()
    }

    /// Bounding box of the union of term supports; `None` for the zero
    /// function.
    pub fn support_box(&self) -> Option<SpacetimeBox> {
        let mut iter = self.terms.iter().map(|b| b.support_box());
        let first = iter.next()?;
        let mut min = first.min;
        let mut max = first.max;
        for b in iter {
            for i in 0..4 {
                min[i] = min[i].min(b.min[i]);
                max[i] = max[i].max(b.max[i]);
            }
        }
        Some(SpacetimeBox { min, max })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TestFunction { terms: self.terms.iter().map(|b| b.scaled(factor)).collect() }
    }

    pub fn plus(&self, other: &TestFunction) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        TestFunction { terms }
    }

    pub fn reflected_z(&self) -> Self {
        TestFunction { terms: self.terms.iter().map(|b| b.reflected_z()).collect() }
    }

    pub fn translated_z(&self, dz: f64) -> Self {
        TestFunction { terms: self.terms.iter().map(|b| b.translated_z(dz)).collect() }
    }
}

/// The image pattern behind an expansion: a single odd reflection, or the
/// doubly periodic antisymmetrization of a slab of width `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImagePattern {
    Reflection,
    PeriodicAntisym { d: f64 },
}

/// Signed sum of isometry-transformed copies of a base source.
///
/// Evaluation at any point touches finitely many images because the base
/// has compact support.  The reflection expansion is odd in `z`; the
/// periodic one satisfies `value(z + 2d) = value(z)` and
/// `value(2d - z) = -value(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageExpansion {
    base: TestFunction,
    pattern: ImagePattern,
    normalization: f64,
}

/// Odd reflection expansion `f(x,z) - f(x,-z)`, scaled by `1/sqrt(2)`.
pub fn eta_map(f: &TestFunction) -> ImageExpansion {
    ImageExpansion {
        base: f.clone(),
        pattern: ImagePattern::Reflection,
        normalization: std::f64::consts::FRAC_1_SQRT_2,
    }
}

/// Periodic antisymmetrization `sum_n f(x, 2nd + z) - f(x, 2nd - z)` for a
/// slab of width `d`; unnormalized.
pub fn n_map(f: &TestFunction, d: f64) -> Result<ImageExpansion> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(validation(format!("slab width must be positive and finite, got {d}")));
    }
    Ok(ImageExpansion {
        base: f.clone(),
        pattern: ImagePattern::PeriodicAntisym { d },
        normalization: 1.0,
    })
}

impl ImageExpansion {
    pub fn base(&self) -> &TestFunction {
        &self.base
    }

    pub fn pattern(&self) -> ImagePattern {
        self.pattern
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn value(&self, p: &SpacetimePoint) -> f64 {
        match self.pattern {
            ImagePattern::Reflection => {
                self.normalization * (self.base.value(p) - self.base.value(&p.reflect_z()))
            }
            ImagePattern::PeriodicAntisym { d } => {
                let Some(support) = self.base.support_box() else {
                    return 0.0;
                };
                let (zlo, zhi) = support.z_range();
                let mut acc = 0.0;
                // Direct images: 2nd + z must land in the base support.
                let n0 = ((zlo - p.z) / (2.0 * d)).floor() as i64 - 1;
                let n1 = ((zhi - p.z) / (2.0 * d)).ceil() as i64 + 1;
                for n in n0..=n1 {
                    acc += self.base.value(&p.with_z(2.0 * n as f64 * d + p.z));
                }
                // Reflected images: 2nd - z must land in the base support.
                let m0 = ((zlo + p.z) / (2.0 * d)).floor() as i64 - 1;
                let m1 = ((zhi + p.z) / (2.0 * d)).ceil() as i64 + 1;
                for n in m0..=m1 {
                    acc -= self.base.value(&p.with_z(2.0 * n as f64 * d - p.z));
                }
                self.normalization * acc
            }
        }
    }

    /// The expansion as explicit signed bumps (sign and normalization folded
    /// into the amplitudes), restricted to images whose support intersects
    /// the z-window `[zlo, zhi]`.  Images elsewhere evaluate to zero there.
    pub fn terms_in_z_window(&self, zlo: f64, zhi: f64) -> Vec<BumpTestFunction> {
        let intersects = |b: &BumpTestFunction| {
            let (lo, hi) = b.support_box().z_range();
            hi >= zlo && lo <= zhi
        };
        let mut out = Vec::new();
        match self.pattern {
            ImagePattern::Reflection => {
                for term in &self.base.terms {
                    let direct = term.scaled(self.normalization);
                    if intersects(&direct) {
                        out.push(direct);
                    }
                    let mirrored = term.reflected_z().scaled(-self.normalization);
                    if intersects(&mirrored) {
                        out.push(mirrored);
                    }
                }
            }
            ImagePattern::PeriodicAntisym { d } => {
                let Some(support) = self.base.support_box() else {
                    return out;
                };
                let (slo, shi) = support.z_range();
                // n range so that either family shifted by 2nd can reach the
                // window, padded by one period.
                let lo_n = ((zlo - shi.max(-slo)) / (2.0 * d)).floor() as i64 - 1;
                let hi_n = ((zhi + shi.max(-slo).max(0.0) + shi.abs()) / (2.0 * d)).ceil() as i64 + 1;
                for n in lo_n..=hi_n {
                    let shift = 2.0 * n as f64 * d;
                    for term in &self.base.terms {
                        let direct = term.translated_z(shift).scaled(self.normalization);
                        if intersects(&direct) {
                            out.push(direct);
                        }
                        // f(x, 2nd - z) is the bump re-centered at 2nd - c_z.
                        let mirrored =
                            term.reflected_z().translated_z(shift).scaled(-self.normalization);
                        if intersects(&mirrored) {
                            out.push(mirrored);
                        }
                    }
                }
            }
        }
        out
    }
}

/// The massless wave operator `P = -d^2/dt^2 + laplacian` with curvature
/// coupling `xi`.
///
/// On the flat backgrounds used here the coupling term vanishes with the
/// scalar curvature, so `xi` never enters `apply`; it is carried because the
/// stress tensor depends on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveOperator {
    pub xi: f64,
}

impl WaveOperator {
    pub fn new(xi: f64) -> Result<Self> {
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(validation(format!("coupling must be nonnegative and finite, got {xi}")));
        }
        Ok(WaveOperator { xi })
    }

    pub fn apply(&self, f: &TestFunction) -> PApplied {
        apply_p(f)
    }
}

/// `P f` as an exact evaluator with the same support as `f`.
#[derive(Debug, Clone)]
pub struct PApplied {
    f: TestFunction,
}

pub fn apply_p(f: &TestFunction) -> PApplied {
    PApplied { f: f.clone() }
}

impl PApplied {
    pub fn value(&self, p: &SpacetimePoint) -> f64 {
        -self.f.deriv2(0, p) + self.f.deriv2(1, p) + self.f.deriv2(2, p) + self.f.deriv2(3, p)
    }

    pub fn support_box(&self) -> Option<SpacetimeBox> {
        self.f.support_box()
    }
}
