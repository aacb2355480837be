//! Spacetime points, regions, reflection isometries, and causal predicates.
//!
//! Everything downstream leans on three facts fixed here: the interval
//! carries signature (+,-,-,-); the half-space is `z >= 0` and the slab is
//! `0 <= z <= d`; and the image group of the slab is generated by the
//! reflections at `z = 0` and `z = d`, giving translations `z + 2nd` (even
//! parity) and reflections `2nd - z` (odd parity).

use crate::error::{validation, Result};

/// Event with Cartesian coordinates `(t, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpacetimePoint {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        assert!(
            t.is_finite() && x.is_finite() && y.is_finite() && z.is_finite(),
            "spacetime coordinates must be finite"
        );
        SpacetimePoint { t, x, y, z }
    }

    pub fn with_z(self, z: f64) -> Self {
        SpacetimePoint { z, ..self }
    }

    pub fn reflect_z(self) -> Self {
        SpacetimePoint { z: -self.z, ..self }
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.t, self.x, self.y, self.z]
    }
}

/// Squared interval `s^2 = dt^2 - dx^2 - dy^2 - dz^2`.
///
/// Positive is timelike, zero null, negative spacelike.
pub fn interval(a: &SpacetimePoint, b: &SpacetimePoint) -> f64 {
    let dt = a.t - b.t;
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dt * dt - dx * dx - dy * dy - dz * dz
}

pub fn is_spacelike(a: &SpacetimePoint, b: &SpacetimePoint) -> bool {
    interval(a, b) < 0.0
}

/// The three background geometries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Minkowski,
    HalfSpace,
    Slab { d: f64 },
}

impl Region {
    /// Slab of width `d` between Dirichlet planes at `z = 0` and `z = d`.
    pub fn slab(d: f64) -> Result<Region> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(validation(format!("slab width must be positive and finite, got {d}")));
        }
        Ok(Region::Slab { d })
    }

    pub fn contains(&self, p: &SpacetimePoint) -> bool {
        match *self {
            Region::Minkowski => true,
            Region::HalfSpace => p.z >= 0.0,
            Region::Slab { d } => p.z >= 0.0 && p.z <= d,
        }
    }

    /// Open interior in `z`; for Minkowski this is everything.
    pub fn strictly_contains(&self, p: &SpacetimePoint) -> bool {
        match *self {
            Region::Minkowski => true,
            Region::HalfSpace => p.z > 0.0,
            Region::Slab { d } => p.z > 0.0 && p.z < d,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Region::Minkowski => "minkowski",
            Region::HalfSpace => "halfspace",
            Region::Slab { .. } => "slab",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IsometryKind {
    Identity,
    /// `z -> -z` (half-space image).
    ReflectZ0,
    /// `z -> z + 2nd` (slab translation image).
    TranslateZ,
    /// `z -> 2nd - z` (slab reflection image).
    ReflectAt,
}

/// One element of a region's image group, tagged by the image index `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Isometry {
    pub kind: IsometryKind,
    pub n: i64,
}

impl Isometry {
    pub fn identity() -> Self {
        Isometry { kind: IsometryKind::Identity, n: 0 }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, IsometryKind::Identity)
            || (matches!(self.kind, IsometryKind::TranslateZ) && self.n == 0)
    }

    /// Dirichlet parity: -1 for reflections, +1 otherwise.
    pub fn sign(&self) -> f64 {
        match self.kind {
            IsometryKind::ReflectZ0 | IsometryKind::ReflectAt => -1.0,
            _ => 1.0,
        }
    }

    /// The z-action as `z -> a*z + b` with `a = +/-1`; `d` is the slab
    /// width (ignored by Identity and ReflectZ0).
    pub fn z_action(&self, d: f64) -> (f64, f64) {
        match self.kind {
            IsometryKind::Identity => (1.0, 0.0),
            IsometryKind::ReflectZ0 => (-1.0, 0.0),
            IsometryKind::TranslateZ => (1.0, 2.0 * self.n as f64 * d),
            IsometryKind::ReflectAt => (-1.0, 2.0 * self.n as f64 * d),
        }
    }

    pub fn apply(&self, d: f64, p: &SpacetimePoint) -> SpacetimePoint {
        let (a, b) = self.z_action(d);
        p.with_z(a * p.z + b)
    }
}

/// Slab isometries whose image of `z` lands in `[lo, hi]`, ordered by image
/// index `n` (translation before reflection at equal `n`).
pub fn slab_isometries_in_window(d: f64, z: f64, lo: f64, hi: f64) -> Vec<Isometry> {
    debug_assert!(d > 0.0 && lo <= hi);
    let reach = |v: f64| ((v - lo) / (2.0 * d), (hi - v) / (2.0 * d));
    // Candidate n range padded by one so boundary hits survive the filter.
    let (down_t, up_t) = reach(z);
    let (down_r, up_r) = reach(-z);
    let n_min = (-down_t.min(down_r)).floor() as i64 - 1;
    let n_max = up_t.max(up_r).ceil() as i64 + 1;
    let mut out = Vec::new();
    for n in n_min..=n_max {
        let shift = 2.0 * n as f64 * d;
        if (lo..=hi).contains(&(z + shift)) {
            out.push(Isometry { kind: IsometryKind::TranslateZ, n });
        }
        if (lo..=hi).contains(&(shift - z)) {
            out.push(Isometry { kind: IsometryKind::ReflectAt, n });
        }
    }
    out
}

/// Signed image points of `p` for the region's image group, restricted (for
/// the slab) to images whose z-coordinate lies in `window`.
///
/// Half-space: exactly the point itself and its minus-signed reflection.
/// Slab: `(+1, z + 2nd)` and `(-1, 2nd - z)` for every image index that
/// lands in the window.  Minkowski has no image group and is rejected.
pub fn images(
    region: &Region,
    p: &SpacetimePoint,
    window: (f64, f64),
) -> Result<Vec<(f64, SpacetimePoint)>> {
    match *region {
        Region::Minkowski => Err(validation("Minkowski space has no image group")),
        Region::HalfSpace => Ok(vec![(1.0, *p), (-1.0, p.reflect_z())]),
        Region::Slab { d } => {
            let (lo, hi) = window;
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(validation(format!("invalid image window [{lo}, {hi}]")));
            }
            Ok(slab_isometries_in_window(d, p.z, lo, hi)
                .into_iter()
                .map(|iso| (iso.sign(), iso.apply(d, p)))
                .collect())
        }
    }
}

/// Axis-aligned box in `(t, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimeBox {
    pub min: [f64; 4],
    pub max: [f64; 4],
}

impl SpacetimeBox {
    pub fn new(min: [f64; 4], max: [f64; 4]) -> Result<Self> {
        for i in 0..4 {
            if !min[i].is_finite() || !max[i].is_finite() || min[i] > max[i] {
                return Err(validation(format!(
                    "degenerate box: axis {i} range [{}, {}]",
                    min[i], max[i]
                )));
            }
        }
        Ok(SpacetimeBox { min, max })
    }

    pub fn around(center: &SpacetimePoint, halfwidths: [f64; 4]) -> Self {
        let c = center.coords();
        let mut min = [0.0; 4];
        let mut max = [0.0; 4];
        for i in 0..4 {
            assert!(halfwidths[i] >= 0.0);
            min[i] = c[i] - halfwidths[i];
            max[i] = c[i] + halfwidths[i];
        }
        SpacetimeBox { min, max }
    }

    pub fn cube(center: &SpacetimePoint, radius: f64) -> Self {
        Self::around(center, [radius; 4])
    }

    pub fn contains(&self, p: &SpacetimePoint) -> bool {
        let c = p.coords();
        (0..4).all(|i| self.min[i] <= c[i] && c[i] <= self.max[i])
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.min[3], self.max[3])
    }

    /// The box of the image under `z -> a*z + b`.
    pub(crate) fn z_mapped(&self, a: f64, b: f64) -> SpacetimeBox {
        let (zlo, zhi) = self.z_range();
        let (ilo, ihi) = if a > 0.0 { (zlo + b, zhi + b) } else { (b - zhi, b - zlo) };
        let mut min = self.min;
        let mut max = self.max;
        min[3] = ilo;
        max[3] = ihi;
        SpacetimeBox { min, max }
    }

    fn within_region(&self, region: &Region) -> bool {
        let (zlo, zhi) = self.z_range();
        match *region {
            Region::Minkowski => true,
            Region::HalfSpace => zlo >= 0.0,
            Region::Slab { d } => zlo >= 0.0 && zhi <= d,
        }
    }
}

/// Largest squared interval between any point of `a` and any point of `b`.
///
/// Time and space extremes are attained independently on a product of
/// intervals, so this is exact, not just a corner bound.
pub(crate) fn sup_interval(a: &SpacetimeBox, b: &SpacetimeBox) -> f64 {
    let max_dt = (a.min[0] - b.max[0]).abs().max((a.max[0] - b.min[0]).abs());
    let mut space = 0.0;
    for i in 1..4 {
        let gap = (a.min[i] - b.max[i]).max(b.min[i] - a.max[i]).max(0.0);
        space += gap * gap;
    }
    max_dt * max_dt - space
}

/// True iff every point of `a` is strictly spacelike to every point of `b`.
pub fn causally_disjoint_boxes(a: &SpacetimeBox, b: &SpacetimeBox) -> bool {
    sup_interval(a, b) < 0.0
}

/// True iff every nontrivial region-image of `a` is spacelike to `b`: no
/// causal curve that bounces off a boundary connects the two boxes.
///
/// The direct relation is deliberately unconstrained — when this predicate
/// holds, the image terms of boundary pairings vanish and the pairing
/// reduces to its bulk counterpart, whether or not the direct term is zero.
/// Minkowski has no image group, so the predicate is vacuously true there.
/// Symmetric in `a` and `b` (image distances are).
pub fn reflected_causally_disjoint(
    region: &Region,
    a: &SpacetimeBox,
    b: &SpacetimeBox,
) -> Result<bool> {
    if !a.within_region(region) || !b.within_region(region) {
        return Err(validation("boxes must lie inside the region"));
    }
    match *region {
        Region::Minkowski => Ok(true),
        Region::HalfSpace => Ok(causally_disjoint_boxes(&a.z_mapped(-1.0, 0.0), b)),
        Region::Slab { d } => {
            // Beyond this index every image sits farther from b in z than any
            // causal reach allows, so the scan is finite.
            let max_dt = (a.min[0] - b.max[0]).abs().max((a.max[0] - b.min[0]).abs());
            let span = a.max[3].abs().max(a.min[3].abs()) + b.max[3].abs().max(b.min[3].abs());
            let n_max = ((max_dt + span) / (2.0 * d)).ceil() as i64 + 1;
            for n in -n_max..=n_max {
                let shift = 2.0 * n as f64 * d;
                if n != 0 && !causally_disjoint_boxes(&a.z_mapped(1.0, shift), b) {
                    return Ok(false);
                }
                if !causally_disjoint_boxes(&a.z_mapped(-1.0, shift), b) {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}
