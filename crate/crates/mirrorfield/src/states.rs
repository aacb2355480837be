//! Boundary states as image sums over the Minkowski vacuum.
//!
//! The vacuum two-point pairing is evaluated on shell in momentum space,
//! which avoids regulator limits entirely.  A region with a boundary gets
//! its state by pulling the vacuum back through the region's image
//! expansion: the half-space applies the odd reflection map in both
//! slots; the slab applies the periodic antisymmetrization in one slot
//! and is evaluated in the Dirichlet mode representation, which is
//! manifestly positive.  (Minkowski has a trivial image group, so its
//! "image" pairing is the vacuum pairing itself; this keeps the Gram and
//! commutator suites uniform across regions.)
//!
//! Subtracting the direct term — the massless vacuum kernel, which for
//! this field is also the Hadamard parametrix, so the subtraction is
//! exact — leaves a smooth position kernel made of image terms only.  At
//! spacelike image separation every term is the elementary
//! `1/(4π²·(−s²))` kernel, so the subtracted kernel reduces to lattice
//! sums evaluated with accelerated tails and cross-checked against an
//! exact closed form.  A probe utility fits the growth exponent of that
//! kernel along paths approaching a reflected light cone.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{numerics, validation, Result};
use crate::geometry::{interval, sup_interval, Region, SpacetimeBox, SpacetimePoint};
use crate::imagesum::ladder_sum;
use crate::momentum::{self, SlabModeGrid, SphericalGrid};
use crate::propagators::{bump_mass, PairingBackendConfig};
use crate::testfields::{eta_map, BumpTestFunction, TestFunction};

/// A sesquilinear two-point pairing over a region, carrying the backend
/// configuration shared by all of its evaluations.
///
/// For the slab the domain is restricted to test functions supported
/// strictly inside the open interior `0 < z < d`; sources touching a
/// Dirichlet plane are rejected rather than extrapolated, because the
/// pulled-back state is only defined on interior observables.
#[derive(Debug, Clone)]
pub struct TwoPointPairing {
    region: Region,
    config: PairingBackendConfig,
}

impl TwoPointPairing {
    pub fn new(region: Region) -> Self {
        TwoPointPairing { region, config: PairingBackendConfig::default() }
    }

    pub fn with_config(region: Region, config: PairingBackendConfig) -> Result<Self> {
        config.validate()?;
        Ok(TwoPointPairing { region, config })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn config(&self) -> &PairingBackendConfig {
        &self.config
    }

    /// `ω₂(f, g)` in the Minkowski vacuum: the on-shell momentum integral
    /// `∫ d³k/((2π)³·2|k|)·conj(f̂)·ĝ`.  Independent of the region.
    pub fn vacuum_two_point(&self, f: &TestFunction, g: &TestFunction) -> Result<Complex64> {
        if f.terms.is_empty() || g.terms.is_empty() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let grid = self.spherical(&[&f.terms, &g.terms])?;
        Ok(momentum::two_point_and_pair(&grid, &f.terms, &g.terms).omega_fg)
    }

    /// The region's boundary state evaluated on `(f, g)`.
    ///
    /// Half-space: the vacuum pairing of the odd-reflection expansions of
    /// both slots (finitely many terms; the two `1/√2` factors make the
    /// direct part carry weight one).  Slab: the periodic
    /// antisymmetrization applied to one slot, evaluated in the Dirichlet
    /// mode representation.  Minkowski: the vacuum pairing (trivial image
    /// group).
    pub fn image_two_point(&self, f: &TestFunction, g: &TestFunction) -> Result<Complex64> {
        self.check_support(f, "first smearing")?;
        self.check_support(g, "second smearing")?;
        if f.terms.is_empty() || g.terms.is_empty() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        match self.region {
            Region::Minkowski => self.vacuum_two_point(f, g),
            Region::HalfSpace => {
                let ef = expand_halfspace(f);
                let eg = expand_halfspace(g);
                let grid = self.spherical(&[&ef, &eg])?;
                Ok(momentum::two_point_and_pair(&grid, &ef, &eg).omega_fg)
            }
            Region::Slab { d } => {
                let grid = self.slab_modes(d, &[&f.terms, &g.terms])?;
                Ok(momentum::slab_two_point_and_pair(&grid, &f.terms, &g.terms).omega_fg)
            }
        }
    }

    /// Per-pair `(w2(f,g), w2(g,f), pairing(f,g))` triples, every pair
    /// evaluated over one grid sized for the union of their supports.  The
    /// three numbers of each triple are independent sums — the commutation
    /// identity is measured against them, never imposed — while the shared
    /// node walk makes sweeps over many pairs far cheaper than separate
    /// calls.  Blocks are processed [`momentum::CCR_BLOCK_MAX`] pairs at a
    /// time.
    pub fn commutation_triples(
        &self,
        pairs: &[(TestFunction, TestFunction)],
    ) -> Result<Vec<(Complex64, Complex64, f64)>> {
        for (i, (f, g)) in pairs.iter().enumerate() {
            self.check_support(f, &format!("pair {i} first slot"))?;
            self.check_support(g, &format!("pair {i} second slot"))?;
        }
        let mut out = Vec::with_capacity(pairs.len());
        for block in pairs.chunks(momentum::CCR_BLOCK_MAX) {
            match self.region {
                Region::Minkowski | Region::HalfSpace => {
                    let expand = matches!(self.region, Region::HalfSpace);
                    let sets: Vec<(Vec<BumpTestFunction>, Vec<BumpTestFunction>)> = block
                        .iter()
                        .map(|(f, g)| {
                            if expand {
                                (expand_halfspace(f), expand_halfspace(g))
                            } else {
                                (f.terms.clone(), g.terms.clone())
                            }
                        })
                        .collect();
                    let mut refs: Vec<&[BumpTestFunction]> = Vec::new();
                    for (a, b) in &sets {
                        refs.push(a);
                        refs.push(b);
                    }
                    let grid = self.spherical(&refs)?;
                    let pair_refs: Vec<(&[BumpTestFunction], &[BumpTestFunction])> =
                        sets.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
                    out.extend(momentum::commutation_block(&grid, &pair_refs));
                }
                Region::Slab { d } => {
                    let mut refs: Vec<&[BumpTestFunction]> = Vec::new();
                    for (f, g) in block {
                        refs.push(&f.terms);
                        refs.push(&g.terms);
                    }
                    let grid = self.slab_modes(d, &refs)?;
                    let pair_refs: Vec<(&[BumpTestFunction], &[BumpTestFunction])> = block
                        .iter()
                        .map(|(f, g)| (f.terms.as_slice(), g.terms.as_slice()))
                        .collect();
                    out.extend(momentum::slab_commutation_block(&grid, &pair_refs));
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix `M_ij = image_two_point(f_i, f_j)` of a family, built
    /// on one shared grid so that Hermiticity is exact and positivity is
    /// inherited from the node-by-node rank-one structure.
    pub fn gram(&self, families: &[TestFunction]) -> Result<Vec<Vec<Complex64>>> {
        for (i, f) in families.iter().enumerate() {
            self.check_support(f, &format!("family member {i}"))?;
        }
        match self.region {
            Region::Minkowski => {
                let sets: Vec<Vec<BumpTestFunction>> =
                    families.iter().map(|f| f.terms.clone()).collect();
                let refs: Vec<&[BumpTestFunction]> =
                    sets.iter().map(|s| s.as_slice()).collect();
                let grid = self.spherical(&refs)?;
                Ok(momentum::gram(&grid, &sets))
            }
            Region::HalfSpace => {
                let sets: Vec<Vec<BumpTestFunction>> =
                    families.iter().map(expand_halfspace).collect();
                let refs: Vec<&[BumpTestFunction]> =
                    sets.iter().map(|s| s.as_slice()).collect();
                let grid = self.spherical(&refs)?;
                Ok(momentum::gram(&grid, &sets))
            }
            Region::Slab { d } => {
                let sets: Vec<Vec<BumpTestFunction>> =
                    families.iter().map(|f| f.terms.clone()).collect();
                let refs: Vec<&[BumpTestFunction]> =
                    sets.iter().map(|s| s.as_slice()).collect();
                let grid = self.slab_modes(d, &refs)?;
                Ok(momentum::slab_gram(&grid, &sets))
            }
        }
    }

    fn spherical(&self, sets: &[&[BumpTestFunction]]) -> Result<SphericalGrid> {
        SphericalGrid::sized(
            sets,
            self.config.momentum_count_scale,
            self.config.momentum_reach_scale,
        )
    }

    fn slab_modes(&self, d: f64, sets: &[&[BumpTestFunction]]) -> Result<SlabModeGrid> {
        SlabModeGrid::sized(
            d,
            sets,
            self.config.momentum_count_scale,
            self.config.momentum_reach_scale,
        )
    }

    fn check_support(&self, f: &TestFunction, what: &str) -> Result<()> {
        let Some(b) = f.support_box() else {
            return Ok(());
        };
        let (zlo, zhi) = b.z_range();
        match self.region {
            Region::Minkowski => Ok(()),
            Region::HalfSpace => {
                if zlo >= 0.0 {
                    Ok(())
                } else {
                    Err(validation(format!(
                        "{what} must be supported in the half-space z >= 0; \
                         its support reaches z = {zlo}"
                    )))
                }
            }
            Region::Slab { d } => {
                if zlo > 0.0 && zhi < d {
                    Ok(())
                } else {
                    Err(validation(format!(
                        "{what} must be supported strictly inside the open slab \
                         interior 0 < z < {d}: the state is defined only on interior \
                         observables and boundary-touching sources are rejected \
                         (support spans z in [{zlo}, {zhi}])"
                    )))
                }
            }
        }
    }
}

/// Both-slot odd-reflection expansion: the base terms scaled by `1/√2`
/// together with their minus-signed reflections.
fn expand_halfspace(f: &TestFunction) -> Vec<BumpTestFunction> {
    eta_map(f).terms_in_z_window(f64::NEG_INFINITY, f64::INFINITY)
}

/// The image part of a region's position-space two-point kernel: the
/// direct term is dropped and the signed images remain,
/// `W(x, x′) = Σ_{σ≠id} sign(σ) / (4π²·(−s²(x, σx′)))`.
#[derive(Debug, Clone, Copy)]
pub struct SubtractedKernel {
    region: Region,
}

impl SubtractedKernel {
    pub fn new(region: Region) -> Self {
        SubtractedKernel { region }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn eval(&self, x: &SpacetimePoint, xp: &SpacetimePoint) -> Result<f64> {
        subtracted_kernel(&self.region, x, xp)
    }
}

/// Evaluates the image-subtracted kernel `W(x, x′)` for points strictly
/// inside the region, off every reflected light cone.
///
/// Minkowski has no images, so `W ≡ 0` — the whole kernel is the direct
/// parametrix and the subtraction removes everything.  The half-space
/// has exactly one image term, with the Dirichlet minus sign.  The slab
/// is a pair of lattice sums (translation images minus reflection
/// images) evaluated with tail acceleration; the direct `n = 0`
/// translation term is skipped.  An image pair that is null or timelike
/// related is rejected as a singular configuration — the kernel is only
/// smooth at spacelike image separation.
pub fn subtracted_kernel(
    region: &Region,
    x: &SpacetimePoint,
    xp: &SpacetimePoint,
) -> Result<f64> {
    for (p, what) in [(x, "first point"), (xp, "second point")] {
        if !(p.t.is_finite() && p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(validation(format!("{what} has non-finite coordinates")));
        }
        if !region.strictly_contains(p) {
            return Err(validation(format!(
                "{what} must lie strictly inside the {} region; got z = {}",
                region.name(),
                p.z
            )));
        }
    }
    match *region {
        Region::Minkowski => Ok(0.0),
        Region::HalfSpace => {
            let s2 = interval(x, &xp.reflect_z());
            if s2 >= 0.0 || -s2 <= 1e-300 {
                return Err(validation(format!(
                    "singular configuration: the reflected image pair has interval \
                     {s2:.3e} (null or timelike related)"
                )));
            }
            Ok(-1.0 / (4.0 * PI * PI * (-s2)))
        }
        Region::Slab { d } => {
            let dt = x.t - xp.t;
            let dx = x.x - xp.x;
            let dy = x.y - xp.y;
            let q = dx * dx + dy * dy - dt * dt;
            let translations = ladder_sum(d, x.z - xp.z, q, true)?;
            let reflections = ladder_sum(d, x.z + xp.z, q, false)?;
            Ok((translations - reflections) / (4.0 * PI * PI))
        }
    }
}

/// An explicit upper bound on the image part of a pairing:
/// `|image_two_point(f, g) − vacuum_two_point(f, g)|` is at most the sum
/// over nontrivial images `σ` of `‖f‖₁·‖g‖₁ / (4π²·min(−s²(x, σy)))`,
/// because each image term integrates the smooth spacelike kernel
/// against the smearings.
///
/// Errors when some image pair reaches the light cone (the supports are
/// not reflected-causally separated), since no finite bound exists
/// there.  For the slab, images are walked outward exactly until they
/// stop mattering, and the remainder is closed with an integral tail
/// that over-counts, so the result is a true bound.
pub fn image_term_bound(region: &Region, f: &TestFunction, g: &TestFunction) -> Result<f64> {
    let (Some(a), Some(b)) = (f.support_box(), g.support_box()) else {
        return Ok(0.0);
    };
    let norms = l1_norm(f) * l1_norm(g) / (4.0 * PI * PI);
    match *region {
        Region::Minkowski => Ok(0.0),
        Region::HalfSpace => Ok(norms / spacelike_gap(&a.z_mapped(-1.0, 0.0), &b)?),
        Region::Slab { d } => {
            let azmax = a.max[3].abs().max(a.min[3].abs());
            let bzmax = b.max[3].abs().max(b.min[3].abs());
            let hspan = azmax + bzmax;
            let mdt = (a.min[0] - b.max[0]).abs().max((a.max[0] - b.min[0]).abs());
            let mut gap_perp_sq = 0.0;
            for i in 1..3 {
                let gap = (a.min[i] - b.max[i]).max(b.min[i] - a.max[i]).max(0.0);
                gap_perp_sq += gap * gap;
            }
            let qq = gap_perp_sq - mdt * mdt;
            let n_near = ((hspan + mdt) / (2.0 * d)).ceil() as i64 + 1;
            let mut sum = 0.0;
            let mut n: i64 = 0;
            loop {
                let shift = 2.0 * n as f64 * d;
                let mut level = 0.0;
                if n == 0 {
                    level += 1.0 / spacelike_gap(&a.z_mapped(-1.0, 0.0), &b)?;
                } else {
                    for s in [shift, -shift] {
                        level += 1.0 / spacelike_gap(&a.z_mapped(1.0, s), &b)?;
                        level += 1.0 / spacelike_gap(&a.z_mapped(-1.0, s), &b)?;
                    }
                }
                sum += level;
                let u0 = 2.0 * n as f64 * d - hspan;
                if n >= n_near && u0 > (-qq).max(0.0).sqrt() + d && level <= 1e-4 * sum {
                    // Beyond |n| the four image families each have
                    // -sup s² ≥ (2kd − hspan)² + qq, decreasing in k, so
                    // the remaining sum is at most the integral from n on.
                    sum += 4.0 * tail_integral(d, u0, qq);
                    return Ok(norms * sum);
                }
                n += 1;
                if n > 2_000_000 {
                    return Err(numerics("image bound sum failed to converge"));
                }
            }
        }
    }
}

/// `min(−s²)` over pairs drawn from two boxes, required positive.
fn spacelike_gap(mapped: &SpacetimeBox, b: &SpacetimeBox) -> Result<f64> {
    let m = -sup_interval(mapped, b);
    if m > 0.0 {
        Ok(m)
    } else {
        Err(validation(
            "supports are not reflected-causally separated: an image pair reaches \
             the light cone, so the image terms admit no finite bound",
        ))
    }
}

/// `∫_{u0}^{∞} du/(u² + q) / (2d)`, the integral tail of a ladder of
/// kernel maxima; requires `u0 > sqrt(max(−q, 0))`.
fn tail_integral(d: f64, u0: f64, q: f64) -> f64 {
    let scale = 1e-12 * u0 * u0;
    if q > scale {
        let s = q.sqrt();
        (PI / 2.0 - (u0 / s).atan()) / (2.0 * d * s)
    } else if q < -scale {
        let s = (-q).sqrt();
        ((u0 + s) / (u0 - s)).ln() / (4.0 * d * s)
    } else {
        1.0 / (2.0 * d * u0)
    }
}

/// `‖f‖₁`: exact because the profile does not change sign, so the
/// integral of `|f|` factorizes into per-axis widths times the unit
/// profile mass.
fn l1_norm(f: &TestFunction) -> f64 {
    let m1 = bump_mass();
    f.terms
        .iter()
        .map(|t| {
            let volume: f64 = t.halfwidths.iter().product();
            t.amplitude.abs() * volume * m1.powi(4)
        })
        .sum()
}

/// One probe sample: the path parameter and the kernel magnitude there.
#[derive(Debug, Clone, Copy)]
pub struct ProbeSample {
    pub delta: f64,
    pub magnitude: f64,
}

/// Least-squares fit of `magnitude ∝ delta^(−exponent)`.
#[derive(Debug, Clone)]
pub struct ProbeFit {
    pub exponent: f64,
    pub samples: Vec<ProbeSample>,
}

/// Log-spaced probe parameters from `hi` down to `lo`.
pub fn log_spaced_deltas(hi: f64, lo: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || !hi.is_finite() {
        return Err(validation("probe deltas need 0 < lo < hi, both finite"));
    }
    if count < 2 {
        return Err(validation("probe needs at least two deltas"));
    }
    let ratio = lo / hi;
    Ok((0..count)
        .map(|i| hi * ratio.powf(i as f64 / (count - 1) as f64))
        .collect())
}

/// Tracks the image-subtracted kernel along a path `δ ↦ x′(δ)` that
/// approaches a reflected light cone as `δ → 0`, and fits
/// `|W(x, x′(δ))| ∝ δ^(−p)` by least squares in log-log coordinates.
/// The deltas must be positive and span at least a decade.
///
/// The direct interval must stay bounded away from zero along the path
/// — a path crossing (or touching) the direct light cone is rejected,
/// because the fit would then see the direct singularity instead of the
/// reflected one.  Purely timelike or purely spacelike direct relation
/// is fine.
///
/// For Minkowski the subtraction leaves nothing to track, so the probe
/// follows the direct vacuum kernel `1/(4π²·|s²|)` instead; the same
/// path then acts as a null control and fits an exponent near zero.
pub fn singularity_probe(
    region: &Region,
    x: &SpacetimePoint,
    path: impl Fn(f64) -> SpacetimePoint,
    deltas: &[f64],
) -> Result<ProbeFit> {
    if deltas.len() < 4 {
        return Err(validation("singularity probe needs at least 4 samples"));
    }
    if deltas.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(validation("probe deltas must be positive and finite"));
    }
    let lo = deltas.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = deltas.iter().fold(0.0f64, |m, &v| m.max(v));
    if hi < 10.0 * lo {
        return Err(validation("probe deltas must span at least a decade"));
    }
    if !region.strictly_contains(x) {
        return Err(validation(format!(
            "probe base point must lie strictly inside the {} region",
            region.name()
        )));
    }

    let mut points = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let p = path(delta);
        if !region.strictly_contains(&p) {
            return Err(validation(format!(
                "probe path leaves the open interior of the {} region at delta = {delta}",
                region.name()
            )));
        }
        let s2 = interval(x, &p);
        points.push((delta, p, s2));
    }
    let s2_scale = points.iter().fold(0.0f64, |m, p| m.max(p.2.abs()));
    let touches = points.iter().any(|p| p.2.abs() <= 1e-9 * s2_scale.max(1e-12));
    let crosses =
        points.iter().any(|p| p.2 > 0.0) && points.iter().any(|p| p.2 < 0.0);
    if touches || crosses {
        return Err(validation(
            "probe path crosses the direct light cone: the direct interval must \
             stay bounded away from zero along the path",
        ));
    }

    let mut samples = Vec::with_capacity(points.len());
    for (delta, p, s2) in points {
        let magnitude = match region {
            Region::Minkowski => 1.0 / (4.0 * PI * PI * s2.abs()),
            _ => subtracted_kernel(region, x, &p)?.abs(),
        };
        if !(magnitude > 0.0) || !magnitude.is_finite() {
            return Err(numerics(format!(
                "kernel magnitude {magnitude:.3e} at delta = {delta} leaves nothing \
                 to fit"
            )));
        }
        samples.push(ProbeSample { delta, magnitude });
    }

    // ln m = c − p·ln δ, ordinary least squares.
    let n = samples.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for s in &samples {
        let lx = s.delta.ln();
        let ly = s.magnitude.ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(ProbeFit { exponent: -slope, samples })
}

/// Smallest eigenvalue of the Hermitian part of a small complex matrix,
/// via cyclic Jacobi on the real-symmetric embedding
/// `[[Re, −Im], [Im, Re]]` (which has the same spectrum with doubled
/// multiplicity).
pub fn hermitian_min_eigenvalue(m: &[Vec<Complex64>]) -> f64 {
    let n = m.len();
    assert!(n > 0 && m.iter().all(|row| row.len() == n), "matrix must be square");
    let nn = 2 * n;
    let mut a = vec![vec![0.0f64; nn]; nn];
    for i in 0..n {
        for j in 0..n {
            let h = 0.5 * (m[i][j] + m[j][i].conj());
            a[i][j] = h.re;
            a[i + n][j + n] = h.re;
            a[i][j + n] = -h.im;
            a[i + n][j] = h.im;
        }
    }
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(1e-300);
    for _ in 0..80 {
        let mut off = 0.0f64;
        for p in 0..nn {
            for q in (p + 1)..nn {
                off = off.max(a[p][q].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..nn {
            for q in (p + 1)..nn {
                if a[p][q].abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = 0.5 * (2.0 * a[p][q]).atan2(a[q][q] - a[p][p]);
                let (s, c) = theta.sin_cos();
                for k in 0..nn {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..nn {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..nn).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{causally_disjoint_boxes, reflected_causally_disjoint};
    use crate::imagesum::ladder_sum_exact;
    use crate::propagators::{pair_e, pair_e_boundary};
    use crate::quad;
    use crate::testfields::bump;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(center: [f64; 4], halfwidths: [f64; 4], amplitude: f64) -> TestFunction {
        TestFunction::single(BumpTestFunction::new(center, halfwidths, amplitude))
    }

    fn slab_w_exact(d: f64, x: &SpacetimePoint, xp: &SpacetimePoint) -> f64 {
        let dt = x.t - xp.t;
        let dx = x.x - xp.x;
        let dy = x.y - xp.y;
        let q = dx * dx + dy * dy - dt * dt;
        let translations = ladder_sum_exact(d, x.z - xp.z, q, true).unwrap();
        let reflections = ladder_sum_exact(d, x.z + xp.z, q, false).unwrap();
        (translations - reflections) / (4.0 * PI * PI)
    }

    #[test]
    fn vacuum_pairing_positivity_linearity_and_ccr() {
        let pairing = TwoPointPairing::new(Region::Minkowski);
        let f = TestFunction::new(vec![
            BumpTestFunction::new([0.0, 0.1, -0.1, 0.0], [0.4, 0.4, 0.4, 0.4], 1.0),
            BumpTestFunction::new([0.2, -0.2, 0.0, 0.3], [0.35, 0.35, 0.35, 0.35], -0.7),
        ]);
        let g = single([0.5, 0.3, 0.1, -0.2], [0.4, 0.4, 0.4, 0.4], 0.9);

        let diag = pairing.vacuum_two_point(&f, &f).unwrap();
        assert!(diag.re > 0.0, "diagonal pairing must be positive, got {diag}");
        assert!(diag.im.abs() <= 1e-15 * diag.re);

        // Additivity in the first slot across independently sized grids.
        let h = f.plus(&g);
        let probe = single([-0.3, 0.0, 0.2, 0.1], [0.4, 0.4, 0.4, 0.4], 1.0);
        let lhs = pairing.vacuum_two_point(&h, &probe).unwrap();
        let rhs = pairing.vacuum_two_point(&f, &probe).unwrap()
            + pairing.vacuum_two_point(&g, &probe).unwrap();
        let scale = lhs.norm().max(rhs.norm());
        assert!(
            (lhs - rhs).norm() <= 3e-6 * scale,
            "pairing must be additive: {lhs} vs {rhs}"
        );

        // Antisymmetric part reproduces the commutator pairing.
        for (a, b) in [(&f, &g), (&g, &probe)] {
            let fg = pairing.vacuum_two_point(a, b).unwrap();
            let gf = pairing.vacuum_two_point(b, a).unwrap();
            let pe = pair_e(a, b, &PairingBackendConfig::default()).unwrap().value;
            let lhs = fg - gf;
            let rhs = Complex64::new(0.0, pe);
            let scale = lhs.norm().max(pe.abs()).max(1e-12);
            assert!(
                (lhs - rhs).norm() <= 1e-5 * scale,
                "commutator identity violated: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn spacelike_separated_smearings_pair_real() {
        let pairing = TwoPointPairing::new(Region::Minkowski);
        let f = single([0.0, 0.0, 0.0, -2.2], [0.5, 0.5, 0.5, 0.5], 1.0);
        let g = single([0.0, 0.3, 0.0, 2.2], [0.5, 0.5, 0.5, 0.5], 1.0);
        assert!(causally_disjoint_boxes(
            &f.support_box().unwrap(),
            &g.support_box().unwrap()
        ));
        let v = pairing.vacuum_two_point(&f, &g).unwrap();
        assert!(
            v.im.abs() <= 1e-6 * v.norm(),
            "spacelike pairing should be real: {v}"
        );
        assert!(v.re < 0.0 || v.re > 0.0, "value should be resolved, got {v}");
    }

    #[test]
    fn far_wall_pairing_matches_vacuum_within_the_image_bound() {
        // A source far from the wall with modest time extent: the single
        // image term is spacelike-suppressed, so the boundary state is
        // invisible up to the explicit kernel bound (which for this
        // geometry is about 4e-10, three decades below the value).
        let pairing = TwoPointPairing::new(Region::HalfSpace);
        let f = single([0.0, 0.0, 0.0, 10.0], [0.5, 0.5, 0.5, 0.5], 1.0);
        let vac = pairing.vacuum_two_point(&f, &f).unwrap();
        let img = pairing.image_two_point(&f, &f).unwrap();
        let bound = image_term_bound(&Region::HalfSpace, &f, &f).unwrap();
        let diff = img - vac;
        assert!(
            diff.norm() <= 1.05 * bound + 1e-12 * vac.norm(),
            "boundary visible beyond the image bound: diff {}, bound {bound:.3e}, \
             vacuum {vac}",
            diff.norm()
        );
        assert!(diff.norm() <= 1e-5, "image correction should be tiny: {}", diff.norm());
        assert!(
            bound <= 1e-2 * vac.norm(),
            "test geometry no longer separates scales: bound {bound:.3e} vs {vac}"
        );
    }

    #[test]
    fn image_pairing_antisymmetric_part_matches_the_boundary_commutator() {
        let cfg = PairingBackendConfig::default();
        let cases = [
            (
                Region::HalfSpace,
                single([0.0, 0.0, 0.0, 0.45], [0.25, 0.28, 0.28, 0.25], 1.0),
                single([0.7, 0.2, 0.0, 0.6], [0.25, 0.28, 0.28, 0.25], 0.8),
            ),
            (
                Region::Slab { d: 1.0 },
                single([0.0, 0.0, 0.0, 0.45], [0.25, 0.28, 0.28, 0.18], 1.0),
                single([0.7, 0.2, 0.0, 0.6], [0.25, 0.28, 0.28, 0.18], 0.8),
            ),
        ];
        for (region, f, g) in cases {
            let pairing = TwoPointPairing::new(region);
            let fg = pairing.image_two_point(&f, &g).unwrap();
            let gf = pairing.image_two_point(&g, &f).unwrap();

            // Hermiticity across two independent evaluations.
            assert!(
                (fg - gf.conj()).norm() <= 1e-8 * fg.norm().max(1e-12),
                "{}: hermiticity violated: {fg} vs conj {gf}",
                region.name()
            );

            // Antisymmetric part = i * boundary commutator pairing, which is
            // evaluated by an entirely different route (signed image
            // expansion of one slot, dual quadrature backends).
            let pe = pair_e_boundary(&region, &f, &g, &cfg).unwrap().value;
            let lhs = fg - gf;
            let rhs = Complex64::new(0.0, pe);
            let scale = lhs.norm().max(pe.abs()).max(1e-12);
            assert!(
                (lhs - rhs).norm() <= 1e-5 * scale,
                "{}: boundary commutator identity violated: {lhs} vs {rhs}",
                region.name()
            );
        }
    }

    #[test]
    fn gram_matrices_are_positive_semidefinite() {
        // Spot-check the eigenvalue routine first.
        let m = vec![
            vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0)],
            vec![Complex64::new(0.0, -1.0), Complex64::new(2.0, 0.0)],
        ];
        let min = hermitian_min_eigenvalue(&m);
        assert!((min - 1.0).abs() <= 1e-12, "eigensolver broken: {min}");

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut family = |count: usize, zlo: f64, zhi: f64, wz: f64| -> Vec<TestFunction> {
            (0..count)
                .map(|_| {
                    let z = rng.gen_range(zlo..zhi);
                    let t = rng.gen_range(-0.3..0.3);
                    let x = rng.gen_range(-0.4..0.4);
                    let y = rng.gen_range(-0.4..0.4);
                    let amp = rng.gen_range(0.5..1.5)
                        * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    single([t, x, y, z], [0.3, 0.3, 0.3, wz], amp)
                })
                .collect()
        };

        let suites: Vec<(Region, Vec<TestFunction>)> = vec![
            (Region::Minkowski, family(3, -0.8, 0.8, 0.3)),
            (Region::HalfSpace, family(2, 0.45, 1.6, 0.35)),
            (Region::HalfSpace, family(5, 0.45, 1.6, 0.35)),
            (Region::Slab { d: 1.0 }, family(4, 0.3, 0.7, 0.22)),
        ];
        for (region, fams) in suites {
            let pairing = TwoPointPairing::new(region);
            let m = pairing.gram(&fams).unwrap();
            for i in 0..m.len() {
                assert!(
                    (m[i][i].im).abs() <= 1e-14 * m[i][i].re.abs().max(1e-300),
                    "diagonal must be real"
                );
                for j in 0..m.len() {
                    assert!(
                        (m[i][j] - m[j][i].conj()).norm()
                            <= 1e-12 * m[i][j].norm().max(1e-300),
                        "gram must be hermitian"
                    );
                }
            }
            let min = hermitian_min_eigenvalue(&m);
            assert!(
                min >= -1e-8,
                "{} gram of size {} has eigenvalue {min:.3e}",
                region.name(),
                m.len()
            );
        }
    }

    #[test]
    fn reflected_disjoint_pairs_obey_the_image_bound() {
        let cases = [
            (
                Region::HalfSpace,
                single([0.0, 0.0, 0.0, 0.5], [0.2, 0.25, 0.25, 0.2], 1.0),
                single([0.1, 0.3, 0.0, 0.8], [0.2, 0.25, 0.25, 0.2], 1.0),
            ),
            (
                Region::Slab { d: 1.0 },
                single([0.0, 0.0, 0.0, 0.42], [0.15, 0.25, 0.25, 0.18], 1.0),
                single([0.1, 0.2, 0.0, 0.58], [0.15, 0.25, 0.25, 0.18], 1.0),
            ),
        ];
        for (region, f, g) in cases {
            assert!(reflected_causally_disjoint(
                &region,
                &f.support_box().unwrap(),
                &g.support_box().unwrap()
            )
            .unwrap());
            let pairing = TwoPointPairing::new(region);
            let vac = pairing.vacuum_two_point(&f, &g).unwrap();
            let img = pairing.image_two_point(&f, &g).unwrap();
            let bound = image_term_bound(&region, &f, &g).unwrap();
            let diff = img - vac;
            assert!(
                diff.norm() <= 1.05 * bound + 1e-10 * vac.norm(),
                "{}: image part {} exceeds its bound {bound:.3e}",
                region.name(),
                diff.norm()
            );
            // With every image spacelike to the partner, the image terms are
            // real: the commutator part is untouched.
            assert!(
                diff.im.abs() <= 1e-8 * vac.norm().max(diff.norm()),
                "{}: image terms should be real, got {diff}",
                region.name()
            );
        }

        // A pair within causal reach of its reflection has no finite bound.
        let f = single([0.0, 0.0, 0.0, 0.3], [0.4, 0.3, 0.3, 0.25], 1.0);
        let g = single([0.8, 0.0, 0.0, 0.4], [0.4, 0.3, 0.3, 0.25], 1.0);
        assert!(image_term_bound(&Region::HalfSpace, &f, &g).is_err());
    }

    #[test]
    fn subtracted_kernel_anchors() {
        // Half-space coincidence: a single image at spatial distance 2z.
        let p = SpacetimePoint::new(0.0, 0.0, 0.0, 1.0);
        let w = subtracted_kernel(&Region::HalfSpace, &p, &p).unwrap();
        let expect = -1.0 / (16.0 * PI * PI);
        assert!(
            (w - expect).abs() <= 1e-13 * expect.abs(),
            "half-space anchor: {w} vs {expect}"
        );
        for z in [0.2, 0.7, 1.9] {
            let p = SpacetimePoint::new(0.3, -0.1, 0.2, z);
            let w = subtracted_kernel(&Region::HalfSpace, &p, &p).unwrap();
            let e = -1.0 / (16.0 * PI * PI * z * z);
            assert!((w - e).abs() <= 1e-13 * e.abs());
        }

        // Slab coincidence at the midplane: 1/48 - 1/16 = -1/24.
        let d = 1.0;
        let mid = SpacetimePoint::new(0.0, 0.0, 0.0, 0.5);
        let w = subtracted_kernel(&Region::Slab { d }, &mid, &mid).unwrap();
        let expect = -1.0 / 24.0;
        assert!(
            (w - expect).abs() <= 1e-12 * expect.abs(),
            "slab midplane: {w} vs {expect}"
        );

        // Twenty interior points against the closed form
        // 1/(48 d²) − 1/(16 d² sin²(π z / d)).
        for k in 1..=20 {
            let z = d * k as f64 / 21.0;
            let p = SpacetimePoint::new(0.0, 0.0, 0.0, z);
            let w = subtracted_kernel(&Region::Slab { d }, &p, &p).unwrap();
            let s = (PI * z / d).sin();
            let e = 1.0 / (48.0 * d * d) - 1.0 / (16.0 * d * d * s * s);
            assert!(
                (w - e).abs() <= 1e-10 * e.abs().max(1.0),
                "closed form mismatch at z = {z}: {w} vs {e}"
            );
            // Mirror symmetry about the midplane.
            let pm = SpacetimePoint::new(0.0, 0.0, 0.0, d - z);
            let wm = subtracted_kernel(&Region::Slab { d }, &pm, &pm).unwrap();
            assert!((w - wm).abs() <= 1e-10 * w.abs());
        }

        // Wide slab limits to the half-space value.
        let p = SpacetimePoint::new(0.0, 0.0, 0.0, 1.0);
        let wide = subtracted_kernel(&Region::Slab { d: 50.0 }, &p, &p).unwrap();
        let half = subtracted_kernel(&Region::HalfSpace, &p, &p).unwrap();
        assert!(
            (wide - half).abs() <= 1e-4 * half.abs(),
            "wide slab {wide} vs half-space {half}"
        );

        // Minkowski subtracts everything.
        let q = SpacetimePoint::new(0.4, 0.1, 0.0, -3.0);
        assert_eq!(subtracted_kernel(&Region::Minkowski, &p, &q).unwrap(), 0.0);
    }

    #[test]
    fn subtracted_kernel_is_symmetric_and_matches_the_exact_ladder() {
        let d = 1.3;
        let region = Region::Slab { d };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..24 {
            let x = SpacetimePoint::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.15..0.85) * d,
            );
            let xp = SpacetimePoint::new(
                x.t + rng.gen_range(-0.2..0.2),
                x.x + rng.gen_range(-1.0..1.0),
                x.y + rng.gen_range(-1.0..1.0),
                rng.gen_range(0.15..0.85) * d,
            );
            let w = match subtracted_kernel(&region, &x, &xp) {
                Ok(w) => w,
                // A draw that happens to land near an image cone is legal
                // to reject; skip it.
                Err(_) => continue,
            };
            let swapped = subtracted_kernel(&region, &xp, &x).unwrap();
            assert!(
                (w - swapped).abs() <= 1e-12 * w.abs().max(1e-300),
                "swap symmetry: {w} vs {swapped}"
            );
            let exact = slab_w_exact(d, &x, &xp);
            assert!(
                (w - exact).abs() <= 1e-10 * exact.abs().max(1e-12),
                "accelerated ladder {w} vs closed form {exact}"
            );
        }
    }

    #[test]
    fn subtracted_kernel_rejects_bad_configurations() {
        let inside = SpacetimePoint::new(0.0, 0.0, 0.0, 0.5);
        let wall = SpacetimePoint::new(0.0, 0.0, 0.0, 0.0);
        // Points must be strictly interior.
        assert!(subtracted_kernel(&Region::HalfSpace, &inside, &wall).is_err());
        assert!(subtracted_kernel(&Region::Slab { d: 1.0 }, &wall, &inside).is_err());
        let above = SpacetimePoint::new(0.0, 0.0, 0.0, 1.2);
        assert!(subtracted_kernel(&Region::Slab { d: 1.0 }, &inside, &above).is_err());

        // Null image pair: |Δt| equals the image distance 2z.
        let a = SpacetimePoint::new(0.0, 0.0, 0.0, 1.0);
        let null = SpacetimePoint::new(2.0, 0.0, 0.0, 1.0);
        let err = subtracted_kernel(&Region::HalfSpace, &a, &null).unwrap_err();
        assert!(
            err.to_string().contains("singular configuration"),
            "unexpected message: {err}"
        );
        // Timelike image pair.
        let timelike = SpacetimePoint::new(3.0, 0.0, 0.0, 1.0);
        assert!(subtracted_kernel(&Region::HalfSpace, &a, &timelike).is_err());
        // Slab: reflection image at the same parameters goes null.
        let b = SpacetimePoint::new(0.0, 0.0, 0.0, 0.3);
        let bn = SpacetimePoint::new(0.6, 0.0, 0.0, 0.3);
        assert!(subtracted_kernel(&Region::Slab { d: 1.0 }, &b, &bn).is_err());
        // The direct light cone is not an obstruction: a timelike pair with
        // all images spacelike evaluates fine.
        let c = SpacetimePoint::new(0.25, 0.0, 0.0, 0.45);
        let w = subtracted_kernel(&Region::Slab { d: 1.0 }, &b, &c).unwrap();
        assert!(w.is_finite());
    }

    #[test]
    fn reflected_singularity_exponents() {
        let deltas = log_spaced_deltas(0.1, 0.004, 10).unwrap();

        // Half-space: reflected interval shrinks linearly, kernel ~ 1/δ.
        let x = SpacetimePoint::new(0.0, 0.0, 0.0, 1.0);
        let fit = singularity_probe(
            &Region::HalfSpace,
            &x,
            |delta| SpacetimePoint::new(2.0 - delta, 0.0, 0.0, 1.0),
            &deltas,
        )
        .unwrap();
        assert!(
            (fit.exponent - 1.0).abs() <= 0.05,
            "half-space exponent {}",
            fit.exponent
        );

        // Same path in Minkowski: the direct kernel stays bounded.
        let fit = singularity_probe(
            &Region::Minkowski,
            &x,
            |delta| SpacetimePoint::new(2.0 - delta, 0.0, 0.0, 1.0),
            &deltas,
        )
        .unwrap();
        assert!(
            fit.exponent.abs() <= 0.05,
            "minkowski control exponent {}",
            fit.exponent
        );

        // Slab: a path hitting the first bounce image cone.
        let d = 1.0;
        let z0 = 0.75 * d;
        let x = SpacetimePoint::new(0.0, 0.0, 0.0, z0);
        let fit = singularity_probe(
            &Region::Slab { d },
            &x,
            |delta| SpacetimePoint::new(0.6, (0.11 + delta).sqrt(), 0.0, z0),
            &deltas,
        )
        .unwrap();
        assert!(
            (fit.exponent - 1.0).abs() <= 0.05,
            "slab bounce exponent {}",
            fit.exponent
        );
        assert_eq!(fit.samples.len(), deltas.len());
        assert!(fit.samples.windows(2).all(|w| w[0].magnitude < w[1].magnitude * 20.0));

        // A path whose direct interval changes sign is rejected.
        let err = singularity_probe(
            &Region::HalfSpace,
            &x,
            |delta| SpacetimePoint::new(1.0 - 10.0 * delta, 0.0, 0.0, 1.2),
            &deltas,
        )
        .unwrap_err();
        assert!(err.to_string().contains("light cone"), "got: {err}");

        // Leaving the interior is rejected.
        assert!(singularity_probe(
            &Region::HalfSpace,
            &x,
            |delta| SpacetimePoint::new(2.0 - delta, 0.0, 0.0, -1.0),
            &deltas,
        )
        .is_err());

        // Probe parameter validation.
        assert!(log_spaced_deltas(0.1, 0.0, 5).is_err());
        assert!(singularity_probe(
            &Region::HalfSpace,
            &x,
            |d| SpacetimePoint::new(2.0 - d, 0.0, 0.0, 1.0),
            &[0.1, 0.09, 0.08, 0.07],
        )
        .is_err());
    }

    /// `∫ bump((u−ca)/wa)·bump((u−δ−cb)/wb) du` along one axis, unit amps.
    fn axis_correlation(a: &BumpTestFunction, b: &BumpTestFunction, axis: usize, delta: f64) -> f64 {
        let (ca, wa) = (a.center[axis], a.halfwidths[axis]);
        let (cb, wb) = (b.center[axis], b.halfwidths[axis]);
        let lo = (ca - wa).max(cb + delta - wb);
        let hi = (ca + wa).min(cb + delta + wb);
        if lo >= hi {
            return 0.0;
        }
        quad::integrate(24, lo, hi, |u| bump((u - ca) / wa) * bump((u - delta - cb) / wb))
    }

    /// `∫ d⁴Δ ∏ᵢ Cᵢ(Δᵢ) / (4π²(Δ⃗² − Δt²))` for one spacelike-separated
    /// term pair: the smeared smooth kernel in correlation form.
    fn smooth_pair_term(a: &BumpTestFunction, b: &BumpTestFunction) -> f64 {
        let order = 20;
        let mut axes: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(4);
        for axis in 0..4 {
            let dc = a.center[axis] - b.center[axis];
            let w = a.halfwidths[axis] + b.halfwidths[axis];
            let (nodes, weights) = quad::gauss_legendre_on(order, dc - w, dc + w);
            let vals: Vec<f64> = nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &wt)| wt * axis_correlation(a, b, axis, x))
                .collect();
            axes.push((nodes, vals));
        }
        let mut total = 0.0;
        for (it, &tv) in axes[0].1.iter().enumerate() {
            if tv == 0.0 {
                continue;
            }
            let t = axes[0].0[it];
            for (ix, &xv) in axes[1].1.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let x = axes[1].0[ix];
                for (iy, &yv) in axes[2].1.iter().enumerate() {
                    if yv == 0.0 {
                        continue;
                    }
                    let y = axes[2].0[iy];
                    let txy = tv * xv * yv;
                    let sq = x * x + y * y - t * t;
                    for (iz, &zv) in axes[3].1.iter().enumerate() {
                        let z = axes[3].0[iz];
                        let denom = sq + z * z;
                        assert!(denom > 0.0, "term pair not spacelike separated");
                        total += txy * zv / denom;
                    }
                }
            }
        }
        a.amplitude * b.amplitude * total / (4.0 * PI * PI)
    }

    #[test]
    fn slab_mode_pairing_matches_the_position_lattice() {
        // The Dirichlet mode representation against the vacuum pairing
        // plus the image lattice evaluated entirely in position space.
        // Supports are chosen so every nontrivial image is spacelike to
        // the partner, keeping the lattice kernel smooth.
        let d = 1.0;
        let region = Region::Slab { d };
        // Time halfwidths and offsets are kept small enough that every lattice
        // image pair stays uniformly spacelike over the whole correlation box,
        // so the position-space kernel is smooth on each quadrature domain.
        let f = single([0.0, 0.0, 0.0, 0.38], [0.2, 0.3, 0.3, 0.18], 1.0);
        let g = single([0.05, 0.1, -0.1, 0.62], [0.2, 0.3, 0.3, 0.18], 0.9);

        let lattice_to = |nwin: i64| -> f64 {
            let mut sum = 0.0;
            for n in -nwin..=nwin {
                let shift = 2.0 * n as f64 * d;
                for bt in &g.terms {
                    if n != 0 {
                        let img = bt.translated_z(shift);
                        for at in &f.terms {
                            sum += smooth_pair_term(at, &img);
                        }
                    }
                    let img = bt.reflected_z().translated_z(shift).scaled(-1.0);
                    for at in &f.terms {
                        sum += smooth_pair_term(at, &img);
                    }
                }
            }
            sum
        };
        let lat20 = lattice_to(20);
        let lat40 = lattice_to(40);
        let window_drift = (lat40 - lat20).abs();
        assert!(
            window_drift <= 1e-4 * lat40.abs(),
            "lattice window not converged: {lat20} vs {lat40}"
        );

        let pairing = TwoPointPairing::new(region);
        let vac = pairing.vacuum_two_point(&f, &g).unwrap();
        let mode = pairing.image_two_point(&f, &g).unwrap();
        let scale = vac.norm().max(mode.norm());
        let residual = (mode - (vac + Complex64::new(lat40, 0.0))).norm();
        assert!(
            residual <= 2e-5 * scale + 2.0 * window_drift,
            "mode representation {mode} vs vacuum {vac} + lattice {lat40:.6e} \
             (residual {residual:.3e}, scale {scale:.3e})"
        );
        // The comparison genuinely resolves the lattice part.
        assert!(
            lat40.abs() >= 20.0 * residual,
            "lattice term {lat40:.3e} drowned by residual {residual:.3e}"
        );
    }

    #[test]
    fn slab_supports_must_be_strictly_interior() {
        let pairing = TwoPointPairing::new(Region::Slab { d: 1.0 });
        let interior = single([0.0, 0.0, 0.0, 0.5], [0.3, 0.3, 0.3, 0.2], 1.0);
        // Touching z = 0.
        let touching = single([0.0, 0.0, 0.0, 0.3], [0.3, 0.3, 0.3, 0.3], 1.0);
        let err = pairing.image_two_point(&touching, &interior).unwrap_err();
        assert!(
            err.to_string().contains("strictly inside"),
            "unexpected message: {err}"
        );
        assert!(pairing.gram(&[interior.clone(), touching.clone()]).is_err());
        // Crossing z = d.
        let crossing = single([0.0, 0.0, 0.0, 0.9], [0.3, 0.3, 0.3, 0.2], 1.0);
        assert!(pairing.image_two_point(&interior, &crossing).is_err());

        let half = TwoPointPairing::new(Region::HalfSpace);
        let below = single([0.0, 0.0, 0.0, -0.4], [0.3, 0.3, 0.3, 0.3], 1.0);
        assert!(half.image_two_point(&below, &interior).is_err());
        // Touching the wall from above is inside the closed half-space.
        let at_wall = single([0.0, 0.0, 0.0, 0.31], [0.3, 0.3, 0.3, 0.31], 1.0);
        assert!(half.image_two_point(&at_wall, &at_wall).is_ok());

        // The zero function is everywhere-supported-nowhere and always fine.
        let zero = TestFunction::zero();
        assert_eq!(
            pairing.image_two_point(&zero, &interior).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }
}
