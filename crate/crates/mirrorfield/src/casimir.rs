//! Renormalized local observables by point splitting on the subtracted kernel.
//!
//! Subtracting the shared short-distance singularity from the two-point
//! function leaves the smooth kernel `W` implemented in [`crate::states`].
//! Every renormalized local quantity here is a derivative of `W` at
//! coincidence:
//!
//! * the renormalized field square `⟨φ²⟩(z)` is `W(x, x)` itself, and
//! * the renormalized energy density `⟨T₀₀⟩(z)` applies the coupling-dependent
//!   energy-density bidifferential operator
//!
//!   ```text
//!   D_ξ = ½ ∂_t ∂_t′  +  (½ − 2ξ) Σ_i ∂_i ∂_i′  −  ξ (∇² + ∇′²)
//!   ```
//!
//!   to `W(x, x′)` and takes `x′ → x`.  The operator is the point-split form
//!   of `½(∂_t φ)² + ½|∇φ|² − ξ∇²(φ²)`, the `00` component of the stress
//!   tensor improved by the curvature coupling `ξ` (flat background, so the
//!   coupling is dynamically inert and appears only here).
//!
//! The coincidence limit is taken numerically: central differences in the two
//! split slots with steps `h` and `h/2`, combined by Richardson extrapolation.
//! Two independent cross-checks pin the numerics down:
//!
//! * exact image-sum closed forms for both geometries at every coupling,
//!   derived by term-by-term differentiation of the reflected ladder
//!   (`Σ_n (2dn+b)⁻⁴` reduces to `π⁴(3−2sin²)/3sin⁴` lattice sums), and
//! * an independent mode-sum oracle for the slab: the Dirichlet eigenmode
//!   expansion with transverse momentum integrated analytically per mode, an
//!   exponential frequency regulator, subtraction of the identically
//!   regulated unbounded-space density, and polynomial extrapolation of the
//!   regulator to zero.
//!
//! The slab's uniform conformal density `−π²/(1440 d⁴)` and the vanishing of
//! the half-space density at `ξ = 1/6` are reproduced by all routes.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{numerics, validation, Result};
use crate::exec;
use crate::geometry::{Region, SpacetimePoint};
use crate::states::subtracted_kernel;

/// Divisor applied to the boundary distance when no explicit differencing
/// step is requested: `h = dist/200` keeps the Richardson-extrapolated
/// truncation error near 1e−10 relative while staying far above the rounding
/// floor of the kernel evaluations.
const DEFAULT_STEP_DIVISOR: f64 = 200.0;

/// A differencing step larger than a tenth of the boundary distance is
/// rejected: the stencil would straddle a plate.
const MAX_STEP_FRACTION: f64 = 0.1;

/// Relative gate on the Richardson step-to-step residual; the extrapolated
/// point-split values land far below this in practice, so tripping it means
/// the kernel was not smooth at the requested point.
const SPLIT_RESIDUAL_TOL: f64 = 1e-5;

/// Relative agreement demanded between the lattice evaluation of `⟨φ²⟩` and
/// its closed form.
const PHI2_CROSS_TOL: f64 = 1e-10;

/// Relative gate on the mode-sum extrapolation residual.
const ORACLE_RESIDUAL_TOL: f64 = 1e-3;

/// Couplings closer to 1/6 than this are treated as exactly conformal.
const CONFORMAL_EPS: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Curvature coupling `ξ` of the field equation.  On a flat background it
/// does not affect the dynamics, but it enters the stress tensor through the
/// improvement term `−ξ∇²(φ²)` and therefore every energy density below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingXi {
    xi: f64,
}

impl CouplingXi {
    pub fn new(xi: f64) -> Result<Self> {
        if !xi.is_finite() || xi < 0.0 {
            return Err(validation(format!(
                "curvature coupling must be a nonnegative finite real, got {xi}"
            )));
        }
        Ok(CouplingXi { xi })
    }

    /// The conformal value `1/6`, at which the slab density is uniform and
    /// the half-space density vanishes.
    pub fn conformal() -> Self {
        CouplingXi { xi: 1.0 / 6.0 }
    }

    /// The minimally coupled value `ξ = 0`.
    pub fn minimal() -> Self {
        CouplingXi { xi: 0.0 }
    }

    pub fn value(&self) -> f64 {
        self.xi
    }

    /// Whether this coupling is (numerically) the conformal one.
    pub fn is_conformal(&self) -> bool {
        (self.xi - 1.0 / 6.0).abs() <= CONFORMAL_EPS
    }
}

/// A value computed by one route together with the absolute deviation from
/// an independent second route evaluated alongside it.
#[derive(Debug, Clone, Copy)]
pub struct CrossCheckedValue {
    pub value: f64,
    pub residual: f64,
}

/// A Richardson-extrapolated point-split value and the magnitude of the last
/// extrapolation correction (an a-posteriori error estimate).
#[derive(Debug, Clone, Copy)]
pub struct PointSplitValue {
    pub value: f64,
    pub residual: f64,
}

/// A mode-sum value extrapolated in the regulator, with the magnitude of the
/// final extrapolation correction.
#[derive(Debug, Clone, Copy)]
pub struct ModeSumValue {
    pub value: f64,
    pub residual: f64,
}

// ---------------------------------------------------------------------------
// Geometry helpers
// ---------------------------------------------------------------------------

/// Distance from `z` to the nearest reflecting plane; also enforces that the
/// point is strictly interior.  Minkowski space has no plates, so every
/// finite `z` is interior at infinite distance.
fn boundary_distance(region: &Region, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(validation(format!("profile height must be finite, got {z}")));
    }
    match *region {
        Region::Minkowski => Ok(f64::INFINITY),
        Region::HalfSpace => {
            if z > 0.0 {
                Ok(z)
            } else {
                Err(validation(format!(
                    "renormalized observables are defined strictly inside the region: \
                     z = {z} is not inside the half-space z > 0"
                )))
            }
        }
        Region::Slab { d } => {
            if z > 0.0 && z < d {
                Ok(z.min(d - z))
            } else {
                Err(validation(format!(
                    "renormalized observables are defined strictly inside the region: \
                     z = {z} is not inside the open slab interior 0 < z < {d}"
                )))
            }
        }
    }
}

fn validate_step(region: &Region, z: f64, h: f64) -> Result<()> {
    let dist = boundary_distance(region, z)?;
    if !h.is_finite() || h <= 0.0 {
        return Err(validation(format!(
            "point-split differencing step must be positive and finite, got {h}"
        )));
    }
    if h > dist * MAX_STEP_FRACTION {
        return Err(validation(format!(
            "point-split differencing step {h} is too large for the distance {dist} \
             to the nearest boundary plane: the stencil must stay well inside the \
             region (h ≤ dist/10)"
        )));
    }
    Ok(())
}

/// Default differencing step at height `z`.
pub fn default_step(region: &Region, z: f64) -> Result<f64> {
    let dist = boundary_distance(region, z)?;
    if dist.is_infinite() {
        // Minkowski: the kernel vanishes identically, any sane step works.
        return Ok(1e-2);
    }
    Ok(dist / DEFAULT_STEP_DIVISOR)
}

// ---------------------------------------------------------------------------
// ⟨φ²⟩
// ---------------------------------------------------------------------------

/// Closed-form renormalized field square.
///
/// Half-space: the single reflected image gives `−1/(16π²z²)`.  Slab: the
/// reflected ladder sums to `1/(48d²) − 1/(16d² sin²(πz/d))` via the exact
/// lattice sums `Σ_{n≠0} (2dn)⁻² = π²/(12d²)` and
/// `Σ_n (2dn+2z)⁻² = π²/(4d² sin²(πz/d))`.
pub fn phi2_image_closed_form(region: &Region, z: f64) -> Result<f64> {
    boundary_distance(region, z)?;
    Ok(match *region {
        Region::Minkowski => 0.0,
        Region::HalfSpace => -1.0 / (16.0 * PI * PI * z * z),
        Region::Slab { d } => {
            let s = (PI * z / d).sin();
            1.0 / (48.0 * d * d) - 1.0 / (16.0 * d * d * s * s)
        }
    })
}

/// Renormalized field square with its internal cross-check: the value is the
/// subtracted kernel at coincidence (an accelerated numeric ladder for the
/// slab), the residual is its deviation from the closed form.  Disagreement
/// beyond 1e−10 relative is a numerics error.
pub fn phi2_detailed(region: &Region, z: f64) -> Result<CrossCheckedValue> {
    let closed = phi2_image_closed_form(region, z)?;
    if matches!(region, Region::Minkowski) {
        return Ok(CrossCheckedValue { value: 0.0, residual: 0.0 });
    }
    let p = SpacetimePoint::new(0.0, 0.0, 0.0, z);
    let lattice = subtracted_kernel(region, &p, &p)?;
    let residual = (lattice - closed).abs();
    if residual > PHI2_CROSS_TOL * closed.abs() {
        return Err(numerics(format!(
            "lattice and closed-form evaluations of the renormalized field square \
             disagree at z = {z}: {lattice:e} vs {closed:e} (residual {residual:e})"
        )));
    }
    Ok(CrossCheckedValue { value: lattice, residual })
}

/// Renormalized field square `⟨φ²⟩(z) = W(x, x)`.
pub fn phi2_renormalized(region: &Region, z: f64) -> Result<f64> {
    Ok(phi2_detailed(region, z)?.value)
}

// ---------------------------------------------------------------------------
// Point-split second derivatives of W
// ---------------------------------------------------------------------------

/// The second derivatives of `W(x, x′)` at coincidence that the
/// energy-density operator consumes, at one differencing step.
#[derive(Debug, Clone, Copy)]
struct RawDerivatives {
    /// `∂_t ∂_t′ W`
    tt: f64,
    /// `∂_i ∂_i′ W` for `i = x, y, z`
    mixed: [f64; 3],
    /// `∇² W` in the first slot (spatial Laplacian at fixed `x′`)
    lap_first: f64,
    /// `∇′² W` in the second slot
    lap_second: f64,
}

/// Unit displacement along axis `a` (0 = t, 1 = x, 2 = y, 3 = z) scaled by
/// `s`.
fn displaced(p: &SpacetimePoint, axis: usize, s: f64) -> SpacetimePoint {
    let mut c = [p.t, p.x, p.y, p.z];
    c[axis] += s;
    SpacetimePoint::new(c[0], c[1], c[2], c[3])
}

/// All required second derivatives by central differences with step `h`,
/// second-order accurate in `h`.
fn raw_derivatives(region: &Region, base: &SpacetimePoint, h: f64) -> Result<RawDerivatives> {
    let w = |a: &SpacetimePoint, b: &SpacetimePoint| subtracted_kernel(region, a, b);
    let mixed_axis = |axis: usize| -> Result<f64> {
        let pp = w(&displaced(base, axis, h), &displaced(base, axis, h))?;
        let pm = w(&displaced(base, axis, h), &displaced(base, axis, -h))?;
        let mp = w(&displaced(base, axis, -h), &displaced(base, axis, h))?;
        let mm = w(&displaced(base, axis, -h), &displaced(base, axis, -h))?;
        Ok((pp - pm - mp + mm) / (4.0 * h * h))
    };
    let center = w(base, base)?;
    let second_first = |axis: usize| -> Result<f64> {
        let p = w(&displaced(base, axis, h), base)?;
        let m = w(&displaced(base, axis, -h), base)?;
        Ok((p - 2.0 * center + m) / (h * h))
    };
    let second_second = |axis: usize| -> Result<f64> {
        let p = w(base, &displaced(base, axis, h))?;
        let m = w(base, &displaced(base, axis, -h))?;
        Ok((p - 2.0 * center + m) / (h * h))
    };

    let tt = mixed_axis(0)?;
    let mixed = [mixed_axis(1)?, mixed_axis(2)?, mixed_axis(3)?];
    let lap_first = second_first(1)? + second_first(2)? + second_first(3)?;
    let lap_second = second_second(1)? + second_second(2)? + second_second(3)?;
    Ok(RawDerivatives { tt, mixed, lap_first, lap_second })
}

/// Assemble the energy density from the split derivatives:
/// `½ W_tt′ + (½ − 2ξ) Σ_i W_ii′ − ξ (∇²W + ∇′²W)`.
fn assemble_t00(xi: f64, d: &RawDerivatives) -> f64 {
    0.5 * d.tt + (0.5 - 2.0 * xi) * (d.mixed[0] + d.mixed[1] + d.mixed[2])
        - xi * (d.lap_first + d.lap_second)
}

/// The derivative of the assembled density with respect to the coupling:
/// `−2 Σ_i W_ii′ − (∇²W + ∇′²W)`.
fn assemble_xi_slope(d: &RawDerivatives) -> f64 {
    -2.0 * (d.mixed[0] + d.mixed[1] + d.mixed[2]) - (d.lap_first + d.lap_second)
}

/// Natural magnitude of the assembled expression: the same combination with
/// every term taken in absolute value.  Near-zero densities (the conformal
/// half-space) are judged against this scale rather than their own size.
fn assemble_scale(xi: f64, d: &RawDerivatives) -> f64 {
    0.5 * d.tt.abs()
        + (0.5 - 2.0 * xi).abs() * (d.mixed[0].abs() + d.mixed[1].abs() + d.mixed[2].abs())
        + xi * (d.lap_first.abs() + d.lap_second.abs())
}

/// Richardson-extrapolated point-split evaluation shared by the density and
/// its coupling slope.
fn point_split_assembled(
    region: &Region,
    z: f64,
    h: f64,
    assemble: impl Fn(&RawDerivatives) -> f64,
    scale_of: impl Fn(&RawDerivatives) -> f64,
) -> Result<PointSplitValue> {
    validate_step(region, z, h)?;
    if matches!(region, Region::Minkowski) {
        // The subtracted kernel vanishes identically; so do all derivatives.
        return Ok(PointSplitValue { value: 0.0, residual: 0.0 });
    }
    let base = SpacetimePoint::new(0.0, 0.0, 0.0, z);
    let coarse = raw_derivatives(region, &base, h)?;
    let fine = raw_derivatives(region, &base, 0.5 * h)?;
    let vc = assemble(&coarse);
    let vf = assemble(&fine);
    // Central differences are even in h, so the h² error cancels in
    // (4·fine − coarse)/3 and the step-to-step shift bounds what remains.
    let value = (4.0 * vf - vc) / 3.0;
    let residual = (vf - vc).abs() / 3.0;
    let scale = scale_of(&fine).max(f64::MIN_POSITIVE);
    if residual > SPLIT_RESIDUAL_TOL * scale {
        return Err(numerics(format!(
            "point-split extrapolation did not settle at z = {z}: step residual \
             {residual:e} exceeds {SPLIT_RESIDUAL_TOL:e} of the term scale {scale:e}"
        )));
    }
    Ok(PointSplitValue { value, residual })
}

/// Renormalized energy density by numerical point splitting with an explicit
/// differencing step.
pub fn t00_point_split(region: &Region, z: f64, xi: CouplingXi, h: f64) -> Result<PointSplitValue> {
    point_split_assembled(
        region,
        z,
        h,
        |d| assemble_t00(xi.value(), d),
        |d| assemble_scale(xi.value(), d),
    )
}

/// Renormalized energy density `⟨T₀₀⟩(z)` at the default differencing step.
pub fn t00_renormalized(region: &Region, z: f64, xi: CouplingXi) -> Result<f64> {
    let h = default_step(region, z)?;
    Ok(t00_point_split(region, z, xi, h)?.value)
}

/// Point-split measurement of `d⟨T₀₀⟩/dξ` at fixed height.  The density is
/// affine in the coupling, so this single number determines it for every `ξ`
/// together with one reference evaluation.
pub fn t00_xi_slope(region: &Region, z: f64, h: f64) -> Result<PointSplitValue> {
    point_split_assembled(region, z, h, assemble_xi_slope, |d| {
        2.0 * (d.mixed[0].abs() + d.mixed[1].abs() + d.mixed[2].abs())
            + d.lap_first.abs()
            + d.lap_second.abs()
    })
}

/// Exact image-sum energy density.
///
/// Differentiating the reflected ladder term by term and evaluating the
/// lattice sums in closed form gives, with `s = sin(πz/d)`:
///
/// * half-space: `(6ξ − 1)/(16π² z⁴)`;
/// * slab: `−π²/(1440 d⁴) + (6ξ − 1) π² (3 − 2s²)/(48 d⁴ s⁴)`.
///
/// The slab expression reduces to the half-space one as `d → ∞` at fixed
/// `z`, and at the conformal coupling the `z`-dependent part drops out,
/// leaving the uniform density `−π²/(1440 d⁴)`.
pub fn t00_image_closed_form(region: &Region, z: f64, xi: CouplingXi) -> Result<f64> {
    boundary_distance(region, z)?;
    let xi = xi.value();
    Ok(match *region {
        Region::Minkowski => 0.0,
        Region::HalfSpace => (6.0 * xi - 1.0) / (16.0 * PI * PI * z.powi(4)),
        Region::Slab { d } => {
            let s2 = (PI * z / d).sin().powi(2);
            let uniform = -PI * PI / (1440.0 * d.powi(4));
            let shaped =
                (6.0 * xi - 1.0) * PI * PI * (3.0 - 2.0 * s2) / (48.0 * d.powi(4) * s2 * s2);
            uniform + shaped
        }
    })
}

// ---------------------------------------------------------------------------
// Mode-sum oracle
// ---------------------------------------------------------------------------

/// Default regulator ladder for [`mode_sum_oracle`]: six values in geometric
/// progression from `0.12·d`, ratio 0.8.  Large enough that subtracting the
/// `ε⁻⁴` unbounded-space density costs only a few digits, small enough that
/// the even polynomial extrapolation converges.
pub fn default_regulators(d: f64) -> Vec<f64> {
    (0..6).map(|i| 0.12 * d * 0.8f64.powi(i)).collect()
}

/// Regulated slab energy density from the Dirichlet mode expansion, exactly.
///
/// Modes `sin(nπz/d)` with transverse momentum integrated analytically per
/// mode give, with `κ_n = nπ/d` and regulator `e^{−εω}`:
///
/// ```text
/// ⟨T₀₀⟩_ε(z) = 1/(2πd) Σ_{n≥1} [ ½ I₂(κ_n) + cos(2κ_n z)·(−½ I₂(κ_n) + (½−2ξ) κ_n² I₀(κ_n)) ]
/// I₂(κ) = ∫_κ^∞ ω² e^{−εω} dω = e^{−εκ}(κ²/ε + 2κ/ε² + 2/ε³),   I₀(κ) = e^{−εκ}/ε
/// ```
///
/// The sums over `n` are geometric-series derivatives and are evaluated in
/// closed form, so the only numerical step left to the oracle is the
/// extrapolation `ε → 0`.
fn slab_regulated_density(d: f64, z: f64, xi: f64, eps: f64) -> f64 {
    let a = PI * eps / d;
    let theta = 2.0 * PI * z / d;
    let ema = (-a).exp();
    // Σ n^j e^{−an} for j = 0, 1, 2.
    let s0 = ema / (1.0 - ema);
    let s1 = ema / ((1.0 - ema) * (1.0 - ema));
    let s2 = ema * (1.0 + ema) / ((1.0 - ema) * (1.0 - ema) * (1.0 - ema));
    // Σ n^j cos(nθ) e^{−an} as real parts of the same series at x = e^{−a+iθ}.
    let one = Complex64::new(1.0, 0.0);
    let x = Complex64::from_polar(ema, theta);
    let c0 = (x / (one - x)).re;
    let c1 = (x / ((one - x) * (one - x))).re;
    let c2 = (x * (one + x) / ((one - x) * (one - x) * (one - x))).re;

    let k = PI / d;
    let e1 = 1.0 / eps;
    let e2 = e1 * e1;
    let e3 = e2 * e1;
    let i2_all = k * k * s2 * e1 + 2.0 * k * s1 * e2 + 2.0 * s0 * e3;
    let i2_cos = k * k * c2 * e1 + 2.0 * k * c1 * e2 + 2.0 * c0 * e3;
    let i0k2_cos = k * k * c2 * e1;
    (0.5 * i2_all - 0.5 * i2_cos + (0.5 - 2.0 * xi) * i0k2_cos) / (2.0 * PI * d)
}

/// The identically regulated unbounded-space density
/// `∫ d³k/(2π)³ ω e^{−εω}/1? ` — for the massless field this integral is
/// `3/(2π²ε⁴)` and carries the entire quartic divergence.
fn minkowski_regulated_density(eps: f64) -> f64 {
    3.0 / (2.0 * PI * PI * eps.powi(4))
}

/// Regulated slab-minus-vacuum density at one regulator value; exposed for
/// the subtraction-sanity tests.
pub fn regulated_density_difference(region: &Region, z: f64, xi: CouplingXi, eps: f64) -> Result<f64> {
    let d = match *region {
        Region::Slab { d } => d,
        _ => {
            return Err(validation(
                "the mode-sum construction needs the discrete Dirichlet spectrum of the \
                 slab; no other region has one"
                    .to_string(),
            ))
        }
    };
    boundary_distance(region, z)?;
    if !eps.is_finite() || eps <= 0.0 {
        return Err(validation(format!("regulator must be positive and finite, got {eps}")));
    }
    Ok(slab_regulated_density(d, z, xi.value(), eps) - minkowski_regulated_density(eps))
}

/// Neville polynomial extrapolation of `(t_i, v_i)` samples to `t = 0`.
/// Returns the value and the magnitude of the final degree's correction.
fn neville_to_zero(ts: &[f64], vs: &[f64]) -> (f64, f64) {
    let n = ts.len();
    let mut p = vs.to_vec();
    let mut top = p[0];
    let mut correction = 0.0;
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (ts[i + m] * p[i] - ts[i] * p[i + 1]) / (ts[i + m] - ts[i]);
        }
        correction = (p[0] - top).abs();
        top = p[0];
    }
    (top, correction)
}

/// Independent energy-density oracle for the slab.
///
/// Evaluates [`regulated_density_difference`] at each regulator value — the
/// quartic, cubic, and quadratic divergences cancel identically between the
/// slab and unbounded-space terms — and extrapolates the even series in `ε`
/// to zero by Neville's algorithm in `ε²`.
pub fn mode_sum_oracle(
    region: &Region,
    z: f64,
    xi: CouplingXi,
    epsilons: &[f64],
) -> Result<ModeSumValue> {
    let d = match *region {
        Region::Slab { d } => d,
        _ => {
            return Err(validation(
                "the mode-sum construction needs the discrete Dirichlet spectrum of the \
                 slab; no other region has one"
                    .to_string(),
            ))
        }
    };
    boundary_distance(region, z)?;
    if epsilons.len() < 3 {
        return Err(validation(format!(
            "regulator extrapolation needs at least 3 decreasing values, got {}",
            epsilons.len()
        )));
    }
    for pair in epsilons.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(validation(format!(
                "regulator values must be strictly decreasing, got {:?}",
                epsilons
            )));
        }
    }
    for &e in epsilons {
        if !e.is_finite() || e <= 0.0 {
            return Err(validation(format!("regulator must be positive and finite, got {e}")));
        }
    }
    if epsilons[0] > d {
        return Err(validation(format!(
            "largest regulator {} exceeds the slab width {d}; the regulated sum would \
             not resolve a single mode",
            epsilons[0]
        )));
    }
    if *epsilons.last().unwrap() < 1e-3 * d {
        return Err(validation(format!(
            "smallest regulator {} is below 1e-3 of the slab width {d}: subtracting the \
             quartically divergent vacuum term would leave no significant digits",
            epsilons.last().unwrap()
        )));
    }

    let ts: Vec<f64> = epsilons.iter().map(|e| e * e).collect();
    let vs: Vec<f64> = epsilons
        .iter()
        .map(|&e| slab_regulated_density(d, z, xi.value(), e) - minkowski_regulated_density(e))
        .collect();
    let (value, correction) = neville_to_zero(&ts, &vs);
    let scale = value.abs().max(PI * PI / (1440.0 * d.powi(4)));
    if !value.is_finite() || correction > ORACLE_RESIDUAL_TOL * scale {
        return Err(numerics(format!(
            "mode-sum extrapolation did not converge at z = {z}: final correction \
             {correction:e} against scale {scale:e}"
        )));
    }
    Ok(ModeSumValue { value, residual: correction })
}

// ---------------------------------------------------------------------------
// Integrated energy
// ---------------------------------------------------------------------------

/// Energy per unit plate area at the conformal coupling: the uniform density
/// times the width, `d · t00(d/2) = −π²/(1440 d³)`.
///
/// Rejected for any other coupling: away from `ξ = 1/6` the density grows
/// like the inverse fourth power of the distance to the plates, so its
/// integral across the slab diverges and "total energy" has no meaning in
/// this construction.
pub fn energy_per_area(d: f64, xi: CouplingXi) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(validation(format!("slab width must be positive and finite, got {d}")));
    }
    if !xi.is_conformal() {
        return Err(validation(format!(
            "energy per area is defined only at the conformal coupling 1/6: at ξ = {} \
             the density is non-integrable at the plates",
            xi.value()
        )));
    }
    let region = Region::slab(d)?;
    Ok(d * t00_renormalized(&region, 0.5 * d, CouplingXi::conformal())?)
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

/// A request for renormalized profiles over a set of interior heights.
#[derive(Debug, Clone)]
pub struct ProfileRequest {
    region: Region,
    z_samples: Vec<f64>,
    xi: CouplingXi,
    step: Option<f64>,
}

/// One row of a profile: both renormalized observables at a height, each
/// with its accuracy diagnostic, plus the independent oracle where one
/// exists (slab only).
#[derive(Debug, Clone, Copy)]
pub struct ProfilePoint {
    pub z: f64,
    pub phi2: f64,
    pub phi2_residual: f64,
    pub t00: f64,
    pub t00_residual: f64,
    pub oracle_t00: Option<f64>,
    pub oracle_residual: Option<f64>,
}

impl ProfileRequest {
    /// Profile with the default per-height differencing step.
    pub fn new(region: Region, z_samples: Vec<f64>, xi: CouplingXi) -> Result<Self> {
        Self::build(region, z_samples, xi, None)
    }

    /// Profile with one explicit differencing step used at every height; it
    /// must be admissible at the height closest to a boundary.
    pub fn with_step(region: Region, z_samples: Vec<f64>, xi: CouplingXi, step: f64) -> Result<Self> {
        Self::build(region, z_samples, xi, Some(step))
    }

    fn build(
        region: Region,
        z_samples: Vec<f64>,
        xi: CouplingXi,
        step: Option<f64>,
    ) -> Result<Self> {
        if matches!(region, Region::Minkowski) {
            return Err(validation(
                "profiles need a reflecting boundary; without plates both renormalized \
                 observables vanish identically"
                    .to_string(),
            ));
        }
        if z_samples.is_empty() {
            return Err(validation("profile needs at least one interior height".to_string()));
        }
        for &z in &z_samples {
            boundary_distance(&region, z)?;
            if let Some(h) = step {
                validate_step(&region, z, h)?;
            }
        }
        Ok(ProfileRequest { region, z_samples, xi, step })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn xi(&self) -> CouplingXi {
        self.xi
    }

    /// Evaluate every height.  Points are independent, so they are computed
    /// concurrently when the `parallel` feature is active; rows come back
    /// ordered by increasing `z` either way, bit-identical across thread
    /// counts.
    pub fn evaluate(&self) -> Result<Vec<ProfilePoint>> {
        let mut zs = self.z_samples.clone();
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let region = self.region.clone();
        let xi = self.xi;
        let step = self.step;
        let rows: Vec<Result<ProfilePoint>> = exec::map_collect(zs.len(), |i| {
            let z = zs[i];
            let phi2 = phi2_detailed(&region, z)?;
            let h = match step {
                Some(h) => h,
                None => default_step(&region, z)?,
            };
            let t00 = t00_point_split(&region, z, xi, h)?;
            let (oracle_t00, oracle_residual) = match region {
                Region::Slab { d } => {
                    let o = mode_sum_oracle(&region, z, xi, &default_regulators(d))?;
                    (Some(o.value), Some(o.residual))
                }
                _ => (None, None),
            };
            Ok(ProfilePoint {
                z,
                phi2: phi2.value,
                phi2_residual: phi2.residual,
                t00: t00.value,
                t00_residual: t00.residual,
                oracle_t00,
                oracle_residual,
            })
        });
        rows.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab(d: f64) -> Region {
        Region::slab(d).unwrap()
    }

    const CONFORMAL_DENSITY: f64 = -PI * PI / 1440.0;

    #[test]
    fn field_square_anchors() {
        // Half-space at unit height: the single image gives −1/(16π²).
        let hs = phi2_renormalized(&Region::HalfSpace, 1.0).unwrap();
        assert!((hs - (-1.0 / (16.0 * PI * PI))).abs() < 1e-15);
        assert!((hs - (-6.33257e-3)).abs() < 1e-8);

        // Slab midpoint: −1/24.
        let mid = phi2_renormalized(&slab(1.0), 0.5).unwrap();
        assert!((mid - (-1.0 / 24.0)).abs() < 1e-12, "midpoint {mid}");

        // The lattice route and the closed form agree everywhere tested.
        for &(d, z) in &[(1.0, 0.1), (1.0, 0.37), (2.5, 1.9), (0.3, 0.02)] {
            let det = phi2_detailed(&slab(d), z).unwrap();
            let closed = phi2_image_closed_form(&slab(d), z).unwrap();
            assert!(
                (det.value - closed).abs() <= 1e-10 * closed.abs(),
                "d={d} z={z}: {} vs {closed}",
                det.value
            );
            assert!(det.residual <= 1e-10 * closed.abs());
        }

        // Wide slab at fixed height approaches the half-space value.
        let wide = phi2_renormalized(&slab(50.0), 1.0).unwrap();
        assert!(
            (wide - hs).abs() <= 1e-4 * hs.abs(),
            "wide-slab limit: {wide} vs {hs}"
        );

        // Minkowski space has nothing to renormalize away.
        assert_eq!(phi2_renormalized(&Region::Minkowski, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn field_square_scaling_laws() {
        // ⟨φ²⟩ scales as the inverse square of all lengths.
        let base_hs = phi2_renormalized(&Region::HalfSpace, 0.7).unwrap();
        let scaled_hs = phi2_renormalized(&Region::HalfSpace, 2.1).unwrap();
        assert!((scaled_hs * 9.0 - base_hs).abs() <= 1e-8 * base_hs.abs());

        let base = phi2_renormalized(&slab(1.3), 0.4).unwrap();
        let scaled = phi2_renormalized(&slab(2.6), 0.8).unwrap();
        assert!((scaled * 4.0 - base).abs() <= 1e-8 * base.abs());
    }

    #[test]
    fn energy_density_conformal_slab_is_uniform() {
        let region = slab(1.0);
        let xi = CouplingXi::conformal();
        let mut values = Vec::new();
        for &z in &[0.2, 0.25, 0.4, 0.5, 0.75] {
            let v = t00_renormalized(&region, z, xi).unwrap();
            assert!(
                (v - CONFORMAL_DENSITY).abs() <= 1e-6 * CONFORMAL_DENSITY.abs(),
                "z={z}: {v} vs {CONFORMAL_DENSITY}"
            );
            values.push(v);
        }
        let spread = values.iter().cloned().fold(f64::MIN, f64::max)
            - values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 1e-6 * CONFORMAL_DENSITY.abs(), "spread {spread}");
        // Headline number: −π²/1440 ≈ −6.85389e−3.
        assert!((CONFORMAL_DENSITY - (-6.85389e-3)).abs() < 1e-8);
    }

    #[test]
    fn energy_density_conformal_half_space_vanishes() {
        let xi = CouplingXi::conformal();
        for &z in &[0.5, 1.0, 2.0] {
            let h = default_step(&Region::HalfSpace, z).unwrap();
            let v = t00_point_split(&Region::HalfSpace, z, xi, h).unwrap();
            // Judged against the natural size of the minimally coupled
            // density at the same height.
            let scale = 1.0 / (16.0 * PI * PI * z.powi(4));
            assert!(
                v.value.abs() <= 1e-8 * scale,
                "z={z}: {} vs scale {scale}",
                v.value
            );
        }
    }

    #[test]
    fn energy_density_matches_closed_form_for_general_couplings() {
        let couplings = [0.0, 1.0 / 12.0, 1.0 / 6.0, 0.3];
        for &(ref region, z) in &[
            (Region::HalfSpace, 0.8),
            (Region::HalfSpace, 1.0),
            (slab(1.0), 0.3),
            (slab(1.0), 0.5),
            (slab(1.7), 1.2),
        ] {
            for &xi in &couplings {
                let c = CouplingXi::new(xi).unwrap();
                let numeric = t00_renormalized(region, z, c).unwrap();
                let closed = t00_image_closed_form(region, z, c).unwrap();
                let scale = closed.abs().max(CONFORMAL_DENSITY.abs());
                assert!(
                    (numeric - closed).abs() <= 1e-6 * scale,
                    "{} z={z} xi={xi}: {numeric} vs {closed}",
                    region.name()
                );
            }
        }
    }

    #[test]
    fn energy_density_is_affine_in_the_coupling() {
        // Three couplings are collinear, and the measured slope matches the
        // direct point-split derivative with respect to the coupling.
        for &(ref region, z) in &[(Region::HalfSpace, 1.0), (slab(1.0), 0.35)] {
            let v0 = t00_renormalized(region, z, CouplingXi::minimal()).unwrap();
            let vh = t00_renormalized(region, z, CouplingXi::new(1.0 / 12.0).unwrap()).unwrap();
            let v1 = t00_renormalized(region, z, CouplingXi::conformal()).unwrap();
            let spread = (v1 - v0).abs().max(1e-12);
            assert!(
                (vh - 0.5 * (v0 + v1)).abs() <= 1e-6 * spread,
                "collinearity at z={z}: {v0} {vh} {v1}"
            );

            let h = default_step(region, z).unwrap();
            let slope = t00_xi_slope(region, z, h).unwrap().value;
            let measured = (v1 - v0) * 6.0;
            assert!(
                (slope - measured).abs() <= 1e-6 * slope.abs(),
                "slope at z={z}: {slope} vs {measured}"
            );
        }
    }

    #[test]
    fn energy_density_scaling_law() {
        // t00 scales as the inverse fourth power of all lengths.
        let base = t00_renormalized(&slab(1.0), 0.3, CouplingXi::minimal()).unwrap();
        let scaled = t00_renormalized(&slab(2.0), 0.6, CouplingXi::minimal()).unwrap();
        assert!(
            (scaled * 16.0 - base).abs() <= 1e-8 * base.abs(),
            "{base} vs {}",
            scaled * 16.0
        );

        let base_hs = t00_renormalized(&Region::HalfSpace, 0.5, CouplingXi::minimal()).unwrap();
        let scaled_hs = t00_renormalized(&Region::HalfSpace, 1.5, CouplingXi::minimal()).unwrap();
        assert!((scaled_hs * 81.0 - base_hs).abs() <= 1e-8 * base_hs.abs());
    }

    #[test]
    fn slab_profile_approaches_half_space_at_large_width() {
        // Fixed height, receding far plate: both observables converge to the
        // single-plate profile.
        let z = 1.0;
        let wide = slab(50.0);
        let phi2_wide = phi2_renormalized(&wide, z).unwrap();
        let phi2_hs = phi2_renormalized(&Region::HalfSpace, z).unwrap();
        assert!((phi2_wide - phi2_hs).abs() <= 1e-3 * phi2_hs.abs());

        let t_wide = t00_renormalized(&wide, z, CouplingXi::minimal()).unwrap();
        let t_hs = t00_renormalized(&Region::HalfSpace, z, CouplingXi::minimal()).unwrap();
        assert!(
            (t_wide - t_hs).abs() <= 1e-3 * t_hs.abs(),
            "{t_wide} vs {t_hs}"
        );
    }

    #[test]
    fn mode_sum_oracle_agrees_with_point_splitting() {
        let region = slab(1.0);
        let regs = default_regulators(1.0);

        // Conformal midpoint: the headline density to better than 1e−4.
        let o = mode_sum_oracle(&region, 0.5, CouplingXi::conformal(), &regs).unwrap();
        assert!(
            (o.value - CONFORMAL_DENSITY).abs() <= 1e-4,
            "oracle {} vs {CONFORMAL_DENSITY}",
            o.value
        );
        assert!(o.residual <= 1e-4);

        // Two-percent agreement with the independent point-split route at
        // three interior heights, both at the conformal and the minimal
        // coupling.
        for &xi in &[CouplingXi::conformal(), CouplingXi::minimal()] {
            for &z in &[0.25, 0.5, 0.7] {
                let oracle = mode_sum_oracle(&region, z, xi, &regs).unwrap().value;
                let split = t00_renormalized(&region, z, xi).unwrap();
                assert!(
                    (oracle - split).abs() <= 0.02 * split.abs().max(CONFORMAL_DENSITY.abs()),
                    "xi={} z={z}: oracle {oracle} vs split {split}",
                    xi.value()
                );
            }
        }

        // Mirror symmetry of the mode sum about the midplane.
        let a = mode_sum_oracle(&region, 0.3, CouplingXi::minimal(), &regs).unwrap().value;
        let b = mode_sum_oracle(&region, 0.7, CouplingXi::minimal(), &regs).unwrap().value;
        assert!((a - b).abs() <= 1e-6 * a.abs());
    }

    #[test]
    fn mode_sum_subtraction_cancels_the_divergences() {
        // The raw regulated densities blow up as the regulator shrinks; the
        // subtracted differences stay on the scale of the answer.  That is
        // only possible if the divergent parts cancel identically.
        let region = slab(1.0);
        let xi = CouplingXi::conformal();
        let mut raw = Vec::new();
        let mut diff = Vec::new();
        for &e in &default_regulators(1.0) {
            raw.push(minkowski_regulated_density(e));
            diff.push(regulated_density_difference(&region, 0.5, xi, e).unwrap());
        }
        assert!(raw.last().unwrap() / raw.first().unwrap() > 20.0);
        for &v in &diff {
            assert!(v.is_finite());
            assert!(v.abs() <= 100.0 * CONFORMAL_DENSITY.abs(), "unsubtracted growth: {v}");
        }
        // Smooth variation in the regulator: consecutive differences shrink.
        let d0 = (diff[1] - diff[0]).abs();
        let d_last = (diff[diff.len() - 1] - diff[diff.len() - 2]).abs();
        assert!(d_last < d0);
    }

    #[test]
    fn mode_sum_rejects_bad_requests() {
        let region = slab(1.0);
        let xi = CouplingXi::conformal();
        // Too few regulators.
        assert!(mode_sum_oracle(&region, 0.5, xi, &[0.1, 0.05]).is_err());
        // Not decreasing.
        assert!(mode_sum_oracle(&region, 0.5, xi, &[0.05, 0.1, 0.2]).is_err());
        // Wrong region.
        assert!(mode_sum_oracle(&Region::HalfSpace, 0.5, xi, &[0.1, 0.08, 0.06]).is_err());
        // Boundary height.
        assert!(mode_sum_oracle(&region, 0.0, xi, &[0.1, 0.08, 0.06]).is_err());
        // Regulator too large or vanishing.
        assert!(mode_sum_oracle(&region, 0.5, xi, &[2.0, 1.5, 1.2]).is_err());
        assert!(mode_sum_oracle(&region, 0.5, xi, &[0.1, 0.01, 0.0]).is_err());
    }

    #[test]
    fn energy_per_area_values_and_scaling() {
        let e1 = energy_per_area(1.0, CouplingXi::conformal()).unwrap();
        assert!(
            (e1 - (-PI * PI / 1440.0)).abs() <= 1e-6 * (PI * PI / 1440.0),
            "{e1}"
        );
        let e2 = energy_per_area(2.0, CouplingXi::conformal()).unwrap();
        assert!(
            (e2 * 8.0 - e1).abs() <= 1e-8 * e1.abs(),
            "width scaling: {e1} vs {}",
            e2 * 8.0
        );
        // Any non-conformal coupling is rejected: the density is
        // non-integrable at the plates.
        assert!(energy_per_area(1.0, CouplingXi::minimal()).is_err());
        assert!(energy_per_area(-1.0, CouplingXi::conformal()).is_err());
    }

    #[test]
    fn point_split_validation() {
        let region = slab(1.0);
        let xi = CouplingXi::conformal();
        // Boundary and exterior heights.
        assert!(t00_renormalized(&region, 0.0, xi).is_err());
        assert!(t00_renormalized(&region, 1.0, xi).is_err());
        assert!(t00_renormalized(&region, -0.5, xi).is_err());
        assert!(t00_renormalized(&Region::HalfSpace, 0.0, xi).is_err());
        assert!(phi2_renormalized(&region, 1.0).is_err());
        // Oversized differencing step.
        assert!(t00_point_split(&region, 0.5, xi, 0.2).is_err());
        assert!(t00_point_split(&region, 0.5, xi, 0.0).is_err());
        // Negative coupling never constructs.
        assert!(CouplingXi::new(-0.1).is_err());
        assert!(CouplingXi::new(f64::NAN).is_err());
        // Minkowski region: densities vanish without any machinery.
        assert_eq!(t00_renormalized(&Region::Minkowski, 0.3, xi).unwrap(), 0.0);
    }

    #[test]
    fn profiles_evaluate_deterministically() {
        let req = ProfileRequest::new(
            slab(1.0),
            vec![0.75, 0.25, 0.5],
            CouplingXi::conformal(),
        )
        .unwrap();
        let rows = req.evaluate().unwrap();
        assert_eq!(rows.len(), 3);
        // Ordered by height regardless of request order.
        assert!(rows.windows(2).all(|w| w[0].z < w[1].z));
        for row in &rows {
            assert!((row.t00 - CONFORMAL_DENSITY).abs() <= 1e-6 * CONFORMAL_DENSITY.abs());
            let oracle = row.oracle_t00.expect("slab rows carry the oracle");
            assert!((oracle - row.t00).abs() <= 0.02 * row.t00.abs());
            assert!(row.phi2_residual <= 1e-10 * row.phi2.abs());
            // The step residual reports the eliminated second-order error,
            // three orders above the extrapolated value's actual accuracy.
            assert!(row.t00_residual <= 1e-3 * CONFORMAL_DENSITY.abs());
        }

        // Bitwise repeatability.
        let again = req.evaluate().unwrap();
        for (a, b) in rows.iter().zip(again.iter()) {
            assert_eq!(a.t00.to_bits(), b.t00.to_bits());
            assert_eq!(a.phi2.to_bits(), b.phi2.to_bits());
            assert_eq!(a.oracle_t00.unwrap().to_bits(), b.oracle_t00.unwrap().to_bits());
        }

        // Half-space rows have no oracle column.
        let hs = ProfileRequest::new(Region::HalfSpace, vec![1.0], CouplingXi::minimal())
            .unwrap()
            .evaluate()
            .unwrap();
        assert!(hs[0].oracle_t00.is_none());
        assert!((hs[0].phi2 - (-6.33257e-3)).abs() < 1e-8);

        // Invalid requests never construct.
        assert!(ProfileRequest::new(slab(1.0), vec![0.5, 1.0], CouplingXi::minimal()).is_err());
        assert!(ProfileRequest::new(Region::Minkowski, vec![0.5], CouplingXi::minimal()).is_err());
        assert!(ProfileRequest::new(slab(1.0), vec![], CouplingXi::minimal()).is_err());
        assert!(
            ProfileRequest::with_step(slab(1.0), vec![0.5, 0.05], CouplingXi::minimal(), 0.02)
                .is_err()
        );
    }
}
