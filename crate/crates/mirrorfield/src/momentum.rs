//! On-shell momentum-space pairings.
//!
//! The vacuum two-point pairing is the positive measure
//! `d^3k / ((2π)^3 2|k|)` applied to `conj(f̂) ĝ` on the mass shell
//! `ω = |k|`, with the transform convention `f̂(ω,k) = ∫ f e^{i(k·x − ωt)}`.
//! Everything here follows from two structural facts:
//!
//! * product bumps transform per axis, `f̂ = A ∏ w_i b̂(k_i w_i) e^{iφ}`,
//!   where `b̂` is the 1-d bump transform — so a cached Chebyshev table of
//!   `b̂` makes node evaluation cheap; and
//! * any quadrature `Σ W_n conj(F_i(n)) F_j(n)` with positive weights is a
//!   Gram matrix, so positivity of states computed on a shared grid is exact
//!   by construction, not a numerical accident.
//!
//! Commutator pairings are accumulated on the same nodes with weight
//! `1/|k|`, which realizes the commutation identity up to roundoff.
//!
//! For the slab the on-shell integral collapses onto the Dirichlet modes
//! `κ_m = mπ/d` (the periodic image sum is a Dirac comb in `k_z`), giving a
//! manifestly positive mode representation with no image-tail truncation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{numerics, Result};
use crate::exec;
use crate::quad::{self, Cheb};
use crate::testfields::{bump, BumpTestFunction};

/// Per-axis transform argument beyond which `b̂(κ) ~ e^{-√(2κ)}` is treated
/// as zero; `b̂(45)^2 ≈ 6e-9` and the products that appear always carry at
/// least two such factors at the cut.
const KAPPA_CUT: f64 = 45.0;
const KMAX_FLOOR: f64 = 40.0;
const KMAX_CAP: f64 = 480.0;
/// Gauss-Legendre nodes per oscillation cycle (radial and polar axes).
const NODES_PER_CYCLE: f64 = 2.7;
/// Trapezoid points per cycle on the periodic azimuthal axis.
const PHI_PER_CYCLE: f64 = 2.6;
/// Effective phase rate per unit halfwidth from the `b̂` factors; their
/// oscillation slows like `√κ`, so a full unit rate would over-count.
const WIDTH_PHASE: f64 = 0.5;
/// Hard cap on total grid nodes; beyond this the request is refused rather
/// than silently taking hours.
const NODE_BUDGET: usize = 150_000_000;

/// Largest family size `gram` accepts (fixed-size accumulators).
pub const GRAM_MAX: usize = 6;

/// 1-d bump transform `b̂(κ) = ∫ b(s) e^{-iκs} ds = 2 ∫_0^1 b(s) cos(κs) ds`
/// by panelled quadrature; real and even.  This is the slow reference the
/// Chebyshev table is built from (and checked against).
pub fn profile_transform_reference(kappa: f64) -> f64 {
    let k = kappa.abs();
    let panels = 8 + (k / 40.0).ceil() as usize;
    2.0 * quad::integrate_panels(24, panels, 0.0, 1.0, |s| bump(s) * (k * s).cos())
}

struct TransformTable {
    kappa_max: f64,
    cheb: Cheb,
}

impl TransformTable {
    #[inline]
    fn eval(&self, kappa: f64) -> f64 {
        let k = kappa.abs();
        if k >= self.kappa_max {
            0.0
        } else {
            self.cheb.eval(k)
        }
    }
}

/// Shared table covering `|κ| <= kappa_max`, cached by quantized range so
/// repeated grids reuse the same fit.
fn transform_table(kappa_max: f64) -> Arc<TransformTable> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<TransformTable>>>> = OnceLock::new();
    let bucket = (kappa_max / 16.0).ceil().max(1.0) * 16.0;
    let key = bucket as u64;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(key)
        .or_insert_with(|| {
            // b̂ is entire of exponential type 1, so the Chebyshev
            // coefficients die once the degree passes ~bucket/2; the slack
            // keeps the fit at machine precision.
            let degree = (0.72 * bucket).ceil() as usize + 40;
            let cheb = Cheb::fit(0.0, bucket, degree, profile_transform_reference);
            Arc::new(TransformTable { kappa_max: bucket, cheb })
        })
        .clone()
}

/// Pairing values accumulated in a single pass over a shared grid.
#[derive(Debug, Clone, Copy)]
pub struct PairingValues {
    /// `ω₂(f, g)`.
    pub omega_fg: Complex64,
    /// `ω₂(g, f)`; the exact conjugate, since the grid is shared.
    pub omega_gf: Complex64,
    /// `∫ d³k/((2π)³|k|) Im[conj(f̂) ĝ]` — the commutator pairing.
    pub pair_e: f64,
}

#[derive(Clone, Copy)]
struct TermPre {
    pref: f64,
    c: [f64; 4],
    w: [f64; 4],
}

impl TermPre {
    fn from(b: &BumpTestFunction) -> Self {
        let pref =
            b.amplitude * b.halfwidths[0] * b.halfwidths[1] * b.halfwidths[2] * b.halfwidths[3];
        TermPre { pref, c: b.center, w: b.halfwidths }
    }
}

/// Term hoisted to a fixed `(ω, k_z)`: only the transverse factors remain.
#[derive(Clone, Copy)]
struct Hoisted {
    amp: f64,
    phase0: f64,
    cx: f64,
    cy: f64,
    wx: f64,
    wy: f64,
}

#[inline]
fn eval_hat(hoisted: &[Hoisted], table: &TransformTable, kx: f64, ky: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for h in hoisted {
        let a = h.amp * table.eval(kx * h.wx) * table.eval(ky * h.wy);
        if a != 0.0 {
            let (s, c) = (h.phase0 + kx * h.cx + ky * h.cy).sin_cos();
            acc += Complex64::new(a * c, a * s);
        }
    }
    acc
}

struct Extents {
    span: [f64; 4],
    wmax: [f64; 4],
    wmin: f64,
    wsum_max: f64,
}

fn extents(sets: &[&[BumpTestFunction]]) -> Option<Extents> {
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    let mut wmax = [0.0f64; 4];
    let mut wmin = f64::INFINITY;
    let mut wsum_max = 0.0f64;
    let mut any = false;
    for set in sets {
        for b in *set {
            any = true;
            let mut wsum = 0.0;
            for i in 0..4 {
                lo[i] = lo[i].min(b.center[i]);
                hi[i] = hi[i].max(b.center[i]);
                wmax[i] = wmax[i].max(b.halfwidths[i]);
                wmin = wmin.min(b.halfwidths[i]);
                wsum += b.halfwidths[i];
            }
            wsum_max = wsum_max.max(wsum);
        }
    }
    if !any {
        return None;
    }
    let mut span = [0.0; 4];
    for i in 0..4 {
        span[i] = hi[i] - lo[i];
    }
    Some(Extents { span, wmax, wmin, wsum_max })
}

/// Spherical on-shell grid `(r, cosθ, φ)` with `ω = r = |k|`, sized from the
/// extents of the sources it will be asked to pair.
pub struct SphericalGrid {
    r_nodes: Vec<f64>,
    r_weights: Vec<f64>,
    c_nodes: Vec<f64>,
    c_weights: Vec<f64>,
    cos_phi: Vec<f64>,
    sin_phi: Vec<f64>,
    table: Arc<TransformTable>,
}

impl SphericalGrid {
    pub fn for_terms(sets: &[&[BumpTestFunction]]) -> Result<Self> {
        Self::sized(sets, 1.0, 1.0)
    }

    /// Build with node counts scaled by `count_scale` and the momentum cut
    /// scaled by `reach_scale` (used for single-step refinement and for
    /// convergence tests).
    pub fn sized(sets: &[&[BumpTestFunction]], count_scale: f64, reach_scale: f64) -> Result<Self> {
        let Some(ex) = extents(sets) else {
            // All sources vanish: a token grid keeps the call paths uniform.
            return Ok(SphericalGrid {
                r_nodes: vec![0.5],
                r_weights: vec![1.0],
                c_nodes: vec![0.0],
                c_weights: vec![2.0],
                cos_phi: vec![1.0],
                sin_phi: vec![0.0],
                table: transform_table(16.0),
            });
        };
        let kmax = (KAPPA_CUT / ex.wmin).clamp(KMAX_FLOOR, KMAX_CAP) * reach_scale;
        let s_t = ex.span[0];
        let s_sp = (ex.span[1] * ex.span[1] + ex.span[2] * ex.span[2] + ex.span[3] * ex.span[3])
            .sqrt();
        let s_perp = ex.span[1].hypot(ex.span[2]);
        let two_pi = std::f64::consts::TAU;
        let rate_r = s_t + s_sp + 2.0 * WIDTH_PHASE * ex.wsum_max;
        let n_r = (count_scale * (kmax * rate_r * NODES_PER_CYCLE / two_pi + 50.0)).ceil() as usize;
        let rate_c = s_sp + 2.0 * WIDTH_PHASE * ex.wmax[3];
        let n_c = (count_scale * (kmax * rate_c * NODES_PER_CYCLE / two_pi + 30.0)).ceil() as usize;
        let rate_phi = s_perp + 2.0 * WIDTH_PHASE * ex.wmax[1].max(ex.wmax[2]);
        let n_phi = (count_scale * (kmax * rate_phi * PHI_PER_CYCLE / std::f64::consts::PI + 16.0))
            .ceil() as usize;
        if n_r * n_c * n_phi > NODE_BUDGET {
            return Err(numerics(format!(
                "momentum grid {}x{}x{} exceeds the node budget; sources too far apart or too narrow",
                n_r, n_c, n_phi
            )));
        }
        let (r_nodes, r_weights) = quad::gauss_legendre_on(n_r, 0.0, kmax);
        let (c_nodes, c_weights) = quad::gauss_legendre_on(n_c, -1.0, 1.0);
        let mut cos_phi = Vec::with_capacity(n_phi);
        let mut sin_phi = Vec::with_capacity(n_phi);
        for j in 0..n_phi {
            let phi = two_pi * j as f64 / n_phi as f64;
            cos_phi.push(phi.cos());
            sin_phi.push(phi.sin());
        }
        let wmax_all = ex.wmax.iter().cloned().fold(0.0f64, f64::max);
        let table = transform_table(kmax * wmax_all * 1.01);
        Ok(SphericalGrid { r_nodes, r_weights, c_nodes, c_weights, cos_phi, sin_phi, table })
    }

    pub fn node_count(&self) -> usize {
        self.r_nodes.len() * self.c_nodes.len() * self.cos_phi.len()
    }

    fn hoist(&self, pre: &[TermPre], r: f64, kz: f64, out: &mut Vec<Hoisted>) {
        out.clear();
        for t in pre {
            let amp = t.pref * self.table.eval(r * t.w[0]) * self.table.eval(kz * t.w[3]);
            if amp != 0.0 {
                out.push(Hoisted {
                    amp,
                    phase0: kz * t.c[3] - r * t.c[0],
                    cx: t.c[1],
                    cy: t.c[2],
                    wx: t.w[1],
                    wy: t.w[2],
                });
            }
        }
    }
}

/// `ω₂(f,g)`, `ω₂(g,f)`, and the commutator pairing in one pass.
pub fn two_point_and_pair(
    grid: &SphericalGrid,
    f_terms: &[BumpTestFunction],
    g_terms: &[BumpTestFunction],
) -> PairingValues {
    let pf: Vec<TermPre> = f_terms.iter().map(TermPre::from).collect();
    let pg: Vec<TermPre> = g_terms.iter().map(TermPre::from).collect();
    let n_c = grid.c_nodes.len();
    let n_phi = grid.cos_phi.len();
    // Node weight r^2 w_r w_c Δφ / ((2π)^3 2r), with Δφ = 2π/n_φ.
    let c0 = 1.0 / (2.0 * std::f64::consts::TAU.powi(2) * n_phi as f64);
    let (omega, pair) = exec::map_sum(grid.r_nodes.len() * n_c, |idx| {
        let ir = idx / n_c;
        let ic = idx % n_c;
        let r = grid.r_nodes[ir];
        let cth = grid.c_nodes[ic];
        let sth = (1.0 - cth * cth).max(0.0).sqrt();
        let kz = r * cth;
        let w_rc = r * grid.r_weights[ir] * grid.c_weights[ic] * c0;
        let mut hf = Vec::new();
        let mut hg = Vec::new();
        grid.hoist(&pf, r, kz, &mut hf);
        grid.hoist(&pg, r, kz, &mut hg);
        let mut om = Complex64::new(0.0, 0.0);
        let mut pe = 0.0;
        if !hf.is_empty() && !hg.is_empty() {
            for j in 0..n_phi {
                let kx = r * sth * grid.cos_phi[j];
                let ky = r * sth * grid.sin_phi[j];
                let fh = eval_hat(&hf, &grid.table, kx, ky);
                let gh = eval_hat(&hg, &grid.table, kx, ky);
                let prod = fh.conj() * gh;
                om += w_rc * prod;
                // Commutator measure is 1/|k|, twice the state measure.
                pe += 2.0 * w_rc * prod.im;
            }
        }
        (om, pe)
    });
    PairingValues { omega_fg: omega, omega_gf: omega.conj(), pair_e: pair }
}

/// Most argument pairs a single commutation block can hold.
pub const CCR_BLOCK_MAX: usize = 20;

type CommutationAcc = [((Complex64, Complex64), f64); CCR_BLOCK_MAX];

fn commutation_acc_zero() -> CommutationAcc {
    let z = Complex64::new(0.0, 0.0);
    [((z, z), 0.0); CCR_BLOCK_MAX]
}

fn commutation_pre(
    pairs: &[(&[BumpTestFunction], &[BumpTestFunction])],
) -> Vec<(Vec<TermPre>, Vec<TermPre>)> {
    assert!(
        pairs.len() <= CCR_BLOCK_MAX,
        "commutation block supports at most {CCR_BLOCK_MAX} pairs"
    );
    pairs
        .iter()
        .map(|(f, g)| {
            (
                f.iter().map(TermPre::from).collect(),
                g.iter().map(TermPre::from).collect(),
            )
        })
        .collect()
}

/// `(ω₂(f,g), ω₂(g,f), pairing(f,g))` for up to [`CCR_BLOCK_MAX`] argument
/// pairs in one pass over one shared grid.  The three numbers of each pair
/// are separate accumulators — nothing in here ties them together — so the
/// commutation identity can be tested against the returned triples, while
/// the shared pass amortises the node walk across all pairs.
pub fn commutation_block(
    grid: &SphericalGrid,
    pairs: &[(&[BumpTestFunction], &[BumpTestFunction])],
) -> Vec<(Complex64, Complex64, f64)> {
    let n = pairs.len();
    let pre = commutation_pre(pairs);
    let n_c = grid.c_nodes.len();
    let n_phi = grid.cos_phi.len();
    let c0 = 1.0 / (2.0 * std::f64::consts::TAU.powi(2) * n_phi as f64);
    let flat: CommutationAcc = exec::map_sum(grid.r_nodes.len() * n_c, |idx| {
        let ir = idx / n_c;
        let ic = idx % n_c;
        let r = grid.r_nodes[ir];
        let cth = grid.c_nodes[ic];
        let sth = (1.0 - cth * cth).max(0.0).sqrt();
        let kz = r * cth;
        let w_rc = r * grid.r_weights[ir] * grid.c_weights[ic] * c0;
        let mut hf: Vec<Vec<Hoisted>> = vec![Vec::new(); n];
        let mut hg: Vec<Vec<Hoisted>> = vec![Vec::new(); n];
        for (i, (pf, pg)) in pre.iter().enumerate() {
            grid.hoist(pf, r, kz, &mut hf[i]);
            grid.hoist(pg, r, kz, &mut hg[i]);
        }
        let mut acc = commutation_acc_zero();
        for j in 0..n_phi {
            let kx = r * sth * grid.cos_phi[j];
            let ky = r * sth * grid.sin_phi[j];
            for i in 0..n {
                if hf[i].is_empty() || hg[i].is_empty() {
                    continue;
                }
                let fh = eval_hat(&hf[i], &grid.table, kx, ky);
                let gh = eval_hat(&hg[i], &grid.table, kx, ky);
                let fg = fh.conj() * gh;
                let gf = gh.conj() * fh;
                acc[i].0 .0 += w_rc * fg;
                acc[i].0 .1 += w_rc * gf;
                acc[i].1 += 2.0 * w_rc * fg.im;
            }
        }
        acc
    });
    flat[..n].iter().map(|((fg, gf), pe)| (*fg, *gf, *pe)).collect()
}

/// Gram matrix `M_ij = ω₂(f_i, f_j)` over one shared grid; exactly positive
/// semidefinite because it is literally `Φ* W Φ` with `W >= 0`.
pub fn gram(grid: &SphericalGrid, families: &[Vec<BumpTestFunction>]) -> Vec<Vec<Complex64>> {
    let n = families.len();
    assert!(n <= GRAM_MAX, "gram supports at most {GRAM_MAX} functions");
    let pre: Vec<Vec<TermPre>> =
        families.iter().map(|f| f.iter().map(TermPre::from).collect()).collect();
    let n_c = grid.c_nodes.len();
    let n_phi = grid.cos_phi.len();
    let c0 = 1.0 / (2.0 * std::f64::consts::TAU.powi(2) * n_phi as f64);
    let flat: [Complex64; GRAM_MAX * GRAM_MAX] =
        exec::map_sum(grid.r_nodes.len() * n_c, |idx| {
            let ir = idx / n_c;
            let ic = idx % n_c;
            let r = grid.r_nodes[ir];
            let cth = grid.c_nodes[ic];
            let sth = (1.0 - cth * cth).max(0.0).sqrt();
            let kz = r * cth;
            let w_rc = r * grid.r_weights[ir] * grid.c_weights[ic] * c0;
            let mut hoisted: Vec<Vec<Hoisted>> = vec![Vec::new(); n];
            for (i, p) in pre.iter().enumerate() {
                grid.hoist(p, r, kz, &mut hoisted[i]);
            }
            let mut acc = [Complex64::new(0.0, 0.0); GRAM_MAX * GRAM_MAX];
            let mut hats = [Complex64::new(0.0, 0.0); GRAM_MAX];
            for j in 0..n_phi {
                let kx = r * sth * grid.cos_phi[j];
                let ky = r * sth * grid.sin_phi[j];
                for i in 0..n {
                    hats[i] = eval_hat(&hoisted[i], &grid.table, kx, ky);
                }
                for a in 0..n {
                    for b in 0..n {
                        acc[a * GRAM_MAX + b] += w_rc * (hats[a].conj() * hats[b]);
                    }
                }
            }
            acc
        });
    (0..n).map(|a| (0..n).map(|b| flat[a * GRAM_MAX + b]).collect()).collect()
}

/// Dirichlet-mode on-shell grid for the slab: discrete `κ_m = mπ/d` against
/// a transverse `(k_⊥, φ)` quadrature, `ω = √(k_⊥² + κ_m²)`.
pub struct SlabModeGrid {
    d: f64,
    kappa: Vec<f64>,
    kp_nodes: Vec<f64>,
    kp_weights: Vec<f64>,
    cos_phi: Vec<f64>,
    sin_phi: Vec<f64>,
    table: Arc<TransformTable>,
}

impl SlabModeGrid {
    pub fn for_terms(d: f64, sets: &[&[BumpTestFunction]]) -> Result<Self> {
        Self::sized(d, sets, 1.0, 1.0)
    }

    pub fn sized(
        d: f64,
        sets: &[&[BumpTestFunction]],
        count_scale: f64,
        reach_scale: f64,
    ) -> Result<Self> {
        assert!(d > 0.0);
        let Some(ex) = extents(sets) else {
            return Ok(SlabModeGrid {
                d,
                kappa: vec![std::f64::consts::PI / d],
                kp_nodes: vec![0.5],
                kp_weights: vec![1.0],
                cos_phi: vec![1.0],
                sin_phi: vec![0.0],
                table: transform_table(16.0),
            });
        };
        let wz_min = sets
            .iter()
            .flat_map(|s| s.iter())
            .map(|b| b.halfwidths[3])
            .fold(f64::INFINITY, f64::min);
        let wtxy_min = sets
            .iter()
            .flat_map(|s| s.iter())
            .flat_map(|b| [b.halfwidths[0], b.halfwidths[1], b.halfwidths[2]])
            .fold(f64::INFINITY, f64::min);
        let kz_cut = (KAPPA_CUT / wz_min).clamp(KMAX_FLOOR, KMAX_CAP) * reach_scale;
        let modes = ((kz_cut * d / std::f64::consts::PI).ceil() as usize).max(1);
        let kp_max = (KAPPA_CUT / wtxy_min).clamp(KMAX_FLOOR, KMAX_CAP) * reach_scale;
        let two_pi = std::f64::consts::TAU;
        let s_t = ex.span[0];
        let s_perp = ex.span[1].hypot(ex.span[2]);
        let rate_r = s_t + s_perp + 2.0 * WIDTH_PHASE * ex.wsum_max;
        let n_kp =
            (count_scale * (kp_max * rate_r * NODES_PER_CYCLE / two_pi + 40.0)).ceil() as usize;
        let rate_phi = s_perp + 2.0 * WIDTH_PHASE * ex.wmax[1].max(ex.wmax[2]);
        let n_phi = (count_scale
            * (kp_max * rate_phi * PHI_PER_CYCLE / std::f64::consts::PI + 16.0))
            .ceil() as usize;
        if modes * n_kp * n_phi > NODE_BUDGET {
            return Err(numerics(format!(
                "slab mode grid {}x{}x{} exceeds the node budget",
                modes, n_kp, n_phi
            )));
        }
        let kappa: Vec<f64> =
            (1..=modes).map(|m| m as f64 * std::f64::consts::PI / d).collect();
        let (kp_nodes, kp_weights) = quad::gauss_legendre_on(n_kp, 0.0, kp_max);
        let mut cos_phi = Vec::with_capacity(n_phi);
        let mut sin_phi = Vec::with_capacity(n_phi);
        for j in 0..n_phi {
            let phi = two_pi * j as f64 / n_phi as f64;
            cos_phi.push(phi.cos());
            sin_phi.push(phi.sin());
        }
        let wmax_all = ex.wmax.iter().cloned().fold(0.0f64, f64::max);
        let omega_max = kp_max.hypot(kz_cut);
        let table = transform_table(omega_max * wmax_all * 1.01);
        Ok(SlabModeGrid { d, kappa, kp_nodes, kp_weights, cos_phi, sin_phi, table })
    }

    pub fn node_count(&self) -> usize {
        self.kappa.len() * self.kp_nodes.len() * self.cos_phi.len()
    }

    /// Hoist a term to fixed `(m, k_⊥)`: the z-factor is the Dirichlet sine
    /// component `b̂(κ_m w_z) sin(κ_m c_z)`.
    fn hoist(&self, pre: &[TermPre], kappa_m: f64, omega: f64, out: &mut Vec<Hoisted>) {
        out.clear();
        for t in pre {
            let amp = t.pref
                * self.table.eval(omega * t.w[0])
                * self.table.eval(kappa_m * t.w[3])
                * (kappa_m * t.c[3]).sin();
            if amp != 0.0 {
                out.push(Hoisted {
                    amp,
                    phase0: -omega * t.c[0],
                    cx: t.c[1],
                    cy: t.c[2],
                    wx: t.w[1],
                    wy: t.w[2],
                });
            }
        }
    }
}

/// Slab state pairing and commutator pairing over the Dirichlet modes.
pub fn slab_two_point_and_pair(
    grid: &SlabModeGrid,
    f_terms: &[BumpTestFunction],
    g_terms: &[BumpTestFunction],
) -> PairingValues {
    let pf: Vec<TermPre> = f_terms.iter().map(TermPre::from).collect();
    let pg: Vec<TermPre> = g_terms.iter().map(TermPre::from).collect();
    let n_kp = grid.kp_nodes.len();
    let n_phi = grid.cos_phi.len();
    let (omega, pair) = exec::map_sum(grid.kappa.len() * n_kp, |idx| {
        let im = idx / n_kp;
        let ik = idx % n_kp;
        let kappa_m = grid.kappa[im];
        let kp = grid.kp_nodes[ik];
        let om_shell = kp.hypot(kappa_m);
        // Mode weight (2/d) k_⊥ w_k Δφ / ((2π)^2 2ω) = k_⊥ w_k/(2π d n_φ ω).
        let w_node = kp * grid.kp_weights[ik]
            / (std::f64::consts::TAU * grid.d * n_phi as f64 * om_shell);
        let mut hf = Vec::new();
        let mut hg = Vec::new();
        grid.hoist(&pf, kappa_m, om_shell, &mut hf);
        grid.hoist(&pg, kappa_m, om_shell, &mut hg);
        let mut om = Complex64::new(0.0, 0.0);
        let mut pe = 0.0;
        if !hf.is_empty() && !hg.is_empty() {
            for j in 0..n_phi {
                let kx = kp * grid.cos_phi[j];
                let ky = kp * grid.sin_phi[j];
                let fh = eval_hat(&hf, &grid.table, kx, ky);
                let gh = eval_hat(&hg, &grid.table, kx, ky);
                let prod = fh.conj() * gh;
                om += w_node * prod;
                pe += 2.0 * w_node * prod.im;
            }
        }
        (om, pe)
    });
    PairingValues { omega_fg: omega, omega_gf: omega.conj(), pair_e: pair }
}

/// Slab-mode counterpart of [`commutation_block`]: per-pair
/// `(ω₂(f,g), ω₂(g,f), pairing(f,g))` triples from one pass over one shared
/// Dirichlet mode grid.
pub fn slab_commutation_block(
    grid: &SlabModeGrid,
    pairs: &[(&[BumpTestFunction], &[BumpTestFunction])],
) -> Vec<(Complex64, Complex64, f64)> {
    let n = pairs.len();
    let pre = commutation_pre(pairs);
    let n_kp = grid.kp_nodes.len();
    let n_phi = grid.cos_phi.len();
    let flat: CommutationAcc = exec::map_sum(grid.kappa.len() * n_kp, |idx| {
        let im = idx / n_kp;
        let ik = idx % n_kp;
        let kappa_m = grid.kappa[im];
        let kp = grid.kp_nodes[ik];
        let om_shell = kp.hypot(kappa_m);
        let w_node = kp * grid.kp_weights[ik]
            / (std::f64::consts::TAU * grid.d * n_phi as f64 * om_shell);
        let mut hf: Vec<Vec<Hoisted>> = vec![Vec::new(); n];
        let mut hg: Vec<Vec<Hoisted>> = vec![Vec::new(); n];
        for (i, (pf, pg)) in pre.iter().enumerate() {
            grid.hoist(pf, kappa_m, om_shell, &mut hf[i]);
            grid.hoist(pg, kappa_m, om_shell, &mut hg[i]);
        }
        let mut acc = commutation_acc_zero();
        for j in 0..n_phi {
            let kx = kp * grid.cos_phi[j];
            let ky = kp * grid.sin_phi[j];
            for i in 0..n {
                if hf[i].is_empty() || hg[i].is_empty() {
                    continue;
                }
                let fh = eval_hat(&hf[i], &grid.table, kx, ky);
                let gh = eval_hat(&hg[i], &grid.table, kx, ky);
                let fg = fh.conj() * gh;
                let gf = gh.conj() * fh;
                acc[i].0 .0 += w_node * fg;
                acc[i].0 .1 += w_node * gf;
                acc[i].1 += 2.0 * w_node * fg.im;
            }
        }
        acc
    });
    flat[..n].iter().map(|((fg, gf), pe)| (*fg, *gf, *pe)).collect()
}

/// Slab Gram matrix on one shared mode grid; exactly PSD for the same
/// structural reason as [`gram`].
pub fn slab_gram(grid: &SlabModeGrid, families: &[Vec<BumpTestFunction>]) -> Vec<Vec<Complex64>> {
    let n = families.len();
    assert!(n <= GRAM_MAX, "gram supports at most {GRAM_MAX} functions");
    let pre: Vec<Vec<TermPre>> =
        families.iter().map(|f| f.iter().map(TermPre::from).collect()).collect();
    let n_kp = grid.kp_nodes.len();
    let n_phi = grid.cos_phi.len();
    let flat: [Complex64; GRAM_MAX * GRAM_MAX] =
        exec::map_sum(grid.kappa.len() * n_kp, |idx| {
            let im = idx / n_kp;
            let ik = idx % n_kp;
            let kappa_m = grid.kappa[im];
            let kp = grid.kp_nodes[ik];
            let om_shell = kp.hypot(kappa_m);
            let w_node = kp * grid.kp_weights[ik]
                / (std::f64::consts::TAU * grid.d * n_phi as f64 * om_shell);
            let mut hoisted: Vec<Vec<Hoisted>> = vec![Vec::new(); n];
            for (i, p) in pre.iter().enumerate() {
                grid.hoist(p, kappa_m, om_shell, &mut hoisted[i]);
            }
            let mut acc = [Complex64::new(0.0, 0.0); GRAM_MAX * GRAM_MAX];
            let mut hats = [Complex64::new(0.0, 0.0); GRAM_MAX];
            for j in 0..n_phi {
                let kx = kp * grid.cos_phi[j];
                let ky = kp * grid.sin_phi[j];
                for i in 0..n {
                    hats[i] = eval_hat(&hoisted[i], &grid.table, kx, ky);
                }
                for a in 0..n {
                    for b in 0..n {
                        acc[a * GRAM_MAX + b] += w_node * (hats[a].conj() * hats[b]);
                    }
                }
            }
            acc
        });
    (0..n).map(|a| (0..n).map(|b| flat[a * GRAM_MAX + b]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn transform_reference_matches_independent_values() {
        // Frozen from 30-digit adaptive quadrature of 2∫₀¹ b(s)cos(κs) ds.
        let anchors = [
            (0.0, 0.443_993_816_168_079_44),
            (1.0, 0.409_859_132_390_344_35),
            (5.0, -2.122_499_144_375_158_1e-4),
            (12.5, 8.959_544_019_178_137e-4),
            (40.0, 1.287_446_118_710_618_1e-4),
        ];
        for (k, v) in anchors {
            assert_abs_diff_eq!(profile_transform_reference(k), v, epsilon = 1e-13);
        }
    }

    #[test]
    fn chebyshev_table_matches_reference() {
        let table = transform_table(96.0);
        for i in 0..=60 {
            let k = 96.0 * i as f64 / 60.0 * 0.999;
            assert_abs_diff_eq!(
                table.eval(k),
                profile_transform_reference(k),
                epsilon = 1e-12
            );
            // Evenness of the table lookup.
            assert_eq!(table.eval(-k), table.eval(k));
        }
    }

    fn reference_pair() -> (Vec<BumpTestFunction>, Vec<BumpTestFunction>) {
        (
            vec![BumpTestFunction::new([0.0; 4], [0.5; 4], 1.0)],
            vec![BumpTestFunction::new([1.5, 0.0, 0.0, 0.0], [0.5; 4], 1.0)],
        )
    }

    #[test]
    fn hermiticity_positivity_and_commutator_identity() {
        let (f, g) = reference_pair();
        let grid = SphericalGrid::for_terms(&[&f, &g]).unwrap();
        let vals = two_point_and_pair(&grid, &f, &g);
        // ω₂(g,f) is the exact conjugate on a shared grid.
        assert_eq!(vals.omega_gf, vals.omega_fg.conj());
        // Commutator identity: ω₂(f,g) − ω₂(g,f) = i·pair on shared nodes.
        let defect = (vals.omega_fg - vals.omega_gf
            - Complex64::new(0.0, 1.0) * vals.pair_e)
            .norm();
        assert!(defect <= 1e-14 * (1.0 + vals.omega_fg.norm()), "defect {defect}");
        // Diagonal is real and nonnegative.
        let diag = two_point_and_pair(&grid, &f, &f);
        assert_eq!(diag.omega_fg.im, 0.0);
        assert!(diag.omega_fg.re > 0.0);
        assert_abs_diff_eq!(diag.pair_e, 0.0, epsilon = 1e-16);
    }

    #[test]
    fn grid_refinement_is_converged() {
        // The default sizing must already be inside the tolerance targets:
        // refining both the cut and the node counts moves the answer by less
        // than 1e-6 relative.
        let (f, g) = reference_pair();
        let coarse = SphericalGrid::for_terms(&[&f, &g]).unwrap();
        let fine = SphericalGrid::sized(&[&f, &g], 1.6, 1.25).unwrap();
        let a = two_point_and_pair(&coarse, &f, &g);
        let b = two_point_and_pair(&fine, &f, &g);
        let scale = b.omega_fg.norm();
        assert!(scale > 0.0);
        assert!(
            (a.omega_fg - b.omega_fg).norm() <= 1e-6 * scale,
            "two-point drift {} vs scale {}",
            (a.omega_fg - b.omega_fg).norm(),
            scale
        );
        assert!(
            (a.pair_e - b.pair_e).abs() <= 1e-6 * scale.max(a.pair_e.abs()),
            "pair drift {}",
            (a.pair_e - b.pair_e).abs()
        );
    }

    #[test]
    fn gram_agrees_with_pairwise_two_point() {
        let fam = vec![
            vec![BumpTestFunction::new([0.0, 0.0, 0.0, 0.2], [0.4; 4], 1.0)],
            vec![BumpTestFunction::new([0.3, 0.2, 0.0, -0.1], [0.4; 4], 0.7)],
            vec![BumpTestFunction::new([-0.2, 0.0, 0.3, 0.0], [0.5; 4], -1.1)],
        ];
        let sets: Vec<&[BumpTestFunction]> = fam.iter().map(|v| v.as_slice()).collect();
        let grid = SphericalGrid::for_terms(&sets).unwrap();
        let m = gram(&grid, &fam);
        for i in 0..fam.len() {
            for j in 0..fam.len() {
                let direct = two_point_and_pair(&grid, &fam[i], &fam[j]).omega_fg;
                assert_eq!(m[i][j], direct, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn slab_mode_pairing_structure() {
        let d = 1.0;
        let f = vec![BumpTestFunction::new([0.0, 0.0, 0.0, 0.45], [0.3, 0.3, 0.3, 0.3], 1.0)];
        let g = vec![BumpTestFunction::new([0.4, 0.2, 0.0, 0.6], [0.3, 0.3, 0.3, 0.3], 1.0)];
        let grid = SlabModeGrid::for_terms(d, &[&f, &g]).unwrap();
        let vals = slab_two_point_and_pair(&grid, &f, &g);
        assert_eq!(vals.omega_gf, vals.omega_fg.conj());
        let defect = (vals.omega_fg - vals.omega_gf
            - Complex64::new(0.0, 1.0) * vals.pair_e)
            .norm();
        assert!(defect <= 1e-14 * (1.0 + vals.omega_fg.norm()));
        let diag = slab_two_point_and_pair(&grid, &f, &f);
        assert_eq!(diag.omega_fg.im, 0.0);
        assert!(diag.omega_fg.re > 0.0);
        // Mode sum is converged at the default sizing.
        let fine = SlabModeGrid::sized(d, &[&f, &g], 1.6, 1.25).unwrap();
        let vals_fine = slab_two_point_and_pair(&fine, &f, &g);
        assert!(
            (vals.omega_fg - vals_fine.omega_fg).norm() <= 1e-6 * vals_fine.omega_fg.norm().max(diag.omega_fg.re),
        );
    }

    #[test]
    fn zero_sources_give_zero() {
        let f: Vec<BumpTestFunction> = Vec::new();
        let g = vec![BumpTestFunction::new([0.0; 4], [0.5; 4], 1.0)];
        let grid = SphericalGrid::for_terms(&[&f, &g]).unwrap();
        let vals = two_point_and_pair(&grid, &f, &g);
        assert_eq!(vals.omega_fg, Complex64::new(0.0, 0.0));
        assert_eq!(vals.pair_e, 0.0);
    }
}
