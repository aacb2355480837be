//! Polynomial observables of the smeared field and their deformed products.
//!
//! An observable here is a finite sum `F(φ) = Σ_a c_a · Π_i ⟨f_{a,i}, φ⟩` of
//! products of field smearings — the polynomial class on which the deformed
//! product is an exact finite series rather than a formal power series. The
//! product contracts `n` factor pairs between its operands with a configurable
//! bilinear pairing and the coefficient `(iħ/2)ⁿ` per ordered contraction:
//!
//! * the antisymmetric causal pairing (bulk, or the image-expanded boundary
//!   variant) produces the commutation relations of canonical quantization:
//!   the commutator of linear observables is the central element
//!   `iħ·pairing(f,g)·1`;
//! * `−2i ×` the state two-point kernel produces the normal-ordered variant of
//!   the product. Its antisymmetric part coincides with the causal pairing, so
//!   commutators are unchanged; only central/symmetric terms shift. Near a
//!   reflecting wall that kernel is nonlocal across image light cones, so the
//!   normal-ordered product is only offered where every factor support is
//!   reflected-causally disjoint from every other (and from its own image).
//!
//! Quasi-free expectation values evaluate observables by Wick/Isserlis
//! combinatorics over the state's two-point kernel. Classical monomials are
//! symmetric under factor reordering, so their expectation uses the symmetric
//! part of the kernel; the antisymmetric part enters only through the explicit
//! contraction terms of the deformed product. This is the unique prescription
//! under which expectations are well defined on normal forms, real on real
//! observables, and positive on squares `F* ⋆ F`.
//!
//! The time-slice comparison checks that a linear observable can be traded
//! for a representative squeezed into a finite time window without changing
//! its action on solutions of the region's wave equation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::exec;
use crate::geometry::{reflected_causally_disjoint, Region, SpacetimeBox, SpacetimePoint};
use crate::propagators::{
    causal_field, causal_field_of_terms, odd_double, pair_e, pair_e_boundary,
    time_slice_representative, FieldEvaluator, PairingBackendConfig, TimeWindow,
};
use crate::quad;
use crate::states::TwoPointPairing;
use crate::testfields::{n_map, TestFunction};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Per-axis Gauss–Legendre order for the source-side smearing integral of the
/// time-slice comparison.
const SLICE_SOURCE_ORDER: usize = 10;
/// Time / space orders for the window-side smearing integral.
const SLICE_WINDOW_T_ORDER: usize = 10;
const SLICE_WINDOW_S_ORDER: usize = 14;
/// Kirchhoff orders used for the sampled solutions and the representative.
const SLICE_FIELD_RADIAL: usize = 24;
const SLICE_FIELD_ANGULAR: usize = 12;

// ---------------------------------------------------------------------------
// Polynomial observables and their normal form
// ---------------------------------------------------------------------------

/// One product term `coefficient · Π_i ⟨factors[i], φ⟩`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalTerm {
    pub coefficient: Complex64,
    pub factors: Vec<TestFunction>,
}

/// Serialized shape: same `terms`/`factors` nesting as the smearing-function
/// JSON, with complex coefficients. Deserialization renormalizes.
#[derive(Serialize, Deserialize)]
struct RawFunctional {
    terms: Vec<FunctionalTerm>,
}

impl From<RawFunctional> for PolynomialFunctional {
    fn from(raw: RawFunctional) -> Self {
        PolynomialFunctional::from_terms(raw.terms)
    }
}

impl From<PolynomialFunctional> for RawFunctional {
    fn from(p: PolynomialFunctional) -> Self {
        RawFunctional { terms: p.terms }
    }
}

/// Finite linear combination of products of field smearings, kept in a
/// canonical normal form: factors of every term sorted by a deterministic
/// byte key, terms sorted by (degree, keys), equal-key terms merged, and
/// exactly-zero coefficients dropped.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "RawFunctional", into = "RawFunctional")]
pub struct PolynomialFunctional {
    terms: Vec<FunctionalTerm>,
}

/// Canonical byte key of a smearing function: the bit patterns of its bump
/// parameters in declaration order, length-prefixed per bump list. Negative
/// zero collapses to zero so numerically identical factors merge. The order
/// induced on factors is arbitrary but total and deterministic, which is all
/// the normal form needs.
fn factor_key(f: &TestFunction) -> Vec<u8> {
    fn push(buf: &mut Vec<u8>, x: f64) {
        let bits = if x == 0.0 { 0u64 } else { x.to_bits() };
        buf.extend_from_slice(&bits.to_be_bytes());
    }
    let mut buf = Vec::with_capacity(8 + 72 * f.terms.len());
    buf.extend_from_slice(&(f.terms.len() as u64).to_be_bytes());
    for b in &f.terms {
        for v in b.center {
            push(&mut buf, v);
        }
        for v in b.halfwidths {
            push(&mut buf, v);
        }
        push(&mut buf, b.amplitude);
    }
    buf
}

/// Sort a term's factors by key and return the term's own canonical key:
/// degree first (so normal forms read off in degree-major order), then the
/// concatenated factor keys.
fn canonical_term(mut t: FunctionalTerm) -> (Vec<u8>, FunctionalTerm) {
    let mut keyed: Vec<(Vec<u8>, TestFunction)> =
        t.factors.drain(..).map(|f| (factor_key(&f), f)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let mut key = Vec::new();
    key.extend_from_slice(&(keyed.len() as u64).to_be_bytes());
    for (k, _) in &keyed {
        key.extend_from_slice(&(k.len() as u64).to_be_bytes());
        key.extend_from_slice(k);
    }
    t.factors = keyed.into_iter().map(|(_, f)| f).collect();
    (key, t)
}

impl PolynomialFunctional {
    pub fn zero() -> Self {
        PolynomialFunctional { terms: Vec::new() }
    }

    /// The constant observable `c·1`.
    pub fn constant(c: Complex64) -> Self {
        Self::from_terms(vec![FunctionalTerm { coefficient: c, factors: Vec::new() }])
    }

    /// The unit observable.
    pub fn one() -> Self {
        Self::constant(ONE)
    }

    /// The linear observable `φ(f) = ⟨f, φ⟩`.
    pub fn linear(f: &TestFunction) -> Self {
        Self::monomial(ONE, vec![f.clone()])
    }

    /// A single product term.
    pub fn monomial(c: Complex64, factors: Vec<TestFunction>) -> Self {
        Self::from_terms(vec![FunctionalTerm { coefficient: c, factors }])
    }

    /// Build from raw terms and normalize.
    pub fn from_terms(terms: Vec<FunctionalTerm>) -> Self {
        let mut keyed: Vec<(Vec<u8>, FunctionalTerm)> =
            terms.into_iter().map(canonical_term).collect();
        // Stable sort: raw terms with equal keys keep their build order, so
        // the merge below sums them in a deterministic order.
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Vec<u8>, FunctionalTerm)> = Vec::with_capacity(keyed.len());
        for (k, t) in keyed {
            match merged.last_mut() {
                Some((lk, lt)) if *lk == k => lt.coefficient += t.coefficient,
                _ => merged.push((k, t)),
            }
        }
        let terms = merged
            .into_iter()
            .filter(|(_, t)| t.coefficient != ZERO)
            .map(|(_, t)| t)
            .collect();
        PolynomialFunctional { terms }
    }

    /// The normalized terms, in canonical order.
    pub fn terms(&self) -> &[FunctionalTerm] {
        &self.terms
    }

    /// Largest factor count over the terms; 0 for constants and for the zero
    /// observable.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.factors.len()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(terms)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| FunctionalTerm {
                    coefficient: c * t.coefficient,
                    factors: t.factors.clone(),
                })
                .collect(),
        )
    }

    /// The involution `F ↦ F*`: coefficients conjugated, factor order
    /// reversed. Smearing functions are real, so they are their own
    /// conjugates, and the normal form re-sorts the reversed factors.
    pub fn adjoint(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| FunctionalTerm {
                    coefficient: t.coefficient.conj(),
                    factors: t.factors.iter().rev().cloned().collect(),
                })
                .collect(),
        )
    }

    /// Largest coefficient magnitude.
    pub fn max_coefficient_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient-wise difference against `other`, aligning terms by
    /// canonical key; terms missing on one side compare against zero.
    pub fn coefficient_gap(&self, other: &Self) -> f64 {
        let a = self.keyed();
        let b = other.keyed();
        let (mut i, mut j, mut worst) = (0usize, 0usize, 0.0f64);
        while i < a.len() || j < b.len() {
            let ord = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => break,
            };
            let gap = match ord {
                std::cmp::Ordering::Equal => {
                    let g = (a[i].1 - b[j].1).norm();
                    i += 1;
                    j += 1;
                    g
                }
                std::cmp::Ordering::Less => {
                    let g = a[i].1.norm();
                    i += 1;
                    g
                }
                std::cmp::Ordering::Greater => {
                    let g = b[j].1.norm();
                    j += 1;
                    g
                }
            };
            worst = worst.max(gap);
        }
        worst
    }

    /// Coefficient-wise equality on normal forms: the largest aligned
    /// coefficient difference stays below `tol · (1 + largest coefficient)`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let scale = 1.0 + self.max_coefficient_norm().max(other.max_coefficient_norm());
        self.coefficient_gap(other) <= tol * scale
    }

    fn keyed(&self) -> Vec<(Vec<u8>, Complex64)> {
        self.terms
            .iter()
            .map(|t| (canonical_term(t.clone()).0, t.coefficient))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Product configuration
// ---------------------------------------------------------------------------

/// Which bilinear kernel contracts factor pairs in the deformed product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingKind {
    /// Antisymmetric causal pairing of the bulk dynamics.
    Causal,
    /// Antisymmetric causal pairing of a reflecting region's dynamics
    /// (image-expanded).
    BoundaryCausal,
    /// `−2i ×` the region state's two-point kernel: the normal-ordered
    /// variant. Not antisymmetric; its antisymmetric part equals the causal
    /// pairing.
    DeformedTwoPoint,
}

/// Configuration of the deformed product: deformation scale `ħ`, pairing
/// kernel, region, and quadrature backend for pairing evaluations.
///
/// Whether the pairing is antisymmetric is determined by the kind (true for
/// both causal kinds, false for the two-point kind), so the flag cannot drift
/// out of sync with the kernel. Pairing values are cached per configuration
/// by canonical factor key; the cache is shared across clones.
#[derive(Debug, Clone)]
pub struct StarConfig {
    hbar: f64,
    region: Region,
    kind: PairingKind,
    backend: PairingBackendConfig,
    cache: Arc<Mutex<HashMap<(Vec<u8>, Vec<u8>), Complex64>>>,
}

fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(validation(format!(
            "the deformation scale must be positive and finite, got {hbar}"
        )));
    }
    Ok(())
}

impl StarConfig {
    fn build(hbar: f64, region: Region, kind: PairingKind) -> Result<Self> {
        check_hbar(hbar)?;
        Ok(StarConfig {
            hbar,
            region,
            kind,
            // The product evaluates many pairings; the on-shell momentum
            // grid is the fast deterministic route. The cross-checked
            // dual-backend route is exercised by the propagator suites.
            backend: PairingBackendConfig::momentum_only(),
            cache: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    /// Bulk causal pairing in full space.
    pub fn causal(hbar: f64) -> Result<Self> {
        Self::build(hbar, Region::Minkowski, PairingKind::Causal)
    }

    /// Causal pairing of a reflecting region's dynamics.
    pub fn boundary(hbar: f64, region: Region) -> Result<Self> {
        if matches!(region, Region::Minkowski) {
            return Err(validation(
                "the boundary pairing needs a reflecting wall; use the bulk causal \
                 pairing in full space",
            ));
        }
        Self::build(hbar, region, PairingKind::BoundaryCausal)
    }

    /// Normal-ordered variant: `−2i ×` the region state's two-point kernel.
    pub fn deformed(hbar: f64, region: Region) -> Result<Self> {
        Self::build(hbar, region, PairingKind::DeformedTwoPoint)
    }

    /// Replace the quadrature backend (resets the pairing cache).
    pub fn with_backend(self, backend: PairingBackendConfig) -> Result<Self> {
        backend.validate()?;
        Ok(StarConfig {
            backend,
            cache: Arc::new(Mutex::new(HashMap::new())),
            ..self
        })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn kind(&self) -> PairingKind {
        self.kind
    }

    /// True for the causal kinds, false for the two-point kind.
    pub fn is_antisymmetric(&self) -> bool {
        !matches!(self.kind, PairingKind::DeformedTwoPoint)
    }

    fn pairing(&self, f: &TestFunction, g: &TestFunction) -> Result<Complex64> {
        if f.terms.is_empty() || g.terms.is_empty() {
            return Ok(ZERO);
        }
        let key = (factor_key(f), factor_key(g));
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = match self.kind {
            PairingKind::Causal => Complex64::new(pair_e(f, g, &self.backend)?.value, 0.0),
            PairingKind::BoundaryCausal => {
                Complex64::new(pair_e_boundary(&self.region, f, g, &self.backend)?.value, 0.0)
            }
            PairingKind::DeformedTwoPoint => {
                let state =
                    TwoPointPairing::with_config(self.region.clone(), self.backend.clone())?;
                Complex64::new(0.0, -2.0) * state.image_two_point(f, g)?
            }
        };
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }
}

impl Default for StarConfig {
    fn default() -> Self {
        StarConfig::causal(1.0).expect("default configuration is valid")
    }
}

// ---------------------------------------------------------------------------
// The deformed product
// ---------------------------------------------------------------------------

/// Unique factors of a functional, keyed canonically, with per-term id lists.
struct FactorRegistry {
    factors: Vec<TestFunction>,
    term_ids: Vec<Vec<usize>>,
}

impl FactorRegistry {
    fn of(p: &PolynomialFunctional) -> Self {
        let mut ids: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut factors = Vec::new();
        let mut term_ids = Vec::with_capacity(p.terms.len());
        for t in &p.terms {
            let mut list = Vec::with_capacity(t.factors.len());
            for f in &t.factors {
                let key = factor_key(f);
                let next = factors.len();
                let id = *ids.entry(key).or_insert_with(|| {
                    factors.push(f.clone());
                    next
                });
                list.push(id);
            }
            term_ids.push(list);
        }
        FactorRegistry { factors, term_ids }
    }
}

/// All ascending `n`-subsets of `0..m`.
fn combinations(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(start: usize, m: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, n, cur, out);
            cur.pop();
        }
    }
    rec(0, m, n, &mut cur, &mut out);
    out
}

/// All ordered selections of `n` distinct indices from `0..m`.
fn ordered_selections(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    let mut used = vec![false; m];
    fn rec(
        m: usize,
        n: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..m {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(m, n, used, cur, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(m, n, &mut used, &mut cur, &mut out);
    out
}

/// The deformed product. Exact finite series: the `n`-th order contracts `n`
/// factor pairs between the operands,
///
/// ```text
/// (F ⋆ G)  =  Σ_n (iħ/2)ⁿ  Σ_{|S|=|T|=n, σ: S→T}  c_F c_G
///             · Π_{s∈S} P(f_s, g_{σ(s)}) · Π_{remaining factors} ⟨·, φ⟩
/// ```
///
/// summed over subsets `S` of the left factors, `T` of the right factors, and
/// bijections `σ` (the ordered-contraction multiplicities absorb the usual
/// `1/n!`). The zeroth order is the pointwise product. The series terminates
/// at the smaller operand degree, so the result is exact up to quadrature in
/// the pairing values.
///
/// Pairing values — the expensive part — are evaluated as an independent
/// matrix over unique factor pairs, in index order (this is where the work
/// parallelizes); the contraction bookkeeping itself runs sequentially and
/// merges terms in a deterministic order, so results are identical across
/// thread counts.
pub fn star(
    f: &PolynomialFunctional,
    g: &PolynomialFunctional,
    cfg: &StarConfig,
) -> Result<PolynomialFunctional> {
    let left = FactorRegistry::of(f);
    let right = FactorRegistry::of(g);
    let (nl, nr) = (left.factors.len(), right.factors.len());
    let matrix: Vec<Result<Complex64>> = exec::map_collect(nl * nr, |idx| {
        cfg.pairing(&left.factors[idx / nr.max(1)], &right.factors[idx % nr.max(1)])
    });
    let mut pairings = Vec::with_capacity(matrix.len());
    for v in matrix {
        pairings.push(v?);
    }

    let ihbar_half = Complex64::new(0.0, 0.5 * cfg.hbar);
    let mut raw: Vec<FunctionalTerm> = Vec::new();
    for (ta, ids_a) in f.terms.iter().zip(&left.term_ids) {
        for (tb, ids_b) in g.terms.iter().zip(&right.term_ids) {
            let (p, q) = (ids_a.len(), ids_b.len());
            // (iħ/2)ⁿ by iterated multiplication: the ħ-dependence enters
            // through this single factor, which keeps the documented scaling
            // of the n-th order coefficients exact in floating point.
            let mut order_coeff = ONE;
            for n in 0..=p.min(q) {
                if n > 0 {
                    order_coeff *= ihbar_half;
                }
                for s in combinations(p, n) {
                    for t in ordered_selections(q, n) {
                        let mut c = ta.coefficient * tb.coefficient * order_coeff;
                        for k in 0..n {
                            c *= pairings[ids_a[s[k]] * nr + ids_b[t[k]]];
                        }
                        let mut factors = Vec::with_capacity(p + q - 2 * n);
                        for (pos, fac) in ta.factors.iter().enumerate() {
                            if !s.contains(&pos) {
                                factors.push(fac.clone());
                            }
                        }
                        for (pos, fac) in tb.factors.iter().enumerate() {
                            if !t.contains(&pos) {
                                factors.push(fac.clone());
                            }
                        }
                        raw.push(FunctionalTerm { coefficient: c, factors });
                    }
                }
            }
        }
    }
    Ok(PolynomialFunctional::from_terms(raw))
}

/// The commutative pointwise product — the zeroth order of the deformed one.
pub fn pointwise_product(
    f: &PolynomialFunctional,
    g: &PolynomialFunctional,
) -> PolynomialFunctional {
    let mut raw = Vec::with_capacity(f.terms.len() * g.terms.len());
    for ta in &f.terms {
        for tb in &g.terms {
            let mut factors = ta.factors.clone();
            factors.extend(tb.factors.iter().cloned());
            raw.push(FunctionalTerm { coefficient: ta.coefficient * tb.coefficient, factors });
        }
    }
    PolynomialFunctional::from_terms(raw)
}

/// `F ⋆ G − G ⋆ F`. For linear observables under an antisymmetric pairing
/// this is the central element `iħ·pairing(f,g)·1`.
pub fn commutator(
    f: &PolynomialFunctional,
    g: &PolynomialFunctional,
    cfg: &StarConfig,
) -> Result<PolynomialFunctional> {
    Ok(star(f, g, cfg)?.sub(&star(g, f, cfg)?))
}

/// The normal-ordered product: the deformed product with pairing `−2i ×` the
/// region state's two-point kernel. In full space it is defined everywhere;
/// in a reflecting region the kernel is nonlocal across image light cones, so
/// the product is offered only where the wall is invisible: every factor
/// support (of both operands) must be reflected-causally disjoint from every
/// other and from its own mirror image. The antisymmetric part of the kernel
/// is the causal pairing, so commutators — and with them the canonical
/// commutation relations — are unchanged.
pub fn star_h(
    f: &PolynomialFunctional,
    g: &PolynomialFunctional,
    region: &Region,
    hbar: f64,
) -> Result<PolynomialFunctional> {
    check_deformed_domain(region, &[f, g])?;
    let cfg = StarConfig::deformed(hbar, region.clone())?;
    star(f, g, &cfg)
}

fn check_deformed_domain(region: &Region, fs: &[&PolynomialFunctional]) -> Result<()> {
    if matches!(region, Region::Minkowski) {
        return Ok(());
    }
    let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut boxes: Vec<SpacetimeBox> = Vec::new();
    for p in fs {
        for t in &p.terms {
            for f in &t.factors {
                if let Some(b) = f.support_box() {
                    let key = factor_key(f);
                    if seen.insert(key, boxes.len()).is_none() {
                        boxes.push(b);
                    }
                }
            }
        }
    }
    for i in 0..boxes.len() {
        for j in i..boxes.len() {
            if !reflected_causally_disjoint(region, &boxes[i], &boxes[j])? {
                return Err(validation(format!(
                    "the normal-ordered product is defined only where the boundary is \
                     invisible: the {} state's two-point kernel is nonlocal across \
                     image light cones, and a causal path bouncing off a wall connects \
                     factor supports {i} and {j}; move the supports until every pair \
                     (and every support with its own mirror image) is \
                     reflected-causally disjoint",
                    region.name(),
                )));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Quasi-free expectation values
// ---------------------------------------------------------------------------

/// Quasi-free expectation of an observable in the region state carried by
/// `state`: every term is summed over Wick pairings of its factors, each
/// pairing contributing the product of symmetrized two-point values; terms of
/// odd degree contribute zero, the empty product gives `ω(1) = 1`.
///
/// The symmetrized kernel `½(ω₂(a,b) + ω₂(b,a))` is forced by the classical
/// reading of a monomial, which is invariant under factor reordering: any
/// order-sensitive prescription would change under normal-form sorting. The
/// antisymmetric half of `ω₂` is not lost — it enters expectation values of
/// products through the explicit contraction terms of the deformed product,
/// and the combination reproduces operator-ordered Wick combinatorics (see
/// the four-point oracle in the tests).
pub fn expectation_value(
    state: &TwoPointPairing,
    f: &PolynomialFunctional,
) -> Result<Complex64> {
    let mut cache: HashMap<(Vec<u8>, Vec<u8>), Complex64> = HashMap::new();
    let mut total = ZERO;
    for term in &f.terms {
        let m = term.factors.len();
        if m % 2 == 1 {
            continue;
        }
        if m == 0 {
            total += term.coefficient;
            continue;
        }
        let mut pair = vec![vec![ZERO; m]; m];
        for i in 0..m {
            for j in (i + 1)..m {
                pair[i][j] =
                    symmetric_two_point(state, &mut cache, &term.factors[i], &term.factors[j])?;
            }
        }
        total += term.coefficient * isserlis(&pair, m);
    }
    Ok(total)
}

fn symmetric_two_point(
    state: &TwoPointPairing,
    cache: &mut HashMap<(Vec<u8>, Vec<u8>), Complex64>,
    a: &TestFunction,
    b: &TestFunction,
) -> Result<Complex64> {
    let (ka, kb) = (factor_key(a), factor_key(b));
    let key = if ka <= kb { (ka, kb) } else { (kb, ka) };
    if let Some(v) = cache.get(&key) {
        return Ok(*v);
    }
    let v = (state.image_two_point(a, b)? + state.image_two_point(b, a)?) * 0.5;
    cache.insert(key, v);
    Ok(v)
}

/// Sum over perfect matchings of `0..m` of the product of pair values
/// (`pair[i][j]` for `i < j`): 1 matching at `m = 2`, 3 at `m = 4`, 15 at
/// `m = 6`, …
fn isserlis(pair: &[Vec<Complex64>], m: usize) -> Complex64 {
    fn rec(pair: &[Vec<Complex64>], unmatched: &[usize]) -> Complex64 {
        if unmatched.is_empty() {
            return ONE;
        }
        let first = unmatched[0];
        let rest = &unmatched[1..];
        let mut sum = ZERO;
        for (idx, &partner) in rest.iter().enumerate() {
            let mut remaining = Vec::with_capacity(rest.len() - 1);
            remaining.extend_from_slice(&rest[..idx]);
            remaining.extend_from_slice(&rest[idx + 1..]);
            sum += pair[first][partner] * rec(pair, &remaining);
        }
        sum
    }
    let indices: Vec<usize> = (0..m).collect();
    rec(pair, &indices)
}

// ---------------------------------------------------------------------------
// Time-slice comparison
// ---------------------------------------------------------------------------

/// Check that a linear observable can be traded for its representative
/// squeezed into the time window `(t0, t1)` without changing its action on
/// solutions: builds the windowed representative `h` of the observable's
/// smearing function `f`, pairs both against the causal field `Eα` of every
/// sampled source, and returns the worst `|c|·|∫fEα − ∫hEα|`.
///
/// The sampled solutions use the region's own dynamics (image-expanded causal
/// fields), and both smearing integrals run over region-clipped boxes.
pub fn time_slice_check(
    region: &Region,
    functional: &PolynomialFunctional,
    t0: f64,
    t1: f64,
    sources: &[TestFunction],
) -> Result<f64> {
    let (coefficient, f) = linear_factor(functional)?;
    let window = TimeWindow::new(t0, t1)?;
    if sources.is_empty() {
        return Err(validation(
            "the time-slice comparison needs at least one sampled solution source",
        ));
    }
    let Some(fb) = f.support_box() else {
        return Ok(0.0);
    };
    let h = time_slice_representative(region, &f, window)?
        .with_orders(SLICE_FIELD_RADIAL, SLICE_FIELD_ANGULAR);

    let mut worst = 0.0f64;
    for alpha in sources {
        let phi = region_solution(region, alpha, &fb, t0, t1)?;
        let direct = smear_source(&f, &fb, &phi);
        let windowed = smear_window(&h, &phi, region, &fb, t0, t1);
        worst = worst.max(coefficient.norm() * (direct - windowed).abs());
    }
    Ok(worst)
}

fn linear_factor(p: &PolynomialFunctional) -> Result<(Complex64, TestFunction)> {
    match p.terms() {
        [t] if t.factors.len() == 1 => Ok((t.coefficient, t.factors[0].clone())),
        _ => Err(validation(
            "the time-slice comparison applies to linear observables carrying a \
             single smearing function",
        )),
    }
}

/// The causal field of `alpha` under the region's dynamics, with images wide
/// enough to reach both the window box and the source box of the comparison.
fn region_solution(
    region: &Region,
    alpha: &TestFunction,
    fb: &SpacetimeBox,
    t0: f64,
    t1: f64,
) -> Result<FieldEvaluator> {
    let Some(ab) = alpha.support_box() else {
        return Ok(causal_field(&TestFunction::zero()));
    };
    let interior = match region {
        Region::Minkowski => true,
        Region::HalfSpace => ab.min[3] > 0.0,
        Region::Slab { d } => ab.min[3] > 0.0 && ab.max[3] < *d,
    };
    if !interior {
        return Err(validation(
            "sampled solution sources must be supported strictly inside the region",
        ));
    }
    Ok(match region {
        Region::Minkowski => causal_field(alpha)
            .with_orders(SLICE_FIELD_RADIAL, SLICE_FIELD_ANGULAR),
        Region::HalfSpace => causal_field_of_terms(odd_double(alpha))
            .with_orders(SLICE_FIELD_RADIAL, SLICE_FIELD_ANGULAR),
        Region::Slab { d } => {
            let t_span = (t1 - ab.min[0])
                .abs()
                .max((ab.max[0] - t0).abs())
                .max((fb.max[0] - ab.min[0]).abs())
                .max((ab.max[0] - fb.min[0]).abs());
            let z_lo = -t_span - 1.0;
            let z_hi = d + t_span + 1.0;
            causal_field_of_terms(n_map(alpha, *d)?.terms_in_z_window(z_lo, z_hi))
                .with_orders(SLICE_FIELD_RADIAL, SLICE_FIELD_ANGULAR)
        }
    })
}

/// `∫ f φ` over the support box of `f` (Gauss–Legendre per axis).
fn smear_source(f: &TestFunction, fb: &SpacetimeBox, phi: &FieldEvaluator) -> f64 {
    let n = SLICE_SOURCE_ORDER;
    let rules: Vec<(Vec<f64>, Vec<f64>)> =
        (0..4).map(|a| quad::gauss_legendre_on(n, fb.min[a], fb.max[a])).collect();
    exec::map_sum(n * n * n * n, |idx| {
        let ids = [idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n];
        let p = SpacetimePoint::new(
            rules[0].0[ids[0]],
            rules[1].0[ids[1]],
            rules[2].0[ids[2]],
            rules[3].0[ids[3]],
        );
        let w: f64 = (0..4).map(|a| rules[a].1[ids[a]]).product();
        w * f.value(&p) * phi.value(&p)
    })
}

/// `∫ h φ` over the window times the region-clipped spatial reach box.
fn smear_window(
    h: &crate::propagators::TimeSliceRepresentative,
    phi: &FieldEvaluator,
    region: &Region,
    fb: &SpacetimeBox,
    t0: f64,
    t1: f64,
) -> f64 {
    let reach = (t1 - fb.min[0]).abs().max((fb.max[0] - t0).abs()) + 0.5;
    let (zmin, zmax) = match region {
        Region::Minkowski => (fb.min[3] - reach, fb.max[3] + reach),
        Region::HalfSpace => (0.0, fb.max[3] + reach),
        Region::Slab { d } => (0.0, *d),
    };
    let nt = SLICE_WINDOW_T_ORDER;
    let ns = SLICE_WINDOW_S_ORDER;
    let (tn, tw) = quad::gauss_legendre_on(nt, t0, t1);
    let (xn, xw) = quad::gauss_legendre_on(ns, fb.min[1] - reach, fb.max[1] + reach);
    let (yn, yw) = quad::gauss_legendre_on(ns, fb.min[2] - reach, fb.max[2] + reach);
    let (zn, zw) = quad::gauss_legendre_on(ns, zmin, zmax);
    exec::map_sum(nt * ns * ns * ns, |idx| {
        let it = idx / (ns * ns * ns);
        let ix = (idx / (ns * ns)) % ns;
        let iy = (idx / ns) % ns;
        let iz = idx % ns;
        let p = SpacetimePoint::new(tn[it], xn[ix], yn[iy], zn[iz]);
        let w = tw[it] * xw[ix] * yw[iy] * zw[iz];
        w * h.value(&p) * phi.value(&p)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfields::BumpTestFunction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bump(center: [f64; 4], w: f64, amp: f64) -> TestFunction {
        TestFunction::single(BumpTestFunction::new(center, [w; 4], amp))
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn normal_form_merges_orders_and_round_trips() {
        let f = bump([0.0, 0.0, 0.0, 0.0], 0.4, 1.0);
        let g = bump([0.3, 0.2, 0.0, 0.1], 0.4, 0.8);
        // Same monomial built with both factor orders merges into one term.
        let a = PolynomialFunctional::monomial(c(2.0, 0.5), vec![f.clone(), g.clone()]);
        let b = PolynomialFunctional::monomial(c(1.0, -0.5), vec![g.clone(), f.clone()]);
        let sum = a.add(&b);
        assert_eq!(sum.terms().len(), 1);
        assert_eq!(sum.terms()[0].coefficient, c(3.0, 0.0));
        assert_eq!(sum.degree(), 2);

        // Exact cancellation leaves the zero observable.
        assert!(a.sub(&a).is_zero());
        assert!(PolynomialFunctional::constant(ZERO).is_zero());

        // The involution conjugates coefficients and is idempotent squared.
        let adj = a.adjoint();
        assert_eq!(adj.terms()[0].coefficient, c(2.0, -0.5));
        assert_eq!(adj.adjoint().coefficient_gap(&a), 0.0);

        // Serialization mirrors the smearing-function JSON with a
        // terms/factors nesting and round-trips the normal form exactly.
        let mixed = a.add(&PolynomialFunctional::linear(&f)).add(&PolynomialFunctional::one());
        let json = serde_json::to_string(&mixed).unwrap();
        assert!(json.contains("\"terms\""));
        assert!(json.contains("\"factors\""));
        assert!(json.contains("\"halfwidths\""));
        let back: PolynomialFunctional = serde_json::from_str(&json).unwrap();
        assert_eq!(back.coefficient_gap(&mixed), 0.0);
    }

    #[test]
    fn config_validation_and_flags() {
        assert!(StarConfig::causal(0.0).is_err());
        assert!(StarConfig::causal(-1.0).is_err());
        assert!(StarConfig::deformed(f64::NAN, Region::Minkowski).is_err());
        assert!(StarConfig::boundary(1.0, Region::Minkowski).is_err());
        let cfg = StarConfig::default();
        assert_eq!(cfg.hbar(), 1.0);
        assert_eq!(cfg.kind(), PairingKind::Causal);
        assert!(cfg.is_antisymmetric());
        assert!(StarConfig::boundary(1.0, Region::HalfSpace).unwrap().is_antisymmetric());
        assert!(!StarConfig::deformed(1.0, Region::Minkowski).unwrap().is_antisymmetric());
    }

    #[test]
    fn unit_is_neutral_and_zeroth_order_is_the_pointwise_product() {
        let f = bump([0.0, 0.0, 0.0, 1.2], 0.35, 1.0);
        let g = bump([0.5, 0.2, -0.1, 1.5], 0.35, 0.9);
        let pf = PolynomialFunctional::monomial(c(1.2, -0.3), vec![f.clone(), g.clone()])
            .add(&PolynomialFunctional::linear(&g).scale(c(0.4, 0.1)));
        let one = PolynomialFunctional::one();
        let configs = [
            StarConfig::causal(1.0).unwrap(),
            StarConfig::boundary(1.0, Region::HalfSpace).unwrap(),
            StarConfig::deformed(1.0, Region::Minkowski).unwrap(),
        ];
        for cfg in &configs {
            assert_eq!(star(&one, &pf, cfg).unwrap().coefficient_gap(&pf), 0.0);
            assert_eq!(star(&pf, &one, cfg).unwrap().coefficient_gap(&pf), 0.0);
        }

        // The top-degree part of the deformed product is the pointwise
        // product with exactly equal coefficients — the deformation vanishes
        // at zeroth order, for every ħ.
        let pw = pointwise_product(&pf, &pf);
        for hbar in [1.0, 1e-3] {
            let s = star(&pf, &pf, &StarConfig::causal(hbar).unwrap()).unwrap();
            for t in s.terms().iter().filter(|t| t.factors.len() == 4) {
                let key = canonical_term((*t).clone()).0;
                let matching = pw
                    .terms()
                    .iter()
                    .find(|u| canonical_term((*u).clone()).0 == key)
                    .expect("pointwise term present");
                assert_eq!(t.coefficient, matching.coefficient);
            }
        }
    }

    #[test]
    fn linear_commutator_reproduces_the_pairing() {
        // Timelike-separated bumps with overlapping light cones: a pairing
        // value far from zero.
        let f = bump([0.0, 0.0, 0.0, 0.0], 0.4, 1.0);
        let g = bump([1.1, 0.3, 0.0, 0.2], 0.4, 0.9);
        let hbar = 0.8;
        let cfg = StarConfig::causal(hbar).unwrap();
        let com = commutator(
            &PolynomialFunctional::linear(&f),
            &PolynomialFunctional::linear(&g),
            &cfg,
        )
        .unwrap();
        assert_eq!(com.degree(), 0, "commutator of linear observables is central");
        assert_eq!(com.terms().len(), 1);
        let expected = Complex64::new(0.0, hbar)
            * pair_e(&f, &g, &PairingBackendConfig::momentum_only()).unwrap().value;
        let got = com.terms()[0].coefficient;
        assert!(
            (got - expected).norm() <= 1e-9 * (1.0 + expected.norm()),
            "commutator {got} vs iħ·pairing {expected}"
        );
        assert!(expected.norm() > 1e-8, "test geometry must have a visible pairing");

        // Spacelike-separated supports: the commutator is compatible with
        // zero at quadrature accuracy.
        let far = bump([0.0, 0.0, 0.0, 3.0], 0.3, 1.0);
        let com0 = commutator(
            &PolynomialFunctional::linear(&f),
            &PolynomialFunctional::linear(&far),
            &cfg,
        )
        .unwrap();
        let norm0 = com0.max_coefficient_norm();
        assert!(norm0 <= 1e-6, "disjoint commutator {norm0:.3e}");
    }

    #[test]
    fn boundary_commutator_matches_bulk_when_reflection_is_invisible() {
        // Interior half-space supports whose mirror images stay spacelike to
        // both supports; the direct separation is timelike, so the commutator
        // itself is far from zero.
        let f = bump([0.0, 0.0, 0.0, 2.2], 0.35, 1.0);
        let g = bump([0.9, 0.2, 0.0, 2.5], 0.35, 0.9);
        let region = Region::HalfSpace;
        let (fb, gb) = (f.support_box().unwrap(), g.support_box().unwrap());
        assert!(reflected_causally_disjoint(&region, &fb, &gb).unwrap());
        assert!(reflected_causally_disjoint(&region, &fb, &fb).unwrap());
        assert!(reflected_causally_disjoint(&region, &gb, &gb).unwrap());

        let lf = PolynomialFunctional::linear(&f);
        let lg = PolynomialFunctional::linear(&g);
        let bulk = commutator(&lf, &lg, &StarConfig::causal(1.0).unwrap()).unwrap();
        let wall = commutator(&lf, &lg, &StarConfig::boundary(1.0, region).unwrap()).unwrap();
        let scale = bulk.max_coefficient_norm();
        assert!(scale > 1e-8, "test geometry must have a visible commutator");
        let gap = bulk.coefficient_gap(&wall);
        assert!(gap <= 1e-6 * (1.0 + scale), "boundary vs bulk commutator gap {gap:.3e}");
    }

    #[test]
    fn jacobi_identity_is_exact() {
        let f = PolynomialFunctional::linear(&bump([0.0, 0.0, 0.0, 0.0], 0.4, 1.0));
        let g = PolynomialFunctional::linear(&bump([0.9, 0.2, 0.0, 0.3], 0.4, 0.8));
        let k = PolynomialFunctional::linear(&bump([0.4, -0.3, 0.1, -0.2], 0.35, 1.1));
        let cfg = StarConfig::causal(1.0).unwrap();
        let com = |a: &PolynomialFunctional, b: &PolynomialFunctional| {
            commutator(a, b, &cfg).unwrap()
        };
        // Inner commutators are central, and the deformed product with a
        // constant reduces to exact scalar multiplication on both sides, so
        // every double commutator — and with it the Jacobi sum — vanishes
        // identically, term by term.
        let j1 = com(&f, &com(&g, &k));
        let j2 = com(&g, &com(&k, &f));
        let j3 = com(&k, &com(&f, &g));
        assert!(j1.is_zero());
        assert!(j2.is_zero());
        assert!(j3.is_zero());
        assert!(j1.add(&j2).add(&j3).is_zero());
    }

    #[test]
    fn expectation_normalization_parity_and_domain() {
        let state = TwoPointPairing::new(Region::Minkowski);
        let f = bump([0.0, 0.0, 0.0, 0.0], 0.4, 1.0);
        assert_eq!(
            expectation_value(&state, &PolynomialFunctional::one()).unwrap(),
            ONE
        );
        assert_eq!(
            expectation_value(&state, &PolynomialFunctional::linear(&f)).unwrap(),
            ZERO
        );
        let odd = PolynomialFunctional::monomial(c(2.0, 1.0), vec![f.clone(), f.clone(), f.clone()]);
        assert_eq!(expectation_value(&state, &odd).unwrap(), ZERO);
        assert_eq!(
            expectation_value(&state, &PolynomialFunctional::zero()).unwrap(),
            ZERO
        );

        // Slab state: supports must stay strictly between the plates.
        let slab_state = TwoPointPairing::new(Region::slab(1.0).unwrap());
        let touching = bump([0.0, 0.0, 0.0, 0.1], 0.2, 1.0);
        let sq = PolynomialFunctional::monomial(ONE, vec![touching.clone(), touching]);
        assert!(expectation_value(&slab_state, &sq).is_err());
    }

    #[test]
    fn wick_oracles_match_operator_ordering() {
        let f = bump([0.0, 0.0, 0.0, 0.0], 0.45, 1.0);
        let g = bump([0.8, 0.25, 0.0, 0.2], 0.45, 0.9);
        let state = TwoPointPairing::new(Region::Minkowski);
        let cfg = StarConfig::causal(1.0).unwrap();
        let (lf, lg) = (PolynomialFunctional::linear(&f), PolynomialFunctional::linear(&g));

        // ⟨φ(f) ⋆ φ(g)⟩ = two-point value: the symmetric half comes from the
        // Wick pairing, the antisymmetric half from the first-order
        // contraction term.
        let w = state.vacuum_two_point(&f, &g).unwrap();
        let got = expectation_value(&state, &star(&lf, &lg, &cfg).unwrap()).unwrap();
        assert!(
            (got - w).norm() <= 1e-6 * (1.0 + w.norm()),
            "⟨φf⋆φg⟩ = {got} vs ω₂ = {w}"
        );

        // Squares: the self-pairing vanishes, so φ(f)² ⋆ φ(f)² is exactly
        // the fourth power, whose expectation is the 3-pairing Isserlis value.
        let sq = PolynomialFunctional::monomial(ONE, vec![f.clone(), f.clone()]);
        let fourth = PolynomialFunctional::monomial(ONE, vec![f.clone(); 4]);
        let product = star(&sq, &sq, &cfg).unwrap();
        assert_eq!(product.coefficient_gap(&fourth), 0.0);
        let wff = state.vacuum_two_point(&f, &f).unwrap();
        let expected4 = 3.0 * wff * wff;
        let got4 = expectation_value(&state, &product).unwrap();
        assert!(
            (got4 - expected4).norm() <= 1e-6 * (1.0 + expected4.norm()),
            "⟨φf⁴⟩ = {got4} vs Isserlis {expected4}"
        );

        // Alternating four-point: the iterated product must reproduce the
        // operator-ordered quasi-free four-point function
        // w(f,g)² + w(f,f)w(g,g) + w(f,g)·conj(w(f,g)).
        let chain = star(&star(&star(&lf, &lg, &cfg).unwrap(), &lf, &cfg).unwrap(), &lg, &cfg)
            .unwrap();
        let gotc = expectation_value(&state, &chain).unwrap();
        let wgg = state.vacuum_two_point(&g, &g).unwrap();
        let expectedc = w * w + wff * wgg + w * w.conj();
        assert!(
            (gotc - expectedc).norm() <= 1e-6 * (1.0 + expectedc.norm()),
            "⟨φfφgφfφg⟩ = {gotc} vs Wick {expectedc}"
        );
    }

    #[test]
    fn normal_ordered_product_shifts_centrally_and_keeps_commutators() {
        let f = bump([0.0, 0.0, 0.0, 0.0], 0.45, 1.0);
        let g = bump([0.9, 0.3, 0.0, 0.25], 0.45, 0.9);
        let (lf, lg) = (PolynomialFunctional::linear(&f), PolynomialFunctional::linear(&g));
        let causal = StarConfig::causal(1.0).unwrap();
        let region = Region::Minkowski;

        // Commutators agree between the two products.
        let com_e = commutator(&lf, &lg, &causal).unwrap();
        let com_h = star_h(&lf, &lg, &region, 1.0)
            .unwrap()
            .sub(&star_h(&lg, &lf, &region, 1.0).unwrap());
        let scale = com_e.max_coefficient_norm();
        assert!(scale > 1e-8);
        let gap = com_e.coefficient_gap(&com_h);
        assert!(gap <= 1e-5 * (1.0 + scale), "normal-ordered vs causal commutator gap {gap:.3e}");

        // The product of φ(f) with itself differs from the causal one by the
        // central two-point shift only.
        let diff = star_h(&lf, &lf, &region, 1.0)
            .unwrap()
            .sub(&star(&lf, &lf, &causal).unwrap());
        assert_eq!(diff.degree(), 0);
        assert_eq!(diff.terms().len(), 1);
        let state = TwoPointPairing::new(Region::Minkowski);
        let wff = state.vacuum_two_point(&f, &f).unwrap();
        let shift = diff.terms()[0].coefficient;
        assert!(
            (shift - wff).norm() <= 1e-9 * (1.0 + wff.norm()),
            "central shift {shift} vs two-point {wff}"
        );
    }

    #[test]
    fn normal_ordered_product_needs_an_invisible_wall() {
        // Supports hugging the wall: the mirror image is causally connected,
        // the product must refuse.
        let near = bump([0.0, 0.0, 0.0, 0.4], 0.3, 1.0);
        let lnear = PolynomialFunctional::linear(&near);
        let err = star_h(&lnear, &lnear, &Region::HalfSpace, 1.0).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("image light cones") && msg.contains("reflected-causally disjoint"),
            "unexpected rejection text: {msg}"
        );

        // The same supports moved away from the wall are accepted, and the
        // boundary state's commutator matches the bulk one.
        let far = bump([0.0, 0.0, 0.0, 2.2], 0.3, 1.0);
        let far2 = bump([0.7, 0.2, 0.0, 2.5], 0.3, 0.9);
        let (lfar, lfar2) =
            (PolynomialFunctional::linear(&far), PolynomialFunctional::linear(&far2));
        let com_h = star_h(&lfar, &lfar2, &Region::HalfSpace, 1.0)
            .unwrap()
            .sub(&star_h(&lfar2, &lfar, &Region::HalfSpace, 1.0).unwrap());
        let com_e = commutator(&lfar, &lfar2, &StarConfig::causal(1.0).unwrap()).unwrap();
        let scale = com_e.max_coefficient_norm();
        assert!(scale > 1e-8);
        let gap = com_e.coefficient_gap(&com_h);
        assert!(gap <= 1e-5 * (1.0 + scale), "boundary normal-ordered commutator gap {gap:.3e}");
    }

    #[test]
    fn deformation_scale_grading_is_exact() {
        let f = bump([0.0, 0.0, 0.0, 0.0], 0.4, 1.0);
        let g = bump([0.7, 0.2, 0.0, 0.3], 0.4, 0.9);
        let u = bump([0.2, -0.4, 0.1, -0.3], 0.35, 1.1);
        let v = bump([1.0, 0.1, -0.2, 0.1], 0.35, 0.8);
        let fa = PolynomialFunctional::monomial(c(1.3, -0.4), vec![f.clone(), g.clone()]);
        let fb = PolynomialFunctional::monomial(c(0.7, 0.2), vec![u.clone(), v.clone()]);
        let s1 = star(&fa, &fb, &StarConfig::causal(0.7).unwrap()).unwrap();
        let s2 = star(&fa, &fb, &StarConfig::causal(1.4).unwrap()).unwrap();
        assert_eq!(s1.terms().len(), s2.terms().len());
        // Monomial operands make the contraction order a function of the
        // degree: doubling ħ scales the degree-(4−2n) coefficients by exactly
        // 2ⁿ, bit for bit.
        for (t1, t2) in s1.terms().iter().zip(s2.terms()) {
            assert_eq!(t1.factors.len(), t2.factors.len());
            let n = (4 - t1.factors.len()) / 2;
            let scale = (1u32 << n) as f64;
            assert_eq!(t1.coefficient * scale, t2.coefficient);
        }
        // Degrees 4, 2, 0 all occur, so the check covers n = 0, 1, 2.
        for deg in [4, 2, 0] {
            assert!(s1.terms().iter().any(|t| t.factors.len() == deg));
        }
    }

    #[test]
    fn squares_have_nonnegative_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pool = [
            bump([0.0, 0.0, 0.0, 0.0], 0.45, 1.0),
            bump([0.6, 0.3, 0.0, 0.2], 0.45, 0.9),
            bump([0.3, -0.2, 0.3, -0.3], 0.4, 1.1),
        ];
        let state = TwoPointPairing::new(Region::Minkowski);
        let cfg = StarConfig::causal(1.0).unwrap();
        for round in 0..5 {
            let mut terms = Vec::new();
            for _ in 0..3 {
                let degree = rng.gen_range(0..=2usize);
                let factors =
                    (0..degree).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect();
                terms.push(FunctionalTerm {
                    coefficient: c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    factors,
                });
            }
            let fpoly = PolynomialFunctional::from_terms(terms);
            let square = star(&fpoly.adjoint(), &fpoly, &cfg).unwrap();
            let e = expectation_value(&state, &square).unwrap();
            assert!(
                e.im.abs() <= 1e-9 * (1.0 + e.re.abs()),
                "round {round}: square expectation must be real, got {e}"
            );
            assert!(e.re >= -1e-8, "round {round}: negative square expectation {e}");
        }

        // Boundary variant: the region state with the region pairing.
        let wall_pool = [
            bump([0.0, 0.0, 0.0, 1.6], 0.35, 1.0),
            bump([0.4, 0.2, 0.0, 2.0], 0.35, 0.9),
        ];
        let wall_state = TwoPointPairing::new(Region::HalfSpace);
        let wall_cfg = StarConfig::boundary(1.0, Region::HalfSpace).unwrap();
        let fpoly = PolynomialFunctional::monomial(c(0.8, -0.6), vec![wall_pool[0].clone()])
            .add(&PolynomialFunctional::monomial(
                c(-0.3, 0.4),
                vec![wall_pool[0].clone(), wall_pool[1].clone()],
            ))
            .add(&PolynomialFunctional::constant(c(0.2, 0.1)));
        let square = star(&fpoly.adjoint(), &fpoly, &wall_cfg).unwrap();
        let e = expectation_value(&wall_state, &square).unwrap();
        assert!(e.im.abs() <= 1e-9 * (1.0 + e.re.abs()), "wall square must be real, got {e}");
        assert!(e.re >= -1e-8, "wall square expectation {e}");
    }

    #[test]
    fn time_slice_residual_is_small_and_validated() {
        let f = PolynomialFunctional::linear(&bump([3.0, 0.0, 0.0, 0.0], 0.4, 1.0));
        let sources = [
            bump([-0.5, 0.4, 0.0, 0.2], 0.4, 1.0),
            bump([-0.2, -0.3, 0.3, -0.4], 0.35, 0.8),
        ];
        let res = time_slice_check(&Region::Minkowski, &f, 2.0, 2.6, &sources).unwrap();
        assert!(res <= 1e-4, "time-slice residual {res:.3e}");

        // Degenerate or empty windows and non-linear observables are refused.
        assert!(time_slice_check(&Region::Minkowski, &f, 2.0, 2.0, &sources).is_err());
        assert!(time_slice_check(&Region::Minkowski, &f, 2.6, 2.0, &sources).is_err());
        assert!(time_slice_check(&Region::Minkowski, &f, 2.0, 2.6, &[]).is_err());
        let quad = PolynomialFunctional::monomial(
            ONE,
            vec![bump([3.0, 0.0, 0.0, 0.0], 0.4, 1.0); 2],
        );
        assert!(time_slice_check(&Region::Minkowski, &quad, 2.0, 2.6, &sources).is_err());
        // Sources must sit inside the region.
        let outside = [bump([-0.5, 0.0, 0.0, -1.0], 0.3, 1.0)];
        assert!(time_slice_check(&Region::HalfSpace, &f, 2.0, 2.6, &outside).is_err());
    }
}
