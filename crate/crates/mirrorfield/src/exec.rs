//! Deterministic map-reduce over index ranges.
//!
//! Quadrature loops, lattice sums, and Gram assemblies all reduce large
//! index ranges to a handful of floating-point accumulators.  To keep every
//! public result bit-identical regardless of thread count, reductions are
//! organised as: fixed-size chunks summed sequentially in index order, then a
//! pairwise tree over the chunk partials, again in chunk order.  The
//! `parallel` feature only changes *who computes* each chunk partial, never
//! the arithmetic or its order.

/// Values that can be accumulated by the deterministic reducer.
pub trait Accum: Copy + Send {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
}

impl Accum for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
}

impl Accum for num_complex::Complex64 {
    fn zero() -> Self {
        num_complex::Complex64::new(0.0, 0.0)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
}

impl<A: Accum, B: Accum> Accum for (A, B) {
    fn zero() -> Self {
        (A::zero(), B::zero())
    }
    fn add(self, other: Self) -> Self {
        (self.0.add(other.0), self.1.add(other.1))
    }
}

impl<A: Accum, const N: usize> Accum for [A; N] {
    fn zero() -> Self {
        [A::zero(); N]
    }
    fn add(self, other: Self) -> Self {
        let mut out = self;
        for (o, r) in out.iter_mut().zip(other.iter()) {
            *o = o.add(*r);
        }
        out
    }
}

const CHUNK: usize = 4096;

fn chunk_partial<T: Accum>(f: &(impl Fn(usize) -> T + Sync), start: usize, end: usize) -> T {
    let mut acc = T::zero();
    for i in start..end {
        acc = acc.add(f(i));
    }
    acc
}

/// Pairwise tree sum in slice order.
pub fn pairwise_sum<T: Accum>(v: &[T]) -> T {
    match v.len() {
        0 => T::zero(),
        1 => v[0],
        2 => v[0].add(v[1]),
        n => {
            let mid = n / 2;
            pairwise_sum(&v[..mid]).add(pairwise_sum(&v[mid..]))
        }
    }
}

/// Sequential reduction: chunked exactly like the parallel path.
pub fn map_sum_seq<T: Accum>(n: usize, f: impl Fn(usize) -> T + Sync) -> T {
    let partials: Vec<T> = (0..n.div_ceil(CHUNK))
        .map(|c| chunk_partial(&f, c * CHUNK, ((c + 1) * CHUNK).min(n)))
        .collect();
    pairwise_sum(&partials)
}

/// Parallel reduction; bit-identical to [`map_sum_seq`] by construction.
#[cfg(feature = "parallel")]
pub fn map_sum_par<T: Accum>(n: usize, f: impl Fn(usize) -> T + Sync) -> T {
    use rayon::prelude::*;
    let partials: Vec<T> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| chunk_partial(&f, c * CHUNK, ((c + 1) * CHUNK).min(n)))
        .collect();
    pairwise_sum(&partials)
}

/// Reduction used throughout the library: parallel when the `parallel`
/// feature is active, sequential otherwise.  Same bits either way.
pub fn map_sum<T: Accum>(n: usize, f: impl Fn(usize) -> T + Sync) -> T {
    #[cfg(feature = "parallel")]
    {
        map_sum_par(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sum_seq(n, f)
    }
}

/// Evaluate `f` at every index and collect the results in index order.
///
/// Elements are computed independently, so the parallel path returns exactly
/// the same bits as the sequential one — order and arithmetic are untouched.
pub fn map_collect<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
