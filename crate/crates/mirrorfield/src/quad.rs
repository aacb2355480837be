//! Quadrature rules and Chebyshev interpolation.
//!
//! Gauss–Legendre rules are generated once per order (Newton iteration on the
//! Legendre recurrence) and cached, since grid builders ask for the same
//! orders over and over.  The Chebyshev interpolant is used to tabulate
//! smooth one-dimensional transforms that would otherwise be recomputed by
//! quadrature at every grid node.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss–Legendre rule on the reference interval `[-1, 1]`.
#[derive(Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Evaluate the Legendre polynomial `P_n` and its derivative at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0f64;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn build_rule(n: usize) -> Rule {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Roots come in +/- pairs; solve the lower half and mirror.
    for i in 0..n.div_ceil(2) {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// Cached Gauss–Legendre rule of the given order.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard.entry(n).or_insert_with(|| Arc::new(build_rule(n))).clone()
}

/// Nodes and weights of the order-`n` rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let nodes = rule.nodes.iter().map(|&x| mid + half * x).collect();
    let weights = rule.weights.iter().map(|&w| half * w).collect();
    (nodes, weights)
}

/// Single-panel Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate(n: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (xs, ws) = gauss_legendre_on(n, a, b);
    xs.iter().zip(ws.iter()).map(|(&x, &w)| w * f(x)).sum()
}

/// Composite integral: `panels` equal panels, order `n` each.
pub fn integrate_panels(n: usize, panels: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        total += integrate(n, a + p as f64 * h, a + (p + 1) as f64 * h, &f);
    }
    total
}

/// Chebyshev interpolant of a smooth function on `[a, b]`.
///
/// Fitting samples the function at first-kind Chebyshev points; evaluation
/// uses Clenshaw recurrence.  For analytic integrands the coefficients decay
/// geometrically, so a modest degree reaches machine precision.
#[derive(Debug, Clone)]
pub struct Cheb {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

impl Cheb {
    pub fn fit(a: f64, b: f64, degree: usize, f: impl Fn(f64) -> f64) -> Self {
        let n = degree + 1;
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let samples: Vec<f64> = (0..n)
            .map(|k| {
                let theta = std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                f(mid + half * theta.cos())
            })
            .collect();
        let coeffs = (0..n)
            .map(|j| {
                let mut c = 0.0;
                for (k, &s) in samples.iter().enumerate() {
                    c += s * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64).cos();
                }
                2.0 * c / n as f64
            })
            .collect();
        Cheb { a, b, coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + 0.5 * self.coeffs[0]
    }
}
