//! Gauss–Legendre and Gauss–Hermite rules, plus a panel-doubling integrator.
//!
//! Hermite nodes start from the Jacobi-matrix eigenvalues and are polished
//! by Newton iteration on the orthonormal Hermite *functions* rather than the
//! polynomials, so nothing overflows. The eigen step is cubic in the order;
//! keep orders to a few thousand.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// A quadrature rule on its reference domain.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n > 0, "gauss_legendre: n must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Orthonormal Hermite functions h_0..=h_n at `x`,
/// h_k(x) = (2^k k! √π)^{-1/2} H_k(x) e^{−x²/2}.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if n >= 1 {
        h.push(std::f64::consts::SQRT_2 * x * h[0]);
    }
    for j in 1..n {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * x * h[j] - (jf / (jf + 1.0)).sqrt() * h[j - 1];
        h.push(next);
    }
    h
}

/// (h_n, h_{n−1}, s) with the true values equal to the returned ones times
/// e^{s − x²/2}; rescaled as it goes so nothing under- or overflows.
fn hermite_top_scaled(n: usize, x: f64) -> (f64, f64, f64) {
    let mut log_scale = 0.0;
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    for j in 0..n {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * x * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        let mag = cur.abs().max(prev.abs());
        if mag > 1e100 {
            cur /= mag;
            prev /= mag;
            log_scale += mag.ln();
        }
    }
    (cur, prev, log_scale)
}

/// Gauss–Hermite rule for ∫ e^{−x²} f(x) dx.
///
/// Also returns, in the second rule, the "unweighted" weights w_i e^{x_i²}
/// for integrating a rapidly decaying f directly.
pub fn gauss_hermite(n: usize) -> (Rule, Rule) {
    assert!(n > 0, "gauss_hermite: n must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut raw = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    // Jacobi matrix eigenvalues give every node; Newton then polishes each one
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut eig: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    for i in 0..m {
        let mut z = eig[i];
        for _ in 0..8 {
            let (hn, hn1, _) = hermite_top_scaled(n, z);
            // p_n/p_n' = h_n / (sqrt(2n) h_{n-1})
            let dz = hn / ((2.0 * nf).sqrt() * hn1);
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, hn1, log_scale) = hermite_top_scaled(n, z);
        // ln|h_{n-1}| = ln_h − z²/2
        let ln_h = hn1.abs().ln() + log_scale;
        let unweighted = (-(nf.ln()) - 2.0 * ln_h + z * z).exp();
        let w = (-(nf.ln()) - 2.0 * ln_h).exp();
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = w;
        weights[n - 1 - i] = w;
        raw[i] = unweighted;
        raw[n - 1 - i] = unweighted;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    // ascending order
    nodes.reverse();
    weights.reverse();
    raw.reverse();
    (
        Rule {
            nodes: nodes.clone(),
            weights,
        },
        Rule {
            nodes,
            weights: raw,
        },
    )
}

type RuleCache = Mutex<HashMap<usize, Arc<(Rule, Rule)>>>;

/// Process-wide memoized [`gauss_hermite`]; building a rule costs O(n³).
pub fn gauss_hermite_shared(n: usize) -> Arc<(Rule, Rule)> {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&n) {
        return Arc::clone(r);
    }
    let rule = Arc::new(gauss_hermite(n));
    cache
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .entry(n)
        .or_insert(rule)
        .clone()
}

/// Composite Gauss–Legendre over `panels` equal sub-intervals of [a, b].
pub fn integrate_panels<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    rule: &Rule,
) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let mid = lo + 0.5 * h;
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * acc;
    }
    total
}

/// Panel-doubling Gauss–Legendre integration to absolute tolerance `tol`.
///
/// Starts from one 16-point panel per unit length (at least one panel) and
/// doubles the panel count until two successive estimates agree within
/// `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let rule = gauss_legendre(16);
    let mut panels = ((b - a).abs().ceil() as usize).max(1);
    let mut prev = integrate_panels(&mut f, a, b, panels, &rule);
    let mut diff = f64::INFINITY;
    for _ in 0..12 {
        panels *= 2;
        let next = integrate_panels(&mut f, a, b, panels, &rule);
        diff = (next - prev).abs();
        if diff <= tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureFailure {
        tol,
        achieved: diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = gauss_legendre(10);
        let sum_w: f64 = r.weights.iter().sum();
        assert_relative_eq!(sum_w, 2.0, max_relative = 1e-14);
        // ∫_{-1}^{1} x^18 = 2/19
        let v: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w * x.powi(18))
            .sum();
        assert_relative_eq!(v, 2.0 / 19.0, max_relative = 1e-13);
    }

    #[test]
    fn hermite_moments() {
        for n in [1usize, 2, 5, 20, 80, 160, 320, 1024] {
            let (r, _) = gauss_hermite(n);
            let sum_w: f64 = r.weights.iter().sum();
            assert_relative_eq!(sum_w, PI.sqrt(), max_relative = 1e-13);
        }
        // ∫ x^8 e^{-x²} = 105 √π / 16
        let (r, _) = gauss_hermite(80);
        let v: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w * x.powi(8))
            .sum();
        assert_relative_eq!(v, 105.0 * PI.sqrt() / 16.0, max_relative = 1e-13);
        assert!(r.nodes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn shared_rules_are_reused() {
        let a = gauss_hermite_shared(40);
        let b = gauss_hermite_shared(40);
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(a.0.nodes, gauss_hermite(40).0.nodes);
    }

    #[test]
    fn hermite_unweighted_rule() {
        // ∫ e^{-2x²} cos(x) dx = sqrt(π/2) e^{-1/8}
        let (_, raw) = gauss_hermite(60);
        let v: f64 = raw
            .nodes
            .iter()
            .zip(&raw.weights)
            .map(|(x, w)| w * (-2.0 * x * x).exp() * x.cos())
            .sum();
        assert_relative_eq!(v, (PI / 2.0).sqrt() * (-0.125f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let (_, raw) = gauss_hermite(100);
        let hs: Vec<Vec<f64>> = raw.nodes.iter().map(|&x| hermite_functions(30, x)).collect();
        for j in [0usize, 3, 17, 30] {
            for k in [0usize, 3, 17, 30] {
                let v: f64 = hs.iter().zip(&raw.weights).map(|(h, w)| w * h[j] * h[k]).sum();
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12, "<{j}|{k}> = {v}");
            }
        }
    }

    #[test]
    fn adaptive_integration() {
        let v = integrate(|s: f64| s.sin().powi(3), 0.0, PI, 1e-13).unwrap();
        assert_relative_eq!(v, 4.0 / 3.0, max_relative = 1e-13);
        assert_eq!(integrate(|s: f64| s, 2.0, 2.0, 1e-12).unwrap(), 0.0);
        assert!(integrate(|s: f64| s, 0.0, 1.0, 0.0).is_err());
    }
}
