//! Normalized Hermite functions and Gauss–Hermite quadrature.
//!
//! The Hermite functions
//!
//! ```text
//! Φ_k(y) = H_k(y) e^{-y²/2} / sqrt(2^k k! sqrt(π))
//! ```
//!
//! form an orthonormal basis of L²(ℝ). They are evaluated with the
//! three-term recursion on Φ_k itself,
//!
//! ```text
//! Φ_{k+1} = sqrt(2/(k+1)) y Φ_k − sqrt(k/(k+1)) Φ_{k−1},
//! ```
//!
//! carrying a running exponent so that neither the Gaussian factor nor the
//! polynomial growth can under- or overflow before the final rescale.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HermiteError {
    #[error("non-finite Hermite value at mode {mode} (y = {y})")]
    NonFinite { mode: usize, y: f64 },
    #[error("derivative order {0} not supported (expected 0, 1 or 2)")]
    DerivativeOrder(u8),
    #[error("quadrature order {0} outside 1..=2048")]
    QuadratureOrder(usize),
    #[error("Gauss-Hermite root finder did not converge for node {node} of {order}")]
    NoConvergence { order: usize, node: usize },
}

/// π^{-1/4}, the value of Φ_0 at the origin.
pub const PI_M_QUARTER: f64 = 0.751_125_544_464_942_5;

const RESCALE_HI: f64 = 1e150;
const RESCALE_FACTOR: f64 = 1e-150;
const LN_RESCALE: f64 = 345.387_763_949_107; // ln(1e150)

/// Values Φ_0(y)..Φ_{k_max}(y) or one of their first two derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteEval {
    pub k_max: usize,
    pub values: Vec<f64>,
}

/// Scaled recursion: returns (p_k, s_k) with Φ_k(y) = p_k · exp(s_k).
fn scaled_recursion(k_max: usize, y: f64) -> Result<Vec<(f64, f64)>, HermiteError> {
    if !y.is_finite() {
        return Err(HermiteError::NonFinite { mode: 0, y });
    }
    let mut out = Vec::with_capacity(k_max + 1);
    let mut scale = -0.5 * y * y;
    let mut prev = 0.0;
    let mut cur = PI_M_QUARTER;
    out.push((cur, scale));
    for k in 0..k_max {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * y * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if !cur.is_finite() {
            return Err(HermiteError::NonFinite { mode: k + 1, y });
        }
        if cur.abs() > RESCALE_HI {
            cur *= RESCALE_FACTOR;
            prev *= RESCALE_FACTOR;
            scale += LN_RESCALE;
        }
        out.push((cur, scale));
    }
    Ok(out)
}

fn unscale(p: f64, s: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * s.exp()
    }
}

/// Φ_k(y) for k = 0..=k_max.
pub fn phi(k_max: usize, y: f64) -> Result<Vec<f64>, HermiteError> {
    let scaled = scaled_recursion(k_max, y)?;
    let vals: Vec<f64> = scaled.iter().map(|&(p, s)| unscale(p, s)).collect();
    check_finite(&vals, y)?;
    Ok(vals)
}

fn check_finite(vals: &[f64], y: f64) -> Result<(), HermiteError> {
    match vals.iter().position(|v| !v.is_finite()) {
        Some(mode) => Err(HermiteError::NonFinite { mode, y }),
        None => Ok(()),
    }
}

/// Φ_k^{(d)}(y) for k = 0..=k_max and d ∈ {0, 1, 2}.
///
/// The first derivative uses the ladder relation
/// `Φ_k' = −sqrt((k+1)/2) Φ_{k+1} + sqrt(k/2) Φ_{k−1}`; the second uses the
/// Hermite equation `Φ_k'' = (y² − (2k+1)) Φ_k`.
pub fn eval_phi(k_max: usize, y: f64, derivative_order: u8) -> Result<HermiteEval, HermiteError> {
    let values = match derivative_order {
        0 => phi(k_max, y)?,
        1 => {
            let p = phi(k_max + 1, y)?;
            (0..=k_max)
                .map(|k| {
                    let kf = k as f64;
                    let down = if k > 0 { (kf / 2.0).sqrt() * p[k - 1] } else { 0.0 };
                    down - ((kf + 1.0) / 2.0).sqrt() * p[k + 1]
                })
                .collect()
        }
        2 => phi(k_max, y)?
            .into_iter()
            .enumerate()
            .map(|(k, v)| (y * y - (2 * k + 1) as f64) * v)
            .collect(),
        d => return Err(HermiteError::DerivativeOrder(d)),
    };
    check_finite(&values, y)?;
    Ok(HermiteEval { k_max, values })
}

/// (Φ_k(0), Φ_k'(0)) for k = 0..=k_max.
///
/// Both arrays are taken from [`eval_phi`] at y = 0 so that downstream
/// observables agree bit-for-bit with pointwise synthesis.
///
/// Note that the weight ω(0) = π^{-1/4} is part of Φ_k(0); the bare ratio
/// H_k(0)/sqrt(2^k k!) differs from it by exactly that factor.
pub fn phi_values_at_zero(k_max: usize) -> (Vec<f64>, Vec<f64>) {
    // y = 0 is finite and the recursion only shrinks there.
    let v = eval_phi(k_max, 0.0, 0).expect("finite at origin").values;
    let d = eval_phi(k_max, 0.0, 1).expect("finite at origin").values;
    (v, d)
}

/// Gauss–Hermite rule for the weight e^{-y²}.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    /// Weights for ∫ f(y) e^{-y²} dy. These underflow to zero for
    /// |y| ≳ 26.6, which only happens for orders above ~700.
    pub weights: Vec<f64>,
    /// `weights[q] * exp(nodes[q]²)`: weights for plain ∫ g(y) dy where g
    /// carries its own Gaussian decay. Always finite and positive.
    pub scaled_weights: Vec<f64>,
}

impl Quadrature {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

/// Sturm count: number of Jacobi-matrix eigenvalues strictly below `x`.
/// Off-diagonal entries are sqrt(k/2), k = 1..q.
fn sturm_count(q: usize, x: f64) -> usize {
    let mut count = 0;
    let mut d = -x;
    if d < 0.0 {
        count += 1;
    }
    for k in 1..q {
        let b2 = k as f64 / 2.0;
        let denom = if d == 0.0 { f64::EPSILON * (1.0 + x.abs()) } else { d };
        d = -x - b2 / denom;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Φ_q(y)/Φ_q'(y), computed from the scaled recursion so that the ratio is
/// exact even where both values underflow.
fn newton_ratio(q: usize, y: f64) -> Result<(f64, f64, f64), HermiteError> {
    let sc = scaled_recursion(q, y)?;
    let (pq, sq) = sc[q];
    let (pq1, sq1) = sc[q - 1];
    // Φ_q' = sqrt(2q) Φ_{q−1} − y Φ_q
    let pq1 = pq1 * (sq1 - sq).exp();
    let deriv = (2.0 * q as f64).sqrt() * pq1 - y * pq;
    Ok((pq / deriv, pq1, sq))
}

/// Nodes and weights of the Q-point Gauss–Hermite rule, 1 ≤ Q ≤ 2048.
///
/// Roots of H_Q are bracketed by bisection on the Sturm sequence of the
/// symmetric Jacobi matrix, then polished with Newton steps on Φ_Q. The
/// weights use `w = e^{-y²} / (Q Φ_{Q−1}(y)²)`, evaluated in log space.
pub fn gauss_hermite(order: usize) -> Result<Quadrature, HermiteError> {
    if order == 0 || order > 2048 {
        return Err(HermiteError::QuadratureOrder(order));
    }
    let q = order;
    let bound = (2.0 * q as f64).sqrt() + 1.0;
    // Positive roots, ascending. Eigenvalue index i (0-based, ascending) is
    // positive for i ≥ ceil(q/2) when q is odd, i ≥ q/2 when even.
    let first_pos = q.div_ceil(2);
    let mut positive = Vec::with_capacity(q / 2);
    for idx in first_pos..q {
        // eigenvalue #idx lies in (lo, hi] with count(lo) ≤ idx < count(hi)
        let mut lo = 0.0;
        let mut hi = bound;
        let mut converged = false;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(q, mid) > idx {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-9 * hi.max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(HermiteError::NoConvergence { order: q, node: idx });
        }
        let mut y = 0.5 * (lo + hi);
        for _ in 0..8 {
            let (ratio, _, _) = newton_ratio(q, y)?;
            let next = y - ratio;
            // Stay inside the bisection bracket (slightly widened).
            if !(next > lo - 1e-8 && next < hi + 1e-8) {
                break;
            }
            let step = (next - y).abs();
            y = next;
            if step <= 4.0 * f64::EPSILON * y.abs() {
                break;
            }
        }
        positive.push(y);
    }

    let mut nodes = Vec::with_capacity(q);
    nodes.extend(positive.iter().rev().map(|y| -y));
    if q % 2 == 1 {
        nodes.push(0.0);
    }
    nodes.extend(positive.iter().copied());

    let mut weights = Vec::with_capacity(q);
    let mut scaled_weights = Vec::with_capacity(q);
    let ln_q = (q as f64).ln();
    for &y in &nodes {
        let sc = scaled_recursion(q - 1, y)?;
        let (p, s) = sc[q - 1];
        let ln_scaled = -ln_q - 2.0 * (p.abs().ln() + s);
        scaled_weights.push(ln_scaled.exp());
        weights.push((ln_scaled - y * y).exp());
    }
    // Exact symmetry.
    for i in 0..q / 2 {
        let j = q - 1 - i;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
        let sw = 0.5 * (scaled_weights[i] + scaled_weights[j]);
        scaled_weights[i] = sw;
        scaled_weights[j] = sw;
    }
    Ok(Quadrature {
        nodes,
        weights,
        scaled_weights,
    })
}

/// Default rule for a Galerkin space of modes 0..=n: Q = 2(n+1).
pub fn default_quadrature(n: usize) -> Result<Quadrature, HermiteError> {
    gauss_hermite(2 * (n + 1))
}

/// Φ_k(y_q) tabulated on a set of nodes, row-major with k outer.
#[derive(Debug, Clone)]
pub struct PhiTable {
    pub n_modes: usize,
    pub n_nodes: usize,
    pub data: Vec<f64>,
}

impl PhiTable {
    pub fn new(k_max: usize, nodes: &[f64]) -> Result<Self, HermiteError> {
        let n_modes = k_max + 1;
        let n_nodes = nodes.len();
        let mut data = vec![0.0; n_modes * n_nodes];
        for (q, &y) in nodes.iter().enumerate() {
            let vals = phi(k_max, y)?;
            for (k, v) in vals.into_iter().enumerate() {
                data[k * n_nodes + q] = v;
            }
        }
        Ok(Self { n_modes, n_nodes, data })
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_nodes..(k + 1) * self.n_nodes]
    }

    #[inline]
    pub fn get(&self, k: usize, q: usize) -> f64 {
        self.data[k * self.n_nodes + q]
    }
}

/// Closed form Φ_{2m}(0) = (−1)^m sqrt((2m)!) / (2^m m!) · π^{-1/4}.
///
/// Only used as an independent cross-check of the recursion.
pub fn phi_even_at_zero_closed_form(m: usize) -> f64 {
    // log-gamma-free: accumulate the ratio sqrt((2m)!)/(2^m m!) iteratively.
    let mut r = 1.0f64;
    for i in 1..=m {
        let i = i as f64;
        // ratio_i / ratio_{i-1} = sqrt((2i)(2i−1)) / (2 i)
        r *= ((2.0 * i) * (2.0 * i - 1.0)).sqrt() / (2.0 * i);
    }
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * r * PI.powf(-0.25)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_zero_at_origin() {
        let v = eval_phi(0, 0.0, 0).unwrap().values;
        assert!((v[0] - PI.powf(-0.25)).abs() < 1e-15);
        assert!((v[0] - 0.751126).abs() < 1e-6);
    }

    #[test]
    fn phi_two_at_origin_matches_polynomial_route() {
        // H_2 = 4y² − 2 from H_{k+1} = 2y H_k − 2k H_{k−1}; normalize by sqrt(2² 2!).
        let h2_at_0 = -2.0;
        let expected = h2_at_0 / (4.0f64 * 2.0).sqrt() * PI.powf(-0.25);
        let v = eval_phi(2, 0.0, 0).unwrap().values;
        assert!((v[2] - expected).abs() < 1e-15);
        assert!((v[2] + 0.531126).abs() < 1e-6);
    }

    #[test]
    fn first_derivative_matches_finite_difference() {
        let h = 1e-5;
        for &y in &[0.0, 0.3, -1.7, 4.0] {
            let d = eval_phi(12, y, 1).unwrap().values;
            let p = phi(12, y + h).unwrap();
            let m = phi(12, y - h).unwrap();
            for k in 0..=12 {
                let fd = (p[k] - m[k]) / (2.0 * h);
                assert!((fd - d[k]).abs() < 1e-6, "k={k} y={y}: {fd} vs {}", d[k]);
            }
        }
        let d0 = eval_phi(1, 0.0, 1).unwrap().values;
        assert!(d0[0].abs() < 1e-16);
        // Φ_1'(0) = −Φ_2(0) + sqrt(1/2) Φ_0(0) = sqrt(2) π^{-1/4}
        assert!((d0[1] - 2f64.sqrt() * PI.powf(-0.25)).abs() < 1e-15);
        assert!((d0[1] - 1.062252).abs() < 1e-6);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let h = 1e-4;
        for &y in &[0.0, 0.9, -2.2] {
            let d2 = eval_phi(8, y, 2).unwrap().values;
            let p = phi(8, y + h).unwrap();
            let c = phi(8, y).unwrap();
            let m = phi(8, y - h).unwrap();
            for k in 0..=8 {
                let fd = (p[k] - 2.0 * c[k] + m[k]) / (h * h);
                assert!((fd - d2[k]).abs() < 1e-6, "k={k}");
            }
        }
    }

    #[test]
    fn bad_derivative_order() {
        assert_eq!(eval_phi(3, 0.0, 3), Err(HermiteError::DerivativeOrder(3)));
        assert!(matches!(phi(3, f64::NAN), Err(HermiteError::NonFinite { .. })));
    }

    #[test]
    fn values_at_zero_parity_and_closed_form() {
        let (v, d) = phi_values_at_zero(40);
        for k in 0..=40 {
            if k % 2 == 1 {
                assert_eq!(v[k], 0.0);
            } else {
                assert_eq!(d[k], 0.0);
                let cf = phi_even_at_zero_closed_form(k / 2);
                assert!((v[k] - cf).abs() < 1e-14, "k={k}");
            }
        }
        assert!((v[4] - 0.459969).abs() < 1e-6);
        assert!((v[4] - PI.powf(-0.25) * 24f64.sqrt() / 8.0).abs() < 1e-15);
    }

    #[test]
    fn large_mode_and_argument_stay_finite() {
        let v = phi(1024, 40.0).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
        // y = 40 is inside the oscillatory region of Φ_1024 (turning point ≈ 45.3),
        // so the top modes are O(0.1), not underflowed.
        assert!(v[1024].abs() > 1e-3);
        assert!(v[0] == 0.0 || v[0] < 1e-300);
        let v = phi(1024, -40.0).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn recursion_identity_y_phi() {
        for &y in &[-10.0, -3.3, 0.0, 0.5, 7.1, 10.0] {
            let p = phi(65, y).unwrap();
            for k in 0..=64 {
                let kf = k as f64;
                let down = if k > 0 { (kf / 2.0).sqrt() * p[k - 1] } else { 0.0 };
                let rhs = ((kf + 1.0) / 2.0).sqrt() * p[k + 1] + down;
                assert!((y * p[k] - rhs).abs() < 1e-12, "k={k} y={y}");
            }
        }
    }

    #[test]
    fn gauss_hermite_small_orders() {
        let q1 = gauss_hermite(1).unwrap();
        assert_eq!(q1.nodes, vec![0.0]);
        assert!((q1.weights[0] - PI.sqrt()).abs() < 1e-14);

        let q2 = gauss_hermite(2).unwrap();
        let r = 0.5f64.sqrt();
        assert!((q2.nodes[0] + r).abs() < 1e-15 && (q2.nodes[1] - r).abs() < 1e-15);
        for w in &q2.weights {
            assert!((w - PI.sqrt() / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_hermite_invariants() {
        for &q in &[3usize, 8, 32, 42, 101, 258, 802] {
            let quad = gauss_hermite(q).unwrap();
            assert_eq!(quad.order(), q);
            for w in quad.nodes.windows(2) {
                assert!(w[0] < w[1]);
            }
            for i in 0..q {
                assert_eq!(quad.nodes[i], -quad.nodes[q - 1 - i]);
                assert_eq!(quad.weights[i], quad.weights[q - 1 - i]);
                assert!(quad.scaled_weights[i] > 0.0);
                if q <= 258 {
                    assert!(quad.weights[i] > 0.0);
                }
            }
            let s: f64 = quad.weights.iter().sum();
            assert!((s - PI.sqrt()).abs() < 1e-13, "q={q}: {s}");
        }
        let quad = gauss_hermite(32).unwrap();
        let m2: f64 = quad.weights.iter().zip(&quad.nodes).map(|(w, y)| w * y * y).sum();
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_hermite_monomial_exactness() {
        // ∫ y^{2m} e^{-y²} dy = Γ(m + 1/2) = sqrt(π) (2m−1)!! / 2^m
        let q = 12;
        let quad = gauss_hermite(q).unwrap();
        let mut exact = PI.sqrt();
        for m in 0..q {
            let deg = 2 * m;
            let approx: f64 = quad
                .weights
                .iter()
                .zip(&quad.nodes)
                .map(|(w, y)| w * y.powi(deg as i32))
                .sum();
            assert!(((approx - exact) / exact).abs() < 1e-12, "deg {deg}");
            let odd: f64 = quad
                .weights
                .iter()
                .zip(&quad.nodes)
                .map(|(w, y)| w * y.powi(deg as i32 + 1))
                .sum();
            assert!(odd.abs() < 1e-12 * exact.max(1.0));
            exact *= (2 * m + 1) as f64 / 2.0;
        }
    }

    #[test]
    fn largest_order_converges() {
        let quad = gauss_hermite(2048).unwrap();
        assert_eq!(quad.order(), 2048);
        assert!(quad.scaled_weights.iter().all(|w| w.is_finite() && *w > 0.0));
        assert!(matches!(gauss_hermite(0), Err(HermiteError::QuadratureOrder(0))));
        assert!(matches!(gauss_hermite(2049), Err(HermiteError::QuadratureOrder(_))));
    }

    #[test]
    fn orthonormality_on_default_rule() {
        let n = 40;
        let quad = default_quadrature(n).unwrap();
        let table = PhiTable::new(n, &quad.nodes).unwrap();
        for k in 0..=n {
            for l in k..=n {
                let s: f64 = (0..quad.order())
                    .map(|q| quad.scaled_weights[q] * table.get(k, q) * table.get(l, q))
                    .sum();
                let target = if k == l { 1.0 } else { 0.0 };
                assert!((s - target).abs() < 1e-10, "({k},{l}) {s}");
            }
        }
    }
}
