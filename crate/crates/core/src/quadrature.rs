//! Quadrature over the incident wave number.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::GaussianSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    Trapezoid,
    GaussLegendre,
}

/// Discretization of the spectral integral over `k in [k_lo, k_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KQuadrature {
    pub k_lo: f64,
    pub k_hi: f64,
    pub n_nodes: usize,
    pub rule: QuadratureRule,
}

impl KQuadrature {
    pub const MIN_NODES: usize = 16;
    pub const DEFAULT_NODES: usize = 1024;
    /// Half-width of the default window in units of `dk`.
    pub const WINDOW_SIGMAS: f64 = 6.0;
    /// Lower cutoff keeping the window inside `k > 0`.
    pub const K_FLOOR: f64 = 1e-6;

    pub fn new(k_lo: f64, k_hi: f64, n_nodes: usize, rule: QuadratureRule) -> Result<Self> {
        if !(k_lo > 0.0) {
            return Err(Error::invalid(format!("k_lo must be positive, got {k_lo}")));
        }
        if !(k_lo < k_hi) || !k_hi.is_finite() {
            return Err(Error::invalid(format!(
                "need k_lo < k_hi, got [{k_lo}, {k_hi}]"
            )));
        }
        if n_nodes < Self::MIN_NODES {
            return Err(Error::invalid(format!(
                "need at least {} quadrature nodes, got {n_nodes}",
                Self::MIN_NODES
            )));
        }
        Ok(Self {
            k_lo,
            k_hi,
            n_nodes,
            rule,
        })
    }

    /// `k0 +- 6 dk`, floored at `1e-6`.
    pub fn for_packet(packet: &GaussianSpectrum, n_nodes: usize, rule: QuadratureRule) -> Result<Self> {
        let half = Self::WINDOW_SIGMAS * packet.dk;
        Self::new(
            (packet.k0 - half).max(Self::K_FLOOR),
            packet.k0 + half,
            n_nodes,
            rule,
        )
    }

    pub fn default_for(packet: &GaussianSpectrum) -> Result<Self> {
        Self::for_packet(packet, Self::DEFAULT_NODES, QuadratureRule::GaussLegendre)
    }

    pub fn with_nodes(self, n_nodes: usize) -> Result<Self> {
        Self::new(self.k_lo, self.k_hi, n_nodes, self.rule)
    }

    /// Nodes in ascending order with their weights.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let (a, b) = (self.k_lo, self.k_hi);
        match self.rule {
            QuadratureRule::Trapezoid => {
                let n = self.n_nodes;
                let h = (b - a) / (n - 1) as f64;
                (0..n)
                    .map(|i| {
                        let k = if i == n - 1 { b } else { a + i as f64 * h };
                        let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
                        (k, w)
                    })
                    .collect()
            }
            QuadratureRule::GaussLegendre => {
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                gauss_legendre(self.n_nodes)
                    .into_iter()
                    .map(|(z, w)| (mid + half * z, half * w))
                    .collect()
            }
        }
    }

    /// Nodes adapted to a square-root branch point at `k_c`.
    ///
    /// `sqrt(k^2 - k_c^2)` is not analytic at `k_c`, which caps Gauss-Legendre
    /// at algebraic convergence. When `k_c` lies strictly inside the window the
    /// rule is split there and each side is mapped by `k = k_c -+ u^2`, making
    /// the integrand smooth in `u`. Trapezoid rules are returned unchanged.
    pub fn nodes_with_branch_point(&self, k_c: Option<f64>) -> Vec<(f64, f64)> {
        let kc = match k_c {
            Some(kc) if self.rule == QuadratureRule::GaussLegendre && kc > self.k_lo && kc < self.k_hi => kc,
            _ => return self.nodes(),
        };
        let frac = (kc - self.k_lo) / (self.k_hi - self.k_lo);
        let half_min = Self::MIN_NODES / 2;
        let n_lo = ((self.n_nodes as f64 * frac).round() as usize).clamp(half_min, self.n_nodes - half_min);
        let n_hi = self.n_nodes - n_lo;

        let mut out = Vec::with_capacity(self.n_nodes);
        let u_lo = (kc - self.k_lo).sqrt();
        for (z, w) in gauss_legendre(n_lo).into_iter().rev() {
            let u = 0.5 * u_lo * (z + 1.0);
            out.push((kc - u * u, 0.5 * u_lo * w * 2.0 * u));
        }
        let u_hi = (self.k_hi - kc).sqrt();
        for (z, w) in gauss_legendre(n_hi) {
            let u = 0.5 * u_hi * (z + 1.0);
            out.push((kc + u * u, 0.5 * u_hi * w * 2.0 * u));
        }
        out
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes().iter().map(|&(k, w)| w * f(k)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
///
/// Newton iteration on the three-term recurrence from the Tricomi-type
/// initial guess; converges to machine precision in a few steps for any `n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "Gauss-Legendre needs at least one node");
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        out[i] = (-z, w);
        out[n - 1 - i] = (z, w);
    }
    if n % 2 == 1 {
        out[n / 2].0 = 0.0;
    }
    out
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let p = if n == 0 { 1.0 } else { p1 };
    let prev = if n == 0 { 0.0 } else { p0 };
    (p, nf * (z * p - prev) / (z * z - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_exact_for_polynomials() {
        for n in [1, 2, 5, 16, 17, 64] {
            let nodes = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let approx: f64 = nodes.iter().map(|(z, w)| w * z.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn gl_large_n_weights_and_order() {
        let nodes = gauss_legendre(1024);
        let sum: f64 = nodes.iter().map(|p| p.1).sum();
        assert!((sum - 2.0).abs() < 1e-13);
        assert!(nodes.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(nodes.iter().all(|p| p.1 > 0.0 && p.0.abs() < 1.0));
        // smooth oscillatory integrand: int_{-1}^{1} cos(40 z) dz = sin(40)/20
        let v: f64 = nodes.iter().map(|(z, w)| w * (40.0 * z).cos()).sum();
        assert!((v - 40f64.sin() / 20.0).abs() < 1e-13);
    }

    #[test]
    fn window_for_packet() {
        let p = GaussianSpectrum::new(2.35, 0.1, -30.0).unwrap();
        let q = KQuadrature::default_for(&p).unwrap();
        assert!((q.k_lo - 1.75).abs() < 1e-12 && (q.k_hi - 2.95).abs() < 1e-12);
        assert_eq!(q.n_nodes, 1024);
        let p = GaussianSpectrum::new(2.35, 0.5, -30.0).unwrap();
        let q = KQuadrature::default_for(&p).unwrap();
        assert_eq!(q.k_lo, 1e-6);
    }

    #[test]
    fn invariants() {
        assert!(KQuadrature::new(0.0, 1.0, 32, QuadratureRule::Trapezoid).is_err());
        assert!(KQuadrature::new(1.0, 1.0, 32, QuadratureRule::Trapezoid).is_err());
        assert!(KQuadrature::new(1.0, 2.0, 15, QuadratureRule::Trapezoid).is_err());
    }

    #[test]
    fn branch_point_split() {
        let q = KQuadrature::new(1.75, 2.95, 256, QuadratureRule::GaussLegendre).unwrap();
        let kc = 5f64.sqrt();
        let nodes = q.nodes_with_branch_point(Some(kc));
        assert_eq!(nodes.len(), 256);
        assert!(nodes.windows(2).all(|w| w[0].0 < w[1].0));
        let total: f64 = nodes.iter().map(|p| p.1).sum();
        assert!((total - 1.2).abs() < 1e-13);
        // int sqrt(k^2 - 5) over [kc, 2.95] in closed form
        let f = |k: f64| if k > kc { (k * k - 5.0).sqrt() } else { 0.0 };
        let prim = |k: f64| 0.5 * (k * (k * k - 5.0).sqrt() - 5.0 * (k + (k * k - 5.0).sqrt()).ln());
        let exact = prim(2.95) - 0.5 * (-5.0 * kc.ln());
        let split: f64 = nodes.iter().map(|&(k, w)| w * f(k)).sum();
        let plain = q.integrate(f);
        assert!((split - exact).abs() < 1e-13, "{split} vs {exact}");
        assert!((plain - exact).abs() > 1e-9);
        assert_eq!(q.nodes_with_branch_point(Some(3.0)), q.nodes());
        assert_eq!(q.nodes_with_branch_point(None), q.nodes());
    }

    #[test]
    fn rules_agree_on_gaussian() {
        let q = KQuadrature::new(1.75, 2.95, 400, QuadratureRule::GaussLegendre).unwrap();
        let t = KQuadrature { rule: QuadratureRule::Trapezoid, ..q };
        let f = |k: f64| (-(k - 2.35f64).powi(2) / 0.02).exp();
        let exact = (0.02 * std::f64::consts::PI).sqrt();
        assert!((q.integrate(f) - exact).abs() < 1e-8);
        assert!((t.integrate(f) - exact).abs() < 1e-8);
    }
}
