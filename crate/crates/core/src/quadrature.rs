//! Gauss-Legendre rules on intervals and triangles.

use crate::geometry::Vec2;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map from [-1, 1] to [0, 1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(a + t * len))
            .sum::<f64>()
            * len
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on a triangle in barycentric form; weights sum to one.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Seven-point rule exact for polynomials of degree 5.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let b1 = 1.0 - 2.0 * a1;
        let b2 = 1.0 - 2.0 * a2;
        Self {
            points: vec![
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                [b1, a1, a1],
                [a1, b1, a1],
                [a1, a1, b1],
                [b2, a2, a2],
                [a2, b2, a2],
                [a2, a2, b2],
            ],
            weights: vec![0.225, w1, w1, w1, w2, w2, w2],
        }
    }

    /// Collapsed (Duffy) tensor Gauss rule with `n(n+1)` points, exact for
    /// polynomials of degree `2n - 1`.
    pub fn collapsed(n: usize) -> Self {
        let g = GaussLegendre::new(n);
        let jac = GaussLegendre::new(n + 1);
        let mut points = Vec::with_capacity(n * (n + 1));
        let mut weights = Vec::with_capacity(n * (n + 1));
        for (&u, &wu) in jac.nodes.iter().zip(&jac.weights) {
            for (&v, &wv) in g.nodes.iter().zip(&g.weights) {
                // (u, v) in the unit square -> (1-u, u(1-v), uv); Jacobian u
                points.push([1.0 - u, u * (1.0 - v), u * v]);
                weights.push(2.0 * wu * wv * u);
            }
        }
        Self { points, weights }
    }

    /// Integral of `f` over the triangle `tri`.
    pub fn integrate(&self, tri: [Vec2; 3], mut f: impl FnMut(Vec2) -> f64) -> f64 {
        let area = 0.5 * crate::geometry::cross(tri[1] - tri[0], tri[2] - tri[0]);
        if area == 0.0 {
            return 0.0;
        }
        let sum: f64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(l, &w)| w * f(l[0] * tri[0] + l[1] * tri[1] + l[2] * tri[2]))
            .sum();
        sum * area
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_moments() {
        for n in 1..=12 {
            let g = GaussLegendre::new(n);
            assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..(2 * n) {
                let exact = 1.0 / (k as f64 + 1.0);
                let got = g.integrate(0.0, 1.0, |x| x.powi(k as i32));
                assert!((got - exact).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    fn monomial_exact(p: i32, q: i32) -> f64 {
        // integral of x^p y^q over the reference triangle (0,0),(1,0),(0,1)
        let f = |k: i32| (1..=k).map(|v| v as f64).product::<f64>();
        f(p) * f(q) / f(p + q + 2)
    }

    #[test]
    fn triangle_rules_are_exact() {
        let tri = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        let d5 = TriangleRule::degree5();
        let c6 = TriangleRule::collapsed(6);
        for p in 0..=5 {
            for q in 0..=(5 - p) {
                let exact = monomial_exact(p, q);
                let f = |x: Vec2| x.x.powi(p) * x.y.powi(q);
                assert!((d5.integrate(tri, f) - exact).abs() < 1e-15, "{p} {q}");
                assert!((c6.integrate(tri, f) - exact).abs() < 1e-15, "{p} {q}");
            }
        }
    }
}
