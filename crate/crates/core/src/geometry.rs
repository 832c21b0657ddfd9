//! Small planar helpers shared by the geometry, basis and assembly code.

use nalgebra::Vector2;

pub type Vec2 = Vector2<f64>;

/// The two subdomains separated by the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Minus, Side::Plus];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Side::Minus => 0,
            Side::Plus => 1,
        }
    }

    #[inline]
    pub fn opposite(self) -> Side {
        match self {
            Side::Minus => Side::Plus,
            Side::Plus => Side::Minus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Minus => "minus",
            Side::Plus => "plus",
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Counterclockwise rotation by 90 degrees.
#[inline]
pub fn rot_ccw(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Clockwise rotation by 90 degrees.
#[inline]
pub fn rot_cw(v: Vec2) -> Vec2 {
    Vec2::new(v.y, -v.x)
}

#[inline]
pub fn signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * cross(b - a, c - a)
}

/// Shoelace area and centroid of a simple polygon given counterclockwise.
/// Returns `(area, first moment)` so degenerate polygons stay well defined.
pub fn polygon_moments(pts: &[Vec2]) -> (f64, Vec2) {
    let n = pts.len();
    let mut area = 0.0;
    let mut moment = Vec2::zeros();
    if n < 3 {
        return (area, moment);
    }
    // fan from the first point keeps the sums local and well conditioned
    let o = pts[0];
    for i in 1..n - 1 {
        let a = signed_area(o, pts[i], pts[i + 1]);
        area += a;
        moment += a * (o + pts[i] + pts[i + 1]) / 3.0;
    }
    (area, moment)
}

/// Affine barycentric coordinates of a triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barycentric {
    pub vertices: [Vec2; 3],
    /// Constant gradients of the three coordinate functions.
    pub gradients: [Vec2; 3],
    pub area: f64,
}

impl Barycentric {
    pub fn new(vertices: [Vec2; 3]) -> Self {
        let [a, b, c] = vertices;
        let twice = cross(b - a, c - a);
        let gradients = [
            rot_ccw(c - b) / twice,
            rot_ccw(a - c) / twice,
            rot_ccw(b - a) / twice,
        ];
        Self {
            vertices,
            gradients,
            area: 0.5 * twice,
        }
    }

    pub fn coords(&self, x: Vec2) -> [f64; 3] {
        let [a, b, c] = self.vertices;
        // each coordinate is measured from a vertex where it vanishes, so
        // vertex values come out exact
        let l0 = self.gradients[0].dot(&(x - b));
        let l1 = self.gradients[1].dot(&(x - c));
        let l2 = self.gradients[2].dot(&(x - a));
        [l0, l1, l2]
    }

    pub fn centroid(&self) -> Vec2 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]) / 3.0
    }

    pub fn diameter(&self) -> f64 {
        let [a, b, c] = self.vertices;
        (a - b).norm().max((b - c).norm()).max((c - a).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barycentric_is_nodal_and_sums_to_one() {
        let bary = Barycentric::new([
            Vec2::new(0.3, 0.0),
            Vec2::new(0.4, 0.0),
            Vec2::new(0.3, 0.1),
        ]);
        for (i, v) in bary.vertices.iter().enumerate() {
            let l = bary.coords(*v);
            for (j, lj) in l.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((lj - expected).abs() < 1e-14);
            }
        }
        let l = bary.coords(Vec2::new(0.33, 0.02));
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let g: Vec2 = bary.gradients.iter().sum();
        assert!(g.norm() < 1e-12);
        assert!((bary.area - 0.005).abs() < 1e-16);
    }

    #[test]
    fn polygon_moments_of_unit_square() {
        let sq = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let (a, m) = polygon_moments(&sq);
        assert!((a - 1.0).abs() < 1e-15);
        assert!((m / a - Vec2::new(0.5, 0.5)).norm() < 1e-15);
    }
}
