//! Plane geometry helpers shared by the mesh and quadrature layers.

use nalgebra as na;

pub type Point2 = na::Point2<f64>;
pub type Vector2 = na::Vector2<f64>;

pub fn dist(a: Point2, b: Point2) -> f64 {
    (b - a).norm()
}

/// Signed area of a polygon given by its vertex loop; positive iff counterclockwise.
pub fn polygon_signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let mut twice = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    0.5 * twice
}

/// Area centroid of a simple polygon (not the vertex average).
pub fn polygon_centroid(pts: &[Point2]) -> Point2 {
    let n = pts.len();
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut twice = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let cross = a.x * b.y - b.x * a.y;
        twice += cross;
        cx += (a.x + b.x) * cross;
        cy += (a.y + b.y) * cross;
    }
    let area6 = 3.0 * twice;
    Point2::new(cx / area6, cy / area6)
}

/// Largest pairwise vertex distance; equals the diameter for convex polygons
/// and is the h_T used throughout for basis scaling.
pub fn polygon_diameter(pts: &[Point2]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            d = d.max(dist(pts[i], pts[j]));
        }
    }
    d
}

pub fn triangle_signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

/// True if the vertex loop is convex (all turns one way, ccw input assumed).
pub fn polygon_is_convex(pts: &[Point2]) -> bool {
    let n = pts.len();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let c = pts[(i + 2) % n];
        let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
        if cross < -1e-12 * polygon_diameter(pts).powi(2) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_area_centroid_diameter() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert!((polygon_signed_area(&pts) - 1.0).abs() < 1e-15);
        let c = polygon_centroid(&pts);
        assert!((c.x - 0.5).abs() < 1e-15 && (c.y - 0.5).abs() < 1e-15);
        assert!((polygon_diameter(&pts) - 2f64.sqrt()).abs() < 1e-15);
        assert!(polygon_is_convex(&pts));
    }

    #[test]
    fn clockwise_loop_has_negative_area() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 0.0),
        ];
        assert!(polygon_signed_area(&pts) < 0.0);
    }

    #[test]
    fn l_shaped_loop_is_not_convex() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        assert!(polygon_signed_area(&pts) > 0.0);
        assert!(!polygon_is_convex(&pts));
    }
}
