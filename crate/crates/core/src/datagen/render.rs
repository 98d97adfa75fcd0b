//! Orthographic silhouettes of flattened structures.
//!
//! The camera sits at azimuth `az` (about +y, measured from +z toward +x) and
//! elevation `el` above the horizon. Image right is `(cos az, 0, −sin az)`,
//! image up is `view × right`. The 56×56 image spans `±RENDER_HALF_EXTENT`
//! in both image axes, i.e. one pixel is 1/32 unit; the unit cube fits every
//! view.

use crate::encoder::{MaskImage, MASK_SIZE};
use crate::geometry::{OrientedBox, Vec3};
use crate::structure::{StructureError, StructureTree};

pub const RENDER_HALF_EXTENT: f64 = 0.875;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct View {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl View {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self { azimuth_deg, elevation_deg }
    }

    /// Unit vectors `(right, up)` spanning the image plane.
    pub fn basis(&self) -> (Vec3, Vec3) {
        let (az, el) = (self.azimuth_deg.to_radians(), self.elevation_deg.to_radians());
        let toward = Vec3::new(az.sin() * el.cos(), el.sin(), az.cos() * el.cos());
        let right = Vec3::new(az.cos(), 0.0, -az.sin());
        (right, toward.cross(&right))
    }

    pub fn project(&self, p: &Vec3) -> [f64; 2] {
        let (r, u) = self.basis();
        [p.dot(&r), p.dot(&u)]
    }
}

/// Center of pixel `(row, col)` in image-plane coordinates.
pub fn pixel_center(row: usize, col: usize) -> [f64; 2] {
    let px = 2.0 * RENDER_HALF_EXTENT / MASK_SIZE as f64;
    [-RENDER_HALF_EXTENT + (col as f64 + 0.5) * px, RENDER_HALF_EXTENT - (row as f64 + 0.5) * px]
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Inside-or-on test for a counter-clockwise convex polygon.
pub fn in_convex(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    (0..poly.len()).all(|i| cross(poly[i], poly[(i + 1) % poly.len()], p) >= 0.0)
}

/// Silhouette of a set of boxes; a pixel is on iff its center lies in the
/// projected hull of some box.
pub fn render_boxes(boxes: &[OrientedBox], view: &View) -> MaskImage {
    let px = 2.0 * RENDER_HALF_EXTENT / MASK_SIZE as f64;
    let mut on = vec![false; MASK_SIZE * MASK_SIZE];
    for b in boxes {
        let proj: Vec<[f64; 2]> = b.corners().iter().map(|c| view.project(c)).collect();
        let hull = convex_hull(&proj);
        if hull.len() < 3 {
            continue;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &hull {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let to_col = |u: f64| ((u + RENDER_HALF_EXTENT) / px).floor();
        let to_row = |v: f64| ((RENDER_HALF_EXTENT - v) / px).floor();
        let clamp = |x: f64| x.clamp(0.0, (MASK_SIZE - 1) as f64) as usize;
        let (c0, c1) = (clamp(to_col(lo[0])), clamp(to_col(hi[0])));
        let (r0, r1) = (clamp(to_row(hi[1])), clamp(to_row(lo[1])));
        for r in r0..=r1 {
            for c in c0..=c1 {
                let i = r * MASK_SIZE + c;
                if !on[i] && in_convex(&hull, pixel_center(r, c)) {
                    on[i] = true;
                }
            }
        }
    }
    MaskImage::from_fn(|r, c| on[r * MASK_SIZE + c])
}

pub fn render_mask(tree: &StructureTree, view: &View) -> Result<MaskImage, StructureError> {
    Ok(render_boxes(&tree.flatten()?, view))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_template, Category, LegLayout, TemplateSpec};

    fn cube(c: Vec3, s: f64) -> OrientedBox {
        OrientedBox::aligned(c, Vec3::repeat(s)).unwrap()
    }

    #[test]
    fn basis_is_orthonormal() {
        for (az, el) in [(0.0, 0.0), (30.0, 15.0), (250.0, 45.0)] {
            let (r, u) = View::new(az, el).basis();
            assert!((r.norm() - 1.0).abs() < 1e-12 && (u.norm() - 1.0).abs() < 1e-12);
            assert!(r.dot(&u).abs() < 1e-12);
            assert!(u.y > 0.0);
        }
        let (r, u) = View::new(0.0, 0.0).basis();
        assert!((r - Vec3::x()).norm() < 1e-15 && (u - Vec3::y()).norm() < 1e-15);
    }

    #[test]
    fn front_cube_is_a_centered_square() {
        // side 0.5 spans exactly 16 pixels
        let m = render_boxes(&[cube(Vec3::zeros(), 0.5)], &View::new(0.0, 0.0));
        assert_eq!(m.on_count(), 256);
        for r in 0..MASK_SIZE {
            for c in 0..MASK_SIZE {
                let inside = (20..36).contains(&r) && (20..36).contains(&c);
                assert_eq!(m.get(r, c) == 1.0, inside, "{r} {c}");
            }
        }
    }

    #[test]
    fn pixel_count_tracks_projected_area() {
        // generic box and view: count within one boundary band of the area
        let b = OrientedBox::new(
            Vec3::new(0.05, -0.02, 0.03),
            Vec3::new(1.0, 0.3, 0.2),
            Vec3::new(-0.2, 1.0, 0.4),
            Vec3::new(0.6, 0.35, 0.25),
        )
        .unwrap();
        let view = View::new(37.0, 22.0);
        let hull = convex_hull(&b.corners().iter().map(|c| view.project(c)).collect::<Vec<_>>());
        let n = hull.len();
        let area: f64 = 0.5 * (0..n).map(|i| cross([0.0, 0.0], hull[i], hull[(i + 1) % n])).sum::<f64>();
        let perim: f64 = (0..n)
            .map(|i| ((hull[i][0] - hull[(i + 1) % n][0]).powi(2) + (hull[i][1] - hull[(i + 1) % n][1]).powi(2)).sqrt())
            .sum();
        let px = 1.75 / 56.0;
        let expected = area / (px * px);
        let band = perim / px + 4.0;
        let count = render_boxes(&[b], &view).on_count() as f64;
        assert!((count - expected).abs() <= band, "{count} vs {expected} ± {band}");
    }

    #[test]
    fn permutation_invariant() {
        let boxes = vec![cube(Vec3::new(-0.2, 0.1, 0.0), 0.2), cube(Vec3::new(0.25, -0.2, 0.1), 0.3)];
        let rev: Vec<_> = boxes.iter().rev().cloned().collect();
        let v = View::new(60.0, 30.0);
        assert_eq!(render_boxes(&boxes, &v), render_boxes(&rev, &v));
    }

    #[test]
    fn symmetric_chair_back_view_matches_front() {
        let t = sample_template(&TemplateSpec::with_legs(Category::Chair, LegLayout::ReflectivePairs), 2).unwrap();
        let front = render_mask(&t, &View::new(0.0, 0.0)).unwrap();
        let back = render_mask(&t, &View::new(180.0, 0.0)).unwrap();
        assert!(front.on_count() > 100);
        let diff = front.pixels().iter().zip(back.pixels()).filter(|(a, b)| a != b).count();
        assert_eq!(diff, 0);
    }

    #[test]
    fn hull_of_square_with_interior_point() {
        let h = convex_hull(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [1.0, 0.5]]);
        assert_eq!(h.len(), 4);
        assert!(in_convex(&h, [0.5, 0.5]) && in_convex(&h, [1.0, 1.0]) && !in_convex(&h, [1.01, 0.5]));
    }
}
