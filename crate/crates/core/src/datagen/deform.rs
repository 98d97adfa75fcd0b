use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{corner_bounds, AffineMap, OrientedBox, Vec3};
use crate::structure::{flatten, StructureNode, StructureTree};

use super::DatagenError;

/// Parts further apart than this after deformation are pulled back together.
pub const SNAP_TOLERANCE: f64 = 0.02;

/// Part-wise random perturbation.
///
/// Each leaf box gets an independent anisotropic scale in
/// `[1 − m, 1 + m]` per axis and a center offset of up to `0.1·m` per axis.
/// Symmetry generators are deformed and the group follows, so symmetries are
/// kept exactly. Afterwards every adjacency node whose two parts drifted
/// apart by more than [`SNAP_TOLERANCE`] along some axis has its second part
/// translated back. The result is re-normalized; topology never changes.
pub fn deform(tree: &StructureTree, magnitude: f64, seed: u64) -> Result<StructureTree, DatagenError> {
    if !(0.0..1.0).contains(&magnitude) {
        return Err(DatagenError::Config(format!("deformation magnitude {magnitude} outside [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut leaf = |b: &OrientedBox| -> OrientedBox {
        let mut scale = Vec3::zeros();
        let mut offset = Vec3::zeros();
        for k in 0..3 {
            scale[k] = 1.0 + magnitude * rng.random_range(-1.0..=1.0);
            offset[k] = 0.1 * magnitude * rng.random_range(-1.0..=1.0);
        }
        b.with_dims(b.dims().component_mul(&scale))
            .expect("scales stay positive")
            .with_center(b.center() + offset)
    };
    let moved = tree.root.map_geometry(&mut leaf, &mut |s| *s);
    let snapped = snap(&moved, &tree.root)?;
    let out = StructureTree { root: snapped, ..tree.clone() };
    Ok(out.normalized()?.0)
}

fn bounds(node: &StructureNode) -> Result<(Vec3, Vec3), DatagenError> {
    let boxes = flatten(&StructureTree::new(node.clone(), "", ""))?;
    Ok(corner_bounds(&boxes).expect("subtrees hold at least one box"))
}

/// Per-axis signed gap between two boxes' bounds (positive = separated) and
/// the direction `b` would have to move to close it.
fn gaps(a: &(Vec3, Vec3), b: &(Vec3, Vec3)) -> [(f64, f64); 3] {
    let mut out = [(0.0, 0.0); 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let above = b.0[k] - a.1[k];
        let below = a.0[k] - b.1[k];
        *slot = if above >= below { (above, -1.0) } else { (below, 1.0) };
    }
    out
}

fn snap(node: &StructureNode, original: &StructureNode) -> Result<StructureNode, DatagenError> {
    match (node, original) {
        (StructureNode::Adjacency(c), StructureNode::Adjacency(o)) => {
            let a = snap(&c[0], &o[0])?;
            let b = snap(&c[1], &o[1])?;
            let now = gaps(&bounds(&a)?, &bounds(&b)?);
            let before = gaps(&bounds(&o[0])?, &bounds(&o[1])?);
            let mut shift = Vec3::zeros();
            for k in 0..3 {
                let (gap, dir) = now[k];
                let allowed = before[k].0.max(0.0);
                if gap > allowed + SNAP_TOLERANCE {
                    shift[k] = dir * (gap - allowed);
                }
            }
            let b = if shift == Vec3::zeros() { b } else { b.transformed(&AffineMap::translation(shift)) };
            Ok(StructureNode::adjacency(a, b))
        }
        (StructureNode::Symmetry { params, children }, StructureNode::Symmetry { children: o, .. }) => {
            Ok(StructureNode::symmetry(snap(&children[0], &o[0])?, *params))
        }
        _ => Ok(node.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_template, Category, LegLayout, TemplateSpec};
    use crate::geometry::SymmetryParams;
    use crate::structure::validate;

    fn chair(legs: LegLayout) -> StructureTree {
        sample_template(&TemplateSpec::with_legs(Category::Chair, legs), 5).unwrap()
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let t = chair(LegLayout::ReflectivePairs);
        let d = deform(&t, 0.0, 9).unwrap();
        for (a, b) in t.flatten().unwrap().iter().zip(d.flatten().unwrap().iter()) {
            assert!((a.center() - b.center()).norm() < 1e-12);
            assert!((a.dims() - b.dims()).norm() < 1e-12);
        }
    }

    #[test]
    fn twenty_distinct_valid_variations() {
        let t = chair(LegLayout::Rotational);
        let vars: Vec<StructureTree> = (0..20).map(|s| deform(&t, 0.2, s).unwrap()).collect();
        for (i, v) in vars.iter().enumerate() {
            assert!(validate(v).is_empty());
            assert!(v.root.same_topology(&t.root));
            for w in &vars[..i] {
                assert_ne!(v, w);
            }
        }
    }

    #[test]
    fn rotational_legs_stay_a_rotation_orbit() {
        let t = deform(&chair(LegLayout::Rotational), 0.25, 4).unwrap();
        let legs = &t.flatten().unwrap()[2..];
        let axis = match &t.root.children()[1].children()[1] {
            StructureNode::Symmetry { params, .. } => *params,
            other => panic!("{other:?}"),
        };
        let rot = SymmetryParams { repetitions: 4, ..axis };
        let step = &rot.transforms().unwrap()[1];
        for leg in legs {
            let c = step.apply_point(&leg.center());
            assert!(legs.iter().any(|l| (l.center() - c).norm() < 1e-9));
        }
    }

    #[test]
    fn parts_stay_connected() {
        for seed in 0..20 {
            let t = deform(&chair(LegLayout::ReflectivePairs), 0.3, seed).unwrap();
            let boxes = t.flatten().unwrap();
            let b = |i: usize| corner_bounds(&boxes[i..i + 1]).unwrap();
            // back against seat, every leg against the seat
            for (i, j) in [(0usize, 1usize), (1, 2), (1, 3), (1, 4), (1, 5)] {
                let g = gaps(&b(i), &b(j));
                assert!(g.iter().all(|(gap, _)| *gap <= 1.5 * SNAP_TOLERANCE), "seed {seed} {i}-{j}: {g:?}");
            }
        }
    }

    #[test]
    fn magnitude_out_of_range_rejected() {
        assert!(deform(&chair(LegLayout::Rotational), 1.5, 0).is_err());
    }
}
