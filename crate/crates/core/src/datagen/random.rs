use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{OrientedBox, SymmetryParams, Vec3};
use crate::structure::{StructureNode, StructureTree};

fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if (0.1..=1.0).contains(&n) {
            return v / n;
        }
    }
}

fn random_box(rng: &mut ChaCha8Rng) -> OrientedBox {
    let center = Vec3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
    let dims = Vec3::new(rng.random_range(0.05..0.4), rng.random_range(0.05..0.4), rng.random_range(0.05..0.4));
    OrientedBox::new(center, unit(rng), unit(rng), dims).unwrap_or_else(|_| OrientedBox::aligned(center, dims).expect("positive dims"))
}

fn random_symmetry(rng: &mut ChaCha8Rng) -> SymmetryParams {
    let anchor = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let dir = unit(rng);
    let k = rng.random_range(2..=4);
    match rng.random_range(0..3) {
        0 => SymmetryParams::reflective(dir, anchor),
        1 => SymmetryParams::rotational(dir, anchor, k),
        _ => SymmetryParams::translational(dir * rng.random_range(0.1..0.4), anchor, k),
    }
    .expect("valid by construction")
}

fn node(rng: &mut ChaCha8Rng, depth_left: usize) -> StructureNode {
    let pick = if depth_left == 0 { 0.0 } else { rng.random_range(0.0..1.0) };
    if pick < 0.3 {
        StructureNode::Leaf(random_box(rng))
    } else if pick < 0.75 {
        let a = node(rng, depth_left - 1);
        StructureNode::adjacency(a, node(rng, depth_left - 1))
    } else {
        let g = node(rng, depth_left - 1);
        StructureNode::symmetry(g, random_symmetry(rng))
    }
}

/// A random valid structure of depth at most `max_depth` with arbitrary
/// oriented boxes and symmetries, normalized to the unit cube. For tests
/// and numerical checks, not for training data.
pub fn random_structure(seed: u64, max_depth: usize) -> StructureTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = StructureTree::new(node(&mut rng, max_depth), "random", format!("random:{seed}"));
    t.normalized().expect("generated trees have boxes").0
}
