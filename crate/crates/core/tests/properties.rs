use nalgebra::{Matrix3, Rotation3, Unit};
use proptest::prelude::*;

use im2struct::datagen::{random_structure, render_boxes, View};
use im2struct::encoder::MaskImage;
use im2struct::geometry::{
    normalize_shape, pair_hausdorff_error, thresholded_accuracy, AffineMap, OrientedBox, SymmetryKind,
    SymmetryParams, Vec3, MAX_REPETITIONS, MIN_REPETITIONS,
};
use im2struct::nn::{checkpoint_bytes, init_params, read_checkpoint, ParamSpec};
use im2struct::structure::{deserialize, flatten, serialize, validate};

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn direction() -> impl Strategy<Value = Vec3> {
    vec3(1.0).prop_filter("non-degenerate", |v| v.norm() > 0.2).prop_map(|v| v.normalize())
}

fn oriented_box() -> impl Strategy<Value = OrientedBox> {
    (vec3(0.4), direction(), direction(), (0.02..0.5, 0.02..0.5, 0.02..0.5))
        .prop_filter("independent axes", |(_, a, b, _)| a.cross(b).norm() > 0.2)
        .prop_map(|(c, a, b, (x, y, z))| OrientedBox::new(c, a, b, Vec3::new(x, y, z)).unwrap())
}

fn symmetry() -> impl Strategy<Value = SymmetryParams> {
    (0..3u8, MIN_REPETITIONS..=MAX_REPETITIONS, direction(), vec3(0.4), 0.05..0.3).prop_map(|(kind, k, d, a, len)| {
        match kind {
            0 => SymmetryParams::reflective(d, a),
            1 => SymmetryParams::rotational(d, a, k),
            _ => SymmetryParams::translational(d * len, a, k),
        }
        .unwrap()
    })
}

fn rigid() -> impl Strategy<Value = AffineMap> {
    (direction(), 0.0..std::f64::consts::TAU, vec3(1.0)).prop_map(|(axis, angle, t)| AffineMap {
        linear: Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner(),
        offset: t,
    })
}

fn corners_close(a: &OrientedBox, b: &OrientedBox, tol: f64) -> bool {
    let (ca, cb) = (a.corners(), b.corners());
    ca.iter().all(|p| cb.iter().any(|q| (p - q).norm() < tol)) && cb.iter().all(|p| ca.iter().any(|q| (p - q).norm() < tol))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn box_raw_layout_round_trips(b in oriented_box()) {
        let back = OrientedBox::from_raw(&b.to_raw());
        prop_assert!(corners_close(&b, &back, 1e-12));
    }

    #[test]
    fn symmetry_raw_layout_round_trips(s in symmetry()) {
        let back = SymmetryParams::from_raw(&s.to_raw());
        prop_assert_eq!(back.kind, s.kind);
        prop_assert_eq!(back.multiplier(), s.multiplier());
        prop_assert!((back.direction - s.direction).norm() < 1e-12);
        prop_assert!((back.anchor - s.anchor).norm() < 1e-12);
    }

    #[test]
    fn raw_decoding_is_total(raw in proptest::array::uniform8(-1.0f64..1.0)) {
        let s = SymmetryParams::from_raw(&raw);
        prop_assert!(s.validate().is_ok());
        prop_assert!((MIN_REPETITIONS as usize..=MAX_REPETITIONS as usize).contains(&s.multiplier()));
    }

    #[test]
    fn symmetry_members_are_congruent(g in oriented_box(), s in symmetry()) {
        let maps = s.transforms().unwrap();
        prop_assert_eq!(maps.len(), s.multiplier());
        prop_assert_eq!(maps[0].linear, Matrix3::identity());
        for m in &maps {
            let img = g.transformed(m);
            prop_assert!((img.dims() - g.dims()).norm() < 1e-9);
            if s.kind != SymmetryKind::Translational {
                // members stay on the generator's orbit sphere about the anchor
                let r0 = (g.center() - s.anchor).norm();
                let r1 = (img.center() - s.anchor).norm();
                prop_assert!((r0 - r1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalization_fits_unit_cube_and_is_idempotent(boxes in proptest::collection::vec(oriented_box(), 1..6)) {
        let (n, _) = normalize_shape(&boxes).unwrap();
        let (lo, hi) = im2struct::geometry::corner_bounds(&n).unwrap();
        prop_assert!(((hi - lo).max() - 1.0).abs() < 1e-12);
        prop_assert!((lo + hi).norm() < 1e-12);
        let (again, t) = normalize_shape(&n).unwrap();
        prop_assert!((t.scale - 1.0).abs() < 1e-12);
        for (a, b) in n.iter().zip(&again) {
            prop_assert!(corners_close(a, b, 1e-12));
        }
    }

    #[test]
    fn hausdorff_error_is_a_rigid_invariant_premetric(
        a in proptest::collection::vec(oriented_box(), 1..6),
        b in proptest::collection::vec(oriented_box(), 1..6),
        m in rigid(),
    ) {
        let h = pair_hausdorff_error(&a, &b).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!((h - pair_hausdorff_error(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert_eq!(pair_hausdorff_error(&a, &a).unwrap(), 0.0);
        let ta: Vec<_> = a.iter().map(|x| x.transformed(&m)).collect();
        let tb: Vec<_> = b.iter().map(|x| x.transformed(&m)).collect();
        prop_assert!((pair_hausdorff_error(&ta, &tb).unwrap() - h).abs() < 1e-9);
    }

    #[test]
    fn accuracy_is_a_fraction_and_monotone_in_threshold(
        a in proptest::collection::vec(oriented_box(), 1..6),
        b in proptest::collection::vec(oriented_box(), 1..6),
    ) {
        let lo = thresholded_accuracy(&a, &b, 0.1).unwrap();
        let hi = thresholded_accuracy(&a, &b, 0.2).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo) && lo <= hi);
        prop_assert_eq!(thresholded_accuracy(&a, &a, 1e-9).unwrap(), 1.0);
    }

    #[test]
    fn structures_serialize_losslessly(seed in any::<u64>(), depth in 0usize..5) {
        let t = random_structure(seed, depth);
        prop_assert!(validate(&t).is_empty());
        let back = deserialize(&serialize(&t).unwrap()).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(flatten(&t).unwrap().len(), t.root.box_count());
    }

    #[test]
    fn rigid_motion_commutes_with_flattening(seed in any::<u64>(), m in rigid()) {
        let t = random_structure(seed, 3);
        let moved = im2struct::structure::StructureTree { root: t.root.transformed(&m), ..t.clone() };
        let a: Vec<_> = flatten(&t).unwrap().iter().map(|b| b.transformed(&m)).collect();
        let b = flatten(&moved).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(corners_close(x, y, 1e-9));
        }
    }

    #[test]
    fn masks_round_trip_in_both_encodings(bits in proptest::collection::vec(any::<bool>(), 56 * 56)) {
        let m = MaskImage::from_fn(|r, c| bits[r * 56 + c]);
        prop_assert_eq!(MaskImage::read_binary(&m.to_binary()[..]).unwrap(), m.clone());
        prop_assert_eq!(MaskImage::from_text(&m.to_text()).unwrap(), m.clone());
        prop_assert_eq!(m.flipped().flipped(), m);
    }

    #[test]
    fn rendering_ignores_box_order(boxes in proptest::collection::vec(oriented_box(), 1..5), az in 0.0..360.0, el in -60.0..60.0) {
        let v = View::new(az, el);
        let rev: Vec<_> = boxes.iter().rev().cloned().collect();
        prop_assert_eq!(render_boxes(&boxes, &v), render_boxes(&rev, &v));
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6) {
        let specs = vec![ParamSpec::matrix("a.w", rows, cols), ParamSpec::bias("a.b", rows), ParamSpec::matrix("b.w", cols, 2)];
        let p = init_params(&specs, seed).unwrap();
        prop_assert_eq!(read_checkpoint(&checkpoint_bytes(&p)[..]).unwrap(), p);
    }
}
