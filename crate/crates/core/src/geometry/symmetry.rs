//! Symmetry groups over boxes and their 8-number raw encoding.
//!
//! Raw layout: `[kind, repetitions, direction(3), anchor(3)]` where
//! `kind ∈ {-1: reflective, 0: rotational, +1: translational}` and
//! `repetitions` is stored as `(k - 2) / 8`. Every slot stays inside
//! `[-1, 1]` for shapes normalized to the unit box, matching a tanh head.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Rotation3, Unit};

use super::obb::{AffineMap, NormalizeTransform, OrientedBox, Vec3};
use super::GeometryError;

pub const SYMMETRY_PARAMS: usize = 8;
pub const MIN_REPETITIONS: u32 = 2;
pub const MAX_REPETITIONS: u32 = 10;
const REPETITION_SCALE: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymmetryKind {
    Reflective,
    Rotational,
    Translational,
}

impl SymmetryKind {
    pub fn raw_code(self) -> f64 {
        match self {
            SymmetryKind::Reflective => -1.0,
            SymmetryKind::Rotational => 0.0,
            SymmetryKind::Translational => 1.0,
        }
    }

    /// Nearest of `{-1, 0, 1}`; the midpoints `±0.5` resolve to rotational.
    pub fn from_raw_code(v: f64) -> Self {
        if v > 0.5 {
            SymmetryKind::Translational
        } else if v < -0.5 {
            SymmetryKind::Reflective
        } else {
            SymmetryKind::Rotational
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SymmetryKind::Reflective => "reflective",
            SymmetryKind::Rotational => "rotational",
            SymmetryKind::Translational => "translational",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "reflective" => Some(SymmetryKind::Reflective),
            "rotational" => Some(SymmetryKind::Rotational),
            "translational" => Some(SymmetryKind::Translational),
            _ => None,
        }
    }
}

/// One symmetry group.
///
/// * reflective: `direction` is the plane normal, `anchor` a point on the plane;
/// * rotational: `direction` is the axis, `anchor` a point on it, step `2π/k`;
/// * translational: `direction` is the displacement between consecutive
///   members, `anchor` records the start position (the generator's center).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetryParams {
    pub kind: SymmetryKind,
    pub repetitions: u32,
    pub direction: Vec3,
    pub anchor: Vec3,
}

impl SymmetryParams {
    pub fn new(
        kind: SymmetryKind,
        repetitions: u32,
        direction: Vec3,
        anchor: Vec3,
    ) -> Result<Self, GeometryError> {
        let repetitions = if kind == SymmetryKind::Reflective { MIN_REPETITIONS } else { repetitions };
        if direction.norm() <= 1e-12 {
            return Err(GeometryError::InvalidSymmetry("zero direction".into()));
        }
        let direction = match kind {
            SymmetryKind::Translational => direction,
            _ => direction / direction.norm(),
        };
        let s = Self { kind, repetitions, direction, anchor };
        s.validate()?;
        Ok(s)
    }

    pub fn reflective(normal: Vec3, point: Vec3) -> Result<Self, GeometryError> {
        Self::new(SymmetryKind::Reflective, MIN_REPETITIONS, normal, point)
    }

    pub fn rotational(axis: Vec3, point: Vec3, k: u32) -> Result<Self, GeometryError> {
        Self::new(SymmetryKind::Rotational, k, axis, point)
    }

    pub fn translational(displacement: Vec3, start: Vec3, k: u32) -> Result<Self, GeometryError> {
        Self::new(SymmetryKind::Translational, k, displacement, start)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = self.direction.iter().chain(self.anchor.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(GeometryError::InvalidSymmetry("non-finite parameter".into()));
        }
        let n = self.direction.norm();
        if n <= 1e-12 {
            return Err(GeometryError::InvalidSymmetry("zero direction".into()));
        }
        if self.kind != SymmetryKind::Translational && (n - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidSymmetry("direction must be a unit vector".into()));
        }
        if self.kind != SymmetryKind::Reflective
            && !(MIN_REPETITIONS..=MAX_REPETITIONS).contains(&self.repetitions)
        {
            return Err(GeometryError::InvalidSymmetry(format!(
                "{} symmetry needs {}..={} repetitions, got {}",
                self.kind.name(),
                MIN_REPETITIONS,
                MAX_REPETITIONS,
                self.repetitions
            )));
        }
        Ok(())
    }

    /// Number of group members produced per generator box.
    pub fn multiplier(&self) -> usize {
        match self.kind {
            SymmetryKind::Reflective => 2,
            _ => self.repetitions as usize,
        }
    }

    pub fn to_raw(&self) -> [f64; SYMMETRY_PARAMS] {
        let reps = match self.kind {
            SymmetryKind::Reflective => 0.0,
            _ => (self.repetitions as f64 - MIN_REPETITIONS as f64) / REPETITION_SCALE,
        };
        let d = self.direction;
        let a = self.anchor;
        [self.kind.raw_code(), reps, d.x, d.y, d.z, a.x, a.y, a.z]
    }

    /// Decodes a raw vector. Never fails: repetitions are rounded and clamped
    /// to `2..=10`, a vanishing direction falls back to `+x`.
    pub fn from_raw(raw: &[f64; SYMMETRY_PARAMS]) -> Self {
        let clean = |x: f64| if x.is_finite() { x } else { 0.0 };
        let kind = SymmetryKind::from_raw_code(clean(raw[0]));
        let k = (clean(raw[1]) * REPETITION_SCALE).round() + MIN_REPETITIONS as f64;
        let repetitions = match kind {
            SymmetryKind::Reflective => MIN_REPETITIONS,
            _ => k.clamp(MIN_REPETITIONS as f64, MAX_REPETITIONS as f64) as u32,
        };
        let mut direction = Vec3::new(clean(raw[2]), clean(raw[3]), clean(raw[4]));
        let n = direction.norm();
        if n <= 1e-12 {
            direction = Vec3::x();
        } else if kind != SymmetryKind::Translational {
            direction /= n;
        }
        let anchor = Vec3::new(clean(raw[5]), clean(raw[6]), clean(raw[7]));
        Self { kind, repetitions, direction, anchor }
    }

    /// Member transforms; entry 0 is always the identity.
    pub fn transforms(&self) -> Result<Vec<AffineMap>, GeometryError> {
        self.validate()?;
        let maps = match self.kind {
            SymmetryKind::Reflective => {
                let n = self.direction;
                let linear = Matrix3::identity() - (n * n.transpose()) * 2.0;
                let offset = n * (2.0 * self.anchor.dot(&n));
                vec![AffineMap::identity(), AffineMap { linear, offset }]
            }
            SymmetryKind::Rotational => {
                let axis = Unit::new_normalize(self.direction);
                let k = self.repetitions;
                (0..k)
                    .map(|i| {
                        if i == 0 {
                            return AffineMap::identity();
                        }
                        let angle = TAU * i as f64 / k as f64;
                        let r = *Rotation3::from_axis_angle(&axis, angle).matrix();
                        AffineMap { linear: r, offset: self.anchor - r * self.anchor }
                    })
                    .collect()
            }
            SymmetryKind::Translational => (0..self.repetitions)
                .map(|i| AffineMap::translation(self.direction * i as f64))
                .collect(),
        };
        Ok(maps)
    }

    /// Re-expresses the group after `map` moves the whole shape; `map` must be
    /// a similarity (orthogonal linear part times a uniform scale).
    pub fn mapped(&self, map: &AffineMap) -> Self {
        let scale = map.linear.column(0).norm();
        let mut direction = map.apply_vector(&self.direction);
        if self.kind != SymmetryKind::Translational {
            direction /= scale;
        }
        Self { direction, anchor: map.apply_point(&self.anchor), ..*self }
    }

    pub fn normalized_by(&self, t: &NormalizeTransform) -> Self {
        self.mapped(&t.as_affine())
    }

    /// Canonical representative of the same group: the plane/axis direction
    /// has its largest-magnitude component positive and the anchor is the
    /// point of the plane/axis closest to the origin. Translational groups
    /// only get their anchor set to `start`.
    pub fn canonical(&self, start: Vec3) -> Self {
        let mut s = *self;
        match self.kind {
            SymmetryKind::Reflective => {
                s.direction = sign_canonical(self.direction);
                let n = s.direction;
                s.anchor = n * self.anchor.dot(&n);
            }
            SymmetryKind::Rotational => {
                s.direction = sign_canonical(self.direction);
                let u = s.direction;
                s.anchor = self.anchor - u * self.anchor.dot(&u);
            }
            SymmetryKind::Translational => s.anchor = start,
        }
        s
    }
}

fn sign_canonical(v: Vec3) -> Vec3 {
    let i = v.iamax();
    if v[i] < 0.0 {
        -v
    } else {
        v
    }
}

/// Expands a generator box into the full group.
pub fn expand_symmetry(
    generator: &OrientedBox,
    s: &SymmetryParams,
) -> Result<Vec<OrientedBox>, GeometryError> {
    Ok(s.transforms()?.iter().map(|m| generator.transformed(m)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_at(c: Vec3) -> OrientedBox {
        OrientedBox::aligned(c, Vec3::new(0.2, 0.3, 0.4)).unwrap()
    }

    #[test]
    fn reflect_across_x_plane() {
        let s = SymmetryParams::reflective(Vec3::x(), Vec3::zeros()).unwrap();
        let out = expand_symmetry(&cube_at(Vec3::new(1.0, 0.0, 0.0)), &s).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].center(), Vec3::new(1.0, 0.0, 0.0));
        assert!((out[1].center() - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(out[1].dims(), out[0].dims());
    }

    #[test]
    fn rotational_quarter_turns() {
        let s = SymmetryParams::rotational(Vec3::z(), Vec3::zeros(), 4).unwrap();
        let out = expand_symmetry(&cube_at(Vec3::new(1.0, 0.0, 0.0)), &s).unwrap();
        let want = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (b, (x, y)) in out.iter().zip(want) {
            assert!((b.center() - Vec3::new(x, y, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn translational_steps() {
        let s = SymmetryParams::translational(Vec3::new(0.5, 0.0, 0.0), Vec3::zeros(), 3).unwrap();
        let out = expand_symmetry(&cube_at(Vec3::zeros()), &s).unwrap();
        let xs: Vec<f64> = out.iter().map(|b| b.center().x).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn too_few_repetitions_is_an_error() {
        assert!(SymmetryParams::rotational(Vec3::z(), Vec3::zeros(), 1).is_err());
        let bad = SymmetryParams {
            kind: SymmetryKind::Translational,
            repetitions: 1,
            direction: Vec3::x(),
            anchor: Vec3::zeros(),
        };
        assert!(matches!(
            expand_symmetry(&cube_at(Vec3::zeros()), &bad),
            Err(GeometryError::InvalidSymmetry(_))
        ));
    }

    #[test]
    fn zero_direction_rejected() {
        assert!(SymmetryParams::reflective(Vec3::zeros(), Vec3::zeros()).is_err());
    }

    #[test]
    fn zero_raw_decodes_to_rotational_pair() {
        let s = SymmetryParams::from_raw(&[0.0; 8]);
        assert_eq!(s.kind, SymmetryKind::Rotational);
        assert_eq!(s.repetitions, 2);
        assert_eq!(s.direction, Vec3::x());
    }

    #[test]
    fn kind_decoding_midpoints() {
        assert_eq!(SymmetryKind::from_raw_code(0.5), SymmetryKind::Rotational);
        assert_eq!(SymmetryKind::from_raw_code(-0.5), SymmetryKind::Rotational);
        assert_eq!(SymmetryKind::from_raw_code(0.51), SymmetryKind::Translational);
        assert_eq!(SymmetryKind::from_raw_code(-0.9), SymmetryKind::Reflective);
    }

    #[test]
    fn repetitions_clamp() {
        let mut raw = [0.0; 8];
        raw[1] = 1.0;
        assert_eq!(SymmetryParams::from_raw(&raw).repetitions, 10);
        raw[1] = -1.0;
        assert_eq!(SymmetryParams::from_raw(&raw).repetitions, 2);
        raw[1] = 2.0 / 8.0 + 0.04;
        assert_eq!(SymmetryParams::from_raw(&raw).repetitions, 4);
    }

    #[test]
    fn raw_round_trip_each_kind() {
        let all = [
            SymmetryParams::reflective(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 0.1)).unwrap(),
            SymmetryParams::rotational(Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.1, 0.0, 0.0), 7).unwrap(),
            SymmetryParams::translational(Vec3::new(0.2, 0.0, 0.1), Vec3::new(-0.3, 0.0, 0.0), 10).unwrap(),
        ];
        for s in all {
            assert_eq!(SymmetryParams::from_raw(&s.to_raw()), s);
        }
    }

    #[test]
    fn canonical_keeps_the_group() {
        let s = SymmetryParams::reflective(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(0.2, 0.7, -0.3)).unwrap();
        let c = s.canonical(Vec3::zeros());
        assert_eq!(c.direction, Vec3::x());
        assert!((c.anchor - Vec3::new(0.2, 0.0, 0.0)).norm() < 1e-15);
        let b = cube_at(Vec3::new(0.9, 0.1, 0.0));
        let m1 = expand_symmetry(&b, &s).unwrap()[1];
        let m2 = expand_symmetry(&b, &c).unwrap()[1];
        assert!((m1.center() - m2.center()).norm() < 1e-12);
    }
}
