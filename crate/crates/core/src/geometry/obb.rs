//! Oriented cuboids, their 12-number raw layout, affine maps and
//! unit-bounding-box normalization.

use nalgebra::{Matrix3, Vector3};

use super::GeometryError;

pub type Vec3 = Vector3<f64>;

/// Number of reals in the raw box layout: center, axis1, axis2, dims.
pub const BOX_PARAMS: usize = 12;

/// Added to decoded `|dims|` so every decoded box has strictly positive extent.
pub const DIM_EPSILON: f64 = 1e-4;

const DEGENERATE_NORM: f64 = 1e-12;

/// A cuboid with arbitrary orientation.
///
/// `axis1` and `axis2` are kept orthonormal; the third axis is always
/// `axis1 × axis2`, so the frame is right-handed even for mirrored boxes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedBox {
    center: Vec3,
    axis1: Vec3,
    axis2: Vec3,
    dims: Vec3,
}

impl OrientedBox {
    /// Builds a box, Gram-Schmidt orthonormalizing the two axes.
    ///
    /// Fails when a coordinate is non-finite or a dimension is not positive.
    pub fn new(center: Vec3, axis1: Vec3, axis2: Vec3, dims: Vec3) -> Result<Self, GeometryError> {
        let finite = |v: &Vec3| v.iter().all(|x| x.is_finite());
        if !(finite(&center) && finite(&axis1) && finite(&axis2) && finite(&dims)) {
            return Err(GeometryError::InvalidBox("non-finite component".into()));
        }
        if dims.iter().any(|&d| d <= 0.0) {
            return Err(GeometryError::InvalidBox(format!(
                "dimensions must be positive, got ({}, {}, {})",
                dims.x, dims.y, dims.z
            )));
        }
        let (axis1, axis2) = orthonormalize(axis1, axis2);
        Ok(Self { center, axis1, axis2, dims })
    }

    /// Like [`OrientedBox::new`], but axes that are already orthonormal to
    /// within `1e-12` are kept bit-for-bit, so stored boxes reload exactly.
    pub fn from_stored(center: Vec3, axis1: Vec3, axis2: Vec3, dims: Vec3) -> Result<Self, GeometryError> {
        let b = Self::new(center, axis1, axis2, dims)?;
        let orthonormal = (axis1.norm() - 1.0).abs() < 1e-12
            && (axis2.norm() - 1.0).abs() < 1e-12
            && axis1.dot(&axis2).abs() < 1e-12;
        Ok(if orthonormal { Self { axis1, axis2, ..b } } else { b })
    }

    /// Axis-aligned box.
    pub fn aligned(center: Vec3, dims: Vec3) -> Result<Self, GeometryError> {
        Self::new(center, Vec3::x(), Vec3::y(), dims)
    }

    /// Decodes the raw 12-number layout. Never fails: degenerate axes fall
    /// back to `+x`/`+y` and dimensions become `|raw| + DIM_EPSILON`.
    pub fn from_raw(raw: &[f64; BOX_PARAMS]) -> Self {
        let v = |i: usize| Vec3::new(raw[i], raw[i + 1], raw[i + 2]);
        let clean = |x: f64| if x.is_finite() { x } else { 0.0 };
        let center = v(0).map(clean);
        let (axis1, axis2) = orthonormalize(v(3).map(clean), v(6).map(clean));
        let dims = v(9).map(|d| clean(d).abs() + DIM_EPSILON);
        Self { center, axis1, axis2, dims }
    }

    /// Encodes into the raw layout such that `from_raw(to_raw(b)) == b`
    /// whenever every dimension exceeds `DIM_EPSILON`.
    pub fn to_raw(&self) -> [f64; BOX_PARAMS] {
        let mut raw = [0.0; BOX_PARAMS];
        raw[0..3].copy_from_slice(self.center.as_slice());
        raw[3..6].copy_from_slice(self.axis1.as_slice());
        raw[6..9].copy_from_slice(self.axis2.as_slice());
        for (slot, d) in raw[9..12].iter_mut().zip(self.dims.iter()) {
            *slot = (d - DIM_EPSILON).max(0.0);
        }
        raw
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn axis1(&self) -> Vec3 {
        self.axis1
    }

    pub fn axis2(&self) -> Vec3 {
        self.axis2
    }

    pub fn axis3(&self) -> Vec3 {
        self.axis1.cross(&self.axis2)
    }

    pub fn dims(&self) -> Vec3 {
        self.dims
    }

    pub fn axes(&self) -> [Vec3; 3] {
        [self.axis1, self.axis2, self.axis3()]
    }

    /// Length of the main diagonal.
    pub fn diagonal(&self) -> f64 {
        self.dims.norm()
    }

    /// Corners in canonical order: corner `i` takes sign `+` along axis `k`
    /// iff bit `k` of `i` is set.
    pub fn corners(&self) -> [Vec3; 8] {
        let axes = self.axes();
        let half = self.dims * 0.5;
        std::array::from_fn(|i| {
            let mut p = self.center;
            for k in 0..3 {
                let s = if (i >> k) & 1 == 1 { 1.0 } else { -1.0 };
                p += axes[k] * (s * half[k]);
            }
            p
        })
    }

    /// Euclidean distance from `p` to the solid box (0 inside).
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let d = p - self.center;
        let axes = self.axes();
        let mut outside = Vec3::zeros();
        for k in 0..3 {
            outside[k] = (d.dot(&axes[k]).abs() - 0.5 * self.dims[k]).max(0.0);
        }
        outside.norm()
    }

    /// Whether `p` lies inside or on the box.
    pub fn contains(&self, p: &Vec3) -> bool {
        let d = p - self.center;
        self.axes()
            .iter()
            .zip(self.dims.iter())
            .all(|(a, dim)| d.dot(a).abs() <= 0.5 * dim)
    }

    /// Applies an affine map. The linear part must be orthogonal up to a
    /// uniform scale, which is what every symmetry and normalization map is.
    pub fn transformed(&self, map: &AffineMap) -> Self {
        let scale = map.linear.column(0).norm();
        let center = map.apply_point(&self.center);
        let (axis1, axis2) =
            orthonormalize(map.apply_vector(&self.axis1), map.apply_vector(&self.axis2));
        Self { center, axis1, axis2, dims: self.dims * scale }
    }

    /// Returns a copy with the given center.
    pub fn with_center(&self, center: Vec3) -> Self {
        Self { center, ..*self }
    }

    /// Returns a copy with the given dimensions (must be positive).
    pub fn with_dims(&self, dims: Vec3) -> Result<Self, GeometryError> {
        Self::new(self.center, self.axis1, self.axis2, dims)
    }
}

/// Gram-Schmidt with fixed fallbacks: a degenerate first axis becomes `+x`,
/// a degenerate second axis becomes `+y` (or `+z` when `+y` is parallel).
pub fn orthonormalize(axis1: Vec3, axis2: Vec3) -> (Vec3, Vec3) {
    let n1 = axis1.norm();
    let a1 = if n1 > DEGENERATE_NORM && n1.is_finite() { axis1 / n1 } else { Vec3::x() };
    let reject = |v: Vec3| v - a1 * a1.dot(&v);
    let mut a2 = reject(axis2);
    let n2 = a2.norm();
    if n2 > DEGENERATE_NORM && n2.is_finite() {
        a2 /= n2;
    } else {
        a2 = reject(Vec3::y());
        if a2.norm() < 1e-6 {
            a2 = reject(Vec3::z());
        }
        a2 = a2.normalize();
    }
    (a1, a2)
}

/// `p ↦ linear · p + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub linear: Matrix3<f64>,
    pub offset: Vec3,
}

impl AffineMap {
    pub fn identity() -> Self {
        Self { linear: Matrix3::identity(), offset: Vec3::zeros() }
    }

    pub fn translation(offset: Vec3) -> Self {
        Self { linear: Matrix3::identity(), offset }
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.linear * p + self.offset
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.linear * v
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            linear: self.linear * inner.linear,
            offset: self.linear * inner.offset + self.offset,
        }
    }

    pub fn inverse(&self) -> Option<AffineMap> {
        let inv = self.linear.try_inverse()?;
        Some(AffineMap { linear: inv, offset: -(inv * self.offset) })
    }
}

/// Uniform scale plus translation applied by [`normalize_shape`]:
/// `p' = scale · p + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizeTransform {
    pub scale: f64,
    pub offset: Vec3,
}

impl NormalizeTransform {
    pub fn identity() -> Self {
        Self { scale: 1.0, offset: Vec3::zeros() }
    }

    pub fn as_affine(&self) -> AffineMap {
        AffineMap { linear: Matrix3::identity() * self.scale, offset: self.offset }
    }

    pub fn inverse(&self) -> NormalizeTransform {
        NormalizeTransform { scale: 1.0 / self.scale, offset: -self.offset / self.scale }
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        p * self.scale + self.offset
    }

    pub fn apply_box(&self, b: &OrientedBox) -> OrientedBox {
        OrientedBox {
            center: self.apply_point(&b.center),
            dims: b.dims * self.scale,
            ..*b
        }
    }
}

/// Axis-aligned bounds `(min, max)` of every corner of every box.
pub fn corner_bounds(boxes: &[OrientedBox]) -> Option<(Vec3, Vec3)> {
    let mut it = boxes.iter().flat_map(|b| b.corners());
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), p| (lo.inf(&p), hi.sup(&p))))
}

/// Fits the joint corner bounds of `boxes` into the axis-aligned unit cube
/// centered at the origin with one uniform scale. The longest side of the
/// bounds maps exactly onto `[-0.5, 0.5]`.
pub fn normalize_shape(
    boxes: &[OrientedBox],
) -> Result<(Vec<OrientedBox>, NormalizeTransform), GeometryError> {
    let (lo, hi) = corner_bounds(boxes).ok_or(GeometryError::EmptyInput("box list"))?;
    let extent = (hi - lo).max();
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(GeometryError::InvalidBox("shape has no extent".into()));
    }
    let scale = 1.0 / extent;
    let mid = (lo + hi) * 0.5;
    let transform = NormalizeTransform { scale, offset: -mid * scale };
    let out = boxes.iter().map(|b| transform.apply_box(b)).collect();
    Ok((out, transform))
}
