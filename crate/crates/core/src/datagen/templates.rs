//! Parametric part layouts with known hierarchies. All templates are built
//! y-up, resting on `y = 0`, facing `+z`, then normalized to the unit cube.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{OrientedBox, SymmetryParams, Vec3};
use crate::structure::{StructureNode, StructureTree};

use super::DatagenError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Chair,
    Table,
    Airplane,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Chair, Category::Table, Category::Airplane];

    pub fn name(self) -> &'static str {
        match self {
            Category::Chair => "chair",
            Category::Table => "table",
            Category::Airplane => "airplane",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| DatagenError::Config(format!("unknown category {s:?}")))
    }
}

/// How a leg group is arranged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LegLayout {
    /// Two nested reflections (left/right of front/back pairs).
    ReflectivePairs,
    /// Four legs, 90° apart about the vertical axis.
    Rotational,
    /// A row of `k` legs along x, reflected front to back.
    Translational(u32),
}

/// Template choice plus sampling ranges. Ranges are `(min, max)` in template
/// units before normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateSpec {
    pub category: Category,
    /// `None` draws a layout allowed for the category.
    pub legs: Option<LegLayout>,
    pub ranges: Ranges,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ranges {
    pub seat_width: (f64, f64),
    pub seat_depth: (f64, f64),
    pub slab: (f64, f64),
    pub leg_height: (f64, f64),
    pub leg_size: (f64, f64),
    pub back_height: (f64, f64),
    pub top_width: (f64, f64),
    pub top_depth: (f64, f64),
    pub fuselage_length: (f64, f64),
    pub fuselage_size: (f64, f64),
    pub wing_span: (f64, f64),
    pub wing_chord: (f64, f64),
    pub tail_height: (f64, f64),
}

impl Default for Ranges {
    fn default() -> Self {
        Self {
            seat_width: (0.4, 0.6),
            seat_depth: (0.4, 0.6),
            slab: (0.04, 0.08),
            leg_height: (0.35, 0.5),
            leg_size: (0.04, 0.07),
            back_height: (0.35, 0.6),
            top_width: (0.6, 1.0),
            top_depth: (0.4, 0.8),
            fuselage_length: (0.8, 1.0),
            fuselage_size: (0.08, 0.14),
            wing_span: (0.3, 0.45),
            wing_chord: (0.12, 0.22),
            tail_height: (0.1, 0.2),
        }
    }
}

impl TemplateSpec {
    pub fn new(category: Category) -> Self {
        Self { category, legs: None, ranges: Ranges::default() }
    }

    pub fn with_legs(category: Category, legs: LegLayout) -> Self {
        Self { category, legs: Some(legs), ranges: Ranges::default() }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        let r = &self.ranges;
        let all = [
            r.seat_width,
            r.seat_depth,
            r.slab,
            r.leg_height,
            r.leg_size,
            r.back_height,
            r.top_width,
            r.top_depth,
            r.fuselage_length,
            r.fuselage_size,
            r.wing_span,
            r.wing_chord,
            r.tail_height,
        ];
        if all.iter().any(|&(a, b)| !(a > 0.0 && a <= b && b.is_finite())) {
            return Err(DatagenError::Config("sampling ranges must satisfy 0 < min <= max".into()));
        }
        // legs must fit under the seat / top with room to spare
        if 2.0 * r.leg_size.1 >= r.seat_width.0.min(r.seat_depth.0).min(r.top_depth.0) {
            return Err(DatagenError::Config("legs too thick for the seat".into()));
        }
        match (self.category, self.legs) {
            (_, None) => Ok(()),
            (Category::Airplane, Some(_)) => Err(DatagenError::Config("airplanes have no legs".into())),
            (Category::Chair, Some(LegLayout::Translational(_))) => {
                Err(DatagenError::Config("chairs use reflective or rotational legs".into()))
            }
            (_, Some(LegLayout::Translational(k))) if !(2..=4).contains(&k) => {
                Err(DatagenError::Config(format!("{k} legs per row; expected 2..=4")))
            }
            _ => Ok(()),
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn cuboid(center: Vec3, dims: Vec3) -> StructureNode {
    StructureNode::Leaf(OrientedBox::aligned(center, dims).expect("template dims are positive"))
}

fn reflect(node: StructureNode, normal: Vec3) -> StructureNode {
    StructureNode::symmetry(node, SymmetryParams::reflective(normal, Vec3::zeros()).expect("unit normal"))
}

/// Leg group for a support of half-extents `(hx, hz)` whose underside is at
/// `height`.
fn legs(rng: &mut ChaCha8Rng, layout: LegLayout, hx: f64, hz: f64, height: f64, size: f64) -> StructureNode {
    let inset = 0.1 * size + draw(rng, (0.0, 0.5)) * size;
    let dims = Vec3::new(size, height, size);
    match layout {
        LegLayout::ReflectivePairs => {
            let x = hx - size / 2.0 - inset;
            let z = hz - size / 2.0 - inset;
            let leg = cuboid(Vec3::new(-x, height / 2.0, -z), dims);
            reflect(reflect(leg, Vec3::z()), Vec3::x())
        }
        LegLayout::Rotational => {
            let a = hx.min(hz) - size / 2.0 - inset;
            let leg = cuboid(Vec3::new(-a, height / 2.0, -a), dims);
            let rot = SymmetryParams::rotational(Vec3::y(), Vec3::zeros(), 4).expect("valid rotation");
            StructureNode::symmetry(leg, rot)
        }
        LegLayout::Translational(k) => {
            let x = hx - size / 2.0 - inset;
            let z = hz - size / 2.0 - inset;
            let start = Vec3::new(-x, height / 2.0, -z);
            let step = Vec3::new(2.0 * x / (k - 1) as f64, 0.0, 0.0);
            let row = SymmetryParams::translational(step, start, k).expect("valid translation");
            reflect(StructureNode::symmetry(cuboid(start, dims), row), Vec3::z())
        }
    }
}

fn chair(rng: &mut ChaCha8Rng, spec: &TemplateSpec) -> StructureNode {
    let r = &spec.ranges;
    let layout = spec.legs.unwrap_or_else(|| {
        if rng.random_bool(0.5) {
            LegLayout::ReflectivePairs
        } else {
            LegLayout::Rotational
        }
    });
    let (w, d, t) = (draw(rng, r.seat_width), draw(rng, r.seat_depth), draw(rng, r.slab));
    let (h, s) = (draw(rng, r.leg_height), draw(rng, r.leg_size));
    let (bh, bt) = (draw(rng, r.back_height), draw(rng, r.slab));
    let seat = cuboid(Vec3::new(0.0, h + t / 2.0, 0.0), Vec3::new(w, t, d));
    let back = cuboid(Vec3::new(0.0, h + t + bh / 2.0, -d / 2.0 + bt / 2.0), Vec3::new(w, bh, bt));
    let legs = legs(rng, layout, w / 2.0, d / 2.0, h, s);
    StructureNode::adjacency(back, StructureNode::adjacency(seat, legs))
}

fn table(rng: &mut ChaCha8Rng, spec: &TemplateSpec) -> StructureNode {
    let r = &spec.ranges;
    let layout = spec.legs.unwrap_or_else(|| match rng.random_range(0..3) {
        0 => LegLayout::Rotational,
        1 => LegLayout::Translational(2),
        _ => LegLayout::Translational(3),
    });
    let (w, d, t) = (draw(rng, r.top_width), draw(rng, r.top_depth), draw(rng, r.slab));
    let (h, s) = (draw(rng, r.leg_height), draw(rng, r.leg_size));
    let top = cuboid(Vec3::new(0.0, h + t / 2.0, 0.0), Vec3::new(w, t, d));
    StructureNode::adjacency(top, legs(rng, layout, w / 2.0, d / 2.0, h, s))
}

fn airplane(rng: &mut ChaCha8Rng, spec: &TemplateSpec) -> StructureNode {
    let r = &spec.ranges;
    let (l, fw, fh) = (draw(rng, r.fuselage_length), draw(rng, r.fuselage_size), draw(rng, r.fuselage_size));
    let (span, chord) = (draw(rng, r.wing_span), draw(rng, r.wing_chord));
    let wt = draw(rng, (0.02, 0.04));
    let wz = draw(rng, (-0.05, 0.1)) * l;
    let (th, tc, tt) = (draw(rng, r.tail_height), draw(rng, (0.08, 0.15)), draw(rng, (0.02, 0.04)));
    let fuselage = cuboid(Vec3::zeros(), Vec3::new(fw, fh, l));
    let wing = cuboid(Vec3::new(fw / 2.0 + span / 2.0, 0.0, wz), Vec3::new(span, wt, chord));
    let tail = cuboid(Vec3::new(0.0, fh / 2.0 + th / 2.0, -l / 2.0 + tc / 2.0), Vec3::new(tt, th, tc));
    StructureNode::adjacency(fuselage, StructureNode::adjacency(reflect(wing, Vec3::x()), tail))
}

/// Samples one normalized instance of `spec`; deterministic per seed.
pub fn sample_template(spec: &TemplateSpec, seed: u64) -> Result<StructureTree, DatagenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = match spec.category {
        Category::Chair => chair(&mut rng, spec),
        Category::Table => table(&mut rng, spec),
        Category::Airplane => airplane(&mut rng, spec),
    };
    let tree = StructureTree::new(root, spec.category.name(), format!("template:{}:{seed}", spec.category.name()));
    Ok(tree.normalized()?.0)
}
