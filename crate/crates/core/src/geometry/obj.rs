//! Wavefront OBJ export of box sets: 8 vertices and 6 outward-facing quads
//! per box, boxes in the given order.

use std::fmt::Write;

use super::obb::OrientedBox;

/// Quads as corner indices (see [`OrientedBox::corners`]), counter-clockwise
/// seen from outside: -a1, +a1, -a2, +a2, -a3, +a3.
pub const BOX_FACES: [[usize; 4]; 6] = [
    [0, 4, 6, 2],
    [1, 3, 7, 5],
    [0, 1, 5, 4],
    [2, 6, 7, 3],
    [0, 2, 3, 1],
    [4, 5, 7, 6],
];

pub fn boxes_to_obj(boxes: &[OrientedBox]) -> String {
    let mut out = String::new();
    writeln!(out, "# {} boxes", boxes.len()).unwrap();
    for (i, b) in boxes.iter().enumerate() {
        writeln!(out, "o box{i}").unwrap();
        for c in b.corners() {
            writeln!(out, "v {:.9} {:.9} {:.9}", c.x, c.y, c.z).unwrap();
        }
        let base = 8 * i + 1;
        for f in BOX_FACES {
            writeln!(out, "f {} {} {} {}", base + f[0], base + f[1], base + f[2], base + f[3]).unwrap();
        }
    }
    out
}
