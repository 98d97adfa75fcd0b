//! Occupancy grids and symmetry-driven completion of missing voxels.
//!
//! Binary layout (`.imvg`): the ASCII magic `IMVG`, then three little-endian
//! `u32` resolutions `nx, ny, nz`, then `nx·ny·nz` occupancy bits in row-major
//! order (`index = (x·ny + y)·nz + z`), packed LSB-first into bytes. A stored
//! grid always spans the unit cube `[-0.5, 0.5]³`.

use std::io::{Read, Write};

use super::obb::{AffineMap, OrientedBox, Vec3};
use super::GeometryError;

pub const VOXEL_MAGIC: &[u8; 4] = b"IMVG";

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    resolution: [usize; 3],
    origin: Vec3,
    cell: Vec3,
    occupancy: Vec<bool>,
}

impl VoxelGrid {
    /// Empty grid over `[origin, origin + resolution·cell]`.
    pub fn new(resolution: [usize; 3], origin: Vec3, cell: Vec3) -> Result<Self, GeometryError> {
        if resolution.contains(&0) {
            return Err(GeometryError::InvalidGrid("resolution must be positive".into()));
        }
        if cell.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(GeometryError::InvalidGrid("cell size must be positive".into()));
        }
        let n = resolution.iter().product();
        Ok(Self { resolution, origin, cell, occupancy: vec![false; n] })
    }

    /// Empty grid covering the unit cube centered at the origin.
    pub fn unit(resolution: [usize; 3]) -> Result<Self, GeometryError> {
        let cell = Vec3::new(
            1.0 / resolution[0].max(1) as f64,
            1.0 / resolution[1].max(1) as f64,
            1.0 / resolution[2].max(1) as f64,
        );
        Self::new(resolution, Vec3::repeat(-0.5), cell)
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    pub fn index(&self, [x, y, z]: [usize; 3]) -> usize {
        (x * self.resolution[1] + y) * self.resolution[2] + z
    }

    pub fn cell_of_index(&self, i: usize) -> [usize; 3] {
        let [_, ny, nz] = self.resolution;
        [i / (ny * nz), (i / nz) % ny, i % nz]
    }

    pub fn get(&self, c: [usize; 3]) -> bool {
        self.occupancy[self.index(c)]
    }

    pub fn set(&mut self, c: [usize; 3], value: bool) {
        let i = self.index(c);
        self.occupancy[i] = value;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    pub fn cell_center(&self, [x, y, z]: [usize; 3]) -> Vec3 {
        self.origin
            + Vec3::new(
                (x as f64 + 0.5) * self.cell.x,
                (y as f64 + 0.5) * self.cell.y,
                (z as f64 + 0.5) * self.cell.z,
            )
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_at(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for k in 0..3 {
            let f = ((p[k] - self.origin[k]) / self.cell[k]).floor();
            if !(f >= 0.0 && f < self.resolution[k] as f64) {
                return None;
            }
            out[k] = f as usize;
        }
        Some(out)
    }

    /// Marks every cell whose center lies inside one of `boxes`.
    pub fn fill_boxes(&mut self, boxes: &[OrientedBox]) {
        for i in 0..self.len() {
            let c = self.cell_center(self.cell_of_index(i));
            if boxes.iter().any(|b| b.contains(&c)) {
                self.occupancy[i] = true;
            }
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(VOXEL_MAGIC)?;
        for r in self.resolution {
            w.write_all(&(r as u32).to_le_bytes())?;
        }
        let mut bytes = vec![0u8; self.len().div_ceil(8)];
        for (i, &o) in self.occupancy.iter().enumerate() {
            if o {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, GeometryError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| GeometryError::InvalidGrid("truncated header".into()))?;
        if &magic != VOXEL_MAGIC {
            return Err(GeometryError::InvalidGrid("bad magic".into()));
        }
        let mut res = [0usize; 3];
        for slot in &mut res {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| GeometryError::InvalidGrid("truncated header".into()))?;
            *slot = u32::from_le_bytes(b) as usize;
        }
        let mut grid = Self::unit(res)?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| GeometryError::InvalidGrid(e.to_string()))?;
        if bytes.len() != grid.len().div_ceil(8) {
            return Err(GeometryError::InvalidGrid(format!(
                "expected {} occupancy bytes, found {}",
                grid.len().div_ceil(8),
                bytes.len()
            )));
        }
        for i in 0..grid.len() {
            grid.occupancy[i] = bytes[i / 8] >> (i % 8) & 1 == 1;
        }
        Ok(grid)
    }
}

/// One copy of a symmetry group's generator: the boxes it covers and the
/// map taking the generator onto them.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupMember {
    pub transform: AffineMap,
    pub boxes: Vec<usize>,
}

/// A symmetry group inside a flattened structure.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryGroup {
    pub members: Vec<GroupMember>,
}

/// Completes `grid` using the part symmetries of a recovered structure.
///
/// Each occupied cell is assigned to its closest box (ties to the lower
/// index). Cells owned by a member of a symmetry group are copied onto every
/// other member through `Tⱼ ∘ Tᵢ⁻¹`. The copy is repeated until nothing
/// changes, so the result is a fixed point: refining it again is a no-op.
pub fn refine_volume(
    grid: &VoxelGrid,
    boxes: &[OrientedBox],
    groups: &[SymmetryGroup],
) -> Result<VoxelGrid, GeometryError> {
    if boxes.is_empty() {
        return Err(GeometryError::EmptyInput("structure"));
    }
    // owner[b] = list of (group, member) that box b belongs to
    let mut owners: Vec<Vec<(usize, usize)>> = vec![Vec::new(); boxes.len()];
    let mut inverses = Vec::with_capacity(groups.len());
    for (g, group) in groups.iter().enumerate() {
        let mut inv = Vec::with_capacity(group.members.len());
        for (m, member) in group.members.iter().enumerate() {
            for &b in &member.boxes {
                let slot = owners
                    .get_mut(b)
                    .ok_or_else(|| GeometryError::InvalidGrid(format!("group box index {b} out of range")))?;
                slot.push((g, m));
            }
            inv.push(
                member
                    .transform
                    .inverse()
                    .ok_or_else(|| GeometryError::InvalidSymmetry("singular member transform".into()))?,
            );
        }
        inverses.push(inv);
    }

    let mut out = grid.clone();
    loop {
        let snapshot = out.clone();
        let mut changed = false;
        for i in 0..snapshot.len() {
            if !snapshot.occupancy[i] {
                continue;
            }
            let center = snapshot.cell_center(snapshot.cell_of_index(i));
            let owner = closest_box(boxes, &center);
            for &(g, m) in &owners[owner] {
                let local = inverses[g][m].apply_point(&center);
                for (j, other) in groups[g].members.iter().enumerate() {
                    if j == m {
                        continue;
                    }
                    let p = other.transform.apply_point(&local);
                    if let Some(c) = out.cell_at(&p) {
                        let idx = out.index(c);
                        if !out.occupancy[idx] {
                            out.occupancy[idx] = true;
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return Ok(out);
        }
    }
}

fn closest_box(boxes: &[OrientedBox], p: &Vec3) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, b) in boxes.iter().enumerate() {
        let d = b.distance_to(p);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SymmetryParams;

    #[test]
    fn cell_mapping_is_bijective() {
        let g = VoxelGrid::unit([3, 4, 5]).unwrap();
        for i in 0..g.len() {
            let c = g.cell_of_index(i);
            assert_eq!(g.index(c), i);
            assert_eq!(g.cell_at(&g.cell_center(c)), Some(c));
        }
        assert_eq!(g.cell_at(&Vec3::new(0.6, 0.0, 0.0)), None);
    }

    #[test]
    fn binary_round_trip() {
        let mut g = VoxelGrid::unit([3, 2, 5]).unwrap();
        g.set([1, 1, 4], true);
        g.set([0, 0, 0], true);
        let bytes = g.to_bytes();
        assert_eq!(&bytes[..4], b"IMVG");
        assert_eq!(bytes.len(), 16 + 4);
        assert_eq!(VoxelGrid::read_from(&bytes[..]).unwrap(), g);
    }

    #[test]
    fn rejects_bad_magic_and_length() {
        let g = VoxelGrid::unit([2, 2, 2]).unwrap();
        let mut bytes = g.to_bytes();
        bytes.push(0);
        assert!(VoxelGrid::read_from(&bytes[..]).is_err());
        bytes[0] = b'X';
        assert!(VoxelGrid::read_from(&bytes[..]).is_err());
    }

    #[test]
    fn reflective_pair_fills_mirror_cells() {
        let left = OrientedBox::aligned(Vec3::new(-0.25, 0.0, 0.0), Vec3::new(0.25, 0.5, 0.5)).unwrap();
        let s = SymmetryParams::reflective(Vec3::x(), Vec3::zeros()).unwrap();
        let t = s.transforms().unwrap();
        let right = left.transformed(&t[1]);
        let mut grid = VoxelGrid::unit([8, 8, 8]).unwrap();
        grid.fill_boxes(&[left]);
        let groups = [SymmetryGroup {
            members: vec![
                GroupMember { transform: t[0], boxes: vec![0] },
                GroupMember { transform: t[1], boxes: vec![1] },
            ],
        }];
        let out = refine_volume(&grid, &[left, right], &groups).unwrap();
        // mirror-index oracle: cell x ↦ 7 - x
        for i in 0..grid.len() {
            let [x, y, z] = grid.cell_of_index(i);
            let expect = grid.get([x, y, z]) || grid.get([7 - x, y, z]);
            assert_eq!(out.get([x, y, z]), expect);
        }
        assert!(out.occupied_count() > grid.occupied_count());
    }

    #[test]
    fn empty_structure_errors() {
        let grid = VoxelGrid::unit([2, 2, 2]).unwrap();
        assert!(refine_volume(&grid, &[], &[]).is_err());
    }
}
