//! Dataset directories.
//!
//! ```text
//! manifest.tsv          one row per sample, see MANIFEST_COLUMNS
//! masks/<sample>.immk   binary masks
//! trees/<shape>.struct  ground-truth hierarchies (flipped samples get their own)
//! ```
//!
//! The manifest starts with a `# im2struct-manifest <version>` line and a
//! header row.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::MaskImage;
use crate::fsutil::write_atomic;
use crate::geometry::{AffineMap, Vec3};
use crate::structure::{deserialize, serialize, StructureTree};

use super::render::{render_mask, View};
use super::{deform, sample_template, Category, DatagenError, TemplateSpec};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_COLUMNS: [&str; 9] =
    ["sample", "split", "shape", "category", "view", "azimuth", "elevation", "mask", "tree"];

pub const AZIMUTH_STEPS: usize = 12;
pub const DEFAULT_ELEVATIONS: [f64; 3] = [15.0, 30.0, 45.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub shapes: usize,
    pub views: usize,
    pub seed: u64,
    /// Shape `i` uses `categories[i % len]`.
    pub categories: Vec<Category>,
    pub elevations: Vec<f64>,
    pub deform_magnitude: f64,
    pub train_fraction: f64,
    /// Also emit a left-right mirrored copy of every sample.
    pub flip: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            shapes: 10,
            views: 6,
            seed: 0,
            categories: Category::ALL.to_vec(),
            elevations: DEFAULT_ELEVATIONS.to_vec(),
            deform_magnitude: 0.15,
            train_fraction: 0.7,
            flip: false,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: &str| Err(DatagenError::Config(m.into()));
        if self.shapes == 0 || self.views == 0 {
            return bad("need at least one shape and one view");
        }
        if self.categories.is_empty() {
            return bad("no categories");
        }
        if self.elevations.is_empty() || self.elevations.iter().any(|e| !(e.abs() < 90.0)) {
            return bad("elevations must be non-empty and inside (-90, 90)");
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return bad("train fraction outside [0, 1]");
        }
        if !(0.0..1.0).contains(&self.deform_magnitude) {
            return bad("deformation magnitude outside [0, 1)");
        }
        Ok(())
    }
}

/// SplitMix64 finalizer over `a` and `b`; used to derive per-item seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Views for one shape. The first `min(count, 12·E)` come from the
/// 12-azimuth × `E`-elevation grid, spread so both angles vary: view `j`
/// takes azimuth step `⌊12·j / n⌋` and elevation `j mod E`. Any further
/// views are random azimuths at random grid elevations.
pub fn select_views(count: usize, elevations: &[f64], seed: u64) -> Vec<View> {
    let grid = AZIMUTH_STEPS * elevations.len();
    let n = count.min(grid);
    let mut out: Vec<View> = (0..n)
        .map(|j| {
            let az = (AZIMUTH_STEPS * j / n) as f64 * (360.0 / AZIMUTH_STEPS as f64);
            View::new(az, elevations[j % elevations.len()])
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in n..count {
        let az = rng.random_range(0.0..360.0);
        let el = elevations[rng.random_range(0..elevations.len())];
        out.push(View::new(az, el));
    }
    out
}

/// Mirror image of `tree` across the vertical plane through the origin
/// whose normal is the image-right direction of `view`; its silhouette
/// from `view` is the left-right flip of the original one.
pub fn mirror_for_view(tree: &StructureTree, view: &View) -> Result<StructureTree, DatagenError> {
    let (right, _) = view.basis();
    let linear = Matrix3::identity() - (right * right.transpose()) * 2.0;
    let m = AffineMap { linear, offset: Vec3::zeros() };
    let t = StructureTree { root: tree.root.transformed(&m), ..tree.clone() };
    Ok(t.normalized()?.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub sample: String,
    pub split: Split,
    pub shape: usize,
    pub category: String,
    pub view: String,
    pub azimuth: f64,
    pub elevation: f64,
    pub mask: String,
    pub tree: String,
}

/// One loaded mask/tree pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub entry: ManifestEntry,
    pub mask: MaskImage,
    pub tree: StructureTree,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io { path: path.to_path_buf(), source }
}

pub fn manifest_text(entries: &[ManifestEntry]) -> String {
    let mut s = format!("# im2struct-manifest {MANIFEST_VERSION}\n{}\n", MANIFEST_COLUMNS.join("\t"));
    for e in entries {
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.sample,
            e.split.name(),
            e.shape,
            e.category,
            e.view,
            e.azimuth,
            e.elevation,
            e.mask,
            e.tree
        )
        .expect("writing to a String cannot fail");
    }
    s
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, DatagenError> {
    let err = |line: usize, message: String| DatagenError::Manifest { line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == format!("# im2struct-manifest {MANIFEST_VERSION}") => {}
        Some((_, l)) if l.starts_with("# im2struct-manifest ") => {
            return Err(err(1, format!("unsupported manifest version: {l}")))
        }
        _ => return Err(err(1, "missing manifest header".into())),
    }
    match lines.next() {
        Some((_, l)) if l.split('\t').eq(MANIFEST_COLUMNS) => {}
        _ => return Err(err(2, format!("expected columns {}", MANIFEST_COLUMNS.join(",")))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != MANIFEST_COLUMNS.len() {
            return Err(err(i + 1, format!("{} fields, expected {}", f.len(), MANIFEST_COLUMNS.len())));
        }
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| err(i + 1, format!("bad {what} {s:?}")));
        let safe = |p: &str| {
            let path = Path::new(p);
            if path.is_absolute() || path.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
                Err(err(i + 1, format!("path {p:?} escapes the dataset")))
            } else {
                Ok(p.to_string())
            }
        };
        out.push(ManifestEntry {
            sample: f[0].to_string(),
            split: Split::parse(f[1]).ok_or_else(|| err(i + 1, format!("bad split {:?}", f[1])))?,
            shape: f[2].parse().map_err(|_| err(i + 1, format!("bad shape id {:?}", f[2])))?,
            category: f[3].to_string(),
            view: f[4].to_string(),
            azimuth: num(f[5], "azimuth")?,
            elevation: num(f[6], "elevation")?,
            mask: safe(f[7])?,
            tree: safe(f[8])?,
        });
    }
    Ok(out)
}

/// Generates every file of a dataset under `out` and returns the manifest
/// entries. Deterministic per config.
pub fn build_dataset(config: &DatasetConfig, out: &Path) -> Result<Vec<ManifestEntry>, DatagenError> {
    config.validate()?;
    for sub in ["masks", "trees"] {
        let d = out.join(sub);
        std::fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let mut order: Vec<usize> = (0..config.shapes).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x5EED_5EED)));
    let n_train = (config.train_fraction * config.shapes as f64).round() as usize;
    let mut split = vec![Split::Test; config.shapes];
    for &s in &order[..n_train] {
        split[s] = Split::Train;
    }

    let mut entries = Vec::new();
    for shape in 0..config.shapes {
        let shape_seed = mix_seed(config.seed, shape as u64);
        let category = config.categories[shape % config.categories.len()];
        let base = sample_template(&TemplateSpec::new(category), mix_seed(shape_seed, 0))?;
        let mut tree = deform(&base, config.deform_magnitude, mix_seed(shape_seed, 1))?;
        tree.provenance = format!("{}:deform{}", base.provenance, config.deform_magnitude);
        let tree_rel = format!("trees/shape_{shape:04}.struct");
        write_file(out, &tree_rel, serialize(&tree)?.as_bytes())?;

        for (v, view) in select_views(config.views, &config.elevations, mix_seed(shape_seed, 2)).iter().enumerate() {
            let mut variants = vec![(format!("{v:02}"), tree.clone(), tree_rel.clone())];
            if config.flip {
                let mirrored = mirror_for_view(&tree, view)?;
                let rel = format!("trees/shape_{shape:04}_v{v:02}f.struct");
                write_file(out, &rel, serialize(&mirrored)?.as_bytes())?;
                variants.push((format!("{v:02}f"), mirrored, rel));
            }
            for (view_id, t, rel) in variants {
                let sample = format!("s{shape:04}_v{view_id}");
                let mask_rel = format!("masks/{sample}.immk");
                write_file(out, &mask_rel, &render_mask(&t, view)?.to_binary())?;
                entries.push(ManifestEntry {
                    sample,
                    split: split[shape],
                    shape,
                    category: category.name().to_string(),
                    view: view_id,
                    azimuth: view.azimuth_deg,
                    elevation: view.elevation_deg,
                    mask: mask_rel,
                    tree: rel,
                });
            }
        }
    }
    write_file(out, MANIFEST_FILE, manifest_text(&entries).as_bytes())?;
    Ok(entries)
}

fn write_file(root: &Path, rel: &str, bytes: &[u8]) -> Result<(), DatagenError> {
    let p = root.join(rel);
    write_atomic(&p, bytes).map_err(io_err(&p))
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self, DatagenError> {
        let p = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&p).map_err(io_err(&p))?;
        Ok(Self { root: root.to_path_buf(), entries: parse_manifest(&text)? })
    }

    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn load(&self, entry: &ManifestEntry) -> Result<Sample, DatagenError> {
        let mp = self.root.join(&entry.mask);
        let bytes = std::fs::read(&mp).map_err(io_err(&mp))?;
        let mask = MaskImage::read_any(&bytes).map_err(|e| DatagenError::Sample { path: mp.clone(), message: e.to_string() })?;
        let tp = self.root.join(&entry.tree);
        let text = std::fs::read_to_string(&tp).map_err(io_err(&tp))?;
        let tree = deserialize(&text).map_err(|e| DatagenError::Sample { path: tp.clone(), message: e.to_string() })?;
        Ok(Sample { entry: entry.clone(), mask, tree })
    }

    pub fn load_split(&self, split: Split) -> Result<Vec<Sample>, DatagenError> {
        self.entries_in(split).map(|e| self.load(e)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    #[test]
    fn view_grid_spreads_both_angles() {
        let v = select_views(6, &DEFAULT_ELEVATIONS, 0);
        let az: Vec<f64> = v.iter().map(|v| v.azimuth_deg).collect();
        assert_eq!(az, [0.0, 60.0, 120.0, 180.0, 240.0, 300.0]);
        let el: Vec<f64> = v.iter().map(|v| v.elevation_deg).collect();
        assert_eq!(el, [15.0, 30.0, 45.0, 15.0, 30.0, 45.0]);
        let all = select_views(36, &DEFAULT_ELEVATIONS, 0);
        let distinct: HashSet<(u64, u64)> =
            all.iter().map(|v| (v.azimuth_deg.to_bits(), v.elevation_deg.to_bits())).collect();
        assert_eq!(distinct.len(), 36);
        let more = select_views(40, &DEFAULT_ELEVATIONS, 3);
        assert_eq!(more.len(), 40);
        assert_eq!(&more[..36], &all[..]);
    }

    #[test]
    fn ten_shapes_six_views() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = DatasetConfig { seed: 7, ..Default::default() };
        let entries = build_dataset(&cfg, dir.path()).unwrap();
        assert_eq!(entries.len(), 60);
        let mut by_split: HashMap<Split, HashSet<usize>> = HashMap::new();
        for e in &entries {
            by_split.entry(e.split).or_default().insert(e.shape);
        }
        assert_eq!(by_split[&Split::Train].len(), 7);
        assert_eq!(by_split[&Split::Test].len(), 3);
        assert!(by_split[&Split::Train].is_disjoint(&by_split[&Split::Test]));

        let ds = Dataset::open(dir.path()).unwrap();
        assert_eq!(ds.entries, entries);
        let s = ds.load(&entries[0]).unwrap();
        assert!(s.mask.on_count() > 0);
        assert!(crate::structure::validate(&s.tree).is_empty());
        // persisted files round-trip byte-identically
        assert_eq!(std::fs::read(dir.path().join(&entries[0].mask)).unwrap(), s.mask.to_binary());
        assert_eq!(
            std::fs::read_to_string(dir.path().join(&entries[0].tree)).unwrap(),
            serialize(&s.tree).unwrap()
        );
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = DatasetConfig { shapes: 4, views: 3, seed: 11, flip: true, ..Default::default() };
        build_dataset(&cfg, a.path()).unwrap();
        build_dataset(&cfg, b.path()).unwrap();
        let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
        assert_eq!(read(a.path(), MANIFEST_FILE), read(b.path(), MANIFEST_FILE));
        let ds = Dataset::open(a.path()).unwrap();
        assert_eq!(ds.entries.len(), 24);
        for e in &ds.entries {
            assert_eq!(read(a.path(), &e.mask), read(b.path(), &e.mask));
            assert_eq!(read(a.path(), &e.tree), read(b.path(), &e.tree));
        }
    }

    #[test]
    fn flipped_sample_is_mirror_of_original() {
        // deformation breaks the left-right symmetry of the chair
        let base = sample_template(&TemplateSpec::new(Category::Chair), 3).unwrap();
        let t = deform(&base, 0.3, 1).unwrap();
        let view = View::new(0.0, 30.0);
        let m = mirror_for_view(&t, &view).unwrap();
        let a = render_mask(&t, &view).unwrap();
        let b = render_mask(&m, &view).unwrap();
        assert_ne!(a, a.flipped());
        assert_eq!(a.flipped(), b);
    }

    #[test]
    fn manifest_errors_are_located() {
        let good = manifest_text(&[]);
        assert!(parse_manifest(&good).unwrap().is_empty());
        assert!(matches!(parse_manifest("nope"), Err(DatagenError::Manifest { line: 1, .. })));
        let bad_row = format!("{good}a\ttrain\t0\tchair\t00\t0\t15\tmasks/a.immk\n");
        assert!(matches!(parse_manifest(&bad_row), Err(DatagenError::Manifest { line: 3, .. })));
        let escape = format!("{good}a\ttrain\t0\tchair\t00\t0\t15\t../x.immk\tt.struct\n");
        assert!(parse_manifest(&escape).is_err());
    }

    #[test]
    fn bad_config_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for cfg in [
            DatasetConfig { shapes: 0, ..Default::default() },
            DatasetConfig { categories: vec![], ..Default::default() },
            DatasetConfig { train_fraction: 1.5, ..Default::default() },
        ] {
            assert!(matches!(build_dataset(&cfg, dir.path()), Err(DatagenError::Config(_))));
        }
    }
}
