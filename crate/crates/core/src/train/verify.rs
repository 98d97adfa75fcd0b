use crate::datagen::{mix_seed, random_structure, render_mask, View};
use crate::nn::{grad_check, init_params, GradCheckConfig, GradCheckReport, Tape};
use crate::rvnn::{Decoders, RvnnConfig, StructureEncoder};

use super::{Model, TrainError};

/// Finite-difference check of every trainable map at once.
///
/// A random tree of depth at most `max_depth` and its silhouette from a
/// seeded view are decoded twice, once from the mask encoder's code and
/// once from the tree encoder's code; the summed teacher-forced loss is
/// checked against its analytic gradient over mask encoder, tree encoder,
/// all three decoders and the classifier.
pub fn gradient_check_case(
    seed: u64,
    max_depth: usize,
    rvnn: &RvnnConfig,
    check: &GradCheckConfig,
) -> Result<GradCheckReport, TrainError> {
    let tree = random_structure(mix_seed(seed, 1), max_depth);
    let view = View::new((seed % 12) as f64 * 30.0, 15.0 + (seed % 3) as f64 * 15.0);
    let mask = render_mask(&tree, &view)?;
    let specs = [Model::specs(rvnn), StructureEncoder::specs(rvnn)].concat();
    let mut params = init_params(&specs, mix_seed(seed, 2))?;
    let enc = crate::encoder::MaskEncoder::bind(&params)?;
    let aenc = StructureEncoder::bind(&params, rvnn)?;
    let dec = Decoders::bind(&params, rvnn)?;
    let cfg = GradCheckConfig { seed: mix_seed(seed, 3), ..check.clone() };
    grad_check(&mut params, &cfg, |p, g| {
        let mut tape = Tape::new(p);
        let a = enc.encode(&mut tape, &mask)?;
        let (la, _) = dec.teacher_forced(&mut tape, a, &tree.root)?;
        let b = aenc.encode(&mut tape, &tree.root)?;
        let (lb, _) = dec.teacher_forced(&mut tape, b, &tree.root)?;
        let loss = tape.sum(&[la, lb]);
        if let Some(g) = g {
            tape.backward(loss, g)?;
        }
        Ok::<_, TrainError>(tape.scalar(loss))
    })
}
