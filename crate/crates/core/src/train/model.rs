use crate::encoder::{MaskEncoder, MaskImage};
use crate::nn::{init_params, Gradients, ParamSpec, ParamStore, Tape};
use crate::rvnn::{Decoders, LossBreakdown, RvnnConfig};
use crate::structure::{StructureNode, StructureTree};

use super::TrainError;

/// Mask encoder plus decoder bundle, bound to one parameter store.
///
/// Parameter groups are `mask` (encoder), `dec` (adjacency, symmetry and
/// box decoders) and `cls` (node classifier).
#[derive(Clone, Debug)]
pub struct Model {
    encoder: MaskEncoder,
    decoders: Decoders,
}

impl Model {
    pub fn specs(cfg: &RvnnConfig) -> Vec<ParamSpec> {
        [MaskEncoder::specs(cfg.code_dim, cfg.hidden), Decoders::specs(cfg)].concat()
    }

    pub fn init(cfg: &RvnnConfig, seed: u64) -> Result<ParamStore, TrainError> {
        Ok(init_params(&Self::specs(cfg), seed)?)
    }

    pub fn bind(params: &ParamStore, cfg: &RvnnConfig) -> Result<Self, TrainError> {
        Ok(Self { encoder: MaskEncoder::bind(params)?, decoders: Decoders::bind(params, cfg)? })
    }

    /// Recovers the network shape from a store's tensors, e.g. a loaded
    /// checkpoint, then binds. Limits and loss weights take their defaults.
    pub fn from_params(params: &ParamStore) -> Result<(Self, RvnnConfig), TrainError> {
        let len = |name: &str| -> Result<usize, TrainError> { Ok(params.value(params.id(name)?).len()) };
        let two_layer = params.contains("dec.box.w1");
        let hidden = if two_layer { len("dec.box.b1")? } else { len("mask.fc1.b")? };
        let cfg = RvnnConfig { code_dim: len("mask.fc2.b")?, hidden, two_layer, ..Default::default() };
        let expected = init_params(&Self::specs(&cfg), 0)?;
        let same = expected.len() == params.len()
            && expected.iter().zip(params.iter()).all(|((_, a), (_, b))| a.name == b.name && a.shape == b.shape);
        if !same {
            return Err(TrainError::Config("parameters do not form a mask-to-structure model".into()));
        }
        Ok((Self::bind(params, &cfg)?, cfg))
    }

    pub fn config(&self) -> &RvnnConfig {
        self.decoders.config()
    }

    /// Teacher-forced loss of one mask/tree pair; with `grads`, parameter
    /// gradients are added into it. The tree is assumed valid.
    pub fn sample_loss(
        &self,
        params: &ParamStore,
        mask: &MaskImage,
        target: &StructureNode,
        grads: Option<&mut Gradients>,
    ) -> Result<LossBreakdown, TrainError> {
        let mut tape = Tape::new(params);
        let code = self.encoder.encode(&mut tape, mask)?;
        let (loss, br) = self.decoders.teacher_forced(&mut tape, code, target)?;
        if let Some(g) = grads {
            tape.backward(loss, g)?;
        }
        Ok(br)
    }

    pub fn root_code(&self, params: &ParamStore, mask: &MaskImage) -> Result<Vec<f64>, TrainError> {
        let mut tape = Tape::new(params);
        let code = self.encoder.encode(&mut tape, mask)?;
        Ok(tape.value(code).to_vec())
    }

    pub fn predict(&self, params: &ParamStore, mask: &MaskImage) -> Result<StructureTree, TrainError> {
        let code = self.root_code(params, mask)?;
        Ok(self.decoders.decode_structure(params, &code)?)
    }
}
