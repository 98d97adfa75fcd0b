//! Mask encoder: a 56×56 object mask to an 80-D root code.
//!
//! This stands in for a full image pipeline (contour network plus pretrained
//! image features): the input here is the binary mask itself. The network is
//! two 5×5 stride-2 convolutions (8 then 16 channels, tanh) followed by two
//! dense tanh layers, `3136 → 200 → 80`.

mod mask;

use thiserror::Error;

use crate::nn::{ConvShape, Init, NnError, ParamId, ParamSpec, ParamStore, Tape, Var};

pub use mask::{MaskImage, MASK_MAGIC, MASK_SIZE, MASK_VERSION};

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("mask shape: {0}")]
    Shape(String),
    #[error("mask format: {0}")]
    Format(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

const KERNEL: usize = 5;
const CH1: usize = 8;
const CH2: usize = 16;

fn conv1() -> ConvShape {
    ConvShape {
        in_channels: 1,
        out_channels: CH1,
        height: MASK_SIZE,
        width: MASK_SIZE,
        kernel: KERNEL,
        stride: 2,
        pad: 2,
    }
}

fn conv2() -> ConvShape {
    let c1 = conv1();
    ConvShape {
        in_channels: CH1,
        out_channels: CH2,
        height: c1.out_height(),
        width: c1.out_width(),
        kernel: KERNEL,
        stride: 2,
        pad: 2,
    }
}

fn conv_spec(name: &str, s: &ConvShape) -> ParamSpec {
    let taps = s.kernel * s.kernel;
    ParamSpec {
        name: name.into(),
        shape: vec![s.out_channels, s.in_channels, s.kernel, s.kernel],
        init: Init::Uniform { fan_in: s.in_channels * taps, fan_out: s.out_channels * taps },
    }
}

/// The mask network bound to a parameter store.
#[derive(Clone, Debug)]
pub struct MaskEncoder {
    c1: (ParamId, ParamId),
    c2: (ParamId, ParamId),
    fc1: (ParamId, ParamId),
    fc2: (ParamId, ParamId),
}

impl MaskEncoder {
    pub fn specs(code_dim: usize, hidden: usize) -> Vec<ParamSpec> {
        let flat = conv2().output_len();
        vec![
            conv_spec("mask.conv1.w", &conv1()),
            ParamSpec::bias("mask.conv1.b", CH1),
            conv_spec("mask.conv2.w", &conv2()),
            ParamSpec::bias("mask.conv2.b", CH2),
            ParamSpec::matrix("mask.fc1.w", hidden, flat),
            ParamSpec::bias("mask.fc1.b", hidden),
            ParamSpec::matrix("mask.fc2.w", code_dim, hidden),
            ParamSpec::bias("mask.fc2.b", code_dim),
        ]
    }

    pub fn bind(params: &ParamStore) -> Result<Self, EncoderError> {
        let pair = |w: &str, b: &str| -> Result<(ParamId, ParamId), NnError> { Ok((params.id(w)?, params.id(b)?)) };
        Ok(Self {
            c1: pair("mask.conv1.w", "mask.conv1.b")?,
            c2: pair("mask.conv2.w", "mask.conv2.b")?,
            fc1: pair("mask.fc1.w", "mask.fc1.b")?,
            fc2: pair("mask.fc2.w", "mask.fc2.b")?,
        })
    }

    pub fn encode(&self, tape: &mut Tape, mask: &MaskImage) -> Result<Var, EncoderError> {
        let x = tape.input(mask.pixels().to_vec());
        let h = tape.conv2d(self.c1.0, self.c1.1, x, conv1())?;
        let h = tape.tanh(h);
        let h = tape.conv2d(self.c2.0, self.c2.1, h, conv2())?;
        let h = tape.tanh(h);
        let h = tape.affine_tanh(self.fc1.0, self.fc1.1, h)?;
        Ok(tape.affine_tanh(self.fc2.0, self.fc2.1, h)?)
    }
}

/// Root code of one mask.
pub fn encode_mask(params: &ParamStore, mask: &MaskImage) -> Result<Vec<f64>, EncoderError> {
    let e = MaskEncoder::bind(params)?;
    let mut tape = Tape::new(params);
    let v = e.encode(&mut tape, mask)?;
    Ok(tape.value(v).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, init_params, ops, GradCheckConfig};

    fn store() -> ParamStore {
        init_params(&MaskEncoder::specs(80, 200), 42).unwrap()
    }

    #[test]
    fn layer_sizes() {
        assert_eq!((conv1().out_height(), conv1().out_width()), (28, 28));
        assert_eq!(conv2().output_len(), 16 * 14 * 14);
        let p = store();
        assert_eq!(p.shape(p.id("mask.fc1.w").unwrap()), &[200, 3136]);
    }

    #[test]
    fn zero_mask_is_the_bias_path() {
        let p = store();
        let code = encode_mask(&p, &MaskImage::zeros()).unwrap();
        assert_eq!(code.len(), 80);
        assert!(code.iter().all(|v| v.abs() < 1.0));
        // with a zero input every conv output equals its channel bias
        let v = |n: &str| p.value(p.id(n).unwrap()).to_vec();
        let b1: Vec<f64> = v("mask.conv1.b").iter().flat_map(|&b| std::iter::repeat_n(b.tanh(), 784)).collect();
        let c2 = ops::conv2d(&conv2(), &v("mask.conv2.w"), &v("mask.conv2.b"), &b1);
        let c2: Vec<f64> = c2.iter().map(|x| x.tanh()).collect();
        let h = ops::affine_tanh(&v("mask.fc1.w"), &v("mask.fc1.b"), &c2, 200, 3136).unwrap();
        let want = ops::affine_tanh(&v("mask.fc2.w"), &v("mask.fc2.b"), &h, 80, 200).unwrap();
        assert!(code.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut p = store();
        let mask = MaskImage::from_fn(|r, c| (10..40).contains(&r) && (20..30).contains(&c));
        let target: Vec<f64> = (0..80).map(|i| (i as f64 / 40.0) - 1.0).collect();
        let cfg = GradCheckConfig { max_per_tensor: Some(10), floor: 1e-5, seed: 1, ..Default::default() };
        let r = grad_check(&mut p, &cfg, |p, g| {
            let e = MaskEncoder::bind(p)?;
            let mut t = Tape::new(p);
            let c = e.encode(&mut t, &mask)?;
            let l = t.squared_error(c, &target)?;
            if let Some(g) = g {
                t.backward(l, g)?;
            }
            Ok::<_, EncoderError>(t.scalar(l))
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}
