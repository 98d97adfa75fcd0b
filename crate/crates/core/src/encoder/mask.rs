//! 56×56 object masks and their two file forms.
//!
//! * text: 56 lines of 56 `0`/`1` characters, top row first;
//! * binary (`.immk`): magic `IMMK`, `u32` LE version (1), width, height,
//!   then row-major pixels packed LSB-first, one bit each (on iff ≥ 0.5).

use std::io::{Read, Write};

use super::EncoderError;

pub const MASK_SIZE: usize = 56;
pub const MASK_MAGIC: &[u8; 4] = b"IMMK";
pub const MASK_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct MaskImage {
    pixels: Vec<f64>,
}

impl MaskImage {
    /// Row-major values in `[0, 1]`.
    pub fn new(pixels: Vec<f64>) -> Result<Self, EncoderError> {
        if pixels.len() != MASK_SIZE * MASK_SIZE {
            return Err(EncoderError::Shape(format!(
                "mask has {} pixels, expected {}",
                pixels.len(),
                MASK_SIZE * MASK_SIZE
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(EncoderError::Shape(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { pixels })
    }

    pub fn zeros() -> Self {
        Self { pixels: vec![0.0; MASK_SIZE * MASK_SIZE] }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut pixels = Vec::with_capacity(MASK_SIZE * MASK_SIZE);
        for r in 0..MASK_SIZE {
            for c in 0..MASK_SIZE {
                pixels.push(if f(r, c) { 1.0 } else { 0.0 });
            }
        }
        Self { pixels }
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * MASK_SIZE + col]
    }

    pub fn on_count(&self) -> usize {
        self.pixels.iter().filter(|&&v| v >= 0.5).count()
    }

    /// Left-right mirror image.
    pub fn flipped(&self) -> Self {
        let mut pixels = self.pixels.clone();
        for row in pixels.chunks_mut(MASK_SIZE) {
            row.reverse();
        }
        Self { pixels }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(MASK_SIZE * (MASK_SIZE + 1));
        for row in self.pixels.chunks(MASK_SIZE) {
            s.extend(row.iter().map(|&v| if v >= 0.5 { '1' } else { '0' }));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, EncoderError> {
        let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        if rows.len() != MASK_SIZE {
            return Err(EncoderError::Format(format!("{} rows, expected {MASK_SIZE}", rows.len())));
        }
        let mut pixels = Vec::with_capacity(MASK_SIZE * MASK_SIZE);
        for (i, row) in rows.iter().enumerate() {
            if row.chars().count() != MASK_SIZE {
                return Err(EncoderError::Format(format!("row {} has {} columns", i + 1, row.chars().count())));
            }
            for ch in row.chars() {
                pixels.push(match ch {
                    '0' => 0.0,
                    '1' => 1.0,
                    _ => return Err(EncoderError::Format(format!("row {}: unexpected character {ch:?}", i + 1))),
                });
            }
        }
        Ok(Self { pixels })
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MASK_MAGIC)?;
        for v in [MASK_VERSION, MASK_SIZE as u32, MASK_SIZE as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut bytes = vec![0u8; self.pixels.len().div_ceil(8)];
        for (i, &v) in self.pixels.iter().enumerate() {
            if v >= 0.5 {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&bytes)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_binary(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, EncoderError> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header).map_err(|_| EncoderError::Format("truncated header".into()))?;
        if &header[..4] != MASK_MAGIC {
            return Err(EncoderError::Format("bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[4 * i..4 * i + 4].try_into().unwrap());
        if word(1) != MASK_VERSION {
            return Err(EncoderError::Format(format!("unsupported version {}", word(1))));
        }
        let (w, h) = (word(2) as usize, word(3) as usize);
        if w != MASK_SIZE || h != MASK_SIZE {
            return Err(EncoderError::Shape(format!("mask is {w}x{h}, expected {MASK_SIZE}x{MASK_SIZE}")));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| EncoderError::Format(e.to_string()))?;
        let n = w * h;
        if bytes.len() != n.div_ceil(8) {
            return Err(EncoderError::Format(format!("expected {} pixel bytes, found {}", n.div_ceil(8), bytes.len())));
        }
        let pixels = (0..n).map(|i| f64::from(bytes[i / 8] >> (i % 8) & 1)).collect();
        Ok(Self { pixels })
    }

    /// Reads either form, sniffing the binary magic.
    pub fn read_any(bytes: &[u8]) -> Result<Self, EncoderError> {
        if bytes.starts_with(MASK_MAGIC) {
            Self::read_binary(bytes)
        } else {
            let text = std::str::from_utf8(bytes).map_err(|_| EncoderError::Format("not UTF-8 text".into()))?;
            Self::from_text(text)
        }
    }
}
