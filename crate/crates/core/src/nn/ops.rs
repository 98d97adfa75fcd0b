//! Dense kernels shared by the tape and by tape-free callers.

use super::NnError;

/// `y = W x + b` with `W` row-major `rows × cols`.
pub fn affine(w: &[f64], b: &[f64], x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(w.len(), rows * cols);
    let mut y = b.to_vec();
    for (r, yr) in y.iter_mut().enumerate() {
        *yr += dot(&w[r * cols..(r + 1) * cols], x);
    }
    y
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators keep the loop vectorizable without reassociating a
    // single running sum
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..a.len() {
        s += a[j] * b[j];
    }
    s
}

/// `tanh(W x + b)` with shape checks.
pub fn affine_tanh(w: &[f64], b: &[f64], x: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>, NnError> {
    if w.len() != rows * cols || b.len() != rows || x.len() != cols {
        return Err(NnError::Shape(format!(
            "affine {rows}x{cols}: weight {}, bias {}, input {}",
            w.len(),
            b.len(),
            x.len()
        )));
    }
    let mut y = affine(w, b, x, rows, cols);
    y.iter_mut().for_each(|v| *v = v.tanh());
    Ok(y)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-log softmax(logits)[target]`, computed as `logsumexp − z_target`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<f64, NnError> {
    if target >= logits.len() {
        return Err(NnError::Shape(format!("class {target} out of range for {} logits", logits.len())));
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    Ok(lse - logits[target])
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Geometry of a zero-padded 2-D convolution over a `[channels, height, width]`
/// tensor with a `[out, in, kernel, kernel]` weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvShape {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    pub fn output_len(&self) -> usize {
        self.out_channels * self.out_height() * self.out_width()
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    /// Taps per output value, `in_channels · kernel²`.
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// For every output position and tap, the input index it reads, or
    /// `None` when the tap falls in the zero padding. Row-major
    /// `[position, (channel, ky, kx)]`.
    fn taps(&self) -> Vec<Option<usize>> {
        let (ho, wo, k) = (self.out_height(), self.out_width(), self.kernel);
        let mut out = Vec::with_capacity(ho * wo * self.patch_len());
        for oy in 0..ho {
            for ox in 0..wo {
                for ic in 0..self.in_channels {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            let inside = iy >= 0 && ix >= 0 && iy < self.height as isize && ix < self.width as isize;
                            out.push(inside.then(|| (ic * self.height + iy as usize) * self.width + ix as usize));
                        }
                    }
                }
            }
        }
        out
    }

    /// Input patches as a `[positions, patch_len]` matrix (im2col).
    fn patches(&self, x: &[f64]) -> Vec<f64> {
        self.taps().iter().map(|t| t.map_or(0.0, |i| x[i])).collect()
    }
}

pub fn conv2d(shape: &ConvShape, w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let (n, positions) = (shape.patch_len(), shape.out_height() * shape.out_width());
    let cols = shape.patches(x);
    let mut y = Vec::with_capacity(shape.output_len());
    for oc in 0..shape.out_channels {
        let wr = &w[oc * n..(oc + 1) * n];
        y.extend((0..positions).map(|p| b[oc] + dot(wr, &cols[p * n..(p + 1) * n])));
    }
    y
}

/// Accumulates weight, bias and input gradients of [`conv2d`].
pub fn conv2d_backward(
    shape: &ConvShape,
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let (n, positions) = (shape.patch_len(), shape.out_height() * shape.out_width());
    let taps = shape.taps();
    let cols: Vec<f64> = taps.iter().map(|t| t.map_or(0.0, |i| x[i])).collect();
    let mut dcols = dx.is_some().then(|| vec![0.0; cols.len()]);
    for oc in 0..shape.out_channels {
        let g = &dy[oc * positions..(oc + 1) * positions];
        db[oc] += g.iter().sum::<f64>();
        let dwr = &mut dw[oc * n..(oc + 1) * n];
        let wr = &w[oc * n..(oc + 1) * n];
        for (p, &gp) in g.iter().enumerate() {
            if gp == 0.0 {
                continue;
            }
            for (d, c) in dwr.iter_mut().zip(&cols[p * n..(p + 1) * n]) {
                *d += gp * c;
            }
            if let Some(dc) = dcols.as_mut() {
                for (d, wi) in dc[p * n..(p + 1) * n].iter_mut().zip(wr) {
                    *d += gp * wi;
                }
            }
        }
    }
    if let (Some(dx), Some(dc)) = (dx, dcols) {
        for (t, g) in taps.iter().zip(dc) {
            if let Some(i) = t {
                dx[*i] += g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_ce_matches_naive_formula() {
        let z = [0.3, -1.2, 2.0];
        let p = softmax(&z);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for t in 0..3 {
            let naive = -(z[t].exp() / z.iter().map(|v: &f64| v.exp()).sum::<f64>()).ln();
            assert!((softmax_cross_entropy(&z, t).unwrap() - naive).abs() < 1e-14);
        }
        assert!(softmax_cross_entropy(&z, 3).is_err());
    }

    #[test]
    fn softmax_ce_survives_large_logits() {
        let ce = softmax_cross_entropy(&[1000.0, 0.0, -1000.0], 0).unwrap();
        assert!(ce.is_finite() && ce.abs() < 1e-12);
        assert!(softmax(&[800.0, 800.0]).iter().all(|p| (p - 0.5).abs() < 1e-15));
    }

    #[test]
    fn affine_tanh_shape_errors() {
        assert!(affine_tanh(&[1.0; 6], &[0.0; 2], &[1.0; 3], 2, 3).is_ok());
        assert!(affine_tanh(&[1.0; 6], &[0.0; 2], &[1.0; 2], 2, 3).is_err());
        assert!(affine_tanh(&[1.0; 5], &[0.0; 2], &[1.0; 3], 2, 3).is_err());
    }

    #[test]
    fn affine_tanh_zero_weights_give_tanh_bias() {
        let y = affine_tanh(&[0.0; 4], &[0.5, -2.0], &[3.0, 4.0], 2, 2).unwrap();
        assert_eq!(y, vec![0.5f64.tanh(), (-2.0f64).tanh()]);
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 2.0]), 0);
    }

    #[test]
    fn conv_matches_direct_sum() {
        let s = ConvShape { in_channels: 2, out_channels: 3, height: 5, width: 4, kernel: 3, stride: 2, pad: 1 };
        assert_eq!((s.out_height(), s.out_width()), (3, 2));
        let w: Vec<f64> = (0..s.weight_len()).map(|i| ((i * 7 % 11) as f64 - 5.0) / 10.0).collect();
        let b = [0.1, -0.2, 0.3];
        let x: Vec<f64> = (0..s.input_len()).map(|i| ((i * 3 % 13) as f64) / 13.0).collect();
        let y = conv2d(&s, &w, &b, &x);
        let at = |c: usize, r: isize, col: isize| {
            if r < 0 || col < 0 || r >= 5 || col >= 4 {
                0.0
            } else {
                x[(c * 5 + r as usize) * 4 + col as usize]
            }
        };
        for oc in 0..3 {
            for oy in 0..3 {
                for ox in 0..2 {
                    let mut acc = b[oc];
                    for ic in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                acc += w[((oc * 2 + ic) * 3 + ky) * 3 + kx]
                                    * at(ic, (oy * 2 + ky) as isize - 1, (ox * 2 + kx) as isize - 1);
                            }
                        }
                    }
                    assert!((y[(oc * 3 + oy) * 2 + ox] - acc).abs() < 1e-14);
                }
            }
        }
    }
}
