//! Layer kernels: forward passes and their reverse-mode derivatives.
//!
//! Activations are rows of a [`Matrix`]; image activations are flattened in
//! channel-major (`C × H × W`) order.

use serde::{Deserialize, Serialize};

use crate::math::{gemm, Matrix, Operand};

/// 3×3, stride 1, zero padding 1: spatial size is preserved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
}

const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

impl ConvGeometry {
    fn positions(&self) -> usize {
        self.height * self.width
    }

    fn patch(&self) -> usize {
        self.in_channels * TAPS
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.positions()
    }

    pub fn output_len(&self) -> usize {
        self.out_channels * self.positions()
    }

    /// `(b·H·W) × (C·9)` patch matrix.
    fn im2col(&self, x: &Matrix) -> Vec<f64> {
        let (h, w) = (self.height as isize, self.width as isize);
        let positions = self.positions();
        let patch = self.patch();
        let mut cols = vec![0.0; x.rows() * positions * patch];
        for s in 0..x.rows() {
            let img = x.row(s);
            for oy in 0..h {
                for ox in 0..w {
                    let p = (oy * w + ox) as usize;
                    let out = &mut cols[(s * positions + p) * patch..][..patch];
                    for c in 0..self.in_channels {
                        let plane = &img[c * positions..(c + 1) * positions];
                        for ky in 0..KERNEL as isize {
                            let iy = oy + ky - 1;
                            if iy < 0 || iy >= h {
                                continue;
                            }
                            for kx in 0..KERNEL as isize {
                                let ix = ox + kx - 1;
                                if ix < 0 || ix >= w {
                                    continue;
                                }
                                out[c * TAPS + (ky * 3 + kx) as usize] =
                                    plane[(iy * w + ix) as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, dcols: &[f64], batch: usize) -> Matrix {
        let (h, w) = (self.height as isize, self.width as isize);
        let positions = self.positions();
        let patch = self.patch();
        let mut dx = Matrix::zeros(batch, self.input_len());
        for s in 0..batch {
            let img = dx.row_mut(s);
            for oy in 0..h {
                for ox in 0..w {
                    let p = (oy * w + ox) as usize;
                    let src = &dcols[(s * positions + p) * patch..][..patch];
                    for c in 0..self.in_channels {
                        for ky in 0..KERNEL as isize {
                            let iy = oy + ky - 1;
                            if iy < 0 || iy >= h {
                                continue;
                            }
                            for kx in 0..KERNEL as isize {
                                let ix = ox + kx - 1;
                                if ix < 0 || ix >= w {
                                    continue;
                                }
                                img[c * positions + (iy * w + ix) as usize] +=
                                    src[c * TAPS + (ky * 3 + kx) as usize];
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl PoolGeometry {
    pub fn out_height(&self) -> usize {
        self.height / 2
    }

    pub fn out_width(&self) -> usize {
        self.width / 2
    }

    pub fn output_len(&self) -> usize {
        self.channels * self.out_height() * self.out_width()
    }

    /// Flat input index of the winning element for every output; ties go to
    /// the first element in row-major window order.
    fn winners(&self, x: &[f64]) -> Vec<usize> {
        let (oh, ow) = (self.out_height(), self.out_width());
        let mut idx = Vec::with_capacity(self.output_len());
        for c in 0..self.channels {
            let base = c * self.height * self.width;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + (2 * oy) * self.width + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let cand = base + (2 * oy + dy) * self.width + 2 * ox + dx;
                        if x[cand] > x[best] {
                            best = cand;
                        }
                    }
                    idx.push(best);
                }
            }
        }
        idx
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Layer {
    /// `y = x Wᵀ + b`, `weight` is `out × in`.
    Dense {
        weight: Matrix,
        bias: Matrix,
    },
    Relu,
    /// `weight` is `out_channels × (in_channels·9)`.
    Conv {
        geom: ConvGeometry,
        weight: Matrix,
        bias: Matrix,
    },
    MaxPool(PoolGeometry),
}

impl Layer {
    pub fn forward(&self, x: &Matrix) -> Matrix {
        match self {
            Layer::Dense { weight, bias } => {
                let mut y = x.matmul_t(weight).expect("dense shapes validated at build");
                let b = bias.as_slice();
                for r in 0..y.rows() {
                    for (v, bv) in y.row_mut(r).iter_mut().zip(b) {
                        *v += bv;
                    }
                }
                y
            }
            Layer::Relu => x.map(|v| if v > 0.0 { v } else { 0.0 }),
            Layer::Conv { geom, weight, bias } => {
                let batch = x.rows();
                let positions = geom.positions();
                let cols = geom.im2col(x);
                let mut out_pos = vec![0.0; batch * positions * geom.out_channels];
                gemm(
                    batch * positions,
                    geom.patch(),
                    geom.out_channels,
                    Operand::raw(&cols, geom.patch(), false),
                    Operand::transposed(weight),
                    &mut out_pos,
                    false,
                );
                let mut y = Matrix::zeros(batch, geom.output_len());
                let b = bias.as_slice();
                for s in 0..batch {
                    let row = y.row_mut(s);
                    for p in 0..positions {
                        let src = &out_pos[(s * positions + p) * geom.out_channels..]
                            [..geom.out_channels];
                        for (o, v) in src.iter().enumerate() {
                            row[o * positions + p] = v + b[o];
                        }
                    }
                }
                y
            }
            Layer::MaxPool(pool) => {
                let mut y = Matrix::zeros(x.rows(), pool.output_len());
                for s in 0..x.rows() {
                    let row = x.row(s);
                    for (out, idx) in y.row_mut(s).iter_mut().zip(pool.winners(row)) {
                        *out = row[idx];
                    }
                }
                y
            }
        }
    }

    /// Given the layer input `x` and `dy = ∂L/∂y`, returns `∂L/∂x` and, when
    /// requested, the parameter gradients in [`Layer::parameters`] order.
    pub fn backward(&self, x: &Matrix, dy: &Matrix, want_params: bool) -> (Matrix, Vec<Matrix>) {
        match self {
            Layer::Dense { weight, .. } => {
                let dx = dy.matmul(weight).expect("dense backward shapes");
                let grads = if want_params {
                    let dw = dy.t_matmul(x).expect("dense weight grad shapes");
                    let db = Matrix::from_parts(1, dy.cols(), dy.column_sums());
                    vec![dw, db]
                } else {
                    Vec::new()
                };
                (dx, grads)
            }
            Layer::Relu => {
                let values = x
                    .as_slice()
                    .iter()
                    .zip(dy.as_slice())
                    .map(|(&xv, &g)| if xv > 0.0 { g } else { 0.0 })
                    .collect();
                (Matrix::from_parts(x.rows(), x.cols(), values), Vec::new())
            }
            Layer::Conv { geom, weight, .. } => {
                let batch = x.rows();
                let positions = geom.positions();
                let oc = geom.out_channels;
                let mut dpos = vec![0.0; batch * positions * oc];
                for s in 0..batch {
                    let row = dy.row(s);
                    for p in 0..positions {
                        let dst = &mut dpos[(s * positions + p) * oc..][..oc];
                        for (o, v) in dst.iter_mut().enumerate() {
                            *v = row[o * positions + p];
                        }
                    }
                }
                let mut dcols = vec![0.0; batch * positions * geom.patch()];
                gemm(
                    batch * positions,
                    oc,
                    geom.patch(),
                    Operand::raw(&dpos, oc, false),
                    Operand::plain(weight),
                    &mut dcols,
                    false,
                );
                let dx = geom.col2im(&dcols, batch);
                let grads = if want_params {
                    let cols = geom.im2col(x);
                    let mut dw = vec![0.0; oc * geom.patch()];
                    gemm(
                        oc,
                        batch * positions,
                        geom.patch(),
                        Operand::raw(&dpos, oc, true),
                        Operand::raw(&cols, geom.patch(), false),
                        &mut dw,
                        false,
                    );
                    let mut db = vec![0.0; oc];
                    for chunk in dpos.chunks_exact(oc) {
                        for (a, v) in db.iter_mut().zip(chunk) {
                            *a += v;
                        }
                    }
                    vec![
                        Matrix::from_parts(oc, geom.patch(), dw),
                        Matrix::from_parts(1, oc, db),
                    ]
                } else {
                    Vec::new()
                };
                (dx, grads)
            }
            Layer::MaxPool(pool) => {
                let mut dx = Matrix::zeros(x.rows(), x.cols());
                for s in 0..x.rows() {
                    let winners = pool.winners(x.row(s));
                    let g = dy.row(s);
                    let out = dx.row_mut(s);
                    for (idx, gv) in winners.into_iter().zip(g) {
                        out[idx] += gv;
                    }
                }
                (dx, Vec::new())
            }
        }
    }

    pub fn parameters(&self) -> Vec<&Matrix> {
        match self {
            Layer::Dense { weight, bias } | Layer::Conv { weight, bias, .. } => vec![weight, bias],
            _ => Vec::new(),
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Layer::Dense { weight, bias } | Layer::Conv { weight, bias, .. } => vec![weight, bias],
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_with_center_tap_is_identity() {
        let geom = ConvGeometry {
            in_channels: 1,
            out_channels: 1,
            height: 3,
            width: 3,
        };
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let layer = Layer::Conv {
            geom,
            weight: Matrix::from_vec(1, 9, w).unwrap(),
            bias: Matrix::zeros(1, 1),
        };
        let x = Matrix::from_vec(1, 9, (0..9).map(f64::from).collect()).unwrap();
        assert_eq!(layer.forward(&x), x);
    }

    #[test]
    fn conv_sums_neighbourhood_with_zero_padding() {
        let geom = ConvGeometry {
            in_channels: 1,
            out_channels: 1,
            height: 2,
            width: 2,
        };
        let layer = Layer::Conv {
            geom,
            weight: Matrix::filled(1, 9, 1.0),
            bias: Matrix::filled(1, 1, 0.5),
        };
        let x = Matrix::from_vec(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        // Every 3×3 window of a 2×2 image covers the whole image.
        assert_eq!(layer.forward(&x).as_slice(), &[10.5; 4]);
    }

    #[test]
    fn pool_picks_maxima_and_routes_gradient() {
        let pool = PoolGeometry {
            channels: 1,
            height: 2,
            width: 3,
        };
        let layer = Layer::MaxPool(pool);
        let x = Matrix::from_vec(1, 6, vec![1.0, 5.0, 9.0, 2.0, 3.0, 9.0]).unwrap();
        let y = layer.forward(&x);
        assert_eq!(y.as_slice(), &[5.0]);
        let (dx, _) = layer.backward(&x, &Matrix::filled(1, 1, 2.0), false);
        assert_eq!(dx.as_slice(), &[0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
