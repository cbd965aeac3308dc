//! Strided 1-D/2-D convolution as a closed family of three bilinear maps.
//!
//! With `y = conv(x, k)`, the input adjoint `dx = A(dy, k)` and the kernel
//! adjoint `dk = K(x, dy)` are the other two faces of one trilinear form,
//! so each face differentiates into the remaining ones. This keeps
//! convolutions differentiable to any order, and the transposed convolution
//! is simply the input-adjoint face.

use std::rc::Rc;

use super::graph::{Graph, NodeId, Op};
use super::scalar::{gemm, MatRef, Scalar};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// `y[b, oy, ox, co] = Σ x[b, oy·sh + i − pt, ox·sw + j − pl, ci] · k[i, j, ci, co]`,
/// reading zeros outside `x`. A 1-D convolution is the `h = 1` case.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ConvGeom {
    batch: usize,
    hx: usize,
    wx: usize,
    cx: usize,
    hy: usize,
    wy: usize,
    cy: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    pt: isize,
    pl: isize,
    x_shape: Vec<usize>,
    y_shape: Vec<usize>,
    k_shape: Vec<usize>,
}

impl ConvGeom {
    #[allow(clippy::too_many_arguments)]
    fn new_1d(batch: usize, lx: usize, cx: usize, ly: usize, cy: usize, kw: usize, stride: usize, pl: isize) -> Self {
        Self {
            batch,
            hx: 1,
            wx: lx,
            cx,
            hy: 1,
            wy: ly,
            cy,
            kh: 1,
            kw,
            sh: 1,
            sw: stride,
            pt: 0,
            pl,
            x_shape: vec![batch, lx, cx],
            y_shape: vec![batch, ly, cy],
            k_shape: vec![kw, cx, cy],
        }
    }

    fn rows(&self) -> usize {
        self.hy * self.wy
    }

    fn kcols(&self) -> usize {
        self.kh * self.kw * self.cx
    }

    fn x_item(&self) -> usize {
        self.hx * self.wx * self.cx
    }

    fn y_item(&self) -> usize {
        self.hy * self.wy * self.cy
    }

    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let kc = self.kcols();
        let cx = self.cx;
        for oy in 0..self.hy {
            for ox in 0..self.wy {
                let row = &mut cols[(oy * self.wy + ox) * kc..][..kc];
                for i in 0..self.kh {
                    let iy = (oy * self.sh) as isize + i as isize - self.pt;
                    for j in 0..self.kw {
                        let ix = (ox * self.sw) as isize + j as isize - self.pl;
                        let dst = &mut row[(i * self.kw + j) * cx..][..cx];
                        if iy < 0 || iy >= self.hx as isize || ix < 0 || ix >= self.wx as isize {
                            dst.iter_mut().for_each(|v| *v = T::zero());
                        } else {
                            let src = (iy as usize * self.wx + ix as usize) * cx;
                            dst.copy_from_slice(&x[src..src + cx]);
                        }
                    }
                }
            }
        }
    }

    fn col2im_add<T: Scalar>(&self, cols: &[T], x: &mut [T]) {
        let kc = self.kcols();
        let cx = self.cx;
        for oy in 0..self.hy {
            for ox in 0..self.wy {
                let row = &cols[(oy * self.wy + ox) * kc..][..kc];
                for i in 0..self.kh {
                    let iy = (oy * self.sh) as isize + i as isize - self.pt;
                    if iy < 0 || iy >= self.hx as isize {
                        continue;
                    }
                    for j in 0..self.kw {
                        let ix = (ox * self.sw) as isize + j as isize - self.pl;
                        if ix < 0 || ix >= self.wx as isize {
                            continue;
                        }
                        let dst = (iy as usize * self.wx + ix as usize) * cx;
                        for (d, &s) in x[dst..dst + cx].iter_mut().zip(&row[(i * self.kw + j) * cx..][..cx]) {
                            *d = *d + s;
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Face {
    /// (x, k) → y
    Forward,
    /// (dy, k) → dx
    InputAdjoint,
    /// (x, dy) → dk
    KernelAdjoint,
}

struct ConvFace {
    face: Face,
    geom: Rc<ConvGeom>,
}

impl<T: Scalar> Op<T> for ConvFace {
    fn name(&self) -> &'static str {
        match self.face {
            Face::Forward => "conv",
            Face::InputAdjoint => "conv_input_adjoint",
            Face::KernelAdjoint => "conv_kernel_adjoint",
        }
    }

    fn backward(&self, g: &mut Graph<T>, inp: &[NodeId], _: NodeId, u: NodeId, needs: &[bool]) -> Result<Vec<Option<NodeId>>> {
        let geom = &self.geom;
        let (a, b) = (inp[0], inp[1]);
        let (first, second) = match self.face {
            Face::Forward => (
                needs[0].then(|| g.conv_face(Face::InputAdjoint, geom, u, b)),
                needs[1].then(|| g.conv_face(Face::KernelAdjoint, geom, a, u)),
            ),
            Face::InputAdjoint => (
                needs[0].then(|| g.conv_face(Face::Forward, geom, u, b)),
                needs[1].then(|| g.conv_face(Face::KernelAdjoint, geom, u, a)),
            ),
            Face::KernelAdjoint => (
                needs[0].then(|| g.conv_face(Face::InputAdjoint, geom, b, u)),
                needs[1].then(|| g.conv_face(Face::Forward, geom, a, u)),
            ),
        };
        Ok(vec![first.transpose()?, second.transpose()?])
    }
}

/// Padding `(left, right)` so that a stride-`s` convolution yields `ceil(len/s)` outputs.
pub fn same_padding(len: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = len.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(len);
    (total / 2, total - total / 2)
}

/// Output length of a padded strided 1-D convolution, if the geometry is valid.
pub fn conv1d_out_len(len: usize, kernel: usize, stride: usize, pad: (usize, usize)) -> Option<usize> {
    let padded = len + pad.0 + pad.1;
    (stride > 0 && kernel > 0 && padded >= kernel).then(|| (padded - kernel) / stride + 1)
}

impl<T: Scalar> Graph<T> {
    fn conv_face(&mut self, face: Face, geom: &Rc<ConvGeom>, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb, out_shape) = match face {
            Face::Forward => (&geom.x_shape, &geom.k_shape, &geom.y_shape),
            Face::InputAdjoint => (&geom.y_shape, &geom.k_shape, &geom.x_shape),
            Face::KernelAdjoint => (&geom.x_shape, &geom.y_shape, &geom.k_shape),
        };
        if self.shape(a) != &sa[..] || self.shape(b) != &sb[..] {
            return Err(Error::Dimension(format!(
                "convolution operands {:?} and {:?}, expected {sa:?} and {sb:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let (rows, kc, cy) = (geom.rows(), geom.kcols(), geom.cy);
        let (xi, yi) = (geom.x_item(), geom.y_item());
        let mut out = vec![T::zero(); out_shape.iter().product()];
        let mut cols = vec![T::zero(); rows * kc];
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        for n in 0..geom.batch {
            match face {
                Face::Forward => {
                    geom.im2col(&va[n * xi..][..xi], &mut cols);
                    gemm(MatRef::new(&cols, rows, kc), MatRef::new(vb, kc, cy), &mut out[n * yi..][..yi], false);
                }
                Face::InputAdjoint => {
                    gemm(MatRef::new(&va[n * yi..][..yi], rows, cy), MatRef::new(vb, kc, cy).t(), &mut cols, false);
                    geom.col2im_add(&cols, &mut out[n * xi..][..xi]);
                }
                Face::KernelAdjoint => {
                    geom.im2col(&va[n * xi..][..xi], &mut cols);
                    gemm(MatRef::new(&cols, rows, kc).t(), MatRef::new(&vb[n * yi..][..yi], rows, cy), &mut out, true);
                }
            }
        }
        let v = Tensor::new(out_shape.clone(), out)?;
        let op = ConvFace {
            face,
            geom: geom.clone(),
        };
        Ok(self.push(v, Rc::new(op), vec![a, b]))
    }

    /// Cross-correlation of `x [b, L, c_in]` with `kernel [k, c_in, c_out]`.
    pub fn conv1d(&mut self, x: NodeId, kernel: NodeId, stride: usize, pad: (usize, usize)) -> Result<NodeId> {
        let (xs, ks) = (self.shape(x).to_vec(), self.shape(kernel).to_vec());
        if xs.len() != 3 || ks.len() != 3 || xs[2] != ks[1] {
            return Err(Error::Dimension(format!("conv1d input {xs:?} incompatible with kernel {ks:?}")));
        }
        let ly = conv1d_out_len(xs[1], ks[0], stride, pad).ok_or_else(|| {
            Error::Dimension(format!(
                "conv1d: length {} with padding {pad:?} is shorter than kernel {} (stride {stride})",
                xs[1], ks[0]
            ))
        })?;
        let geom = ConvGeom::new_1d(xs[0], xs[1], xs[2], ly, ks[2], ks[0], stride, pad.0 as isize);
        self.conv_face(Face::Forward, &Rc::new(geom), x, kernel)
    }

    /// Transposed convolution of `x [b, L, c_in]` with `kernel [k, c_in, c_out]`:
    /// zero-insert by `stride`, full convolution, then centre-crop to `L·stride`
    /// (the odd sample of an uneven crop is dropped on the right).
    pub fn tconv1d(&mut self, x: NodeId, kernel: NodeId, stride: usize) -> Result<NodeId> {
        let (xs, ks) = (self.shape(x).to_vec(), self.shape(kernel).to_vec());
        if xs.len() != 3 || ks.len() != 3 || xs[2] != ks[1] || stride == 0 {
            return Err(Error::Dimension(format!(
                "tconv1d input {xs:?} incompatible with kernel {ks:?} (stride {stride})"
            )));
        }
        let crop_left = (ks[0] as isize - stride as isize).div_euclid(2);
        let geom = ConvGeom::new_1d(xs[0], xs[1] * stride, ks[2], xs[1], xs[2], ks[0], stride, crop_left);
        let kt = self.transpose_last2(kernel)?;
        self.conv_face(Face::InputAdjoint, &Rc::new(geom), x, kt)
    }

    /// Stride-1 "same" cross-correlation of `x [b, H, W, c_in]` with `kernel [kh, kw, c_in, c_out]`.
    pub fn conv2d_same(&mut self, x: NodeId, kernel: NodeId) -> Result<NodeId> {
        let (xs, ks) = (self.shape(x).to_vec(), self.shape(kernel).to_vec());
        if xs.len() != 4 || ks.len() != 4 || xs[3] != ks[2] {
            return Err(Error::Dimension(format!("conv2d input {xs:?} incompatible with kernel {ks:?}")));
        }
        let (b, h, w) = (xs[0], xs[1], xs[2]);
        let geom = ConvGeom {
            batch: b,
            hx: h,
            wx: w,
            cx: xs[3],
            hy: h,
            wy: w,
            cy: ks[3],
            kh: ks[0],
            kw: ks[1],
            sh: 1,
            sw: 1,
            pt: ((ks[0] - 1) / 2) as isize,
            pl: ((ks[1] - 1) / 2) as isize,
            x_shape: xs.clone(),
            y_shape: vec![b, h, w, ks[3]],
            k_shape: ks,
        };
        self.conv_face(Face::Forward, &Rc::new(geom), x, kernel)
    }

    /// Non-overlapping max pooling of `x [b, H, W, c]` with window = stride
    /// `(ph, pw)`; ties route the gradient to the first maximum.
    pub fn maxpool2d(&mut self, x: NodeId, ph: usize, pw: usize) -> Result<NodeId> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 4 || ph == 0 || pw == 0 || xs[1] < ph || xs[2] < pw {
            return Err(Error::Dimension(format!("maxpool ({ph},{pw}) does not fit input {xs:?}")));
        }
        let (b, h, w, c) = (xs[0], xs[1], xs[2], xs[3]);
        let (ho, wo) = (h / ph, w / pw);
        let data = self.value(x).data();
        let mut idx = Vec::with_capacity(b * ho * wo * c);
        for n in 0..b {
            for oy in 0..ho {
                for ox in 0..wo {
                    for ch in 0..c {
                        let mut best = usize::MAX;
                        for i in 0..ph {
                            for j in 0..pw {
                                let k = ((n * h + oy * ph + i) * w + ox * pw + j) * c + ch;
                                if best == usize::MAX || data[k] > data[best] {
                                    best = k;
                                }
                            }
                        }
                        idx.push(best);
                    }
                }
            }
        }
        self.gather(x, Rc::new(idx), &[b, ho, wo, c])
    }
}
