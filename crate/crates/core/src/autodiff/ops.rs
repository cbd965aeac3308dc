//! Elementwise, reduction, matrix and index operations.

use std::rc::Rc;

use rand::Rng;

use super::graph::{Graph, NodeId, Op};
use super::scalar::{gemm, MatRef, Scalar};
use super::tensor::Tensor;
use crate::error::{Error, Result};

fn same_shape<T: Scalar>(g: &Graph<T>, a: NodeId, b: NodeId, what: &str) -> Result<()> {
    if g.shape(a) != g.shape(b) {
        return Err(Error::Dimension(format!(
            "{what}: shapes {:?} and {:?} differ",
            g.shape(a),
            g.shape(b)
        )));
    }
    Ok(())
}

fn zip_map<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

struct Add;
impl<T: Scalar> Op<T> for Add {
    fn name(&self) -> &'static str {
        "add"
    }
    fn backward(&self, _: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        Ok(vec![Some(u), Some(u)])
    }
}

struct Sub;
impl<T: Scalar> Op<T> for Sub {
    fn name(&self) -> &'static str {
        "sub"
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, needs: &[bool]) -> Result<Vec<Option<NodeId>>> {
        let db = if needs[1] { Some(g.scale(u, -T::one())) } else { None };
        Ok(vec![Some(u), db])
    }
}

struct Mul;
impl<T: Scalar> Op<T> for Mul {
    fn name(&self) -> &'static str {
        "mul"
    }
    fn backward(&self, g: &mut Graph<T>, inp: &[NodeId], _: NodeId, u: NodeId, needs: &[bool]) -> Result<Vec<Option<NodeId>>> {
        let da = if needs[0] { Some(g.mul(u, inp[1])?) } else { None };
        let db = if needs[1] { Some(g.mul(u, inp[0])?) } else { None };
        Ok(vec![da, db])
    }
}

struct Scale<T>(T);
impl<T: Scalar> Op<T> for Scale<T> {
    fn name(&self) -> &'static str {
        "scale"
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        Ok(vec![Some(g.scale(u, self.0))])
    }
}

struct AddScalar;
impl<T: Scalar> Op<T> for AddScalar {
    fn name(&self) -> &'static str {
        "add_scalar"
    }
    fn backward(&self, _: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        Ok(vec![Some(u)])
    }
}

/// Multiply by a fixed derivative factor computed in the forward pass.
/// Exact to first order; the factor itself is treated as constant.
struct LocalDerivative<T: Scalar>(Rc<Tensor<T>>, &'static str);
impl<T: Scalar> Op<T> for LocalDerivative<T> {
    fn name(&self) -> &'static str {
        self.1
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        let d = g.constant((*self.0).clone());
        Ok(vec![Some(g.mul(u, d)?)])
    }
}

/// Repeat a tensor over leading axes (or a length-1 tensor everywhere).
struct BroadcastTo(Vec<usize>);
impl<T: Scalar> Op<T> for BroadcastTo {
    fn name(&self) -> &'static str {
        "broadcast_to"
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        Ok(vec![Some(g.sum_to(u, &self.0)?)])
    }
}

struct SumTo(Vec<usize>);
impl<T: Scalar> Op<T> for SumTo {
    fn name(&self) -> &'static str {
        "sum_to"
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        Ok(vec![Some(g.broadcast_to(u, &self.0)?)])
    }
}

struct SumLast(Vec<usize>);
impl<T: Scalar> Op<T> for SumLast {
    fn name(&self) -> &'static str {
        "sum_last"
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        let n = *self.0.last().expect("rank ≥ 1");
        let e = g.expand_last(u, n);
        Ok(vec![Some(g.reshape(e, &self.0)?)])
    }
}

struct ExpandLast;
impl<T: Scalar> Op<T> for ExpandLast {
    fn name(&self) -> &'static str {
        "expand_last"
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        Ok(vec![Some(g.sum_last(u)?)])
    }
}

struct Reshape(Vec<usize>);
impl<T: Scalar> Op<T> for Reshape {
    fn name(&self) -> &'static str {
        "reshape"
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        Ok(vec![Some(g.reshape(u, &self.0)?)])
    }
}

struct MatMul {
    ta: bool,
    tb: bool,
}
impl<T: Scalar> Op<T> for MatMul {
    fn name(&self) -> &'static str {
        "matmul"
    }
    fn backward(&self, g: &mut Graph<T>, inp: &[NodeId], _: NodeId, u: NodeId, needs: &[bool]) -> Result<Vec<Option<NodeId>>> {
        let (a, b) = (inp[0], inp[1]);
        let da = if needs[0] {
            Some(match (self.ta, self.tb) {
                (false, false) => g.matmul_t(u, b, false, true)?,
                (true, false) => g.matmul_t(b, u, false, true)?,
                (false, true) => g.matmul_t(u, b, false, false)?,
                (true, true) => g.matmul_t(b, u, true, true)?,
            })
        } else {
            None
        };
        let db = if needs[1] {
            Some(match (self.ta, self.tb) {
                (false, false) => g.matmul_t(a, u, true, false)?,
                (true, false) => g.matmul_t(a, u, false, false)?,
                (false, true) => g.matmul_t(u, a, true, false)?,
                (true, true) => g.matmul_t(u, a, true, true)?,
            })
        } else {
            None
        };
        Ok(vec![da, db])
    }
}

/// `out[i] = x[idx[i]]`.
struct Gather {
    idx: Rc<Vec<usize>>,
    in_shape: Vec<usize>,
}
impl<T: Scalar> Op<T> for Gather {
    fn name(&self) -> &'static str {
        "gather"
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        Ok(vec![Some(g.scatter_add(u, self.idx.clone(), &self.in_shape)?)])
    }
}

/// `out[idx[i]] += x[i]`.
struct ScatterAdd {
    idx: Rc<Vec<usize>>,
    in_shape: Vec<usize>,
}
impl<T: Scalar> Op<T> for ScatterAdd {
    fn name(&self) -> &'static str {
        "scatter_add"
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        Ok(vec![Some(g.gather(u, self.idx.clone(), &self.in_shape)?)])
    }
}

struct SoftmaxCrossEntropy<T: Scalar> {
    /// (softmax − onehot) / batch
    dlogits: Rc<Tensor<T>>,
}
impl<T: Scalar> Op<T> for SoftmaxCrossEntropy<T> {
    fn name(&self) -> &'static str {
        "softmax_cross_entropy"
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], _: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        let shape = self.dlogits.shape().to_vec();
        let ub = g.broadcast_to(u, &shape)?;
        let d = g.constant((*self.dlogits).clone());
        Ok(vec![Some(g.mul(ub, d)?)])
    }
}

struct Softmax;
impl<T: Scalar> Op<T> for Softmax {
    fn name(&self) -> &'static str {
        "softmax"
    }
    fn backward(&self, g: &mut Graph<T>, _: &[NodeId], out: NodeId, u: NodeId, _: &[bool]) -> Result<Vec<Option<NodeId>>> {
        // dx = y ⊙ (u − Σ_last(u ⊙ y))
        let n = *g.shape(out).last().expect("rank ≥ 1");
        let y = g.constant(g.value(out).clone());
        let uy = g.mul(u, y)?;
        let s = g.sum_last(uy)?;
        let s = g.expand_last(s, n);
        let centered = g.sub(u, s)?;
        Ok(vec![Some(g.mul(centered, y)?)])
    }
}

/// Numerically stable softmax over the last axis of a row-major buffer.
pub fn softmax_rows<T: Scalar>(data: &[T], n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for row in data.chunks(n) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let e: Vec<T> = row.iter().map(|&v| (v - m).exp()).collect();
        let s: T = e.iter().copied().sum();
        out.extend(e.into_iter().map(|v| v / s));
    }
    out
}

impl<T: Scalar> Graph<T> {
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        same_shape(self, a, b, "add")?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(v, Rc::new(Add), vec![a, b]))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        same_shape(self, a, b, "sub")?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(v, Rc::new(Sub), vec![a, b]))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        same_shape(self, a, b, "mul")?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(v, Rc::new(Mul), vec![a, b]))
    }

    pub fn scale(&mut self, a: NodeId, c: T) -> NodeId {
        let v = self.value(a).map(|x| x * c);
        self.push(v, Rc::new(Scale(c)), vec![a])
    }

    pub fn add_scalar(&mut self, a: NodeId, c: T) -> NodeId {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Rc::new(AddScalar), vec![a])
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.mul(a, a).expect("same node")
    }

    /// Square root whose derivative at 0 is taken as 0.
    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let y = self.value(a).map(|x| x.max(T::zero()).sqrt());
        let half = T::from_f64_lossy(0.5);
        let d = y.map(|v| if v > T::zero() { half / v } else { T::zero() });
        self.push(y, Rc::new(LocalDerivative(Rc::new(d), "sqrt")), vec![a])
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let y = self.value(a).map(|x| x.tanh());
        let d = y.map(|v| T::one() - v * v);
        self.push(y, Rc::new(LocalDerivative(Rc::new(d), "tanh")), vec![a])
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let y = self.value(a).map(|x| T::one() / (T::one() + (-x).exp()));
        let d = y.map(|v| v * (T::one() - v));
        self.push(y, Rc::new(LocalDerivative(Rc::new(d), "sigmoid")), vec![a])
    }

    /// Elementwise product with a fixed mask; exact to every order.
    fn mask(&mut self, a: NodeId, mask: Tensor<T>) -> Result<NodeId> {
        let m = self.constant(mask);
        self.mul(a, m)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.leaky_relu(a, T::zero())
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: T) -> NodeId {
        let mask = self.value(a).map(|x| if x > T::zero() { T::one() } else { slope });
        self.mask(a, mask).expect("mask shape")
    }

    /// Inverted dropout: zero with probability `rate`, scale survivors by
    /// `1/(1−rate)`. Identity when not training.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: NodeId, rate: f64, training: bool, rng: &mut R) -> Result<NodeId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Parameter(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
        let mask = Tensor::from_fn(self.shape(a), |_| if rng.gen::<f64>() < rate { T::zero() } else { keep });
        self.mask(a, mask)
    }

    /// Dropout with a caller-supplied mask (already scaled).
    pub fn dropout_with_mask(&mut self, a: NodeId, mask: Tensor<T>) -> Result<NodeId> {
        if mask.shape() != self.shape(a) {
            return Err(Error::Dimension("dropout mask shape".into()));
        }
        self.mask(a, mask)
    }

    /// Repeat `a` over the leading axes of `shape`. `a` must match the
    /// trailing axes of `shape`, or hold a single element.
    pub fn broadcast_to(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let src = self.shape(a).to_vec();
        let total: usize = shape.iter().product();
        let v = if src.iter().product::<usize>() == 1 {
            Tensor::full(shape, self.value(a).item())
        } else if src.len() <= shape.len() && shape[shape.len() - src.len()..] == src[..] {
            let inner = self.value(a).data();
            let data = inner.iter().copied().cycle().take(total).collect();
            Tensor::new(shape.to_vec(), data)?
        } else {
            return Err(Error::Dimension(format!("cannot broadcast {src:?} to {shape:?}")));
        };
        Ok(self.push(v, Rc::new(BroadcastTo(src)), vec![a]))
    }

    /// Sum over leading axes down to `shape` (adjoint of `broadcast_to`).
    pub fn sum_to(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let src = self.shape(a).to_vec();
        let inner: usize = shape.iter().product();
        let scalar = inner == 1;
        if !scalar && !(shape.len() <= src.len() && src[src.len() - shape.len()..] == shape[..]) {
            return Err(Error::Dimension(format!("cannot sum {src:?} to {shape:?}")));
        }
        let mut out = vec![T::zero(); inner];
        for chunk in self.value(a).data().chunks(inner) {
            for (o, &v) in out.iter_mut().zip(chunk) {
                *o = *o + v;
            }
        }
        let v = Tensor::new(shape.to_vec(), out)?;
        Ok(self.push(v, Rc::new(SumTo(src)), vec![a]))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        self.sum_to(a, &[1]).expect("scalar target")
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).len();
        let s = self.sum_all(a);
        self.scale(s, T::one() / T::from_usize(n).expect("count"))
    }

    /// Sum over the last axis, dropping it.
    pub fn sum_last(&mut self, a: NodeId) -> Result<NodeId> {
        let shape = self.shape(a).to_vec();
        let (&n, lead) = shape.split_last().ok_or_else(|| Error::Dimension("sum_last of rank-0".into()))?;
        let data: Vec<T> = self.value(a).data().chunks(n).map(|c| c.iter().copied().sum()).collect();
        let out_shape = if lead.is_empty() { vec![1] } else { lead.to_vec() };
        let v = Tensor::new(out_shape, data)?;
        Ok(self.push(v, Rc::new(SumLast(shape)), vec![a]))
    }

    /// Append an axis of length `n`, repeating each value.
    pub fn expand_last(&mut self, a: NodeId, n: usize) -> NodeId {
        let mut shape = self.shape(a).to_vec();
        shape.push(n);
        let data = self.value(a).data().iter().flat_map(|&v| std::iter::repeat(v).take(n)).collect();
        let v = Tensor::new(shape, data).expect("expand shape");
        self.push(v, Rc::new(ExpandLast), vec![a])
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let src = self.shape(a).to_vec();
        let v = self.value(a).clone().reshaped(shape)?;
        Ok(self.push(v, Rc::new(Reshape(src)), vec![a]))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.matmul_t(a, b, false, false)
    }

    /// `op(a)·op(b)` for rank-2 operands, `op` being an optional transpose.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId, ta: bool, tb: bool) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 {
            return Err(Error::Dimension(format!("matmul needs rank-2 operands, got {sa:?} and {sb:?}")));
        }
        let (m, ka) = if ta { (sa[1], sa[0]) } else { (sa[0], sa[1]) };
        let (kb, n) = if tb { (sb[1], sb[0]) } else { (sb[0], sb[1]) };
        if ka != kb {
            return Err(Error::Dimension(format!(
                "matmul inner dimensions differ: {sa:?}{} × {sb:?}{}",
                if ta { "ᵀ" } else { "" },
                if tb { "ᵀ" } else { "" }
            )));
        }
        let mut out = vec![T::zero(); m * n];
        let mut ma = MatRef::new(self.value(a).data(), sa[0], sa[1]);
        let mut mb = MatRef::new(self.value(b).data(), sb[0], sb[1]);
        if ta {
            ma = ma.t();
        }
        if tb {
            mb = mb.t();
        }
        gemm(ma, mb, &mut out, false);
        let v = Tensor::new(vec![m, n], out)?;
        Ok(self.push(v, Rc::new(MatMul { ta, tb }), vec![a, b]))
    }

    /// `out[i] = a[idx[i]]`, reshaped to `out_shape`.
    pub fn gather(&mut self, a: NodeId, idx: Rc<Vec<usize>>, out_shape: &[usize]) -> Result<NodeId> {
        let src = self.value(a);
        if out_shape.iter().product::<usize>() != idx.len() {
            return Err(Error::Dimension("gather index count does not match output shape".into()));
        }
        if idx.iter().any(|&i| i >= src.len()) {
            return Err(Error::Dimension("gather index out of range".into()));
        }
        let data = idx.iter().map(|&i| src.data()[i]).collect();
        let in_shape = src.shape().to_vec();
        let v = Tensor::new(out_shape.to_vec(), data)?;
        Ok(self.push(v, Rc::new(Gather { idx, in_shape }), vec![a]))
    }

    /// `out[idx[i]] += a[i]` into a zero tensor of `out_shape`.
    pub fn scatter_add(&mut self, a: NodeId, idx: Rc<Vec<usize>>, out_shape: &[usize]) -> Result<NodeId> {
        let n: usize = out_shape.iter().product();
        let src = self.value(a);
        if src.len() != idx.len() || idx.iter().any(|&i| i >= n) {
            return Err(Error::Dimension("scatter index mismatch".into()));
        }
        let mut out = vec![T::zero(); n];
        for (&i, &v) in idx.iter().zip(src.data()) {
            out[i] = out[i] + v;
        }
        let in_shape = src.shape().to_vec();
        let v = Tensor::new(out_shape.to_vec(), out)?;
        Ok(self.push(v, Rc::new(ScatterAdd { idx, in_shape }), vec![a]))
    }

    /// Swap the last two axes.
    pub fn transpose_last2(&mut self, a: NodeId) -> Result<NodeId> {
        let shape = self.shape(a).to_vec();
        if shape.len() < 2 {
            return Err(Error::Dimension("transpose needs rank ≥ 2".into()));
        }
        let r = shape.len();
        let (p, q) = (shape[r - 2], shape[r - 1]);
        let lead: usize = shape[..r - 2].iter().product();
        let mut idx = Vec::with_capacity(lead * p * q);
        for l in 0..lead {
            for j in 0..q {
                for i in 0..p {
                    idx.push(l * p * q + i * q + j);
                }
            }
        }
        let mut out_shape = shape.clone();
        out_shape.swap(r - 2, r - 1);
        self.gather(a, Rc::new(idx), &out_shape)
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let shape = self.shape(a).to_vec();
        let n = *shape.last().ok_or_else(|| Error::Dimension("softmax of rank-0".into()))?;
        let v = Tensor::new(shape, softmax_rows(self.value(a).data(), n))?;
        Ok(self.push(v, Rc::new(Softmax), vec![a]))
    }

    /// Mean categorical cross-entropy of `logits [b, n]` against integer
    /// labels, via a fused log-softmax.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let shape = self.shape(logits).to_vec();
        if shape.len() != 2 || shape[0] != labels.len() {
            return Err(Error::Dimension(format!(
                "cross-entropy expects logits [batch, classes] with {} rows, got {shape:?}",
                labels.len()
            )));
        }
        let (b, n) = (shape[0], shape[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= n) {
            return Err(Error::Parameter(format!("label {bad} out of range for {n} classes")));
        }
        let inv_b = T::one() / T::from_usize(b).expect("batch");
        let mut loss = T::zero();
        let mut d = Vec::with_capacity(b * n);
        for (row, &label) in self.value(logits).data().chunks(n).zip(labels) {
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = row.iter().map(|&v| (v - m).exp()).sum::<T>().ln() + m;
            loss = loss + (lse - row[label]);
            for (j, &v) in row.iter().enumerate() {
                let p = (v - lse).exp();
                let onehot = if j == label { T::one() } else { T::zero() };
                d.push((p - onehot) * inv_b);
            }
        }
        let v = Tensor::scalar(loss * inv_b);
        let op = SoftmaxCrossEntropy {
            dlogits: Rc::new(Tensor::new(shape, d)?),
        };
        Ok(self.push(v, Rc::new(op), vec![logits]))
    }
}


/// Source index of output position `t` after shifting right by `shift`
/// with reflection at the exposed edge.
fn reflect_shift(t: usize, shift: isize, len: usize) -> usize {
    let i = t as isize - shift;
    let last = len as isize - 1;
    let r = if i < 0 {
        -i
    } else if i > last {
        2 * last - i
    } else {
        i
    };
    r as usize
}

impl<T: Scalar> Graph<T> {
    /// Shift each batch item of `x [b, L, c]` along time by `shifts[item]`
    /// samples, reflection-padding the exposed edge.
    pub fn phase_shuffle_with_shifts(&mut self, x: NodeId, shifts: &[isize]) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 3 || shifts.len() != shape[0] {
            return Err(Error::Dimension(format!(
                "phase shuffle expects [batch, len, channels] with one shift per item, got {shape:?}"
            )));
        }
        let (b, l, c) = (shape[0], shape[1], shape[2]);
        if let Some(s) = shifts.iter().find(|s| s.unsigned_abs() >= l) {
            return Err(Error::Parameter(format!("shift {s} too large for length {l}")));
        }
        if shifts.iter().all(|&s| s == 0) {
            return Ok(x);
        }
        let mut idx = Vec::with_capacity(b * l * c);
        for (n, &r) in shifts.iter().enumerate() {
            for t in 0..l {
                let src = reflect_shift(t, r, l);
                idx.extend((0..c).map(|ch| (n * l + src) * c + ch));
            }
        }
        self.gather(x, Rc::new(idx), &shape)
    }

    /// Phase shuffle with per-item shifts drawn uniformly from `[-n, n]`.
    pub fn phase_shuffle<R: Rng + ?Sized>(&mut self, x: NodeId, n: usize, rng: &mut R) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 3 {
            return Err(Error::Dimension(format!("phase shuffle expects rank 3, got {shape:?}")));
        }
        if shape[1] <= 2 * n {
            return Err(Error::Parameter(format!(
                "phase shuffle bound {n} needs length > {}, got {}",
                2 * n,
                shape[1]
            )));
        }
        if n == 0 {
            return Ok(x);
        }
        let n = n as isize;
        let shifts: Vec<isize> = (0..shape[0]).map(|_| rng.gen_range(-n..=n)).collect();
        self.phase_shuffle_with_shifts(x, &shifts)
    }
}
