//! Tape of tensor operations and its reverse sweep.
//!
//! Every op appends a node holding its output value and enough of its inputs
//! to compute the vector-Jacobian product later. Node indices increase in
//! creation order, so walking them backwards is a reverse topological order.

use super::params::{ParamId, Params};
use super::real::{dot, max_of, sum_map, Real};
use super::tensor::Tensor;
use super::NnError;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<F> {
    Leaf,
    MatMul { a: Var, b: Var },
    BatchMatMul { a: Var, b: Var, trans_b: bool },
    AddBias { x: Var, b: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Min(Var, Var),
    Scale(Var, F),
    AddScalar(Var),
    Gelu(Var),
    Relu(Var),
    Softplus(Var),
    Exp(Var),
    Square(Var),
    Clamp { x: Var, lo: F, hi: F },
    Embedding { table: Var, ids: Vec<usize> },
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<F>, rstd: Vec<F> },
    Softmax(Var),
    LogSoftmax(Var),
    Permute0213(Var),
    Reshape(Var),
    MeanAxis1(Var),
    Concat(Var, Var),
    Pick { x: Var, idx: Vec<usize> },
    SumLast(Var),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
}

/// Recording of one forward pass. `backward` may run once.
#[derive(Debug)]
pub struct Graph<F> {
    nodes: Vec<Node<F>>,
    params: Vec<(usize, ParamId, Var)>,
    consumed: bool,
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<F> {
    nodes: Vec<Option<Tensor<F>>>,
    params: Vec<(usize, ParamId, Var)>,
}

impl<F: Real> Gradients<F> {
    /// Gradient with respect to a leaf node (input or parameter); `None` if
    /// the output did not depend on it or the node is not a leaf.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<F>> {
        self.nodes[v.0].as_ref()
    }

    /// Per-parameter gradients indexed by [`ParamId`], zero-filled for
    /// parameters the output does not depend on.
    pub fn param_grads(&self, params: &Params<F>) -> Vec<Tensor<F>> {
        let mut out: Vec<Tensor<F>> = params
            .ids()
            .map(|id| Tensor::zeros(params.get(id).shape()))
            .collect();
        let owner = owner_key(params);
        for &(o, id, v) in &self.params {
            if o != owner {
                continue;
            }
            if let Some(g) = &self.nodes[v.0] {
                out[id.index()].add_assign(g);
            }
        }
        out
    }
}

/// Parameter sets are told apart by address, so one graph can hold several
/// models whose [`ParamId`]s overlap.
fn owner_key<F>(params: &Params<F>) -> usize {
    params as *const Params<F> as usize
}

fn gelu_parts<F: Real>(x: F) -> (F, F) {
    let c = F::from_f64((2.0 / std::f64::consts::PI).sqrt());
    let k = F::from_f64(0.044715);
    let half = F::from_f64(0.5);
    let u = c * (x + k * x * x * x);
    let t = u.tanh();
    let y = half * x * (F::ONE + t);
    let dy = half * (F::ONE + t)
        + half * x * (F::ONE - t * t) * c * (F::ONE + F::from_f64(3.0) * k * x * x);
    (y, dy)
}

fn softplus<F: Real>(x: F) -> F {
    x.max(F::ZERO) + (-x.abs()).exp().ln_1p()
}

fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::ZERO {
        F::ONE / (F::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::ONE + e)
    }
}

fn permute0213<F: Real>(x: &[F], a: usize, b: usize, c: usize, d: usize) -> Vec<F> {
    let mut out = vec![F::ZERO; x.len()];
    for i in 0..a {
        for j in 0..b {
            for k in 0..c {
                let src = ((i * b + j) * c + k) * d;
                let dst = ((i * c + k) * b + j) * d;
                out[dst..dst + d].copy_from_slice(&x[src..src + d]);
            }
        }
    }
    out
}

impl<F: Real> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Graph<F> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: Vec::new(),
            consumed: false,
        }
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>) -> Var {
        debug_assert!(value.all_finite(), "non-finite output from {op:?}");
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant or input tensor.
    pub fn input(&mut self, t: Tensor<F>) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Records a parameter; its gradient is reported by [`Gradients::param_grads`].
    pub fn param(&mut self, params: &Params<F>, id: ParamId) -> Var {
        let owner = owner_key(params);
        if let Some(&(_, _, v)) = self.params.iter().find(|&&(o, p, _)| o == owner && p == id) {
            return v;
        }
        let v = self.push(params.get(id).clone(), Op::Leaf);
        self.params.push((owner, id, v));
        v
    }

    fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), NnError> {
        if cond {
            Ok(())
        } else {
            Err(NnError::Shape(msg()))
        }
    }

    /// `a @ b` with `a: [.., k]` and `b: [k, m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (av, bv) = (self.value(a), self.value(b));
        Self::check(bv.shape().len() == 2 && av.cols() == bv.shape()[0], || {
            format!("matmul {:?} x {:?}", av.shape(), bv.shape())
        })?;
        let (rows, k, m) = (av.rows(), av.cols(), bv.shape()[1]);
        let mut out = vec![F::ZERO; rows * m];
        F::gemm(rows, k, m, av.data(), false, bv.data(), false, &mut out, false);
        let mut shape = av.shape().to_vec();
        *shape.last_mut().expect("matmul input has an axis") = m;
        let t = Tensor::new(&shape, out)?;
        Ok(self.push(t, Op::MatMul { a, b }))
    }

    /// Batched `a[i] @ b[i]` (or `a[i] @ b[i]ᵀ`) over the leading axis.
    pub fn batch_matmul(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var, NnError> {
        let (av, bv) = (self.value(a), self.value(b));
        Self::check(
            av.shape().len() == 3 && bv.shape().len() == 3 && av.shape()[0] == bv.shape()[0],
            || format!("batch_matmul {:?} x {:?}", av.shape(), bv.shape()),
        )?;
        let (bt, n, k) = (av.shape()[0], av.shape()[1], av.shape()[2]);
        let (bk, m) = if trans_b {
            (bv.shape()[2], bv.shape()[1])
        } else {
            (bv.shape()[1], bv.shape()[2])
        };
        Self::check(bk == k, || {
            format!("batch_matmul inner {:?} x {:?}", av.shape(), bv.shape())
        })?;
        let mut out = vec![F::ZERO; bt * n * m];
        for i in 0..bt {
            F::gemm(
                n,
                k,
                m,
                &av.data()[i * n * k..(i + 1) * n * k],
                false,
                &bv.data()[i * k * m..(i + 1) * k * m],
                trans_b,
                &mut out[i * n * m..(i + 1) * n * m],
                false,
            );
        }
        let t = Tensor::new(&[bt, n, m], out)?;
        Ok(self.push(t, Op::BatchMatMul { a, b, trans_b }))
    }

    /// Adds `b: [m]` to every row of `x: [.., m]`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, NnError> {
        let (xv, bv) = (self.value(x), self.value(b));
        Self::check(bv.len() == xv.cols(), || {
            format!("add_bias {:?} + {:?}", xv.shape(), bv.shape())
        })?;
        let m = xv.cols();
        let mut out = xv.clone();
        for row in out.data_mut().chunks_mut(m) {
            for (o, &bb) in row.iter_mut().zip(bv.data()) {
                *o += bb;
            }
        }
        Ok(self.push(out, Op::AddBias { x, b }))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let h = self.matmul(x, w)?;
        self.add_bias(h, b)
    }

    fn zip_same(
        &mut self,
        a: Var,
        b: Var,
        name: &str,
        f: impl Fn(F, F) -> F,
        op: Op<F>,
    ) -> Result<Var, NnError> {
        let (av, bv) = (self.value(a), self.value(b));
        Self::check(av.shape() == bv.shape(), || {
            format!("{name} {:?} vs {:?}", av.shape(), bv.shape())
        })?;
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(av.shape(), data)?;
        Ok(self.push(t, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_same(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_same(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_same(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise minimum; ties send the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_same(a, b, "min", |x, y| if y < x { y } else { x }, Op::Min(a, b))
    }

    fn unary(&mut self, x: Var, f: impl Fn(F) -> F, op: Op<F>) -> Var {
        let t = self.value(x).map(f);
        self.push(t, op)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let c = F::from_f64(c);
        self.unary(x, |v| v * c, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let c = F::from_f64(c);
        self.unary(x, |v| v + c, Op::AddScalar(x))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        self.unary(x, |v| gelu_parts(v).0, Op::Gelu(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(F::ZERO), Op::Relu(x))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, softplus, Op::Softplus(x))
    }

    /// Exponential with the argument capped so the output stays finite.
    pub fn exp(&mut self, x: Var) -> Var {
        let cap = F::from_f64(if F::BYTES == 4 { 80.0 } else { 700.0 });
        self.unary(x, move |v| v.min(cap).exp(), Op::Exp(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, |v| v * v, Op::Square(x))
    }

    /// Clamp to `[lo, hi]`; zero gradient outside the interval.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let (lo, hi) = (F::from_f64(lo), F::from_f64(hi));
        self.unary(x, |v| v.max(lo).min(hi), Op::Clamp { x, lo, hi })
    }

    /// Rows of `table: [V, d]` selected by `ids`, shape `[ids.len(), d]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var, NnError> {
        let tv = self.value(table);
        Self::check(tv.shape().len() == 2, || {
            format!("embedding table {:?}", tv.shape())
        })?;
        let (vocab, d) = (tv.shape()[0], tv.shape()[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(NnError::Shape(format!("token {bad} >= vocab {vocab}")));
        }
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(&tv.data()[i * d..(i + 1) * d]);
        }
        let t = Tensor::new(&[ids.len(), d], out)?;
        Ok(self.push(
            t,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Normalizes each row of the last axis, then applies `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var, NnError> {
        let eps = F::from_f64(1e-5);
        let (xv, gv, bv) = (self.value(x), self.value(gamma), self.value(beta));
        let d = xv.cols();
        Self::check(gv.len() == d && bv.len() == d, || {
            format!("layer_norm {:?} with gamma {:?}", xv.shape(), gv.shape())
        })?;
        let rows = xv.rows();
        let inv_d = F::from_f64(1.0 / d as f64);
        let mut xhat = vec![F::ZERO; xv.len()];
        let mut rstd = vec![F::ZERO; rows];
        let mut out = vec![F::ZERO; xv.len()];
        for r in 0..rows {
            let row = &xv.data()[r * d..(r + 1) * d];
            let mean = sum_map(row, |v| v) * inv_d;
            let var = sum_map(row, |v| (v - mean) * (v - mean)) * inv_d;
            let rs = F::ONE / (var + eps).sqrt();
            rstd[r] = rs;
            for j in 0..d {
                let h = (row[j] - mean) * rs;
                xhat[r * d + j] = h;
                out[r * d + j] = h * gv.data()[j] + bv.data()[j];
            }
        }
        let t = Tensor::new(xv.shape(), out)?;
        Ok(self.push(
            t,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
        ))
    }

    fn softmax_rows(x: &Tensor<F>, log: bool) -> Tensor<F> {
        let m = x.cols();
        let mut out = x.clone();
        for row in out.data_mut().chunks_mut(m) {
            let mx = max_of(row);
            if log {
                row.iter_mut().for_each(|v| *v -= mx);
                let lz = sum_map(row, F::fast_exp).ln();
                row.iter_mut().for_each(|v| *v -= lz);
            } else {
                row.iter_mut().for_each(|v| *v = (*v - mx).fast_exp());
                let inv = F::ONE / sum_map(row, |v| v);
                row.iter_mut().for_each(|v| *v *= inv);
            }
        }
        out
    }

    /// Softmax along the last axis (max-shifted).
    pub fn softmax(&mut self, x: Var) -> Var {
        let t = Self::softmax_rows(self.value(x), false);
        self.push(t, Op::Softmax(x))
    }

    pub fn log_softmax(&mut self, x: Var) -> Var {
        let t = Self::softmax_rows(self.value(x), true);
        self.push(t, Op::LogSoftmax(x))
    }

    /// `[a, b, c, d] -> [a, c, b, d]`.
    pub fn permute0213(&mut self, x: Var) -> Result<Var, NnError> {
        let xv = self.value(x);
        Self::check(xv.shape().len() == 4, || {
            format!("permute0213 on {:?}", xv.shape())
        })?;
        let [a, b, c, d] = [xv.shape()[0], xv.shape()[1], xv.shape()[2], xv.shape()[3]];
        let t = Tensor::new(&[a, c, b, d], permute0213(xv.data(), a, b, c, d))?;
        Ok(self.push(t, Op::Permute0213(x)))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, NnError> {
        let t = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(t, Op::Reshape(x)))
    }

    /// `[a, b, c] -> [a, c]`, averaging over the middle axis.
    pub fn mean_axis1(&mut self, x: Var) -> Result<Var, NnError> {
        let xv = self.value(x);
        Self::check(xv.shape().len() == 3, || {
            format!("mean_axis1 on {:?}", xv.shape())
        })?;
        let [a, b, c] = [xv.shape()[0], xv.shape()[1], xv.shape()[2]];
        let inv = F::from_f64(1.0 / b as f64);
        let mut out = vec![F::ZERO; a * c];
        for i in 0..a {
            for j in 0..b {
                let src = &xv.data()[(i * b + j) * c..(i * b + j + 1) * c];
                for (o, &v) in out[i * c..(i + 1) * c].iter_mut().zip(src) {
                    *o += v;
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= inv);
        let t = Tensor::new(&[a, c], out)?;
        Ok(self.push(t, Op::MeanAxis1(x)))
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (av, bv) = (self.value(a), self.value(b));
        Self::check(av.rows() == bv.rows(), || {
            format!("concat {:?} with {:?}", av.shape(), bv.shape())
        })?;
        let (p, q) = (av.cols(), bv.cols());
        let mut out = Vec::with_capacity(av.len() + bv.len());
        for r in 0..av.rows() {
            out.extend_from_slice(&av.data()[r * p..(r + 1) * p]);
            out.extend_from_slice(&bv.data()[r * q..(r + 1) * q]);
        }
        let mut shape = av.shape().to_vec();
        *shape.last_mut().expect("concat input has an axis") = p + q;
        let t = Tensor::new(&shape, out)?;
        Ok(self.push(t, Op::Concat(a, b)))
    }

    /// `out[r] = x[r, idx[r]]` for `x: [n, m]`.
    pub fn pick(&mut self, x: Var, idx: &[usize]) -> Result<Var, NnError> {
        let xv = self.value(x);
        let m = xv.cols();
        Self::check(xv.rows() == idx.len() && idx.iter().all(|&i| i < m), || {
            format!("pick {} indices from {:?}", idx.len(), xv.shape())
        })?;
        let data = idx
            .iter()
            .enumerate()
            .map(|(r, &i)| xv.data()[r * m + i])
            .collect();
        let t = Tensor::new(&[idx.len()], data)?;
        Ok(self.push(
            t,
            Op::Pick {
                x,
                idx: idx.to_vec(),
            },
        ))
    }

    /// Sum over the last axis.
    pub fn sum_last(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let m = xv.cols();
        let data = xv.data().chunks(m).map(|r| sum_map(r, |v| v)).collect();
        let mut shape = xv.shape().to_vec();
        shape.pop();
        let t = Tensor::new(&shape, data).expect("row sums match shape");
        self.push(t, Op::SumLast(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let s = xv.data().iter().copied().sum::<F>() / F::from_f64(xv.len() as f64);
        self.push(Tensor::scalar(s), Op::Mean(x))
    }

    /// Reverse sweep from a scalar output (seed 1).
    pub fn backward(&mut self, out: Var) -> Result<Gradients<F>, NnError> {
        let v = self.value(out);
        if v.len() != 1 {
            return Err(NnError::Shape(format!(
                "backward needs a scalar output, got {:?}",
                v.shape()
            )));
        }
        let seed = Tensor::full(v.shape(), F::ONE);
        self.backward_with_seed(out, seed)
    }

    /// Reverse sweep with an explicit output cotangent.
    pub fn backward_with_seed(&mut self, out: Var, seed: Tensor<F>) -> Result<Gradients<F>, NnError> {
        if self.consumed {
            return Err(NnError::TapeConsumed);
        }
        if seed.shape() != self.value(out).shape() {
            return Err(NnError::Shape(format!(
                "seed {:?} for output {:?}",
                seed.shape(),
                self.value(out).shape()
            )));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(seed);
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            // Only leaves (inputs and parameters) keep their gradient.
            if matches!(self.nodes[i].op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        Ok(Gradients {
            nodes: grads,
            params: self.params.clone(),
        })
    }

    fn propagate(&self, i: usize, g: &Tensor<F>, grads: &mut [Option<Tensor<F>>]) {
        let acc = |grads: &mut [Option<Tensor<F>>], v: Var, delta: Tensor<F>| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        let val = |v: Var| &self.nodes[v.0].value;
        let node = &self.nodes[i];
        let y = &node.value;
        let like = |v: Var, data: Vec<F>| {
            Tensor::new(val(v).shape(), data).expect("gradient matches input shape")
        };
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (av, bv) = (val(*a), val(*b));
                let (rows, k, m) = (av.rows(), av.cols(), bv.shape()[1]);
                let mut da = vec![F::ZERO; rows * k];
                F::gemm(rows, m, k, gd, false, bv.data(), true, &mut da, false);
                let mut db = vec![F::ZERO; k * m];
                F::gemm(k, rows, m, av.data(), true, gd, false, &mut db, false);
                acc(grads, *a, like(*a, da));
                acc(grads, *b, like(*b, db));
            }
            Op::BatchMatMul { a, b, trans_b } => {
                let (av, bv) = (val(*a), val(*b));
                let (bt, n, k) = (av.shape()[0], av.shape()[1], av.shape()[2]);
                let m = y.shape()[2];
                let mut da = vec![F::ZERO; av.len()];
                let mut db = vec![F::ZERO; bv.len()];
                for s in 0..bt {
                    let gs = &gd[s * n * m..(s + 1) * n * m];
                    let as_ = &av.data()[s * n * k..(s + 1) * n * k];
                    let bs = &bv.data()[s * k * m..(s + 1) * k * m];
                    F::gemm(n, m, k, gs, false, bs, !trans_b, &mut da[s * n * k..(s + 1) * n * k], false);
                    let dbs = &mut db[s * k * m..(s + 1) * k * m];
                    if *trans_b {
                        F::gemm(m, n, k, gs, true, as_, false, dbs, false);
                    } else {
                        F::gemm(k, n, m, as_, true, gs, false, dbs, false);
                    }
                }
                acc(grads, *a, like(*a, da));
                acc(grads, *b, like(*b, db));
            }
            Op::AddBias { x, b } => {
                let m = y.cols();
                let mut db = vec![F::ZERO; m];
                for row in gd.chunks(m) {
                    for (d, &v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                acc(grads, *x, g.clone());
                acc(grads, *b, like(*b, db));
            }
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let da = gd.iter().zip(bv.data()).map(|(&g, &b)| g * b).collect();
                let db = gd.iter().zip(av.data()).map(|(&g, &a)| g * a).collect();
                acc(grads, *a, like(*a, da));
                acc(grads, *b, like(*b, db));
            }
            Op::Min(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let mut da = vec![F::ZERO; g.len()];
                let mut db = vec![F::ZERO; g.len()];
                for j in 0..g.len() {
                    if bv.data()[j] < av.data()[j] {
                        db[j] = gd[j];
                    } else {
                        da[j] = gd[j];
                    }
                }
                acc(grads, *a, like(*a, da));
                acc(grads, *b, like(*b, db));
            }
            Op::Scale(x, c) => acc(grads, *x, g.map(|v| v * *c)),
            Op::AddScalar(x) => acc(grads, *x, g.clone()),
            Op::Gelu(x) => {
                let d = gd
                    .iter()
                    .zip(val(*x).data())
                    .map(|(&g, &x)| g * gelu_parts(x).1)
                    .collect();
                acc(grads, *x, like(*x, d));
            }
            Op::Relu(x) => {
                let d = gd
                    .iter()
                    .zip(val(*x).data())
                    .map(|(&g, &x)| if x > F::ZERO { g } else { F::ZERO })
                    .collect();
                acc(grads, *x, like(*x, d));
            }
            Op::Softplus(x) => {
                let d = gd
                    .iter()
                    .zip(val(*x).data())
                    .map(|(&g, &x)| g * sigmoid(x))
                    .collect();
                acc(grads, *x, like(*x, d));
            }
            Op::Exp(x) => {
                let d = gd.iter().zip(y.data()).map(|(&g, &e)| g * e).collect();
                acc(grads, *x, like(*x, d));
            }
            Op::Square(x) => {
                let two = F::from_f64(2.0);
                let d = gd
                    .iter()
                    .zip(val(*x).data())
                    .map(|(&g, &x)| g * two * x)
                    .collect();
                acc(grads, *x, like(*x, d));
            }
            Op::Clamp { x, lo, hi } => {
                let d = gd
                    .iter()
                    .zip(val(*x).data())
                    .map(|(&g, &x)| if x >= *lo && x <= *hi { g } else { F::ZERO })
                    .collect();
                acc(grads, *x, like(*x, d));
            }
            Op::Embedding { table, ids } => {
                let d = y.cols();
                let mut dt = vec![F::ZERO; val(*table).len()];
                for (r, &id) in ids.iter().enumerate() {
                    for j in 0..d {
                        dt[id * d + j] += gd[r * d + j];
                    }
                }
                acc(grads, *table, like(*table, dt));
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let d = y.cols();
                let gam = val(*gamma).data();
                let mut dx = vec![F::ZERO; y.len()];
                let mut dg = vec![F::ZERO; d];
                let mut dbeta = vec![F::ZERO; d];
                let inv_d = F::from_f64(1.0 / d as f64);
                for (r, &rs) in rstd.iter().enumerate() {
                    let gr = &gd[r * d..(r + 1) * d];
                    let hr = &xhat[r * d..(r + 1) * d];
                    let mut mean_dh = F::ZERO;
                    let mut mean_dh_h = F::ZERO;
                    for j in 0..d {
                        dg[j] += gr[j] * hr[j];
                        dbeta[j] += gr[j];
                        let dh = gr[j] * gam[j];
                        mean_dh += dh;
                        mean_dh_h += dh * hr[j];
                    }
                    mean_dh *= inv_d;
                    mean_dh_h *= inv_d;
                    for j in 0..d {
                        let dh = gr[j] * gam[j];
                        dx[r * d + j] = rs * (dh - mean_dh - hr[j] * mean_dh_h);
                    }
                }
                acc(grads, *x, like(*x, dx));
                acc(grads, *gamma, like(*gamma, dg));
                acc(grads, *beta, like(*beta, dbeta));
            }
            Op::Softmax(x) => {
                let m = y.cols();
                let mut dx = vec![F::ZERO; y.len()];
                for ((dxr, yr), gr) in dx.chunks_mut(m).zip(y.data().chunks(m)).zip(gd.chunks(m)) {
                    let dot = dot(yr, gr);
                    for j in 0..m {
                        dxr[j] = yr[j] * (gr[j] - dot);
                    }
                }
                acc(grads, *x, like(*x, dx));
            }
            Op::LogSoftmax(x) => {
                let m = y.cols();
                let mut dx = vec![F::ZERO; y.len()];
                for ((dxr, yr), gr) in dx.chunks_mut(m).zip(y.data().chunks(m)).zip(gd.chunks(m)) {
                    let total = sum_map(gr, |v| v);
                    for j in 0..m {
                        dxr[j] = gr[j] - yr[j].fast_exp() * total;
                    }
                }
                acc(grads, *x, like(*x, dx));
            }
            Op::Permute0213(x) => {
                // y is [a, c, b, d]; the same swap maps it back.
                let s = y.shape();
                let dx = permute0213(gd, s[0], s[1], s[2], s[3]);
                acc(grads, *x, like(*x, dx));
            }
            Op::Reshape(x) => acc(grads, *x, like(*x, gd.to_vec())),
            Op::MeanAxis1(x) => {
                let s = val(*x).shape();
                let (a, b, c) = (s[0], s[1], s[2]);
                let inv = F::from_f64(1.0 / b as f64);
                let mut dx = vec![F::ZERO; a * b * c];
                for i in 0..a {
                    for j in 0..b {
                        for k in 0..c {
                            dx[(i * b + j) * c + k] = gd[i * c + k] * inv;
                        }
                    }
                }
                acc(grads, *x, like(*x, dx));
            }
            Op::Concat(a, b) => {
                let (p, q) = (val(*a).cols(), val(*b).cols());
                let mut da = Vec::with_capacity(val(*a).len());
                let mut db = Vec::with_capacity(val(*b).len());
                for row in gd.chunks(p + q) {
                    da.extend_from_slice(&row[..p]);
                    db.extend_from_slice(&row[p..]);
                }
                acc(grads, *a, like(*a, da));
                acc(grads, *b, like(*b, db));
            }
            Op::Pick { x, idx } => {
                let m = val(*x).cols();
                let mut dx = vec![F::ZERO; val(*x).len()];
                for (r, &i) in idx.iter().enumerate() {
                    dx[r * m + i] = gd[r];
                }
                acc(grads, *x, like(*x, dx));
            }
            Op::SumLast(x) => {
                let m = val(*x).cols();
                let dx = gd.iter().flat_map(|&v| std::iter::repeat(v).take(m)).collect();
                acc(grads, *x, like(*x, dx));
            }
            Op::Sum(x) => {
                let n = val(*x).len();
                acc(grads, *x, like(*x, vec![gd[0]; n]));
            }
            Op::Mean(x) => {
                let n = val(*x).len();
                let v = gd[0] / F::from_f64(n as f64);
                acc(grads, *x, like(*x, vec![v; n]));
            }
        }
    }
}
