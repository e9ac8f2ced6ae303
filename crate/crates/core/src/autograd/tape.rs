use super::tensor::{Real, Tensor};
use super::AutogradError;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Sigmoid,
    Tanh,
    Relu,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Unary(Var, Elementwise),
    AddRow(Var, Var),
    AddTiled(Var, Var),
    Embed { table: Var, indices: Vec<usize> },
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Reshape(Var),
    Transpose(Var),
    MaskedSoftmax(Var),
    WeightedBlockSum { weights: Var, values: Var },
    SoftmaxCrossEntropy { logits: Var, targets: Vec<usize>, mask: Vec<bool>, probs: Vec<T>, count: usize },
    Sum(Var),
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRow(a, b)
            | Op::AddTiled(a, b)
            | Op::WeightedBlockSum { weights: a, values: b } => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Unary(a, _)
            | Op::SliceCols { x: a, .. }
            | Op::Reshape(a)
            | Op::Transpose(a)
            | Op::MaskedSoftmax(a)
            | Op::Sum(a)
            | Op::Embed { table: a, .. }
            | Op::SoftmaxCrossEntropy { logits: a, .. } => vec![*a],
            Op::ConcatCols(v) | Op::ConcatRows(v) => v.clone(),
        }
    }
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records operations in execution order so gradients can be pulled back
/// from a scalar loss. Node indices are a topological order by construction.
#[derive(Debug)]
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> AutogradError {
    AutogradError::ShapeMismatch { op, left: a.to_vec(), right: b.to_vec() }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self { nodes: Vec::with_capacity(n) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// Records a trainable input.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// Records an input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dims2()
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn data(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.data()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(T, T) -> T,
    ) -> Result<Tensor<T>, AutogradError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() == vb.shape() {
            let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::new(va.shape(), data)
        } else if vb.len() == 1 {
            let y = vb.data()[0];
            Ok(va.map(|x| f(x, y)))
        } else if va.len() == 1 {
            let x = va.data()[0];
            Ok(vb.map(|y| f(x, y)))
        } else {
            Err(mismatch(name, va.shape(), vb.shape()))
        }
    }

    /// Elementwise sum; shapes must match or one side must hold one element.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        let out = self.binary(a, b, "add", |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        let out = self.binary(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        let out = self.binary(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a).map(|x| x * c);
        self.push(out, Op::Scale(a, c))
    }

    pub fn unary(&mut self, a: Var, kind: Elementwise) -> Var {
        let out = match kind {
            Elementwise::Sigmoid => self.value(a).map(sigmoid),
            Elementwise::Tanh => self.value(a).map(T::tanh),
            Elementwise::Relu => self.value(a).map(|x| x.max(T::zero())),
        };
        self.push(out, Op::Unary(a, kind))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Elementwise::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Elementwise::Tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Elementwise::Relu)
    }

    /// `x[m, n] + bias` with `bias` of shape `[n]` or `[1, n]` added to every row.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var, AutogradError> {
        let (m, n) = self.dims(x);
        let (br, bn) = self.dims(bias);
        if br != 1 || bn != n || self.shape(x).len() != 2 {
            return Err(mismatch("add_row", self.shape(x), self.shape(bias)));
        }
        let b = self.data(bias);
        let mut data = self.data(x).to_vec();
        for r in 0..m {
            for (d, &bv) in data[r * n..(r + 1) * n].iter_mut().zip(b) {
                *d += bv;
            }
        }
        let out = Tensor::new(&[m, n], data)?;
        Ok(self.push(out, Op::AddRow(x, bias)))
    }

    /// `x[s·B + b, :] + y[b, :]` for `x` of shape `[S·B, n]` and `y` of `[B, n]`.
    pub fn add_tiled(&mut self, x: Var, y: Var) -> Result<Var, AutogradError> {
        let (rows, n) = self.dims(x);
        let (b, yn) = self.dims(y);
        if yn != n || b == 0 || rows % b != 0 {
            return Err(mismatch("add_tiled", self.shape(x), self.shape(y)));
        }
        let yd = self.data(y);
        let mut data = self.data(x).to_vec();
        for (chunk, yrow) in data.chunks_mut(n).zip(yd.chunks(n).cycle()) {
            for (d, &v) in chunk.iter_mut().zip(yrow) {
                *d += v;
            }
        }
        let out = Tensor::new(&[rows, n], data)?;
        Ok(self.push(out, Op::AddTiled(x, y)))
    }

    /// Rows of `table[V, n]` selected by `indices`; equal to
    /// `one_hot(indices) · table`.
    pub fn embed(&mut self, table: Var, indices: &[usize]) -> Result<Var, AutogradError> {
        let (v, n) = self.dims(table);
        let t = self.data(table);
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= v {
                return Err(AutogradError::IndexOutOfRange { index: i, bound: v });
            }
            data.extend_from_slice(&t[i * n..(i + 1) * n]);
        }
        let out = Tensor::new(&[indices.len(), n], data)?;
        Ok(self.push(out, Op::Embed { table, indices: indices.to_vec() }))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, AutogradError> {
        let (m, n) = self.dims(x);
        if start + len > n {
            return Err(mismatch("slice_cols", self.shape(x), &[start, len]));
        }
        let xd = self.data(x);
        let mut data = Vec::with_capacity(m * len);
        for r in 0..m {
            data.extend_from_slice(&xd[r * n + start..r * n + start + len]);
        }
        let out = Tensor::new(&[m, len], data)?;
        Ok(self.push(out, Op::SliceCols { x, start }))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutogradError> {
        let m = parts.first().map_or(0, |&p| self.dims(p).0);
        let mut total = 0;
        for &p in parts {
            let (pm, pn) = self.dims(p);
            if pm != m {
                return Err(mismatch("concat_cols", &[m], &[pm]));
            }
            total += pn;
        }
        let mut data = Vec::with_capacity(m * total);
        for r in 0..m {
            for &p in parts {
                let (_, pn) = self.dims(p);
                data.extend_from_slice(&self.data(p)[r * pn..(r + 1) * pn]);
            }
        }
        let out = Tensor::new(&[m, total], data)?;
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, AutogradError> {
        let n = parts.first().map_or(0, |&p| self.dims(p).1);
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (pm, pn) = self.dims(p);
            if pn != n {
                return Err(mismatch("concat_rows", &[n], &[pn]));
            }
            rows += pm;
            data.extend_from_slice(self.data(p));
        }
        let out = Tensor::new(&[rows, n], data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, AutogradError> {
        if shape.iter().product::<usize>() != self.value(x).len() {
            return Err(mismatch("reshape", self.shape(x), shape));
        }
        let out = self.value(x).clone().with_shape(shape);
        Ok(self.push(out, Op::Reshape(x)))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, AutogradError> {
        if self.shape(x).len() != 2 {
            return Err(mismatch("transpose", self.shape(x), &[]));
        }
        let (m, n) = self.dims(x);
        let out = Tensor::new(&[n, m], transpose(self.data(x), m, n))?;
        Ok(self.push(out, Op::Transpose(x)))
    }

    /// Row-wise softmax over the positions where `mask` is set; masked
    /// positions get exactly zero weight.
    pub fn masked_softmax(&mut self, x: Var, mask: &[bool]) -> Result<Var, AutogradError> {
        let (m, n) = self.dims(x);
        if mask.len() != m * n {
            return Err(mismatch("masked_softmax", self.shape(x), &[mask.len()]));
        }
        let xd = self.data(x);
        let mut data = vec![T::zero(); m * n];
        for r in 0..m {
            let row = &xd[r * n..(r + 1) * n];
            let keep = &mask[r * n..(r + 1) * n];
            let max = row
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&v, _)| v)
                .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))))
                .ok_or(AutogradError::AllMasked { row: r })?;
            let out = &mut data[r * n..(r + 1) * n];
            let mut total = T::zero();
            for j in 0..n {
                if keep[j] {
                    out[j] = (row[j] - max).exp();
                    total += out[j];
                }
            }
            out.iter_mut().for_each(|v| *v = *v / total);
        }
        let out = Tensor::new(&[m, n], data)?;
        Ok(self.push(out, Op::MaskedSoftmax(x)))
    }

    /// `out[b, :] = Σ_s weights[b, s] · values[s·B + b, :]` for weights `[B, S]`
    /// and position-major values `[S·B, n]`.
    pub fn weighted_block_sum(&mut self, weights: Var, values: Var) -> Result<Var, AutogradError> {
        let (b, s) = self.dims(weights);
        let (rows, n) = self.dims(values);
        if rows != b * s {
            return Err(mismatch("weighted_block_sum", self.shape(weights), self.shape(values)));
        }
        let (w, v) = (self.data(weights), self.data(values));
        let mut data = vec![T::zero(); b * n];
        for bi in 0..b {
            let out = &mut data[bi * n..(bi + 1) * n];
            for si in 0..s {
                let wv = w[bi * s + si];
                if wv == T::zero() {
                    continue;
                }
                let src = &v[(si * b + bi) * n..(si * b + bi + 1) * n];
                for (o, &x) in out.iter_mut().zip(src) {
                    *o += wv * x;
                }
            }
        }
        let out = Tensor::new(&[b, n], data)?;
        Ok(self.push(out, Op::WeightedBlockSum { weights, values }))
    }

    /// Mean over unmasked rows of `-log softmax(logits)[target]`. A fully
    /// masked batch yields zero.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        targets: &[usize],
        mask: &[bool],
    ) -> Result<Var, AutogradError> {
        let (m, v) = self.dims(logits);
        if targets.len() != m || mask.len() != m {
            return Err(mismatch("softmax_cross_entropy", self.shape(logits), &[targets.len(), mask.len()]));
        }
        let ld = self.data(logits);
        let mut probs = vec![T::zero(); m * v];
        let mut loss = T::zero();
        let mut count = 0;
        for r in 0..m {
            if !mask[r] {
                continue;
            }
            if targets[r] >= v {
                return Err(AutogradError::IndexOutOfRange { index: targets[r], bound: v });
            }
            let row = &ld[r * v..(r + 1) * v];
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let p = &mut probs[r * v..(r + 1) * v];
            let mut total = T::zero();
            for (pj, &x) in p.iter_mut().zip(row) {
                *pj = (x - max).exp();
                total += *pj;
            }
            p.iter_mut().for_each(|x| *x = *x / total);
            loss += total.ln() - (row[targets[r]] - max);
            count += 1;
        }
        if count > 0 {
            loss = loss / T::lit(count as f64);
        }
        let op = Op::SoftmaxCrossEntropy { logits, targets: targets.to_vec(), mask: mask.to_vec(), probs, count };
        Ok(self.push(Tensor::scalar(loss), op))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.data(x).iter().copied().sum();
        self.push(Tensor::scalar(total), Op::Sum(x))
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Grads<T>, AutogradError> {
        let root = &self.nodes[loss.0];
        if root.value.len() != 1 {
            return Err(AutogradError::NotScalar(root.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !root.requires_grad {
            return Ok(Grads { grads });
        }
        grads[loss.0] = Some(Tensor::filled(root.value.shape(), T::one()));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.pull_back(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Grads { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let g = g.with_shape(self.shape(v));
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    /// Gradient of a broadcast binary op with respect to one side.
    fn reduce_to(&self, v: Var, g: Tensor<T>) -> Tensor<T> {
        if self.value(v).len() == 1 && g.len() != 1 {
            Tensor::scalar(g.data().iter().copied().sum())
        } else {
            g
        }
    }

    fn pull_back(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let (_, n) = self.dims(*b);
                if self.requires_grad(*a) {
                    let mut da = Tensor::zeros(&[m, k]);
                    T::gemm(m, n, k, gd, false, self.data(*b), true, da.data_mut(), false);
                    self.accumulate(grads, *a, da);
                }
                if self.requires_grad(*b) {
                    let mut db = Tensor::zeros(&[k, n]);
                    T::gemm(k, m, n, self.data(*a), true, gd, false, db.data_mut(), false);
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, self.reduce_to(*a, g.clone()));
                self.accumulate(grads, *b, self.reduce_to(*b, g.clone()));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, self.reduce_to(*a, g.clone()));
                self.accumulate(grads, *b, self.reduce_to(*b, g.map(|x| -x)));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let at = |t: &Tensor<T>, i: usize| if t.len() == 1 { t.data()[0] } else { t.data()[i] };
                if self.requires_grad(*a) {
                    let d =
                        Tensor::new(g.shape(), gd.iter().enumerate().map(|(i, &x)| x * at(vb, i)).collect()).unwrap();
                    self.accumulate(grads, *a, self.reduce_to(*a, d));
                }
                if self.requires_grad(*b) {
                    let d =
                        Tensor::new(g.shape(), gd.iter().enumerate().map(|(i, &x)| x * at(va, i)).collect()).unwrap();
                    self.accumulate(grads, *b, self.reduce_to(*b, d));
                }
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, g.map(|x| x * *c)),
            Op::Unary(a, kind) => {
                let x = self.data(*a);
                let data: Vec<T> = match kind {
                    Elementwise::Sigmoid => gd.iter().zip(y).map(|(&g, &s)| g * s * (T::one() - s)).collect(),
                    Elementwise::Tanh => gd.iter().zip(y).map(|(&g, &t)| g * (T::one() - t * t)).collect(),
                    Elementwise::Relu => {
                        gd.iter().zip(x).map(|(&g, &v)| if v > T::zero() { g } else { T::zero() }).collect()
                    }
                };
                self.accumulate(grads, *a, Tensor::new(g.shape(), data).unwrap());
            }
            Op::AddRow(x, bias) => {
                self.accumulate(grads, *x, g.clone());
                if self.requires_grad(*bias) {
                    let (m, n) = g.dims2();
                    let mut db = vec![T::zero(); n];
                    for r in 0..m {
                        for (d, &v) in db.iter_mut().zip(&gd[r * n..(r + 1) * n]) {
                            *d += v;
                        }
                    }
                    self.accumulate(grads, *bias, Tensor::new(&[n], db).unwrap());
                }
            }
            Op::AddTiled(x, yv) => {
                self.accumulate(grads, *x, g.clone());
                if self.requires_grad(*yv) {
                    let (b, n) = self.dims(*yv);
                    let mut dy = vec![T::zero(); b * n];
                    for (chunk, i) in gd.chunks(n).zip((0..b).cycle()) {
                        for (d, &v) in dy[i * n..(i + 1) * n].iter_mut().zip(chunk) {
                            *d += v;
                        }
                    }
                    self.accumulate(grads, *yv, Tensor::new(&[b, n], dy).unwrap());
                }
            }
            Op::Embed { table, indices } => {
                let (v, n) = self.dims(*table);
                let mut dt = Tensor::zeros(&[v, n]);
                let d = dt.data_mut();
                for (r, &i) in indices.iter().enumerate() {
                    for (o, &x) in d[i * n..(i + 1) * n].iter_mut().zip(&gd[r * n..(r + 1) * n]) {
                        *o += x;
                    }
                }
                self.accumulate(grads, *table, dt);
            }
            Op::SliceCols { x, start } => {
                let (m, n) = self.dims(*x);
                let len = g.dims2().1;
                let mut dx = Tensor::zeros(&[m, n]);
                let d = dx.data_mut();
                for r in 0..m {
                    d[r * n + start..r * n + start + len].copy_from_slice(&gd[r * len..(r + 1) * len]);
                }
                self.accumulate(grads, *x, dx);
            }
            Op::ConcatCols(parts) => {
                let (m, total) = g.dims2();
                let mut offset = 0;
                for &p in parts {
                    let (_, pn) = self.dims(p);
                    if self.requires_grad(p) {
                        let mut dp = Vec::with_capacity(m * pn);
                        for r in 0..m {
                            dp.extend_from_slice(&gd[r * total + offset..r * total + offset + pn]);
                        }
                        self.accumulate(grads, p, Tensor::new(&[m, pn], dp).unwrap());
                    }
                    offset += pn;
                }
            }
            Op::ConcatRows(parts) => {
                let n = g.dims2().1;
                let mut row = 0;
                for &p in parts {
                    let (pm, _) = self.dims(p);
                    if self.requires_grad(p) {
                        let dp = gd[row * n..(row + pm) * n].to_vec();
                        self.accumulate(grads, p, Tensor::new(&[pm, n], dp).unwrap());
                    }
                    row += pm;
                }
            }
            Op::Reshape(x) => self.accumulate(grads, *x, g.clone()),
            Op::Transpose(x) => {
                let (m, n) = self.dims(*x);
                self.accumulate(grads, *x, Tensor::new(&[m, n], transpose(gd, n, m)).unwrap());
            }
            Op::MaskedSoftmax(x) => {
                let (m, n) = g.dims2();
                let mut dx = vec![T::zero(); m * n];
                for r in 0..m {
                    let (yr, gr) = (&y[r * n..(r + 1) * n], &gd[r * n..(r + 1) * n]);
                    let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    for j in 0..n {
                        dx[r * n + j] = yr[j] * (gr[j] - dot);
                    }
                }
                self.accumulate(grads, *x, Tensor::new(&[m, n], dx).unwrap());
            }
            Op::WeightedBlockSum { weights, values } => {
                let (b, s) = self.dims(*weights);
                let (_, n) = self.dims(*values);
                let (w, v) = (self.data(*weights), self.data(*values));
                if self.requires_grad(*weights) {
                    let mut dw = vec![T::zero(); b * s];
                    for bi in 0..b {
                        let gr = &gd[bi * n..(bi + 1) * n];
                        for si in 0..s {
                            let vr = &v[(si * b + bi) * n..(si * b + bi + 1) * n];
                            dw[bi * s + si] = gr.iter().zip(vr).map(|(&a, &c)| a * c).sum();
                        }
                    }
                    self.accumulate(grads, *weights, Tensor::new(&[b, s], dw).unwrap());
                }
                if self.requires_grad(*values) {
                    let mut dv = vec![T::zero(); b * s * n];
                    for si in 0..s {
                        for bi in 0..b {
                            let wv = w[bi * s + si];
                            let gr = &gd[bi * n..(bi + 1) * n];
                            for (o, &x) in dv[(si * b + bi) * n..(si * b + bi + 1) * n].iter_mut().zip(gr) {
                                *o = wv * x;
                            }
                        }
                    }
                    self.accumulate(grads, *values, Tensor::new(&[b * s, n], dv).unwrap());
                }
            }
            Op::SoftmaxCrossEntropy { logits, targets, mask, probs, count } => {
                let (m, v) = self.dims(*logits);
                let mut dl = vec![T::zero(); m * v];
                if *count > 0 {
                    let scale = gd[0] / T::lit(*count as f64);
                    for r in 0..m {
                        if !mask[r] {
                            continue;
                        }
                        for j in 0..v {
                            dl[r * v + j] = probs[r * v + j] * scale;
                        }
                        dl[r * v + targets[r]] -= scale;
                    }
                }
                self.accumulate(grads, *logits, Tensor::new(&[m, v], dl).unwrap());
            }
            Op::Sum(x) => {
                let shape = self.shape(*x).to_vec();
                self.accumulate(grads, *x, Tensor::filled(&shape, gd[0]));
            }
        }
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn transpose<T: Real>(data: &[T], m: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for r in 0..m {
        for c in 0..n {
            out[c * m + r] = data[r * n + c];
        }
    }
    out
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Grads<T = f32> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Grads<T> {
    /// Gradient of `v`, or `None` when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, zero-filled (shaped like `tape`'s value) when unreachable.
    pub fn wrt(&self, tape: &Tape<T>, v: Var) -> Tensor<T> {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
    }

    /// Moves the gradient of `v` out, leaving `None` behind.
    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
