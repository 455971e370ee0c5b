use alloc::vec;
use alloc::vec::Vec;

use super::{AutodiffError, ParamId, ParameterStore, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MatMul(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    MeanPool(Var),
    SumPool(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Gather(Var, Vec<usize>),
    ScatterAdd(Var, Vec<usize>),
    BceWithLogits(Var, Vec<f64>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records a forward computation; [`Tape::backward`] replays it in exact
/// reverse order and consumes the tape.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<Option<Var>>,
}

fn check(op: &'static str, t: Tensor) -> Result<Tensor, AutodiffError> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(AutodiffError::NonFinite { op })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Non-learnable input.
    pub fn constant(&mut self, value: Tensor) -> Result<Var, AutodiffError> {
        let value = check("constant", value)?;
        Ok(self.push(value, Op::Leaf))
    }

    /// Learnable input. Each parameter is recorded once per tape.
    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> Var {
        if self.params.len() <= id.0 {
            self.params.resize(id.0 + 1, None);
        }
        if let Some(v) = self.params[id.0] {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id));
        self.params[id.0] = Some(v);
        v
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AutodiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(AutodiffError::ShapeMismatch { op, left: sa, right: sb });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("add", a, b)?;
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        Ok(self.push(check("add", out)?, Op::Add(a, b)))
    }

    /// Adds the `1 x d` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb != [1, sa[1]] {
            return Err(AutodiffError::ShapeMismatch { op: "add_row", left: sa, right: sb });
        }
        let mut out = self.value(a).clone();
        let bias = self.value(b).data().to_vec();
        for r in 0..sa[0] {
            for (x, b) in out.row_mut(r).iter_mut().zip(&bias) {
                *x += b;
            }
        }
        Ok(self.push(check("add_row", out)?, Op::AddRow(a, b)))
    }

    /// Elementwise product; `b` may also be an `n x 1` column that scales
    /// each row of `a`.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let out = if sa == sb {
            let (x, y) = (self.value(a).data(), self.value(b).data());
            Tensor::new(sa[0], sa[1], x.iter().zip(y).map(|(p, q)| p * q).collect())?
        } else if sb == [sa[0], 1] {
            let (x, y) = (self.value(a), self.value(b));
            Tensor::from_fn(sa[0], sa[1], |r, c| x.get(r, c) * y.get(r, 0))
        } else {
            return Err(AutodiffError::ShapeMismatch { op: "mul", left: sa, right: sb });
        };
        Ok(self.push(check("mul", out)?, Op::Mul(a, b)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa[1] != sb[0] {
            return Err(AutodiffError::ShapeMismatch { op: "matmul", left: sa, right: sb });
        }
        let out = self.value(a).matmul(self.value(b));
        Ok(self.push(check("matmul", out)?, Op::MatMul(a, b)))
    }

    /// `a * w + b` with a `1 x d` bias row.
    pub fn linear(&mut self, a: Var, w: Var, b: Var) -> Result<Var, AutodiffError> {
        let h = self.matmul(a, w)?;
        self.add_row(h, b)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        let out = Tensor::from_fn(x.rows(), x.cols(), |r, c| x.get(r, c).max(0.0));
        Ok(self.push(out, Op::Relu(a)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        let out = Tensor::from_fn(x.rows(), x.cols(), |r, c| sigmoid(x.get(r, c)));
        Ok(self.push(out, Op::Sigmoid(a)))
    }

    /// Column means: `n x d -> 1 x d`.
    pub fn mean_pool(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if x.rows() == 0 {
            return Err(AutodiffError::ShapeMismatch { op: "mean_pool", left: x.shape(), right: [1, x.cols()] });
        }
        let n = x.rows() as f64;
        let out = Tensor::from_fn(1, x.cols(), |_, c| (0..x.rows()).map(|r| x.get(r, c)).sum::<f64>() / n);
        Ok(self.push(check("mean_pool", out)?, Op::MeanPool(a)))
    }

    /// Column sums: `n x d -> 1 x d`.
    pub fn sum_pool(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        let out = Tensor::from_fn(1, x.cols(), |_, c| (0..x.rows()).map(|r| x.get(r, c)).sum::<f64>());
        Ok(self.push(check("sum_pool", out)?, Op::SumPool(a)))
    }

    /// Side-by-side concatenation of tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let rows = self.shape(parts[0])[0];
        for &p in parts {
            if self.shape(p)[0] != rows {
                return Err(AutodiffError::ShapeMismatch { op: "concat_cols", left: self.shape(parts[0]), right: self.shape(p) });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::new(rows, cols, data)?;
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Stacks tensors with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let cols = self.shape(parts[0])[1];
        for &p in parts {
            if self.shape(p)[1] != cols {
                return Err(AutodiffError::ShapeMismatch { op: "concat_rows", left: self.shape(parts[0]), right: self.shape(p) });
            }
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let rows = parts.iter().map(|&p| self.shape(p)[0]).sum();
        let out = Tensor::new(rows, cols, data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    /// Row `k` of the output is row `index[k]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= x.rows()) {
            return Err(AutodiffError::IndexOutOfRange { op: "gather_rows", index: bad, len: x.rows() });
        }
        let mut data = Vec::with_capacity(index.len() * x.cols());
        for &i in index {
            data.extend_from_slice(x.row(i));
        }
        let out = Tensor::new(index.len(), x.cols(), data)?;
        Ok(self.push(out, Op::Gather(a, index.to_vec())))
    }

    /// Adds row `k` of `a` into output row `index[k]`; the adjoint of
    /// [`Tape::gather_rows`].
    pub fn scatter_add(&mut self, a: Var, index: &[usize], rows: usize) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if index.len() != x.rows() {
            return Err(AutodiffError::ShapeMismatch { op: "scatter_add", left: x.shape(), right: [index.len(), 1] });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(AutodiffError::IndexOutOfRange { op: "scatter_add", index: bad, len: rows });
        }
        let mut out = Tensor::zeros(rows, x.cols());
        for (k, &i) in index.iter().enumerate() {
            for (o, v) in out.row_mut(i).iter_mut().zip(x.row(k)) {
                *o += v;
            }
        }
        Ok(self.push(check("scatter_add", out)?, Op::ScatterAdd(a, index.to_vec())))
    }

    /// Mean binary cross-entropy of `n x 1` logits against 0/1 targets.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var, AutodiffError> {
        let x = self.value(logits);
        if x.shape() != [targets.len(), 1] || targets.is_empty() {
            return Err(AutodiffError::ShapeMismatch { op: "bce_with_logits", left: x.shape(), right: [targets.len(), 1] });
        }
        let total: f64 = x
            .data()
            .iter()
            .zip(targets)
            .map(|(&z, &y)| z.max(0.0) - z * y + libm::log1p(libm::exp(-z.abs())))
            .sum();
        let out = Tensor::scalar(total / targets.len() as f64);
        Ok(self.push(check("bce_with_logits", out)?, Op::BceWithLogits(logits, targets.to_vec())))
    }

    /// Back-propagates from the scalar `loss`, adding parameter gradients into
    /// `store` (existing gradients are accumulated, not overwritten).
    pub fn backward(self, loss: Var, store: &mut ParameterStore) -> Result<(), AutodiffError> {
        if self.shape(loss) != [1, 1] {
            return Err(AutodiffError::NotScalar(self.shape(loss)));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let nodes = &self.nodes;
        let val = |v: Var| &nodes[v.0].value;

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &nodes[i].op {
                Op::Leaf => {}
                Op::Param(id) => {
                    if !g.is_finite() {
                        return Err(AutodiffError::NonFinite { op: "backward" });
                    }
                    store.grad_mut(*id).add_assign(&g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, b) => {
                    let gb = Tensor::from_fn(1, g.cols(), |_, c| (0..g.rows()).map(|r| g.get(r, c)).sum());
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (x, y) = (val(*a), val(*b));
                    if x.shape() == y.shape() {
                        let ga = Tensor::from_fn(g.rows(), g.cols(), |r, c| g.get(r, c) * y.get(r, c));
                        let gb = Tensor::from_fn(g.rows(), g.cols(), |r, c| g.get(r, c) * x.get(r, c));
                        acc(&mut grads, *b, gb);
                        acc(&mut grads, *a, ga);
                    } else {
                        let ga = Tensor::from_fn(g.rows(), g.cols(), |r, c| g.get(r, c) * y.get(r, 0));
                        let gb = Tensor::from_fn(g.rows(), 1, |r, _| {
                            g.row(r).iter().zip(x.row(r)).map(|(p, q)| p * q).sum()
                        });
                        acc(&mut grads, *b, gb);
                        acc(&mut grads, *a, ga);
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(val(*b));
                    let gb = val(*a).t_matmul(&g);
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let x = val(*a);
                    // subgradient at 0 is 0
                    let ga = Tensor::from_fn(g.rows(), g.cols(), |r, c| if x.get(r, c) > 0.0 { g.get(r, c) } else { 0.0 });
                    acc(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let y = &nodes[i].value;
                    let ga = Tensor::from_fn(g.rows(), g.cols(), |r, c| {
                        let s = y.get(r, c);
                        g.get(r, c) * s * (1.0 - s)
                    });
                    acc(&mut grads, *a, ga);
                }
                Op::MeanPool(a) => {
                    let n = val(*a).rows();
                    let ga = Tensor::from_fn(n, g.cols(), |_, c| g.get(0, c) / n as f64);
                    acc(&mut grads, *a, ga);
                }
                Op::SumPool(a) => {
                    let n = val(*a).rows();
                    let ga = Tensor::from_fn(n, g.cols(), |_, c| g.get(0, c));
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = val(p).cols();
                        let gp = Tensor::from_fn(g.rows(), w, |r, c| g.get(r, offset + c));
                        offset += w;
                        acc(&mut grads, p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let h = val(p).rows();
                        let gp = Tensor::from_fn(h, g.cols(), |r, c| g.get(offset + r, c));
                        offset += h;
                        acc(&mut grads, p, gp);
                    }
                }
                Op::Gather(a, index) => {
                    let mut ga = Tensor::zeros(val(*a).rows(), g.cols());
                    for (k, &r) in index.iter().enumerate() {
                        for (o, v) in ga.row_mut(r).iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::ScatterAdd(a, index) => {
                    let mut data = Vec::with_capacity(index.len() * g.cols());
                    for &r in index {
                        data.extend_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, Tensor::new(index.len(), g.cols(), data)?);
                }
                Op::BceWithLogits(a, targets) => {
                    let x = val(*a);
                    let n = targets.len() as f64;
                    let scale = g.item() / n;
                    let ga = Tensor::from_fn(x.rows(), 1, |r, _| (sigmoid(x.get(r, 0)) - targets[r]) * scale);
                    acc(&mut grads, *a, ga);
                }
            }
        }
        Ok(())
    }
}
