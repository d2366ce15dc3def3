//! Tape-based reverse-mode automatic differentiation over 2-D tensors.
//!
//! A [`Graph`] records every operation applied to its nodes. Calling
//! [`Graph::backward`] once walks the tape in reverse and returns the gradient
//! of a scalar node with respect to every node that influenced it. Shape
//! mismatches inside the graph are programmer errors and panic; public model
//! entry points validate user-supplied shapes before recording.

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Elu(Var),
    Exp(Var),
    Sum(Var),
    RowSum(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    RowNormPow(Var, f64),
    RowLogSumExp(Var),
    GaussPairLogPdf(Var, Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded computation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients of a scalar with respect to every node of a graph.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `v`, or `None` if `v` did not influence the loss.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`, zero-filled when `v` was unused.
    pub fn wrt_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.wrt(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.rows(), like.cols()))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Adds an input or parameter node.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self
            .value(a)
            .matmul(self.value(b))
            .expect("graph matmul shape mismatch");
        self.push(out, Op::MatMul(a, b))
    }

    /// `a + row`, broadcasting a `1×c` row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (av, rv) = (self.value(a), self.value(row));
        assert!(rv.rows() == 1 && rv.cols() == av.cols(), "add_row shape");
        let mut out = av.clone();
        let r = rv.as_slice().to_vec();
        for i in 0..out.rows() {
            for (x, b) in out.row_mut(i).iter_mut().zip(&r) {
                *x += b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    /// `a ⊙ row`, broadcasting a `1×c` row over every row of `a`.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let (av, rv) = (self.value(a), self.value(row));
        assert!(rv.rows() == 1 && rv.cols() == av.cols(), "mul_row shape");
        let mut out = av.clone();
        let r = rv.as_slice().to_vec();
        for i in 0..out.rows() {
            for (x, b) in out.row_mut(i).iter_mut().zip(&r) {
                *x *= b;
            }
        }
        self.push(out, Op::MulRow(a, row))
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, name: &str) -> Tensor {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "{name} shape mismatch");
        let data = av
            .as_slice()
            .iter()
            .zip(bv.as_slice())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::from_vec(av.rows(), av.cols(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip_with(a, b, |x, y| x + y, "add");
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip_with(a, b, |x, y| x - y, "sub");
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip_with(a, b, |x, y| x * y, "mul");
        self.push(out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x + s);
        self.push(out, Op::AddScalar(a))
    }

    /// ELU with α = 1.
    pub fn elu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(elu);
        self.push(out, Op::Elu(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a))
    }

    /// Sum of all entries, as a `1×1` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).as_slice().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Per-row sum, `r×c → r×1`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let data = av.iter_rows().map(|r| r.iter().sum()).collect();
        let out = Tensor::from_vec(av.rows(), 1, data).expect("row count");
        self.push(out, Op::RowSum(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let vals: Vec<&Tensor> = parts.iter().map(|&v| self.value(v)).collect();
        let out = Tensor::hcat(&vals).expect("concat_cols row mismatch");
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let vals: Vec<&Tensor> = parts.iter().map(|&v| self.value(v)).collect();
        let out = Tensor::vcat(&vals).expect("concat_rows column mismatch");
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let out = self.value(a).select_cols(start, end);
        self.push(out, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let av = self.value(a);
        let c = av.cols();
        let data = av.as_slice()[start * c..end * c].to_vec();
        let out = Tensor::from_vec(end - start, c, data).expect("slice_rows");
        self.push(out, Op::SliceRows(a, start))
    }

    /// Per-row `‖a_i‖^β`, `r×c → r×1`. The gradient at a zero row is taken
    /// to be zero.
    pub fn row_norm_pow(&mut self, a: Var, beta: f64) -> Var {
        let av = self.value(a);
        let data = av
            .iter_rows()
            .map(|r| {
                let sq: f64 = r.iter().map(|x| x * x).sum();
                if beta == 2.0 {
                    sq
                } else {
                    sq.sqrt().powf(beta)
                }
            })
            .collect();
        let out = Tensor::from_vec(av.rows(), 1, data).expect("row count");
        self.push(out, Op::RowNormPow(a, beta))
    }

    /// Numerically stable per-row log-sum-exp, `r×c → r×1`.
    pub fn row_log_sum_exp(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let data = av.iter_rows().map(log_sum_exp).collect();
        let out = Tensor::from_vec(av.rows(), 1, data).expect("row count");
        self.push(out, Op::RowLogSumExp(a))
    }

    /// Pairwise univariate Gaussian log-densities: entry `(i, j)` is
    /// `log N(z_i | mu_j, exp(logvar_j))`. All three inputs are `n×1`.
    pub fn gauss_pair_log_pdf(&mut self, z: Var, mu: Var, logvar: Var) -> Var {
        let (zv, mv, lv) = (self.value(z), self.value(mu), self.value(logvar));
        assert!(zv.cols() == 1 && mv.cols() == 1 && lv.cols() == 1);
        assert_eq!(mv.rows(), lv.rows());
        let (n, m) = (zv.rows(), mv.rows());
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let mut out = Tensor::zeros(n, m);
        for i in 0..n {
            let zi = zv.as_slice()[i];
            for j in 0..m {
                let d = zi - mv.as_slice()[j];
                let l = lv.as_slice()[j];
                out[(i, j)] = -0.5 * (ln2pi + l + d * d * (-l).exp());
            }
        }
        self.push(out, Op::GaussPairLogPdf(z, mu, logvar))
    }

    /// Reverse pass from the scalar `loss`. May be called once per graph.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::Usage("backward called twice on the same graph".into()));
        }
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            // Interior gradients are dropped once propagated.
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = slot(&mut grads, *a, av);
                    gemm(false, true, &g, bv, ga, 1.0);
                    let gb = slot(&mut grads, *b, bv);
                    gemm(true, false, av, &g, gb, 1.0);
                }
                Op::AddRow(a, r) => {
                    let rv = self.value(*r);
                    let gr = slot(&mut grads, *r, rv);
                    for row in g.iter_rows() {
                        for (x, y) in gr.as_mut_slice().iter_mut().zip(row) {
                            *x += y;
                        }
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::MulRow(a, r) => {
                    let (av, rv) = (self.value(*a), self.value(*r));
                    let gr = slot(&mut grads, *r, rv);
                    for (grow, arow) in g.iter_rows().zip(av.iter_rows()) {
                        for ((x, gy), ay) in gr.as_mut_slice().iter_mut().zip(grow).zip(arow) {
                            *x += gy * ay;
                        }
                    }
                    let rs = rv.as_slice();
                    let mut ga = g;
                    let c = ga.cols();
                    for (k, v) in ga.as_mut_slice().iter_mut().enumerate() {
                        *v *= rs[k % c];
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|x| -x));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = hadamard(&g, bv);
                    let gb = hadamard(&g, av);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    accumulate(&mut grads, *a, g.map(|x| x * s));
                }
                Op::AddScalar(a) => accumulate(&mut grads, *a, g),
                Op::Elu(a) => {
                    let av = self.value(*a);
                    let mut ga = g;
                    for (x, &inp) in ga.as_mut_slice().iter_mut().zip(av.as_slice()) {
                        if inp <= 0.0 {
                            *x *= inp.exp();
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Exp(a) => {
                    let ga = hadamard(&g, &node.value);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let av = self.value(*a);
                    let ga = Tensor::filled(av.rows(), av.cols(), g.item());
                    accumulate(&mut grads, *a, ga);
                }
                Op::RowSum(a) => {
                    let av = self.value(*a);
                    let mut ga = Tensor::zeros(av.rows(), av.cols());
                    for i in 0..av.rows() {
                        let gi = g.as_slice()[i];
                        ga.row_mut(i).iter_mut().for_each(|x| *x = gi);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        accumulate(&mut grads, p, g.select_cols(start, start + w));
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let c = g.cols();
                    let mut start = 0;
                    for &p in parts {
                        let h = self.value(p).rows();
                        let data = g.as_slice()[start * c..(start + h) * c].to_vec();
                        accumulate(&mut grads, p, Tensor::from_vec(h, c, data).expect("rows"));
                        start += h;
                    }
                }
                Op::SliceCols(a, start) => {
                    let av = self.value(*a);
                    let ga = slot(&mut grads, *a, av);
                    for i in 0..g.rows() {
                        let src = g.row(i);
                        let dst = &mut ga.row_mut(i)[*start..*start + src.len()];
                        for (x, y) in dst.iter_mut().zip(src) {
                            *x += y;
                        }
                    }
                }
                Op::SliceRows(a, start) => {
                    let av = self.value(*a);
                    let c = av.cols();
                    let ga = slot(&mut grads, *a, av);
                    let dst = &mut ga.as_mut_slice()[start * c..start * c + g.len()];
                    for (x, y) in dst.iter_mut().zip(g.as_slice()) {
                        *x += y;
                    }
                }
                Op::RowNormPow(a, beta) => {
                    let beta = *beta;
                    let av = self.value(*a);
                    let mut ga = Tensor::zeros(av.rows(), av.cols());
                    for i in 0..av.rows() {
                        let r = av.row(i);
                        let sq: f64 = r.iter().map(|x| x * x).sum();
                        let coef = if beta == 2.0 {
                            2.0
                        } else if sq > 0.0 {
                            beta * sq.powf(beta / 2.0 - 1.0)
                        } else {
                            0.0
                        };
                        let gi = g.as_slice()[i] * coef;
                        for (x, y) in ga.row_mut(i).iter_mut().zip(r) {
                            *x = gi * y;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::RowLogSumExp(a) => {
                    let av = self.value(*a);
                    let mut ga = Tensor::zeros(av.rows(), av.cols());
                    for i in 0..av.rows() {
                        let lse = node.value.as_slice()[i];
                        let gi = g.as_slice()[i];
                        for (x, y) in ga.row_mut(i).iter_mut().zip(av.row(i)) {
                            *x = gi * (y - lse).exp();
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::GaussPairLogPdf(z, mu, lv) => {
                    let (zv, mv, lvv) = (self.value(*z), self.value(*mu), self.value(*lv));
                    let (n, m) = (zv.rows(), mv.rows());
                    let mut gz = Tensor::zeros(n, 1);
                    let mut gm = Tensor::zeros(m, 1);
                    let mut gl = Tensor::zeros(m, 1);
                    for i in 0..n {
                        let zi = zv.as_slice()[i];
                        for j in 0..m {
                            let gij = g[(i, j)];
                            if gij == 0.0 {
                                continue;
                            }
                            let inv = (-lvv.as_slice()[j]).exp();
                            let d = zi - mv.as_slice()[j];
                            gz.as_mut_slice()[i] -= gij * d * inv;
                            gm.as_mut_slice()[j] += gij * d * inv;
                            gl.as_mut_slice()[j] += gij * (-0.5 + 0.5 * d * d * inv);
                        }
                    }
                    accumulate(&mut grads, *z, gz);
                    accumulate(&mut grads, *mu, gm);
                    accumulate(&mut grads, *lv, gl);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn slot<'a>(grads: &'a mut [Option<Tensor>], v: Var, like: &Tensor) -> &'a mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(like.rows(), like.cols()))
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (x, y) in existing.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *x += y;
            }
        }
        empty => *empty = Some(g),
    }
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

pub(crate) fn log_sum_exp(r: &[f64]) -> f64 {
    let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + r.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
