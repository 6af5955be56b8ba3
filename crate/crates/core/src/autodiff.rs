//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records every operation of one forward pass. Nodes are
//! appended in evaluation order, so a single reverse sweep in
//! [`Graph::backward`] visits every node after all of its consumers.
//! Trainable tensors enter the graph through [`Graph::param`] and receive
//! their gradients in a [`Gradients`] buffer indexed like the
//! [`ParamStore`].

use ndarray::{s, Array2, Axis};

use crate::crf::{self, Transitions};
use crate::params::{ParamId, ParamStore};
use crate::preprocess::Tag;
use crate::Mat;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    /// `a + r` with the 1×d row `r` broadcast over rows.
    AddRow(Var, Var),
    /// `a ⊙ r` with the 1×d row `r` broadcast over rows.
    MulRow(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Tanh(Var),
    Sigmoid(Var),
    Gelu(Var),
    SoftmaxRows(Var),
    /// Per-row standardization; stores `1/σ` per row.
    NormalizeRows(Var, Vec<f64>),
    GatherRows(Var, Vec<usize>),
    TopRows(Var, usize),
    SliceCols(Var, usize, usize),
    ConcatCols(Vec<Var>),
    /// Column-wise max over rows; stores the winning row per column.
    MaxPool(Var, Vec<usize>),
    /// `G[s,t] = −Σ_f |a[s,f] − b[t,f]|`
    NegL1(Var, Var),
    /// Elementwise multiplication by a fixed (pre-scaled) mask.
    Dropout(Var, Mat),
    Sum(Vec<Var>),
    /// CRF negative log-likelihood with cached partial derivatives for
    /// emissions, transitions, start and end scores.
    CrfNll([Var; 4], [Mat; 4]),
}

struct Node {
    value: Option<Mat>,
    op: Op,
}

/// Gradient buffer aligned with a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Gradients {
    pub grads: Vec<Mat>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: store
                .tensors()
                .iter()
                .map(|t| Mat::zeros(t.raw_dim()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.grads[id.index()]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.grads[id.index()]
    }

    /// Adds `other` scaled by `weight`, tensor by tensor in store order.
    pub fn add_scaled(&mut self, other: &Gradients, weight: f64) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.scaled_add(weight, b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            g.mapv_inplace(|v| v * factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

pub struct Graph<'p> {
    params: Option<&'p ParamStore>,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_K * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Mat) -> Mat {
    let mut y = x.clone();
    for mut row in y.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    y
}

/// Variance floor inside layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-12;

impl Default for Graph<'static> {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph<'static> {
    /// A graph without trainable parameters, for evaluating plain functions.
    pub fn new() -> Self {
        Self {
            params: None,
            nodes: Vec::new(),
            param_vars: Vec::new(),
        }
    }
}

impl<'p> Graph<'p> {
    pub fn with_params(params: &'p ParamStore) -> Self {
        Self {
            params: Some(params),
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Mat {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(m), _) => m,
            (None, Op::Param(id)) => self.params.expect("param node without store").get(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    /// The single entry of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.dim(), (1, 1));
        m[[0, 0]]
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Mat) -> Var {
        self.push(value, Op::Input)
    }

    /// Node for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.index()] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(&self.value(b).t());
        self.push(out, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) * self.value(b);
        self.push(out, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        debug_assert_eq!(self.shape(row).0, 1);
        let out = self.value(a) + self.value(row);
        self.push(out, Op::AddRow(a, row))
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        debug_assert_eq!(self.shape(row).0, 1);
        let out = self.value(a) * self.value(row);
        self.push(out, Op::MulRow(a, row))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a) * factor;
        self.push(out, Op::Scale(a, factor))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|v| 1.0 - v);
        self.push(out, Op::OneMinus(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(gelu);
        self.push(out, Op::Gelu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a));
        self.push(out, Op::SoftmaxRows(a))
    }

    /// Standardizes each row to zero mean and unit variance (population
    /// variance, floored by [`LAYER_NORM_EPS`]).
    pub fn normalize_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let d = x.ncols() as f64;
        let mut out = x.clone();
        let mut inv_std = Vec::with_capacity(x.nrows());
        for mut row in out.rows_mut() {
            let mean = row.sum() / d;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / d;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.mapv_inplace(|v| v * inv);
            inv_std.push(inv);
        }
        self.push(out, Op::NormalizeRows(a, inv_std))
    }

    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut out = Mat::zeros((ids.len(), t.ncols()));
        for (mut row, &id) in out.rows_mut().into_iter().zip(ids) {
            row.assign(&t.row(id));
        }
        self.push(out, Op::GatherRows(table, ids.to_vec()))
    }

    pub fn top_rows(&mut self, a: Var, n: usize) -> Var {
        let out = self.value(a).slice(s![..n, ..]).to_owned();
        self.push(out, Op::TopRows(a, n))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(out, Op::SliceCols(a, start, len))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("row counts differ");
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Column-wise maximum over rows, giving a 1×d row. Ties go to the
    /// earliest row.
    pub fn max_pool(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = Mat::zeros((1, x.ncols()));
        let mut arg = Vec::with_capacity(x.ncols());
        for (f, col) in x.columns().into_iter().enumerate() {
            let mut best = 0;
            for (r, &v) in col.iter().enumerate() {
                if v > col[best] {
                    best = r;
                }
            }
            out[[0, f]] = col[best];
            arg.push(best);
        }
        self.push(out, Op::MaxPool(a, arg))
    }

    pub fn neg_l1(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        let mut out = Mat::zeros((x.nrows(), y.nrows()));
        for (s, xr) in x.rows().into_iter().enumerate() {
            for (t, yr) in y.rows().into_iter().enumerate() {
                out[[s, t]] = -xr.iter().zip(yr).map(|(p, q)| (p - q).abs()).sum::<f64>();
            }
        }
        self.push(out, Op::NegL1(a, b))
    }

    /// Multiplies by a fixed mask whose entries already include the inverted
    /// dropout scaling.
    pub fn dropout_mask(&mut self, a: Var, mask: Mat) -> Var {
        let out = self.value(a) * &mask;
        self.push(out, Op::Dropout(a, mask))
    }

    /// Sum of 1×1 nodes.
    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let total: f64 = parts.iter().map(|&p| self.scalar(p)).sum();
        self.push(Array2::from_elem((1, 1), total), Op::Sum(parts.to_vec()))
    }

    /// CRF negative log-likelihood of `gold` given N×3 emissions, 3×3
    /// transitions and 1×3 start/end scores.
    pub fn crf_nll(
        &mut self,
        emissions: Var,
        transitions: Var,
        start: Var,
        end: Var,
        gold: &[Tag],
    ) -> Var {
        let trans = Transitions::from_mats(
            self.value(transitions),
            self.value(start),
            self.value(end),
        );
        let g = crf::nll_gradients(self.value(emissions).view(), &trans, gold);
        let cached = [g.emissions, g.transitions, g.start, g.end];
        self.push(
            Array2::from_elem((1, 1), g.loss),
            Op::CrfNll([emissions, transitions, start, end], cached),
        )
    }

    /// Backpropagates from the 1×1 node `output`.
    pub fn backward(&self, output: Var) -> Gradients {
        let store = self.params.expect("backward needs a parameter store");
        let mut param_grads = Gradients::zeros_like(store);
        let grads = self.backward_all(output);
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&node.op, &grads[i]) {
                *param_grads.get_mut(*id) += g;
            }
        }
        param_grads
    }

    /// Gradient of `output` with respect to an input node.
    pub fn grad_of_input(&self, output: Var, input: Var) -> Mat {
        self.backward_all(output)[input.0]
            .clone()
            .unwrap_or_else(|| Mat::zeros(self.value(input).raw_dim()))
    }

    fn backward_all(&self, output: Var) -> Vec<Option<Mat>> {
        assert_eq!(self.shape(output), (1, 1), "backward from a non-scalar");
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Array2::ones((1, 1)));

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input | Op::Param(_) => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    acc(&mut grads, *a, g.dot(&self.value(*b).t()));
                    acc(&mut grads, *b, self.value(*a).t().dot(&g));
                }
                Op::MatMulT(a, b) => {
                    acc(&mut grads, *a, g.dot(self.value(*b)));
                    acc(&mut grads, *b, g.t().dot(self.value(*a)));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Mul(a, b) => {
                    acc(&mut grads, *a, &g * self.value(*b));
                    acc(&mut grads, *b, &g * self.value(*a));
                }
                Op::AddRow(a, r) => {
                    acc(&mut grads, *r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g);
                }
                Op::MulRow(a, r) => {
                    let gr = (&g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *r, gr);
                    acc(&mut grads, *a, &g * self.value(*r));
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g * *c),
                Op::OneMinus(a) => acc(&mut grads, *a, -g),
                Op::Tanh(a) => {
                    let y = node.value.as_ref().unwrap();
                    acc(&mut grads, *a, &g * &y.mapv(|t| 1.0 - t * t));
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().unwrap();
                    acc(&mut grads, *a, &g * &y.mapv(|t| t * (1.0 - t)));
                }
                Op::Gelu(a) => {
                    acc(&mut grads, *a, &g * &self.value(*a).mapv(gelu_grad));
                }
                Op::SoftmaxRows(a) => {
                    let y = node.value.as_ref().unwrap();
                    let gy = &g * y;
                    let dot = gy.sum_axis(Axis(1)).insert_axis(Axis(1));
                    acc(&mut grads, *a, gy - y * &dot);
                }
                Op::NormalizeRows(a, inv_std) => {
                    let y = node.value.as_ref().unwrap();
                    let d = y.ncols() as f64;
                    let mut dx = g.clone();
                    for (r, mut row) in dx.rows_mut().into_iter().enumerate() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let mean_g = gr.sum() / d;
                        let mean_gy = gr.dot(&yr) / d;
                        for f in 0..row.len() {
                            row[f] = inv_std[r] * (gr[f] - mean_g - yr[f] * mean_gy);
                        }
                    }
                    acc(&mut grads, *a, dx);
                }
                Op::GatherRows(table, ids) => {
                    let mut dt = Mat::zeros(self.value(*table).raw_dim());
                    for (r, &id) in ids.iter().enumerate() {
                        let mut row = dt.row_mut(id);
                        row += &g.row(r);
                    }
                    acc(&mut grads, *table, dt);
                }
                Op::TopRows(a, n) => {
                    let mut da = Mat::zeros(self.value(*a).raw_dim());
                    da.slice_mut(s![..*n, ..]).assign(&g);
                    acc(&mut grads, *a, da);
                }
                Op::SliceCols(a, start, len) => {
                    let mut da = Mat::zeros(self.value(*a).raw_dim());
                    da.slice_mut(s![.., *start..*start + *len]).assign(&g);
                    acc(&mut grads, *a, da);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(&mut grads, p, g.slice(s![.., offset..offset + w]).to_owned());
                        offset += w;
                    }
                }
                Op::MaxPool(a, arg) => {
                    let mut da = Mat::zeros(self.value(*a).raw_dim());
                    for (f, &r) in arg.iter().enumerate() {
                        da[[r, f]] += g[[0, f]];
                    }
                    acc(&mut grads, *a, da);
                }
                Op::NegL1(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let mut dx = Mat::zeros(x.raw_dim());
                    let mut dy = Mat::zeros(y.raw_dim());
                    for s in 0..x.nrows() {
                        for t in 0..y.nrows() {
                            let gst = g[[s, t]];
                            if gst == 0.0 {
                                continue;
                            }
                            for f in 0..x.ncols() {
                                let diff = x[[s, f]] - y[[t, f]];
                                let sign = if diff > 0.0 {
                                    1.0
                                } else if diff < 0.0 {
                                    -1.0
                                } else {
                                    0.0
                                };
                                dx[[s, f]] -= gst * sign;
                                dy[[t, f]] += gst * sign;
                            }
                        }
                    }
                    acc(&mut grads, *a, dx);
                    acc(&mut grads, *b, dy);
                }
                Op::Dropout(a, mask) => acc(&mut grads, *a, &g * mask),
                Op::Sum(parts) => {
                    for &p in parts {
                        acc(&mut grads, p, g.clone());
                    }
                }
                Op::CrfNll(inputs, cached) => {
                    let up = g[[0, 0]];
                    for (&v, d) in inputs.iter().zip(cached) {
                        acc(&mut grads, v, d * up);
                    }
                }
            }
        }
        grads
    }
}
