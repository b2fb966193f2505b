//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records every forward op on a tape; [`Graph::backward`] walks
//! the tape once in reverse and accumulates exact vector-Jacobian products.
//! The op set is exactly what the frame-domain model and its losses need:
//! matmul, broadcast elementwise arithmetic, a few pointwise nonlinearities,
//! reductions, slicing/concatenation, frame gathering and overlap-add.
//!
//! Graphs are rebuilt every training step (the set of live parameters
//! changes per step), so recording is kept allocation-light and all
//! iteration orders are fixed: two identical graphs produce bitwise
//! identical values and gradients.

use std::cell::RefCell;

use ndarray::{Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};

type Idx = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    // Input index kept for tape readability in debug dumps.
    StopGrad(#[allow(dead_code)] Idx),
    Add(Idx, Idx),
    Sub(Idx, Idx),
    Mul(Idx, Idx),
    Div(Idx, Idx),
    Matmul(Idx, Idx),
    Tanh(Idx),
    Sigmoid(Idx),
    Sin(Idx),
    Ln(Idx),
    Abs(Idx),
    Sqrt(Idx),
    Powf(Idx, f64),
    Scale(Idx, f64),
    AddScalar(Idx, #[allow(dead_code)] f64),
    Sum(Idx),
    Mean(Idx),
    Reshape(Idx),
    SliceRows { input: Idx, start: usize },
    SliceCols { input: Idx, start: usize },
    ConcatRows(Vec<Idx>),
    ConcatCols(Vec<Idx>),
    GatherFrames { input: Idx, frame: usize, hop: usize },
    OverlapAdd { input: Idx, hop: usize },
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

/// Tape of recorded operations. Confined to one thread.
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Option<Array2<f64>>>>,
}

/// Handle to a node in a [`Graph`]. Cheap to copy; all ops go through it.
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    idx: Idx,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (r, c) = self.shape();
        write!(f, "Var#{} [{r}x{c}]", self.idx)
    }
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: RefCell::new(Vec::new()),
            grads: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var {
            graph: self,
            idx: nodes.len() - 1,
        }
    }

    /// Non-trainable input.
    pub fn constant(&self, value: Array2<f64>) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    /// Trainable input: participates in backward.
    pub fn param(&self, value: Array2<f64>) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// 1x1 constant.
    pub fn scalar(&self, v: f64) -> Var<'_> {
        self.constant(Array2::from_elem((1, 1), v))
    }

    /// 1xN constant.
    pub fn row(&self, v: &[f64]) -> Var<'_> {
        self.constant(Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row shape"))
    }

    pub fn concat_rows<'g>(&'g self, parts: &[Var<'g>]) -> Result<Var<'g>> {
        if parts.is_empty() {
            return Err(Error::invalid("concat_rows needs at least one input"));
        }
        let nodes = self.nodes.borrow();
        let cols = nodes[parts[0].idx].value.ncols();
        let mut rows = 0;
        let mut needs = false;
        for p in parts {
            let v = &nodes[p.idx].value;
            if v.ncols() != cols {
                return Err(Error::shape("concat_rows", (v.nrows(), v.ncols()), (rows, cols)));
            }
            rows += v.nrows();
            needs |= nodes[p.idx].needs_grad;
        }
        let mut out = Array2::zeros((rows, cols));
        let mut r = 0;
        for p in parts {
            let v = &nodes[p.idx].value;
            out.slice_mut(ndarray::s![r..r + v.nrows(), ..]).assign(v);
            r += v.nrows();
        }
        drop(nodes);
        Ok(self.push(out, Op::ConcatRows(parts.iter().map(|p| p.idx).collect()), needs))
    }

    pub fn concat_cols<'g>(&'g self, parts: &[Var<'g>]) -> Result<Var<'g>> {
        if parts.is_empty() {
            return Err(Error::invalid("concat_cols needs at least one input"));
        }
        let nodes = self.nodes.borrow();
        let rows = nodes[parts[0].idx].value.nrows();
        let mut cols = 0;
        let mut needs = false;
        for p in parts {
            let v = &nodes[p.idx].value;
            if v.nrows() != rows {
                return Err(Error::shape("concat_cols", (v.nrows(), v.ncols()), (rows, cols)));
            }
            cols += v.ncols();
            needs |= nodes[p.idx].needs_grad;
        }
        let mut out = Array2::zeros((rows, cols));
        let mut c = 0;
        for p in parts {
            let v = &nodes[p.idx].value;
            out.slice_mut(ndarray::s![.., c..c + v.ncols()]).assign(v);
            c += v.ncols();
        }
        drop(nodes);
        Ok(self.push(out, Op::ConcatCols(parts.iter().map(|p| p.idx).collect()), needs))
    }

    /// Strided sliding frames: row m of the output is
    /// `x[0, m*hop .. m*hop+frame]`. Input must be a single row.
    pub fn gather_frames<'g>(&'g self, x: Var<'g>, frame: usize, hop: usize) -> Result<Var<'g>> {
        let (val, needs) = {
            let nodes = self.nodes.borrow();
            let v = &nodes[x.idx].value;
            if v.nrows() != 1 {
                return Err(Error::shape("gather_frames input", v.dim(), (1, v.ncols())));
            }
            let len = v.ncols();
            if frame == 0 || hop == 0 {
                return Err(Error::invalid("gather_frames needs frame > 0 and hop > 0"));
            }
            if len < frame {
                return Err(Error::invalid(format!(
                    "signal of {len} samples is shorter than one frame ({frame})"
                )));
            }
            let m = (len - frame) / hop + 1;
            let val = Array2::from_shape_fn((m, frame), |(i, j)| v[[0, i * hop + j]]);
            (val, nodes[x.idx].needs_grad)
        };
        Ok(self.push(
            val,
            Op::GatherFrames {
                input: x.idx,
                frame,
                hop,
            },
            needs,
        ))
    }

    /// Overlap-add synthesis: `out[0, m*hop + j] += frames[m, j]`, clipped
    /// to `out_len` columns.
    pub fn overlap_add<'g>(&'g self, frames: Var<'g>, hop: usize, out_len: usize) -> Result<Var<'g>> {
        let (val, needs) = {
            let nodes = self.nodes.borrow();
            let v = &nodes[frames.idx].value;
            if hop == 0 || out_len == 0 {
                return Err(Error::invalid("overlap_add needs hop > 0 and out_len > 0"));
            }
            let mut out = Array2::zeros((1, out_len));
            for m in 0..v.nrows() {
                let off = m * hop;
                if off >= out_len {
                    break;
                }
                let take = (out_len - off).min(v.ncols());
                for j in 0..take {
                    out[[0, off + j]] += v[[m, j]];
                }
            }
            (out, nodes[frames.idx].needs_grad)
        };
        Ok(self.push(val, Op::OverlapAdd { input: frames.idx, hop }, needs))
    }

    fn clear_grads(&self) {
        let n = self.nodes.borrow().len();
        let mut g = self.grads.borrow_mut();
        g.clear();
        g.resize(n, None);
    }

    /// Reverse pass from a scalar loss. Gradients of earlier backward calls
    /// on the same graph are discarded.
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        debug_assert!(std::ptr::eq(loss.graph, self));
        let nodes = self.nodes.borrow();
        let l = &nodes[loss.idx];
        if l.value.dim() != (1, 1) {
            return Err(Error::shape("backward loss", l.value.dim(), (1, 1)));
        }
        self.clear_grads();
        let mut grads = self.grads.borrow_mut();
        if !l.needs_grad {
            return Ok(()); // loss does not depend on any parameter
        }
        grads[loss.idx] = Some(Array2::ones((1, 1)));

        for i in (0..=loss.idx).rev() {
            if !nodes[i].needs_grad {
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            let needs = |j: Idx| nodes[j].needs_grad;
            let val = |j: Idx| &nodes[j].value;
            match &nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(g); // keep for the caller
                    continue;
                }
                Op::StopGrad(_) => {}
                Op::Add(a, b) => {
                    if needs(*a) {
                        acc(&mut grads, *a, reduce_to(g.view(), val(*a).dim()));
                    }
                    if needs(*b) {
                        acc(&mut grads, *b, reduce_to(g.view(), val(*b).dim()));
                    }
                }
                Op::Sub(a, b) => {
                    if needs(*a) {
                        acc(&mut grads, *a, reduce_to(g.view(), val(*a).dim()));
                    }
                    if needs(*b) {
                        acc(&mut grads, *b, reduce_to(g.mapv(|v| -v).view(), val(*b).dim()));
                    }
                }
                Op::Mul(a, b) => {
                    let shape = g.dim();
                    if needs(*a) {
                        let bb = val(*b).broadcast(shape).expect("recorded broadcast");
                        let mut c = g.clone();
                        c.zip_mut_with(&bb, |x, &y| *x *= y);
                        acc(&mut grads, *a, reduce_to(c.view(), val(*a).dim()));
                    }
                    if needs(*b) {
                        let ab = val(*a).broadcast(shape).expect("recorded broadcast");
                        let mut c = g.clone();
                        c.zip_mut_with(&ab, |x, &y| *x *= y);
                        acc(&mut grads, *b, reduce_to(c.view(), val(*b).dim()));
                    }
                }
                Op::Div(a, b) => {
                    let shape = g.dim();
                    if needs(*a) {
                        let bb = val(*b).broadcast(shape).expect("recorded broadcast");
                        let mut c = g.clone();
                        c.zip_mut_with(&bb, |x, &y| *x /= y);
                        acc(&mut grads, *a, reduce_to(c.view(), val(*a).dim()));
                    }
                    if needs(*b) {
                        let ab = val(*a).broadcast(shape).expect("recorded broadcast");
                        let bb = val(*b).broadcast(shape).expect("recorded broadcast");
                        let mut c = g.clone();
                        Zip::from(&mut c).and(&ab).and(&bb).for_each(|x, &av, &bv| {
                            *x *= -av / (bv * bv);
                        });
                        acc(&mut grads, *b, reduce_to(c.view(), val(*b).dim()));
                    }
                }
                Op::Matmul(a, b) => {
                    if needs(*a) {
                        acc(&mut grads, *a, g.dot(&val(*b).t()));
                    }
                    if needs(*b) {
                        acc(&mut grads, *b, val(*a).t().dot(&g));
                    }
                }
                Op::Tanh(a) => {
                    let y = &nodes[i].value;
                    let mut c = g;
                    c.zip_mut_with(y, |x, &yv| *x *= 1.0 - yv * yv);
                    acc(&mut grads, *a, c);
                }
                Op::Sigmoid(a) => {
                    let y = &nodes[i].value;
                    let mut c = g;
                    c.zip_mut_with(y, |x, &yv| *x *= yv * (1.0 - yv));
                    acc(&mut grads, *a, c);
                }
                Op::Sin(a) => {
                    let mut c = g;
                    c.zip_mut_with(val(*a), |x, &v| *x *= v.cos());
                    acc(&mut grads, *a, c);
                }
                Op::Ln(a) => {
                    let mut c = g;
                    c.zip_mut_with(val(*a), |x, &v| *x /= v);
                    acc(&mut grads, *a, c);
                }
                Op::Abs(a) => {
                    let mut c = g;
                    c.zip_mut_with(val(*a), |x, &v| {
                        *x *= if v == 0.0 { 0.0 } else { v.signum() }
                    });
                    acc(&mut grads, *a, c);
                }
                Op::Sqrt(a) => {
                    let y = &nodes[i].value;
                    let mut c = g;
                    c.zip_mut_with(y, |x, &yv| *x *= 0.5 / yv);
                    acc(&mut grads, *a, c);
                }
                Op::Powf(a, p) => {
                    let mut c = g;
                    c.zip_mut_with(val(*a), |x, &v| *x *= p * v.powf(p - 1.0));
                    acc(&mut grads, *a, c);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g.mapv(|v| v * s)),
                Op::AddScalar(a, _) => acc(&mut grads, *a, g),
                Op::Sum(a) => {
                    let shape = val(*a).dim();
                    acc(&mut grads, *a, Array2::from_elem(shape, g[[0, 0]]));
                }
                Op::Mean(a) => {
                    let shape = val(*a).dim();
                    let n = (shape.0 * shape.1) as f64;
                    acc(&mut grads, *a, Array2::from_elem(shape, g[[0, 0]] / n));
                }
                Op::Reshape(a) => {
                    let shape = val(*a).dim();
                    let c = g
                        .into_shape_with_order(shape)
                        .expect("reshape grad: element count fixed at record time");
                    acc(&mut grads, *a, c);
                }
                Op::SliceRows { input, start } => {
                    let (rows, _) = g.dim();
                    add_region(&mut grads, *input, val(*input).dim(), |dst| {
                        dst.slice_mut(ndarray::s![*start..*start + rows, ..])
                            .zip_mut_with(&g, |x, &y| *x += y);
                    });
                }
                Op::SliceCols { input, start } => {
                    let (_, cols) = g.dim();
                    add_region(&mut grads, *input, val(*input).dim(), |dst| {
                        dst.slice_mut(ndarray::s![.., *start..*start + cols])
                            .zip_mut_with(&g, |x, &y| *x += y);
                    });
                }
                Op::ConcatRows(parts) => {
                    let mut r = 0;
                    for &p in parts {
                        let n = val(p).nrows();
                        if needs(p) {
                            acc(
                                &mut grads,
                                p,
                                g.slice(ndarray::s![r..r + n, ..]).to_owned(),
                            );
                        }
                        r += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut c = 0;
                    for &p in parts {
                        let n = val(p).ncols();
                        if needs(p) {
                            acc(
                                &mut grads,
                                p,
                                g.slice(ndarray::s![.., c..c + n]).to_owned(),
                            );
                        }
                        c += n;
                    }
                }
                Op::GatherFrames { input, frame, hop } => {
                    add_region(&mut grads, *input, val(*input).dim(), |dst| {
                        for m in 0..g.nrows() {
                            for j in 0..*frame {
                                dst[[0, m * hop + j]] += g[[m, j]];
                            }
                        }
                    });
                }
                Op::OverlapAdd { input, hop } => {
                    let out_len = nodes[i].value.ncols();
                    let (rows, cols) = val(*input).dim();
                    let mut c = Array2::zeros((rows, cols));
                    for m in 0..rows {
                        let off = m * hop;
                        if off >= out_len {
                            break;
                        }
                        let take = (out_len - off).min(cols);
                        for j in 0..take {
                            c[[m, j]] = g[[0, off + j]];
                        }
                    }
                    acc(&mut grads, *input, c);
                }
            }
        }
        Ok(())
    }
}

fn acc(grads: &mut [Option<Array2<f64>>], idx: Idx, contrib: Array2<f64>) {
    match &mut grads[idx] {
        Some(g) => *g += &contrib,
        slot @ None => *slot = Some(contrib),
    }
}

/// Accumulate into a sub-region of `idx`'s gradient without materializing a
/// full-size temporary when a gradient buffer already exists.
fn add_region(
    grads: &mut [Option<Array2<f64>>],
    idx: Idx,
    shape: (usize, usize),
    write: impl FnOnce(&mut Array2<f64>),
) {
    if grads[idx].is_none() {
        grads[idx] = Some(Array2::zeros(shape));
    }
    write(grads[idx].as_mut().expect("just filled"));
}

/// Sum a gradient down to `target` shape, undoing row/scalar broadcasting.
fn reduce_to(g: ArrayView2<'_, f64>, target: (usize, usize)) -> Array2<f64> {
    if g.dim() == target {
        return g.to_owned();
    }
    let mut a = g.to_owned();
    if target.0 == 1 && a.nrows() > 1 {
        a = a.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if target.1 == 1 && a.ncols() > 1 {
        a = a.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    a
}

/// Output shape of a broadcast elementwise op, or None if incompatible.
/// Allowed: identical shapes, a 1x1 scalar against anything, and a 1xC row
/// against MxC.
fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    if a == b {
        return Some(a);
    }
    if a == (1, 1) {
        return Some(b);
    }
    if b == (1, 1) {
        return Some(a);
    }
    if a.1 == b.1 && (a.0 == 1 || b.0 == 1) {
        return Some((a.0.max(b.0), a.1));
    }
    None
}

impl<'g> Var<'g> {
    pub fn value(&self) -> Array2<f64> {
        self.graph.nodes.borrow()[self.idx].value.clone()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.graph.nodes.borrow()[self.idx].value.dim()
    }

    /// Scalar extraction; errors on non-1x1 values.
    pub fn item(&self) -> Result<f64> {
        let nodes = self.graph.nodes.borrow();
        let v = &nodes[self.idx].value;
        if v.dim() != (1, 1) {
            return Err(Error::shape("item", v.dim(), (1, 1)));
        }
        Ok(v[[0, 0]])
    }

    /// Gradient from the most recent backward pass. `None` when this node
    /// was not on the loss path (treat as zero).
    pub fn grad(&self) -> Option<Array2<f64>> {
        self.graph.grads.borrow().get(self.idx).and_then(|g| g.clone())
    }

    fn binary(&self, rhs: Var<'g>, context: &str, make: impl Fn(Idx, Idx) -> Op, f: impl Fn(f64, f64) -> f64) -> Result<Var<'g>> {
        debug_assert!(std::ptr::eq(self.graph, rhs.graph), "vars from different graphs");
        let nodes = self.graph.nodes.borrow();
        let a = &nodes[self.idx].value;
        let b = &nodes[rhs.idx].value;
        let shape = broadcast_shape(a.dim(), b.dim())
            .ok_or_else(|| Error::shape(context, a.dim(), b.dim()))?;
        let ab = a.broadcast(shape).expect("checked broadcast");
        let bb = b.broadcast(shape).expect("checked broadcast");
        let mut out = Array2::zeros(shape);
        Zip::from(&mut out).and(&ab).and(&bb).for_each(|o, &x, &y| *o = f(x, y));
        let needs = nodes[self.idx].needs_grad || nodes[rhs.idx].needs_grad;
        drop(nodes);
        Ok(self.graph.push(out, make(self.idx, rhs.idx), needs))
    }

    pub fn add(&self, rhs: Var<'g>) -> Result<Var<'g>> {
        self.binary(rhs, "add", Op::Add, |x, y| x + y)
    }

    pub fn sub(&self, rhs: Var<'g>) -> Result<Var<'g>> {
        self.binary(rhs, "sub", Op::Sub, |x, y| x - y)
    }

    pub fn mul(&self, rhs: Var<'g>) -> Result<Var<'g>> {
        self.binary(rhs, "mul", Op::Mul, |x, y| x * y)
    }

    pub fn div(&self, rhs: Var<'g>) -> Result<Var<'g>> {
        self.binary(rhs, "div", Op::Div, |x, y| x / y)
    }

    pub fn matmul(&self, rhs: Var<'g>) -> Result<Var<'g>> {
        debug_assert!(std::ptr::eq(self.graph, rhs.graph), "vars from different graphs");
        let nodes = self.graph.nodes.borrow();
        let a = &nodes[self.idx].value;
        let b = &nodes[rhs.idx].value;
        if a.ncols() != b.nrows() {
            return Err(Error::shape("matmul", a.dim(), b.dim()));
        }
        let out = a.dot(b);
        let needs = nodes[self.idx].needs_grad || nodes[rhs.idx].needs_grad;
        drop(nodes);
        Ok(self.graph.push(out, Op::Matmul(self.idx, rhs.idx), needs))
    }

    fn unary(&self, make: impl Fn(Idx) -> Op, f: impl Fn(f64) -> f64) -> Var<'g> {
        let nodes = self.graph.nodes.borrow();
        let out = nodes[self.idx].value.mapv(&f);
        let needs = nodes[self.idx].needs_grad;
        drop(nodes);
        self.graph.push(out, make(self.idx), needs)
    }

    pub fn tanh(&self) -> Var<'g> {
        self.unary(Op::Tanh, f64::tanh)
    }

    pub fn sigmoid(&self) -> Var<'g> {
        // Branch on sign for stability at large |x|.
        self.unary(Op::Sigmoid, |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        })
    }

    pub fn sin(&self) -> Var<'g> {
        self.unary(Op::Sin, f64::sin)
    }

    /// Natural logarithm; caller guarantees positive inputs.
    pub fn ln(&self) -> Var<'g> {
        self.unary(Op::Ln, f64::ln)
    }

    pub fn abs(&self) -> Var<'g> {
        self.unary(Op::Abs, f64::abs)
    }

    /// Square root; caller guarantees positive inputs (an epsilon is added
    /// upstream wherever zeros are possible).
    pub fn sqrt(&self) -> Var<'g> {
        self.unary(Op::Sqrt, f64::sqrt)
    }

    pub fn powf(&self, p: f64) -> Var<'g> {
        self.unary(|i| Op::Powf(i, p), |x| x.powf(p))
    }

    pub fn scale(&self, s: f64) -> Var<'g> {
        self.unary(|i| Op::Scale(i, s), |x| x * s)
    }

    pub fn add_scalar(&self, s: f64) -> Var<'g> {
        self.unary(|i| Op::AddScalar(i, s), |x| x + s)
    }

    pub fn sum(&self) -> Var<'g> {
        let nodes = self.graph.nodes.borrow();
        let s = nodes[self.idx].value.sum();
        let needs = nodes[self.idx].needs_grad;
        drop(nodes);
        self.graph
            .push(Array2::from_elem((1, 1), s), Op::Sum(self.idx), needs)
    }

    pub fn mean(&self) -> Var<'g> {
        let nodes = self.graph.nodes.borrow();
        let v = &nodes[self.idx].value;
        let s = v.sum() / (v.len() as f64);
        let needs = nodes[self.idx].needs_grad;
        drop(nodes);
        self.graph
            .push(Array2::from_elem((1, 1), s), Op::Mean(self.idx), needs)
    }

    /// Identity forward; exactly zero gradient flows through in backward.
    pub fn stop_gradient(&self) -> Var<'g> {
        let nodes = self.graph.nodes.borrow();
        let v = nodes[self.idx].value.clone();
        drop(nodes);
        self.graph.push(v, Op::StopGrad(self.idx), false)
    }

    pub fn reshape(&self, rows: usize, cols: usize) -> Result<Var<'g>> {
        let nodes = self.graph.nodes.borrow();
        let v = &nodes[self.idx].value;
        if v.len() != rows * cols {
            return Err(Error::shape("reshape", v.dim(), (rows, cols)));
        }
        let out = v
            .clone()
            .into_shape_with_order((rows, cols))
            .expect("element count checked");
        let needs = nodes[self.idx].needs_grad;
        drop(nodes);
        Ok(self.graph.push(out, Op::Reshape(self.idx), needs))
    }

    pub fn slice_rows(&self, start: usize, len: usize) -> Result<Var<'g>> {
        let nodes = self.graph.nodes.borrow();
        let v = &nodes[self.idx].value;
        if start + len > v.nrows() || len == 0 {
            return Err(Error::invalid(format!(
                "slice_rows [{start}, {}) out of range for {} rows",
                start + len,
                v.nrows()
            )));
        }
        let out = v.slice(ndarray::s![start..start + len, ..]).to_owned();
        let needs = nodes[self.idx].needs_grad;
        drop(nodes);
        Ok(self.graph.push(
            out,
            Op::SliceRows {
                input: self.idx,
                start,
            },
            needs,
        ))
    }

    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Var<'g>> {
        let nodes = self.graph.nodes.borrow();
        let v = &nodes[self.idx].value;
        if start + len > v.ncols() || len == 0 {
            return Err(Error::invalid(format!(
                "slice_cols [{start}, {}) out of range for {} cols",
                start + len,
                v.ncols()
            )));
        }
        let out = v.slice(ndarray::s![.., start..start + len]).to_owned();
        let needs = nodes[self.idx].needs_grad;
        drop(nodes);
        Ok(self.graph.push(
            out,
            Op::SliceCols {
                input: self.idx,
                start,
            },
            needs,
        ))
    }
}

/// Complex multiply on (real, imag) pairs: the 4-term real formula.
pub fn complex_mul<'g>(
    a: (Var<'g>, Var<'g>),
    b: (Var<'g>, Var<'g>),
) -> Result<(Var<'g>, Var<'g>)> {
    let re = a.0.mul(b.0)?.sub(a.1.mul(b.1)?)?;
    let im = a.0.mul(b.1)?.add(a.1.mul(b.0)?)?;
    Ok((re, im))
}

/// Central-difference validation of backward gradients.
///
/// `f` must deterministically build a scalar loss from the given leaf
/// variables. Returns the maximum relative error over every coordinate of
/// every parameter, with denominator `max(|analytic|, |numeric|, 1e-12)`.
pub fn finite_difference_check<F>(f: F, params: &[Array2<f64>], epsilon: f64) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::invalid(format!(
            "epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let eval = |ps: &[Array2<f64>]| -> Result<f64> {
        let g = Graph::new();
        let vars: Vec<Var> = ps.iter().map(|p| g.param(p.clone())).collect();
        let loss = f(&g, &vars)?;
        let v = loss.item()?;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("loss evaluated to {v}")));
        }
        Ok(v)
    };

    // Analytic gradients at the base point.
    let g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let loss = f(&g, &vars)?;
    let base = loss.item()?;
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("loss evaluated to {base}")));
    }
    g.backward(loss)?;
    let analytic: Vec<Array2<f64>> = vars
        .iter()
        .zip(params)
        .map(|(v, p)| v.grad().unwrap_or_else(|| Array2::zeros(p.dim())))
        .collect();

    let mut work: Vec<Array2<f64>> = params.to_vec();
    let mut max_rel = 0.0f64;
    for (pi, p) in params.iter().enumerate() {
        for r in 0..p.nrows() {
            for c in 0..p.ncols() {
                let orig = p[[r, c]];
                work[pi][[r, c]] = orig + epsilon;
                let fp = eval(&work)?;
                work[pi][[r, c]] = orig - epsilon;
                let fm = eval(&work)?;
                work[pi][[r, c]] = orig;
                let numeric = (fp - fm) / (2.0 * epsilon);
                let a = analytic[pi][[r, c]];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
                max_rel = max_rel.max(rel);
            }
        }
    }
    Ok(max_rel)
}
