//! A small reverse-mode autodiff tape over dense `f64` matrices.
//!
//! Every value is a 2-D matrix (rows = points, columns = channels). Nodes are
//! appended in evaluation order, so a reverse sweep over the node list is a
//! valid topological order for back-propagation.

use std::rc::Rc;

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{Error, Result};
use crate::geometry::{
    chamfer_with_grad, segments_from_weights, skeleton_field, skeleton_field_backward, GridSpec,
    HeatmapParams, Point3,
};

pub type Matrix = Array2<f64>;

pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

type BackwardFn = Box<dyn Fn(&Matrix, &[&Matrix]) -> Vec<Option<Matrix>>>;

struct Node {
    value: Matrix,
    parents: Vec<Var>,
    backward: Option<BackwardFn>,
    needs_grad: bool,
}

/// Row gather with fixed per-row weights: `out[r] = sum_j w[r][j] * x[idx[r][j]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub width: usize,
    pub index: Vec<usize>,
    pub weight: Vec<f64>,
}

impl Stencil {
    pub fn rows(&self) -> usize {
        self.index.len() / self.width.max(1)
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads[v.0].take()
    }
}

/// Batch statistics observed by a training-mode batch norm.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance, as used for running estimates.
    pub var: Vec<f64>,
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Matrix, parents: Vec<Var>, backward: BackwardFn) -> Var {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value,
            parents,
            backward: if needs_grad { Some(backward) } else { None },
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that receives gradients.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node {
            value,
            parents: Vec::new(),
            backward: None,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node {
            value,
            parents: Vec::new(),
            backward: None,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn points(&mut self, pts: &[Point3]) -> Var {
        self.constant(points_to_matrix(pts))
    }

    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        let shape = self.nodes[root.0].value.raw_dim();
        grads[root.0] = Some(Matrix::ones(shape));
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            let Some(backward) = &node.backward else {
                continue;
            };
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let parent_vals: Vec<&Matrix> = node.parents.iter().map(|p| &self.nodes[p.0].value).collect();
            let pg = backward(&g, &parent_vals);
            for (p, pg) in node.parents.iter().zip(pg) {
                let Some(pg) = pg else { continue };
                if !self.nodes[p.0].needs_grad {
                    continue;
                }
                match &mut grads[p.0] {
                    Some(acc) => *acc += &pg,
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Gradients { grads }
    }

    // ---- linear algebra ------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(
            value,
            vec![a, b],
            Box::new(|g, p| vec![Some(g.dot(&p[1].t())), Some(p[0].t().dot(g))]),
        )
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        self.push(value, vec![a], Box::new(|g, _| vec![Some(g.t().to_owned())]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, vec![a, b], Box::new(|g, _| vec![Some(g.clone()), Some(g.clone())]))
    }

    /// Adds a `1 x C` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let value = self.value(a) + self.value(row);
        self.push(
            value,
            vec![a, row],
            Box::new(|g, _| vec![Some(g.clone()), Some(g.sum_axis(Axis(0)).insert_axis(Axis(0)))]),
        )
    }

    /// Elementwise product with a constant matrix of the same shape.
    pub fn hadamard_const(&mut self, a: Var, c: Matrix) -> Var {
        let value = self.value(a) * &c;
        self.push(value, vec![a], Box::new(move |g, _| vec![Some(g * &c)]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        self.push(value, vec![a], Box::new(move |g, _| vec![Some(g * c)]))
    }

    /// `x W + b` with `W: in x out`, `b: 1 x out`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let h = self.matmul(x, w);
        self.add_row(h, b)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::from_elem((1, 1), self.value(a).sum());
        let shape = self.value(a).raw_dim();
        self.push(
            value,
            vec![a],
            Box::new(move |g, _| vec![Some(Matrix::from_elem(shape, g[[0, 0]]))]),
        )
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    // ---- pointwise ------------------------------------------------------

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|v| v.max(0.0));
        self.push(
            value,
            vec![a],
            Box::new(|g, p| {
                let mut out = g.clone();
                Zip::from(&mut out).and(p[0]).for_each(|o, &x| {
                    if x <= 0.0 {
                        *o = 0.0
                    }
                });
                vec![Some(out)]
            }),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        let y = value.clone();
        self.push(
            value,
            vec![a],
            Box::new(move |g, _| {
                let mut out = g.clone();
                Zip::from(&mut out).and(&y).for_each(|o, &s| *o *= s * (1.0 - s));
                vec![Some(out)]
            }),
        )
    }

    // ---- shape ----------------------------------------------------------

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let rows = self.value(parts[0]).nrows();
        if parts.iter().any(|&p| self.value(p).nrows() != rows) {
            return Err(Error::ShapeMismatch("column concat with unequal row counts".into()));
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).ncols()).collect();
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("checked shapes");
        Ok(self.push(
            value,
            parts.to_vec(),
            Box::new(move |g, _| {
                let mut off = 0;
                widths
                    .iter()
                    .map(|&w| {
                        let piece = g.slice(s![.., off..off + w]).to_owned();
                        off += w;
                        Some(piece)
                    })
                    .collect()
            }),
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let cols = self.value(parts[0]).ncols();
        if parts.iter().any(|&p| self.value(p).ncols() != cols) {
            return Err(Error::ShapeMismatch("row concat with unequal column counts".into()));
        }
        let heights: Vec<usize> = parts.iter().map(|&p| self.value(p).nrows()).collect();
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("checked shapes");
        Ok(self.push(
            value,
            parts.to_vec(),
            Box::new(move |g, _| {
                let mut off = 0;
                heights
                    .iter()
                    .map(|&h| {
                        let piece = g.slice(s![off..off + h, ..]).to_owned();
                        off += h;
                        Some(piece)
                    })
                    .collect()
            }),
        ))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let total = self.value(a).nrows();
        if start == 0 && len == total {
            return a;
        }
        let value = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(
            value,
            vec![a],
            Box::new(move |g, p| {
                let mut out = Matrix::zeros(p[0].raw_dim());
                out.slice_mut(s![start..start + len, ..]).assign(g);
                vec![Some(out)]
            }),
        )
    }

    pub fn gather_rows(&mut self, a: Var, index: Rc<Vec<usize>>) -> Var {
        let src = self.value(a);
        let cols = src.ncols();
        let mut value = Matrix::zeros((index.len(), cols));
        for (r, &i) in index.iter().enumerate() {
            value.row_mut(r).assign(&src.row(i));
        }
        self.push(
            value,
            vec![a],
            Box::new(move |g, p| {
                let mut out = Matrix::zeros(p[0].raw_dim());
                for (r, &i) in index.iter().enumerate() {
                    let mut dst = out.row_mut(i);
                    dst += &g.row(r);
                }
                vec![Some(out)]
            }),
        )
    }

    pub fn stencil(&mut self, a: Var, stencil: Rc<Stencil>) -> Var {
        let value = apply_stencil(self.value(a), &stencil);
        self.push(
            value,
            vec![a],
            Box::new(move |g, p| {
                let mut out = Matrix::zeros(p[0].raw_dim());
                let k = stencil.width;
                for r in 0..stencil.rows() {
                    let gr = g.row(r);
                    for j in 0..k {
                        let w = stencil.weight[r * k + j];
                        if w != 0.0 {
                            out.row_mut(stencil.index[r * k + j]).scaled_add(w, &gr);
                        }
                    }
                }
                vec![Some(out)]
            }),
        )
    }

    /// Column-wise max over consecutive blocks of `group` rows.
    pub fn group_max(&mut self, a: Var, group: usize) -> Result<Var> {
        let src = self.value(a);
        let (rows, cols) = src.dim();
        if group == 0 || rows % group != 0 {
            return Err(Error::ShapeMismatch(format!("{rows} rows do not split into groups of {group}")));
        }
        let groups = rows / group;
        let mut value = Matrix::from_elem((groups, cols), f64::NEG_INFINITY);
        let mut arg = vec![0usize; groups * cols];
        for gi in 0..groups {
            for r in gi * group..(gi + 1) * group {
                let row = src.row(r);
                for c in 0..cols {
                    if row[c] > value[[gi, c]] {
                        value[[gi, c]] = row[c];
                        arg[gi * cols + c] = r;
                    }
                }
            }
        }
        Ok(self.push(
            value,
            vec![a],
            Box::new(move |g, p| {
                let mut out = Matrix::zeros(p[0].raw_dim());
                let (groups, cols) = g.dim();
                for gi in 0..groups {
                    for c in 0..cols {
                        out[[arg[gi * cols + c], c]] += g[[gi, c]];
                    }
                }
                vec![Some(out)]
            }),
        ))
    }

    /// Softmax down each column, so every column sums to one.
    pub fn softmax_cols(&mut self, a: Var) -> Var {
        let value = softmax_columns(self.value(a));
        let y = value.clone();
        self.push(
            value,
            vec![a],
            Box::new(move |g, _| {
                let dot = (g * &y).sum_axis(Axis(0));
                let mut out = g.clone();
                out -= &dot.insert_axis(Axis(0));
                out *= &y;
                vec![Some(out)]
            }),
        )
    }

    /// Batch normalization over rows with learned per-column scale and shift.
    /// With `running = Some((mean, var))` the given statistics are used and no
    /// batch statistics are returned.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running: Option<(&[f64], &[f64])>,
    ) -> (Var, Option<BatchStats>) {
        let xv = self.value(x);
        let (rows, cols) = xv.dim();
        let (mean, var_biased, stats) = match running {
            Some((m, v)) => (m.to_vec(), v.to_vec(), None),
            None => {
                let mean = xv.mean_axis(Axis(0)).expect("non-empty").to_vec();
                let mut var = vec![0.0; cols];
                for row in xv.rows() {
                    for c in 0..cols {
                        let d = row[c] - mean[c];
                        var[c] += d * d;
                    }
                }
                let unbiased = var.iter().map(|v| v / (rows.max(2) - 1) as f64).collect();
                let biased: Vec<f64> = var.iter().map(|v| v / rows as f64).collect();
                (mean.clone(), biased, Some(BatchStats { mean, var: unbiased }))
            }
        };
        let inv_std: Vec<f64> = var_biased.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut xhat = xv.clone();
        for mut row in xhat.rows_mut() {
            for c in 0..cols {
                row[c] = (row[c] - mean[c]) * inv_std[c];
            }
        }
        let gv = self.value(gamma).row(0).to_owned();
        let bv = self.value(beta).row(0).to_owned();
        let mut value = xhat.clone();
        value *= &gv;
        value += &bv;
        let batch_mode = stats.is_some();
        let var = self.push(
            value,
            vec![x, gamma, beta],
            Box::new(move |g, p| {
                let gamma = p[1].row(0);
                let dgamma = (g * &xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                let dbeta = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                let mut dx = g * &gamma;
                if batch_mode {
                    let mean_d = dx.mean_axis(Axis(0)).expect("non-empty");
                    let mean_dx = (&dx * &xhat).mean_axis(Axis(0)).expect("non-empty");
                    for (mut row, xrow) in dx.rows_mut().into_iter().zip(xhat.rows()) {
                        for c in 0..row.len() {
                            row[c] = (row[c] - mean_d[c] - xrow[c] * mean_dx[c]) * inv_std[c];
                        }
                    }
                } else {
                    for mut row in dx.rows_mut() {
                        for c in 0..row.len() {
                            row[c] *= inv_std[c];
                        }
                    }
                }
                vec![Some(dx), Some(dgamma), Some(dbeta)]
            }),
        );
        (var, stats)
    }

    // ---- geometric ops --------------------------------------------------

    /// Skeleton field of keypoints `kp` (`K x 3`) and segment weights `w`
    /// (`1 x K(K-1)/2`) evaluated at fixed query points; output is `Q x 1`.
    pub fn skeleton_field(
        &mut self,
        kp: Var,
        w: Var,
        queries: Rc<Vec<Point3>>,
        params: HeatmapParams,
    ) -> Result<Var> {
        let keypoints = matrix_to_points(self.value(kp));
        let weights = self.value(w).iter().copied().collect::<Vec<_>>();
        let segments = segments_from_weights(keypoints.len(), &weights)?;
        let vals = skeleton_field(&keypoints, &segments, &queries, &params)?;
        let value = Matrix::from_shape_vec((vals.len(), 1), vals).expect("column");
        Ok(self.push(
            value,
            vec![kp, w],
            Box::new(move |g, p| {
                let keypoints = matrix_to_points(p[0]);
                let weights: Vec<f64> = p[1].iter().copied().collect();
                let segments = segments_from_weights(keypoints.len(), &weights).expect("validated in forward");
                let go: Vec<f64> = g.iter().copied().collect();
                let (gk, gw) = skeleton_field_backward(&keypoints, &segments, &queries, &params, &go)
                    .expect("validated in forward");
                let gw = Matrix::from_shape_vec(p[1].raw_dim(), gw).expect("weight shape");
                vec![Some(points_to_matrix(&gk)), Some(gw)]
            }),
        ))
    }

    /// Trilinear lookup of lattice values `h` (`M^3 x 1`) at fixed queries.
    pub fn trilinear(&mut self, h: Var, spec: &GridSpec, queries: &[Point3]) -> Var {
        let mut index = Vec::with_capacity(queries.len() * 8);
        let mut weight = Vec::with_capacity(queries.len() * 8);
        for &q in queries {
            for (i, w) in spec.trilinear_stencil(q) {
                index.push(i);
                weight.push(w);
            }
        }
        self.stencil(h, Rc::new(Stencil { width: 8, index, weight }))
    }

    /// Chamfer distance between two `n x 3` point sets, as a `1 x 1` value.
    pub fn chamfer(&mut self, a: Var, b: Var) -> Result<Var> {
        let pa = matrix_to_points(self.value(a));
        let pb = matrix_to_points(self.value(b));
        let res = chamfer_with_grad(&pa, &pb)?;
        let value = Matrix::from_elem((1, 1), res.value);
        let ga = points_to_matrix(&res.grad_a);
        let gb = points_to_matrix(&res.grad_b);
        Ok(self.push(
            value,
            vec![a, b],
            Box::new(move |g, _| {
                let s = g[[0, 0]];
                vec![Some(&ga * s), Some(&gb * s)]
            }),
        ))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_columns(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for mut col in out.columns_mut() {
        let max = col.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        col.mapv_inplace(|v| (v - max).exp());
        let sum = col.sum();
        col.mapv_inplace(|v| v / sum);
    }
    out
}

pub fn apply_stencil(src: &Matrix, stencil: &Stencil) -> Matrix {
    let rows = stencil.rows();
    let k = stencil.width;
    let mut out = Matrix::zeros((rows, src.ncols()));
    for r in 0..rows {
        let mut dst = out.row_mut(r);
        for j in 0..k {
            let w = stencil.weight[r * k + j];
            if w != 0.0 {
                dst.scaled_add(w, &src.row(stencil.index[r * k + j]));
            }
        }
    }
    out
}

pub fn points_to_matrix(pts: &[Point3]) -> Matrix {
    Matrix::from_shape_fn((pts.len(), 3), |(r, c)| pts[r][c])
}

pub fn matrix_to_points(m: &Matrix) -> Vec<Point3> {
    m.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central-difference check of `d sum(f(x) * probe) / dx` for one leaf.
    fn check<F>(x: Matrix, f: F, tol: f64)
    where
        F: Fn(&mut Graph, Var) -> Var,
    {
        let probe_for = |m: &Matrix| Matrix::from_shape_fn(m.raw_dim(), |(r, c)| 0.3 + 0.17 * r as f64 - 0.11 * c as f64);
        let eval = |x: &Matrix| {
            let mut g = Graph::new();
            let v = g.constant(x.clone());
            let y = f(&mut g, v);
            (g.value(y) * &probe_for(g.value(y))).sum()
        };
        let mut g2 = Graph::new();
        let v2 = g2.leaf(x.clone());
        let y2 = f(&mut g2, v2);
        let probe2 = probe_for(g2.value(y2));
        let seeded = g2.hadamard_const(y2, probe2);
        let total = g2.sum(seeded);
        let grads = g2.backward(total);
        let analytic = grads.get(v2).cloned().unwrap_or_else(|| Matrix::zeros(x.raw_dim()));
        let h = 1e-6;
        for idx in 0..x.len() {
            let (r, c) = (idx / x.ncols(), idx % x.ncols());
            let mut xp = x.clone();
            xp[[r, c]] += h;
            let mut xm = x.clone();
            xm[[r, c]] -= h;
            let fd = (eval(&xp) - eval(&xm)) / (2.0 * h);
            let a = analytic[[r, c]];
            assert!(
                (fd - a).abs() <= tol * (1.0 + fd.abs().max(a.abs())),
                "entry ({r},{c}): fd {fd} vs analytic {a}"
            );
        }
    }

    fn sample() -> Matrix {
        array![[0.3, -0.2, 0.5], [0.1, 0.4, -0.7], [-0.6, 0.25, 0.05], [0.8, -0.45, 0.2]]
    }

    #[test]
    fn grad_matmul_linear_relu_sigmoid() {
        let w = array![[0.2, -0.3], [0.5, 0.1], [-0.4, 0.7]];
        check(sample(), move |g, x| {
            let wv = g.constant(w.clone());
            let b = g.constant(array![[0.05, -0.02]]);
            let h = g.linear(x, wv, b);
            let r = g.relu(h);
            g.sigmoid(r)
        }, 1e-6);
    }

    #[test]
    fn grad_shape_ops() {
        check(sample(), |g, x| {
            let a = g.slice_rows(x, 1, 2);
            let b = g.gather_rows(x, Rc::new(vec![3, 0, 3]));
            let c = g.concat_rows(&[a, b]).unwrap();
            let t = g.transpose(c);
            let t2 = g.transpose(t);
            let d = g.concat_cols(&[t2, c]).unwrap();
            g.group_max(d, 5).unwrap()
        }, 1e-6);
    }

    #[test]
    fn grad_softmax_and_stencil() {
        check(sample(), |g, x| {
            let s = g.softmax_cols(x);
            let st = Rc::new(Stencil {
                width: 2,
                index: vec![0, 1, 2, 3, 3, 0],
                weight: vec![0.25, 0.75, 0.5, 0.5, 1.0, 0.0],
            });
            g.stencil(s, st)
        }, 1e-6);
    }

    #[test]
    fn grad_batch_norm_both_modes() {
        let gamma = array![[1.3, 0.7, -0.4]];
        let beta = array![[0.1, 0.0, 0.2]];
        let (gm, bt) = (gamma.clone(), beta.clone());
        check(sample(), move |g, x| {
            let gv = g.constant(gm.clone());
            let bv = g.constant(bt.clone());
            g.batch_norm(x, gv, bv, None).0
        }, 1e-5);
        check(sample(), move |g, x| {
            let gv = g.constant(gamma.clone());
            let bv = g.constant(beta.clone());
            g.batch_norm(x, gv, bv, Some((&[0.1, 0.2, 0.3], &[0.5, 1.0, 2.0]))).0
        }, 1e-6);
    }

    #[test]
    fn batch_norm_normalizes() {
        let mut g = Graph::new();
        let x = g.constant(sample());
        let gv = g.constant(Matrix::ones((1, 3)));
        let bv = g.constant(Matrix::zeros((1, 3)));
        let (y, stats) = g.batch_norm(x, gv, bv, None);
        let y = g.value(y);
        for c in 0..3 {
            let col = y.column(c);
            assert!(col.mean().unwrap().abs() < 1e-12);
            let var = col.mapv(|v| v * v).mean().unwrap();
            assert!((var - 1.0).abs() < 1e-3);
        }
        assert_eq!(stats.unwrap().mean.len(), 3);
    }

    #[test]
    fn softmax_columns_sum_to_one() {
        let s = softmax_columns(&sample());
        for col in s.columns() {
            assert!((col.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut g = Graph::new();
        let a = g.constant(sample());
        let b = g.leaf(sample());
        let c = g.add(a, b);
        let s = g.sum(c);
        let grads = g.backward(s);
        assert!(grads.get(a).is_none());
        assert_eq!(grads.get(b).unwrap(), &Matrix::ones((4, 3)));
    }
}
