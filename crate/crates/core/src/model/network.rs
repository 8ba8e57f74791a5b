//! The autoencoder: a set-abstraction encoder with feature propagation, the
//! keypoint and skeleton-weight heads, and the heatmap-conditioned decoder.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{HeatmapLookup, ModelConfig};
use super::params::{init_uniform, BufferId, ParamId, ParamStore};
use super::projection::projection_stencil;
use crate::autograd::{
    matrix_to_points, points_to_matrix, softmax_columns, BatchStats, Graph, Matrix, Stencil, Var,
};
use crate::error::{Error, Result};
use crate::geometry::{
    farthest_point_sampling, k_nearest, lexicographic_seed, segments_from_weights, sub, Frame,
    GridHeatmap, Point3, PointCloud, SkeletonSegment,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in normalization layers, running estimates updated.
    Train,
    /// Frozen running statistics; deterministic per input.
    Eval,
}

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gamma: ParamId,
    beta: ParamId,
    mean: BufferId,
    var: BufferId,
}

/// Linear, batch norm, ReLU.
#[derive(Debug, Clone, Copy)]
struct Block {
    dense: Dense,
    norm: Norm,
}

#[derive(Debug, Clone)]
struct Layout {
    abstraction: Vec<[Block; 2]>,
    propagation: Vec<Block>,
    keypoint_hidden: Block,
    keypoint_out: Dense,
    segment_hidden: Dense,
    segment_out: Dense,
    decoder: Vec<Block>,
    reconstruction: Dense,
}

struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn dense(&mut self, name: &str, fan_in: usize, fan_out: usize, gain: f64) -> Dense {
        let w = init_uniform(&mut self.rng, fan_in, fan_out, gain);
        Dense {
            w: self.store.add_param(format!("{name}.weight"), w),
            b: self.store.add_param(format!("{name}.bias"), Matrix::zeros((1, fan_out))),
        }
    }

    fn block(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Block {
        let dense = self.dense(name, fan_in, fan_out, 2f64.sqrt());
        let norm = Norm {
            gamma: self.store.add_param(format!("{name}.bn.gamma"), Matrix::ones((1, fan_out))),
            beta: self.store.add_param(format!("{name}.bn.beta"), Matrix::zeros((1, fan_out))),
            mean: self.store.add_buffer(format!("{name}.bn.running_mean"), Matrix::zeros((1, fan_out))),
            var: self.store.add_buffer(format!("{name}.bn.running_var"), Matrix::ones((1, fan_out))),
        };
        Block { dense, norm }
    }
}

fn build_layout(cfg: &ModelConfig, store: &mut ParamStore, seed: u64) -> Layout {
    let mut b = Builder {
        store,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let l = cfg.depth();
    let mut abstraction = Vec::with_capacity(l);
    let mut in_width = 3;
    for (i, &w) in cfg.level_widths.iter().enumerate() {
        let first = b.block(&format!("encoder.sa{}.0", i + 1), 3 + in_width, w);
        let second = b.block(&format!("encoder.sa{}.1", i + 1), w, w);
        abstraction.push([first, second]);
        in_width = w;
    }
    let mut propagation: Vec<Option<Block>> = vec![None; l];
    let mut coarse = cfg.level_widths[l - 1];
    for i in (0..l).rev() {
        let skip = if i == 0 { 3 } else { cfg.level_widths[i - 1] };
        let w = cfg.propagation_widths[i];
        propagation[i] = Some(b.block(&format!("encoder.fp{i}"), coarse + skip, w));
        coarse = w;
    }
    let full = cfg.propagation_widths[0];
    let keypoint_hidden = b.block("keypoint_head.hidden", full, full);
    let keypoint_out = b.dense("keypoint_head.out", full, cfg.keypoints, 0.1);
    let segment_hidden = b.dense("segment_head.hidden", cfg.level_widths[l - 1], cfg.segment_hidden, 2f64.sqrt());
    let segment_out = b.dense("segment_head.out", cfg.segment_hidden, cfg.segment_count(), 0.1);
    let mut decoder = Vec::with_capacity(l + 1);
    for d in 0..=l {
        let level = l - d;
        let mut fan_in = 1 + cfg.encoder_width(level);
        if d > 0 {
            fan_in += cfg.decoder_widths[d - 1];
        }
        decoder.push(b.block(&format!("decoder.level{level}"), fan_in, cfg.decoder_widths[d]));
    }
    let reconstruction = b.dense("decoder.out", cfg.decoder_widths[l], 3, 1.0);
    Layout {
        abstraction,
        propagation: propagation.into_iter().map(|b| b.expect("every level built")).collect(),
        keypoint_hidden,
        keypoint_out,
        segment_hidden,
        segment_out,
        decoder,
        reconstruction,
    }
}

/// Fixed (non-learned) sampling structure of one input cloud.
#[derive(Debug, Clone)]
pub struct CloudGeometry {
    /// Coordinates per level; level 0 is the input cloud.
    pub coords: Vec<Rc<Vec<Point3>>>,
    /// Indices into the parent level for levels 1..=L (level 0 is empty).
    pub parents: Vec<Vec<usize>>,
    groups: Vec<Rc<Vec<usize>>>,
    group_sizes: Vec<usize>,
    relative: Vec<Matrix>,
    /// `up[i]` projects level `i+1` features onto level `i`.
    up: Vec<Rc<Stencil>>,
    lookup: Vec<Rc<Stencil>>,
}

impl CloudGeometry {
    pub fn new(cfg: &ModelConfig, points: &[Point3]) -> Result<Self> {
        let l = cfg.depth();
        let mut coords = vec![Rc::new(points.to_vec())];
        let mut parents = vec![Vec::new()];
        let mut groups = vec![Rc::new(Vec::new())];
        let mut group_sizes = vec![0];
        let mut relative = vec![Matrix::zeros((0, 3))];
        for &n in &cfg.level_sizes {
            let prev = coords.last().expect("level 0").clone();
            let idx = farthest_point_sampling(&prev, n, lexicographic_seed(&prev))?;
            let centers: Vec<Point3> = idx.iter().map(|&i| prev[i]).collect();
            let g = cfg.group_size.min(prev.len());
            let mut flat = Vec::with_capacity(n * g);
            let mut rel = Matrix::zeros((n * g, 3));
            for (c, &center) in centers.iter().enumerate() {
                for (j, nb) in k_nearest(&prev, center, g).into_iter().enumerate() {
                    let d = sub(prev[nb], center);
                    let r = c * g + j;
                    rel[[r, 0]] = d[0];
                    rel[[r, 1]] = d[1];
                    rel[[r, 2]] = d[2];
                    flat.push(nb);
                }
            }
            coords.push(Rc::new(centers));
            parents.push(idx);
            groups.push(Rc::new(flat));
            group_sizes.push(g);
            relative.push(rel);
        }
        let up = (0..l)
            .map(|i| Rc::new(projection_stencil(&coords[i + 1], &coords[i], cfg.neighbors)))
            .collect();
        let grid = cfg.grid();
        let lookup = coords
            .iter()
            .map(|c| {
                let mut index = Vec::with_capacity(c.len() * 8);
                let mut weight = Vec::with_capacity(c.len() * 8);
                for &q in c.iter() {
                    for (i, w) in grid.trilinear_stencil(q) {
                        index.push(i);
                        weight.push(w);
                    }
                }
                Rc::new(Stencil { width: 8, index, weight })
            })
            .collect();
        Ok(Self {
            coords,
            parents,
            groups,
            group_sizes,
            relative,
            up,
            lookup,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLevel {
    pub coords: Vec<Point3>,
    /// Indices of these points in the previous level (empty at level 0).
    pub parent_indices: Vec<usize>,
    pub features: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderHierarchy {
    /// Levels 0..=L. Level 0 holds the input cloud with its raw coordinates as features.
    pub levels: Vec<EncoderLevel>,
    /// Per-point features propagated back to all input points.
    pub full_res_features: Matrix,
}

impl EncoderHierarchy {
    /// Max-pooled feature of the coarsest level.
    pub fn pooled(&self) -> Vec<f64> {
        let top = &self.levels.last().expect("non-empty").features;
        top.columns()
            .into_iter()
            .map(|c| c.fold(f64::NEG_INFINITY, |m, &v| m.max(v)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointPrediction {
    /// `K x N`; every row is a softmax over the points.
    pub weights: Matrix,
    pub keypoints: Vec<Point3>,
    pub segment_weights: Vec<f64>,
}

impl KeypointPrediction {
    pub fn segments(&self) -> Result<Vec<SkeletonSegment>> {
        segments_from_weights(self.keypoints.len(), &self.segment_weights)
    }
}

/// Softmax over points for each keypoint column of `logits` (`N x K`),
/// followed by the weighted sum of the points. Returns `W` as `K x N`.
pub fn softmax_keypoints(logits: &Matrix, points: &[Point3]) -> Result<(Matrix, Vec<Point3>)> {
    if logits.nrows() != points.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} logit rows for {} points",
            logits.nrows(),
            points.len()
        )));
    }
    let w = softmax_columns(logits).reversed_axes();
    let kp = matrix_to_points(&w.dot(&points_to_matrix(points)));
    Ok((w, kp))
}

/// Graph handles for one sample of a forward pass.
#[derive(Debug, Clone)]
pub struct SampleVars {
    /// `N x K`.
    pub logits: Var,
    /// `K x N`.
    pub weights: Var,
    /// `K x 3`.
    pub keypoints: Var,
    /// `1 x K(K-1)/2`.
    pub segment_weights: Var,
    /// `M^3 x 1`.
    pub heatmap: Var,
    /// Encoder features per level; entry 0 is the full-resolution feature.
    pub encoder: Vec<Var>,
    /// `N x 3`.
    pub reconstruction: Var,
}

pub struct ForwardPass {
    pub samples: Vec<SampleVars>,
    /// One leaf per parameter, in store order.
    pub params: Vec<Var>,
    stats: Vec<(Norm, BatchStats)>,
}

#[derive(Debug, Clone)]
pub struct Inference {
    pub prediction: KeypointPrediction,
    pub heatmap: GridHeatmap,
    pub reconstruction: Vec<Point3>,
}

/// The keypoint autoencoder: configuration, parameters, and layer layout.
#[derive(Debug, Clone)]
pub struct KeyGrid {
    config: ModelConfig,
    pub params: ParamStore,
    layout: Layout,
}

struct Ctx<'a> {
    pv: &'a [Var],
    mode: Mode,
    stats: &'a mut Vec<(Norm, BatchStats)>,
}

impl KeyGrid {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let layout = build_layout(&config, &mut params, seed);
        Ok(Self { config, params, layout })
    }

    /// Rebuilds the layout for `config` and adopts `params`, which must match
    /// it name for name and shape for shape.
    pub fn with_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let fresh = Self::new(config, 0)?;
        let same = |a: &[super::params::NamedMatrix], b: &[super::params::NamedMatrix]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.name == y.name && x.value.dim() == y.value.dim())
        };
        if !same(&fresh.params.params, &params.params) || !same(&fresh.params.buffers, &params.buffers) {
            return Err(Error::ShapeMismatch("parameters do not match the model configuration".into()));
        }
        Ok(Self {
            params,
            ..fresh
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Sets the ablation switches without touching parameters.
    pub fn set_ablation(&mut self, use_heatmap: bool, use_encoder_skip: bool) {
        self.config.use_heatmap = use_heatmap;
        self.config.use_encoder_skip = use_encoder_skip;
    }

    pub fn check_input(&self, cloud: &PointCloud) -> Result<()> {
        cloud.ensure_frame(Frame::UnitCube)?;
        if cloud.len() != self.config.num_points {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} points, cloud `{}` has {}",
                self.config.num_points,
                cloud.id,
                cloud.len()
            )));
        }
        Ok(())
    }

    pub fn geometry(&self, cloud: &PointCloud) -> Result<CloudGeometry> {
        self.check_input(cloud)?;
        CloudGeometry::new(&self.config, cloud.points())
    }

    fn leaves(&self, g: &mut Graph) -> Vec<Var> {
        self.params.params.iter().map(|p| g.leaf(p.value.clone())).collect()
    }

    fn block(&self, g: &mut Graph, ctx: &mut Ctx, blk: &Block, inputs: &[Var]) -> Result<Vec<Var>> {
        let sizes: Vec<usize> = inputs.iter().map(|&v| g.value(v).nrows()).collect();
        let x = g.concat_rows(inputs)?;
        let h = g.linear(x, ctx.pv[blk.dense.w.0], ctx.pv[blk.dense.b.0]);
        let running = match ctx.mode {
            Mode::Eval => Some((
                self.params.buffer(blk.norm.mean).as_slice().expect("contiguous"),
                self.params.buffer(blk.norm.var).as_slice().expect("contiguous"),
            )),
            Mode::Train => None,
        };
        let (h, st) = g.batch_norm(h, ctx.pv[blk.norm.gamma.0], ctx.pv[blk.norm.beta.0], running);
        if let Some(st) = st {
            ctx.stats.push((blk.norm, st));
        }
        let h = g.relu(h);
        let mut out = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for n in sizes {
            out.push(g.slice_rows(h, start, n));
            start += n;
        }
        Ok(out)
    }

    fn dense(&self, g: &mut Graph, ctx: &Ctx, d: &Dense, x: Var) -> Var {
        g.linear(x, ctx.pv[d.w.0], ctx.pv[d.b.0])
    }

    /// Returns per-sample level features, `[full_res, F1, ..., FL]`.
    fn encoder_vars(&self, g: &mut Graph, ctx: &mut Ctx, geos: &[&CloudGeometry]) -> Result<Vec<Vec<Var>>> {
        let l = self.config.depth();
        let mut feats: Vec<Vec<Var>> = geos.iter().map(|geo| vec![g.points(&geo.coords[0])]).collect();
        for i in 1..=l {
            let mut inputs = Vec::with_capacity(geos.len());
            for (s, geo) in geos.iter().enumerate() {
                let rel = g.constant(geo.relative[i].clone());
                let gathered = g.gather_rows(feats[s][i - 1], geo.groups[i].clone());
                inputs.push(g.concat_cols(&[rel, gathered])?);
            }
            let [first, second] = self.layout.abstraction[i - 1];
            let h = self.block(g, ctx, &first, &inputs)?;
            let h = self.block(g, ctx, &second, &h)?;
            for (s, geo) in geos.iter().enumerate() {
                let pooled = g.group_max(h[s], geo.group_sizes[i])?;
                feats[s].push(pooled);
            }
        }
        let mut prop: Vec<Var> = feats.iter().map(|f| f[l]).collect();
        for i in (0..l).rev() {
            let mut inputs = Vec::with_capacity(geos.len());
            for (s, geo) in geos.iter().enumerate() {
                let interp = g.stencil(prop[s], geo.up[i].clone());
                inputs.push(g.concat_cols(&[interp, feats[s][i]])?);
            }
            prop = self.block(g, ctx, &self.layout.propagation[i], &inputs)?;
        }
        for (s, f) in feats.iter_mut().enumerate() {
            f[0] = prop[s];
        }
        Ok(feats)
    }

    /// Returns `(logits, W as K x N, keypoints)` per sample.
    fn keypoint_vars(
        &self,
        g: &mut Graph,
        ctx: &mut Ctx,
        full_res: &[Var],
        points: &[&[Point3]],
    ) -> Result<Vec<(Var, Var, Var)>> {
        let hidden = self.block(g, ctx, &self.layout.keypoint_hidden, full_res)?;
        let mut out = Vec::with_capacity(hidden.len());
        for (h, pts) in hidden.into_iter().zip(points) {
            let logits = self.dense(g, ctx, &self.layout.keypoint_out, h);
            let w = g.softmax_cols(logits);
            let wt = g.transpose(w);
            let x = g.points(pts);
            let kp = g.matmul(wt, x);
            out.push((logits, wt, kp));
        }
        Ok(out)
    }

    fn segment_vars(&self, g: &mut Graph, ctx: &Ctx, top: Var) -> Result<Var> {
        let rows = g.value(top).nrows();
        let pooled = g.group_max(top, rows)?;
        let h = self.dense(g, ctx, &self.layout.segment_hidden, pooled);
        let h = g.relu(h);
        let s = self.dense(g, ctx, &self.layout.segment_out, h);
        Ok(g.sigmoid(s))
    }

    /// `heat[s][level]` and `skip[s][level]` are `N_level x 1` and
    /// `N_level x F_level` inputs.
    fn decoder_vars(
        &self,
        g: &mut Graph,
        ctx: &mut Ctx,
        geos: &[&CloudGeometry],
        skip: &[Vec<Var>],
        heat: &[Vec<Var>],
    ) -> Result<Vec<Var>> {
        let l = self.config.depth();
        let mut prev: Vec<Option<Var>> = vec![None; geos.len()];
        for d in 0..=l {
            let level = l - d;
            let mut inputs = Vec::with_capacity(geos.len());
            for (s, geo) in geos.iter().enumerate() {
                let n = geo.coords[level].len();
                let h = if self.config.use_heatmap {
                    heat[s][level]
                } else {
                    g.constant(Matrix::zeros((n, 1)))
                };
                let f = if self.config.use_encoder_skip {
                    skip[s][level]
                } else {
                    g.constant(Matrix::zeros((n, self.config.encoder_width(level))))
                };
                let mut parts = vec![h, f];
                if let Some(p) = prev[s] {
                    parts.push(g.stencil(p, geo.up[level].clone()));
                }
                inputs.push(g.concat_cols(&parts)?);
            }
            let out = self.block(g, ctx, &self.layout.decoder[d], &inputs)?;
            prev = out.into_iter().map(Some).collect();
        }
        Ok(prev
            .into_iter()
            .map(|p| self.dense(g, ctx, &self.layout.reconstruction, p.expect("decoder ran")))
            .collect())
    }

    /// Full differentiable pass over a batch of normalized clouds.
    pub fn forward(&self, g: &mut Graph, geos: &[&CloudGeometry], mode: Mode) -> Result<ForwardPass> {
        if geos.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let pv = self.leaves(g);
        let mut stats = Vec::new();
        let mut ctx = Ctx {
            pv: &pv,
            mode,
            stats: &mut stats,
        };
        let feats = self.encoder_vars(g, &mut ctx, geos)?;
        let full: Vec<Var> = feats.iter().map(|f| f[0]).collect();
        let pts: Vec<&[Point3]> = geos.iter().map(|geo| geo.coords[0].as_slice()).collect();
        let heads = self.keypoint_vars(g, &mut ctx, &full, &pts)?;
        let nodes = Rc::new(self.config.grid().nodes());
        let l = self.config.depth();
        let mut partial = Vec::with_capacity(geos.len());
        let mut heat = Vec::with_capacity(geos.len());
        for (s, geo) in geos.iter().enumerate() {
            let (logits, weights, keypoints) = heads[s];
            let segment_weights = self.segment_vars(g, &ctx, feats[s][l])?;
            let heatmap = g.skeleton_field(keypoints, segment_weights, nodes.clone(), self.config.heatmap)?;
            let mut per_level = Vec::with_capacity(l + 1);
            for level in 0..=l {
                per_level.push(match self.config.heatmap_lookup {
                    HeatmapLookup::Trilinear => g.stencil(heatmap, geo.lookup[level].clone()),
                    HeatmapLookup::Exact => {
                        g.skeleton_field(keypoints, segment_weights, geo.coords[level].clone(), self.config.heatmap)?
                    }
                });
            }
            heat.push(per_level);
            partial.push((logits, weights, keypoints, segment_weights, heatmap));
        }
        let recon = self.decoder_vars(g, &mut ctx, geos, &feats, &heat)?;
        let samples = partial
            .into_iter()
            .zip(feats)
            .zip(recon)
            .map(
                |(((logits, weights, keypoints, segment_weights, heatmap), encoder), reconstruction)| SampleVars {
                    logits,
                    weights,
                    keypoints,
                    segment_weights,
                    heatmap,
                    encoder,
                    reconstruction,
                },
            )
            .collect();
        Ok(ForwardPass {
            samples,
            params: pv,
            stats,
        })
    }

    /// Folds training-mode batch statistics into the running estimates.
    pub fn update_running_stats(&mut self, pass: &ForwardPass) {
        let m = self.config.bn_momentum;
        for (norm, st) in &pass.stats {
            for (slot, fresh) in [(norm.mean, &st.mean), (norm.var, &st.var)] {
                let buf = self.params.buffer_mut(slot);
                for (b, &v) in buf.iter_mut().zip(fresh.iter()) {
                    *b = (1.0 - m) * *b + m * v;
                }
            }
        }
    }

    /// Evaluation-mode inference on one normalized cloud.
    pub fn infer(&self, cloud: &PointCloud) -> Result<Inference> {
        let geo = self.geometry(cloud)?;
        let mut g = Graph::new();
        let pass = self.forward(&mut g, &[&geo], Mode::Eval)?;
        let s = &pass.samples[0];
        let prediction = KeypointPrediction {
            weights: g.value(s.weights).clone(),
            keypoints: matrix_to_points(g.value(s.keypoints)),
            segment_weights: g.value(s.segment_weights).iter().copied().collect(),
        };
        let heatmap = GridHeatmap {
            values: g.value(s.heatmap).iter().copied().collect(),
            spec: self.config.grid(),
            params: self.config.heatmap,
        };
        Ok(Inference {
            prediction,
            heatmap,
            reconstruction: matrix_to_points(g.value(s.reconstruction)),
        })
    }

    /// Evaluation-mode encoder hierarchy for one normalized cloud.
    pub fn encode(&self, cloud: &PointCloud) -> Result<EncoderHierarchy> {
        let geo = self.geometry(cloud)?;
        let mut g = Graph::new();
        let pv = self.leaves(&mut g);
        let mut stats = Vec::new();
        let mut ctx = Ctx {
            pv: &pv,
            mode: Mode::Eval,
            stats: &mut stats,
        };
        let feats = self.encoder_vars(&mut g, &mut ctx, &[&geo])?.remove(0);
        let levels = (0..=self.config.depth())
            .map(|i| EncoderLevel {
                coords: geo.coords[i].to_vec(),
                parent_indices: geo.parents[i].clone(),
                features: if i == 0 {
                    points_to_matrix(&geo.coords[0])
                } else {
                    g.value(feats[i]).clone()
                },
            })
            .collect();
        Ok(EncoderHierarchy {
            levels,
            full_res_features: g.value(feats[0]).clone(),
        })
    }

    fn check_hierarchy(&self, h: &EncoderHierarchy) -> Result<()> {
        let l = self.config.depth();
        let ok = h.levels.len() == l + 1
            && h.levels[0].coords.len() == self.config.num_points
            && h.full_res_features.dim() == (self.config.num_points, self.config.encoder_width(0))
            && (1..=l).all(|i| {
                h.levels[i].coords.len() == self.config.level_sizes[i - 1]
                    && h.levels[i].features.dim() == (h.levels[i].coords.len(), self.config.encoder_width(i))
            });
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("encoder hierarchy does not match the model configuration".into()))
        }
    }

    /// Keypoint and skeleton-weight heads applied to an encoder hierarchy.
    pub fn predict_keypoints(&self, h: &EncoderHierarchy) -> Result<KeypointPrediction> {
        self.check_hierarchy(h)?;
        let mut g = Graph::new();
        let pv = self.leaves(&mut g);
        let mut stats = Vec::new();
        let mut ctx = Ctx {
            pv: &pv,
            mode: Mode::Eval,
            stats: &mut stats,
        };
        let full = g.constant(h.full_res_features.clone());
        let top = g.constant(h.levels.last().expect("levels").features.clone());
        let (_, w, kp) = self.keypoint_vars(&mut g, &mut ctx, &[full], &[&h.levels[0].coords])?[0];
        let s = self.segment_vars(&mut g, &ctx, top)?;
        Ok(KeypointPrediction {
            weights: g.value(w).clone(),
            keypoints: matrix_to_points(g.value(kp)),
            segment_weights: g.value(s).iter().copied().collect(),
        })
    }

    /// Evaluation-mode reconstruction from a hierarchy and a heatmap. The
    /// heatmap is always read by trilinear lookup here.
    pub fn decode(&self, h: &EncoderHierarchy, heatmap: &GridHeatmap) -> Result<Vec<Point3>> {
        self.check_hierarchy(h)?;
        if heatmap.spec != self.config.grid() || heatmap.values.len() != heatmap.spec.node_count() {
            return Err(Error::ShapeMismatch("heatmap grid does not match the model configuration".into()));
        }
        let geo = CloudGeometry::new(&self.config, &h.levels[0].coords)?;
        let mut g = Graph::new();
        let pv = self.leaves(&mut g);
        let mut stats = Vec::new();
        let mut ctx = Ctx {
            pv: &pv,
            mode: Mode::Eval,
            stats: &mut stats,
        };
        let hm = g.constant(Matrix::from_shape_vec((heatmap.values.len(), 1), heatmap.values.clone()).expect("column"));
        let l = self.config.depth();
        let skip: Vec<Var> = (0..=l)
            .map(|i| {
                let f = if i == 0 { &h.full_res_features } else { &h.levels[i].features };
                g.constant(f.clone())
            })
            .collect();
        let heat: Vec<Var> = (0..=l).map(|i| g.stencil(hm, geo.lookup[i].clone())).collect();
        let out = self.decoder_vars(&mut g, &mut ctx, &[&geo], &[skip], &[heat])?;
        Ok(matrix_to_points(g.value(out[0])))
    }
}
