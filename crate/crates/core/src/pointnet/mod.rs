//! A small set-abstraction point classifier with hand-written gradients.
//!
//! Each stage samples centroids by farthest point sampling, groups the `k`
//! nearest points around each, feeds their centroid-relative coordinates
//! (plus the previous stage's features) through a shared ReLU MLP and
//! max-pools each group. The last stage is max-pooled globally and a fully
//! connected head maps it to class logits.
//!
//! Sampling and grouping depend only on coordinates, so they are computed
//! once per cloud ([`prepare`]) and treated as constants by the gradient.

mod train;

pub use train::{
    evaluate, finetune, init_params, stratified_split, train, EpochStats, Evaluation, FinetuneResult, LrSchedule,
    Resampled, Samples, Subset, TrainConfig,
};

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::sampling::{fps_from, knn_points};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageConfig {
    pub n_centroids: usize,
    pub k_neighbors: usize,
    pub widths: Vec<usize>,
}

/// Per-point features of the last stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    /// Centroid-relative coordinates only; translation invariant.
    #[default]
    RelativeOnly,
    /// Also feed absolute point coordinates to the last stage.
    WithAbsolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub stages: Vec<StageConfig>,
    /// Fully connected widths; the last one is the class count.
    pub head: Vec<usize>,
    pub n_classes: usize,
    #[serde(default)]
    pub features: FeatureMode,
    /// Multiplies coordinates before the first layer.
    pub coord_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            stages: vec![
                StageConfig { n_centroids: 64, k_neighbors: 16, widths: vec![32, 64] },
                StageConfig { n_centroids: 16, k_neighbors: 8, widths: vec![64, 128] },
            ],
            head: vec![64, 3],
            n_classes: 3,
            features: FeatureMode::RelativeOnly,
            coord_scale: 0.1,
        }
    }
}

/// Direction whose extreme point starts every FPS run, making the start a
/// function of the coordinates alone.
const START_DIR: Vec3 = Vec3::new(0.267_261_241_912_424_4, 0.534_522_483_824_848_8, 0.801_783_725_737_273_1);

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::invalid("stages", "need at least one stage"));
        }
        for s in &self.stages {
            if s.n_centroids == 0 || s.k_neighbors == 0 || s.widths.is_empty() || s.widths.contains(&0) {
                return Err(Error::invalid("stages", "counts and widths must be at least 1"));
            }
        }
        if self.head.is_empty() || self.head.contains(&0) {
            return Err(Error::invalid("head", "widths must be at least 1"));
        }
        if self.n_classes == 0 || *self.head.last().unwrap() != self.n_classes {
            return Err(Error::invalid("head", "last width must equal n_classes"));
        }
        if !(self.coord_scale > 0.0 && self.coord_scale.is_finite()) {
            return Err(Error::invalid("coord_scale", "must be positive"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every dense layer, stages first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut feat = 0;
        let last = self.stages.len() - 1;
        for (si, s) in self.stages.iter().enumerate() {
            let mut fan_in = 3 + feat;
            if si == last && self.features == FeatureMode::WithAbsolute {
                fan_in += 3;
            }
            for &w in &s.widths {
                shapes.push((fan_in, w));
                fan_in = w;
            }
            feat = fan_in;
        }
        let mut fan_in = feat;
        for &w in &self.head {
            shapes.push((fan_in, w));
            fan_in = w;
        }
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }

    /// Smallest cloud every stage can group.
    pub fn min_points(&self) -> usize {
        // Stage s sees min(n, c_0, ..., c_{s-1}) points and needs k_s of them.
        let mut need = 0;
        let mut cap = usize::MAX;
        for s in &self.stages {
            if s.k_neighbors > cap {
                return usize::MAX;
            }
            need = need.max(s.k_neighbors);
            cap = cap.min(s.n_centroids);
        }
        need
    }
}

/// Flat parameters with the layer shape table. Each layer stores its
/// weights row-major as `[fan_out][fan_in]`, then its biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub values: Vec<f64>,
    pub shapes: Vec<(usize, usize)>,
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        ModelParams { values: vec![0.0; cfg.param_count()], shapes: cfg.layer_shapes() }
    }

    pub fn from_values(cfg: &ModelConfig, values: Vec<f64>) -> Result<Self> {
        let p = ModelParams { values, shapes: cfg.layer_shapes() };
        p.check(cfg)?;
        Ok(p)
    }

    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        if self.shapes != cfg.layer_shapes() || self.values.len() != cfg.param_count() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "parameters have {} values, config implies {}",
                self.values.len(),
                cfg.param_count()
            )));
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("params", "must be finite"));
        }
        Ok(())
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.shapes.len());
        let mut o = 0;
        for &(i, n) in &self.shapes {
            off.push(o);
            o += i * n + n;
        }
        off
    }
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl Layer {
    fn forward(&self, p: &[f64], x: &[f64], z: &mut [f64]) {
        let w = &p[self.offset..self.offset + self.fan_in * self.fan_out];
        let b = &p[self.offset + self.fan_in * self.fan_out..];
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &w[o * self.fan_in..(o + 1) * self.fan_in];
            *zo = b[o] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients and, if `dx` is given, writes the
    /// input gradient.
    fn backward(&self, p: &[f64], x: &[f64], dz: &[f64], grad: &mut [f64], dx: Option<&mut [f64]>) {
        let nw = self.fan_in * self.fan_out;
        let (gw, gb) = grad[self.offset..self.offset + nw + self.fan_out].split_at_mut(nw);
        for (o, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            for (g, &xi) in gw[o * self.fan_in..(o + 1) * self.fan_in].iter_mut().zip(x) {
                *g += d * xi;
            }
        }
        if let Some(dx) = dx {
            let w = &p[self.offset..self.offset + nw];
            dx.iter_mut().for_each(|v| *v = 0.0);
            for (o, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (v, &wi) in dx.iter_mut().zip(&w[o * self.fan_in..(o + 1) * self.fan_in]) {
                    *v += d * wi;
                }
            }
        }
    }
}

fn layers(params: &ModelParams) -> Vec<Layer> {
    params
        .shapes
        .iter()
        .zip(params.offsets())
        .map(|(&(fan_in, fan_out), offset)| Layer { fan_in, fan_out, offset })
        .collect()
}

/// Sampling and grouping of one cloud, fixed for the lifetime of training.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    /// Level 0 holds the input points; level `s + 1` the centroids of stage `s`.
    pub levels: Vec<Vec<Vec3>>,
    /// Per stage, per centroid, indices into the stage's input level.
    pub groups: Vec<Vec<Vec<usize>>>,
    /// Per stage, which input-level index each centroid is.
    pub centroids: Vec<Vec<usize>>,
}

fn fps_start(points: &[Vec3]) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.dot(START_DIR) > points[best].dot(START_DIR) {
            best = i;
        }
    }
    best
}

/// Runs every stage's sampling and grouping on `points`.
pub fn prepare(cfg: &ModelConfig, points: &[Vec3]) -> Result<Prepared> {
    cfg.validate()?;
    let need = cfg.min_points();
    if points.len() < need {
        return Err(Error::CloudTooSmall { need, have: points.len() });
    }
    let mut levels = vec![points.to_vec()];
    let mut groups = Vec::new();
    let mut centroids = Vec::new();
    for s in &cfg.stages {
        let cur = levels.last().unwrap();
        if cur.len() < s.k_neighbors {
            return Err(Error::CloudTooSmall { need, have: points.len() });
        }
        let c = fps_from(cur, s.n_centroids, fps_start(cur));
        let g = knn_points(cur, &c, s.k_neighbors)?;
        let next = c.iter().map(|&i| cur[i]).collect();
        groups.push(g);
        centroids.push(c);
        levels.push(next);
    }
    Ok(Prepared { levels, groups, centroids })
}

struct StageTrace {
    /// Per layer, row-major `[rows][fan_in]` inputs.
    inputs: Vec<Vec<f64>>,
    /// Per layer, row-major `[rows][fan_out]` pre-activations.
    pre: Vec<Vec<f64>>,
    /// Per group and channel, the winning row.
    argmax: Vec<usize>,
    width: usize,
}

struct Trace {
    stages: Vec<StageTrace>,
    global_arg: Vec<usize>,
    head_in: Vec<Vec<f64>>,
    head_pre: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn forward_trace(params: &ModelParams, cfg: &ModelConfig, prep: &Prepared) -> Trace {
    let ls = layers(params);
    let p = &params.values;
    let mut li = 0;
    let mut prev_feat: Vec<f64> = Vec::new();
    let mut prev_w = 0;
    let mut stages = Vec::with_capacity(cfg.stages.len());
    let last = cfg.stages.len() - 1;
    for (si, s) in cfg.stages.iter().enumerate() {
        let pts = &prep.levels[si];
        let groups = &prep.groups[si];
        let cents = &prep.centroids[si];
        let absolute = si == last && cfg.features == FeatureMode::WithAbsolute;
        let fan_in = 3 + prev_w + if absolute { 3 } else { 0 };
        let k = s.k_neighbors;
        let rows = groups.len() * k;
        let mut x = vec![0.0; rows * fan_in];
        for (gi, (g, &c)) in groups.iter().zip(cents).enumerate() {
            let center = pts[c];
            for (mi, &j) in g.iter().enumerate() {
                let row = &mut x[(gi * k + mi) * fan_in..(gi * k + mi + 1) * fan_in];
                let d = (pts[j] - center) * cfg.coord_scale;
                row[..3].copy_from_slice(&d.to_array());
                row[3..3 + prev_w].copy_from_slice(&prev_feat[j * prev_w..(j + 1) * prev_w]);
                if absolute {
                    row[3 + prev_w..].copy_from_slice(&(pts[j] * cfg.coord_scale).to_array());
                }
            }
        }
        let mut inputs = Vec::with_capacity(s.widths.len());
        let mut pre = Vec::with_capacity(s.widths.len());
        let mut cur = x;
        let mut cur_in = fan_in;
        for _ in &s.widths {
            let l = ls[li];
            li += 1;
            let mut z = vec![0.0; rows * l.fan_out];
            for r in 0..rows {
                l.forward(p, &cur[r * cur_in..(r + 1) * cur_in], &mut z[r * l.fan_out..(r + 1) * l.fan_out]);
            }
            let a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            inputs.push(cur);
            pre.push(z);
            cur = a;
            cur_in = l.fan_out;
        }
        let w = cur_in;
        let mut out = vec![0.0; groups.len() * w];
        let mut argmax = vec![0; groups.len() * w];
        for gi in 0..groups.len() {
            for ch in 0..w {
                let mut best = gi * k;
                for r in gi * k + 1..(gi + 1) * k {
                    if cur[r * w + ch] > cur[best * w + ch] {
                        best = r;
                    }
                }
                argmax[gi * w + ch] = best;
                out[gi * w + ch] = cur[best * w + ch];
            }
        }
        prev_feat = out;
        prev_w = w;
        stages.push(StageTrace { inputs, pre, argmax, width: w });
    }

    let n_last = prep.groups[last].len();
    let mut global = vec![0.0; prev_w];
    let mut global_arg = vec![0; prev_w];
    for ch in 0..prev_w {
        let mut best = 0;
        for g in 1..n_last {
            if prev_feat[g * prev_w + ch] > prev_feat[best * prev_w + ch] {
                best = g;
            }
        }
        global_arg[ch] = best;
        global[ch] = prev_feat[best * prev_w + ch];
    }

    let mut head_in = Vec::new();
    let mut head_pre = Vec::new();
    let mut cur = global;
    let n_head = cfg.head.len();
    for hi in 0..n_head {
        let l = ls[li];
        li += 1;
        let mut z = vec![0.0; l.fan_out];
        l.forward(p, &cur, &mut z);
        head_in.push(cur);
        cur = if hi + 1 < n_head { z.iter().map(|&v| v.max(0.0)).collect() } else { z.clone() };
        head_pre.push(z);
    }
    Trace { stages, global_arg, head_in, head_pre, logits: cur }
}

/// Accumulates `d loss / d params` for one sample given `d loss / d logits`.
fn backward(params: &ModelParams, cfg: &ModelConfig, prep: &Prepared, t: &Trace, dlogits: &[f64], grad: &mut [f64]) {
    let ls = layers(params);
    let p = &params.values;
    let n_head = cfg.head.len();
    let head_first = ls.len() - n_head;
    let mut d = dlogits.to_vec();
    for hi in (0..n_head).rev() {
        let l = ls[head_first + hi];
        if hi + 1 < n_head {
            for (dv, &z) in d.iter_mut().zip(&t.head_pre[hi]) {
                if z <= 0.0 {
                    *dv = 0.0;
                }
            }
        }
        let mut dx = vec![0.0; l.fan_in];
        l.backward(p, &t.head_in[hi], &d, grad, Some(&mut dx));
        d = dx;
    }

    let last = cfg.stages.len() - 1;
    let w_last = t.stages[last].width;
    let mut d_feat = vec![0.0; prep.groups[last].len() * w_last];
    for (ch, &g) in t.global_arg.iter().enumerate() {
        d_feat[g * w_last + ch] += d[ch];
    }

    let mut layer_end = head_first;
    for si in (0..cfg.stages.len()).rev() {
        let s = &cfg.stages[si];
        let st = &t.stages[si];
        let w = st.width;
        let k = s.k_neighbors;
        let rows = prep.groups[si].len() * k;
        let layer_start = layer_end - s.widths.len();
        let mut da = vec![0.0; rows * w];
        for (gc, &r) in st.argmax.iter().enumerate() {
            let ch = gc % w;
            da[r * w + ch] += d_feat[gc];
        }
        let prev_w = if si == 0 { 0 } else { t.stages[si - 1].width };
        let need_input = si > 0;
        let mut d_in = Vec::new();
        for lj in (0..s.widths.len()).rev() {
            let l = ls[layer_start + lj];
            let z = &st.pre[lj];
            for (dv, &zv) in da.iter_mut().zip(z) {
                if zv <= 0.0 {
                    *dv = 0.0;
                }
            }
            let want_dx = lj > 0 || need_input;
            let mut dx = if want_dx { vec![0.0; rows * l.fan_in] } else { Vec::new() };
            let x = &st.inputs[lj];
            for r in 0..rows {
                let dz = &da[r * l.fan_out..(r + 1) * l.fan_out];
                if dz.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let xr = &x[r * l.fan_in..(r + 1) * l.fan_in];
                let dxr = if want_dx { Some(&mut dx[r * l.fan_in..(r + 1) * l.fan_in]) } else { None };
                l.backward(p, xr, dz, grad, dxr);
            }
            if lj > 0 {
                da = dx;
            } else {
                d_in = dx;
            }
        }
        if need_input {
            let fan_in = ls[layer_start].fan_in;
            let mut prev = vec![0.0; prep.levels[si].len() * prev_w];
            for (gi, g) in prep.groups[si].iter().enumerate() {
                for (mi, &j) in g.iter().enumerate() {
                    let r = gi * k + mi;
                    for c in 0..prev_w {
                        prev[j * prev_w + c] += d_in[r * fan_in + 3 + c];
                    }
                }
            }
            d_feat = prev;
        }
        layer_end = layer_start;
    }
}

/// Class logits for a prepared cloud.
pub fn forward_prepared(params: &ModelParams, cfg: &ModelConfig, prep: &Prepared) -> Vec<f64> {
    forward_trace(params, cfg, prep).logits
}

/// Class logits for `cloud`.
pub fn forward(params: &ModelParams, cfg: &ModelConfig, cloud: &PointCloud) -> Result<Vec<f64>> {
    params.check(cfg)?;
    let prep = prepare(cfg, cloud.points())?;
    Ok(forward_prepared(params, cfg, &prep))
}

/// Softmax cross-entropy of `logits` against `label`, and its gradient.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - m)).collect();
    let sum: f64 = exps.iter().sum();
    let loss = libm::log(sum) + m - logits[label];
    let mut g: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    g[label] -= 1.0;
    (loss, g)
}

/// Index of the largest logit, lowest on ties.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over `batch` and its gradient; also returns how many
/// samples were classified correctly.
pub fn loss_and_grad_prepared(
    params: &ModelParams,
    cfg: &ModelConfig,
    batch: &[(&Prepared, usize)],
) -> Result<(f64, Vec<f64>, usize)> {
    if batch.is_empty() {
        return Err(Error::invalid("batch", "must not be empty"));
    }
    let mut grad = vec![0.0; params.values.len()];
    let mut loss = 0.0;
    let mut correct = 0;
    for &(prep, label) in batch {
        if label >= cfg.n_classes {
            return Err(Error::invalid("label", "out of range"));
        }
        let t = forward_trace(params, cfg, prep);
        let (l, dl) = cross_entropy(&t.logits, label);
        correct += usize::from(argmax(&t.logits) == label);
        loss += l;
        backward(params, cfg, prep, &t, &dl, &mut grad);
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad, correct))
}

/// Mean cross-entropy over `(cloud, label)` pairs and its gradient.
pub fn loss_and_grad(params: &ModelParams, cfg: &ModelConfig, batch: &[(&PointCloud, usize)]) -> Result<(f64, Vec<f64>)> {
    params.check(cfg)?;
    let preps: Vec<Prepared> = batch.iter().map(|(c, _)| prepare(cfg, c.points())).collect::<Result<_>>()?;
    let pairs: Vec<(&Prepared, usize)> = preps.iter().zip(batch).map(|(p, &(_, l))| (p, l)).collect();
    let (loss, grad, _) = loss_and_grad_prepared(params, cfg, &pairs)?;
    Ok((loss, grad))
}
