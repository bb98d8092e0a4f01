//! Dynamic Snake FPN: top-down feature fusion through perceptual modulation
//! blocks.
//!
//! Each block concatenates the lateral feature `C_i` with the (upsampled)
//! fused feature from the level above, runs a 3x3 convolution and a pair of
//! snake convolutions (horizontal + vertical) in parallel, concatenates the
//! two branch outputs into `V`, and mixes the per-pixel tokens of `V` with
//! gated self-attention:
//!
//! ```text
//! F = softmax(sigma(V Wq^T + bq) sigma(V Wk^T + bk)^T / sqrt(d_k)) V
//! ```
//!
//! `V` is used without a value projection. A 1x1 convolution maps the
//! `2C` attention output back to the level's `C` channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsc::{dsc_forward, SnakeAxis, SnakeKernel, DEFAULT_OFFSET_BOUND, DEFAULT_SNAKE_LENGTH};
use crate::error::{Error, Result};
use crate::grid::{concat_channels, conv2d, sigmoid, softmax_in_place, upsample2x, Grid};
use crate::maps::GeometryMaps;

/// The gate nonlinearity applied to queries and keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Logistic,
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Logistic => sigmoid(v),
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_q: Grid,
    pub w_k: Grid,
    pub b_q: Vec<f64>,
    pub b_k: Vec<f64>,
    pub d_k: usize,
    pub activation: Activation,
}

impl AttentionParams {
    pub fn zeros(d: usize, activation: Activation) -> Self {
        Self {
            w_q: Grid::zeros(&[d, d]),
            w_k: Grid::zeros(&[d, d]),
            b_q: vec![0.0; d],
            b_k: vec![0.0; d],
            d_k: d,
            activation,
        }
    }

    fn check(&self, d: usize, op: &str) -> Result<()> {
        for (name, g) in [("W_Q", &self.w_q), ("W_K", &self.w_k)] {
            if g.shape() != [d, d] {
                return Err(Error::shape(
                    op,
                    format!("{name} is {:?}, tokens have d={d}", g.shape()),
                ));
            }
        }
        if self.b_q.len() != d || self.b_k.len() != d {
            return Err(Error::shape(op, format!("attention bias length != d={d}")));
        }
        if self.d_k == 0 {
            return Err(Error::InvalidArgument("d_k must be positive".into()));
        }
        Ok(())
    }

    /// `act(tokens W^T + b)` for an `[N, d]` token matrix.
    fn project(&self, tokens: &[f64], n: usize, d: usize, w: &Grid, b: &[f64]) -> Vec<f64> {
        let wd = w.data();
        let mut out = vec![0.0; n * d];
        for t in 0..n {
            let row = &tokens[t * d..(t + 1) * d];
            for o in 0..d {
                let wrow = &wd[o * d..(o + 1) * d];
                let z: f64 = b[o] + wrow.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                out[t * d + o] = self.activation.apply(z);
            }
        }
        out
    }
}

/// Gated self-attention over an `[N, d]` token matrix. When `weights` is
/// given, the `[N, N]` attention matrix is also materialised into it.
fn attend(v: &Grid, params: &AttentionParams, mut weights: Option<&mut Vec<f64>>) -> Result<Grid> {
    let (n, d) = v.dims2("attention")?;
    params.check(d, "attention")?;
    let tokens = v.data();
    let q = params.project(tokens, n, d, &params.w_q, &params.b_q);
    let k = params.project(tokens, n, d, &params.w_k, &params.b_k);
    let scale = 1.0 / (params.d_k as f64).sqrt();
    if let Some(w) = weights.as_deref_mut() {
        w.clear();
        w.reserve(n * n);
    }
    let mut out = vec![0.0; n * d];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let qi = &q[i * d..(i + 1) * d];
        for (j, r) in row.iter_mut().enumerate() {
            let kj = &k[j * d..(j + 1) * d];
            *r = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
        }
        softmax_in_place(&mut row);
        let orow = &mut out[i * d..(i + 1) * d];
        for (j, &a) in row.iter().enumerate() {
            for (o, &vv) in orow.iter_mut().zip(&tokens[j * d..(j + 1) * d]) {
                *o += a * vv;
            }
        }
        if let Some(w) = weights.as_deref_mut() {
            w.extend_from_slice(&row);
        }
    }
    Grid::new(vec![n, d], out)
}

/// Gated self-attention output for `[N, d]` tokens (rows of `V`).
pub fn attention(v: &Grid, params: &AttentionParams) -> Result<Grid> {
    attend(v, params, None)
}

/// The `[N, N]` row-stochastic attention matrix for `[N, d]` tokens.
pub fn attention_weights(v: &Grid, params: &AttentionParams) -> Result<Grid> {
    let n = v.shape()[0];
    let mut w = Vec::new();
    attend(v, params, Some(&mut w))?;
    Grid::new(vec![n, n], w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weight: Grid,
    pub bias: Vec<f64>,
}

impl ConvParams {
    fn zeros(cout: usize, cin: usize, k: usize) -> Self {
        Self {
            weight: Grid::zeros(&[cout, cin, k, k]),
            bias: vec![0.0; cout],
        }
    }

    fn apply(&self, x: &Grid, stride: usize) -> Result<Grid> {
        let pad = self.weight.shape().get(2).map_or(0, |k| k / 2);
        conv2d(x, &self.weight, &self.bias, stride, pad)
    }
}

/// Parameters of one perceptual modulation block at a level with `C`
/// channels: conv `2C -> C`, snake pair `2C -> C`, attention on `d = 2C`,
/// projection `2C -> C`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub conv: ConvParams,
    pub snake_h: Grid,
    pub snake_v: Grid,
    /// Offset fields (`[2L, H, W]`); `None` means straight snakes.
    pub offsets_h: Option<Grid>,
    pub offsets_v: Option<Grid>,
    pub attention: AttentionParams,
    pub proj: ConvParams,
}

impl BlockParams {
    pub fn zeros(channels: usize, snake_length: usize, activation: Activation) -> Self {
        let d = 2 * channels;
        Self {
            conv: ConvParams::zeros(channels, d, 3),
            snake_h: Grid::zeros(&[channels, d, snake_length]),
            snake_v: Grid::zeros(&[channels, d, snake_length]),
            offsets_h: None,
            offsets_v: None,
            attention: AttentionParams::zeros(d, activation),
            proj: ConvParams::zeros(channels, d, 1),
        }
    }

    fn grids_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.conv.weight.data_mut(),
            &mut self.conv.bias,
            self.snake_h.data_mut(),
            self.snake_v.data_mut(),
            self.attention.w_q.data_mut(),
            self.attention.w_k.data_mut(),
            &mut self.attention.b_q,
            &mut self.attention.b_k,
            self.proj.weight.data_mut(),
            &mut self.proj.bias,
        ]
    }
}

/// Block-level switches shared by every block of a network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOptions {
    pub offset_bound: f64,
    /// Ablation switch: when false the snake branch contributes zeros.
    pub use_snake: bool,
}

impl Default for BlockOptions {
    fn default() -> Self {
        Self {
            offset_bound: DEFAULT_OFFSET_BOUND,
            use_snake: true,
        }
    }
}

fn in_branch(block: &str, branch: &str) -> impl Fn(Error) -> Error {
    let block = block.to_string();
    let branch = branch.to_string();
    move |e| match e {
        Error::Shape { op, detail } => Error::Shape {
            op: format!("{block} / {branch} ({op})"),
            detail,
        },
        other => other,
    }
}

/// `[B, d, H, W]` -> per-batch `[H*W, d]` token matrices.
fn to_tokens(x: &Grid, b: usize) -> Result<Grid> {
    let (_, d, h, w) = x.dims4("to_tokens")?;
    let n = h * w;
    let base = b * d * n;
    let mut data = vec![0.0; n * d];
    for c in 0..d {
        for p in 0..n {
            data[p * d + c] = x.data()[base + c * n + p];
        }
    }
    Grid::new(vec![n, d], data)
}

fn from_tokens(tokens: &[Grid], h: usize, w: usize) -> Result<Grid> {
    let d = tokens.first().map_or(0, |t| t.shape()[1]);
    let n = h * w;
    let mut data = vec![0.0; tokens.len() * d * n];
    for (b, t) in tokens.iter().enumerate() {
        for p in 0..n {
            for c in 0..d {
                data[(b * d + c) * n + p] = t.data()[p * d + c];
            }
        }
    }
    Grid::new(vec![tokens.len(), d, h, w], data)
}

fn block_forward(
    name: &str,
    c_i: &Grid,
    f_prev: &Grid,
    params: &BlockParams,
    opts: BlockOptions,
    mut trace: Option<&mut Vec<Grid>>,
) -> Result<Grid> {
    let x = concat_channels(c_i, f_prev, "concat").map_err(in_branch(name, "input concat"))?;
    let (nb, _, h, w) = x.dims4("block")?;

    let conv = params
        .conv
        .apply(&x, 1)
        .map_err(in_branch(name, "conv branch"))?;

    let snake = if opts.use_snake {
        let run = |weights: &Grid, offsets: &Option<Grid>, axis, label| -> Result<Grid> {
            let kernel = match offsets {
                Some(off) => {
                    SnakeKernel::new(axis, weights.clone(), off.clone(), opts.offset_bound)
                }
                None => SnakeKernel::straight(axis, weights.clone(), h, w),
            }
            .map_err(in_branch(name, label))?;
            dsc_forward(&x, &kernel).map_err(in_branch(name, label))
        };
        let sh = run(
            &params.snake_h,
            &params.offsets_h,
            SnakeAxis::Horizontal,
            "snake branch (horizontal)",
        )?;
        let sv = run(
            &params.snake_v,
            &params.offsets_v,
            SnakeAxis::Vertical,
            "snake branch (vertical)",
        )?;
        sh.zip_map(&sv, "snake sum", |a, b| a + b)
            .map_err(in_branch(name, "snake branch"))?
    } else {
        Grid::zeros(conv.shape())
    };

    let v = concat_channels(&conv, &snake, "concat").map_err(in_branch(name, "value concat"))?;
    let mut mixed = Vec::with_capacity(nb);
    for b in 0..nb {
        let tokens = to_tokens(&v, b)?;
        let out = match trace.as_deref_mut() {
            Some(t) => {
                let mut weights = Vec::new();
                let out = attend(&tokens, &params.attention, Some(&mut weights))
                    .map_err(in_branch(name, "attention branch"))?;
                let n = tokens.shape()[0];
                t.push(Grid::new(vec![n, n], weights)?);
                out
            }
            None => attention(&tokens, &params.attention)
                .map_err(in_branch(name, "attention branch"))?,
        };
        mixed.push(out);
    }
    let mixed = from_tokens(&mixed, h, w)?;
    params
        .proj
        .apply(&mixed, 1)
        .map_err(in_branch(name, "projection"))
}

/// One perceptual modulation block. `f_prev` must already be at `c_i`'s
/// spatial size.
pub fn modulation_block(
    c_i: &Grid,
    f_prev: &Grid,
    params: &BlockParams,
    opts: BlockOptions,
) -> Result<Grid> {
    block_forward("modulation block", c_i, f_prev, params, opts, None)
}

/// One pyramid level: its downsampling factor and channel count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PyramidLevel {
    pub stride: usize,
    pub channels: usize,
}

/// Pyramid layout, finest level first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PyramidSpec {
    pub levels: Vec<PyramidLevel>,
}

impl PyramidSpec {
    /// Strides 4, 8, 16, 32 with a uniform channel count.
    pub fn standard(channels: usize) -> Self {
        Self {
            levels: [4, 8, 16, 32]
                .into_iter()
                .map(|stride| PyramidLevel { stride, channels })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .levels
            .first()
            .ok_or_else(|| Error::InvalidArgument("pyramid has no levels".into()))?;
        for pair in self.levels.windows(2) {
            if pair[1].stride != 2 * pair[0].stride {
                return Err(Error::InvalidArgument(format!(
                    "consecutive strides must double, got {} then {}",
                    pair[0].stride, pair[1].stride
                )));
            }
        }
        if self
            .levels
            .iter()
            .any(|l| l.channels != first.channels || l.channels == 0)
        {
            return Err(Error::InvalidArgument(
                "pyramid channel count must be uniform and positive".into(),
            ));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.levels[0].channels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsfConfig {
    pub pyramid: PyramidSpec,
    pub blocks_per_level: usize,
    pub snake_length: usize,
    pub activation: Activation,
    pub block: BlockOptions,
}

impl DsfConfig {
    pub fn new(channels: usize) -> Self {
        Self {
            pyramid: PyramidSpec::standard(channels),
            blocks_per_level: 1,
            snake_length: DEFAULT_SNAKE_LENGTH,
            activation: Activation::Logistic,
            block: BlockOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsfParams {
    /// `levels[i][k]` is block `k` of pyramid level `i` (finest first).
    pub levels: Vec<Vec<BlockParams>>,
    pub head: ConvParams,
}

/// Output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DsfOutput {
    /// Fused features, finest level first.
    pub fused: Vec<Grid>,
    /// `[B, 7, H/4, W/4]`; channels 0 and 1 are logistic scores.
    pub head: Grid,
}

impl DsfOutput {
    pub fn maps(&self, b: usize) -> Result<GeometryMaps> {
        GeometryMaps::from_head(&self.head, b)
    }
}

pub const INIT_RANGE: f64 = 0.05;

/// The fusion network with fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dsf {
    pub config: DsfConfig,
    pub params: DsfParams,
}

impl Dsf {
    pub fn zeroed(config: DsfConfig) -> Result<Self> {
        config.pyramid.validate()?;
        if config.blocks_per_level == 0 || config.snake_length % 2 == 0 {
            return Err(Error::InvalidArgument(
                "need at least one block per level and an odd snake length".into(),
            ));
        }
        let c = config.pyramid.channels();
        let levels = config
            .pyramid
            .levels
            .iter()
            .map(|_| {
                (0..config.blocks_per_level)
                    .map(|_| BlockParams::zeros(c, config.snake_length, config.activation))
                    .collect()
            })
            .collect();
        Ok(Self {
            params: DsfParams {
                levels,
                head: ConvParams::zeros(7, c, 1),
            },
            config,
        })
    }

    /// Parameters drawn uniformly from `[-0.05, 0.05]` with a seeded RNG.
    pub fn seeded(config: DsfConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeroed(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for block in net.params.levels.iter_mut().flatten() {
            for g in block.grids_mut() {
                g.iter_mut()
                    .for_each(|v| *v = rng.gen_range(-INIT_RANGE..=INIT_RANGE));
            }
        }
        for g in [net.params.head.weight.data_mut(), &mut net.params.head.bias] {
            g.iter_mut()
                .for_each(|v| *v = rng.gen_range(-INIT_RANGE..=INIT_RANGE));
        }
        Ok(net)
    }

    fn check_inputs(&self, feats: &[Grid]) -> Result<()> {
        const OP: &str = "dsf_forward";
        let levels = &self.config.pyramid.levels;
        if feats.len() != levels.len() {
            return Err(Error::shape(
                OP,
                format!(
                    "expected {} pyramid levels, got {}",
                    levels.len(),
                    feats.len()
                ),
            ));
        }
        let (nb, _, h0, w0) = feats[0].dims4(OP)?;
        for (i, (f, lvl)) in feats.iter().zip(levels).enumerate() {
            let (b, c, h, w) = f.dims4(OP)?;
            let factor = lvl.stride / levels[0].stride;
            if b != nb || c != lvl.channels || h * factor != h0 || w * factor != w0 {
                return Err(Error::shape(
                    OP,
                    format!(
                        "level {i} (1/{}) is {:?}; expected [{nb}, {}, {}, {}]",
                        lvl.stride,
                        f.shape(),
                        lvl.channels,
                        h0 / factor,
                        w0 / factor
                    ),
                ));
            }
        }
        Ok(())
    }

    fn run(&self, feats: &[Grid], mut trace: Option<&mut Vec<Grid>>) -> Result<DsfOutput> {
        self.check_inputs(feats)?;
        let n = feats.len();
        let mut fused: Vec<Option<Grid>> = vec![None; n];
        let mut above: Option<Grid> = None;
        for i in (0..n).rev() {
            let c_i = &feats[i];
            let f_above = match above.take() {
                Some(f) => upsample2x(&f)?,
                None => Grid::zeros(c_i.shape()),
            };
            let mut x = c_i.clone();
            for (k, block) in self.params.levels[i].iter().enumerate() {
                let name = format!(
                    "level {i} (1/{}) block {k}",
                    self.config.pyramid.levels[i].stride
                );
                x = block_forward(
                    &name,
                    &x,
                    &f_above,
                    block,
                    self.config.block,
                    trace.as_deref_mut(),
                )?;
            }
            above = Some(x.clone());
            fused[i] = Some(x);
        }
        let fused: Vec<Grid> = fused
            .into_iter()
            .map(|f| f.expect("every level fused"))
            .collect();
        let mut head = self
            .params
            .head
            .apply(&fused[0], 1)
            .map_err(in_branch("head", "1x1 conv"))?;
        let (nb, _, h, w) = head.dims4("head")?;
        let plane = h * w;
        for b in 0..nb {
            for c in 0..2 {
                let start = (b * 7 + c) * plane;
                head.data_mut()[start..start + plane]
                    .iter_mut()
                    .for_each(|v| *v = sigmoid(*v));
            }
        }
        Ok(DsfOutput { fused, head })
    }

    /// Top-down fusion of backbone features given finest level first.
    pub fn forward(&self, feats: &[Grid]) -> Result<DsfOutput> {
        self.run(feats, None)
    }

    /// Like [`forward`](Self::forward), also returning every block's
    /// attention matrix (coarsest level first, batch-major within a block).
    pub fn forward_with_attention(&self, feats: &[Grid]) -> Result<(DsfOutput, Vec<Grid>)> {
        let mut trace = Vec::new();
        let out = self.run(feats, Some(&mut trace))?;
        Ok((out, trace))
    }

    /// Named parameter tensors for map-file persistence.
    pub fn to_sections(&self) -> Vec<(String, Grid)> {
        let mut out = Vec::new();
        let vec1 = |v: &[f64]| Grid::new(vec![v.len()], v.to_vec()).expect("rank 1");
        for (i, level) in self.params.levels.iter().enumerate() {
            for (k, b) in level.iter().enumerate() {
                let p = format!("dsf.level{i}.block{k}");
                out.push((format!("{p}.conv.weight"), b.conv.weight.clone()));
                out.push((format!("{p}.conv.bias"), vec1(&b.conv.bias)));
                out.push((format!("{p}.snake_h.weight"), b.snake_h.clone()));
                out.push((format!("{p}.snake_v.weight"), b.snake_v.clone()));
                if let Some(o) = &b.offsets_h {
                    out.push((format!("{p}.snake_h.offsets"), o.clone()));
                }
                if let Some(o) = &b.offsets_v {
                    out.push((format!("{p}.snake_v.offsets"), o.clone()));
                }
                out.push((format!("{p}.attn.w_q"), b.attention.w_q.clone()));
                out.push((format!("{p}.attn.w_k"), b.attention.w_k.clone()));
                out.push((format!("{p}.attn.b_q"), vec1(&b.attention.b_q)));
                out.push((format!("{p}.attn.b_k"), vec1(&b.attention.b_k)));
                out.push((format!("{p}.proj.weight"), b.proj.weight.clone()));
                out.push((format!("{p}.proj.bias"), vec1(&b.proj.bias)));
            }
        }
        out.push(("dsf.head.weight".into(), self.params.head.weight.clone()));
        out.push(("dsf.head.bias".into(), vec1(&self.params.head.bias)));
        out
    }

    /// Loads parameters saved by [`to_sections`](Self::to_sections) into a
    /// network built for `config`. Shapes must match exactly.
    pub fn from_sections(config: DsfConfig, sections: &[(String, Grid)]) -> Result<Self> {
        let mut net = Self::zeroed(config)?;
        let find = |name: &str| {
            sections
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, g)| g)
                .ok_or_else(|| Error::MapFormat(format!("missing parameter `{name}`")))
        };
        let load = |dst: &mut [f64], name: &str| -> Result<()> {
            let src = find(name)?;
            if src.len() != dst.len() {
                return Err(Error::shape(
                    "Dsf::from_sections",
                    format!("`{name}` has {} values, expected {}", src.len(), dst.len()),
                ));
            }
            dst.copy_from_slice(src.data());
            Ok(())
        };
        for (i, level) in net.params.levels.iter_mut().enumerate() {
            for (k, b) in level.iter_mut().enumerate() {
                let p = format!("dsf.level{i}.block{k}");
                load(b.conv.weight.data_mut(), &format!("{p}.conv.weight"))?;
                load(&mut b.conv.bias, &format!("{p}.conv.bias"))?;
                load(b.snake_h.data_mut(), &format!("{p}.snake_h.weight"))?;
                load(b.snake_v.data_mut(), &format!("{p}.snake_v.weight"))?;
                b.offsets_h = find(&format!("{p}.snake_h.offsets")).ok().cloned();
                b.offsets_v = find(&format!("{p}.snake_v.offsets")).ok().cloned();
                load(b.attention.w_q.data_mut(), &format!("{p}.attn.w_q"))?;
                load(b.attention.w_k.data_mut(), &format!("{p}.attn.w_k"))?;
                load(&mut b.attention.b_q, &format!("{p}.attn.b_q"))?;
                load(&mut b.attention.b_k, &format!("{p}.attn.b_k"))?;
                load(b.proj.weight.data_mut(), &format!("{p}.proj.weight"))?;
                load(&mut b.proj.bias, &format!("{p}.proj.bias"))?;
            }
        }
        load(net.params.head.weight.data_mut(), "dsf.head.weight")?;
        load(&mut net.params.head.bias, "dsf.head.bias")?;
        Ok(net)
    }
}

/// Four strided convolution stages (stride 4, then 2, 2, 2) with ReLU,
/// turning a `[B, 1, H, W]` image into a 1/4..1/32 pyramid. A fixture for
/// running images end to end; it is not a trained backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneStub {
    stages: Vec<ConvParams>,
}

impl BackboneStub {
    pub fn seeded(channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stages = vec![ConvParams::zeros(channels, 1, 5)];
        for _ in 0..3 {
            stages.push(ConvParams::zeros(channels, channels, 3));
        }
        for s in &mut stages {
            let fan_in = (s.weight.len() / s.bias.len()) as f64;
            let r = (3.0 / fan_in).sqrt();
            s.weight
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-r..=r));
        }
        Self { stages }
    }

    /// Input height and width must be multiples of 32.
    pub fn forward(&self, image: &Grid) -> Result<Vec<Grid>> {
        let (_, c, h, w) = image.dims4("backbone")?;
        if c != 1 || h % 32 != 0 || w % 32 != 0 || h == 0 || w == 0 {
            return Err(Error::shape(
                "backbone",
                format!(
                    "expected [B, 1, H, W] with H, W multiples of 32, got {:?}",
                    image.shape()
                ),
            ));
        }
        let mut feats = Vec::with_capacity(4);
        let mut x = image.clone();
        for (i, stage) in self.stages.iter().enumerate() {
            let stride = if i == 0 { 4 } else { 2 };
            x = stage.apply(&x, stride)?.map(|v| v.max(0.0));
            feats.push(x.clone());
        }
        Ok(feats)
    }
}
