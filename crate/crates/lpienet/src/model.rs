//! The lightweight enhancement network.
//!
//! A U-Net-style layout built from inverted-residual-attention (IRA) blocks:
//! a stem convolution, three encoder blocks (the last one a non-downsampling
//! bottleneck), two decoder blocks fed by bilinear upsampling and skip
//! concatenations, and a head convolution with a global input residual. The
//! output is clamped into [0, 1 - clip_epsilon].
//!
//! Each IRA block is two inverted linear residual units (pointwise expand,
//! depthwise 3x3, linear pointwise projection) followed by channel attention
//! (shared two-layer MLP over pooled statistics) and spatial attention (a
//! small convolution over channel-pooled maps). No normalization layers and
//! no GELU anywhere; activations are ReLU.

use crate::config::{KvMap, KvReader};
use crate::context::{Ctx, EvalCtx};
use crate::error::{Error, Result};
use crate::ops::{self, Dihedral, PaddingMode};
use crate::rng::Prng;
use crate::tensor::{Element, Shape, Tensor};

/// Kernel size of the depthwise convolutions inside inverted residual units.
/// `LpienetConfig::kernel_size` varies the stem/head convolutions instead;
/// that is what moves the cost budget the way the k=5 variant expects.
pub const DEPTHWISE_KERNEL: usize = 3;

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LpienetConfig {
    /// Channel widths of E1, E2, E3 (bottleneck), D1, D2.
    pub channels: [usize; 5],
    /// Stem and head convolution kernel size (odd).
    pub kernel_size: usize,
    /// Hidden width of an inverted residual = round(block_channels * ratio).
    pub expansion_ratio: f64,
    /// Spatial attention convolution kernel size (odd).
    pub spatial_attention_kernel: usize,
    /// Channel attention MLP reduction (hidden width = channels / reduction).
    pub channel_attention_reduction: usize,
    /// Output clamp: values land in [0, 1 - clip_epsilon].
    pub clip_epsilon: f64,
    /// Add the network input to the head output before clamping.
    pub global_residual: bool,
}

impl Default for LpienetConfig {
    fn default() -> Self {
        LpienetConfig {
            channels: [16, 32, 64, 32, 16],
            kernel_size: 3,
            expansion_ratio: 3.15,
            spatial_attention_kernel: 7,
            channel_attention_reduction: 4,
            clip_epsilon: 1e-5,
            global_residual: true,
        }
    }
}

impl LpienetConfig {
    /// The scaled-up variant with doubled channel widths.
    pub fn large() -> Self {
        LpienetConfig {
            channels: [32, 64, 128, 64, 32],
            ..Default::default()
        }
    }

    /// A miniature variant for tests and gradient checks.
    pub fn tiny() -> Self {
        LpienetConfig {
            channels: [4, 8, 16, 8, 4],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.iter().any(|&c| c == 0) {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        if !(self.channels[0] < self.channels[1] && self.channels[1] < self.channels[2]) {
            return Err(Error::Config(
                "encoder channels must be strictly increasing".into(),
            ));
        }
        if !(self.channels[2] > self.channels[3] && self.channels[3] > self.channels[4]) {
            return Err(Error::Config(
                "decoder channels must be strictly decreasing".into(),
            ));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel_size {} must be odd",
                self.kernel_size
            )));
        }
        if self.spatial_attention_kernel % 2 == 0 {
            return Err(Error::Config(format!(
                "spatial_attention_kernel {} must be odd",
                self.spatial_attention_kernel
            )));
        }
        if !(self.expansion_ratio > 0.0) {
            return Err(Error::Config(format!(
                "expansion_ratio {} must be positive",
                self.expansion_ratio
            )));
        }
        if self.channel_attention_reduction == 0 {
            return Err(Error::Config("channel_attention_reduction must be >= 1".into()));
        }
        for &c in &self.channels {
            if c % self.channel_attention_reduction != 0 {
                return Err(Error::Config(format!(
                    "channel width {c} not divisible by attention reduction {}",
                    self.channel_attention_reduction
                )));
            }
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::Config(format!(
                "clip_epsilon {} must lie in (0, 1)",
                self.clip_epsilon
            )));
        }
        Ok(())
    }

    /// Hidden width of the inverted residuals in a block of the given width.
    pub fn hidden_width(&self, block_channels: usize) -> usize {
        ((block_channels as f64 * self.expansion_ratio).round() as usize).max(1)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        m.set(
            "channels",
            self.channels
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.set("kernel_size", self.kernel_size);
        m.set("expansion_ratio", self.expansion_ratio);
        m.set("spatial_attention_kernel", self.spatial_attention_kernel);
        m.set("channel_attention_reduction", self.channel_attention_reduction);
        m.set("clip_epsilon", self.clip_epsilon);
        m.set("global_residual", self.global_residual);
        m
    }

    /// Consume this config's keys from a reader, leaving others untouched.
    pub fn from_reader(r: &mut KvReader) -> Result<Self> {
        let mut cfg = LpienetConfig::default();
        if let Some(ch) = r.take("channels") {
            let parts: Vec<usize> = ch
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("cannot parse channels `{ch}`")))?;
            if parts.len() != 5 {
                return Err(Error::Config(format!(
                    "channels needs exactly 5 entries, got {}",
                    parts.len()
                )));
            }
            cfg.channels.copy_from_slice(&parts);
        }
        if let Some(v) = r.take_parse("kernel_size")? {
            cfg.kernel_size = v;
        }
        if let Some(v) = r.take_parse("expansion_ratio")? {
            cfg.expansion_ratio = v;
        }
        if let Some(v) = r.take_parse("spatial_attention_kernel")? {
            cfg.spatial_attention_kernel = v;
        }
        if let Some(v) = r.take_parse("channel_attention_reduction")? {
            cfg.channel_attention_reduction = v;
        }
        if let Some(v) = r.take_parse("clip_epsilon")? {
            cfg.clip_epsilon = v;
        }
        if let Some(v) = r.take_bool("global_residual")? {
            cfg.global_residual = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_kv(map: KvMap) -> Result<Self> {
        let mut r = map.reader();
        let cfg = Self::from_reader(&mut r)?;
        r.finish()?;
        Ok(cfg)
    }
}

/// One convolution layer with its parameters.
#[derive(Debug, Clone)]
pub struct Conv<E: Element> {
    pub path: String,
    pub weight: Tensor<E>,
    pub bias: Tensor<E>,
    pub stride: usize,
    pub padding: PaddingMode,
    pub groups: usize,
}

impl<E: Element> Conv<E> {
    fn init(
        path: impl Into<String>,
        c_out: usize,
        c_in: usize,
        k: usize,
        groups: usize,
        padding: PaddingMode,
        rng: &mut Prng,
    ) -> Self {
        let fan_in = (c_in / groups) * k * k;
        let bound = (6.0 / fan_in as f64).sqrt();
        let mut weight = Tensor::zeros(Shape::new(c_out, c_in / groups, k, k));
        for v in weight.as_mut_slice() {
            *v = E::from_f64(rng.uniform_in(-bound, bound));
        }
        Conv {
            path: path.into(),
            weight,
            bias: Tensor::zeros(Shape::new(1, c_out, 1, 1)),
            stride: 1,
            padding,
            groups,
        }
    }

    fn apply<C: Ctx<E>>(&self, ctx: &mut C, x: &C::V) -> Result<C::V> {
        let w = ctx.param(&format!("{}.weight", self.path), &self.weight);
        let b = ctx.param(&format!("{}.bias", self.path), &self.bias);
        ctx.conv2d(x, &w, Some(&b), self.stride, self.padding, self.groups)
    }

    fn visit(&self, f: &mut impl FnMut(&str, &Tensor<E>)) {
        f(&format!("{}.weight", self.path), &self.weight);
        f(&format!("{}.bias", self.path), &self.bias);
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&str, &mut Tensor<E>)) {
        f(&format!("{}.weight", self.path), &mut self.weight);
        f(&format!("{}.bias", self.path), &mut self.bias);
    }
}

/// Pointwise expand -> depthwise -> linear pointwise projection, with a
/// residual connection when input and output widths match.
#[derive(Debug, Clone)]
pub struct InvertedResidual<E: Element> {
    pub expand: Conv<E>,
    pub depthwise: Conv<E>,
    pub project: Conv<E>,
    residual: bool,
}

impl<E: Element> InvertedResidual<E> {
    pub fn init(path: &str, c_in: usize, c_out: usize, hidden: usize, rng: &mut Prng) -> Self {
        InvertedResidual {
            expand: Conv::init(
                format!("{path}.expand"),
                hidden,
                c_in,
                1,
                1,
                PaddingMode::ZeroSame,
                rng,
            ),
            depthwise: Conv::init(
                format!("{path}.depthwise"),
                hidden,
                hidden,
                DEPTHWISE_KERNEL,
                hidden,
                PaddingMode::ZeroSame,
                rng,
            ),
            project: Conv::init(
                format!("{path}.project"),
                c_out,
                hidden,
                1,
                1,
                PaddingMode::ZeroSame,
                rng,
            ),
            residual: c_in == c_out,
        }
    }

    pub fn apply<C: Ctx<E>>(&self, ctx: &mut C, x: &C::V) -> Result<C::V> {
        let e = self.expand.apply(ctx, x)?;
        let e = ctx.relu(&e);
        let d = self.depthwise.apply(ctx, &e)?;
        let d = ctx.relu(&d);
        let p = self.project.apply(ctx, &d)?;
        if self.residual {
            ctx.add(&p, x)
        } else {
            Ok(p)
        }
    }

    fn visit(&self, f: &mut impl FnMut(&str, &Tensor<E>)) {
        self.expand.visit(f);
        self.depthwise.visit(f);
        self.project.visit(f);
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&str, &mut Tensor<E>)) {
        self.expand.visit_mut(f);
        self.depthwise.visit_mut(f);
        self.project.visit_mut(f);
    }
}

/// Per-channel sigmoid gate from pooled global statistics through a shared
/// two-layer pointwise MLP.
#[derive(Debug, Clone)]
pub struct ChannelAttention<E: Element> {
    pub fc1: Conv<E>,
    pub fc2: Conv<E>,
}

impl<E: Element> ChannelAttention<E> {
    pub fn init(path: &str, channels: usize, reduction: usize, rng: &mut Prng) -> Self {
        let hidden = (channels / reduction).max(1);
        ChannelAttention {
            fc1: Conv::init(
                format!("{path}.fc1"),
                hidden,
                channels,
                1,
                1,
                PaddingMode::ZeroSame,
                rng,
            ),
            fc2: Conv::init(
                format!("{path}.fc2"),
                channels,
                hidden,
                1,
                1,
                PaddingMode::ZeroSame,
                rng,
            ),
        }
    }

    pub fn apply<C: Ctx<E>>(&self, ctx: &mut C, x: &C::V) -> Result<C::V> {
        let avg = ctx.global_avg_pool(x);
        let max = ctx.global_max_pool(x);
        let mut mlp = |ctx: &mut C, v: &C::V| -> Result<C::V> {
            let h = self.fc1.apply(ctx, v)?;
            let h = ctx.relu(&h);
            self.fc2.apply(ctx, &h)
        };
        let a = mlp(ctx, &avg)?;
        let m = mlp(ctx, &max)?;
        let s = ctx.add(&a, &m)?;
        let gate = ctx.sigmoid(&s);
        ctx.mul(x, &gate)
    }

    fn visit(&self, f: &mut impl FnMut(&str, &Tensor<E>)) {
        self.fc1.visit(f);
        self.fc2.visit(f);
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&str, &mut Tensor<E>)) {
        self.fc1.visit_mut(f);
        self.fc2.visit_mut(f);
    }
}

/// Per-pixel sigmoid gate from channel mean/max maps through one convolution.
#[derive(Debug, Clone)]
pub struct SpatialAttention<E: Element> {
    pub conv: Conv<E>,
}

impl<E: Element> SpatialAttention<E> {
    pub fn init(path: &str, kernel: usize, rng: &mut Prng) -> Self {
        SpatialAttention {
            conv: Conv::init(
                format!("{path}.conv"),
                1,
                2,
                kernel,
                1,
                PaddingMode::ZeroSame,
                rng,
            ),
        }
    }

    pub fn apply<C: Ctx<E>>(&self, ctx: &mut C, x: &C::V) -> Result<C::V> {
        let mean = ctx.mean_channels(x);
        let max = ctx.max_channels(x);
        let stats = ctx.concat_channels(&mean, &max)?;
        let m = self.conv.apply(ctx, &stats)?;
        let gate = ctx.sigmoid(&m);
        ctx.mul(x, &gate)
    }
}

/// Inverted-residual-attention block: two inverted residuals, channel
/// attention, then spatial attention. Down/upsampling belongs to the
/// encoder/decoder wiring, not the block.
#[derive(Debug, Clone)]
pub struct IraBlock<E: Element> {
    pub ir1: InvertedResidual<E>,
    pub ir2: InvertedResidual<E>,
    pub ca: ChannelAttention<E>,
    pub sa: SpatialAttention<E>,
}

impl<E: Element> IraBlock<E> {
    pub fn init(path: &str, c_in: usize, width: usize, cfg: &LpienetConfig, rng: &mut Prng) -> Self {
        let hidden = cfg.hidden_width(width);
        IraBlock {
            ir1: InvertedResidual::init(&format!("{path}.ir1"), c_in, width, hidden, rng),
            ir2: InvertedResidual::init(&format!("{path}.ir2"), width, width, hidden, rng),
            ca: ChannelAttention::init(
                &format!("{path}.ca"),
                width,
                cfg.channel_attention_reduction,
                rng,
            ),
            sa: SpatialAttention::init(
                &format!("{path}.sa"),
                cfg.spatial_attention_kernel,
                rng,
            ),
        }
    }

    pub fn apply<C: Ctx<E>>(&self, ctx: &mut C, x: &C::V) -> Result<C::V> {
        let a = self.ir1.apply(ctx, x)?;
        let b = self.ir2.apply(ctx, &a)?;
        let c = self.ca.apply(ctx, &b)?;
        self.sa.apply(ctx, &c)
    }

    fn visit(&self, f: &mut impl FnMut(&str, &Tensor<E>)) {
        self.ir1.visit(f);
        self.ir2.visit(f);
        self.ca.visit(f);
        self.sa.conv.visit(f);
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&str, &mut Tensor<E>)) {
        self.ir1.visit_mut(f);
        self.ir2.visit_mut(f);
        self.ca.visit_mut(f);
        self.sa.conv.visit_mut(f);
    }
}

/// The full network.
#[derive(Debug, Clone)]
pub struct Model<E: Element> {
    pub config: LpienetConfig,
    pub stem: Conv<E>,
    pub enc1: IraBlock<E>,
    pub enc2: IraBlock<E>,
    pub enc3: IraBlock<E>,
    pub dec1: IraBlock<E>,
    pub dec2: IraBlock<E>,
    pub head: Conv<E>,
}

pub const INPUT_CHANNELS: usize = 3;

impl<E: Element> Model<E> {
    /// Build with fan-in-scaled uniform weight init, deterministic per seed.
    pub fn build(config: LpienetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Prng::seed(crate::rng::derive_seed(seed, "weight-init"));
        let [c0, c1, c2, c3, c4] = config.channels;
        let k = config.kernel_size;
        Ok(Model {
            stem: Conv::init("stem", c0, INPUT_CHANNELS, k, 1, PaddingMode::ZeroSame, &mut rng),
            enc1: IraBlock::init("enc1", c0, c0, &config, &mut rng),
            enc2: IraBlock::init("enc2", c0, c1, &config, &mut rng),
            enc3: IraBlock::init("enc3", c1, c2, &config, &mut rng),
            dec1: IraBlock::init("dec1", c2 + c1, c3, &config, &mut rng),
            dec2: IraBlock::init("dec2", c3 + c0, c4, &config, &mut rng),
            head: Conv::init("head", INPUT_CHANNELS, c4, k, 1, PaddingMode::ZeroSame, &mut rng),
            config,
        })
    }

    /// Run the network on an input whose spatial dims are multiples of 4.
    /// The public [`Model::forward`] handles padding and cropping.
    pub fn forward_on<C: Ctx<E>>(&self, ctx: &mut C, x: &C::V) -> Result<C::V> {
        let s = ctx.shape(x);
        if s.c != INPUT_CHANNELS {
            return Err(Error::shape(
                "forward",
                format!("expected {INPUT_CHANNELS} input channels, got {}", s.c),
            ));
        }
        if s.h % 4 != 0 || s.w % 4 != 0 {
            return Err(Error::shape(
                "forward",
                format!("spatial dims {}x{} must be multiples of 4", s.h, s.w),
            ));
        }
        let stem = self.stem.apply(ctx, x)?;
        let e1 = self.enc1.apply(ctx, &stem)?;
        let p1 = ctx.maxpool2x2(&e1)?;
        let e2 = self.enc2.apply(ctx, &p1)?;
        let p2 = ctx.maxpool2x2(&e2)?;
        let e3 = self.enc3.apply(ctx, &p2)?;

        // Features are activated before each upsample.
        let a3 = ctx.relu(&e3);
        let u1 = ctx.upsample2x(&a3);
        let cat1 = ctx.concat_channels(&u1, &e2)?;
        let d1 = self.dec1.apply(ctx, &cat1)?;

        let a1 = ctx.relu(&d1);
        let u2 = ctx.upsample2x(&a1);
        let cat2 = ctx.concat_channels(&u2, &e1)?;
        let d2 = self.dec2.apply(ctx, &cat2)?;

        let mut out = self.head.apply(ctx, &d2)?;
        if self.config.global_residual {
            out = ctx.add(&out, x)?;
        }
        let clipped = ctx.clamp(&out, 0.0, 1.0 - self.config.clip_epsilon);
        ctx.label(&clipped, "output");
        Ok(clipped)
    }

    /// Enhance an (n, 3, h, w) image. Arbitrary h, w: inputs are reflect-padded
    /// to multiples of 4 and the output is cropped back.
    pub fn forward(&self, image: &Tensor<E>) -> Result<Tensor<E>> {
        let (padded, (h, w)) = ops::reflect_pad_to_multiple(image, 4)?;
        let mut ctx = EvalCtx::new();
        let x = Ctx::<E>::input(&mut ctx, &padded);
        let y = self.forward_on(&mut ctx, &x)?;
        Ok(ops::crop(&y, h, w))
    }

    /// Average the 8 dihedral-transform predictions (geometric self-ensemble).
    pub fn self_ensemble(&self, image: &Tensor<E>) -> Result<Tensor<E>> {
        let mut acc: Option<Tensor<E>> = None;
        for d in Dihedral::ALL {
            let t = d.apply(image);
            let y = self.forward(&t)?;
            let y = d.invert(&y);
            acc = Some(match acc {
                None => y,
                Some(a) => ops::add(&a, &y)?,
            });
        }
        let mean = ops::scalar_mul(&acc.unwrap(), E::from_f64(1.0 / 8.0));
        Ok(ops::clamp(
            &mean,
            E::ZERO,
            E::from_f64(1.0 - self.config.clip_epsilon),
        ))
    }

    /// Visit every parameter in canonical order.
    pub fn visit_params(&self, f: &mut impl FnMut(&str, &Tensor<E>)) {
        self.stem.visit(f);
        self.enc1.visit(f);
        self.enc2.visit(f);
        self.enc3.visit(f);
        self.dec1.visit(f);
        self.dec2.visit(f);
        self.head.visit(f);
    }

    pub fn visit_params_mut(&mut self, f: &mut impl FnMut(&str, &mut Tensor<E>)) {
        self.stem.visit_mut(f);
        self.enc1.visit_mut(f);
        self.enc2.visit_mut(f);
        self.enc3.visit_mut(f);
        self.dec1.visit_mut(f);
        self.dec2.visit_mut(f);
        self.head.visit_mut(f);
    }

    /// Total number of weight and bias scalars.
    pub fn param_count(&self) -> usize {
        let mut count = 0;
        self.visit_params(&mut |_, t| count += t.len());
        count
    }

    /// Ordered (path, tensor) snapshot of all parameters.
    pub fn param_map(&self) -> Vec<(String, Tensor<E>)> {
        let mut v = Vec::new();
        self.visit_params(&mut |p, t| v.push((p.to_string(), t.clone())));
        v
    }

    /// Replace parameters from (path, tensor) pairs; every model parameter
    /// must be covered exactly once and shapes must match.
    pub fn load_param_map(&mut self, params: &[(String, Tensor<E>)]) -> Result<()> {
        use std::collections::HashMap;
        let mut by_path: HashMap<&str, &Tensor<E>> =
            params.iter().map(|(p, t)| (p.as_str(), t)).collect();
        let mut missing = Vec::new();
        let mut bad_shape = Vec::new();
        self.visit_params_mut(&mut |path, t| match by_path.remove(path) {
            Some(src) => {
                if src.shape() == t.shape() {
                    *t = src.clone();
                } else {
                    bad_shape.push(format!(
                        "{path}: {} vs {}",
                        src.shape(),
                        t.shape()
                    ));
                }
            }
            None => missing.push(path.to_string()),
        });
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "parameters missing from checkpoint: {}",
                missing.join(", ")
            )));
        }
        if !bad_shape.is_empty() {
            return Err(Error::Config(format!(
                "parameter shape mismatches: {}",
                bad_shape.join("; ")
            )));
        }
        if !by_path.is_empty() {
            let extra: Vec<&str> = by_path.keys().copied().collect();
            return Err(Error::Config(format!(
                "unknown parameters in checkpoint: {}",
                extra.join(", ")
            )));
        }
        Ok(())
    }

    pub fn cast<T: Element>(&self) -> Model<T> {
        fn conv_cast<E: Element, T: Element>(c: &Conv<E>) -> Conv<T> {
            Conv {
                path: c.path.clone(),
                weight: c.weight.cast(),
                bias: c.bias.cast(),
                stride: c.stride,
                padding: c.padding,
                groups: c.groups,
            }
        }
        fn ir_cast<E: Element, T: Element>(b: &InvertedResidual<E>) -> InvertedResidual<T> {
            InvertedResidual {
                expand: conv_cast(&b.expand),
                depthwise: conv_cast(&b.depthwise),
                project: conv_cast(&b.project),
                residual: b.residual,
            }
        }
        fn ira_cast<E: Element, T: Element>(b: &IraBlock<E>) -> IraBlock<T> {
            IraBlock {
                ir1: ir_cast(&b.ir1),
                ir2: ir_cast(&b.ir2),
                ca: ChannelAttention {
                    fc1: conv_cast(&b.ca.fc1),
                    fc2: conv_cast(&b.ca.fc2),
                },
                sa: SpatialAttention {
                    conv: conv_cast(&b.sa.conv),
                },
            }
        }
        Model {
            config: self.config.clone(),
            stem: conv_cast(&self.stem),
            enc1: ira_cast(&self.enc1),
            enc2: ira_cast(&self.enc2),
            enc3: ira_cast(&self.enc3),
            dec1: ira_cast(&self.dec1),
            dec2: ira_cast(&self.dec2),
            head: conv_cast(&self.head),
        }
    }
}

/// One convolution application and where it runs, for analytic cost counting.
#[derive(Debug, Clone)]
pub struct ConvUse {
    pub path: String,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub groups: usize,
    pub h_out: usize,
    pub w_out: usize,
    /// Number of times the layer runs per forward pass (the channel-attention
    /// MLP runs once per pooled statistic).
    pub applications: usize,
    pub params: usize,
}

impl ConvUse {
    pub fn macs(&self) -> u64 {
        self.applications as u64
            * self.h_out as u64
            * self.w_out as u64
            * self.c_out as u64
            * (self.c_in / self.groups) as u64
            * (self.k * self.k) as u64
    }
}

impl<E: Element> Model<E> {
    /// Every convolution application of one forward pass at the given input
    /// resolution (h, w must be multiples of 4).
    pub fn conv_uses(&self, h: usize, w: usize) -> Vec<ConvUse> {
        let mut uses = Vec::new();
        let conv_use = |c: &Conv<E>, h: usize, w: usize, applications: usize| {
            let ws = c.weight.shape();
            ConvUse {
                path: c.path.clone(),
                c_in: ws.c * c.groups,
                c_out: ws.n,
                k: ws.h,
                groups: c.groups,
                h_out: h,
                w_out: w,
                applications,
                params: c.weight.len() + c.bias.len(),
            }
        };
        let mut block = |b: &IraBlock<E>, h: usize, w: usize, uses: &mut Vec<ConvUse>| {
            uses.push(conv_use(&b.ir1.expand, h, w, 1));
            uses.push(conv_use(&b.ir1.depthwise, h, w, 1));
            uses.push(conv_use(&b.ir1.project, h, w, 1));
            uses.push(conv_use(&b.ir2.expand, h, w, 1));
            uses.push(conv_use(&b.ir2.depthwise, h, w, 1));
            uses.push(conv_use(&b.ir2.project, h, w, 1));
            uses.push(conv_use(&b.ca.fc1, 1, 1, 2));
            uses.push(conv_use(&b.ca.fc2, 1, 1, 2));
            uses.push(conv_use(&b.sa.conv, h, w, 1));
        };
        uses.push(conv_use(&self.stem, h, w, 1));
        block(&self.enc1, h, w, &mut uses);
        block(&self.enc2, h / 2, w / 2, &mut uses);
        block(&self.enc3, h / 4, w / 4, &mut uses);
        block(&self.dec1, h / 2, w / 2, &mut uses);
        block(&self.dec2, h, w, &mut uses);
        uses.push(conv_use(&self.head, h, w, 1));
        uses
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_catches_bad_shapes() {
        let mut cfg = LpienetConfig::default();
        cfg.channels = [16, 16, 64, 32, 16];
        assert!(cfg.validate().is_err());
        let mut cfg = LpienetConfig::default();
        cfg.kernel_size = 4;
        assert!(cfg.validate().is_err());
        let mut cfg = LpienetConfig::default();
        cfg.clip_epsilon = 0.0;
        assert!(cfg.validate().is_err());
        assert!(LpienetConfig::default().validate().is_ok());
        assert!(LpienetConfig::large().validate().is_ok());
        assert!(LpienetConfig::tiny().validate().is_ok());
    }

    #[test]
    fn config_kv_roundtrip() {
        for cfg in [LpienetConfig::default(), LpienetConfig::large()] {
            let kv = cfg.to_kv();
            let back = LpienetConfig::from_kv(kv).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let a = Model::<f32>::build(LpienetConfig::tiny(), 7).unwrap();
        let b = Model::<f32>::build(LpienetConfig::tiny(), 7).unwrap();
        let c = Model::<f32>::build(LpienetConfig::tiny(), 8).unwrap();
        assert_eq!(a.param_map(), b.param_map());
        assert_ne!(a.param_map(), c.param_map());
    }

    #[test]
    fn forward_preserves_shape_and_range() {
        let model = Model::<f32>::build(LpienetConfig::tiny(), 0).unwrap();
        let x = Tensor::<f32>::from_fn(Shape::new(1, 3, 16, 16), |_, c, y, xx| {
            ((c + y + xx) as f32 * 0.05) % 1.0
        });
        let y = model.forward(&x).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert!(y.iter().all(|&v| (0.0..=1.0 - 1e-5).contains(&v)));
    }

    #[test]
    fn forward_pads_and_crops_odd_sizes() {
        let model = Model::<f32>::build(LpienetConfig::tiny(), 0).unwrap();
        let x = Tensor::<f32>::full(Shape::new(1, 3, 10, 13), 0.5);
        let y = model.forward(&x).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 3, 10, 13));
    }

    #[test]
    fn forward_rejects_wrong_channels() {
        let model = Model::<f32>::build(LpienetConfig::tiny(), 0).unwrap();
        let x = Tensor::<f32>::zeros(Shape::new(1, 1, 16, 16));
        assert!(model.forward(&x).is_err());
    }

    #[test]
    fn zero_weights_with_residual_is_identity() {
        let mut model = Model::<f32>::build(LpienetConfig::tiny(), 0).unwrap();
        model.visit_params_mut(&mut |_, t| {
            for v in t.as_mut_slice() {
                *v = 0.0;
            }
        });
        let x = Tensor::<f32>::from_fn(Shape::new(1, 3, 8, 8), |_, c, y, xx| {
            0.1 + 0.01 * (c * 64 + y * 8 + xx) as f32 % 0.8
        });
        let y = model.forward(&x).unwrap();
        assert!(x.max_abs_diff(&y) < 1e-7);
        // The self-ensemble of an identity model is also the identity.
        let e = model.self_ensemble(&x).unwrap();
        assert!(x.max_abs_diff(&e) < 1e-6);
    }

    #[test]
    fn ensemble_stays_in_range() {
        let model = Model::<f32>::build(LpienetConfig::tiny(), 3).unwrap();
        let x = Tensor::<f32>::from_fn(Shape::new(1, 3, 12, 12), |_, c, y, xx| {
            ((c * 31 + y * 7 + xx) as f32 * 0.013) % 1.0
        });
        let y = model.self_ensemble(&x).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert!(y.iter().all(|&v| (0.0..=1.0 - 1e-5).contains(&v)));
    }

    #[test]
    fn param_roundtrip_through_map() {
        let model = Model::<f32>::build(LpienetConfig::tiny(), 5).unwrap();
        let params = model.param_map();
        let mut other = Model::<f32>::build(LpienetConfig::tiny(), 99).unwrap();
        other.load_param_map(&params).unwrap();
        assert_eq!(other.param_map(), params);

        // Dropping one tensor is rejected.
        let mut partial = params.clone();
        partial.pop();
        assert!(other.load_param_map(&partial).is_err());
    }

    #[test]
    fn doubling_channels_roughly_quadruples_params() {
        let base = Model::<f32>::build(LpienetConfig::default(), 0).unwrap();
        let large = Model::<f32>::build(LpienetConfig::large(), 0).unwrap();
        let ratio = large.param_count() as f64 / base.param_count() as f64;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }
}
