//! Synthetic degradation: blur by a point-spread function, heteroscedastic
//! Gaussian noise, dynamic-range clipping and tone mapping.
//!
//! The full pipeline is y = tone_map(clip(x * k + n)) with per-pixel noise
//! variance beta1 * signal + beta2. Disabling stages recovers the classic
//! special cases: pure denoising (y = x + n), pure deblurring (y = x * k) and
//! single-image HDR (clip + tone map only).

use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::tensor::{Element, Tensor};

/// Energy-preserving blur kernel with odd side length. Either one kernel
/// shared by all channels or one kernel per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    size: usize,
    kernels: Vec<Vec<f64>>,
    /// Maker spec (`dirac:3`, `gaussian:9:1.6`, `disk:9:2.5`) when the kernel
    /// came from a synthetic generator; used by config serialization.
    spec: Option<String>,
}

const PSF_SUM_TOL: f64 = 1e-9;

impl Psf {
    /// Single kernel shared across channels.
    pub fn shared(size: usize, kernel: Vec<f64>) -> Result<Self> {
        Self::validate(size, &kernel)?;
        Ok(Psf {
            size,
            kernels: vec![kernel],
            spec: None,
        })
    }

    /// One kernel per image channel.
    pub fn per_channel(size: usize, kernels: Vec<Vec<f64>>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::arg("psf", "need at least one kernel"));
        }
        for k in &kernels {
            Self::validate(size, k)?;
        }
        Ok(Psf {
            size,
            kernels,
            spec: None,
        })
    }

    pub fn spec(&self) -> Option<&str> {
        self.spec.as_deref()
    }

    /// Parse a maker spec string (`dirac:N`, `gaussian:N:SIGMA`, `disk:N:R`).
    pub fn from_spec(spec: &str) -> Result<Psf> {
        let parts: Vec<&str> = spec.split(':').collect();
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad psf size `{s}` in `{spec}`")))
        };
        let parse_f64 = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad psf parameter `{s}` in `{spec}`")))
        };
        match parts.as_slice() {
            ["dirac", n] => make_dirac_psf(parse_usize(n)?),
            ["gaussian", n, sigma] => make_gaussian_psf(parse_usize(n)?, parse_f64(sigma)?),
            ["disk", n, r] => make_disk_psf(parse_usize(n)?, parse_f64(r)?),
            _ => Err(Error::Config(format!(
                "unknown psf spec `{spec}` (expected dirac:N, gaussian:N:SIGMA or disk:N:R)"
            ))),
        }
    }

    fn validate(size: usize, kernel: &[f64]) -> Result<()> {
        if size % 2 == 0 {
            return Err(Error::arg("psf", format!("kernel side {size} must be odd")));
        }
        if kernel.len() != size * size {
            return Err(Error::arg(
                "psf",
                format!("kernel has {} entries, expected {}", kernel.len(), size * size),
            ));
        }
        if kernel.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::arg("psf", "kernel entries must be finite and nonnegative"));
        }
        let sum: f64 = kernel.iter().sum();
        if (sum - 1.0).abs() > PSF_SUM_TOL {
            return Err(Error::arg(
                "psf",
                format!("kernel mass {sum} is not 1 within {PSF_SUM_TOL}"),
            ));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_shared(&self) -> bool {
        self.kernels.len() == 1
    }

    pub fn kernel_for_channel(&self, c: usize) -> &[f64] {
        if self.kernels.len() == 1 {
            &self.kernels[0]
        } else {
            &self.kernels[c % self.kernels.len()]
        }
    }
}

/// Centered Dirac delta: identity under convolution.
pub fn make_dirac_psf(size: usize) -> Result<Psf> {
    if size % 2 == 0 {
        return Err(Error::arg("psf", format!("kernel side {size} must be odd")));
    }
    let mut k = vec![0.0; size * size];
    k[(size / 2) * size + size / 2] = 1.0;
    let mut psf = Psf::shared(size, k)?;
    psf.spec = Some(format!("dirac:{size}"));
    Ok(psf)
}

/// Normalized isotropic Gaussian.
pub fn make_gaussian_psf(size: usize, sigma: f64) -> Result<Psf> {
    if size % 2 == 0 {
        return Err(Error::arg("psf", format!("kernel side {size} must be odd")));
    }
    if sigma <= 0.0 {
        return Err(Error::arg("psf", format!("sigma {sigma} must be positive")));
    }
    let r = (size / 2) as f64;
    let mut k = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let dy = y as f64 - r;
            let dx = x as f64 - r;
            k.push((-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp());
        }
    }
    let mass: f64 = k.iter().sum();
    for v in &mut k {
        *v /= mass;
    }
    let mut psf = Psf::shared(size, k)?;
    psf.spec = Some(format!("gaussian:{size}:{sigma}"));
    Ok(psf)
}

/// Normalized binary disk of the given radius (in pixels).
pub fn make_disk_psf(size: usize, radius: f64) -> Result<Psf> {
    if size % 2 == 0 {
        return Err(Error::arg("psf", format!("kernel side {size} must be odd")));
    }
    if radius <= 0.0 {
        return Err(Error::arg("psf", format!("radius {radius} must be positive")));
    }
    let r = (size / 2) as f64;
    let mut k = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let dy = y as f64 - r;
            let dx = x as f64 - r;
            k.push(if (dy * dy + dx * dx).sqrt() <= radius {
                1.0
            } else {
                0.0
            });
        }
    }
    let mass: f64 = k.iter().sum();
    for v in &mut k {
        *v /= mass;
    }
    let mut psf = Psf::shared(size, k)?;
    psf.spec = Some(format!("disk:{size}:{radius}"));
    Ok(psf)
}

/// The degradation task presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Denoise,
    Deblur,
    Hdr,
    Udc,
}

impl Task {
    pub fn parse(s: &str) -> Result<Task> {
        match s {
            "denoise" => Ok(Task::Denoise),
            "deblur" => Ok(Task::Deblur),
            "hdr" => Ok(Task::Hdr),
            "udc" => Ok(Task::Udc),
            other => Err(Error::Config(format!(
                "unknown task `{other}` (expected denoise|deblur|hdr|udc)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Denoise => "denoise",
            Task::Deblur => "deblur",
            Task::Hdr => "hdr",
            Task::Udc => "udc",
        }
    }
}

/// Full description of one degradation pipeline instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationConfig {
    pub psf: Psf,
    /// Signal-proportional (shot) noise variance coefficient.
    pub beta1: f64,
    /// Signal-independent additive Gaussian noise variance.
    pub beta2: f64,
    /// Range threshold of the clipping stage; `None` disables clipping so the
    /// degenerate denoise/deblur pipelines stay exact.
    pub x_max: Option<f64>,
    pub tone_map: bool,
    /// When set, the input is first lifted to high dynamic range by inverse
    /// tone mapping and exposure scaling (for ordinary [0,1] inputs).
    pub hdr_exposure: Option<f64>,
    pub seed: u64,
}

impl DegradationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta1 < 0.0 || self.beta2 < 0.0 {
            return Err(Error::Config(format!(
                "noise coefficients must be nonnegative (beta1={}, beta2={})",
                self.beta1, self.beta2
            )));
        }
        if self.beta1 + self.beta2 >= 1.0 {
            return Err(Error::Config(format!(
                "beta1 + beta2 = {} leaves no usable signal range",
                self.beta1 + self.beta2
            )));
        }
        if let Some(xm) = self.x_max {
            if !(xm > 0.0) {
                return Err(Error::Config(format!("x_max {xm} must be positive")));
            }
        }
        if let Some(e) = self.hdr_exposure {
            if !(e > 0.0) {
                return Err(Error::Config(format!("hdr_exposure {e} must be positive")));
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Serialize as `key=value` entries under a key prefix ("" or "degrade.").
    pub fn to_kv(&self, prefix: &str) -> Result<crate::config::KvMap> {
        let spec = self.psf.spec().ok_or_else(|| {
            Error::Config("only synthetic PSFs (dirac/gaussian/disk) serialize to text".into())
        })?;
        let mut m = crate::config::KvMap::new();
        m.set(&format!("{prefix}psf"), spec);
        m.set(&format!("{prefix}beta1"), self.beta1);
        m.set(&format!("{prefix}beta2"), self.beta2);
        m.set(
            &format!("{prefix}x_max"),
            match self.x_max {
                Some(v) => v.to_string(),
                None => "none".to_string(),
            },
        );
        m.set(&format!("{prefix}tone_map"), self.tone_map);
        m.set(
            &format!("{prefix}hdr_exposure"),
            match self.hdr_exposure {
                Some(v) => v.to_string(),
                None => "none".to_string(),
            },
        );
        m.set(&format!("{prefix}seed"), self.seed);
        Ok(m)
    }

    /// Consume prefixed keys from a reader. `task` (if present) picks the
    /// preset baseline; other keys override it. Returns `None` when no
    /// prefixed key exists at all.
    pub fn from_reader(
        r: &mut crate::config::KvReader,
        prefix: &str,
    ) -> Result<Option<DegradationConfig>> {
        let key = |name: &str| format!("{prefix}{name}");
        let task = r.take(&key("task"));
        let psf = r.take(&key("psf"));
        let beta1 = r.take_parse::<f64>(&key("beta1"))?;
        let beta2 = r.take_parse::<f64>(&key("beta2"))?;
        let x_max = r.take(&key("x_max"));
        let tone = r.take_bool(&key("tone_map"))?;
        let hdr = r.take(&key("hdr_exposure"));
        let seed = r.take_parse::<u64>(&key("seed"))?;

        if task.is_none()
            && psf.is_none()
            && beta1.is_none()
            && beta2.is_none()
            && x_max.is_none()
            && tone.is_none()
            && hdr.is_none()
            && seed.is_none()
        {
            return Ok(None);
        }

        let mut cfg = match task {
            Some(t) => preset(Task::parse(&t)?),
            None => preset(Task::Udc),
        };
        if let Some(spec) = psf {
            cfg.psf = Psf::from_spec(&spec)?;
        }
        if let Some(v) = beta1 {
            cfg.beta1 = v;
        }
        if let Some(v) = beta2 {
            cfg.beta2 = v;
        }
        if let Some(v) = x_max {
            cfg.x_max = parse_optional_f64(&v, "x_max")?;
        }
        if let Some(v) = tone {
            cfg.tone_map = v;
        }
        if let Some(v) = hdr {
            cfg.hdr_exposure = parse_optional_f64(&v, "hdr_exposure")?;
        }
        if let Some(v) = seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(Some(cfg))
    }
}

fn parse_optional_f64(v: &str, what: &str) -> Result<Option<f64>> {
    if v == "none" {
        Ok(None)
    } else {
        v.parse::<f64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("cannot parse {what} value `{v}`")))
    }
}

/// Canonical configuration for each task.
pub fn preset(task: Task) -> DegradationConfig {
    match task {
        Task::Denoise => DegradationConfig {
            psf: make_dirac_psf(1).unwrap(),
            beta1: 0.0,
            beta2: (25.0 / 255.0) * (25.0 / 255.0),
            x_max: None,
            tone_map: false,
            hdr_exposure: None,
            seed: 0,
        },
        Task::Deblur => DegradationConfig {
            psf: make_gaussian_psf(9, 1.6).unwrap(),
            beta1: 0.0,
            beta2: 0.0,
            x_max: None,
            tone_map: false,
            hdr_exposure: None,
            seed: 0,
        },
        Task::Hdr => DegradationConfig {
            psf: make_dirac_psf(1).unwrap(),
            beta1: 0.0,
            beta2: 0.0,
            x_max: Some(1.0),
            tone_map: true,
            hdr_exposure: Some(4.0),
            seed: 0,
        },
        Task::Udc => DegradationConfig {
            psf: make_gaussian_psf(9, 2.0).unwrap(),
            beta1: 0.01,
            beta2: 4.0e-4,
            x_max: Some(1.0),
            tone_map: true,
            hdr_exposure: Some(4.0),
            seed: 0,
        },
    }
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * n - 2 - i;
    }
    i as usize
}

/// Per-channel 2-D convolution (true convolution, kernel flipped) with
/// reflect boundary padding. Output shape equals input shape.
pub fn psf_convolve<E: Element>(x: &Tensor<E>, psf: &Psf) -> Result<Tensor<E>> {
    let s = x.shape();
    let k = psf.size();
    let r = (k / 2) as isize;
    if k > 1 && (k / 2 >= s.h || k / 2 >= s.w) {
        return Err(Error::shape(
            "psf_convolve",
            format!("kernel {k} too large for {}x{} image", s.h, s.w),
        ));
    }
    let mut out = Tensor::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let kernel = psf.kernel_for_channel(c);
            let plane = x.plane(n, c);
            let out_plane = out.plane_mut(n, c);
            for y in 0..s.h {
                for xx in 0..s.w {
                    let mut acc = 0.0f64;
                    for ky in 0..k {
                        for kx in 0..k {
                            // True convolution: source offset is mirrored.
                            let sy = reflect(y as isize + r - ky as isize, s.h);
                            let sx = reflect(xx as isize + r - kx as isize, s.w);
                            acc += kernel[ky * k + kx] * plane[sy * s.w + sx].to_f64();
                        }
                    }
                    out_plane[y * s.w + xx] = E::from_f64(acc);
                }
            }
        }
    }
    Ok(out)
}

/// Additive Gaussian noise with per-pixel variance beta1 * x + beta2.
/// Noise values are drawn in row-major (n, c, h, w) order.
pub fn add_noise<E: Element>(
    x: &Tensor<E>,
    beta1: f64,
    beta2: f64,
    rng: &mut Prng,
) -> Result<Tensor<E>> {
    if beta1 == 0.0 && beta2 == 0.0 {
        return Ok(x.clone());
    }
    let mut out = x.clone();
    for v in out.as_mut_slice() {
        let var = beta1 * v.to_f64() + beta2;
        if var < 0.0 {
            return Err(Error::arg(
                "add_noise",
                format!("negative variance {var} (signal {} with beta1 {beta1})", *v),
            ));
        }
        *v = E::from_f64(v.to_f64() + rng.normal() * var.sqrt());
    }
    Ok(out)
}

/// Clamp into [0, x_max]. The upper limit models sensor saturation; the lower
/// clamp removes unphysical negatives introduced by noise.
pub fn clip_range<E: Element>(x: &Tensor<E>, x_max: f64) -> Result<Tensor<E>> {
    if !(x_max > 0.0) {
        return Err(Error::arg("clip_range", format!("x_max {x_max} must be positive")));
    }
    Ok(x.map(|v| v.max_e(E::ZERO).min_e(E::from_f64(x_max))))
}

/// Range-compressing tone map f(x) = x / (x + 0.25), mapping [0, inf) to [0, 1).
pub fn tone_map<E: Element>(x: &Tensor<E>) -> Result<Tensor<E>> {
    if x.iter().any(|v| v.to_f64() < 0.0) {
        return Err(Error::arg("tone_map", "inputs must be nonnegative"));
    }
    Ok(x.map(|v| {
        let f = v.to_f64();
        E::from_f64(f / (f + 0.25))
    }))
}

/// Inverse of [`tone_map`]: g(y) = 0.25 y / (1 - y), for y in [0, 1).
pub fn inverse_tone_map<E: Element>(y: &Tensor<E>) -> Result<Tensor<E>> {
    if y.iter().any(|v| {
        let f = v.to_f64();
        !(0.0..1.0).contains(&f)
    }) {
        return Err(Error::arg("inverse_tone_map", "inputs must lie in [0, 1)"));
    }
    Ok(y.map(|v| {
        let f = v.to_f64();
        E::from_f64(0.25 * f / (1.0 - f))
    }))
}

/// Run the full degradation pipeline. Deterministic for a given `cfg.seed`.
pub fn apply<E: Element>(x: &Tensor<E>, cfg: &DegradationConfig) -> Result<Tensor<E>> {
    cfg.validate()?;
    let expanded;
    let stage0 = if let Some(exposure) = cfg.hdr_exposure {
        // Lift to HDR: inverse tone map (guarding the pole at 1), then scale.
        let safe = x.map(|v| v.max_e(E::ZERO).min_e(E::from_f64(1.0 - 1e-6)));
        let lifted = inverse_tone_map(&safe)?;
        expanded = lifted.map(|v| v * E::from_f64(exposure));
        &expanded
    } else {
        x
    };
    let blurred = psf_convolve(stage0, &cfg.psf)?;
    let noisy = if cfg.beta1 > 0.0 || cfg.beta2 > 0.0 {
        let mut rng = Prng::seed(cfg.seed);
        add_noise(&blurred, cfg.beta1, cfg.beta2, &mut rng)?
    } else {
        blurred
    };
    let clipped = match cfg.x_max {
        Some(xm) => clip_range(&noisy, xm)?,
        None => noisy,
    };
    if cfg.tone_map {
        tone_map(&clipped)
    } else {
        Ok(clipped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn rand_img(shape: Shape, seed: u64) -> Tensor<f64> {
        let mut rng = Prng::seed(seed);
        let mut t = Tensor::zeros(shape);
        for v in t.as_mut_slice() {
            *v = rng.uniform();
        }
        t
    }

    #[test]
    fn dirac_kernels_are_identity() {
        let x = rand_img(Shape::new(1, 3, 7, 9), 1);
        for size in [1, 3, 5] {
            let psf = make_dirac_psf(size).unwrap();
            assert_eq!(psf_convolve(&x, &psf).unwrap(), x, "size {size}");
        }
    }

    #[test]
    fn kernels_are_normalized_and_centered() {
        for psf in [
            make_dirac_psf(3).unwrap(),
            make_gaussian_psf(9, 1.6).unwrap(),
            make_disk_psf(9, 2.5).unwrap(),
        ] {
            let sum: f64 = psf.kernel_for_channel(0).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            // Symmetry about the center.
            let k = psf.size();
            let kern = psf.kernel_for_channel(0);
            for y in 0..k {
                for x in 0..k {
                    let m = kern[(k - 1 - y) * k + (k - 1 - x)];
                    assert!((kern[y * k + x] - m).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn wide_gaussian_tends_to_uniform() {
        let psf = make_gaussian_psf(3, 100.0).unwrap();
        for v in psf.kernel_for_channel(0) {
            assert!((v - 1.0 / 9.0).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_image_unchanged_by_normalized_kernel() {
        let x = Tensor::<f64>::full(Shape::new(1, 1, 12, 12), 0.37);
        let psf = make_gaussian_psf(5, 1.2).unwrap();
        let y = psf_convolve(&x, &psf).unwrap();
        for v in y.iter() {
            assert!((v - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn convolve_preserves_global_mean() {
        let x = rand_img(Shape::new(1, 1, 24, 24), 2);
        let psf = make_gaussian_psf(7, 1.5).unwrap();
        let y = psf_convolve(&x, &psf).unwrap();
        let mean = |t: &Tensor<f64>| t.iter().sum::<f64>() / t.len() as f64;
        assert!((mean(&x) - mean(&y)).abs() < 1e-6);
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(make_dirac_psf(4).is_err());
        assert!(Psf::shared(2, vec![0.25; 4]).is_err());
    }

    #[test]
    fn noise_zero_betas_is_exact_identity() {
        let x = rand_img(Shape::new(1, 1, 8, 8), 3);
        let mut rng = Prng::seed(0);
        let y = add_noise(&x, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn noise_rejects_negative_variance() {
        let x = Tensor::<f64>::full(Shape::new(1, 1, 2, 2), -1.0);
        let mut rng = Prng::seed(0);
        assert!(add_noise(&x, 0.1, 0.0, &mut rng).is_err());
    }

    #[test]
    fn noise_is_reproducible_per_seed() {
        let x = rand_img(Shape::new(1, 3, 16, 16), 4);
        let cfg = preset(Task::Denoise).with_seed(77);
        let a = apply(&x, &cfg).unwrap();
        let b = apply(&x, &cfg).unwrap();
        assert_eq!(a, b);
        let c = apply(&x, &cfg.clone().with_seed(78)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn tone_map_fixed_points_and_inverse() {
        let x = Tensor::<f64>::from_vec(Shape::new(1, 1, 1, 3), vec![0.0, 0.25, 1.0]).unwrap();
        let y = tone_map(&x).unwrap();
        assert_eq!(y.as_slice()[0], 0.0);
        assert!((y.as_slice()[1] - 0.5).abs() < 1e-15);
        assert!((y.as_slice()[2] - 0.8).abs() < 1e-15);
        for v in [0.01, 0.5, 1.0, 4.0, 10.0] {
            let t = Tensor::<f64>::scalar(v);
            let rt = inverse_tone_map(&tone_map(&t).unwrap()).unwrap();
            assert!((rt.scalar_value() - v).abs() < 1e-6, "x = {v}");
        }
    }

    #[test]
    fn tone_map_is_monotonic() {
        let mut prev = -1.0;
        for i in 0..100 {
            let x = i as f64 * 0.1;
            let y = tone_map(&Tensor::<f64>::scalar(x)).unwrap().scalar_value();
            assert!(y > prev);
            prev = y;
        }
    }

    #[test]
    fn inverse_tone_map_rejects_out_of_domain() {
        assert!(inverse_tone_map(&Tensor::<f64>::scalar(1.0)).is_err());
        assert!(inverse_tone_map(&Tensor::<f64>::scalar(-0.1)).is_err());
    }

    #[test]
    fn clip_range_basics_and_idempotence() {
        let x = Tensor::<f64>::from_vec(Shape::new(1, 1, 1, 3), vec![1.7, -0.1, 0.4]).unwrap();
        let y = clip_range(&x, 1.0).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 0.0, 0.4]);
        assert_eq!(clip_range(&y, 1.0).unwrap(), y);
    }

    #[test]
    fn hdr_pipeline_hand_value() {
        // With the input already in HDR (no exposure lift): clip(2) = 1, then
        // f(1) = 1/1.25 = 0.8.
        let cfg = DegradationConfig {
            psf: make_dirac_psf(1).unwrap(),
            beta1: 0.0,
            beta2: 0.0,
            x_max: Some(1.0),
            tone_map: true,
            hdr_exposure: None,
            seed: 0,
        };
        let x = Tensor::<f64>::full(Shape::new(1, 1, 2, 2), 2.0);
        let y = apply(&x, &cfg).unwrap();
        for v in y.iter() {
            assert!((v - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_pipeline_is_identity() {
        let x = rand_img(Shape::new(1, 3, 10, 10), 5);
        let cfg = DegradationConfig {
            psf: make_dirac_psf(3).unwrap(),
            beta1: 0.0,
            beta2: 0.0,
            x_max: None,
            tone_map: false,
            hdr_exposure: None,
            seed: 0,
        };
        let y = apply(&x, &cfg).unwrap();
        assert!(x.max_abs_diff(&y) < 1e-7);
    }

    #[test]
    fn config_kv_roundtrip_and_psf_specs() {
        for task in [Task::Denoise, Task::Deblur, Task::Hdr, Task::Udc] {
            let cfg = preset(task).with_seed(1234);
            let kv = cfg.to_kv("").unwrap();
            let mut r = kv.reader();
            let back = DegradationConfig::from_reader(&mut r, "").unwrap().unwrap();
            r.finish().unwrap();
            assert_eq!(cfg, back, "task {task:?}");
        }
        assert!(Psf::from_spec("boxcar:3").is_err());
    }

    #[test]
    fn config_invariants_enforced() {
        let mut cfg = preset(Task::Udc);
        cfg.beta1 = 0.9;
        cfg.beta2 = 0.2;
        assert!(cfg.validate().is_err());
        let mut cfg2 = preset(Task::Hdr);
        cfg2.x_max = Some(0.0);
        assert!(cfg2.validate().is_err());
    }
}
