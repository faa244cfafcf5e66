//! Interpretable convolutional network (ICN) surrogate.
//!
//! The network has one hidden layer made of `N_l` parallel same-size
//! convolutions per channel. The feature maps of a channel are multiplied
//! elementwise (the product module) and the `N_c` products are mixed by a
//! 1×1 convolution:
//!
//! ```text
//! F(X) = Σ_c f_c · Π_l conv(X, K[c][l])
//! ```
//!
//! There are no activations and no biases. Samples are packed into square
//! "images" whose channels are the problem dimensions, one sample per pixel,
//! so a `3×3` kernel lets a prediction see its spatial neighbours.
//!
//! Optional [`ProductTerm`]s add frozen-kernel products with a single learnable
//! coefficient each; they are how analytic prior knowledge enters the model
//! (see [`crate::knowledge`]).

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{check_points, Dataset};
use crate::error::{contract, Error, Result};
use crate::rng::{seeded, Rng};
use crate::tensor::{
    axpy, conv2d_same, conv_same_accumulate, conv_same_kernel_grad_accumulate, hadamard,
    weighted_channel_sum, Grid3, Kernel3,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcnConfig {
    /// Parallel convolution layers multiplied per channel.
    pub n_layers: usize,
    /// Channels; `None` means eight per input dimension.
    pub channels: Option<usize>,
    /// Odd kernel side length.
    pub kernel_side: usize,
    /// Side of the square images samples are packed into.
    pub image_side: usize,
    pub learn_rate: f64,
    pub iterations: usize,
    /// Cap on the global gradient norm.
    pub grad_clip: f64,
    /// Exclude zero-padded pixels from the loss.
    pub mask_padding: bool,
    /// Train on scaled targets and unscale predictions.
    pub target_standardize: bool,
    pub seed: u64,
}

impl Default for IcnConfig {
    fn default() -> Self {
        Self {
            n_layers: 3,
            channels: None,
            kernel_side: 3,
            image_side: 10,
            learn_rate: 1e-3,
            iterations: 200,
            grad_clip: 10.0,
            mask_padding: true,
            target_standardize: true,
            seed: 0,
        }
    }
}

impl IcnConfig {
    pub fn channels_for(&self, dim: usize) -> usize {
        self.channels.unwrap_or(8 * dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(contract!("n_layers must be at least 1"));
        }
        if self.channels == Some(0) {
            return Err(contract!("channels must be at least 1"));
        }
        if self.kernel_side.is_multiple_of(2) {
            return Err(contract!("kernel_side must be odd, got {}", self.kernel_side));
        }
        if self.image_side == 0 {
            return Err(contract!("image_side must be positive"));
        }
        if !(self.learn_rate > 0.0 && self.learn_rate.is_finite()) {
            return Err(contract!("learn_rate must be positive"));
        }
        if self.grad_clip.is_nan() || self.grad_clip <= 0.0 {
            return Err(contract!("grad_clip must be positive"));
        }
        Ok(())
    }
}

/// Samples packed row-major into square multi-channel images.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBatch {
    pub side: usize,
    pub images: Vec<Grid3>,
    /// `mask[img][pixel]` is true where the pixel holds a real sample.
    pub mask: Vec<Vec<bool>>,
    /// Original sample index held by each pixel.
    pub order: Vec<Vec<Option<usize>>>,
}

impl ImageBatch {
    pub fn pixels_per_image(&self) -> usize {
        self.side * self.side
    }

    pub fn n_samples(&self) -> usize {
        self.mask.iter().flatten().filter(|&&m| m).count()
    }

    pub fn channels(&self) -> usize {
        self.images[0].channels()
    }

    /// Lays per-sample values out like the pixels, with 0 at padding.
    pub fn pack_values(&self, values: &[f64]) -> Result<Vec<Vec<f64>>> {
        if values.len() != self.n_samples() {
            return Err(contract!("{} values for {} packed samples", values.len(), self.n_samples()));
        }
        Ok(self
            .order
            .iter()
            .map(|img| img.iter().map(|o| o.map_or(0.0, |i| values[i])).collect())
            .collect())
    }

    /// Inverse of [`pack_values`](Self::pack_values): real pixels in sample order.
    pub fn unpack(&self, pixels: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_samples()];
        for (img, vals) in self.order.iter().zip(pixels) {
            for (o, v) in img.iter().zip(vals) {
                if let Some(i) = o {
                    out[*i] = *v;
                }
            }
        }
        out
    }
}

/// Packs samples into `⌈N / side²⌉` images. Sample `i` lands in image
/// `i / side²` at row-major pixel `i % side²`; its coordinates become the
/// pixel's channels. Remaining pixels of the last image are zero.
pub fn pack_samples(samples: &[Vec<f64>], side: usize) -> Result<ImageBatch> {
    let d = samples.first().ok_or_else(|| contract!("cannot pack zero samples"))?.len();
    if d == 0 || samples.iter().any(|s| s.len() != d) {
        return Err(contract!("samples must share a positive dimension"));
    }
    if side == 0 {
        return Err(contract!("image side must be positive"));
    }
    let per = side * side;
    let n_images = samples.len().div_ceil(per);
    let mut images = Vec::with_capacity(n_images);
    let mut mask = Vec::with_capacity(n_images);
    let mut order = Vec::with_capacity(n_images);
    for img in 0..n_images {
        let mut grid = Grid3::zeros(d, side, side);
        let mut m = vec![false; per];
        let mut o = vec![None; per];
        for p in 0..per {
            let i = img * per + p;
            let Some(sample) = samples.get(i) else { break };
            for (ch, &v) in sample.iter().enumerate() {
                grid.data_mut()[ch * per + p] = v;
            }
            m[p] = true;
            o[p] = Some(i);
        }
        images.push(grid);
        mask.push(m);
        order.push(o);
    }
    Ok(ImageBatch { side, images, mask, order })
}

/// Learnable kernels `K[c][l]` and output coefficients `f_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcnParams {
    pub kernels: Vec<Vec<Kernel3>>,
    pub coeffs: Vec<f64>,
}

impl IcnParams {
    pub fn new(kernels: Vec<Vec<Kernel3>>, coeffs: Vec<f64>) -> Result<Self> {
        let p = Self { kernels, coeffs };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if self.kernels.is_empty() || self.kernels.len() != self.coeffs.len() {
            return Err(contract!(
                "{} kernel channels but {} coefficients",
                self.kernels.len(),
                self.coeffs.len()
            ));
        }
        let first = self.kernels[0].first().ok_or_else(|| contract!("channel with no layers"))?;
        let shape = (first.depth(), first.kh(), first.kw());
        let layers = self.kernels[0].len();
        for ch in &self.kernels {
            if ch.len() != layers {
                return Err(contract!("channels have differing layer counts"));
            }
            if ch.iter().any(|k| (k.depth(), k.kh(), k.kw()) != shape) {
                return Err(contract!("kernels have differing shapes"));
            }
        }
        Ok(())
    }

    /// Uniform initialization: kernels in `±(d·L²)^{-1/2}`, coefficients in
    /// `±N_c^{-1/2}`.
    pub fn init(dim: usize, cfg: &IcnConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let channels = cfg.channels_for(dim);
        let side = cfg.kernel_side;
        let kb = 1.0 / ((dim * side * side) as f64).sqrt();
        let mut kernels = Vec::with_capacity(channels);
        for _ in 0..channels {
            let mut layers = Vec::with_capacity(cfg.n_layers);
            for _ in 0..cfg.n_layers {
                let w = (0..dim * side * side).map(|_| rng.random_range(-kb..kb)).collect();
                layers.push(Kernel3::new(dim, side, side, w)?);
            }
            kernels.push(layers);
        }
        let cb = 1.0 / (channels as f64).sqrt();
        let coeffs = (0..channels).map(|_| rng.random_range(-cb..cb)).collect();
        Self::new(kernels, coeffs)
    }

    pub fn channels(&self) -> usize {
        self.coeffs.len()
    }

    pub fn n_layers(&self) -> usize {
        self.kernels[0].len()
    }

    pub fn depth(&self) -> usize {
        self.kernels[0][0].depth()
    }

    pub fn zeros_like(&self) -> Self {
        let kernels = self
            .kernels
            .iter()
            .map(|ch| {
                ch.iter()
                    .map(|k| Kernel3::zeros(k.depth(), k.kh(), k.kw()).expect("valid shape"))
                    .collect()
            })
            .collect();
        Self { kernels, coeffs: vec![0.0; self.coeffs.len()] }
    }

    /// All scalars, kernels first (channel, layer, weight order) then coefficients.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.kernels.iter().flatten().flat_map(|k| k.weights()).chain(&self.coeffs)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.kernels
            .iter_mut()
            .flatten()
            .flat_map(|k| k.weights_mut().iter_mut())
            .chain(self.coeffs.iter_mut())
    }

    pub fn n_values(&self) -> usize {
        self.values().count()
    }
}

/// A product of frozen convolutions scaled by one learnable coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductTerm {
    pub kernels: Vec<Kernel3>,
    pub coeff: f64,
}

impl ProductTerm {
    pub fn new(kernels: Vec<Kernel3>, coeff: f64) -> Result<Self> {
        if kernels.is_empty() {
            return Err(contract!("product term needs at least one kernel"));
        }
        Ok(Self { kernels, coeff })
    }

    /// `Π_l conv(image, kernels[l])` at unit coefficient.
    pub fn output(&self, image: &Grid3) -> Result<Grid3> {
        let mut acc = conv2d_same(image, &self.kernels[0])?;
        for k in &self.kernels[1..] {
            acc = hadamard(&acc, &conv2d_same(image, k)?)?;
        }
        Ok(acc)
    }
}

/// Affine map between raw targets and the scale the network trains on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: f64,
    pub std: f64,
}

impl TargetScaler {
    pub const IDENTITY: TargetScaler = TargetScaler { mean: 0.0, std: 1.0 };

    /// Divides by the root mean square of `values` without centering, so a
    /// zero network output still means a zero target. All-zero targets keep
    /// the identity.
    pub fn fit(values: &[f64], standardize: bool) -> Self {
        if !standardize || values.is_empty() {
            return Self::IDENTITY;
        }
        let rms = (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt();
        if rms > 0.0 && rms.is_finite() {
            Self { mean: 0.0, std: rms }
        } else {
            Self::IDENTITY
        }
    }

    pub fn scale(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn unscale(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

fn check_depth(params: &IcnParams, terms: &[ProductTerm], batch: &ImageBatch) -> Result<()> {
    let chans = batch.channels();
    if params.depth() != chans {
        return Err(contract!(
            "kernel depth {} does not match batch channels {chans}",
            params.depth()
        ));
    }
    if terms.iter().flat_map(|t| &t.kernels).any(|k| k.depth() != chans) {
        return Err(contract!("knowledge kernel depth does not match batch channels {chans}"));
    }
    Ok(())
}

/// Base network output per pixel, built from the tensor primitives.
pub fn forward(params: &IcnParams, batch: &ImageBatch) -> Result<Vec<Vec<f64>>> {
    forward_with_terms(params, &[], batch)
}

/// Base output plus `Σ_t coeff_t · term_t` per pixel.
pub fn forward_with_terms(
    params: &IcnParams,
    terms: &[ProductTerm],
    batch: &ImageBatch,
) -> Result<Vec<Vec<f64>>> {
    check_depth(params, terms, batch)?;
    batch
        .images
        .iter()
        .map(|image| {
            let mut maps = Vec::with_capacity(params.channels() + terms.len());
            let mut coeffs = Vec::with_capacity(params.channels() + terms.len());
            for (layers, &f) in params.kernels.iter().zip(&params.coeffs) {
                let mut acc = conv2d_same(image, &layers[0])?;
                for k in &layers[1..] {
                    acc = hadamard(&acc, &conv2d_same(image, k)?)?;
                }
                maps.push(acc);
                coeffs.push(f);
            }
            for t in terms {
                maps.push(t.output(image)?);
                coeffs.push(t.coeff);
            }
            Ok(weighted_channel_sum(&maps, &coeffs)?.into_data())
        })
        .collect()
}

/// Mean squared error over real pixels (or every pixel when
/// `mask_padding` is false).
pub fn loss_masked_mse(
    pred: &[Vec<f64>],
    targets: &[Vec<f64>],
    mask: &[Vec<bool>],
    mask_padding: bool,
) -> Result<f64> {
    if pred.len() != targets.len() || pred.len() != mask.len() {
        return Err(contract!("prediction, target and mask image counts differ"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((p, t), m) in pred.iter().zip(targets).zip(mask) {
        if p.len() != t.len() || p.len() != m.len() {
            return Err(contract!("prediction, target and mask pixel counts differ"));
        }
        for ((a, b), &real) in p.iter().zip(t).zip(m) {
            if real || !mask_padding {
                sum += (a - b) * (a - b);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(contract!("no pixels contribute to the loss"));
    }
    Ok(sum / count as f64)
}

/// Loss and its gradient with respect to every learnable scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub params: IcnParams,
    pub term_coeffs: Vec<f64>,
}

impl Gradients {
    fn norm(&self) -> f64 {
        self.params
            .values()
            .chain(&self.term_coeffs)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, s: f64) {
        self.params.values_mut().chain(self.term_coeffs.iter_mut()).for_each(|g| *g *= s);
    }
}

/// Analytic gradient of [`loss_masked_mse`] through the forward pass.
///
/// With `g = ∂loss/∂pred` per pixel and `Y[c][l] = conv(X, K[c][l])`:
/// `∂/∂f_c = Σ g·Π_l Y[c][l]`, and `∂/∂K[c][l]` is the correlation of `X` with
/// `g · f_c · Π_{l'≠l} Y[c][l']`. Term kernels are frozen; only their
/// coefficients get gradients.
pub fn gradients(
    params: &IcnParams,
    terms: &[ProductTerm],
    batch: &ImageBatch,
    targets: &[Vec<f64>],
    mask_padding: bool,
) -> Result<Gradients> {
    check_depth(params, terms, batch)?;
    if targets.len() != batch.images.len() {
        return Err(contract!("target image count does not match batch"));
    }
    let side = batch.side;
    let per = side * side;
    let chans = batch.channels();
    let n_layers = params.n_layers();
    let counted: usize = batch
        .mask
        .iter()
        .flatten()
        .filter(|&&m| m || !mask_padding)
        .count();
    if counted == 0 {
        return Err(contract!("no pixels contribute to the loss"));
    }

    let mut grads = Gradients {
        loss: 0.0,
        params: params.zeros_like(),
        term_coeffs: vec![0.0; terms.len()],
    };
    // feature maps for one channel: n_layers × per
    let mut feats = vec![0.0; n_layers * per];
    let mut products = vec![vec![0.0; per]; params.channels()];
    let mut term_maps = vec![vec![0.0; per]; terms.len()];
    let mut pred = vec![0.0; per];
    let mut g = vec![0.0; per];
    let mut upstream = vec![0.0; per];

    for ((image, mask), tgt) in batch.images.iter().zip(&batch.mask).zip(targets) {
        if tgt.len() != per {
            return Err(contract!("target pixel count does not match image"));
        }
        let x = image.data();
        pred.iter_mut().for_each(|v| *v = 0.0);
        for (c, layers) in params.kernels.iter().enumerate() {
            compute_product(x, chans, side, layers, &mut feats, &mut products[c]);
            axpy(params.coeffs[c], &products[c], &mut pred);
        }
        for (t, term) in terms.iter().enumerate() {
            compute_product(x, chans, side, &term.kernels, &mut feats, &mut term_maps[t]);
            axpy(term.coeff, &term_maps[t], &mut pred);
        }

        for p in 0..per {
            let r = pred[p] - tgt[p];
            if mask[p] || !mask_padding {
                grads.loss += r * r;
                g[p] = 2.0 * r / counted as f64;
            } else {
                g[p] = 0.0;
            }
        }

        for (t, map) in term_maps.iter().enumerate() {
            grads.term_coeffs[t] += dot(&g, map);
        }
        for (c, layers) in params.kernels.iter().enumerate() {
            grads.params.coeffs[c] += dot(&g, &products[c]);
            let f = params.coeffs[c];
            if f == 0.0 {
                continue;
            }
            // recompute this channel's maps
            feats.iter_mut().for_each(|v| *v = 0.0);
            for (l, k) in layers.iter().enumerate() {
                conv_same_accumulate(
                    x,
                    chans,
                    side,
                    side,
                    k.weights(),
                    k.kh(),
                    k.kw(),
                    &mut feats[l * per..(l + 1) * per],
                );
            }
            for (l, k) in layers.iter().enumerate() {
                for p in 0..per {
                    let mut others = g[p] * f;
                    for l2 in 0..n_layers {
                        if l2 != l {
                            others *= feats[l2 * per + p];
                        }
                    }
                    upstream[p] = others;
                }
                conv_same_kernel_grad_accumulate(
                    x,
                    chans,
                    side,
                    side,
                    &upstream,
                    k.kh(),
                    k.kw(),
                    grads.params.kernels[c][l].weights_mut(),
                );
            }
        }
    }
    grads.loss /= counted as f64;
    Ok(grads)
}

fn compute_product(
    x: &[f64],
    chans: usize,
    side: usize,
    kernels: &[Kernel3],
    scratch: &mut [f64],
    out: &mut [f64],
) {
    let per = side * side;
    let buf = &mut scratch[..per];
    for (l, k) in kernels.iter().enumerate() {
        buf.iter_mut().for_each(|v| *v = 0.0);
        conv_same_accumulate(x, chans, side, side, k.weights(), k.kh(), k.kw(), buf);
        if l == 0 {
            out.copy_from_slice(buf);
        } else {
            out.iter_mut().zip(buf.iter()).for_each(|(o, b)| *o *= b);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A trained (or hand-built) ICN with optional knowledge terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcnModel {
    pub config: IcnConfig,
    pub dim: usize,
    pub params: IcnParams,
    #[serde(default)]
    pub terms: Vec<ProductTerm>,
    pub scaler: TargetScaler,
}

impl IcnModel {
    pub fn from_parts(
        config: IcnConfig,
        params: IcnParams,
        terms: Vec<ProductTerm>,
        scaler: TargetScaler,
    ) -> Result<Self> {
        config.validate()?;
        params.check()?;
        let dim = params.depth();
        if terms.iter().flat_map(|t| &t.kernels).any(|k| k.depth() != dim) {
            return Err(contract!("knowledge kernels must have depth {dim}"));
        }
        Ok(Self { config, dim, params, terms, scaler })
    }

    /// Per-pixel outputs on the training scale (before unscaling).
    pub fn forward_scaled(&self, batch: &ImageBatch) -> Result<Vec<Vec<f64>>> {
        forward_with_terms(&self.params, &self.terms, batch)
    }

    /// Packs `points` standalone, runs the network, unscales, and returns one
    /// prediction per point in input order.
    pub fn predict(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_points(points, self.dim)?;
        let batch = pack_samples(points, self.config.image_side)?;
        let out = self.forward_scaled(&batch)?;
        Ok(batch.unpack(&out).into_iter().map(|v| self.scaler.unscale(v)).collect())
    }

    /// Root mean squared error in raw target units. Padding pixels count
    /// (with target 0) only when the model was configured without masking.
    pub fn rmse(&self, data: &Dataset) -> Result<f64> {
        check_points(data.points(), self.dim)?;
        let batch = pack_samples(data.points(), self.config.image_side)?;
        let targets = batch.pack_values(data.values())?;
        let pred: Vec<Vec<f64>> = self
            .forward_scaled(&batch)?
            .into_iter()
            .map(|img| img.into_iter().map(|v| self.scaler.unscale(v)).collect())
            .collect();
        Ok(loss_masked_mse(&pred, &targets, &batch.mask, self.config.mask_padding)?.sqrt())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument { format: MODEL_FORMAT.into(), layout: KERNEL_LAYOUT.into(), model: self.clone() };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::Config(format!("unsupported model format {:?}", doc.format)));
        }
        let m = doc.model;
        Self::from_parts(m.config, m.params, m.terms, m.scaler)
    }
}

const MODEL_FORMAT: &str = "icn-model/1";
const KERNEL_LAYOUT: &str = "weights flat, index (channel * kh + row) * kw + col";

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    layout: String,
    model: IcnModel,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: IcnModel,
    /// RMSE in raw target units before each update.
    pub loss_curve: Vec<f64>,
}

/// Trains a plain ICN on `data`.
pub fn train(data: &Dataset, cfg: &IcnConfig) -> Result<TrainOutcome> {
    train_with_terms(data, cfg, Vec::new(), |_, _| {})
}

/// Full-batch Adam with global-norm clipping over base parameters and term
/// coefficients. Term coefficients are read in raw target units and stored
/// on the training scale. `monitor(iteration, model)` sees the parameters whose loss
/// is recorded at that iteration, before they are updated.
pub fn train_with_terms(
    data: &Dataset,
    cfg: &IcnConfig,
    mut terms: Vec<ProductTerm>,
    mut monitor: impl FnMut(usize, &IcnModel),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let dim = data.dim();
    check_points(data.points(), dim)?;
    let mut rng = seeded(cfg.seed);
    let params = IcnParams::init(dim, cfg, &mut rng)?;
    let mut config = cfg.clone();
    config.channels = Some(params.channels());
    let scaler = TargetScaler::fit(data.values(), cfg.target_standardize);
    // term coefficients arrive in target units; fitted scalers never shift
    for t in &mut terms {
        t.coeff /= scaler.std;
    }
    let mut model = IcnModel::from_parts(config, params, terms, scaler)?;

    let batch = pack_samples(data.points(), cfg.image_side)?;
    let targets: Vec<Vec<f64>> = batch
        .pack_values(data.values())?
        .into_iter()
        .map(|img| img.into_iter().map(|v| scaler.scale(v)).collect())
        .collect();

    let n = model.params.n_values() + model.terms.len();
    let mut adam = Adam::new(n, cfg.learn_rate);
    let mut curve = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let mut grads = gradients(&model.params, &model.terms, &batch, &targets, cfg.mask_padding)?;
        if !grads.loss.is_finite() {
            return Err(Error::Diverged { iteration: it, loss: grads.loss });
        }
        curve.push(grads.loss.sqrt() * scaler.std);
        monitor(it, &model);
        let norm = grads.norm();
        if !norm.is_finite() {
            return Err(Error::Diverged { iteration: it, loss: grads.loss });
        }
        if norm > cfg.grad_clip {
            grads.scale(cfg.grad_clip / norm);
        }
        let g = grads.params.values().chain(&grads.term_coeffs);
        let p = model.params.values_mut().chain(model.terms.iter_mut().map(|t| &mut t.coeff));
        adam.step(p, g);
    }
    Ok(TrainOutcome { model, loss_curve: curve })
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self { lr, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step<'a>(
        &mut self,
        params: impl Iterator<Item = &'a mut f64>,
        grads: impl Iterator<Item = &'a f64>,
    ) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}
