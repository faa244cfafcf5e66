//! Dense channel-major grids and the handful of operations the ICN needs:
//! same-size zero-padded convolution, elementwise product, and a weighted
//! sum over single-channel maps (the 1×1 output convolution).
//!
//! Layout is fixed as `(channel, row, col)` with `col` varying fastest, i.e.
//! the flat index of `(ch, r, c)` is `(ch * height + r) * width + c`. Kernel
//! weights use the same order: `(ch * kh + dr) * kw + dc`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// A `channels × height × width` block of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Grid3 {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(contract!(
                "grid dimensions must be positive, got {channels}x{height}x{width}"
            ));
        }
        if data.len() != channels * height * width {
            return Err(contract!(
                "grid data length {} does not match {channels}x{height}x{width}",
                data.len()
            ));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "grid dimensions must be positive");
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    /// Builds a single-channel grid from rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(contract!("ragged rows"));
        }
        Self::new(1, height, width, rows.concat())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, ch: usize, r: usize, c: usize) -> usize {
        (ch * self.height + r) * self.width + c
    }

    pub fn get(&self, ch: usize, r: usize, c: usize) -> f64 {
        self.data[self.index(ch, r, c)]
    }

    pub fn set(&mut self, ch: usize, r: usize, c: usize, value: f64) {
        let i = self.index(ch, r, c);
        self.data[i] = value;
    }
}

/// A convolution filter spanning every input channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel3 {
    depth: usize,
    kh: usize,
    kw: usize,
    weights: Vec<f64>,
}

impl Kernel3 {
    pub fn new(depth: usize, kh: usize, kw: usize, weights: Vec<f64>) -> Result<Self> {
        if depth == 0 {
            return Err(contract!("kernel depth must be positive"));
        }
        if kh.is_multiple_of(2) || kw.is_multiple_of(2) {
            return Err(contract!("kernel sides must be odd, got {kh}x{kw}"));
        }
        if weights.len() != depth * kh * kw {
            return Err(contract!(
                "kernel weight length {} does not match {depth}x{kh}x{kw}",
                weights.len()
            ));
        }
        Ok(Self { depth, kh, kw, weights })
    }

    pub fn zeros(depth: usize, kh: usize, kw: usize) -> Result<Self> {
        Self::new(depth, kh, kw, vec![0.0; depth * kh * kw])
    }

    /// Kernel with `taps[ch]` at the center of channel `ch` and zeros elsewhere.
    pub fn center_only(taps: &[f64], kh: usize, kw: usize) -> Result<Self> {
        let mut k = Self::zeros(taps.len(), kh, kw)?;
        for (ch, &t) in taps.iter().enumerate() {
            let i = k.index(ch, kh / 2, kw / 2);
            k.weights[i] = t;
        }
        Ok(k)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn kh(&self) -> usize {
        self.kh
    }

    pub fn kw(&self) -> usize {
        self.kw
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[inline]
    pub fn index(&self, ch: usize, dr: usize, dc: usize) -> usize {
        (ch * self.kh + dr) * self.kw + dc
    }

    pub fn get(&self, ch: usize, dr: usize, dc: usize) -> f64 {
        self.weights[self.index(ch, dr, dc)]
    }
}

/// Zero-padded, stride-1 convolution (cross-correlation) that keeps the
/// spatial size. Produces a single-channel grid.
pub fn conv2d_same(input: &Grid3, kernel: &Kernel3) -> Result<Grid3> {
    if kernel.depth != input.channels {
        return Err(contract!(
            "kernel depth {} does not match input channels {}",
            kernel.depth,
            input.channels
        ));
    }
    let mut out = vec![0.0; input.height * input.width];
    conv_same_accumulate(
        &input.data,
        input.channels,
        input.height,
        input.width,
        &kernel.weights,
        kernel.kh,
        kernel.kw,
        &mut out,
    );
    Grid3::new(1, input.height, input.width, out)
}

/// Elementwise product of two equally shaped grids.
pub fn hadamard(a: &Grid3, b: &Grid3) -> Result<Grid3> {
    if a.shape() != b.shape() {
        return Err(contract!("hadamard shape mismatch: {:?} vs {:?}", a.shape(), b.shape()));
    }
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    Ok(Grid3 { data, ..*a })
}

/// `Σ_c coeffs[c] · maps[c]` over single-channel maps.
pub fn weighted_channel_sum(maps: &[Grid3], coeffs: &[f64]) -> Result<Grid3> {
    if maps.len() != coeffs.len() {
        return Err(contract!("{} maps but {} coefficients", maps.len(), coeffs.len()));
    }
    let first = maps.first().ok_or_else(|| contract!("no maps to sum"))?;
    if first.channels != 1 {
        return Err(contract!("maps must be single-channel"));
    }
    let mut out = Grid3::zeros(1, first.height, first.width);
    for (m, &f) in maps.iter().zip(coeffs) {
        if m.shape() != first.shape() {
            return Err(contract!("map shape mismatch: {:?} vs {:?}", m.shape(), first.shape()));
        }
        axpy(f, &m.data, &mut out.data);
    }
    Ok(out)
}

/// Gradient of `Σ_p grad_out[p] · conv2d_same(input, K)[p]` with respect to
/// the weights of a `kh × kw` kernel `K`.
pub fn conv2d_same_kernel_grad(
    input: &Grid3,
    grad_out: &Grid3,
    kh: usize,
    kw: usize,
) -> Result<Kernel3> {
    if grad_out.channels != 1 || (grad_out.height, grad_out.width) != (input.height, input.width) {
        return Err(contract!(
            "output gradient shape {:?} does not match input spatial shape",
            grad_out.shape()
        ));
    }
    let mut k = Kernel3::zeros(input.channels, kh, kw)?;
    conv_same_kernel_grad_accumulate(
        &input.data,
        input.channels,
        input.height,
        input.width,
        &grad_out.data,
        kh,
        kw,
        &mut k.weights,
    );
    Ok(k)
}

/// `y += a · x`
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Valid output range `[lo, hi)` along one axis for kernel offset `off`
/// relative to center `half`, so that `o + off - half` stays in `[0, n)`.
/// `None` when the tap never overlaps the input.
#[inline]
fn valid_range(n: usize, off: usize, half: usize) -> Option<(usize, usize)> {
    let lo = half.saturating_sub(off);
    let hi = (n + half).saturating_sub(off).min(n);
    (lo < hi).then_some((lo, hi))
}

/// Slice-level same convolution; adds into `out` (length `h·w`). Zero taps
/// are skipped, which makes center-only kernels cheap.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_same_accumulate(
    input: &[f64],
    channels: usize,
    h: usize,
    w: usize,
    kernel: &[f64],
    kh: usize,
    kw: usize,
    out: &mut [f64],
) {
    let (hr, hc) = (kh / 2, kw / 2);
    for ch in 0..channels {
        let plane = &input[ch * h * w..(ch + 1) * h * w];
        for dr in 0..kh {
            let Some((r0, r1)) = valid_range(h, dr, hr) else { continue };
            for dc in 0..kw {
                let wt = kernel[(ch * kh + dr) * kw + dc];
                if wt == 0.0 {
                    continue;
                }
                let Some((c0, c1)) = valid_range(w, dc, hc) else { continue };
                for r in r0..r1 {
                    let src_r = r + dr - hr;
                    let src = &plane[src_r * w + c0 + dc - hc..src_r * w + c1 + dc - hc];
                    axpy(wt, src, &mut out[r * w + c0..r * w + c1]);
                }
            }
        }
    }
}

/// Slice-level kernel gradient; adds into `grad_kernel` (length `channels·kh·kw`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_same_kernel_grad_accumulate(
    input: &[f64],
    channels: usize,
    h: usize,
    w: usize,
    grad_out: &[f64],
    kh: usize,
    kw: usize,
    grad_kernel: &mut [f64],
) {
    let (hr, hc) = (kh / 2, kw / 2);
    for ch in 0..channels {
        let plane = &input[ch * h * w..(ch + 1) * h * w];
        for dr in 0..kh {
            let Some((r0, r1)) = valid_range(h, dr, hr) else { continue };
            for dc in 0..kw {
                let Some((c0, c1)) = valid_range(w, dc, hc) else { continue };
                let mut acc = 0.0;
                for r in r0..r1 {
                    let src_r = r + dr - hr;
                    let src = &plane[src_r * w + c0 + dc - hc..src_r * w + c1 + dc - hc];
                    let g = &grad_out[r * w + c0..r * w + c1];
                    acc += g.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                }
                grad_kernel[(ch * kh + dr) * kw + dc] += acc;
            }
        }
    }
}
