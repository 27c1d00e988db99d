//! Radially averaged power spectra of images, spectral distance, decay
//! exponent fits and the image-based ratio planner.

use std::fs;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bounds::{lambda_star_numeric, KernelBoundInputs, RatioPlan};
use crate::error::{invalid, Error, Result};
use crate::mercer::rng_for;

pub const MIN_SIDE: usize = 8;

/// Real-valued image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMatrix {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
    pub id: String,
}

impl ImageMatrix {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>, id: impl Into<String>) -> Result<Self> {
        if height < MIN_SIDE || width < MIN_SIDE {
            return Err(invalid("image", format!("{height}x{width} is smaller than {MIN_SIDE}x{MIN_SIDE}")));
        }
        if pixels.len() != height * width {
            return Err(invalid("image", format!("{} pixels for a {height}x{width} image", pixels.len())));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(invalid("image", "non-finite pixel"));
        }
        Ok(Self { height, width, pixels, id: id.into() })
    }

    pub fn from_fn(height: usize, width: usize, id: &str, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let pixels = (0..height).flat_map(|i| (0..width).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self::new(height, width, pixels, id)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[i * self.width + j]
    }

    pub fn transposed(&self) -> Self {
        let mut out = vec![0.0; self.pixels.len()];
        for i in 0..self.height {
            for j in 0..self.width {
                out[j * self.height + i] = self.get(i, j);
            }
        }
        Self { height: self.width, width: self.height, pixels: out, id: self.id.clone() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { pixels: self.pixels.iter().map(|&p| f(p)).collect(), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RapsdProfile {
    /// Integer radii `1..=min(H, W)/2`, cycles per image side.
    pub radii: Vec<f64>,
    pub power: Vec<f64>,
    pub counts: Vec<usize>,
    /// Power summed over the whole frequency plane, DC and corners included.
    pub total_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub r_hat: f64,
    pub intercept: f64,
    pub fit_range: [usize; 2],
    pub residual_rms: f64,
    pub bins_used: usize,
}

/// Signed frequency for DFT index `i` of a length-`n` axis.
fn signed_freq(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// In-place 2-D transform of a row-major buffer.
fn fft2(buf: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for r in buf.chunks_exact_mut(w) {
        row.process(r);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    for j in 0..w {
        for i in 0..h {
            column[i] = buf[i * w + j];
        }
        col.process(&mut column);
        for i in 0..h {
            buf[i * w + j] = column[i];
        }
    }
}

/// Power spectrum `|F|^2 / (H W)` of the mean-subtracted image, so that it
/// sums to the image's squared deviation from its mean.
fn power_spectrum(img: &ImageMatrix) -> Vec<f64> {
    let (h, w) = (img.height, img.width);
    let mean = img.pixels.iter().sum::<f64>() / img.pixels.len() as f64;
    let mut buf: Vec<Complex64> = img.pixels.iter().map(|&p| Complex64::new(p - mean, 0.0)).collect();
    fft2(&mut buf, h, w, false);
    let scale = 1.0 / (h * w) as f64;
    buf.iter().map(|c| c.norm_sqr() * scale).collect()
}

pub fn rapsd(img: &ImageMatrix) -> RapsdProfile {
    let (h, w) = (img.height, img.width);
    let power = power_spectrum(img);
    let nyquist = h.min(w) / 2;
    let mut sums = vec![0.0; nyquist + 1];
    let mut counts = vec![0usize; nyquist + 1];
    for i in 0..h {
        let u = signed_freq(i, h);
        for j in 0..w {
            let v = signed_freq(j, w);
            let k = (u * u + v * v).sqrt().round() as usize;
            if k <= nyquist {
                sums[k] += power[i * w + j];
                counts[k] += 1;
            }
        }
    }
    RapsdProfile {
        radii: (1..=nyquist).map(|k| k as f64).collect(),
        power: (1..=nyquist).map(|k| sums[k] / counts[k] as f64).collect(),
        counts: counts[1..].to_vec(),
        total_power: power.iter().sum(),
    }
}

/// Bin-wise mean of per-image profiles.
pub fn mean_rapsd(set: &[ImageMatrix]) -> Result<RapsdProfile> {
    let first = set.first().ok_or_else(|| invalid("images", "image set is empty"))?;
    if let Some(bad) = set.iter().find(|im| (im.height, im.width) != (first.height, first.width)) {
        return Err(invalid(
            "images",
            format!(
                "{} is {}x{}, expected {}x{}",
                bad.id, bad.height, bad.width, first.height, first.width
            ),
        ));
    }
    let profiles: Vec<RapsdProfile> = set.par_iter().map(rapsd).collect();
    let k = set.len() as f64;
    let mut out = profiles[0].clone();
    for p in &profiles[1..] {
        for (acc, v) in out.power.iter_mut().zip(&p.power) {
            *acc += v;
        }
        out.total_power += p.total_power;
    }
    for v in &mut out.power {
        *v /= k;
    }
    out.total_power /= k;
    Ok(out)
}

/// Euclidean distance between two profiles over their common bins.
pub fn profile_distance(a: &RapsdProfile, b: &RapsdProfile) -> f64 {
    a.power
        .iter()
        .zip(&b.power)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn spectral_distance(real: &[ImageMatrix], synth: &[ImageMatrix]) -> Result<f64> {
    Ok(profile_distance(&mean_rapsd(real)?, &mean_rapsd(synth)?))
}

/// Default fit range: radius 2 up to half the largest radius.
pub fn default_fit_range(profile: &RapsdProfile) -> [usize; 2] {
    let nyquist = profile.radii.last().copied().unwrap_or(0.0) as usize;
    [2, nyquist / 2]
}

/// Least-squares slope of log power on log radius over radii in `range`
/// (inclusive); `r_hat = -slope / 2`.
pub fn fit_decay_exponent(profile: &RapsdProfile, range: Option<[usize; 2]>) -> Result<DecayFit> {
    let [lo, hi] = range.unwrap_or_else(|| default_fit_range(profile));
    if lo > hi {
        return Err(invalid("fit_range", format!("lower bin {lo} exceeds upper bin {hi}")));
    }
    let pts: Vec<(f64, f64)> = profile
        .radii
        .iter()
        .zip(&profile.power)
        .filter(|(r, p)| **r >= lo as f64 && **r <= hi as f64 && **r > 0.0 && **p > 0.0)
        .map(|(r, p)| (r.ln(), p.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientBins { found: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(DecayFit {
        r_hat: -slope / 2.0,
        intercept,
        fit_range: [lo, hi],
        residual_rms: (rss / n).sqrt(),
        bins_used: pts.len(),
    })
}

/// Gaussian random field whose Fourier amplitude falls like `radius^(-r0)`.
pub fn power_law_field(height: usize, width: usize, r0: f64, seed: u64) -> Result<ImageMatrix> {
    let mut rng = rng_for(seed, 0);
    let mut buf: Vec<Complex64> = (0..height * width)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    fft2(&mut buf, height, width, false);
    for i in 0..height {
        let u = signed_freq(i, height);
        for j in 0..width {
            let v = signed_freq(j, width);
            let rad = (u * u + v * v).sqrt();
            buf[i * width + j] *= if rad == 0.0 { 0.0 } else { rad.powf(-r0) };
        }
    }
    fft2(&mut buf, height, width, true);
    let scale = 1.0 / (height * width) as f64;
    ImageMatrix::new(height, width, buf.iter().map(|c| c.re * scale).collect(), format!("field-{seed}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum SigmaSource {
    Given(f64),
    /// Pooled pixel variance of the real set.
    FromPixels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPlan {
    pub d: f64,
    pub r_hat: f64,
    pub sigma2: f64,
    pub n: usize,
    pub fit: DecayFit,
    pub plan: RatioPlan,
}

pub fn pixel_variance(set: &[ImageMatrix]) -> f64 {
    let count: usize = set.iter().map(|im| im.pixels.len()).sum();
    let mean = set.iter().flat_map(|im| &im.pixels).sum::<f64>() / count as f64;
    set.iter().flat_map(|im| &im.pixels).map(|p| (p - mean).powi(2)).sum::<f64>() / count as f64
}

/// Spectral distance as `D`, decay fit of the real set as `r`, then the
/// numeric planner.
pub fn plan_from_images(
    real: &[ImageMatrix],
    synth: &[ImageMatrix],
    n: usize,
    sigma: SigmaSource,
    fit_range: Option<[usize; 2]>,
) -> Result<SpectralPlan> {
    let real_profile = mean_rapsd(real)?;
    let d = profile_distance(&real_profile, &mean_rapsd(synth)?);
    let sigma2 = match sigma {
        SigmaSource::Given(s) => s,
        SigmaSource::FromPixels => pixel_variance(real),
    };
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(invalid("sigma2", format!("must be > 0, got {sigma2}")));
    }
    let fit = fit_decay_exponent(&real_profile, fit_range)?;
    if d == 0.0 {
        return Err(Error::UnboundedRegularization);
    }
    if !(fit.r_hat >= 0.5) {
        return Err(Error::Numeric(format!(
            "estimated decay exponent {:.4} is below 0.5, outside the planner's validity range",
            fit.r_hat
        )));
    }
    let inputs = KernelBoundInputs::new(n, fit.r_hat, sigma2, d, 0.0)?;
    let plan = lambda_star_numeric(&inputs)?;
    Ok(SpectralPlan { d, r_hat: fit.r_hat, sigma2, n, fit, plan })
}

fn luma(r: u8, g: u8, b: u8) -> f64 {
    0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
}

/// Loads a PNG (colour converted to luma) or a CSV matrix.
pub fn load_image(path: &Path) -> Result<ImageMatrix> {
    let id = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase());
    match ext.as_deref() {
        Some("png") => {
            let dynimg = image::open(path).map_err(|e| Error::Decode { path: path.into(), reason: e.to_string() })?;
            let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
            let pixels: Vec<f64> = match dynimg {
                image::DynamicImage::ImageLuma8(g) => g.pixels().map(|p| p.0[0] as f64).collect(),
                image::DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0] as f64).collect(),
                other => other.to_rgb8().pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect(),
            };
            ImageMatrix::new(h, w, pixels, id)
        }
        Some("csv") => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv_matrix(&text, &id).map_err(|reason| Error::Decode { path: path.into(), reason })
        }
        _ => Err(Error::Decode { path: path.into(), reason: "expected a .png or .csv file".into() }),
    }
}

fn parse_csv_matrix(text: &str, id: &str) -> std::result::Result<ImageMatrix, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", ln + 1)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(format!("line {}: {} columns, expected {}", ln + 1, row.len(), first.len()));
            }
        }
        rows.push(row);
    }
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    ImageMatrix::new(h, w, rows.concat(), id).map_err(|e| e.to_string())
}

/// All `.png` and `.csv` files in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<ImageMatrix>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = p.extension().map(|e| e.to_string_lossy().to_ascii_lowercase());
        if p.is_file() && matches!(ext.as_deref(), Some("png") | Some("csv")) {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Decode { path: dir.into(), reason: "no .png or .csv images found".into() });
    }
    paths.iter().map(|p| load_image(p)).collect()
}
