//! Synthetic rectified stereo pairs with exact ground truth.
//!
//! The left image is random-dot texture. The right image is the left image
//! warped by `x' = x - d(x, y)`, with closer surfaces (larger disparity)
//! hiding farther ones. Right pixels that nothing maps to get fresh dots.
//! Left pixels that are hidden or fall off the right image have invalid truth.
//! The right image then goes through `gain * v + bias + N(0, noise_sigma)`.
//! Both images are quantized to 8 bits so they survive a PGM round trip.

mod config;

pub use config::KeyValues;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cnn::{PatchTriple, PATCH_LEN, RECEPTIVE_FIELD};
use crate::error::{Error, Result};
use crate::image_io::{load_pfm, load_pgm, save_pfm, save_pgm, DisparityMap, GrayImage};

pub const LEFT_FILE: &str = "left.pgm";
pub const RIGHT_FILE: &str = "right.pgm";
pub const TRUTH_FILE: &str = "truth.pfm";

/// Smallest and largest magnitude of the negative-sample disparity offset.
pub const NEGATIVE_OFFSET: (i64, i64) = (2, 8);

#[derive(Debug, Clone, PartialEq)]
pub enum Terrain {
    /// One disparity everywhere; may be fractional.
    Constant { disparity: f32 },
    /// Background at `base` with `count` axis-aligned rectangles raised to `raised`.
    Blocks {
        base: u32,
        raised: u32,
        count: usize,
        min_size: usize,
        max_size: usize,
    },
    /// Disparity rising linearly along x from `from` at column 0 to `to` at the last column.
    Ramp { from: f32, to: f32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub d_max: usize,
    pub terrain: Terrain,
    pub noise_sigma: f32,
    pub gain: f32,
    pub bias: f32,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "width",
    "height",
    "d_max",
    "terrain",
    "disparity",
    "base",
    "raised",
    "blocks",
    "block_min",
    "block_max",
    "ramp_from",
    "ramp_to",
    "noise_sigma",
    "gain",
    "bias",
    "seed",
];

impl SceneSpec {
    pub fn new(width: usize, height: usize, d_max: usize, terrain: Terrain) -> Self {
        Self {
            width,
            height,
            d_max,
            terrain,
            noise_sigma: 0.0,
            gain: 1.0,
            bias: 0.0,
            seed: 0,
        }
    }

    pub fn with_radiometry(mut self, gain: f32, bias: f32, noise_sigma: f32) -> Self {
        self.gain = gain;
        self.bias = bias;
        self.noise_sigma = noise_sigma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Param(m));
        if self.width == 0 || self.height == 0 {
            return bad("scene must be at least 1x1".into());
        }
        if self.d_max >= self.width {
            return bad(format!(
                "d_max {} must be below width {}",
                self.d_max, self.width
            ));
        }
        let in_range = |d: f32| d.is_finite() && d >= 0.0 && d <= self.d_max as f32;
        match self.terrain {
            Terrain::Constant { disparity } => {
                if !in_range(disparity) {
                    return bad(format!("disparity {disparity} outside [0, {}]", self.d_max));
                }
            }
            Terrain::Blocks {
                base,
                raised,
                min_size,
                max_size,
                ..
            } => {
                if !in_range(base as f32) || !in_range(raised as f32) {
                    return bad(format!("block disparities must lie in [0, {}]", self.d_max));
                }
                if min_size == 0 || min_size > max_size || max_size > self.width.min(self.height) {
                    return bad(format!(
                        "block sizes {min_size}..={max_size} do not fit a {}x{} scene",
                        self.width, self.height
                    ));
                }
            }
            Terrain::Ramp { from, to } => {
                if !in_range(from) || !in_range(to) {
                    return bad(format!("ramp ends must lie in [0, {}]", self.d_max));
                }
                if self.width > 1 && ((to - from) / (self.width - 1) as f32).abs() >= 1.0 {
                    return bad("ramp slope must stay below one pixel per column".into());
                }
            }
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return bad(format!("gain {} must be positive", self.gain));
        }
        if !self.bias.is_finite() {
            return bad("bias must be finite".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise sigma {} must be non-negative",
                self.noise_sigma
            ));
        }
        Ok(())
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.check_keys(KEYS)?;
        let terrain_name: String = kv.require("terrain")?;
        let terrain = match terrain_name.as_str() {
            "constant" => Terrain::Constant {
                disparity: kv.require("disparity")?,
            },
            "blocks" => Terrain::Blocks {
                base: kv.require("base")?,
                raised: kv.require("raised")?,
                count: kv.get_or("blocks", 3)?,
                min_size: kv.get_or("block_min", 24)?,
                max_size: kv.get_or("block_max", 64)?,
            },
            "ramp" => Terrain::Ramp {
                from: kv.require("ramp_from")?,
                to: kv.require("ramp_to")?,
            },
            other => {
                return Err(Error::Config {
                    line: 0,
                    reason: format!("unknown terrain {other:?} (constant, blocks, ramp)"),
                })
            }
        };
        let spec = Self {
            width: kv.require("width")?,
            height: kv.require("height")?,
            d_max: kv.require("d_max")?,
            terrain,
            noise_sigma: kv.get_or("noise_sigma", 0.0)?,
            gain: kv.get_or("gain", 1.0)?,
            bias: kv.get_or("bias", 0.0)?,
            seed: kv.get_or("seed", 0)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config_str(&fs::read_to_string(path)?)
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "width = {}", self.width);
        let _ = writeln!(s, "height = {}", self.height);
        let _ = writeln!(s, "d_max = {}", self.d_max);
        match &self.terrain {
            Terrain::Constant { disparity } => {
                let _ = writeln!(s, "terrain = constant\ndisparity = {disparity}");
            }
            Terrain::Blocks {
                base,
                raised,
                count,
                min_size,
                max_size,
            } => {
                let _ = writeln!(
                    s,
                    "terrain = blocks\nbase = {base}\nraised = {raised}\nblocks = {count}\nblock_min = {min_size}\nblock_max = {max_size}"
                );
            }
            Terrain::Ramp { from, to } => {
                let _ = writeln!(s, "terrain = ramp\nramp_from = {from}\nramp_to = {to}");
            }
        }
        let _ = writeln!(s, "noise_sigma = {}", self.noise_sigma);
        let _ = writeln!(s, "gain = {}", self.gain);
        let _ = writeln!(s, "bias = {}", self.bias);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereoScene {
    pub left: GrayImage,
    pub right: GrayImage,
    pub truth: DisparityMap,
}

fn quantize(v: f32) -> f32 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn random_dot(rng: &mut ChaCha8Rng) -> f32 {
    f32::from(rng.random::<u8>()) / 255.0
}

/// Dense disparity field of the scene, row-major.
fn disparity_field(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let (w, h) = (spec.width, spec.height);
    match spec.terrain {
        Terrain::Constant { disparity } => vec![disparity; w * h],
        Terrain::Ramp { from, to } => {
            let slope = if w > 1 {
                (to - from) / (w - 1) as f32
            } else {
                0.0
            };
            (0..h)
                .flat_map(|_| (0..w).map(move |x| from + slope * x as f32))
                .collect()
        }
        Terrain::Blocks {
            base,
            raised,
            count,
            min_size,
            max_size,
        } => {
            let mut field = vec![base as f32; w * h];
            for _ in 0..count {
                let bw = rng.random_range(min_size..=max_size);
                let bh = rng.random_range(min_size..=max_size);
                let x0 = rng.random_range(0..=w - bw);
                let y0 = rng.random_range(0..=h - bh);
                for y in y0..y0 + bh {
                    field[y * w + x0..y * w + x0 + bw].fill(raised as f32);
                }
            }
            field
        }
    }
}

/// Renders the scene. Pure in `spec`, seed included.
pub fn generate(spec: &SceneSpec) -> Result<StereoScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let field = disparity_field(spec, &mut rng);
    let left: Vec<f32> = (0..w * h).map(|_| random_dot(&mut rng)).collect();
    let integral = field.iter().all(|d| d.fract() == 0.0);

    let mut right = vec![f32::NAN; w * h];
    let mut truth = vec![None; w * h];
    for y in 0..h {
        let row = y * w;
        if integral {
            // forward warp with a z-buffer on disparity
            let mut owner: Vec<Option<usize>> = vec![None; w];
            for x in 0..w {
                let d = field[row + x] as usize;
                if d > x {
                    continue;
                }
                let xr = x - d;
                match owner[xr] {
                    Some(prev) if field[row + prev] >= field[row + x] => {}
                    _ => owner[xr] = Some(x),
                }
            }
            for (xr, src) in owner.iter().enumerate() {
                if let Some(x) = *src {
                    right[row + xr] = left[row + x];
                    truth[row + x] = Some(field[row + x]);
                }
            }
        } else {
            // fractional fields are linear in x with slope below one, so
            // x -> x - d(x) is monotone and can be inverted in closed form
            let a = field[row];
            let b = if w > 1 {
                (field[row + w - 1] - a) / (w - 1) as f32
            } else {
                0.0
            };
            for xr in 0..w {
                let x = (xr as f32 + a) / (1.0 - b);
                if x <= (w - 1) as f32 {
                    let x0 = x.floor() as usize;
                    let t = x - x0 as f32;
                    let x1 = (x0 + 1).min(w - 1);
                    right[row + xr] = (1.0 - t) * left[row + x0] + t * left[row + x1];
                }
            }
            for x in 0..w {
                if field[row + x] <= x as f32 {
                    truth[row + x] = Some(field[row + x]);
                }
            }
        }
    }
    for v in right.iter_mut().filter(|v| v.is_nan()) {
        *v = random_dot(&mut rng);
    }

    let noise = Normal::new(0.0f32, spec.noise_sigma).map_err(|e| Error::Param(e.to_string()))?;
    let radiometric = spec.gain != 1.0 || spec.bias != 0.0 || spec.noise_sigma > 0.0;
    if radiometric {
        for v in &mut right {
            let n = if spec.noise_sigma > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            *v = spec.gain * *v + spec.bias + n;
        }
    }
    let right: Vec<f32> = right.into_iter().map(quantize).collect();

    Ok(StereoScene {
        left: GrayImage::new(w, h, left)?,
        right: GrayImage::new(w, h, right)?,
        truth: DisparityMap::new(w, h, truth)?,
    })
}

pub fn write_scene(scene: &StereoScene, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    save_pgm(&scene.left, dir.join(LEFT_FILE))?;
    save_pgm(&scene.right, dir.join(RIGHT_FILE))?;
    save_pfm(&scene.truth, dir.join(TRUTH_FILE))?;
    Ok(())
}

pub fn read_scene(dir: impl AsRef<Path>) -> Result<StereoScene> {
    let dir = dir.as_ref();
    let scene = StereoScene {
        left: load_pgm(dir.join(LEFT_FILE))?,
        right: load_pgm(dir.join(RIGHT_FILE))?,
        truth: load_pfm(dir.join(TRUTH_FILE))?,
    };
    let (w, h) = (scene.left.width(), scene.left.height());
    if (scene.right.width(), scene.right.height()) != (w, h)
        || (scene.truth.width(), scene.truth.height()) != (w, h)
    {
        return Err(Error::Dimension(format!(
            "scene files in {} differ in size",
            dir.display()
        )));
    }
    Ok(scene)
}

/// Training-time perturbations applied while cutting patches.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmentation {
    /// Chance that each patch gets a gain/bias change, and that the right
    /// patches get a vertical shift.
    pub probability: f64,
    pub gain: (f32, f32),
    pub bias: (f32, f32),
    /// Largest vertical shift, in pixels, of the right-image patches.
    pub max_jitter: usize,
}

impl Default for Augmentation {
    fn default() -> Self {
        Self {
            probability: 0.5,
            gain: (0.8, 1.25),
            bias: (-0.1, 0.1),
            max_jitter: 1,
        }
    }
}

/// Where a triple was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripleOrigin {
    pub x: usize,
    pub y: usize,
    /// Rounded true disparity; the positive patch is centered at `x - disparity`.
    pub disparity: i64,
    /// The negative patch is centered at `x - negative_disparity`.
    pub negative_disparity: i64,
    /// Vertical shift applied to both right-image patches.
    pub jitter: i64,
}

pub fn extract_triples(
    left: &GrayImage,
    right: &GrayImage,
    truth: &DisparityMap,
    count: usize,
    seed: u64,
    augment: Option<&Augmentation>,
) -> Result<Vec<PatchTriple>> {
    Ok(
        extract_triples_traced(left, right, truth, count, seed, augment)?
            .into_iter()
            .map(|(t, _)| t)
            .collect(),
    )
}

/// Samples `count` triples centered on valid truth pixels. The negative patch
/// sits at the true disparity plus an offset of 2 to 8 pixels either way.
pub fn extract_triples_traced(
    left: &GrayImage,
    right: &GrayImage,
    truth: &DisparityMap,
    count: usize,
    seed: u64,
    augment: Option<&Augmentation>,
) -> Result<Vec<(PatchTriple, TripleOrigin)>> {
    let (w, h) = (left.width(), left.height());
    if (right.width(), right.height()) != (w, h) || (truth.width(), truth.height()) != (w, h) {
        return Err(Error::Dimension("images and truth differ in size".into()));
    }
    let half = RECEPTIVE_FIELD / 2;
    let jitter = augment.map_or(0, |a| a.max_jitter);
    let margin = half + jitter;
    if h < 2 * margin + 1 || w < 2 * half + 1 {
        return Err(Error::Data("scene too small to cut patches from".into()));
    }
    let (lo, hi) = NEGATIVE_OFFSET;
    // a center qualifies if the reference and positive patches fit and at
    // least the smallest negative offset fits on one side
    let fits = |c: i64| c >= half as i64 && c + (half as i64) < w as i64;
    let mut centers = Vec::new();
    for y in margin..h - margin {
        for x in half..w - half {
            if let Some(d) = truth.get(x, y) {
                let d = d.round() as i64;
                let xp = x as i64 - d;
                if fits(xp) && (fits(xp - lo) || fits(xp + lo)) {
                    centers.push((x, y, d));
                }
            }
        }
    }
    if centers.is_empty() {
        return Err(Error::Data(
            "no valid ground-truth pixel admits a full patch triple".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (x, y, d) = centers[rng.random_range(0..centers.len())];
        let offset = loop {
            let mag = rng.random_range(lo..=hi);
            let o = if rng.random_bool(0.5) { mag } else { -mag };
            if fits(x as i64 - d - o) {
                break o;
            }
        };
        let shift = match augment {
            Some(a) if a.max_jitter > 0 && rng.random_bool(a.probability) => {
                let mag = rng.random_range(1..=a.max_jitter as i64);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            }
            _ => 0,
        };
        let ry = (y as i64 + shift) as usize;
        let mut reference = cut(left, x, y);
        let mut positive = cut(right, (x as i64 - d) as usize, ry);
        let mut negative = cut(right, (x as i64 - d - offset) as usize, ry);
        if let Some(a) = augment {
            for p in [&mut reference, &mut positive, &mut negative] {
                if rng.random_bool(a.probability) {
                    let g = rng.random_range(a.gain.0..=a.gain.1);
                    let b = rng.random_range(a.bias.0..=a.bias.1);
                    p.iter_mut().for_each(|v| *v = (g * *v + b).clamp(0.0, 1.0));
                }
            }
        }
        out.push((
            PatchTriple {
                reference,
                positive,
                negative,
            },
            TripleOrigin {
                x,
                y,
                disparity: d,
                negative_disparity: d + offset,
                jitter: shift,
            },
        ));
    }
    Ok(out)
}

fn cut(img: &GrayImage, cx: usize, cy: usize) -> [f32; PATCH_LEN] {
    let half = RECEPTIVE_FIELD / 2;
    let mut p = [0.0; PATCH_LEN];
    for (r, y) in (cy - half..=cy + half).enumerate() {
        p[r * RECEPTIVE_FIELD..(r + 1) * RECEPTIVE_FIELD]
            .copy_from_slice(&img.row(y)[cx - half..=cx + half]);
    }
    p
}
