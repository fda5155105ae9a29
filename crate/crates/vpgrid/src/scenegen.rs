//! Deterministic synthetic scene generator.
//!
//! Positive scenes contain a bundle of line segments converging at a known
//! vanishing point sampled from a center-concentrated prior; negative scenes
//! contain parallel gratings and blobs with no common line intersection.
//! Everything is a pure function of `(params, seed)`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, PixelPoint};
use crate::raster::{write_pgm, CoveredPixel, ImageRaster};

/// 64-bit seed; equal seeds with equal params give byte-identical outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSeed(pub u64);

/// Parameters of a synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    /// Lines through the vanishing point; >= 2 for positives.
    pub n_converging: u32,
    /// Random lines that avoid the vanishing point (positives) or form
    /// parallel gratings (negatives).
    pub n_distractor: u32,
    /// Std-dev of the VP position around the image center, in pixels.
    pub vp_prior_sigma: f64,
    /// Std-dev of additive Gaussian pixel noise.
    pub noise_sigma: f64,
    pub line_intensity: f64,
    pub background_intensity: f64,
    pub line_thickness: f64,
}

impl SceneParams {
    /// Desk-scale defaults: 64x64, CPU-trainable.
    pub fn desk_scale() -> Self {
        SceneParams {
            width: 64,
            height: 64,
            n_converging: 6,
            n_distractor: 4,
            vp_prior_sigma: 6.4,
            noise_sigma: 0.05,
            line_intensity: 0.9,
            background_intensity: 0.1,
            line_thickness: 1.0,
        }
    }

    /// Full-scale frame size: 300x300.
    pub fn full_scale() -> Self {
        SceneParams {
            width: 300,
            height: 300,
            vp_prior_sigma: 30.0,
            ..Self::desk_scale()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::domain("zero-area image"));
        }
        if self.vp_prior_sigma < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::domain("sigma must be >= 0"));
        }
        for v in [self.line_intensity, self.background_intensity] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain("intensity outside [0,1]"));
            }
        }
        if self.line_thickness <= 0.0 {
            return Err(Error::domain("line thickness must be > 0"));
        }
        Ok(())
    }
}

/// A generated positive scene with its exact ground truth and, for
/// verification, the pixels each converging segment covered before noise.
#[derive(Debug, Clone)]
pub struct PositiveScene {
    pub image: ImageRaster,
    pub vp: PixelPoint,
    pub converging_pixels: Vec<Vec<CoveredPixel>>,
}

/// Generates a positive scene; see [`generate_positive_scene`] for the
/// per-segment pixel lists.
pub fn generate_positive(params: &SceneParams, seed: RngSeed) -> Result<(ImageRaster, PixelPoint)> {
    let scene = generate_positive_scene(params, seed)?;
    Ok((scene.image, scene.vp))
}

pub fn generate_positive_scene(params: &SceneParams, seed: RngSeed) -> Result<PositiveScene> {
    params.validate()?;
    if params.n_converging < 2 {
        return Err(Error::domain("positives need n_converging >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
    let mut img = ImageRaster::new(params.width, params.height, params.background_intensity)?;
    let w = params.width as f64;
    let h = params.height as f64;

    // VP from a clamped Gaussian around the center; stays in the central 80%.
    let vp = sample_vp(params, &mut rng);

    // Converging lines at well-separated random angles.
    let mut angles: Vec<f64> = Vec::new();
    while angles.len() < params.n_converging as usize {
        let a: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let min_sep = (0.35 / params.n_converging as f64).min(0.04);
        if angles.iter().all(|b| angle_distance(a, *b) > min_sep) || angles.len() > 64 {
            angles.push(a);
        }
    }
    let mut converging_pixels = Vec::new();
    for angle in &angles {
        let dir = (angle.cos(), angle.sin());
        if let Some((a, b)) = clip_line_to_frame(vp, dir, w, h) {
            let covered = img.draw_line(a, b, params.line_intensity, params.line_thickness);
            converging_pixels.push(covered);
        }
    }

    // Distractors keep clear of the VP so the label stays exact.
    let clearance = 3.0 * params.line_thickness + 3.0;
    let mut placed = 0;
    let mut attempts = 0;
    while placed < params.n_distractor && attempts < 200 {
        attempts += 1;
        let q = PixelPoint::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let dir = (angle.cos(), angle.sin());
        if point_line_distance(vp, q, dir) < clearance {
            continue;
        }
        if let Some((a, b)) = clip_line_to_frame(q, dir, w, h) {
            img.draw_line(a, b, params.line_intensity, params.line_thickness);
            placed += 1;
        }
    }

    add_noise(&mut img, params.noise_sigma, &mut rng);
    Ok(PositiveScene {
        image: img,
        vp,
        converging_pixels,
    })
}

/// Infinite lines drawn into a negative scene, in normal form
/// `rho = x cos(theta) + y sin(theta)`.
#[derive(Debug, Clone, Copy)]
struct NormalLine {
    theta: f64,
    rho: f64,
}

/// Generates a scene with no vanishing point: parallel gratings, blobs, and
/// noise. No three drawn lines meet at a common in-frame point; gratings are
/// parallel within a family and triples across families are rejection-checked.
pub fn generate_negative(params: &SceneParams, seed: RngSeed) -> Result<ImageRaster> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
    let mut img = ImageRaster::new(params.width, params.height, params.background_intensity)?;
    let w = params.width as f64;
    let h = params.height as f64;

    let total_lines = params.n_distractor.max(2);
    let families = total_lines.clamp(1, 3).min(1 + total_lines / 3);
    let per_family = total_lines / families;
    let mut drawn: Vec<NormalLine> = Vec::new();
    let mut family_angles: Vec<f64> = Vec::new();

    for _ in 0..families {
        // Distinct family directions keep intra-family lines parallel only
        // to each other.
        let mut angle;
        loop {
            angle = rng.gen_range(0.0..std::f64::consts::PI);
            if family_angles.iter().all(|b| angle_distance(angle, *b) > 0.15) {
                break;
            }
        }
        family_angles.push(angle);
        let normal_theta = normalize_theta(angle + std::f64::consts::FRAC_PI_2);
        let rho_span = w.hypot(h);
        for _ in 0..per_family.max(1) {
            let mut tries = 0;
            loop {
                tries += 1;
                let rho = rng.gen_range(-rho_span..rho_span);
                let candidate = NormalLine {
                    theta: normal_theta,
                    rho,
                };
                if tries > 50 || no_concurrent_triple(&drawn, candidate, w, h) {
                    if let Some((a, b)) = clip_normal_line(candidate, w, h) {
                        img.draw_line(a, b, params.line_intensity, params.line_thickness);
                        drawn.push(candidate);
                        break;
                    }
                }
                if tries > 80 {
                    break;
                }
            }
        }
    }

    // A few soft blobs so negatives are not pure line drawings.
    let n_blobs = rng.gen_range(1..=3);
    for _ in 0..n_blobs {
        let c = PixelPoint::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let radius = rng.gen_range(1.5..4.5);
        let intensity = rng.gen_range(params.background_intensity..=params.line_intensity);
        img.draw_disc(c, radius, intensity);
    }

    add_noise(&mut img, params.noise_sigma, &mut rng);
    Ok(img)
}

fn no_concurrent_triple(drawn: &[NormalLine], candidate: NormalLine, w: f64, h: f64) -> bool {
    const TOL: f64 = 1.5;
    for i in 0..drawn.len() {
        for j in (i + 1)..drawn.len() {
            let (a, b) = (drawn[i], drawn[j]);
            let det = (a.theta - b.theta).sin();
            if det.abs() < 1e-6 {
                continue;
            }
            let x = (a.rho * b.theta.sin() - b.rho * a.theta.sin()) / det;
            let y = (b.rho * a.theta.cos() - a.rho * b.theta.cos()) / det;
            if x < -TOL || x > w + TOL || y < -TOL || y > h + TOL {
                continue;
            }
            let dist = (x * candidate.theta.cos() + y * candidate.theta.sin()
                - candidate.rho)
                .abs();
            if dist < TOL {
                return false;
            }
        }
    }
    true
}

fn sample_vp(params: &SceneParams, rng: &mut ChaCha8Rng) -> PixelPoint {
    let w = params.width as f64;
    let h = params.height as f64;
    let normal = Normal::new(0.0, params.vp_prior_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let x: f64 = w / 2.0 + normal.sample(rng);
    let y: f64 = h / 2.0 + normal.sample(rng);
    // clamp to the central 80% of the frame
    PixelPoint::new(x.clamp(0.1 * w, 0.9 * w), y.clamp(0.1 * h, 0.9 * h))
}

fn add_noise(img: &mut ImageRaster, sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).unwrap();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = img.get(x, y) + normal.sample(rng);
            img.set(x, y, v);
        }
    }
}

fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % std::f64::consts::PI;
    d.min(std::f64::consts::PI - d)
}

fn normalize_theta(theta: f64) -> f64 {
    let mut t = theta % std::f64::consts::PI;
    if t < 0.0 {
        t += std::f64::consts::PI;
    }
    t
}

fn point_line_distance(p: PixelPoint, on_line: PixelPoint, dir: (f64, f64)) -> f64 {
    // distance from p to the infinite line through on_line with direction dir
    ((p.x - on_line.x) * dir.1 - (p.y - on_line.y) * dir.0).abs()
}

/// Clips the infinite line through `p` with direction `dir` to the frame,
/// inset half a pixel so endpoints stay on pixel centers.
fn clip_line_to_frame(p: PixelPoint, dir: (f64, f64), w: f64, h: f64) -> Option<(PixelPoint, PixelPoint)> {
    let (x0, x1) = (0.5, w - 0.5);
    let (y0, y1) = (0.5, h - 0.5);
    let mut ts: Vec<f64> = Vec::new();
    if dir.0.abs() > 1e-12 {
        for bx in [x0, x1] {
            let t = (bx - p.x) / dir.0;
            let y = p.y + t * dir.1;
            if (y0 - 1e-9..=y1 + 1e-9).contains(&y) {
                ts.push(t);
            }
        }
    }
    if dir.1.abs() > 1e-12 {
        for by in [y0, y1] {
            let t = (by - p.y) / dir.1;
            let x = p.x + t * dir.0;
            if (x0 - 1e-9..=x1 + 1e-9).contains(&x) {
                ts.push(t);
            }
        }
    }
    let t_min = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !t_min.is_finite() || !t_max.is_finite() || t_max - t_min < 1.0 {
        return None;
    }
    Some((
        PixelPoint::new(p.x + t_min * dir.0, p.y + t_min * dir.1),
        PixelPoint::new(p.x + t_max * dir.0, p.y + t_max * dir.1),
    ))
}

fn clip_normal_line(line: NormalLine, w: f64, h: f64) -> Option<(PixelPoint, PixelPoint)> {
    let on_line = PixelPoint::new(line.rho * line.theta.cos(), line.rho * line.theta.sin());
    let dir = (-line.theta.sin(), line.theta.cos());
    clip_line_to_frame(on_line, dir, w, h)
}

/// Augmentation family from the discussion of data augmentation: jittered,
/// cropped, noisy, and blurry variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentKind {
    Jitter,
    Crop,
    Noise,
    Blur,
}

impl std::str::FromStr for AugmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jitter" => Ok(AugmentKind::Jitter),
            "crop" => Ok(AugmentKind::Crop),
            "noise" => Ok(AugmentKind::Noise),
            "blur" => Ok(AugmentKind::Blur),
            other => Err(Error::domain(format!("unknown augmentation '{other}'"))),
        }
    }
}

/// Affine map to apply to VP labels after an augmentation:
/// `(x, y) -> (x * scale_x + offset_x, y * scale_y + offset_y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelTransform {
    pub scale_x: f64,
    pub scale_y: f64,
    pub offset_x: f64,
    pub offset_y: f64,
}

impl LabelTransform {
    pub fn identity() -> Self {
        LabelTransform {
            scale_x: 1.0,
            scale_y: 1.0,
            offset_x: 0.0,
            offset_y: 0.0,
        }
    }

    pub fn apply(&self, p: PixelPoint) -> PixelPoint {
        PixelPoint::new(
            p.x * self.scale_x + self.offset_x,
            p.y * self.scale_y + self.offset_y,
        )
    }
}

/// Shifts the view window by `(dx, dy)`: `new(x, y) = old(x + dx, y + dy)`
/// with clamp-to-edge sampling. A label at `(x, y)` moves to `(x - dx, y - dy)`.
pub fn jitter(img: &ImageRaster, dx: i64, dy: i64) -> (ImageRaster, LabelTransform) {
    let mut out = img.clone();
    for y in 0..img.height() as i64 {
        for x in 0..img.width() as i64 {
            let sx = (x + dx).clamp(0, img.width() as i64 - 1) as u32;
            let sy = (y + dy).clamp(0, img.height() as i64 - 1) as u32;
            out.set(x as u32, y as u32, img.get(sx, sy));
        }
    }
    (
        out,
        LabelTransform {
            scale_x: 1.0,
            scale_y: 1.0,
            offset_x: -(dx as f64),
            offset_y: -(dy as f64),
        },
    )
}

/// Crops the `crop_w x crop_h` window at `(x0, y0)` and rescales it back to
/// the original size with bilinear sampling.
pub fn crop_rescale(
    img: &ImageRaster,
    x0: u32,
    y0: u32,
    crop_w: u32,
    crop_h: u32,
) -> Result<(ImageRaster, LabelTransform)> {
    if crop_w == 0 || crop_h == 0 {
        return Err(Error::domain("empty crop"));
    }
    if crop_w > img.width() || crop_h > img.height() {
        return Err(Error::domain("crop larger than image"));
    }
    if x0 + crop_w > img.width() || y0 + crop_h > img.height() {
        return Err(Error::domain("crop window outside image"));
    }
    let mut out = ImageRaster::new(img.width(), img.height(), 0.0)?;
    let sx = crop_w as f64 / img.width() as f64;
    let sy = crop_h as f64 / img.height() as f64;
    for y in 0..img.height() {
        for x in 0..img.width() {
            let u = x0 as f64 + (x as f64 + 0.5) * sx - 0.5;
            let v = y0 as f64 + (y as f64 + 0.5) * sy - 0.5;
            out.set(x, y, bilinear(img, u, v));
        }
    }
    Ok((
        out,
        LabelTransform {
            scale_x: img.width() as f64 / crop_w as f64,
            scale_y: img.height() as f64 / crop_h as f64,
            offset_x: -(x0 as f64) * img.width() as f64 / crop_w as f64,
            offset_y: -(y0 as f64) * img.height() as f64 / crop_h as f64,
        },
    ))
}

fn bilinear(img: &ImageRaster, u: f64, v: f64) -> f64 {
    let u = u.clamp(0.0, img.width() as f64 - 1.0);
    let v = v.clamp(0.0, img.height() as f64 - 1.0);
    let ix = u.floor() as u32;
    let iy = v.floor() as u32;
    let fx = u - ix as f64;
    let fy = v - iy as f64;
    let ix1 = (ix + 1).min(img.width() - 1);
    let iy1 = (iy + 1).min(img.height() - 1);
    let top = img.get(ix, iy) * (1.0 - fx) + img.get(ix1, iy) * fx;
    let bot = img.get(ix, iy1) * (1.0 - fx) + img.get(ix1, iy1) * fx;
    top * (1.0 - fy) + bot * fy
}

/// Applies one augmentation. `magnitude` scales the effect: jitter offset in
/// pixels, crop fraction removed, noise sigma, blur kernel radius. The
/// returned transform maps original VP labels into the new frame.
pub fn augment(
    img: &ImageRaster,
    kind: AugmentKind,
    magnitude: f64,
    seed: RngSeed,
) -> Result<(ImageRaster, LabelTransform)> {
    if magnitude < 0.0 {
        return Err(Error::domain("magnitude must be >= 0"));
    }
    if magnitude == 0.0 {
        return Ok((img.clone(), LabelTransform::identity()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
    match kind {
        AugmentKind::Jitter => {
            let m = magnitude.round() as i64;
            let dx = rng.gen_range(-m..=m);
            let dy = rng.gen_range(-m..=m);
            Ok(jitter(img, dx, dy))
        }
        AugmentKind::Crop => {
            if magnitude >= 1.0 {
                return Err(Error::domain("crop fraction must be < 1"));
            }
            let crop_w = ((img.width() as f64 * (1.0 - magnitude)).round() as u32).max(1);
            let crop_h = ((img.height() as f64 * (1.0 - magnitude)).round() as u32).max(1);
            let x0 = rng.gen_range(0..=img.width() - crop_w);
            let y0 = rng.gen_range(0..=img.height() - crop_h);
            crop_rescale(img, x0, y0, crop_w, crop_h)
        }
        AugmentKind::Noise => {
            let mut out = img.clone();
            add_noise(&mut out, magnitude, &mut rng);
            Ok((out, LabelTransform::identity()))
        }
        AugmentKind::Blur => {
            let radius = magnitude.round() as u32;
            Ok((img.box_blur(radius), LabelTransform::identity()))
        }
    }
}

/// train | test split tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::domain(format!("unknown split '{other}'"))),
        }
    }
}

/// One generated sample: image path (relative to the manifest), split tag,
/// VP pixel if the sample has one, and the seed it was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: String,
    pub split: Split,
    pub vp: Option<PixelPoint>,
    pub seed: u64,
}

impl ManifestEntry {
    pub fn has_vp(&self) -> bool {
        self.vp.is_some()
    }
}

/// Index of a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub grids: Vec<GridSpec>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut paths: Vec<&str> = self.entries.iter().map(|e| e.path.as_str()).collect();
        paths.sort_unstable();
        paths.dedup();
        if paths.len() != self.entries.len() {
            return Err(Error::domain("duplicate paths in manifest"));
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

const MANIFEST_VERSION: u32 = 1;

/// Writes the line-oriented manifest: a version line, one `grid` line per
/// grid spec, then one `entry` line per sample. Floats carry 6 decimals.
pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    manifest.validate()?;
    let mut out = String::new();
    out.push_str(&format!("version {MANIFEST_VERSION}\n"));
    for g in &manifest.grids {
        out.push_str(&format!("grid {} {} {}\n", g.width(), g.height(), g.n()));
    }
    for e in &manifest.entries {
        match e.vp {
            Some(vp) => out.push_str(&format!(
                "entry {} {} 1 {:.6} {:.6} {}\n",
                e.path,
                e.split.as_str(),
                vp.x,
                vp.y,
                e.seed
            )),
            None => out.push_str(&format!(
                "entry {} {} 0 - - {}\n",
                e.path,
                e.split.as_str(),
                e.seed
            )),
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn parse_manifest(text: &str) -> Result<DatasetManifest> {
    let mut offset = 0usize;
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::parse("empty manifest", 0))?;
    if first != format!("version {MANIFEST_VERSION}") {
        return Err(Error::parse(format!("unsupported header '{first}'"), 0));
    }
    offset += first.len() + 1;
    let mut grids = Vec::new();
    let mut entries = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            ["grid", w, h, n] => {
                let parse = |s: &str| -> Result<u32> {
                    s.parse()
                        .map_err(|_| Error::parse(format!("bad grid field '{s}'"), offset))
                };
                grids.push(GridSpec::new(parse(w)?, parse(h)?, parse(n)?)?);
            }
            ["entry", path, split, has_vp, vp_x, vp_y, seed] => {
                let vp = match *has_vp {
                    "1" => {
                        let px: f64 = vp_x.parse().map_err(|_| {
                            Error::parse(format!("bad vp_x '{vp_x}'"), offset)
                        })?;
                        let py: f64 = vp_y.parse().map_err(|_| {
                            Error::parse(format!("bad vp_y '{vp_y}'"), offset)
                        })?;
                        Some(PixelPoint::new(px, py))
                    }
                    "0" => {
                        if *vp_x != "-" || *vp_y != "-" {
                            return Err(Error::parse(
                                "vp coordinates present on a no-vp entry",
                                offset,
                            ));
                        }
                        None
                    }
                    other => {
                        return Err(Error::parse(format!("bad has_vp '{other}'"), offset))
                    }
                };
                entries.push(ManifestEntry {
                    path: (*path).to_string(),
                    split: split.parse()?,
                    vp,
                    seed: seed
                        .parse()
                        .map_err(|_| Error::parse(format!("bad seed '{seed}'"), offset))?,
                });
            }
            _ => return Err(Error::parse(format!("unrecognized line '{line}'"), offset)),
        }
        offset += line.len() + 1;
    }
    let manifest = DatasetManifest { grids, entries };
    manifest.validate()?;
    Ok(manifest)
}

/// splitmix64; spreads dataset seed + sample index into per-sample seeds.
fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Generates `n_pos` positive and `n_neg` negative scenes under `out_dir`,
/// writes them as binary PGM, and returns the manifest (also written to
/// `out_dir/manifest.txt`).
///
/// Per class, the first `floor(count * train_fraction)` samples of a
/// seed-shuffled order go to the train split, the rest to test; membership
/// depends only on `seed`.
pub fn build_dataset(
    n_pos: u32,
    n_neg: u32,
    train_fraction: f64,
    params: &SceneParams,
    grids: &[GridSpec],
    seed: RngSeed,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(Error::domain("train_fraction must be in (0,1)"));
    }
    for g in grids {
        if g.width() != params.width || g.height() != params.height {
            return Err(Error::domain("grid dimensions do not match scene params"));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut entries = Vec::new();
    let pos_train = split_assignment(n_pos, train_fraction, seed.0, 0);
    let neg_train = split_assignment(n_neg, train_fraction, seed.0, 1);

    for i in 0..n_pos {
        let sample_seed = mix_seed(seed.0, u64::from(i));
        let (img, vp) = generate_positive(params, RngSeed(sample_seed))?;
        let name = format!("pos_{i:05}.pgm");
        write_pgm(&img, &out_dir.join(&name))?;
        entries.push(ManifestEntry {
            path: name,
            split: if pos_train[i as usize] {
                Split::Train
            } else {
                Split::Test
            },
            vp: Some(vp),
            seed: sample_seed,
        });
    }
    for i in 0..n_neg {
        let sample_seed = mix_seed(seed.0, 0x8000_0000_0000_0000 | u64::from(i));
        let img = generate_negative(params, RngSeed(sample_seed))?;
        let name = format!("neg_{i:05}.pgm");
        write_pgm(&img, &out_dir.join(&name))?;
        entries.push(ManifestEntry {
            path: name,
            split: if neg_train[i as usize] {
                Split::Train
            } else {
                Split::Test
            },
            vp: None,
            seed: sample_seed,
        });
    }

    let manifest = DatasetManifest {
        grids: grids.to_vec(),
        entries,
    };
    write_manifest(&manifest, &out_dir.join("manifest.txt"))?;
    Ok(manifest)
}

/// True at index i iff sample i is a train sample.
fn split_assignment(count: u32, train_fraction: f64, seed: u64, class_tag: u64) -> Vec<bool> {
    let train_count = (count as f64 * train_fraction).floor() as usize;
    let mut order: Vec<usize> = (0..count as usize).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xC0FFEE ^ class_tag));
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut is_train = vec![false; count as usize];
    for &idx in order.iter().take(train_count) {
        is_train[idx] = true;
    }
    is_train
}

/// Loads the image behind a manifest entry, resolving its path relative to
/// the manifest's directory.
pub fn load_entry_image(manifest_path: &Path, entry: &ManifestEntry) -> Result<ImageRaster> {
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    crate::raster::read_pgm(&dir.join(&entry.path))
}

pub fn manifest_image_path(manifest_path: &Path, entry: &ManifestEntry) -> PathBuf {
    manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&entry.path)
}
