use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, RankedPrediction};
use crate::raster::ImageRaster;
use crate::scenegen::{augment, load_entry_image, AugmentKind, DatasetManifest, RngSeed, Split};

use super::network::{softmax, Network};
use super::tensor::Tensor;

/// What the head predicts: VP existence (2 classes) or the VP grid cell
/// (`p` classes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Existence,
    Localization,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "existence" => Ok(Task::Existence),
            "localization" => Ok(Task::Localization),
            other => Err(Error::domain(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 16,
            epochs: 20,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::domain("learning_rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::domain("momentum must be in [0,1)"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::domain("batch_size and epochs must be >= 1"));
        }
        Ok(())
    }
}

/// One labeled training image.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub image: ImageRaster,
    pub label: usize,
}

/// Loads the images of one manifest split and labels them for `task`:
/// localization keeps positives only with the linearized VP cell as label;
/// existence keeps everything with label 1 iff the sample has a VP.
pub fn prepare_samples(
    manifest_path: &Path,
    manifest: &DatasetManifest,
    task: Task,
    grid: GridSpec,
    split: Split,
) -> Result<Vec<TrainSample>> {
    let mut samples = Vec::new();
    for entry in manifest.split(split) {
        let label = match (task, entry.vp) {
            (Task::Localization, Some(vp)) => {
                grid.linearize(grid.pixel_to_cell(vp)?)? as usize
            }
            (Task::Localization, None) => continue,
            (Task::Existence, vp) => usize::from(vp.is_some()),
        };
        samples.push(TrainSample {
            image: load_entry_image(manifest_path, entry)?,
            label,
        });
    }
    Ok(samples)
}

/// Like [`prepare_samples`], but appends `copies` augmented variants of each
/// sample, cycling through jitter, noise, blur, and crop. Labels follow the
/// augmentation's coordinate transform; a copy whose VP would leave the frame
/// is dropped. Deterministic in `seed`.
pub fn prepare_augmented_samples(
    manifest_path: &Path,
    manifest: &DatasetManifest,
    task: Task,
    grid: GridSpec,
    split: Split,
    copies: u32,
    seed: u64,
) -> Result<Vec<TrainSample>> {
    const KINDS: [(AugmentKind, f64); 4] = [
        (AugmentKind::Jitter, 3.0),
        (AugmentKind::Noise, 0.05),
        (AugmentKind::Blur, 1.0),
        (AugmentKind::Crop, 0.2),
    ];
    let mut samples = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for entry in manifest.split(split) {
        if task == Task::Localization && entry.vp.is_none() {
            continue;
        }
        let image = load_entry_image(manifest_path, entry)?;
        for copy in 0..=copies {
            let (img, transform) = if copy == 0 {
                (image.clone(), crate::scenegen::LabelTransform::identity())
            } else {
                let (kind, magnitude) = KINDS[(copy as usize - 1) % KINDS.len()];
                augment(&image, kind, magnitude, RngSeed(rng.gen()))?
            };
            let label = match (task, entry.vp) {
                (Task::Localization, Some(vp)) => {
                    let vp = transform.apply(vp);
                    if vp.x < 0.0
                        || vp.y < 0.0
                        || vp.x >= img.width() as f64
                        || vp.y >= img.height() as f64
                    {
                        continue;
                    }
                    grid.linearize(grid.pixel_to_cell(vp)?)? as usize
                }
                (Task::Localization, None) => unreachable!(),
                (Task::Existence, vp) => usize::from(vp.is_some()),
            };
            samples.push(TrainSample { image: img, label });
        }
    }
    Ok(samples)
}

/// SGD with momentum over in-memory samples. Deterministic: the per-epoch
/// shuffle derives from `cfg.seed` and the epoch index, and gradients reduce
/// in sample-index order. Returns the trained network and per-epoch mean loss.
pub fn train_samples(
    mut net: Network,
    samples: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<(Network, Vec<f64>)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::domain("empty training split"));
    }
    let head = net.head_classes();
    if let Some(bad) = samples.iter().find(|s| s.label >= head) {
        return Err(Error::domain(format!(
            "label {} out of range for a {head}-way head",
            bad.label
        )));
    }
    let (_, h, w) = net.input_shape();
    let mut velocity = net.zero_gradients();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            let mut rng =
                ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9e3779b9));
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut data = Vec::with_capacity(chunk.len() * h * w);
            let mut labels = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                data.extend_from_slice(samples[idx].image.pixels());
                labels.push(samples[idx].label);
            }
            let batch = Tensor::from_data(&[chunk.len(), 1, h, w], data)?;
            let (loss, grads) = net.backward(&batch, &labels)?;
            net.sgd_step(&grads, &mut velocity, cfg.learning_rate, cfg.momentum);
            epoch_loss += loss * chunk.len() as f64;
        }
        loss_curve.push(epoch_loss / samples.len() as f64);
    }
    Ok((net, loss_curve))
}

/// Trains on the train split of a manifest; see [`train_samples`].
pub fn train(
    net: Network,
    manifest_path: &Path,
    manifest: &DatasetManifest,
    task: Task,
    grid: GridSpec,
    cfg: &TrainConfig,
) -> Result<(Network, Vec<f64>)> {
    let samples = prepare_samples(manifest_path, manifest, task, grid, Split::Train)?;
    train_samples(net, &samples, cfg)
}

/// Softmax probability that the image contains a vanishing point.
pub fn predict_existence(net: &Network, img: &ImageRaster) -> Result<f64> {
    if net.head_classes() != 2 {
        return Err(Error::domain(format!(
            "existence needs a 2-way head, model has {}",
            net.head_classes()
        )));
    }
    let batch = net.image_to_batch(img)?;
    let probs = softmax(&net.forward(&batch)?);
    Ok(probs.data[1])
}

/// Ranks grid cells by softmax probability, keeping the top `top_k`.
pub fn predict_localization(
    net: &Network,
    img: &ImageRaster,
    grid: GridSpec,
    top_k: usize,
) -> Result<RankedPrediction> {
    let p = grid.class_count() as usize;
    if net.head_classes() != p {
        return Err(Error::domain(format!(
            "grid has p = {p} cells but the model head has {}",
            net.head_classes()
        )));
    }
    if top_k == 0 {
        return Err(Error::domain("top_k must be >= 1"));
    }
    let batch = net.image_to_batch(img)?;
    let probs = softmax(&net.forward(&batch)?);
    let scored = probs
        .data
        .iter()
        .enumerate()
        .map(|(i, p)| Ok((grid.delinearize(i as u32)?, *p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RankedPrediction::from_scores(grid, scored)?.truncated(top_k))
}
