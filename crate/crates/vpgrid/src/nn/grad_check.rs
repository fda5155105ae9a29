use rand::{seq::index::sample, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::network::{softmax_cross_entropy, Network};
use super::tensor::Tensor;

/// Outcome of a finite-difference gradient verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Worst `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)` over
    /// the checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates excluded because the two perturbed forwards straddled a
    /// ReLU kink or a pooling argmax switch.
    pub excluded: usize,
}

/// Coordinates into the parameter vector: `(layer, is_bias, index)`.
fn parameter_coords(net: &Network) -> Vec<(usize, bool, usize)> {
    let mut coords = Vec::new();
    for (li, layer) in net.layers().iter().enumerate() {
        if let Some((w, b)) = layer.params() {
            coords.extend((0..w.len()).map(|i| (li, false, i)));
            coords.extend((0..b.len()).map(|i| (li, true, i)));
        }
    }
    coords
}

fn nudge(net: &mut Network, coord: (usize, bool, usize), delta: f64) {
    let (w, b) = net.layers_mut()[coord.0].params_mut().expect("parametric");
    let slot = if coord.1 { &mut b[coord.2] } else { &mut w[coord.2] };
    *slot += delta;
}

/// Central-difference check of [`Network::backward`] on a labeled batch.
///
/// Every parameter is checked, or a seeded random subsample of at least
/// `max_coords` for larger nets. Coordinates whose perturbed forwards change
/// any ReLU mask or pooling argmax are reported in `excluded` rather than in
/// the error maximum.
pub fn grad_check(
    net: &Network,
    batch: &Tensor,
    labels: &[usize],
    eps: f64,
    max_coords: usize,
) -> Result<GradCheckReport> {
    if eps <= 0.0 {
        return Err(Error::domain("eps must be > 0"));
    }
    let (_, analytic) = net.backward(batch, labels)?;
    let all_coords = parameter_coords(net);
    let coords: Vec<(usize, bool, usize)> = if all_coords.len() <= max_coords.max(1) {
        all_coords
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6eec);
        sample(&mut rng, all_coords.len(), max_coords)
            .into_iter()
            .map(|i| all_coords[i])
            .collect()
    };

    let mut probe = net.clone();
    let mut max_rel_error: f64 = 0.0;
    let mut checked = 0usize;
    let mut excluded = 0usize;
    for coord in coords {
        nudge(&mut probe, coord, eps);
        let plus = probe.forward_full(batch)?;
        let (loss_plus, _) = softmax_cross_entropy(plus.logits(), labels)?;
        nudge(&mut probe, coord, -2.0 * eps);
        let minus = probe.forward_full(batch)?;
        let (loss_minus, _) = softmax_cross_entropy(minus.logits(), labels)?;
        nudge(&mut probe, coord, eps);

        if plus.kink_signature() != minus.kink_signature() {
            excluded += 1;
            continue;
        }
        let numeric = (loss_plus - loss_minus) / (2.0 * eps);
        let grads = &analytic[coord.0].as_ref().expect("parametric");
        let analytic_v = if coord.1 {
            grads.1[coord.2]
        } else {
            grads.0[coord.2]
        };
        let rel = (analytic_v - numeric).abs()
            / analytic_v.abs().max(numeric.abs()).max(1e-8);
        max_rel_error = max_rel_error.max(rel);
        checked += 1;
    }
    Ok(GradCheckReport {
        max_rel_error,
        checked,
        excluded,
    })
}
