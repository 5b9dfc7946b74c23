use rand::seq::index::sample;

use super::model::{Cache, Model};
use super::tensor::map_image;
use crate::error::Result;
use crate::rng::{stream_rng, stream};
use crate::stmap::SpatialTemporalMap;

/// Layers above this many parameters are checked on a 1 % sample.
pub const FULL_CHECK_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|ga - gn| / max(|ga|, |gn|, 1e-8)` over checked parameters.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters skipped because a perturbation crossed a ReLU kink, a
    /// max-pool tie or the L1 kink.
    pub excluded: usize,
}

/// Which side of every kink the network sits on: ReLU inputs, pooling
/// winners and the sign of the residual.
fn kink_pattern(model: &Model, cache: &Cache, target: f64) -> (Vec<bool>, Vec<usize>, bool) {
    let mut relu = Vec::new();
    let mut pools = Vec::new();
    for (i, spec) in model.specs().iter().enumerate() {
        if spec.is_relu() {
            relu.extend(cache.acts[i].iter().map(|&v| v > 0.0));
        }
        pools.extend_from_slice(&cache.args[i]);
    }
    let out = model.head().offset + model.head().scale * cache.output();
    (relu, pools, out > target)
}

/// Compares backprop gradients of the L1 loss `|forward(map) - target|`
/// with central differences of step `delta`. A parameter whose `±delta`
/// perturbation changes the kink pattern sits at a non-differentiable
/// point and is excluded rather than compared.
pub fn gradient_check(
    model: &Model,
    map: &SpatialTemporalMap,
    target: f64,
    delta: f64,
) -> Result<GradCheck> {
    model.check_map(map)?;
    let image = map_image(map);
    let cache = model.forward_cached(&image);
    let base = kink_pattern(model, &cache, target);
    let out = model.head().offset + model.head().scale * cache.output();
    let mut grads = vec![0.0; model.param_count()];
    let sign = if out > target { 1.0 } else if out < target { -1.0 } else { 0.0 };
    model.backward(&cache, sign, &mut grads);

    let mut picks = Vec::new();
    for (layer, slot) in model.slots().iter().enumerate() {
        let r = slot.range();
        if r.len() > FULL_CHECK_LIMIT {
            let mut rng = stream_rng(layer as u64, stream::GRADCHECK, 0);
            let k = (r.len() / 100).max(1);
            picks.extend(sample(&mut rng, r.len(), k).into_iter().map(|i| r.start + i));
        } else {
            picks.extend(r);
        }
    }

    let mut probe = model.clone();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        excluded: 0,
    };
    for j in picks {
        let orig = probe.params()[j];
        let mut eval = |v: f64| {
            probe.params_mut()[j] = v;
            let c = probe.forward_cached(&image);
            let loss = (probe.head().offset + probe.head().scale * c.output() - target).abs();
            (loss, kink_pattern(&probe, &c, target))
        };
        let (lp, pp) = eval(orig + delta);
        let (lm, pm) = eval(orig - delta);
        probe.params_mut()[j] = orig;
        if pp != base || pm != base {
            report.excluded += 1;
            continue;
        }
        let gn = (lp - lm) / (2.0 * delta);
        let ga = grads[j];
        let rel = (ga - gn).abs() / ga.abs().max(gn.abs()).max(1e-8);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}
