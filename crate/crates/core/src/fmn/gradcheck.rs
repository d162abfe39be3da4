//! Central-difference check of `backward`.

use ndarray::ArrayView2;

use super::{FmnError, FmnModel};

/// Relative errors are `|a - n| / max(|a|, |n|, GRAD_FLOOR)`.
pub const GRAD_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Weights compared.
    pub checked: usize,
    /// Weights skipped: masked, or within `10 * step` of the L1 kink at 0.
    pub skipped: usize,
}

fn total_loss(model: &FmnModel, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<f64, FmnError> {
    let cache = model.forward(x)?;
    Ok(model.loss(&cache, y).total)
}

/// Compares every analytic weight gradient with `(L(w+h) - L(w-h)) / 2h`.
pub fn gradient_check(
    model: &FmnModel,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    step: f64,
) -> Result<GradCheck, FmnError> {
    let cache = model.forward(x)?;
    let grads = model.backward(&cache, y);
    let mut probe = model.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    let mut compare = |probe: &mut FmnModel,
                       get: &dyn Fn(&mut FmnModel) -> &mut f64,
                       analytic: f64,
                       masked: bool|
     -> Result<(), FmnError> {
        let w0 = *get(probe);
        if masked || w0.abs() < 10.0 * step {
            out.skipped += 1;
            return Ok(());
        }
        *get(probe) = w0 + step;
        let up = total_loss(probe, x, y)?;
        *get(probe) = w0 - step;
        let down = total_loss(probe, x, y)?;
        *get(probe) = w0;
        let numeric = (up - down) / (2.0 * step);
        let denom = analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
        let rel = (analytic - numeric).abs() / denom;
        // NaN must fail the check rather than vanish in `max`.
        out.max_rel_error = if rel.is_nan() { f64::INFINITY } else { out.max_rel_error.max(rel) };
        out.checked += 1;
        Ok(())
    };
    for (i, layer) in model.layers.iter().enumerate() {
        for (j, unit) in layer.units.iter().enumerate() {
            let (g1, g2) = &grads.units[i][j];
            for h in 0..unit.w1.len() {
                let masked = unit.mask.get(h).copied().unwrap_or(false);
                compare(&mut probe, &|m| &mut m.layers[i].units[j].w1[h], g1[h], masked)?;
            }
            for h in 0..unit.w2.len() {
                compare(&mut probe, &|m| &mut m.layers[i].units[j].w2[h], g2[h], false)?;
            }
        }
    }
    for h in 0..model.regression.len() {
        compare(&mut probe, &|m| &mut m.regression[h], grads.regression[h], false)?;
    }
    Ok(out)
}
