use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{FmnConfig, FmnError, FmnModel, LossBreakdown};

/// A batch skipped because its forward pass or gradient was not finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incident {
    pub epoch: usize,
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    /// Full-data loss after each epoch.
    pub epochs: Vec<LossBreakdown>,
    pub incidents: Vec<Incident>,
}

/// Mini-batch training. Batches come from a per-epoch shuffle drawn from a
/// stream seeded by the config seed (independent of the init stream).
pub fn train(
    config: &FmnConfig,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
) -> Result<(FmnModel, TrainTrace), FmnError> {
    let n = x.nrows();
    if n == 0 {
        return Err(FmnError::EmptyDataset);
    }
    let mut model = FmnModel::init(config, x.ncols())?;
    let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let targets = y.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5348_5546_464c_4531);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = TrainTrace {
        epochs: Vec::with_capacity(config.epochs),
        incidents: Vec::new(),
    };
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut applied = 0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let channels = cols
                .iter()
                .map(|c| idx.iter().map(|&r| c[r]).collect())
                .collect();
            let yb: Vec<f64> = idx.iter().map(|&r| targets[r]).collect();
            let cache = model.forward_channels(channels, idx.len());
            let grads = if cache.finite {
                let g = model.backward(&cache, &yb);
                let ok = g
                    .units
                    .iter()
                    .flatten()
                    .flat_map(|(a, b)| a.iter().chain(b.iter()))
                    .chain(g.regression.iter())
                    .all(|v| v.is_finite());
                ok.then_some(g)
            } else {
                None
            };
            match grads {
                Some(g) => {
                    model.step(&g);
                    applied += 1;
                }
                None => trace.incidents.push(Incident { epoch, batch: b }),
            }
        }
        if applied == 0 {
            return Err(FmnError::Collapsed { epoch });
        }
        let cache = model.forward_channels(cols.clone(), n);
        trace.epochs.push(model.loss(&cache, &targets));
    }
    model.trained = true;
    Ok((model, trace))
}
