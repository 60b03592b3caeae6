use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BenchError, Dataset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpConfig {
    pub hidden_units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Fraction of the best-validation epoch to train for; 1.0 keeps the
    /// best-validation weights.
    pub early_stop_fraction: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_units: 8,
            epochs: 60,
            learning_rate: 0.05,
            seed: 0,
            early_stop_fraction: 1.0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.hidden_units == 0 || self.epochs == 0 {
            return Err(BenchError::InvalidConfig(
                "hidden units and epochs must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(BenchError::InvalidConfig(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.early_stop_fraction > 0.0 && self.early_stop_fraction <= 1.0) {
            return Err(BenchError::InvalidConfig(format!(
                "early stop fraction must lie in (0, 1], got {}",
                self.early_stop_fraction
            )));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One-hidden-layer perceptron with sigmoid hidden and output units. Each
/// weight row carries its bias as the last entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    hidden: Vec<f64>,
    output: Vec<f64>,
}

impl Mlp {
    fn random(n_in: usize, n_hidden: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut init = |fan_in: usize, len: usize| -> Vec<f64> {
            let r = 1.0 / ((fan_in + 1) as f64).sqrt();
            (0..len).map(|_| rng.random_range(-r..r)).collect()
        };
        let hidden = init(n_in, n_hidden * (n_in + 1));
        let output = init(n_hidden, n_out * (n_hidden + 1));
        Self {
            n_in,
            n_hidden,
            n_out,
            hidden,
            output,
        }
    }

    fn is_finite(&self) -> bool {
        self.hidden
            .iter()
            .chain(&self.output)
            .all(|w| w.is_finite())
    }

    pub fn n_outputs(&self) -> usize {
        self.n_out
    }

    fn forward(&self, x: &[f64], h: &mut [f64], o: &mut [f64]) {
        let wi = self.n_in + 1;
        for (j, hj) in h.iter_mut().enumerate() {
            let w = &self.hidden[j * wi..(j + 1) * wi];
            let z = w[self.n_in] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            *hj = sigmoid(z);
        }
        let wh = self.n_hidden + 1;
        for (k, ok) in o.iter_mut().enumerate() {
            let w = &self.output[k * wh..(k + 1) * wh];
            let z = w[self.n_hidden] + w.iter().zip(h.iter()).map(|(a, b)| a * b).sum::<f64>();
            *ok = sigmoid(z);
        }
    }

    /// Output activations, one per class.
    pub fn predict_posteriors(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.n_hidden];
        let mut o = vec![0.0; self.n_out];
        self.forward(x, &mut h, &mut o);
        o
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        crate::combiner::argmax(&self.predict_posteriors(x)).unwrap_or(0)
    }

    pub fn error_rate(&self, data: &Dataset) -> f64 {
        let wrong = (0..data.len())
            .filter(|&i| self.predict(data.pattern(i)) != data.labels()[i])
            .count();
        wrong as f64 / data.len() as f64
    }

    /// One pass of per-pattern gradient descent on squared error. Returns the
    /// summed loss.
    fn train_epoch(
        &mut self,
        data: &Dataset,
        order: &[usize],
        lr: f64,
        scratch: &mut Scratch,
    ) -> f64 {
        let Scratch { h, o, delta_o } = scratch;
        let wi = self.n_in + 1;
        let wh = self.n_hidden + 1;
        let mut loss = 0.0;
        for &i in order {
            let x = data.pattern(i);
            let label = data.labels()[i];
            self.forward(x, h, o);
            for k in 0..self.n_out {
                let target = if k == label { 1.0 } else { 0.0 };
                let err = o[k] - target;
                loss += 0.5 * err * err;
                delta_o[k] = err * o[k] * (1.0 - o[k]);
            }
            let output = &self.output;
            for (j, (w, &hj)) in self.hidden.chunks_mut(wi).zip(h.iter()).enumerate() {
                let back: f64 = (0..self.n_out)
                    .map(|k| delta_o[k] * output[k * wh + j])
                    .sum();
                let delta_h = back * hj * (1.0 - hj);
                for (wv, xv) in w.iter_mut().zip(x) {
                    *wv -= lr * delta_h * xv;
                }
                w[self.n_in] -= lr * delta_h;
            }
            for (w, &d) in self.output.chunks_mut(wh).zip(delta_o.iter()) {
                for (wv, hv) in w.iter_mut().zip(h.iter()) {
                    *wv -= lr * d * hv;
                }
                w[self.n_hidden] -= lr * d;
            }
        }
        loss
    }
}

struct Scratch {
    h: Vec<f64>,
    o: Vec<f64>,
    delta_o: Vec<f64>,
}

fn check_epoch(epoch: usize, loss: f64, model: &Mlp) -> Result<(), BenchError> {
    if loss.is_finite() && model.is_finite() {
        Ok(())
    } else {
        Err(BenchError::TrainingFailure { epoch })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedMlp {
    pub model: Mlp,
    /// Epoch with the lowest validation error, earliest on ties.
    pub best_epoch: usize,
    /// Epoch whose weights `model` holds.
    pub stopped_epoch: usize,
    pub validation_error: f64,
}

/// Trains for `config.epochs` epochs, keeping the weights after every epoch,
/// and returns the snapshot at `max(1, round(fraction * best_epoch))`.
pub fn train_mlp(
    train: &Dataset,
    validation: &Dataset,
    config: &MlpConfig,
) -> Result<TrainedMlp, BenchError> {
    config.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(BenchError::InvalidConfig(
            "empty training or validation set".into(),
        ));
    }
    if train.n_classes() < 2 || train.dim() != validation.dim() {
        return Err(BenchError::InvalidConfig("incompatible datasets".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Mlp::random(
        train.dim(),
        config.hidden_units,
        train.n_classes(),
        &mut rng,
    );
    let mut scratch = Scratch {
        h: vec![0.0; config.hidden_units],
        o: vec![0.0; train.n_classes()],
        delta_o: vec![0.0; train.n_classes()],
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut snapshots = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let loss = model.train_epoch(train, &order, config.learning_rate, &mut scratch);
        check_epoch(epoch, loss, &model)?;
        let val = model.error_rate(validation);
        if best.is_none_or(|(_, b)| val < b) {
            best = Some((epoch, val));
        }
        snapshots.push(model.clone());
    }
    let (best_epoch, _) = best.expect("at least one epoch");
    let stopped_epoch = ((config.early_stop_fraction * best_epoch as f64).round() as usize).max(1);
    let model = snapshots.swap_remove(stopped_epoch - 1);
    let validation_error = model.error_rate(validation);
    Ok(TrainedMlp {
        model,
        best_epoch,
        stopped_epoch,
        validation_error,
    })
}
