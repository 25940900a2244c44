//! A minimal dense auto-encoder whose latent codes are pulled toward N(0, I)
//! by the latent distance:
//!
//! ```text
//! for each batch X of K points:
//!     Z      = E(X)
//!     L_rec  = (1/K) Σ ‖D(Z_k) − X_k‖²
//!     L_lat  = c_N0 + (1/K) Σ √(‖Z_k‖² + c_N1) − (1/(2K²)) ΣΣ ‖Z_k − Z_k'‖
//!     L      = L_rec + λ L_lat
//!     Adam step on ∇L
//! ```

use rand::seq::SliceRandom;

use super::adam::{Adam, AdamConfig};
use super::mlp::{Activation, Mlp};
use crate::cloud::PointCloud;
use crate::energy::{latent_loss, latent_loss_gradient, XiEvaluator, XiMethod};
use crate::error::{Error, Result};
use crate::sampling::{sample_normal_cloud, Seed};

#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub data_dim: usize,
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    /// Final decoder activation: sigmoid for data in [0, 1], identity otherwise.
    pub output: Activation,
}

impl Architecture {
    pub fn encoder_widths(&self) -> Vec<usize> {
        std::iter::once(self.data_dim)
            .chain(self.hidden.iter().copied())
            .chain([self.latent_dim])
            .collect()
    }

    pub fn decoder_widths(&self) -> Vec<usize> {
        std::iter::once(self.latent_dim)
            .chain(self.hidden.iter().rev().copied())
            .chain([self.data_dim])
            .collect()
    }
}

/// Which terms drive the parameter updates. Both terms are always logged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// L_rec + λ L_lat (λ = 0 gives reconstruction only).
    Full,
    /// λ L_lat alone; the decoder receives no gradient.
    LatentOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub lambda: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: Seed,
    pub mode: LossMode,
    pub latent_method: XiMethod,
}

impl TrainConfig {
    pub fn new(arch: Architecture, seed: Seed) -> Self {
        Self {
            arch,
            lambda: 100.0,
            adam: AdamConfig::default(),
            epochs: 100,
            batch_size: 256,
            seed,
            mode: LossMode::Full,
            latent_method: XiMethod::QuadraticSurrogate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub adam: Adam,
    pub lambda: f64,
    pub step: u64,
    pub seed: Seed,
    pub evaluator: XiEvaluator,
}

/// Per-epoch means; `loss_global = loss_rec + λ·loss_lat` as computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub step: u64,
    pub loss_rec: f64,
    pub loss_lat: f64,
    pub loss_global: f64,
}

impl EpochLog {
    fn new(step: u64, loss_rec: f64, loss_lat: f64, lambda: f64) -> Self {
        Self {
            step,
            loss_rec,
            loss_lat,
            loss_global: loss_rec + lambda * loss_lat,
        }
    }

    pub const CSV_HEADER: &'static str = "step,loss_rec,loss_lat,loss_global";

    pub fn csv_row(&self) -> String {
        use crate::cloud::fmt_f64;
        format!(
            "{},{},{},{}",
            self.step,
            fmt_f64(self.loss_rec),
            fmt_f64(self.loss_lat),
            fmt_f64(self.loss_global)
        )
    }
}

impl TrainState {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let encoder = Mlp::new(
            &cfg.arch.encoder_widths(),
            Activation::Identity,
            cfg.seed.derive(1),
        )?;
        let decoder = Mlp::new(
            &cfg.arch.decoder_widths(),
            cfg.arch.output,
            cfg.seed.derive(2),
        )?;
        let n = encoder.n_params() + decoder.n_params();
        Ok(Self {
            encoder,
            decoder,
            adam: Adam::new(n, cfg.adam),
            lambda: cfg.lambda,
            step: 0,
            seed: cfg.seed,
            evaluator: XiEvaluator::new(cfg.arch.latent_dim, cfg.latent_method)?,
        })
    }

    pub fn n_params(&self) -> usize {
        self.encoder.n_params() + self.decoder.n_params()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let ne = self.encoder.n_params();
        if flat.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.n_params()
            )));
        }
        self.encoder.set_params(&flat[..ne])?;
        self.decoder.set_params(&flat[ne..])
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.encoder.input_dim()
    }
}

/// Codes E(X) and reconstructions D(E(X)) for a row-major batch.
pub fn dense_forward(state: &TrainState, batch: &PointCloud) -> Result<(PointCloud, PointCloud)> {
    if batch.dim() != state.data_dim() {
        return Err(Error::DimensionMismatch {
            left: batch.dim(),
            right: state.data_dim(),
        });
    }
    let enc = state.encoder.forward(batch.as_slice())?;
    let dec = state.decoder.forward(&enc.output)?;
    Ok((
        PointCloud::new(enc.output, state.latent_dim())?,
        PointCloud::new(dec.output, state.data_dim())?,
    ))
}

/// Parameter gradient (encoder then decoder, flat) for a loss whose partial
/// derivatives with respect to the codes and reconstructions are given.
pub fn dense_backward(
    state: &TrainState,
    batch: &PointCloud,
    grad_codes: &[f64],
    grad_recon: &[f64],
) -> Result<Vec<f64>> {
    if batch.dim() != state.data_dim() {
        return Err(Error::DimensionMismatch {
            left: batch.dim(),
            right: state.data_dim(),
        });
    }
    let enc = state.encoder.forward(batch.as_slice())?;
    let dec = state.decoder.forward(&enc.output)?;
    if grad_codes.len() != enc.output.len() || grad_recon.len() != dec.output.len() {
        return Err(Error::Shape("loss gradients do not match the batch".into()));
    }
    let (g_dec, through) = state.decoder.backward(&dec, grad_recon)?;
    let total: Vec<f64> = grad_codes
        .iter()
        .zip(&through)
        .map(|(a, b)| a + b)
        .collect();
    let (g_enc, _) = state.encoder.backward(&enc, &total)?;
    let mut g = g_enc.flatten();
    g.extend(g_dec.flatten());
    Ok(g)
}

/// Losses of one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub rec: f64,
    pub lat: f64,
    pub global: f64,
}

/// Losses and the gradient of the optimized objective for one batch.
pub fn batch_loss_and_gradient(
    state: &TrainState,
    batch: &PointCloud,
    mode: LossMode,
) -> Result<(BatchLoss, Vec<f64>)> {
    let (codes, recon) = dense_forward(state, batch)?;
    let k = batch.len() as f64;
    let rec = recon
        .as_slice()
        .iter()
        .zip(batch.as_slice())
        .map(|(r, x)| (r - x) * (r - x))
        .sum::<f64>()
        / k;
    let lat = latent_loss(&codes, &state.evaluator)?.total;
    let global = rec + state.lambda * lat;
    let rec_weight = match mode {
        LossMode::Full => 1.0,
        LossMode::LatentOnly => 0.0,
    };
    let grad_recon: Vec<f64> = recon
        .as_slice()
        .iter()
        .zip(batch.as_slice())
        .map(|(r, x)| rec_weight * 2.0 * (r - x) / k)
        .collect();
    let grad_codes: Vec<f64> = if state.lambda != 0.0 {
        latent_loss_gradient(&codes, &state.evaluator)?
            .into_iter()
            .map(|g| state.lambda * g)
            .collect()
    } else {
        vec![0.0; codes.as_slice().len()]
    };
    let grad = dense_backward(state, batch, &grad_codes, &grad_recon)?;
    Ok((BatchLoss { rec, lat, global }, grad))
}

fn gather(data: &PointCloud, idx: &[usize]) -> PointCloud {
    let mut out = Vec::with_capacity(idx.len() * data.dim());
    for &i in idx {
        out.extend_from_slice(data.point(i));
    }
    PointCloud::new(out, data.dim()).expect("finite rows")
}

fn mean_losses(state: &TrainState, data: &PointCloud, batch: usize) -> Result<(f64, f64)> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let (mut rec, mut lat, mut n) = (0.0, 0.0, 0.0);
    for chunk in idx.chunks(batch) {
        let b = gather(data, chunk);
        let (codes, recon) = dense_forward(state, &b)?;
        rec += recon
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(r, x)| (r - x) * (r - x))
            .sum::<f64>()
            / b.len() as f64;
        lat += latent_loss(&codes, &state.evaluator)?.total;
        n += 1.0;
    }
    Ok((rec / n, lat / n))
}

/// Train on `dataset` for `cfg.epochs` epochs of shuffled batches.
///
/// The log starts with a row at step 0 holding the untrained losses; each
/// following row holds the mean batch losses of one epoch, measured before
/// each batch's update.
pub fn xsvae_train(dataset: &PointCloud, cfg: &TrainConfig) -> Result<(TrainState, Vec<EpochLog>)> {
    let state = TrainState::new(cfg)?;
    train_from(state, dataset, cfg)
}

/// Continue training an existing state.
pub fn train_from(
    mut state: TrainState,
    dataset: &PointCloud,
    cfg: &TrainConfig,
) -> Result<(TrainState, Vec<EpochLog>)> {
    if dataset.dim() != state.data_dim() {
        return Err(Error::DimensionMismatch {
            left: dataset.dim(),
            right: state.data_dim(),
        });
    }
    if dataset.is_empty() || cfg.batch_size == 0 {
        return Err(Error::Shape(
            "training needs data and a positive batch size".into(),
        ));
    }
    let batch = cfg.batch_size.min(dataset.len());
    let (r0, l0) = mean_losses(&state, dataset, batch)?;
    let mut logs = vec![EpochLog::new(state.step, r0, l0, state.lambda)];
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut params = state.params();
    for epoch in 0..cfg.epochs {
        let mut rng = cfg.seed.derive(1000 + epoch as u64).rng();
        order.shuffle(&mut rng);
        let (mut rec, mut lat, mut n) = (0.0, 0.0, 0.0);
        for chunk in order.chunks_exact(batch) {
            let b = gather(dataset, chunk);
            let (loss, grad) = batch_loss_and_gradient(&state, &b, cfg.mode)?;
            if !(loss.global.is_finite() && grad.iter().all(|g| g.is_finite())) {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch}, step {}: rec {} lat {}",
                    state.step, loss.rec, loss.lat
                )));
            }
            state.adam.update(&mut params, &grad);
            state.set_params(&params)?;
            state.step += 1;
            rec += loss.rec;
            lat += loss.lat;
            n += 1.0;
        }
        logs.push(EpochLog::new(state.step, rec / n, lat / n, state.lambda));
    }
    Ok((state, logs))
}

/// Reconstruction loss and latent loss of `data`, the latter measured with
/// `evaluator` on the codes of the whole set at once.
pub fn evaluate(
    state: &TrainState,
    data: &PointCloud,
    evaluator: &XiEvaluator,
) -> Result<(f64, f64)> {
    let (codes, recon) = dense_forward(state, data)?;
    let rec = recon
        .as_slice()
        .iter()
        .zip(data.as_slice())
        .map(|(r, x)| (r - x) * (r - x))
        .sum::<f64>()
        / data.len() as f64;
    Ok((rec, latent_loss(&codes, evaluator)?.total))
}

/// Decode `n_samples` draws of N(0, I).
pub fn generate(state: &TrainState, n_samples: usize, seed: Seed) -> Result<PointCloud> {
    if n_samples == 0 {
        return Ok(PointCloud::empty(state.data_dim()));
    }
    let z = sample_normal_cloud(state.latent_dim(), n_samples, seed);
    let out = state.decoder.forward(z.as_slice())?;
    PointCloud::new(out.output, state.data_dim())
}
