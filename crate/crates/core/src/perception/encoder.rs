//! Frozen map encoders turning a local confidence window into the latent `z`.
//!
//! The learned encoder is the inference half of a small VAE trained on
//! 4×-pooled (25×25) windows. A deterministic average-pool encoder is kept
//! as a fallback that needs no pretraining.

use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CuraError, Result};
use crate::nn::{Adam, Checkpoint, CheckpointKind, Mlp};
use crate::perception::confidence::{LocalWindow, WINDOW_SIZE};

pub const POOL: usize = 4;
pub const POOLED_SIZE: usize = WINDOW_SIZE / POOL;
pub const FALLBACK_BLOCK: usize = 10;
pub const FALLBACK_LATENT_DIM: usize = (WINDOW_SIZE / FALLBACK_BLOCK) * (WINDOW_SIZE / FALLBACK_BLOCK);

/// 4×4 pooling that keeps the entry of largest magnitude; between equal
/// magnitudes a hit (negative) wins over free space.
pub fn pool_window(window: &LocalWindow) -> Vec<f64> {
    let mut out = vec![0.0; POOLED_SIZE * POOLED_SIZE];
    for pr in 0..POOLED_SIZE {
        for pc in 0..POOLED_SIZE {
            let mut best = 0.0f64;
            for r in pr * POOL..(pr + 1) * POOL {
                for c in pc * POOL..(pc + 1) * POOL {
                    let v = window.get(r, c);
                    if v.abs() > best.abs() || (v.abs() == best.abs() && v < best) {
                        best = v;
                    }
                }
            }
            out[pr * POOLED_SIZE + pc] = best;
        }
    }
    out
}

fn average_pool(window: &LocalWindow) -> Vec<f64> {
    let blocks = WINDOW_SIZE / FALLBACK_BLOCK;
    let mut out = vec![0.0; blocks * blocks];
    let norm = 1.0 / (FALLBACK_BLOCK * FALLBACK_BLOCK) as f64;
    for r in 0..WINDOW_SIZE {
        for c in 0..WINDOW_SIZE {
            out[(r / FALLBACK_BLOCK) * blocks + c / FALLBACK_BLOCK] += window.get(r, c) * norm;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapEncoder {
    /// VAE inference network; `encode` returns the posterior mean.
    Vae { net: Mlp, latent_dim: usize },
    /// Raw 10×10 average-pool flatten.
    AveragePool,
}

impl MapEncoder {
    pub fn latent_dim(&self) -> usize {
        match self {
            MapEncoder::Vae { latent_dim, .. } => *latent_dim,
            MapEncoder::AveragePool => FALLBACK_LATENT_DIM,
        }
    }

    pub fn encode(&self, window: &LocalWindow) -> Vec<f64> {
        match self {
            MapEncoder::Vae { net, latent_dim } => {
                let pooled = pool_window(window);
                let mut out = net.forward(&pooled).expect("encoder input is always 625 wide");
                out.truncate(*latent_dim);
                out
            }
            MapEncoder::AveragePool => average_pool(window),
        }
    }

    pub fn encode_pooled(&self, pooled: &[f64]) -> Result<Vec<f64>> {
        match self {
            MapEncoder::Vae { net, latent_dim } => {
                let mut out = net.forward(pooled)?;
                out.truncate(*latent_dim);
                Ok(out)
            }
            MapEncoder::AveragePool => Err(CuraError::config(
                "encoder",
                "the average-pool encoder works on full windows",
            )),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        match self {
            MapEncoder::Vae { net, latent_dim } => Checkpoint {
                kind: CheckpointKind::MapEncoder,
                sizes: net.layer_sizes().to_vec(),
                params: net.params().to_vec(),
                extra: vec![0.0, *latent_dim as f64],
            },
            MapEncoder::AveragePool => Checkpoint {
                kind: CheckpointKind::MapEncoder,
                sizes: vec![],
                params: vec![],
                extra: vec![1.0, FALLBACK_LATENT_DIM as f64],
            },
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let ck = ck.expect_kind(CheckpointKind::MapEncoder)?;
        match ck.extra.first().copied() {
            Some(t) if t == 0.0 => {
                let latent_dim = *ck.extra.get(1).ok_or_else(|| CuraError::Checkpoint("missing latent dim".into()))? as usize;
                let net = Mlp::from_params(&ck.sizes, ck.params)?;
                if net.output_dim() != 2 * latent_dim {
                    return Err(CuraError::Checkpoint("encoder output width mismatch".into()));
                }
                Ok(MapEncoder::Vae { net, latent_dim })
            }
            Some(t) if t == 1.0 => Ok(MapEncoder::AveragePool),
            _ => Err(CuraError::Checkpoint("unknown encoder tag".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub kl_weight: f64,
    /// Fraction of windows held out for the reconstruction report.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            latent_dim: 32,
            hidden: 128,
            epochs: 8,
            batch_size: 64,
            learning_rate: 1e-3,
            kl_weight: 1.0,
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    pub train_windows: usize,
    pub holdout_windows: usize,
    pub final_epoch_loss: f64,
    /// Per-element MSE of decoding the posterior mean on held-out windows.
    pub holdout_mse: f64,
    /// Per-element MSE of predicting the training mean image.
    pub mean_image_mse: f64,
}

/// Variational autoencoder over pooled windows.
#[derive(Debug, Clone)]
pub struct Vae {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub latent_dim: usize,
}

/// Loss and parameter gradients of one minibatch for a fixed noise draw.
pub struct VaeGrads {
    pub loss: f64,
    pub encoder: Vec<f64>,
    pub decoder: Vec<f64>,
}

impl Vae {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, cfg: &VaeConfig, rng: &mut R) -> Self {
        Vae {
            encoder: Mlp::new(&[input_dim, cfg.hidden, 2 * cfg.latent_dim], 0.1, rng),
            decoder: Mlp::new(&[cfg.latent_dim, cfg.hidden, input_dim], 1.0, rng),
            latent_dim: cfg.latent_dim,
        }
    }

    /// Batch-mean of `‖x̂ − x‖² + β·KL(q(z|x) ‖ N(0, I))` with `z = μ + σ·ε`.
    pub fn loss_and_grad(&self, x: ArrayView2<'_, f64>, noise: ArrayView2<'_, f64>, kl_weight: f64) -> Result<VaeGrads> {
        let l = self.latent_dim;
        let b = x.nrows() as f64;
        let (enc_out, enc_cache) = self.encoder.forward_batch(x)?;
        let mu = enc_out.slice(s![.., ..l]);
        let logvar = enc_out.slice(s![.., l..]);
        let std = logvar.mapv(|v| (0.5 * v).exp());
        let z = &mu + &(&std * &noise);
        let (recon, dec_cache) = self.decoder.forward_batch(z.view())?;

        let diff = &recon - &x;
        let recon_loss = diff.iter().map(|d| d * d).sum::<f64>();
        let kl = mu
            .iter()
            .zip(logvar.iter())
            .map(|(m, lv)| -0.5 * (1.0 + lv - m * m - lv.exp()))
            .sum::<f64>();
        let loss = (recon_loss + kl_weight * kl) / b;

        let mut g_dec = vec![0.0; self.decoder.num_params()];
        let d_recon = diff.mapv(|d| 2.0 * d / b);
        let dz = self.decoder.backward(&dec_cache, d_recon.view(), &mut g_dec)?;

        let mut d_enc = Array2::zeros(enc_out.raw_dim());
        for r in 0..x.nrows() {
            for k in 0..l {
                let (m, lv) = (mu[[r, k]], logvar[[r, k]]);
                d_enc[[r, k]] = dz[[r, k]] + kl_weight * m / b;
                d_enc[[r, l + k]] = dz[[r, k]] * noise[[r, k]] * 0.5 * std[[r, k]]
                    + kl_weight * 0.5 * (lv.exp() - 1.0) / b;
            }
        }
        let mut g_enc = vec![0.0; self.encoder.num_params()];
        self.encoder.backward(&enc_cache, d_enc.view(), &mut g_enc)?;
        Ok(VaeGrads {
            loss,
            encoder: g_enc,
            decoder: g_dec,
        })
    }

    /// Decodes the posterior mean.
    pub fn reconstruct(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let (enc_out, _) = self.encoder.forward_batch(x)?;
        let mu = enc_out.slice(s![.., ..self.latent_dim]).to_owned();
        Ok(self.decoder.forward_batch(mu.view())?.0)
    }

    pub fn freeze(self) -> MapEncoder {
        MapEncoder::Vae {
            net: self.encoder,
            latent_dim: self.latent_dim,
        }
    }
}

fn rows_to_matrix(rows: &[&Vec<f64>], width: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows.len(), width));
    for (r, row) in rows.iter().enumerate() {
        m.row_mut(r).assign(&ndarray::ArrayView1::from(row.as_slice()));
    }
    m
}

/// Trains a VAE on pooled windows and returns its frozen encoder.
pub fn pretrain_encoder(pooled_windows: &[Vec<f64>], cfg: &VaeConfig) -> Result<(MapEncoder, PretrainReport)> {
    if pooled_windows.is_empty() {
        return Err(CuraError::EmptyInput("pretraining needs at least one window"));
    }
    let dim = pooled_windows[0].len();
    if let Some(bad) = pooled_windows.iter().find(|w| w.len() != dim) {
        return Err(CuraError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..pooled_windows.len()).collect();
    order.shuffle(&mut rng);
    let n_hold = if pooled_windows.len() >= 10 {
        ((pooled_windows.len() as f64 * cfg.holdout_fraction).round() as usize).max(1)
    } else {
        0
    };
    let (holdout_idx, train_idx) = order.split_at(n_hold);
    let mut train_idx = train_idx.to_vec();

    let mut vae = Vae::new(dim, cfg, &mut rng);
    let mut adam_enc = Adam::new(vae.encoder.num_params(), cfg.learning_rate);
    let mut adam_dec = Adam::new(vae.decoder.num_params(), cfg.learning_rate);
    let mut final_epoch_loss = f64::NAN;
    for _ in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in train_idx.chunks(cfg.batch_size) {
            let rows: Vec<&Vec<f64>> = chunk.iter().map(|&i| &pooled_windows[i]).collect();
            let x = rows_to_matrix(&rows, dim);
            let noise = Array2::from_shape_fn((chunk.len(), vae.latent_dim), |_| rng.sample::<f64, _>(StandardNormal));
            let g = vae.loss_and_grad(x.view(), noise.view(), cfg.kl_weight)?;
            if !g.loss.is_finite() {
                return Err(CuraError::non_finite("VAE pretraining loss"));
            }
            adam_enc.step(vae.encoder.params_mut(), &g.encoder)?;
            adam_dec.step(vae.decoder.params_mut(), &g.decoder)?;
            total += g.loss;
            batches += 1;
        }
        final_epoch_loss = total / batches.max(1) as f64;
    }

    let mut mean_image = vec![0.0; dim];
    for &i in &train_idx {
        for (m, v) in mean_image.iter_mut().zip(&pooled_windows[i]) {
            *m += v;
        }
    }
    mean_image.iter_mut().for_each(|m| *m /= train_idx.len().max(1) as f64);

    let (mut holdout_mse, mut mean_image_mse) = (f64::NAN, f64::NAN);
    if !holdout_idx.is_empty() {
        let rows: Vec<&Vec<f64>> = holdout_idx.iter().map(|&i| &pooled_windows[i]).collect();
        let x = rows_to_matrix(&rows, dim);
        let recon = vae.reconstruct(x.view())?;
        let n = (rows.len() * dim) as f64;
        holdout_mse = (&recon - &x).iter().map(|d| d * d).sum::<f64>() / n;
        mean_image_mse = x
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&mean_image).map(|(a, m)| (a - m) * (a - m)).sum::<f64>())
            .sum::<f64>()
            / n;
    }
    let report = PretrainReport {
        train_windows: train_idx.len(),
        holdout_windows: holdout_idx.len(),
        final_epoch_loss,
        holdout_mse,
        mean_image_mse,
    };
    Ok((vae.freeze(), report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window_from(f: impl Fn(usize, usize) -> f64) -> LocalWindow {
        let mut data = vec![0.0; WINDOW_SIZE * WINDOW_SIZE];
        for r in 0..WINDOW_SIZE {
            for c in 0..WINDOW_SIZE {
                data[r * WINDOW_SIZE + c] = f(r, c);
            }
        }
        LocalWindow { data }
    }

    #[test]
    fn pooling_prefers_magnitude_then_hits() {
        let w = window_from(|r, c| match (r, c) {
            (0, 0) => 0.5,
            (1, 1) => -0.5,
            (5, 5) => 0.2,
            (4, 6) => 0.9,
            _ => 0.0,
        });
        let p = pool_window(&w);
        assert_eq!(p.len(), 625);
        assert_eq!(p[0], -0.5);
        assert_eq!(p[POOLED_SIZE + 1], 0.9);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn fallback_encoder_averages_blocks() {
        let w = window_from(|r, _| if r < 10 { 1.0 } else { 0.0 });
        let z = MapEncoder::AveragePool.encode(&w);
        assert_eq!(z.len(), 100);
        assert!(z[..10].iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(z[10..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            pretrain_encoder(&[], &VaeConfig::default()),
            Err(CuraError::EmptyInput(_))
        ));
    }

    fn net_params(v: &mut Vae, which: usize) -> &mut [f64] {
        if which == 0 {
            v.encoder.params_mut()
        } else {
            v.decoder.params_mut()
        }
    }

    #[test]
    fn vae_gradient_matches_finite_differences() {
        let cfg = VaeConfig {
            latent_dim: 3,
            hidden: 5,
            ..VaeConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut vae = Vae::new(6, &cfg, &mut rng);
        let x = Array2::from_shape_fn((4, 6), |(i, j)| ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6);
        let noise = Array2::from_shape_fn((4, 3), |(i, j)| ((i + 2 * j) % 3) as f64 - 1.0);
        let g = vae.loss_and_grad(x.view(), noise.view(), 0.7).unwrap();
        let h = 1e-5;
        for which in 0..2 {
            let n = if which == 0 { vae.encoder.num_params() } else { vae.decoder.num_params() };
            for k in 0..n {
                let eval = |vae: &Vae| vae.loss_and_grad(x.view(), noise.view(), 0.7).unwrap().loss;
                let orig = net_params(&mut vae, which)[k];
                net_params(&mut vae, which)[k] = orig + h;
                let up = eval(&vae);
                net_params(&mut vae, which)[k] = orig - h;
                let down = eval(&vae);
                net_params(&mut vae, which)[k] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = if which == 0 { g.encoder[k] } else { g.decoder[k] };
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                assert!(rel < 1e-4, "net {which} param {k}: fd {fd} vs {an}");
            }
        }
    }

    #[test]
    fn encoder_checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = VaeConfig { latent_dim: 4, hidden: 8, ..VaeConfig::default() };
        let enc = Vae::new(625, &cfg, &mut rng).freeze();
        let back = MapEncoder::from_checkpoint(enc.to_checkpoint()).unwrap();
        assert_eq!(back, enc);
        let fallback = MapEncoder::from_checkpoint(MapEncoder::AveragePool.to_checkpoint()).unwrap();
        assert_eq!(fallback, MapEncoder::AveragePool);
    }
}
