//! Run configuration, encoder pretraining and training-run directories.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::env::{EnvOptions, EpisodeConfig, KeyValues, PushEnv, RewardConfig, Scenario};
use crate::error::{CuraError, Result};
use crate::nn::Checkpoint;
use crate::perception::{pool_window, pretrain_encoder, MapEncoder, OcclusionMode, PretrainReport, VaeConfig};
use crate::seeding::{derive_seed, stream};
use crate::trainer::{latest_checkpoint, train_loop, CuraHyperparams, IterationStats, TrainSetup, Trainer};

use super::variants::Variant;

pub const CONFIG_FILE: &str = "config.txt";
pub const VERSION_FILE: &str = "version.txt";
pub const ENCODER_FILE: &str = "encoder.ckpt";
pub const PRETRAIN_REPORT_FILE: &str = "pretrain_report.txt";

/// Text written to `version.txt` in every output directory.
pub fn version_stamp() -> String {
    format!(
        "package = cura-core {}\nprofile = {}\n",
        env!("CARGO_PKG_VERSION"),
        if cfg!(debug_assertions) { "debug" } else { "release" }
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncoderSource {
    Checkpoint(PathBuf),
    AveragePool,
}

impl fmt::Display for EncoderSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderSource::Checkpoint(p) => write!(f, "{}", p.display()),
            EncoderSource::AveragePool => f.write_str("average_pool"),
        }
    }
}

impl FromStr for EncoderSource {
    type Err = CuraError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "" => Err(CuraError::config("encoder", "empty value")),
            "average_pool" => Ok(EncoderSource::AveragePool),
            p => Ok(EncoderSource::Checkpoint(PathBuf::from(p))),
        }
    }
}

impl EncoderSource {
    pub fn load(&self) -> Result<MapEncoder> {
        match self {
            EncoderSource::AveragePool => Ok(MapEncoder::AveragePool),
            EncoderSource::Checkpoint(p) => MapEncoder::from_checkpoint(Checkpoint::load(p)?),
        }
    }
}

/// Fully resolved description of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub setup: TrainSetup,
    pub encoder: EncoderSource,
}

impl RunConfig {
    /// Layers `kv` over the defaults, then applies the variant's flags. The
    /// variant always decides sensing, latent use, base-only mode and the
    /// cost weights. Training defaults to the mixed scenario.
    pub fn resolve(variant: Variant, kv: &KeyValues, seed: u64) -> Result<Self> {
        let mut episode = EpisodeConfig {
            scenario: Scenario::Mixed,
            ..EpisodeConfig::default()
        };
        episode.apply(kv)?;
        let mut reward = RewardConfig::default();
        reward.apply(kv)?;
        let mut hp = CuraHyperparams::default();
        hp.apply(kv)?;
        let spec = variant.spec();
        hp.lambda_r = spec.lambda_r;
        hp.lambda_u = spec.lambda_u;
        let mut encoder = EncoderSource::AveragePool;
        kv.set(&mut encoder, "encoder")?;
        Ok(RunConfig {
            variant,
            setup: TrainSetup {
                episode,
                reward,
                env: spec.env_options(),
                hp,
                seed,
            },
            encoder,
        })
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.insert("variant", self.variant);
        kv.insert("seed", self.setup.seed);
        kv.insert("encoder", &self.encoder);
        self.setup.episode.write_into(&mut kv);
        self.setup.reward.write_into(&mut kv);
        self.setup.hp.write_into(&mut kv);
        kv
    }

    /// Reads a run directory's resolved config; the encoder is the copy
    /// stored in the directory.
    pub fn from_run_dir(dir: &Path) -> Result<Self> {
        let kv = KeyValues::load(&dir.join(CONFIG_FILE))?;
        let variant: Variant = kv
            .get("variant")
            .ok_or_else(|| CuraError::config("variant", "missing from run config"))?
            .parse()?;
        let mut seed = 0u64;
        kv.set(&mut seed, "seed")?;
        let mut cfg = RunConfig::resolve(variant, &kv, seed)?;
        cfg.encoder = EncoderSource::Checkpoint(dir.join(ENCODER_FILE));
        Ok(cfg)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CuraError::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CuraError::io(path, e))
}

/// Trains `cfg` into `out_dir`, resuming from the newest checkpoint there
/// when `resume` is set.
pub fn run_training(
    cfg: &RunConfig,
    out_dir: &Path,
    resume: bool,
    on_iteration: impl FnMut(&IterationStats),
) -> Result<Vec<IterationStats>> {
    create_dir(out_dir)?;
    let latest = if resume { latest_checkpoint(out_dir)? } else { None };
    let encoder = if latest.is_some() {
        EncoderSource::Checkpoint(out_dir.join(ENCODER_FILE)).load()?
    } else {
        cfg.encoder.load()?
    };
    cfg.to_key_values().save(&out_dir.join(CONFIG_FILE))?;
    write_file(&out_dir.join(VERSION_FILE), &version_stamp())?;
    encoder.to_checkpoint().save(&out_dir.join(ENCODER_FILE))?;

    let encoder = Arc::new(encoder);
    let mut trainer = match latest {
        Some((_, dir)) => Trainer::resume(cfg.setup.clone(), encoder, &dir)?,
        None => Trainer::new(cfg.setup.clone(), encoder)?,
    };
    train_loop(&mut trainer, out_dir, cfg.setup.hp.iterations, on_iteration)
}

/// Settings of encoder pretraining.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainSetup {
    pub episode: EpisodeConfig,
    pub episodes: usize,
    /// Keep one map window every this many steps.
    pub sample_every: usize,
    pub vae: VaeConfig,
    pub seed: u64,
}

impl PretrainSetup {
    pub fn resolve(kv: &KeyValues, episodes: usize, seed: u64) -> Result<Self> {
        let mut episode = EpisodeConfig {
            scenario: Scenario::Mixed,
            ..EpisodeConfig::default()
        };
        episode.apply(kv)?;
        let mut vae = VaeConfig {
            seed,
            ..VaeConfig::default()
        };
        kv.set(&mut vae.latent_dim, "vae_latent_dim")?;
        kv.set(&mut vae.hidden, "vae_hidden")?;
        kv.set(&mut vae.epochs, "vae_epochs")?;
        kv.set(&mut vae.batch_size, "vae_batch_size")?;
        kv.set(&mut vae.learning_rate, "vae_lr")?;
        kv.set(&mut vae.kl_weight, "vae_kl_weight")?;
        kv.set(&mut vae.holdout_fraction, "vae_holdout_fraction")?;
        let mut sample_every = 2usize;
        kv.set(&mut sample_every, "sample_every")?;
        if episodes == 0 || sample_every == 0 {
            return Err(CuraError::config("episodes/sample_every", "must be positive"));
        }
        Ok(PretrainSetup {
            episode,
            episodes,
            sample_every,
            vae,
            seed,
        })
    }
}

/// Pooled local map windows gathered with a scripted forward-pushing
/// controller under realistic occlusion.
pub fn collect_map_windows(setup: &PretrainSetup) -> Result<Vec<Vec<f64>>> {
    let opts = EnvOptions {
        occlusion: OcclusionMode::Realistic,
        use_latent: false,
        base_only: false,
    };
    let per_episode = (0..setup.episodes)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(setup.seed, &[stream::ENCODER, k as u64]);
            let mut env = PushEnv::new(
                setup.episode.clone(),
                RewardConfig::default(),
                opts,
                Arc::new(MapEncoder::AveragePool),
            )?;
            env.reset(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut windows = vec![pool_window(&env.map().local_window(&env.world().base))];
            let mut lateral = 0.0f64;
            while !env.is_done() {
                lateral = (lateral + rng.random_range(-0.3..0.3)).clamp(-1.0, 1.0);
                let a = [
                    rng.random_range(0.3..1.0),
                    0.3 * lateral,
                    rng.random_range(-0.2..0.4),
                    lateral,
                ];
                env.step(&a)?;
                if env.steps() % setup.sample_every == 0 {
                    windows.push(pool_window(&env.map().local_window(&env.world().base)));
                }
            }
            Ok(windows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_episode.into_iter().flatten().collect())
}

/// Pretrains the map encoder and writes `encoder.ckpt`, the report, the
/// resolved config and the version stamp into `out_dir`.
pub fn run_pretrain(setup: &PretrainSetup, kv: &KeyValues, out_dir: &Path) -> Result<PretrainReport> {
    create_dir(out_dir)?;
    let windows = collect_map_windows(setup)?;
    let (encoder, report) = pretrain_encoder(&windows, &setup.vae)?;
    encoder.to_checkpoint().save(&out_dir.join(ENCODER_FILE))?;
    let mut resolved = kv.clone();
    setup.episode.write_into(&mut resolved);
    resolved.insert("episodes", setup.episodes);
    resolved.insert("sample_every", setup.sample_every);
    resolved.insert("seed", setup.seed);
    resolved.insert("vae_latent_dim", setup.vae.latent_dim);
    resolved.insert("vae_hidden", setup.vae.hidden);
    resolved.insert("vae_epochs", setup.vae.epochs);
    resolved.insert("vae_batch_size", setup.vae.batch_size);
    resolved.insert("vae_lr", setup.vae.learning_rate);
    resolved.insert("vae_kl_weight", setup.vae.kl_weight);
    resolved.insert("vae_holdout_fraction", setup.vae.holdout_fraction);
    resolved.save(&out_dir.join(CONFIG_FILE))?;
    write_file(&out_dir.join(VERSION_FILE), &version_stamp())?;
    let mut r = KeyValues::default();
    r.insert("train_windows", report.train_windows);
    r.insert("holdout_windows", report.holdout_windows);
    r.insert("final_epoch_loss", report.final_epoch_loss);
    r.insert("holdout_mse", report.holdout_mse);
    r.insert("mean_image_mse", report.mean_image_mse);
    r.save(&out_dir.join(PRETRAIN_REPORT_FILE))?;
    Ok(report)
}
