//! Tunable parameter sets with preset defaults, optional TOML overrides and
//! final command-line overrides (in that precedence order).

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use emend_core::embeddings::CbowConfig;
use emend_core::nmt::NmtConfig;

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

macro_rules! overlay {
    ($target:expr, $src:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $src.$field { $target.$field = v; })+
    };
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CbowOverride {
    dim: Option<usize>,
    window: Option<usize>,
    epochs: Option<u32>,
    min_count: Option<u64>,
    negative: Option<usize>,
    lr: Option<f64>,
    seed: Option<u64>,
    threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CbowParams {
    pub dim: usize,
    pub window: usize,
    pub epochs: u32,
    pub min_count: u64,
    pub negative: usize,
    pub lr: f64,
    pub seed: u64,
    pub threads: usize,
}

impl CbowParams {
    pub fn preset(name: &str) -> Result<CbowParams> {
        let base = CbowConfig::default();
        let mut p = CbowParams {
            dim: base.dim,
            window: base.window,
            epochs: base.epochs,
            min_count: base.min_count,
            negative: base.negative,
            lr: base.initial_lr,
            seed: base.seed,
            threads: base.threads,
        };
        match name {
            "paper" => {}
            "desk" => {
                p.dim = 50;
                p.min_count = 5;
            }
            other => anyhow::bail!("unknown preset {other:?}"),
        }
        Ok(p)
    }

    pub fn overlay_file(&mut self, path: Option<&Path>) -> Result<()> {
        if let Some(path) = path {
            let o: CbowOverride = read_toml(path)?;
            overlay!(self, o, dim, window, epochs, min_count, negative, lr, seed, threads);
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn overlay_cli(
        &mut self,
        dim: Option<usize>,
        window: Option<usize>,
        epochs: Option<u32>,
        min_count: Option<u64>,
        negative: Option<usize>,
        lr: Option<f64>,
        seed: Option<u64>,
        threads: Option<usize>,
    ) {
        let o = CbowOverride {
            dim,
            window,
            epochs,
            min_count,
            negative,
            lr,
            seed,
            threads,
        };
        overlay!(self, o, dim, window, epochs, min_count, negative, lr, seed, threads);
    }

    pub fn into_config(self) -> CbowConfig {
        CbowConfig {
            dim: self.dim,
            window: self.window,
            epochs: self.epochs,
            min_count: self.min_count,
            negative: self.negative,
            initial_lr: self.lr,
            seed: self.seed,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ExtractOverride {
    min_freq: Option<u64>,
    min_length: Option<usize>,
    k: Option<usize>,
    max_dist: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExtractParams {
    pub min_freq: u64,
    pub min_length: usize,
    pub k: usize,
    pub max_dist: usize,
}

impl Default for ExtractParams {
    fn default() -> ExtractParams {
        ExtractParams {
            min_freq: 1,
            min_length: 1,
            k: 10,
            max_dist: 3,
        }
    }
}

impl ExtractParams {
    pub fn overlay_file(&mut self, path: Option<&Path>) -> Result<()> {
        if let Some(path) = path {
            let o: ExtractOverride = read_toml(path)?;
            overlay!(self, o, min_freq, min_length, k, max_dist);
        }
        Ok(())
    }

    pub fn overlay_cli(
        &mut self,
        min_freq: Option<u64>,
        min_length: Option<usize>,
        k: Option<usize>,
        max_dist: Option<usize>,
    ) {
        let o = ExtractOverride {
            min_freq,
            min_length,
            k,
            max_dist,
        };
        overlay!(self, o, min_freq, min_length, k, max_dist);
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NmtOverride {
    steps: Option<usize>,
    batch: Option<usize>,
    hidden: Option<usize>,
    embed: Option<usize>,
    layers: Option<usize>,
    lr: Option<f64>,
    lr_decay: Option<f64>,
    plateau_window: Option<usize>,
    min_improvement: Option<f64>,
    dropout: Option<f64>,
    clip: Option<f64>,
    holdout: Option<f64>,
    seed: Option<u64>,
    threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct NmtParams {
    pub steps: usize,
    pub batch: usize,
    pub hidden: usize,
    pub embed: usize,
    pub layers: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub plateau_window: usize,
    pub min_improvement: f64,
    pub dropout: f64,
    pub clip: f64,
    pub holdout: f64,
    pub seed: u64,
    pub threads: usize,
}

impl NmtParams {
    pub fn preset(name: &str) -> Result<NmtParams> {
        let base = match name {
            "desk" => NmtConfig::desk(),
            "paper" => NmtConfig::paper(),
            other => anyhow::bail!("unknown preset {other:?}"),
        };
        Ok(NmtParams {
            steps: base.steps,
            batch: base.batch_size,
            hidden: base.hidden,
            embed: base.embed,
            layers: base.layers,
            lr: base.initial_lr,
            lr_decay: base.lr_decay,
            plateau_window: base.plateau_window,
            min_improvement: base.min_improvement,
            dropout: base.dropout,
            clip: base.clip_norm,
            holdout: base.holdout_fraction,
            seed: base.seed,
            threads: base.threads,
        })
    }

    pub fn overlay_file(&mut self, path: Option<&Path>) -> Result<()> {
        if let Some(path) = path {
            let o: NmtOverride = read_toml(path)?;
            overlay!(
                self, o, steps, batch, hidden, embed, layers, lr, lr_decay, plateau_window,
                min_improvement, dropout, clip, holdout, seed, threads
            );
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn overlay_cli(
        &mut self,
        steps: Option<usize>,
        batch: Option<usize>,
        hidden: Option<usize>,
        embed: Option<usize>,
        layers: Option<usize>,
        lr: Option<f64>,
        dropout: Option<f64>,
        clip: Option<f64>,
        holdout: Option<f64>,
        seed: Option<u64>,
        threads: Option<usize>,
    ) {
        let o = NmtOverride {
            steps,
            batch,
            hidden,
            embed,
            layers,
            lr,
            lr_decay: None,
            plateau_window: None,
            min_improvement: None,
            dropout,
            clip,
            holdout,
            seed,
            threads,
        };
        overlay!(
            self, o, steps, batch, hidden, embed, layers, lr, dropout, clip, holdout, seed,
            threads
        );
    }

    pub fn into_config(self) -> NmtConfig {
        NmtConfig {
            hidden: self.hidden,
            embed: self.embed,
            layers: self.layers,
            steps: self.steps,
            batch_size: self.batch,
            initial_lr: self.lr,
            lr_decay: self.lr_decay,
            plateau_window: self.plateau_window,
            min_improvement: self.min_improvement,
            clip_norm: self.clip,
            dropout: self.dropout,
            seed: self.seed,
            holdout_fraction: self.holdout,
            checkpoint_every: None,
            checkpoint_dir: None,
            log_every: 0,
            log: emend_core::nmt::LogSink::Quiet,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SynthesizeOverride {
    tokens: Option<usize>,
    sentence_len: Option<usize>,
    zipf: Option<f64>,
    successors: Option<usize>,
    chain_weight: Option<f64>,
    corrupt_prob: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct SynthesizeParams {
    pub tokens: usize,
    pub sentence_len: usize,
    pub zipf: f64,
    pub successors: usize,
    pub chain_weight: f64,
    pub corrupt_prob: f64,
    pub seed: u64,
}

impl Default for SynthesizeParams {
    fn default() -> SynthesizeParams {
        SynthesizeParams {
            tokens: 200_000,
            sentence_len: 10,
            zipf: 1.0,
            successors: 12,
            chain_weight: 0.85,
            corrupt_prob: 0.2,
            seed: 1,
        }
    }
}

impl SynthesizeParams {
    pub fn overlay_file(&mut self, path: Option<&Path>) -> Result<()> {
        if let Some(path) = path {
            let o: SynthesizeOverride = read_toml(path)?;
            overlay!(self, o, tokens, sentence_len, zipf, successors, chain_weight, corrupt_prob, seed);
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn overlay_cli(
        &mut self,
        tokens: Option<usize>,
        sentence_len: Option<usize>,
        zipf: Option<f64>,
        successors: Option<usize>,
        chain_weight: Option<f64>,
        corrupt_prob: Option<f64>,
        seed: Option<u64>,
    ) {
        let o = SynthesizeOverride {
            tokens,
            sentence_len,
            zipf,
            successors,
            chain_weight,
            corrupt_prob,
            seed,
        };
        overlay!(self, o, tokens, sentence_len, zipf, successors, chain_weight, corrupt_prob, seed);
    }
}
