//! Resolved run configuration: frame parameters, network options, training
//! and sweep plans. Config files hold one `key = value` per line with `#`
//! comments; unknown keys are rejected.

use crate::error::{LabError, Result};
use crate::plan::{SweepPlan, TrainPlan, STAGE1_OFFSETS_DB, STAGE2_OFFSETS_DB};
use dccn::{DccnConfig, EstInput, Variant};
use ofdm_core::{ChannelKind, OfdmConfig};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub dccn: DccnConfig,
    pub seed: u64,
    pub channel: ChannelKind,
    /// `None` selects the stage default (1200m or 4000m).
    pub max_episodes: Option<usize>,
    pub early_stop_window: usize,
    pub lr0: f64,
    pub lr_decay_rate: f64,
    pub lr_decay_steps: f64,
    pub batch_frames: usize,
    pub batches_per_episode: usize,
    /// `None` selects `3m` dB.
    pub base_snr_db: Option<f64>,
    pub stage1_offsets_db: Vec<f64>,
    pub stage2_offsets_db: Vec<f64>,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub snr_step_db: f64,
    pub frames_per_point: usize,
    pub chunk_frames: usize,
    /// `None` derives the offset from the calibrated signal power.
    pub ebno_offset_db: Option<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            dccn: DccnConfig::new(OfdmConfig::default(), false),
            seed: 0,
            channel: ChannelKind::Awgn,
            max_episodes: None,
            early_stop_window: 200,
            lr0: 1e-3,
            lr_decay_rate: 0.98,
            lr_decay_steps: 500.0,
            batch_frames: 64,
            batches_per_episode: 200,
            base_snr_db: None,
            stage1_offsets_db: STAGE1_OFFSETS_DB.to_vec(),
            stage2_offsets_db: STAGE2_OFFSETS_DB.to_vec(),
            snr_min_db: -10.0,
            snr_max_db: 29.0,
            snr_step_db: 1.0,
            frames_per_point: 2000,
            chunk_frames: 100,
            ebno_offset_db: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| LabError::Usage(format!("bad value `{value}` for `{key}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_opt<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn on_off(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(LabError::Usage(format!("`{key}` takes on/off, got `{value}`"))),
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or("auto".into(), T::to_string)
}

impl Settings {
    pub fn ofdm(&self) -> &OfdmConfig {
        &self.dccn.ofdm
    }

    pub fn mod_order(&self) -> usize {
        self.dccn.ofdm.mod_order
    }

    /// Sets one key; the accepted keys are exactly those [`render`](Self::render) prints.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let o = &mut self.dccn.ofdm;
        match key {
            "mod_order" => o.mod_order = parse(key, value)?,
            "n_fft" => o.n_fft = parse(key, value)?,
            "cp_len" => o.cp_len = parse(key, value)?,
            "sym_len" => o.sym_len = parse(key, value)?,
            "frame_syms" => o.frame_syms = parse(key, value)?,
            "guard_count" => o.guard_count = parse(key, value)?,
            "pilot_cells" => o.pilot_cells = parse(key, value)?,
            "data_cells" => o.data_cells = parse(key, value)?,
            "papr_limit_db" => o.papr_limit_db = parse(key, value)?,
            "sample_rate_hz" => o.sample_rate_hz = parse(key, value)?,
            "use_cp" => self.dccn.use_cp = on_off(key, value)?,
            "variant" => self.dccn.variant = value.parse::<Variant>()?,
            "est_input" => self.dccn.est_input = value.parse::<EstInput>()?,
            "lrelu_alpha" => self.dccn.lrelu_alpha = parse(key, value)?,
            "bn_momentum" => self.dccn.bn_momentum = parse(key, value)?,
            "norm_eps" => self.dccn.norm_eps = parse(key, value)?,
            "div_eps" => self.dccn.div_eps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "channel" => self.channel = value.parse()?,
            "max_episodes" => self.max_episodes = parse_opt(key, value)?,
            "early_stop_window" => self.early_stop_window = parse(key, value)?,
            "lr0" => self.lr0 = parse(key, value)?,
            "lr_decay_rate" => self.lr_decay_rate = parse(key, value)?,
            "lr_decay_steps" => self.lr_decay_steps = parse(key, value)?,
            "batch_frames" => self.batch_frames = parse(key, value)?,
            "batches_per_episode" => self.batches_per_episode = parse(key, value)?,
            "base_snr_db" => self.base_snr_db = parse_opt(key, value)?,
            "stage1_offsets_db" => self.stage1_offsets_db = parse_list(key, value)?,
            "stage2_offsets_db" => self.stage2_offsets_db = parse_list(key, value)?,
            "snr_min_db" => self.snr_min_db = parse(key, value)?,
            "snr_max_db" => self.snr_max_db = parse(key, value)?,
            "snr_step_db" => self.snr_step_db = parse(key, value)?,
            "frames_per_point" => self.frames_per_point = parse(key, value)?,
            "chunk_frames" => self.chunk_frames = parse(key, value)?,
            "ebno_offset_db" => self.ebno_offset_db = parse_opt(key, value)?,
            _ => return Err(LabError::Usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a config file's text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| LabError::Usage(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Every key with its resolved value, one `key = value` per line.
    pub fn render(&self) -> String {
        let o = self.ofdm();
        let d = &self.dccn;
        let rows: Vec<(&str, String)> = vec![
            ("mod_order", o.mod_order.to_string()),
            ("n_fft", o.n_fft.to_string()),
            ("cp_len", o.cp_len.to_string()),
            ("sym_len", o.sym_len.to_string()),
            ("frame_syms", o.frame_syms.to_string()),
            ("guard_count", o.guard_count.to_string()),
            ("pilot_cells", o.pilot_cells.to_string()),
            ("data_cells", o.data_cells.to_string()),
            ("papr_limit_db", o.papr_limit_db.to_string()),
            ("sample_rate_hz", o.sample_rate_hz.to_string()),
            ("use_cp", if d.use_cp { "on" } else { "off" }.to_string()),
            ("variant", d.variant.to_string()),
            ("est_input", d.est_input.to_string()),
            ("lrelu_alpha", d.lrelu_alpha.to_string()),
            ("bn_momentum", d.bn_momentum.to_string()),
            ("norm_eps", d.norm_eps.to_string()),
            ("div_eps", d.div_eps.to_string()),
            ("seed", self.seed.to_string()),
            ("channel", self.channel.to_string()),
            ("max_episodes", opt(&self.max_episodes)),
            ("early_stop_window", self.early_stop_window.to_string()),
            ("lr0", self.lr0.to_string()),
            ("lr_decay_rate", self.lr_decay_rate.to_string()),
            ("lr_decay_steps", self.lr_decay_steps.to_string()),
            ("batch_frames", self.batch_frames.to_string()),
            ("batches_per_episode", self.batches_per_episode.to_string()),
            ("base_snr_db", opt(&self.base_snr_db)),
            ("stage1_offsets_db", list(&self.stage1_offsets_db)),
            ("stage2_offsets_db", list(&self.stage2_offsets_db)),
            ("snr_min_db", self.snr_min_db.to_string()),
            ("snr_max_db", self.snr_max_db.to_string()),
            ("snr_step_db", self.snr_step_db.to_string()),
            ("frames_per_point", self.frames_per_point.to_string()),
            ("chunk_frames", self.chunk_frames.to_string()),
            ("ebno_offset_db", opt(&self.ebno_offset_db)),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Short SHA-256 of [`render`](Self::render).
    pub fn hash(&self) -> String {
        Sha256::digest(self.render().as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.dccn.validate()?;
        if !(self.snr_step_db > 0.0) || self.snr_max_db < self.snr_min_db {
            return Err(LabError::Usage(
                "SNR sweep needs min <= max and a positive step".into(),
            ));
        }
        Ok(())
    }

    fn train_common(&self, mut plan: TrainPlan, offsets: &[f64]) -> TrainPlan {
        if let Some(e) = self.max_episodes {
            plan.max_episodes = e;
        }
        if let Some(b) = self.base_snr_db {
            plan.base_snr_db = b;
        }
        plan.early_stop_window = self.early_stop_window;
        plan.lr0 = self.lr0;
        plan.lr_decay_rate = self.lr_decay_rate;
        plan.lr_decay_steps = self.lr_decay_steps;
        plan.batch_frames = self.batch_frames;
        plan.batches_per_episode = self.batches_per_episode;
        plan.snr_offsets_db = offsets.to_vec();
        plan
    }

    pub fn receiver_plan(&self) -> TrainPlan {
        self.train_common(
            TrainPlan::receiver(self.mod_order(), self.seed),
            &self.stage1_offsets_db,
        )
    }

    pub fn equalizer_plan(&self) -> TrainPlan {
        self.train_common(
            TrainPlan::equalizer(self.mod_order(), self.seed, self.channel),
            &self.stage2_offsets_db,
        )
    }

    pub fn sweep_plan(&self) -> SweepPlan {
        let count = ((self.snr_max_db - self.snr_min_db) / self.snr_step_db + 1e-9).floor() as usize + 1;
        let points = (0..count)
            .map(|i| self.snr_min_db + i as f64 * self.snr_step_db)
            .collect();
        let mut plan = SweepPlan::new(self.channel, self.seed)
            .with_points(points)
            .with_frames(self.frames_per_point);
        plan.chunk_frames = self.chunk_frames;
        plan
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_then_apply_is_identity() {
        let mut s = Settings::default();
        s.set("mod_order", "3").unwrap();
        s.set("max_episodes", "12").unwrap();
        s.set("variant", "f").unwrap();
        let mut t = Settings::default();
        t.apply_text(&s.render()).unwrap();
        assert_eq!(s, t);
        assert_eq!(s.hash(), t.hash());
        assert_ne!(s.hash(), Settings::default().hash());
    }

    #[test]
    fn unknown_and_malformed_lines_rejected() {
        let mut s = Settings::default();
        assert!(s.apply_text("learning_rate = 3\n").is_err());
        assert!(s.apply_text("seed 3\n").is_err());
        assert!(s.apply_text("seed = x\n").is_err());
        s.apply_text("# comment\n\nseed = 9 # trailing\nuse_cp = on\n")
            .unwrap();
        assert_eq!(s.seed, 9);
        assert!(s.dccn.use_cp);
    }

    #[test]
    fn default_sweep_and_plans() {
        let s = Settings::default();
        assert_eq!(s.sweep_plan().snr_db.len(), 40);
        let mut s = s;
        s.set("mod_order", "2").unwrap();
        s.set("channel", "epa").unwrap();
        assert_eq!(s.receiver_plan().max_episodes, 2400);
        assert_eq!(s.receiver_plan().base_snr_db, 6.0);
        assert_eq!(s.equalizer_plan().max_episodes, 8000);
        assert_eq!(s.equalizer_plan().channel, ChannelKind::Epa);
    }
}
