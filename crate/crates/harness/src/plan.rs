use ofdm_core::ChannelKind;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Basic receiver on AWGN.
    Receiver,
    /// Equalizer in front of a frozen receiver, on a fading channel.
    Equalizer,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Receiver => "receiver",
            Stage::Equalizer => "equalizer",
        })
    }
}

pub const STAGE1_OFFSETS_DB: [f64; 8] = [-3.0, 0.0, 0.0, 0.0, 0.0, 5.0, 5.0, 5.0];
pub const STAGE2_OFFSETS_DB: [f64; 8] = [-3.0, 0.0, 0.0, 3.0, 6.0, 9.0, 12.0, 17.0];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainPlan {
    pub stage: Stage,
    pub channel: ChannelKind,
    pub max_episodes: usize,
    pub early_stop_window: usize,
    pub lr0: f64,
    pub lr_decay_rate: f64,
    pub lr_decay_steps: f64,
    pub batch_frames: usize,
    pub batches_per_episode: usize,
    pub base_snr_db: f64,
    pub snr_offsets_db: Vec<f64>,
    pub seed: u64,
}

impl TrainPlan {
    /// Stage-1 defaults for modulation order `m`.
    pub fn receiver(m: usize, seed: u64) -> Self {
        Self {
            stage: Stage::Receiver,
            channel: ChannelKind::Awgn,
            max_episodes: 1200 * m,
            early_stop_window: 200,
            lr0: 1e-3,
            lr_decay_rate: 0.98,
            lr_decay_steps: 500.0,
            batch_frames: 64,
            batches_per_episode: 200,
            base_snr_db: 3.0 * m as f64,
            snr_offsets_db: STAGE1_OFFSETS_DB.to_vec(),
            seed,
        }
    }

    /// Stage-2 defaults for modulation order `m` on a fading `channel`.
    pub fn equalizer(m: usize, seed: u64, channel: ChannelKind) -> Self {
        Self {
            stage: Stage::Equalizer,
            channel,
            max_episodes: 4000 * m,
            snr_offsets_db: STAGE2_OFFSETS_DB.to_vec(),
            ..Self::receiver(m, seed)
        }
    }

    /// Exponential decay applied continuously in the step count.
    pub fn lr_at(&self, step: u64) -> f64 {
        self.lr0 * self.lr_decay_rate.powf(step as f64 / self.lr_decay_steps)
    }

    /// Channel SNR of each frame of a training batch: consecutive groups of
    /// `offsets.len()` frames cycle through the offsets.
    pub fn frame_snrs(&self) -> Vec<f64> {
        (0..self.batch_frames)
            .map(|i| self.base_snr_db + self.snr_offsets_db[i % self.snr_offsets_db.len()])
            .collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.snr_offsets_db.len() != 8 {
            return Err(format!(
                "expected 8 SNR offsets, got {}",
                self.snr_offsets_db.len()
            ));
        }
        if !(self.lr0 > 0.0) {
            return Err(format!("learning rate must be positive, got {}", self.lr0));
        }
        if self.batch_frames == 0 || self.batches_per_episode == 0 || self.max_episodes == 0 {
            return Err("batch size, batches per episode and episodes must be positive".into());
        }
        match (self.stage, self.channel.is_fading()) {
            (Stage::Receiver, true) => Err("the receiver stage trains on AWGN".into()),
            (Stage::Equalizer, false) => Err("the equalizer stage needs a fading channel".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub snr_db: Vec<f64>,
    pub frames_per_point: usize,
    /// Frames generated and detected together.
    pub chunk_frames: usize,
    pub channel: ChannelKind,
    pub seed: u64,
}

impl SweepPlan {
    pub fn new(channel: ChannelKind, seed: u64) -> Self {
        Self {
            snr_db: (-10..=29).map(f64::from).collect(),
            frames_per_point: 2000,
            chunk_frames: 100,
            channel,
            seed,
        }
    }

    pub fn with_points(mut self, snr_db: Vec<f64>) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn with_frames(mut self, frames: usize) -> Self {
        self.frames_per_point = frames;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learning_rate_schedule() {
        let plan = TrainPlan::receiver(1, 0);
        assert_eq!(plan.lr_at(0), 1e-3);
        assert!((plan.lr_at(1000) - 9.604e-4).abs() < 1e-15);
        assert!((plan.lr_at(500) - 9.8e-4).abs() < 1e-15);
    }

    #[test]
    fn stage_two_snr_multiset() {
        let plan = TrainPlan::equalizer(2, 0, ChannelKind::Epa);
        let snrs = plan.frame_snrs();
        assert_eq!(snrs.len(), 64);
        for group in snrs.chunks(8) {
            let mut offsets: Vec<f64> = group.iter().map(|s| s - 6.0).collect();
            offsets.sort_by(f64::total_cmp);
            assert_eq!(offsets, STAGE2_OFFSETS_DB);
        }
        assert_eq!(plan.max_episodes, 8000);
    }

    #[test]
    fn episode_data_volume() {
        // 200 batches of 64 frames of 8 symbols.
        let plan = TrainPlan::receiver(3, 0);
        assert_eq!(plan.batches_per_episode * plan.batch_frames * 8, 102_400);
        assert_eq!(plan.base_snr_db, 9.0);
    }

    #[test]
    fn default_sweep_has_forty_points() {
        let s = SweepPlan::new(ChannelKind::Awgn, 1);
        assert_eq!(s.snr_db.len(), 40);
        assert_eq!(s.snr_db[0], -10.0);
        assert_eq!(s.snr_db[39], 29.0);
    }

    #[test]
    fn validation() {
        let mut p = TrainPlan::receiver(1, 0);
        assert!(p.validate().is_ok());
        p.snr_offsets_db.pop();
        assert!(p.validate().is_err());
        let mut p = TrainPlan::receiver(1, 0);
        p.channel = ChannelKind::Flat;
        assert!(p.validate().is_err());
        assert!(TrainPlan::equalizer(1, 0, ChannelKind::Awgn).validate().is_err());
    }
}
