//! BER sweeps and the CSV format they are written in.

use crate::data::{Batch, Generator};
use crate::error::{LabError, Result};
use crate::plan::SweepPlan;
use dccn::DccnModel;
use ofdm_core::channel::power_delay_profile;
use ofdm_core::expert::{count_errors, BerRecord, EqualizerKind, ExpertReceiver};
use ofdm_core::rng::Streams;
use ofdm_core::{BitBlock, Channel, ChannelKind, OfdmConfig};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

/// Anything that turns received frames into bits.
#[derive(Debug, Clone)]
pub enum Detector {
    Expert(EqualizerKind),
    Dccn(Box<DccnModel>),
}

impl Detector {
    /// Stable identifier written into result metadata.
    pub fn id(&self) -> String {
        match self {
            Detector::Expert(eq) => format!("expert:{eq}"),
            Detector::Dccn(model) => {
                let digest = Sha256::digest(model.checkpoint().to_bytes());
                let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
                format!("dccn:{}:{hex}", model.checkpoint().kind)
            }
        }
    }

    /// Checks that the detector can run on frames built with `cfg`.
    pub fn check(&self, cfg: &OfdmConfig) -> Result<()> {
        if let Detector::Dccn(model) = self {
            let own = &model.checkpoint().config.ofdm;
            if own != cfg {
                return Err(LabError::Usage(format!(
                    "model expects m={} frames, data use m={} (or a different frame layout)",
                    own.mod_order, cfg.mod_order
                )));
            }
        }
        Ok(())
    }

    /// Detects every frame of `batch` received through `channel` at `snr_db`.
    /// `realizations` is only consulted by the perfect-CSI equalizer.
    pub fn detect(
        &self,
        cfg: &OfdmConfig,
        channel: &Channel,
        snr_db: f64,
        batch: &Batch,
        realizations: Option<&[ofdm_core::ChannelRealization]>,
    ) -> Result<BitBlock> {
        match self {
            Detector::Dccn(model) => Ok(model.receive(&batch.rx)?),
            Detector::Expert(EqualizerKind::Lmmse) => {
                let pdp = match channel.kind() {
                    ChannelKind::Awgn => vec![(0, 1.0)],
                    kind => power_delay_profile(kind, cfg)?,
                };
                let rx = ExpertReceiver::lmmse(cfg, &pdp, channel.noise_variance(snr_db))?;
                Ok(rx.receive(&batch.rx, None)?)
            }
            Detector::Expert(eq) => Ok(ExpertReceiver::new(cfg, *eq)?.receive(&batch.rx, realizations)?),
        }
    }
}

/// Stream family of one sweep point; depends only on the seed and the SNR.
pub fn point_streams(seed: u64, snr_db: f64) -> Streams {
    Streams::new(seed).child(snr_db.to_bits())
}

/// Scores one SNR point.
pub fn evaluate_point(
    sweep: &SweepPlan,
    generator: &Generator,
    detector: &Detector,
    snr_db: f64,
) -> Result<BerRecord> {
    let streams = point_streams(sweep.seed, snr_db);
    let mut record = BerRecord::new(snr_db, 0, 0);
    let chunk = sweep.chunk_frames.max(1);
    for (j, start) in (0..sweep.frames_per_point).step_by(chunk).enumerate() {
        let n = chunk.min(sweep.frames_per_point - start);
        let batch = generator.batch(&streams, j as u64, n, &[snr_db])?;
        let bits = detector.detect(
            generator.config(),
            generator.channel(),
            snr_db,
            &batch,
            Some(&batch.realizations),
        )?;
        record = record.merge(&count_errors(&batch.bits, &bits, snr_db)?);
    }
    Ok(record)
}

/// BER at every point of `sweep`, points evaluated in parallel. The result
/// does not depend on the number of worker threads.
pub fn evaluate(sweep: &SweepPlan, cfg: &OfdmConfig, detector: &Detector) -> Result<Vec<BerRecord>> {
    detector.check(cfg)?;
    let generator = Generator::new(cfg, sweep.channel, sweep.seed)?;
    sweep
        .snr_db
        .par_iter()
        .map(|&snr| evaluate_point(sweep, &generator, detector, snr))
        .collect()
}

pub const CSV_HEADER: &str = "snr_db,bits_tested,bit_errors,ber";

/// CSV text: `# key = value` metadata lines, the column header, one row per
/// record.
pub fn write_csv(records: &[BerRecord], meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k} = {v}");
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{},{},{},{:e}", r.snr_db, r.bits_tested, r.bit_errors, r.ber);
    }
    out
}

/// Parses CSV text written by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<(Vec<(String, String)>, Vec<BerRecord>)> {
    let mut meta = Vec::new();
    let mut records = Vec::new();
    let mut header_seen = false;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once(" = ") {
                meta.push((k.trim().to_string(), v.to_string()));
            }
            continue;
        }
        if !header_seen {
            if line != CSV_HEADER {
                return Err(LabError::format("BER CSV", format!("unexpected header `{line}`")));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || LabError::format("BER CSV", format!("bad row `{line}`"));
        if cols.len() != 4 {
            return Err(bad());
        }
        let snr: f64 = cols[0].parse().map_err(|_| bad())?;
        let bits: u64 = cols[1].parse().map_err(|_| bad())?;
        let errors: u64 = cols[2].parse().map_err(|_| bad())?;
        records.push(BerRecord::new(snr, bits, errors));
    }
    if !header_seen {
        return Err(LabError::format("BER CSV", "missing column header"));
    }
    Ok((meta, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let recs = vec![BerRecord::new(-1.0, 1000, 17), BerRecord::new(0.5, 2000, 0)];
        let meta = vec![("seed".to_string(), "4".to_string())];
        let text = write_csv(&recs, &meta);
        assert!(text.starts_with("# seed = 4\nsnr_db,bits_tested,bit_errors,ber\n-1,1000,17,1.7e-2\n"));
        let (m, back) = parse_csv(&text).unwrap();
        assert_eq!(m, meta);
        assert_eq!(back, recs);
        assert!(parse_csv("snr,bits\n").is_err());
        assert!(parse_csv(&text.replace("1000,17", "1000")).is_err());
    }

    #[test]
    fn noiseless_expert_is_error_free() {
        let cfg = OfdmConfig::default().with_mod_order(4);
        let sweep = SweepPlan::new(ChannelKind::Awgn, 2)
            .with_points(vec![60.0])
            .with_frames(20);
        let r = evaluate(&sweep, &cfg, &Detector::Expert(EqualizerKind::None)).unwrap();
        assert_eq!(r[0].bits_tested, 20 * 368 * 4);
        assert_eq!(r[0].bit_errors, 0);
    }

    #[test]
    fn points_do_not_depend_on_sweep_order() {
        let cfg = OfdmConfig::default().with_mod_order(2);
        let det = Detector::Expert(EqualizerKind::LsLinear);
        let a = SweepPlan::new(ChannelKind::Epa, 9)
            .with_points(vec![0.0, 5.0])
            .with_frames(30);
        let b = a.clone().with_points(vec![5.0, 0.0]);
        let ra = evaluate(&a, &cfg, &det).unwrap();
        let rb = evaluate(&b, &cfg, &det).unwrap();
        assert_eq!(ra[0], rb[1]);
        assert_eq!(ra[1], rb[0]);
    }
}
