//! Waveform files for exchanging received frames with external tools.
//!
//! A file is a UTF-8 header of `key = value` lines ended by a blank line,
//! followed by the samples as interleaved little-endian `f32` I/Q
//! (`frames * F * S` complex samples, frame-major) and then the label bits
//! packed MSB-first into bytes, in data-cell order, `m` bits per cell.
//!
//! The `pilots` key lists every pilot as `symbol:subcarrier` with the
//! subcarrier counted from the most negative frequency; data cells are all
//! remaining non-guard cells in symbol-major, ascending-subcarrier order.

use crate::data::Batch;
use crate::error::{LabError, Result};
use crate::eval::Detector;
use ofdm_core::expert::{count_errors, BerRecord};
use ofdm_core::{BitBlock, Channel, ChannelKind, Complex64, ComplexGrid, FrameLayout, OfdmConfig};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub const MAGIC: &str = "ofdm-waveforms 1";

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformFile {
    pub cfg: OfdmConfig,
    pub channel: ChannelKind,
    pub seed: u64,
    pub snr_db: f64,
    /// Calibrated mean transmit power the noise level refers to.
    pub reference_power: f64,
    /// `[frames, F, S]`, held at single precision.
    pub samples: ComplexGrid,
    pub labels: BitBlock,
}

fn to_single(z: Complex64) -> Complex64 {
    Complex64::new(z.re as f32 as f64, z.im as f32 as f64)
}

impl WaveformFile {
    /// Wraps a generated batch; samples are rounded to single precision.
    pub fn from_batch(
        batch: &Batch,
        cfg: &OfdmConfig,
        channel: &Channel,
        seed: u64,
        snr_db: f64,
    ) -> Result<Self> {
        let samples = batch.rx.as_slice().iter().copied().map(to_single).collect();
        Ok(Self {
            cfg: cfg.clone(),
            channel: channel.kind(),
            seed,
            snr_db,
            reference_power: channel.reference_power(),
            samples: ComplexGrid::from_complex(batch.rx.dims(), samples)?,
            labels: batch.bits.clone(),
        })
    }

    pub fn frames(&self) -> usize {
        self.labels.frames()
    }

    fn header(&self) -> Result<String> {
        let c = &self.cfg;
        let layout = FrameLayout::build(c)?;
        let mut h = format!("{MAGIC}\n");
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(h, "{k} = {v}");
        };
        kv("frames", &self.frames());
        kv("mod_order", &c.mod_order);
        kv("channel", &self.channel);
        kv("seed", &self.seed);
        kv("snr_db", &self.snr_db);
        kv("reference_power", &self.reference_power);
        kv("n_fft", &c.n_fft);
        kv("cp_len", &c.cp_len);
        kv("sym_len", &c.sym_len);
        kv("frame_syms", &c.frame_syms);
        kv("guard_count", &c.guard_count);
        kv("pilot_cells", &c.pilot_cells);
        kv("data_cells", &c.data_cells);
        kv(
            "pilot_value",
            &format!("{},{}", c.pilot_value.re, c.pilot_value.im),
        );
        kv("papr_limit_db", &c.papr_limit_db);
        kv("sample_rate_hz", &c.sample_rate_hz);
        kv("pilots", &pilot_map(&layout));
        kv("sample_format", &"cf32le");
        kv("label_format", &"packed-msb-first");
        h.push('\n');
        Ok(h)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = self.header()?.into_bytes();
        for v in self.samples.as_reals() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        for byte in self.labels.as_slice().chunks(8) {
            let mut b = 0u8;
            for (i, bit) in byte.iter().enumerate() {
                b |= bit << (7 - i);
            }
            out.push(b);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |d: String| LabError::format("waveform file", d);
        let split = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| bad("missing blank line after header".into()))?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not UTF-8".into()))?;
        let payload = &bytes[split + 2..];
        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("not a waveform file".into()));
        }
        let mut meta = BTreeMap::new();
        for line in lines {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| bad(format!("unreadable header line `{line}`")))?;
            if meta.insert(k.to_string(), v.to_string()).is_some() {
                return Err(bad(format!("duplicate key `{k}`")));
            }
        }
        let mut take = |k: &str| meta.remove(k).ok_or_else(|| bad(format!("missing key `{k}`")));
        fn num<V: std::str::FromStr>(k: &str, v: String) -> Result<V> {
            v.parse()
                .map_err(|_| LabError::format("waveform file", format!("bad value `{v}` for `{k}`")))
        }
        let frames: usize = num("frames", take("frames")?)?;
        let pv = take("pilot_value")?;
        let (re, im) = pv
            .split_once(',')
            .ok_or_else(|| bad(format!("bad pilot value `{pv}`")))?;
        let cfg = OfdmConfig {
            mod_order: num("mod_order", take("mod_order")?)?,
            n_fft: num("n_fft", take("n_fft")?)?,
            cp_len: num("cp_len", take("cp_len")?)?,
            sym_len: num("sym_len", take("sym_len")?)?,
            frame_syms: num("frame_syms", take("frame_syms")?)?,
            guard_count: num("guard_count", take("guard_count")?)?,
            pilot_cells: num("pilot_cells", take("pilot_cells")?)?,
            data_cells: num("data_cells", take("data_cells")?)?,
            pilot_value: Complex64::new(
                num("pilot_value", re.to_string())?,
                num("pilot_value", im.to_string())?,
            ),
            papr_limit_db: num("papr_limit_db", take("papr_limit_db")?)?,
            sample_rate_hz: num("sample_rate_hz", take("sample_rate_hz")?)?,
        };
        let channel: ChannelKind = take("channel")?.parse()?;
        let seed = num("seed", take("seed")?)?;
        let snr_db = num("snr_db", take("snr_db")?)?;
        let reference_power = num("reference_power", take("reference_power")?)?;
        let layout = FrameLayout::build(&cfg)?;
        let pilots = take("pilots")?;
        if pilots != pilot_map(&layout) {
            return Err(bad("pilot map differs from the layout this tool builds".into()));
        }
        for (k, want) in [("sample_format", "cf32le"), ("label_format", "packed-msb-first")] {
            let got = take(k)?;
            if got != want {
                return Err(bad(format!("unsupported {k} `{got}`")));
            }
        }
        if let Some(k) = meta.keys().next() {
            return Err(bad(format!("unknown key `{k}`")));
        }

        let n_samples = frames * cfg.frame_len();
        let n_bits = frames * cfg.data_cells * cfg.mod_order;
        let want = 8 * n_samples + n_bits.div_ceil(8);
        if payload.len() != want {
            return Err(bad(format!(
                "payload holds {} bytes, expected {want}",
                payload.len()
            )));
        }
        let (sample_bytes, label_bytes) = payload.split_at(8 * n_samples);
        let reals: Vec<f64> = sample_bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let samples = ComplexGrid::from_reals(&[frames, cfg.frame_syms, cfg.sym_len, 2], &reals)?;
        let bits: Vec<u8> = (0..n_bits)
            .map(|i| (label_bytes[i / 8] >> (7 - i % 8)) & 1)
            .collect();
        let labels = BitBlock::new(frames, cfg.data_cells, cfg.mod_order, bits)?;
        Ok(Self {
            cfg,
            channel,
            seed,
            snr_db,
            reference_power,
            samples,
            labels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn pilot_map(layout: &FrameLayout) -> String {
    layout
        .pilots()
        .iter()
        .map(|c| format!("{}:{}", c.symbol, c.subcarrier))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Scores `detector` on imported frames against the imported labels.
pub fn cross_validate(file: &WaveformFile, detector: &Detector) -> Result<BerRecord> {
    if let Detector::Dccn(model) = detector {
        if model.mod_order() != file.cfg.mod_order {
            return Err(LabError::Usage(format!(
                "waveforms carry m={} but the model was trained for m={}",
                file.cfg.mod_order,
                model.mod_order()
            )));
        }
    }
    detector.check(&file.cfg)?;
    if matches!(detector, Detector::Expert(ofdm_core::EqualizerKind::Perfect)) {
        return Err(LabError::Usage(
            "waveform files carry no channel state for the perfect equalizer".into(),
        ));
    }
    let channel = Channel::with_reference_power(file.channel, file.reference_power);
    let batch = Batch {
        bits: file.labels.clone(),
        rx: file.samples.clone(),
        realizations: Vec::new(),
    };
    let bits = detector.detect(&file.cfg, &channel, file.snr_db, &batch, None)?;
    Ok(count_errors(&file.labels, &bits, file.snr_db)?)
}
