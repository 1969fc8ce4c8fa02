//! `.dccn` checkpoint files.
//!
//! Layout: a UTF-8 header of `key = value` lines, one `node` line per graph
//! node (as printed by `Graph::describe`), one `param` line per parameter
//! block, a blank line, then every parameter block as little-endian `f32`
//! in declaration order. Loading rebuilds the graph from the metadata and
//! refuses files whose node or parameter lines differ from the rebuilt ones.

use crate::composite::build_composite;
use crate::config::{DccnConfig, EstInput, Variant};
use crate::error::{DccnError, Result};
use crate::receiver::build_receiver;
use cxnn::{Graph, Real};
use ofdm_core::{Complex64, OfdmConfig};
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

pub const MAGIC: &str = "dccn-checkpoint";
pub const VERSION: u32 = 1;
pub const EXTENSION: &str = "dccn";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Basic receiver alone.
    Receiver,
    /// Equalizer followed by a frozen receiver.
    Composite,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Receiver => "receiver",
            ModelKind::Composite => "composite",
        })
    }
}

impl FromStr for ModelKind {
    type Err = DccnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "receiver" => Ok(ModelKind::Receiver),
            "composite" => Ok(ModelKind::Composite),
            _ => Err(DccnError::Format(format!("unknown model kind `{s}`"))),
        }
    }
}

/// Builds the graph a checkpoint of `kind` holds.
pub fn build_model<T: Real>(kind: ModelKind, dc: &DccnConfig) -> Result<Graph<T>> {
    match kind {
        ModelKind::Receiver => build_receiver(dc),
        ModelKind::Composite => build_composite(dc),
    }
}

/// A trained network with everything needed to rebuild it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub config: DccnConfig,
    pub seed: u64,
    pub episodes: u64,
    pub graph: Graph<f32>,
}

impl Checkpoint {
    pub fn new(kind: ModelKind, config: DccnConfig, seed: u64, episodes: u64, graph: Graph<f32>) -> Self {
        Self {
            kind,
            config,
            seed,
            episodes,
            graph,
        }
    }

    fn header(&self) -> String {
        let c = &self.config;
        let o = &c.ofdm;
        let mut h = format!("{MAGIC} {VERSION}\n");
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(h, "{k} = {v}");
        };
        kv("kind", &self.kind);
        kv("seed", &self.seed);
        kv("episodes", &self.episodes);
        kv("mod_order", &o.mod_order);
        kv("use_cp", &c.use_cp);
        kv("variant", &c.variant);
        kv("est_input", &c.est_input);
        kv("lrelu_alpha", &c.lrelu_alpha);
        kv("bn_momentum", &c.bn_momentum);
        kv("norm_eps", &c.norm_eps);
        kv("div_eps", &c.div_eps);
        kv("n_fft", &o.n_fft);
        kv("cp_len", &o.cp_len);
        kv("sym_len", &o.sym_len);
        kv("frame_syms", &o.frame_syms);
        kv("guard_count", &o.guard_count);
        kv("pilot_cells", &o.pilot_cells);
        kv("data_cells", &o.data_cells);
        kv("pilot_re", &o.pilot_value.re);
        kv("pilot_im", &o.pilot_value.im);
        kv("papr_limit_db", &o.papr_limit_db);
        kv("sample_rate_hz", &o.sample_rate_hz);
        for line in self.graph.describe() {
            let _ = writeln!(h, "node {line}");
        }
        for p in self.graph.params() {
            let dims: Vec<String> = p.shape.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(h, "param {} [{}]", p.name, dims.join(","));
        }
        h.push('\n');
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header().into_bytes();
        for p in self.graph.params() {
            for v in &p.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let split = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| DccnError::Format("missing blank line after header".into()))?;
        let header = std::str::from_utf8(&bytes[..split + 1])
            .map_err(|_| DccnError::Format("header is not UTF-8".into()))?;
        let payload = &bytes[split + 2..];

        let mut lines = header.lines();
        let first = lines.next().unwrap_or_default();
        if first != format!("{MAGIC} {VERSION}") {
            return Err(DccnError::Format(format!("unsupported header `{first}`")));
        }
        let mut meta = BTreeMap::new();
        let (mut nodes, mut params) = (Vec::new(), Vec::new());
        for line in lines {
            if let Some(rest) = line.strip_prefix("node ") {
                nodes.push(rest.to_string());
            } else if let Some(rest) = line.strip_prefix("param ") {
                params.push(rest.to_string());
            } else if let Some((k, v)) = line.split_once(" = ") {
                if meta.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(DccnError::Format(format!("duplicate key `{k}`")));
                }
            } else {
                return Err(DccnError::Format(format!("unreadable header line `{line}`")));
            }
        }
        let mut take = |k: &str| {
            meta.remove(k)
                .ok_or_else(|| DccnError::Format(format!("missing key `{k}`")))
        };
        fn parse<V: FromStr>(k: &str, v: String) -> Result<V> {
            v.parse()
                .map_err(|_| DccnError::Format(format!("bad value `{v}` for `{k}`")))
        }
        let kind: ModelKind = take("kind")?.parse()?;
        let seed = parse("seed", take("seed")?)?;
        let episodes = parse("episodes", take("episodes")?)?;
        let ofdm = OfdmConfig {
            mod_order: parse("mod_order", take("mod_order")?)?,
            n_fft: parse("n_fft", take("n_fft")?)?,
            cp_len: parse("cp_len", take("cp_len")?)?,
            sym_len: parse("sym_len", take("sym_len")?)?,
            frame_syms: parse("frame_syms", take("frame_syms")?)?,
            guard_count: parse("guard_count", take("guard_count")?)?,
            pilot_cells: parse("pilot_cells", take("pilot_cells")?)?,
            data_cells: parse("data_cells", take("data_cells")?)?,
            pilot_value: Complex64::new(
                parse("pilot_re", take("pilot_re")?)?,
                parse("pilot_im", take("pilot_im")?)?,
            ),
            papr_limit_db: parse("papr_limit_db", take("papr_limit_db")?)?,
            sample_rate_hz: parse("sample_rate_hz", take("sample_rate_hz")?)?,
        };
        let config = DccnConfig {
            ofdm,
            use_cp: parse("use_cp", take("use_cp")?)?,
            variant: take("variant")?.parse::<Variant>()?,
            est_input: take("est_input")?.parse::<EstInput>()?,
            lrelu_alpha: parse("lrelu_alpha", take("lrelu_alpha")?)?,
            bn_momentum: parse("bn_momentum", take("bn_momentum")?)?,
            norm_eps: parse("norm_eps", take("norm_eps")?)?,
            div_eps: parse("div_eps", take("div_eps")?)?,
        };
        if let Some(k) = meta.keys().next() {
            return Err(DccnError::Format(format!("unknown key `{k}`")));
        }

        let mut graph = build_model::<f32>(kind, &config)
            .map_err(|e| DccnError::Mismatch(format!("metadata does not describe a buildable graph: {e}")))?;
        let mut ck = Checkpoint::new(kind, config, seed, episodes, Graph::new("_", &[1]));
        let want_nodes = graph.describe();
        if want_nodes.len() != nodes.len() {
            return Err(DccnError::Mismatch(format!(
                "file lists {} nodes, metadata builds {}",
                nodes.len(),
                want_nodes.len()
            )));
        }
        for (got, want) in nodes.iter().zip(&want_nodes) {
            if got != want {
                return Err(DccnError::Mismatch(format!(
                    "node `{got}` but metadata builds `{want}`"
                )));
            }
        }
        if params.len() != graph.params().len() {
            return Err(DccnError::Mismatch(format!(
                "file lists {} parameter blocks, graph has {}",
                params.len(),
                graph.params().len()
            )));
        }
        let total: usize = graph.params().iter().map(|p| p.len()).sum();
        if payload.len() != 4 * total {
            return Err(DccnError::Format(format!(
                "payload holds {} bytes, expected {}",
                payload.len(),
                4 * total
            )));
        }
        let mut floats = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        for (line, p) in params.iter().zip(graph.params_mut()) {
            let dims: Vec<String> = p.shape.iter().map(|d| d.to_string()).collect();
            let want = format!("{} [{}]", p.name, dims.join(","));
            if *line != want {
                return Err(DccnError::Mismatch(format!(
                    "parameter `{line}` but graph has `{want}`"
                )));
            }
            p.values
                .iter_mut()
                .for_each(|v| *v = floats.next().expect("length checked"));
        }
        ck.graph = graph;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
