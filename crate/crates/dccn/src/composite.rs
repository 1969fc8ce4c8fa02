//! Stage-2 graph: learned equalizer followed by a frozen basic receiver.

use crate::config::{DccnConfig, Variant};
use crate::equalizer::build_equalizer;
use crate::error::{DccnError, Result};
use crate::receiver::{build_receiver, LOGITS};
use cxnn::{Graph, NodeId, Real};

/// Name prefix of every receiver node and parameter inside the composite.
pub const RECEIVER_PREFIX: &str = "receiver";

/// Equalizer plus appended receiver; the receiver part is frozen.
pub fn build_composite<T: Real>(dc: &DccnConfig) -> Result<Graph<T>> {
    let eq_cfg = DccnConfig {
        variant: Variant::Original,
        ..dc.clone()
    };
    let mut g = build_equalizer::<T>(&eq_cfg)?;
    let receiver = build_receiver::<T>(dc)?;
    let feed = g.output();
    let out = g.append(&receiver, feed, RECEIVER_PREFIX)?;
    g.set_output(out);
    g.freeze(RECEIVER_PREFIX);
    Ok(g)
}

/// Node whose gradient the loss seeds in a composite graph.
pub fn composite_logits<T: Real>(g: &Graph<T>) -> Result<NodeId> {
    Ok(g.find(&format!("{RECEIVER_PREFIX}/{LOGITS}"))?)
}

/// Copies every parameter of a trained receiver into the composite.
pub fn load_receiver<T: Real>(composite: &mut Graph<T>, receiver: &Graph<T>) -> Result<()> {
    let owned = composite
        .params()
        .iter()
        .filter(|p| p.name.starts_with(&format!("{RECEIVER_PREFIX}/")))
        .count();
    if owned != receiver.params().len() {
        return Err(DccnError::Mismatch(format!(
            "composite holds {owned} receiver blocks, checkpoint has {}",
            receiver.params().len()
        )));
    }
    for p in receiver.params() {
        let name = format!("{RECEIVER_PREFIX}/{}", p.name);
        let dst = composite.param_mut(&name)?;
        if dst.shape != p.shape {
            return Err(DccnError::Mismatch(format!(
                "{name}: shape {:?} vs {:?}",
                dst.shape, p.shape
            )));
        }
        dst.values.clone_from(&p.values);
    }
    Ok(())
}
