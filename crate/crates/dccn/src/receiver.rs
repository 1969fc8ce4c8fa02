//! Basic learned receiver: time-domain frame in, per-bit soft decisions out.

use crate::config::{DccnConfig, Variant};
use crate::error::Result;
use cxnn::{Graph, NodeId, Real};

/// Input node name shared by every receiver graph.
pub const RECEIVER_INPUT: &str = "input";

/// Node names the training loop needs to find.
pub const LOGITS: &str = "reshape2";

/// Builds the receiver for `dc.variant`.
pub fn build_receiver<T: Real>(dc: &DccnConfig) -> Result<Graph<T>> {
    dc.validate()?;
    let ofdm = &dc.ofdm;
    let (f, n, s, d, m) = (
        ofdm.frame_syms,
        ofdm.n_fft,
        ofdm.sym_len,
        ofdm.data_cells,
        ofdm.mod_order,
    );
    let variant = dc.variant;
    let w = dc.symbol_width();

    let mut g = Graph::<T>::new(RECEIVER_INPUT, &dc.input_shape());
    let x = g.input();
    let mut h = g.batch_norm("input_bn", x, dc.bn_momentum, dc.norm_eps)?;
    if !dc.use_cp {
        h = g.slice("cp_drop", h, 1, ofdm.cp_len, s)?;
    }
    let freq = if variant.dense_transform() {
        let flat = g.reshape("reshape_fc", h, &[2 * f * w])?;
        g.dense("dft_like", flat, 2 * f * n, false)?
    } else {
        let c = g.complex_conv1d("dft_like", h, w, n)?;
        g.reshape("reshape0", c, &[2 * f * n])?
    };
    let extracted = g.dense("extraction", freq, 2 * d, true)?;
    let iq = g.reshape("iq_data", extracted, &[d, 2])?;

    let points = 1usize << m;
    let demod_in = demod_input(&mut g, dc, iq, points)?;
    let demod = g.dense("demod", demod_in, 2 * m, true)?;
    let act1 = if variant == Variant::E {
        g.linear("activation1", demod)?
    } else {
        g.lrelu("activation1", demod, dc.lrelu_alpha)?
    };
    let logits = g.reshape(LOGITS, act1, &[d, m, 2])?;
    g.softmax("output", logits)?;
    Ok(g)
}

/// Everything between the IQ points and the demodulation dense layer.
fn demod_input<T: Real>(g: &mut Graph<T>, dc: &DccnConfig, iq: NodeId, points: usize) -> Result<NodeId> {
    let alpha = dc.lrelu_alpha;
    let act0_of = |g: &mut Graph<T>, from: NodeId| g.lrelu("activation0", from, alpha);
    Ok(match dc.variant {
        Variant::Original | Variant::A | Variant::E => {
            let c1 = g.conv1d_real("const1", iq, points)?;
            let c2 = g.conv1d_real("const2", c1, points)?;
            let act0 = act0_of(g, c2)?;
            g.concat("concat", &[iq, act0])?
        }
        Variant::F => {
            let c1 = g.conv1d_real("const1", iq, points)?;
            let c2 = g.conv1d_real("const2", c1, points)?;
            act0_of(g, c2)?
        }
        Variant::B | Variant::G => {
            let act0 = act0_of(g, iq)?;
            g.concat("concat", &[iq, act0])?
        }
        Variant::C => iq,
        Variant::D => act0_of(g, iq)?,
    })
}
