use crate::adapt::{frames_to_tensor, hard_decisions};
use crate::checkpoint::Checkpoint;
use crate::error::{DccnError, Result};
use cxnn::Tensor;
use ofdm_core::{BitBlock, ComplexGrid};

/// Frames pushed through the network at once.
pub const INFER_BATCH: usize = 64;

/// Inference wrapper around a loaded checkpoint.
#[derive(Debug, Clone)]
pub struct DccnModel {
    checkpoint: Checkpoint,
}

impl DccnModel {
    pub fn new(checkpoint: Checkpoint) -> Self {
        Self { checkpoint }
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    pub fn mod_order(&self) -> usize {
        self.checkpoint.config.mod_order()
    }

    /// Soft bits `[frames, D, m, 2]` for received frames `[frames, F, S]`.
    pub fn soft_bits(&self, rx: &ComplexGrid) -> Result<Tensor<f32>> {
        let cfg = &self.checkpoint.config.ofdm;
        let x = frames_to_tensor::<f32>(rx, cfg)?;
        let frames = x.batch();
        let per = x.len() / frames.max(1);
        let out_shape = self.checkpoint.graph.output_shape().to_vec();
        let out_per: usize = out_shape.iter().product();
        let mut data = Vec::with_capacity(frames * out_per);
        for start in (0..frames).step_by(INFER_BATCH) {
            let n = INFER_BATCH.min(frames - start);
            let mut shape = vec![n];
            shape.extend_from_slice(&x.shape()[1..]);
            let chunk = Tensor::from_vec(&shape, x.data()[start * per..(start + n) * per].to_vec())?;
            data.extend(self.checkpoint.graph.infer(&chunk)?.into_vec());
        }
        let mut shape = vec![frames];
        shape.extend_from_slice(&out_shape);
        Ok(Tensor::from_vec(&shape, data)?)
    }

    pub fn receive(&self, rx: &ComplexGrid) -> Result<BitBlock> {
        let probs = self.soft_bits(rx)?;
        if !probs.all_finite() {
            return Err(DccnError::Config("network produced non-finite soft bits".into()));
        }
        hard_decisions(&probs)
    }
}
