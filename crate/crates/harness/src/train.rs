//! Two-stage training: the receiver on AWGN, then an equalizer in front of
//! the frozen receiver on a fading channel.

use crate::data::Generator;
use crate::error::{LabError, Result};
use crate::plan::{Stage, TrainPlan};
use cxnn::loss::{apply_weight_decay, soft_bit_loss, LossConfig, LossReport};
use cxnn::{Adam, AdamConfig, Graph, Mode, NodeId};
use dccn::adapt::frames_to_tensor;
use dccn::receiver::LOGITS;
use dccn::{
    build_composite, build_receiver, composite_logits, load_receiver, Checkpoint, DccnConfig, ModelKind,
};
use ofdm_core::rng::{Domain, Streams};

/// Mean losses over the batches of one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub lr: f64,
    pub ce: f64,
    pub soft_ber: f64,
    pub hard_ber: f64,
    pub l_reg: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the episode with the lowest total loss.
    pub checkpoint: Checkpoint,
    pub history: Vec<EpisodeStats>,
    pub best_episode: usize,
    pub stopped_early: bool,
}

/// Trains the basic receiver from scratch.
pub fn train_stage1(plan: &TrainPlan, dc: &DccnConfig) -> Result<TrainOutcome> {
    if plan.stage != Stage::Receiver {
        return Err(LabError::Plan(format!(
            "stage-1 training got a {} plan",
            plan.stage
        )));
    }
    let mut graph = build_receiver::<f32>(dc)?;
    graph.initialize(&mut Streams::new(plan.seed).rng(Domain::Init, 0));
    let logits = graph.find(LOGITS)?;
    run(plan, dc, graph, logits, ModelKind::Receiver, |_| {})
}

/// Trains an equalizer in front of the receiver held by `base`.
pub fn train_stage2(plan: &TrainPlan, dc: &DccnConfig, base: &Checkpoint) -> Result<TrainOutcome> {
    train_stage2_observed(plan, dc, base, |_| {})
}

/// [`train_stage2`] with a callback run on the graph after every step.
pub fn train_stage2_observed(
    plan: &TrainPlan,
    dc: &DccnConfig,
    base: &Checkpoint,
    observe: impl FnMut(&Graph<f32>),
) -> Result<TrainOutcome> {
    if plan.stage != Stage::Equalizer {
        return Err(LabError::Plan(format!(
            "stage-2 training got a {} plan",
            plan.stage
        )));
    }
    if base.kind != ModelKind::Receiver {
        return Err(LabError::Plan(
            "stage 2 starts from a basic receiver checkpoint".into(),
        ));
    }
    let b = &base.config;
    if b.mod_order() != dc.mod_order() || b.use_cp != dc.use_cp || b.ofdm != dc.ofdm {
        return Err(LabError::Plan(format!(
            "receiver checkpoint has m={}, cp={} but the run asks for m={}, cp={}",
            b.mod_order(),
            b.use_cp,
            dc.mod_order(),
            dc.use_cp
        )));
    }
    let dc = DccnConfig {
        variant: b.variant,
        ..dc.clone()
    };
    let mut graph = build_composite::<f32>(&dc)?;
    graph.initialize(&mut Streams::new(plan.seed).rng(Domain::Init, 1));
    load_receiver(&mut graph, &base.graph)?;
    let logits = composite_logits(&graph)?;
    run(plan, &dc, graph, logits, ModelKind::Composite, observe)
}

fn run(
    plan: &TrainPlan,
    dc: &DccnConfig,
    mut graph: Graph<f32>,
    logits: NodeId,
    kind: ModelKind,
    mut observe: impl FnMut(&Graph<f32>),
) -> Result<TrainOutcome> {
    plan.validate().map_err(LabError::Plan)?;
    let streams = Streams::new(plan.seed);
    let generator = Generator::new(&dc.ofdm, plan.channel, plan.seed)?;
    let snrs = plan.frame_snrs();
    let loss_cfg = LossConfig::default();
    let mut adam = Adam::new(&graph, AdamConfig::default());
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, graph.clone());
    let mut stopped_early = false;

    for episode in 0..plan.max_episodes {
        let mut sum = LossReport::default();
        let lr = plan.lr_at(adam.steps());
        for b in 0..plan.batches_per_episode {
            let step = adam.steps();
            let index = (episode * plan.batches_per_episode + b) as u64;
            let batch = generator.batch(&streams, index, plan.batch_frames, &snrs)?;
            let x = frames_to_tensor::<f32>(&batch.rx, &dc.ofdm)?;
            let diverged = |what: String| LabError::Diverged {
                episode,
                batch: b,
                step,
                what,
            };
            let tape = graph.forward(&x, Mode::Train)?;
            let (mut report, dz) = soft_bit_loss(tape.output(), batch.bits.as_slice(), &loss_cfg)
                .map_err(|e| diverged(e.to_string()))?;
            graph.zero_grad();
            graph.backward(&tape, &[(logits, &dz)])?;
            report.l_reg = apply_weight_decay(&mut graph, loss_cfg.lambda);
            report.total += report.l_reg;
            if !report.total.is_finite() {
                return Err(diverged(format!("total loss {}", report.total)));
            }
            graph.update_running_stats(&tape);
            adam.step(&mut graph, plan.lr_at(step));
            observe(&graph);
            sum.ce += report.ce;
            sum.soft_ber += report.soft_ber;
            sum.hard_ber += report.hard_ber;
            sum.l_reg += report.l_reg;
            sum.total += report.total;
        }
        let n = plan.batches_per_episode as f64;
        let stats = EpisodeStats {
            episode,
            lr,
            ce: sum.ce / n,
            soft_ber: sum.soft_ber / n,
            hard_ber: sum.hard_ber / n,
            l_reg: sum.l_reg / n,
            total: sum.total / n,
        };
        history.push(stats);
        if stats.total < best.0 {
            best = (stats.total, episode, graph.clone());
        }
        if early_stop(episode, best.1, plan.early_stop_window) {
            stopped_early = true;
            break;
        }
    }
    let (_, best_episode, best_graph) = best;
    let checkpoint = Checkpoint::new(kind, dc.clone(), plan.seed, history.len() as u64, best_graph);
    Ok(TrainOutcome {
        checkpoint,
        history,
        best_episode,
        stopped_early,
    })
}

/// True once the best episode lies `window` or more episodes in the past.
pub fn early_stop(episode: usize, best_episode: usize, window: usize) -> bool {
    episode - best_episode >= window
}

/// Episode history as CSV.
pub fn history_csv(history: &[EpisodeStats]) -> String {
    let mut out = String::from("episode,lr,ce,soft_ber,hard_ber,l_reg,total\n");
    for h in history {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            h.episode, h.lr, h.ce, h.soft_ber, h.hard_ber, h.l_reg, h.total
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ofdm_core::{ChannelKind, OfdmConfig};

    fn tiny(stage: Stage, seed: u64) -> TrainPlan {
        let mut p = match stage {
            Stage::Receiver => TrainPlan::receiver(1, seed),
            Stage::Equalizer => TrainPlan::equalizer(1, seed, ChannelKind::Flat),
        };
        p.max_episodes = 2;
        p.batches_per_episode = 2;
        p.batch_frames = 8;
        p
    }

    fn dc() -> DccnConfig {
        DccnConfig::new(OfdmConfig::default().with_mod_order(1), false)
    }

    #[test]
    fn same_seed_same_checkpoint() {
        let a = train_stage1(&tiny(Stage::Receiver, 7), &dc()).unwrap();
        let b = train_stage1(&tiny(Stage::Receiver, 7), &dc()).unwrap();
        assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
        assert_eq!(a.history.len(), 2);
        let c = train_stage1(&tiny(Stage::Receiver, 8), &dc()).unwrap();
        assert_ne!(a.checkpoint.to_bytes(), c.checkpoint.to_bytes());
    }

    #[test]
    fn early_stop_rule() {
        assert!(!early_stop(10, 5, 200));
        assert!(!early_stop(204, 5, 200));
        assert!(early_stop(205, 5, 200));
        assert!(early_stop(3, 3, 0));
    }

    #[test]
    fn zero_window_stops_after_first_episode() {
        let mut plan = tiny(Stage::Receiver, 1);
        plan.max_episodes = 50;
        plan.early_stop_window = 0;
        let out = train_stage1(&plan, &dc()).unwrap();
        assert!(out.stopped_early);
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn stage_checks() {
        assert!(train_stage1(&tiny(Stage::Equalizer, 1), &dc()).is_err());
        let base = train_stage1(&tiny(Stage::Receiver, 1), &dc()).unwrap().checkpoint;
        let other = DccnConfig::new(OfdmConfig::default().with_mod_order(1), true);
        assert!(train_stage2(&tiny(Stage::Equalizer, 1), &other, &base).is_err());
        assert!(train_stage2(&tiny(Stage::Receiver, 1), &dc(), &base).is_err());
    }
}
