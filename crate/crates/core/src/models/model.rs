use super::config::{ConvKind, ModelConfig, PoolKind, TaskKind, TemporalKind};
use super::features::{GraphInput, Vocab};
use super::layers::{
    dropout, gate_rows, readout, Lstm, Mlp, MrgcnLayer, MrginLayer, SagPool, TemporalAttention,
    TopKPool,
};
use crate::autodiff::{Checkpoint, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::extraction::SceneGraph;
use crate::rng::{seeded_rng, SeededRng};

#[derive(Debug, Clone)]
pub enum Conv {
    Gcn(MrgcnLayer),
    Gin(MrginLayer),
}

impl Conv {
    pub fn forward(&self, tape: &mut Tape, x: Var, g: &GraphInput) -> Result<Var> {
        match self {
            Conv::Gcn(l) => l.forward(tape, x, g),
            Conv::Gin(l) => l.forward(tape, x, g),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Pool {
    Sag(SagPool),
    TopK(TopKPool),
}

/// Argmax over `(ŷ0, ŷ1)` with ties resolved to the risky class.
pub fn predict_label(probs: [f64; 2]) -> u8 {
    u8::from(probs[1] >= probs[0])
}

/// Softmax of a two-logit row.
pub fn softmax2(logits: &[f64]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

/// Recorded sequence forward pass.
#[derive(Debug, Clone)]
pub struct SeqTrace {
    /// `1 x 2` logits.
    pub logits: Var,
    /// Node attention per graph, when a pooling layer is configured.
    pub alphas: Vec<Option<Vec<f64>>>,
    /// Temporal attention weights, with `lstm_attn` only.
    pub beta: Option<Vec<f64>>,
}

/// Recorded per-frame forward pass.
#[derive(Debug, Clone)]
pub struct FrameTrace {
    /// `T x 2` logits, one row per frame.
    pub logits: Var,
    pub alphas: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqOutput {
    pub probs: [f64; 2],
    pub prediction: u8,
    pub alphas: Vec<Option<Vec<f64>>>,
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub probs: Vec<[f64; 2]>,
    pub predictions: Vec<u8>,
    pub alphas: Vec<Option<Vec<f64>>>,
}

/// Spatial graph encoder, temporal model and classification head.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
    convs: Vec<Conv>,
    pool: Option<Pool>,
    lstm: Option<Lstm>,
    head: Mlp,
    attention: Option<TemporalAttention>,
}

impl Model {
    /// Initialises parameters from `config.seed`. Attention parameters are
    /// drawn last, so models differing only in temporal readout share all
    /// other initial weights.
    pub fn new(config: ModelConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(config.seed);
        let mut store = ParamStore::new();
        let r = vocab.num_relations();
        let mut width = vocab.feature_dim(config.node_attributes);
        let mut convs = Vec::new();
        for (l, &out) in config.layer_sizes.iter().enumerate() {
            let name = format!("conv{l}");
            convs.push(match config.conv_kind {
                ConvKind::Mrgcn => {
                    Conv::Gcn(MrgcnLayer::new(&mut store, &name, width, out, r, true, &mut rng)?)
                }
                ConvKind::Mrgin => {
                    Conv::Gin(MrginLayer::new(&mut store, &name, width, out, r, &mut rng)?)
                }
            });
            width = out;
        }
        let pool = match config.pool {
            PoolKind::Sagpool { ratio } => {
                Some(Pool::Sag(SagPool::new(&mut store, "pool", width, r, ratio, &mut rng)?))
            }
            PoolKind::Topk { ratio } => {
                Some(Pool::TopK(TopKPool::new(&mut store, "pool", width, ratio, &mut rng)?))
            }
            PoolKind::None => None,
        };
        let embed = match config.conv_kind {
            ConvKind::Mrgcn => width,
            ConvKind::Mrgin => config.layer_sizes.iter().sum(),
        };
        let lstm = if config.temporal.uses_lstm() {
            Some(Lstm::new(&mut store, "lstm", embed, config.lstm_hidden, &mut rng)?)
        } else {
            None
        };
        let head_in = if lstm.is_some() { config.lstm_hidden } else { embed };
        let mut dims = vec![head_in];
        dims.extend(&config.mlp_sizes);
        dims.push(2);
        let head = Mlp::new(&mut store, "head", &dims, &mut rng)?;
        let attention = if config.temporal == TemporalKind::LstmAttn {
            Some(TemporalAttention::new(&mut store, "attn", config.lstm_hidden, &mut rng)?)
        } else {
            None
        };
        Ok(Model {
            config,
            vocab,
            store,
            convs,
            pool,
            lstm,
            head,
            attention,
        })
    }

    /// Length of the per-graph embedding `h_G`.
    pub fn embedding_dim(&self) -> usize {
        match self.config.conv_kind {
            ConvKind::Mrgcn => *self.config.layer_sizes.last().expect("validated"),
            ConvKind::Mrgin => self.config.layer_sizes.iter().sum(),
        }
    }

    pub fn prepare(&self, graphs: &[SceneGraph]) -> Result<Vec<GraphInput>> {
        graphs
            .iter()
            .map(|g| GraphInput::from_scene_graph(g, &self.vocab, self.config.node_attributes))
            .collect()
    }

    /// Graph embedding `h_G` (`1 x E`) and the pooling scores of every node.
    pub fn spatial(
        &self,
        tape: &mut Tape,
        g: &GraphInput,
        mut rng: Option<&mut SeededRng>,
    ) -> Result<(Var, Option<Vec<f64>>)> {
        let mut x = tape.constant(g.features.clone());
        let mut per_layer = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            x = conv.forward(tape, x, g)?;
            if let Some(r) = rng.as_deref_mut() {
                x = dropout(tape, x, self.config.dropout, r)?;
            }
            per_layer.push(x);
        }
        let pooled = match &self.pool {
            Some(Pool::Sag(p)) => Some(p.forward(tape, x, g)?),
            Some(Pool::TopK(p)) => Some(p.forward(tape, x)?),
            None => None,
        };
        let kind = self.config.readout;
        let h = match self.config.conv_kind {
            ConvKind::Mrgcn => {
                let nodes = pooled.as_ref().map_or(x, |p| p.x);
                readout(tape, nodes, kind)?
            }
            ConvKind::Mrgin => {
                let mut parts = Vec::with_capacity(per_layer.len());
                for &layer in &per_layer {
                    let nodes = match &pooled {
                        Some(p) => gate_rows(tape, layer, p.scores, &p.kept)?,
                        None => layer,
                    };
                    parts.push(readout(tape, nodes, kind)?);
                }
                if parts.len() == 1 {
                    parts[0]
                } else {
                    tape.concat(&parts, 1)?
                }
            }
        };
        Ok((h, pooled.map(|p| p.alpha)))
    }

    #[allow(clippy::type_complexity)]
    fn encode_all(
        &self,
        tape: &mut Tape,
        inputs: &[GraphInput],
        mut rng: Option<&mut SeededRng>,
    ) -> Result<(Vec<Var>, Vec<Option<Vec<f64>>>)> {
        if inputs.is_empty() {
            return Err(Error::EmptyClip);
        }
        let mut hs = Vec::with_capacity(inputs.len());
        let mut alphas = Vec::with_capacity(inputs.len());
        for g in inputs {
            let (h, a) = self.spatial(tape, g, rng.as_deref_mut())?;
            hs.push(h);
            alphas.push(a);
        }
        Ok((hs, alphas))
    }

    fn run_lstm(&self, tape: &mut Tape, lstm: &Lstm, hs: &[Var]) -> Result<Vec<Var>> {
        let (mut p, mut c) = lstm.initial_state(tape);
        let mut ps = Vec::with_capacity(hs.len());
        for &h in hs {
            (p, c) = lstm.step(tape, h, p, c)?;
            ps.push(p);
        }
        Ok(ps)
    }

    /// Sequence classification pass recorded on `tape`. Passing `rng`
    /// enables dropout.
    pub fn seq_trace(
        &self,
        tape: &mut Tape,
        inputs: &[GraphInput],
        rng: Option<&mut SeededRng>,
    ) -> Result<SeqTrace> {
        let (hs, alphas) = self.encode_all(tape, inputs, rng)?;
        let mut beta = None;
        let z = match (&self.lstm, self.config.temporal) {
            (Some(lstm), temporal) => {
                let ps = self.run_lstm(tape, lstm, &hs)?;
                match temporal {
                    TemporalKind::LstmLast => *ps.last().expect("non-empty"),
                    TemporalKind::LstmSum => {
                        let stacked = tape.concat(&ps, 0)?;
                        tape.sum(stacked, Some(0))?
                    }
                    _ => {
                        let att = self.attention.as_ref().expect("lstm_attn has attention");
                        let stacked = tape.concat(&ps, 0)?;
                        let (z, b) = att.forward(tape, stacked)?;
                        beta = Some(tape.value(b).data.clone());
                        z
                    }
                }
            }
            (None, _) => {
                let stacked = tape.concat(&hs, 0)?;
                tape.mean(stacked, Some(0))?
            }
        };
        let logits = self.head.forward(tape, z)?;
        Ok(SeqTrace {
            logits,
            alphas,
            beta,
        })
    }

    /// Per-frame pass: one output row per frame from the running LSTM state.
    pub fn frame_trace(
        &self,
        tape: &mut Tape,
        inputs: &[GraphInput],
        rng: Option<&mut SeededRng>,
    ) -> Result<FrameTrace> {
        let lstm = self
            .lstm
            .as_ref()
            .ok_or_else(|| Error::Config("per-frame prediction needs an LSTM".into()))?;
        let (hs, alphas) = self.encode_all(tape, inputs, rng)?;
        let ps = self.run_lstm(tape, lstm, &hs)?;
        let stacked = tape.concat(&ps, 0)?;
        let logits = self.head.forward(tape, stacked)?;
        Ok(FrameTrace { logits, alphas })
    }

    pub fn seq_forward_inputs(&self, inputs: &[GraphInput]) -> Result<SeqOutput> {
        let mut tape = Tape::with_params(&self.store);
        let trace = self.seq_trace(&mut tape, inputs, None)?;
        let probs = softmax2(&tape.value(trace.logits).data);
        Ok(SeqOutput {
            probs,
            prediction: predict_label(probs),
            alphas: trace.alphas,
            beta: trace.beta,
        })
    }

    /// Clip-level risk prediction for a scene-graph sequence.
    pub fn seq_forward(&self, graphs: &[SceneGraph]) -> Result<SeqOutput> {
        self.seq_forward_inputs(&self.prepare(graphs)?)
    }

    pub fn frame_forward_inputs(&self, inputs: &[GraphInput]) -> Result<FrameOutput> {
        let mut tape = Tape::with_params(&self.store);
        let trace = self.frame_trace(&mut tape, inputs, None)?;
        let logits = tape.value(trace.logits);
        let probs: Vec<[f64; 2]> = (0..logits.rows()).map(|t| softmax2(logits.row_slice(t))).collect();
        Ok(FrameOutput {
            predictions: probs.iter().map(|p| predict_label(*p)).collect(),
            probs,
            alphas: trace.alphas,
        })
    }

    /// Per-frame collision prediction for a scene-graph sequence.
    pub fn frame_forward(&self, graphs: &[SceneGraph]) -> Result<FrameOutput> {
        self.frame_forward_inputs(&self.prepare(graphs)?)
    }

    pub fn is_per_frame(&self) -> bool {
        self.config.task == TaskKind::PerFrame
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        Ok(Checkpoint::from_store(
            &self.store,
            serde_json::to_value(&self.config)?,
            serde_json::to_value(&self.vocab)?,
        ))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: ModelConfig = serde_json::from_value(ck.config.clone())
            .map_err(|e| Error::Schema(format!("checkpoint config: {e}")))?;
        let vocab: Vocab = serde_json::from_value(ck.vocab.clone())
            .map_err(|e| Error::Schema(format!("checkpoint vocabulary: {e}")))?;
        let mut model = Model::new(config, vocab)?;
        ck.restore_into(&mut model.store)?;
        Ok(model)
    }
}
