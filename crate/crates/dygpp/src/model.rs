//! The sequence model: per-slot encoders fused into a projection, a feedback
//! FFN block, mean pooling into node embeddings, and a two-layer link head.
//!
//! The forward pass for a batch of candidate pairs is fully vectorized: the
//! passenger-side sequences of all pairs are stacked into one tall matrix
//! (likewise the station side), run through shared parameters in a handful
//! of matrix ops, and reduced back to one row per pair. Stacking changes
//! neither values nor gradients versus running pairs one at a time, because
//! every kernel treats rows independently; a test pins that equivalence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::{
    matrix::DenseMatrix,
    ops::{self, Mode},
    params::{ParamId, ParameterStore},
    tape::{NodeId, Tape},
};
use crate::batch_sampler::{co_occurrence, paired_candidates, CandidatePair, NeighborSequence};
use crate::encoders;
use crate::error::{DygppError, Result};
use crate::event_store::{EventLog, NodeKind};

/// Feature channels that can be zeroed out for ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AblationFlags {
    /// Zero the edge (board/alight) channel.
    pub edge: bool,
    /// Zero the time channel.
    pub time: bool,
    /// Zero the whole co-occurrence channel.
    pub co: bool,
    /// Zero only the own-sequence counts feeding the co channel.
    pub co_self: bool,
    /// Zero only the cross-sequence counts feeding the co channel.
    pub co_cross: bool,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Recent interactions kept per node (the sequence adds a self slot).
    pub num_neighbors: usize,
    /// Hard cap on total sequence length including the self slot.
    pub max_sequence: usize,
    /// Width of the learned per-node feature rows.
    pub dim_node: usize,
    /// Width of the replicated edge channel.
    pub dim_edge: usize,
    /// Number of trainable cosine frequencies.
    pub dim_time: usize,
    /// Width of the co-occurrence channel.
    pub dim_channel: usize,
    /// Fused per-slot embedding width after projection.
    pub dim_embed: usize,
    /// Node embedding width after pooling and the output map.
    pub dim_out: usize,
    /// Number of FFN blocks applied to the fused sequence.
    pub ffn_layers: usize,
    pub dropout: f64,
    /// Fixed rescaling applied to raw second deltas before the cosines.
    pub time_scale: f64,
    /// Leading decade of the initial frequency ladder (see
    /// [`crate::encoders::omega_init`]). Raise it when `time_scale` maps the
    /// deltas of interest well below 1, so the initial cosines still vary.
    pub time_omega_exp: f64,
    /// Use the published two-step head (bias added after the ReLU) instead
    /// of the conventional ReLU(x W + b) form.
    pub head_literal_form: bool,
    pub ablate: AblationFlags,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_neighbors: 20,
            max_sequence: 32,
            dim_node: 172,
            dim_edge: 172,
            dim_time: 100,
            dim_channel: 50,
            dim_embed: 172,
            dim_out: 172,
            ffn_layers: 1,
            dropout: 0.1,
            time_scale: 1e-6,
            time_omega_exp: 0.0,
            head_literal_form: false,
            ablate: AblationFlags::default(),
        }
    }
}

impl ModelConfig {
    /// Total slots per sequence: self + neighbors, capped.
    pub fn seq_len(&self) -> usize {
        (self.num_neighbors + 1).min(self.max_sequence)
    }

    /// Width of the concatenated per-slot features before projection.
    pub fn fused_dim(&self) -> usize {
        self.dim_node + self.dim_edge + self.dim_time + self.dim_channel
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("model.num_neighbors", self.num_neighbors),
            ("model.max_sequence", self.max_sequence),
            ("model.dim_node", self.dim_node),
            ("model.dim_edge", self.dim_edge),
            ("model.dim_time", self.dim_time),
            ("model.dim_channel", self.dim_channel),
            ("model.dim_embed", self.dim_embed),
            ("model.dim_out", self.dim_out),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(DygppError::Usage(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(DygppError::Usage(format!(
                "model.dropout {} out of [0, 1)",
                self.dropout
            )));
        }
        if !self.time_scale.is_finite() || self.time_scale <= 0.0 {
            return Err(DygppError::Usage(format!(
                "model.time_scale {} must be positive",
                self.time_scale
            )));
        }
        Ok(())
    }
}

/// Handles into the parameter store, resolved once at build/attach time.
#[derive(Debug, Clone)]
struct ParamIds {
    passenger_features: ParamId,
    station_features: ParamId,
    time_omega: ParamId,
    co_f_weight: ParamId,
    co_f_bias: ParamId,
    proj_weight: ParamId,
    proj_bias: ParamId,
    ffn: Vec<(ParamId, ParamId)>,
    out_weight: ParamId,
    out_bias: ParamId,
    head_w1: ParamId,
    head_b1: ParamId,
    head_w2: ParamId,
    head_b2: ParamId,
}

/// Expected parameter names and shapes for a given config and node counts.
fn expected_layout(
    cfg: &ModelConfig,
    num_passengers: u32,
    num_stations: u32,
) -> Vec<(String, usize, usize)> {
    let mut layout = vec![
        (
            "passenger_features".to_string(),
            num_passengers as usize + 1,
            cfg.dim_node,
        ),
        (
            "station_features".to_string(),
            num_stations as usize + 1,
            cfg.dim_node,
        ),
        ("time_omega".to_string(), 1, cfg.dim_time),
        ("co_f_weight".to_string(), 1, cfg.dim_channel),
        ("co_f_bias".to_string(), 1, cfg.dim_channel),
        ("proj_weight".to_string(), cfg.fused_dim(), cfg.dim_embed),
        ("proj_bias".to_string(), 1, cfg.dim_embed),
    ];
    for i in 0..cfg.ffn_layers {
        layout.push((format!("ffn{i}_weight"), cfg.dim_embed, cfg.dim_embed));
        layout.push((format!("ffn{i}_bias"), 1, cfg.dim_embed));
    }
    layout.push(("out_weight".to_string(), cfg.dim_embed, cfg.dim_out));
    layout.push(("out_bias".to_string(), 1, cfg.dim_out));
    layout.push(("head_w1".to_string(), 2 * cfg.dim_out, cfg.dim_out));
    layout.push(("head_b1".to_string(), 1, cfg.dim_out));
    layout.push(("head_w2".to_string(), cfg.dim_out, 1));
    layout.push(("head_b2".to_string(), 1, 1));
    layout
}

/// The model: a config plus resolved parameter handles. All learned state
/// lives in the [`ParameterStore`].
#[derive(Debug, Clone)]
pub struct DygppModel {
    cfg: ModelConfig,
    ids: ParamIds,
    num_passengers: u32,
    num_stations: u32,
}

/// Inputs for one stacked side (all passenger sequences, or all station
/// sequences, of a pair batch).
struct SideInputs {
    lookups: Vec<(ParamId, usize)>,
    edge_signs: Vec<f64>,
    scaled_deltas: Vec<f64>,
    co_own: Vec<f64>,
    co_cross: Vec<f64>,
}

impl DygppModel {
    /// Initialize fresh parameters. Weights draw from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases start at zero, the time
    /// frequencies start on the decade ladder, and row 0 of both feature
    /// tables is zeroed and frozen as the padding row.
    pub fn init<R: Rng>(
        cfg: &ModelConfig,
        num_passengers: u32,
        num_stations: u32,
        rng: &mut R,
    ) -> Result<(DygppModel, ParameterStore)> {
        cfg.validate()?;
        let mut store = ParameterStore::new();
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| -> DenseMatrix {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut m = DenseMatrix::zeros(rows, cols);
            for v in m.as_mut_slice() {
                *v = rng.gen_range(-bound..bound);
            }
            m
        };

        for (name, rows, cols) in expected_layout(cfg, num_passengers, num_stations) {
            let value = match name.as_str() {
                "passenger_features" | "station_features" => {
                    let mut m = uniform(rows, cols, cfg.dim_node);
                    m.row_mut(0).fill(0.0); // padding row
                    m
                }
                "time_omega" => DenseMatrix::from_vec(1, cols, encoders::omega_init(cols, cfg.time_omega_exp)),
                n if n.ends_with("_bias") || n == "head_b1" || n == "head_b2" => {
                    DenseMatrix::zeros(rows, cols)
                }
                "co_f_weight" => uniform(rows, cols, 1),
                "proj_weight" => uniform(rows, cols, cfg.fused_dim()),
                n if n.starts_with("ffn") => uniform(rows, cols, cfg.dim_embed),
                "out_weight" => uniform(rows, cols, cfg.dim_embed),
                "head_w1" => uniform(rows, cols, 2 * cfg.dim_out),
                "head_w2" => uniform(rows, cols, cfg.dim_out),
                other => unreachable!("unhandled parameter `{other}` in init"),
            };
            store.insert(&name, value);
        }

        let model = DygppModel::attach(cfg, num_passengers, num_stations, &mut store)?;
        Ok((model, store))
    }

    /// Bind to an existing store (typically loaded from a checkpoint),
    /// verifying that every expected parameter is present with the expected
    /// shape, and re-freezing the padding rows.
    pub fn attach(
        cfg: &ModelConfig,
        num_passengers: u32,
        num_stations: u32,
        store: &mut ParameterStore,
    ) -> Result<DygppModel> {
        cfg.validate()?;
        for (name, rows, cols) in expected_layout(cfg, num_passengers, num_stations) {
            let id = store.require(&name)?;
            let value = store.value(id);
            if value.rows() != rows || value.cols() != cols {
                return Err(DygppError::CheckpointShape {
                    name,
                    expected_rows: rows,
                    expected_cols: cols,
                    found_rows: value.rows(),
                    found_cols: value.cols(),
                });
            }
        }
        let get = |n: &str| store.id(n).expect("presence verified above");
        let ids = ParamIds {
            passenger_features: get("passenger_features"),
            station_features: get("station_features"),
            time_omega: get("time_omega"),
            co_f_weight: get("co_f_weight"),
            co_f_bias: get("co_f_bias"),
            proj_weight: get("proj_weight"),
            proj_bias: get("proj_bias"),
            ffn: (0..cfg.ffn_layers)
                .map(|i| (get(&format!("ffn{i}_weight")), get(&format!("ffn{i}_bias"))))
                .collect(),
            out_weight: get("out_weight"),
            out_bias: get("out_bias"),
            head_w1: get("head_w1"),
            head_b1: get("head_b1"),
            head_w2: get("head_w2"),
            head_b2: get("head_b2"),
        };
        store.freeze_rows(ids.passenger_features, &[0]);
        store.freeze_rows(ids.station_features, &[0]);
        Ok(DygppModel {
            cfg: cfg.clone(),
            ids,
            num_passengers,
            num_stations,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn num_passengers(&self) -> u32 {
        self.num_passengers
    }

    pub fn num_stations(&self) -> u32 {
        self.num_stations
    }

    fn table(&self, kind: NodeKind) -> ParamId {
        match kind {
            NodeKind::Passenger => self.ids.passenger_features,
            NodeKind::Station => self.ids.station_features,
        }
    }

    /// Flatten sequences (plus their co-occurrence pairs) into stacked
    /// per-slot input columns for one side.
    fn side_inputs(&self, seqs: &[&NeighborSequence], cos: &[&Vec<[f64; 2]>]) -> SideInputs {
        let l = self.cfg.seq_len();
        let total = seqs.len() * l;
        let ab = &self.cfg.ablate;
        let mut inputs = SideInputs {
            lookups: Vec::with_capacity(total),
            edge_signs: Vec::with_capacity(total),
            scaled_deltas: Vec::with_capacity(total),
            co_own: Vec::with_capacity(total),
            co_cross: Vec::with_capacity(total),
        };
        for (seq, co) in seqs.iter().zip(cos) {
            debug_assert_eq!(seq.slots.len(), l);
            debug_assert_eq!(co.len(), l);
            for (slot, pair) in seq.slots.iter().zip(co.iter()) {
                inputs.lookups.push((self.table(slot.kind), slot.id as usize));
                inputs
                    .edge_signs
                    .push(if ab.edge { 0.0 } else { slot.edge_sign() });
                inputs
                    .scaled_deltas
                    .push(self.cfg.time_scale * slot.delta as f64);
                inputs.co_own.push(if ab.co_self { 0.0 } else { pair[0] });
                inputs.co_cross.push(if ab.co_cross { 0.0 } else { pair[1] });
            }
        }
        inputs
    }

    /// Encode, fuse, FFN and pool one stacked side into per-sequence node
    /// embeddings (`seqs.len() x dim_out`).
    fn side_embedding<R: Rng>(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        seqs: &[&NeighborSequence],
        cos: &[&Vec<[f64; 2]>],
        mode: Mode,
        rng: &mut R,
    ) -> NodeId {
        let cfg = &self.cfg;
        let l = cfg.seq_len();
        let inputs = self.side_inputs(seqs, cos);
        let rows = inputs.lookups.len();

        let x_node = tape.lookup_rows(store, inputs.lookups);
        let x_edge = tape.constant(encoders::encode_edges(&inputs.edge_signs, cfg.dim_edge));
        let x_time = if cfg.ablate.time {
            tape.constant(DenseMatrix::zeros(rows, cfg.dim_time))
        } else {
            tape.time_encode(store, self.ids.time_omega, inputs.scaled_deltas)
        };
        let x_co = if cfg.ablate.co {
            tape.constant(DenseMatrix::zeros(rows, cfg.dim_channel))
        } else {
            let own = tape.constant(DenseMatrix::from_vec(rows, 1, inputs.co_own));
            let cross = tape.constant(DenseMatrix::from_vec(rows, 1, inputs.co_cross));
            let f_own = tape.affine(store, own, self.ids.co_f_weight, Some(self.ids.co_f_bias));
            let f_cross = tape.affine(store, cross, self.ids.co_f_weight, Some(self.ids.co_f_bias));
            tape.add(f_own, f_cross)
        };

        let fused = tape.concat_cols(&[x_node, x_edge, x_time, x_co]);
        let mut z = tape.affine(store, fused, self.ids.proj_weight, Some(self.ids.proj_bias));
        for &(w, b) in &self.ids.ffn {
            let h = tape.affine(store, z, w, Some(b));
            let h = tape.relu(h);
            z = tape.dropout(h, cfg.dropout, mode, rng);
        }
        let pooled = tape.segment_mean(z, l);
        tape.affine(store, pooled, self.ids.out_weight, Some(self.ids.out_bias))
    }

    /// Link head over paired embeddings: `pairs x 1` logits.
    fn head(&self, tape: &mut Tape, store: &ParameterStore, hu: NodeId, hs: NodeId) -> NodeId {
        let cat = tape.concat_cols(&[hu, hs]);
        if self.cfg.head_literal_form {
            let z = tape.affine(store, cat, self.ids.head_w1, None);
            let r = tape.relu(z);
            let rb = tape.add_bias(store, r, self.ids.head_b1);
            tape.affine(store, rb, self.ids.head_w2, Some(self.ids.head_b2))
        } else {
            let z = tape.affine(store, cat, self.ids.head_w1, Some(self.ids.head_b1));
            let r = tape.relu(z);
            tape.affine(store, r, self.ids.head_w2, Some(self.ids.head_b2))
        }
    }

    /// Build sequences and co-occurrence for every pair. Order-preserving
    /// and embarrassingly parallel.
    #[allow(clippy::type_complexity)]
    fn build_pair_contexts(
        &self,
        log: &EventLog,
        pairs: &[CandidatePair],
    ) -> Vec<(NeighborSequence, NeighborSequence, Vec<[f64; 2]>, Vec<[f64; 2]>)> {
        let l = self.cfg.seq_len();
        let build = |p: &CandidatePair| {
            let useq =
                NeighborSequence::sample(log, NodeKind::Passenger, p.passenger, p.time, l);
            let sseq = NeighborSequence::sample(log, NodeKind::Station, p.station, p.time, l);
            let (cu, cs) = co_occurrence(&useq, &sseq);
            (useq, sseq, cu, cs)
        };
        if pairs.len() >= 32 {
            pairs.par_iter().map(build).collect()
        } else {
            pairs.iter().map(build).collect()
        }
    }

    /// Differentiable logits for a batch of candidate pairs.
    pub fn pair_logits<R: Rng>(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        log: &EventLog,
        pairs: &[CandidatePair],
        mode: Mode,
        rng: &mut R,
    ) -> NodeId {
        assert!(!pairs.is_empty(), "empty pair batch");
        let contexts = self.build_pair_contexts(log, pairs);
        let useqs: Vec<&NeighborSequence> = contexts.iter().map(|c| &c.0).collect();
        let sseqs: Vec<&NeighborSequence> = contexts.iter().map(|c| &c.1).collect();
        let ucos: Vec<&Vec<[f64; 2]>> = contexts.iter().map(|c| &c.2).collect();
        let scos: Vec<&Vec<[f64; 2]>> = contexts.iter().map(|c| &c.3).collect();
        let hu = self.side_embedding(tape, store, &useqs, &ucos, mode, rng);
        let hs = self.side_embedding(tape, store, &sseqs, &scos, mode, rng);
        self.head(tape, store, hu, hs)
    }

    /// Forward-only loss over pairs; pure in the parameters when `mode` is
    /// eval (no RNG is consumed). Used by the gradient checker.
    pub fn loss_for_pairs<R: Rng>(
        &self,
        store: &ParameterStore,
        log: &EventLog,
        pairs: &[CandidatePair],
        mode: Mode,
        rng: &mut R,
    ) -> Result<f64> {
        let mut tape = Tape::new();
        let logits = self.pair_logits(&mut tape, store, log, pairs, mode, rng);
        let targets: Vec<f64> = pairs.iter().map(|p| p.target).collect();
        let loss = tape.sigmoid_bce(logits, &targets);
        let v = tape.value(loss).get(0, 0);
        if !v.is_finite() {
            return Err(DygppError::NonFinite {
                context: "batch loss".into(),
            });
        }
        Ok(v)
    }

    /// Forward + backward over pairs, accumulating parameter gradients.
    pub fn loss_and_grad<R: Rng>(
        &self,
        store: &mut ParameterStore,
        log: &EventLog,
        pairs: &[CandidatePair],
        mode: Mode,
        rng: &mut R,
    ) -> Result<f64> {
        let mut tape = Tape::new();
        let logits = self.pair_logits(&mut tape, store, log, pairs, mode, rng);
        let targets: Vec<f64> = pairs.iter().map(|p| p.target).collect();
        let loss = tape.sigmoid_bce(logits, &targets);
        let v = tape.value(loss).get(0, 0);
        if !v.is_finite() {
            return Err(DygppError::NonFinite {
                context: "batch loss".into(),
            });
        }
        tape.backward(loss, store);
        Ok(v)
    }

    /// Score candidate pairs in eval mode, returning probabilities.
    /// Processes fixed-size chunks to bound peak memory.
    pub fn score_pairs(
        &self,
        store: &ParameterStore,
        log: &EventLog,
        pairs: &[CandidatePair],
    ) -> Vec<f64> {
        const CHUNK: usize = 256;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0); // never consumed in eval
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(CHUNK) {
            let mut tape = Tape::new();
            let logits = self.pair_logits(&mut tape, store, log, chunk, Mode::Eval, &mut rng);
            for i in 0..chunk.len() {
                out.push(ops::sigmoid(tape.value(logits).get(i, 0)));
            }
        }
        out
    }

    /// Eval-mode embedding of one node at one query time. The counterpart
    /// node is needed because the co-occurrence channel reads both recent
    /// histories.
    pub fn embed_node(
        &self,
        store: &ParameterStore,
        log: &EventLog,
        kind: NodeKind,
        id: u32,
        counterpart: u32,
        time: i64,
    ) -> Vec<f64> {
        let l = self.cfg.seq_len();
        let own = NeighborSequence::sample(log, kind, id, time, l);
        let other = NeighborSequence::sample(log, kind.other(), counterpart, time, l);
        let (co_own, _) = co_occurrence(&own, &other);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut tape = Tape::new();
        let h = self.side_embedding(
            &mut tape,
            store,
            &[&own],
            &[&co_own],
            Mode::Eval,
            &mut rng,
        );
        tape.value(h).row(0).to_vec()
    }

    /// Link probability from two precomputed embeddings (eval mode).
    pub fn predict_link(
        &self,
        store: &ParameterStore,
        h_passenger: &[f64],
        h_station: &[f64],
    ) -> (f64, f64) {
        let mut cat = Vec::with_capacity(h_passenger.len() + h_station.len());
        cat.extend_from_slice(h_passenger);
        cat.extend_from_slice(h_station);
        let cat = DenseMatrix::from_vec(1, cat.len(), cat);
        let w1 = store.value(self.ids.head_w1);
        let b1 = store.value(self.ids.head_b1);
        let w2 = store.value(self.ids.head_w2);
        let b2 = store.value(self.ids.head_b2);
        let hidden = if self.cfg.head_literal_form {
            let z = ops::affine_forward(&cat, w1, None);
            ops::add_bias_forward(&ops::relu_forward(&z), b1)
        } else {
            ops::relu_forward(&ops::affine_forward(&cat, w1, Some(b1)))
        };
        let logit = ops::affine_forward(&hidden, w2, Some(b2)).get(0, 0);
        (logit, ops::sigmoid(logit))
    }
}

// ---------------------------------------------------------------------------
// Finite-difference verification world
// ---------------------------------------------------------------------------

/// Fixed toy log for gradient verification: 2 passengers, 2 stations,
/// 4 events with day-scale gaps so the time channel sees large deltas.
pub fn toy_gradcheck_log() -> EventLog {
    use crate::event_store::{Label, RawEvent};
    let rows = vec![
        RawEvent { passenger: 1, station: 1, label: Label::Board, time: 100_000 },
        RawEvent { passenger: 1, station: 2, label: Label::Alight, time: 460_000 },
        RawEvent { passenger: 2, station: 2, label: Label::Board, time: 1_500_000 },
        RawEvent { passenger: 2, station: 1, label: Label::Alight, time: 2_600_000 },
    ];
    EventLog::from_raw(&rows).expect("toy log is valid")
}

/// Matching toy architecture: sequence length 4, every width at most 8.
pub fn toy_gradcheck_config() -> ModelConfig {
    ModelConfig {
        num_neighbors: 3,
        max_sequence: 4,
        dim_node: 5,
        dim_edge: 4,
        dim_time: 3,
        dim_channel: 2,
        dim_embed: 6,
        dim_out: 4,
        ..ModelConfig::default()
    }
}

/// Run the central-difference check on the toy world and report every
/// parameter block. `h` is the probe step; `max_coords_per_block` bounds
/// the coordinates sampled per parameter (strided when exceeded).
///
/// The frequency ladder decays geometrically, so its tail entries would see
/// deltas far inside one period and produce gradients near the finite-
/// difference noise floor; the check instead evaluates at moderate
/// frequencies, which verifies the same backward code path with a usable
/// signal-to-noise ratio.
pub fn run_toy_gradcheck(
    h: f64,
    max_coords_per_block: usize,
    seed: u64,
) -> Result<Vec<crate::autodiff::gradcheck::BlockReport>> {
    use crate::autodiff::gradcheck::finite_difference_check;

    let log = toy_gradcheck_log();
    let cfg = toy_gradcheck_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (model, mut store) = DygppModel::init(&cfg, log.num_passengers(), log.num_stations(), &mut rng)?;

    let omega_id = store.require("time_omega")?;
    for (k, v) in store
        .value_mut(omega_id)
        .as_mut_slice()
        .iter_mut()
        .enumerate()
    {
        *v = 0.9 / (k as f64 + 1.0) - 0.05;
    }

    let mut pair_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E3779B9);
    let pairs = paired_candidates(log.events(), 0..log.len(), log.num_stations(), &mut pair_rng);

    store.zero_grads();
    model.loss_and_grad(
        &mut store,
        &log,
        &pairs,
        Mode::Eval,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;

    let reports = finite_difference_check(
        &mut store,
        |s| {
            model
                .loss_for_pairs(s, &log, &pairs, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0))
                .expect("toy loss is finite")
        },
        h,
        max_coords_per_block,
    );
    Ok(reports)
}
