use difftape::{Tape, TapeError, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::{GraphFeatures, EDGE_WIDTH, NODE_WIDTH};
use crate::error::Result;
use crate::geom::{self, Vec3};

/// Output columns per node: displacement (3) and predicted force (3).
pub const OUTPUT_WIDTH: usize = 6;

const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnnConfig {
    pub latent: usize,
    pub blocks: usize,
    /// Hidden layers per MLP; each MLP has `hidden_layers + 1` linear maps.
    pub hidden_layers: usize,
    /// Largest per-vertex displacement in metres; the decoded displacement
    /// passes through `output_scale · tanh(·)`.
    pub output_scale: f64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig { latent: 32, blocks: 4, hidden_layers: 2, output_scale: 0.01 }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent == 0 || self.hidden_layers == 0 || !(self.output_scale > 0.0) {
            return Err(crate::DrapeError::Argument(format!("invalid network configuration {self:?}")));
        }
        Ok(())
    }

    /// Canonical text form, used in checkpoint manifests and fingerprints.
    pub fn describe(&self) -> String {
        format!(
            "latent={} blocks={} hidden_layers={} output_scale={:?}",
            self.latent, self.blocks, self.hidden_layers, self.output_scale
        )
    }
}

/// One tensor slot of the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub name: String,
    pub shape: [usize; 2],
    pub trainable: bool,
}

fn mlp_slots(out: &mut Vec<Slot>, prefix: &str, input: usize, cfg: &GnnConfig, output: usize) {
    let mut width = input;
    for k in 0..=cfg.hidden_layers {
        let next = if k == cfg.hidden_layers { output } else { cfg.latent };
        out.push(Slot { name: format!("{prefix}.{k}.w"), shape: [width, next], trainable: true });
        out.push(Slot { name: format!("{prefix}.{k}.b"), shape: [1, next], trainable: true });
        width = next;
    }
}

/// Parameter tensors in storage order.
pub fn layout(cfg: &GnnConfig) -> Vec<Slot> {
    let l = cfg.latent;
    let mut s = vec![
        Slot { name: "norm.node".into(), shape: [1, NODE_WIDTH], trainable: false },
        Slot { name: "norm.edge".into(), shape: [1, EDGE_WIDTH], trainable: false },
        Slot { name: "norm.out".into(), shape: [1, OUTPUT_WIDTH], trainable: false },
    ];
    mlp_slots(&mut s, "node_enc", NODE_WIDTH, cfg, l);
    mlp_slots(&mut s, "edge_enc", EDGE_WIDTH, cfg, l);
    for b in 0..cfg.blocks {
        mlp_slots(&mut s, &format!("block{b}.edge"), 3 * l, cfg, l);
        mlp_slots(&mut s, &format!("block{b}.node"), 2 * l, cfg, l);
    }
    mlp_slots(&mut s, "decoder", l, cfg, OUTPUT_WIDTH);
    s
}

/// Network weights plus fixed input/output scalings.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnParams {
    pub config: GnnConfig,
    pub tensors: Vec<Tensor>,
}

/// Rounds every entry to the nearest `f32`, so that single-precision
/// storage is lossless.
pub fn round_to_f32(t: &mut Tensor) {
    t.mapv_inplace(|v| v as f32 as f64);
}

fn column_inverse_rms(samples: &[&Tensor], width: usize) -> Vec<f64> {
    let mut sum = vec![0.0; width];
    let mut count = 0usize;
    for s in samples {
        for row in s.rows() {
            for c in 0..width {
                sum[c] += row[c] * row[c];
            }
            count += 1;
        }
    }
    sum.iter()
        .map(|s| {
            let rms = (s / count.max(1) as f64).sqrt();
            if rms > 1e-30 && rms.is_finite() {
                1.0 / rms
            } else {
                1.0
            }
        })
        .collect()
}

impl GnnParams {
    /// Fan-in uniform weights, zero biases, zero final decoder layer.
    /// Input scalings are the inverse column RMS over `samples`.
    pub fn init(config: GnnConfig, seed: u64, samples: &[&GraphFeatures]) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes: Vec<&Tensor> = samples.iter().map(|g| &g.node).collect();
        let edges: Vec<&Tensor> = samples.iter().map(|g| &g.edge).collect();
        let node_scale = column_inverse_rms(&nodes, NODE_WIDTH);
        let edge_scale = column_inverse_rms(&edges, EDGE_WIDTH);
        // predicted force shares the scale of the input force columns
        let force_scale = 1.0 / node_scale[4..7].iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let final_decoder = format!("decoder.{}.", config.hidden_layers);

        let mut tensors = Vec::new();
        for slot in layout(&config) {
            let [r, c] = slot.shape;
            let mut t = match slot.name.as_str() {
                "norm.node" => Tensor::from_shape_vec((1, NODE_WIDTH), node_scale.clone()).unwrap(),
                "norm.edge" => Tensor::from_shape_vec((1, EDGE_WIDTH), edge_scale.clone()).unwrap(),
                "norm.out" => Tensor::from_shape_fn((1, OUTPUT_WIDTH), |(_, k)| if k < 3 { config.output_scale } else { force_scale }),
                name if name.starts_with(&final_decoder) => Tensor::zeros((r, c)),
                name if name.ends_with(".b") => Tensor::zeros((r, c)),
                _ => {
                    let bound = 1.0 / (r as f64).sqrt();
                    Tensor::from_shape_fn((r, c), |_| rng.gen_range(-bound..bound))
                }
            };
            round_to_f32(&mut t);
            tensors.push(t);
        }
        Ok(GnnParams { config, tensors })
    }

    /// Random weights everywhere, including the final decoder layer. Used
    /// to exercise the network away from its residual-identity start.
    pub fn randomized(config: GnnConfig, seed: u64, samples: &[&GraphFeatures], amplitude: f64) -> Result<Self> {
        let mut p = Self::init(config, seed, samples)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        for (slot, t) in layout(&config).iter().zip(&mut p.tensors) {
            if slot.trainable {
                t.mapv_inplace(|v| v + rng.gen_range(-amplitude..amplitude));
                round_to_f32(t);
            }
        }
        Ok(p)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }
}

/// Network outputs as tape nodes.
#[derive(Debug, Clone, Copy)]
pub struct GnnOutput {
    pub x_pred: Var,
    pub f_hat: Var,
}

/// Records every parameter tensor, as leaves when `track` is set.
pub fn record_params(tape: &mut Tape, params: &GnnParams, track: bool) -> Vec<Var> {
    params.tensors.iter().map(|t| if track { tape.leaf(t.clone()) } else { tape.constant(t.clone()) }).collect()
}

struct Cursor<'a> {
    vars: &'a [Var],
    next: usize,
}

impl Cursor<'_> {
    fn take(&mut self) -> Var {
        let v = self.vars[self.next];
        self.next += 1;
        v
    }
}

fn mlp(tape: &mut Tape, input: Var, cur: &mut Cursor, cfg: &GnnConfig, normalize: bool) -> Result<Var> {
    let mut h = input;
    for k in 0..=cfg.hidden_layers {
        let w = cur.take();
        let b = cur.take();
        h = tape.matmul(h, w)?;
        h = tape.add(h, b)?;
        if k < cfg.hidden_layers {
            h = tape.relu(h);
        }
    }
    Ok(if normalize { tape.layer_norm(h, LAYER_NORM_EPS) } else { h })
}

/// Encode, `blocks` rounds of message passing, decode. Returns
/// `x + Δx` and the predicted force, with `|Δx|` bounded per component by
/// the output scale.
pub fn gnn_forward_var(tape: &mut Tape, feats: &GraphFeatures, params: &[Var], cfg: &GnnConfig) -> Result<GnnOutput> {
    if feats.node.ncols() != NODE_WIDTH || feats.edge.ncols() != EDGE_WIDTH {
        return Err(TapeError::Contract {
            op: "gnn_forward",
            msg: format!(
                "feature widths {}x{} do not match the encoders ({NODE_WIDTH}, {EDGE_WIDTH})",
                feats.node.ncols(),
                feats.edge.ncols()
            ),
        }
        .into());
    }
    if params.len() != layout(cfg).len() {
        return Err(TapeError::Contract { op: "gnn_forward", msg: format!("expected {} parameter tensors, got {}", layout(cfg).len(), params.len()) }.into());
    }
    let n = feats.num_nodes();
    let mut cur = Cursor { vars: params, next: 0 };
    let node_scale = cur.take();
    let edge_scale = cur.take();
    let out_scale = cur.take();

    let node_in = tape.constant(feats.node.clone());
    let edge_in = tape.constant(feats.edge.clone());
    let node_in = tape.mul(node_in, node_scale)?;
    let edge_in = tape.mul(edge_in, edge_scale)?;
    let mut h = mlp(tape, node_in, &mut cur, cfg, true)?;
    let mut e = mlp(tape, edge_in, &mut cur, cfg, true)?;

    for _ in 0..cfg.blocks {
        let hr = tape.gather_rows(h, feats.receivers.clone())?;
        let hs = tape.gather_rows(h, feats.senders.clone())?;
        let cat = tape.concat_cols(&[e, hr, hs])?;
        let de = mlp(tape, cat, &mut cur, cfg, true)?;
        e = tape.add(e, de)?;
        let agg = tape.scatter_add_rows(e, feats.receivers.clone(), n)?;
        let cat = tape.concat_cols(&[h, agg])?;
        let dh = mlp(tape, cat, &mut cur, cfg, true)?;
        h = tape.add(h, dh)?;
    }

    let out = mlp(tape, h, &mut cur, cfg, false)?;
    let dx = tape.slice_cols(out, 0, 3)?;
    let dx = tape.tanh(dx);
    let f_hat = tape.slice_cols(out, 3, OUTPUT_WIDTH)?;
    let out = tape.concat_cols(&[dx, f_hat])?;
    let out = tape.mul(out, out_scale)?;
    let dx = tape.slice_cols(out, 0, 3)?;
    let f_hat = tape.slice_cols(out, 3, OUTPUT_WIDTH)?;
    let x0 = tape.constant(geom::to_tensor(&feats.positions));
    let x_pred = tape.add(x0, dx)?;
    Ok(GnnOutput { x_pred, f_hat })
}

/// Inference without gradients.
pub fn gnn_forward(feats: &GraphFeatures, params: &GnnParams) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let mut tape = Tape::new();
    let vars = record_params(&mut tape, params, false);
    let out = gnn_forward_var(&mut tape, feats, &vars, &params.config)?;
    Ok((geom::to_points(tape.value(out.x_pred)), geom::to_points(tape.value(out.f_hat))))
}
