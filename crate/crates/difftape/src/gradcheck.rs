//! Central finite-difference checks for tape gradients.
//!
//! The oracle only ever evaluates forward values on fresh tapes with
//! constant inputs, so it shares no code with the reverse sweep it checks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Tape, TapeError, Tensor, Var};

/// Outcome of one gradient check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err.is_finite() && self.max_rel_err < self.tolerance
    }
}

/// `max|a - b| / max(max|b|, floor)`.
pub fn rel_err(analytic: &Tensor, numeric: &Tensor, floor: f64) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = numeric.iter().map(|b| b.abs()).fold(floor, f64::max);
    diff / scale
}

/// Central differences of a scalar function of several tensors.
pub fn numeric_gradient<F>(f: F, inputs: &[Tensor], h: f64) -> Vec<Tensor>
where
    F: Fn(&[Tensor]) -> f64,
{
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for k in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[k].dim());
        for idx in 0..inputs[k].len() {
            let (r, c) = (idx / inputs[k].ncols(), idx % inputs[k].ncols());
            let orig = work[k][(r, c)];
            work[k][(r, c)] = orig + h;
            let fp = f(&work);
            work[k][(r, c)] = orig - h;
            let fm = f(&work);
            work[k][(r, c)] = orig;
            g[(r, c)] = (fp - fm) / (2.0 * h);
        }
        out.push(g);
    }
    out
}

/// A function that records a scalar on a tape from its input nodes.
pub type Builder<'a> = dyn Fn(&mut Tape, &[Var]) -> Result<Var, TapeError> + 'a;

/// Compares the reverse sweep of `build` against central differences.
pub fn check(name: &str, build: &Builder<'_>, inputs: &[Tensor], h: f64, tolerance: f64) -> Result<CheckReport, TapeError> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let eval = |xs: &[Tensor]| {
        let mut t = Tape::new();
        let vs: Vec<Var> = xs.iter().map(|x| t.constant(x.clone())).collect();
        let l = build(&mut t, &vs).expect("builder failed on perturbed input");
        t.scalar(l)
    };
    let numeric = numeric_gradient(eval, inputs, h);
    let max_rel_err = vars
        .iter()
        .zip(numeric.iter())
        .map(|(&v, n)| rel_err(&grads.get(v), n, 1e-8))
        .fold(0.0, f64::max);
    Ok(CheckReport { name: name.to_string(), max_rel_err, tolerance })
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// Random values kept at least `gap` away from zero, for kinked primitives.
fn random_away_from_zero(rng: &mut ChaCha8Rng, rows: usize, cols: usize, gap: f64) -> Tensor {
    Tensor::from_shape_fn((rows, cols), |_| {
        let v: f64 = rng.gen_range(gap..1.0);
        if rng.gen_bool(0.5) {
            v
        } else {
            -v
        }
    })
}

/// Contracts a tensor-valued node with a fixed random weight so every
/// output entry contributes to the checked scalar.
fn project(tape: &mut Tape, y: Var, weight: &Tensor) -> Result<Var, TapeError> {
    let w = tape.constant(weight.clone());
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

const H: f64 = 1e-6;

/// One check per primitive, each contracted against a random weight.
///
/// `stop_gradient` is left out: differences of its forward value see
/// through it by construction.
pub fn primitive_suite(seed: u64, tolerance: f64) -> Result<Vec<CheckReport>, TapeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();

    let w34 = random(&mut rng, 3, 4);
    let a = random(&mut rng, 3, 4);
    let b = random(&mut rng, 3, 4);
    let row = random(&mut rng, 1, 4);
    let col = random(&mut rng, 3, 1);

    macro_rules! run {
        ($name:expr, $inputs:expr, $body:expr) => {{
            let body = $body;
            reports.push(check($name, &body, &$inputs, H, tolerance)?);
        }};
    }

    let w = w34.clone();
    run!("add", [a.clone(), b.clone()], move |t: &mut Tape, v: &[Var]| {
        let y = t.add(v[0], v[1])?;
        project(t, y, &w)
    });
    let w = w34.clone();
    run!("add_broadcast", [a.clone(), row.clone(), col.clone()], move |t: &mut Tape, v: &[Var]| {
        let y = t.add(v[0], v[1])?;
        let y = t.add(y, v[2])?;
        project(t, y, &w)
    });
    let w = w34.clone();
    run!("sub", [a.clone(), col.clone()], move |t: &mut Tape, v: &[Var]| {
        let y = t.sub(v[0], v[1])?;
        project(t, y, &w)
    });
    let w = w34.clone();
    run!("mul", [a.clone(), b.clone()], move |t: &mut Tape, v: &[Var]| {
        let y = t.mul(v[0], v[1])?;
        project(t, y, &w)
    });
    let w = w34.clone();
    run!("mul_broadcast", [a.clone(), row.clone()], move |t: &mut Tape, v: &[Var]| {
        let y = t.mul(v[0], v[1])?;
        project(t, y, &w)
    });
    let w = w34.clone();
    run!("neg_scale", [a.clone()], move |t: &mut Tape, v: &[Var]| {
        let y = t.neg(v[0]);
        let y = t.scale(y, 1.7);
        project(t, y, &w)
    });
    let w24 = random(&mut rng, 2, 4);
    run!("matmul", [random(&mut rng, 2, 3), random(&mut rng, 3, 4)], move |t: &mut Tape, v: &[Var]| {
        let y = t.matmul(v[0], v[1])?;
        project(t, y, &w24)
    });
    let w37 = random(&mut rng, 3, 7);
    run!("concat_cols", [a.clone(), random(&mut rng, 3, 3)], move |t: &mut Tape, v: &[Var]| {
        let y = t.concat_cols(&[v[0], v[1]])?;
        project(t, y, &w37)
    });
    let w32 = random(&mut rng, 3, 2);
    run!("slice_cols", [a.clone()], move |t: &mut Tape, v: &[Var]| {
        let y = t.slice_cols(v[0], 1, 3)?;
        project(t, y, &w32)
    });
    let index = Arc::new(vec![2, 0, 2, 1, 0]);
    let w54 = random(&mut rng, 5, 4);
    let gi = index.clone();
    run!("gather_rows", [a.clone()], move |t: &mut Tape, v: &[Var]| {
        let y = t.gather_rows(v[0], gi.clone())?;
        project(t, y, &w54)
    });
    let w44 = random(&mut rng, 4, 4);
    let si = index.clone();
    run!("scatter_add_rows", [random(&mut rng, 5, 4)], move |t: &mut Tape, v: &[Var]| {
        let y = t.scatter_add_rows(v[0], si.clone(), 4)?;
        project(t, y, &w44)
    });
    let w = w34.clone();
    run!("relu", [random_away_from_zero(&mut rng, 3, 4, 1e-3)], move |t: &mut Tape, v: &[Var]| {
        let y = t.relu(v[0]);
        project(t, y, &w)
    });
    let w = w34.clone();
    run!("tanh", [a.clone()], move |t: &mut Tape, v: &[Var]| {
        let y = t.tanh(v[0]);
        project(t, y, &w)
    });
    let w = w34.clone();
    run!("exp", [a.clone()], move |t: &mut Tape, v: &[Var]| {
        let y = t.exp(v[0]);
        project(t, y, &w)
    });
    let w = w34.clone();
    run!("softplus", [a.clone() * 3.0], move |t: &mut Tape, v: &[Var]| {
        let y = t.softplus(v[0]);
        project(t, y, &w)
    });
    run!("sum", [a.clone()], |t: &mut Tape, v: &[Var]| {
        let s = t.sum(v[0]);
        Ok(t.mul(s, s)?)
    });
    run!("mean", [a.clone()], |t: &mut Tape, v: &[Var]| {
        let m = t.mean(v[0]);
        let e = t.exp(m);
        Ok(e)
    });
    let w31 = random(&mut rng, 3, 1);
    run!("sum_cols", [a.clone()], move |t: &mut Tape, v: &[Var]| {
        let y = t.sum_cols(v[0]);
        project(t, y, &w31)
    });
    run!("norm", [a.clone()], |t: &mut Tape, v: &[Var]| Ok(t.norm(v[0])));
    let w = w34.clone();
    run!("layer_norm", [a.clone() * 2.0 + 0.5], move |t: &mut Tape, v: &[Var]| {
        let y = t.layer_norm(v[0], 1e-5);
        project(t, y, &w)
    });

    Ok(reports)
}

/// Random depth-3 compositions of primitives, each checked end to end.
pub fn composite_suite(seed: u64, count: usize, tolerance: f64) -> Result<Vec<CheckReport>, TapeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(count);
    for k in 0..count {
        let rows = rng.gen_range(2..6);
        let width = rng.gen_range(2..5);
        let layers: Vec<(u8, Tensor, Tensor)> = (0..3)
            .map(|_| (rng.gen_range(0..5u8), random(&mut rng, width, width), random(&mut rng, 1, width)))
            .collect();
        let index: Arc<Vec<usize>> = Arc::new((0..rows + 2).map(|_| rng.gen_range(0..rows)).collect());
        let x = random(&mut rng, rows, width);
        let layers = Arc::new(layers);
        let names: Vec<&str> = layers
            .iter()
            .map(|(kind, _, _)| ["tanh", "softplus", "layer_norm", "gather_scatter", "concat_slice"][*kind as usize])
            .collect();

        let build = {
            let layers = layers.clone();
            move |t: &mut Tape, v: &[Var]| -> Result<Var, TapeError> {
                let mut h = v[0];
                for (kind, w, b) in layers.iter() {
                    let wv = t.constant(w.clone());
                    let bv = t.constant(b.clone());
                    let z = t.matmul(h, wv)?;
                    let z = t.add(z, bv)?;
                    h = match kind {
                        0 => t.tanh(z),
                        1 => t.softplus(z),
                        2 => {
                            let n = t.layer_norm(z, 1e-5);
                            t.add(n, h)?
                        }
                        3 => {
                            let g = t.gather_rows(z, index.clone())?;
                            let g = t.tanh(g);
                            t.scatter_add_rows(g, index.clone(), rows)?
                        }
                        _ => {
                            let c = t.concat_cols(&[z, h])?;
                            let c = t.tanh(c);
                            t.slice_cols(c, 1, 1 + width)?
                        }
                    };
                }
                let sq = t.mul(h, h)?;
                let s = t.sum(sq);
                let n = t.norm(h);
                t.add(s, n)
            }
        };
        let name = format!("composite_{k}[{}]", names.join(">"));
        reports.push(check(&name, &build, &[x], H, tolerance)?);
    }
    Ok(reports)
}
