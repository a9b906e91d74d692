//! Single-layer LSTM classifier: embedding lookup, gated recurrence over
//! every position, final hidden state into a logistic output unit.
//!
//! Gate blocks are stacked in the order input, forget, candidate, output.
//! `w_x` is `4H x E` and `w_h` is `4H x H`, both row-major.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ParamTensors;
use crate::embedding::PAD_ID;
use crate::par::{self, Execution};
use crate::{Error, Label, Result};

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmShape {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

/// Full trainable state. The same type carries gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub shape: LstmShape,
    pub embedding: Vec<f64>,
    pub w_x: Vec<f64>,
    pub w_h: Vec<f64>,
    pub b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

impl LstmParams {
    pub fn zeros(shape: LstmShape) -> Self {
        let LstmShape {
            vocab_size: v,
            embed_dim: e,
            hidden_dim: h,
        } = shape;
        LstmParams {
            shape,
            embedding: vec![0.0; v * e],
            w_x: vec![0.0; 4 * h * e],
            w_h: vec![0.0; 4 * h * h],
            b: vec![0.0; 4 * h],
            out_w: vec![0.0; h],
            out_b: 0.0,
        }
    }

    /// Uniform(-1/sqrt(H), 1/sqrt(H)) everywhere except the padding row,
    /// which stays zero.
    pub fn init(shape: LstmShape, rng: &mut ChaCha8Rng) -> Self {
        let mut p = LstmParams::zeros(shape);
        let k = 1.0 / (shape.hidden_dim as f64).sqrt();
        let e = shape.embed_dim;
        for (i, v) in p.embedding.iter_mut().enumerate() {
            if i / e != PAD_ID as usize {
                *v = rng.gen_range(-k..k);
            }
        }
        for t in [&mut p.w_x, &mut p.w_h, &mut p.b, &mut p.out_w] {
            t.iter_mut().for_each(|v| *v = rng.gen_range(-k..k));
        }
        p.out_b = rng.gen_range(-k..k);
        p
    }

    pub fn seeded(shape: LstmShape, seed: u64) -> Self {
        Self::init(shape, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn embedding_row(&self, id: u32) -> &[f64] {
        let e = self.shape.embed_dim;
        &self.embedding[id as usize * e..(id as usize + 1) * e]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn add_assign(&mut self, other: &LstmParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

impl ParamTensors for LstmParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            &self.embedding,
            &self.w_x,
            &self.w_h,
            &self.b,
            &self.out_w,
            std::slice::from_ref(&self.out_b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.embedding,
            &mut self.w_x,
            &mut self.w_h,
            &mut self.b,
            &mut self.out_w,
            std::slice::from_mut(&mut self.out_b),
        ]
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `out += m * x` for a row-major `rows x x.len()` matrix.
#[inline]
fn gemv_add(m: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += m^T * d`.
#[inline]
fn gemv_t_add(m: &[f64], d: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (dr, row) in d.iter().zip(m.chunks_exact(cols)) {
        if *dr != 0.0 {
            out.iter_mut().zip(row).for_each(|(o, a)| *o += dr * a);
        }
    }
}

/// `m += d x^T`.
#[inline]
fn outer_add(m: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    for (dr, row) in d.iter().zip(m.chunks_exact_mut(cols)) {
        if *dr != 0.0 {
            row.iter_mut().zip(x).for_each(|(a, xv)| *a += dr * xv);
        }
    }
}

/// Per-example activations kept for the backward pass. Every per-step
/// vector is stored flat as `T x H`.
#[derive(Debug, Clone)]
pub struct SequenceCache {
    pub ids: Vec<u32>,
    /// Post-activation gates, `T x 4H` in i, f, g, o order.
    gates: Vec<f64>,
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
    hidden: Vec<f64>,
    pub logit: f64,
    pub prob: f64,
}

impl SequenceCache {
    /// Hidden state after step `t`.
    pub fn hidden_at(&self, t: usize, h: usize) -> &[f64] {
        &self.hidden[t * h..(t + 1) * h]
    }

    pub fn cell_at(&self, t: usize, h: usize) -> &[f64] {
        &self.cells[t * h..(t + 1) * h]
    }

    pub fn steps(&self) -> usize {
        self.ids.len()
    }
}

/// Forward caches for a batch.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub examples: Vec<SequenceCache>,
}

fn check_ids(params: &LstmParams, ids: &[u32]) -> Result<()> {
    match ids.iter().find(|&&id| id as usize >= params.shape.vocab_size) {
        Some(id) => Err(Error::Invalid(format!(
            "token id {id} out of range for vocabulary of size {}",
            params.shape.vocab_size
        ))),
        None => Ok(()),
    }
}

/// Run one sequence through the network.
pub fn forward_sequence(params: &LstmParams, ids: &[u32]) -> SequenceCache {
    let h = params.shape.hidden_dim;
    let steps = ids.len();
    let mut gates = vec![0.0; steps * 4 * h];
    let mut cells = vec![0.0; steps * h];
    let mut tanh_cells = vec![0.0; steps * h];
    let mut hidden = vec![0.0; steps * h];
    let zeros = vec![0.0; h];
    let mut z = vec![0.0; 4 * h];

    for (t, &id) in ids.iter().enumerate() {
        let (h_prev, c_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (&hidden[(t - 1) * h..t * h], &cells[(t - 1) * h..t * h])
        };
        z.copy_from_slice(&params.b);
        gemv_add(&params.w_x, params.embedding_row(id), &mut z);
        gemv_add(&params.w_h, h_prev, &mut z);

        let g = &mut gates[t * 4 * h..(t + 1) * 4 * h];
        for k in 0..h {
            g[k] = sigmoid(z[k]);
            g[h + k] = sigmoid(z[h + k]);
            g[2 * h + k] = z[2 * h + k].tanh();
            g[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        let mut c_new = vec![0.0; h];
        for k in 0..h {
            c_new[k] = g[h + k] * c_prev[k] + g[k] * g[2 * h + k];
        }
        for k in 0..h {
            let tc = c_new[k].tanh();
            tanh_cells[t * h + k] = tc;
            hidden[t * h + k] = g[3 * h + k] * tc;
        }
        cells[t * h..(t + 1) * h].copy_from_slice(&c_new);
    }

    let last = if steps == 0 {
        &zeros[..]
    } else {
        &hidden[(steps - 1) * h..]
    };
    let logit = params.out_w.iter().zip(last).map(|(a, b)| a * b).sum::<f64>() + params.out_b;
    SequenceCache {
        ids: ids.to_vec(),
        gates,
        cells,
        tanh_cells,
        hidden,
        logit,
        prob: sigmoid(logit),
    }
}

/// Batch forward pass returning spam probabilities and the caches needed by
/// [`lstm_backward`].
pub fn lstm_forward(params: &LstmParams, batch: &[Vec<u32>], exec: Execution) -> Result<(Vec<f64>, ForwardCache)> {
    for ids in batch {
        check_ids(params, ids)?;
    }
    let examples = par::map(exec, batch, |ids| forward_sequence(params, ids));
    let probs = examples.iter().map(|c| c.prob).collect();
    Ok((probs, ForwardCache { examples }))
}

/// Mean binary cross-entropy over probabilities clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(probs: &[f64], targets: &[f64]) -> Result<f64> {
    if probs.len() != targets.len() {
        return Err(Error::Invalid(format!(
            "{} probabilities but {} targets",
            probs.len(),
            targets.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let sum: f64 = probs
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / probs.len() as f64)
}

/// Gradient of one example's loss scaled by `scale`, with the embedding
/// gradient kept sparse as `(row id, row gradient)` per timestep.
struct ExampleGrad {
    dense: LstmParams,
    emb_rows: Vec<(u32, Vec<f64>)>,
}

fn backward_sequence(params: &LstmParams, cache: &SequenceCache, target: f64, scale: f64) -> ExampleGrad {
    let LstmShape {
        embed_dim: e,
        hidden_dim: h,
        ..
    } = params.shape;
    let mut grad = LstmParams::zeros(LstmShape {
        vocab_size: 0,
        ..params.shape
    });
    let mut emb_rows = Vec::new();
    let steps = cache.steps();

    // d(BCE)/d(logit) = p - y; the clamp only affects the reported loss.
    let dlogit = (cache.prob - target) * scale;
    grad.out_b = dlogit;
    if steps == 0 {
        return ExampleGrad { dense: grad, emb_rows };
    }
    let h_last = cache.hidden_at(steps - 1, h);
    grad.out_w.iter_mut().zip(h_last).for_each(|(g, hv)| *g = dlogit * hv);

    let mut dh: Vec<f64> = params.out_w.iter().map(|w| dlogit * w).collect();
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    let zeros = vec![0.0; h];

    for t in (0..steps).rev() {
        let g = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        let tc = &cache.tanh_cells[t * h..(t + 1) * h];
        let c_prev = if t == 0 { &zeros[..] } else { cache.cell_at(t - 1, h) };
        let h_prev = if t == 0 { &zeros[..] } else { cache.hidden_at(t - 1, h) };
        for k in 0..h {
            let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let d_o = dh[k] * tc[k];
            let dc = dc_next[k] + dh[k] * o * (1.0 - tc[k] * tc[k]);
            dz[k] = dc * gg * i * (1.0 - i);
            dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dc * i * (1.0 - gg * gg);
            dz[3 * h + k] = d_o * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        let id = cache.ids[t];
        grad.b.iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
        outer_add(&mut grad.w_x, &dz, params.embedding_row(id));
        outer_add(&mut grad.w_h, &dz, h_prev);
        if id != PAD_ID {
            let mut dx = vec![0.0; e];
            gemv_t_add(&params.w_x, &dz, &mut dx);
            emb_rows.push((id, dx));
        }
        dh.iter_mut().for_each(|v| *v = 0.0);
        gemv_t_add(&params.w_h, &dz, &mut dh);
    }
    ExampleGrad { dense: grad, emb_rows }
}

/// Exact gradient of the mean BCE over the batch. Per-example gradients are
/// computed independently and summed in batch order, so the result does not
/// depend on the execution mode. The padding row's gradient is zero.
pub fn lstm_backward(
    params: &LstmParams,
    cache: &ForwardCache,
    targets: &[f64],
    exec: Execution,
) -> Result<LstmParams> {
    if cache.examples.len() != targets.len() {
        return Err(Error::Invalid(format!(
            "cache holds {} examples but {} targets were given",
            cache.examples.len(),
            targets.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let scale = 1.0 / targets.len() as f64;
    let per_example = par::map_range(exec, targets.len(), |i| {
        backward_sequence(params, &cache.examples[i], targets[i], scale)
    });
    let e = params.shape.embed_dim;
    let mut total = LstmParams::zeros(params.shape);
    let mut dense = LstmParams::zeros(LstmShape {
        vocab_size: 0,
        ..params.shape
    });
    for ex in &per_example {
        dense.add_assign(&ex.dense);
        for (id, row) in &ex.emb_rows {
            let dst = &mut total.embedding[*id as usize * e..(*id as usize + 1) * e];
            dst.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
    }
    total.w_x = dense.w_x;
    total.w_h = dense.w_h;
    total.b = dense.b;
    total.out_w = dense.out_w;
    total.out_b = dense.out_b;
    Ok(total)
}

/// Spam iff probability >= 0.5.
pub fn predict_lstm(params: &LstmParams, batch: &[Vec<u32>], exec: Execution) -> Result<Vec<(Label, f64)>> {
    let (probs, _) = lstm_forward(params, batch, exec)?;
    Ok(probs
        .into_iter()
        .map(|p| (if p >= 0.5 { Label::Spam } else { Label::Ham }, p))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LstmParams {
        LstmParams::seeded(
            LstmShape {
                vocab_size: 6,
                embed_dim: 3,
                hidden_dim: 3,
            },
            11,
        )
    }

    #[test]
    fn zero_params_give_half() {
        let p = LstmParams::zeros(LstmShape {
            vocab_size: 5,
            embed_dim: 4,
            hidden_dim: 4,
        });
        let (probs, _) = lstm_forward(&p, &[vec![1, 2, 3], vec![0, 0, 4]], Execution::Sequential).unwrap();
        assert_eq!(probs, vec![0.5, 0.5]);
    }

    #[test]
    fn all_padding_inputs_agree() {
        let p = tiny();
        let (probs, _) = lstm_forward(&p, &[vec![0; 4], vec![0; 4]], Execution::Sequential).unwrap();
        assert_eq!(probs[0], probs[1]);
        let (again, _) = lstm_forward(&p, &[vec![0; 4]], Execution::Sequential).unwrap();
        assert_eq!(again[0], probs[0]);
    }

    #[test]
    fn identical_sequences_identical_probs() {
        let p = tiny();
        let (probs, _) = lstm_forward(&p, &[vec![2, 3, 1, 5], vec![2, 3, 1, 5]], Execution::Parallel).unwrap();
        assert_eq!(probs[0], probs[1]);
    }

    #[test]
    fn out_of_range_id_rejected() {
        assert!(lstm_forward(&tiny(), &[vec![6]], Execution::Sequential).is_err());
    }

    #[test]
    fn bce_cases() {
        assert!((bce_loss(&[0.5], &[1.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap() < 1.1e-7);
        assert!(bce_loss(&[0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn untouched_rows_get_zero_gradient() {
        let p = tiny();
        let batch = vec![vec![2, 3, 0, 0]];
        let (_, cache) = lstm_forward(&p, &batch, Execution::Sequential).unwrap();
        let g = lstm_backward(&p, &cache, &[1.0], Execution::Sequential).unwrap();
        for row in [0usize, 1, 4, 5] {
            assert!(
                g.embedding[row * 3..(row + 1) * 3].iter().all(|&v| v == 0.0),
                "row {row}"
            );
        }
        assert!(g.embedding[2 * 3..4 * 3].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let p = tiny();
        let batch = vec![vec![2, 3, 4, 1], vec![5, 5, 0, 0]];
        let t = [1.0, 0.0];
        let (_, c1) = lstm_forward(&p, &batch, Execution::Sequential).unwrap();
        let g1 = lstm_backward(&p, &c1, &t, Execution::Sequential).unwrap();
        let doubled = [batch.clone(), batch].concat();
        let (_, c2) = lstm_forward(&p, &doubled, Execution::Sequential).unwrap();
        let g2 = lstm_backward(&p, &c2, &[1.0, 0.0, 1.0, 0.0], Execution::Sequential).unwrap();
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-15 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn hidden_state_bounded() {
        let p = tiny();
        let c = forward_sequence(&p, &[2, 3, 4, 5, 1, 1, 2]);
        for t in 0..c.steps() {
            assert!(c.hidden_at(t, 3).iter().all(|v| v.abs() <= 1.0));
            assert!(c.cell_at(t, 3).iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn raising_out_bias_raises_probs() {
        let mut p = tiny();
        let batch = vec![vec![2, 3, 4, 1], vec![5, 5, 0, 0]];
        let before = predict_lstm(&p, &batch, Execution::Sequential).unwrap();
        p.out_b += 0.25;
        let after = predict_lstm(&p, &batch, Execution::Sequential).unwrap();
        assert!(before.iter().zip(&after).all(|(a, b)| b.1 > a.1));
    }

    #[test]
    fn half_probability_is_spam() {
        let p = LstmParams::zeros(LstmShape {
            vocab_size: 3,
            embed_dim: 2,
            hidden_dim: 2,
        });
        assert_eq!(
            predict_lstm(&p, &[vec![1, 2]], Execution::Sequential).unwrap()[0],
            (Label::Spam, 0.5)
        );
    }
}
