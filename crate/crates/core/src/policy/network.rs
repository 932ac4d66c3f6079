//! Two-layer tanh trunk with a categorical policy head and a scalar value
//! head. All parameters live in one flat buffer so optimizers, finite
//! differences and checkpoints can treat them uniformly.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Name, shape and location of one tensor inside [`PolicyParams::data`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSlot {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    input_dim: usize,
    hidden: usize,
    n_actions: usize,
    pub data: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Activations {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

fn layout(input_dim: usize, hidden: usize, n_actions: usize) -> Vec<TensorSlot> {
    let shapes = [
        ("trunk.0.weight", hidden, input_dim),
        ("trunk.0.bias", hidden, 1),
        ("trunk.1.weight", hidden, hidden),
        ("trunk.1.bias", hidden, 1),
        ("policy.weight", n_actions, hidden),
        ("policy.bias", n_actions, 1),
        ("value.weight", 1, hidden),
        ("value.bias", 1, 1),
    ];
    let mut offset = 0;
    shapes
        .into_iter()
        .map(|(name, rows, cols)| {
            let range = offset..offset + rows * cols;
            offset = range.end;
            TensorSlot {
                name,
                rows,
                cols,
                range,
            }
        })
        .collect()
}

const W1: usize = 0;
const B1: usize = 1;
const W2: usize = 2;
const B2: usize = 3;
const WP: usize = 4;
const BP: usize = 5;
const WV: usize = 6;
const BV: usize = 7;

/// Orthonormal rows or columns (whichever are fewer), scaled by `gain`.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (long, short) = (rows.max(cols), rows.min(cols));
    // `short` vectors of length `long`, Gram-Schmidt orthonormalized
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| rng.sample(StandardNormal)).collect();
        for u in &basis {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = gain
                * if rows >= cols {
                    basis[c][r]
                } else {
                    basis[r][c]
                };
        }
    }
    out
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Draws from `softmax(logits)`; returns the action and its log-probability.
pub fn sample_action<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    let logp = log_softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut action = logp.len() - 1;
    for (a, lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            action = a;
            break;
        }
    }
    (action, logp[action])
}

/// Highest-logit action, lowest index on ties.
pub fn greedy_action(logits: &[f64]) -> usize {
    let mut best = 0;
    for (a, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = a;
        }
    }
    best
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o = b[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl PolicyParams {
    /// All-zero parameters.
    pub fn zeros(n_actions: usize, hidden: usize) -> Self {
        let input_dim = crate::binpack::Observation::len_for(n_actions);
        let len = layout(input_dim, hidden, n_actions)
            .last()
            .unwrap()
            .range
            .end;
        Self {
            input_dim,
            hidden,
            n_actions,
            data: vec![0.0; len],
        }
    }

    /// Orthogonal weights (gain sqrt 2 in the trunk, 0.01 on both heads)
    /// and zero biases.
    pub fn init<R: Rng + ?Sized>(n_actions: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(n_actions, hidden);
        let slots = p.slots();
        let gains = [(W1, 2f64.sqrt()), (W2, 2f64.sqrt()), (WP, 0.01), (WV, 0.01)];
        for (idx, gain) in gains {
            let s = &slots[idx];
            let w = orthogonal(s.rows, s.cols, gain, rng);
            p.data[s.range.clone()].copy_from_slice(&w);
        }
        p
    }

    /// Rebuilds parameters from a flat buffer; used by checkpoint loading.
    pub fn from_parts(
        input_dim: usize,
        hidden: usize,
        n_actions: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        let expected = layout(input_dim, hidden, n_actions)
            .last()
            .unwrap()
            .range
            .end;
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "parameter buffer has {} values, architecture needs {expected}",
                data.len()
            )));
        }
        Ok(Self {
            input_dim,
            hidden,
            n_actions,
            data,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn slots(&self) -> Vec<TensorSlot> {
        layout(self.input_dim, self.hidden, self.n_actions)
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.slots()
            .into_iter()
            .find(|s| s.name == name)
            .map(|s| &self.data[s.range])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn slice(&self, slots: &[TensorSlot], idx: usize) -> &[f64] {
        &self.data[slots[idx].range.clone()]
    }

    /// Logits over the `n_actions` items and the value estimate.
    pub fn forward(&self, obs: &[f64]) -> Result<(Vec<f64>, f64)> {
        if obs.len() != self.input_dim {
            return Err(Error::invalid(format!(
                "observation has length {}, network expects {}",
                obs.len(),
                self.input_dim
            )));
        }
        let act = self.forward_cached(obs);
        Ok((act.logits, act.value))
    }

    pub(crate) fn forward_cached(&self, x: &[f64]) -> Activations {
        debug_assert_eq!(x.len(), self.input_dim);
        let slots = self.slots();
        let h = self.hidden;
        let mut h1 = vec![0.0; h];
        affine(self.slice(&slots, W1), self.slice(&slots, B1), x, &mut h1);
        h1.iter_mut().for_each(|v| *v = v.tanh());
        let mut h2 = vec![0.0; h];
        affine(self.slice(&slots, W2), self.slice(&slots, B2), &h1, &mut h2);
        h2.iter_mut().for_each(|v| *v = v.tanh());
        let mut logits = vec![0.0; self.n_actions];
        affine(
            self.slice(&slots, WP),
            self.slice(&slots, BP),
            &h2,
            &mut logits,
        );
        let mut value = [0.0];
        affine(
            self.slice(&slots, WV),
            self.slice(&slots, BV),
            &h2,
            &mut value,
        );
        Activations {
            h1,
            h2,
            logits,
            value: value[0],
        }
    }

    /// Accumulates into `grad` the parameter gradient given upstream
    /// gradients on the logits and the value.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        act: &Activations,
        dlogits: &[f64],
        dvalue: f64,
        grad: &mut [f64],
    ) {
        let slots = self.slots();
        let h = self.hidden;
        let wp = self.slice(&slots, WP);
        let wv = self.slice(&slots, WV);
        let w2 = self.slice(&slots, W2);

        let mut dh2 = vec![0.0; h];
        {
            let g = &mut grad[slots[WP].range.clone()];
            for (a, &d) in dlogits.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for k in 0..h {
                    g[a * h + k] += d * act.h2[k];
                    dh2[k] += d * wp[a * h + k];
                }
            }
        }
        for (g, &d) in grad[slots[BP].range.clone()].iter_mut().zip(dlogits) {
            *g += d;
        }
        {
            let g = &mut grad[slots[WV].range.clone()];
            for k in 0..h {
                g[k] += dvalue * act.h2[k];
                dh2[k] += dvalue * wv[k];
            }
        }
        grad[slots[BV].range.start] += dvalue;

        let dz2: Vec<f64> = dh2
            .iter()
            .zip(&act.h2)
            .map(|(d, y)| d * (1.0 - y * y))
            .collect();
        let mut dh1 = vec![0.0; h];
        {
            let g = &mut grad[slots[W2].range.clone()];
            for r in 0..h {
                for k in 0..h {
                    g[r * h + k] += dz2[r] * act.h1[k];
                    dh1[k] += dz2[r] * w2[r * h + k];
                }
            }
        }
        for (g, d) in grad[slots[B2].range.clone()].iter_mut().zip(&dz2) {
            *g += d;
        }

        let dz1: Vec<f64> = dh1
            .iter()
            .zip(&act.h1)
            .map(|(d, y)| d * (1.0 - y * y))
            .collect();
        let cols = self.input_dim;
        {
            let g = &mut grad[slots[W1].range.clone()];
            for r in 0..h {
                if dz1[r] == 0.0 {
                    continue;
                }
                for (k, &xk) in x.iter().enumerate() {
                    g[r * cols + k] += dz1[r] * xk;
                }
            }
        }
        for (g, d) in grad[slots[B1].range.clone()].iter_mut().zip(&dz1) {
            *g += d;
        }
    }
}
