//! Sequence loss, value clipping and Adam.
//!
//! A training step is always `backward → clip_by_value → Adam::step`.

use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub struct SequenceLoss {
    pub loss: Var,
    /// Sum of the position weights (number of real tokens).
    pub total_weight: f64,
    /// Set when every weight was zero; the loss is then exactly 0.
    pub all_padding: bool,
}

/// Weighted token cross-entropy, normalized by the total weight.
///
/// `logits` is `N × V`; `targets` and `weights` have one entry per row.
/// Rows with zero weight contribute nothing, whatever their logits.
pub fn sequence_loss(tape: &mut Tape, logits: Var, targets: &[usize], weights: &[f64]) -> Result<SequenceLoss> {
    let shape = tape.shape(logits).to_vec();
    if shape.len() != 2 || shape[0] != targets.len() || targets.len() != weights.len() {
        return Err(Error::shape("sequence_loss", &shape, &[targets.len(), weights.len()]));
    }
    let vocab = shape[1];
    if let Some(&id) = targets.iter().find(|&&t| t >= vocab) {
        return Err(Error::TokenOutOfRange { id, size: vocab });
    }
    let total_weight: f64 = weights.iter().sum();
    let log_probs = tape.log_softmax(logits)?;
    let picked = tape.pick(log_probs, targets)?;
    let w = tape.constant(Tensor::vector(weights.to_vec()))?;
    let weighted = tape.mul(picked, w)?;
    let total = tape.sum(weighted)?;
    let loss = tape.scale(total, -1.0 / total_weight.max(1.0))?;
    Ok(SequenceLoss {
        loss,
        total_weight,
        all_padding: total_weight == 0.0,
    })
}

/// Element-wise clipping bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub lower: f64,
    pub upper: f64,
}

impl Default for ClipSpec {
    fn default() -> Self {
        ClipSpec {
            lower: -5.0,
            upper: 5.0,
        }
    }
}

impl ClipSpec {
    pub fn symmetric(bound: f64) -> Result<Self> {
        ClipSpec {
            lower: -bound,
            upper: bound,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.lower < self.upper {
            Ok(self)
        } else {
            Err(Error::Config(format!(
                "clip lower bound {} must be below upper bound {}",
                self.lower, self.upper
            )))
        }
    }
}

/// Clamps every gradient entry into `[lower, upper]`. NaNs pass through so
/// the optimizer can still detect them.
pub fn clip_by_value(grads: &mut [Tensor], spec: ClipSpec) {
    for g in grads {
        for v in g.data_mut() {
            *v = v.clamp(spec.lower, spec.upper);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers mirror the parameter store.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        Adam {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update. A non-finite gradient aborts the whole step
    /// before anything is modified.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        if grads.len() != store.len() {
            return Err(Error::shape("adam_step", &[store.len()], &[grads.len()]));
        }
        for (p, g) in store.iter().zip(grads) {
            if g.shape() != p.value.shape() {
                return Err(Error::shape("adam_step", p.value.shape(), g.shape()));
            }
            if !g.all_finite() {
                return Err(Error::NonFinite(format!("gradient of `{}`", p.name)));
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.t as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, (p, g)) in store.iter_mut().zip(grads).enumerate() {
            if !p.trainable {
                continue;
            }
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            for (j, (w, &gj)) in p.value.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
