use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::params::{Bound, ParamId, ParamStore};
use crate::rng::SeedRng;
use crate::tensor::Tensor;

/// Half-width of the uniform initializer used for every weight.
pub const INIT_RANGE: f64 = 0.1;

pub(crate) fn init_uniform(shape: &[usize], rng: &mut SeedRng) -> Tensor {
    Tensor::uniform(shape, -INIT_RANGE, INIT_RANGE, rng)
}

/// Token embedding table, `vocab × dim`.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, vocab: usize, dim: usize, rng: &mut SeedRng) -> Self {
        let table = store.add(format!("{name}.table"), init_uniform(&[vocab, dim], rng));
        Embedding { table, vocab, dim }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, ids: &[usize]) -> Result<Var> {
        if let Some(&id) = ids.iter().find(|&&id| id >= self.vocab) {
            return Err(Error::TokenOutOfRange {
                id,
                size: self.vocab,
            });
        }
        tape.gather_rows(bound[self.table], ids)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Tanh,
    Sigmoid,
}

/// Affine layer `x · W + b` with an optional squashing function.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl Dense {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut SeedRng,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), init_uniform(&[input, output], rng));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[output]));
        Dense {
            weight,
            bias,
            input,
            output,
            activation,
        }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let z = tape.matmul(x, bound[self.weight])?;
        let z = tape.add(z, bound[self.bias])?;
        match self.activation {
            Activation::None => Ok(z),
            Activation::Tanh => tape.tanh(z),
            Activation::Sigmoid => tape.sigmoid(z),
        }
    }
}

/// Inverted dropout. With no RNG (evaluation) or a zero rate this is the
/// identity and records nothing.
pub fn dropout(tape: &mut Tape, x: Var, rate: f64, rng: Option<&mut SeedRng>) -> Result<Var> {
    let Some(rng) = rng else { return Ok(x) };
    if rate <= 0.0 {
        return Ok(x);
    }
    let keep = 1.0 - rate;
    let shape = tape.shape(x).to_vec();
    let mask: Vec<f64> = (0..shape.iter().product::<usize>())
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    let mask = tape.constant(Tensor::new(shape, mask)?)?;
    tape.mul(x, mask)
}
