//! LSTM cells and multi-layer, optionally bidirectional, stacks.
//!
//! Gate layout inside the fused `4H` projection is fixed as
//! input, forget, cell-candidate, output:
//!
//! ```text
//! [i f g o] = x·W_x + h·W_h + b
//! c' = σ(f) ⊙ c + σ(i) ⊙ tanh(g)
//! h' = σ(o) ⊙ tanh(c')
//! ```
//!
//! Checkpoints depend on this order.

use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::layers::{dropout, init_uniform};
use crate::nn::params::{Bound, ParamId, ParamStore};
use crate::rng::SeedRng;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct LstmCell {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmCell {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut SeedRng) -> Self {
        let w_x = store.add(format!("{name}.w_x"), init_uniform(&[input, 4 * hidden], rng));
        let w_h = store.add(format!("{name}.w_h"), init_uniform(&[hidden, 4 * hidden], rng));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[4 * hidden]));
        LstmCell {
            w_x,
            w_h,
            bias,
            input,
            hidden,
        }
    }

    /// One time step over a batch: `x` is `B × input`, `h` and `c` are `B × hidden`.
    pub fn step(&self, tape: &mut Tape, bound: &Bound, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let xs = tape.shape(x);
        if xs.len() != 2 || xs[1] != self.input {
            return Err(Error::shape("lstm_step", xs, &[self.input]));
        }
        let rows = xs[0];
        for v in [h, c] {
            if tape.shape(v) != [rows, self.hidden] {
                return Err(Error::shape("lstm_step", tape.shape(v), &[rows, self.hidden]));
            }
        }
        let hd = self.hidden;
        let zx = tape.matmul(x, bound[self.w_x])?;
        let zh = tape.matmul(h, bound[self.w_h])?;
        let z = tape.add(zx, zh)?;
        let z = tape.add(z, bound[self.bias])?;

        let i = tape.slice(z, 1, 0, hd)?;
        let i = tape.sigmoid(i)?;
        let f = tape.slice(z, 1, hd, 2 * hd)?;
        let f = tape.sigmoid(f)?;
        let g = tape.slice(z, 1, 2 * hd, 3 * hd)?;
        let g = tape.tanh(g)?;
        let o = tape.slice(z, 1, 3 * hd, 4 * hd)?;
        let o = tape.sigmoid(o)?;

        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, g)?;
        let c_next = tape.add(keep, write)?;
        let squashed = tape.tanh(c_next)?;
        let h_next = tape.mul(o, squashed)?;
        Ok((h_next, c_next))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Bidirectional,
}

impl Direction {
    pub fn count(self) -> usize {
        match self {
            Direction::Forward => 1,
            Direction::Bidirectional => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LstmLayer {
    pub forward: LstmCell,
    pub backward: Option<LstmCell>,
}

/// Stacked LSTM layers. `hidden` is per direction.
#[derive(Clone, Debug)]
pub struct LstmStack {
    pub layers: Vec<LstmLayer>,
    pub direction: Direction,
    pub input: usize,
    pub hidden: usize,
    /// Dropout applied to the input of every layer after the first.
    pub dropout: f64,
}

#[derive(Clone, Debug)]
pub struct StackOutput {
    /// Top-layer output per time step, each `B × output_width`.
    pub outputs: Vec<Var>,
    /// Per-layer state after the last real token of each sequence. For a
    /// bidirectional stack the forward and backward states are concatenated.
    pub final_state: Vec<LstmState>,
}

impl LstmStack {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        num_layers: usize,
        direction: Direction,
        dropout: f64,
        rng: &mut SeedRng,
    ) -> Self {
        let mut layers = Vec::with_capacity(num_layers);
        let mut width = input;
        for l in 0..num_layers {
            let forward = LstmCell::new(store, &format!("{name}.l{l}.fwd"), width, hidden, rng);
            let backward = (direction == Direction::Bidirectional)
                .then(|| LstmCell::new(store, &format!("{name}.l{l}.bwd"), width, hidden, rng));
            layers.push(LstmLayer { forward, backward });
            width = hidden * direction.count();
        }
        LstmStack {
            layers,
            direction,
            input,
            hidden,
            dropout,
        }
    }

    pub fn output_width(&self) -> usize {
        self.hidden * self.direction.count()
    }

    /// All-zero per-layer state of width `output_width` for `rows` sequences.
    pub fn zero_state(&self, tape: &mut Tape, rows: usize) -> Result<Vec<LstmState>> {
        let w = self.output_width();
        (0..self.layers.len())
            .map(|_| {
                Ok(LstmState {
                    h: tape.constant(Tensor::zeros(&[rows, w]))?,
                    c: tape.constant(Tensor::zeros(&[rows, w]))?,
                })
            })
            .collect()
    }

    /// Runs the stack over `inputs` (one `B × input` tensor per step).
    ///
    /// Sequence `b` is `lengths[b]` steps long; states stop updating past
    /// that point, so padded steps never leak into real ones. Dropout is
    /// active only when `rng` is given. `initial` seeds a unidirectional
    /// stack (the decoder); bidirectional stacks always start from zero.
    pub fn run(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        inputs: &[Var],
        lengths: &[usize],
        initial: Option<&[LstmState]>,
        rng: Option<&mut SeedRng>,
    ) -> Result<StackOutput> {
        let rows = lengths.len();
        if let Some(init) = initial {
            if self.direction == Direction::Bidirectional || init.len() != self.layers.len() {
                return Err(Error::shape(
                    "run_stack initial state",
                    &[self.layers.len(), self.direction.count()],
                    &[init.len()],
                ));
            }
        }
        let masks = step_masks(lengths, inputs.len());
        let mut rng = rng;
        let mut layer_in = inputs.to_vec();
        let mut final_state = Vec::with_capacity(self.layers.len());

        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                for x in layer_in.iter_mut() {
                    *x = dropout(tape, *x, self.dropout, rng.as_deref_mut())?;
                }
            }
            let start = match initial {
                Some(init) => init[l],
                None => zero_cell_state(tape, rows, self.hidden)?,
            };
            let order: Vec<usize> = (0..layer_in.len()).collect();
            let (fwd_out, fwd_state) =
                scan(tape, bound, &layer.forward, &layer_in, &order, &masks, start)?;
            match &layer.backward {
                None => {
                    layer_in = fwd_out;
                    final_state.push(fwd_state);
                }
                Some(cell) => {
                    let rev: Vec<usize> = order.iter().rev().copied().collect();
                    let start = zero_cell_state(tape, rows, self.hidden)?;
                    let (bwd_out, bwd_state) =
                        scan(tape, bound, cell, &layer_in, &rev, &masks, start)?;
                    layer_in = fwd_out
                        .iter()
                        .zip(&bwd_out)
                        .map(|(&f, &b)| tape.concat(&[f, b], 1))
                        .collect::<Result<_>>()?;
                    final_state.push(LstmState {
                        h: tape.concat(&[fwd_state.h, bwd_state.h], 1)?,
                        c: tape.concat(&[fwd_state.c, bwd_state.c], 1)?,
                    });
                }
            }
        }
        Ok(StackOutput {
            outputs: layer_in,
            final_state,
        })
    }
}

fn zero_cell_state(tape: &mut Tape, rows: usize, hidden: usize) -> Result<LstmState> {
    Ok(LstmState {
        h: tape.constant(Tensor::zeros(&[rows, hidden]))?,
        c: tape.constant(Tensor::zeros(&[rows, hidden]))?,
    })
}

/// Per-step row activity; `None` when every row is active.
fn step_masks(lengths: &[usize], steps: usize) -> Vec<Option<Vec<bool>>> {
    (0..steps)
        .map(|t| {
            let active: Vec<bool> = lengths.iter().map(|&len| t < len).collect();
            (!active.iter().all(|&a| a)).then_some(active)
        })
        .collect()
}

/// Selects `next` on active rows and `prev` elsewhere.
fn blend(tape: &mut Tape, active: &[bool], next: Var, prev: Var) -> Result<Var> {
    let width = tape.shape(next)[1];
    let keep: Vec<f64> = active
        .iter()
        .flat_map(|&a| std::iter::repeat_n(if a { 1.0 } else { 0.0 }, width))
        .collect();
    let hold: Vec<f64> = keep.iter().map(|k| 1.0 - k).collect();
    let keep = tape.constant(Tensor::new(vec![active.len(), width], keep)?)?;
    let hold = tape.constant(Tensor::new(vec![active.len(), width], hold)?)?;
    let a = tape.mul(next, keep)?;
    let b = tape.mul(prev, hold)?;
    tape.add(a, b)
}

fn scan(
    tape: &mut Tape,
    bound: &Bound,
    cell: &LstmCell,
    inputs: &[Var],
    order: &[usize],
    masks: &[Option<Vec<bool>>],
    start: LstmState,
) -> Result<(Vec<Var>, LstmState)> {
    let mut outputs = vec![start.h; inputs.len()];
    let mut state = start;
    for &t in order {
        let (h, c) = cell.step(tape, bound, inputs[t], state.h, state.c)?;
        state = match &masks[t] {
            None => LstmState { h, c },
            Some(active) => LstmState {
                h: blend(tape, active, h, state.h)?,
                c: blend(tape, active, c, state.c)?,
            },
        };
        outputs[t] = state.h;
    }
    Ok((outputs, state))
}
