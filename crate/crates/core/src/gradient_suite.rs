//! Finite-difference checks of every differentiable building block.
//!
//! Each case draws seeded random instances, projects the output onto a
//! random direction when it is not already scalar, and compares the tape
//! gradient against central differences in f64.

use rand::Rng;

use crate::adversarial::{decoder_features, discriminator_loss, AdvConfig, Discriminator};
use crate::autograd::{check_gradients, finite_difference_check, Tape, Var};
use crate::data::Batch;
use crate::error::Result;
use crate::nn::{Activation, Bound, Dense, Direction, Embedding, LstmCell, LstmStack, ParamStore};
use crate::optim::sequence_loss;
use crate::rng::{self, SeedRng};
use crate::seq2seq::{ModelConfig, Seq2SeqModel, Variant};
use crate::tensor::Tensor;

/// Central-difference step.
pub const EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct CaseResult {
    pub name: &'static str,
    pub instances: usize,
    pub max_error: f64,
}

fn rand_tensor(rng: &mut SeedRng, shape: &[usize], range: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-range..range)).collect()).unwrap()
}

/// `sum(out ⊙ r)` for a fixed random `r` of the same shape.
fn project(tape: &mut Tape, out: Var, r: &Tensor) -> Result<Var> {
    let r = tape.constant(r.clone())?;
    let p = tape.mul(out, r)?;
    tape.sum(p)
}

type Build = fn(&mut Tape, &[Var], &Case) -> Result<Var>;

/// Fixed per-instance data a case needs besides its parameters.
struct Case {
    r: Tensor,
    ids: Vec<usize>,
    axis: usize,
}

fn op_case(name: &'static str, instances: usize, seed: u64, make: fn(&mut SeedRng) -> (Vec<Tensor>, Case), build: Build) -> Result<CaseResult> {
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mut rng = rng::stream(seed, i as u64);
        let (params, case) = make(&mut rng);
        let err = finite_difference_check(|tape, vars| build(tape, vars, &case), &params, EPS)?;
        worst = worst.max(err);
    }
    Ok(CaseResult {
        name,
        instances,
        max_error: worst,
    })
}

/// Gradient check for a function of every entry of `store`.
pub fn check_store<F>(store: &ParamStore, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    let params: Vec<Tensor> = store.iter().map(|p| p.value.clone()).collect();
    let with_values = |values: &[Tensor]| {
        let mut s = store.clone();
        for (p, v) in s.iter_mut().zip(values) {
            p.value = v.clone();
        }
        s
    };
    let value = |values: &[Tensor]| -> Result<f64> {
        let s = with_values(values);
        let mut tape = Tape::new();
        let bound = s.bind(&mut tape, false)?;
        let out = f(&mut tape, &bound)?;
        Ok(tape.value(out).item())
    };
    let grad = |values: &[Tensor]| -> Result<Vec<Tensor>> {
        let s = with_values(values);
        let mut tape = Tape::new();
        let bound = s.bind(&mut tape, true)?;
        let out = f(&mut tape, &bound)?;
        let mut g = tape.backward(out)?;
        Ok(s.gradients(&bound, &mut g))
    };
    check_gradients(value, grad, &params, EPS)
}

/// Re-draws every parameter uniformly in `±range` so gradients are not tiny.
fn widen(store: &mut ParamStore, rng: &mut SeedRng, range: f64) {
    for p in store.iter_mut() {
        p.value = rand_tensor(rng, p.value.shape(), range);
    }
}

fn model_case<F>(name: &'static str, instances: usize, seed: u64, f: F) -> Result<CaseResult>
where
    F: Fn(&mut SeedRng) -> Result<f64>,
{
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        worst = worst.max(f(&mut rng::stream(seed, i as u64))?);
    }
    Ok(CaseResult {
        name,
        instances,
        max_error: worst,
    })
}

fn dims(rng: &mut SeedRng) -> (usize, usize) {
    (rng.gen_range(1..=4), rng.gen_range(1..=4))
}

fn plain(rng: &mut SeedRng, shape: &[usize]) -> Case {
    Case {
        r: rand_tensor(rng, shape, 1.0),
        ids: Vec::new(),
        axis: 0,
    }
}

fn ragged_lengths(rng: &mut SeedRng, rows: usize, steps: usize) -> Vec<usize> {
    let mut l: Vec<usize> = (0..rows).map(|_| rng.gen_range(1..=steps)).collect();
    l[0] = steps;
    l
}

/// Runs every case with `instances` random instances each.
pub fn run(instances: usize) -> Result<Vec<CaseResult>> {
    let mut out = Vec::new();

    out.push(op_case(
        "matmul",
        instances,
        1,
        |rng| {
            let (m, k) = dims(rng);
            let n = rng.gen_range(1..=4);
            let c = plain(rng, &[m, n]);
            (vec![rand_tensor(rng, &[m, k], 1.0), rand_tensor(rng, &[k, n], 1.0)], c)
        },
        |t, v, c| {
            let y = t.matmul(v[0], v[1])?;
            project(t, y, &c.r)
        },
    )?);

    fn binary(rng: &mut SeedRng, broadcast: bool) -> (Vec<Tensor>, Case) {
        let (m, n) = dims(rng);
        let c = plain(rng, &[m, n]);
        let rhs = if broadcast { vec![n] } else { vec![m, n] };
        (vec![rand_tensor(rng, &[m, n], 1.0), rand_tensor(rng, &rhs, 1.0)], c)
    }
    for (name, bc, op) in [
        ("add", false, 0),
        ("add (broadcast)", true, 0),
        ("sub", false, 1),
        ("sub (broadcast)", true, 1),
        ("mul", false, 2),
        ("mul (broadcast)", true, 2),
    ] {
        let make: fn(&mut SeedRng) -> (Vec<Tensor>, Case) = if bc { |r| binary(r, true) } else { |r| binary(r, false) };
        let build: Build = match op {
            0 => |t, v, c| {
                let y = t.add(v[0], v[1])?;
                project(t, y, &c.r)
            },
            1 => |t, v, c| {
                let y = t.sub(v[0], v[1])?;
                project(t, y, &c.r)
            },
            _ => |t, v, c| {
                let y = t.mul(v[0], v[1])?;
                project(t, y, &c.r)
            },
        };
        out.push(op_case(name, instances, 2 + op, make, build)?);
    }

    out.push(op_case(
        "scale",
        instances,
        5,
        |rng| {
            let (m, n) = dims(rng);
            let c = plain(rng, &[m, n]);
            (vec![rand_tensor(rng, &[m, n], 1.0)], c)
        },
        |t, v, c| {
            let y = t.scale(v[0], -1.7)?;
            project(t, y, &c.r)
        },
    )?);

    out.push(op_case(
        "concat",
        instances,
        6,
        |rng| {
            let (m, n) = dims(rng);
            let axis = rng.gen_range(0..2);
            let extra = rng.gen_range(1..=3);
            let second = if axis == 0 { [extra, n] } else { [m, extra] };
            let total = if axis == 0 { [m + extra, n] } else { [m, n + extra] };
            let mut c = plain(rng, &total);
            c.axis = axis;
            (vec![rand_tensor(rng, &[m, n], 1.0), rand_tensor(rng, &second, 1.0)], c)
        },
        |t, v, c| {
            let y = t.concat(&[v[0], v[1]], c.axis)?;
            project(t, y, &c.r)
        },
    )?);

    out.push(op_case(
        "slice",
        instances,
        7,
        |rng| {
            let m = rng.gen_range(2..=5);
            let n = rng.gen_range(2..=5);
            let axis = rng.gen_range(0..2);
            let len = if axis == 0 { m } else { n };
            let start = rng.gen_range(0..len - 1);
            let end = rng.gen_range(start + 1..=len);
            let shape = if axis == 0 { [end - start, n] } else { [m, end - start] };
            let mut c = plain(rng, &shape);
            c.axis = axis;
            c.ids = vec![start, end];
            (vec![rand_tensor(rng, &[m, n], 1.0)], c)
        },
        |t, v, c| {
            let y = t.slice(v[0], c.axis, c.ids[0], c.ids[1])?;
            project(t, y, &c.r)
        },
    )?);

    out.push(op_case(
        "gather_rows",
        instances,
        8,
        |rng| {
            let (m, n) = dims(rng);
            let k = rng.gen_range(1..=6);
            let mut c = plain(rng, &[k, n]);
            c.ids = (0..k).map(|_| rng.gen_range(0..m)).collect();
            (vec![rand_tensor(rng, &[m, n], 1.0)], c)
        },
        |t, v, c| {
            let y = t.gather_rows(v[0], &c.ids)?;
            project(t, y, &c.r)
        },
    )?);

    out.push(op_case(
        "pick",
        instances,
        9,
        |rng| {
            let (m, n) = dims(rng);
            let mut c = plain(rng, &[m]);
            c.ids = (0..m).map(|_| rng.gen_range(0..n)).collect();
            (vec![rand_tensor(rng, &[m, n], 1.0)], c)
        },
        |t, v, c| {
            let y = t.pick(v[0], &c.ids)?;
            project(t, y, &c.r)
        },
    )?);

    let unary: [(&'static str, Build); 7] = [
        ("sigmoid", |t, v, c| {
            let y = t.sigmoid(v[0])?;
            project(t, y, &c.r)
        }),
        ("tanh", |t, v, c| {
            let y = t.tanh(v[0])?;
            project(t, y, &c.r)
        }),
        ("log_sigmoid", |t, v, c| {
            let y = t.log_sigmoid(v[0])?;
            project(t, y, &c.r)
        }),
        ("softmax", |t, v, c| {
            let y = t.softmax(v[0])?;
            project(t, y, &c.r)
        }),
        ("log_softmax", |t, v, c| {
            let y = t.log_softmax(v[0])?;
            project(t, y, &c.r)
        }),
        ("sum", |t, v, _| t.sum(v[0])),
        ("mean", |t, v, _| t.mean(v[0])),
    ];
    for (k, (name, build)) in unary.into_iter().enumerate() {
        out.push(op_case(
            name,
            instances,
            10 + k as u64,
            |rng| {
                let (m, n) = dims(rng);
                let c = plain(rng, &[m, n]);
                (vec![rand_tensor(rng, &[m, n], 3.0)], c)
            },
            build,
        )?);
    }

    out.push(op_case(
        "sequence_loss",
        instances,
        20,
        |rng| {
            let n = rng.gen_range(1..=6);
            let v = rng.gen_range(2..=6);
            let mut c = plain(rng, &[n]);
            c.ids = (0..n).map(|_| rng.gen_range(0..v)).collect();
            // Weights ride in `r`: a random 0/1 pattern with at least one 1.
            let mut w: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.7))).collect();
            w[0] = 1.0;
            c.r = Tensor::vector(w);
            (vec![rand_tensor(rng, &[n, v], 3.0)], c)
        },
        |t, v, c| Ok(sequence_loss(t, v[0], &c.ids, c.r.data())?.loss),
    )?);

    out.push(model_case("embedding + dense", instances, 21, |rng| {
        let mut store = ParamStore::new();
        let emb = Embedding::new(&mut store, "e", 6, 3, rng);
        let d = Dense::new(&mut store, "d", 3, 2, Activation::Tanh, rng);
        widen(&mut store, rng, 1.0);
        let ids: Vec<usize> = (0..4).map(|_| rng.gen_range(0..6)).collect();
        let r = rand_tensor(rng, &[4, 2], 1.0);
        check_store(&store, |t, b| {
            let x = emb.forward(t, b, &ids)?;
            let y = d.forward(t, b, x)?;
            project(t, y, &r)
        })
    })?);

    out.push(model_case("lstm cell", instances, 22, |rng| {
        let mut store = ParamStore::new();
        let (input, hidden, rows) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=3));
        let cell = LstmCell::new(&mut store, "cell", input, hidden, rng);
        widen(&mut store, rng, 1.0);
        let x = rand_tensor(rng, &[rows, input], 1.0);
        let h = rand_tensor(rng, &[rows, hidden], 1.0);
        let c = rand_tensor(rng, &[rows, hidden], 1.0);
        let rh = rand_tensor(rng, &[rows, hidden], 1.0);
        let rc = rand_tensor(rng, &[rows, hidden], 1.0);
        check_store(&store, |t, b| {
            let (x, h, c) = (t.constant(x.clone())?, t.constant(h.clone())?, t.constant(c.clone())?);
            let (h2, c2) = cell.step(t, b, x, h, c)?;
            let a = project(t, h2, &rh)?;
            let b2 = project(t, c2, &rc)?;
            t.add(a, b2)
        })
    })?);

    out.push(model_case("bidirectional stack", instances, 23, |rng| {
        let mut store = ParamStore::new();
        let (input, hidden) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let (rows, steps) = (rng.gen_range(1..=3), rng.gen_range(1..=4));
        let stack = LstmStack::new(&mut store, "s", input, hidden, 2, Direction::Bidirectional, 0.0, rng);
        widen(&mut store, rng, 0.8);
        let xs: Vec<Tensor> = (0..steps).map(|_| rand_tensor(rng, &[rows, input], 1.0)).collect();
        let lengths = ragged_lengths(rng, rows, steps);
        let rs: Vec<Tensor> = (0..steps).map(|_| rand_tensor(rng, &[rows, 2 * hidden], 1.0)).collect();
        let rf = rand_tensor(rng, &[rows, 2 * hidden], 1.0);
        check_store(&store, |t, b| {
            let inputs = xs.iter().map(|x| t.constant(x.clone())).collect::<Result<Vec<_>>>()?;
            let run = stack.run(t, b, &inputs, &lengths, None, None)?;
            let mut total = project(t, run.final_state[1].c, &rf)?;
            for (o, r) in run.outputs.iter().zip(&rs) {
                let p = project(t, *o, r)?;
                total = t.add(total, p)?;
            }
            Ok(total)
        })
    })?);

    out.push(model_case("seq2seq loss + decoder features", instances, 24, |rng| {
        let mut cfg = ModelConfig::new(Variant::Reversed, 8);
        cfg.embedding = 2;
        cfg.hidden = 2;
        cfg.layers = 1;
        cfg.seed = rng.gen();
        let mut model = Seq2SeqModel::new(cfg)?;
        widen(&mut model.store, rng, 0.8);
        let seqs: Vec<Vec<usize>> = (0..2)
            .map(|_| (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(4..8)).collect())
            .collect();
        let refs: Vec<&[usize]> = seqs.iter().map(Vec::as_slice).collect();
        let batch = model.prepare(&Batch::autoencoder(&refs));
        let r = rand_tensor(rng, &[2, 2], 1.0);
        check_store(&model.store, |t, b| {
            let fwd = model.forward(t, b, &batch, None)?;
            let f = decoder_features(t, &fwd, &batch)?;
            let p = project(t, f, &r)?;
            t.add(fwd.loss.loss, p)
        })
    })?);

    out.push(model_case("discriminator", instances, 25, |rng| {
        let cfg = AdvConfig {
            minibatch_stat: rng.gen_bool(0.5),
            disc_hidden: rng.gen_range(1..=4),
            ..AdvConfig::default()
        };
        let width = rng.gen_range(1..=3);
        let mut disc = Discriminator::new(width, &cfg, rng.gen());
        widen(&mut disc.store, rng, 1.0);
        let (nr, nf) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let real = rand_tensor(rng, &[nr, width], 1.0);
        let fake = rand_tensor(rng, &[nf, width], 1.0);
        let d = disc.clone();
        check_store(&disc.store, |t, b| {
            let (r, f) = (t.constant(real.clone())?, t.constant(fake.clone())?);
            discriminator_loss(t, &d, b, r, f)
        })
    })?);

    out.push(model_case("discriminator features input", instances, 26, |rng| {
        // Gradient with respect to the features themselves, which is the
        // path the generator term relies on.
        let cfg = AdvConfig {
            disc_hidden: 3,
            ..AdvConfig::default()
        };
        let width = rng.gen_range(1..=3);
        let mut disc = Discriminator::new(width, &cfg, rng.gen());
        widen(&mut disc.store, rng, 1.0);
        let rows = rng.gen_range(1..=3);
        let feats = rand_tensor(rng, &[rows, width], 1.0);
        let bound_store = disc.store.clone();
        finite_difference_check(
            |t, v| {
                let b = bound_store.bind(t, false)?;
                let z = disc.logits(t, &b, v[0])?;
                let l = t.log_sigmoid(z)?;
                t.mean(l)
            },
            &[feats],
            EPS,
        )
    })?);

    Ok(out)
}
