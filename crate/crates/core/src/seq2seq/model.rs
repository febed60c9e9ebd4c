use crate::autograd::{Tape, Var};
use crate::data::{clean_text, reverse_source, Batch, Vocabulary, EOS, GO, RESERVED};
use crate::error::{Error, Result};
use crate::nn::{Activation, Bound, Dense, Direction, Embedding, LstmStack, LstmState, ParamStore};
use crate::optim::{sequence_loss, SequenceLoss};
use crate::rng::{self, SeedRng};
use crate::seq2seq::config::ModelConfig;
use crate::tensor::{argmax, Tensor};

/// Encoder-decoder autoencoder with a shared embedding table.
#[derive(Clone, Debug)]
pub struct Seq2SeqModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub embedding: Embedding,
    pub encoder: LstmStack,
    pub decoder: LstmStack,
    pub projection: Dense,
}

/// Teacher-forced forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    /// `(T·B) × V`, time-major rows.
    pub logits: Var,
    /// Decoder top-layer output per target step, each `B × hidden`.
    pub decoder_top: Vec<Var>,
    pub loss: SequenceLoss,
}

impl Seq2SeqModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(config.seed, 0);
        let mut store = ParamStore::new();
        let embedding = Embedding::new(&mut store, "embedding", config.vocab_size, config.embedding, &mut rng);
        let direction = if config.variant.bidirectional() {
            Direction::Bidirectional
        } else {
            Direction::Forward
        };
        let encoder = LstmStack::new(
            &mut store,
            "encoder",
            config.embedding,
            config.per_direction_hidden(),
            config.layers,
            direction,
            config.dropout,
            &mut rng,
        );
        let decoder = LstmStack::new(
            &mut store,
            "decoder",
            config.embedding,
            config.hidden,
            config.layers,
            Direction::Forward,
            config.dropout,
            &mut rng,
        );
        let projection = Dense::new(
            &mut store,
            "projection",
            config.hidden,
            config.vocab_size,
            Activation::None,
            &mut rng,
        );
        debug_assert_eq!(encoder.output_width(), decoder.output_width());
        Ok(Seq2SeqModel {
            config,
            store,
            embedding,
            encoder,
            decoder,
            projection,
        })
    }

    /// Applies the variant's source transform. Targets are never touched.
    pub fn prepare(&self, batch: &Batch) -> Batch {
        if self.config.variant.reversed() {
            reverse_source(batch)
        } else {
            batch.clone()
        }
    }

    fn embed_steps(&self, tape: &mut Tape, bound: &Bound, grid: &[Vec<usize>]) -> Result<Vec<Var>> {
        grid.iter().map(|ids| self.embedding.forward(tape, bound, ids)).collect()
    }

    /// Final encoder state per layer for a time-major source grid.
    /// Sequences of length 0 get an all-zero state.
    pub fn encode(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        source: &[Vec<usize>],
        lengths: &[usize],
        rng: Option<&mut SeedRng>,
    ) -> Result<Vec<LstmState>> {
        if lengths.contains(&0) {
            log::warn!("encoding an empty source sequence; using a zero state");
        }
        let inputs = self.embed_steps(tape, bound, source)?;
        Ok(self.encoder.run(tape, bound, &inputs, lengths, None, rng)?.final_state)
    }

    /// Teacher-forced pass over an already prepared batch.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, batch: &Batch, rng: Option<&mut SeedRng>) -> Result<Forward> {
        let mut rng = rng;
        let state = self.encode(tape, bound, &batch.source, &batch.source_lengths, rng.as_deref_mut())?;
        let inputs = self.embed_steps(tape, bound, &batch.target_in)?;
        let dec = self
            .decoder
            .run(tape, bound, &inputs, &batch.target_lengths, Some(&state), rng)?;
        let stacked = tape.concat(&dec.outputs, 0)?;
        let logits = self.projection.forward(tape, bound, stacked)?;
        let (targets, weights) = batch.flat_targets();
        let loss = sequence_loss(tape, logits, &targets, &weights)?;
        Ok(Forward {
            logits,
            decoder_top: dec.outputs,
            loss,
        })
    }

    /// Greedy decoding from `state`, one output per row.
    ///
    /// Each step feeds the previous argmax back through the embedding.
    /// `_PAD_`, `_UNK_` and `_GO_` are never chosen; `_EOS_` ends a row and
    /// is not included. Ties go to the lowest id.
    pub fn decode_greedy(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        state: &[LstmState],
        max_len: usize,
    ) -> Result<Vec<Vec<usize>>> {
        let rows = tape.shape(state[0].h)[0];
        let mut out = vec![Vec::new(); rows];
        let mut done = vec![false; rows];
        let mut prev = vec![GO; rows];
        let mut state = state.to_vec();
        let ones = vec![1; rows];
        for _ in 0..max_len {
            let x = self.embedding.forward(tape, bound, &prev)?;
            let step = self.decoder.run(tape, bound, &[x], &ones, Some(&state), None)?;
            let logits = self.projection.forward(tape, bound, step.outputs[0])?;
            state = step.final_state;
            let values = tape.value(logits);
            for (b, id) in prev.iter_mut().enumerate() {
                let row = values.row(b);
                // EOS sits right after the masked ids, so offsetting keeps
                // lowest-id tie breaking.
                *id = EOS + argmax(&row[EOS..]);
                if !done[b] {
                    if *id == EOS {
                        done[b] = true;
                    } else {
                        out[b].push(*id);
                    }
                }
            }
            if done.iter().all(|&d| d) {
                break;
            }
        }
        Ok(out)
    }

    /// Encodes and greedily decodes a list of id sequences, in eval mode.
    pub fn reconstruct(&self, seqs: &[Vec<usize>], max_len: usize) -> Result<Vec<Vec<usize>>> {
        if max_len == 0 {
            return Err(Error::Config("max decode length must be at least 1".into()));
        }
        if seqs.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape, false)?;
        let refs: Vec<&[usize]> = seqs.iter().map(Vec::as_slice).collect();
        let batch = self.prepare(&Batch::autoencoder(&refs));
        let state = self.encode(&mut tape, &bound, &batch.source, &batch.source_lengths, None)?;
        self.decode_greedy(&mut tape, &bound, &state, max_len)
    }

    /// Cleans, encodes with `vocab` and decodes a raw sentence.
    pub fn transfer(&self, sentence: &str, vocab: &Vocabulary, max_len: usize) -> Result<String> {
        let tokens = clean_text(sentence);
        if tokens.is_empty() {
            return Err(Error::EmptyInput(format!("sentence {sentence:?} is empty after cleaning")));
        }
        let ids = vocab.encode(&tokens);
        let out = self.reconstruct(&[ids], max_len)?;
        Ok(vocab.decode(&out[0]).join(" "))
    }

    /// Teacher-forced logits for a batch in eval mode, as a plain tensor.
    pub fn logits(&self, batch: &Batch) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape, false)?;
        let fwd = self.forward(&mut tape, &bound, &self.prepare(batch), None)?;
        Ok(tape.value(fwd.logits).clone())
    }
}

const _: () = assert!(EOS == RESERVED.len() - 1);
