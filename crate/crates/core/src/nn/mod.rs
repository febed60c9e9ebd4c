//! Embeddings, LSTM stacks and dense layers built on the tape.

mod layers;
mod lstm;
mod params;

pub use layers::{dropout, Activation, Dense, Embedding, INIT_RANGE};
pub use lstm::{Direction, LstmCell, LstmLayer, LstmStack, LstmState, StackOutput};
pub use params::{Bound, Fnv, Param, ParamId, ParamStore};
