//! Sentiment style transfer with seq2seq autoencoders.
//!
//! The crate is self-contained: a small reverse-mode differentiation engine
//! ([`autograd`]) underlies LSTM layers ([`nn`]), Adam ([`optim`]), the
//! autoencoder variants ([`seq2seq`]), the adversarial extension
//! ([`adversarial`]) and the sentiment classifier used to score transfers
//! ([`sentiment`]). [`data`] turns star-rated reviews into bucketed batches.

pub mod adversarial;
pub mod autograd;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradient_suite;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod sentiment;
pub mod seq2seq;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
