//! Word-level grammatical error detection learned from unlabeled text.
//!
//! The pipeline: normalize a raw corpus, build substitution sets from a
//! POS-tagged corpus, inject one artificial substitution error per sentence
//! (uniform or linguistically informed), train a bidirectional LSTM encoder
//! with an intra-sentence attention classifier (or a fixed-window
//! convolutional baseline), and evaluate per-token predictions with F0.5.

pub mod autodiff;
pub mod corpus;
pub mod lingpipe;
pub mod model;
pub mod noisegen;
pub mod traineval;
