//! Toolkit for merging stand-off named-entity annotations with CoNLL-U
//! treebanks and training a linear-chain CRF tagger on the result.
//!
//! The pipeline, in data order:
//!
//! * [`enamex`] parses sentence-per-line text with inline `<ENAMEX>`
//!   elements into raw text plus character-offset mentions;
//! * [`align`] maps character offsets onto an independent tokenization by
//!   case-insensitive character comparison and projects mentions to token
//!   spans, logging every failure;
//! * [`conllu`] reads and writes CoNLL-U and the extended variant with the
//!   NE layer as three extra columns, using the [`bio`] tag codec;
//! * [`features`] produces windowed token/affix/gazetteer features with the
//!   POS fill-in-the-gaps backoff;
//! * [`crf`] scores, decodes and trains the linear-chain CRF (rprop with
//!   elastic-net regularization) and applies mention broadcasting;
//! * [`eval`] computes entity-level precision/recall/F1 and token accuracy;
//! * [`split`] produces chronological and seeded shuffled corpus splits.
//!
//! Heavy per-sentence loops run data-parallel through [rayon] when the
//! `parallel` feature (on by default) is enabled, and fall back to plain
//! iterators otherwise; results are identical either way.
//!
//! [rayon]: https://docs.rs/rayon

#![forbid(unsafe_code)]

pub mod align;
pub mod bio;
pub mod conllu;
pub mod crf;
pub mod enamex;
pub mod eval;
pub mod features;
pub mod model;
pub mod par;
pub mod split;
