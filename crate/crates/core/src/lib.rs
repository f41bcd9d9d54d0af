//! Recommends machine-learning algorithms for an unseen dataset from its
//! title and problem description.
//!
//! The pipeline: ingest scholarly-paper keyword metadata ([`corpus`]), count
//! recency-weighted keyword co-occurrences ([`cooccurrence`]), train a
//! weighted log-bilinear embedding over them ([`embedding`]), expand seed
//! lists of algorithm and problem terms over a page-link graph
//! ([`term_graph`], [`kb_builder`]), score algorithms for a query by summed
//! cosine similarity ([`recommender`]), and evaluate rankings against a
//! dataset-by-classifier accuracy matrix ([`evaluation`]).

pub mod cooccurrence;
pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod kb_builder;
pub mod recommender;
pub mod term_graph;
