//! Knowledge-base construction from a biomedical article corpus, plus the
//! evaluation harness for models trained on the resulting triplets.
//!
//! The acquisition stages run in this order: [`corpus`] ingestion, [`relevance`]
//! ranking, [`license`] gating, triplet [`extraction`], biomedical-entity
//! filtering ([`nerfilter`]) and [`dataset`] splitting. [`metrics`] and
//! [`mspt`] score model predictions against the splits. [`pipeline`] drives
//! the acquisition stages from one config file.

pub mod corpus;
pub mod dataset;
pub mod extraction;
pub mod http;
pub mod license;
pub mod metrics;
pub mod mspt;
pub mod nerfilter;
pub mod pipeline;
pub mod relevance;
pub mod rng;
pub mod text;
