//! Staged decision engine for distributed-ledger adoption: a declarative
//! question catalog, event-sourced sessions, derived outcomes (suitability
//! verdict, access-model recommendation, contradictions) and a layered
//! component blueprint with report export.

pub mod blueprint;
pub mod catalog;
pub mod engine;
pub mod outcomes;
pub mod service;
pub mod store;
