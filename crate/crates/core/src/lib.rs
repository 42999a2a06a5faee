//! REST API test amplification workbench.
//!
//! The crate is organized around the pipeline it implements:
//!
//! - [`spec_model`] ingests OpenAPI 2.0/3.x documents into one normalized
//!   [`spec_model::ApiSpec`] and answers retriever queries for agents.
//! - [`test_dsl`] defines the declarative suite format amplified tests are
//!   written in, plus the refinement linter.
//! - [`executor`] runs suites over HTTP and records every exchange.
//! - [`coverage`] computes structural API coverage from a spec and an
//!   execution log with tolerant request matching.
//! - [`gateway`] is the backend-agnostic chat interface with tool calling
//!   and token/cost/energy accounting.
//! - [`agents`] implements the single-agent ReAct workflow and the
//!   multi-agent planning/generation pipeline.
//! - [`stub`] serves a spec-driven mock API so everything runs offline.
//! - [`reporting`] assembles run artifacts into report tables.

pub mod agents;
pub mod clock;
pub mod coverage;
pub mod executor;
pub mod gateway;
pub mod reporting;
pub mod spec_model;
pub mod stub;
pub mod test_dsl;

#[cfg(feature = "testkit")]
pub mod testkit;
