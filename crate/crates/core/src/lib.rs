//! # cmdb-core
//!
//! Mining mechanical constitutive models out of scientific PDFs.
//!
//! The crate turns a directory of papers into a validated, queryable database
//! of constitutive model records. Work flows through four stages:
//!
//! 1. [`ingest`] serializes each PDF into a normalized text stream and marks
//!    equation / table candidate blocks.
//! 2. The gatekeeper in [`agent`] screens a head-truncated prefix of every
//!    document against three relevance criteria using a cheap model tier.
//! 3. The analyst in [`agent`] runs schema-constrained extraction over the
//!    full text of the documents that passed, repairing its own output until
//!    every record is valid per [`schema`] and every equation symbol is
//!    grounded.
//! 4. Records land in the [`store`] where they can be searched, reviewed, and
//!    exported; [`eval`] scores a store export against expert annotations.
//!
//! [`pipeline`] drives the stages over a corpus with job tracking, resume and
//! cost accounting.

pub mod agent;
pub mod eval;
pub mod ingest;
pub mod pipeline;
pub mod schema;
pub mod store;

/// Version of the record schema. Bumping it forces re-extraction on resume.
pub const SCHEMA_VERSION: &str = "1";

pub use agent::{GateVerdict, ProviderRequest, ProviderResponse};
pub use ingest::{CandidateBlock, HeadSegment, RawDocument, SerializedDoc};
pub use schema::{ConstitutiveModelRecord, MechanismClass, ReviewStatus};
