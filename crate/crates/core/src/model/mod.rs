//! Typed information flow networks: sites, channels, flow declarations,
//! type system, alternatives and nesting.

mod alternatives;
mod classify;
mod flow;
mod ids;
mod infer;
mod nesting;
mod network;
mod types;
mod validate;

use thiserror::Error;

pub use alternatives::{
    configuration_name, expand_configurations, resolve, AlternativeSet, Configuration, Toggle,
    Variant, ABSENT,
};
pub use classify::classify_sites;
pub use flow::{
    Carry, FlowSpec, Introduce, Mitigation, MitigationRef, OutputFlow, Proxy, SummaryEntry,
    TagSelection,
};
pub use ids::{is_valid_identifier, ActorId, AltId, ChannelId, FeatureTag, SiteId, TypeId};
pub use infer::infer_types;
pub use nesting::{collapse, expand};
pub use network::{Channel, Network, Site, SiteClasses, Subnet};
pub use types::{Conclusion, Condition, InferenceRule, TypeSystem, TypeViolation};
pub use validate::{topological_order, validate, ValidationReport, Violation};

pub(crate) use alternatives::remove_element;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("network is invalid ({} violation(s))", .0.violations.len())]
    Invalid(ValidationReport),
    #[error("unknown subnet `{0}`")]
    UnknownSubnet(String),
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("cannot collapse: {0}")]
    CollapseRejected(String),
    #[error("channel `{0}` has no definition to expand")]
    MissingDefinition(String),
    #[error("definition does not match channel boundary: {0}")]
    BoundaryMismatch(String),
}
