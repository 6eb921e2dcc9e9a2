//! Model-driven development toolchain for multi-agent systems.
//!
//! The pipeline takes textual UML models (class, state, and activity
//! diagrams in a PlantUML subset), layers construction constraints and a
//! communication ontology on top, assembles everything into a code-generation
//! prompt for a pluggable backend, and evaluates the result both structurally
//! (cyclomatic complexity with risk tiers) and behaviorally (simulated
//! mission traces checked against the modeled flow).
//!
//! Each stage is usable on its own; see the `examples/` directory for one
//! runnable example per capability, or the `mddkit` binary for the
//! subcommand pipeline.

pub mod cli;
pub mod codegen;
pub mod complexity;
pub mod constraint;
pub mod diag;
pub mod model;
pub mod ontology;
pub mod puml;
pub mod sim;

pub use diag::{ParseDiagnostic, Severity, Subject, Violation};
pub use model::{resolve_hierarchy, validate_model, UmlModel};
pub use puml::load_model;
