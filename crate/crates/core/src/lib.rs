//! Metamodel-driven textual modeling toolchain.
//!
//! The pipeline runs from a class-based metamodel (Ecore-style XMI) to a
//! generated grammar, through an ordered adaptation config, to a parser,
//! formatter and completion engine for `.eatxt` model files. Models can be
//! converted losslessly to and from an order-preserving XML format.
//!
//! ```text
//! metamodel ──generate──▶ grammar ──adapt──▶ grammar'
//!                                              │
//!              .eatxt ◀──format── model ◀──parse┘
//!                                  │  ▲
//!                        to_eaxml  ▼  │ from_eaxml
//!                                .eaxml
//! ```

pub mod assist;
pub mod cli;
pub mod diagnostic;
pub mod grammar;
pub mod metamodel;
pub mod model;
pub mod textsyntax;
pub mod xmlio;

mod xmldom;

pub use diagnostic::{Diagnostic, Position, Severity, Span};
pub use grammar::{adapt_grammar, emit_grammar, generate_grammar, parse_config, Grammar};
pub use metamodel::{load_metamodel, Metamodel, PrimitiveKind};
pub use model::{ElementId, ModelElement, QualifiedName, ReferenceCache};
pub use textsyntax::{format_model, lex, parse_model};
pub use xmlio::{from_eaxml, to_eaxml};

/// The adaptation config shipped with the toolchain.
pub const DEFAULT_CONFIG: &str = include_str!("../assets/default.cfg");

/// The bundled mini EAST-ADL metamodel.
pub const MINI_EASTADL: &str = include_str!("../assets/mini_eastadl.ecore");
