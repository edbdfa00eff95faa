//! Asynchronous multiparty session types: subtyping, projection, a small
//! effect-graded language and its runtime, and a tree-based denotation.

pub mod denotation;
pub mod fixtures;
pub mod global;
pub mod lang;
pub mod relations;
pub mod runtime;
pub mod session;
pub mod siso;
pub mod subtyping;
pub mod syntax;
pub mod trees;
pub mod typing;

pub use denotation::*;
pub use global::*;
pub use lang::*;
pub use relations::*;
pub use runtime::*;
pub use session::*;
pub use siso::{actset, siset, siso_subtype_oracle, soset, SisoError};
pub use subtyping::*;
pub use syntax::*;
pub use trees::*;
pub use typing::*;

/// Serialises a value through its `Display` implementation.
pub(crate) fn serde_display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}
