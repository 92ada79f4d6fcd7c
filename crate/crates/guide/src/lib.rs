//! Every chapter of `book/` is included as a doc comment so that
//! `cargo test` compiles and runs its code blocks. One module per chapter
//! keeps failures traceable to a file.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/ternary-rules.md")]
pub mod ternary_rules {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/circuits.md")]
pub mod circuits {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/secure-evaluation.md")]
pub mod secure_evaluation {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/distinct-match.md")]
pub mod distinct_match {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/routing-model.md")]
pub mod routing_model {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/path-verification.md")]
pub mod path_verification {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
