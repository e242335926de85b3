pub mod cost;
pub mod error;
pub mod fixed;
pub mod graph;
pub mod matrix;
pub mod pcoo;
pub mod runtime;
pub mod schedule;
pub mod sim;

pub use error::{Error, Result};

// Guide chapters, compiled and run as doctests.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/fixed_point.md")]
mod book_fixed_point {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/pcoo.md")]
mod book_pcoo {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/scheduling.md")]
mod book_scheduling {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/simulator.md")]
mod book_simulator {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/inference.md")]
mod book_inference {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
