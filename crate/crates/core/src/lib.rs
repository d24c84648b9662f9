pub mod circuit;
pub mod config;
pub mod error;
pub mod fpt;
pub mod harness;
pub mod io;
pub mod oracle;
pub mod quad;
pub mod series;
pub mod sim;
pub mod specfun;
pub mod threshold;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/circuit.md")]
    mod circuit {}
    #[doc = include_str!("../../../book/src/series.md")]
    mod series {}
    #[doc = include_str!("../../../book/src/thresholds.md")]
    mod thresholds {}
    #[doc = include_str!("../../../book/src/fluctuating.md")]
    mod fluctuating {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
