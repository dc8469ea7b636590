pub mod cloud;
pub mod config;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/library.md")]
    struct Library;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/formats.md")]
    struct Formats;
}
