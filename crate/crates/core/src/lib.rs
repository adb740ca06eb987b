pub mod dataset;
pub mod degradations;
pub mod degrader;
pub mod error;
pub mod error_measure;
pub mod eval;
pub mod formats;
mod interval;
pub mod io;
pub mod matching;
pub mod midi;
pub mod note;
pub mod random;
pub mod synth;

pub use dataset::{build_dataset, DatasetConfig, LabeledExcerpt, Split};
pub use degradations::{DegradationId, DegradationOutcome, DegradationParams, Inapplicable};
pub use degrader::{Degrader, DegraderConfig};
pub use error::{Error, Result};
pub use error_measure::{measure_errors, ErrorProfile};
pub use note::{fix_overlaps, flatten_tracks, CorpusItem, Excerpt, Note};
pub use random::RandomSource;
