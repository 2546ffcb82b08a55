//! Configuration, file formats and end-to-end runs.

pub mod config;
pub mod csv;
pub mod pgm;
pub mod run;

pub use config::{parse_config, resolve, RunConfig};
pub use csv::{read_csv, write_csv};
pub use pgm::{render_heatmap, HeatmapSpec, Normalization};
pub use run::{run, RunOutcome};
