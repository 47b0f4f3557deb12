//! Labeled dataset generation and the versioned `CCRS` binary container
//! used for datasets, models, integrals, SCF/CC results and reports.

mod container;
mod persist;
mod records;

pub use container::{Container, FORMAT_VERSION, MAGIC};
pub use persist::{from_container, load, save, to_container, Persist};
pub use records::{
    generate_dataset, DatasetOptions, DatasetRecord, Labels, RecordStatus, ENERGY_TOL, ROUND_TRIP_TOL,
};
