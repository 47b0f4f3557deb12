//! Separately localized occupied/virtual gauge, its canonical phase and order,
//! and amplitude transformation between gauges.

mod amplitudes;
mod canonical;
mod localize;

pub use amplitudes::{antisymmetrize, AmplitudeSet, Gauge};
pub use canonical::{
    canonicalize, localized_gauge, matrix_id, mulliken_populations, spin_expand, transform_amplitudes,
    Direction, Frame, GaugeSpec,
};
pub use localize::{localize, LocalizeOptions, LocalizedBlock, OrbitalSpace};
