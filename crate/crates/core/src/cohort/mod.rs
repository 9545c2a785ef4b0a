//! Virtual patient cohorts.
//!
//! Anthropometrics, cfPWV, heart rate and cardiac output come from a Gaussian
//! copula over truncated-normal marginals, optionally topped up with a
//! quantile Latin hypercube. Terminal resistance and compliance multipliers are
//! drawn uniformly so that the total peripheral resistance and compliance span
//! configured bounds.

mod dataset;
mod params;
mod population;
mod sampling;

pub use dataset::{
    build_dataset, derive_params, filter_admissible, read_records_csv, run_batch, sidecar_path, write_records_csv,
    Dataset, DatasetMeta, FilterReport, CSV_COLUMNS, SCHEMA_VERSION,
};
pub use params::{PatientParams, Provenance};
pub use population::{Correlation, Marginal, PopulationStats, Variable, WindkesselBounds};
pub use sampling::{lhs_augment, sample_correlated, sample_windkessel, windkessel_ranges, Draw, WindkesselRanges};
