//! Case files, PMU-style CSV ingestion and result emission.

mod case;
pub mod emit;
pub mod pmu;

pub use case::{parse_case, parse_case_str, serialize_case, CaseOptions};
pub use emit::{Emitter, Formats, Plot, PlotSeries, ResultBundle, SeriesStyle};
pub use pmu::{csv_headers, ingest_pmu_csv, ingest_pmu_str, ColumnMap, Gap, PmuData};
