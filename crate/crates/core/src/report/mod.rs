//! Rankings, map exports and the per-city pipeline.

mod export;
mod pipeline;
mod rank;

pub use export::{
    cells_to_geojson, export_delta_geojson, export_svg_choropleth, hex, parse_delta_geojson, ramp_color, DeltaCell,
    NEUTRAL, RAMP_NEGATIVE, RAMP_POSITIVE,
};
pub use pipeline::{
    coverage_csv, density_fields, load_inputs, ranking_of, run_batch, run_city, write_city, CityInputs, CityReport,
    CityResult, CityRunConfig, FieldSummary, InputSummary, COVERAGE_CSV_HEADER,
};
pub use rank::{rank_cities, sig_digits, RankedRow, RankingTable, ScoreRow, RANKING_CSV_HEADER};
