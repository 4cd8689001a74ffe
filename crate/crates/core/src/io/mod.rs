//! Configuration files, persisted solutions and CSV reports.

mod config;
mod report;
mod solution;

pub use config::{
    parse_config_file, parse_config_str, BoundsInput, FieldShape, FieldSpec, GasketConfig,
    HarnessConfig, ProblemConfig, RunConfig, CONFIG_VERSION,
};
pub use report::{collate_sweep, find_tables, parse_table_csv, TABLE_FILE};
pub use solution::{
    load_field, load_solution, persist_result, SolutionFile, SolutionMeta, VertexRecord,
    SOLUTION_VERSION,
};
