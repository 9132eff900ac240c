//! Everything around the solver: file formats, repeated-split evaluation, grid
//! search and the command-line front end's building blocks.

pub mod experiment;
pub mod io;

pub use experiment::{
    grid_search, grid_search_with, run_experiment, tune_baseline, DataSource, ExperimentReport,
    ExperimentSpec, GridCell, GridSearchResult, Method, MethodReport, Validation,
};
pub use io::{
    export_trace, load_csv, load_csv_for_evaluation, load_model, read_trace, save_csv, save_model,
    write_report,
};
