//! Two-stage shaft-centre localisation.
//!
//! Stage one turns a revolution of film-thickness readings into a shaft
//! location: trim around the thin-film region, fit a GP over angle, and read
//! off the posterior minimum. Stage two fits a GP from shaft locations to
//! speed-load labels and scores every node of a polar grid against a new
//! label.

mod dataset;
mod film;
mod map;
mod trim;

pub use dataset::{
    build_dataset, standard_operating_grid, read_dataset, synthesize_runs, write_dataset,
    DatasetBuild, LocalisationDataset, LocalisationEntry, RunFailure, SyntheticRun,
};
pub use film::{
    extract_shaft_location, film_hyperparameter_bounds, fit_film_gp, FilmFit, FilmFitConfig, FilmNoise,
    FilmPipeline, FilmResult,
};
pub use map::{
    fit_location_gp, fit_location_gp_traced, likelihood_map, locate, location_input,
    GridExtent, GridSpec, LikelihoodMap, Localisation, LocationFit, LocationFitConfig,
    ModelVariant, VarianceMode,
};
pub use trim::{estimate_min_reference, trim_observations, TrimWindow, DEFAULT_HALF_WIDTH};
