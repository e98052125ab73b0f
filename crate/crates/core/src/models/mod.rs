//! Reproducible generators for the simulation inputs: spectra, Haar
//! eigenbases, coefficients, designs, responses and Gaussian sketches.
//!
//! Every `draw_*` function is a pure function of its parameters and seed.

mod cov;
mod draws;
pub mod rng;
mod spectrum;

pub use cov::{signal_rotated, Basis, CoefficientVector, CovFactor};
pub use draws::{
    draw_coefficients, draw_design, draw_response, draw_sketch, gaussian_matrix, gaussian_vector,
    random_cov, random_orthobasis, rescale_pair, sample_coefficients, sample_entries,
    sample_orthobasis, CoefficientDist, EntryDistribution, EntrySampler, SketchMatrix,
};
pub use spectrum::{build_spectrum, SpectrumKind, SpectrumModel};
