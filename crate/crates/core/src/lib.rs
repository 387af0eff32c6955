//! Construction and verification of soliton surfaces immersed in Lie algebras.
//!
//! The pipeline runs from symbolic Lax potentials ([`symexpr`], [`liealg`],
//! [`models`]) through numeric wavefunctions and symmetry residuals
//! ([`spectral`]) to immersion functions ([`immersion`]) and their surface
//! geometry ([`geometry`]).

pub mod error;
pub mod geometry;
pub mod immersion;
pub mod liealg;
pub mod models;
pub mod report;
pub mod spectral;
pub mod symexpr;

pub use error::{Error, Result};
pub use geometry::{curvature, export_mesh, to_mesh, CurvatureReport, MeshFormat, SurfaceMesh};
pub use immersion::{
    closure_audit, immersion_gauge, immersion_generalized, immersion_symtafel,
    integrate_surface_from_tangents, rank_check, tangent_consistency, tangent_matrices,
    ImmersionGrid, ImmersionSpec, TangentGrid,
};
pub use liealg::{inner_product, to_e3, AlgebraBasis, MatrixExpr, NumericMatrix};
pub use models::{builtin, load_model, ModelDefinition, NamedCharacteristic, SolutionFamily};
pub use spectral::{
    extract_group_direction, integrate_wavefunction, lsp_audit, lsp_symmetry_residual,
    variation_wavefunction, zcc_residual_expr, zcc_residual_on, zcc_symmetry_residual, GridSpec,
    IntegrationOptions, ResidualReport, VariationGrid, WavefunctionGrid,
};
pub use symexpr::{parse_expr, Characteristic, JetIndex, ScalarExpr, Symbol};
