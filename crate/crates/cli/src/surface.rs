use std::path::PathBuf;

use serde::Serialize;
use solsurf_core::geometry::{
    curvature, export_mesh, to_mesh, write_atomic, CurvatureSummary, MeshFormat,
};
use solsurf_core::immersion::{ClosureAudit, RankCheck};
use solsurf_core::models::parse_matrix_file;
use solsurf_core::report::{Sci, SCHEMA_VERSION};
use solsurf_core::spectral::{integrate_wavefunction_with, HalvingDiagnostic};
use solsurf_core::{
    closure_audit, immersion_gauge, immersion_generalized, immersion_symtafel, inner_product,
    integrate_surface_from_tangents, parse_expr, rank_check, tangent_consistency,
    variation_wavefunction, AlgebraBasis, Error, ImmersionGrid, ImmersionSpec, MatrixExpr,
    ResidualReport, Result, TangentGrid, WavefunctionGrid,
};

use crate::args::{Format, Route, SurfaceArgs};
use crate::config::{positive, RunConfig, RunHeader};

/// Random rectangles integrated by the closure audit.
const CLOSURE_RECTANGLES: usize = 20;

#[derive(Serialize)]
pub struct RankSummary {
    pub dependent_nodes: usize,
    pub center: RankCheck,
}

#[derive(Serialize)]
pub struct OrbitNorm {
    /// Range of `⟨F, F⟩` over the un-normalized samples `Φ⁻¹SΦ`.
    pub min: Sci,
    pub max: Sci,
}

#[derive(Serialize)]
pub struct CrossCheck {
    pub other_route: String,
    pub max_interior_difference: Sci,
    pub threshold: Sci,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct SurfaceReport {
    pub schema: u32,
    pub command: &'static str,
    pub run: RunHeader,
    pub route: String,
    pub alpha: Option<String>,
    pub gauge: Option<String>,
    pub characteristic: Option<String>,
    pub consistency_threshold: Sci,
    pub consistency: ResidualReport,
    pub consistency_passed: bool,
    pub algebra_defect: Sci,
    pub rank: RankSummary,
    pub halving: Option<HalvingDiagnostic>,
    pub closure: Option<ClosureAudit>,
    pub cross_check: Option<CrossCheck>,
    pub orbit_norm: Option<OrbitNorm>,
    pub curvature: Option<CurvatureSummary>,
    pub curvature_error: Option<String>,
    pub files: Vec<String>,
    pub passed: bool,
}

fn gauge_matrix(text: &str, dim: usize) -> Result<MatrixExpr> {
    if let Some(k) = text.strip_prefix('e').and_then(|k| k.parse::<usize>().ok()) {
        let basis = AlgebraBasis::su(dim);
        let e = basis.elements().get(k.wrapping_sub(1)).ok_or_else(|| {
            Error::Config(format!(
                "--S {text}: the algebra has {} basis elements",
                basis.elements().len()
            ))
        })?;
        return Ok(MatrixExpr::constant(e));
    }
    let body = std::fs::read_to_string(text)
        .map_err(|e| Error::Config(format!("cannot read gauge file {text}: {e}")))?;
    parse_matrix_file(&body, dim)
}

struct Recipe {
    spec: ImmersionSpec,
    gauge: Option<MatrixExpr>,
}

fn recipe(cfg: &RunConfig, args: &SurfaceArgs) -> Result<Recipe> {
    let m = &cfg.model;
    let spec = match args.immersion {
        Route::Generalized => {
            let c = args.characteristic.as_deref().ok_or_else(|| {
                Error::Config("--immersion generalized needs --characteristic".into())
            })?;
            ImmersionSpec::generalized(c)
        }
        Route::SymTafel => ImmersionSpec::sym_tafel(parse_expr(&args.alpha)?),
        Route::Gauge => {
            let s = args
                .s
                .as_deref()
                .ok_or_else(|| Error::Config("--immersion gauge needs --S".into()))?;
            ImmersionSpec::gauge(gauge_matrix(s, m.algebra_dim)?)
        }
    };
    spec.validate(m)?;
    if args.immersion == Route::Generalized && !args.from_tangents {
        let c = spec.characteristic.as_deref().expect("set above");
        if cfg.family().binding(c).is_none() {
            return Err(Error::MissingBinding {
                characteristic: c.to_owned(),
                solution: cfg.solution.clone(),
            });
        }
    }
    let gauge = spec.gauge.clone();
    Ok(Recipe { spec, gauge })
}

fn direct(
    cfg: &RunConfig,
    args: &SurfaceArgs,
    recipe: &Recipe,
    wave: &WavefunctionGrid,
) -> Result<ImmersionGrid> {
    let m = &cfg.model;
    match args.immersion {
        Route::Generalized => {
            let c = recipe
                .spec
                .characteristic
                .as_deref()
                .expect("generalized route");
            let var = variation_wavefunction(
                m,
                cfg.family(),
                &cfg.params,
                c,
                cfg.lambda,
                &cfg.grid,
                cfg.epsilon,
                &cfg.options,
            )?;
            let mut f = immersion_generalized(wave, &var)?;
            f.diagnostic = var.diagnostic;
            Ok(f)
        }
        Route::SymTafel => immersion_symtafel(
            m,
            cfg.family(),
            &cfg.params,
            cfg.lambda,
            &cfg.grid,
            recipe.spec.conformal.as_ref().expect("sym-tafel route"),
            None,
            &cfg.options,
        ),
        Route::Gauge => immersion_gauge(m, wave, recipe.gauge.as_ref().expect("gauge route")),
    }
}

/// Builds the surface and writes `immersion.json`, the mesh and
/// `curvature.json` into `--out` (default: the working directory). The
/// caller writes `surface.json`.
pub fn surface(args: &SurfaceArgs) -> Result<(PathBuf, SurfaceReport)> {
    let cfg = RunConfig::resolve(&args.common)?;
    let tol = positive("--tol-consistency", args.tol_consistency)?;
    let tol_cross = positive("--tol-cross", args.tol_cross)?;
    let recipe = recipe(&cfg, args)?;
    let m = &cfg.model;

    let wave = integrate_wavefunction_with(
        m,
        cfg.family(),
        &cfg.params,
        cfg.lambda,
        &cfg.grid,
        &cfg.options,
    )?;
    let tangents = TangentGrid::evaluate(m, &recipe.spec, &wave)?;
    let (f, other) = if args.from_tangents {
        let f = integrate_surface_from_tangents(&tangents, cfg.lambda)?;
        let other = if args.cross_check {
            Some(direct(&cfg, args, &recipe, &wave)?)
        } else {
            None
        };
        (f, other)
    } else {
        let f = direct(&cfg, args, &recipe, &wave)?;
        let other = if args.cross_check {
            Some(integrate_surface_from_tangents(&tangents, cfg.lambda)?)
        } else {
            None
        };
        (f, other)
    };

    let consistency = tangent_consistency(&f, &tangents)?;
    let consistency_passed = consistency.max() < tol;
    let center = (cfg.grid.n1 / 2, cfg.grid.n2 / 2);
    let rank = RankSummary {
        dependent_nodes: tangents.rank_flags.iter().filter(|b| !**b).count(),
        center: rank_check(&tangents, center),
    };
    let closure = (args.from_tangents || args.cross_check)
        .then(|| closure_audit(&tangents, CLOSURE_RECTANGLES, cfg.seed));
    let cross_check = other
        .map(|g| -> Result<CrossCheck> {
            let d = f.max_interior_difference(&g)?;
            Ok(CrossCheck {
                other_route: g.route.clone(),
                max_interior_difference: Sci(d),
                threshold: Sci(tol_cross),
                passed: d < tol_cross,
            })
        })
        .transpose()?;
    let orbit_norm = if args.immersion == Route::Gauge && !args.from_tangents {
        let norms = (0..cfg.grid.len())
            .map(|k| {
                let (i, j) = cfg.grid.node(k);
                let x = f.raw(i, j);
                inner_product(&x, &x)
            })
            .collect::<Result<Vec<f64>>>()?;
        Some(OrbitNorm {
            min: Sci(norms.iter().copied().fold(f64::INFINITY, f64::min)),
            max: Sci(norms.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        })
    } else {
        None
    };

    let mesh = to_mesh(&f);
    let (curv, curvature_error) = match curvature(&mesh) {
        Ok(c) => (Some(c), None),
        Err(e) => {
            log::warn!("curvature not computed: {e}");
            (None, Some(e.to_string()))
        }
    };

    let format = match args.format {
        Format::Obj => MeshFormat::Obj,
        Format::Csv => MeshFormat::Csv,
    };
    let mesh_name = format!("mesh.{}", format.extension());
    let mut files = vec!["immersion.json".to_owned(), mesh_name.clone()];
    if curv.is_some() {
        files.push("curvature.json".to_owned());
    }
    files.push("surface.json".to_owned());

    let passed = consistency_passed
        && closure.as_ref().is_none_or(|c| c.passed)
        && cross_check.as_ref().is_none_or(|c| c.passed);
    let report = SurfaceReport {
        schema: SCHEMA_VERSION,
        command: "surface",
        run: cfg.header(),
        route: f.route.clone(),
        alpha: (args.immersion == Route::SymTafel).then(|| args.alpha.clone()),
        gauge: args.s.clone().filter(|_| args.immersion == Route::Gauge),
        characteristic: recipe.spec.characteristic.clone(),
        consistency_threshold: Sci(tol),
        consistency,
        consistency_passed,
        algebra_defect: Sci(f.max_algebra_defect()),
        rank,
        halving: f.diagnostic.clone(),
        closure,
        cross_check,
        orbit_norm,
        curvature: curv.as_ref().map(|c| c.summary.clone()),
        curvature_error,
        files,
        passed,
    };

    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    write_atomic(&dir.join("immersion.json"), &f.to_json())?;
    export_mesh(&mesh, format, &dir.join(&mesh_name))?;
    if let Some(c) = &curv {
        write_atomic(&dir.join("curvature.json"), &c.to_json())?;
    }
    Ok((dir, report))
}
