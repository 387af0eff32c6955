use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::Serialize;
use solsurf_core::report::{complex, Sci};
use solsurf_core::{
    builtin, load_model, Error, GridSpec, IntegrationOptions, ModelDefinition, Result,
};

use crate::args::CommonArgs;

/// A resolved and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelDefinition,
    /// Built-in name or file path.
    pub source: String,
    pub solution: String,
    pub params: Vec<f64>,
    pub lambda: Complex64,
    pub grid: GridSpec,
    pub epsilon: Option<f64>,
    pub options: IntegrationOptions,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// The part of a configuration echoed into every report.
#[derive(Serialize)]
pub struct RunHeader {
    pub model: String,
    pub source: String,
    pub solution: String,
    pub params: BTreeMap<String, Sci>,
    pub lambda: [Sci; 2],
    pub grid: GridHeader,
    pub substeps: usize,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct GridHeader {
    pub x1: [Sci; 2],
    pub x2: [Sci; 2],
    pub n1: usize,
    pub n2: usize,
    pub h1: Sci,
    pub h2: Sci,
    pub base: [usize; 2],
}

pub fn parse_lambda(text: &str) -> Result<Complex64> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad λ component `{s}`")))
    };
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(Error::Config(format!(
            "λ must be `re` or `re,im`, got `{text}`"
        ))),
    }
}

pub fn positive(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {x}")))
    }
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let (model, source) = match &args.model_file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                (load_model(&text)?, path.display().to_string())
            }
            None => (builtin(&args.model)?, args.model.clone()),
        };
        let solution = match &args.solution {
            Some(s) => s.clone(),
            None if model.families.len() == 1 => model.families[0].name().to_owned(),
            None => {
                let names: Vec<&str> = model.families.iter().map(|f| f.name()).collect();
                return Err(Error::Config(format!(
                    "choose a solution with --solution ({})",
                    names.join(", ")
                )));
            }
        };
        let family = model.family(&solution)?;
        let mut given = BTreeMap::new();
        for p in &args.params {
            let (name, value) = p
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected name=value, got `{p}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value in `{p}`")))?;
            if given.insert(name.trim().to_owned(), value).is_some() {
                return Err(Error::Config(format!("parameter `{name}` given twice")));
            }
        }
        if let Some(unknown) = given.keys().find(|k| family.param_index(k).is_none()) {
            return Err(Error::Config(format!(
                "solution `{solution}` has no parameter `{unknown}`"
            )));
        }
        let params = family.param_values(&given)?;
        let lambda = parse_lambda(&args.lambda)?;
        model.check_lambda(lambda)?;
        let grid = GridSpec::parse(&args.grid)?;
        if let Some(e) = args.epsilon {
            positive("--epsilon", e)?;
        }
        if args.substeps == 0 {
            return Err(Error::Config("--substeps must be at least 1".into()));
        }
        Ok(RunConfig {
            model,
            source,
            solution,
            params,
            lambda,
            grid,
            epsilon: args.epsilon,
            options: IntegrationOptions {
                substeps: args.substeps,
                ..IntegrationOptions::default()
            },
            seed: args.seed,
            out: args.out.clone(),
        })
    }

    pub fn family(&self) -> &solsurf_core::SolutionFamily {
        self.model.family(&self.solution).expect("validated")
    }

    pub fn header(&self) -> RunHeader {
        let g = &self.grid;
        RunHeader {
            model: self.model.name.clone(),
            source: self.source.clone(),
            solution: self.solution.clone(),
            params: self
                .family()
                .params()
                .iter()
                .zip(&self.params)
                .map(|(p, v)| (p.name.clone(), Sci(*v)))
                .collect(),
            lambda: complex(self.lambda),
            grid: GridHeader {
                x1: [Sci(g.x1_range.0), Sci(g.x1_range.1)],
                x2: [Sci(g.x2_range.0), Sci(g.x2_range.1)],
                n1: g.n1,
                n2: g.n2,
                h1: Sci(g.h1()),
                h2: Sci(g.h2()),
                base: [g.base.0, g.base.1],
            },
            substeps: self.options.substeps,
            seed: self.seed,
        }
    }
}
