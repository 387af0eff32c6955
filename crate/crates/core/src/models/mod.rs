//! Integrable models: Lax potentials, explicit solution families, named
//! characteristics and the bindings that tie a characteristic to a parameter
//! direction of a family.

mod config;
mod onshell;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::liealg::MatrixExpr;
use crate::report::Sci;
use crate::symexpr::{Characteristic, Compiled, EvalContext, ScalarExpr, Symbol};

pub use onshell::{JetTable, OnShellEvaluator};

const SINE_GORDON: &str = include_str!("sine_gordon.toml");

/// Names accepted by [`builtin`].
pub const BUILTIN_MODELS: &[&str] = &["sine-gordon"];

/// A family parameter with its admissible range.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub range: (f64, f64),
}

/// `scale · ∂θ/∂param = R[θ]` on the family.
#[derive(Clone, Debug, PartialEq)]
pub struct Binding {
    pub characteristic: String,
    pub param: String,
    pub scale: ScalarExpr,
}

/// Closed-form solutions `θ^k(x¹, x²; p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionFamily {
    name: String,
    params: Vec<Parameter>,
    fields: Vec<ScalarExpr>,
    bindings: Vec<Binding>,
}

impl SolutionFamily {
    pub fn new(
        name: &str,
        params: Vec<Parameter>,
        fields: Vec<ScalarExpr>,
        bindings: Vec<Binding>,
    ) -> Self {
        SolutionFamily {
            name: name.to_owned(),
            params,
            fields,
            bindings,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn fields(&self) -> &[ScalarExpr] {
        &self.fields
    }

    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    pub fn binding(&self, characteristic: &str) -> Option<&Binding> {
        self.bindings
            .iter()
            .find(|b| b.characteristic == characteristic)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Evaluation slots for field expressions: `x1, x2, params…`.
    pub(crate) fn slots(&self) -> Vec<Symbol> {
        let mut s = vec![Symbol::X1, Symbol::X2];
        s.extend(self.params.iter().map(|p| Symbol::Param(p.name.clone())));
        s
    }

    /// Orders named values as the family's parameter vector. Every parameter
    /// must be given and lie in its admissible range.
    pub fn param_values(&self, given: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        if let Some(extra) = given.keys().find(|k| self.param_index(k).is_none()) {
            return Err(Error::Config(format!(
                "solution `{}` has no parameter `{extra}`",
                self.name
            )));
        }
        self.params
            .iter()
            .map(|p| {
                let v = *given.get(&p.name).ok_or_else(|| {
                    Error::Config(format!("missing value for parameter `{}`", p.name))
                })?;
                if !(p.range.0..=p.range.1).contains(&v) {
                    return Err(Error::Config(format!(
                        "parameter {} = {v} outside its range [{}, {}]",
                        p.name, p.range.0, p.range.1
                    )));
                }
                Ok(v)
            })
            .collect()
    }

    /// Numeric value of a binding's scale at the given parameters.
    pub fn binding_scale(&self, binding: &Binding, params: &[f64]) -> Result<f64> {
        let slots = self.slots();
        let values: Vec<Complex64> = [0.0, 0.0]
            .iter()
            .chain(params)
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        Ok(Compiled::new(&binding.scale, &slots)?.eval(&values)?.re)
    }

    fn random_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.params
            .iter()
            .map(|p| rng.random_range(p.range.0..=p.range.1))
            .collect()
    }
}

/// A characteristic registered under a name.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedCharacteristic {
    pub name: String,
    pub r: Characteristic,
}

/// An integrable model with its solution families and characteristics.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelDefinition {
    pub name: String,
    pub field_count: usize,
    pub algebra_dim: usize,
    pub u1: MatrixExpr,
    pub u2: MatrixExpr,
    pub singular_lambdas: Vec<Complex64>,
    pub families: Vec<SolutionFamily>,
    pub characteristics: Vec<NamedCharacteristic>,
}

/// Spread of the on-shell-free ZCC residual across spectral parameters.
#[derive(Clone, Debug, Serialize)]
pub struct LambdaIndependenceReport {
    pub jet_samples: usize,
    pub lambda_samples: usize,
    pub max_spread: Sci,
    pub tolerance: Sci,
    pub passed: bool,
}

impl ModelDefinition {
    pub fn u(&self, axis: u8) -> &MatrixExpr {
        match axis {
            1 => &self.u1,
            2 => &self.u2,
            _ => panic!("axis must be 1 or 2, got {axis}"),
        }
    }

    pub fn family(&self, name: &str) -> Result<&SolutionFamily> {
        self.families
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::Config(format!("model `{}` has no solution `{name}`", self.name)))
    }

    pub fn characteristic(&self, name: &str) -> Result<&NamedCharacteristic> {
        self.characteristics
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "model `{}` has no characteristic `{name}`",
                    self.name
                ))
            })
    }

    pub fn is_singular(&self, lambda: Complex64) -> bool {
        self.singular_lambdas
            .iter()
            .any(|s| (s - lambda).norm() < 1e-12)
    }

    pub fn check_lambda(&self, lambda: Complex64) -> Result<()> {
        if self.is_singular(lambda) || !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::SingularLambda(lambda));
        }
        Ok(())
    }

    /// `D₂U¹ − D₁U² + [U¹, U²]`.
    pub fn zcc_matrix(&self) -> Result<MatrixExpr> {
        self.u1
            .total_derivative(2)?
            .sub(&self.u2.total_derivative(1)?)?
            .add(&self.u1.commutator(&self.u2)?)
    }

    /// Evaluates the ZCC residual at 20 random jet assignments × 5 random λ
    /// (|λ| ∈ [0.5, 2], away from singular values); for each assignment the
    /// residual must agree across λ to `1e−9·max(1, ‖residual‖)`.
    pub fn check_lambda_independence(&self, seed: u64) -> Result<LambdaIndependenceReport> {
        const JETS: usize = 20;
        const LAMBDAS: usize = 5;
        let zcc = self.zcc_matrix()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_spread: f64 = 0.0;
        let mut passed = true;
        for _ in 0..JETS {
            let mut ctx = EvalContext::new();
            for s in zcc.free_symbols() {
                if s != Symbol::Lambda {
                    ctx.bind(s, Complex64::new(rng.random_range(-1.0..1.0), 0.0));
                }
            }
            let mut first: Option<Vec<Complex64>> = None;
            let mut scale: f64 = 1.0;
            let mut spread: f64 = 0.0;
            let mut drawn = 0;
            while drawn < LAMBDAS {
                let lambda = Complex64::from_polar(
                    rng.random_range(0.5..2.0),
                    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                );
                if self
                    .singular_lambdas
                    .iter()
                    .any(|s| (s - lambda).norm() < 1e-3)
                {
                    continue;
                }
                drawn += 1;
                ctx.bind(Symbol::Lambda, lambda);
                let vals = zcc.evaluate(&ctx)?.as_slice().to_vec();
                scale = scale.max(vals.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
                match &first {
                    None => first = Some(vals),
                    Some(f) => {
                        let d = f
                            .iter()
                            .zip(&vals)
                            .map(|(a, b)| (a - b).norm())
                            .fold(0.0, f64::max);
                        spread = spread.max(d);
                    }
                }
            }
            max_spread = max_spread.max(spread);
            passed &= spread <= 1e-9 * scale;
        }
        Ok(LambdaIndependenceReport {
            jet_samples: JETS,
            lambda_samples: LAMBDAS,
            max_spread: Sci(max_spread),
            tolerance: Sci(1e-9),
            passed,
        })
    }

    /// Numeric check of every binding identity at 20 random points
    /// (parameters in range, `x ∈ [−2, 2]²`); central difference step 1e−5.
    pub fn check_bindings(&self, seed: u64) -> Result<()> {
        const POINTS: usize = 20;
        const STEP: f64 = 1e-5;
        const TOL: f64 = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for f in &self.families {
            let slots = f.slots();
            let fields = f
                .fields
                .iter()
                .map(|e| Compiled::new(e, &slots))
                .collect::<Result<Vec<_>, _>>()?;
            for b in &f.bindings {
                let r = &self.characteristic(&b.characteristic)?.r;
                let pk = f.param_index(&b.param).expect("checked at parse");
                let mut worst = (0.0, String::new());
                for _ in 0..POINTS {
                    let params = f.random_params(&mut rng);
                    let (x1, x2) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                    let scale = f.binding_scale(b, &params)?;
                    let rhs = OnShellEvaluator::new(f, &params, r.components())?.eval_vec(
                        x1,
                        x2,
                        Complex64::new(1.0, 0.0),
                    )?;
                    let at = |delta: f64| -> Result<Vec<Complex64>> {
                        let mut vals: Vec<Complex64> = [x1, x2]
                            .iter()
                            .chain(&params)
                            .map(|&v| Complex64::new(v, 0.0))
                            .collect();
                        vals[2 + pk] += delta;
                        Ok(fields
                            .iter()
                            .map(|c| c.eval(&vals))
                            .collect::<Result<_, _>>()?)
                    };
                    let (plus, minus) = (at(STEP)?, at(-STEP)?);
                    for k in 0..f.fields.len() {
                        let lhs = scale * (plus[k] - minus[k]) / (2.0 * STEP);
                        let res = (lhs - rhs[k]).norm();
                        if res > worst.0 {
                            let names: Vec<String> = f
                                .params
                                .iter()
                                .zip(&params)
                                .map(|(p, v)| format!("{}={v:.6}", p.name))
                                .collect();
                            worst = (res, format!("x=({x1:.6}, {x2:.6}), {}", names.join(", ")));
                        }
                    }
                }
                if worst.0 >= TOL {
                    return Err(Error::BindingCheck {
                        binding: format!("{} -> {}.{}", b.characteristic, f.name, b.param),
                        point: worst.1,
                        residual: worst.0,
                    });
                }
            }
        }
        Ok(())
    }

    /// Logs a warning for every characteristic whose prolonged ZCC residual is
    /// not small at random points of any registered family.
    fn advise_symmetries(&self, seed: u64) -> Result<()> {
        let zcc = self.zcc_matrix()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in &self.characteristics {
            let target = zcc.prolong(&c.r)?;
            let mut passes_somewhere = self.families.is_empty();
            for f in &self.families {
                let mut worst: f64 = 0.0;
                for _ in 0..5 {
                    let params = f.random_params(&mut rng);
                    let eval = OnShellEvaluator::new(f, &params, target.entries())?;
                    let (x1, x2) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                    let v = eval.eval_vec(x1, x2, Complex64::new(1.0, 0.0))?;
                    worst = worst.max(v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
                }
                passes_somewhere |= worst < 1e-6;
            }
            if !passes_somewhere {
                log::info!(
                    "characteristic `{}` of model `{}` is not a symmetry of the zero-curvature condition on any registered solution",
                    c.name,
                    self.name
                );
            }
        }
        Ok(())
    }

    /// The definition in the model file format; [`load_model`] reads it back
    /// to an equal definition.
    pub fn to_toml(&self) -> String {
        config::render(self)
    }
}

/// Parses and validates a model file.
pub fn load_model(text: &str) -> Result<ModelDefinition> {
    let m = config::parse(text)?;
    config::check_symbols(&m)?;
    m.check_bindings(0)?;
    let report = m.check_lambda_independence(0)?;
    if !report.passed {
        return Err(Error::LambdaDependence {
            spread: report.max_spread.0,
        });
    }
    m.advise_symmetries(0)?;
    Ok(m)
}

/// An `n×n` matrix written as `rXcY = "expr"` lines.
pub fn parse_matrix_file(text: &str, n: usize) -> Result<MatrixExpr> {
    config::parse_matrix(text, n)
}

/// A model shipped with the library.
pub fn builtin(name: &str) -> Result<ModelDefinition> {
    match name {
        "sine-gordon" => load_model(SINE_GORDON),
        _ => Err(Error::UnknownModel(name.to_owned())),
    }
}
