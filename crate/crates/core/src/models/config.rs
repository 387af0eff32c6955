//! The TOML model file format.

use std::collections::BTreeMap;
use std::fmt::Write;

use num_complex::Complex64;
use serde::Deserialize;

use super::{Binding, ModelDefinition, NamedCharacteristic, Parameter, SolutionFamily};
use crate::error::{Error, Result};
use crate::liealg::MatrixExpr;
use crate::symexpr::{parse_expr, Characteristic, ScalarExpr, Symbol};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    model: ModelSection,
    #[serde(rename = "U1")]
    u1: BTreeMap<String, String>,
    #[serde(rename = "U2")]
    u2: BTreeMap<String, String>,
    #[serde(default)]
    solution: BTreeMap<String, SolutionSection>,
    #[serde(default)]
    binding: BTreeMap<String, BindingSection>,
    #[serde(default)]
    characteristic: BTreeMap<String, BTreeMap<String, String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    name: String,
    fields: usize,
    dim: usize,
    #[serde(default)]
    singular_lambdas: Vec<LambdaValue>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LambdaValue {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Deserialize)]
struct SolutionSection {
    params: Vec<String>,
    #[serde(default)]
    ranges: BTreeMap<String, [f64; 2]>,
    #[serde(flatten)]
    fields: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BindingSection {
    solution: String,
    param: String,
    scale: String,
}

const DEFAULT_RANGE: (f64, f64) = (-1.0, 1.0);

fn expr(text: &str, location: impl Into<String>) -> Result<ScalarExpr> {
    parse_expr(text).map_err(|source| Error::ParseAt {
        location: location.into(),
        source,
    })
}

fn matrix(section: &str, entries: &BTreeMap<String, String>, n: usize) -> Result<MatrixExpr> {
    let mut found = vec![None; n * n];
    for (key, text) in entries {
        let (r, c) = parse_entry_key(key).ok_or_else(|| {
            Error::Config(format!(
                "[{section}]: unexpected key `{key}` (expected rXcY)"
            ))
        })?;
        if r == 0 || c == 0 || r > n || c > n {
            return Err(Error::DimensionMismatch(format!(
                "[{section}] has entry `{key}` but dim = {n}"
            )));
        }
        found[(r - 1) * n + (c - 1)] = Some(expr(text, format!("{section}.{key}"))?);
    }
    let entries = found
        .into_iter()
        .enumerate()
        .map(|(k, e)| {
            e.ok_or_else(|| {
                Error::DimensionMismatch(format!(
                    "[{section}] is missing entry r{}c{} (dim = {n})",
                    k / n + 1,
                    k % n + 1
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixExpr::new(n, entries)
}

fn parse_entry_key(key: &str) -> Option<(usize, usize)> {
    let rest = key.strip_prefix('r')?;
    let (r, c) = rest.split_once('c')?;
    Some((r.parse().ok()?, c.parse().ok()?))
}

fn indexed_key(key: &str, prefix: &str) -> Option<usize> {
    key.strip_prefix(prefix)?.parse().ok().filter(|&k| k >= 1)
}

/// A TOML table of `rXcY = "expr"` entries, as in the `[U1]` section.
pub(super) fn parse_matrix(text: &str, n: usize) -> Result<MatrixExpr> {
    let entries: BTreeMap<String, String> =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    matrix("matrix", &entries, n)
}

/// Parses a model file into an unvalidated definition.
pub(super) fn parse(text: &str) -> Result<ModelDefinition> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let ModelSection {
        name,
        fields: n_fields,
        dim,
        singular_lambdas,
    } = file.model;
    if n_fields == 0 || dim == 0 {
        return Err(Error::Config("`fields` and `dim` must be positive".into()));
    }
    let u1 = matrix("U1", &file.u1, dim)?;
    let u2 = matrix("U2", &file.u2, dim)?;
    let singular_lambdas = singular_lambdas
        .into_iter()
        .map(|v| match v {
            LambdaValue::Real(x) => Complex64::new(x, 0.0),
            LambdaValue::Complex([re, im]) => Complex64::new(re, im),
        })
        .collect();

    let mut families = Vec::new();
    for (fname, sec) in file.solution {
        let mut fields = vec![None; n_fields];
        for (key, text) in &sec.fields {
            let k = indexed_key(key, "theta").ok_or_else(|| {
                Error::Config(format!("[solution.{fname}]: unexpected key `{key}`"))
            })?;
            if k > n_fields {
                return Err(Error::DimensionMismatch(format!(
                    "[solution.{fname}] defines `{key}` but the model has {n_fields} field(s)"
                )));
            }
            fields[k - 1] = Some(expr(text, format!("solution.{fname}.{key}"))?);
        }
        let fields = fields
            .into_iter()
            .enumerate()
            .map(|(k, f)| {
                f.ok_or_else(|| {
                    Error::Config(format!("[solution.{fname}] is missing theta{}", k + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for r in sec.ranges.keys() {
            if !sec.params.contains(r) {
                return Err(Error::Config(format!(
                    "[solution.{fname}]: range for undeclared parameter `{r}`"
                )));
            }
        }
        let params = sec
            .params
            .iter()
            .map(|p| Parameter {
                name: p.clone(),
                range: sec
                    .ranges
                    .get(p)
                    .map(|r| (r[0], r[1]))
                    .unwrap_or(DEFAULT_RANGE),
            })
            .collect();
        families.push(SolutionFamily {
            name: fname,
            params,
            fields,
            bindings: Vec::new(),
        });
    }

    for (cname, sec) in file.binding {
        let scale = expr(&sec.scale, format!("binding.{cname}.scale"))?;
        let family = families
            .iter_mut()
            .find(|f| f.name == sec.solution)
            .ok_or_else(|| {
                Error::Config(format!(
                    "[binding.{cname}]: unknown solution `{}`",
                    sec.solution
                ))
            })?;
        family.bindings.push(Binding {
            characteristic: cname,
            param: sec.param,
            scale,
        });
    }

    let mut characteristics = Vec::new();
    for (cname, comps) in file.characteristic {
        let mut r = vec![ScalarExpr::zero(); n_fields];
        for (key, text) in &comps {
            let k = indexed_key(key, "R").ok_or_else(|| {
                Error::Config(format!("[characteristic.{cname}]: unexpected key `{key}`"))
            })?;
            if k > n_fields {
                return Err(Error::DimensionMismatch(format!(
                    "[characteristic.{cname}] defines `{key}` but the model has {n_fields} field(s)"
                )));
            }
            r[k - 1] = expr(text, format!("characteristic.{cname}.{key}"))?;
        }
        characteristics.push(NamedCharacteristic {
            name: cname,
            r: Characteristic::new(r)?,
        });
    }

    Ok(ModelDefinition {
        name,
        field_count: n_fields,
        algebra_dim: dim,
        u1,
        u2,
        singular_lambdas,
        families,
        characteristics,
    })
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_owned()).to_string()
}

fn float(x: f64) -> String {
    toml::Value::Float(x).to_string()
}

fn write_matrix(out: &mut String, section: &str, m: &MatrixExpr) {
    writeln!(out, "\n[{section}]").unwrap();
    for r in 0..m.dim() {
        for c in 0..m.dim() {
            writeln!(
                out,
                "r{}c{} = {}",
                r + 1,
                c + 1,
                quote(&m.get(r, c).to_string())
            )
            .unwrap();
        }
    }
}

/// Renders a definition in the model file format.
pub(super) fn render(m: &ModelDefinition) -> String {
    let mut out = String::new();
    out.push_str("[model]\n");
    writeln!(out, "name = {}", quote(&m.name)).unwrap();
    writeln!(out, "fields = {}", m.field_count).unwrap();
    writeln!(out, "dim = {}", m.algebra_dim).unwrap();
    let lambdas: Vec<String> = m
        .singular_lambdas
        .iter()
        .map(|z| {
            if z.im == 0.0 {
                float(z.re)
            } else {
                format!("[{}, {}]", float(z.re), float(z.im))
            }
        })
        .collect();
    writeln!(out, "singular_lambdas = [{}]", lambdas.join(", ")).unwrap();
    write_matrix(&mut out, "U1", &m.u1);
    write_matrix(&mut out, "U2", &m.u2);
    for f in &m.families {
        writeln!(out, "\n[solution.{}]", f.name).unwrap();
        let params: Vec<String> = f.params.iter().map(|p| quote(&p.name)).collect();
        writeln!(out, "params = [{}]", params.join(", ")).unwrap();
        for (k, e) in f.fields.iter().enumerate() {
            writeln!(out, "theta{} = {}", k + 1, quote(&e.to_string())).unwrap();
        }
        let ranges: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{} = [{}, {}]", p.name, float(p.range.0), float(p.range.1)))
            .collect();
        writeln!(out, "ranges = {{ {} }}", ranges.join(", ")).unwrap();
    }
    for f in &m.families {
        for b in &f.bindings {
            writeln!(out, "\n[binding.{}]", b.characteristic).unwrap();
            writeln!(out, "solution = {}", quote(&f.name)).unwrap();
            writeln!(out, "param = {}", quote(&b.param)).unwrap();
            writeln!(out, "scale = {}", quote(&b.scale.to_string())).unwrap();
        }
    }
    for c in &m.characteristics {
        writeln!(out, "\n[characteristic.{}]", c.name).unwrap();
        for (k, e) in c.r.components().iter().enumerate() {
            writeln!(out, "R{} = {}", k + 1, quote(&e.to_string())).unwrap();
        }
    }
    out
}

/// Checks the symbol usage rules of every expression in the definition.
pub(super) fn check_symbols(m: &ModelDefinition) -> Result<()> {
    for (name, u) in [("U1", &m.u1), ("U2", &m.u2)] {
        for s in u.free_symbols() {
            match s {
                Symbol::Param(p) => {
                    return Err(Error::Config(format!(
                        "{name} mentions family parameter `{p}`"
                    )));
                }
                Symbol::Jet(j) if j.field() > m.field_count => {
                    return Err(Error::InvalidJet(format!(
                        "{name} mentions `{j}` but fields = {}",
                        m.field_count
                    )));
                }
                _ => {}
            }
        }
    }
    for f in &m.families {
        for (k, e) in f.fields.iter().enumerate() {
            for s in e.free_symbols() {
                let ok = match &s {
                    Symbol::X1 | Symbol::X2 => true,
                    Symbol::Param(p) => f.params.iter().any(|q| &q.name == p),
                    _ => false,
                };
                if !ok {
                    return Err(Error::Config(format!(
                        "solution `{}` field theta{} may only use x1, x2 and declared parameters, found `{s}`",
                        f.name,
                        k + 1
                    )));
                }
            }
        }
        for b in &f.bindings {
            if !m.characteristics.iter().any(|c| c.name == b.characteristic) {
                return Err(Error::Config(format!(
                    "binding for unknown characteristic `{}`",
                    b.characteristic
                )));
            }
            if !f.params.iter().any(|p| p.name == b.param) {
                return Err(Error::Config(format!(
                    "binding `{}` uses `{}`, which is not a parameter of `{}`",
                    b.characteristic, b.param, f.name
                )));
            }
            for s in b.scale.free_symbols() {
                if !matches!(&s, Symbol::Param(p) if f.params.iter().any(|q| &q.name == p)) {
                    return Err(Error::Config(format!(
                        "binding `{}` scale may only use parameters of `{}`, found `{s}`",
                        b.characteristic, f.name
                    )));
                }
            }
        }
    }
    Ok(())
}
