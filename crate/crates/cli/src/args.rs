use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "solsurf",
    version,
    about = "Soliton surfaces from Lax pairs and their symmetries"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the Lax pair, the wavefunction and the symmetry criteria on a solution.
    Verify(VerifyArgs),
    /// Build an immersion, export its mesh and curvature.
    Surface(SurfaceArgs),
    /// List or print registered models.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
}

#[derive(Subcommand, Debug)]
pub enum ModelsAction {
    List,
    Show { name: String },
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Built-in model name.
    #[arg(long, default_value = "sine-gordon", conflicts_with = "model_file")]
    pub model: String,
    /// Model definition in TOML.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    /// Solution family; defaults to the only one when the model has one.
    #[arg(long)]
    pub solution: Option<String>,
    /// Family parameter `name=value`; `--name value` is accepted as well.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Spectral parameter `re[,im]`.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub lambda: String,
    /// `x1min,x1max,n1,x2min,x2max,n2`.
    #[arg(long, default_value = "-2,2,201,-2,2,201", allow_hyphen_values = true)]
    pub grid: String,
    /// Parameter step of the variation difference quotient.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// RK4 substeps per grid step.
    #[arg(long, default_value_t = 1)]
    pub substeps: usize,
    /// Seed of randomized spot checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; the JSON report goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Characteristic to check (repeatable); defaults to those bound to the solution.
    #[arg(long = "characteristic")]
    pub characteristics: Vec<String>,
    #[arg(long, default_value = "1e-10")]
    pub tol_zcc: f64,
    #[arg(long, default_value = "1e-6")]
    pub tol_path: f64,
    #[arg(long, default_value = "1e-8")]
    pub tol_det: f64,
    #[arg(long, default_value = "1e-6")]
    pub tol_unitarity: f64,
    #[arg(long, default_value = "1e-8")]
    pub tol_symmetry: f64,
    #[arg(long, default_value = "1e-3")]
    pub tol_lsp: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Generalized,
    SymTafel,
    Gauge,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Obj,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct SurfaceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub immersion: Route,
    /// Characteristic of the generalized route.
    #[arg(long)]
    pub characteristic: Option<String>,
    /// Conformal factor α(λ) of the Sym-Tafel route.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub alpha: String,
    /// Gauge function: e1, e2, e3 or a file of `rXcY = "expr"` entries.
    #[arg(long = "S", value_name = "S")]
    pub s: Option<String>,
    /// Integrate the surface from its tangent vectors instead.
    #[arg(long)]
    pub from_tangents: bool,
    /// Also build the surface by the other route and compare.
    #[arg(long)]
    pub cross_check: bool,
    #[arg(long, value_enum, default_value = "obj")]
    pub format: Format,
    #[arg(long, default_value = "1e-3")]
    pub tol_consistency: f64,
    #[arg(long, default_value = "1e-3")]
    pub tol_cross: f64,
}

/// Rewrites `--name value` and `--name=value` into `--param name=value` when
/// `name` is not an option of the subcommand.
pub fn preprocess(args: Vec<OsString>) -> Vec<OsString> {
    let cmd = Cli::command();
    let Some(sub) = args
        .get(1)
        .and_then(|s| s.to_str())
        .and_then(|s| cmd.find_subcommand(s))
    else {
        return args;
    };
    let known: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_owned))
        .chain(["help".to_owned(), "version".to_owned()])
        .collect();
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    out.extend(it.by_ref().take(2));
    while let Some(arg) = it.next() {
        let Some(flag) = arg
            .to_str()
            .and_then(|s| s.strip_prefix("--"))
            .filter(|f| !f.is_empty())
        else {
            out.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_owned(), Some(v.to_owned())),
            None => (flag.to_owned(), None),
        };
        if known.contains(&name) {
            out.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => Some(OsString::from(v)),
            None => it.next(),
        };
        match value.and_then(|v| v.into_string().ok()) {
            Some(v) => {
                out.push("--param".into());
                out.push(format!("{name}={v}").into());
            }
            // left for clap to reject
            None => out.push(arg),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parameter_shorthand() {
        let got = preprocess(strs(&[
            "solsurf", "verify", "--a", "1", "--d=-0.5", "--lambda", "1", "--seed=3",
        ]));
        assert_eq!(
            got,
            strs(&[
                "solsurf", "verify", "--param", "a=1", "--param", "d=-0.5", "--lambda", "1",
                "--seed=3"
            ])
        );
        let untouched = strs(&["solsurf", "models", "list"]);
        assert_eq!(preprocess(untouched.clone()), untouched);
    }

    #[test]
    fn definitions_are_consistent() {
        Cli::command().debug_assert();
    }
}
