//! Evaluation of jet expressions on an explicit solution.

use std::collections::{BTreeSet, HashMap};

use num_complex::Complex64;
use smallvec::SmallVec;

use super::SolutionFamily;
use crate::error::{Error, Result};
use crate::symexpr::{partial, Compiled, EvalContext, JetIndex, ScalarExpr, Symbol};

/// Closed-form jets `θ^k_J(x¹, x²; p)` of a family, obtained by symbolic
/// differentiation of the field expressions.
#[derive(Clone, Debug)]
pub struct JetTable {
    jets: Vec<JetIndex>,
    programs: Vec<Compiled>,
    params: Vec<Complex64>,
}

impl JetTable {
    pub fn new(
        family: &SolutionFamily,
        params: &[f64],
        needed: &BTreeSet<JetIndex>,
    ) -> Result<Self> {
        if params.len() != family.params().len() {
            return Err(Error::Config(format!(
                "solution `{}` takes {} parameters, got {}",
                family.name(),
                family.params().len(),
                params.len()
            )));
        }
        let slots = family.slots();
        let mut memo = HashMap::new();
        let jets: Vec<JetIndex> = needed.iter().copied().collect();
        let programs = jets
            .iter()
            .map(|j| Ok(Compiled::new(&jet_expr(family, *j, &mut memo)?, &slots)?))
            .collect::<Result<_>>()?;
        Ok(JetTable {
            jets,
            programs,
            params: params.iter().map(|&p| Complex64::new(p, 0.0)).collect(),
        })
    }

    pub fn jets(&self) -> &[JetIndex] {
        &self.jets
    }

    /// Jet values at `(x1, x2)` in the order of [`JetTable::jets`], appended to `out`.
    pub fn eval_into(&self, x1: f64, x2: f64, out: &mut SmallVec<[Complex64; 16]>) -> Result<()> {
        let mut slots: SmallVec<[Complex64; 8]> = SmallVec::new();
        slots.push(Complex64::new(x1, 0.0));
        slots.push(Complex64::new(x2, 0.0));
        slots.extend_from_slice(&self.params);
        for p in &self.programs {
            out.push(p.eval(&slots)?);
        }
        Ok(())
    }

    /// Bindings for `x1`, `x2` and every jet of the table.
    pub fn context(&self, x1: f64, x2: f64) -> Result<EvalContext> {
        let mut vals = SmallVec::new();
        self.eval_into(x1, x2, &mut vals)?;
        let mut ctx = EvalContext::new()
            .with(Symbol::X1, Complex64::new(x1, 0.0))
            .with(Symbol::X2, Complex64::new(x2, 0.0));
        for (j, v) in self.jets.iter().zip(vals) {
            ctx.bind(Symbol::Jet(*j), v);
        }
        Ok(ctx)
    }
}

fn jet_expr(
    family: &SolutionFamily,
    j: JetIndex,
    memo: &mut HashMap<JetIndex, ScalarExpr>,
) -> Result<ScalarExpr> {
    if let Some(e) = memo.get(&j) {
        return Ok(e.clone());
    }
    let e = if j.order() == 0 {
        family.fields().get(j.field() - 1).cloned().ok_or_else(|| {
            Error::InvalidJet(format!(
                "`{j}` but solution `{}` has {} field(s)",
                family.name(),
                family.fields().len()
            ))
        })?
    } else {
        let axis = if j.count(2) > 0 { 2 } else { 1 };
        let lower = lowered(j, axis);
        partial(&jet_expr(family, lower, memo)?, &Symbol::coordinate(axis))
    };
    memo.insert(j, e.clone());
    Ok(e)
}

fn lowered(j: JetIndex, axis: u8) -> JetIndex {
    let mut derivs = j.derivs();
    let at = derivs
        .iter()
        .position(|&d| d == axis)
        .expect("axis present");
    derivs.remove(at);
    JetIndex::new(j.field(), &derivs).expect("valid jet")
}

/// A fixed list of jet expressions (in `x1`, `x2`, `lambda` and jets), compiled
/// for repeated evaluation on one member of a solution family.
#[derive(Clone, Debug)]
pub struct OnShellEvaluator {
    table: JetTable,
    targets: Vec<Compiled>,
}

impl OnShellEvaluator {
    pub fn new(family: &SolutionFamily, params: &[f64], targets: &[ScalarExpr]) -> Result<Self> {
        let mut needed = BTreeSet::new();
        for t in targets {
            if let Some(p) = t.free_symbols().into_iter().find(Symbol::is_param) {
                return Err(Error::ParameterInJetCalculus(p.to_string()));
            }
            needed.extend(t.jets());
        }
        let table = JetTable::new(family, params, &needed)?;
        let mut slots = vec![Symbol::X1, Symbol::X2, Symbol::Lambda];
        slots.extend(table.jets().iter().map(|j| Symbol::Jet(*j)));
        let targets = targets
            .iter()
            .map(|t| Compiled::new(t, &slots))
            .collect::<Result<_, _>>()?;
        Ok(OnShellEvaluator { table, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Writes every target's value at `(x1, x2, λ)` into `out`.
    pub fn eval(&self, x1: f64, x2: f64, lambda: Complex64, out: &mut [Complex64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.targets.len());
        let mut slots: SmallVec<[Complex64; 16]> = SmallVec::new();
        slots.push(Complex64::new(x1, 0.0));
        slots.push(Complex64::new(x2, 0.0));
        slots.push(lambda);
        self.table.eval_into(x1, x2, &mut slots)?;
        for (o, t) in out.iter_mut().zip(&self.targets) {
            *o = t.eval(&slots)?;
        }
        Ok(())
    }

    pub fn eval_vec(&self, x1: f64, x2: f64, lambda: Complex64) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::default(); self.targets.len()];
        self.eval(x1, x2, lambda, &mut out)?;
        Ok(out)
    }
}
