//! Restriction of scalars along an unramified extension, holomorphic and
//! full base change of analytic functions, and the slotwise tensor model.

use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::iwahori::{self, IwahoriMatrix};
use crate::padic::{Coeff, PadicScalar};
use crate::principal_series::{coord_name, Character, Chart, PrincipalSeries};
use crate::tate::{Role, TateSeries, Variable, VariableSet, MAX_VARS};
use crate::unramified::{trace_form_determinant, UnramifiedField, UnramifiedScalar};

type L = UnramifiedScalar;

/// Name of the coordinate of `name` along basis vector `i` (1-based).
pub fn res_name(name: &str, i: usize) -> String {
    format!("{name}#{i}")
}

/// Name of `name` in tensor slot `s` (slot `s` carries the `s`-th Frobenius twist).
pub fn slot_name(name: &str, s: usize) -> String {
    format!("{name}@{s}")
}

/// Power basis `1, w, .., w^(N-1)` of the ring of integers of `L`, with the
/// source variables over `L` and their `N` coordinates each over Q_p.
#[derive(Clone, Debug)]
pub struct ResScalarsContext {
    field: Arc<UnramifiedField>,
    source: Arc<VariableSet>,
    target: Arc<VariableSet>,
    slots: Arc<VariableSet>,
}

impl ResScalarsContext {
    pub fn new(field: &Arc<UnramifiedField>, source: &Arc<VariableSet>) -> Result<Self> {
        let nn = field.degree();
        let total = source.len() * nn;
        if total > MAX_VARS {
            return Err(Error::SizeLimit(format!("{total} coordinates exceed {MAX_VARS}")));
        }
        if trace_form_determinant(field)?.val() != Some(0) {
            return Err(Error::InvalidInput("basis does not span the integers".into()));
        }
        let mut target = Vec::with_capacity(total);
        let mut slots = Vec::with_capacity(total);
        for s in 0..nn {
            for v in source.vars() {
                slots.push(Variable { name: slot_name(&v.name, s), role: v.role });
            }
        }
        for v in source.vars() {
            for i in 1..=nn {
                target.push(Variable { name: res_name(&v.name, i), role: Role::ResCoord { basis: i } });
            }
        }
        Ok(ResScalarsContext {
            field: field.clone(),
            source: source.clone(),
            target: VariableSet::new(target)?,
            slots: VariableSet::new(slots)?,
        })
    }

    pub fn field(&self) -> &Arc<UnramifiedField> {
        &self.field
    }

    pub fn degree(&self) -> usize {
        self.field.degree()
    }

    pub fn source(&self) -> &Arc<VariableSet> {
        &self.source
    }

    /// `x#i`: coordinate of source variable `x` on basis vector `i`.
    pub fn target(&self) -> &Arc<VariableSet> {
        &self.target
    }

    /// `x@s`: copy of source variable `x` in slot `s`.
    pub fn slots(&self) -> &Arc<VariableSet> {
        &self.slots
    }

    pub fn basis(&self) -> Vec<L> {
        (0..self.degree()).map(|i| L::basis(&self.field, i)).collect()
    }

    fn target_index(&self, v: usize, i: usize) -> usize {
        v * self.degree() + i
    }

    // sum_i sigma^s(e_i) x#i for source variable v
    fn linear_form(&self, v: usize, s: usize, trunc: u32) -> TateSeries<L> {
        let mut out = TateSeries::zero(&self.target, &self.field, trunc);
        for (i, e) in self.basis().iter().enumerate() {
            let x = TateSeries::var(&self.target, &self.field, trunc, self.target_index(v, i));
            out = out.add(&x.scale(&e.frobenius_pow(s)));
        }
        out
    }

    fn check_source<C: Coeff>(&self, f: &TateSeries<C>) -> Result<()> {
        if f.vars().vars() != self.source.vars() {
            return Err(Error::VariableMismatch("series is not over the source variables".into()));
        }
        Ok(())
    }

    /// `f(sum_i e_i x_i)` for every source variable `x`.
    pub fn restrict_scalars(&self, f: &TateSeries<L>) -> Result<TateSeries<L>> {
        self.check_source(f)?;
        let images: Vec<_> = (0..self.source.len()).map(|v| self.linear_form(v, 0, f.trunc())).collect();
        f.substitute(&images)
    }

    /// Coefficients of `f` carried into `L`.
    pub fn extend(&self, f: &TateSeries<PadicScalar>) -> TateSeries<L> {
        f.map_coeffs(&self.field, |c| L::from_qp(&self.field, c))
    }

    /// `b1(f)`.
    pub fn holomorphic_bc(&self, f: &TateSeries<PadicScalar>) -> Result<TateSeries<L>> {
        self.check_source(f)?;
        self.restrict_scalars(&self.extend(f))
    }

    /// `b(f) = prod_s frob^s(b1(f))`, Frobenius acting on coefficients.
    pub fn full_bc(&self, f: &TateSeries<PadicScalar>) -> Result<TateSeries<L>> {
        let b1 = self.holomorphic_bc(f)?;
        let mut out = b1.clone();
        for s in 1..self.degree() {
            out = out.mul(&b1.map_coeffs(&self.field, |c| c.frobenius_pow(s)));
        }
        Ok(out)
    }

    /// Copy of `f` in slot `s`.
    pub fn to_slot(&self, f: &TateSeries<L>, s: usize) -> Result<TateSeries<L>> {
        self.check_source(f)?;
        let m = self.source.len();
        Ok(f.embed(&self.slots, &(0..m).map(|v| s * m + v).collect::<Vec<_>>()))
    }

    /// `prod_s f(x@s)`.
    pub fn tensor_form(&self, f: &TateSeries<PadicScalar>) -> Result<TateSeries<L>> {
        let g = self.extend(f);
        let mut out = self.to_slot(&g, 0)?;
        for s in 1..self.degree() {
            out = out.mul(&self.to_slot(&g, s)?);
        }
        Ok(out)
    }

    /// `x@s -> sum_i frob^s(e_i) x#i`.
    pub fn identify_slots(&self, g: &TateSeries<L>) -> Result<TateSeries<L>> {
        if g.vars().vars() != self.slots.vars() {
            return Err(Error::VariableMismatch("series is not over the slot variables".into()));
        }
        let m = self.source.len();
        let images: Vec<_> = (0..self.slots.len()).map(|k| self.linear_form(k % m, k / m, g.trunc())).collect();
        g.substitute(&images)
    }

    /// `diag(1, .., t, .., 1)` with `t` in Q_p acting on restricted
    /// coordinates; source variables must be unipotent coordinates.
    pub fn act_diag(&self, chi: &Character<L>, k: usize, t: &PadicScalar, g: &TateSeries<L>) -> Result<TateSeries<L>> {
        if g.vars().vars() != self.target.vars() {
            return Err(Error::VariableMismatch("series is not over the restricted coordinates".into()));
        }
        let one = PadicScalar::one(t.ctx());
        if t.sub(&one).val().is_some_and(|v| v < 1) {
            return Err(Error::DomainViolation("torus parameter must be 1 mod p".into()));
        }
        let (vars, d) = (g.vars(), g.trunc());
        let tl = L::from_qp(&self.field, t);
        let tinv = tl.inv()?;
        let mut images: Vec<_> = (0..vars.len()).map(|v| TateSeries::var(vars, &self.field, d, v)).collect();
        for (v, var) in self.source.vars().iter().enumerate() {
            let (i, j) = match var.role {
                Role::Unipotent { i, j } => (i, j),
                _ => return Err(Error::InvalidInput(format!("{} is not a unipotent coordinate", var.name))),
            };
            let factor = if i == k {
                &tinv
            } else if j == k {
                &tl
            } else {
                continue;
            };
            for b in 0..self.degree() {
                let idx = self.target_index(v, b);
                images[idx] = images[idx].scale(factor);
            }
        }
        Ok(g.substitute(&images)?.scale(&chi.component(k, &tl)?))
    }

    pub fn to_json(&self) -> Value {
        self.field.to_json()
    }
}

/// Truncated model of the tensor product over the Frobenius twists of the
/// holomorphic base change of the principal series, with `G(Q_p)` acting
/// diagonally.
#[derive(Clone, Debug)]
pub struct TensorRep {
    ctx: ResScalarsContext,
    slots: Vec<PrincipalSeries<L>>,
    trunc: u32,
}

/// Unipotent coordinates of rank `n`, copied into every slot.
pub fn tensor_rep(chi: &Character<PadicScalar>, n: usize, field: &Arc<UnramifiedField>, trunc: u32) -> Result<TensorRep> {
    if chi.n() != n {
        return Err(Error::InvalidInput("character size differs from n".into()));
    }
    if !chi.check_analytic().analytic {
        return Err(Error::DomainViolation("character is not analytic".into()));
    }
    let source = crate::principal_series::unipotent_vars(n)?;
    let ctx = ResScalarsContext::new(field, &source)?;
    let lifted = Character::new(chi.params().iter().map(|c| L::from_qp(field, c)).collect())
        .with_ramification(chi.ramification());
    let m = source.len();
    let mut slots = Vec::new();
    let mut twisted = lifted;
    for s in 0..field.degree() {
        let chart = Chart::standard(n).shifted(s * m);
        slots.push(PrincipalSeries::with_chart(n, twisted.clone(), chart, ctx.slots().clone(), field)?);
        twisted = twisted.frobenius();
    }
    Ok(TensorRep { ctx, slots, trunc })
}

impl TensorRep {
    pub fn context(&self) -> &ResScalarsContext {
        &self.ctx
    }

    pub fn vars(&self) -> &Arc<VariableSet> {
        self.ctx.slots()
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    /// The factor representation of slot `s`.
    pub fn slot(&self, s: usize) -> &PrincipalSeries<L> {
        &self.slots[s]
    }

    pub fn constant(&self, c: L) -> TateSeries<L> {
        TateSeries::constant(self.vars(), self.ctx.field(), self.trunc, c)
    }

    /// Coordinate `a[i,j]@s`.
    pub fn coordinate(&self, i: usize, j: usize, s: usize) -> Result<TateSeries<L>> {
        let name = slot_name(&coord_name(i, j), s);
        let v = self.vars().index_of(&name).ok_or_else(|| Error::InvalidInput(format!("no coordinate {name}")))?;
        Ok(TateSeries::var(self.vars(), self.ctx.field(), self.trunc, v))
    }

    /// `g` acting in every slot.
    pub fn act_group(&self, g: &IwahoriMatrix, f: &TateSeries<L>) -> Result<TateSeries<L>> {
        let mut out = f.clone();
        for rep in &self.slots {
            out = rep.act_group(g, &out)?;
        }
        Ok(out)
    }

    /// Single one-parameter factor acting in every slot.
    pub fn act_factor(&self, factor: &iwahori::OneParamFactor, f: &TateSeries<L>) -> Result<TateSeries<L>> {
        let mut out = f.clone();
        for rep in &self.slots {
            out = rep.act_factor(factor, &out)?;
        }
        Ok(out)
    }

    /// Eigenvalue of the constant vector under `diag(1, .., t, .., 1)`
    /// computed slot by slot, and `chi_k(t)^N` from the norm of `t`.
    pub fn constant_eigenvalue(&self, k: usize, t: &PadicScalar) -> Result<(L, L)> {
        let field = self.ctx.field();
        let factor = iwahori::OneParamFactor::new(iwahori::FactorKind::Diag(k), t.clone())?;
        let one = self.constant(L::one(field));
        let image = self.act_factor(&factor, &one)?;
        if image.len() > 1 {
            return Err(Error::InvalidInput("constant vector is not an eigenvector".into()));
        }
        let slotwise = image.constant_term().cloned().unwrap_or_else(|| L::zero(field));
        let norm = L::from_qp(field, t).norm()?;
        let via_norm = self.slots[0].chi().component(k, &L::from_qp(field, &norm))?;
        Ok((slotwise, via_norm))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "context": self.ctx.to_json(),
            "truncation": self.trunc,
            "variables": self.vars().vars().iter().map(|v| v.name.clone()).collect::<Vec<_>>(),
            "characters": self.slots.iter().map(|r| r.chi().to_json()).collect::<Vec<_>>(),
        })
    }
}
