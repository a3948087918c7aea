//! The globally analytic principal series of the pro-p Iwahori group,
//! realized on truncated Tate series in the lower unipotent coordinates.

use std::sync::Arc;

use num_rational::Ratio;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::iwahori::{self, check_prime_for_rank, FactorKind, IwahoriMatrix, OneParamFactor};
use crate::linalg::Mat;
use crate::padic::{analytic_margin, power_char, Coeff};
use crate::tate::{Evaluation, Role, TateSeries, Variable, VariableSet};

/// Locally analytic character `t -> prod t_i^{c_i}` of the diagonal torus.
#[derive(Clone, Debug, PartialEq)]
pub struct Character<C: Coeff> {
    c: Vec<C>,
    ramification: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticVerdict {
    pub analytic: bool,
    /// `v(c_i) - (e/(p-1) - 1)`; `None` for `c_i = 0`.
    pub margins: Vec<Option<Ratio<i64>>>,
}

impl AnalyticVerdict {
    pub fn to_json(&self) -> Value {
        let m: Vec<Value> = self
            .margins
            .iter()
            .map(|x| match x {
                None => json!("inf"),
                Some(r) => json!(r.to_string()),
            })
            .collect();
        json!({"analytic": self.analytic, "margins": m})
    }
}

impl<C: Coeff> Character<C> {
    pub fn new(c: Vec<C>) -> Self {
        Character { c, ramification: 1 }
    }

    pub fn with_ramification(mut self, e: u32) -> Self {
        self.ramification = e;
        self
    }

    pub fn trivial(ctx: &C::Ctx, n: usize) -> Self {
        Self::new(vec![C::zero(ctx); n])
    }

    pub fn from_ints(ctx: &C::Ctx, c: &[i64]) -> Self {
        Self::new(c.iter().map(|&v| C::from_i64(ctx, v)).collect())
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn params(&self) -> &[C] {
        &self.c
    }

    /// `c_k`, 1-based.
    pub fn param(&self, k: usize) -> &C {
        &self.c[k - 1]
    }

    pub fn ramification(&self) -> u32 {
        self.ramification
    }

    pub fn check_analytic(&self) -> AnalyticVerdict {
        let p = self.c.first().map(|x| C::prime(&x.ctx())).unwrap_or(2);
        let margins: Vec<_> = self.c.iter().map(|x| analytic_margin(self.ramification, p, x.val())).collect();
        let analytic = margins.iter().all(|m| m.map_or(true, |m| m > Ratio::from_integer(0)));
        AnalyticVerdict { analytic, margins }
    }

    fn require_analytic(&self) -> Result<()> {
        if self.check_analytic().analytic {
            Ok(())
        } else {
            Err(Error::Divergence("character is not analytic".into()))
        }
    }

    /// `chi_k(t)` for `t` in 1 + pZ_p.
    pub fn component(&self, k: usize, t: &C) -> Result<C> {
        power_char(t, self.param(k))
    }

    /// `chi(diag(t_1, ..., t_n))`.
    pub fn on_diagonal(&self, t: &[C]) -> Result<C> {
        let mut acc = C::one(&t[0].ctx());
        for (k, x) in t.iter().enumerate() {
            acc = acc.mul(&self.component(k + 1, x)?);
        }
        Ok(acc)
    }

    /// Parameters twisted by Frobenius.
    pub fn frobenius(&self) -> Self {
        Character { c: self.c.iter().map(|x| x.frobenius()).collect(), ramification: self.ramification }
    }

    /// Parameters `c'_m = c_{perm[m]}` (1-based entries).
    pub fn reindexed(&self, perm: &[usize]) -> Self {
        Character { c: perm.iter().map(|&k| self.c[k - 1].clone()).collect(), ramification: self.ramification }
    }

    pub fn to_json(&self) -> Value {
        json!({"c": self.c.iter().map(|x| x.to_json()).collect::<Vec<_>>()})
    }
}

/// Variable name of the unipotent coordinate at `(i, j)`.
pub fn coord_name(i: usize, j: usize) -> String {
    format!("a[{i},{j}]")
}

/// The coordinates `a[i,j]`, `i > j`, in lexicographic order.
pub fn unipotent_vars(n: usize) -> Result<Arc<VariableSet>> {
    VariableSet::new(
        iwahori::lower_roots(n)
            .into_iter()
            .map(|(i, j)| Variable { name: coord_name(i, j), role: Role::Unipotent { i, j } })
            .collect(),
    )
}

/// Where each entry of the unipotent matrix lives: entry `(i, j)` equals
/// `p^scale * x_var`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chart {
    n: usize,
    slots: Vec<(usize, i64)>,
}

impl Chart {
    pub fn standard(n: usize) -> Self {
        Chart { n, slots: (0..n * (n - 1) / 2).map(|r| (r, 0)).collect() }
    }

    /// `slots[r]` belongs to the `r`-th root of [`iwahori::lower_roots`].
    pub fn new(n: usize, slots: Vec<(usize, i64)>) -> Self {
        assert_eq!(slots.len(), n * (n - 1) / 2);
        Chart { n, slots }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn root_index(&self, i: usize, j: usize) -> usize {
        (i - 1) * (i - 2) / 2 + (j - 1)
    }

    /// `(variable index, scale)` of the root `(i, j)`, `i > j`.
    pub fn slot(&self, i: usize, j: usize) -> (usize, i64) {
        self.slots[self.root_index(i, j)]
    }

    /// Same chart with every variable index moved by `offset`.
    pub fn shifted(&self, offset: usize) -> Self {
        Chart { n: self.n, slots: self.slots.iter().map(|&(v, e)| (v + offset, e)).collect() }
    }

    /// Entry `(i, j)` of the generic unipotent matrix as a series.
    pub fn entry<C: Coeff>(&self, vars: &Arc<VariableSet>, ctx: &C::Ctx, trunc: u32, i: usize, j: usize) -> TateSeries<C> {
        if i == j {
            TateSeries::one(vars, ctx, trunc)
        } else if i < j {
            TateSeries::zero(vars, ctx, trunc)
        } else {
            let (v, e) = self.slot(i, j);
            TateSeries::var(vars, ctx, trunc, v).mul_p_pow(e).expect("nonnegative scale")
        }
    }

    pub fn matrix<C: Coeff>(&self, vars: &Arc<VariableSet>, ctx: &C::Ctx, trunc: u32) -> Mat<TateSeries<C>> {
        (1..=self.n).map(|i| (1..=self.n).map(|j| self.entry(vars, ctx, trunc, i, j)).collect()).collect()
    }

    /// Series for variable of root `(i, j)` given the series of the entry.
    pub fn to_var<C: Coeff>(&self, i: usize, j: usize, entry: &TateSeries<C>) -> Result<TateSeries<C>> {
        entry.mul_p_pow(-self.slot(i, j).1)
    }

    /// Point of the chart variables at the unipotent matrix `u`.
    pub fn point<C: Coeff>(&self, nvars: usize, ctx: &C::Ctx, u: &Mat<C>) -> Result<Vec<C>> {
        let mut out = vec![C::zero(ctx); nvars];
        for (i, j) in iwahori::lower_roots(self.n) {
            let (v, e) = self.slot(i, j);
            let x = &u[i - 1][j - 1];
            if e > 0 && x.val().is_some_and(|w| w < e) {
                return Err(Error::DomainViolation(format!("entry ({i},{j}) is not divisible by p^{e}")));
            }
            out[v] = x.mul_p_pow(-e);
        }
        Ok(out)
    }
}

/// Parameter of a one-parameter subgroup: a scalar, or a variable of the
/// series acted upon. For the torus the scalar is `t` itself and the
/// variable is `xi` with `t = 1 + p xi`.
#[derive(Clone, Debug, PartialEq)]
pub enum GroupParameter<C> {
    Concrete(C),
    Symbolic(usize),
}

/// Result of the `(1 - y E_ij) A = X Z` factorization.
#[derive(Clone, Debug)]
pub struct XzDecomposition<C: Coeff> {
    pub vars: Arc<VariableSet>,
    pub x: Mat<TateSeries<C>>,
    pub z: Mat<TateSeries<C>>,
    /// The matrix `(1 - y E_ij) A` itself.
    pub lhs: Mat<TateSeries<C>>,
}

/// Doolittle factorization of a matrix of series with diagonal pivots of
/// the form `1 - (topologically nilpotent)`.
pub fn series_lu<C: Coeff>(m: &Mat<TateSeries<C>>) -> Result<(Mat<TateSeries<C>>, Mat<TateSeries<C>>)> {
    let n = m.len();
    let proto = &m[0][0];
    let (vars, ctx, d) = (proto.vars().clone(), proto.ctx().clone(), proto.trunc());
    let zero = TateSeries::zero(&vars, &ctx, d);
    let one = TateSeries::one(&vars, &ctx, d);
    let mut x: Mat<TateSeries<C>> = (0..n)
        .map(|r| (0..n).map(|s| if r == s { one.clone() } else { zero.clone() }).collect())
        .collect();
    let mut z: Mat<TateSeries<C>> = vec![vec![zero.clone(); n]; n];
    for r in 0..n {
        for s in r..n {
            let mut acc = m[r][s].clone();
            for k in 0..r {
                if !x[r][k].is_zero() && !z[k][s].is_zero() {
                    acc = acc.sub(&x[r][k].mul(&z[k][s]));
                }
            }
            z[r][s] = acc;
        }
        let pinv = one.sub(&z[r][r]).invert_one_minus()?;
        for s in r + 1..n {
            let mut acc = m[s][r].clone();
            for k in 0..r {
                if !x[s][k].is_zero() && !z[k][r].is_zero() {
                    acc = acc.sub(&x[s][k].mul(&z[k][r]));
                }
            }
            x[s][r] = acc.mul(&pinv);
        }
    }
    Ok((x, z))
}

/// Minimum valuation of the coefficients of `var^m`, for each `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub rows: Vec<(u32, Option<i64>)>,
    pub integral: bool,
}

impl DecayReport {
    pub fn to_json(&self) -> Value {
        json!({
            "rows": self.rows.iter().map(|(m, v)| json!({"degree": m, "min_valuation": v})).collect::<Vec<_>>(),
            "integral": self.integral,
        })
    }
}

pub fn decay_report<C: Coeff>(f: &TateSeries<C>, var: usize) -> DecayReport {
    let mut rows: Vec<(u32, Option<i64>)> = (0..=f.trunc()).map(|m| (m, None)).collect();
    let mut integral = true;
    for (m, c) in f.terms() {
        let v = c.val().unwrap();
        integral &= v >= 0;
        let slot = &mut rows[m.exp(var) as usize].1;
        *slot = Some(slot.map_or(v, |w: i64| w.min(v)));
    }
    while rows.len() > 1 && rows.last().unwrap().1.is_none() {
        rows.pop();
    }
    DecayReport { rows, integral }
}

/// A principal series representation together with the chart of its
/// coordinates.
#[derive(Clone, Debug)]
pub struct PrincipalSeries<C: Coeff> {
    n: usize,
    chi: Character<C>,
    chart: Chart,
    vars: Arc<VariableSet>,
    ctx: C::Ctx,
}

impl<C: Coeff> PrincipalSeries<C> {
    pub fn standard(n: usize, chi: Character<C>, ctx: &C::Ctx) -> Result<Self> {
        Self::with_chart(n, chi, Chart::standard(n), unipotent_vars(n)?, ctx)
    }

    pub fn with_chart(n: usize, chi: Character<C>, chart: Chart, vars: Arc<VariableSet>, ctx: &C::Ctx) -> Result<Self> {
        check_prime_for_rank(C::base(ctx), n)?;
        if chi.n() != n {
            return Err(Error::InvalidInput(format!("character has {} parameters, expected {n}", chi.n())));
        }
        Ok(PrincipalSeries { n, chi, chart, vars, ctx: ctx.clone() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn chi(&self) -> &Character<C> {
        &self.chi
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn vars(&self) -> &Arc<VariableSet> {
        &self.vars
    }

    pub fn ctx(&self) -> &C::Ctx {
        &self.ctx
    }

    /// Coordinate variables followed by the given parameters.
    pub fn with_params(&self, params: &[(&str, Role)]) -> Result<Arc<VariableSet>> {
        self.vars.extend(&params.iter().map(|(n, r)| (n.to_string(), *r)).collect::<Vec<_>>())
    }

    /// `f` re-expressed over `vars`, which must extend `f`'s variables.
    pub fn lift(&self, f: &TateSeries<C>, vars: &Arc<VariableSet>) -> Result<TateSeries<C>> {
        f.embed_by_name(vars)
    }

    fn identity_images(&self, f: &TateSeries<C>) -> Vec<TateSeries<C>> {
        (0..f.vars().len()).map(|v| TateSeries::var(f.vars(), f.ctx(), f.trunc(), v)).collect()
    }

    fn additive(&self, f: &TateSeries<C>, y: &GroupParameter<C>) -> Result<TateSeries<C>> {
        match y {
            GroupParameter::Concrete(c) => Ok(TateSeries::constant(f.vars(), f.ctx(), f.trunc(), c.clone())),
            GroupParameter::Symbolic(v) => {
                let x = TateSeries::var(f.vars(), f.ctx(), f.trunc(), *v);
                match f.vars().get(*v).role {
                    Role::RescaledUpperParam => x.mul_p_pow(1),
                    _ => Ok(x),
                }
            }
        }
    }

    fn symbolic_role(f: &TateSeries<C>, v: usize) -> Result<Role> {
        if v >= f.vars().len() {
            return Err(Error::InvalidInput(format!("no variable with index {v}")));
        }
        Ok(f.vars().get(v).role)
    }

    /// Action of `diag(1, .., t, .., 1)` with `t` at position `k`.
    pub fn act_diag(&self, k: usize, t: &GroupParameter<C>, f: &TateSeries<C>) -> Result<TateSeries<C>> {
        self.chi.require_analytic()?;
        if k < 1 || k > self.n {
            return Err(Error::InvalidInput(format!("index {k} out of range")));
        }
        let (vars, ctx, d) = (f.vars(), f.ctx(), f.trunc());
        let (tinv, chi_t) = match t {
            GroupParameter::Concrete(t) => {
                let one = C::one(ctx);
                if t.sub(&one).val().is_some_and(|v| v < 1) {
                    return Err(Error::DomainViolation("torus parameter must be 1 mod p".into()));
                }
                (TateSeries::constant(vars, ctx, d, t.inv()?), TateSeries::constant(vars, ctx, d, self.chi.component(k, t)?))
            }
            GroupParameter::Symbolic(v) => {
                if Self::symbolic_role(f, *v)? != Role::DiagParam {
                    return Err(Error::DomainViolation("torus variable must carry the diagonal role".into()));
                }
                let pxi = TateSeries::var(vars, ctx, d, *v).mul_p_pow(1)?;
                (pxi.neg().invert_one_minus()?, pxi.char_power(self.chi.param(k))?)
            }
        };
        let tser = match t {
            GroupParameter::Concrete(t) => TateSeries::constant(vars, ctx, d, t.clone()),
            GroupParameter::Symbolic(v) => TateSeries::one(vars, ctx, d).add(&TateSeries::var(vars, ctx, d, *v).mul_p_pow(1)?),
        };
        self.diag_with(k, &tser, &tinv, &chi_t, f)
    }

    pub(crate) fn diag_with(
        &self,
        k: usize,
        t: &TateSeries<C>,
        tinv: &TateSeries<C>,
        chi_t: &TateSeries<C>,
        f: &TateSeries<C>,
    ) -> Result<TateSeries<C>> {
        let mut images = self.identity_images(f);
        for (i, j) in iwahori::lower_roots(self.n) {
            let v = self.chart.slot(i, j).0;
            if i == k {
                images[v] = images[v].mul(tinv);
            } else if j == k {
                images[v] = images[v].mul(t);
            }
        }
        Ok(f.substitute(&images)?.mul(chi_t))
    }

    /// Action of `1 + y E_ij`, `i > j`.
    pub fn act_lower(&self, i: usize, j: usize, y: &GroupParameter<C>, f: &TateSeries<C>) -> Result<TateSeries<C>> {
        if !(j >= 1 && i > j && i <= self.n) {
            return Err(Error::InvalidInput(format!("({i},{j}) is not a lower position")));
        }
        match y {
            GroupParameter::Concrete(c) => {
                if c.val().is_some_and(|v| v < 0) {
                    return Err(Error::DomainViolation("lower parameter must be integral".into()));
                }
            }
            GroupParameter::Symbolic(v) => {
                if Self::symbolic_role(f, *v)?.domain_val() < 0 {
                    return Err(Error::DomainViolation("bad parameter role".into()));
                }
            }
        }
        let yser = self.additive(f, y)?;
        self.lower_with(i, j, &yser, f)
    }

    pub(crate) fn lower_with(&self, i: usize, j: usize, y: &TateSeries<C>, f: &TateSeries<C>) -> Result<TateSeries<C>> {
        let (vars, ctx, d) = (f.vars(), f.ctx(), f.trunc());
        let mut images = self.identity_images(f);
        for v in 1..j {
            let e = self.chart.entry(vars, ctx, d, i, v).sub(&y.mul(&self.chart.entry(vars, ctx, d, j, v)));
            images[self.chart.slot(i, v).0] = self.chart.to_var(i, v, &e)?;
        }
        let e = self.chart.entry(vars, ctx, d, i, j).sub(y);
        images[self.chart.slot(i, j).0] = self.chart.to_var(i, j, &e)?;
        f.substitute(&images)
    }

    /// Factorization `(1 - y E_ij) A = X Z` over the variables of `f`.
    pub fn xz(&self, i: usize, j: usize, y: &TateSeries<C>) -> Result<XzDecomposition<C>> {
        if y.trunc() < 1 {
            return Err(Error::TruncationInsufficient("truncation degree must be at least 1".into()));
        }
        let (vars, ctx, d) = (y.vars().clone(), y.ctx().clone(), y.trunc());
        let mut m = self.chart.matrix::<C>(&vars, &ctx, d);
        let row_j = m[j - 1].clone();
        for (v, entry) in m[i - 1].iter_mut().enumerate() {
            if !row_j[v].is_zero() {
                *entry = entry.sub(&y.mul(&row_j[v]));
            }
        }
        let (x, z) = series_lu(&m)?;
        Ok(XzDecomposition { vars, x, z, lhs: m })
    }

    /// Action of `1 + y E_ij`, `i < j`, with `y` in pZ_p.
    pub fn act_upper(&self, i: usize, j: usize, y: &GroupParameter<C>, f: &TateSeries<C>) -> Result<TateSeries<C>> {
        if !(i >= 1 && i < j && j <= self.n) {
            return Err(Error::InvalidInput(format!("({i},{j}) is not an upper position")));
        }
        self.chi.require_analytic()?;
        match y {
            GroupParameter::Concrete(c) => {
                if c.val().is_some_and(|v| v < 1) {
                    return Err(Error::DomainViolation("upper parameter must lie in pZ_p".into()));
                }
            }
            GroupParameter::Symbolic(v) => {
                let r = Self::symbolic_role(f, *v)?;
                if !matches!(r, Role::UpperParam | Role::RescaledUpperParam) {
                    return Err(Error::DomainViolation("upper parameter variable must range over pZ_p".into()));
                }
            }
        }
        let yser = self.additive(f, y)?;
        self.upper_with(i, j, &yser, f)
    }

    pub(crate) fn upper_with(&self, i: usize, j: usize, y: &TateSeries<C>, f: &TateSeries<C>) -> Result<TateSeries<C>> {
        let xz = self.xz(i, j, y)?;
        let mut images = self.identity_images(f);
        for (k, l) in iwahori::lower_roots(self.n) {
            images[self.chart.slot(k, l).0] = self.chart.to_var(k, l, &xz.x[k - 1][l - 1])?;
        }
        let mut out = f.substitute(&images)?;
        let one = TateSeries::one(y.vars(), y.ctx(), y.trunc());
        for r in 1..=self.n {
            let c = self.chi.param(r);
            if c.is_exact_zero() {
                continue;
            }
            let u = xz.z[r - 1][r - 1].sub(&one);
            out = out.mul(&u.char_power(&c.neg())?);
        }
        Ok(out)
    }

    /// Action of a single factor with a Q_p parameter.
    pub fn act_factor(&self, factor: &OneParamFactor, f: &TateSeries<C>) -> Result<TateSeries<C>> {
        let param = GroupParameter::Concrete(C::from_qp(&self.ctx, &factor.param));
        match factor.kind {
            FactorKind::Lower(i, j) => self.act_lower(i, j, &param, f),
            FactorKind::Diag(k) => self.act_diag(k, &param, f),
            FactorKind::Upper(i, j) => self.act_upper(i, j, &param, f),
        }
    }

    /// `(g f)(x) = f(g^-1 x)`: the Lazard factors of `g` act from the last
    /// to the first.
    pub fn act_group(&self, g: &IwahoriMatrix, f: &TateSeries<C>) -> Result<TateSeries<C>> {
        if g.n() != self.n {
            return Err(Error::InvalidInput("group element has the wrong size".into()));
        }
        let factors = iwahori::factorize(g)?;
        let mut out = f.clone();
        for factor in factors.iter().rev() {
            let trivial = match factor.kind {
                FactorKind::Diag(_) => factor.param.sub(&crate::PadicScalar::one(factor.param.ctx())).is_exact_zero(),
                _ => factor.param.is_exact_zero(),
            };
            if !trivial {
                out = self.act_factor(factor, &out)?;
            }
        }
        Ok(out)
    }

    /// Value of `f` at the unipotent matrix `u`.
    pub fn evaluate_at(&self, f: &TateSeries<C>, u: &Mat<C>) -> Result<Evaluation<C>> {
        let point = self.chart.point(f.vars().len(), &self.ctx, u)?;
        f.evaluate(&point)
    }

    /// `chi(q^-1)` for upper triangular `q`, through its diagonal.
    pub fn chi_of_inverse(&self, q: &Mat<C>) -> Result<C> {
        let inv: Vec<C> = (0..self.n).map(|k| q[k][k].inv()).collect::<Result<_>>()?;
        self.chi.on_diagonal(&inv)
    }

    /// Series schema extended by the character and rank.
    pub fn vector_json(&self, f: &TateSeries<C>) -> Value {
        let mut v = f.to_json();
        v["character"] = self.chi.to_json();
        v["n"] = json!(self.n);
        v
    }
}

/// Symbolic factorization in the coordinates plus an upper parameter:
/// `y` itself, or `eta` with `y = p eta` when `rescaled`.
pub fn xz_decompose<C: Coeff>(
    ctx: &C::Ctx,
    n: usize,
    i: usize,
    j: usize,
    trunc: u32,
    rescaled: bool,
) -> Result<XzDecomposition<C>> {
    if !(i >= 1 && i < j && j <= n) {
        return Err(Error::InvalidInput(format!("({i},{j}) is not an upper position")));
    }
    if trunc < 1 {
        return Err(Error::TruncationInsufficient("truncation degree must be at least 1".into()));
    }
    let rep = PrincipalSeries::standard(n, Character::trivial(ctx, n), ctx)?;
    let vars = if rescaled {
        rep.with_params(&[("eta", Role::RescaledUpperParam)])?
    } else {
        rep.with_params(&[("y", Role::UpperParam)])?
    };
    let v = vars.len() - 1;
    let mut y = TateSeries::var(&vars, ctx, trunc, v);
    if rescaled {
        y = y.mul_p_pow(1)?;
    }
    rep.xz(i, j, &y)
}
