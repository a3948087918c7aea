//! Truncated multivariate Tate algebra.
//!
//! Series are truncated by total degree `D`. Each series records two
//! precision bounds besides the precision of its individual coefficients:
//! `tail`, a lower bound on the valuations of the discarded terms of degree
//! greater than `D`, and `floor`, an absolute precision below which the stored
//! coefficients (and absent ones) are not certified.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::padic::Coeff;

/// Valuation bound meaning "nothing there".
pub const INF: i64 = i64::MAX;
/// Valuation bound meaning "no control".
pub const NEG: i64 = i64::MIN;

/// Sum of two valuation bounds.
pub fn vadd(a: i64, b: i64) -> i64 {
    if a == INF || b == INF {
        INF
    } else if a == NEG || b == NEG {
        NEG
    } else {
        a + b
    }
}

fn vmul(k: i64, a: i64) -> i64 {
    if a == INF || a == NEG {
        if k == 0 {
            0
        } else {
            a
        }
    } else {
        k * a
    }
}

pub const MAX_VARS: usize = 16;
pub const MAX_TRUNCATION: u32 = 120;

/// Role of a variable; it fixes the congruence domain the variable ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Role {
    /// Unipotent coordinate `a_(i,j)` in Z_p.
    Unipotent { i: usize, j: usize },
    /// Unipotent coordinate stored as `a_(i,j) = p * var`.
    RescaledUnipotent { i: usize, j: usize },
    /// Lower unipotent parameter in Z_p.
    LowerParam,
    /// Torus parameter `xi` with `t = 1 + p xi`.
    DiagParam,
    /// Upper unipotent parameter in pZ_p.
    UpperParam,
    /// Upper unipotent parameter stored as `y = p * eta`.
    RescaledUpperParam,
    /// Restriction-of-scalars coordinate along basis vector `basis`.
    ResCoord { basis: usize },
    Generic,
}

impl Role {
    /// Minimal valuation of the points of the domain.
    pub fn domain_val(&self) -> i64 {
        match self {
            Role::UpperParam => 1,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub role: Role,
}

/// Ordered list of named variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VariableSet {
    vars: Vec<Variable>,
}

impl VariableSet {
    pub fn new(vars: Vec<Variable>) -> Result<Arc<Self>> {
        if vars.len() > MAX_VARS {
            return Err(Error::SizeLimit(format!("{} variables exceed {MAX_VARS}", vars.len())));
        }
        for (k, v) in vars.iter().enumerate() {
            if vars[..k].iter().any(|w| w.name == v.name) {
                return Err(Error::InvalidInput(format!("duplicate variable {}", v.name)));
            }
        }
        Ok(Arc::new(VariableSet { vars }))
    }

    pub fn from_names(names: &[(&str, Role)]) -> Result<Arc<Self>> {
        Self::new(names.iter().map(|(n, r)| Variable { name: n.to_string(), role: *r }).collect())
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn get(&self, i: usize) -> &Variable {
        &self.vars[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// This set followed by `extra`.
    pub fn extend(&self, extra: &[(String, Role)]) -> Result<Arc<Self>> {
        let mut vars = self.vars.clone();
        vars.extend(extra.iter().map(|(n, r)| Variable { name: n.clone(), role: *r }));
        Self::new(vars)
    }
}

/// Exponent vector packed one byte per variable, first variable most
/// significant, so that the integer order is the lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mono(u128);

impl Mono {
    pub const ONE: Mono = Mono(0);

    fn shift(i: usize) -> u32 {
        ((MAX_VARS - 1 - i) * 8) as u32
    }

    pub fn var(i: usize) -> Mono {
        Mono(1u128 << Self::shift(i))
    }

    pub fn from_exps(exps: &[u32]) -> Mono {
        let mut m = 0u128;
        for (i, &e) in exps.iter().enumerate() {
            assert!(e < 256, "exponent overflow");
            m |= (e as u128) << Self::shift(i);
        }
        Mono(m)
    }

    pub fn exp(&self, i: usize) -> u32 {
        ((self.0 >> Self::shift(i)) & 0xff) as u32
    }

    pub fn exps(&self, nvars: usize) -> Vec<u32> {
        (0..nvars).map(|i| self.exp(i)).collect()
    }

    pub fn degree(&self) -> u32 {
        fn half(v: u64) -> u32 {
            let v = (v & 0x00ff_00ff_00ff_00ff) + ((v >> 8) & 0x00ff_00ff_00ff_00ff);
            let v = (v & 0x0000_ffff_0000_ffff) + ((v >> 16) & 0x0000_ffff_0000_ffff);
            ((v & 0xffff_ffff) + (v >> 32)) as u32
        }
        half(self.0 as u64) + half((self.0 >> 64) as u64)
    }

    /// Product of monomials; callers keep degrees below 256.
    pub fn mul(self, o: Mono) -> Mono {
        Mono(self.0 + o.0)
    }

    pub fn with_exp(self, i: usize, e: u32) -> Mono {
        let s = Self::shift(i);
        Mono((self.0 & !(0xffu128 << s)) | ((e as u128) << s))
    }
}

/// Gauss norm `p^(-exponent)`; `exponent` is `None` for the zero series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussNorm {
    pub p: u64,
    pub exponent: Option<i64>,
}

impl GaussNorm {
    pub fn as_ratio(&self) -> Option<Ratio<i128>> {
        match self.exponent {
            None => Some(Ratio::from_integer(0)),
            Some(e) => {
                let base = (self.p as i128).checked_pow(e.unsigned_abs() as u32)?;
                Some(if e <= 0 { Ratio::from_integer(base) } else { Ratio::new(1, base) })
            }
        }
    }
}

/// Value of a series at a point, with the number of certified digits.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation<C> {
    pub value: C,
    pub certified: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TateSeries<C: Coeff> {
    vars: Arc<VariableSet>,
    ctx: C::Ctx,
    trunc: u32,
    terms: BTreeMap<Mono, C>,
    tail: i64,
    floor: i64,
}

fn same_vars(a: &Arc<VariableSet>, b: &Arc<VariableSet>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl<C: Coeff> TateSeries<C> {
    pub fn zero(vars: &Arc<VariableSet>, ctx: &C::Ctx, trunc: u32) -> Self {
        assert!(trunc <= MAX_TRUNCATION, "truncation degree too large");
        TateSeries { vars: vars.clone(), ctx: ctx.clone(), trunc, terms: BTreeMap::new(), tail: INF, floor: INF }
    }

    pub fn constant(vars: &Arc<VariableSet>, ctx: &C::Ctx, trunc: u32, c: C) -> Self {
        Self::monomial(vars, ctx, trunc, Mono::ONE, c)
    }

    pub fn one(vars: &Arc<VariableSet>, ctx: &C::Ctx, trunc: u32) -> Self {
        Self::constant(vars, ctx, trunc, C::one(ctx))
    }

    pub fn var(vars: &Arc<VariableSet>, ctx: &C::Ctx, trunc: u32, i: usize) -> Self {
        Self::monomial(vars, ctx, trunc, Mono::var(i), C::one(ctx))
    }

    pub fn monomial(vars: &Arc<VariableSet>, ctx: &C::Ctx, trunc: u32, m: Mono, c: C) -> Self {
        Self::from_terms(vars, ctx, trunc, [(m, c)])
    }

    /// Sums the given terms; terms above the truncation degree are rejected.
    pub fn from_terms(
        vars: &Arc<VariableSet>,
        ctx: &C::Ctx,
        trunc: u32,
        terms: impl IntoIterator<Item = (Mono, C)>,
    ) -> Self {
        let mut out = Self::zero(vars, ctx, trunc);
        for (m, c) in terms {
            assert!(m.degree() <= trunc, "term above truncation degree");
            out.add_term(m, c);
        }
        out.normalize();
        out
    }

    /// Polynomial from integer coefficients.
    pub fn from_int_terms(vars: &Arc<VariableSet>, ctx: &C::Ctx, trunc: u32, terms: &[(&[u32], i64)]) -> Self {
        Self::from_terms(vars, ctx, trunc, terms.iter().map(|(e, c)| (Mono::from_exps(e), C::from_i64(ctx, *c))))
    }

    fn add_term(&mut self, m: Mono, c: C) {
        if c.is_exact_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(slot) => *slot = slot.add(&c),
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    // Drops zero coefficients, folding inexact ones into the floor.
    fn normalize(&mut self) {
        let mut floor = self.floor;
        self.terms.retain(|_, c| {
            if c.is_zero() {
                if let Some(a) = c.abs_prec() {
                    floor = floor.min(a);
                }
                false
            } else {
                true
            }
        });
        self.floor = floor;
    }

    pub fn vars(&self) -> &Arc<VariableSet> {
        &self.vars
    }

    pub fn ctx(&self) -> &C::Ctx {
        &self.ctx
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    pub fn terms(&self) -> &BTreeMap<Mono, C> {
        &self.terms
    }

    pub fn coeff(&self, m: Mono) -> Option<&C> {
        self.terms.get(&m)
    }

    pub fn coeff_of(&self, exps: &[u32]) -> Option<&C> {
        self.terms.get(&Mono::from_exps(exps))
    }

    pub fn constant_term(&self) -> Option<&C> {
        self.terms.get(&Mono::ONE)
    }

    /// Lower bound on the valuations of the discarded terms (`INF`: none).
    pub fn tail(&self) -> i64 {
        self.tail
    }

    /// Absolute precision cap on all coefficients (`INF`: none).
    pub fn floor(&self) -> i64 {
        self.floor
    }

    /// True when terms above the truncation degree were discarded.
    pub fn is_truncated(&self) -> bool {
        self.tail != INF
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Minimal valuation of the stored coefficients.
    pub fn min_val(&self) -> i64 {
        self.terms.values().filter_map(|c| c.val()).min().unwrap_or(INF)
    }

    fn min_val_eff(&self) -> i64 {
        self.min_val().min(self.floor)
    }

    // lower bound for every coefficient of the true series, tail included
    fn min_val_all(&self) -> i64 {
        self.min_val_eff().min(self.tail)
    }

    fn per_degree_min(&self) -> Vec<i64> {
        let mut out = vec![INF; self.trunc as usize + 1];
        for (m, c) in &self.terms {
            let d = m.degree() as usize;
            if let Some(v) = c.val() {
                out[d] = out[d].min(v);
            }
        }
        out
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.degree()).max()
    }

    /// Absolute precision to which every coefficient of degree at most `D` is known.
    pub fn certified(&self) -> i64 {
        self.terms.values().filter_map(|c| c.abs_prec()).fold(self.floor, i64::min)
    }

    pub fn gauss_norm(&self) -> GaussNorm {
        let m = self.min_val();
        GaussNorm { p: C::prime(&self.ctx), exponent: if m == INF { None } else { Some(m) } }
    }

    fn check_vars(&self, o: &Self) -> Result<()> {
        if same_vars(&self.vars, &o.vars) {
            Ok(())
        } else {
            Err(Error::VariableMismatch("operands live in different variable sets".into()))
        }
    }

    /// The same series regarded at truncation `d`.
    pub fn with_trunc(&self, d: u32) -> Self {
        let mut out = self.clone();
        if d < self.trunc {
            let mut dropped = INF;
            out.terms.retain(|m, c| {
                if m.degree() > d {
                    dropped = dropped.min(c.val().unwrap_or(INF));
                    false
                } else {
                    true
                }
            });
            out.tail = out.tail.min(dropped).min(out.floor);
        } else if d > self.trunc && self.tail != INF {
            // degrees above the old bound are only known to the tail bound
            out.floor = out.floor.min(self.tail);
        }
        out.trunc = d;
        out
    }

    pub fn checked_add(&self, o: &Self) -> Result<Self> {
        self.check_vars(o)?;
        let d = self.trunc.min(o.trunc);
        let (a, b) = (self.with_trunc(d), o.with_trunc(d));
        let mut out = a.clone();
        out.tail = a.tail.min(b.tail);
        out.floor = a.floor.min(b.floor);
        for (m, c) in &b.terms {
            out.add_term(*m, c.clone());
        }
        out.normalize();
        Ok(out)
    }

    pub fn add(&self, o: &Self) -> Self {
        self.checked_add(o).expect("variable sets agree")
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_exact_zero() {
            return Self::zero(&self.vars, &self.ctx, self.trunc);
        }
        let v = c.val().unwrap_or_else(|| c.abs_prec().unwrap());
        let mut out = Self::zero(&self.vars, &self.ctx, self.trunc);
        out.tail = vadd(self.tail, v);
        out.floor = vadd(self.floor, v);
        for (m, x) in &self.terms {
            out.terms.insert(*m, x.mul(c));
        }
        out.normalize();
        out
    }

    pub fn checked_mul(&self, o: &Self) -> Result<Self> {
        self.check_vars(o)?;
        let d = self.trunc.min(o.trunc);
        let (a, b) = (self.with_trunc(d), o.with_trunc(d));
        let du = d as usize;
        let mut by_deg_b: Vec<Vec<(Mono, &C)>> = vec![Vec::new(); du + 1];
        for (m, c) in &b.terms {
            by_deg_b[m.degree() as usize].push((*m, c));
        }
        let mut acc: BTreeMap<Mono, C> = BTreeMap::new();
        for (m1, c1) in &a.terms {
            let d1 = m1.degree() as usize;
            for bucket in &by_deg_b[..=du - d1] {
                for (m2, c2) in bucket {
                    let prod = c1.mul(c2);
                    match acc.get_mut(&m1.mul(*m2)) {
                        Some(slot) => *slot = slot.add(&prod),
                        None => {
                            acc.insert(m1.mul(*m2), prod);
                        }
                    }
                }
            }
        }
        let (ma, mb) = (a.per_degree_min(), b.per_degree_min());
        let mut overflow = INF;
        for (d1, &v1) in ma.iter().enumerate() {
            if v1 == INF {
                continue;
            }
            for (d2, &v2) in mb.iter().enumerate() {
                if d1 + d2 > du && v2 != INF {
                    overflow = overflow.min(v1 + v2);
                }
            }
        }
        let (ea, eb) = (a.min_val_eff(), b.min_val_eff());
        let tail = overflow
            .min(vadd(a.tail, eb))
            .min(vadd(ea, b.tail))
            .min(vadd(a.tail, b.tail));
        let floor = vadd(a.floor, eb).min(vadd(b.floor, ea));
        let mut out = TateSeries { vars: a.vars.clone(), ctx: a.ctx.clone(), trunc: d, terms: acc, tail, floor };
        out.normalize();
        Ok(out)
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.checked_mul(o).expect("variable sets agree")
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(&self.vars, &self.ctx, self.trunc);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Multiplies by `p^k`; for negative `k` every stored coefficient must be
    /// divisible by `p^(-k)`.
    pub fn mul_p_pow(&self, k: i64) -> Result<Self> {
        if k < 0 && self.min_val() < -k {
            return Err(Error::DomainViolation(format!("series is not divisible by p^{}", -k)));
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.mul_p_pow(k);
        }
        out.tail = vadd(out.tail, k);
        out.floor = vadd(out.floor, k);
        Ok(out)
    }

    /// Keeps exactly the terms of total degree at most `n`.
    pub fn truncate_deg(&self, n: u32) -> Result<Self> {
        if n > self.trunc {
            return Err(Error::InvalidInput(format!("cannot keep degree {n} above truncation {}", self.trunc)));
        }
        let mut out = self.clone();
        out.terms.retain(|m, _| m.degree() <= n);
        out.tail = INF;
        Ok(out)
    }

    /// Applies `f` to every coefficient.
    pub fn map_coeffs<D: Coeff>(&self, ctx: &D::Ctx, f: impl Fn(&C) -> D) -> TateSeries<D> {
        let mut out = TateSeries::<D>::zero(&self.vars, ctx, self.trunc);
        out.tail = self.tail;
        out.floor = self.floor;
        for (m, c) in &self.terms {
            out.terms.insert(*m, f(c));
        }
        out.normalize();
        out
    }

    /// Relabels variable `i` as `map[i]` of `target`.
    pub fn embed(&self, target: &Arc<VariableSet>, map: &[usize]) -> Self {
        let nv = self.vars.len();
        let mut out = Self::zero(target, &self.ctx, self.trunc);
        out.tail = self.tail;
        out.floor = self.floor;
        for (m, c) in &self.terms {
            let mut exps = vec![0u32; target.len()];
            for i in 0..nv {
                exps[map[i]] += m.exp(i);
            }
            out.add_term(Mono::from_exps(&exps), c.clone());
        }
        out.normalize();
        out
    }

    /// Embeds into `target`, matching variables by name.
    pub fn embed_by_name(&self, target: &Arc<VariableSet>) -> Result<Self> {
        let map = self
            .vars
            .vars()
            .iter()
            .map(|v| {
                target
                    .index_of(&v.name)
                    .ok_or_else(|| Error::VariableMismatch(format!("{} is missing from the target", v.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.embed(target, &map))
    }

    /// Re-expresses over `target`, which must hold every variable occurring
    /// in a stored term.
    pub fn restrict_to(&self, target: &Arc<VariableSet>) -> Result<Self> {
        let map: Vec<Option<usize>> = self.vars.vars().iter().map(|v| target.index_of(&v.name)).collect();
        let mut out = Self::zero(target, &self.ctx, self.trunc);
        out.tail = self.tail;
        out.floor = self.floor;
        for (m, c) in &self.terms {
            let mut exps = vec![0u32; target.len()];
            for (i, t) in map.iter().enumerate() {
                let e = m.exp(i);
                if e == 0 {
                    continue;
                }
                match t {
                    Some(t) => exps[*t] += e,
                    None => {
                        return Err(Error::VariableMismatch(format!(
                            "{} occurs but is missing from the target",
                            self.vars.get(i).name
                        )))
                    }
                }
            }
            out.add_term(Mono::from_exps(&exps), c.clone());
        }
        out.normalize();
        Ok(out)
    }

    /// Coefficient of `x_var^k`, as a series in the remaining variables of
    /// truncation `D - k`.
    pub fn coeff_in_var(&self, var: usize, k: u32) -> Result<Self> {
        if k > self.trunc {
            return Err(Error::TruncationInsufficient(format!("power {k} above truncation {}", self.trunc)));
        }
        let mut out = Self::zero(&self.vars, &self.ctx, self.trunc - k);
        out.tail = self.tail;
        out.floor = self.floor;
        for (m, c) in &self.terms {
            if m.exp(var) == k {
                out.terms.insert(m.with_exp(var, 0), c.clone());
            }
        }
        Ok(out)
    }

    /// Partial derivative in variable `var`.
    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(&self.vars, &self.ctx, self.trunc);
        // the tail feeds the top degree
        out.tail = self.tail;
        out.floor = self.floor.min(self.tail);
        for (m, c) in &self.terms {
            let e = m.exp(var);
            if e > 0 {
                out.add_term(m.with_exp(var, e - 1), c.mul(&C::from_i64(&self.ctx, e as i64)));
            }
        }
        out.normalize();
        out
    }

    fn domain_val(&self) -> i64 {
        let nv = self.vars.len();
        let mut best = self.tail.min(self.floor);
        for (m, c) in &self.terms {
            let mut v = c.val().unwrap_or(INF);
            for i in 0..nv {
                v = vadd(v, m.exp(i) as i64 * self.vars.get(i).role.domain_val());
            }
            best = best.min(v);
        }
        best
    }

    /// Formal composition `f(images)`.
    ///
    /// `images[i]` replaces variable `i`; each image must map the domain of the
    /// target variables into the domain of variable `i`.
    pub fn substitute(&self, images: &[TateSeries<C>]) -> Result<Self> {
        if images.len() != self.vars.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} images, got {}",
                self.vars.len(),
                images.len()
            )));
        }
        let target = if images.is_empty() {
            return Ok(self.clone());
        } else {
            images[0].vars.clone()
        };
        for img in images {
            if !same_vars(&img.vars, &target) {
                return Err(Error::VariableMismatch("images live in different variable sets".into()));
            }
        }
        let dt = images.iter().map(|s| s.trunc).min().unwrap();
        let nv = self.vars.len();
        let mut used = vec![0u32; nv];
        for m in self.terms.keys() {
            for (i, u) in used.iter_mut().enumerate() {
                *u = (*u).max(m.exp(i));
            }
        }
        for (i, img) in images.iter().enumerate() {
            let need = self.vars.get(i).role.domain_val();
            if (used[i] > 0 || self.tail != INF) && img.domain_val() < need {
                return Err(Error::UnsoundSubstitution(format!(
                    "image of {} leaves its domain",
                    self.vars.get(i).name
                )));
            }
        }
        let mut powers: Vec<Vec<TateSeries<C>>> = Vec::with_capacity(nv);
        for (i, img) in images.iter().enumerate() {
            let img = img.with_trunc(dt);
            let mut row = vec![Self::one(&target, &self.ctx, dt)];
            for k in 1..=used[i] as usize {
                let next = row[k - 1].mul(&img);
                row.push(next);
            }
            powers.push(row);
        }
        let mut out = Self::zero(&target, &self.ctx, dt);
        for (m, c) in &self.terms {
            let mut prod: Option<TateSeries<C>> = None;
            for (i, row) in powers.iter().enumerate() {
                let e = m.exp(i) as usize;
                if e == 0 {
                    continue;
                }
                prod = Some(match prod {
                    None => row[e].clone(),
                    Some(p) => p.mul(&row[e]),
                });
            }
            let term = match prod {
                None => Self::constant(&target, &self.ctx, dt, c.clone()),
                Some(p) => p.scale(c),
            };
            out = out.add(&term);
        }
        let m = images.iter().map(|s| s.min_val_all()).min().unwrap();
        let has_const = images.iter().any(|s| s.constant_term().is_some() || s.floor != INF);
        if self.tail != INF {
            let t = if m >= 0 { vadd(self.tail, vmul(self.trunc as i64 + 1, m)) } else { NEG };
            if has_const || dt > self.trunc {
                out.floor = out.floor.min(t);
            }
            out.tail = out.tail.min(t);
        }
        if self.floor != INF {
            let f = if m >= 0 { self.floor } else { NEG };
            out.floor = out.floor.min(f);
        }
        Ok(out)
    }

    // Shared driver for the geometric and binomial expansions:
    // sum_q coef(q) u^q, with coef(q) integral.
    fn expand_powers(&self, mut coef: impl FnMut(u32) -> C) -> Result<Self> {
        let cval = self.constant_term().and_then(|c| c.val()).unwrap_or(INF).min(self.floor);
        let nilpotent = cval == INF;
        if !nilpotent && (cval < 1 || self.min_val_all() < 0) {
            return Err(Error::NotInvertible(
                "expansion needs a zero constant term or integral coefficients with p | constant".into(),
            ));
        }
        let mut out = Self::one(&self.vars, &self.ctx, self.trunc);
        let mut pw = out.clone();
        let limit = self.trunc as u64 + 4 * C::cap(&self.ctx) as u64 + 16;
        let mut q = 0u32;
        loop {
            q += 1;
            pw = pw.mul(self);
            if q as u64 > limit {
                return Err(Error::PrecisionExhausted("expansion did not settle".into()));
            }
            let done = if nilpotent { pw.is_zero() } else { pw.min_val_eff() >= out.certified() };
            if done {
                let rest = pw.min_val_eff().min(pw.tail);
                let rest = if self.min_val_all() >= 0 { rest } else { NEG };
                out.tail = out.tail.min(rest);
                out.floor = out.floor.min(pw.floor);
                if !nilpotent {
                    out.floor = out.floor.min(pw.min_val_eff());
                }
                return Ok(out);
            }
            let c = coef(q);
            out = out.add(&pw.scale(&c));
        }
    }

    /// Truncation of `sum_q u^q = (1 - u)^(-1)`.
    pub fn invert_one_minus(&self) -> Result<Self> {
        let one = C::one(&self.ctx);
        self.expand_powers(|_| one.clone())
    }

    /// Truncation of `(1 + u)^c = sum_q binom(c, q) u^q`.
    pub fn char_power(&self, c: &C) -> Result<Self> {
        let p = C::prime(&self.ctx);
        if let Some(m) = crate::padic::analytic_margin(1, p, c.val()) {
            if m <= Ratio::from_integer(0) {
                return Err(Error::Divergence(format!("exponent valuation {:?} fails the analyticity bound", c.val())));
            }
        }
        let ctx = self.ctx.clone();
        let mut binom = C::one(&ctx);
        let c = c.clone();
        self.expand_powers(move |q| {
            let k = C::from_i64(&ctx, q as i64 - 1);
            binom = binom.mul(&c.sub(&k)).div_int(q as i64);
            binom.clone()
        })
    }

    /// Evaluates at a point whose coordinates lie in the variable domains.
    pub fn evaluate(&self, point: &[C]) -> Result<Evaluation<C>> {
        if point.len() != self.vars.len() {
            return Err(Error::InvalidInput(format!("expected {} coordinates", self.vars.len())));
        }
        for (i, x) in point.iter().enumerate() {
            let need = self.vars.get(i).role.domain_val();
            if let Some(v) = x.val() {
                if v < need {
                    return Err(Error::DomainViolation(format!(
                        "{} = {:?} is outside its domain",
                        self.vars.get(i).name,
                        x
                    )));
                }
            }
        }
        let maxe: Vec<u32> = (0..point.len())
            .map(|i| self.terms.keys().map(|m| m.exp(i)).max().unwrap_or(0))
            .collect();
        let powers: Vec<Vec<C>> = point
            .iter()
            .zip(&maxe)
            .map(|(x, &e)| {
                let mut row = vec![C::one(&self.ctx)];
                for k in 1..=e as usize {
                    let next = row[k - 1].mul(x);
                    row.push(next);
                }
                row
            })
            .collect();
        let mut value = C::zero(&self.ctx);
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, row) in powers.iter().enumerate() {
                let e = m.exp(i) as usize;
                if e > 0 {
                    t = t.mul(&row[e]);
                }
            }
            value = value.add(&t);
        }
        let mv = point.iter().filter_map(|x| x.val()).min().unwrap_or(INF);
        let tail = if self.tail == INF || mv == INF { INF } else { vadd(self.tail, vmul(self.trunc as i64 + 1, mv)) };
        let mut certified = self.floor.min(tail);
        if let Some(a) = value.abs_prec() {
            certified = certified.min(a);
        }
        if certified != INF {
            value = value.add(&C::zero_to(&self.ctx, certified));
        }
        Ok(Evaluation { value, certified })
    }

    /// Certified digits of agreement with `o`, or `None` when some coefficient
    /// differs beyond the declared remainders of both series.
    pub fn agreement(&self, o: &Self) -> Option<i64> {
        if !same_vars(&self.vars, &o.vars) {
            return None;
        }
        let d = self.trunc.min(o.trunc);
        let (a, b) = (self.with_trunc(d), o.with_trunc(d));
        let bound = a.floor.min(b.floor);
        let mut digits = bound;
        let keys: std::collections::BTreeSet<Mono> = a.terms.keys().chain(b.terms.keys()).copied().collect();
        let zero = C::zero(&self.ctx);
        for m in keys {
            let x = a.terms.get(&m).unwrap_or(&zero);
            let y = b.terms.get(&m).unwrap_or(&zero);
            let diff = x.sub(y);
            if diff.is_zero() {
                if let Some(pr) = diff.abs_prec() {
                    digits = digits.min(pr);
                }
            } else if diff.val().unwrap() < bound {
                return None;
            }
        }
        Some(digits)
    }

    /// Variables that occur in some stored term.
    pub fn support_vars(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&i| self.terms.keys().any(|m| m.exp(i) > 0)).collect()
    }

    pub fn to_json(&self) -> Value {
        let nv = self.vars.len();
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(m, c)| json!({"exp": m.exps(nv), "coeff": c.to_json()}))
            .collect();
        let bound = |b: i64| if b == INF { Value::Null } else if b == NEG { json!("unbounded") } else { json!(b) };
        json!({
            "p": C::prime(&self.ctx),
            "precision": C::cap(&self.ctx),
            "truncation": self.trunc,
            "variables": self.vars.vars(),
            "terms": terms,
            "tail": bound(self.tail),
            "floor": bound(self.floor),
        })
    }

    pub fn from_json(ctx: &C::Ctx, v: &Value, parse: impl Fn(&C::Ctx, &Value) -> Result<C>) -> Result<Self> {
        let bad = |what: &str| Error::InvalidInput(format!("malformed series: {what}"));
        let p = v.get("p").and_then(|x| x.as_u64()).ok_or_else(|| bad("p"))?;
        if p != C::prime(ctx) {
            return Err(bad("prime does not match the context"));
        }
        let trunc = v.get("truncation").and_then(|x| x.as_u64()).ok_or_else(|| bad("truncation"))? as u32;
        if trunc > MAX_TRUNCATION {
            return Err(bad("truncation too large"));
        }
        let vars: Vec<Variable> =
            serde_json::from_value(v.get("variables").cloned().ok_or_else(|| bad("variables"))?)
                .map_err(|e| bad(&e.to_string()))?;
        let vars = VariableSet::new(vars)?;
        let mut out = Self::zero(&vars, ctx, trunc);
        for t in v.get("terms").and_then(|x| x.as_array()).ok_or_else(|| bad("terms"))? {
            let exps: Vec<u32> = serde_json::from_value(t.get("exp").cloned().ok_or_else(|| bad("exp"))?)
                .map_err(|e| bad(&e.to_string()))?;
            if exps.len() != vars.len() || exps.iter().any(|&e| e > trunc) {
                return Err(bad("exponent vector"));
            }
            let m = Mono::from_exps(&exps);
            if m.degree() > trunc {
                return Err(bad("term above truncation"));
            }
            out.add_term(m, parse(ctx, t.get("coeff").ok_or_else(|| bad("coeff"))?)?);
        }
        let read_bound = |key: &str| -> Result<i64> {
            match v.get(key) {
                None | Some(Value::Null) => Ok(INF),
                Some(Value::String(s)) if s == "unbounded" => Ok(NEG),
                Some(x) => x.as_i64().ok_or_else(|| bad(key)),
            }
        };
        out.tail = read_bound("tail")?;
        out.floor = read_bound("floor")?;
        out.normalize();
        Ok(out)
    }
}

impl<C: Coeff + fmt::Display> fmt::Display for TateSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            write!(f, "0")?;
        }
        let nv = self.vars.len();
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for i in 0..nv {
                match m.exp(i) {
                    0 => {}
                    1 => write!(f, "*{}", self.vars.get(i).name)?,
                    e => write!(f, "*{}^{e}", self.vars.get(i).name)?,
                }
            }
        }
        if self.tail != INF {
            write!(f, " + O(deg > {})", self.trunc)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{PadicScalar, QpCtx};

    type S = TateSeries<PadicScalar>;

    fn setup() -> (Arc<VariableSet>, QpCtx) {
        let vars = VariableSet::from_names(&[("a", Role::Generic), ("y", Role::Generic)]).unwrap();
        (vars, QpCtx::new(7, 12).unwrap())
    }

    #[test]
    fn one_plus_a_times_one_minus_a() {
        let (v, c) = setup();
        let f = S::from_int_terms(&v, &c, 4, &[(&[0, 0], 1), (&[1, 0], 1)]);
        let g = S::from_int_terms(&v, &c, 4, &[(&[0, 0], 1), (&[1, 0], -1)]);
        let h = S::from_int_terms(&v, &c, 4, &[(&[0, 0], 1), (&[2, 0], -1)]);
        assert_eq!(f.mul(&g).agreement(&h), Some(12));
        assert!(!f.mul(&g).is_truncated());
    }

    #[test]
    fn gauss_norm_examples() {
        let (v, c) = setup();
        let f = S::from_int_terms(&v, &c, 4, &[(&[1, 0], 7), (&[2, 0], 1)]);
        assert_eq!(f.gauss_norm().exponent, Some(0));
        let g = S::from_int_terms(&v, &c, 4, &[(&[0, 0], 343), (&[1, 1], 7)]);
        assert_eq!(g.gauss_norm().as_ratio(), Some(Ratio::new(1, 7)));
        assert_eq!(S::zero(&v, &c, 3).gauss_norm().as_ratio(), Some(Ratio::from_integer(0)));
    }

    #[test]
    fn geometric_series() {
        let (v, c) = setup();
        let y = S::var(&v, &c, 3, 1);
        let inv = y.invert_one_minus().unwrap();
        let want = S::from_int_terms(&v, &c, 3, &[(&[0, 0], 1), (&[0, 1], 1), (&[0, 2], 1), (&[0, 3], 1)]);
        assert!(inv.agreement(&want).is_some());
        assert!(inv.is_truncated());
        let zero = S::zero(&v, &c, 3);
        assert!(zero.invert_one_minus().unwrap().agreement(&S::one(&v, &c, 3)).is_some());
    }

    #[test]
    fn char_power_small_integers() {
        let (v, c) = setup();
        let u = S::from_int_terms(&v, &c, 4, &[(&[0, 1], 7)]);
        let two = PadicScalar::from_i64(c, 2);
        let want = S::from_int_terms(&v, &c, 4, &[(&[0, 0], 1), (&[0, 1], 14), (&[0, 2], 49)]);
        assert!(u.char_power(&two).unwrap().agreement(&want).is_some());
        let one = PadicScalar::one(c);
        let want1 = S::from_int_terms(&v, &c, 4, &[(&[0, 0], 1), (&[0, 1], 7)]);
        assert!(u.char_power(&one).unwrap().agreement(&want1).is_some());
    }

    #[test]
    fn substitution_binomial() {
        let (v, c) = setup();
        let f = S::from_int_terms(&v, &c, 2, &[(&[2, 0], 1)]);
        let a_minus_y = S::from_int_terms(&v, &c, 2, &[(&[1, 0], 1), (&[0, 1], -1)]);
        let y = S::var(&v, &c, 2, 1);
        let g = f.substitute(&[a_minus_y, y]).unwrap();
        let want = S::from_int_terms(&v, &c, 2, &[(&[2, 0], 1), (&[1, 1], -2), (&[0, 2], 1)]);
        assert_eq!(g.agreement(&want), Some(12));
    }

    #[test]
    fn unsound_substitution_is_rejected() {
        let vars = VariableSet::from_names(&[("y", Role::UpperParam)]).unwrap();
        let c = QpCtx::new(7, 12).unwrap();
        let f = S::var(&vars, &c, 2, 0);
        let one = S::one(&vars, &c, 2);
        assert!(matches!(f.substitute(&[one]), Err(Error::UnsoundSubstitution(_))));
    }

    #[test]
    fn evaluation_reports_certified_digits() {
        let (v, c) = setup();
        let f = S::from_int_terms(&v, &c, 2, &[(&[2, 0], 1)]);
        let e = f.evaluate(&[PadicScalar::from_i64(c, 7), PadicScalar::zero(c)]).unwrap();
        assert!(e.value.sub(&PadicScalar::from_i64(c, 49)).is_zero());
        let y = S::var(&v, &c, 2, 1).invert_one_minus().unwrap();
        let e = y.evaluate(&[PadicScalar::zero(c), PadicScalar::from_i64(c, 7)]).unwrap();
        assert_eq!(e.certified, 3);
    }

    #[test]
    fn truncate_partition() {
        let (v, c) = setup();
        let f = S::from_int_terms(&v, &c, 3, &[(&[0, 0], 1), (&[1, 0], 1), (&[2, 0], 1)]);
        let t0 = f.truncate_deg(0).unwrap();
        assert!(t0.agreement(&S::one(&v, &c, 3)).is_some());
        let t1 = f.truncate_deg(1).unwrap();
        assert!(t1.add(&f.sub(&t1)).agreement(&f).is_some());
        assert!(f.truncate_deg(3).unwrap().agreement(&f).is_some());
    }
}
