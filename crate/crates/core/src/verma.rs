//! Lie algebra action on polynomial vectors, weight multiplicities and the
//! irreducibility criterion.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::iwahori::{self, upper_positions};
use crate::padic::Coeff;
use crate::principal_series::{Character, GroupParameter, PrincipalSeries};
use crate::tate::{Mono, Role, TateSeries};

/// Value of `e_i - e_j` on the `k`-th torus coordinate.
pub fn root_on(root: (usize, usize), k: usize) -> i64 {
    (k == root.0) as i64 - (k == root.1) as i64
}

/// `rho^-(H_(i,j)) = i - j`.
pub fn rho_minus(root: (usize, usize)) -> i64 {
    root.0 as i64 - root.1 as i64
}

/// `mu = (-c_1, ..., -c_n)`.
pub fn mu_of<C: Coeff>(chi: &Character<C>) -> Vec<C> {
    chi.params().iter().map(|c| c.neg()).collect()
}

/// `mu(H_(i,j)) = mu_i - mu_j`.
pub fn mu_on_coroot<C: Coeff>(chi: &Character<C>, root: (usize, usize)) -> C {
    let mu = mu_of(chi);
    mu[root.0 - 1].sub(&mu[root.1 - 1])
}

/// Exponents indexed by the negative roots in lexicographic order.
pub type MultiIndex = Vec<u32>;

/// `c_k + sum_{i>k} r_(i,k) - sum_{j<k} r_(k,j)`.
pub fn torus_eigenvalue<C: Coeff>(r: &[u32], k: usize, chi: &Character<C>) -> C {
    let n = chi.n();
    let mut s = 0i64;
    for (idx, root) in iwahori::lower_roots(n).into_iter().enumerate() {
        s -= root_on(root, k) * r[idx] as i64;
    }
    chi.param(k).add(&C::from_i64(&chi.param(k).ctx(), s))
}

/// Shift `sum r_alpha alpha` as an integer vector.
pub fn shift_of(n: usize, r: &[u32]) -> Vec<i64> {
    let mut s = vec![0i64; n];
    for (idx, (i, j)) in iwahori::lower_roots(n).into_iter().enumerate() {
        s[i - 1] += r[idx] as i64;
        s[j - 1] -= r[idx] as i64;
    }
    s
}

/// `sum_k k s_k`; equals `sum r_(i,j) (i - j)`.
pub fn height(shift: &[i64]) -> i64 {
    shift.iter().enumerate().map(|(k, s)| (k as i64 + 1) * s).sum()
}

/// Number of `r` in N^d with `sum r_alpha alpha = shift`.
pub fn kostant_count(n: usize, shift: &[i64]) -> u64 {
    fn go(roots: &[(usize, usize)], idx: usize, s: &mut Vec<i64>, memo: &mut HashMap<(usize, Vec<i64>), u64>) -> u64 {
        if height(s) < 0 {
            return 0;
        }
        if idx == roots.len() {
            return s.iter().all(|&x| x == 0) as u64;
        }
        if let Some(&v) = memo.get(&(idx, s.clone())) {
            return v;
        }
        let (i, j) = roots[idx];
        let mut total = 0;
        let saved = s.clone();
        loop {
            total += go(roots, idx + 1, s, memo);
            s[i - 1] -= 1;
            s[j - 1] += 1;
            if height(s) < 0 {
                break;
            }
        }
        *s = saved;
        memo.insert((idx, s.clone()), total);
        total
    }
    if shift.len() != n || shift.iter().sum::<i64>() != 0 {
        return 0;
    }
    let roots = iwahori::lower_roots(n);
    go(&roots, 0, &mut shift.to_vec(), &mut HashMap::new())
}

/// Multiplicity of the weight `xi` in the span of the monomials:
/// the number of `r` with `xi = -mu - sum r_alpha alpha`.
pub fn kostant_multiplicity<C: Coeff>(xi: &[C], chi: &Character<C>) -> u64 {
    let n = chi.n();
    let mu = mu_of(chi);
    let mut shift = Vec::with_capacity(n);
    for k in 0..n {
        // shift = -mu - xi must be integral
        let s = mu[k].neg().sub(&xi[k]);
        if s.is_zero() {
            shift.push(0);
            continue;
        }
        match s.to_qp().and_then(|x| x.as_small_integer()) {
            Some(v) => shift.push(v as i64),
            None => return 0,
        }
    }
    kostant_count(n, &shift)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation<C> {
    pub root: (usize, usize),
    /// `-mu(H_alpha) + i - j`.
    pub value: C,
    /// The integer the value equals modulo the working precision.
    pub integer: i128,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrreducibilityReport<C> {
    pub irreducible: bool,
    pub values: Vec<((usize, usize), C)>,
    pub violations: Vec<Violation<C>>,
}

impl<C: Coeff> IrreducibilityReport<C> {
    pub fn to_json(&self) -> Value {
        json!({
            "irreducible": self.irreducible,
            "values": self.values.iter().map(|(r, v)| json!({"root": [r.0, r.1], "value": v.to_json()})).collect::<Vec<_>>(),
            "violations": self.violations.iter().map(|v| json!({
                "root": [v.root.0, v.root.1],
                "value": v.value.to_json(),
                "integer": v.integer.to_string(),
                "status": "integer to working precision",
            })).collect::<Vec<_>>(),
        })
    }
}

/// The criterion value `c_i - c_j + (i - j)` at every negative root; the
/// representation is irreducible iff none is a positive integer.
pub fn is_irreducible<C: Coeff>(chi: &Character<C>) -> IrreducibilityReport<C> {
    let n = chi.n();
    let mut values = Vec::new();
    let mut violations = Vec::new();
    for root in iwahori::lower_roots(n) {
        let ctx = chi.param(1).ctx();
        let v = mu_on_coroot(chi, root).neg().add(&C::from_i64(&ctx, rho_minus(root)));
        let int = if v.is_zero() { Some(0) } else { v.to_qp().and_then(|x| x.as_small_integer()) };
        if let Some(k) = int {
            if k >= 1 {
                violations.push(Violation { root, value: v.clone(), integer: k });
            }
        }
        values.push((root, v));
    }
    IrreducibilityReport { irreducible: violations.is_empty(), values, violations }
}

/// Infinitesimal actions of the root vectors and the torus.
#[derive(Clone, Debug)]
pub struct LieAction<C: Coeff> {
    rep: PrincipalSeries<C>,
    // per upper position: (y-linear part of each coordinate image, of the character factor)
    upper: HashMap<(usize, usize), (Vec<TateSeries<C>>, TateSeries<C>)>,
}

impl<C: Coeff> LieAction<C> {
    pub fn new(rep: &PrincipalSeries<C>) -> Result<Self> {
        let n = rep.n();
        let vars = rep.with_params(&[("y", Role::UpperParam)])?;
        let yv = vars.len() - 1;
        let d = 5;
        let ctx = rep.ctx();
        let y = TateSeries::var(&vars, ctx, d, yv);
        let mut upper = HashMap::new();
        for (i, j) in upper_positions(n) {
            let xz = rep.xz(i, j, &y)?;
            let mut dx = vec![TateSeries::zero(rep.vars(), ctx, d - 1); rep.vars().len()];
            for (k, l) in iwahori::lower_roots(n) {
                let (v, _) = rep.chart().slot(k, l);
                let e = rep.chart().to_var(k, l, &xz.x[k - 1][l - 1])?;
                dx[v] = e.coeff_in_var(yv, 1)?.restrict_to(rep.vars())?;
            }
            let mut dchi = TateSeries::zero(rep.vars(), ctx, d - 1);
            for r in 1..=n {
                let dz = xz.z[r - 1][r - 1].coeff_in_var(yv, 1)?.restrict_to(rep.vars())?;
                dchi = dchi.add(&dz.scale(&rep.chi().param(r).neg()));
            }
            upper.insert((i, j), (dx, dchi));
        }
        Ok(LieAction { rep: rep.clone(), upper })
    }

    pub fn rep(&self) -> &PrincipalSeries<C> {
        &self.rep
    }

    fn derivative_at_zero(
        &self,
        f: &TateSeries<C>,
        role: Role,
        act: impl Fn(&PrincipalSeries<C>, &GroupParameter<C>, &TateSeries<C>) -> Result<TateSeries<C>>,
    ) -> Result<TateSeries<C>> {
        let vars = self.rep.with_params(&[("param", role)])?;
        let v = vars.len() - 1;
        let lifted = f.embed_by_name(&vars)?.with_trunc(f.trunc() + 1);
        let g = act(&self.rep, &GroupParameter::Symbolic(v), &lifted)?;
        g.coeff_in_var(v, 1)?.restrict_to(f.vars())
    }

    /// Derivative at `y = 0` of the action of `1 + y E_ij`, `i > j`.
    pub fn lie_lower(&self, root: (usize, usize), f: &TateSeries<C>) -> Result<TateSeries<C>> {
        self.derivative_at_zero(f, Role::LowerParam, |rep, y, g| rep.act_lower(root.0, root.1, y, g))
    }

    /// Derivative at `xi = 0` of the action of `diag(.., 1 + p xi, ..)`, divided by p.
    pub fn lie_diag(&self, k: usize, f: &TateSeries<C>) -> Result<TateSeries<C>> {
        let g = self.derivative_at_zero(f, Role::DiagParam, |rep, t, g| rep.act_diag(k, t, g))?;
        g.mul_p_pow(-1)
    }

    /// Derivative at `y = 0` of the action of `1 + y E_ij`, `i < j`.
    pub fn lie_upper(&self, pos: (usize, usize), f: &TateSeries<C>) -> Result<TateSeries<C>> {
        let (dx, dchi) = self
            .upper
            .get(&pos)
            .ok_or_else(|| Error::InvalidInput(format!("({},{}) is not an upper position", pos.0, pos.1)))?;
        let mut out = f.mul(&dchi.with_trunc(f.trunc()));
        for v in f.support_vars() {
            if dx[v].is_zero() {
                continue;
            }
            out = out.add(&f.derivative(v).mul(&dx[v].with_trunc(f.trunc())));
        }
        Ok(out)
    }

    /// Derivative at `y = 0` of the full symbolic upper action.
    pub fn lie_upper_direct(&self, pos: (usize, usize), f: &TateSeries<C>) -> Result<TateSeries<C>> {
        self.derivative_at_zero(f, Role::UpperParam, |rep, y, g| rep.act_upper(pos.0, pos.1, y, g))
    }
}

/// Keeps the terms whose exponents satisfy
/// `p^s | sum_{i>k} r_(i,k) - sum_{j<k} r_(k,j)`.
pub fn congruence_filter<C: Coeff>(rep: &PrincipalSeries<C>, f: &TateSeries<C>, k: usize, s: u32) -> TateSeries<C> {
    let p = C::prime(f.ctx()) as i128;
    let modulus = p.checked_pow(s);
    let roots = iwahori::lower_roots(rep.n());
    let keep = |m: &Mono| {
        let mut sum = 0i128;
        for &(i, j) in &roots {
            let e = m.exp(rep.chart().slot(i, j).0) as i128;
            sum += root_on((i, j), k) as i128 * e;
        }
        match modulus {
            Some(q) => sum % q == 0,
            None => sum == 0,
        }
    };
    let terms: Vec<(Mono, C)> = f.terms().iter().filter(|(m, _)| keep(m)).map(|(m, c)| (*m, c.clone())).collect();
    let mut out = TateSeries::from_terms(f.vars(), f.ctx(), f.trunc(), terms);
    if f.floor() != crate::tate::INF {
        out = out.add(&TateSeries::constant(f.vars(), f.ctx(), f.trunc(), C::zero_to(f.ctx(), f.floor())));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightRank {
    pub shift: Vec<i64>,
    pub height: i64,
    pub kostant: u64,
    pub monomials: u64,
    pub rank: u64,
    pub complete: bool,
    pub certified_digits: Option<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhiReport {
    pub weights: Vec<WeightRank>,
    /// Some complete weight space is not reached from the constants.
    pub reducible: bool,
}

impl PhiReport {
    pub fn to_json<C: Coeff>(&self, chi: &Character<C>) -> Value {
        let ws: Vec<Value> = self
            .weights
            .iter()
            .map(|w| {
                let xi: Vec<Value> = (0..w.shift.len())
                    .map(|k| {
                        let c = chi.param(k + 1);
                        c.sub(&C::from_i64(&c.ctx(), w.shift[k])).to_json()
                    })
                    .collect();
                json!({
                    "xi": xi,
                    "shift": w.shift,
                    "kostant": w.kostant,
                    "monomials": w.monomials,
                    "rank": w.rank,
                    "complete": w.complete,
                    "certified_digits": w.certified_digits,
                })
            })
            .collect();
        json!({"weights": ws, "verdict": if self.reducible { "reducible" } else { "irreducible" }})
    }
}

// Fully reduced echelon basis of one weight space.
struct Echelon<C: Coeff> {
    rows: Vec<(Mono, TateSeries<C>)>,
    margin: Option<i64>,
}

impl<C: Coeff> Echelon<C> {
    fn insert(&mut self, v: &TateSeries<C>) -> Result<Option<TateSeries<C>>> {
        let mut w = v.clone();
        for (m, row) in &self.rows {
            if let Some(c) = w.coeff(*m).cloned() {
                w = w.sub(&row.scale(&c));
            }
        }
        let pivot = w.terms().iter().min_by_key(|(_, c)| c.val().unwrap()).map(|(m, c)| (*m, c.clone()));
        let Some((pm, pc)) = pivot else { return Ok(None) };
        let rel = pc.abs_prec().zip(pc.val()).map(|(a, v)| a - v);
        self.margin = match (self.margin, rel) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let row = w.scale(&pc.inv()?);
        for (_, other) in self.rows.iter_mut() {
            if let Some(c) = other.coeff(pm).cloned() {
                *other = other.sub(&row.scale(&c));
            }
        }
        self.rows.push((pm, row.clone()));
        Ok(Some(row))
    }
}

/// Dimension of each weight space of `U(g) 1` inside the polynomials of
/// height at most `d`, generated breadth-first from the constants.
pub fn phi_weight_rank<C: Coeff>(chi: &Character<C>, ctx: &C::Ctx, d: u32) -> Result<PhiReport> {
    let n = chi.n();
    if d < 1 {
        return Err(Error::TruncationInsufficient("truncation degree must be at least 1".into()));
    }
    let rep = PrincipalSeries::standard(n, chi.clone(), ctx)?;
    let lie = LieAction::new(&rep)?;
    let roots = iwahori::lower_roots(n);
    let nv = roots.len();
    let weight_of = |m: &Mono| {
        let r: Vec<u32> = (0..nv).map(|v| m.exp(v)).collect();
        shift_of(n, &r)
    };

    // monomials of degree <= d by weight
    let mut counts: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    let mut stack = vec![(0usize, vec![0u32; nv], 0u32)];
    while let Some((idx, r, deg)) = stack.pop() {
        if idx == nv {
            *counts.entry(shift_of(n, &r)).or_default() += 1;
            continue;
        }
        for e in 0..=(d - deg) {
            let mut r2 = r.clone();
            r2[idx] = e;
            stack.push((idx + 1, r2, deg + e));
        }
    }

    let mut spaces: BTreeMap<Vec<i64>, Echelon<C>> = BTreeMap::new();
    let mut queue = VecDeque::new();
    let one = TateSeries::one(rep.vars(), ctx, d);
    let zero_shift = vec![0i64; n];
    let mut e0 = Echelon { rows: Vec::new(), margin: None };
    e0.insert(&one)?;
    spaces.insert(zero_shift, e0);
    queue.push_back(one);
    while let Some(v) = queue.pop_front() {
        let mut images = Vec::new();
        for &root in &roots {
            images.push(lie.lie_lower(root, &v)?);
        }
        for k in 1..=n {
            images.push(lie.lie_diag(k, &v)?);
        }
        for pos in upper_positions(n) {
            images.push(lie.lie_upper(pos, &v)?);
        }
        for w in images {
            let Some(m) = w.terms().keys().next() else { continue };
            let shift = weight_of(m);
            if height(&shift) > d as i64 {
                continue;
            }
            let w = w.truncate_deg(d)?;
            let space = spaces.entry(shift).or_insert(Echelon { rows: Vec::new(), margin: None });
            if let Some(row) = space.insert(&w)? {
                queue.push_back(row);
            }
        }
    }

    let mut weights = Vec::new();
    let mut reducible = false;
    for (shift, monomials) in counts {
        let h = height(&shift);
        let complete = h <= d as i64;
        let (rank, margin) = spaces.get(&shift).map_or((0, None), |e| (e.rows.len() as u64, e.margin));
        if complete && rank < monomials {
            reducible = true;
        }
        weights.push(WeightRank {
            kostant: kostant_count(n, &shift),
            shift,
            height: h,
            monomials,
            rank,
            complete,
            certified_digits: margin,
        });
    }
    weights.sort_by(|a, b| a.height.cmp(&b.height).then(a.shift.cmp(&b.shift)));
    Ok(PhiReport { weights, reducible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{PadicScalar, QpCtx};

    #[test]
    fn kostant_small() {
        assert_eq!(kostant_count(3, &[-1, 0, 1]), 2);
        assert_eq!(kostant_count(3, &[0, 0, 0]), 1);
        assert_eq!(kostant_count(2, &[-5, 5]), 1);
        assert_eq!(kostant_count(2, &[5, -5]), 0);
    }

    #[test]
    fn eigenvalue_display() {
        let ctx = QpCtx::new(7, 10).unwrap();
        let chi = Character::<PadicScalar>::from_ints(&ctx, &[3, 5, 11]);
        let r = [1, 0, 0];
        assert_eq!(torus_eigenvalue(&r, 1, &chi), PadicScalar::from_i64(ctx, 4));
        assert_eq!(torus_eigenvalue(&r, 2, &chi), PadicScalar::from_i64(ctx, 4));
        assert_eq!(torus_eigenvalue(&r, 3, &chi), PadicScalar::from_i64(ctx, 11));
    }

    #[test]
    fn gl2_root_vectors() {
        let ctx = QpCtx::new(7, 10).unwrap();
        let chi = Character::<PadicScalar>::from_ints(&ctx, &[2, 7]);
        let rep = PrincipalSeries::standard(2, chi, &ctx).unwrap();
        let lie = LieAction::new(&rep).unwrap();
        let a3 = TateSeries::from_int_terms(rep.vars(), &ctx, 6, &[(&[3], 1)]);
        let y = lie.lie_lower((2, 1), &a3).unwrap();
        assert!(y.agreement(&TateSeries::from_int_terms(rep.vars(), &ctx, 6, &[(&[2], -3)])).is_some());
        let x = lie.lie_upper((1, 2), &a3).unwrap();
        assert!(x.agreement(&TateSeries::from_int_terms(rep.vars(), &ctx, 6, &[(&[4], 3 - 5)])).is_some());
        let h = lie.lie_diag(1, &a3).unwrap();
        assert!(h.agreement(&TateSeries::from_int_terms(rep.vars(), &ctx, 6, &[(&[3], 5)])).is_some());
    }

    #[test]
    fn gl2_rank_detects_submodule() {
        let ctx = QpCtx::new(7, 10).unwrap();
        let chi = Character::<PadicScalar>::from_ints(&ctx, &[0, 2]);
        let rep = phi_weight_rank(&chi, &ctx, 6).unwrap();
        assert!(rep.reducible);
        assert!(!is_irreducible(&chi).irreducible);
        let generic = Character::new(vec![PadicScalar::zero(ctx), PadicScalar::from_ratio(ctx, 1, 2).unwrap()]);
        assert!(!phi_weight_rank(&generic, &ctx, 6).unwrap().reducible);
        assert!(is_irreducible(&generic).irreducible);
    }
}
