//! Weyl group transport of the principal series to the other Bruhat cells.

use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::iwahori::{self, FactorKind};
use crate::linalg::Mat;
use crate::padic::Coeff;
use crate::principal_series::{Character, Chart, GroupParameter, PrincipalSeries};
use crate::tate::{Role, TateSeries, Variable, VariableSet};

/// Permutation `perm` (1-based) with `w^-1 = sum_r E_(r, perm[r])`, so that
/// `w = sum_r E_(perm[r], r)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeylElement {
    perm: Vec<usize>,
}

impl WeylElement {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n + 1];
        for &v in &perm {
            if v < 1 || v > n || seen[v] {
                return Err(Error::InvalidInput(format!("{perm:?} is not a permutation")));
            }
            seen[v] = true;
        }
        Ok(WeylElement { perm })
    }

    pub fn identity(n: usize) -> Self {
        WeylElement { perm: (1..=n).collect() }
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// `perm[r]`, 1-based.
    pub fn image(&self, r: usize) -> usize {
        self.perm[r - 1]
    }

    /// The `r` with `perm[r] = v`.
    pub fn preimage(&self, v: usize) -> usize {
        self.perm.iter().position(|&x| x == v).unwrap() + 1
    }

    /// Matrix product `self * o`.
    pub fn compose(&self, o: &Self) -> Self {
        WeylElement { perm: o.perm.iter().map(|&r| self.perm[r - 1]).collect() }
    }

    pub fn inverse(&self) -> Self {
        WeylElement { perm: (1..=self.n()).map(|v| self.preimage(v)).collect() }
    }

    /// The matrix `w`.
    pub fn matrix<C: Coeff>(&self, ctx: &C::Ctx) -> Mat<C> {
        let n = self.n();
        let mut m = vec![vec![C::zero(ctx); n]; n];
        for r in 1..=n {
            m[self.image(r) - 1][r - 1] = C::one(ctx);
        }
        m
    }

    /// All elements of S_n in lexicographic order of their one-line notation.
    pub fn all(n: usize) -> Vec<Self> {
        fn go(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<WeylElement>) {
            let n = used.len();
            if cur.len() == n {
                out.push(WeylElement { perm: cur.clone() });
                return;
            }
            for v in 1..=n {
                if !used[v - 1] {
                    used[v - 1] = true;
                    cur.push(v);
                    go(cur, used, out);
                    cur.pop();
                    used[v - 1] = false;
                }
            }
        }
        let mut out = Vec::new();
        go(&mut Vec::new(), &mut vec![false; n], &mut out);
        out
    }
}

/// `(k, l)` with `perm[k] = i`, `perm[l] = j`; then
/// `(1 - y E_ij) w = w (1 - y E_kl)`.
pub fn conjugate_root(w: &WeylElement, i: usize, j: usize) -> (usize, usize) {
    (w.preimage(i), w.preimage(j))
}

/// `chi^w(h) = chi(w^-1 h w)`; its parameters are `c'_m = c_{perm^-1(m)}`.
pub fn chi_w<C: Coeff>(chi: &Character<C>, w: &WeylElement) -> Character<C> {
    chi.reindexed(w.inverse().perm())
}

/// One summand of the Bruhat decomposition: functions on `w U w^-1 ∩ B`,
/// written in the coordinates of `A` with `C = w A w^-1`.
#[derive(Clone, Debug)]
pub struct Component<C: Coeff> {
    w: WeylElement,
    chi_w: Character<C>,
    rep: PrincipalSeries<C>,
    // per lower root of A: position of the entry in C and the scale
    relabeling: Vec<((usize, usize), (usize, usize), i64)>,
}

impl<C: Coeff> Component<C> {
    pub fn new(w: &WeylElement, chi: &Character<C>, ctx: &C::Ctx) -> Result<Self> {
        let n = w.n();
        if chi.n() != n {
            return Err(Error::InvalidInput("character and Weyl element sizes differ".into()));
        }
        let mut vars = Vec::new();
        let mut slots = Vec::new();
        let mut relabeling = Vec::new();
        for (idx, (k, l)) in iwahori::lower_roots(n).into_iter().enumerate() {
            let pos = (w.image(k), w.image(l));
            let scale = (pos.0 < pos.1) as i64;
            let (name, role) = if scale == 1 {
                (format!("a'[{k},{l}]"), Role::RescaledUnipotent { i: k, j: l })
            } else {
                (format!("a[{k},{l}]"), Role::Unipotent { i: k, j: l })
            };
            vars.push(Variable { name, role });
            slots.push((idx, scale));
            relabeling.push(((k, l), pos, scale));
        }
        let vars = VariableSet::new(vars)?;
        let rep = PrincipalSeries::with_chart(n, chi.clone(), Chart::new(n, slots), vars, ctx)?;
        Ok(Component { w: w.clone(), chi_w: chi_w(chi, w), rep, relabeling })
    }

    pub fn w(&self) -> &WeylElement {
        &self.w
    }

    pub fn chi_w(&self) -> &Character<C> {
        &self.chi_w
    }

    /// The underlying representation in `A`-coordinates (character `chi`).
    pub fn rep(&self) -> &PrincipalSeries<C> {
        &self.rep
    }

    pub fn vars(&self) -> &Arc<VariableSet> {
        self.rep.vars()
    }

    /// Action of the one-parameter factor `kind` with parameter `param`
    /// (for the torus, `t` itself).
    pub fn act(&self, kind: FactorKind, param: &C, f: &TateSeries<C>) -> Result<TateSeries<C>> {
        let (vars, ctx, d) = (f.vars(), f.ctx(), f.trunc());
        match kind {
            FactorKind::Diag(k) => {
                self.rep.act_diag(self.w.preimage(k), &GroupParameter::Concrete(param.clone()), f)
            }
            FactorKind::Lower(i, j) | FactorKind::Upper(i, j) => {
                let need = if i > j { 0 } else { 1 };
                if param.val().is_some_and(|v| v < need) {
                    return Err(Error::DomainViolation(format!("parameter outside the domain of ({i},{j})")));
                }
                let (k, l) = conjugate_root(&self.w, i, j);
                let y = TateSeries::constant(vars, ctx, d, param.clone());
                if k > l {
                    self.rep.lower_with(k, l, &y, f)
                } else {
                    self.rep.upper_with(k, l, &y, f)
                }
            }
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "w": self.w.perm(),
            "chi_w": self.chi_w.params().iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            "relabeling": self.relabeling.iter().map(|(a, c, s)| json!({
                "root": [a.0, a.1],
                "position": [c.0, c.1],
                "scale": s,
                "name": self.vars().get(iwahori::lower_roots(self.w.n()).iter().position(|r| r == a).unwrap()).name,
            })).collect::<Vec<_>>(),
        })
    }
}

/// `w = identity` gives the principal series itself; every component
/// carries its own coordinates.
#[derive(Clone, Debug)]
pub struct BruhatSum<C: Coeff> {
    pub components: Vec<Component<C>>,
}

pub const MAX_BRUHAT_RANK: usize = 5;

pub fn bruhat_components<C: Coeff>(chi: &Character<C>, ctx: &C::Ctx) -> Result<BruhatSum<C>> {
    let n = chi.n();
    if n > MAX_BRUHAT_RANK {
        return Err(Error::SizeLimit(format!("n = {n} exceeds {MAX_BRUHAT_RANK}")));
    }
    let components = WeylElement::all(n).iter().map(|w| Component::new(w, chi, ctx)).collect::<Result<_>>()?;
    Ok(BruhatSum { components })
}

impl<C: Coeff> BruhatSum<C> {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Applies one factor to each summand.
    pub fn act(&self, kind: FactorKind, param: &C, fs: &[TateSeries<C>]) -> Result<Vec<TateSeries<C>>> {
        if fs.len() != self.components.len() {
            return Err(Error::InvalidInput("one series per component is required".into()));
        }
        self.components.iter().zip(fs).map(|(c, f)| c.act(kind, param, f)).collect()
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.components.iter().map(|c| c.to_json()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::padic::{PadicScalar, QpCtx};

    #[test]
    fn three_cycle_example() {
        // w^-1 = E12 + E23 + E31
        let w = WeylElement::new(vec![2, 3, 1]).unwrap();
        assert_eq!(conjugate_root(&w, 1, 2), (3, 1));
        let ctx = QpCtx::new(7, 6).unwrap();
        let m: Mat<PadicScalar> = w.matrix(&ctx);
        let want = [[0, 0, 1], [1, 0, 0], [0, 1, 0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i][j], PadicScalar::from_i64(ctx, want[i][j]));
            }
        }
        let inv: Mat<PadicScalar> = w.inverse().matrix(&ctx);
        assert!(linalg::agreement(&linalg::mat_mul(&m, &inv), &linalg::identity(&ctx, 3)).is_some());
    }

    #[test]
    fn components_of_gl3() {
        let ctx = QpCtx::new(7, 6).unwrap();
        let chi = Character::<PadicScalar>::from_ints(&ctx, &[1, 20, 300]);
        let sum = bruhat_components(&chi, &ctx).unwrap();
        assert_eq!(sum.len(), 6);
        let mut seen: Vec<Vec<PadicScalar>> = sum.components.iter().map(|c| c.chi_w().params().to_vec()).collect();
        seen.dedup();
        assert_eq!(seen.len(), 6);
        assert_eq!(sum.components[0].chi_w(), &chi);
    }
}
