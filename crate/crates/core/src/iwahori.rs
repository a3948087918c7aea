//! Congruence subgroups of GL_n(Z_p) and the ordered one-parameter
//! factorization of the pro-p Iwahori group.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::padic::{PadicScalar, QpCtx};
use crate::sample;

/// Subgroup a matrix is asserted to belong to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    /// Pro-p Iwahori: lower unipotent mod p.
    G,
    /// Iwahori: lower triangular mod p.
    B,
    /// Lower unipotent over Z_p.
    U,
    /// Upper triangular elements of G.
    Q0,
    /// Upper triangular elements of B.
    P0,
    /// `B ∩ w P+ w^-1`, the permutation given as in [`crate::weyl::WeylElement`].
    PwPlus(Vec<usize>),
}

impl Tag {
    fn within_g(&self) -> bool {
        matches!(self, Tag::G | Tag::U | Tag::Q0)
    }
}

pub fn check_prime_for_rank(ctx: QpCtx, n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidInput("matrix size must be positive".into()));
    }
    if ctx.p() <= n as u64 + 1 {
        return Err(Error::InvalidInput(format!("need p > n+1, got p={} n={n}", ctx.p())));
    }
    Ok(())
}

fn at_least(x: &PadicScalar, v: i64) -> bool {
    match x.val() {
        None => x.abs_prec().map_or(true, |a| a >= v),
        Some(w) => w >= v,
    }
}

fn vanishes(x: &PadicScalar) -> bool {
    x.is_zero()
}

#[derive(Clone, Debug, PartialEq)]
pub struct IwahoriMatrix {
    ctx: QpCtx,
    entries: Mat<PadicScalar>,
    tag: Tag,
}

impl IwahoriMatrix {
    pub fn new(ctx: QpCtx, entries: Mat<PadicScalar>, tag: Tag) -> Result<Self> {
        let n = entries.len();
        check_prime_for_rank(ctx, n)?;
        if entries.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix is not square".into()));
        }
        validate(&entries, &tag)?;
        Ok(IwahoriMatrix { ctx, entries, tag })
    }

    pub fn identity(ctx: QpCtx, n: usize, tag: Tag) -> Result<Self> {
        Self::new(ctx, linalg::identity(&ctx, n), tag)
    }

    pub fn from_ints(ctx: QpCtx, rows: &[&[i64]], tag: Tag) -> Result<Self> {
        let e = rows.iter().map(|r| r.iter().map(|&v| PadicScalar::from_i64(ctx, v)).collect()).collect();
        Self::new(ctx, e, tag)
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn ctx(&self) -> QpCtx {
        self.ctx
    }

    pub fn tag(&self) -> &Tag {
        &self.tag
    }

    pub fn entries(&self) -> &Mat<PadicScalar> {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> &PadicScalar {
        &self.entries[i - 1][j - 1]
    }

    /// Product; the tag is kept when both agree, else the smallest of G, B
    /// containing both.
    pub fn mul(&self, o: &Self) -> Result<Self> {
        if o.n() != self.n() {
            return Err(Error::InvalidInput("size mismatch".into()));
        }
        let tag = if self.tag == o.tag {
            self.tag.clone()
        } else if self.tag.within_g() && o.tag.within_g() {
            Tag::G
        } else {
            Tag::B
        };
        Self::new(self.ctx, linalg::mat_mul(&self.entries, &o.entries), tag)
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = match &self.tag {
            Tag::PwPlus(_) | Tag::B | Tag::P0 => invert_general(&self.entries)?,
            _ => linalg::inverse(&self.entries)?,
        };
        Self::new(self.ctx, inv, self.tag.clone())
    }

    /// Same entries under another tag.
    pub fn retag(&self, tag: Tag) -> Result<Self> {
        Self::new(self.ctx, self.entries.clone(), tag)
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> =
            self.entries.iter().map(|r| Value::Array(r.iter().map(|x| x.to_json()).collect())).collect();
        json!({"n": self.n(), "tag": self.tag, "entries": rows})
    }

    pub fn from_json(ctx: QpCtx, v: &Value) -> Result<Self> {
        let bad = |w: &str| Error::InvalidInput(format!("malformed matrix: {w}"));
        let tag: Tag = serde_json::from_value(v.get("tag").cloned().unwrap_or(json!("G"))).map_err(|e| bad(&e.to_string()))?;
        let rows = v.get("entries").and_then(|x| x.as_array()).ok_or_else(|| bad("entries"))?;
        let entries = rows
            .iter()
            .map(|r| {
                r.as_array()
                    .ok_or_else(|| bad("row"))?
                    .iter()
                    .map(|x| match x {
                        Value::Number(k) => k.as_i64().map(|k| PadicScalar::from_i64(ctx, k)).ok_or_else(|| bad("entry")),
                        Value::String(s) => crate::padic::parse_scalar(ctx, s),
                        _ => PadicScalar::from_json(ctx, x),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(n) = v.get("n").and_then(|x| x.as_u64()) {
            if n as usize != entries.len() {
                return Err(bad("n does not match the entries"));
            }
        }
        Self::new(ctx, entries, tag)
    }
}

// Inverse for matrices whose leading pivots may fail to be units.
fn invert_general(a: &Mat<PadicScalar>) -> Result<Mat<PadicScalar>> {
    let n = a.len();
    let ctx = a[0][0].ctx();
    let mut m: Vec<Vec<PadicScalar>> =
        a.iter().enumerate().map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { PadicScalar::one(ctx) } else { PadicScalar::zero(ctx) }));
            row
        }).collect();
    for col in 0..n {
        let pr = (col..n)
            .filter(|&r| !m[r][col].is_zero())
            .min_by_key(|&r| m[r][col].val().unwrap())
            .ok_or_else(|| Error::NotInvertible("singular matrix".into()))?;
        m.swap(pr, col);
        let pinv = m[col][col].inv()?;
        for c in 0..2 * n {
            m[col][c] = m[col][c].mul(&pinv);
        }
        for r in 0..n {
            if r != col && !m[r][col].is_exact_zero() {
                let f = m[r][col];
                for c in 0..2 * n {
                    let t = f.mul(&m[col][c]);
                    m[r][c] = m[r][c].sub(&t);
                }
            }
        }
    }
    Ok(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn validate(e: &Mat<PadicScalar>, tag: &Tag) -> Result<()> {
    let n = e.len();
    let fail = |reason: String| Err(Error::NotInGroup { tag: format!("{tag:?}"), reason });
    let one = PadicScalar::one(e[0][0].ctx());
    for i in 0..n {
        for j in 0..n {
            let x = &e[i][j];
            if !at_least(x, 0) {
                return fail(format!("entry ({},{}) is not integral", i + 1, j + 1));
            }
            let ok = match tag {
                Tag::G => {
                    if i == j {
                        at_least(&x.sub(&one), 1)
                    } else {
                        i > j || at_least(x, 1)
                    }
                }
                Tag::B => {
                    if i == j {
                        x.val() == Some(0)
                    } else {
                        i > j || at_least(x, 1)
                    }
                }
                Tag::U => {
                    if i == j {
                        vanishes(&x.sub(&one))
                    } else {
                        i > j || vanishes(x)
                    }
                }
                Tag::Q0 => {
                    if i == j {
                        at_least(&x.sub(&one), 1)
                    } else if i > j {
                        vanishes(x)
                    } else {
                        at_least(x, 1)
                    }
                }
                Tag::P0 => {
                    if i == j {
                        x.val() == Some(0)
                    } else if i > j {
                        vanishes(x)
                    } else {
                        at_least(x, 1)
                    }
                }
                Tag::PwPlus(perm) => {
                    if perm.len() != n {
                        return fail("permutation has the wrong size".into());
                    }
                    let pos = |k: usize| perm.iter().position(|&v| v == k + 1).unwrap_or(usize::MAX);
                    if i == j {
                        x.val() == Some(0)
                    } else if pos(i) > pos(j) {
                        vanishes(x)
                    } else {
                        i > j || at_least(x, 1)
                    }
                }
            };
            if !ok {
                return fail(format!("entry ({},{}) violates the congruence conditions", i + 1, j + 1));
            }
        }
    }
    if linalg::det(e.clone()).val() != Some(0) {
        return fail("matrix is not invertible over Z_p".into());
    }
    Ok(())
}

/// Kind of a one-parameter subgroup; indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Lower(usize, usize),
    Diag(usize),
    Upper(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneParamFactor {
    pub kind: FactorKind,
    pub param: PadicScalar,
}

impl OneParamFactor {
    pub fn new(kind: FactorKind, param: PadicScalar) -> Result<Self> {
        let ok = match kind {
            FactorKind::Lower(i, j) => i > j && at_least(&param, 0),
            FactorKind::Upper(i, j) => i < j && at_least(&param, 1),
            FactorKind::Diag(_) => at_least(&param.sub(&PadicScalar::one(param.ctx())), 1),
        };
        if ok {
            Ok(OneParamFactor { kind, param })
        } else {
            Err(Error::DomainViolation(format!("parameter {param} outside the domain of {kind:?}")))
        }
    }

    pub fn to_matrix(&self, n: usize) -> Mat<PadicScalar> {
        let ctx = self.param.ctx();
        let mut m = linalg::identity(&ctx, n);
        match self.kind {
            FactorKind::Lower(i, j) | FactorKind::Upper(i, j) => m[i - 1][j - 1] = self.param,
            FactorKind::Diag(k) => m[k - 1][k - 1] = self.param,
        }
        m
    }
}

/// Negative roots `(i, j)`, `i > j`, in lexicographic order.
pub fn lower_roots(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 2..=n {
        for j in 1..i {
            out.push((i, j));
        }
    }
    out
}

/// Upper positions in factor order: rows from the bottom up, each row
/// filled from the right.
pub fn upper_positions(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in (1..n).rev() {
        for j in (i + 1..=n).rev() {
            out.push((i, j));
        }
    }
    out
}

pub fn lazard_order(n: usize) -> Vec<FactorKind> {
    let mut out: Vec<FactorKind> = lower_roots(n).into_iter().map(|(i, j)| FactorKind::Lower(i, j)).collect();
    out.extend((1..=n).map(FactorKind::Diag));
    out.extend(upper_positions(n).into_iter().map(|(i, j)| FactorKind::Upper(i, j)));
    out
}

/// Ordered product of the factors.
pub fn ordered_product(ctx: QpCtx, n: usize, factors: &[OneParamFactor]) -> Result<IwahoriMatrix> {
    check_prime_for_rank(ctx, n)?;
    let mut m = linalg::identity(&ctx, n);
    for f in factors {
        m = linalg::mat_mul(&m, &f.to_matrix(n));
    }
    IwahoriMatrix::new(ctx, m, Tag::G)
}

/// Parameters of `g` in Lazard order. The lower factors multiply to the
/// unipotent part of the Doolittle factorization, the diagonal and upper
/// factors to the triangular part.
pub fn factorize(g: &IwahoriMatrix) -> Result<Vec<OneParamFactor>> {
    validate(g.entries(), &Tag::G)?;
    let (l, u) = linalg::lu(g.entries())?;
    let mut out = Vec::new();
    for kind in lazard_order(g.n()) {
        let param = match kind {
            FactorKind::Lower(i, j) => l[i - 1][j - 1],
            FactorKind::Diag(k) => u[k - 1][k - 1],
            FactorKind::Upper(i, j) => u[i - 1][j - 1].div(&u[i - 1][i - 1])?,
        };
        out.push(OneParamFactor::new(kind, param)?);
    }
    Ok(out)
}

/// `g = u q` with `u` in U and `q` in Q0.
pub fn split_uq0(g: &IwahoriMatrix) -> Result<(IwahoriMatrix, IwahoriMatrix)> {
    validate(g.entries(), &Tag::G)?;
    let (l, u) = linalg::lu(g.entries())?;
    Ok((IwahoriMatrix::new(g.ctx, l, Tag::U)?, IwahoriMatrix::new(g.ctx, u, Tag::Q0)?))
}

/// Random element of G with full-precision entries.
pub fn random_g<R: Rng>(rng: &mut R, ctx: QpCtx, n: usize) -> Result<IwahoriMatrix> {
    let mut m = linalg::identity(&ctx, n);
    for (i, row) in m.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = if i == j {
                sample::one_plus_pzp(rng, ctx)
            } else if i > j {
                sample::zp(rng, ctx)
            } else {
                sample::pzp(rng, ctx)
            };
        }
    }
    IwahoriMatrix::new(ctx, m, Tag::G)
}

/// Random element of U.
pub fn random_u<R: Rng>(rng: &mut R, ctx: QpCtx, n: usize) -> Result<IwahoriMatrix> {
    let mut m = linalg::identity(&ctx, n);
    for (i, j) in lower_roots(n) {
        m[i - 1][j - 1] = sample::zp(rng, ctx);
    }
    IwahoriMatrix::new(ctx, m, Tag::U)
}
