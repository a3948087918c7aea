//! Small dense linear algebra over a p-adic coefficient field.

use crate::error::{Error, Result};
use crate::padic::Coeff;

pub type Mat<C> = Vec<Vec<C>>;

pub fn identity<C: Coeff>(ctx: &C::Ctx, n: usize) -> Mat<C> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { C::one(ctx) } else { C::zero(ctx) }).collect())
        .collect()
}

pub fn mat_mul<C: Coeff>(a: &Mat<C>, b: &Mat<C>) -> Mat<C> {
    let n = a.len();
    let m = b[0].len();
    let ctx = a[0][0].ctx();
    let mut out = vec![vec![C::zero(&ctx); m]; n];
    for i in 0..n {
        for k in 0..b.len() {
            if a[i][k].is_exact_zero() {
                continue;
            }
            for j in 0..m {
                if b[k][j].is_exact_zero() {
                    continue;
                }
                out[i][j] = out[i][j].add(&a[i][k].mul(&b[k][j]));
            }
        }
    }
    out
}

/// Determinant by elimination with minimal-valuation pivots.
pub fn det<C: Coeff>(mut m: Mat<C>) -> C {
    let n = m.len();
    let ctx = m[0][0].ctx();
    let mut acc = C::one(&ctx);
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !m[r][col].is_zero())
            .min_by_key(|&r| m[r][col].val().unwrap());
        let Some(pr) = pivot else {
            let prec = (col..n).filter_map(|r| m[r][col].abs_prec()).min();
            return match prec {
                Some(a) => acc.mul(&C::zero_to(&ctx, a)),
                None => C::zero(&ctx),
            };
        };
        if pr != col {
            m.swap(pr, col);
            acc = acc.neg();
        }
        let piv = m[col][col].clone();
        acc = acc.mul(&piv);
        let pinv = piv.inv().expect("nonzero pivot");
        for r in col + 1..n {
            if m[r][col].is_exact_zero() {
                continue;
            }
            let f = m[r][col].mul(&pinv);
            for c in col..n {
                let t = f.mul(&m[col][c]);
                m[r][c] = m[r][c].sub(&t);
            }
        }
    }
    acc
}

/// Doolittle factorization `a = l u` with `l` unit lower triangular.
/// Every leading pivot must be a unit.
pub fn lu<C: Coeff>(a: &Mat<C>) -> Result<(Mat<C>, Mat<C>)> {
    let n = a.len();
    let ctx = a[0][0].ctx();
    let mut l = identity::<C>(&ctx, n);
    let mut u = vec![vec![C::zero(&ctx); n]; n];
    for r in 0..n {
        for s in r..n {
            let mut acc = a[r][s].clone();
            for k in 0..r {
                acc = acc.sub(&l[r][k].mul(&u[k][s]));
            }
            u[r][s] = acc;
        }
        if u[r][r].val() != Some(0) {
            return Err(Error::NotInvertible(format!("pivot {} is not a unit", r + 1)));
        }
        let pinv = u[r][r].inv()?;
        for s in r + 1..n {
            let mut acc = a[s][r].clone();
            for k in 0..r {
                acc = acc.sub(&l[s][k].mul(&u[k][r]));
            }
            l[s][r] = acc.mul(&pinv);
        }
    }
    Ok((l, u))
}

/// Inverse through the Doolittle factors.
pub fn inverse<C: Coeff>(a: &Mat<C>) -> Result<Mat<C>> {
    let n = a.len();
    let ctx = a[0][0].ctx();
    let (l, u) = lu(a)?;
    let mut out = vec![vec![C::zero(&ctx); n]; n];
    for col in 0..n {
        // l y = e_col
        let mut y = vec![C::zero(&ctx); n];
        for i in 0..n {
            let mut acc = if i == col { C::one(&ctx) } else { C::zero(&ctx) };
            for k in 0..i {
                acc = acc.sub(&l[i][k].mul(&y[k]));
            }
            y[i] = acc;
        }
        // u x = y
        let mut x = vec![C::zero(&ctx); n];
        for i in (0..n).rev() {
            let mut acc = y[i].clone();
            for k in i + 1..n {
                acc = acc.sub(&u[i][k].mul(&x[k]));
            }
            x[i] = acc.div(&u[i][i])?;
        }
        for i in 0..n {
            out[i][col] = x[i].clone();
        }
    }
    Ok(out)
}

/// Largest absolute precision to which two matrices are known to agree,
/// or `None` when some entry differs.
pub fn agreement<C: Coeff>(a: &Mat<C>, b: &Mat<C>) -> Option<i64> {
    let mut digits = i64::MAX;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            let d = x.sub(y);
            if !d.is_zero() {
                return None;
            }
            if let Some(pr) = d.abs_prec() {
                digits = digits.min(pr);
            }
        }
    }
    Some(digits)
}
