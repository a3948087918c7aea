//! Unramified extensions of Q_p in the power basis of a fixed lifted modulus.

use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::padic::{Coeff, PadicScalar, QpCtx};

/// The degree-N unramified extension `Z_p[w]/(f)`, with `f` the first monic
/// polynomial irreducible mod p in base-p enumeration order.
#[derive(Clone, Debug, PartialEq)]
pub struct UnramifiedField {
    qp: QpCtx,
    degree: usize,
    // x^N + sum c_i x^i
    modulus: Vec<u64>,
    // coordinates of frob(w^i)
    frob_images: Vec<Vec<PadicScalar>>,
}

fn poly_rem_fp(f: &[u64], g: &[u64], p: u64) -> Vec<u64> {
    // g monic
    let mut r = f.to_vec();
    let dg = g.len() - 1;
    while r.len() > dg {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dg;
        for (i, gi) in g.iter().enumerate() {
            let t = (lead * gi) % p;
            r[shift + i] = (r[shift + i] + p - t) % p;
        }
        r.pop();
    }
    while r.last() == Some(&0) {
        r.pop();
    }
    r
}

fn digits(mut k: u64, p: u64, len: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(k % p);
        k /= p;
    }
    out
}

/// Trial division by every monic polynomial of degree at most N/2.
pub fn irreducible_mod_p(coeffs_low: &[u64], p: u64) -> bool {
    let n = coeffs_low.len();
    let mut f = coeffs_low.to_vec();
    f.push(1);
    for d in 1..=n / 2 {
        let count = (p as u128).pow(d as u32) as u64;
        for k in 0..count {
            let mut g = digits(k, p, d);
            g.push(1);
            if poly_rem_fp(&f, &g, p).is_empty() {
                return false;
            }
        }
    }
    true
}

fn first_irreducible(p: u64, degree: usize) -> Vec<u64> {
    let mut k = 0u64;
    loop {
        let c = digits(k, p, degree);
        if irreducible_mod_p(&c, p) {
            return c;
        }
        k += 1;
    }
}

impl UnramifiedField {
    pub fn new(qp: QpCtx, degree: usize) -> Result<Arc<Self>> {
        if degree == 0 {
            return Err(Error::InvalidInput("extension degree must be at least 1".into()));
        }
        if degree > 8 {
            return Err(Error::SizeLimit(format!("extension degree {degree} exceeds 8")));
        }
        let modulus = first_irreducible(qp.p(), degree);
        let mut field = UnramifiedField { qp, degree, modulus, frob_images: vec![] };
        let identity: Vec<Vec<PadicScalar>> = (0..degree)
            .map(|i| {
                (0..degree)
                    .map(|j| if i == j { PadicScalar::one(qp) } else { PadicScalar::zero(qp) })
                    .collect()
            })
            .collect();
        field.frob_images = identity;
        if degree > 1 {
            let arc = Arc::new(field.clone());
            let w = UnramifiedScalar::generator(&arc);
            // Newton lift of w^p to a root of the modulus
            let mut r = w.pow_u(qp.p() as u128);
            for _ in 0..newton_rounds(qp.cap()) {
                let (fv, dv) = arc.eval_modulus(&r);
                r = r.sub(&fv.mul(&dv.inv()?));
            }
            let mut images = Vec::with_capacity(degree);
            let mut acc = UnramifiedScalar::one(&arc);
            for _ in 0..degree {
                images.push(acc.coords.clone());
                acc = acc.mul(&r);
            }
            field.frob_images = images;
        }
        Ok(Arc::new(field))
    }

    pub fn qp(&self) -> QpCtx {
        self.qp
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Low-order coefficients of the monic modulus.
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    /// Row `i` holds the coordinates of `frob(w^i)`.
    pub fn frobenius_matrix(&self) -> &[Vec<PadicScalar>] {
        &self.frob_images
    }

    // (f(r), f'(r))
    fn eval_modulus(self: &Arc<Self>, r: &UnramifiedScalar) -> (UnramifiedScalar, UnramifiedScalar) {
        let n = self.degree;
        let mut powers = vec![UnramifiedScalar::one(self)];
        for i in 0..n {
            let next = powers[i].mul(r);
            powers.push(next);
        }
        let scalar = |k: u64| PadicScalar::from_i64(self.qp, k as i64);
        let mut fv = powers[n].clone();
        let mut dv = powers[n - 1].scale(&scalar(n as u64));
        for i in 0..n {
            let c = self.modulus[i];
            fv = fv.add(&powers[i].scale(&scalar(c)));
            if i > 0 {
                dv = dv.add(&powers[i - 1].scale(&scalar(c * i as u64)));
            }
        }
        (fv, dv)
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .frob_images
            .iter()
            .map(|row| Value::Array(row.iter().map(|x| x.to_json()).collect()))
            .collect();
        json!({
            "p": self.qp.p(),
            "N": self.degree,
            "basis_poly": self.modulus.iter().chain(std::iter::once(&1)).collect::<Vec<_>>(),
            "frobenius_matrix": rows,
        })
    }
}

fn newton_rounds(cap: u32) -> u32 {
    let mut r = 1;
    while (1u64 << r) < cap as u64 + 2 {
        r += 1;
    }
    r + 1
}

/// Element of an unramified extension, as coordinates in the power basis.
#[derive(Clone, Debug, PartialEq)]
pub struct UnramifiedScalar {
    field: Arc<UnramifiedField>,
    coords: Vec<PadicScalar>,
}

impl UnramifiedScalar {
    pub fn new(field: &Arc<UnramifiedField>, coords: Vec<PadicScalar>) -> Result<Self> {
        if coords.len() != field.degree {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                field.degree,
                coords.len()
            )));
        }
        Ok(UnramifiedScalar { field: field.clone(), coords })
    }

    pub fn zero(field: &Arc<UnramifiedField>) -> Self {
        UnramifiedScalar { field: field.clone(), coords: vec![PadicScalar::zero(field.qp); field.degree] }
    }

    pub fn one(field: &Arc<UnramifiedField>) -> Self {
        Self::from_qp(field, &PadicScalar::one(field.qp))
    }

    pub fn from_qp(field: &Arc<UnramifiedField>, x: &PadicScalar) -> Self {
        let mut out = Self::zero(field);
        out.coords[0] = *x;
        out
    }

    /// The basis element `w` (for degree 1 the constant 0).
    pub fn generator(field: &Arc<UnramifiedField>) -> Self {
        let mut out = Self::zero(field);
        if field.degree > 1 {
            out.coords[1] = PadicScalar::one(field.qp);
        }
        out
    }

    /// The basis element `e_i = w^i`.
    pub fn basis(field: &Arc<UnramifiedField>, i: usize) -> Self {
        let mut out = Self::zero(field);
        out.coords[i] = PadicScalar::one(field.qp);
        out
    }

    pub fn field(&self) -> &Arc<UnramifiedField> {
        &self.field
    }

    pub fn coords(&self) -> &[PadicScalar] {
        &self.coords
    }

    pub fn add(&self, o: &Self) -> Self {
        let coords = self.coords.iter().zip(&o.coords).map(|(a, b)| a.add(b)).collect();
        UnramifiedScalar { field: self.field.clone(), coords }
    }

    pub fn neg(&self) -> Self {
        UnramifiedScalar { field: self.field.clone(), coords: self.coords.iter().map(|a| a.neg()).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &PadicScalar) -> Self {
        UnramifiedScalar { field: self.field.clone(), coords: self.coords.iter().map(|a| a.mul(c)).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.field.degree;
        let qp = self.field.qp;
        let mut prod = vec![PadicScalar::zero(qp); 2 * n - 1];
        for (i, a) in self.coords.iter().enumerate() {
            if a.is_exact_zero() {
                continue;
            }
            for (j, b) in o.coords.iter().enumerate() {
                if b.is_exact_zero() {
                    continue;
                }
                prod[i + j] = prod[i + j].add(&a.mul(b));
            }
        }
        for k in (n..2 * n - 1).rev() {
            let lead = prod[k];
            if lead.is_exact_zero() {
                continue;
            }
            for i in 0..n {
                let c = self.field.modulus[i];
                if c != 0 {
                    let t = lead.mul(&PadicScalar::from_i64(qp, c as i64));
                    prod[k - n + i] = prod[k - n + i].sub(&t);
                }
            }
        }
        prod.truncate(n);
        UnramifiedScalar { field: self.field.clone(), coords: prod }
    }

    pub fn pow_u(&self, e: u128) -> Self {
        let mut acc = Self::one(&self.field);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn val(&self) -> Option<i64> {
        self.coords.iter().filter_map(|c| c.val()).min()
    }

    pub fn abs_prec(&self) -> Option<i64> {
        self.coords.iter().filter_map(|c| c.abs_prec()).min()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn mul_p_pow(&self, k: i64) -> Self {
        UnramifiedScalar { field: self.field.clone(), coords: self.coords.iter().map(|a| a.mul_p_pow(k)).collect() }
    }

    pub fn inv(&self) -> Result<Self> {
        let v = self.val().ok_or_else(|| Error::NotInvertible("zero has no inverse".into()))?;
        let u = self.mul_p_pow(-v);
        let q = (self.field.qp.p() as u128).pow(self.field.degree as u32);
        // u^(q-2) inverts u modulo p; Newton refines it
        let mut y = u.pow_u(q - 2);
        let two = Self::from_qp(&self.field, &PadicScalar::from_i64(self.field.qp, 2));
        for _ in 0..newton_rounds(self.field.qp.cap()) {
            y = y.mul(&two.sub(&u.mul(&y)));
        }
        Ok(y.mul_p_pow(-v))
    }

    pub fn frobenius(&self) -> Self {
        let mut out = Self::zero(&self.field);
        for (i, a) in self.coords.iter().enumerate() {
            if a.is_exact_zero() {
                continue;
            }
            for (j, b) in self.field.frob_images[i].iter().enumerate() {
                out.coords[j] = out.coords[j].add(&a.mul(b));
            }
        }
        out
    }

    pub fn frobenius_pow(&self, k: usize) -> Self {
        let mut x = self.clone();
        for _ in 0..k % self.field.degree {
            x = x.frobenius();
        }
        x
    }

    pub fn to_qp(&self) -> Option<PadicScalar> {
        if self.coords[1..].iter().all(|c| c.is_zero()) {
            Some(self.coords[0])
        } else {
            None
        }
    }

    fn descend(&self, what: &str) -> Result<PadicScalar> {
        let q = self.to_qp().ok_or_else(|| {
            Error::PrecisionExhausted(format!("{what} has nonzero coordinates outside Q_p"))
        })?;
        match q.abs_prec() {
            Some(a) if a < 1 => Err(Error::PrecisionExhausted(format!("{what} has no certified digits"))),
            _ => Ok(q),
        }
    }

    /// Product of all Frobenius conjugates.
    pub fn norm(&self) -> Result<PadicScalar> {
        let mut acc = self.clone();
        let mut conj = self.clone();
        for _ in 1..self.field.degree {
            conj = conj.frobenius();
            acc = acc.mul(&conj);
        }
        acc.descend("norm")
    }

    /// Sum of all Frobenius conjugates.
    pub fn trace(&self) -> Result<PadicScalar> {
        let mut acc = self.clone();
        let mut conj = self.clone();
        for _ in 1..self.field.degree {
            conj = conj.frobenius();
            acc = acc.add(&conj);
        }
        acc.descend("trace")
    }

    pub fn to_json(&self) -> Value {
        json!({
            "degree": self.field.degree,
            "coords": self.coords.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(field: &Arc<UnramifiedField>, v: &Value) -> Result<Self> {
        let arr = v
            .get("coords")
            .and_then(|c| c.as_array())
            .ok_or_else(|| Error::InvalidInput(format!("malformed extension scalar {v}")))?;
        let coords = arr.iter().map(|c| PadicScalar::from_json(field.qp, c)).collect::<Result<Vec<_>>>()?;
        Self::new(field, coords)
    }
}

impl fmt::Display for UnramifiedScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coords
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format!("({c})"),
                1 => format!("({c})*w"),
                _ => format!("({c})*w^{i}"),
            })
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Determinant of the trace form `Tr(e_i e_j)` on the power basis.
pub fn trace_form_determinant(field: &Arc<UnramifiedField>) -> Result<PadicScalar> {
    let n = field.degree;
    let mut m = vec![vec![PadicScalar::zero(field.qp); n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let e = UnramifiedScalar::basis(field, i).mul(&UnramifiedScalar::basis(field, j));
            *entry = e.trace()?;
        }
    }
    Ok(crate::linalg::det(m))
}

impl Coeff for UnramifiedScalar {
    type Ctx = Arc<UnramifiedField>;

    fn ctx(&self) -> Self::Ctx {
        self.field.clone()
    }
    fn base(ctx: &Self::Ctx) -> QpCtx {
        ctx.qp
    }
    fn zero(ctx: &Self::Ctx) -> Self {
        UnramifiedScalar::zero(ctx)
    }
    fn zero_to(ctx: &Self::Ctx, abs: i64) -> Self {
        UnramifiedScalar { field: ctx.clone(), coords: vec![PadicScalar::zero_to(ctx.qp, abs); ctx.degree] }
    }
    fn from_qp(ctx: &Self::Ctx, x: &PadicScalar) -> Self {
        UnramifiedScalar::from_qp(ctx, x)
    }
    fn add(&self, o: &Self) -> Self {
        UnramifiedScalar::add(self, o)
    }
    fn neg(&self) -> Self {
        UnramifiedScalar::neg(self)
    }
    fn mul(&self, o: &Self) -> Self {
        UnramifiedScalar::mul(self, o)
    }
    fn inv(&self) -> Result<Self> {
        UnramifiedScalar::inv(self)
    }
    fn mul_p_pow(&self, k: i64) -> Self {
        UnramifiedScalar::mul_p_pow(self, k)
    }
    fn val(&self) -> Option<i64> {
        UnramifiedScalar::val(self)
    }
    fn abs_prec(&self) -> Option<i64> {
        UnramifiedScalar::abs_prec(self)
    }
    fn is_zero(&self) -> bool {
        UnramifiedScalar::is_zero(self)
    }
    fn frobenius(&self) -> Self {
        UnramifiedScalar::frobenius(self)
    }
    fn to_qp(&self) -> Option<PadicScalar> {
        UnramifiedScalar::to_qp(self)
    }
    fn to_json(&self) -> Value {
        UnramifiedScalar::to_json(self)
    }
    fn div_int(&self, k: i64) -> Self {
        let d = PadicScalar::from_i64(self.field.qp, k).inv().expect("nonzero integer");
        self.scale(&d)
    }
}
