//! p-adic scalars at capped relative precision.
//!
//! A nonzero scalar is stored as `p^val * unit` with `unit` known modulo
//! `p^prec`, `prec <= cap`. Zero carries only an absolute precision, or the
//! exact-zero marker.

use std::fmt;

use num_rational::Ratio;
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Absolute precision of the exact zero.
pub const EXACT: i64 = i64::MAX;

const MAX_MODULUS: u128 = 1 << 62;

/// Prime and precision cap shared by a family of scalars.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QpCtx {
    p: u64,
    cap: u32,
}

impl QpCtx {
    pub fn new(p: u64, cap: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidInput(format!("{p} is not prime")));
        }
        if cap == 0 {
            return Err(Error::InvalidInput("precision must be positive".into()));
        }
        let mut acc: u128 = 1;
        for _ in 0..cap {
            acc *= p as u128;
            if acc >= MAX_MODULUS {
                return Err(Error::InvalidInput(format!(
                    "{p}^{cap} does not fit the 62-bit kernel"
                )));
            }
        }
        Ok(QpCtx { p, cap })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    /// `p^k` for `k <= cap`.
    pub fn pow(&self, k: u32) -> u64 {
        let mut acc = 1u64;
        for _ in 0..k {
            acc *= self.p;
        }
        acc
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Splits off the p-part of a nonzero integer.
fn split_p(mut x: i128, p: u64) -> (i64, i128) {
    let mut k = 0;
    while x % p as i128 == 0 {
        x /= p as i128;
        k += 1;
    }
    (k, x)
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn reduce_i128(x: i128, m: u64) -> u64 {
    x.rem_euclid(m as i128) as u64
}

fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return None;
    }
    Some(reduce_i128(s0, m))
}

/// Element of Q_p at capped relative precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PadicScalar {
    ctx: QpCtx,
    // for zero: the absolute precision (EXACT for the exact zero)
    val: i64,
    unit: u64,
    prec: u32,
}

impl PadicScalar {
    pub fn zero(ctx: QpCtx) -> Self {
        PadicScalar { ctx, val: EXACT, unit: 0, prec: 0 }
    }

    /// The inexact zero `O(p^abs)`.
    pub fn zero_to(ctx: QpCtx, abs: i64) -> Self {
        PadicScalar { ctx, val: abs, unit: 0, prec: 0 }
    }

    pub fn one(ctx: QpCtx) -> Self {
        Self::from_i64(ctx, 1)
    }

    pub fn from_i64(ctx: QpCtx, v: i64) -> Self {
        Self::from_i128(ctx, v as i128)
    }

    pub fn from_i128(ctx: QpCtx, v: i128) -> Self {
        if v == 0 {
            return Self::zero(ctx);
        }
        let (k, rest) = split_p(v, ctx.p);
        let m = ctx.pow(ctx.cap);
        PadicScalar { ctx, val: k, unit: reduce_i128(rest, m), prec: ctx.cap }
    }

    /// `num / den` as a p-adic number.
    pub fn from_ratio(ctx: QpCtx, num: i128, den: i128) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        if num == 0 {
            return Ok(Self::zero(ctx));
        }
        let (kn, n) = split_p(num, ctx.p);
        let (kd, d) = split_p(den, ctx.p);
        let m = ctx.pow(ctx.cap);
        let dinv = inv_mod(reduce_i128(d, m), m).expect("unit denominator");
        Ok(PadicScalar { ctx, val: kn - kd, unit: mulmod(reduce_i128(n, m), dinv, m), prec: ctx.cap })
    }

    /// `p^val * digits` with `digits` read modulo `p^prec`; renormalizes.
    pub fn from_parts(ctx: QpCtx, val: i64, digits: u64, prec: u32) -> Self {
        let prec = prec.min(ctx.cap);
        if prec == 0 {
            return Self::zero_to(ctx, val);
        }
        let m = ctx.pow(prec);
        Self::normalize(ctx, val, digits % m, prec)
    }

    fn normalize(ctx: QpCtx, v: i64, s: u64, r: u32) -> Self {
        if s == 0 {
            return Self::zero_to(ctx, v + r as i64);
        }
        let mut s = s;
        let mut k = 0u32;
        while s % ctx.p == 0 {
            s /= ctx.p;
            k += 1;
        }
        PadicScalar { ctx, val: v + k as i64, unit: s, prec: r - k }
    }

    pub fn ctx(&self) -> QpCtx {
        self.ctx
    }

    pub fn p(&self) -> u64 {
        self.ctx.p
    }

    /// Valuation; `None` stands for infinity (any zero).
    pub fn val(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.val)
        }
    }

    /// Absolute precision; `None` for the exact zero.
    pub fn abs_prec(&self) -> Option<i64> {
        if self.is_exact_zero() {
            None
        } else if self.is_zero() {
            Some(self.val)
        } else {
            Some(self.val + self.prec as i64)
        }
    }

    pub fn rel_prec(&self) -> u32 {
        self.prec
    }

    pub fn unit(&self) -> u64 {
        self.unit
    }

    pub fn is_zero(&self) -> bool {
        self.unit == 0
    }

    pub fn is_exact_zero(&self) -> bool {
        self.unit == 0 && self.val == EXACT
    }

    pub fn neg(&self) -> Self {
        if self.is_zero() {
            return *self;
        }
        let m = self.ctx.pow(self.prec);
        PadicScalar { unit: m - self.unit, ..*self }
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.is_exact_zero() {
            return *o;
        }
        if o.is_exact_zero() {
            return *self;
        }
        let abs = self.abs_prec().unwrap().min(o.abs_prec().unwrap());
        let v = match (self.val(), o.val()) {
            (None, None) => return Self::zero_to(self.ctx, abs),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (Some(a), Some(b)) => a.min(b),
        };
        if v >= abs {
            return Self::zero_to(self.ctx, abs);
        }
        let r = ((abs - v) as u64).min(self.ctx.cap as u64) as u32;
        let m = self.ctx.pow(r);
        let mut s = 0u64;
        for x in [self, o] {
            if x.is_zero() {
                continue;
            }
            let shift = (x.val - v) as u64;
            if shift >= r as u64 {
                continue;
            }
            let shift = shift as u32;
            let part = (x.unit % self.ctx.pow(r - shift)) * self.ctx.pow(shift);
            s = (s + part) % m;
        }
        Self::normalize(self.ctx, v, s, r)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_exact_zero() || o.is_exact_zero() {
            return Self::zero(self.ctx);
        }
        if self.is_zero() || o.is_zero() {
            // O(p^k) * x = O(p^(k + v(x))), with v(O(p^l)) read as l
            return Self::zero_to(self.ctx, self.val + o.val);
        }
        let prec = self.prec.min(o.prec);
        let m = self.ctx.pow(prec);
        PadicScalar {
            ctx: self.ctx,
            val: self.val + o.val,
            unit: mulmod(self.unit % m, o.unit % m, m),
            prec,
        }
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::NotInvertible("zero has no inverse".into()));
        }
        let m = self.ctx.pow(self.prec);
        let u = inv_mod(self.unit, m).expect("unit part is a unit");
        Ok(PadicScalar { ctx: self.ctx, val: -self.val, unit: u, prec: self.prec })
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        Ok(self.mul(&o.inv()?))
    }

    /// Multiplication by `p^k`, `k` of either sign.
    pub fn mul_p_pow(&self, k: i64) -> Self {
        if self.is_exact_zero() {
            return *self;
        }
        PadicScalar { val: self.val + k, ..*self }
    }

    pub fn pow_u(&self, e: u64) -> Self {
        let mut acc = Self::one(self.ctx);
        let mut base = *self;
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

    /// Drops digits at or beyond absolute precision `abs`.
    pub fn cap_abs(&self, abs: i64) -> Self {
        match self.abs_prec() {
            Some(a) if a <= abs => *self,
            _ => self.add(&Self::zero_to(self.ctx, abs)),
        }
    }

    /// Representative in `[0, p^k)` of an integral scalar modulo `p^k`.
    pub fn residue(&self, k: u32) -> Result<u64> {
        if self.is_zero() {
            return Ok(0);
        }
        if self.val < 0 {
            return Err(Error::DomainViolation("scalar is not integral".into()));
        }
        if self.val >= k as i64 {
            return Ok(0);
        }
        let m = self.ctx.pow(k);
        let shift = self.val as u32;
        Ok((self.unit % self.ctx.pow(k - shift)) * self.ctx.pow(shift) % m)
    }

    /// Smallest-height rational congruent to this scalar at its precision.
    pub fn small_rational(&self) -> Option<(i128, i128)> {
        if self.is_zero() {
            return Some((0, 1));
        }
        let m = self.ctx.pow(self.prec) as i128;
        let bound = ((m / 2) as f64).sqrt() as i128;
        let (mut r0, mut r1) = (m, self.unit as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 > bound {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        if t1 == 0 || t1.abs() > bound {
            return None;
        }
        let (mut a, mut b) = (r1, t1);
        if b < 0 {
            a = -a;
            b = -b;
        }
        let pp = self.ctx.p as i128;
        let mut v = self.val;
        while v > 0 {
            a = a.checked_mul(pp)?;
            v -= 1;
        }
        while v < 0 {
            b = b.checked_mul(pp)?;
            v += 1;
        }
        Some((a, b))
    }

    /// The rational integer this scalar equals to working precision, if any.
    pub fn as_small_integer(&self) -> Option<i128> {
        match self.small_rational() {
            Some((a, 1)) => Some(a),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        if self.is_zero() {
            let v = if self.is_exact_zero() { Value::Null } else { json!(self.val) };
            return json!({"p": self.ctx.p, "valuation": v, "unit": "0", "precision": 0});
        }
        json!({"p": self.ctx.p, "valuation": self.val, "unit": self.unit.to_string(), "precision": self.prec})
    }

    pub fn from_json(ctx: QpCtx, v: &Value) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("malformed scalar {v}"));
        let unit: u64 = v.get("unit").and_then(|u| u.as_str()).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let prec = v.get("precision").and_then(|u| u.as_u64()).ok_or_else(bad)? as u32;
        let val = v.get("valuation").ok_or_else(bad)?;
        if unit == 0 {
            return Ok(match val.as_i64() {
                Some(a) => Self::zero_to(ctx, a),
                None => Self::zero(ctx),
            });
        }
        let val = val.as_i64().ok_or_else(bad)?;
        if unit % ctx.p == 0 || prec == 0 || unit >= ctx.pow(prec.min(ctx.cap)) {
            return Err(bad());
        }
        Ok(Self::from_parts(ctx, val, unit, prec))
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.ctx.p;
        if self.is_exact_zero() {
            return write!(f, "0");
        }
        if self.is_zero() {
            return write!(f, "O({p}^{})", self.val);
        }
        let abs = self.val + self.prec as i64;
        match self.val {
            0 => write!(f, "{} + O({p}^{abs})", self.unit),
            v => write!(f, "{}*{p}^{v} + O({p}^{abs})", self.unit),
        }
    }
}

/// Parses `"3"`, `"-2"` or `"5/4"`.
pub fn parse_scalar(ctx: QpCtx, s: &str) -> Result<PadicScalar> {
    let bad = || Error::InvalidInput(format!("cannot parse scalar {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let a: i128 = a.trim().parse().map_err(|_| bad())?;
            let b: i128 = b.trim().parse().map_err(|_| bad())?;
            PadicScalar::from_ratio(ctx, a, b)
        }
        None => {
            let a: i128 = s.parse().map_err(|_| bad())?;
            Ok(PadicScalar::from_i128(ctx, a))
        }
    }
}

/// Coefficient field interface shared by Q_p and its unramified extensions.
pub trait Coeff: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    type Ctx: Clone + fmt::Debug + PartialEq + Send + Sync + 'static;

    fn ctx(&self) -> Self::Ctx;
    fn base(ctx: &Self::Ctx) -> QpCtx;
    fn zero(ctx: &Self::Ctx) -> Self;
    fn zero_to(ctx: &Self::Ctx, abs: i64) -> Self;
    fn from_qp(ctx: &Self::Ctx, x: &PadicScalar) -> Self;

    fn from_i64(ctx: &Self::Ctx, v: i64) -> Self {
        Self::from_qp(ctx, &PadicScalar::from_i64(Self::base(ctx), v))
    }
    fn one(ctx: &Self::Ctx) -> Self {
        Self::from_i64(ctx, 1)
    }

    fn add(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn inv(&self) -> Result<Self>;
    fn mul_p_pow(&self, k: i64) -> Self;
    fn val(&self) -> Option<i64>;
    fn abs_prec(&self) -> Option<i64>;
    fn is_zero(&self) -> bool;
    /// Arithmetic Frobenius; the identity on Q_p.
    fn frobenius(&self) -> Self;
    /// The underlying Q_p element, when this lies in Q_p to its precision.
    fn to_qp(&self) -> Option<PadicScalar>;
    fn to_json(&self) -> Value;

    fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }
    fn div(&self, o: &Self) -> Result<Self> {
        Ok(self.mul(&o.inv()?))
    }
    fn div_int(&self, k: i64) -> Self {
        let d = Self::from_i64(&self.ctx(), k);
        self.div(&d).expect("nonzero integer")
    }
    fn is_exact_zero(&self) -> bool {
        self.is_zero() && self.abs_prec().is_none()
    }
    fn prime(ctx: &Self::Ctx) -> u64 {
        Self::base(ctx).p()
    }
    fn cap(ctx: &Self::Ctx) -> u32 {
        Self::base(ctx).cap()
    }
}

impl Coeff for PadicScalar {
    type Ctx = QpCtx;

    fn ctx(&self) -> QpCtx {
        self.ctx
    }
    fn base(ctx: &QpCtx) -> QpCtx {
        *ctx
    }
    fn zero(ctx: &QpCtx) -> Self {
        PadicScalar::zero(*ctx)
    }
    fn zero_to(ctx: &QpCtx, abs: i64) -> Self {
        PadicScalar::zero_to(*ctx, abs)
    }
    fn from_qp(_: &QpCtx, x: &PadicScalar) -> Self {
        *x
    }
    fn add(&self, o: &Self) -> Self {
        PadicScalar::add(self, o)
    }
    fn neg(&self) -> Self {
        PadicScalar::neg(self)
    }
    fn mul(&self, o: &Self) -> Self {
        PadicScalar::mul(self, o)
    }
    fn inv(&self) -> Result<Self> {
        PadicScalar::inv(self)
    }
    fn mul_p_pow(&self, k: i64) -> Self {
        PadicScalar::mul_p_pow(self, k)
    }
    fn val(&self) -> Option<i64> {
        PadicScalar::val(self)
    }
    fn abs_prec(&self) -> Option<i64> {
        PadicScalar::abs_prec(self)
    }
    fn is_zero(&self) -> bool {
        PadicScalar::is_zero(self)
    }
    fn frobenius(&self) -> Self {
        *self
    }
    fn to_qp(&self) -> Option<PadicScalar> {
        Some(*self)
    }
    fn to_json(&self) -> Value {
        PadicScalar::to_json(self)
    }
}

/// Margin `v_p(c) - (e/(p-1) - 1)`; `None` when `c` is zero (infinite margin).
pub fn analytic_margin(e: u32, p: u64, vc: Option<i64>) -> Option<Ratio<i64>> {
    let bound = Ratio::new(e as i64, p as i64 - 1) - 1;
    vc.map(|v| Ratio::from_integer(v) - bound)
}

fn floor_log(p: u64, k: u64) -> i64 {
    let mut e = 0;
    let mut acc = p;
    while acc <= k {
        acc = acc.saturating_mul(p);
        e += 1;
    }
    e
}

/// `log(1 + x)` for `v(x) >= 1`.
pub fn log_one_plus<C: Coeff>(x: &C) -> Result<C> {
    let ctx = x.ctx();
    let target = C::cap(&ctx) as i64 + 1;
    let vx = match x.val() {
        None => return Ok(x.clone()),
        Some(v) => v,
    };
    if vx < 1 {
        return Err(Error::Divergence(format!("log(1+x) needs v(x) >= 1, got {vx}")));
    }
    let p = C::prime(&ctx);
    let mut acc = C::zero(&ctx);
    let mut pw = x.clone();
    let mut k = 1u64;
    loop {
        let bound = k as i64 * vx - floor_log(p, k);
        if bound >= target {
            acc = acc.add(&C::zero_to(&ctx, target));
            break;
        }
        let term = pw.div_int(k as i64);
        acc = if k % 2 == 1 { acc.add(&term) } else { acc.sub(&term) };
        pw = pw.mul(x);
        k += 1;
    }
    Ok(acc)
}

/// `exp(z)` for `v(z) >= 1`.
pub fn exp_series<C: Coeff>(z: &C) -> Result<C> {
    let ctx = z.ctx();
    let target = C::cap(&ctx) as i64 + 1;
    let one = C::one(&ctx);
    let vz = match z.val() {
        None => return Ok(one.add(z)),
        Some(v) => v,
    };
    if vz < 1 {
        return Err(Error::Divergence(format!("exp(z) needs v(z) >= 1, got {vz}")));
    }
    let p = C::prime(&ctx) as i64;
    let mut acc = one.clone();
    let mut term = one;
    let mut k = 1i64;
    loop {
        let bound = k * vz - (k - 1) / (p - 1);
        if bound >= target {
            acc = acc.add(&C::zero_to(&ctx, target));
            break;
        }
        term = term.mul(z).div_int(k);
        acc = acc.add(&term);
        k += 1;
    }
    Ok(acc)
}

/// `t^c = exp(c log t)` for `t = 1 mod p` and an analytic exponent `c`.
pub fn power_char<C: Coeff>(t: &C, c: &C) -> Result<C> {
    let ctx = t.ctx();
    let p = C::prime(&ctx);
    if let Some(m) = analytic_margin(1, p, c.val()) {
        if m <= Ratio::from_integer(0) {
            return Err(Error::Divergence(format!("exponent valuation {:?} violates the analyticity bound", c.val())));
        }
    }
    let x = t.sub(&C::one(&ctx));
    if let Some(v) = x.val() {
        if v < 1 {
            return Err(Error::DomainViolation("power_char needs t = 1 mod p".into()));
        }
    }
    let out = exp_series(&c.mul(&log_one_plus(&x)?))?;
    match out.abs_prec() {
        Some(a) if a <= 0 => Err(Error::PrecisionExhausted("power_char lost all digits".into())),
        _ => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> QpCtx {
        QpCtx::new(7, 12).unwrap()
    }

    #[test]
    fn valuation_of_monomial() {
        let x = PadicScalar::from_i64(ctx(), 343 * 5);
        assert_eq!(x.val(), Some(3));
        assert_eq!(PadicScalar::zero(ctx()).val(), None);
        assert_eq!(PadicScalar::from_i64(ctx(), 7).val(), Some(1));
    }

    #[test]
    fn cancellation_gives_inexact_zero() {
        let a = PadicScalar::from_i64(ctx(), 5);
        let z = a.sub(&a);
        assert!(z.is_zero() && !z.is_exact_zero());
        assert_eq!(z.abs_prec(), Some(12));
    }

    #[test]
    fn ratio_round_trip() {
        let h = PadicScalar::from_ratio(ctx(), 1, 2).unwrap();
        let two = PadicScalar::from_i64(ctx(), 2);
        assert_eq!(h.mul(&two), PadicScalar::one(ctx()));
        assert_eq!(h.small_rational(), Some((1, 2)));
        let q = PadicScalar::from_ratio(ctx(), -3, 49).unwrap();
        assert_eq!(q.val(), Some(-2));
        assert_eq!(q.small_rational(), Some((-3, 49)));
        assert_eq!(PadicScalar::from_i64(ctx(), -14).as_small_integer(), Some(-14));
    }

    #[test]
    fn power_char_integer_exponents() {
        let c = ctx();
        let t = PadicScalar::from_i64(c, 8);
        let one = PadicScalar::one(c);
        assert_eq!(power_char(&t, &one).unwrap().sub(&t).is_zero(), true);
        let zero = PadicScalar::zero(c);
        assert!(power_char(&t, &zero).unwrap().sub(&one).is_zero());
        let three = PadicScalar::from_i64(c, 3);
        let direct = t.mul(&t).mul(&t);
        let series = power_char(&t, &three).unwrap();
        let d = series.sub(&direct);
        assert!(d.is_zero());
        assert!(d.abs_prec().unwrap() >= 12);
    }

    #[test]
    fn power_char_rejects_bad_exponent() {
        let c = ctx();
        let t = PadicScalar::from_i64(c, 8);
        let bad = PadicScalar::from_ratio(c, 1, 7).unwrap();
        assert!(matches!(power_char(&t, &bad), Err(Error::Divergence(_))));
    }

    #[test]
    fn margin_formula() {
        // e = 1, p = 5: bound -3/4
        assert_eq!(analytic_margin(1, 5, Some(-1)), Some(Ratio::new(-1, 4)));
        assert_eq!(analytic_margin(1, 5, None), None);
    }

    #[test]
    fn json_round_trip() {
        let c = ctx();
        for x in [PadicScalar::from_i64(c, -98), PadicScalar::zero(c), PadicScalar::zero_to(c, 5)] {
            assert_eq!(PadicScalar::from_json(c, &x.to_json()).unwrap(), x);
        }
    }
}
