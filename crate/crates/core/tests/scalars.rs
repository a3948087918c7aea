use std::sync::Arc;

use iwahori_core::padic::{analytic_margin, exp_series, log_one_plus, parse_scalar, power_char};
use iwahori_core::unramified::trace_form_determinant;
use iwahori_core::{PadicScalar, QpCtx, UnramifiedField, UnramifiedScalar};
use num_rational::Ratio;
use proptest::prelude::*;

fn ctx() -> QpCtx {
    QpCtx::new(7, 12).unwrap()
}

fn scalar(v: i64, shift: i64) -> PadicScalar {
    PadicScalar::from_i64(ctx(), v).mul_p_pow(shift)
}

fn arb() -> impl Strategy<Value = PadicScalar> {
    (any::<i64>(), -2i64..4).prop_map(|(v, s)| scalar(v % 1_000_000_007, s))
}

fn arb_l(field: Arc<UnramifiedField>) -> impl Strategy<Value = UnramifiedScalar> {
    let n = field.degree();
    proptest::collection::vec(any::<i32>(), n).prop_map(move |c| {
        let qp = field.qp();
        UnramifiedScalar::new(&field, c.iter().map(|&x| PadicScalar::from_i64(qp, x as i64)).collect()).unwrap()
    })
}

fn field(n: usize) -> Arc<UnramifiedField> {
    UnramifiedField::new(ctx(), n).unwrap()
}

proptest! {
    #[test]
    fn ring_axioms(a in arb(), b in arb(), c in arb()) {
        prop_assert!(a.add(&b).add(&c).sub(&a.add(&b.add(&c))).is_zero());
        prop_assert!(a.mul(&b).mul(&c).sub(&a.mul(&b.mul(&c))).is_zero());
        prop_assert!(a.mul(&b.add(&c)).sub(&a.mul(&b).add(&a.mul(&c))).is_zero());
        prop_assert!(a.mul(&b).sub(&b.mul(&a)).is_zero());
        prop_assert!(a.add(&a.neg()).is_zero());
    }

    #[test]
    fn valuation_is_multiplicative(a in arb(), b in arb()) {
        prop_assume!(!a.is_zero() && !b.is_zero());
        prop_assert_eq!(a.mul(&b).val(), Some(a.val().unwrap() + b.val().unwrap()));
    }

    #[test]
    fn inverse(a in arb()) {
        prop_assume!(!a.is_zero());
        let one = PadicScalar::one(ctx());
        prop_assert!(a.mul(&a.inv().unwrap()).sub(&one).is_zero());
    }

    #[test]
    fn power_char_is_additive(x in any::<i32>(), c1 in arb(), c2 in arb()) {
        let t = PadicScalar::one(ctx()).add(&scalar(x as i64, 1));
        prop_assume!(c1.val().map_or(true, |v| v >= 0) && c2.val().map_or(true, |v| v >= 0));
        let lhs = power_char(&t, &c1.add(&c2)).unwrap();
        let rhs = power_char(&t, &c1).unwrap().mul(&power_char(&t, &c2).unwrap());
        prop_assert!(lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn power_char_on_integers(x in any::<i32>(), k in 0u64..12) {
        let t = PadicScalar::one(ctx()).add(&scalar(x as i64, 1));
        let c = PadicScalar::from_i64(ctx(), k as i64);
        prop_assert!(power_char(&t, &c).unwrap().sub(&t.pow_u(k)).is_zero());
    }

    #[test]
    fn exp_inverts_log(x in any::<i32>()) {
        let u = scalar(x as i64, 1);
        let back = exp_series(&log_one_plus(&u).unwrap()).unwrap();
        prop_assert!(back.sub(&PadicScalar::one(ctx()).add(&u)).is_zero());
    }

    #[test]
    fn frobenius_is_a_ring_map(a in arb_l(field(3)), b in arb_l(field(3))) {
        prop_assert!(a.mul(&b).frobenius().sub(&a.frobenius().mul(&b.frobenius())).is_zero());
        prop_assert!(a.add(&b).frobenius().sub(&a.frobenius().add(&b.frobenius())).is_zero());
        prop_assert!(a.frobenius_pow(3).sub(&a).is_zero());
    }

    #[test]
    fn norm_is_multiplicative(a in arb_l(field(2)), b in arb_l(field(2))) {
        let lhs = a.mul(&b).norm().unwrap();
        let rhs = a.norm().unwrap().mul(&b.norm().unwrap());
        prop_assert!(lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn trace_is_additive(a in arb_l(field(3)), b in arb_l(field(3))) {
        let lhs = a.add(&b).trace().unwrap();
        prop_assert!(lhs.sub(&a.trace().unwrap().add(&b.trace().unwrap())).is_zero());
    }

    #[test]
    fn unramified_inverse(a in arb_l(field(2))) {
        prop_assume!(!a.is_zero());
        let one = UnramifiedScalar::one(a.field());
        prop_assert!(a.mul(&a.inv().unwrap()).sub(&one).is_zero());
    }
}

#[test]
fn rationals() {
    let c = ctx();
    let half = parse_scalar(c, "1/2").unwrap();
    assert!(half.mul(&PadicScalar::from_i64(c, 2)).sub(&PadicScalar::one(c)).is_zero());
    let x = parse_scalar(c, "3/49").unwrap();
    assert_eq!(x.val(), Some(-2));
    assert_eq!(x.small_rational(), Some((3, 49)));
    assert!(parse_scalar(c, "1/0").is_err());
    assert!(parse_scalar(c, "abc").is_err());
}

#[test]
fn precision_is_tracked() {
    let c = ctx();
    let a = PadicScalar::from_i64(c, 1);
    let b = PadicScalar::from_i64(c, 1).add(&PadicScalar::from_i64(c, 7i64.pow(5)));
    let d = b.sub(&a);
    assert_eq!(d.val(), Some(5));
    // the difference keeps only the digits both operands knew
    assert_eq!(d.abs_prec(), Some(12));
    let z = a.sub(&a);
    assert!(z.is_zero());
}

#[test]
fn margins_by_hand() {
    // v - (e/(p-1) - 1)
    assert_eq!(analytic_margin(1, 7, Some(0)), Some(Ratio::new(5, 6)));
    assert_eq!(analytic_margin(6, 7, Some(0)), Some(Ratio::from_integer(0)));
    assert_eq!(analytic_margin(2, 3, Some(-1)), Some(Ratio::from_integer(-1)));
    assert_eq!(analytic_margin(1, 5, None), None);
}

#[test]
fn quadratic_field() {
    let f = field(2);
    assert_eq!(f.modulus(), &[1, 0]);
    assert_eq!(trace_form_determinant(&f).unwrap().val(), Some(0));
    let w = UnramifiedScalar::generator(&f);
    assert!(w.mul(&w).add(&UnramifiedScalar::one(&f)).is_zero());
    assert!(w.norm().unwrap().sub(&PadicScalar::one(f.qp())).is_zero());
    assert!(w.trace().unwrap().is_zero());
}
