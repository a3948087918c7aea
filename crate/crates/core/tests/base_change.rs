use std::sync::Arc;

use iwahori_core::base_change::{tensor_rep, ResScalarsContext};
use iwahori_core::iwahori::{FactorKind, OneParamFactor};
use iwahori_core::principal_series::{unipotent_vars, Character, GroupParameter, PrincipalSeries};
use iwahori_core::sample;
use iwahori_core::tate::{Mono, Role, TateSeries, VariableSet};
use iwahori_core::{Error, PadicScalar, QpCtx, UnramifiedField, UnramifiedScalar};
use proptest::prelude::*;

type S = TateSeries<PadicScalar>;
type T = TateSeries<UnramifiedScalar>;

fn ctx() -> QpCtx {
    QpCtx::new(7, 12).unwrap()
}

fn field(n: usize) -> Arc<UnramifiedField> {
    UnramifiedField::new(ctx(), n).unwrap()
}

fn generic(names: &[&str]) -> Arc<VariableSet> {
    VariableSet::from_names(&names.iter().map(|n| (*n, Role::Generic)).collect::<Vec<_>>()).unwrap()
}

fn rational(g: &T) -> bool {
    g.terms().values().all(|c| c.frobenius().sub(c).is_zero())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn holomorphic_restriction_is_a_ring_map(seed in any::<u64>(), nn in 2usize..=3) {
        let mut rng = sample::rng(seed);
        let src = generic(&["x", "y"]);
        let res = ResScalarsContext::new(&field(nn), &src).unwrap();
        let f: S = sample::integral_poly(&mut rng, &src, &ctx(), 4, 2, 2, 3);
        let g: S = sample::integral_poly(&mut rng, &src, &ctx(), 4, 2, 2, 3);
        let b = |h: &S| res.holomorphic_bc(h).unwrap();
        prop_assert!(b(&f.mul(&g)).agreement(&b(&f).mul(&b(&g))).is_some());
        prop_assert!(b(&f.add(&g)).sub(&b(&f).add(&b(&g))).is_zero());
    }

    #[test]
    fn full_restriction_is_rational_and_matches_slots(seed in any::<u64>(), nn in 2usize..=3) {
        let mut rng = sample::rng(seed);
        let src = generic(&["x", "y"]);
        let res = ResScalarsContext::new(&field(nn), &src).unwrap();
        let f: S = sample::integral_poly(&mut rng, &src, &ctx(), 6, 2, 2, 3);
        let b = res.full_bc(&f).unwrap();
        prop_assert!(rational(&b));
        let via_slots = res.identify_slots(&res.tensor_form(&f).unwrap()).unwrap();
        prop_assert!(b.agreement(&via_slots).is_some());
    }

    #[test]
    fn restriction_is_injective(seed in any::<u64>()) {
        let mut rng = sample::rng(seed);
        let src = generic(&["x", "y"]);
        let res = ResScalarsContext::new(&field(2), &src).unwrap();
        let f: S = sample::integral_poly(&mut rng, &src, &ctx(), 4, 2, 4, 4);
        prop_assume!(!f.is_zero());
        prop_assert!(!res.holomorphic_bc(&f).unwrap().is_zero());
    }

    #[test]
    fn torus_commutes_with_restriction(seed in any::<u64>(), k in 1usize..=3) {
        let mut rng = sample::rng(seed);
        let l = field(2);
        let src = unipotent_vars(3).unwrap();
        let res = ResScalarsContext::new(&l, &src).unwrap();
        let params: Vec<PadicScalar> = (0..3).map(|_| sample::zp(&mut rng, ctx())).collect();
        let rep = PrincipalSeries::standard(3, Character::new(params.clone()), &ctx()).unwrap();
        let chi_l = Character::new(params.iter().map(|c| UnramifiedScalar::from_qp(&l, c)).collect());
        let f: S = sample::integral_poly(&mut rng, &src, &ctx(), 4, 3, 3, 4);
        let t = sample::one_plus_pzp(&mut rng, ctx());
        let lhs = res.holomorphic_bc(&rep.act_diag(k, &GroupParameter::Concrete(t), &f).unwrap()).unwrap();
        let rhs = res.act_diag(&chi_l, k, &t, &res.holomorphic_bc(&f).unwrap()).unwrap();
        prop_assert!(lhs.agreement(&rhs).is_some());
    }
}

#[test]
fn square_of_a_coordinate() {
    // (e1 x#1 + e2 x#2)^2
    let src = generic(&["x"]);
    let l = field(2);
    let res = ResScalarsContext::new(&l, &src).unwrap();
    let x = S::var(&src, &ctx(), 4, 0);
    let got = res.holomorphic_bc(&x.mul(&x)).unwrap();
    let e = res.basis();
    let two = UnramifiedScalar::from_qp(&l, &PadicScalar::from_i64(ctx(), 2));
    let want = T::from_terms(
        res.target(),
        &l,
        4,
        vec![
            (Mono::from_exps(&[2, 0]), e[0].mul(&e[0])),
            (Mono::from_exps(&[1, 1]), two.mul(&e[0]).mul(&e[1])),
            (Mono::from_exps(&[0, 2]), e[1].mul(&e[1])),
        ],
    );
    assert!(got.sub(&want).is_zero());
    let names: Vec<&str> = res.target().vars().iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names, ["x#1", "x#2"]);
}

#[test]
fn norm_form_of_a_coordinate() {
    // x -> (x#1 + w x#2)(x#1 - w x#2) with w^2 = -1
    let src = generic(&["x"]);
    let l = field(2);
    let res = ResScalarsContext::new(&l, &src).unwrap();
    let got = res.full_bc(&S::var(&src, &ctx(), 4, 0)).unwrap();
    let one = UnramifiedScalar::one(&l);
    let want = T::from_terms(res.target(), &l, 4, vec![(Mono::from_exps(&[2, 0]), one.clone()), (Mono::from_exps(&[0, 2]), one)]);
    assert!(got.sub(&want).is_zero(), "{got}");
}

#[test]
fn degree_one_changes_nothing() {
    let mut rng = sample::rng(2);
    let src = generic(&["x", "y"]);
    let l = field(1);
    let res = ResScalarsContext::new(&l, &src).unwrap();
    let f: S = sample::integral_poly(&mut rng, &src, &ctx(), 5, 2, 5, 6);
    let b = res.full_bc(&f).unwrap();
    for (m, c) in f.terms() {
        assert!(b.coeff(*m).unwrap().sub(&UnramifiedScalar::from_qp(&l, c)).is_zero());
    }
    assert_eq!(b.len(), f.len());
}

#[test]
fn lower_factor_acts_slot_by_slot() {
    let mut rng = sample::rng(4);
    let l = field(2);
    let chi = Character::<PadicScalar>::from_ints(&ctx(), &[2, -3]);
    let rep = tensor_rep(&chi, 2, &l, 5).unwrap();
    let a0 = rep.coordinate(2, 1, 0).unwrap();
    let a1 = rep.coordinate(2, 1, 1).unwrap();
    let y = sample::zp(&mut rng, ctx());
    let factor = OneParamFactor::new(FactorKind::Lower(2, 1), y).unwrap();
    let yl = UnramifiedScalar::from_qp(&l, &y);
    let shift = |a: &T| a.sub(&rep.constant(yl.clone()));
    let got = rep.act_factor(&factor, &a0.mul(&a1)).unwrap();
    assert!(got.sub(&shift(&a0).mul(&shift(&a1))).is_zero());
    // slot characters are Frobenius twists
    assert_eq!(rep.slot(1).chi().params(), rep.slot(0).chi().frobenius().params());
}

#[test]
fn torus_on_the_tensor_constant() {
    let l = field(3);
    let chi = Character::<PadicScalar>::from_ints(&ctx(), &[3, 1]);
    let rep = tensor_rep(&chi, 2, &l, 3).unwrap();
    let t = PadicScalar::from_i64(ctx(), 8);
    let (slotwise, via_norm) = rep.constant_eigenvalue(1, &t).unwrap();
    // 8^3 cubed
    let want = UnramifiedScalar::from_qp(&l, &PadicScalar::from_i64(ctx(), 8i64.pow(9)));
    assert!(slotwise.sub(&want).is_zero());
    assert!(via_norm.sub(&want).is_zero());
}

#[test]
fn mismatched_series_are_rejected() {
    let src = generic(&["x"]);
    let res = ResScalarsContext::new(&field(2), &src).unwrap();
    let other = generic(&["z"]);
    assert!(matches!(res.holomorphic_bc(&S::var(&other, &ctx(), 3, 0)), Err(Error::VariableMismatch(_))));
    let many: Vec<String> = (0..9).map(|i| format!("v{i}")).collect();
    let big = generic(&many.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    assert!(matches!(ResScalarsContext::new(&field(2), &big), Err(Error::SizeLimit(_))));
}
