use iwahori_core::iwahori::{self, FactorKind, OneParamFactor};
use iwahori_core::padic::power_char;
use iwahori_core::principal_series::{xz_decompose, Character, GroupParameter, PrincipalSeries};
use iwahori_core::sample;
use iwahori_core::tate::{Mono, Role, TateSeries};
use iwahori_core::{PadicScalar, QpCtx};
use proptest::prelude::*;

type S = TateSeries<PadicScalar>;

fn ctx() -> QpCtx {
    QpCtx::new(7, 12).unwrap()
}

fn int(v: i64) -> PadicScalar {
    PadicScalar::from_i64(ctx(), v)
}

fn binom(n: u32, k: u32) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

fn rep(n: usize, c: &[i64]) -> PrincipalSeries<PadicScalar> {
    PrincipalSeries::standard(n, Character::from_ints(&ctx(), c), &ctx()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn monomials_are_torus_eigenvectors(e in proptest::collection::vec(0u32..3, 3), k in 1usize..=3, x in any::<i32>(), c in proptest::collection::vec(-9i64..9, 3)) {
        let r = rep(3, &c);
        let t = int(1).add(&int(x as i64).mul_p_pow(1));
        let m = S::monomial(r.vars(), &ctx(), 8, Mono::from_exps(&e), int(1));
        let got = r.act_diag(k, &GroupParameter::Concrete(t), &m).unwrap();
        // a[i,k] scales by t, a[k,j] by t^-1
        let mut s = 0i64;
        for (idx, (i, j)) in iwahori::lower_roots(3).into_iter().enumerate() {
            s += ((j == k) as i64 - (i == k) as i64) * e[idx] as i64;
        }
        let ts = if s >= 0 { t.pow_u(s as u64) } else { t.inv().unwrap().pow_u((-s) as u64) };
        let want = m.scale(&power_char(&t, &int(c[k - 1])).unwrap().mul(&ts));
        prop_assert!(got.sub(&want).is_zero());
    }

    #[test]
    fn lower_action_is_a_shift(m in 0u32..7, y in any::<i32>()) {
        // n=2: a -> a - y
        let r = rep(2, &[3, -1]);
        let f = S::monomial(r.vars(), &ctx(), 8, Mono::from_exps(&[m]), int(1));
        let got = r.act_lower(2, 1, &GroupParameter::Concrete(int(y as i64)), &f).unwrap();
        let want = S::from_terms(r.vars(), &ctx(), 8, (0..=m).map(|q| {
            (Mono::from_exps(&[q]), int(binom(m, q)).mul(&int(-(y as i64)).pow_u((m - q) as u64)))
        }).collect::<Vec<_>>());
        prop_assert!(got.sub(&want).is_zero());
    }

    #[test]
    fn upper_action_on_gl2(m in 0u32..4, c1 in -6i64..6, c2 in -6i64..6, a in any::<i32>(), y in any::<i32>()) {
        // (1 + y E_12) a^m = (a / (1 - y a))^m (1 - y a)^(c2 - c1)
        let r = rep(2, &[c1, c2]);
        let yv = int(y as i64).mul_p_pow(1);
        let av = int(a as i64);
        let f = S::monomial(r.vars(), &ctx(), 10, Mono::from_exps(&[m]), int(1));
        let g = r.act_upper(1, 2, &GroupParameter::Concrete(yv), &f).unwrap();
        let got = g.evaluate(&[av]).unwrap();
        let base = int(1).sub(&yv.mul(&av));
        let e = c2 - c1 - m as i64;
        let factor = if e >= 0 { base.pow_u(e as u64) } else { base.inv().unwrap().pow_u((-e) as u64) };
        let want = av.pow_u(m as u64).mul(&factor);
        let diff = got.value.sub(&want);
        prop_assert!(diff.is_zero() || diff.val().unwrap() >= got.certified);
        prop_assert!(got.certified >= 5);
    }

    #[test]
    fn symbolic_and_concrete_parameters_agree(seed in any::<u64>(), which in 0usize..3) {
        let mut rng = sample::rng(seed);
        let r = rep(3, &[2, -1, 4]);
        let f: S = sample::integral_poly(&mut rng, r.vars(), &ctx(), 6, 3, 3, 4);
        let (role, kind, value) = match which {
            0 => (Role::LowerParam, FactorKind::Lower(3, 1), sample::zp(&mut rng, ctx())),
            1 => (Role::UpperParam, FactorKind::Upper(2, 3), sample::pzp(&mut rng, ctx())),
            _ => (Role::DiagParam, FactorKind::Diag(2), sample::zp(&mut rng, ctx())),
        };
        let vars = r.with_params(&[("param", role)]).unwrap();
        let v = vars.len() - 1;
        let lifted = r.lift(&f, &vars).unwrap();
        let sym = GroupParameter::Symbolic(v);
        let g = match kind {
            FactorKind::Lower(i, j) => r.act_lower(i, j, &sym, &lifted),
            FactorKind::Upper(i, j) => r.act_upper(i, j, &sym, &lifted),
            FactorKind::Diag(k) => r.act_diag(k, &sym, &lifted),
        }
        .unwrap();
        let mut images: Vec<S> = (0..v).map(|i| S::var(&vars, &ctx(), 6, i)).collect();
        images.push(S::constant(&vars, &ctx(), 6, value));
        let specialized = g.substitute(&images).unwrap().restrict_to(r.vars()).unwrap();
        // the torus variable is xi with t = 1 + p xi
        let param = match kind {
            FactorKind::Diag(_) => int(1).add(&value.mul_p_pow(1)),
            _ => value,
        };
        let direct = r.act_factor(&OneParamFactor::new(kind, param).unwrap(), &f).unwrap();
        prop_assert!(specialized.agreement(&direct).is_some());
    }

    #[test]
    fn lower_factors_compose_exactly(seed in any::<u64>()) {
        let mut rng = sample::rng(seed);
        let r = rep(3, &[1, 0, -2]);
        let f: S = sample::integral_poly(&mut rng, r.vars(), &ctx(), 6, 3, 4, 5);
        let (y1, y2) = (sample::zp(&mut rng, ctx()), sample::zp(&mut rng, ctx()));
        let a = r.act_lower(3, 2, &GroupParameter::Concrete(y1), &r.act_lower(3, 2, &GroupParameter::Concrete(y2), &f).unwrap()).unwrap();
        let b = r.act_lower(3, 2, &GroupParameter::Concrete(y1.add(&y2)), &f).unwrap();
        prop_assert!(a.sub(&b).is_zero());
    }
}

#[test]
fn symbolic_torus_binomials() {
    // trivial character, k=1: a -> (1 + p xi) a
    let r = rep(2, &[0, 0]);
    let vars = r.with_params(&[("xi", Role::DiagParam)]).unwrap();
    for m in 0..5u32 {
        let f = S::monomial(&vars, &ctx(), 10, Mono::from_exps(&[m, 0]), int(1));
        let g = r.act_diag(1, &GroupParameter::Symbolic(1), &f).unwrap();
        let want = S::from_terms(
            &vars,
            &ctx(),
            10,
            (0..=m).map(|q| (Mono::from_exps(&[m, q]), int(binom(m, q) * 7i64.pow(q)))).collect::<Vec<_>>(),
        );
        assert!(g.sub(&want).is_zero(), "m={m}");
    }
}

#[test]
fn symbolic_torus_character() {
    // chi_1(1 + p xi) = sum C(c, q) p^q xi^q
    let r = rep(2, &[3, 0]);
    let vars = r.with_params(&[("xi", Role::DiagParam)]).unwrap();
    let one = S::one(&vars, &ctx(), 8);
    let g = r.act_diag(1, &GroupParameter::Symbolic(1), &one).unwrap();
    let want = S::from_terms(&vars, &ctx(), 8, (0..=3u32).map(|q| (Mono::from_exps(&[0, q]), int(binom(3, q) * 7i64.pow(q)))).collect::<Vec<_>>());
    assert!(g.sub(&want).is_zero());
}

#[test]
fn diagonal_entries_of_z_are_one_mod_y() {
    let xz = xz_decompose::<PadicScalar>(&ctx(), 3, 1, 3, 5, true).unwrap();
    let eta = xz.vars.index_of("eta").unwrap();
    for r in 0..3 {
        let rest = xz.z[r][r].coeff_in_var(eta, 0).unwrap();
        assert!(rest.sub(&S::one(&xz.vars, &ctx(), 5)).is_zero());
        // y = p eta: every eta term carries a factor p
        for (m, c) in xz.z[r][r].terms() {
            if m.exp(eta) > 0 {
                assert!(c.val().unwrap() >= m.exp(eta) as i64);
            }
        }
    }
}

#[test]
fn domains_are_enforced() {
    let r = rep(2, &[0, 0]);
    let f = S::one(r.vars(), &ctx(), 4);
    assert!(r.act_upper(1, 2, &GroupParameter::Concrete(int(1)), &f).is_err());
    assert!(r.act_lower(2, 1, &GroupParameter::Concrete(int(1).mul_p_pow(-1)), &f).is_err());
    assert!(r.act_diag(1, &GroupParameter::Concrete(int(2)), &f).is_err());
    assert!(r.act_lower(1, 2, &GroupParameter::Concrete(int(1)), &f).is_err());
    // non-analytic character
    let bad = PrincipalSeries::standard(2, Character::new(vec![int(1).mul_p_pow(-1), int(0)]), &ctx()).unwrap();
    assert!(bad.act_diag(1, &GroupParameter::Concrete(int(8)), &f).is_err());
}

#[test]
fn identity_acts_trivially() {
    let mut rng = sample::rng(5);
    let r = rep(3, &[2, 2, -5]);
    let f: S = sample::integral_poly(&mut rng, r.vars(), &ctx(), 6, 3, 4, 6);
    let one = iwahori::IwahoriMatrix::identity(ctx(), 3, iwahori::Tag::G).unwrap();
    assert_eq!(r.act_group(&one, &f).unwrap(), f);
}
