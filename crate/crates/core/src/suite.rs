//! The verification suite run by the command-line `suite` command.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::base_change::{tensor_rep, ResScalarsContext};
use crate::iwahori::{self, FactorKind, OneParamFactor};
use crate::linalg::{self, Mat};
use crate::padic::{PadicScalar, QpCtx};
use crate::principal_series::{unipotent_vars, xz_decompose, Character, PrincipalSeries};
use crate::sample;
use crate::tate::{Mono, TateSeries};
use crate::unramified::UnramifiedField;
use crate::verma::{self, LieAction};
use crate::weyl::{chi_w, conjugate_root, WeylElement};

#[derive(Clone, Debug, Serialize)]
pub struct SuiteConfig {
    pub p: u64,
    pub precision: u32,
    pub truncation: u32,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { p: 7, precision: 12, truncation: 6, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
    pub millis: u128,
}

type Check = std::result::Result<(usize, String), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub const NAMES: [&str; 12] = [
    "xz reconstruction",
    "gl2 closed forms",
    "integrality of actions",
    "homomorphism property",
    "defining relation",
    "kostant multiplicities",
    "irreducibility vs rank",
    "torus eigenvalues",
    "weyl conjugation",
    "base change identities",
    "analyticity boundary",
    "congruence filter",
];

pub fn run_suite(cfg: &SuiteConfig) -> std::result::Result<Vec<Outcome>, String> {
    let ctx = QpCtx::new(cfg.p, cfg.precision).map_err(err)?;
    let checks: [fn(&SuiteConfig, QpCtx) -> Check; 12] = [
        xz_reconstruction,
        gl2_closed_forms,
        integrality,
        homomorphism,
        defining_relation,
        kostant,
        irreducibility_vs_rank,
        torus_eigenvalues,
        weyl_conjugation,
        base_change_identities,
        analyticity_boundary,
        congruence_filter,
    ];
    let mut out = Vec::new();
    for (k, check) in checks.iter().enumerate() {
        let t0 = Instant::now();
        let r = check(cfg, ctx);
        let millis = t0.elapsed().as_millis();
        let (passed, cases, detail) = match r {
            Ok((c, d)) => (true, c, d),
            Err(d) => (false, 0, d),
        };
        out.push(Outcome { id: k as u32 + 1, name: NAMES[k], passed, cases, detail, millis });
    }
    Ok(out)
}

fn rng_for(cfg: &SuiteConfig, id: u64) -> rand_chacha::ChaCha8Rng {
    sample::rng(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(id))
}

fn mat_series_mul(a: &Mat<TateSeries<PadicScalar>>, b: &Mat<TateSeries<PadicScalar>>) -> Mat<TateSeries<PadicScalar>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = a[i][0].mul(&b[0][j]);
                    for k in 1..n {
                        acc = acc.add(&a[i][k].mul(&b[k][j]));
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn xz_reconstruction(cfg: &SuiteConfig, ctx: QpCtx) -> Check {
    let d = cfg.truncation;
    let mut cases = 0;
    for n in 2..=4 {
        for i in 1..n {
            for j in i + 1..=n {
                let xz = xz_decompose::<PadicScalar>(&ctx, n, i, j, d, false).map_err(err)?;
                let y = xz.vars.index_of("y").unwrap();
                let prod = mat_series_mul(&xz.x, &xz.z);
                for r in 0..n {
                    for s in 0..n {
                        ensure!(prod[r][s].sub(&xz.lhs[r][s]).is_zero(), "n={n} ({i},{j}): XZ differs at ({},{})", r + 1, s + 1);
                        let without_y = xz.z[r][s].coeff_in_var(y, 0).map_err(err)?;
                        if r == s {
                            let one = TateSeries::one(&xz.vars, &ctx, d);
                            ensure!(without_y.sub(&one).is_zero(), "n={n} ({i},{j}): z_rr not 1 mod y");
                        } else if r < s {
                            ensure!(without_y.is_zero(), "n={n} ({i},{j}): z_rs not 0 mod y");
                        }
                        ensure!(xz.x[r][s].min_val() >= 0, "n={n} ({i},{j}): X not integral");
                    }
                }
                cases += 1;
            }
        }
    }
    Ok((cases, format!("{cases} positions, D={d}")))
}

fn gl2_closed_forms(cfg: &SuiteConfig, ctx: QpCtx) -> Check {
    let d = cfg.truncation;
    let xz = xz_decompose::<PadicScalar>(&ctx, 2, 1, 2, d, false).map_err(err)?;
    let vars = &xz.vars;
    let (a, y) = (vars.index_of("a[2,1]").unwrap(), vars.index_of("y").unwrap());
    let mono = |ea: u32, ey: u32| {
        let mut e = vec![0; vars.len()];
        e[a] = ea;
        e[y] = ey;
        Mono::from_exps(&e)
    };
    let one = PadicScalar::one(ctx);
    let series = |terms: Vec<(Mono, PadicScalar)>| TateSeries::from_terms(vars, &ctx, d, terms);
    // (1 - ya)^-1 = sum (ya)^k
    let geo: Vec<_> = (0..=d / 2).map(|k| (mono(k, k), one)).collect();
    let x21 = series((0..=d / 2).filter(|k| 2 * k + 1 <= d).map(|k| (mono(k + 1, k), one)).collect());
    let z11 = series(vec![(mono(0, 0), one), (mono(1, 1), one.neg())]);
    let z12 = series(vec![(mono(0, 1), one.neg())]);
    let z22 = series(geo);
    for (name, got, want) in [
        ("x21", &xz.x[1][0], &x21),
        ("z11", &xz.z[0][0], &z11),
        ("z12", &xz.z[0][1], &z12),
        ("z22", &xz.z[1][1], &z22),
    ] {
        ensure!(got.sub(want).is_zero(), "{name} = {got}, expected {want}");
    }
    Ok((4, format!("D={d}")))
}

fn random_factor<R: Rng>(rng: &mut R, ctx: QpCtx, n: usize) -> OneParamFactor {
    let kinds = iwahori::lazard_order(n);
    let kind = *kinds.choose(rng).unwrap();
    let param = match kind {
        FactorKind::Lower(..) => sample::zp(rng, ctx),
        FactorKind::Diag(_) => sample::one_plus_pzp(rng, ctx),
        FactorKind::Upper(..) => sample::pzp(rng, ctx),
    };
    OneParamFactor::new(kind, param).expect("parameter sampled in its domain")
}

fn integrality(cfg: &SuiteConfig, ctx: QpCtx) -> Check {
    let d = cfg.truncation;
    let mut rng = rng_for(cfg, 3);
    for case in 0..200 {
        let n = 2 + case % 2;
        let chi = Character::new((0..n).map(|_| sample::zp(&mut rng, ctx)).collect());
        let rep = PrincipalSeries::standard(n, chi, &ctx).map_err(err)?;
        let nv = rep.vars().len();
        let f: TateSeries<PadicScalar> = sample::integral_poly(&mut rng, rep.vars(), &ctx, d, nv, d, 6);
        let factor = random_factor(&mut rng, ctx, n);
        let g = rep.act_factor(&factor, &f).map_err(err)?;
        ensure!(g.min_val() >= 0, "case {case}: {:?} produced valuation {}", factor.kind, g.min_val());
    }
    Ok((200, format!("n in {{2,3}}, D={d}")))
}

fn homomorphism(cfg: &SuiteConfig, ctx: QpCtx) -> Check {
    let d = cfg.truncation;
    let mut rng = rng_for(cfg, 4);
    let chi = Character::new((0..2).map(|_| sample::zp(&mut rng, ctx)).collect());
    let rep = PrincipalSeries::standard(2, chi, &ctx).map_err(err)?;
    let mut worst = i64::MAX;
    for case in 0..50 {
        let f: TateSeries<PadicScalar> = sample::integral_poly(&mut rng, rep.vars(), &ctx, d, 1, 2, 3);
        let g = iwahori::random_g(&mut rng, ctx, 2).map_err(err)?;
        let h = iwahori::random_g(&mut rng, ctx, 2).map_err(err)?;
        let lhs = rep.act_group(&g, &rep.act_group(&h, &f).map_err(err)?).map_err(err)?;
        let rhs = rep.act_group(&g.mul(&h).map_err(err)?, &f).map_err(err)?;
        match lhs.agreement(&rhs) {
            Some(k) => worst = worst.min(k),
            None => return Err(format!("case {case}: g(hf) and (gh)f differ beyond the declared remainder")),
        }
    }
    Ok((50, format!("n=2, D={d}, agreement >= {worst} digits")))
}

fn defining_relation(cfg: &SuiteConfig, ctx: QpCtx) -> Check {
    let mut rng = rng_for(cfg, 5);
    let mut worst = i64::MAX;
    for case in 0..50 {
        let n = 2 + case % 2;
        let d = cfg.truncation + if n == 2 { 2 } else { 6 };
        let need = cfg.precision as i64 - cfg.truncation as i64;
        let chi = Character::new((0..n).map(|_| sample::zp(&mut rng, ctx)).collect());
        let rep = PrincipalSeries::standard(n, chi, &ctx).map_err(err)?;
        let nv = rep.vars().len();
        let f: TateSeries<PadicScalar> = sample::integral_poly(&mut rng, rep.vars(), &ctx, d, nv, 2, 4);
        let h = iwahori::random_g(&mut rng, ctx, n).map_err(err)?;
        let u = iwahori::random_u(&mut rng, ctx, n).map_err(err)?;
        let lhs = rep.evaluate_at(&rep.act_group(&h, &f).map_err(err)?, u.entries()).map_err(err)?;
        let (u2, q) = iwahori::split_uq0(&h.inverse().map_err(err)?.mul(&u).map_err(err)?).map_err(err)?;
        let fv = rep.evaluate_at(&f, u2.entries()).map_err(err)?;
        let rhs = fv.value.mul(&rep.chi_of_inverse(q.entries()).map_err(err)?);
        let diff = lhs.value.sub(&rhs);
        let digits = lhs.certified.min(fv.certified);
        ensure!(digits >= need, "case {case}: only {digits} certified digits, need {need}");
        ensure!(diff.is_zero() || diff.val().unwrap() >= digits, "case {case}: values differ at valuation {:?}", diff.val());
        worst = worst.min(digits);
    }
    Ok((50, format!("n in {{2,3}}, D = {} / {}, agreement >= {worst} digits", cfg.truncation + 2, cfg.truncation + 6)))
}

fn brute_kostant(n: usize, max_height: i64) -> std::collections::HashMap<Vec<i64>, u64> {
    let roots = iwahori::lower_roots(n);
    let mut table = std::collections::HashMap::new();
    fn go(
        idx: usize,
        roots: &[(usize, usize)],
        budget: i64,
        shift: &mut Vec<i64>,
        table: &mut std::collections::HashMap<Vec<i64>, u64>,
    ) {
        if idx == roots.len() {
            *table.entry(shift.clone()).or_insert(0) += 1;
            return;
        }
        let (i, j) = roots[idx];
        let h = (i - j) as i64;
        let mut k = 0;
        while k * h <= budget {
            shift[i - 1] += k;
            shift[j - 1] -= k;
            go(idx + 1, roots, budget - k * h, shift, table);
            shift[i - 1] -= k;
            shift[j - 1] += k;
            k += 1;
        }
    }
    go(0, &roots, max_height, &mut vec![0; n], &mut table);
    table
}

fn kostant(_cfg: &SuiteConfig, ctx: QpCtx) -> Check {
    let mut cases = 0;
    for n in 2..=4 {
        let table = brute_kostant(n, 8);
        for (shift, &count) in &table {
            ensure!(verma::kostant_count(n, shift) == count, "n={n}: shift {shift:?}");
            cases += 1;
        }
        // shifts off the root cone
        let mut bad = vec![0i64; n];
        bad[0] = 1;
        bad[n - 1] = -1;
        ensure!(verma::kostant_count(n, &bad) == 0, "n={n}: positive shift counted");
    }
    let chi = Character::<PadicScalar>::from_ints(&ctx, &[5, -3, 11]);
    let mu = verma::mu_of(&chi);
    let root = [-1i64, 0, 1];
    let xi: Vec<PadicScalar> = mu.iter().zip(root).map(|(m, r)| m.neg().sub(&PadicScalar::from_i64(ctx, r))).collect();
    let m = verma::kostant_multiplicity(&xi, &chi);
    ensure!(m == 2, "multiplicity at -mu-(e3-e1) is {m}");
    Ok((cases + 1, "n <= 4, height <= 8".into()))
}

fn irreducibility_vs_rank(cfg: &SuiteConfig, ctx: QpCtx) -> Check {
    let d = 8;
    let mut rng = rng_for(cfg, 7);
    let mut reducible = 0;
    for case in 0..20 {
        let c1 = sample::zp(&mut rng, ctx);
        let c2 = if case < 10 {
            // c2 - c1 + 1 = k
            c1.add(&PadicScalar::from_i64(ctx, (case % 6) as i64))
        } else {
            sample::zp(&mut rng, ctx)
        };
        let chi = Character::new(vec![c1, c2]);
        let crit = verma::is_irreducible(&chi);
        let rank = verma::phi_weight_rank(&chi, &ctx, d).map_err(err)?;
        ensure!(crit.irreducible != rank.reducible, "case {case}: criterion {} vs rank {}", crit.irreducible, !rank.reducible);
        reducible += rank.reducible as usize;
    }
    Ok((20, format!("n=2, D={d}, {reducible} reducible")))
}

fn torus_eigenvalues(cfg: &SuiteConfig, ctx: QpCtx) -> Check {
    let d = cfg.truncation;
    let mut rng = rng_for(cfg, 8);
    let chi = Character::new((0..3).map(|_| sample::zp(&mut rng, ctx)).collect());
    let rep = PrincipalSeries::standard(3, chi.clone(), &ctx).map_err(err)?;
    let lie = LieAction::new(&rep).map_err(err)?;
    let vars = rep.vars();
    let mut cases = 0;
    let nv = vars.len();
    let mut exps = vec![0u32; nv];
    loop {
        let total: u32 = exps.iter().sum();
        if total <= d {
            let m = TateSeries::monomial(vars, &ctx, d, Mono::from_exps(&exps), PadicScalar::one(ctx));
            for k in 1..=3 {
                let got = lie.lie_diag(k, &m).map_err(err)?;
                let ev = verma::torus_eigenvalue(&exps, k, &chi);
                ensure!(got.sub(&m.scale(&ev)).is_zero(), "k={k}, exponents {exps:?}");
                cases += 1;
            }
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == nv {
                return Ok((cases, format!("n=3, degree <= {d}")));
            }
            exps[pos] += 1;
            if exps[pos] <= d {
                break;
            }
            exps[pos] = 0;
            pos += 1;
        }
    }
}

fn elementary(ctx: QpCtx, n: usize, i: usize, j: usize, y: PadicScalar) -> Mat<PadicScalar> {
    let mut m = linalg::identity(&ctx, n);
    m[i - 1][j - 1] = y.neg();
    m
}

fn weyl_conjugation(cfg: &SuiteConfig, ctx: QpCtx) -> Check {
    let mut rng = rng_for(cfg, 9);
    let mut cases = 0;
    for n in 2..=4 {
        for w in WeylElement::all(n) {
            let wm: Mat<PadicScalar> = w.matrix(&ctx);
            for i in 1..=n {
                for j in 1..=n {
                    if i == j {
                        continue;
                    }
                    let y = sample::zp(&mut rng, ctx);
                    let (k, l) = conjugate_root(&w, i, j);
                    let lhs = linalg::mat_mul(&elementary(ctx, n, i, j, y), &wm);
                    let rhs = linalg::mat_mul(&wm, &elementary(ctx, n, k, l, y));
                    ensure!(lhs == rhs, "w={:?}, ({i},{j})", w.perm());
                    cases += 1;
                }
            }
        }
    }
    for _ in 0..20 {
        let n = rng.gen_range(2..=5);
        let all = WeylElement::all(n);
        let w = all.choose(&mut rng).unwrap();
        let w2 = all.choose(&mut rng).unwrap();
        let chi = Character::new((0..n).map(|_| sample::zp(&mut rng, ctx)).collect());
        ensure!(chi_w(&chi_w(&chi, w), w2) == chi_w(&chi, &w2.compose(w)), "composition fails for {:?}, {:?}", w.perm(), w2.perm());
        // chi^w(h) = chi(w^-1 h w) on a diagonal h
        let t: Vec<PadicScalar> = (0..n).map(|_| sample::one_plus_pzp(&mut rng, ctx)).collect();
        let mut h = linalg::identity(&ctx, n);
        for (k, x) in t.iter().enumerate() {
            h[k][k] = *x;
        }
        let wm: Mat<PadicScalar> = w.matrix(&ctx);
        let winv: Mat<PadicScalar> = w.inverse().matrix(&ctx);
        let conj = linalg::mat_mul(&winv, &linalg::mat_mul(&h, &wm));
        let diag: Vec<PadicScalar> = (0..n).map(|k| conj[k][k]).collect();
        let a = chi_w(&chi, w).on_diagonal(&t).map_err(err)?;
        let b = chi.on_diagonal(&diag).map_err(err)?;
        ensure!(a.sub(&b).is_zero(), "chi^w(h) differs from chi(w^-1 h w)");
        cases += 2;
    }
    Ok((cases, "n <= 4".into()))
}

fn base_change_identities(cfg: &SuiteConfig, ctx: QpCtx) -> Check {
    let d = 4;
    let mut rng = rng_for(cfg, 10);
    let field = UnramifiedField::new(ctx, 2).map_err(err)?;
    let source = unipotent_vars(3).map_err(err)?;
    let res = ResScalarsContext::new(&field, &source).map_err(err)?;
    for case in 0..20 {
        let f: TateSeries<PadicScalar> = sample::integral_poly(&mut rng, &source, &ctx, d, source.len(), 2, 4);
        let b = res.full_bc(&f).map_err(err)?;
        let b1 = res.holomorphic_bc(&f).map_err(err)?;
        let twisted = b1.map_coeffs(&field, |c| c.frobenius());
        ensure!(b.agreement(&b1.mul(&twisted)).is_some(), "case {case}: b(f) is not the product of twists");
        let slots = res.identify_slots(&res.tensor_form(&f).map_err(err)?).map_err(err)?;
        ensure!(b.agreement(&slots).is_some(), "case {case}: slot identification differs");
    }
    let chi = Character::new((0..2).map(|_| sample::zp(&mut rng, ctx)).collect());
    let rep = tensor_rep(&chi, 2, &field, d).map_err(err)?;
    for _ in 0..10 {
        let t = sample::one_plus_pzp(&mut rng, ctx);
        for k in 1..=2 {
            let (slotwise, via_norm) = rep.constant_eigenvalue(k, &t).map_err(err)?;
            ensure!(slotwise.sub(&via_norm).is_zero(), "constant eigenvalue mismatch at k={k}");
            let direct = crate::UnramifiedScalar::from_qp(&field, &chi.component(k, &t).map_err(err)?.pow_u(2));
            ensure!(slotwise.sub(&direct).is_zero(), "eigenvalue is not chi(t)^2");
        }
    }
    Ok((40, format!("N=2, D={d}")))
}

fn analyticity_boundary(_cfg: &SuiteConfig, _ctx: QpCtx) -> Check {
    let mut cases = 0;
    for p in [3u64, 5, 7, 11, 13] {
        let ctx = QpCtx::new(p, 8).map_err(err)?;
        for e in [1u32, 2, 3, 4, 6, 12, 13, 24] {
            for v in -3i64..=4 {
                let c = PadicScalar::from_i64(ctx, 1).mul_p_pow(v);
                let chi = Character::new(vec![c]).with_ramification(e);
                // v > e/(p-1) - 1
                let expect = (v + 1) * (p as i64 - 1) > e as i64;
                ensure!(chi.check_analytic().analytic == expect, "p={p}, e={e}, v={v}");
                cases += 1;
            }
        }
    }
    Ok((cases, "p in {3,5,7,11,13}".into()))
}

fn congruence_filter(cfg: &SuiteConfig, ctx: QpCtx) -> Check {
    let d = cfg.truncation;
    let mut rng = rng_for(cfg, 12);
    let chi = Character::new((0..3).map(|_| sample::zp(&mut rng, ctx)).collect());
    let rep = PrincipalSeries::standard(3, chi, &ctx).map_err(err)?;
    let vars = rep.vars().clone();
    let roots = iwahori::lower_roots(3);
    let alt = |m: &Mono, k: usize| {
        let mut s = 0i64;
        for (idx, &(i, j)) in roots.iter().enumerate() {
            let e = m.exp(idx) as i64;
            if j == k {
                s += e;
            }
            if i == k {
                s -= e;
            }
        }
        s
    };
    let mut large = 0;
    while (cfg.p as i64).pow(large) <= 2 * d as i64 {
        large += 1;
    }
    for case in 0..20 {
        let f: TateSeries<PadicScalar> = sample::integral_poly(&mut rng, &vars, &ctx, d, vars.len(), d, 10);
        let g: TateSeries<PadicScalar> = sample::integral_poly(&mut rng, &vars, &ctx, d, vars.len(), d, 10);
        let (a, b) = (sample::zp(&mut rng, ctx), sample::zp(&mut rng, ctx));
        for k in 1..=3 {
            for s in 0..=large {
                let pf = verma::congruence_filter(&rep, &f, k, s);
                ensure!(verma::congruence_filter(&rep, &pf, k, s).sub(&pf).is_zero(), "case {case}: not idempotent");
                let lin = verma::congruence_filter(&rep, &f.scale(&a).add(&g.scale(&b)), k, s);
                let sep = pf.scale(&a).add(&verma::congruence_filter(&rep, &g, k, s).scale(&b));
                ensure!(lin.sub(&sep).is_zero(), "case {case}: not linear");
            }
            let limit = verma::congruence_filter(&rep, &f, k, large);
            let zero_sum: Vec<_> = f.terms().iter().filter(|(m, _)| alt(m, k) == 0).map(|(m, c)| (*m, *c)).collect();
            let want = TateSeries::from_terms(&vars, &ctx, d, zero_sum);
            ensure!(limit.sub(&want).is_zero(), "case {case}: large-s filter keeps nonzero sums");
            let constant = f.constant_term().copied().unwrap_or(PadicScalar::zero(ctx));
            ensure!(limit.constant_term().copied().unwrap_or(PadicScalar::zero(ctx)) == constant, "case {case}: constant lost");
        }
    }
    Ok((20, format!("n=3, D={d}, s up to {large}")))
}
