//! Seeded random sampling of scalars, group elements and series.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::padic::{Coeff, PadicScalar, QpCtx};
use crate::tate::{Mono, TateSeries, VariableSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform element of Z_p at full precision.
pub fn zp<R: Rng>(rng: &mut R, ctx: QpCtx) -> PadicScalar {
    let m = ctx.pow(ctx.cap());
    PadicScalar::from_i128(ctx, rng.gen_range(0..m) as i128)
}

pub fn unit<R: Rng>(rng: &mut R, ctx: QpCtx) -> PadicScalar {
    loop {
        let x = zp(rng, ctx);
        if x.val() == Some(0) {
            return x;
        }
    }
}

/// Element of pZ_p.
pub fn pzp<R: Rng>(rng: &mut R, ctx: QpCtx) -> PadicScalar {
    zp(rng, ctx).mul_p_pow(1).cap_abs(ctx.cap() as i64)
}

/// Element of 1 + pZ_p.
pub fn one_plus_pzp<R: Rng>(rng: &mut R, ctx: QpCtx) -> PadicScalar {
    PadicScalar::one(ctx).add(&pzp(rng, ctx))
}

/// Small integer in `[-bound, bound]` as a scalar.
pub fn small_int<R: Rng>(rng: &mut R, ctx: QpCtx, bound: i64) -> PadicScalar {
    PadicScalar::from_i64(ctx, rng.gen_range(-bound..=bound))
}

/// Random polynomial with integral coefficients, total degree at most
/// `deg`, in the first `nvars` variables of `vars`.
pub fn integral_poly<R: Rng, C: Coeff>(
    rng: &mut R,
    vars: &Arc<VariableSet>,
    ctx: &C::Ctx,
    trunc: u32,
    nvars: usize,
    deg: u32,
    nterms: usize,
) -> TateSeries<C> {
    let qp = C::base(ctx);
    let mut terms = Vec::new();
    for _ in 0..nterms {
        let mut exps = vec![0u32; vars.len()];
        let d = rng.gen_range(0..=deg);
        for _ in 0..d {
            if nvars > 0 {
                exps[rng.gen_range(0..nvars)] += 1;
            }
        }
        terms.push((Mono::from_exps(&exps), C::from_qp(ctx, &zp(rng, qp))));
    }
    TateSeries::from_terms(vars, ctx, trunc, terms)
}
