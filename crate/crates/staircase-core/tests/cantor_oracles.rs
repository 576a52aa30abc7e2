//! Oracle tests for the base set and its CDF: frozen values computed by
//! independent direct-formula evaluation, plus sampled structural
//! properties.

mod common;

use common::{assert_contains, assert_exact, rat, sc};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use staircase_core::cantor_base::IntervalKind;
use staircase_core::scalar::{NumCtx, Ordering4, Scalar};
use staircase_core::{Construction, ConstructionParams, Mode};

fn small() -> Construction {
    Construction::new(ConstructionParams::relaxed(4, 1, 2, Mode::Exact)).unwrap()
}

/// Independent oracle: child start positions straight from the defining
/// formula `(j-1) * (1/N + (1/(N-1)) (1/N - N^(-1/alpha)))`, composed
/// affinely for deeper levels.
fn oracle_children(n: i64, q: u32, depth: u32) -> Vec<(BigRational, BigRational)> {
    let nr = BigRational::from_integer(BigInt::from(n));
    let ell = BigRational::new(BigInt::one(), BigInt::from(n).pow(q));
    let step = (nr.recip()
        + (BigRational::new(BigInt::one(), BigInt::from(n - 1)))
            * (nr.recip() - ell.clone()))
        .clone();
    let mut intervals = vec![(BigRational::zero(), BigRational::one())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (a, b) in &intervals {
            let len = b - a;
            for j in 1..=n {
                let start = a + &len * &step * BigRational::from_integer(BigInt::from(j - 1));
                let end = &start + &len * &ell;
                next.push((start, end));
            }
        }
        intervals = next;
    }
    intervals
}

/// Independent oracle for the CDF: linear-scan digit descent on the oracle
/// child table, one level at a time.
fn oracle_phi0(n: i64, q: u32, x: &BigRational) -> BigRational {
    assert!(*x >= BigRational::zero() && *x <= BigRational::one());
    let level = oracle_children(n, q, 1);
    let mut acc = BigRational::zero();
    let mut scale = BigRational::one();
    let mut u = x.clone();
    let mass = BigRational::new(BigInt::one(), BigInt::from(n));
    for _ in 0..200 {
        if u.is_zero() {
            return acc;
        }
        if u.is_one() {
            return acc + scale;
        }
        let mut found = None;
        for (j, (a, b)) in level.iter().enumerate() {
            if &u >= a && &u <= b {
                found = Some(j);
                break;
            }
            if &u < a {
                // inside the gap left of child j
                return acc + &scale * &mass * BigRational::from_integer(BigInt::from(j as i64));
            }
        }
        let j = found.expect("x lies in a child or a gap");
        let (a, b) = &level[j];
        acc += &scale * &mass * BigRational::from_integer(BigInt::from(j as i64));
        scale *= &mass;
        u = (&u - a) / (b - a);
    }
    panic!("oracle descent did not terminate (non-terminating point sampled?)");
}

#[test]
fn children_depth_one_matches_frozen_values() {
    let c = small();
    let kids = c.children_at_depth(1).unwrap();
    let expect = [(0, 1, 1, 16), (5, 16, 6, 16), (10, 16, 11, 16), (15, 16, 1, 1)];
    assert_eq!(kids.len(), 4);
    for (k, (an, ad, bn, bd)) in kids.iter().zip(expect) {
        assert_eq!(k.kind, IntervalKind::Child);
        assert_eq!(k.depth, 1);
        assert_eq!(k.a.as_rational().unwrap(), &rat(an, ad));
        assert_eq!(k.b.as_rational().unwrap(), &rat(bn, bd));
    }
}

#[test]
fn children_depth_zero_is_unit_interval() {
    let c = small();
    let kids = c.children_at_depth(0).unwrap();
    assert_eq!(kids.len(), 1);
    assert_eq!(kids[0].a.as_rational().unwrap(), &rat(0, 1));
    assert_eq!(kids[0].b.as_rational().unwrap(), &rat(1, 1));
}

#[test]
fn children_depth_two_match_formula_oracle() {
    let c = small();
    let kids = c.children_at_depth(2).unwrap();
    let oracle = oracle_children(4, 2, 2);
    assert_eq!(kids.len(), 16);
    assert_eq!(oracle.len(), 16);
    let len = rat(1, 256);
    for (k, (oa, ob)) in kids.iter().zip(&oracle) {
        assert_eq!(k.a.as_rational().unwrap(), oa);
        assert_eq!(k.b.as_rational().unwrap(), ob);
        assert_eq!(&(ob - oa), &len);
    }
    assert_eq!(kids[0].a.as_rational().unwrap(), &rat(0, 1));
    assert_eq!(kids[0].b.as_rational().unwrap(), &rat(1, 256));
}

#[test]
fn children_depth_limit_errors() {
    let mut p = ConstructionParams::relaxed(4, 1, 2, Mode::Exact);
    p.max_enum_depth = 3;
    let c = Construction::new(p).unwrap();
    assert!(c.children_at_depth(4).is_err());
}

#[test]
fn phi0_cdf_endpoints() {
    let c = small();
    assert_exact(&c.phi0_eval(&Scalar::zero()).unwrap(), &rat(0, 1));
    assert_exact(&c.phi0_eval(&Scalar::one()).unwrap(), &rat(1, 1));
}

#[test]
fn phi0_frozen_values() {
    let c = small();
    // 1/2 sits in the middle gap: mass of two children to the left
    assert_exact(&c.phi0_eval(&sc(1, 2)).unwrap(), &rat(1, 2));
    // 1/32 recurses once into child 1 and lands in its middle gap
    assert_exact(&c.phi0_eval(&sc(1, 32)).unwrap(), &rat(1, 8));
}

#[test]
fn phi0_out_of_domain() {
    let c = small();
    assert!(c.phi0_eval(&sc(-1, 2)).is_err());
    assert!(c.phi0_eval(&sc(3, 2)).is_err());
}

#[test]
fn phi0_matches_digit_descent_oracle() {
    let c = small();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..300 {
        let num = rng.random_range(0u64..=1 << 20);
        let x = BigRational::new(BigInt::from(num), BigInt::from(1u64 << 20));
        let got = c.phi0_eval(&Scalar::Exact(x.clone())).unwrap();
        let want = oracle_phi0(4, 2, &x);
        assert_contains(&got, &want);
        if got.err.is_zero() {
            assert_eq!(got.value.as_rational().unwrap(), &want, "x = {x}");
        }
    }
}

#[test]
fn phi0_monotone_and_symmetric() {
    let c = small();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let one = BigRational::one();
    for _ in 0..300 {
        let a = BigRational::new(BigInt::from(rng.random_range(0u64..=1 << 24)), BigInt::from(1u64 << 24));
        let b = BigRational::new(BigInt::from(rng.random_range(0u64..=1 << 24)), BigInt::from(1u64 << 24));
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        let fx = c.phi0_eval(&Scalar::Exact(x.clone())).unwrap();
        let fy = c.phi0_eval(&Scalar::Exact(y.clone())).unwrap();
        // monotone within enclosures
        let (fx_lo, _) = fx.bounds();
        let (_, fy_hi) = fy.bounds();
        assert!(fx_lo <= fy_hi, "monotonicity violated at {x}, {y}");
        // reflection symmetry phi0(1-x) = 1 - phi0(x)
        let fr = c.phi0_eval(&Scalar::Exact(&one - &x)).unwrap();
        if fx.err.is_zero() && fr.err.is_zero() {
            let s = fx.value.as_rational().unwrap() + fr.value.as_rational().unwrap();
            assert_eq!(s, one, "symmetry violated at {x}");
        }
    }
}

#[test]
fn phi0_self_similarity() {
    let c = small();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    // phi0(x / N^(1/alpha)) = phi0(x) / N
    for _ in 0..100 {
        let x = BigRational::new(BigInt::from(rng.random_range(0u64..=1 << 16)), BigInt::from(1u64 << 16));
        let shrunk = &x / BigRational::from_integer(16.into());
        let f_big = c.phi0_eval(&Scalar::Exact(x)).unwrap();
        let f_small = c.phi0_eval(&Scalar::Exact(shrunk)).unwrap();
        if f_big.err.is_zero() && f_small.err.is_zero() {
            assert_eq!(
                f_small.value.as_rational().unwrap() * BigRational::from_integer(4.into()),
                f_big.value.as_rational().unwrap().clone()
            );
        }
    }
}

#[test]
fn phi0_holder_ratio_bounded() {
    // |phi0(x) - phi0(y)| <= 1.05 * sup_ratio * |x-y|^alpha with the sampled
    // sup attained at (0, ell^d); the true constant for these parameters is 1
    let c = small();
    let ctx = NumCtx::guarded(128);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..500 {
        let a = BigRational::new(BigInt::from(rng.random_range(0u64..=1 << 24)), BigInt::from(1u64 << 24));
        let b = BigRational::new(BigInt::from(rng.random_range(0u64..=1 << 24)), BigInt::from(1u64 << 24));
        if a == b {
            continue;
        }
        let (x, y) = if a < b { (a, b) } else { (b, a) };
        let fx = c.phi0_eval(&Scalar::Exact(x.clone())).unwrap();
        let fy = c.phi0_eval(&Scalar::Exact(y.clone())).unwrap();
        let diff = (fy.value.mid_rational() - fx.value.mid_rational()).abs()
            - fx.err.upper_rational()
            - fy.err.upper_rational();
        if !diff.is_positive() {
            continue;
        }
        let dist = Scalar::Exact(&y - &x);
        let denom = dist.pow_rational(1, 2, &ctx).unwrap();
        let ratio = diff / denom.lower_rational();
        assert!(
            ratio <= rat(105, 100),
            "Hölder ratio {ratio} exceeds guard at ({x}, {y})"
        );
    }
}

#[test]
fn gaps_level0_frozen() {
    let c = small();
    let gaps = c.gaps_level0();
    assert_eq!(gaps.len(), 3, "N children leave N - 1 gaps");
    let expect = [
        (1, 16, 5, 16, 1, 4),
        (6, 16, 10, 16, 2, 4),
        (11, 16, 15, 16, 3, 4),
    ];
    for (g, (an, ad, bn, bd, vn, vd)) in gaps.iter().zip(expect) {
        assert_eq!(g.kind, IntervalKind::Gap);
        assert_eq!(g.a.as_rational().unwrap(), &rat(an, ad));
        assert_eq!(g.b.as_rational().unwrap(), &rat(bn, bd));
        assert_eq!(g.base_value.as_ref().unwrap().as_rational().unwrap(), &rat(vn, vd));
        // sharper bound: gap length < 1/(N-1); guard bound 2^(alpha/2)/N
        let len = g.b.sub(&g.a, c.ctx());
        assert_eq!(len.as_rational().unwrap(), &rat(1, 4));
        assert!(len.compare(&sc(1, 3)).is_lt());
        let guard = Scalar::from_int(2)
            .pow_rational(1, 4, &NumCtx::guarded(96))
            .unwrap()
            .div(&Scalar::from_int(4), &NumCtx::guarded(96))
            .unwrap();
        assert_eq!(len.compare(&guard), Ordering4::Less);
    }
}

#[test]
fn guarded_mode_encloses_exact_cdf() {
    let exact = small();
    let guarded =
        Construction::new(ConstructionParams::relaxed(4, 1, 2, Mode::Guarded)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let x = BigRational::new(BigInt::from(rng.random_range(0u64..=1 << 12)), BigInt::from(1u64 << 12));
        let e = exact.phi0_eval(&Scalar::Exact(x.clone())).unwrap();
        let g = guarded.phi0_eval(&Scalar::Exact(x.clone())).unwrap();
        if e.err.is_zero() {
            assert_contains(&g, e.value.as_rational().unwrap());
        }
    }
}
