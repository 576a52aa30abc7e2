//! Oracle tests for the plateau tower, `g1`, and the self-similar limit `g`.

mod common;

use common::{assert_contains, assert_exact, rat, sc};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use staircase_core::cantor_base::IntervalKind;
use staircase_core::scalar::Scalar;
use staircase_core::{Construction, ConstructionParams, Mode};

fn small() -> Construction {
    Construction::new(ConstructionParams::relaxed(4, 1, 2, Mode::Exact)).unwrap()
}

fn strict() -> Construction {
    Construction::new(ConstructionParams::strict_default()).unwrap()
}

fn eps(k: i32) -> Scalar {
    Scalar::pow10(k)
}

#[test]
fn subblocks_frozen_layout() {
    let c = small();
    let gap = &c.gaps_level0()[0]; // (1/16, 5/16), base 1/4
    let (blocks, slots) = c.subblocks(gap).unwrap();
    assert_eq!(blocks.len(), 4);
    assert_eq!(slots.len(), 5);
    let delta = rat(1, 65536); // (1/4)^4 / 4^4
    assert_eq!(blocks[0].delta.as_ref().unwrap().as_rational().unwrap(), &delta);
    // I(.., 1) = [1/16 + delta, 1/8 - delta], value 1/4 + delta
    assert_eq!(blocks[0].a.as_rational().unwrap(), &(rat(1, 16) + &delta));
    assert_eq!(blocks[0].b.as_rational().unwrap(), &(rat(1, 8) - &delta));
    assert_eq!(
        blocks[0].base_value.as_ref().unwrap().as_rational().unwrap(),
        &(rat(1, 4) + &delta)
    );
    assert_eq!(
        blocks[1].base_value.as_ref().unwrap().as_rational().unwrap(),
        &(rat(1, 4) - &delta)
    );
    // values alternate +d, -d, ... ending at -d for even N
    for (i, b) in blocks.iter().enumerate() {
        let v = b.base_value.as_ref().unwrap().as_rational().unwrap().clone();
        let expect = if i % 2 == 0 { rat(1, 4) + &delta } else { rat(1, 4) - &delta };
        assert_eq!(v, expect);
        assert_eq!(b.kind, IntervalKind::Plateau);
    }
    // partition: blocks + slots tile the gap exactly
    let mut total = BigRational::zero();
    for b in blocks.iter().chain(slots.iter()) {
        total += b.b.as_rational().unwrap() - b.a.as_rational().unwrap();
    }
    assert_eq!(total, rat(1, 4));
    // boundary slots have length delta, interior slots 2 delta
    let slot_lens: Vec<BigRational> = slots
        .iter()
        .map(|s| s.b.as_rational().unwrap() - s.a.as_rational().unwrap())
        .collect();
    assert_eq!(slot_lens[0], delta);
    assert_eq!(slot_lens[4], delta);
    for sl in &slot_lens[1..4] {
        assert_eq!(sl, &(&delta * BigRational::from_integer(2.into())));
    }
}

#[test]
fn phi_n_zero_equals_phi0() {
    let c = small();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x = BigRational::new(BigInt::from(rng.random_range(0u64..=1 << 20)), BigInt::from(1u64 << 20));
        let a = c.phi_n_eval(&Scalar::Exact(x.clone()), 0).unwrap();
        let b = c.phi0_eval(&Scalar::Exact(x)).unwrap();
        assert_eq!(a.value.mid_rational(), b.value.mid_rational());
        assert_eq!(a.err.mid_rational(), b.err.mid_rational());
    }
}

#[test]
fn phi_1_frozen_block_value() {
    let c = small();
    // 3/32 is the midpoint of I((1/16, 5/16), 1)
    let r = c.phi_n_eval(&sc(3, 32), 1).unwrap();
    assert_exact(&r, &(rat(1, 4) + rat(1, 65536)));
}

#[test]
fn phi_n_fixes_base_set_points() {
    let c = small();
    let kids = c.children_at_depth(2).unwrap();
    for k in kids.iter().take(6) {
        for x in [&k.a, &k.b] {
            let base = c.phi0_eval(x).unwrap();
            for n in 1..=3 {
                let r = c.phi_n_eval(x, n).unwrap();
                assert_eq!(r.value.mid_rational(), base.value.mid_rational());
                assert!(r.err.is_zero());
            }
        }
    }
}

#[test]
fn phi_1_minus_phi0_bounded_by_delta() {
    // |phi1 - phi0| <= delta on each gap, with equality on blocks
    let c = small();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for gap in c.gaps_level0() {
        let delta = gap.delta.as_ref().unwrap().as_rational().unwrap().clone();
        let a = gap.a.as_rational().unwrap().clone();
        let len = gap.b.as_rational().unwrap() - &a;
        for _ in 0..50 {
            let t = BigRational::new(BigInt::from(rng.random_range(1u64..(1 << 20))), BigInt::from(1u64 << 20));
            let x = Scalar::Exact(&a + &len * t);
            let p1 = c.phi_n_eval(&x, 1).unwrap();
            let p0 = c.phi0_eval(&x).unwrap();
            let diff = (p1.value.mid_rational() - p0.value.mid_rational()).abs();
            assert!(diff <= delta, "diff {diff} > delta {delta}");
        }
    }
}

#[test]
fn phi_n_successive_difference_decays_geometrically() {
    // |phi_n - phi_(n-1)| <= (b-a)^(2/alpha) / N^((n-1) 2/alpha) / N^(2/alpha)
    let c = small();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let gap = &c.gaps_level0()[1];
    let a = gap.a.as_rational().unwrap().clone();
    let len = gap.b.as_rational().unwrap() - &a;
    let n4 = rat(1, 256); // N^(2/alpha) = 4^4
    let base_bound = rat(1, 65536); // (1/4)^4 / 4^4
    for n in 2u32..=3 {
        let mut bound = base_bound.clone();
        for _ in 1..n {
            bound /= &n4; // actually divides by N^(2/alpha) per level
        }
        for _ in 0..30 {
            let t = BigRational::new(BigInt::from(rng.random_range(1u64..(1 << 16))), BigInt::from(1u64 << 16));
            let x = Scalar::Exact(&a + &len * t);
            let hi = c.phi_n_eval(&x, n).unwrap();
            let lo = c.phi_n_eval(&x, n - 1).unwrap();
            let diff = (hi.value.mid_rational() - lo.value.mid_rational()).abs()
                - hi.err.upper_rational()
                - lo.err.upper_rational();
            assert!(diff <= bound, "n = {n}: certified diff {diff} > bound {bound}");
        }
    }
}

#[test]
fn g1_endpoints_exact() {
    let c = small();
    assert_exact(&c.g1_eval(&Scalar::zero(), &eps(-12)).unwrap(), &rat(0, 1));
    assert_exact(&c.g1_eval(&Scalar::one(), &eps(-12)).unwrap(), &rat(1, 1));
}

#[test]
fn g1_center_is_exact_half() {
    // 1/2 is the center of the middle slot of the middle gap
    let c = small();
    let r = c.g1_eval(&sc(1, 2), &eps(-12)).unwrap();
    assert_exact(&r, &rat(1, 2));
}

#[test]
fn g1_range_strictly_inside_unit() {
    let c = small();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let num = rng.random_range(1u64..(1 << 24));
        let x = Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(1u64 << 24)));
        let r = c.g1_eval(&x, &eps(-12)).unwrap();
        let (lo, hi) = r.bounds();
        assert!(lo > BigRational::zero(), "g1 not positive at {}", x.to_text());
        assert!(hi < BigRational::one(), "g1 not below one at {}", x.to_text());
    }
}

#[test]
fn g1_converges_from_phi_levels() {
    // |g1 - phi_n| shrinks with n (checked through enclosures)
    let c = small();
    let x = sc(7, 64);
    let g1 = c.g1_eval(&x, &eps(-14)).unwrap();
    let mut last = BigRational::one();
    for n in [0u32, 1, 2] {
        let p = c.phi_n_eval(&x, n).unwrap();
        let gap = (g1.value.mid_rational() - p.value.mid_rational()).abs();
        assert!(gap <= &last + eps(-12).mid_rational());
        last = gap;
    }
}

#[test]
fn g_endpoints_exact() {
    let c = small();
    assert_exact(&c.g_eval(&Scalar::zero(), &eps(-12), None).unwrap(), &rat(0, 1));
    assert_exact(&c.g_eval(&Scalar::one(), &eps(-12), None).unwrap(), &rat(1, 1));
}

#[test]
fn g_center_fixed_point() {
    let c = small();
    let r = c.g_eval(&sc(1, 2), &eps(-15), None).unwrap();
    assert_contains(&r, &rat(1, 2));
    assert!(r.err.upper_rational() <= eps(-15).mid_rational());
    // the descent loops through the symmetric middle slot: frames pile up
    assert!(r.address.tier() >= 2, "expected nested transitional frames");
}

#[test]
fn g_equals_g1_off_transitional_support() {
    let c = small();
    // base-set points and block endpoints lie outside every slot
    let mut points: Vec<Scalar> = Vec::new();
    for k in c.children_at_depth(2).unwrap().iter().take(5) {
        points.push(k.a.clone());
        points.push(k.b.clone());
    }
    let (blocks, _) = c.subblocks(&c.gaps_level0()[0]).unwrap();
    for b in &blocks {
        points.push(b.a.clone());
        points.push(b.b.clone());
    }
    for x in &points {
        let a = c.g_eval(x, &eps(-12), None).unwrap();
        let b = c.g1_eval(x, &eps(-12)).unwrap();
        assert_eq!(a.value.mid_rational(), b.value.mid_rational());
        assert!(a.err.is_zero() && b.err.is_zero());
    }
}

#[test]
fn g_max_tier_one_is_g1() {
    let c = small();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..100 {
        let num = rng.random_range(0u64..=1 << 20);
        let x = Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(1u64 << 20)));
        let a = c.g_eval(&x, &eps(-12), Some(1)).unwrap();
        let b = c.g1_eval(&x, &eps(-12)).unwrap();
        assert_eq!(a.value.mid_rational(), b.value.mid_rational());
        assert_eq!(a.err.mid_rational(), b.err.mid_rational());
    }
}

#[test]
fn g_symmetry_about_center() {
    let c = small();
    let e = eps(-12);
    let two_eps = rat(2, 1) * e.mid_rational();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let num = rng.random_range(1u64..(1 << 20));
        let x = BigRational::new(BigInt::from(num), BigInt::from(1u64 << 20));
        let gx = c.g_eval(&Scalar::Exact(x.clone()), &e, None).unwrap();
        let gr = c.g_eval(&Scalar::Exact(BigRational::one() - &x), &e, None).unwrap();
        let s = (gx.value.mid_rational() + gr.value.mid_rational() - BigRational::one()).abs();
        assert!(s <= two_eps, "symmetry defect {s} at {x}");
    }
}

#[test]
fn g_range_strict_mode() {
    let c = strict();
    let e = eps(-12);
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..50 {
        let num = rng.random_range(1u64..(1 << 30));
        let x = Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(1u64 << 30)));
        let r = c.g_eval(&x, &e, None).unwrap();
        let (lo, hi) = r.bounds();
        assert!(lo > BigRational::zero() && hi < BigRational::one());
    }
}

#[test]
fn g_minus_g1_bounded_inside_blocks() {
    // strict mode: |g - g1| < 4 (b-a)^(2/alpha) / N^(4/alpha) off the
    // first-level slots
    let c = strict();
    let gap = c.gap_record_at(0, 0, 1).unwrap();
    let (blocks, _) = c.subblocks(&gap).unwrap();
    let glen = gap.b.as_rational().unwrap() - gap.a.as_rational().unwrap();
    // bound = 4 * len^4 / N^8 for alpha = 1/2
    let n8 = BigRational::from_integer(BigInt::from(128u64).pow(8));
    let len4 = glen.clone() * &glen * &glen * &glen;
    let bound = rat(4, 1) * len4 / n8;
    let tol = Scalar::Exact(&bound / BigRational::from_integer(1000.into()));
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..25 {
        let bi = rng.random_range(0..blocks.len());
        let blk = &blocks[bi];
        let t = BigRational::new(BigInt::from(rng.random_range(1u64..(1 << 16))), BigInt::from(1u64 << 16));
        let x = Scalar::Exact(
            blk.a.as_rational().unwrap()
                + (blk.b.as_rational().unwrap() - blk.a.as_rational().unwrap()) * t,
        );
        let gv = c.g_eval(&x, &tol, None).unwrap();
        let g1v = c.g1_eval(&x, &tol).unwrap();
        let diff = (gv.value.mid_rational() - g1v.value.mid_rational()).abs()
            + gv.err.upper_rational()
            + g1v.err.upper_rational();
        assert!(diff < bound, "certified diff {diff} >= bound {bound}");
    }
}

#[test]
fn frame_scale_decay() {
    // after k transitional recursions the composed |scale| < (4/N^4)^k
    let c = small();
    let r = c.g_eval(&sc(1, 2), &eps(-30), None).unwrap();
    let frames = &r.address.frames;
    assert!(frames.len() >= 2);
    let bound_base = rat(4, 1) / BigRational::from_integer(BigInt::from(4u64).pow(4));
    let mut composed = BigRational::one();
    let mut bound = BigRational::one();
    for f in frames {
        let slen = f.domain_b.mid_rational() - f.domain_a.mid_rational();
        assert_eq!(f.scale.mid_rational().abs(), slen, "|scale| equals slot length");
        composed *= f.scale.mid_rational().abs();
        bound *= &bound_base;
        assert!(composed < bound, "composed scale fails the per-tier bound");
    }
}

#[test]
fn enumerate_transitional_small_cutoff() {
    let c = small();
    // min_len = 1/65536 = delta of a level-0 gap: five slots per gap qualify
    let comps = c.enumerate_transitional(1, &sc(1, 65536)).unwrap();
    assert_eq!(comps.len(), 15, "three gaps, N + 1 slots each");
    // sorted, and |g(b) - g(a)| = b - a on every component
    for w in comps.windows(2) {
        assert!(w[0].b.mid_rational() <= w[1].a.mid_rational());
    }
    for t in &comps {
        let dlen = t.b.mid_rational() - t.a.mid_rational();
        let dval = (t.g_at_b.mid_rational() - t.g_at_a.mid_rational()).abs();
        assert_eq!(dlen, dval);
        assert_eq!(t.tier, 1);
    }
    // empty when the cutoff exceeds the largest slot
    let comps = c.enumerate_transitional(1, &sc(1, 8192)).unwrap();
    assert!(comps.is_empty());
}

#[test]
fn enumerate_transitional_tier2_consistency() {
    let c = small();
    let min2 = Scalar::Exact(rat(1, 1) / BigRational::from_integer(BigInt::from(10u64).pow(11)));
    let tier2 = c.enumerate_transitional(2, &min2).unwrap();
    assert!(!tier2.is_empty(), "expected visible tier-2 components");
    // independent recount: every tier-1 slot (any length >= min2) hosts a
    // scaled unit copy, so its qualifying inner slots are the tier-1 slots
    // of the unit structure above the rescaled cutoff
    let tier1_all = c.enumerate_transitional(1, &min2).unwrap();
    let mut expected = 0usize;
    for slot in &tier1_all {
        let slen = slot.b.mid_rational() - slot.a.mid_rational();
        let inner_cut = Scalar::Exact(min2.mid_rational() / &slen);
        let inner = c.enumerate_transitional(1, &inner_cut).unwrap();
        expected += inner.len();
    }
    assert_eq!(tier2.len(), expected, "tier-2 count disagrees with per-slot recount");
    for t in &tier2 {
        assert!(tier1_all.iter().any(|s| {
            s.a.mid_rational() <= t.a.mid_rational() && t.b.mid_rational() <= s.b.mid_rational()
        }));
        let dlen = t.b.mid_rational() - t.a.mid_rational();
        let dval = (t.g_at_b.mid_rational() - t.g_at_a.mid_rational()).abs();
        assert_eq!(dlen, dval);
    }
}

#[test]
fn enumeration_budget_respected() {
    let mut p = ConstructionParams::relaxed(4, 1, 2, Mode::Exact);
    p.enumeration_budget = 4;
    let c = Construction::new(p).unwrap();
    assert!(c.enumerate_transitional(1, &sc(1, 65536)).is_err());
}

#[test]
fn slot_endpoint_values_agree_with_blocks() {
    // the linear slot value at a slot endpoint equals the adjacent block
    // value (shared-endpoint consistency)
    let c = small();
    let gap = &c.gaps_level0()[0];
    let (blocks, slots) = c.subblocks(gap).unwrap();
    for (i, slot) in slots.iter().enumerate() {
        let left_val = if i == 0 {
            gap.base_value.clone().unwrap()
        } else {
            blocks[i - 1].base_value.clone().unwrap()
        };
        let r = c.g1_eval(&slot.a, &eps(-12)).unwrap();
        assert_eq!(r.value.mid_rational(), left_val.mid_rational());
    }
}
