//! The convexity-dimension experiment: sample the antiderivative on a
//! jittered grid, search the largest convex and concave restrictions,
//! box-count the winners against a convex control, and check the finite
//! two-blocks-per-gap consequence of the oscillation mechanism.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, One};

use crate::cantor_base::{Bracket, Construction, MeasuredConstants};
use crate::error::AnalysisError;
use crate::integral::Integrator;
use crate::scalar::{Ordering4, Scalar};

use super::boxdim::{box_count_points, box_count_set, dim_fit, BoxCountRow, DimFit, SetId};
use super::holder::measure_c_phi0;
use super::sample::SplitMix64;
use super::subsets::{longest_concave_subset, longest_convex_subset};
use super::PointSample;

/// Configuration of one experiment run.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentConfig {
    pub m: usize,
    pub k_lo: u32,
    pub k_hi: u32,
    pub seed: u64,
    pub cap: usize,
    /// Depth budget when locating the gap containing a sample.
    pub locate_depth: u32,
}

impl ExperimentConfig {
    pub fn new(m: usize, k_lo: u32, k_hi: u32, seed: u64) -> Self {
        ExperimentConfig { m, k_lo, k_hi, seed, cap: super::subsets::DEFAULT_SUBSET_CAP, locate_depth: 12 }
    }
}

/// Everything a run measures, plus the identically processed control.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentReport {
    pub m: usize,
    pub seed: u64,
    pub k_lo: u32,
    pub k_hi: u32,
    pub convex_subset: Vec<usize>,
    pub concave_subset: Vec<usize>,
    pub control_subset_size: usize,
    pub fit_convex: DimFit,
    pub fit_concave: DimFit,
    pub fit_control: DimFit,
    /// `(k, count_convex / 2^(alpha k), count_concave / 2^(alpha k))`.
    pub ratio_table: Vec<(u32, f64, f64)>,
    /// Finite proxy of the masked box-count constant: counts of the convex
    /// subset outside tier-1 components longer than one cell.
    pub c_g1: f64,
    /// Sup of the unmasked ratio table (convex subset).
    pub c_alpha: f64,
    pub claim_blocks_ok: bool,
    /// Largest number of blocks holding two or more subset points within a
    /// single gap.
    pub claim_blocks_max: usize,
    pub claim_detail: String,
}

/// Dyadic rounding of a value to `2^-bits`, folding the rounding into `err`.
fn round_sample(x: Scalar, value: &Scalar, err: &Scalar, bits: u32) -> PointSample {
    let scale = BigInt::from(2u32).pow(bits);
    let v = value.mid_rational();
    let rounded = BigRational::new((v * BigRational::from_integer(scale.clone())).floor().to_integer(), scale);
    let extra = BigRational::new(BigInt::one(), BigInt::from(2u32).pow(bits));
    let total_err = Scalar::from_rational(err.upper_rational() + value.rad_rational() + extra);
    PointSample { x, value: Scalar::from_rational(rounded), err: total_err }
}

/// Locate the contiguous gap (any base depth) containing `x`, and the
/// level-1 plateau block inside it, if any.
fn locate_gap_block(
    c: &Construction,
    x: &Scalar,
    max_depth: u32,
) -> Option<(Vec<u32>, Option<u32>)> {
    let n = c.n();
    let mut a = Scalar::zero();
    let mut len = Scalar::one();
    let mut path: Vec<u32> = Vec::new();
    for _depth in 0..=max_depth {
        let step_len = c.spacing().mul(&len, c.ctx());
        let child_len = c.ell().mul(&len, c.ctx());
        let u = x.sub(&a, c.ctx()).div(&step_len, c.ctx()).ok()?;
        let j0 = (u.floor_index()? + 1).clamp(1, n as i64) as u32;
        let cs = a.add(&step_len.mul(&Scalar::from_int((j0 - 1) as i64), c.ctx()), c.ctx());
        let ce = cs.add(&child_len, c.ctx());
        let cmp_cs = x.compare(&cs);
        let cmp_ce = x.compare(&ce);
        if cmp_cs == Ordering4::Undecidable || cmp_ce == Ordering4::Undecidable {
            return None;
        }
        let gap_j = if cmp_cs.is_lt() {
            Some(j0 - 1)
        } else if cmp_ce.is_le() {
            None
        } else {
            Some(j0)
        };
        match gap_j {
            Some(gj) => {
                path.push(gj);
                // block index within the gap at the first tower level
                let ga = a.add(
                    &step_len
                        .mul(&Scalar::from_int((gj - 1) as i64), c.ctx())
                        .add(&child_len, c.ctx()),
                    c.ctx(),
                );
                let gb = a.add(&step_len.mul(&Scalar::from_int(gj as i64), c.ctx()), c.ctx());
                let glen = gb.sub(&ga, c.ctx());
                let delta = c.delta_of(&glen).ok()?;
                let bs = glen.div(&Scalar::from_int(n as i64), c.ctx()).ok()?;
                let bu = x.sub(&ga, c.ctx()).div(&bs, c.ctx()).ok()?;
                let bj = (bu.floor_index()? + 1).clamp(1, n as i64) as u32;
                let grid = |i: u32| ga.add(&bs.mul(&Scalar::from_int(i as i64), c.ctx()), c.ctx());
                let bsa = grid(bj - 1).add(&delta, c.ctx());
                let bse = grid(bj).sub(&delta, c.ctx());
                let inside = x.compare(&bsa).is_ge() && x.compare(&bse).is_le();
                return Some((path, if inside { Some(bj) } else { None }));
            }
            None => {
                path.push(0); // child marker
                path.push(j0);
                a = cs;
                len = child_len;
            }
        }
    }
    None
}

/// At most two blocks of any single gap may hold two or more subset points.
fn claim_blocks(
    c: &Construction,
    points: &[PointSample],
    subset: &[usize],
    max_depth: u32,
) -> (bool, usize, String) {
    let mut per_gap: BTreeMap<Vec<u32>, BTreeMap<u32, usize>> = BTreeMap::new();
    for &i in subset {
        if let Some((gap_path, Some(block_j))) = locate_gap_block(c, &points[i].x, max_depth) {
            *per_gap.entry(gap_path).or_default().entry(block_j).or_insert(0) += 1;
        }
    }
    let mut worst = 0usize;
    let mut detail = String::new();
    for (path, blocks) in &per_gap {
        let crowded = blocks.values().filter(|&&cnt| cnt >= 2).count();
        if crowded > worst {
            worst = crowded;
            detail = format!("gap path {path:?}: {crowded} blocks with >= 2 points");
        }
    }
    (worst <= 2, worst, detail)
}

/// Box-count the subset points over `k_lo..=k_hi` in base 2.
fn subset_rows(
    points: &[PointSample],
    subset: &[usize],
    k_lo: u32,
    k_hi: u32,
) -> Result<Vec<BoxCountRow>, AnalysisError> {
    let sel: Vec<PointSample> = subset.iter().map(|&i| points[i].clone()).collect();
    (k_lo..=k_hi).map(|k| box_count_points(&sel, 2, k)).collect()
}

/// Run the full experiment: jittered samples of `f`, convex/concave search,
/// box-count fits for winners and control, constants, and the finite
/// two-blocks claim.
pub fn convexity_dimension_experiment(
    integ: &Integrator<'_>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, AnalysisError> {
    let c = integ.construction();
    if !c.params().is_strict() {
        return Err(AnalysisError::AssertionFailed {
            check: String::from("strict_params"),
            detail: String::from("the experiment runs on strict parameters"),
        });
    }
    if cfg.m > cfg.cap {
        return Err(AnalysisError::CapExceeded { cap: cfg.cap, got: cfg.m });
    }
    let ctx = *c.ctx();
    let alpha = (c.params().alpha_num, c.params().alpha_den);
    let a_f = alpha.0 as f64 / alpha.1 as f64;
    let mut rng = SplitMix64::new(cfg.seed);
    let m_big = BigInt::from(cfg.m as u64);
    // f evaluated well below the coarsest plateau amplitude, then rounded
    // to 2^-120 so the search arithmetic stays narrow
    let eps_f = Scalar::pow10(-24);
    let mut pts: Vec<PointSample> = Vec::with_capacity(cfg.m);
    let mut control: Vec<PointSample> = Vec::with_capacity(cfg.m);
    for i in 0..cfg.m {
        // x = (i + 1/2 + 0.8 (r - 1/2)) / m, exactly
        let r = rng.unit_rational();
        let jitter = (r - BigRational::new(1.into(), 2.into()))
            * BigRational::new(4.into(), 5.into());
        let xi = (BigRational::new(BigInt::from(2 * i as u64 + 1), BigInt::from(2u8)) + jitter)
            / BigRational::from_integer(m_big.clone());
        let x = Scalar::from_rational(xi.clone());
        let f = integ.f_eval(&x, &eps_f)?;
        pts.push(round_sample(x.clone(), &f.value, &f.err, 120));
        control.push(PointSample::exact(x, Scalar::from_rational(&xi * &xi)));
    }

    let convex_subset = longest_convex_subset(&pts, cfg.cap)?;
    let concave_subset = longest_concave_subset(&pts, cfg.cap)?;
    let control_subset = longest_convex_subset(&control, cfg.cap)?;

    let rows_convex = subset_rows(&pts, &convex_subset, cfg.k_lo, cfg.k_hi)?;
    let rows_concave = subset_rows(&pts, &concave_subset, cfg.k_lo, cfg.k_hi)?;
    let rows_control = subset_rows(&control, &control_subset, cfg.k_lo, cfg.k_hi)?;
    let fit_convex = dim_fit(&rows_convex, alpha)?;
    let fit_concave = dim_fit(&rows_concave, alpha)?;
    let fit_control = dim_fit(&rows_control, alpha)?;

    let mut ratio_table = Vec::new();
    let mut c_alpha = 0.0f64;
    for (rc, rk) in rows_convex.iter().zip(&rows_concave) {
        let denom = Float::powf(2.0f64, a_f * rc.k as f64);
        let rat_c = rc.count as f64 / denom;
        let rat_k = rk.count as f64 / denom;
        c_alpha = c_alpha.max(rat_c);
        ratio_table.push((rc.k, rat_c, rat_k));
    }

    // masked counts: drop convex-subset points lying inside tier-1
    // components longer than one cell at each scale
    let mut c_g1 = 0.0f64;
    for k in cfg.k_lo..=cfg.k_hi {
        let cell = Scalar::Exact(BigRational::new(BigInt::one(), BigInt::from(2u32).pow(k)));
        let comps = c.enumerate_transitional(1, &cell).map_err(AnalysisError::from)?;
        let masked: Vec<PointSample> = convex_subset
            .iter()
            .map(|&i| pts[i].clone())
            .filter(|p| {
                let x = p.x.mid_rational();
                !comps.iter().any(|comp| {
                    let len = comp.b.sub(&comp.a, &ctx);
                    len.lower_rational() > cell.mid_rational()
                        && x > comp.a.mid_rational()
                        && x < comp.b.mid_rational()
                })
            })
            .collect();
        let count = box_count_points(&masked, 2, k)?.count;
        c_g1 = c_g1.max(count as f64 / Float::powf(2.0f64, a_f * k as f64));
    }

    // the finite two-blocks consequence, on both winners
    let (ok_cx, max_cx, det_cx) = claim_blocks(c, &pts, &convex_subset, cfg.locate_depth);
    let (ok_cc, max_cc, det_cc) = claim_blocks(c, &pts, &concave_subset, cfg.locate_depth);

    Ok(ExperimentReport {
        m: cfg.m,
        seed: cfg.seed,
        k_lo: cfg.k_lo,
        k_hi: cfg.k_hi,
        convex_subset,
        concave_subset,
        control_subset_size: control_subset.len(),
        fit_convex,
        fit_concave,
        fit_control,
        ratio_table,
        c_g1,
        c_alpha,
        claim_blocks_ok: ok_cx && ok_cc,
        claim_blocks_max: max_cx.max(max_cc),
        claim_detail: if det_cx.len() >= det_cc.len() { det_cx } else { det_cc },
    })
}

/// Measure every empirical constant on one parameter set: the Hölder
/// bracket of the CDF, the base-set box-count ratio over `k = 1..6`, and
/// the experiment-derived box-count constants from a reduced run.
pub fn measure_constants(
    integ: &Integrator<'_>,
    holder_pairs: usize,
    seed: u64,
) -> Result<MeasuredConstants, AnalysisError> {
    let c = integ.construction();
    let c_phi0: Bracket = measure_c_phi0(c, holder_pairs, seed)?;
    let alpha = (c.params().alpha_num, c.params().alpha_den);
    let a_f = alpha.0 as f64 / alpha.1 as f64;
    let mut c_f0 = 0.0f64;
    for k in 1..=6 {
        let row = box_count_set(c, SetId::F0, k).map_err(AnalysisError::from)?;
        c_f0 = c_f0.max(row.count as f64 / Float::powf(c.n() as f64, a_f * k as f64));
    }
    let cfg = ExperimentConfig { m: 240, k_lo: 2, k_hi: 8, seed, cap: 512, locate_depth: 12 };
    let report = convexity_dimension_experiment(integ, &cfg)?;
    Ok(MeasuredConstants {
        c_phi0,
        c_f0_boxcount: c_f0,
        c_g1: report.c_g1,
        c_alpha: report.c_alpha,
    })
}
