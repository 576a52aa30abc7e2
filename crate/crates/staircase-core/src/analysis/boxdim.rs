//! Grid box counts and log-log dimension fits.
//!
//! Cells are the closed intervals `[(j-1)/base^k, j/base^k]` for
//! `j = 1..base^k`: a point exactly on an interior grid line touches both
//! adjacent cells, while 0 and 1 touch a single cell each.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, One, ToPrimitive, Zero};

use crate::cantor_base::Construction;
use crate::error::{AnalysisError, EvalError};
use crate::params::Mode;
use crate::scalar::Scalar;

use super::PointSample;

/// One exact box-count measurement.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxCountRow {
    pub base_n: u32,
    pub k: u32,
    pub count: u64,
}

/// Least-squares fit of `ln count` against `k ln base`.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DimFit {
    pub rows: Vec<BoxCountRow>,
    pub slope: f64,
    pub intercept: f64,
    /// `max_k count / base^(alpha k)`.
    pub sup_ratio: f64,
}

/// Which structured set to count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetId {
    /// The self-similar base set.
    F0,
    /// The union of tier-`t` transitional components longer than one cell.
    TransitionalTier(u32),
}

/// Closed-cell index range `[j_min, j_max]` touched by the closed interval
/// `[lo, hi]`, clamped to `1..=base^k`; `None` when it misses every cell.
fn cell_range(lo: &BigRational, hi: &BigRational, cells: &BigInt) -> Option<(BigInt, BigInt)> {
    // j ranges over integers with j - 1 <= hi and j >= lo, i.e.
    // ceil(lo) <= j <= floor(hi) + 1
    let j_min = lo.ceil().to_integer().max(BigInt::one());
    let j_max = (hi.floor().to_integer() + BigInt::one()).min(cells.clone());
    if j_min > j_max {
        None
    } else {
        Some((j_min, j_max))
    }
}

/// Streaming union-size accumulator for nondecreasing cell ranges.
struct RangeMerger {
    cur: Option<(BigInt, BigInt)>,
    total: u64,
}

impl RangeMerger {
    fn new() -> Self {
        RangeMerger { cur: None, total: 0 }
    }

    fn push(&mut self, lo: BigInt, hi: BigInt) {
        match &mut self.cur {
            None => self.cur = Some((lo, hi)),
            Some((clo, chi)) => {
                debug_assert!(lo >= *clo, "ranges must arrive in increasing order");
                if lo <= *chi {
                    if hi > *chi {
                        *chi = hi;
                    }
                } else {
                    self.total += range_len(clo, chi);
                    self.cur = Some((lo, hi));
                }
            }
        }
    }

    fn finish(mut self) -> u64 {
        if let Some((lo, hi)) = self.cur.take() {
            self.total += range_len(&lo, &hi);
        }
        self.total
    }
}

fn range_len(lo: &BigInt, hi: &BigInt) -> u64 {
    (hi - lo + 1u32).to_u64().expect("cell counts fit u64")
}

/// Exact count of closed grid cells touched by a finite point set
/// (strictly increasing in `x`; guarded points touch every cell their
/// enclosure meets).
pub fn box_count_points(
    points: &[PointSample],
    base_n: u32,
    k: u32,
) -> Result<BoxCountRow, AnalysisError> {
    assert!(base_n >= 2, "base must be at least 2");
    for w in points.windows(2) {
        assert!(
            w[0].x.compare(&w[1].x).is_lt(),
            "point samples must be strictly increasing in x"
        );
    }
    let cells = BigInt::from(base_n).pow(k);
    let scale = BigRational::from_integer(cells.clone());
    let mut merger = RangeMerger::new();
    for p in points {
        let lo = p.x.lower_rational() * &scale;
        let hi = p.x.upper_rational() * &scale;
        if let Some((a, b)) = cell_range(&lo, &hi, &cells) {
            merger.push(a, b);
        }
    }
    Ok(BoxCountRow { base_n, k, count: merger.finish() })
}

/// Exact count of cells touched by a structured set, via interval
/// enumeration (no point sampling).
pub fn box_count_set(c: &Construction, set: SetId, k: u32) -> Result<BoxCountRow, EvalError> {
    let base_n = c.n();
    match set {
        SetId::F0 => f0_count(c, k),
        SetId::TransitionalTier(t) => {
            let cells = BigInt::from(base_n).pow(k);
            let min_len = Scalar::Exact(BigRational::new(BigInt::one(), cells.clone()));
            let comps = c.enumerate_transitional(t, &min_len)?;
            let scale = BigRational::from_integer(cells.clone());
            let mut merger = RangeMerger::new();
            for comp in &comps {
                // keep only components strictly longer than one cell
                let len = comp.b.sub(&comp.a, c.ctx());
                if !len.lower_rational().gt(&min_len.mid_rational()) {
                    continue;
                }
                let lo = comp.a.lower_rational() * &scale;
                let hi = comp.b.upper_rational() * &scale;
                if let Some((a, b)) = cell_range(&lo, &hi, &cells) {
                    merger.push(a, b);
                }
            }
            Ok(BoxCountRow { base_n, k, count: merger.finish() })
        }
    }
}

/// Count of cells touched by the base set, exact in exact mode via integer
/// arithmetic on child numerators; guarded mode counts the midpoint
/// geometry.
fn f0_count(c: &Construction, k: u32) -> Result<BoxCountRow, EvalError> {
    let n = c.n();
    if c.params().mode == Mode::Exact {
        let q = c.params().alpha_den; // ell = N^-q
        let depth = k.div_ceil(q);
        let budget = c.params().enumeration_budget as u128;
        match (n as u128).checked_pow(depth) {
            Some(cnt) if cnt <= budget => {}
            _ => return Err(EvalError::EnumerationBudgetExceeded { budget: budget as usize }),
        }
        let nbig = BigInt::from(n);
        // spacing numerator over N^q: (N^q - 1)/(N - 1) = 1 + N + ... + N^(q-1)
        let mut s_num = BigInt::zero();
        let mut pw = BigInt::one();
        for _ in 0..q {
            s_num += &pw;
            pw *= &nbig;
        }
        let cells = nbig.pow(k);
        let unit = nbig.pow(depth * q - k); // cell width in child-numerator units
        let n_pow_q = nbig.pow(q);
        let mut merger = RangeMerger::new();
        // iterative DFS over child digits
        fn rec(
            n: u32,
            depth_left: u32,
            a_num: &BigInt,
            n_pow_q: &BigInt,
            s_num: &BigInt,
            unit: &BigInt,
            cells: &BigInt,
            merger: &mut RangeMerger,
        ) {
            if depth_left == 0 {
                // child = [a_num, a_num + 1] in numerator units; cells of
                // width `unit`: j_min = ceil(a/unit), j_max = floor((a+1)/unit)+1
                let (qa, ra) = num_integer::Integer::div_rem(a_num, unit);
                let j_min = if ra.is_zero() { qa } else { qa + 1 };
                let b_num = a_num + 1;
                let qb = num_integer::Integer::div_floor(&b_num, unit);
                let j_max = qb + BigInt::one();
                let j_min = j_min.max(BigInt::one());
                let j_max = j_max.min(cells.clone());
                if j_min <= j_max {
                    merger.push(j_min, j_max);
                }
                return;
            }
            for j in 0..n {
                let next = a_num * n_pow_q + BigInt::from(j) * s_num;
                rec(n, depth_left - 1, &next, n_pow_q, s_num, unit, cells, merger);
            }
        }
        rec(n, depth, &BigInt::zero(), &n_pow_q, &s_num, &unit, &cells, &mut merger);
        Ok(BoxCountRow { base_n: n, k, count: merger.finish() })
    } else {
        // guarded: walk with midpoint rationals of the (irrational) geometry
        let cells = BigInt::from(n).pow(k);
        let scale = BigRational::from_integer(cells.clone());
        let cell_width = BigRational::new(BigInt::one(), cells.clone());
        let ell = c.ell().mid_rational();
        let spacing = c.spacing().mid_rational();
        let mut merger = RangeMerger::new();
        fn rec(
            n: u32,
            a: &BigRational,
            len: &BigRational,
            ell: &BigRational,
            spacing: &BigRational,
            cell_width: &BigRational,
            scale: &BigRational,
            cells: &BigInt,
            merger: &mut RangeMerger,
            budget: &mut usize,
        ) -> Result<(), EvalError> {
            if *budget == 0 {
                return Err(EvalError::EnumerationBudgetExceeded { budget: 0 });
            }
            *budget -= 1;
            if len <= cell_width {
                let lo = a * scale;
                let hi = (a + len) * scale;
                if let Some((ja, jb)) = cell_range(&lo, &hi, cells) {
                    merger.push(ja, jb);
                }
                return Ok(());
            }
            let step = len * spacing;
            let child_len = len * ell;
            for j in 0..n {
                let start = a + &step * BigRational::from_integer(BigInt::from(j));
                rec(n, &start, &child_len, ell, spacing, cell_width, scale, cells, merger, budget)?;
            }
            Ok(())
        }
        let mut budget = c.params().enumeration_budget;
        rec(
            n,
            &BigRational::zero(),
            &BigRational::one(),
            &ell,
            &spacing,
            &cell_width,
            &scale,
            &cells,
            &mut merger,
            &mut budget,
        )?;
        Ok(BoxCountRow { base_n: n, k, count: merger.finish() })
    }
}

/// Least-squares slope of `ln count` against `k ln base`, plus the supremum
/// ratio `count / base^(alpha k)`.
pub fn dim_fit(rows: &[BoxCountRow], alpha: (u32, u32)) -> Result<DimFit, AnalysisError> {
    if rows.len() < 3 {
        return Err(AnalysisError::InsufficientRows);
    }
    let base = rows[0].base_n;
    assert!(rows.iter().all(|r| r.base_n == base), "rows must share a base");
    let ln_base = (base as f64).ln();
    let xs: Vec<f64> = rows.iter().map(|r| r.k as f64 * ln_base).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.count as f64).ln()).collect();
    let m = rows.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / m;
    let mean_y = ys.iter().sum::<f64>() / m;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let a = alpha.0 as f64 / alpha.1 as f64;
    let sup_ratio = rows
        .iter()
        .map(|r| r.count as f64 / Float::powf(base as f64, a * r.k as f64))
        .fold(0.0f64, f64::max);
    Ok(DimFit { rows: rows.into(), slope, intercept, sup_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ConstructionParams;

    fn pt(n: i64, d: i64) -> PointSample {
        PointSample::exact(Scalar::from_ratio(n, d), Scalar::zero())
    }

    #[test]
    fn endpoint_cells_clamped() {
        let row = box_count_points(&[pt(0, 1)], 7, 3).unwrap();
        assert_eq!(row.count, 1);
        let row = box_count_points(&[pt(1, 1)], 7, 3).unwrap();
        assert_eq!(row.count, 1);
    }

    #[test]
    fn grid_line_touches_both_cells() {
        let row = box_count_points(&[pt(1, 2)], 2, 1).unwrap();
        assert_eq!(row.count, 2);
    }

    #[test]
    fn scaling_consistency_for_interior_grid_points() {
        // N_{N,k+1}(A/N) = N_{N,k}(A) for grid-aligned interior A
        let base = 4u32;
        let pts: Vec<PointSample> = [(1i64, 16i64), (3, 16), (7, 16), (9, 16)]
            .iter()
            .map(|&(n, d)| pt(n, d))
            .collect();
        let shrunk: Vec<PointSample> = [(1i64, 64i64), (3, 64), (7, 64), (9, 64)]
            .iter()
            .map(|&(n, d)| pt(n, d))
            .collect();
        for k in 1..=3 {
            let a = box_count_points(&pts, base, k).unwrap().count;
            let b = box_count_points(&shrunk, base, k + 1).unwrap().count;
            assert_eq!(a, b, "k = {k}");
        }
    }

    #[test]
    fn f0_counts_small_base() {
        let c = Construction::new(ConstructionParams::relaxed(4, 1, 2, Mode::Exact)).unwrap();
        // depth-1 children in their own quarter cells
        assert_eq!(box_count_set(&c, SetId::F0, 1).unwrap().count, 4);
        // closed-cell convention: body + aligned-endpoint halo cells
        assert_eq!(box_count_set(&c, SetId::F0, 2).unwrap().count, 10);
        assert_eq!(box_count_set(&c, SetId::F0, 3).unwrap().count, 22);
    }

    #[test]
    fn f0_count_k0_is_one() {
        let c = Construction::new(ConstructionParams::relaxed(4, 1, 2, Mode::Exact)).unwrap();
        assert_eq!(box_count_set(&c, SetId::F0, 0).unwrap().count, 1);
    }

    #[test]
    fn dim_fit_trivial_slopes() {
        let rows: Vec<BoxCountRow> =
            (1..=5).map(|k| BoxCountRow { base_n: 2, k, count: 1u64 << k }).collect();
        let fit = dim_fit(&rows, (1, 2)).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        let flat: Vec<BoxCountRow> =
            (1..=5).map(|k| BoxCountRow { base_n: 2, k, count: 1 }).collect();
        let fit = dim_fit(&flat, (1, 2)).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!(matches!(
            dim_fit(&flat[..2], (1, 2)),
            Err(AnalysisError::InsufficientRows)
        ));
    }

    #[test]
    fn subset_monotonicity() {
        let all: Vec<PointSample> =
            (1..20).map(|i| pt(i, 20)).collect();
        let sub: Vec<PointSample> = all.iter().step_by(3).cloned().collect();
        for k in 1..=4 {
            let big = box_count_points(&all, 3, k).unwrap().count;
            let small = box_count_points(&sub, 3, k).unwrap().count;
            assert!(small <= big);
        }
    }
}
