//! Mean-value transfer: from a finite set `A` on which `f` is convex to a
//! set `B` on which `g = f'` is nondecreasing, with the box-count
//! comparison `N_{2,k}(A) <= 3 N_{2,k}(B) + 2`.
//!
//! For every interior point `a` of `A` with neighbours `b < a < c`, the mean
//! value theorem provides `a¯ ∈ (b, a)` with `g(a¯) = (f(a)-f(b))/(a-b)` and
//! `a⁺ ∈ (a, c)` with `g(a⁺) = (f(c)-f(a))/(c-a)`; endpoints contribute only
//! their inward-facing root. The roots are located by a sign-change scan
//! plus bisection against certified `g` enclosures.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::Signed;

use crate::error::AnalysisError;
use crate::scalar::{NumCtx, Scalar};

use super::boxdim::box_count_points;
use super::subsets::{check_convex_restriction, Verdict};
use super::{Evaluable, PointSample};

/// Result of the transfer: the derived set `B` and the per-scale counts.
#[derive(Clone, Debug)]
pub struct MvtTransferReport {
    pub b_points: Vec<PointSample>,
    /// `(k, count_a, count_b)` for each checked scale (base 2).
    pub counts: Vec<(u32, u64, u64)>,
}

/// Sign of `g(t) - target` from a certified enclosure; `None` when the
/// enclosure straddles the target.
fn signum_at(
    g: &dyn Evaluable,
    t: &Scalar,
    target: &BigRational,
    eps: &Scalar,
) -> Result<Option<i8>, AnalysisError> {
    let r = g.eval(t, eps)?;
    let lo = r.value.lower_rational() - r.err.upper_rational();
    let hi = r.value.upper_rational() + r.err.upper_rational();
    if lo > *target {
        Ok(Some(1))
    } else if hi < *target {
        Ok(Some(-1))
    } else {
        Ok(None)
    }
}

/// Find `t` in the open interval `(lo, hi)` with `|g(t) - target| <= eps`,
/// localized to width `<= eps`.
fn mvt_root(
    g: &dyn Evaluable,
    lo: &Scalar,
    hi: &Scalar,
    target: &BigRational,
    eps: &Scalar,
    ctx: &NumCtx,
) -> Result<Scalar, AnalysisError> {
    let eps_eval = eps.div(&Scalar::from_int(4), ctx)?;
    let accepts = |t: &Scalar| -> Result<Option<Scalar>, AnalysisError> {
        let r = g.eval(t, &eps_eval)?;
        let lo_v = r.value.lower_rational() - r.err.upper_rational();
        let hi_v = r.value.upper_rational() + r.err.upper_rational();
        let e = eps.lower_rational();
        if &lo_v >= &(target - &e) && &hi_v <= &(target + &e) {
            Ok(Some(t.clone()))
        } else {
            Ok(None)
        }
    };
    // scan for a sign change on progressively finer grids
    let mut grid = 64u32;
    for _round in 0..4 {
        let width = hi.sub(lo, ctx);
        let step = width.div(&Scalar::from_int(grid as i64 + 1), ctx)?;
        let mut prev_t: Option<(Scalar, i8)> = None;
        for r in 1..=grid {
            let t = lo.add(&step.mul(&Scalar::from_int(r as i64), ctx), ctx);
            if let Some(found) = accepts(&t)? {
                return Ok(found);
            }
            match signum_at(g, &t, target, &eps_eval)? {
                None => {
                    // enclosure straddles the target but the value is not yet
                    // within eps: drop the pending bracket side
                    prev_t = None;
                }
                Some(s) => {
                    if let Some((pt, ps)) = &prev_t {
                        if *ps != s {
                            // bracket found: bisect
                            return bisect(g, pt, &t, target, eps, ctx);
                        }
                    }
                    prev_t = Some((t, s));
                }
            }
        }
        grid *= 4;
    }
    Err(AnalysisError::RootNotBracketed {
        detail: String::from("no sign change found; inputs may be inconsistent"),
    })
}

fn bisect(
    g: &dyn Evaluable,
    lo: &Scalar,
    hi: &Scalar,
    target: &BigRational,
    eps: &Scalar,
    ctx: &NumCtx,
) -> Result<Scalar, AnalysisError> {
    let eps_eval = eps.div(&Scalar::from_int(4), ctx)?;
    let mut a = lo.clone();
    let mut b = hi.clone();
    let sign_a = signum_at(g, &a, target, &eps_eval)?.ok_or_else(|| {
        AnalysisError::RootNotBracketed { detail: String::from("left bracket undecided") }
    })?;
    for _ in 0..600 {
        let mid = a.add(&b, ctx).div(&Scalar::from_int(2), ctx)?;
        let width = b.sub(&a, ctx);
        let narrow = width.compare(eps).is_le();
        let r = g.eval(&mid, &eps_eval)?;
        let lo_v = r.value.lower_rational() - r.err.upper_rational();
        let hi_v = r.value.upper_rational() + r.err.upper_rational();
        let e = eps.lower_rational();
        if narrow && lo_v >= target - &e && hi_v <= target + &e {
            return Ok(mid);
        }
        match signum_at(g, &mid, target, &eps_eval)? {
            Some(s) if s == sign_a => a = mid,
            Some(_) => b = mid,
            None => {
                // value pinched at the target; shrink towards the midpoint
                // from the wider side to keep making progress
                b = mid;
            }
        }
    }
    Err(AnalysisError::RootNotBracketed { detail: String::from("bisection failed to converge") })
}

/// Transfer a convex restriction of `f` (the samples carry `f`-values) to a
/// monotone restriction of `g`, asserting monotonicity of `B` and the
/// box-count comparison up to `k_max`.
pub fn mvt_transfer(
    a_points: &[PointSample],
    g: &dyn Evaluable,
    eps: &Scalar,
    ctx: &NumCtx,
    k_max: u32,
) -> Result<MvtTransferReport, AnalysisError> {
    let check = check_convex_restriction(a_points, None)?;
    if check.verdict != Verdict::Convex {
        return Err(AnalysisError::NotConvex);
    }
    let m = a_points.len();
    let mut roots: Vec<(Scalar, BigRational)> = Vec::new();
    let chord = |i: usize, j: usize| -> BigRational {
        let dv = a_points[j].value.mid_rational() - a_points[i].value.mid_rational();
        let dx = a_points[j].x.mid_rational() - a_points[i].x.mid_rational();
        dv / dx
    };
    for i in 0..m {
        if i > 0 {
            // a¯ in (x_{i-1}, x_i) with g = chord(i-1, i)
            let t = mvt_root(g, &a_points[i - 1].x, &a_points[i].x, &chord(i - 1, i), eps, ctx)?;
            roots.push((t, chord(i - 1, i)));
        }
        if i + 1 < m {
            let t = mvt_root(g, &a_points[i].x, &a_points[i + 1].x, &chord(i, i + 1), eps, ctx)?;
            roots.push((t, chord(i, i + 1)));
        }
    }
    // sort by position and deduplicate near-identical roots
    roots.sort_by(|p, q| p.0.mid_rational().cmp(&q.0.mid_rational()));
    let mut b_points: Vec<PointSample> = Vec::with_capacity(roots.len());
    for (t, target) in roots {
        let keep = match b_points.last() {
            None => true,
            Some(last) => {
                (t.mid_rational() - last.x.mid_rational()).abs() > eps.upper_rational()
            }
        };
        if keep {
            b_points.push(PointSample {
                x: t,
                value: Scalar::from_rational(target),
                err: eps.clone(),
            });
        }
    }
    // monotone assertion: no certified decrease
    for w in b_points.windows(2) {
        let lhs = w[0].value.mid_rational() - w[0].err.upper_rational();
        let rhs = w[1].value.mid_rational() + w[1].err.upper_rational();
        if lhs > rhs {
            return Err(AnalysisError::AssertionFailed {
                check: String::from("g_monotone_on_b"),
                detail: format!(
                    "g decreases from {} to {}",
                    w[0].value.to_text(),
                    w[1].value.to_text()
                ),
            });
        }
    }
    // box-count comparison at every scale
    let mut counts = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let ca = box_count_points(a_points, 2, k)?.count;
        let cb = box_count_points(&b_points, 2, k)?.count;
        if ca > 3 * cb + 2 {
            return Err(AnalysisError::AssertionFailed {
                check: String::from("box_count_transfer"),
                detail: format!("k = {k}: count(A) = {ca} > 3 * {cb} + 2"),
            });
        }
        counts.push((k, ca, cb));
    }
    Ok(MvtTransferReport { b_points, counts })
}
