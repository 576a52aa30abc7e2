//! Longest convex / monotone restriction search and convexity checking.
//!
//! The convex search is a dynamic program over ordered point pairs: a chain
//! ending with points `(i, j)` extends to `k` exactly when
//! `slope(j, k) >= slope(i, j)`. Processing anchors right-to-left with the
//! outgoing transitions sorted by slope gives `O(m² log m)`; slopes are
//! compared exactly by integer cross-multiplication on common-denominator
//! coordinates, so ties behave deterministically and the reported subset is
//! the lexicographically smallest maximum one.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::One;

use crate::error::AnalysisError;
use crate::scalar::Scalar;

use super::{Evaluable, PointSample};

/// Default cap on the quadratic search.
pub const DEFAULT_SUBSET_CAP: usize = 3000;

/// Integer point coordinates over implicit common denominators (which cancel
/// in every slope comparison).
struct Normalized {
    xs: Vec<BigInt>,
    vs: Vec<BigInt>,
}

fn normalize(points: &[PointSample]) -> Normalized {
    let mut xden = BigInt::one();
    let mut vden = BigInt::one();
    let xr: Vec<BigRational> = points.iter().map(|p| p.x.mid_rational()).collect();
    let vr: Vec<BigRational> = points.iter().map(|p| p.value.mid_rational()).collect();
    for r in &xr {
        xden = xden.lcm(r.denom());
    }
    for r in &vr {
        vden = vden.lcm(r.denom());
    }
    let xs = xr.iter().map(|r| r.numer() * (&xden / r.denom())).collect();
    let vs = vr.iter().map(|r| r.numer() * (&vden / r.denom())).collect();
    Normalized { xs, vs }
}

impl Normalized {
    /// `slope(a, b) <= slope(c, d)` exactly (all x strictly increasing).
    fn slope_le(&self, a: usize, b: usize, c: usize, d: usize) -> bool {
        let lhs = (&self.vs[b] - &self.vs[a]) * (&self.xs[d] - &self.xs[c]);
        let rhs = (&self.vs[d] - &self.vs[c]) * (&self.xs[b] - &self.xs[a]);
        lhs <= rhs
    }

    fn slope_cmp(&self, a: usize, b: usize, c: usize, d: usize) -> core::cmp::Ordering {
        let lhs = (&self.vs[b] - &self.vs[a]) * (&self.xs[d] - &self.xs[c]);
        let rhs = (&self.vs[d] - &self.vs[c]) * (&self.xs[b] - &self.xs[a]);
        lhs.cmp(&rhs)
    }
}

fn assert_strictly_increasing(points: &[PointSample]) {
    for w in points.windows(2) {
        assert!(
            w[0].x.compare(&w[1].x).is_lt(),
            "points must be strictly increasing in x"
        );
    }
}

/// Maximum-cardinality subset whose consecutive chord slopes are
/// nondecreasing, as indices into `points`; ties resolve to the
/// lexicographically smallest index sequence.
pub fn longest_convex_subset(
    points: &[PointSample],
    cap: usize,
) -> Result<Vec<usize>, AnalysisError> {
    assert_strictly_increasing(points);
    let m = points.len();
    if m > cap {
        return Err(AnalysisError::CapExceeded { cap, got: m });
    }
    if m <= 2 {
        return Ok((0..m).collect());
    }
    let norm = normalize(points);

    // chain[i][j] = points in the best chain starting with the edge (i, j)
    let mut chain = vec![vec![2u16; m]; m];
    // outgoing edges per anchor, sorted by slope ascending (computed once)
    let mut sorted_out: Vec<Vec<u32>> = Vec::with_capacity(m);
    for j in 0..m {
        let mut ks: Vec<u32> = ((j + 1) as u32..m as u32).collect();
        ks.sort_by(|&p, &q| norm.slope_cmp(j, p as usize, j, q as usize));
        sorted_out.push(ks);
    }

    for j in (1..m - 1).rev() {
        let out = &sorted_out[j];
        // suffix maxima of chain[j][k] in slope order
        let mut suffix_max: Vec<u16> = vec![0; out.len() + 1];
        for (t, &k) in out.iter().enumerate().rev() {
            suffix_max[t] = suffix_max[t + 1].max(chain[j][k as usize]);
        }
        for i in 0..j {
            // first outgoing slot with slope(j, k) >= slope(i, j)
            let mut lo = 0usize;
            let mut hi = out.len();
            while lo < hi {
                let mid = (lo + hi) / 2;
                let k = out[mid] as usize;
                if norm.slope_le(i, j, j, k) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let best_ext = suffix_max[lo];
            chain[i][j] = if best_ext == 0 { 2 } else { 1 + best_ext };
        }
    }

    let mut best = 2u16;
    for i in 0..m {
        for j in (i + 1)..m {
            best = best.max(chain[i][j]);
        }
    }

    // lexicographically smallest maximum chain, greedily
    let (mut ci, mut cj) = 'found: {
        for i in 0..m {
            for j in (i + 1)..m {
                if chain[i][j] == best {
                    break 'found (i, j);
                }
            }
        }
        unreachable!("some pair attains the maximum");
    };
    let mut result = vec![ci, cj];
    let mut remaining = best;
    while remaining > 2 {
        let mut next = None;
        for k in (cj + 1)..m {
            if chain[cj][k] == remaining - 1 && norm.slope_le(ci, cj, cj, k) {
                next = Some(k);
                break;
            }
        }
        let k = next.expect("chain length promises an extension");
        result.push(k);
        ci = cj;
        cj = k;
        remaining -= 1;
    }
    Ok(result)
}

/// Convex search on negated values: the longest concave restriction.
pub fn longest_concave_subset(
    points: &[PointSample],
    cap: usize,
) -> Result<Vec<usize>, AnalysisError> {
    let negated: Vec<PointSample> = points
        .iter()
        .map(|p| PointSample { x: p.x.clone(), value: p.value.neg(), err: p.err.clone() })
        .collect();
    longest_convex_subset(&negated, cap)
}

/// Longest subset on which the values are monotone: the better of the
/// nondecreasing and nonincreasing searches (nondecreasing on ties).
pub fn longest_monotone_subset(points: &[PointSample]) -> Vec<usize> {
    assert_strictly_increasing(points);
    let vals: Vec<BigRational> = points.iter().map(|p| p.value.mid_rational()).collect();
    let up = longest_nondecreasing(&vals);
    let negated: Vec<BigRational> = vals.iter().map(|v| -v).collect();
    let down = longest_nondecreasing(&negated);
    if down.len() > up.len() {
        down
    } else {
        up
    }
}

/// Patience-sorting longest nondecreasing subsequence, `O(m log m)`.
fn longest_nondecreasing(vals: &[BigRational]) -> Vec<usize> {
    let m = vals.len();
    if m == 0 {
        return Vec::new();
    }
    // tails[t] = index of the smallest tail value of a nondecreasing
    // subsequence of length t+1
    let mut tails: Vec<usize> = Vec::new();
    let mut parent: Vec<Option<usize>> = vec![None; m];
    for i in 0..m {
        // first tail with value > vals[i] gets replaced (upper bound)
        let mut lo = 0usize;
        let mut hi = tails.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if vals[tails[mid]] > vals[i] {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        parent[i] = if lo > 0 { Some(tails[lo - 1]) } else { None };
        if lo == tails.len() {
            tails.push(i);
        } else {
            tails[lo] = i;
        }
    }
    let mut out = Vec::with_capacity(tails.len());
    let mut cur = tails.last().copied();
    while let Some(i) = cur {
        out.push(i);
        cur = parent[i];
    }
    out.reverse();
    out
}

/// Verdict of a convexity check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Verdict {
    Convex,
    Concave,
    Neither,
}

/// Outcome of [`check_convex_restriction`], with first violating triples.
#[derive(Clone, Debug)]
pub struct ConvexityCheck {
    pub convex: bool,
    pub concave: bool,
    pub verdict: Verdict,
    pub first_violation_convex: Option<(usize, usize, usize)>,
    pub first_violation_concave: Option<(usize, usize, usize)>,
    /// Some comparison stayed undecidable after the retry.
    pub undecidable: bool,
}

/// Certified relations between `slope(p0, p1)` and `slope(p1, p2)` under the
/// points' error radii.
struct TripleRel {
    /// `s1 <= s2` holds certainly.
    le: bool,
    /// `s1 < s2` holds certainly (rules concavity out).
    lt: bool,
    /// `s1 >= s2` holds certainly.
    ge: bool,
    /// `s1 > s2` holds certainly (rules convexity out).
    gt: bool,
}

fn triple_relations(p: &[&PointSample; 3]) -> TripleRel {
    let dx1 = p[1].x.mid_rational() - p[0].x.mid_rational();
    let dx2 = p[2].x.mid_rational() - p[1].x.mid_rational();
    let e01 = p[0].err.upper_rational() + p[1].err.upper_rational();
    let e12 = p[1].err.upper_rational() + p[2].err.upper_rational();
    let dv1 = p[1].value.mid_rational() - p[0].value.mid_rational();
    let dv2 = p[2].value.mid_rational() - p[1].value.mid_rational();
    let s1_lo = (&dv1 - &e01) * &dx2;
    let s1_hi = (&dv1 + &e01) * &dx2;
    let s2_lo = (&dv2 - &e12) * &dx1;
    let s2_hi = (&dv2 + &e12) * &dx1;
    TripleRel {
        le: s1_hi <= s2_lo,
        lt: s1_hi < s2_lo,
        ge: s1_lo >= s2_hi,
        gt: s1_lo > s2_hi,
    }
}

/// Classify a restriction as convex, concave or neither. Undecidable slope
/// comparisons escalate by one re-evaluation at a tighter tolerance, after
/// which a still-undecided triple conservatively fails both directions and
/// raises the `undecidable` flag.
pub fn check_convex_restriction(
    points: &[PointSample],
    reeval: Option<(&dyn Evaluable, &Scalar)>,
) -> Result<ConvexityCheck, AnalysisError> {
    assert_strictly_increasing(points);
    let m = points.len();
    if m <= 2 {
        return Ok(ConvexityCheck {
            convex: true,
            concave: true,
            verdict: Verdict::Convex,
            first_violation_convex: None,
            first_violation_concave: None,
            undecidable: false,
        });
    }
    let mut pts: Vec<PointSample> = points.to_vec();
    let mut convex = true;
    let mut concave = true;
    let mut undecidable = false;
    let mut first_convex = None;
    let mut first_concave = None;
    for i in 0..m - 2 {
        let idx = (i, i + 1, i + 2);
        let mut rel = triple_relations(&[&pts[i], &pts[i + 1], &pts[i + 2]]);
        if !rel.le && !rel.gt || !rel.ge && !rel.lt {
            if let Some((eval, eps)) = reeval {
                for t in [i, i + 1, i + 2] {
                    let r = eval.eval(&pts[t].x, eps).map_err(AnalysisError::from)?;
                    pts[t] = PointSample { x: pts[t].x.clone(), value: r.value, err: r.err };
                }
                rel = triple_relations(&[&pts[i], &pts[i + 1], &pts[i + 2]]);
            }
        }
        // convex direction
        if rel.gt {
            if convex {
                convex = false;
                first_convex = Some(idx);
            }
        } else if !rel.le {
            undecidable = true;
            if convex {
                convex = false;
                first_convex = Some(idx);
            }
        }
        // concave direction
        if rel.lt {
            if concave {
                concave = false;
                first_concave = Some(idx);
            }
        } else if !rel.ge {
            undecidable = true;
            if concave {
                concave = false;
                first_concave = Some(idx);
            }
        }
        if !convex && !concave && !undecidable {
            break;
        }
    }
    let verdict = if convex {
        Verdict::Convex
    } else if concave {
        Verdict::Concave
    } else {
        Verdict::Neither
    };
    Ok(ConvexityCheck {
        convex,
        concave,
        verdict,
        first_violation_convex: first_convex,
        first_violation_concave: first_concave,
        undecidable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(vals: &[(i64, i64)]) -> Vec<PointSample> {
        vals.iter()
            .enumerate()
            .map(|(i, &(n, d))| {
                PointSample::exact(Scalar::from_ratio(i as i64, vals.len() as i64), Scalar::from_ratio(n, d))
            })
            .collect()
    }

    #[test]
    fn squares_are_globally_convex() {
        let p: Vec<PointSample> = (0..10)
            .map(|i| {
                PointSample::exact(Scalar::from_ratio(i, 10), Scalar::from_ratio(i * i, 100))
            })
            .collect();
        let s = longest_convex_subset(&p, DEFAULT_SUBSET_CAP).unwrap();
        assert_eq!(s, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn strictly_concave_gives_pairs() {
        // values -x²: any 3 points violate convexity
        let p: Vec<PointSample> = (0..8)
            .map(|i| {
                PointSample::exact(Scalar::from_ratio(i, 8), Scalar::from_ratio(-i * i, 64))
            })
            .collect();
        let s = longest_convex_subset(&p, DEFAULT_SUBSET_CAP).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s, vec![0, 1], "lexicographically smallest pair");
        let sc = longest_concave_subset(&p, DEFAULT_SUBSET_CAP).unwrap();
        assert_eq!(sc.len(), 8);
    }

    #[test]
    fn monotone_trivials() {
        let up = pts(&[(1, 10), (2, 10), (5, 10), (7, 10)]);
        assert_eq!(longest_monotone_subset(&up).len(), 4);
        let down = pts(&[(7, 10), (5, 10), (2, 10), (1, 10)]);
        assert_eq!(longest_monotone_subset(&down).len(), 4);
    }

    #[test]
    fn cap_enforced() {
        let p = pts(&[(0, 1), (1, 1), (2, 1), (3, 1)]);
        assert!(matches!(
            longest_convex_subset(&p, 3),
            Err(AnalysisError::CapExceeded { cap: 3, got: 4 })
        ));
    }

    #[test]
    fn convexity_check_examples() {
        // (0,0), (1/2,0), (1,1): slopes 0 then 2, convex only
        let p = vec![
            PointSample::exact(Scalar::zero(), Scalar::zero()),
            PointSample::exact(Scalar::from_ratio(1, 2), Scalar::zero()),
            PointSample::exact(Scalar::one(), Scalar::one()),
        ];
        let c = check_convex_restriction(&p, None).unwrap();
        assert_eq!(c.verdict, Verdict::Convex);
        assert!(!c.concave);
        // (0,0), (1/2,1), (1,0): slopes 2 then -2
        let p = vec![
            PointSample::exact(Scalar::zero(), Scalar::zero()),
            PointSample::exact(Scalar::from_ratio(1, 2), Scalar::one()),
            PointSample::exact(Scalar::one(), Scalar::zero()),
        ];
        let c = check_convex_restriction(&p, None).unwrap();
        assert_eq!(c.verdict, Verdict::Concave);
        assert!(!c.convex);
        assert_eq!(c.first_violation_convex, Some((0, 1, 2)));
        // two points: both
        let c = check_convex_restriction(&p[..2], None).unwrap();
        assert!(c.convex && c.concave);
        assert_eq!(c.verdict, Verdict::Convex);
    }
}
