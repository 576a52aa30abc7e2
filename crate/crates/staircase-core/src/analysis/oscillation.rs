//! Plateau oscillation checks: at block midpoints of a gap, the limit `g`
//! provably overshoots (odd blocks) or undershoots (even blocks) the gap's
//! base value by almost the full plateau amplitude.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::ToPrimitive;

use crate::cantor_base::{Construction, IntervalKind, IntervalRec};
use crate::error::AnalysisError;
use crate::scalar::Scalar;

/// Margin record for one block midpoint.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OscillationEntry {
    pub j: u32,
    /// Certified margin of the one-sided inequality, in units of the
    /// theoretical slack `6 delta / N^(2/alpha)`.
    pub margin_rel: f64,
}

/// Per-gap report of the oscillation inequalities.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OscillationReport {
    pub gap_depth: u32,
    pub entries: Vec<OscillationEntry>,
    pub min_margin_rel: f64,
    /// Certified minimum of `g(t_j) - g(t_{j+1})` over odd `j`, in units of
    /// `delta`.
    pub min_consecutive_drop_rel: f64,
}

/// At the midpoint `t_j` of every block `I(a,b,j)` of `gap`, check that
///
/// - odd `j`:  `g(t_j) > g(a) + delta - 6 (b-a)^(2/alpha)/N^(4/alpha)`,
/// - even `j`: `g(t_j) < g(a) - delta + 6 (b-a)^(2/alpha)/N^(4/alpha)`,
///
/// and that `g(t_j) > g(t_{j+1})` for odd `j`. All comparisons are decided
/// from certified enclosures; any failure aborts with the offending block.
pub fn oscillation_check(
    c: &Construction,
    gap: &IntervalRec,
) -> Result<OscillationReport, AnalysisError> {
    if !c.params().is_strict() {
        return Err(AnalysisError::AssertionFailed {
            check: String::from("strict_params"),
            detail: String::from("oscillation inequalities assume N > 100"),
        });
    }
    assert!(
        matches!(gap.kind, IntervalKind::Gap | IntervalKind::Plateau),
        "oscillation check needs a constant-level interval"
    );
    let ctx = *c.ctx();
    let base = gap.base_value.clone().expect("gap carries its level value");
    let len = gap.b.sub(&gap.a, &ctx);
    let delta = c.delta_of(&len).map_err(AnalysisError::from)?;
    // slack term 6 delta / N^(2/alpha)
    let (p2, q2) = c.two_inv_alpha();
    let n_pow = Scalar::from_int(c.n() as i64)
        .pow_rational(p2, q2, &ctx.relax())
        .map_err(AnalysisError::from)?;
    let slack = c.mul_int(&delta, 6).div(&n_pow, &ctx).map_err(AnalysisError::from)?;
    // evaluation tolerance well below the expected margin scale
    let eps = slack.div(&Scalar::from_int(8192), &ctx).map_err(AnalysisError::from)?;

    let (blocks, _slots) = c.subblocks(gap).map_err(AnalysisError::from)?;
    let slack_r = slack.mid_rational();
    let delta_r = delta.mid_rational();
    let zero = num_rational::BigRational::from_integer(0.into());
    let mut entries = Vec::with_capacity(blocks.len());
    let mut evals = Vec::with_capacity(blocks.len());
    let mut min_margin = f64::INFINITY;
    for (idx, block) in blocks.iter().enumerate() {
        let j = idx as u32 + 1;
        let mid = block
            .a
            .add(&block.b, &ctx)
            .div(&Scalar::from_int(2), &ctx)
            .map_err(AnalysisError::from)?;
        let g = c.g_eval(&mid, &eps, None).map_err(AnalysisError::from)?;
        // threshold: base + delta - slack (odd) / base - delta + slack (even)
        let margin = if j % 2 == 1 {
            let threshold = base.add(&delta, &ctx).sub(&slack, &ctx);
            g.value.lower_rational() - g.err.upper_rational() - threshold.upper_rational()
        } else {
            let threshold = base.sub(&delta, &ctx).add(&slack, &ctx);
            threshold.lower_rational() - g.value.upper_rational() - g.err.upper_rational()
        };
        let margin_rel = (margin.clone() / &slack_r).to_f64().unwrap_or(f64::NEG_INFINITY);
        if margin <= zero {
            return Err(AnalysisError::AssertionFailed {
                check: String::from(if j % 2 == 1 { "odd_overshoot" } else { "even_undershoot" }),
                detail: format!("block j = {j}, margin = {margin_rel:.3e} (relative to slack)"),
            });
        }
        min_margin = min_margin.min(margin_rel);
        entries.push(OscillationEntry { j, margin_rel });
        evals.push(g);
    }
    // consecutive parity: g(t_j) > g(t_{j+1}) for odd j
    let mut min_drop = f64::INFINITY;
    for idx in (0..blocks.len().saturating_sub(1)).step_by(2) {
        let gj = &evals[idx];
        let gj1 = &evals[idx + 1];
        let drop = gj.value.lower_rational()
            - gj.err.upper_rational()
            - gj1.value.upper_rational()
            - gj1.err.upper_rational();
        let drop_rel = (drop.clone() / &delta_r).to_f64().unwrap_or(f64::NEG_INFINITY);
        if drop <= zero {
            return Err(AnalysisError::AssertionFailed {
                check: String::from("consecutive_drop"),
                detail: format!("blocks j = {}, {}", idx + 1, idx + 2),
            });
        }
        min_drop = min_drop.min(drop_rel);
    }
    Ok(OscillationReport {
        gap_depth: gap.depth,
        entries,
        min_margin_rel: min_margin,
        min_consecutive_drop_rel: min_drop,
    })
}
