//! The plateau tower, its uniform limit `g1`, and the restricted
//! self-similar limit `g`, all evaluated lazily with rigorous error bounds.
//!
//! Every gap `(a, b)` on which the previous level is constant at `base` is
//! subdivided into `N` closed plateau blocks
//! `I(a,b,j) = [a + (j-1)(b-a)/N + delta, a + j(b-a)/N - delta]` with
//! `delta = (b-a)^(2/alpha) / N^(2/alpha)`, carrying the alternating values
//! `base + (-1)^(j+1) * delta`. The open slots between blocks (length
//! `2*delta` inside, `delta` at both ends) are transitional: the function is
//! linear there with slope exactly `±1`.
//!
//! `g1` iterates this inside every block forever. `g` additionally re-seeds
//! the whole construction inside every transitional slot: on a slot `(u, v)`
//! it equals `g(u) + (g(v) - g(u)) * g((x-u)/(v-u))`, an affine copy of `g`
//! on `[0, 1]`. Evaluation therefore never materializes a tree: it walks the
//! single branch containing `x`, pushes an affine frame whenever it enters a
//! slot, and stops as soon as the composed enclosure is narrower than the
//! requested tolerance.
//!
//! Enclosures are intrinsic rather than constant-based: on a gap of length
//! `L`, every deeper plateau and transitional value stays within
//! `base ± 2*delta(L)` (amplitudes decay by at least `N^(-2/alpha)` per level
//! and slot values stay in the hull of their endpoint values), and on a
//! level-`d` child of the base set all values lie in
//! `[mass_left, mass_left + N^-d]` widened by the same plateau bound.

use alloc::vec::Vec;

use crate::cantor_base::{Construction, IntervalKind, IntervalRec};
use crate::error::EvalError;
use crate::scalar::{decimal_sci_upper, Ordering4, Scalar};

/// One step of a descent address.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Step {
    /// Entered base-set child `j` (1-based).
    ChildDescent(u32),
    /// Entered the gap after child `j` (1-based, up to `N - 1`).
    GapEntry(u32),
    /// Entered plateau block `j` (1-based).
    PlateauEntry(u32),
    /// Entered transitional slot `k` (0-based; the slot before block 1 is 0).
    TransitionalEntry(u32),
}

/// How the descent ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TerminalKind {
    /// Resolved exactly on a point of the base set.
    InF0Limit,
    /// Resolved exactly on a plateau boundary or constant plateau.
    OnPlateauLimit,
    /// Resolved exactly inside a transitional slot.
    InTransitional,
    /// Stopped at an enclosure narrower than the tolerance (or at the cap).
    Truncated,
}

/// Affine frame pushed when the evaluation enters a transitional slot.
///
/// `offset` and `scale` describe the value map and `domain_a..domain_b` the
/// slot, both in the coordinates of the level that pushed the frame;
/// `|scale|` equals the slot length, negative `scale` being a decreasing copy.
#[derive(Clone, Debug)]
pub struct AffineFrame {
    pub offset: Scalar,
    pub scale: Scalar,
    pub domain_a: Scalar,
    pub domain_b: Scalar,
}

/// Descent trace: steps taken, frames pushed, and how it ended.
#[derive(Clone, Debug)]
pub struct Address {
    pub steps: Vec<Step>,
    pub frames: Vec<AffineFrame>,
    pub terminal_kind: TerminalKind,
}

impl Address {
    /// Number of transitional recursions taken.
    pub fn tier(&self) -> usize {
        self.frames.len()
    }
}

/// Evaluation warnings carried alongside a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Warning {
    /// A guarded comparison could not decide a branch.
    UndecidableBranch,
    /// The level cap stopped the descent before the tolerance was met.
    Truncated,
}

/// Value plus rigorous error bound.
#[derive(Clone, Debug)]
pub struct EvalResult {
    pub value: Scalar,
    pub err: Scalar,
    pub address: Address,
    pub warnings: Vec<Warning>,
}

impl EvalResult {
    /// Sound enclosure `[value - err, value + err]` as rationals.
    pub fn bounds(&self) -> (num_rational::BigRational, num_rational::BigRational) {
        let lo = self.value.lower_rational() - self.err.upper_rational();
        let hi = self.value.upper_rational() + self.err.upper_rational();
        (lo, hi)
    }
}

/// One maximal transitional component, with exact endpoint values of the
/// corresponding finite stage (equal to those of the limit `g`).
#[derive(Clone, Debug)]
pub struct TransitionalComponent {
    pub a: Scalar,
    pub b: Scalar,
    pub tier: u32,
    pub g_at_a: Scalar,
    pub g_at_b: Scalar,
}

/// Which function the descent evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum EvalKind {
    /// Finite plateau level `phi_n` (0 = the bare CDF).
    Phi(u32),
    /// The uniform tower limit; slots stay linear.
    G1,
    /// The self-similar limit; `Some(n)` evaluates the finite stage `g_n`
    /// (`Some(1)` reproduces `g1`), `None` the full limit.
    G { max_tier: Option<u32> },
}

enum Node {
    Child { depth: u32, a: Scalar, len: Scalar, mass_left: Scalar },
    Region { a: Scalar, b: Scalar, base: Scalar, levels_below: Option<u32> },
}

/// Composed value map `v -> offset ± scale_abs * v`.
struct ValueMap {
    offset: Scalar,
    scale_abs: Scalar,
    neg: bool,
}

impl ValueMap {
    fn identity() -> Self {
        ValueMap { offset: Scalar::zero(), scale_abs: Scalar::one(), neg: false }
    }

    fn apply(&self, c: &Construction, v: &Scalar) -> Scalar {
        let sv = c.mul(&self.scale_abs, v);
        if self.neg {
            c.sub(&self.offset, &sv)
        } else {
            c.add(&self.offset, &sv)
        }
    }

    fn apply_interval(&self, c: &Construction, lo: &Scalar, hi: &Scalar) -> (Scalar, Scalar) {
        let a = self.apply(c, lo);
        let b = self.apply(c, hi);
        if self.neg {
            (b, a)
        } else {
            (a, b)
        }
    }
}

/// Sound enclosure of the target function over a node's domain, in the
/// node's local value coordinates.
fn enclosure(c: &Construction, node: &Node, kind: EvalKind) -> Result<(Scalar, Scalar), EvalError> {
    match node {
        Node::Child { depth, len, mass_left, .. } => {
            let hi_base = c.add(mass_left, &c.mass(*depth));
            if kind == EvalKind::Phi(0) {
                return Ok((mass_left.clone(), hi_base));
            }
            let gap_len = c.mul(c.gap0_len(), len);
            let osc = c.mul_int(&c.delta_of(&gap_len)?, 2);
            Ok((c.sub(mass_left, &osc), c.add(&hi_base, &osc)))
        }
        Node::Region { a, b, base, levels_below } => {
            if *levels_below == Some(0) {
                return Ok((base.clone(), base.clone()));
            }
            let len = c.sub(b, a);
            let osc = c.mul_int(&c.delta_of(&len)?, 2);
            Ok((c.sub(base, &osc), c.add(base, &osc)))
        }
    }
}

/// Plateau block value `base + (-1)^(j+1) * delta`.
pub(crate) fn block_value(c: &Construction, base: &Scalar, delta: &Scalar, j: u32) -> Scalar {
    if j % 2 == 1 {
        c.add(base, delta)
    } else {
        c.sub(base, delta)
    }
}

/// True when transitional slot `k` (0-based, out of `0..=n`) has slope -1.
pub(crate) fn slot_is_decreasing(k: u32, n: u32) -> bool {
    k != 0 && k != n && k % 2 == 1
}

/// Geometry of one transitional slot inside a subdivided region.
pub(crate) struct Slot {
    pub(crate) a: Scalar,
    pub(crate) b: Scalar,
    pub(crate) va: Scalar,
    pub(crate) vb: Scalar,
    pub(crate) decreasing: bool,
}

pub(crate) fn slot_geometry(
    c: &Construction,
    a: &Scalar,
    b: &Scalar,
    base: &Scalar,
    bs: &Scalar,
    delta: &Scalar,
    k: u32,
) -> Slot {
    let n = c.n();
    let grid = |i: u32| c.add(a, &c.mul_int(bs, i as i64));
    let sa = if k == 0 { a.clone() } else { c.sub(&grid(k), delta) };
    let sb = if k == n { b.clone() } else { c.add(&grid(k), delta) };
    let va = if k == 0 { base.clone() } else { block_value(c, base, delta, k) };
    let vb = if k == n { base.clone() } else { block_value(c, base, delta, k + 1) };
    Slot { a: sa, b: sb, va, vb, decreasing: slot_is_decreasing(k, n) }
}

/// The lazy descent shared by `phi_n`, `g1` and `g`.
pub(crate) fn descend(
    c: &Construction,
    x: &Scalar,
    eps: &Scalar,
    kind: EvalKind,
) -> Result<EvalResult, EvalError> {
    let truncate_ok = matches!(kind, EvalKind::Phi(_));
    if x.compare(&Scalar::zero()).is_lt() || x.compare(&Scalar::one()).is_gt() {
        return Err(EvalError::OutOfDomain);
    }
    let n = c.n();
    let two_eps = c.mul_int(eps, 2);
    let mut map = ValueMap::identity();
    let mut frames_pushed: u32 = 0;
    let mut steps: Vec<Step> = Vec::new();
    let mut frames: Vec<AffineFrame> = Vec::new();
    let mut warnings: Vec<Warning> = Vec::new();
    let mut x = x.clone();
    let mut node = Node::Child {
        depth: 0,
        a: Scalar::zero(),
        len: Scalar::one(),
        mass_left: Scalar::zero(),
    };

    for _level in 0..=c.params().max_descent_levels {
        // exact endpoint hits first, so endpoint values stay exact even for
        // loose tolerances
        let endpoint_val = match &node {
            Node::Child { a, len, mass_left, depth } => {
                if x.compare(a) == Ordering4::Equal {
                    Some((mass_left.clone(), TerminalKind::InF0Limit))
                } else if x.compare(&c.add(a, len)) == Ordering4::Equal {
                    Some((c.add(mass_left, &c.mass(*depth)), TerminalKind::InF0Limit))
                } else {
                    None
                }
            }
            Node::Region { a, b, base, .. } => {
                if x.compare(a) == Ordering4::Equal || x.compare(b) == Ordering4::Equal {
                    Some((base.clone(), TerminalKind::OnPlateauLimit))
                } else {
                    None
                }
            }
        };
        if let Some((v, terminal)) = endpoint_val {
            return Ok(EvalResult {
                value: map.apply(c, &v),
                err: Scalar::zero(),
                address: Address { steps, frames, terminal_kind: terminal },
                warnings,
            });
        }

        let (enc_lo, enc_hi) = enclosure(c, &node, kind)?;
        let (lo, hi) = map.apply_interval(c, &enc_lo, &enc_hi);
        let width = c.sub(&hi, &lo);
        if width.is_zero() || width.compare(&two_eps).is_le() {
            let half = c.div(&width, &Scalar::from_int(2)).expect("two is nonzero");
            let mid = c.add(&lo, &half);
            let terminal = match &node {
                Node::Region { levels_below: Some(0), .. } => TerminalKind::OnPlateauLimit,
                _ => TerminalKind::Truncated,
            };
            return Ok(EvalResult {
                value: mid,
                err: half,
                address: Address { steps, frames, terminal_kind: terminal },
                warnings,
            });
        }

        let bail_undecidable = |warnings: Vec<Warning>, width: &Scalar| -> Result<EvalResult, EvalError> {
            let _ = warnings;
            Err(EvalError::PrecisionUnreachable {
                achieved: decimal_sci_upper(&width.upper_rational()),
            })
        };

        match node {
            Node::Child { depth, a, len, mass_left } => {
                let step_len = c.mul(c.spacing(), &len);
                let child_len = c.mul(c.ell(), &len);
                let u = c.div(&c.sub(&x, &a), &step_len)?;
                let j0 = match u.floor_index() {
                    Some(f) => (f + 1).clamp(1, n as i64) as u32,
                    None => {
                        warnings.push(Warning::UndecidableBranch);
                        return bail_undecidable(warnings, &width);
                    }
                };
                let cs = c.add(&a, &c.mul_int(&step_len, (j0 - 1) as i64));
                let ce = c.add(&cs, &child_len);
                let cmp_cs = x.compare(&cs);
                let cmp_ce = x.compare(&ce);
                if cmp_cs == Ordering4::Undecidable || cmp_ce == Ordering4::Undecidable {
                    warnings.push(Warning::UndecidableBranch);
                    return bail_undecidable(warnings, &width);
                }
                let phi_levels = match kind {
                    EvalKind::Phi(t) => Some(t),
                    _ => None,
                };
                if cmp_cs.is_lt() {
                    debug_assert!(j0 >= 2, "x below the first child start");
                    let gj = j0 - 1;
                    let ga = c.add(&a, &c.add(&c.mul_int(&step_len, (gj - 1) as i64), &child_len));
                    let gb = c.add(&a, &c.mul_int(&step_len, gj as i64));
                    let base = c.add(&mass_left, &c.mul_int(&c.mass(depth + 1), gj as i64));
                    steps.push(Step::GapEntry(gj));
                    node = Node::Region { a: ga, b: gb, base, levels_below: phi_levels };
                } else if cmp_ce.is_le() {
                    steps.push(Step::ChildDescent(j0));
                    let mass_left = c.add(&mass_left, &c.mul_int(&c.mass(depth + 1), (j0 - 1) as i64));
                    node = Node::Child { depth: depth + 1, a: cs, len: child_len, mass_left };
                } else {
                    debug_assert!(j0 <= n - 1, "x above the last child end");
                    let gb = c.add(&a, &c.mul_int(&step_len, j0 as i64));
                    let base = c.add(&mass_left, &c.mul_int(&c.mass(depth + 1), j0 as i64));
                    steps.push(Step::GapEntry(j0));
                    node = Node::Region { a: ce, b: gb, base, levels_below: phi_levels };
                }
            }
            Node::Region { a, b, base, levels_below } => {
                let len = c.sub(&b, &a);
                let delta = c.delta_of(&len)?;
                if delta.is_zero() && !c.is_exact() {
                    return Err(EvalError::DegenerateGap);
                }
                let bs = c.div(&len, &Scalar::from_int(n as i64))?;
                let u = c.div(&c.sub(&x, &a), &bs)?;
                let j0 = match u.floor_index() {
                    Some(f) => (f + 1).clamp(1, n as i64) as u32,
                    None => {
                        warnings.push(Warning::UndecidableBranch);
                        return bail_undecidable(warnings, &width);
                    }
                };
                let grid = |i: u32| c.add(&a, &c.mul_int(&bs, i as i64));
                let cs = c.add(&grid(j0 - 1), &delta);
                let ce = c.sub(&grid(j0), &delta);
                let cmp_cs = x.compare(&cs);
                let cmp_ce = x.compare(&ce);
                if cmp_cs == Ordering4::Undecidable || cmp_ce == Ordering4::Undecidable {
                    warnings.push(Warning::UndecidableBranch);
                    return bail_undecidable(warnings, &width);
                }
                let slot_k = if cmp_cs.is_lt() {
                    Some(j0 - 1)
                } else if cmp_ce.is_le() {
                    None
                } else {
                    Some(j0)
                };
                match slot_k {
                    None => {
                        steps.push(Step::PlateauEntry(j0));
                        let v = block_value(c, &base, &delta, j0);
                        node = Node::Region {
                            a: cs,
                            b: ce,
                            base: v,
                            levels_below: levels_below.map(|t| t - 1),
                        };
                    }
                    Some(k) => {
                        let slot = slot_geometry(c, &a, &b, &base, &bs, &delta, k);
                        steps.push(Step::TransitionalEntry(k));
                        let recurse = match kind {
                            EvalKind::G { max_tier } => match max_tier {
                                None => true,
                                Some(t) => frames_pushed + 1 < t,
                            },
                            _ => false,
                        };
                        if !recurse {
                            // linear with slope ±1: value = va ± (x - sa)
                            let t = c.sub(&x, &slot.a);
                            let v = if slot.decreasing {
                                c.sub(&slot.va, &t)
                            } else {
                                c.add(&slot.va, &t)
                            };
                            return Ok(EvalResult {
                                value: map.apply(c, &v),
                                err: Scalar::zero(),
                                address: Address {
                                    steps,
                                    frames,
                                    terminal_kind: TerminalKind::InTransitional,
                                },
                                warnings,
                            });
                        }
                        let slot_len = c.sub(&slot.b, &slot.a);
                        let signed_scale =
                            if slot.decreasing { slot_len.neg() } else { slot_len.clone() };
                        frames.push(AffineFrame {
                            offset: slot.va.clone(),
                            scale: signed_scale,
                            domain_a: slot.a.clone(),
                            domain_b: slot.b.clone(),
                        });
                        map.offset = map.apply(c, &slot.va);
                        map.scale_abs = c.mul(&map.scale_abs, &slot_len);
                        map.neg ^= slot.decreasing;
                        frames_pushed += 1;
                        x = c.div(&c.sub(&x, &slot.a), &slot_len)?;
                        node = Node::Child {
                            depth: 0,
                            a: Scalar::zero(),
                            len: Scalar::one(),
                            mass_left: Scalar::zero(),
                        };
                    }
                }
            }
        }
    }

    // level cap reached
    let (enc_lo, enc_hi) = enclosure(c, &node, kind)?;
    let (lo, hi) = map.apply_interval(c, &enc_lo, &enc_hi);
    let width = c.sub(&hi, &lo);
    if truncate_ok {
        let half = c.div(&width, &Scalar::from_int(2)).expect("two is nonzero");
        let mid = c.add(&lo, &half);
        warnings.push(Warning::Truncated);
        return Ok(EvalResult {
            value: mid,
            err: half,
            address: Address { steps, frames, terminal_kind: TerminalKind::Truncated },
            warnings,
        });
    }
    Err(EvalError::PrecisionUnreachable {
        achieved: decimal_sci_upper(&width.upper_rational()),
    })
}

/// Affine placement of a nested copy of the construction inside the original
/// coordinates: positions map increasingly, values may be reflected.
#[derive(Clone)]
struct CopyFrame {
    pos_off: Scalar,
    /// Product of the enclosing slot lengths (also the value scale).
    scale: Scalar,
    val_off: Scalar,
    val_neg: bool,
}

impl CopyFrame {
    fn identity() -> Self {
        CopyFrame {
            pos_off: Scalar::zero(),
            scale: Scalar::one(),
            val_off: Scalar::zero(),
            val_neg: false,
        }
    }

    fn pos(&self, c: &Construction, p: &Scalar) -> Scalar {
        c.add(&self.pos_off, &c.mul(&self.scale, p))
    }

    fn val(&self, c: &Construction, v: &Scalar) -> Scalar {
        let sv = c.mul(&self.scale, v);
        if self.val_neg {
            c.sub(&self.val_off, &sv)
        } else {
            c.add(&self.val_off, &sv)
        }
    }

    fn enter_slot(&self, c: &Construction, slot: &Slot) -> CopyFrame {
        let slot_len = c.sub(&slot.b, &slot.a);
        CopyFrame {
            pos_off: self.pos(c, &slot.a),
            scale: c.mul(&self.scale, &slot_len),
            val_off: self.val(c, &slot.va),
            val_neg: self.val_neg ^ slot.decreasing,
        }
    }
}

impl Construction {
    /// Plateau level `n` at `x`: exact wherever the descent resolves within
    /// `n` tower levels, otherwise the deepest resolved enclosure.
    pub fn phi_n_eval(&self, x: &Scalar, n: u32) -> Result<EvalResult, EvalError> {
        if n > self.params().max_descent_levels {
            return Err(EvalError::DepthLimitExceeded {
                depth: n,
                limit: self.params().max_descent_levels,
            });
        }
        descend(self, x, &Scalar::zero(), EvalKind::Phi(n))
    }

    /// The tower limit `g1` at `x` with error at most `eps`.
    pub fn g1_eval(&self, x: &Scalar, eps: &Scalar) -> Result<EvalResult, EvalError> {
        descend(self, x, eps, EvalKind::G1)
    }

    /// The self-similar limit `g` at `x` with error at most `eps`;
    /// `max_tier = Some(n)` evaluates the finite stage `g_n` instead.
    pub fn g_eval(
        &self,
        x: &Scalar,
        eps: &Scalar,
        max_tier: Option<u32>,
    ) -> Result<EvalResult, EvalError> {
        descend(self, x, eps, EvalKind::G { max_tier })
    }

    /// Subdivide a constant interval into its `N` plateau blocks and `N + 1`
    /// transitional slots, in position order.
    pub fn subblocks(
        &self,
        gap: &IntervalRec,
    ) -> Result<(Vec<IntervalRec>, Vec<IntervalRec>), EvalError> {
        assert!(
            matches!(gap.kind, IntervalKind::Gap | IntervalKind::Plateau),
            "subblocks needs an interval where the previous level is constant"
        );
        let base = gap.base_value.clone().expect("gap carries its level value");
        let n = self.n();
        let len = self.sub(&gap.b, &gap.a);
        let delta = self.delta_of(&len)?;
        if delta.is_zero() && !self.is_exact() {
            return Err(EvalError::DegenerateGap);
        }
        let bs = self.div(&len, &Scalar::from_int(n as i64))?;
        let mut blocks = Vec::with_capacity(n as usize);
        let mut slots = Vec::with_capacity(n as usize + 1);
        for k in 0..=n {
            let slot = slot_geometry(self, &gap.a, &gap.b, &base, &bs, &delta, k);
            slots.push(IntervalRec {
                a: slot.a,
                b: slot.b,
                kind: IntervalKind::Transitional,
                depth: gap.depth + 1,
                base_value: None,
                delta: Some(delta.clone()),
            });
            if k < n {
                let j = k + 1;
                let grid = |i: u32| self.add(&gap.a, &self.mul_int(&bs, i as i64));
                blocks.push(IntervalRec {
                    a: self.add(&grid(k), &delta),
                    b: self.sub(&grid(j), &delta),
                    kind: IntervalKind::Plateau,
                    depth: gap.depth + 1,
                    base_value: Some(block_value(self, &base, &delta, j)),
                    delta: Some(delta.clone()),
                });
            }
        }
        Ok((blocks, slots))
    }

    /// All components of the tier-`tier` transitional set with length at
    /// least `min_len`, in increasing position, with exact endpoint values.
    /// `min_len = N^-k` yields exactly the components longer than one grid
    /// cell at scale `k`.
    pub fn enumerate_transitional(
        &self,
        tier: u32,
        min_len: &Scalar,
    ) -> Result<Vec<TransitionalComponent>, EvalError> {
        assert!(tier >= 1, "tiers are 1-based");
        assert!(min_len.compare(&Scalar::zero()).is_gt(), "min_len must be positive");
        let mut out = Vec::new();
        self.enum_copy(tier, min_len, &CopyFrame::identity(), &mut out)?;
        Ok(out)
    }

    /// Enumerate one whole copy of the construction (local coordinates
    /// `[0, 1]`) placed by `frame`.
    fn enum_copy(
        &self,
        tier: u32,
        min_len: &Scalar,
        frame: &CopyFrame,
        out: &mut Vec<TransitionalComponent>,
    ) -> Result<(), EvalError> {
        self.enum_child(
            tier,
            min_len,
            &Scalar::zero(),
            &Scalar::one(),
            0,
            &Scalar::zero(),
            frame,
            out,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn enum_child(
        &self,
        tier: u32,
        min_len: &Scalar,
        a: &Scalar,
        len: &Scalar,
        depth: u32,
        mass_left: &Scalar,
        frame: &CopyFrame,
        out: &mut Vec<TransitionalComponent>,
    ) -> Result<(), EvalError> {
        // largest slot below this child: 2*delta of its widest gap; tier >= 2
        // components are smaller still, so this prunes those too
        let gap_len = self.mul(self.gap0_len(), len);
        let local_bound = self.mul_int(&self.delta_of(&gap_len)?, 2);
        let bound = self.mul(&frame.scale, &local_bound);
        if bound.compare(min_len).is_lt() {
            return Ok(());
        }
        let n = self.n();
        let step_len = self.mul(self.spacing(), len);
        let child_len = self.mul(self.ell(), len);
        let child_mass = self.mass(depth + 1);
        for j in 1..=n {
            let cs = self.add(a, &self.mul_int(&step_len, (j - 1) as i64));
            let mass_j = self.add(mass_left, &self.mul_int(&child_mass, (j - 1) as i64));
            self.enum_child(tier, min_len, &cs, &child_len, depth + 1, &mass_j, frame, out)?;
            if j < n {
                let ga = self.add(&cs, &child_len);
                let gb = self.add(a, &self.mul_int(&step_len, j as i64));
                let base = self.add(mass_left, &self.mul_int(&child_mass, j as i64));
                self.enum_region(tier, min_len, &ga, &gb, &base, frame, out)?;
            }
        }
        Ok(())
    }

    fn enum_region(
        &self,
        tier: u32,
        min_len: &Scalar,
        a: &Scalar,
        b: &Scalar,
        base: &Scalar,
        frame: &CopyFrame,
        out: &mut Vec<TransitionalComponent>,
    ) -> Result<(), EvalError> {
        let len = self.sub(b, a);
        let delta = self.delta_of(&len)?;
        let local_bound = self.mul_int(&delta, 2);
        let bound = self.mul(&frame.scale, &local_bound);
        if bound.compare(min_len).is_lt() {
            return Ok(());
        }
        let n = self.n();
        let bs = self.div(&len, &Scalar::from_int(n as i64))?;
        for k in 0..=n {
            let slot = slot_geometry(self, a, b, base, &bs, &delta, k);
            let slot_len_abs = self.mul(&frame.scale, &self.sub(&slot.b, &slot.a));
            if slot_len_abs.compare(min_len).is_ge() {
                if tier == 1 {
                    if out.len() >= self.params().enumeration_budget {
                        return Err(EvalError::EnumerationBudgetExceeded {
                            budget: self.params().enumeration_budget,
                        });
                    }
                    out.push(TransitionalComponent {
                        a: frame.pos(self, &slot.a),
                        b: frame.pos(self, &slot.b),
                        tier,
                        g_at_a: frame.val(self, &slot.va),
                        g_at_b: frame.val(self, &slot.vb),
                    });
                } else {
                    let inner = frame.enter_slot(self, &slot);
                    self.enum_copy(tier - 1, min_len, &inner, out)?;
                }
            }
            if k < n {
                let j = k + 1;
                let grid = |i: u32| self.add(a, &self.mul_int(&bs, i as i64));
                let ba = self.add(&grid(k), &delta);
                let bb = self.sub(&grid(j), &delta);
                let bv = block_value(self, base, &delta, j);
                self.enum_region(tier, min_len, &ba, &bb, &bv, frame, out)?;
            }
        }
        Ok(())
    }

    /// A single gap record between children `gap_j` and `gap_j + 1` at base
    /// depth `depth`, inside the child selected by `child_index` (digits in
    /// base `N`). Used for sampling gaps at several depths without
    /// enumerating whole levels.
    pub fn gap_record_at(
        &self,
        depth: u32,
        child_index: u128,
        gap_j: u32,
    ) -> Result<IntervalRec, EvalError> {
        assert!(gap_j >= 1 && gap_j < self.n(), "gap index out of range");
        let n = self.n() as u128;
        let mut idx = child_index;
        let mut a = Scalar::zero();
        let mut len = Scalar::one();
        let mut mass_left = Scalar::zero();
        // digits from most significant: child_index < N^depth
        for lvl in 0..depth {
            let power = n.pow(depth - lvl - 1);
            let digit = (idx / power) as u32; // 0-based child pick
            idx %= power;
            if digit >= self.n() {
                return Err(EvalError::OutOfDomain);
            }
            let step_len = self.mul(self.spacing(), &len);
            a = self.add(&a, &self.mul_int(&step_len, digit as i64));
            len = self.mul(self.ell(), &len);
            mass_left = self.add(&mass_left, &self.mul_int(&self.mass(lvl + 1), digit as i64));
        }
        let step_len = self.mul(self.spacing(), &len);
        let child_len = self.mul(self.ell(), &len);
        let ga = self.add(&a, &self.add(&self.mul_int(&step_len, (gap_j - 1) as i64), &child_len));
        let gb = self.add(&a, &self.mul_int(&step_len, gap_j as i64));
        let base = self.add(&mass_left, &self.mul_int(&self.mass(depth + 1), gap_j as i64));
        let glen = self.sub(&gb, &ga);
        Ok(IntervalRec {
            a: ga,
            b: gb,
            kind: IntervalKind::Gap,
            depth,
            base_value: Some(base),
            delta: Some(self.delta_of(&glen)?),
        })
    }
}
