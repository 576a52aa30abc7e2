//! The antiderivative `f(x) = ∫₀ˣ g(t) dt` with rigorous error bounds, plus
//! exact segment integrals of the finite plateau levels.
//!
//! Quadrature never samples: it decomposes `[0, x]` along the interval
//! hierarchy and uses three structural identities.
//!
//! 1. Over a full gap `(a, b)` with plateau base `c`, every finite plateau
//!    level integrates to exactly `c * (b - a)`: the `N` blocks have equal
//!    lengths and alternating values `±delta` (even count, cancels), the
//!    interior slots are linear with mean `c`, and the two boundary slots
//!    contribute `+delta²/2` and `-delta²/2`.
//! 2. Over a full level-`d` child, the limit CDF integrates to
//!    `len * mass_left + len * N^-d * I0` where `I0 = ∫₀¹ phi0` solves the
//!    self-similarity equation `I0 (1 - ell) = (N-1)(ell + gap)/2`, i.e.
//!    `I0 = 1/2` identically.
//! 3. On a transitional slot `(u, v)`, `g` is an affine copy of itself:
//!    `∫ᵤˣ g = g(u)(x-u) + (g(v)-g(u))(v-u) F((x-u)/(v-u))` with `F = f` on
//!    `[0, 1]`, and over the full slot `∫ = len (g(u) + (g(v)-g(u)) K)` with
//!    `K = ∫₀¹ g`.
//!
//! `K` is obtained from one sweep as the linear fixed point `K = A + B K`:
//! `B` is the signed sum `Σ ±(slot length)²` over all transitional slots (a
//! fast-converging series with `|B| < 1`) and `A = I0 - B/2`, because
//! `g - g1` is supported on the slots where each slot trades its linear mean
//! for the `K`-weighted one. The `K`-correction of every full node is
//! bounded by its slot mass (`2 delta(L) L` per gap of length `L`), so in
//! the error account those bounds multiply the radius of `K` — and vanish
//! in exact mode, where the sweep yields `K = 1/2` with radius zero.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::cantor_base::{Construction, IntervalKind, IntervalRec};
use crate::error::EvalError;
use crate::scalar::{decimal_sci_upper, Ordering4, Scalar};
use crate::tower::{slot_geometry, Address, EvalResult, Step, TerminalKind};

/// How one node of a quadrature partition was integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum QuadMethod {
    /// Exact plateau / base-set partition contribution.
    PlateauExact,
    /// Transitional slot resolved through the self-similar identity.
    TransitionalSelfSimilar,
    /// Unresolved sliver bounded by the node enclosure.
    HolderFallback,
}

/// One node of a traced quadrature partition.
#[derive(Clone, Debug)]
pub struct QuadratureNode {
    pub interval: IntervalRec,
    pub contribution: Scalar,
    pub err: Scalar,
    pub method: QuadMethod,
}

/// Integrand selector for segment integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrand {
    /// The self-similar limit `g`.
    G,
    /// The finite plateau level `phi_n` (piecewise constant/linear, hence
    /// exactly integrable).
    Phi(u32),
}

/// Quadrature context holding the fixed point `K = ∫₀¹ g` for one parameter
/// set. Immutable after construction; share freely across workers.
#[derive(Clone, Debug)]
pub struct Integrator<'a> {
    c: &'a Construction,
    k_mid: Scalar,
    k_rad: Scalar,
    a_coeff: Scalar,
    b_coeff: Scalar,
    b_err: Scalar,
    i0: Scalar,
    /// Ratio `N * ell^(2/alpha + 1)` of the per-depth slot-mass series.
    child_tail_ratio: Scalar,
}

impl<'a> Integrator<'a> {
    pub fn new(c: &'a Construction) -> Result<Self, EvalError> {
        let ctx = *c.ctx();
        let n = c.n();
        let one = Scalar::one();
        let two = Scalar::from_int(2);
        let n_minus_1 = Scalar::from_int(n as i64 - 1);
        let i0 = n_minus_1
            .mul(c.spacing(), &ctx)
            .div(&two.mul(&one.sub(c.ell(), &ctx), &ctx), &ctx)?;
        if c.is_exact() {
            debug_assert_eq!(
                i0.as_rational().unwrap(),
                &BigRational::new(BigInt::from(1), BigInt::from(2))
            );
        }
        let (p2, q2) = c.two_inv_alpha();
        let ell_pow = c
            .ell()
            .pow_rational(p2 + q2 as i64, q2, &ctx.relax())
            .map_err(EvalError::from)?;
        let child_tail_ratio = Scalar::from_int(n as i64).mul(&ell_pow, &ctx);
        if !child_tail_ratio.compare(&one).is_lt() {
            return Err(EvalError::PrecisionUnreachable {
                achieved: decimal_sci_upper(&child_tail_ratio.upper_rational()),
            });
        }

        let target = tiny_target(c);
        let (b_coeff, b_err) = slot_sum_all(c, &child_tail_ratio, &target)?;

        // K solves K = (I0 - T/2) + T K for some T in [B - e, B + e]; the
        // solution (I0 - T/2)/(1 - T) is monotone in T, so the hull over the
        // two endpoints encloses K.
        let a_coeff = i0.sub(&b_coeff.div(&two, &ctx)?, &ctx);
        let mut k_lo: Option<BigRational> = None;
        let mut k_hi: Option<BigRational> = None;
        for sign in [-1i64, 1] {
            let t = b_coeff.add(&b_err.mul(&Scalar::from_int(sign), &ctx), &ctx);
            let denom = one.sub(&t, &ctx);
            if !denom.compare(&Scalar::zero()).is_gt() {
                return Err(EvalError::PrecisionUnreachable {
                    achieved: decimal_sci_upper(&b_err.upper_rational()),
                });
            }
            let num = i0.sub(&t.div(&two, &ctx)?, &ctx);
            let k = num.div(&denom, &ctx)?;
            let lo = k.lower_rational();
            let hi = k.upper_rational();
            k_lo = Some(k_lo.map_or(lo.clone(), |v| v.min(lo)));
            k_hi = Some(k_hi.map_or(hi.clone(), |v| v.max(hi)));
        }
        let (klo, khi) = (k_lo.unwrap(), k_hi.unwrap());
        let two_r = BigRational::new(BigInt::from(2), BigInt::from(1));
        let k_mid = Scalar::from_rational((klo.clone() + khi.clone()) / &two_r);
        let k_rad = Scalar::from_rational((khi - klo) / two_r);
        Ok(Integrator { c, k_mid, k_rad, a_coeff, b_coeff, b_err, i0, child_tail_ratio })
    }

    pub fn construction(&self) -> &Construction {
        self.c
    }

    /// The fixed point `K = ∫₀¹ g` as an evaluation result.
    pub fn integral_01_g(&self, eps: &Scalar) -> Result<EvalResult, EvalError> {
        if self.k_rad.compare(eps).is_gt() {
            return Err(EvalError::PrecisionUnreachable {
                achieved: decimal_sci_upper(&self.k_rad.upper_rational()),
            });
        }
        Ok(EvalResult {
            value: self.k_mid.clone(),
            err: self.k_rad.clone(),
            address: Address {
                steps: Vec::new(),
                frames: Vec::new(),
                terminal_kind: TerminalKind::Truncated,
            },
            warnings: Vec::new(),
        })
    }

    /// The sweep coefficients of `K = A + B K` and the truncation error of
    /// `B` (exact rationals at any finite truncation in exact mode).
    pub fn k_fixed_point(&self) -> (&Scalar, &Scalar, &Scalar) {
        (&self.a_coeff, &self.b_coeff, &self.b_err)
    }

    /// `f(x) = ∫₀ˣ g` with error at most `eps`.
    pub fn f_eval(&self, x: &Scalar, eps: &Scalar) -> Result<EvalResult, EvalError> {
        self.prefix_integral(x, eps, Integrand::G, &mut NoTrace)
    }

    /// Traced variant of [`Integrator::f_eval`], recording partition nodes.
    pub fn f_eval_traced(
        &self,
        x: &Scalar,
        eps: &Scalar,
    ) -> Result<(EvalResult, Vec<QuadratureNode>), EvalError> {
        let mut trace = VecTrace(Vec::new());
        let r = self.prefix_integral(x, eps, Integrand::G, &mut trace)?;
        Ok((r, trace.0))
    }

    /// `∫ₐᵇ` of the chosen integrand with error at most `eps`.
    pub fn segment_integral(
        &self,
        a: &Scalar,
        b: &Scalar,
        integrand: Integrand,
        eps: &Scalar,
    ) -> Result<EvalResult, EvalError> {
        let ctx = *self.c.ctx();
        if a.compare(b).is_gt() {
            return Err(EvalError::OutOfDomain);
        }
        let half = eps.div(&Scalar::from_int(2), &ctx)?;
        let fb = self.prefix_integral(b, &half, integrand, &mut NoTrace)?;
        let fa = self.prefix_integral(a, &half, integrand, &mut NoTrace)?;
        Ok(EvalResult {
            value: fb.value.sub(&fa.value, &ctx),
            err: fb.err.add(&fa.err, &ctx),
            address: Address {
                steps: Vec::new(),
                frames: Vec::new(),
                terminal_kind: TerminalKind::Truncated,
            },
            warnings: Vec::new(),
        })
    }

    /// Upper bound `2 delta(L) L` on the absolute slot mass inside a gap.
    fn slot_mass_gap(&self, len: &Scalar) -> Result<Scalar, EvalError> {
        let d = self.c.delta_of(len)?;
        Ok(self.c.mul_int(&self.c.mul(&d, len), 2))
    }

    /// Upper bound on the absolute slot mass below one child of length `len`.
    fn slot_mass_child(&self, len: &Scalar) -> Result<Scalar, EvalError> {
        let c = self.c;
        let gap_len = c.mul(c.gap0_len(), len);
        let tb = self.slot_mass_gap(&gap_len)?;
        let n_minus_1 = Scalar::from_int(c.n() as i64 - 1);
        let head = c.mul(&n_minus_1, &tb);
        let denom = Scalar::one().sub(&self.child_tail_ratio, c.ctx());
        Ok(head.div(&denom, c.ctx())?)
    }

    fn precision_err(&self, witness: &Scalar) -> EvalError {
        EvalError::PrecisionUnreachable { achieved: decimal_sci_upper(&witness.upper_rational()) }
    }

    /// Walk the hierarchy left of `x`, accumulating exact full-node
    /// integrals, and descend into the node containing `x`.
    fn prefix_integral(
        &self,
        x: &Scalar,
        eps: &Scalar,
        integrand: Integrand,
        trace: &mut dyn Trace,
    ) -> Result<EvalResult, EvalError> {
        let c = self.c;
        let ctx = *c.ctx();
        if x.compare(&Scalar::zero()).is_lt() || x.compare(&Scalar::one()).is_gt() {
            return Err(EvalError::OutOfDomain);
        }
        let n = c.n();
        let track_k = !self.k_rad.is_zero() && integrand == Integrand::G;
        let quarter = Scalar::from_int(4);
        let eps_sliver = eps.div(&quarter, &ctx)?.mul(&Scalar::from_int(2), &ctx); // eps/2
        let eps_cut = eps.div(&quarter, &ctx)?.mul(&Scalar::from_int(2), &ctx); // eps/2

        let mut val = Scalar::zero();
        let mut err = Scalar::zero();
        let mut mult_abs = Scalar::one();
        let mut mult_neg = false;
        let mut x = x.clone();
        let mut steps: Vec<Step> = Vec::new();
        let mut node = PathNode::Child {
            depth: 0,
            a: Scalar::zero(),
            len: Scalar::one(),
            mass_left: Scalar::zero(),
        };

        macro_rules! add_signed {
            ($amount:expr) => {{
                let amount = $amount;
                val = if mult_neg { val.sub(&amount, &ctx) } else { val.add(&amount, &ctx) };
                amount
            }};
        }

        'walk: for _level in 0..=c.params().max_descent_levels {
            let (node_a, node_b) = match &node {
                PathNode::Child { a, len, .. } => (a.clone(), c.add(a, len)),
                PathNode::Region { a, b, .. } => (a.clone(), b.clone()),
            };
            if x.compare(&node_a) == Ordering4::Equal {
                break 'walk;
            }
            let full_node = x.compare(&node_b) == Ordering4::Equal;

            if !full_node {
                let (enc_lo, enc_hi) = self.node_enclosure(&node, integrand)?;
                let seg = x.sub(&node_a, &ctx);
                let width = enc_hi.sub(&enc_lo, &ctx);
                if !width.is_zero() {
                    let bound = mult_abs.mul(&width.mul(&seg, &ctx), &ctx);
                    if bound.compare(&eps_sliver).is_le() {
                        let mid = enc_lo.add(&width.div(&Scalar::from_int(2), &ctx)?, &ctx);
                        let amount = add_signed!(mult_abs.mul(&mid.mul(&seg, &ctx), &ctx));
                        let half_b = bound.div(&Scalar::from_int(2), &ctx)?;
                        err = err.add(&half_b, &ctx);
                        trace.push(&node_a, &x, &amount, &half_b, QuadMethod::HolderFallback);
                        break 'walk;
                    }
                }
            }

            match node {
                PathNode::Child { depth, a, len, mass_left } => {
                    let step_len = c.mul(c.spacing(), &len);
                    let child_len = c.mul(c.ell(), &len);
                    let child_mass = c.mass(depth + 1);
                    let target = if full_node {
                        None
                    } else {
                        let u = c.div(&c.sub(&x, &a), &step_len)?;
                        let j0 = match u.floor_index() {
                            Some(f) => (f + 1).clamp(1, n as i64) as u32,
                            None => return Err(self.precision_err(eps)),
                        };
                        let cs = c.add(&a, &c.mul_int(&step_len, (j0 - 1) as i64));
                        let ce = c.add(&cs, &child_len);
                        let cmp_cs = x.compare(&cs);
                        let cmp_ce = x.compare(&ce);
                        if cmp_cs == Ordering4::Undecidable || cmp_ce == Ordering4::Undecidable {
                            return Err(self.precision_err(eps));
                        }
                        Some(if cmp_cs.is_lt() {
                            ChildTarget::IntoGap(j0 - 1)
                        } else if cmp_ce.is_le() {
                            ChildTarget::IntoChild(j0)
                        } else {
                            ChildTarget::IntoGap(j0)
                        })
                    };
                    let (n_children, n_gaps) = match target {
                        None => (n, n - 1),
                        Some(ChildTarget::IntoChild(j0)) => (j0 - 1, j0 - 1),
                        Some(ChildTarget::IntoGap(gj)) => (gj, gj - 1),
                    };
                    for j in 1..=n_children {
                        let m_j = c.add(&mass_left, &c.mul_int(&child_mass, (j - 1) as i64));
                        let part = c.mul(&child_len, &m_j);
                        let ss = c.mul(&child_len, &c.mul(&child_mass, &self.i0));
                        let amount = add_signed!(mult_abs.mul(&part.add(&ss, &ctx), &ctx));
                        let mut node_err = Scalar::zero();
                        if track_k {
                            let tb = self.slot_mass_child(&child_len)?;
                            node_err = mult_abs.mul(&self.k_rad.mul(&tb, &ctx), &ctx);
                            err = err.add(&node_err, &ctx);
                        }
                        let cs = c.add(&a, &c.mul_int(&step_len, (j - 1) as i64));
                        let ce = c.add(&cs, &child_len);
                        trace.push(&cs, &ce, &amount, &node_err, QuadMethod::PlateauExact);
                    }
                    for j in 1..=n_gaps {
                        let ga =
                            c.add(&a, &c.add(&c.mul_int(&step_len, (j - 1) as i64), &child_len));
                        let gb = c.add(&a, &c.mul_int(&step_len, j as i64));
                        let base = c.add(&mass_left, &c.mul_int(&child_mass, j as i64));
                        let glen = c.sub(&gb, &ga);
                        let amount = add_signed!(mult_abs.mul(&c.mul(&base, &glen), &ctx));
                        let mut node_err = Scalar::zero();
                        if track_k {
                            let tb = self.slot_mass_gap(&glen)?;
                            node_err = mult_abs.mul(&self.k_rad.mul(&tb, &ctx), &ctx);
                            err = err.add(&node_err, &ctx);
                        }
                        trace.push(&ga, &gb, &amount, &node_err, QuadMethod::PlateauExact);
                    }
                    match target {
                        None => break 'walk,
                        Some(ChildTarget::IntoChild(j0)) => {
                            let cs = c.add(&a, &c.mul_int(&step_len, (j0 - 1) as i64));
                            steps.push(Step::ChildDescent(j0));
                            let m =
                                c.add(&mass_left, &c.mul_int(&child_mass, (j0 - 1) as i64));
                            node = PathNode::Child {
                                depth: depth + 1,
                                a: cs,
                                len: child_len,
                                mass_left: m,
                            };
                        }
                        Some(ChildTarget::IntoGap(gj)) => {
                            let ga = c
                                .add(&a, &c.add(&c.mul_int(&step_len, (gj - 1) as i64), &child_len));
                            let gb = c.add(&a, &c.mul_int(&step_len, gj as i64));
                            let base = c.add(&mass_left, &c.mul_int(&child_mass, gj as i64));
                            steps.push(Step::GapEntry(gj));
                            node = PathNode::Region {
                                a: ga,
                                b: gb,
                                base,
                                levels_below: match integrand {
                                    Integrand::Phi(t) => Some(t),
                                    Integrand::G => None,
                                },
                            };
                        }
                    }
                }
                PathNode::Region { a, b, base, levels_below } => {
                    if levels_below == Some(0) {
                        let hi = if full_node { &b } else { &x };
                        let seg = c.sub(hi, &a);
                        let amount = add_signed!(mult_abs.mul(&c.mul(&base, &seg), &ctx));
                        trace.push(&a, hi, &amount, &Scalar::zero(), QuadMethod::PlateauExact);
                        break 'walk;
                    }
                    let len = c.sub(&b, &a);
                    let delta = c.delta_of(&len)?;
                    let bs = c.div(&len, &Scalar::from_int(n as i64))?;
                    let grid = |i: u32| c.add(&a, &c.mul_int(&bs, i as i64));
                    let container = if full_node {
                        None
                    } else {
                        let u = c.div(&c.sub(&x, &a), &bs)?;
                        let j0 = match u.floor_index() {
                            Some(f) => (f + 1).clamp(1, n as i64) as u32,
                            None => return Err(self.precision_err(eps)),
                        };
                        let cs = c.add(&grid(j0 - 1), &delta);
                        let ce = c.sub(&grid(j0), &delta);
                        let cmp_cs = x.compare(&cs);
                        let cmp_ce = x.compare(&ce);
                        if cmp_cs == Ordering4::Undecidable || cmp_ce == Ordering4::Undecidable {
                            return Err(self.precision_err(eps));
                        }
                        Some(if cmp_cs.is_lt() {
                            RegionTarget::IntoSlot(j0 - 1)
                        } else if cmp_ce.is_le() {
                            RegionTarget::IntoBlock(j0)
                        } else {
                            RegionTarget::IntoSlot(j0)
                        })
                    };
                    let (n_blocks, n_slots) = match container {
                        None => (n, n + 1),
                        Some(RegionTarget::IntoBlock(j)) => (j - 1, j),
                        Some(RegionTarget::IntoSlot(k)) => (k, k),
                    };
                    for j in 1..=n_blocks {
                        let ba = c.add(&grid(j - 1), &delta);
                        let bb = c.sub(&grid(j), &delta);
                        let bv = plateau_value(c, &base, &delta, j);
                        let blen = c.sub(&bb, &ba);
                        let amount = add_signed!(mult_abs.mul(&c.mul(&bv, &blen), &ctx));
                        let mut node_err = Scalar::zero();
                        if track_k {
                            let tb = self.slot_mass_gap(&blen)?;
                            node_err = mult_abs.mul(&self.k_rad.mul(&tb, &ctx), &ctx);
                            err = err.add(&node_err, &ctx);
                        }
                        trace.push(&ba, &bb, &amount, &node_err, QuadMethod::PlateauExact);
                    }
                    for k in 0..n_slots {
                        let slot = slot_geometry(c, &a, &b, &base, &bs, &delta, k);
                        let slen = c.sub(&slot.b, &slot.a);
                        let amount = match integrand {
                            Integrand::G => {
                                let k_term = c.mul(&slot.vb.sub(&slot.va, &ctx), &self.k_mid);
                                add_signed!(mult_abs
                                    .mul(&c.mul(&slen, &slot.va.add(&k_term, &ctx)), &ctx))
                            }
                            Integrand::Phi(_) => {
                                let mean = slot
                                    .va
                                    .add(&slot.vb, &ctx)
                                    .div(&Scalar::from_int(2), &ctx)?;
                                add_signed!(mult_abs.mul(&c.mul(&slen, &mean), &ctx))
                            }
                        };
                        let mut node_err = Scalar::zero();
                        if track_k {
                            let tb = c.mul(&slen, &slen);
                            node_err = mult_abs.mul(&self.k_rad.mul(&tb, &ctx), &ctx);
                            err = err.add(&node_err, &ctx);
                        }
                        trace.push(&slot.a, &slot.b, &amount, &node_err, QuadMethod::TransitionalSelfSimilar);
                    }
                    match container {
                        None => break 'walk,
                        Some(RegionTarget::IntoBlock(j)) => {
                            steps.push(Step::PlateauEntry(j));
                            let ba = c.add(&grid(j - 1), &delta);
                            let bb = c.sub(&grid(j), &delta);
                            let bv = plateau_value(c, &base, &delta, j);
                            node = PathNode::Region {
                                a: ba,
                                b: bb,
                                base: bv,
                                levels_below: levels_below.map(|t| t - 1),
                            };
                        }
                        Some(RegionTarget::IntoSlot(k)) => {
                            let slot = slot_geometry(c, &a, &b, &base, &bs, &delta, k);
                            steps.push(Step::TransitionalEntry(k));
                            let lead = x.sub(&slot.a, &ctx);
                            match integrand {
                                Integrand::Phi(_) => {
                                    let half_sq =
                                        lead.mul(&lead, &ctx).div(&Scalar::from_int(2), &ctx)?;
                                    let linear = c.mul(&slot.va, &lead);
                                    let amount_local = if slot.decreasing {
                                        linear.sub(&half_sq, &ctx)
                                    } else {
                                        linear.add(&half_sq, &ctx)
                                    };
                                    let amount = add_signed!(mult_abs.mul(&amount_local, &ctx));
                                    trace.push(&slot.a, &x, &amount, &Scalar::zero(), QuadMethod::TransitionalSelfSimilar);
                                    break 'walk;
                                }
                                Integrand::G => {
                                    let amount =
                                        add_signed!(mult_abs.mul(&c.mul(&slot.va, &lead), &ctx));
                                    trace.push(&slot.a, &x, &amount, &Scalar::zero(), QuadMethod::TransitionalSelfSimilar);
                                    let slen = c.sub(&slot.b, &slot.a);
                                    let new_mult = mult_abs.mul(&c.mul(&slen, &slen), &ctx);
                                    let new_neg = mult_neg ^ slot.decreasing;
                                    if new_mult.compare(&eps_cut).is_le() {
                                        // remaining local F lies in [0, 1]
                                        let half =
                                            new_mult.div(&Scalar::from_int(2), &ctx)?;
                                        val = if new_neg {
                                            val.sub(&half, &ctx)
                                        } else {
                                            val.add(&half, &ctx)
                                        };
                                        err = err.add(&half, &ctx);
                                        trace.push(&slot.a, &x, &half, &half, QuadMethod::HolderFallback);
                                        break 'walk;
                                    }
                                    mult_abs = new_mult;
                                    mult_neg = new_neg;
                                    x = c.div(&lead, &slen)?;
                                    node = PathNode::Child {
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
            }
        }

        if err.compare(eps).is_gt() {
            return Err(self.precision_err(&err));
        }
        Ok(EvalResult {
            value: val,
            err,
            address: Address { steps, frames: Vec::new(), terminal_kind: TerminalKind::Truncated },
            warnings: Vec::new(),
        })
    }

    /// Enclosure of the integrand over a path node.
    fn node_enclosure(
        &self,
        node: &PathNode,
        integrand: Integrand,
    ) -> Result<(Scalar, Scalar), EvalError> {
        let c = self.c;
        match node {
            PathNode::Child { depth, len, mass_left, .. } => {
                let hi_base = c.add(mass_left, &c.mass(*depth));
                if integrand == Integrand::Phi(0) {
                    return Ok((mass_left.clone(), hi_base));
                }
                let gap_len = c.mul(c.gap0_len(), len);
                let osc = c.mul_int(&c.delta_of(&gap_len)?, 2);
                Ok((c.sub(mass_left, &osc), c.add(&hi_base, &osc)))
            }
            PathNode::Region { a, b, base, levels_below } => {
                if *levels_below == Some(0) {
                    return Ok((base.clone(), base.clone()));
                }
                let len = c.sub(b, a);
                let osc = c.mul_int(&c.delta_of(&len)?, 2);
                Ok((c.sub(base, &osc), c.add(base, &osc)))
            }
        }
    }
}

enum PathNode {
    Child { depth: u32, a: Scalar, len: Scalar, mass_left: Scalar },
    Region { a: Scalar, b: Scalar, base: Scalar, levels_below: Option<u32> },
}

enum ChildTarget {
    IntoChild(u32),
    IntoGap(u32),
}

enum RegionTarget {
    IntoBlock(u32),
    IntoSlot(u32),
}

fn plateau_value(c: &Construction, base: &Scalar, delta: &Scalar, j: u32) -> Scalar {
    if j % 2 == 1 {
        c.add(base, delta)
    } else {
        c.sub(base, delta)
    }
}

/// Truncation target for the `B` sweep: far below the working precision.
fn tiny_target(c: &Construction) -> Scalar {
    let bits = (c.params().float_precision_bits as u32 + 64).min(4096);
    Scalar::Exact(BigRational::new(BigInt::from(1), BigInt::from(2u32).pow(bits)))
}

fn scalar_from_u128(v: u128) -> Scalar {
    Scalar::Exact(BigRational::from_integer(BigInt::from(v)))
}

/// Signed slot sum `Σ ±(slot length)²` over the whole structure: per base
/// depth `e` there are `N^e (N-1)` gaps of length `gap0 * ell^e`.
fn slot_sum_all(
    c: &Construction,
    tail_ratio: &Scalar,
    target: &Scalar,
) -> Result<(Scalar, Scalar), EvalError> {
    let ctx = *c.ctx();
    let n = c.n();
    let mut acc = Scalar::zero();
    let mut acc_err = Scalar::zero();
    let mut weight: u128 = 1;
    let mut len = Scalar::one();
    loop {
        let gap_len = c.mul(c.gap0_len(), &len);
        let (gv, ge) = slot_sum_gap(c, &gap_len, target)?;
        let w = scalar_from_u128(weight * (n as u128 - 1));
        acc = acc.add(&w.mul(&gv, &ctx), &ctx);
        acc_err = acc_err.add(&w.mul(&ge, &ctx), &ctx);
        // tail over deeper base levels via the geometric ratio
        let next_len = c.mul(c.ell(), &len);
        let next_gap = c.mul(c.gap0_len(), &next_len);
        let tb = {
            let d = c.delta_of(&next_gap)?;
            c.mul_int(&c.mul(&d, &next_gap), 2)
        };
        let head = w.mul(&Scalar::from_int(n as i64), &ctx).mul(&tb, &ctx);
        let denom = Scalar::one().sub(tail_ratio, &ctx);
        let tail = head.div(&denom, &ctx)?;
        if tail.compare(target).is_le() || weight > u128::MAX / (2 * n as u128) {
            return Ok((acc, acc_err.add(&tail, &ctx)));
        }
        weight *= n as u128;
        len = next_len;
    }
}

/// Signed slot sum of one gap of length `len` over all tower levels: each
/// level contributes exactly `-2 delta²` (boundary slots `+delta²` each,
/// interior slots alternate `∓4 delta²` with an odd count), then the `N`
/// equal-length blocks recurse.
fn slot_sum_gap(
    c: &Construction,
    len: &Scalar,
    target: &Scalar,
) -> Result<(Scalar, Scalar), EvalError> {
    let ctx = *c.ctx();
    let n = c.n();
    let mut acc = Scalar::zero();
    let mut weight: u128 = 1;
    let mut cur = len.clone();
    loop {
        let delta = c.delta_of(&cur)?;
        let term = c.mul_int(&c.mul(&delta, &delta), -2);
        acc = acc.add(&scalar_from_u128(weight).mul(&term, &ctx), &ctx);
        let bs = cur.div(&Scalar::from_int(n as i64), &ctx)?;
        let next = bs.sub(&c.mul_int(&delta, 2), &ctx);
        let next_weight = weight.saturating_mul(n as u128);
        let tb = {
            let d = c.delta_of(&next)?;
            c.mul_int(&c.mul(&d, &next), 2)
        };
        let tail = scalar_from_u128(next_weight).mul(&tb, &ctx);
        if tail.compare(target).is_le() || next_weight > u128::MAX / (2 * n as u128) {
            return Ok((acc, tail));
        }
        weight = next_weight;
        cur = next;
    }
}

trait Trace {
    fn push(&mut self, a: &Scalar, b: &Scalar, contribution: &Scalar, err: &Scalar, method: QuadMethod);
}

struct NoTrace;

impl Trace for NoTrace {
    fn push(&mut self, _: &Scalar, _: &Scalar, _: &Scalar, _: &Scalar, _: QuadMethod) {}
}

struct VecTrace(Vec<QuadratureNode>);

impl Trace for VecTrace {
    fn push(&mut self, a: &Scalar, b: &Scalar, contribution: &Scalar, err: &Scalar, method: QuadMethod) {
        let kind = match method {
            QuadMethod::PlateauExact => IntervalKind::Plateau,
            QuadMethod::TransitionalSelfSimilar => IntervalKind::Transitional,
            QuadMethod::HolderFallback => IntervalKind::Gap,
        };
        self.0.push(QuadratureNode {
            interval: IntervalRec {
                a: a.clone(),
                b: b.clone(),
                kind,
                depth: 0,
                base_value: None,
                delta: None,
            },
            contribution: contribution.clone(),
            err: err.clone(),
            method,
        });
    }
}

