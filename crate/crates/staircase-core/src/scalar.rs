//! Numeric kernel: exact big rationals and guarded dyadic floats.
//!
//! A [`Scalar`] is either `Exact` (a `BigRational` in lowest terms) or
//! `Guarded` (a [`Ball`], i.e. an interval `[lo, hi]` of dyadic floats that
//! is guaranteed to contain the represented real). Arithmetic on two exact
//! scalars stays exact; any guarded operand makes the result guarded, with
//! endpoints rounded outward at the working precision.
//!
//! The guarded float [`Fp`] is `mant * 2^exp` with an arbitrary-precision
//! signed mantissa. Rounding is explicit: every lossy operation takes a
//! direction, and interval operations round the lower endpoint down and the
//! upper endpoint up, so enclosures are sound by construction.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::ScalarError;
use crate::params::Mode;

/// Working context for scalar arithmetic: output mode and guarded precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NumCtx {
    pub mode: Mode,
    pub prec: u32,
}

impl NumCtx {
    pub fn exact() -> Self {
        NumCtx { mode: Mode::Exact, prec: 256 }
    }

    pub fn guarded(prec: u32) -> Self {
        NumCtx { mode: Mode::Guarded, prec }
    }

    /// Same precision, but permitting guarded output. Used for measurement
    /// quantities (Hölder ratios, dimension fits) inside an exact run.
    pub fn relax(self) -> Self {
        NumCtx { mode: Mode::Guarded, prec: self.prec }
    }
}

/// Four-way comparison outcome; `Undecidable` when guarded intervals overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ordering4 {
    Less,
    Equal,
    Greater,
    Undecidable,
}

impl Ordering4 {
    pub fn is_le(self) -> bool {
        matches!(self, Ordering4::Less | Ordering4::Equal)
    }
    pub fn is_lt(self) -> bool {
        matches!(self, Ordering4::Less)
    }
    pub fn is_ge(self) -> bool {
        matches!(self, Ordering4::Greater | Ordering4::Equal)
    }
    pub fn is_gt(self) -> bool {
        matches!(self, Ordering4::Greater)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Round {
    Floor,
    Ceil,
}

// ---------------------------------------------------------------------------
// Fp: arbitrary-precision dyadic float
// ---------------------------------------------------------------------------

/// A dyadic float `mant * 2^exp`. Zero is normalized to `(0, 0)`.
#[derive(Clone, Debug)]
pub struct Fp {
    mant: BigInt,
    exp: i64,
}

impl Fp {
    pub fn zero() -> Self {
        Fp { mant: BigInt::zero(), exp: 0 }
    }

    pub fn from_bigint(m: BigInt) -> Self {
        Fp { mant: m, exp: 0 }
    }

    pub fn from_i64(v: i64) -> Self {
        Fp { mant: BigInt::from(v), exp: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    fn bits(&self) -> u64 {
        self.mant.magnitude().bits()
    }

    /// `floor(log2 |x|)`; None for zero.
    fn mag_exp(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exp + self.bits() as i64 - 1)
        }
    }

    /// Round to `prec` mantissa bits in direction `dir` (w.r.t. the real value).
    fn normalize(mut self, prec: u32, dir: Round) -> Fp {
        if self.mant.is_zero() {
            return Fp::zero();
        }
        let bits = self.bits();
        if bits <= prec as u64 {
            return self;
        }
        let shift = bits - prec as u64;
        // BigInt >> is an arithmetic shift: it rounds toward -inf.
        let q = &self.mant >> shift;
        let exact = (&q << shift) == self.mant;
        let mut m = q;
        if !exact && dir == Round::Ceil {
            m += 1;
        }
        self.exp += shift as i64;
        let out = Fp { mant: m, exp: self.exp };
        if out.bits() > prec as u64 {
            // carry produced one extra bit; the low bit is zero, so this is lossless
            out.normalize(prec, dir)
        } else {
            out
        }
    }

    fn neg(&self) -> Fp {
        Fp { mant: -&self.mant, exp: self.exp }
    }

    /// Exact sum; alignment is capped so a negligibly small addend only nudges
    /// the result one ulp in the rounding direction.
    fn add_dir(&self, other: &Fp, prec: u32, dir: Round) -> Fp {
        if self.is_zero() {
            return other.clone().normalize(prec, dir);
        }
        if other.is_zero() {
            return self.clone().normalize(prec, dir);
        }
        let (hi, lo) = if self.exp >= other.exp { (self, other) } else { (other, self) };
        let shift = (hi.exp - lo.exp) as u64;
        let budget = prec as u64 + hi.bits() + 8;
        if shift > budget + lo.bits() {
            // |lo| < ulp of the kept window; replace it by a directed nudge
            let base = hi.clone().normalize(prec, dir);
            let nudge_needed = match dir {
                Round::Floor => lo.is_negative(),
                Round::Ceil => !lo.is_negative(),
            };
            if !nudge_needed {
                return base;
            }
            let ulp_exp = base.exp - 1;
            let step = match dir {
                Round::Floor => BigInt::from(-1),
                Round::Ceil => BigInt::one(),
            };
            let sum = Fp {
                mant: (&base.mant << 1) + step,
                exp: ulp_exp,
            };
            return sum.normalize(prec, dir);
        }
        let sum = Fp {
            mant: (&hi.mant << shift) + &lo.mant,
            exp: lo.exp,
        };
        sum.normalize(prec, dir)
    }

    /// Exact product (no rounding).
    fn mul_exact(&self, other: &Fp) -> Fp {
        if self.is_zero() || other.is_zero() {
            return Fp::zero();
        }
        Fp {
            mant: &self.mant * &other.mant,
            exp: self.exp.checked_add(other.exp).expect("fp exponent overflow"),
        }
    }

    fn div_dir(&self, other: &Fp, prec: u32, dir: Round) -> Result<Fp, ScalarError> {
        if other.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        if self.is_zero() {
            return Ok(Fp::zero());
        }
        let scale = prec as i64 + 2 + (other.bits() as i64 - self.bits() as i64).max(0);
        let scale = scale.max(2) as u64;
        let num = &self.mant << scale;
        let (q, r) = num.div_mod_floor(&other.mant); // floor division, r has divisor's sign direction
        let exact = r.is_zero();
        // q is floor(self/other * 2^scale); floor w.r.t. the real value.
        let mut m = q;
        if !exact && dir == Round::Ceil {
            m += 1;
        }
        let exp = self
            .exp
            .checked_sub(other.exp)
            .and_then(|e| e.checked_sub(scale as i64))
            .expect("fp exponent overflow");
        Ok(Fp { mant: m, exp }.normalize(prec, dir))
    }

    /// `q`-th root of a nonnegative value, rounded in `dir`.
    fn nth_root_dir(&self, q: u32, prec: u32, dir: Round) -> Result<Fp, ScalarError> {
        if self.is_negative() {
            return Err(ScalarError::NegativeBase);
        }
        if self.is_zero() {
            return Ok(Fp::zero());
        }
        if q == 1 {
            return Ok(self.clone().normalize(prec, dir));
        }
        let want_bits = (q as u64) * (prec as u64 + 2);
        let deficit = want_bits.saturating_sub(self.bits());
        let mut shift = deficit as i64;
        // make exp - shift divisible by q
        let rem = (self.exp - shift).rem_euclid(q as i64);
        shift += rem;
        let m = self.mant.magnitude() << (shift as u64);
        let r = m.nth_root(q);
        let exact = r.pow(q) == m;
        let mut root = BigInt::from(r);
        if !exact && dir == Round::Ceil {
            root += 1;
        }
        let exp = (self.exp - shift) / q as i64;
        Ok(Fp { mant: root, exp }.normalize(prec, dir))
    }

    /// Exact integer power (k >= 1).
    fn pow_exact(&self, k: u32) -> Fp {
        debug_assert!(k >= 1);
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.mul_exact(self);
        }
        acc
    }

    fn cmp_fp(&self, other: &Fp) -> Ordering {
        let sa = self.mant.sign();
        let sb = other.mant.sign();
        match (sa, sb) {
            (Sign::Minus, Sign::NoSign) | (Sign::Minus, Sign::Plus) | (Sign::NoSign, Sign::Plus) => {
                return Ordering::Less
            }
            (Sign::Plus, Sign::NoSign) | (Sign::Plus, Sign::Minus) | (Sign::NoSign, Sign::Minus) => {
                return Ordering::Greater
            }
            (Sign::NoSign, Sign::NoSign) => return Ordering::Equal,
            _ => {}
        }
        // same nonzero sign: compare magnitudes via floor(log2), then exactly
        let ma = self.mag_exp().unwrap();
        let mb = other.mag_exp().unwrap();
        if ma != mb {
            let mag = ma.cmp(&mb);
            return if sa == Sign::Plus { mag } else { mag.reverse() };
        }
        let shift_a = (self.exp - self.exp.min(other.exp)) as u64;
        let shift_b = (other.exp - self.exp.min(other.exp)) as u64;
        (&self.mant << shift_a).cmp(&(&other.mant << shift_b))
    }

    /// Exact conversion to a rational (a dyadic float is always rational).
    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.mant << (self.exp as u64))
        } else {
            BigRational::new(self.mant.clone(), BigInt::one() << ((-self.exp) as u64))
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        // keep 64 mantissa bits, then scale
        let reduced = self.clone().normalize(64, Round::Floor);
        let m = reduced.mant.to_f64().unwrap_or(f64::NAN);
        let e = reduced.exp;
        m * pow2_f64(e)
    }

    fn from_rational_dir(r: &BigRational, prec: u32, dir: Round) -> Fp {
        if r.is_zero() {
            return Fp::zero();
        }
        let num = Fp::from_bigint(r.numer().clone());
        let den = Fp::from_bigint(r.denom().clone());
        num.div_dir(&den, prec, dir).expect("nonzero denominator")
    }
}

fn pow2_f64(e: i64) -> f64 {
    if e >= -1022 && e <= 1023 {
        f64::from_bits((((e + 1023) as u64) << 52) as u64)
    } else if e < -1022 {
        // subnormal range and below
        if e < -1200 {
            0.0
        } else {
            pow2_f64(-1022) * pow2_f64(e + 1022)
        }
    } else if e > 1200 {
        f64::INFINITY
    } else {
        pow2_f64(1023) * pow2_f64(e - 1023)
    }
}

// ---------------------------------------------------------------------------
// Ball: directed interval of dyadic floats
// ---------------------------------------------------------------------------

/// A closed interval `[lo, hi]` of dyadic floats containing the true value.
#[derive(Clone, Debug)]
pub struct Ball {
    lo: Fp,
    hi: Fp,
}

impl Ball {
    pub fn from_rational(r: &BigRational, prec: u32) -> Ball {
        Ball {
            lo: Fp::from_rational_dir(r, prec, Round::Floor),
            hi: Fp::from_rational_dir(r, prec, Round::Ceil),
        }
    }

    pub fn zero() -> Ball {
        Ball { lo: Fp::zero(), hi: Fp::zero() }
    }

    /// Interval from rational endpoints, rounded outward.
    pub fn from_endpoints_rational(lo: &BigRational, hi: &BigRational, prec: u32) -> Ball {
        assert!(lo <= hi);
        Ball {
            lo: Fp::from_rational_dir(lo, prec, Round::Floor),
            hi: Fp::from_rational_dir(hi, prec, Round::Ceil),
        }
    }

    fn assert_sane(self) -> Ball {
        debug_assert!(self.lo.cmp_fp(&self.hi) != Ordering::Greater);
        self
    }

    pub fn lo(&self) -> &Fp {
        &self.lo
    }

    pub fn hi(&self) -> &Fp {
        &self.hi
    }

    /// Exact midpoint (kept at full precision).
    pub fn mid(&self) -> BigRational {
        let two = BigRational::from_integer(BigInt::from(2));
        (self.lo.to_rational() + self.hi.to_rational()) / two
    }

    /// Upper bound on the radius.
    pub fn rad(&self) -> BigRational {
        let two = BigRational::from_integer(BigInt::from(2));
        (self.hi.to_rational() - self.lo.to_rational()) / two
    }

    pub fn contains_rational(&self, r: &BigRational) -> bool {
        self.lo.to_rational() <= *r && *r <= self.hi.to_rational()
    }

    fn neg(&self) -> Ball {
        Ball { lo: self.hi.neg(), hi: self.lo.neg() }
    }

    fn add(&self, o: &Ball, prec: u32) -> Ball {
        Ball {
            lo: self.lo.add_dir(&o.lo, prec, Round::Floor),
            hi: self.hi.add_dir(&o.hi, prec, Round::Ceil),
        }
        .assert_sane()
    }

    fn sub(&self, o: &Ball, prec: u32) -> Ball {
        self.add(&o.neg(), prec)
    }

    fn mul(&self, o: &Ball, prec: u32) -> Ball {
        // products are exact; only the final selection is rounded
        let cands = [
            self.lo.mul_exact(&o.lo),
            self.lo.mul_exact(&o.hi),
            self.hi.mul_exact(&o.lo),
            self.hi.mul_exact(&o.hi),
        ];
        let mut lo = cands[0].clone();
        let mut hi = cands[0].clone();
        for c in &cands[1..] {
            if c.cmp_fp(&lo) == Ordering::Less {
                lo = c.clone();
            }
            if c.cmp_fp(&hi) == Ordering::Greater {
                hi = c.clone();
            }
        }
        Ball {
            lo: lo.normalize(prec, Round::Floor),
            hi: hi.normalize(prec, Round::Ceil),
        }
        .assert_sane()
    }

    fn div(&self, o: &Ball, prec: u32) -> Result<Ball, ScalarError> {
        let sign_lo = o.lo.mant.sign();
        let sign_hi = o.hi.mant.sign();
        if sign_lo != sign_hi || sign_lo == Sign::NoSign {
            return Err(ScalarError::DivisionByZero);
        }
        let mut cands = Vec::with_capacity(4);
        for (n, d, dir) in [
            (&self.lo, &o.lo, Round::Floor),
            (&self.lo, &o.hi, Round::Floor),
            (&self.hi, &o.lo, Round::Ceil),
            (&self.hi, &o.hi, Round::Ceil),
        ] {
            cands.push((n.div_dir(d, prec, dir)?, dir));
        }
        // recompute all four in both directions to get a sound hull
        let mut lo: Option<Fp> = None;
        let mut hi: Option<Fp> = None;
        for (n, d) in [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)] {
            let down = n.div_dir(d, prec, Round::Floor)?;
            let up = n.div_dir(d, prec, Round::Ceil)?;
            lo = Some(match lo {
                None => down,
                Some(l) => {
                    if down.cmp_fp(&l) == Ordering::Less {
                        down
                    } else {
                        l
                    }
                }
            });
            hi = Some(match hi {
                None => up,
                Some(h) => {
                    if up.cmp_fp(&h) == Ordering::Greater {
                        up
                    } else {
                        h
                    }
                }
            });
        }
        Ok(Ball { lo: lo.unwrap(), hi: hi.unwrap() }.assert_sane())
    }

    /// `q`-th root; requires the interval to be nonnegative.
    fn nth_root(&self, q: u32, prec: u32) -> Result<Ball, ScalarError> {
        if self.lo.is_negative() {
            return Err(ScalarError::NegativeBase);
        }
        Ok(Ball {
            lo: self.lo.nth_root_dir(q, prec, Round::Floor)?,
            hi: self.hi.nth_root_dir(q, prec, Round::Ceil)?,
        }
        .assert_sane())
    }

    /// Integer power `k >= 1`; monotone on nonnegative intervals, and handled
    /// by sign analysis otherwise.
    fn pow_u32(&self, k: u32, prec: u32) -> Ball {
        if k == 1 {
            return self.clone();
        }
        let lo_p = self.lo.pow_exact(k);
        let hi_p = self.hi.pow_exact(k);
        let even = k % 2 == 0;
        let (lo, hi) = if !even || !self.lo.is_negative() {
            (lo_p, hi_p)
        } else if !self.hi.mant.is_positive() {
            (hi_p, lo_p)
        } else {
            // straddles zero with even power
            let m = if lo_p.cmp_fp(&hi_p) == Ordering::Greater { lo_p } else { hi_p };
            (Fp::zero(), m)
        };
        Ball {
            lo: lo.normalize(prec, Round::Floor),
            hi: hi.normalize(prec, Round::Ceil),
        }
        .assert_sane()
    }

    fn cmp(&self, o: &Ball) -> Ordering4 {
        if self.hi.cmp_fp(&o.lo) == Ordering::Less {
            return Ordering4::Less;
        }
        if o.hi.cmp_fp(&self.lo) == Ordering::Less {
            return Ordering4::Greater;
        }
        let self_point = self.lo.cmp_fp(&self.hi) == Ordering::Equal;
        let other_point = o.lo.cmp_fp(&o.hi) == Ordering::Equal;
        if self_point && other_point && self.lo.cmp_fp(&o.lo) == Ordering::Equal {
            return Ordering4::Equal;
        }
        Ordering4::Undecidable
    }
}

// ---------------------------------------------------------------------------
// Scalar
// ---------------------------------------------------------------------------

/// The numeric currency of the crate.
#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(BigRational),
    Guarded(Ball),
}

impl Scalar {
    pub fn zero() -> Scalar {
        Scalar::Exact(BigRational::zero())
    }

    pub fn one() -> Scalar {
        Scalar::Exact(BigRational::one())
    }

    pub fn from_int(v: i64) -> Scalar {
        Scalar::Exact(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Scalar {
        assert!(den != 0);
        Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(r: BigRational) -> Scalar {
        Scalar::Exact(r)
    }

    /// `10^-k` as an exact rational; handy for tolerances.
    pub fn pow10(k: i32) -> Scalar {
        let base = BigInt::from(10u32);
        if k >= 0 {
            Scalar::Exact(BigRational::from_integer(base.pow(k as u32)))
        } else {
            Scalar::Exact(BigRational::new(BigInt::one(), base.pow((-k) as u32)))
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Guarded(b) => b.lo.is_zero() && b.hi.is_zero(),
        }
    }

    /// Exact rational payload, if exact.
    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Guarded(_) => None,
        }
    }

    /// Midpoint as a rational (exact value itself when exact).
    pub fn mid_rational(&self) -> BigRational {
        match self {
            Scalar::Exact(r) => r.clone(),
            Scalar::Guarded(b) => b.mid(),
        }
    }

    /// Upper bound for the distance from `mid_rational` to the true value.
    pub fn rad_rational(&self) -> BigRational {
        match self {
            Scalar::Exact(_) => BigRational::zero(),
            Scalar::Guarded(b) => b.rad(),
        }
    }

    /// Sound upper bound of the value as a rational.
    pub fn upper_rational(&self) -> BigRational {
        match self {
            Scalar::Exact(r) => r.clone(),
            Scalar::Guarded(b) => b.hi.to_rational(),
        }
    }

    /// Sound lower bound of the value as a rational.
    pub fn lower_rational(&self) -> BigRational {
        match self {
            Scalar::Exact(r) => r.clone(),
            Scalar::Guarded(b) => b.lo.to_rational(),
        }
    }

    pub fn to_ball(&self, prec: u32) -> Ball {
        match self {
            Scalar::Exact(r) => Ball::from_rational(r, prec),
            Scalar::Guarded(b) => b.clone(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => {
                Fp::from_rational_dir(r, 64, Round::Floor).to_f64()
            }
            Scalar::Guarded(b) => {
                let two = 2.0f64;
                (b.lo.to_f64() + b.hi.to_f64()) / two
            }
        }
    }

    pub fn add(&self, o: &Scalar, ctx: &NumCtx) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a + b),
            _ => Scalar::Guarded(self.to_ball(ctx.prec).add(&o.to_ball(ctx.prec), ctx.prec)),
        }
    }

    pub fn sub(&self, o: &Scalar, ctx: &NumCtx) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a - b),
            _ => Scalar::Guarded(self.to_ball(ctx.prec).sub(&o.to_ball(ctx.prec), ctx.prec)),
        }
    }

    pub fn mul(&self, o: &Scalar, ctx: &NumCtx) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a * b),
            _ => Scalar::Guarded(self.to_ball(ctx.prec).mul(&o.to_ball(ctx.prec), ctx.prec)),
        }
    }

    pub fn div(&self, o: &Scalar, ctx: &NumCtx) -> Result<Scalar, ScalarError> {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => {
                if b.is_zero() {
                    Err(ScalarError::DivisionByZero)
                } else {
                    Ok(Scalar::Exact(a / b))
                }
            }
            _ => Ok(Scalar::Guarded(
                self.to_ball(ctx.prec).div(&o.to_ball(ctx.prec), ctx.prec)?,
            )),
        }
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(-r),
            Scalar::Guarded(b) => Scalar::Guarded(b.neg()),
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.abs()),
            Scalar::Guarded(b) => {
                if !b.lo.is_negative() {
                    Scalar::Guarded(b.clone())
                } else if !b.hi.mant.is_positive() {
                    Scalar::Guarded(b.neg())
                } else {
                    let nl = b.lo.neg();
                    let hi = if nl.cmp_fp(&b.hi) == Ordering::Greater { nl } else { b.hi.clone() };
                    Scalar::Guarded(Ball { lo: Fp::zero(), hi })
                }
            }
        }
    }

    /// `x^(p/q)` with `q >= 1`. Exact inputs give an exact result when the
    /// power is rational; otherwise guarded output at `ctx.prec`, unless
    /// `ctx.mode` demands exactness.
    pub fn pow_rational(&self, p: i64, q: u32, ctx: &NumCtx) -> Result<Scalar, ScalarError> {
        assert!(q >= 1, "root index must be positive");
        // reduce p/q
        let g = gcd_u64(p.unsigned_abs(), q as u64);
        let p = p / g as i64;
        let q = (q as u64 / g) as u32;
        if p == 0 {
            if self.is_zero() {
                // 0^0 treated as 1 by convention of empty products
                return Ok(Scalar::one());
            }
            return Ok(Scalar::one());
        }
        match self {
            Scalar::Exact(r) => {
                if r.is_negative() {
                    return Err(ScalarError::NegativeBase);
                }
                if r.is_zero() {
                    if p < 0 {
                        return Err(ScalarError::ZeroToNegativePower);
                    }
                    return Ok(Scalar::zero());
                }
                if let Some(root) = exact_root(r, q) {
                    return Ok(Scalar::Exact(rational_pow_int(&root, p)));
                }
                if ctx.mode == Mode::Exact {
                    return Err(ScalarError::IrrationalInExactMode);
                }
                let ball = Ball::from_rational(r, ctx.prec + 16);
                ball_pow(&ball, p, q, ctx.prec).map(Scalar::Guarded)
            }
            Scalar::Guarded(b) => ball_pow(b, p, q, ctx.prec).map(Scalar::Guarded),
        }
    }

    pub fn compare(&self, o: &Scalar) -> Ordering4 {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => match a.cmp(b) {
                Ordering::Less => Ordering4::Less,
                Ordering::Equal => Ordering4::Equal,
                Ordering::Greater => Ordering4::Greater,
            },
            (Scalar::Exact(a), Scalar::Guarded(b)) => cmp_rational_ball(a, b),
            (Scalar::Guarded(a), Scalar::Exact(b)) => match cmp_rational_ball(b, a) {
                Ordering4::Less => Ordering4::Greater,
                Ordering4::Greater => Ordering4::Less,
                other => other,
            },
            (Scalar::Guarded(a), Scalar::Guarded(b)) => a.cmp(b),
        }
    }

    /// Floor as an `i64` when it is decided (guarded values whose endpoints
    /// floor differently return `None`).
    pub fn floor_index(&self) -> Option<i64> {
        match self {
            Scalar::Exact(r) => r.floor().to_integer().to_i64(),
            Scalar::Guarded(b) => {
                let lo = b.lo().to_rational().floor().to_integer();
                let hi = b.hi().to_rational().floor().to_integer();
                if lo == hi {
                    lo.to_i64()
                } else {
                    None
                }
            }
        }
    }

    /// Pointwise minimum of sound upper bounds (for error bookkeeping).
    pub fn min_by_upper(&self, o: &Scalar) -> Scalar {
        if self.upper_rational() <= o.upper_rational() {
            self.clone()
        } else {
            o.clone()
        }
    }

    /// Textual form: exact scalars as `p/q` (integers as `p`), guarded
    /// scalars as a decimal with a `±e` suffix.
    pub fn to_text(&self) -> String {
        match self {
            Scalar::Exact(r) => format_rational(r),
            Scalar::Guarded(b) => {
                let mid = b.mid();
                let rad = b.rad();
                let mut s = decimal_of_rational(&mid, 40);
                s.push_str(" ± ");
                s.push_str(&decimal_sci_upper(&rad));
                s
            }
        }
    }

    /// Parse `p/q`, an integer, or a decimal like `0.25` / `1e-12`.
    pub fn parse(s: &str) -> Option<Scalar> {
        let s = s.trim();
        if let Some(idx) = s.find('/') {
            let num: BigInt = s[..idx].trim().parse().ok()?;
            let den: BigInt = s[idx + 1..].trim().parse().ok()?;
            if den.is_zero() {
                return None;
            }
            return Some(Scalar::Exact(BigRational::new(num, den)));
        }
        parse_decimal(s).map(Scalar::Exact)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    let mut a = a;
    let mut b = b;
    if a == 0 {
        return b.max(1);
    }
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn rational_pow_int(r: &BigRational, p: i64) -> BigRational {
    let k = p.unsigned_abs() as u32;
    let mut acc = BigRational::one();
    for _ in 0..k {
        acc *= r;
    }
    if p < 0 {
        acc.recip()
    } else {
        acc
    }
}

/// Exact `q`-th root of a positive rational, if it is rational.
fn exact_root(r: &BigRational, q: u32) -> Option<BigRational> {
    if q == 1 {
        return Some(r.clone());
    }
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    let rn = num.nth_root(q);
    if &rn.pow(q) != num {
        return None;
    }
    let rd = den.nth_root(q);
    if &rd.pow(q) != den {
        return None;
    }
    Some(BigRational::new(BigInt::from(rn), BigInt::from(rd)))
}

fn ball_pow(b: &Ball, p: i64, q: u32, prec: u32) -> Result<Ball, ScalarError> {
    if b.lo.is_negative() {
        return Err(ScalarError::NegativeBase);
    }
    let rooted = if q == 1 { b.clone() } else { b.nth_root(q, prec + 8)? };
    let powed = if p.unsigned_abs() == 1 {
        rooted
    } else {
        rooted.pow_u32(p.unsigned_abs() as u32, prec + 8)
    };
    if p < 0 {
        if powed.lo.is_zero() || powed.lo.is_negative() {
            return Err(ScalarError::ZeroToNegativePower);
        }
        let one = Ball { lo: Fp::from_i64(1), hi: Fp::from_i64(1) };
        one.div(&powed, prec)
    } else {
        Ok(Ball {
            lo: powed.lo.normalize(prec, Round::Floor),
            hi: powed.hi.normalize(prec, Round::Ceil),
        })
    }
}

fn cmp_rational_ball(r: &BigRational, b: &Ball) -> Ordering4 {
    let lo = b.lo.to_rational();
    let hi = b.hi.to_rational();
    if *r < lo {
        return Ordering4::Less;
    }
    if *r > hi {
        return Ordering4::Greater;
    }
    if lo == hi && *r == lo {
        return Ordering4::Equal;
    }
    Ordering4::Undecidable
}

fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        let mut s = r.numer().to_string();
        s.push('/');
        s.push_str(&r.denom().to_string());
        s
    }
}

/// Deterministic decimal rendering with up to `sig` significant digits
/// (round toward zero, trailing zeros trimmed).
pub fn decimal_of_rational(r: &BigRational, sig: usize) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.is_negative();
    let mut v = r.abs();
    let one = BigRational::one();
    let ten = BigRational::from_integer(BigInt::from(10));
    let mut exp10: i64 = 0;
    while v < BigRational::new(BigInt::one(), BigInt::from(10)) {
        v = &v * &ten;
        exp10 -= 1;
    }
    while v >= one {
        v = &v / &ten;
        exp10 += 1;
    }
    // now 0.1 <= v < 1; emit digits
    let mut digits = String::new();
    let mut cur = v;
    for _ in 0..sig {
        cur = &cur * &ten;
        let d = cur.to_integer();
        let dd: u32 = d.to_u32().unwrap_or(0).min(9);
        digits.push(char::from_digit(dd, 10).unwrap());
        cur -= BigRational::from_integer(d);
        if cur.is_zero() {
            break;
        }
    }
    while digits.ends_with('0') {
        digits.pop();
    }
    if digits.is_empty() {
        digits.push('0');
    }
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if exp10 <= 0 {
        out.push_str("0.");
        for _ in 0..(-exp10) {
            out.push('0');
        }
        out.push_str(&digits);
    } else if (exp10 as usize) >= digits.len() {
        if exp10 > 24 {
            // large magnitudes go to scientific form
            out.push_str(&digits[..1]);
            if digits.len() > 1 {
                out.push('.');
                out.push_str(&digits[1..]);
            }
            out.push('e');
            out.push_str(&(exp10 - 1).to_string());
        } else {
            out.push_str(&digits);
            for _ in 0..(exp10 as usize - digits.len()) {
                out.push('0');
            }
        }
    } else {
        out.push_str(&digits[..exp10 as usize]);
        out.push('.');
        out.push_str(&digits[exp10 as usize..]);
    }
    out
}

/// Short scientific form of a nonnegative rational, rounded up to 2
/// significant digits (suitable for error radii).
pub fn decimal_sci_upper(r: &BigRational) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let ten = BigRational::from_integer(BigInt::from(10));
    let mut v = r.abs();
    let mut exp10: i64 = 0;
    while v < BigRational::new(BigInt::one(), BigInt::from(10)) {
        v = &v * &ten;
        exp10 -= 1;
    }
    while v >= BigRational::one() {
        v = &v / &ten;
        exp10 += 1;
    }
    // v in [0.1, 1): take ceil(v*100)
    let scaled = &v * BigRational::from_integer(BigInt::from(100));
    let mut m = scaled.ceil().to_integer().to_u32().unwrap_or(100);
    let mut e = exp10;
    if m >= 100 {
        m = 10;
        e += 1;
    }
    let d1 = m / 10;
    let d2 = m % 10;
    let mut out = String::new();
    out.push(char::from_digit(d1, 10).unwrap());
    if d2 != 0 {
        out.push('.');
        out.push(char::from_digit(d2, 10).unwrap());
    }
    out.push('e');
    out.push_str(&(e - 1).to_string());
    out
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..].parse().ok()?;
            (&s[..i], e)
        }
        None => (s, 0i64),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let neg = int_part.starts_with('-');
    let int_clean = int_part.trim_start_matches(['-', '+']);
    let mut digits = String::new();
    digits.push_str(if int_clean.is_empty() { "0" } else { int_clean });
    digits.push_str(frac_part);
    let num: BigInt = digits.parse().ok()?;
    let shift = frac_part.len() as i64 - exp;
    let base = BigInt::from(10u32);
    let r = if shift >= 0 {
        BigRational::new(num, base.pow(shift as u32))
    } else {
        BigRational::from_integer(num * base.pow((-shift) as u32))
    };
    Some(if neg { -r } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn exact_arithmetic_stays_exact() {
        let ctx = NumCtx::exact();
        let a = Scalar::from_ratio(1, 3);
        let b = Scalar::from_ratio(2, 6);
        assert_eq!(a.compare(&b), Ordering4::Equal);
        let s = a.add(&b, &ctx);
        assert_eq!(s.as_rational().unwrap(), &rat(2, 3));
    }

    #[test]
    fn pow_rational_perfect_square_is_exact() {
        let ctx = NumCtx::exact();
        let x = Scalar::from_ratio(1, 16);
        let r = x.pow_rational(1, 2, &ctx).unwrap();
        assert_eq!(r.as_rational().unwrap(), &rat(1, 4));
        let y = Scalar::from_ratio(1, 4);
        let r4 = y.pow_rational(4, 1, &ctx).unwrap();
        assert_eq!(r4.as_rational().unwrap(), &rat(1, 256));
    }

    #[test]
    fn pow_rational_irrational_demands_guarded() {
        let exact = NumCtx::exact();
        let x = Scalar::from_int(2);
        assert_eq!(
            x.pow_rational(1, 2, &exact).unwrap_err(),
            ScalarError::IrrationalInExactMode
        );
        let g = NumCtx::guarded(128);
        let r = x.pow_rational(1, 2, &g).unwrap();
        // digit-by-digit square root oracle: isqrt(2 * 10^60) gives 30 digits
        let scale = BigInt::from(10u32).pow(60);
        let target = (BigInt::from(2) * &scale).sqrt();
        let lo = BigRational::new(target.clone(), BigInt::from(10u32).pow(30));
        let hi = BigRational::new(target + 1, BigInt::from(10u32).pow(30));
        let rl = r.lower_rational();
        let rh = r.upper_rational();
        assert!(rl <= hi && rh >= lo, "sqrt(2) enclosure misses oracle digits");
        assert!(rh.clone() - rl.clone() < rat(1, 1_000_000_000), "enclosure too wide");
    }

    #[test]
    fn negative_base_rejected() {
        let ctx = NumCtx::guarded(64);
        let x = Scalar::from_int(-2);
        assert_eq!(x.pow_rational(1, 2, &ctx).unwrap_err(), ScalarError::NegativeBase);
    }

    #[test]
    fn guarded_overlap_is_undecidable() {
        let prec = 64;
        // 0.5 ± 0.1 vs 0.55 ± 0.1: overlapping intervals stay undecided
        let x = Scalar::Guarded(Ball::from_endpoints_rational(&rat(2, 5), &rat(3, 5), prec));
        let y = Scalar::Guarded(Ball::from_endpoints_rational(&rat(9, 20), &rat(13, 20), prec));
        assert_eq!(x.compare(&y), Ordering4::Undecidable);
        // disjoint intervals decide
        let z = Scalar::Guarded(Ball::from_endpoints_rational(&rat(7, 10), &rat(8, 10), prec));
        assert_eq!(x.compare(&z), Ordering4::Less);
        assert_eq!(z.compare(&x), Ordering4::Greater);
    }

    #[test]
    fn division_by_zero_interval() {
        let prec = 64;
        let one = Scalar::one().to_ball(prec);
        let z = Ball { lo: Fp::from_i64(-1), hi: Fp::from_i64(1) };
        assert_eq!(one.div(&z, prec).unwrap_err(), ScalarError::DivisionByZero);
    }

    #[test]
    fn text_roundtrip_and_decimal() {
        let x = Scalar::from_ratio(-7, 3);
        assert_eq!(x.to_text(), "-7/3");
        assert_eq!(Scalar::parse("-7/3").unwrap().compare(&x), Ordering4::Equal);
        let d = Scalar::parse("0.125").unwrap();
        assert_eq!(d.as_rational().unwrap(), &rat(1, 8));
        let e = Scalar::parse("1e-3").unwrap();
        assert_eq!(e.as_rational().unwrap(), &rat(1, 1000));
        assert_eq!(decimal_of_rational(&rat(1, 8), 20), "0.125");
        assert_eq!(decimal_of_rational(&rat(2000, 1), 20), "2000");
    }

    #[test]
    fn shift_rounds_toward_neg_infinity() {
        // normalize() relies on BigInt's arithmetic right shift
        let m = BigInt::from(-5);
        assert_eq!(&m >> 1u32, BigInt::from(-3));
    }

    #[test]
    fn fp_root_directed() {
        let two = Fp::from_i64(2);
        let lo = two.nth_root_dir(2, 80, Round::Floor).unwrap();
        let hi = two.nth_root_dir(2, 80, Round::Ceil).unwrap();
        let lr = lo.to_rational();
        let hr = hi.to_rational();
        assert!(lr.clone() * lr.clone() <= rat(2, 1));
        assert!(hr.clone() * hr.clone() >= rat(2, 1));
    }
}
