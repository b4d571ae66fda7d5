//! Exact arithmetic in the field of p-adic numbers with precision tracking,
//! exact magnitudes, and the closed-ball algebra of the ultrametric.
//!
//! A nonzero element is stored as `p^v * u` where `u` is a unit mantissa
//! (coprime to `p`) known modulo `p^prec`. The represented value is known
//! modulo `p^(v + prec)`. Additive cancellation shrinks `prec`; cancelling
//! every known digit is a hard [`PadicError::PrecisionUnderflow`], never a
//! silent zero.

use std::fmt;

use num::integer::Integer;
use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use thiserror::Error;

/// Errors from p-adic arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PadicError {
    /// Rational input with denominator zero.
    #[error("zero denominator in rational input")]
    ZeroDenominator,
    /// Multiplicative inverse of zero.
    #[error("division by zero")]
    DivisionByZero,
    /// Cancellation consumed every significant digit; the result is
    /// indistinguishable from zero modulo `p^modulus_exp`. The caller must
    /// raise the working precision to proceed.
    #[error("precision underflow: result is 0 modulo p^{modulus_exp}")]
    PrecisionUnderflow {
        /// The result is known only as a multiple of `p^modulus_exp`.
        modulus_exp: i64,
    },
    /// Two values agree on every digit available at working precision, so
    /// their distance cannot be resolved.
    #[error("values are indistinguishable at working precision")]
    IndistinguishableAtPrecision,
    /// Invalid prime or precision parameters.
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Result alias for p-adic operations.
pub type PadicResult<T> = Result<T, PadicError>;

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// `p^e` as u128; `e` must be small enough that the result fits.
fn pow128(p: u64, e: u32) -> u128 {
    (p as u128).pow(e)
}

/// Largest exponent such that `p^e <= 2^62` (headroom for u128 products).
fn max_precision_for(p: u64) -> u32 {
    let mut e = 0u32;
    let mut acc: u128 = 1;
    while acc * (p as u128) <= (1u128 << 62) {
        acc *= p as u128;
        e += 1;
    }
    e
}

/// Number of factors of `p` in `n` (requires `n != 0`).
fn valuation_u128(mut n: u128, p: u64) -> u32 {
    debug_assert!(n != 0);
    let mut v = 0;
    let p = p as u128;
    while n.is_multiple_of(p) {
        n /= p;
        v += 1;
    }
    v
}

/// Modular inverse of `a` modulo `m` via extended Euclid; `gcd(a, m) = 1`.
fn mod_inverse(a: u128, m: u128) -> u128 {
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    debug_assert_eq!(old_r, 1, "inverse requires unit argument");
    old_s.rem_euclid(m as i128) as u128
}

/// An exact magnitude in the value group of the p-adic absolute value:
/// either `0` or `p^(-e)` for an integer exponent `e`.
///
/// Ordered by the real value it denotes: `Zero` is least, and
/// `Finite(e1) > Finite(e2)` iff `e1 < e2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Magnitude {
    /// The magnitude of zero.
    Zero,
    /// The value `p^(-exponent)`.
    Finite(i64),
}

impl Magnitude {
    /// True for the magnitude of zero.
    pub fn is_zero(&self) -> bool {
        matches!(self, Magnitude::Zero)
    }

    /// The exponent `e` with value `p^(-e)`, or `None` for zero.
    pub fn exponent(&self) -> Option<i64> {
        match self {
            Magnitude::Zero => None,
            Magnitude::Finite(e) => Some(*e),
        }
    }

    /// The exact nonnegative rational this magnitude denotes for prime `p`.
    pub fn to_rational(self, p: u64) -> BigRational {
        match self {
            Magnitude::Zero => BigRational::from_integer(BigInt::from(0)),
            Magnitude::Finite(e) => {
                let base = BigInt::from(p);
                if e >= 0 {
                    BigRational::new(BigInt::one(), base.pow(e as u32))
                } else {
                    BigRational::from_integer(base.pow((-e) as u32))
                }
            }
        }
    }

    /// String form: `"0"` or `"p^-e"` with the concrete prime, e.g. `"5^-2"`.
    pub fn repr(self, p: u64) -> String {
        match self {
            Magnitude::Zero => "0".to_string(),
            Magnitude::Finite(e) => format!("{}^{}", p, -e),
        }
    }
}

impl std::ops::Mul for Magnitude {
    type Output = Magnitude;

    /// Product of magnitudes: exponents add, zero annihilates.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, other: Magnitude) -> Magnitude {
        match (self, other) {
            (Magnitude::Finite(a), Magnitude::Finite(b)) => Magnitude::Finite(a + b),
            _ => Magnitude::Zero,
        }
    }
}

impl Ord for Magnitude {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Magnitude::Zero, Magnitude::Zero) => std::cmp::Ordering::Equal,
            (Magnitude::Zero, _) => std::cmp::Ordering::Less,
            (_, Magnitude::Zero) => std::cmp::Ordering::Greater,
            // p^(-a) > p^(-b) iff a < b
            (Magnitude::Finite(a), Magnitude::Finite(b)) => b.cmp(a),
        }
    }
}

impl PartialOrd for Magnitude {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// An exact element of `Q_p` at working precision.
///
/// Nonzero values are `p^v * u` with `u` a unit modulo `p^prec`; `prec`
/// counts the significant base-p digits carried. The zero flag marks an
/// exactly-known zero (never a rounded one).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PadicNumber {
    p: u64,
    zero: bool,
    v: i64,
    u: u64,
    prec: u32,
}

impl PadicNumber {
    fn check_params(p: u64, precision: u32) -> PadicResult<()> {
        if !is_prime(p) {
            return Err(PadicError::InvalidParameter("p must be prime"));
        }
        if precision == 0 {
            return Err(PadicError::InvalidParameter("precision must be positive"));
        }
        if precision > max_precision_for(p) {
            return Err(PadicError::InvalidParameter(
                "p^precision exceeds the supported mantissa range",
            ));
        }
        Ok(())
    }

    /// The exact zero of `Q_p`.
    pub fn zero(p: u64, precision: u32) -> PadicResult<Self> {
        Self::check_params(p, precision)?;
        Ok(PadicNumber {
            p,
            zero: true,
            v: 0,
            u: 0,
            prec: precision,
        })
    }

    /// The multiplicative identity.
    pub fn one(p: u64, precision: u32) -> PadicResult<Self> {
        Self::from_integer(1, p, precision)
    }

    /// Exact image of the integer `a` in `Q_p` to `precision` digits.
    pub fn from_integer(a: i64, p: u64, precision: u32) -> PadicResult<Self> {
        Self::from_rational(a, 1, p, precision)
    }

    /// Exact image of the rational `a/b` in `Q_p` to `precision` significant
    /// digits: the valuation is the net power of `p` in `a/b` and the
    /// mantissa is `a' * (b')^(-1) mod p^precision` for the unit parts.
    pub fn from_rational(a: i64, b: i64, p: u64, precision: u32) -> PadicResult<Self> {
        Self::check_params(p, precision)?;
        if b == 0 {
            return Err(PadicError::ZeroDenominator);
        }
        if a == 0 {
            return Self::zero(p, precision);
        }
        let mut av = a as i128;
        let mut bv = b as i128;
        let p128 = p as i128;
        let mut s: i64 = 0;
        while (av % p128) == 0 {
            av /= p128;
            s += 1;
        }
        while (bv % p128) == 0 {
            bv /= p128;
            s -= 1;
        }
        let m = pow128(p, precision) as i128;
        let ar = av.rem_euclid(m) as u128;
        let br = bv.rem_euclid(m) as u128;
        let u = (ar * mod_inverse(br, m as u128)) % m as u128;
        debug_assert!(u != 0 && !u.is_multiple_of(p as u128));
        Ok(PadicNumber {
            p,
            zero: false,
            v: s,
            u: u as u64,
            prec: precision,
        })
    }

    /// The pure power `p^v` as an exact element.
    pub fn p_power(v: i64, p: u64, precision: u32) -> PadicResult<Self> {
        Self::check_params(p, precision)?;
        Ok(PadicNumber {
            p,
            zero: false,
            v,
            u: 1,
            prec: precision,
        })
    }

    /// Exact image of an arbitrary-size rational in `Q_p`.
    pub fn from_big_rational(q: &BigRational, p: u64, precision: u32) -> PadicResult<Self> {
        Self::check_params(p, precision)?;
        if q.numer().is_zero() {
            return Self::zero(p, precision);
        }
        let pb = BigInt::from(p);
        let mut numer = q.numer().clone();
        let mut denom = q.denom().clone();
        let mut v: i64 = 0;
        while (&numer % &pb).is_zero() {
            numer /= &pb;
            v += 1;
        }
        while (&denom % &pb).is_zero() {
            denom /= &pb;
            v -= 1;
        }
        let m = BigInt::from(pow128(p, precision));
        let nr = numer.mod_floor(&m).to_u64().expect("reduced below p^precision");
        let dr = denom.mod_floor(&m).to_u64().expect("reduced below p^precision");
        let modulus = pow128(p, precision);
        let u = (nr as u128 * mod_inverse(dr as u128, modulus)) % modulus;
        Ok(PadicNumber {
            p,
            zero: false,
            v,
            u: u as u64,
            prec: precision,
        })
    }

    /// Build `sum_i digits[i] * p^(start_exp + i)` from base-p digits.
    /// All-zero digit strings give the zero of `Q_p` at this precision.
    pub fn from_digits(digits: &[u64], start_exp: i64, p: u64, precision: u32) -> PadicResult<Self> {
        Self::check_params(p, precision)?;
        if digits.len() as u32 > max_precision_for(p) {
            return Err(PadicError::InvalidParameter("too many digits for mantissa range"));
        }
        let mut acc: u128 = 0;
        for (i, &d) in digits.iter().enumerate() {
            if d >= p {
                return Err(PadicError::InvalidParameter("digit out of range"));
            }
            acc += d as u128 * pow128(p, i as u32);
        }
        if acc == 0 {
            return Self::zero(p, precision);
        }
        let t = valuation_u128(acc, p);
        let u = acc / pow128(p, t);
        let avail = digits.len() as u32 - t;
        Ok(PadicNumber {
            p,
            zero: false,
            v: start_exp + t as i64,
            u: u as u64,
            prec: avail.min(precision).max(1),
        })
    }

    /// The prime of the ambient field.
    pub fn prime(&self) -> u64 {
        self.p
    }

    /// True for the exact zero.
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// Valuation `v` with `|x| = p^(-v)`; `None` for zero.
    pub fn valuation(&self) -> Option<i64> {
        if self.zero {
            None
        } else {
            Some(self.v)
        }
    }

    /// Unit mantissa in `[1, p^precision)`; `None` for zero.
    pub fn mantissa(&self) -> Option<u64> {
        if self.zero {
            None
        } else {
            Some(self.u)
        }
    }

    /// Significant base-p digits this value carries.
    pub fn precision(&self) -> u32 {
        self.prec
    }

    /// Absolute value as an exact magnitude.
    pub fn abs(&self) -> Magnitude {
        if self.zero {
            Magnitude::Zero
        } else {
            Magnitude::Finite(self.v)
        }
    }

    fn assert_same_field(&self, other: &Self) {
        assert_eq!(self.p, other.p, "operands must share the prime p");
    }

    /// Exact sum. Leading-digit cancellation shrinks the significant digit
    /// count; total cancellation is a `PrecisionUnderflow`.
    pub fn add(&self, other: &Self) -> PadicResult<Self> {
        self.assert_same_field(other);
        if self.zero {
            return Ok(*other);
        }
        if other.zero {
            return Ok(*self);
        }
        let m = self.v.min(other.v);
        let abs_prec = (self.v + self.prec as i64).min(other.v + other.prec as i64);
        let r = (abs_prec - m) as u32;
        let modulus = pow128(self.p, r);
        let term = |x: &Self| -> u128 {
            let shift = (x.v - m) as u32;
            if shift >= r {
                0
            } else {
                (x.u as u128 % pow128(self.p, r - shift)) * pow128(self.p, shift)
            }
        };
        let s = (term(self) + term(other)) % modulus;
        if s == 0 {
            return Err(PadicError::PrecisionUnderflow {
                modulus_exp: abs_prec,
            });
        }
        let t = valuation_u128(s, self.p);
        let u = s / pow128(self.p, t);
        Ok(PadicNumber {
            p: self.p,
            zero: false,
            v: m + t as i64,
            u: u as u64,
            prec: r - t,
        })
    }

    /// Additive inverse.
    pub fn neg(&self) -> Self {
        if self.zero {
            return *self;
        }
        let modulus = pow128(self.p, self.prec);
        PadicNumber {
            u: (modulus - self.u as u128) as u64,
            ..*self
        }
    }

    /// Exact difference; see [`PadicNumber::add`] for the cancellation rule.
    pub fn sub(&self, other: &Self) -> PadicResult<Self> {
        self.add(&other.neg())
    }

    /// Exact product: valuations add, mantissas multiply; no precision loss.
    pub fn mul(&self, other: &Self) -> PadicResult<Self> {
        self.assert_same_field(other);
        if self.zero || other.zero {
            return PadicNumber::zero(self.p, self.prec.min(other.prec).max(1));
        }
        let r = self.prec.min(other.prec);
        let modulus = pow128(self.p, r);
        let u = (self.u as u128 % modulus) * (other.u as u128 % modulus) % modulus;
        Ok(PadicNumber {
            p: self.p,
            zero: false,
            v: self.v + other.v,
            u: u as u64,
            prec: r,
        })
    }

    /// Multiplicative inverse: valuation negates, mantissa inverts mod `p^prec`.
    pub fn inv(&self) -> PadicResult<Self> {
        if self.zero {
            return Err(PadicError::DivisionByZero);
        }
        let modulus = pow128(self.p, self.prec);
        Ok(PadicNumber {
            v: -self.v,
            u: mod_inverse(self.u as u128, modulus) as u64,
            ..*self
        })
    }

    /// Exact quotient `self / other`.
    pub fn div(&self, other: &Self) -> PadicResult<Self> {
        self.mul(&other.inv()?)
    }

    /// Distance `|self - other|`. Structurally identical representations are
    /// at distance zero; representations that agree on every jointly known
    /// digit without being identical cannot be resolved and report
    /// [`PadicError::IndistinguishableAtPrecision`].
    pub fn dist(&self, other: &Self) -> PadicResult<Magnitude> {
        self.assert_same_field(other);
        if self.zero && other.zero {
            return Ok(Magnitude::Zero);
        }
        if !self.zero && !other.zero && self.v == other.v && self.u == other.u {
            return Ok(Magnitude::Zero);
        }
        match self.sub(other) {
            Ok(d) => Ok(d.abs()),
            Err(PadicError::PrecisionUnderflow { .. }) => {
                Err(PadicError::IndistinguishableAtPrecision)
            }
            Err(e) => Err(e),
        }
    }

    /// True when the two values cannot be told apart at working precision
    /// (equal, or differing only beyond the jointly known digits).
    pub fn eq_at_precision(&self, other: &Self) -> bool {
        matches!(
            self.dist(other),
            Ok(Magnitude::Zero) | Err(PadicError::IndistinguishableAtPrecision)
        )
    }

    /// Keep the digits at positions `< k`; the result is an exactly known
    /// number (all digits at positions `>= k` are zero). This is the
    /// canonical-representative map for balls of radius `p^(-k)`.
    pub fn truncate_below(&self, k: i64) -> PadicResult<Self> {
        if self.zero {
            return Ok(*self);
        }
        if self.v >= k {
            return PadicNumber::zero(self.p, self.prec);
        }
        let r = (k - self.v) as u32;
        if r > self.prec {
            // digits up to position k are not all known
            return Err(PadicError::PrecisionUnderflow {
                modulus_exp: self.v + self.prec as i64,
            });
        }
        let u = self.u as u128 % pow128(self.p, r);
        debug_assert!(u != 0);
        Ok(PadicNumber {
            u: u as u64,
            ..*self
        })
    }

    /// Base-p digit at the given position of the expansion, when known.
    /// The exact zero has every digit zero.
    pub fn digit(&self, position: i64) -> Option<u64> {
        if self.zero {
            return Some(0);
        }
        if position < self.v {
            return Some(0);
        }
        let off = (position - self.v) as u32;
        if off >= self.prec {
            return None;
        }
        Some(((self.u as u128 / pow128(self.p, off)) % self.p as u128) as u64)
    }

    /// The exact rational `p^v * u` this representation denotes.
    pub fn to_rational(&self) -> BigRational {
        if self.zero {
            return BigRational::from_integer(BigInt::from(0));
        }
        let unit = BigRational::from_integer(BigInt::from(self.u));
        let base = BigInt::from(self.p);
        let scale = if self.v >= 0 {
            BigRational::from_integer(base.pow(self.v as u32))
        } else {
            BigRational::new(BigInt::one(), base.pow((-self.v) as u32))
        };
        unit * scale
    }
}

impl fmt::Display for PadicNumber {
    /// Explicit form `p^v*u`, e.g. `5^2*2`; zero prints as `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.zero {
            write!(f, "0")
        } else {
            write!(f, "{}^{}*{}", self.p, self.v, self.u)
        }
    }
}

/// How two closed balls relate; in an ultrametric there is no partial
/// overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallRelation {
    /// Empty intersection.
    Disjoint,
    /// Identical point sets.
    Equal,
    /// First strictly inside second.
    FirstInsideSecond,
    /// Second strictly inside first.
    SecondInsideFirst,
}

/// A closed ball `{x : |x - c| <= p^(-k)}` in `Q_p`, or a single point
/// (radius zero at working precision).
///
/// Canonical form: the stored center has all digits at positions `>= k`
/// equal to zero, so equal balls have identical representations. Structural
/// equality of canonical balls coincides with set equality; the center's
/// precision tag does not enter comparisons.
#[derive(Debug, Clone, Copy)]
pub struct Ball {
    center: PadicNumber,
    radius: Magnitude,
}

impl PartialEq for Ball {
    fn eq(&self, other: &Self) -> bool {
        if self.center.p != other.center.p || self.radius != other.radius {
            return false;
        }
        match (self.center.zero, other.center.zero) {
            (true, true) => true,
            (false, false) => self.center.v == other.center.v && self.center.u == other.center.u,
            _ => false,
        }
    }
}

impl Eq for Ball {}

impl Ball {
    /// Ball with the given center and radius, re-canonicalized.
    pub fn new(center: PadicNumber, radius: Magnitude) -> PadicResult<Self> {
        let center = match radius {
            Magnitude::Zero => center,
            Magnitude::Finite(k) => center.truncate_below(k)?,
        };
        Ok(Ball { center, radius })
    }

    /// The single-point ball `{c}` at working precision.
    pub fn point(center: PadicNumber) -> Self {
        Ball {
            center,
            radius: Magnitude::Zero,
        }
    }

    /// The ball `p^k * Z_p` around zero.
    pub fn centered_at_zero(k: i64, p: u64, precision: u32) -> PadicResult<Self> {
        Ok(Ball {
            center: PadicNumber::zero(p, precision)?,
            radius: Magnitude::Finite(k),
        })
    }

    /// Canonical center; always a member of the ball.
    pub fn center(&self) -> &PadicNumber {
        &self.center
    }

    /// Radius as an exact magnitude (`Zero` for a point).
    pub fn radius(&self) -> Magnitude {
        self.radius
    }

    /// True when the ball is a single point at working precision.
    pub fn is_point(&self) -> bool {
        self.radius.is_zero()
    }

    /// Ball membership. Points that cannot be distinguished from the center
    /// at working precision count as members.
    pub fn contains(&self, x: &PadicNumber) -> bool {
        match self.center.dist(x) {
            Ok(Magnitude::Zero) | Err(PadicError::IndistinguishableAtPrecision) => true,
            Ok(Magnitude::Finite(e)) => match self.radius {
                Magnitude::Zero => false,
                Magnitude::Finite(k) => e >= k,
            },
            Err(_) => false,
        }
    }

    fn relation_and_distance(&self, other: &Self) -> PadicResult<(BallRelation, Magnitude)> {
        let d = self.center.dist(&other.center)?;
        let rel = if d > self.radius.max(other.radius) {
            BallRelation::Disjoint
        } else if self.radius == other.radius {
            BallRelation::Equal
        } else if self.radius < other.radius {
            BallRelation::FirstInsideSecond
        } else {
            BallRelation::SecondInsideFirst
        };
        Ok((rel, d))
    }

    /// The ultrametric trichotomy: two balls are disjoint, equal, or nested.
    pub fn relation(&self, other: &Self) -> PadicResult<BallRelation> {
        Ok(self.relation_and_distance(other)?.0)
    }

    /// Set equality at working precision: equal radii and centers that
    /// cannot be told apart. Strict equality compares the centers digit for
    /// digit; this version also accepts centers whose difference lies below
    /// the jointly known digits (which arises when an arithmetic route has
    /// shed precision to cancellation).
    pub fn same_set_at_precision(&self, other: &Self) -> bool {
        self.radius == other.radius && self.center.eq_at_precision(&other.center)
    }

    /// Hausdorff distance between two balls: zero when equal, the larger
    /// radius when nested, the center distance when disjoint.
    pub fn hausdorff_distance(&self, other: &Self) -> PadicResult<Magnitude> {
        let (rel, d) = self.relation_and_distance(other)?;
        Ok(match rel {
            BallRelation::Equal => Magnitude::Zero,
            BallRelation::FirstInsideSecond => other.radius,
            BallRelation::SecondInsideFirst => self.radius,
            BallRelation::Disjoint => d,
        })
    }

    fn center_after(
        &self,
        raw: PadicResult<PadicNumber>,
        radius: Magnitude,
    ) -> PadicResult<PadicNumber> {
        match raw {
            Ok(c) => Ok(c),
            // a center cancelled to zero below the radius scale is canonically zero
            Err(PadicError::PrecisionUnderflow { modulus_exp }) => match radius {
                Magnitude::Finite(k) if modulus_exp >= k => {
                    PadicNumber::zero(self.center.p, self.center.prec.max(1))
                }
                _ => Err(PadicError::PrecisionUnderflow { modulus_exp }),
            },
            Err(e) => Err(e),
        }
    }

    /// Image of the ball under `x -> scale*x + shift`: the center maps
    /// through the affine map and the radius scales by `|scale|`.
    pub fn affine(&self, scale: &PadicNumber, shift: &PadicNumber) -> PadicResult<Self> {
        if scale.is_zero() {
            return Ok(Ball::point(*shift));
        }
        let radius = scale.abs() * self.radius;
        let raw = self.center.mul(scale).and_then(|c| c.add(shift));
        let center = self.center_after(raw, radius)?;
        Ball::new(center, radius)
    }

    /// Minkowski sum: centers add, radii join. The sum of two balls is
    /// again a ball.
    pub fn minkowski_sum(&self, other: &Self) -> PadicResult<Self> {
        let radius = self.radius.max(other.radius);
        let raw = self.center.add(&other.center);
        let center = self.center_after(raw, radius)?;
        Ball::new(center, radius)
    }

    /// Smallest ball containing all pairwise products `{xy : x in B, y in C}`:
    /// center `c1*c2`, radius `max(|c1|r2, |c2|r1, r1*r2)`.
    pub fn product(&self, other: &Self) -> PadicResult<Self> {
        let radius = (self.center.abs() * other.radius)
            .max(other.center.abs() * self.radius)
            .max(self.radius * other.radius);
        let center = self.center.mul(&other.center)?;
        Ball::new(center, radius)
    }

    /// A deterministic member of the ball at offset `p^k * t` from the
    /// canonical center (for a point ball, the point itself).
    pub fn member_at_offset(&self, t: &PadicNumber) -> PadicResult<PadicNumber> {
        match self.radius {
            Magnitude::Zero => Ok(self.center),
            Magnitude::Finite(k) => {
                if t.is_zero() {
                    return Ok(self.center);
                }
                if t.v < 0 {
                    return Err(PadicError::InvalidParameter(
                        "member offset must have nonnegative valuation",
                    ));
                }
                let scale = PadicNumber {
                    p: t.p,
                    zero: false,
                    v: k,
                    u: 1,
                    prec: t.prec,
                };
                let offset = t.mul(&scale)?;
                match self.center.add(&offset) {
                    Ok(m) => Ok(m),
                    Err(PadicError::PrecisionUnderflow { .. }) => Ok(self.center),
                    Err(e) => Err(e),
                }
            }
        }
    }
}

/// Exact p-adic magnitude of an arbitrary rational.
pub fn rational_magnitude(q: &BigRational, p: u64) -> Magnitude {
    if q.numer().is_zero() {
        return Magnitude::Zero;
    }
    let pb = BigInt::from(p);
    let strip = |mut n: BigInt| -> i64 {
        let mut v = 0;
        while (&n % &pb).is_zero() {
            n /= &pb;
            v += 1;
        }
        v
    };
    Magnitude::Finite(strip(q.numer().clone()) - strip(q.denom().clone()))
}

/// Smallest closed ball containing a nonempty set of points. The radius is
/// the diameter, attained from any fixed point; the center is the canonical
/// representative. Pairs that cannot be separated at working precision
/// contribute radius zero.
pub fn smallest_ball(points: &[PadicNumber]) -> PadicResult<Ball> {
    assert!(!points.is_empty(), "smallest_ball needs at least one point");
    let base = &points[0];
    let mut radius = Magnitude::Zero;
    for x in &points[1..] {
        match base.dist(x) {
            Ok(d) => radius = radius.max(d),
            Err(PadicError::IndistinguishableAtPrecision) => {}
            Err(e) => return Err(e),
        }
    }
    match radius {
        Magnitude::Zero => Ok(Ball::point(*base)),
        Magnitude::Finite(_) => Ball::new(*base, radius),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q5(a: i64, b: i64) -> PadicNumber {
        PadicNumber::from_rational(a, b, 5, 4).unwrap()
    }

    #[test]
    fn from_rational_fifty() {
        let x = q5(50, 1);
        assert_eq!(x.valuation(), Some(2));
        assert_eq!(x.mantissa(), Some(2));
        assert_eq!(x.abs(), Magnitude::Finite(2));
    }

    #[test]
    fn from_rational_zero() {
        let x = q5(0, 7);
        assert!(x.is_zero());
        assert_eq!(x.abs(), Magnitude::Zero);
    }

    #[test]
    fn from_rational_inverse_of_three() {
        // 3 * 17 = 51 = 1 mod 25
        let x = PadicNumber::from_rational(1, 3, 5, 2).unwrap();
        assert_eq!(x.valuation(), Some(0));
        assert_eq!(x.mantissa(), Some(17));
    }

    #[test]
    fn from_rational_rejects_zero_denominator() {
        assert_eq!(
            PadicNumber::from_rational(1, 0, 5, 4),
            Err(PadicError::ZeroDenominator)
        );
    }

    #[test]
    fn add_with_cancellation() {
        let s = q5(1, 1).add(&q5(4, 1)).unwrap();
        assert_eq!(s.valuation(), Some(1));
        assert_eq!(s.mantissa(), Some(1));
        assert_eq!(s.precision(), 3);
    }

    #[test]
    fn add_identity() {
        let x = q5(7, 3);
        let z = PadicNumber::zero(5, 4).unwrap();
        assert_eq!(x.add(&z).unwrap(), x);
    }

    #[test]
    fn add_full_cancellation_underflows() {
        let x = q5(7, 3);
        let e = x.add(&x.neg());
        assert!(matches!(e, Err(PadicError::PrecisionUnderflow { .. })));
    }

    #[test]
    fn mul_inverse_of_five() {
        let five = q5(5, 1);
        let fifth = q5(1, 5);
        let one = five.mul(&fifth).unwrap();
        assert_eq!(one.valuation(), Some(0));
        assert_eq!(one.mantissa(), Some(1));
    }

    #[test]
    fn mul_fifty_by_three() {
        let x = q5(50, 1).mul(&q5(3, 1)).unwrap();
        assert_eq!(x.valuation(), Some(2));
        assert_eq!(x.mantissa(), Some(6));
    }

    #[test]
    fn inv_three_at_low_precision() {
        let x = PadicNumber::from_integer(3, 5, 2).unwrap().inv().unwrap();
        assert_eq!(x.valuation(), Some(0));
        assert_eq!(x.mantissa(), Some(17));
    }

    #[test]
    fn div_composes_mul_and_inv() {
        let q = q5(50, 1).div(&q5(10, 1)).unwrap();
        assert_eq!(q.valuation(), Some(1));
        assert_eq!(q.mantissa(), Some(1));
    }

    #[test]
    fn inv_zero_is_error() {
        let z = PadicNumber::zero(5, 4).unwrap();
        assert_eq!(z.inv(), Err(PadicError::DivisionByZero));
    }

    #[test]
    fn dist_examples() {
        let x = q5(7, 3);
        assert_eq!(x.dist(&x).unwrap(), Magnitude::Zero);
        assert_eq!(q5(5, 1).dist(&q5(30, 1)).unwrap(), Magnitude::Finite(2));
    }

    #[test]
    fn magnitude_order_and_product() {
        assert!(Magnitude::Zero < Magnitude::Finite(100));
        assert!(Magnitude::Finite(1) < Magnitude::Finite(0));
        assert!(Magnitude::Finite(-2) > Magnitude::Finite(3));
        assert_eq!(
            Magnitude::Finite(2) * Magnitude::Finite(-1),
            Magnitude::Finite(1)
        );
        assert_eq!(Magnitude::Zero * Magnitude::Finite(4), Magnitude::Zero);
    }

    #[test]
    fn ball_relation_nested() {
        let b = Ball::centered_at_zero(0, 5, 4).unwrap(); // Z_5
        let c = Ball::centered_at_zero(1, 5, 4).unwrap(); // 5 Z_5
        assert_eq!(b.relation(&c).unwrap(), BallRelation::SecondInsideFirst);
        assert_eq!(b.relation(&b).unwrap(), BallRelation::Equal);
    }

    #[test]
    fn ball_relation_disjoint() {
        let b = Ball::centered_at_zero(0, 5, 4).unwrap();
        let c = Ball::new(q5(1, 5), Magnitude::Finite(0)).unwrap(); // 1/5 + Z_5
        assert_eq!(b.relation(&c).unwrap(), BallRelation::Disjoint);
    }

    #[test]
    fn smallest_ball_unit_pair() {
        let ball = smallest_ball(&[q5(0, 1), q5(1, 1)]).unwrap();
        assert!(ball.center().is_zero());
        assert_eq!(ball.radius(), Magnitude::Finite(0));
    }

    #[test]
    fn smallest_ball_singleton() {
        let c = q5(7, 3);
        let ball = smallest_ball(&[c]).unwrap();
        assert!(ball.is_point());
        assert_eq!(ball.center(), &c);
    }

    #[test]
    fn smallest_ball_arithmetic_progression() {
        let ball = smallest_ball(&[q5(1, 1), q5(6, 1), q5(11, 1)]).unwrap();
        assert_eq!(ball.radius(), Magnitude::Finite(1));
        assert_eq!(ball.center().valuation(), Some(0));
        assert_eq!(ball.center().mantissa(), Some(1));
        for x in [q5(1, 1), q5(6, 1), q5(11, 1)] {
            assert!(ball.contains(&x));
        }
    }

    #[test]
    fn ball_affine_scales_unit_ball() {
        let b = Ball::centered_at_zero(0, 5, 4).unwrap();
        let scaled = b.affine(&q5(5, 1), &q5(0, 1)).unwrap();
        assert_eq!(scaled, Ball::centered_at_zero(1, 5, 4).unwrap());
        let same = b.affine(&q5(1, 1), &q5(0, 1)).unwrap();
        assert_eq!(same, b);
    }

    #[test]
    fn ball_affine_point_degenerates() {
        let pt = Ball::point(q5(2, 1));
        let moved = pt.affine(&q5(3, 1), &q5(1, 1)).unwrap();
        assert!(moved.is_point());
        assert!(moved.center().eq_at_precision(&q5(7, 1)));
    }

    #[test]
    fn hausdorff_closed_forms() {
        let b = Ball::centered_at_zero(0, 5, 4).unwrap();
        let c = Ball::centered_at_zero(1, 5, 4).unwrap();
        let shifted = Ball::new(q5(1, 5), Magnitude::Finite(0)).unwrap();
        assert_eq!(b.hausdorff_distance(&b).unwrap(), Magnitude::Zero);
        assert_eq!(b.hausdorff_distance(&c).unwrap(), Magnitude::Finite(0));
        assert_eq!(b.hausdorff_distance(&shifted).unwrap(), Magnitude::Finite(-1));
    }

    #[test]
    fn ball_product_examples() {
        let a = Ball::point(q5(2, 1));
        let b = Ball::point(q5(3, 1));
        let ab = a.product(&b).unwrap();
        assert!(ab.is_point());
        assert!(ab.center().eq_at_precision(&q5(6, 1)));

        let z = Ball::centered_at_zero(0, 5, 4).unwrap();
        assert_eq!(z.product(&z).unwrap(), z);

        let one_plus = Ball::new(q5(1, 1), Magnitude::Finite(1)).unwrap();
        assert_eq!(one_plus.product(&one_plus).unwrap(), one_plus);
    }

    #[test]
    fn display_forms() {
        assert_eq!(q5(50, 1).to_string(), "5^2*2");
        assert_eq!(PadicNumber::zero(5, 4).unwrap().to_string(), "0");
        assert_eq!(Magnitude::Finite(2).repr(5), "5^-2");
        assert_eq!(Magnitude::Finite(0).repr(5), "5^0");
        assert_eq!(Magnitude::Zero.repr(5), "0");
    }
}
