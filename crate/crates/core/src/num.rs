//! Scalar arithmetic for the geometry kernels.
//!
//! Every tree-side computation uses only `+`, `-`, `*`, and division by
//! rationals, so the whole construction pipeline runs either over exact
//! [`Rat`] values or over `f64` with a tolerance. The one place square
//! roots appear is in planar model coordinates; there the exact mode
//! stores values of the form `r + s*sqrt(k)` ([`Quad`]) with a radicand
//! shared per coordinate axis, which keeps squared distances rational and
//! verification exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Exact rational scalar.
pub type Rat = BigRational;

/// Convenience constructor for small rational constants.
pub fn rat(numer: i64, denom: i64) -> Rat {
    assert!(denom != 0, "zero denominator");
    Rat::new(BigInt::from(numer), BigInt::from(denom))
}

/// Exact rational value of a finite float; `None` for NaN or infinity.
pub fn rat_from_f64(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

/// Parse `"p/q"`, `"p"`, or a decimal like `"1.25"` into a rational.
pub fn parse_rat(text: &str) -> Option<Rat> {
    let t = text.trim();
    if let Some((num, den)) = t.split_once('/') {
        let n: BigInt = num.trim().parse().ok()?;
        let d: BigInt = den.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rat::new(n, d));
    }
    if let Some((int_part, frac_part)) = t.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let negative = int_part.trim_start().starts_with('-');
        let i: BigInt = if int_part == "-" { BigInt::zero() } else { int_part.parse().ok()? };
        let f: BigInt = frac_part.parse().ok()?;
        let scale = BigInt::from(10u8).pow(frac_part.len() as u32);
        let frac = Rat::new(f, scale);
        let whole = Rat::from_integer(i);
        return Some(if negative { whole - frac } else { whole + frac });
    }
    let n: BigInt = t.parse().ok()?;
    Some(Rat::from_integer(n))
}

/// Render a rational as `"p/q"` (or `"p"` for integers).
pub fn format_rat(value: &Rat) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

fn rat_to_f64(value: &Rat) -> f64 {
    ToPrimitive::to_f64(value).unwrap_or_else(|| {
        // Falls back to a cruder quotient only for magnitudes beyond f64.
        let n = value.numer().to_f64().unwrap_or(f64::NAN);
        let d = value.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact square root of a nonnegative rational, when one exists.
fn perfect_sqrt(value: &Rat) -> Option<Rat> {
    if value.is_negative() {
        return None;
    }
    let ns = value.numer().sqrt();
    let ds = value.denom().sqrt();
    if &(&ns * &ns) == value.numer() && &(&ds * &ds) == value.denom() {
        Some(Rat::new(ns, ds))
    } else {
        None
    }
}

/// Value `r + s*sqrt(k)` with `r`, `s`, `k` rational and `k >= 0`.
///
/// Normal form: `s = 0` implies `k = 0`, and `k` is never a perfect
/// square (exact roots are folded into `r`). Mixing two different
/// irrational radicands in one addition is a construction bug and
/// reported as [`RadicalMix`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quad {
    r: Rat,
    s: Rat,
    k: Rat,
}

/// Two incompatible radicands met in exact model arithmetic.
#[derive(Debug, Clone, thiserror::Error)]
#[error("incompatible radicands sqrt({0}) and sqrt({1})")]
pub struct RadicalMix(String, String);

impl Quad {
    pub fn from_rat(r: Rat) -> Self {
        Quad { r, s: Rat::zero(), k: Rat::zero() }
    }

    /// `sqrt(k)` for `k >= 0`, collapsing perfect squares to rationals.
    pub fn sqrt_of(k: &Rat) -> Self {
        assert!(!k.is_negative(), "negative radicand");
        if let Some(root) = perfect_sqrt(k) {
            return Quad::from_rat(root);
        }
        Quad { r: Rat::zero(), s: Rat::one(), k: k.clone() }
    }

    pub fn zero() -> Self {
        Quad::from_rat(Rat::zero())
    }

    pub fn rational_part(&self) -> &Rat {
        &self.r
    }

    pub fn radical_coeff(&self) -> &Rat {
        &self.s
    }

    pub fn radicand(&self) -> &Rat {
        &self.k
    }

    pub fn is_rational(&self) -> bool {
        self.s.is_zero()
    }

    pub fn as_rat(&self) -> Option<&Rat> {
        if self.is_rational() {
            Some(&self.r)
        } else {
            None
        }
    }

    fn merged_k(&self, other: &Quad) -> Result<Rat, RadicalMix> {
        if self.s.is_zero() {
            Ok(other.k.clone())
        } else if other.s.is_zero() || self.k == other.k {
            Ok(self.k.clone())
        } else {
            Err(RadicalMix(format_rat(&self.k), format_rat(&other.k)))
        }
    }

    pub fn checked_add(&self, other: &Quad) -> Result<Quad, RadicalMix> {
        let k = self.merged_k(other)?;
        let s = &self.s + &other.s;
        Ok(Quad::normalized(&self.r + &other.r, s, k))
    }

    pub fn checked_sub(&self, other: &Quad) -> Result<Quad, RadicalMix> {
        let k = self.merged_k(other)?;
        let s = &self.s - &other.s;
        Ok(Quad::normalized(&self.r - &other.r, s, k))
    }

    pub fn scale(&self, t: &Rat) -> Quad {
        Quad::normalized(&self.r * t, &self.s * t, self.k.clone())
    }

    /// `(r + s*sqrt(k))^2`, rational exactly when `r*s = 0`.
    pub fn square_as_rat(&self) -> Option<Rat> {
        if self.r.is_zero() || self.s.is_zero() {
            Some(&self.r * &self.r + &self.s * &self.s * &self.k)
        } else {
            None
        }
    }

    /// Exact sign of the value.
    pub fn sign(&self) -> Ordering {
        if self.s.is_zero() {
            return self.r.cmp(&Rat::zero());
        }
        if self.r.is_zero() {
            return self.s.cmp(&Rat::zero());
        }
        match (self.r.is_positive(), self.s.is_positive()) {
            (true, true) => Ordering::Greater,
            (false, false) => Ordering::Less,
            // Opposite signs: compare r^2 against s^2 * k.
            (true, false) => (&self.r * &self.r).cmp(&(&self.s * &self.s * &self.k)),
            (false, true) => (&self.s * &self.s * &self.k).cmp(&(&self.r * &self.r)),
        }
    }

    /// Exact comparison against a rational.
    pub fn cmp_rat(&self, other: &Rat) -> Ordering {
        Quad::normalized(&self.r - other, self.s.clone(), self.k.clone()).sign()
    }

    pub fn to_f64(&self) -> f64 {
        rat_to_f64(&self.r) + rat_to_f64(&self.s) * rat_to_f64(&self.k).sqrt()
    }

    /// `r + s*sqrt(k)` normalized; `None` when `k` is negative.
    pub fn from_parts(r: Rat, s: Rat, k: Rat) -> Option<Quad> {
        if k.is_negative() {
            return None;
        }
        Some(Quad::normalized(r, s, k))
    }

    fn normalized(r: Rat, s: Rat, k: Rat) -> Quad {
        if s.is_zero() || k.is_zero() {
            return Quad::from_rat(r);
        }
        if let Some(root) = perfect_sqrt(&k) {
            return Quad::from_rat(r + s * root);
        }
        Quad { r, s, k }
    }
}

impl fmt::Display for Quad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.s.is_zero() {
            write!(f, "{}", format_rat(&self.r))
        } else if self.r.is_zero() {
            write!(f, "{}*sqrt({})", format_rat(&self.s), format_rat(&self.k))
        } else {
            write!(f, "{} + {}*sqrt({})", format_rat(&self.r), format_rat(&self.s), format_rat(&self.k))
        }
    }
}

/// Scalar abstraction shared by the metric, tree, and builder modules.
///
/// The associated type [`Scalar::MC`] is the model-coordinate type:
/// plain `f64` in float mode, [`Quad`] in exact mode. Inequality checks
/// use the single convention `a <= b` within `tol` iff `a <= b + tol`.
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
    + 'static
{
    type MC: Clone + fmt::Debug + PartialEq + Send + Sync + 'static;

    fn from_int(v: i64) -> Self;
    fn from_ratio(numer: i64, denom: i64) -> Self;
    fn half(&self) -> Self;
    fn abs_val(&self) -> Self;
    fn to_f64(&self) -> f64;
    /// True when arithmetic is exact and tolerances degenerate to zero.
    fn is_exact() -> bool;
    /// Default comparison tolerance: zero in exact mode, `1e-9` for floats.
    fn default_tol() -> Self;

    /// `self <= other` within `tol`, i.e. `self <= other + tol`.
    fn le_within(&self, other: &Self, tol: &Self) -> bool {
        self.clone() <= other.clone() + tol.clone()
    }

    /// `self == other` within `tol`.
    fn eq_within(&self, other: &Self, tol: &Self) -> bool {
        self.le_within(other, tol) && other.le_within(self, tol)
    }

    fn mc_zero() -> Self::MC;
    fn mc_from(&self) -> Self::MC;
    /// `sqrt(self)` as a model coordinate; requires `self >= 0`.
    fn mc_sqrt(&self) -> Self::MC;
    fn mc_add(a: &Self::MC, b: &Self::MC) -> Self::MC;
    fn mc_sub(a: &Self::MC, b: &Self::MC) -> Self::MC;
    fn mc_scale(a: &Self::MC, t: &Self) -> Self::MC;
    /// `a^2` as a scalar, `None` if the square leaves the scalar field.
    fn mc_square(a: &Self::MC) -> Option<Self>;
    fn mc_to_f64(a: &Self::MC) -> f64;

    /// Squared Euclidean distance of two model points, exact in the
    /// scalar field. `None` only for coordinates this crate never
    /// produces (mixed radicands within one axis).
    fn mc_sq_dist(p: &[Self::MC], q: &[Self::MC]) -> Option<Self> {
        debug_assert_eq!(p.len(), q.len());
        let mut acc = Self::zero();
        for (a, b) in p.iter().zip(q.iter()) {
            acc = acc + Self::mc_square(&Self::mc_sub(a, b))?;
        }
        Some(acc)
    }
}

impl Scalar for f64 {
    type MC = f64;

    fn from_int(v: i64) -> Self {
        v as f64
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }

    fn half(&self) -> Self {
        self / 2.0
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_exact() -> bool {
        false
    }

    fn default_tol() -> Self {
        1e-9
    }

    fn mc_zero() -> f64 {
        0.0
    }

    fn mc_from(&self) -> f64 {
        *self
    }

    fn mc_sqrt(&self) -> f64 {
        self.max(0.0).sqrt()
    }

    fn mc_add(a: &f64, b: &f64) -> f64 {
        a + b
    }

    fn mc_sub(a: &f64, b: &f64) -> f64 {
        a - b
    }

    fn mc_scale(a: &f64, t: &f64) -> f64 {
        a * t
    }

    fn mc_square(a: &f64) -> Option<f64> {
        Some(a * a)
    }

    fn mc_to_f64(a: &f64) -> f64 {
        *a
    }
}

impl Scalar for Rat {
    type MC = Quad;

    fn from_int(v: i64) -> Self {
        Rat::from_integer(BigInt::from(v))
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        rat(numer, denom)
    }

    fn half(&self) -> Self {
        self / Rat::from_integer(BigInt::from(2))
    }

    fn abs_val(&self) -> Self {
        Signed::abs(self)
    }

    fn to_f64(&self) -> f64 {
        rat_to_f64(self)
    }

    fn is_exact() -> bool {
        true
    }

    fn default_tol() -> Self {
        Rat::zero()
    }

    fn mc_zero() -> Quad {
        Quad::zero()
    }

    fn mc_from(&self) -> Quad {
        Quad::from_rat(self.clone())
    }

    fn mc_sqrt(&self) -> Quad {
        Quad::sqrt_of(self)
    }

    fn mc_add(a: &Quad, b: &Quad) -> Quad {
        a.checked_add(b).expect("mixed radicands on one axis")
    }

    fn mc_sub(a: &Quad, b: &Quad) -> Quad {
        a.checked_sub(b).expect("mixed radicands on one axis")
    }

    fn mc_scale(a: &Quad, t: &Rat) -> Quad {
        a.scale(t)
    }

    fn mc_square(a: &Quad) -> Option<Rat> {
        a.square_as_rat()
    }

    fn mc_to_f64(a: &Quad) -> f64 {
        a.to_f64()
    }
}
