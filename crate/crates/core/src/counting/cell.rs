//! Count storage backends for the transfer-matrix DP.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LppError, Result};

/// Bits of exact precision allowed per table entry before the exact backend
/// refuses.
pub const EXACT_BIT_BUDGET: f64 = 4096.0;

/// User-facing backend choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Exact when it fits the bit budget, log-space otherwise.
    #[default]
    Auto,
    Exact,
    Log,
}

impl Backend {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Backend::Auto),
            "exact" => Ok(Backend::Exact),
            "log" => Ok(Backend::Log),
            other => Err(LppError::Config(format!("unknown backend {other:?}"))),
        }
    }

    /// Pick the concrete storage for paths of length `n` on a lattice with
    /// the given out-degree.
    pub fn resolve(self, n: usize, out_degree: usize) -> Result<Storage> {
        let bits = n as f64 * (out_degree as f64).log2();
        let exact = || {
            if (out_degree as u128).checked_pow(n as u32).is_some() && n < u32::MAX as usize {
                Storage::U128
            } else if bits <= 254.0 {
                Storage::U256
            } else {
                Storage::Big
            }
        };
        match self {
            Backend::Log => Ok(Storage::Log),
            Backend::Auto if bits > EXACT_BIT_BUDGET => Ok(Storage::Log),
            Backend::Auto => Ok(exact()),
            Backend::Exact if bits > EXACT_BIT_BUDGET => Err(LppError::Config(format!(
                "exact backend needs {bits:.0} bits per entry, budget is {EXACT_BIT_BUDGET}; use --backend log"
            ))),
            Backend::Exact => Ok(exact()),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Auto => "auto",
            Backend::Exact => "exact",
            Backend::Log => "log",
        })
    }
}

/// Concrete storage picked by [`Backend::resolve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    U128,
    U256,
    Big,
    Log,
}

impl Storage {
    pub fn is_exact(self) -> bool {
        self != Storage::Log
    }

    /// Approximate bytes per entry for counts of at most `bits` bits.
    pub fn entry_bytes(self, bits: f64) -> u64 {
        match self {
            Storage::U128 => 16,
            Storage::U256 => 32,
            Storage::Big => 24 + 8 * (bits / 64.0).ceil() as u64,
            Storage::Log => 16,
        }
    }
}

/// A path count, either exact or as a natural logarithm.
#[derive(Debug, Clone, PartialEq)]
pub enum CountValue {
    Exact(BigUint),
    /// Natural log of the count; `-inf` for zero.
    Log(f64),
}

impl CountValue {
    pub fn is_zero(&self) -> bool {
        match self {
            CountValue::Exact(v) => Zero::is_zero(v),
            CountValue::Log(l) => *l == f64::NEG_INFINITY,
        }
    }

    pub fn ln(&self) -> f64 {
        match self {
            CountValue::Exact(v) => big_ln(v),
            CountValue::Log(l) => *l,
        }
    }

    pub fn log10(&self) -> f64 {
        self.ln() / std::f64::consts::LN_10
    }

    /// Nearest `f64` (may be `inf` for huge counts).
    pub fn to_f64(&self) -> f64 {
        match self {
            CountValue::Exact(v) => v.to_f64().unwrap_or(f64::INFINITY),
            CountValue::Log(l) => l.exp(),
        }
    }

    pub fn exact(&self) -> Option<&BigUint> {
        match self {
            CountValue::Exact(v) => Some(v),
            CountValue::Log(_) => None,
        }
    }

    /// `count^(1/n)`, zero for a zero count.
    pub fn root(&self, n: usize) -> f64 {
        if self.is_zero() {
            0.0
        } else if n == 0 {
            1.0
        } else {
            (self.ln() / n as f64).exp()
        }
    }

    /// Whether the count is at least `2^k`.
    pub fn at_least_pow2(&self, k: u64) -> bool {
        match self {
            CountValue::Exact(v) => !Zero::is_zero(v) && v.bits() > k,
            CountValue::Log(l) => *l >= k as f64 * std::f64::consts::LN_2 * (1.0 - 1e-12),
        }
    }
}

impl fmt::Display for CountValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountValue::Exact(v) => write!(f, "{v}"),
            CountValue::Log(l) => write!(f, "10^{:.12}", l / std::f64::consts::LN_10),
        }
    }
}

fn big_ln(v: &BigUint) -> f64 {
    if Zero::is_zero(v) {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (v >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// 256-bit unsigned counter; addition only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct U256 {
    lo: u128,
    hi: u128,
}

impl U256 {
    pub fn to_biguint(self) -> BigUint {
        (BigUint::from(self.hi) << 128u32) + BigUint::from(self.lo)
    }
}

/// One entry of the DP table.
pub trait Cell: Clone + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&mut self, other: &Self);
    fn is_zero(&self) -> bool;
    fn value(&self) -> CountValue;
}

impl Cell for u128 {
    #[inline]
    fn zero() -> Self {
        0
    }
    #[inline]
    fn one() -> Self {
        1
    }
    #[inline]
    fn add(&mut self, other: &Self) {
        *self += *other;
    }
    #[inline]
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn value(&self) -> CountValue {
        CountValue::Exact(BigUint::from(*self))
    }
}

impl Cell for U256 {
    #[inline]
    fn zero() -> Self {
        U256::default()
    }
    #[inline]
    fn one() -> Self {
        U256 { lo: 1, hi: 0 }
    }
    #[inline]
    fn add(&mut self, other: &Self) {
        let (lo, carry) = self.lo.overflowing_add(other.lo);
        self.lo = lo;
        self.hi = self
            .hi
            .checked_add(other.hi + carry as u128)
            .expect("U256 overflow");
    }
    #[inline]
    fn is_zero(&self) -> bool {
        self.lo == 0 && self.hi == 0
    }
    fn value(&self) -> CountValue {
        CountValue::Exact(self.to_biguint())
    }
}

impl Cell for BigUint {
    fn zero() -> Self {
        <BigUint as Zero>::zero()
    }
    fn one() -> Self {
        BigUint::from(1u8)
    }
    #[inline]
    fn add(&mut self, other: &Self) {
        if !Zero::is_zero(other) {
            *self += other;
        }
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn value(&self) -> CountValue {
        CountValue::Exact(self.clone())
    }
}

/// `m * 2^(CHUNK * e)` with `m` zero or in `[1, 2^CHUNK)`: an `f64` with an
/// unbounded exponent. Sums of non-negative terms lose at most one rounding
/// per addition, so relative error grows linearly in the number of levels,
/// unlike accumulating in `ln` space where each rounding is relative to the
/// size of the logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WideFloat {
    m: f64,
    e: i64,
}

const CHUNK: i32 = 500;

impl WideFloat {
    pub fn from_ln(l: f64) -> Self {
        if l == f64::NEG_INFINITY {
            return WideFloat { m: 0.0, e: 0 };
        }
        let chunk = CHUNK as f64 * std::f64::consts::LN_2;
        let e = (l / chunk).floor() as i64;
        let mut w = WideFloat {
            m: (l - e as f64 * chunk).exp(),
            e,
        };
        w.normalize();
        w
    }

    pub fn ln(&self) -> f64 {
        if self.m == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.m.ln() + (self.e as f64 * CHUNK as f64) * std::f64::consts::LN_2
    }

    #[inline]
    fn normalize(&mut self) {
        if self.m >= 2f64.powi(CHUNK) {
            self.m *= 2f64.powi(-CHUNK);
            self.e += 1;
        } else if self.m != 0.0 && self.m < 1.0 {
            self.m *= 2f64.powi(CHUNK);
            self.e -= 1;
        }
    }
}

impl Cell for WideFloat {
    fn zero() -> Self {
        WideFloat { m: 0.0, e: 0 }
    }
    fn one() -> Self {
        WideFloat { m: 1.0, e: 0 }
    }
    #[inline]
    fn add(&mut self, other: &Self) {
        if other.m == 0.0 {
            return;
        }
        if self.m == 0.0 {
            *self = *other;
            return;
        }
        let (hi, lo) = if self.e >= other.e { (*self, *other) } else { (*other, *self) };
        let m = match hi.e - lo.e {
            0 => hi.m + lo.m,
            // exact power-of-two rescale; the result stays a normal float
            1 => hi.m + lo.m * 2f64.powi(-CHUNK),
            // below one ulp of `hi`
            _ => hi.m,
        };
        *self = WideFloat { m, e: hi.e };
        self.normalize();
    }
    fn is_zero(&self) -> bool {
        self.m == 0.0
    }
    fn value(&self) -> CountValue {
        CountValue::Log(self.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_storage() {
        assert_eq!(Backend::Auto.resolve(20, 2).unwrap(), Storage::U128);
        assert_eq!(Backend::Exact.resolve(63, 4).unwrap(), Storage::U128);
        assert_eq!(Backend::Exact.resolve(64, 4).unwrap(), Storage::U256);
        assert_eq!(Backend::Exact.resolve(200, 2).unwrap(), Storage::U256);
        assert_eq!(Backend::Exact.resolve(300, 2).unwrap(), Storage::Big);
        assert_eq!(Backend::Auto.resolve(5000, 2).unwrap(), Storage::Log);
        assert!(Backend::Exact.resolve(5000, 2).is_err());
        assert_eq!(Backend::Log.resolve(3, 2).unwrap(), Storage::Log);
    }

    #[test]
    fn u256_carries() {
        let mut a = U256 { lo: u128::MAX, hi: 0 };
        a.add(&U256::one());
        assert_eq!(a, U256 { lo: 0, hi: 1 });
        assert_eq!(a.to_biguint(), BigUint::from(1u8) << 128u32);
    }

    #[test]
    fn wide_float_adds() {
        let mut a = WideFloat::zero();
        a.add(&WideFloat::from_ln(2f64.ln()));
        a.add(&WideFloat::from_ln(3f64.ln()));
        assert!((a.ln().exp() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn wide_float_range() {
        let mut a = WideFloat::one();
        for _ in 0..3000 {
            let b = a;
            a.add(&b);
        }
        assert!((a.ln() - 3000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        let mut s = WideFloat::from_ln(2000.0);
        s.add(&WideFloat::one());
        assert!((s.ln() - 2000.0).abs() < 1e-12);
        assert!((WideFloat::from_ln(-5.0).ln() + 5.0).abs() < 1e-14);
    }

    #[test]
    fn count_value_helpers() {
        let v = CountValue::Exact(BigUint::from(1024u32));
        assert!((v.ln() - 1024f64.ln()).abs() < 1e-12);
        assert!((v.root(10) - 2.0).abs() < 1e-12);
        assert!(v.at_least_pow2(10));
        assert!(!v.at_least_pow2(11));
        let big = CountValue::Exact(BigUint::from(3u8).pow(2000));
        assert!((big.ln() - 2000.0 * 3f64.ln()).abs() < 1e-9);
        assert_eq!(CountValue::Log(f64::NEG_INFINITY).root(5), 0.0);
    }
}
