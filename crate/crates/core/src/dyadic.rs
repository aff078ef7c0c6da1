//! Exact dyadic rationals in `[0, 1]`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported denominator exponent.
pub const MAX_BITS: u32 = 64;

/// `num / 2^bits` with `num <= 2^bits`, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: u128,
    bits: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, bits: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, bits: 0 };

    pub fn new(num: u128, bits: u32) -> Result<Self> {
        if bits > MAX_BITS {
            return Err(Error::ParameterOutOfRange(format!("{num}/2^{bits}: more than {MAX_BITS} bits")));
        }
        if num > 1u128 << bits {
            return Err(Error::ParameterOutOfRange(format!("{num}/2^{bits}")));
        }
        Ok(Self { num, bits }.reduced())
    }

    fn reduced(mut self) -> Self {
        if self.num == 0 {
            return Self::ZERO;
        }
        let tz = self.num.trailing_zeros().min(self.bits);
        self.num >>= tz;
        self.bits -= tz;
        self
    }

    pub fn numerator(&self) -> u128 {
        self.num
    }

    /// Exponent of the reduced denominator.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Numerator over `2^bits`; `bits` must be at least [`Self::bits`].
    pub fn scaled_to(&self, bits: u32) -> u128 {
        debug_assert!(bits >= self.bits);
        self.num << (bits - self.bits)
    }

    /// `floor(self * 2^bits)`.
    pub fn floor_at(&self, bits: u32) -> u128 {
        if bits >= self.bits {
            self.num << (bits - self.bits)
        } else {
            self.num >> (self.bits - bits)
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / 2f64.powi(self.bits as i32)
    }

    /// Nearest dyadic with `bits` fractional bits below or equal to `x`.
    pub fn from_f64_floor(x: f64, bits: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::ParameterOutOfRange(x.to_string()));
        }
        let bits = bits.min(52);
        let num = (x * 2f64.powi(bits as i32)).floor() as u128;
        Self::new(num, bits)
    }

    /// `self + k / 2^bits`, saturating at 1.
    pub fn add_units(&self, k: u128, bits: u32) -> Self {
        let b = bits.max(self.bits);
        let num = (self.scaled_to(b) + (k << (b - bits))).min(1u128 << b);
        Self { num, bits: b }.reduced()
    }

    /// `self - k / 2^bits`, saturating at 0.
    pub fn sub_units(&self, k: u128, bits: u32) -> Self {
        let b = bits.max(self.bits);
        let num = self.scaled_to(b).saturating_sub(k << (b - bits));
        Self { num, bits: b }.reduced()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let b = self.bits.max(other.bits);
        self.scaled_to(b).cmp(&other.scaled_to(b))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Binary expansion: `"0"`, `"1"`, or `"0.b1b2..."` without trailing zeros.
impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits == 0 {
            return write!(f, "{}", self.num);
        }
        write!(f, "0.")?;
        for i in (0..self.bits).rev() {
            write!(f, "{}", (self.num >> i) & 1)?;
        }
        Ok(())
    }
}

impl FromStr for Dyadic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        let digits_ok = |t: &str| t.bytes().all(|b| b == b'0' || b == b'1');
        if int.is_empty() || !digits_ok(int) || !digits_ok(frac) || (s.contains('.') && frac.is_empty()) {
            return Err(Error::parse("dyadic", format!("not a binary fraction: {s:?}")));
        }
        let int_val: u128 = match int.trim_start_matches('0') {
            "" => 0,
            "1" => 1,
            _ => return Err(Error::parse("dyadic", format!("{s:?} exceeds 1"))),
        };
        let frac = frac.trim_end_matches('0');
        if frac.len() > MAX_BITS as usize {
            return Err(Error::parse("dyadic", format!("{s:?} has more than {MAX_BITS} fractional bits")));
        }
        if int_val == 1 && !frac.is_empty() {
            return Err(Error::parse("dyadic", format!("{s:?} exceeds 1")));
        }
        let bits = frac.len() as u32;
        let mut num = int_val << bits;
        for (i, b) in frac.bytes().enumerate() {
            if b == b'1' {
                num |= 1u128 << (bits - 1 - i as u32);
            }
        }
        Dyadic::new(num, bits)
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display_and_parse() {
        let q = Dyadic::new(1, 2).unwrap();
        assert_eq!(q.to_string(), "0.01");
        assert_eq!("0.0100".parse::<Dyadic>().unwrap(), q);
        assert_eq!("1".parse::<Dyadic>().unwrap(), Dyadic::ONE);
        assert_eq!("1.000".parse::<Dyadic>().unwrap(), Dyadic::ONE);
        assert_eq!("0".parse::<Dyadic>().unwrap(), Dyadic::ZERO);
        for bad in ["", ".", "0.", "2", "1.1", "10", "0.2", "-0.1", "0.1e3"] {
            assert!(bad.parse::<Dyadic>().is_err(), "{bad}");
        }
    }

    #[test]
    fn range_is_enforced() {
        assert!(Dyadic::new(5, 2).is_err());
        assert!(Dyadic::new(1, 65).is_err());
        assert_eq!(Dyadic::new(4, 2).unwrap(), Dyadic::ONE);
        assert_eq!(Dyadic::ONE.add_units(1, 3), Dyadic::ONE);
        assert_eq!(Dyadic::ZERO.sub_units(1, 3), Dyadic::ZERO);
    }

    proptest! {
        #[test]
        fn string_round_trip(num in any::<u64>(), bits in 0u32..=64) {
            let num = (num as u128) & ((1u128 << bits) - 1);
            let q = Dyadic::new(num, bits).unwrap();
            prop_assert_eq!(q.to_string().parse::<Dyadic>().unwrap(), q);
        }

        #[test]
        fn order_matches_reals(a in any::<u32>(), b in any::<u32>(), ba in 0u32..40, bb in 0u32..40) {
            let qa = Dyadic::new((a as u128) % (1u128 << ba).max(1), ba).unwrap();
            let qb = Dyadic::new((b as u128) % (1u128 << bb).max(1), bb).unwrap();
            prop_assert_eq!(qa.cmp(&qb), qa.to_f64().partial_cmp(&qb.to_f64()).unwrap());
        }
    }
}
