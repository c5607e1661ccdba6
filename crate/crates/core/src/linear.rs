use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A quantity `a·f + b` in the fault threshold `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Linear {
    pub a: u32,
    pub b: u32,
}

impl Linear {
    pub const ZERO: Linear = Linear::new(0, 0);
    pub const ONE: Linear = Linear::new(0, 1);
    pub const F: Linear = Linear::new(1, 0);
    pub const F1: Linear = Linear::new(1, 1);
    pub const F2_1: Linear = Linear::new(2, 1);
    pub const F3_1: Linear = Linear::new(3, 1);

    pub const fn new(a: u32, b: u32) -> Self {
        Linear { a, b }
    }

    pub const fn eval(self, f: u32) -> u64 {
        self.a as u64 * f as u64 + self.b as u64
    }

    pub const fn plus(self, o: Linear) -> Linear {
        Linear::new(self.a + o.a, self.b + o.b)
    }
}

impl core::ops::Add for Linear {
    type Output = Linear;
    fn add(self, o: Linear) -> Linear {
        self.plus(o)
    }
}

impl core::iter::Sum for Linear {
    fn sum<I: Iterator<Item = Linear>>(iter: I) -> Linear {
        iter.fold(Linear::ZERO, |acc, x| acc + x)
    }
}

impl fmt::Display for Linear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a, self.b) {
            (0, b) => write!(f, "{b}"),
            (1, 0) => write!(f, "f"),
            (a, 0) => write!(f, "{a}f"),
            (1, b) => write!(f, "f+{b}"),
            (a, b) => write!(f, "{a}f+{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{0}` as a·f+b")]
pub struct LinearParseError(pub alloc::string::String);

impl FromStr for Linear {
    type Err = LinearParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || LinearParseError(s.into());
        let t: alloc::string::String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (fpart, bpart) = match t.find('f') {
            None => return t.parse().map(|b| Linear::new(0, b)).map_err(|_| err()),
            Some(i) => (&t[..i], &t[i + 1..]),
        };
        let a = if fpart.is_empty() {
            1
        } else {
            fpart.parse().map_err(|_| err())?
        };
        let b = if bpart.is_empty() {
            0
        } else {
            bpart
                .strip_prefix('+')
                .ok_or_else(err)?
                .parse()
                .map_err(|_| err())?
        };
        Ok(Linear::new(a, b))
    }
}

impl Serialize for Linear {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Linear {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::string::String as Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn display_parse_round_trip() {
        for a in 0..5 {
            for b in 0..15 {
                let l = Linear::new(a, b);
                assert_eq!(l.to_string().parse::<Linear>().unwrap(), l);
            }
        }
        assert_eq!("16f+8".parse::<Linear>().unwrap().eval(1), 24);
        assert!("f-1".parse::<Linear>().is_err());
        assert!("x".parse::<Linear>().is_err());
    }
}
