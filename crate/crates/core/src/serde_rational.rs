//! Serde adapters writing rationals as `"num/den"` strings.

use rug::Rational;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

pub fn to_string(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn parse(s: &str) -> Result<Rational, String> {
    s.trim().parse::<Rational>().map_err(|e| format!("bad rational {s:?}: {e}"))
}

pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&to_string(q))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
    let s = String::deserialize(d)?;
    parse(&s).map_err(D::Error::custom)
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(to_string))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| parse(s).map_err(D::Error::custom)).collect()
    }
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(q) => s.serialize_some(&to_string(q)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse(&s).map_err(D::Error::custom))
            .transpose()
    }
}

pub mod option_pair {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<(Rational, u32)>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some((q, n)) => s.serialize_some(&(to_string(q), *n)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<(Rational, u32)>, D::Error> {
        Option::<(String, u32)>::deserialize(d)?
            .map(|(s, n)| parse(&s).map(|q| (q, n)).map_err(D::Error::custom))
            .transpose()
    }
}
