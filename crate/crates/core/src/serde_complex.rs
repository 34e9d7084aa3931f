//! Lenient serde for complex numbers: accepts `1.5`, `[re, im]` or `{"re": .., "im": ..}`,
//! always writes `[re, im]`.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Real(f64),
    Pair([f64; 2]),
    Parts {
        re: f64,
        #[serde(default)]
        im: f64,
    },
}

impl From<Repr> for Complex64 {
    fn from(r: Repr) -> Self {
        match r {
            Repr::Real(x) => Complex64::new(x, 0.0),
            Repr::Pair([re, im]) => Complex64::new(re, im),
            Repr::Parts { re, im } => Complex64::new(re, im),
        }
    }
}

pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
    Repr::deserialize(d).map(Into::into)
}

/// `Option<Complex64>` as `null` or `[re, im]`.
pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        z.map(|z| [z.re, z.im]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Complex64>, D::Error> {
        Ok(Option::<Repr>::deserialize(d)?.map(Into::into))
    }
}

/// `Vec<Complex64>` as a list of `[re, im]`.
pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        Ok(Vec::<Repr>::deserialize(d)?.into_iter().map(Into::into).collect())
    }
}
