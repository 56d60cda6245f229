//! String-based serde support for the crate's value types.

use alloc::string::String;
use core::str::FromStr;

use serde::de::{Deserialize, Deserializer, Error};
use serde::ser::{Serialize, Serializer};

use crate::{ArgumentId, Polarity, Semantics};

macro_rules! via_str {
    ($ty:ty, $what:literal) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                <$ty>::from_str(&s).map_err(|_| D::Error::custom(alloc::format!("invalid {}: {:?}", $what, s)))
            }
        }
    };
}

via_str!(ArgumentId, "argument id");
via_str!(Polarity, "polarity");
via_str!(Semantics, "semantics");
