//! Numeric abstractions shared by the scoring code.
//!
//! Gains (novelty scores, DCG terms) only need field arithmetic, so they are
//! expressed over [`Gain`], which also admits exact rationals. Anything that
//! needs logarithms (BM25 idf, the rank discount) uses [`Scalar`].

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Field-like number type usable as a novelty gain: f32, f64 or an exact ratio.
pub trait Gain: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    fn from_count(n: u32) -> Self;
}

impl Gain for f32 {
    fn from_count(n: u32) -> Self {
        n as f32
    }
}

impl Gain for f64 {
    fn from_count(n: u32) -> Self {
        f64::from(n)
    }
}

impl Gain for Ratio<i64> {
    fn from_count(n: u32) -> Self {
        Ratio::from_integer(i64::from(n))
    }
}

/// Floating point scalar: f32 or f64.
pub trait Scalar:
    Gain + Float + FromPrimitive + Display + Default + Serialize + DeserializeOwned
{
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 converts to every float type")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
