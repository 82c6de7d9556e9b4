use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar used by the numeric oracle and the embedding toolkit.
///
/// Implemented for `f32` and `f64`. `Display`/`FromStr` give the shortest
/// round-tripping decimal form used by the TSV interchange files.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Display + FromStr + Debug + Default + Sum + Send + Sync + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + Display + FromStr + Debug + Default + Sum + Send + Sync + 'static
{
}
