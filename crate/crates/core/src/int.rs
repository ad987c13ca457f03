//! The scalar carried by integer literals and integer outcomes.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_traits::{CheckedAdd, CheckedMul};

/// Integer types usable as literals. Arithmetic is checked: a machine
/// reports overflow as a stuck state instead of wrapping.
pub trait Integer:
    Clone
    + Eq
    + Ord
    + Hash
    + Debug
    + Display
    + FromStr
    + CheckedAdd
    + CheckedMul
    + Send
    + Sync
    + 'static
{
}

impl<T> Integer for T where
    T: Clone
        + Eq
        + Ord
        + Hash
        + Debug
        + Display
        + FromStr
        + CheckedAdd
        + CheckedMul
        + Send
        + Sync
        + 'static
{
}
