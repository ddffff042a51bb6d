//! Numeric types that can hold linear-extension counts.
//!
//! Counting and uniform sampling are generic over the count type. Fixed-width
//! integers report overflow instead of wrapping, [`BigUint`] is exact for any
//! size, and `f64` trades exactness for speed on very wide posets.

use std::fmt::{Debug, Display};
use std::ops::Sub;

use num_bigint::BigUint;
use num_traits::{CheckedAdd, One, ToPrimitive, Zero};
use rand::Rng;

pub trait ExtensionCount:
    Clone + Debug + Display + PartialOrd + Zero + One + Sub<Output = Self> + Send + Sync
{
    /// `None` when the sum does not fit.
    fn checked_sum(&self, rhs: &Self) -> Option<Self>;

    /// A uniform draw from `[0, bound)`. `bound` must be positive.
    fn uniform_below<R: Rng + ?Sized>(bound: &Self, rng: &mut R) -> Self;

    fn approx_f64(&self) -> f64;
}

macro_rules! impl_int_count {
    ($($t:ty),*) => {$(
        impl ExtensionCount for $t {
            fn checked_sum(&self, rhs: &Self) -> Option<Self> {
                CheckedAdd::checked_add(self, rhs)
            }

            fn uniform_below<R: Rng + ?Sized>(bound: &Self, rng: &mut R) -> Self {
                rng.random_range(0..*bound)
            }

            fn approx_f64(&self) -> f64 {
                *self as f64
            }
        }
    )*};
}

impl_int_count!(u64, u128);

impl ExtensionCount for BigUint {
    fn checked_sum(&self, rhs: &Self) -> Option<Self> {
        Some(self + rhs)
    }

    fn uniform_below<R: Rng + ?Sized>(bound: &Self, rng: &mut R) -> Self {
        assert!(!bound.is_zero(), "empty sampling range");
        if let Some(b) = bound.to_u128() {
            return BigUint::from(rng.random_range(0..b));
        }
        // rejection sampling on the bit length of the bound
        let bits = bound.bits();
        let bytes = bits.div_ceil(8) as usize;
        let excess = (bytes as u64 * 8 - bits) as u32;
        let mut buf = vec![0u8; bytes];
        loop {
            rng.fill(&mut buf[..]);
            buf[bytes - 1] &= 0xff >> excess;
            let candidate = BigUint::from_bytes_le(&buf);
            if &candidate < bound {
                return candidate;
            }
        }
    }

    fn approx_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::INFINITY)
    }
}

impl ExtensionCount for f64 {
    fn checked_sum(&self, rhs: &Self) -> Option<Self> {
        let s = self + rhs;
        s.is_finite().then_some(s)
    }

    fn uniform_below<R: Rng + ?Sized>(bound: &Self, rng: &mut R) -> Self {
        rng.random::<f64>() * bound
    }

    fn approx_f64(&self) -> f64 {
        *self
    }
}
