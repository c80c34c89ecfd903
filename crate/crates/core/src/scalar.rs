//! Floating-point formats the engines can compute in.
//!
//! Instances are always stored in 64-bit. An engine converts the data it needs
//! into its working [`Scalar`] once, before the timed round loop starts, and
//! converts the final bounds back to 64-bit for comparison.

use std::fmt::Debug;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use num_traits::Float;

pub trait Scalar: Float + Debug + Default + Send + Sync + 'static {
    type Atomic: AtomicScalar<Self>;

    fn from_f64(v: f64) -> Self;
    fn widen(self) -> f64;
}

impl Scalar for f64 {
    type Atomic = AtomicF64;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn widen(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    type Atomic = AtomicF32;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn widen(self) -> f64 {
        self as f64
    }
}

/// A float cell supporting concurrent monotone updates.
///
/// `fetch_max` / `fetch_min` are compare-and-swap loops over the bit pattern,
/// so every update is linearizable and the final value is the extremum of all
/// values offered, independent of arrival order. NaN must never be offered.
pub trait AtomicScalar<T>: Send + Sync {
    fn new(v: T) -> Self;
    fn load(&self) -> T;
    fn store(&self, v: T);
    /// Raise the cell to `v` if `v` is larger. Returns the previous value.
    fn fetch_max(&self, v: T) -> T;
    /// Lower the cell to `v` if `v` is smaller. Returns the previous value.
    fn fetch_min(&self, v: T) -> T;
}

macro_rules! atomic_float {
    ($name:ident, $float:ty, $bits:ty) => {
        #[derive(Debug)]
        pub struct $name($bits);

        impl AtomicScalar<$float> for $name {
            fn new(v: $float) -> Self {
                Self(<$bits>::new(v.to_bits()))
            }

            #[inline]
            fn load(&self) -> $float {
                <$float>::from_bits(self.0.load(Ordering::Acquire))
            }

            #[inline]
            fn store(&self, v: $float) {
                self.0.store(v.to_bits(), Ordering::Release)
            }

            #[inline]
            fn fetch_max(&self, v: $float) -> $float {
                debug_assert!(!v.is_nan());
                let mut current = self.0.load(Ordering::Acquire);
                loop {
                    let cur = <$float>::from_bits(current);
                    if v <= cur {
                        return cur;
                    }
                    match self.0.compare_exchange_weak(
                        current,
                        v.to_bits(),
                        Ordering::AcqRel,
                        Ordering::Acquire,
                    ) {
                        Ok(_) => return cur,
                        Err(actual) => current = actual,
                    }
                }
            }

            #[inline]
            fn fetch_min(&self, v: $float) -> $float {
                debug_assert!(!v.is_nan());
                let mut current = self.0.load(Ordering::Acquire);
                loop {
                    let cur = <$float>::from_bits(current);
                    if v >= cur {
                        return cur;
                    }
                    match self.0.compare_exchange_weak(
                        current,
                        v.to_bits(),
                        Ordering::AcqRel,
                        Ordering::Acquire,
                    ) {
                        Ok(_) => return cur,
                        Err(actual) => current = actual,
                    }
                }
            }
        }
    };
}

atomic_float!(AtomicF64, f64, AtomicU64);
atomic_float!(AtomicF32, f32, AtomicU32);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_updates() {
        let cell = AtomicF64::new(f64::NEG_INFINITY);
        assert_eq!(cell.fetch_max(3.0), f64::NEG_INFINITY);
        assert_eq!(cell.fetch_max(1.0), 3.0);
        assert_eq!(cell.load(), 3.0);

        let cell = AtomicF32::new(f32::INFINITY);
        cell.fetch_min(5.0);
        cell.fetch_min(7.0);
        cell.fetch_min(-2.5);
        assert_eq!(cell.load(), -2.5);
    }

    #[test]
    fn concurrent_max_is_the_maximum() {
        let cell = std::sync::Arc::new(AtomicF64::new(0.0));
        let handles: Vec<_> = (0..8)
            .map(|t| {
                let cell = cell.clone();
                std::thread::spawn(move || {
                    for k in 0..1000 {
                        cell.fetch_max(((k * 8 + t) % 5003) as f64);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(cell.load(), 5002.0);
    }
}
