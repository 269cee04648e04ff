//! Exact cash accounting.
//!
//! Mid-prices live on a half-tick grid, so every monetary amount is kept as an
//! integer count of half-tick·shares. Conversion to currency happens only at
//! the edges (rewards, reports).

use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::book::{Price, Volume};

/// Amount of money in half-tick·share units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(pub i64);

impl Money {
    pub const ZERO: Money = Money(0);

    /// Notional of `volume` shares at `price` ticks.
    pub fn notional(price: Price, volume: Volume) -> Money {
        Money(2 * price * volume as i64)
    }

    /// Signed inventory marked at a half-tick mid.
    pub fn mark(inventory: i64, mid2: i64) -> Money {
        Money(inventory * mid2)
    }

    pub fn to_currency(self, tick_size: f64) -> f64 {
        (self.0 as f64 / 2.0) * tick_size
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |a, b| a + b)
    }
}

/// Converts a currency amount to ticks, snapping values that sit within
/// floating-point noise of an integer.
pub fn currency_to_ticks(amount: f64, tick_size: f64) -> f64 {
    let ticks = amount / tick_size;
    let nearest = ticks.round();
    if (ticks - nearest).abs() < 1e-9 {
        nearest
    } else {
        ticks
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn currency_conversion() {
        assert_eq!(Money::notional(1000, 100).to_currency(0.01), 1000.0);
        assert_eq!(Money::mark(100, 2001).to_currency(0.01), 1000.5);
        assert_eq!(currency_to_ticks(0.05, 0.01), 5.0);
        assert_eq!(currency_to_ticks(0.1, 0.01), 10.0);
    }
}
