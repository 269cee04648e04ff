use serde::{Deserialize, Serialize};

use crate::actions::QuotePair;
use crate::money::Money;
use crate::rewards::Fill;

/// Cash and inventory of the quoting agent. Both start at zero and may go
/// negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAccount {
    pub cash: Money,
    /// Signed shares.
    pub inventory: i64,
    pub quotes: QuotePair,
}

impl Default for AgentAccount {
    fn default() -> Self {
        Self {
            cash: Money::ZERO,
            inventory: 0,
            quotes: QuotePair::none(),
        }
    }
}

impl AgentAccount {
    /// `cash + inventory × mid`.
    pub fn value(&self, mid2: i64) -> Money {
        self.cash + Money::mark(self.inventory, mid2)
    }

    /// Books a fill; `fee` is charged per share traded.
    pub fn apply_fill(&mut self, fill: &Fill, fee: Money) {
        self.cash -= Money(2 * fill.price * fill.volume);
        self.cash -= Money(fee.0 * fill.volume.abs());
        self.inventory += fill.volume;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buy_at_bid_marks_at_mid() {
        let mut acct = AgentAccount::default();
        acct.apply_fill(&Fill { price: 1001, volume: 100, close_out: false }, Money::ZERO);
        assert_eq!(acct.inventory, 100);
        assert_eq!(acct.cash.to_currency(0.01), -1001.0);
        // mid 10.005
        assert_eq!(acct.value(2001).to_currency(0.01), -0.5);
    }
}
