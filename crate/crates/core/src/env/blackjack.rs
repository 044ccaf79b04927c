// SPDX-License-Identifier: Apache-2.0

//! Blackjack against a fixed dealer, cards drawn from an infinite deck.
//!
//! Player sums below 12 are hit automatically during the deal (a hit cannot
//! bust them), so decision states are `(player sum 12..=21, dealer card
//! 1..=10, usable ace)`: 200 states.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_action, EnvError, Environment, Outcome, StepResult};

pub const STICK: usize = 0;
pub const HIT: usize = 1;

pub const N_STATES: usize = 200;

/// A hand's total with aces counted as 11 where that does not bust.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Hand {
    pub sum: u8,
    /// One ace is currently counted as 11.
    pub usable_ace: bool,
}

impl Hand {
    pub fn add(&mut self, card: u8) {
        if card == 1 && self.sum + 11 <= 21 {
            self.sum += 11;
            self.usable_ace = true;
        } else {
            self.sum += card;
        }
        if self.sum > 21 && self.usable_ace {
            self.sum -= 10;
            self.usable_ace = false;
        }
    }

    pub fn bust(&self) -> bool {
        self.sum > 21
    }
}

/// Dealer draws from `cards` until reaching at least 17; returns the final sum.
pub fn dealer_plays(showing: u8, cards: &mut impl Iterator<Item = u8>) -> u8 {
    let mut hand = Hand::default();
    hand.add(showing);
    while hand.sum < 17 {
        hand.add(cards.next().expect("dealer needs another card"));
    }
    hand.sum
}

/// Outcome of a stick: closer to 21 wins, dealer bust wins, equal draws.
pub fn settle(player: u8, dealer: u8) -> Outcome {
    if dealer > 21 || player > dealer {
        Outcome::Reward
    } else if player == dealer {
        Outcome::Neutral
    } else {
        Outcome::Punish
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlackjackState {
    pub player_sum: u8,
    /// Ace is 1.
    pub dealer_showing: u8,
    pub usable_ace: bool,
}

impl BlackjackState {
    pub fn encode(&self) -> usize {
        debug_assert!((12..=21).contains(&self.player_sum) && (1..=10).contains(&self.dealer_showing));
        (self.player_sum as usize - 12) * 20 + (self.dealer_showing as usize - 1) * 2 + self.usable_ace as usize
    }

    pub fn decode(index: usize) -> Option<Self> {
        (index < N_STATES).then(|| Self {
            player_sum: (index / 20) as u8 + 12,
            dealer_showing: ((index % 20) / 2) as u8 + 1,
            usable_ace: index % 2 == 1,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Blackjack {
    rng: ChaCha8Rng,
    player: Hand,
    dealer_showing: u8,
    done: bool,
}

impl Blackjack {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng, player: Hand::default(), dealer_showing: 1, done: true }
    }

    /// Uniform over the 13 ranks; face cards are worth 10, ace is 1.
    pub fn draw(&mut self) -> u8 {
        self.rng.gen_range(1..=13u8).min(10)
    }

    pub fn state(&self) -> BlackjackState {
        BlackjackState { player_sum: self.player.sum, dealer_showing: self.dealer_showing, usable_ace: self.player.usable_ace }
    }

    /// Dealer's final sum after a stick, drawing from the environment's deck.
    fn dealer_final(&mut self) -> u8 {
        let mut hand = Hand::default();
        hand.add(self.dealer_showing);
        while hand.sum < 17 {
            let c = self.draw();
            hand.add(c);
        }
        hand.sum
    }
}

impl Environment for Blackjack {
    fn n_states(&self) -> usize {
        N_STATES
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self) -> usize {
        self.player = Hand::default();
        let first = self.draw();
        self.player.add(first);
        self.dealer_showing = self.draw();
        while self.player.sum < 12 {
            let c = self.draw();
            self.player.add(c);
        }
        self.done = false;
        self.state().encode()
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        check_action(action, 2)?;
        if self.done {
            return Err(EnvError::StepAfterTerminal);
        }
        let here = self.state().encode();
        if action == HIT {
            let c = self.draw();
            self.player.add(c);
            if self.player.bust() {
                self.done = true;
                return Ok(StepResult::finished(here, Outcome::Punish));
            }
            return Ok(StepResult::running(self.state().encode()));
        }
        self.done = true;
        let dealer = self.dealer_final();
        Ok(StepResult::finished(here, settle(self.player.sum, dealer)))
    }
}
