//! Protocols built on a secure list code.
//!
//! **Bit commitment.** Messages are `t`-bit strings and a random linear hash
//! `f(m) = <a, m> mod 2` maps them onto the committed bit. To commit to `b`
//! Alice sends `φ(M)` for `M` uniform on `f^{-1}(b)`; Bob keeps the list of his
//! decoder. To reveal she announces `M`, and Bob accepts when `f(M) = b` and
//! `M` is in his list.
//!
//! **Anonymous auction.** Each bidder transmits the codeword of its ID; the
//! dealer only sees the decoded lists. The highest bid wins, and the winner
//! later proves ownership by claiming an ID that appears in that bid's list.

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use crate::channels::Channel;
use crate::codes::ListCode;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{derive_seed, rng_from_seed};
use crate::security::{self, Budget};
use crate::words::Word;

/// `f(m) = popcount(a & m) mod 2` on `t`-bit messages, `a ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LinearHash {
    t: u32,
    a: u64,
}

impl LinearHash {
    pub fn new(t: u32, a: u64) -> Result<Self> {
        if !(1..=63).contains(&t) {
            return Err(Error::InvalidArgument(format!("hash length {t} outside 1..=63")));
        }
        if a == 0 || a >> t != 0 {
            return Err(Error::InvalidArgument(format!("hash vector {a:#x} must be a nonzero {t}-bit value")));
        }
        Ok(Self { t, a })
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn apply(&self, m: u64) -> u8 {
        ((self.a & m).count_ones() & 1) as u8
    }

    /// All messages hashing to `bit`, ascending.
    pub fn preimage(&self, bit: u8) -> Vec<u64> {
        (0..1u64 << self.t).filter(|&m| self.apply(m) == bit).collect()
    }

    /// Uniform element of `f^{-1}(bit)`: draw any `t`-bit string and flip the
    /// lowest set bit of `a` if the hash is wrong (a bijection between cosets).
    pub fn sample_preimage<R: Rng + ?Sized>(&self, bit: u8, rng: &mut R) -> u64 {
        let m = rng.gen_range(0..1u64 << self.t);
        if self.apply(m) == bit {
            m
        } else {
            m ^ (self.a & self.a.wrapping_neg())
        }
    }
}

/// Uniformly random nonzero `a`.
pub fn make_hash(t: u32, seed: u64) -> Result<LinearHash> {
    if !(1..=63).contains(&t) {
        return Err(Error::InvalidArgument(format!("hash length {t} outside 1..=63")));
    }
    let mut rng = rng_from_seed(seed);
    LinearHash::new(t, rng.gen_range(1..1u64 << t))
}

fn check_commit_code<T: Real>(code: &ListCode<T>, hash: &LinearHash) -> Result<()> {
    let expected = 1usize << hash.t;
    if code.m() != expected {
        return Err(Error::DimensionMismatch { expected, got: code.m() });
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CommitmentTranscript {
    pub seed: u64,
    pub bit: u8,
    pub chosen_message: usize,
    pub sent_block: Word,
    pub received_block: Word,
    pub bob_list: Vec<usize>,
    pub revealed_message: usize,
    pub revealed_bit: u8,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject_reason: Option<String>,
}

impl CommitmentTranscript {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

/// Bob's check in the reveal phase.
pub fn reveal_check(hash: &LinearHash, bob_list: &[usize], message: usize, bit: u8) -> std::result::Result<(), String> {
    if hash.apply(message as u64) != bit {
        return Err(format!("f({message}) != {bit}"));
    }
    if !bob_list.contains(&message) {
        return Err(format!("message {message} is not in the list"));
    }
    Ok(())
}

/// Honest commit and reveal of `bit`.
pub fn commit<T: Real>(bit: u8, code: &ListCode<T>, hash: &LinearHash, ch: &Channel<T>, seed: u64) -> Result<CommitmentTranscript> {
    if bit > 1 {
        return Err(Error::InvalidArgument(format!("bit must be 0 or 1, got {bit}")));
    }
    check_commit_code(code, hash)?;
    let mut dec = code.decoder(ch)?;
    let mut rng = rng_from_seed(seed);
    let m = hash.sample_preimage(bit, &mut rng) as usize;
    let x = security::sample_codeword(code, m, &mut rng);
    let y = ch.sample_output(&x, &mut rng);
    let mut list = Vec::new();
    dec.decode(&y, &mut list)?;
    let check = reveal_check(hash, &list, m, bit);
    Ok(CommitmentTranscript {
        seed,
        bit,
        chosen_message: m,
        sent_block: x,
        received_block: y,
        bob_list: list,
        revealed_message: m,
        revealed_bit: bit,
        accepted: check.is_ok(),
        reject_reason: check.err(),
    })
}

/// Replays the reveal phase of `tr` with a different announcement.
pub fn reveal(tr: &CommitmentTranscript, hash: &LinearHash, message: usize, bit: u8) -> CommitmentTranscript {
    let check = reveal_check(hash, &tr.bob_list, message, bit);
    CommitmentTranscript {
        revealed_message: message,
        revealed_bit: bit,
        accepted: check.is_ok(),
        reject_reason: check.err(),
        ..tr.clone()
    }
}

/// Hiding and binding figures of a commitment scheme, message uniform.
#[derive(Debug, Clone, Serialize)]
pub struct BcSecurity<T: Real = f64> {
    /// `I(f(M); Y^n)`.
    pub bob_info: T,
    /// `H2(M|Y^n) = -log2 Σ_y P(y) Σ_m P(m|y)^2`.
    pub h2: T,
    /// `2 · 2^{-h2}`.
    pub bound: T,
    /// Largest probability that a message of the opposite coset is listed,
    /// over input blocks keeping some message of the committed coset listed
    /// with probability at least 1/2.
    pub alice_cheat: T,
    pub alice_cheat_witness: Option<Word>,
    /// No input block keeps any message listed with probability >= 1/2.
    pub alice_cheat_infeasible: bool,
}

impl<T: Real> BcSecurity<T> {
    pub fn bound_holds(&self) -> bool {
        self.bob_info <= self.bound + T::lit(1e-12)
    }

    pub fn slack(&self) -> T {
        self.bound - self.bob_info
    }
}

/// Exact hiding/binding analysis; `alice_cheat` exhausts all input blocks.
pub fn bc_security<T: Real>(code: &ListCode<T>, hash: &LinearHash, ch: &Channel<T>, budget: &Budget) -> Result<BcSecurity<T>> {
    check_commit_code(code, hash)?;
    let labels: Vec<usize> = (0..code.m()).map(|m| hash.apply(m as u64) as usize).collect();
    let leak = security::class_leakage(code, ch, &labels, 2, budget)?;
    let half = T::lit(0.5);
    let cheat = security::maximize_over_inputs(code, ch, budget, |p| {
        let mut best: Option<T> = None;
        for bit in 0..2 {
            if p.iter().zip(&labels).any(|(&v, &b)| b == bit && v >= half) {
                let other = p
                    .iter()
                    .zip(&labels)
                    .filter(|(_, &b)| b != bit)
                    .map(|(&v, _)| v)
                    .fold(T::zero(), T::max);
                best = Some(best.map_or(other, |b: T| b.max(other)));
            }
        }
        best
    })?;
    Ok(BcSecurity {
        bob_info: leak.class_information,
        h2: leak.h2,
        bound: T::lit(2.0) * (-leak.h2).exp2(),
        alice_cheat: cheat.as_ref().map_or(T::zero(), |c| c.0.min(T::one())),
        alice_cheat_infeasible: cheat.is_none(),
        alice_cheat_witness: cheat.map(|c| c.1),
    })
}

/// A dishonest bidder transmits `x_block` instead of its codeword, hoping a
/// colluder's ID is also listed so either can claim the purchase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheatStrategy {
    pub cheater: usize,
    pub x_block: Word,
    pub colluder: usize,
}

impl CheatStrategy {
    /// The block attaining `δ_D`, sent by the owner of the message it keeps
    /// listed, with the most likely other listed ID as colluder.
    pub fn from_delta_d<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> Result<Option<Self>> {
        let d = security::delta_d_exact(code, ch, budget)?;
        let Some((m, x)) = d.best_witness() else {
            return Ok(None);
        };
        let x = x.clone();
        let p = security::memberships_exact(code, ch, &x, budget)?;
        let colluder = (0..p.len())
            .filter(|&j| j != m)
            .fold(None, |b: Option<usize>, j| match b {
                Some(b) if p[b] >= p[j] => Some(b),
                _ => Some(j),
            });
        Ok(colluder.map(|c| Self { cheater: m + 1, x_block: x, colluder: c + 1 }))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BidRecord {
    pub player: usize,
    pub price: u64,
    pub sent_block: Word,
    pub received_block: Word,
    /// Listed IDs (message index + 1).
    pub list: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheatRecord {
    pub cheater: usize,
    pub colluder: usize,
    pub cheater_listed: bool,
    pub colluder_listed: bool,
    /// Both IDs are in the cheater's list.
    pub success: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuctionTranscript {
    pub seed: u64,
    /// IDs run over `1..=players`.
    pub players: usize,
    pub bids: Vec<BidRecord>,
    pub winner: usize,
    pub winning_price: u64,
    pub verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cheat: Option<CheatRecord>,
}

impl AuctionTranscript {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    /// The dealer's purchase check: a claim on the winning bid succeeds iff
    /// the claimed ID is in that bid's list. Other bids are never consulted.
    pub fn verify_claim(&self, claimed: usize) -> bool {
        self.bids
            .iter()
            .find(|b| b.player == self.winner)
            .is_some_and(|b| b.list.contains(&claimed))
    }
}

/// Runs one auction. Bids are `(player ID, price)`; the highest price wins,
/// ties to the lower ID.
pub fn run_auction<T: Real>(
    code: &ListCode<T>,
    ch: &Channel<T>,
    bids: &[(usize, u64)],
    seed: u64,
    cheat: Option<&CheatStrategy>,
) -> Result<AuctionTranscript> {
    if bids.is_empty() {
        return Err(Error::EmptyAuction);
    }
    let players = code.m();
    let mut seen = BTreeSet::new();
    for &(p, _) in bids {
        if p == 0 || p > players {
            return Err(Error::UnknownPlayer(p));
        }
        if !seen.insert(p) {
            return Err(Error::InvalidArgument(format!("player {p} bids twice")));
        }
    }
    if let Some(c) = cheat {
        for id in [c.cheater, c.colluder] {
            if id == 0 || id > players {
                return Err(Error::UnknownPlayer(id));
            }
        }
        if !seen.contains(&c.cheater) {
            return Err(Error::InvalidArgument(format!("cheater {} does not bid", c.cheater)));
        }
        crate::words::check_word(&c.x_block, ch.input_size(), code.n())?;
    }
    let mut dec = code.decoder(ch)?;
    let mut records = Vec::with_capacity(bids.len());
    let mut list = Vec::new();
    for &player in &seen {
        let price = bids.iter().find(|b| b.0 == player).map(|b| b.1).unwrap_or(0);
        let mut rng = rng_from_seed(derive_seed(seed, &[player as u64]));
        let x = match cheat {
            Some(c) if c.cheater == player => c.x_block.clone(),
            _ => security::sample_codeword(code, player - 1, &mut rng),
        };
        let y = ch.sample_output(&x, &mut rng);
        dec.decode(&y, &mut list)?;
        records.push(BidRecord {
            player,
            price,
            sent_block: x,
            received_block: y,
            list: list.iter().map(|m| m + 1).collect(),
        });
    }
    let win = records
        .iter()
        .fold(None::<&BidRecord>, |best, r| match best {
            Some(b) if b.price >= r.price => Some(b),
            _ => Some(r),
        })
        .expect("at least one bid");
    let (winner, winning_price) = (win.player, win.price);
    let cheat = cheat.map(|c| {
        let rec = records.iter().find(|r| r.player == c.cheater).expect("cheater bids");
        let cheater_listed = rec.list.contains(&c.cheater);
        let colluder_listed = rec.list.contains(&c.colluder);
        CheatRecord {
            cheater: c.cheater,
            colluder: c.colluder,
            cheater_listed,
            colluder_listed,
            success: cheater_listed && colluder_listed,
        }
    });
    let mut tr = AuctionTranscript { seed, players, bids: records, winner, winning_price, verified: false, cheat };
    tr.verified = tr.verify_claim(winner);
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::Distribution;
    use crate::codes::grouped_trivial_code;
    use crate::random_coding::sample_codewords;

    fn noiseless_code(t: u32) -> (ListCode, Channel) {
        let ch = Channel::<f64>::noiseless(2).unwrap();
        let words = (0..1u64 << t).map(|m| crate::words::word_from_index(m, 2, t as usize)).collect();
        (ListCode::threshold(words, Distribution::uniform(2), 0.5, 1).unwrap(), ch)
    }

    #[test]
    fn hash_basics() {
        let h = LinearHash::new(1, 1).unwrap();
        assert_eq!((h.apply(0), h.apply(1)), (0, 1));
        let parity = LinearHash::new(3, 0b111).unwrap();
        assert_eq!(parity.preimage(0).len(), 4);
        assert_eq!(parity.preimage(0), vec![0, 3, 5, 6]);
        assert!(LinearHash::new(3, 0).is_err());
        assert!(LinearHash::new(3, 8).is_err());
    }

    #[test]
    fn hash_balance_and_linearity() {
        for t in 1..=12 {
            for seed in 0..4 {
                let h = make_hash(t, seed).unwrap();
                assert_eq!(h.preimage(0).len(), 1 << (t - 1));
                let mut rng = rng_from_seed(seed);
                for _ in 0..50 {
                    let a = rng.gen_range(0..1u64 << t);
                    let b = rng.gen_range(0..1u64 << t);
                    assert_eq!(h.apply(a ^ b), h.apply(a) ^ h.apply(b));
                }
            }
        }
    }

    #[test]
    fn noiseless_commit_accepts_and_tamper_rejects() {
        let (code, ch) = noiseless_code(3);
        let h = make_hash(3, 1).unwrap();
        for seed in 0..20 {
            let bit = (seed % 2) as u8;
            let tr = commit(bit, &code, &h, &ch, seed).unwrap();
            assert!(tr.accepted);
            assert_eq!(h.apply(tr.chosen_message as u64), bit);
            let wrong = h.preimage(1 - bit)[0] as usize;
            let bad = reveal(&tr, &h, wrong, bit);
            assert!(!bad.accepted);
            assert!(!reveal(&tr, &h, tr.chosen_message, 1 - bit).accepted);
        }
    }

    #[test]
    fn commit_rejects_size_mismatch() {
        let (code, ch) = noiseless_code(3);
        let h = make_hash(2, 1).unwrap();
        assert!(matches!(commit(0, &code, &h, &ch, 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn noiseless_leaks_everything() {
        let (code, ch) = noiseless_code(2);
        let h = LinearHash::new(2, 0b11).unwrap();
        let s = bc_security(&code, &h, &ch, &Budget::default()).unwrap();
        assert!(s.h2.abs() < 1e-12);
        assert!((s.bob_info - 1.0).abs() < 1e-12);
        assert!(s.bound_holds());
        assert_eq!(s.alice_cheat, 0.0);
    }

    #[test]
    fn hashing_bound_and_cheat_vs_delta_d() {
        let ch = Channel::bsc(0.1).unwrap();
        let budget = Budget::default();
        for seed in 0..4 {
            let words = sample_codewords(&Distribution::<f64>::uniform(2), 5, 4, seed);
            let code = ListCode::threshold(words, Distribution::<f64>::uniform(2), 0.1, 2).unwrap();
            let h = make_hash(2, seed).unwrap();
            let s = bc_security(&code, &h, &ch, &budget).unwrap();
            assert!(s.bound_holds(), "{s:?}");
            let d = security::delta_d_exact(&code, &ch, &budget).unwrap();
            assert!(s.alice_cheat <= d.value + 1e-12);
        }
    }

    #[test]
    fn auction_noiseless_honest() {
        let (code, ch) = noiseless_code(3);
        let tr = run_auction(&code, &ch, &[(2, 10), (5, 30), (7, 30)], 4, None).unwrap();
        assert_eq!(tr.winner, 5);
        assert!(tr.verified);
        assert!(!tr.verify_claim(7));
        assert!(tr.bids.iter().all(|b| b.list.iter().all(|&id| (1..=8).contains(&id))));
    }

    #[test]
    fn auction_errors() {
        let (code, ch) = noiseless_code(2);
        assert!(matches!(run_auction(&code, &ch, &[], 0, None), Err(Error::EmptyAuction)));
        assert!(matches!(run_auction(&code, &ch, &[(9, 1)], 0, None), Err(Error::UnknownPlayer(9))));
        assert!(matches!(run_auction(&code, &ch, &[(0, 1)], 0, None), Err(Error::UnknownPlayer(0))));
    }

    #[test]
    fn collusion_on_grouped_code() {
        let ch = Channel::bsc(0.05).unwrap();
        let base = ListCode::maximum_likelihood(&ch, vec![vec![0; 6], vec![1; 6]]).unwrap();
        let code = grouped_trivial_code(&base, 4).unwrap();
        let strat = CheatStrategy::from_delta_d(&code, &ch, &Budget::default()).unwrap().unwrap();
        assert_eq!((strat.cheater - 1) / 4, (strat.colluder - 1) / 4);
        let mut wins = 0;
        for seed in 0..200 {
            let tr = run_auction(&code, &ch, &[(strat.cheater, 5), (8, 3)], seed, Some(&strat)).unwrap();
            wins += tr.cheat.unwrap().success as usize;
        }
        assert!(wins >= 190);
    }
}
