//! List codes: encoders, list decoders and code combinators.
//!
//! A [`ListCode`] maps `M` messages to input blocks of length `n` and decodes
//! every output block to an ordered list of at most `L` messages. Decoders:
//!
//! * threshold: list every message whose log-likelihood ratio against the
//!   reference law `W_{P^n}` reaches `n R3`, keeping the best `L`;
//! * explicit partition: a stored list for every output word;
//! * grouped: `g` messages share each codeword of a base code and the list is
//!   the whole group of every base-decoded message;
//! * concatenated: two codes side by side with the product list.
//!
//! Lists are ordered by decreasing likelihood ratio with ties broken toward
//! the lower message index (partition lists are stored in that order).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::channels::{Channel, Distribution};
use crate::error::{Error, Result};
use crate::real::{log2_sum_exp2, Real};
use crate::words::{advance, check_word, word_count, word_from_index, word_index, Word};

/// Largest output space for which an explicit partition may be stored.
pub const PARTITION_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub enum Encoder<T: Real = f64> {
    Deterministic(Vec<Word>),
    /// Per message, a distribution over input words.
    Stochastic(Vec<Vec<(Word, T)>>),
}

impl<T: Real> Encoder<T> {
    pub fn len(&self) -> usize {
        match self {
            Encoder::Deterministic(w) => w.len(),
            Encoder::Stochastic(w) => w.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `φ(m)` as a list of `(word, probability)`.
    pub fn word_dist(&self, m: usize) -> Vec<(Word, T)> {
        match self {
            Encoder::Deterministic(w) => vec![(w[m].clone(), T::one())],
            Encoder::Stochastic(w) => w[m].clone(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Encoder::Deterministic(_))
    }

    pub fn codewords(&self) -> Option<&[Word]> {
        match self {
            Encoder::Deterministic(w) => Some(w),
            Encoder::Stochastic(_) => None,
        }
    }

    fn block_length(&self) -> Option<usize> {
        match self {
            Encoder::Deterministic(w) => w.first().map(Vec::len),
            Encoder::Stochastic(w) => w.first().and_then(|r| r.first()).map(|(w, _)| w.len()),
        }
    }
}

/// Distinct input words of an encoder and each message's mixture over them.
#[derive(Debug, Clone)]
pub(crate) struct EncoderTable<T: Real> {
    pub words: Vec<Word>,
    /// `rows[m]` = `(word id, log2 probability)`.
    pub rows: Vec<Vec<(usize, T)>>,
    /// `Some(id)` per message for deterministic encoders.
    pub single: Option<Vec<usize>>,
}

impl<T: Real> EncoderTable<T> {
    pub fn new(enc: &Encoder<T>) -> Self {
        fn intern<'w>(ids: &mut HashMap<&'w [usize], usize>, words: &mut Vec<Word>, w: &'w Word) -> usize {
            let next = words.len();
            let id = *ids.entry(w.as_slice()).or_insert(next);
            if id == next {
                words.push(w.clone());
            }
            id
        }
        let mut ids = HashMap::new();
        let mut words: Vec<Word> = Vec::new();
        match enc {
            Encoder::Deterministic(ws) => {
                let single: Vec<usize> = ws.iter().map(|w| intern(&mut ids, &mut words, w)).collect();
                let rows = single.iter().map(|&id| vec![(id, T::zero())]).collect();
                Self { words, rows, single: Some(single) }
            }
            Encoder::Stochastic(ms) => {
                let rows = ms
                    .iter()
                    .map(|dist| {
                        dist.iter()
                            .filter(|(_, p)| *p > T::zero())
                            .map(|(w, p)| (intern(&mut ids, &mut words, w), p.log2()))
                            .collect()
                    })
                    .collect();
                Self { words, rows, single: None }
            }
        }
    }

    /// `log2 W^n(y|φ(m))` from per-word log-likelihoods.
    #[inline]
    pub fn message_ll(&self, m: usize, word_ll: &[T]) -> T {
        match &self.single {
            Some(s) => word_ll[s[m]],
            None => log2_sum_exp2(self.rows[m].iter().map(|&(id, lp)| lp + word_ll[id])),
        }
    }
}

/// Incrementally maintained `log2 W^n(y|w)` for a fixed set of input words
/// (plus optionally a reference law per letter) while `y` moves through the
/// output space. Partial sums are accumulated left to right, so values are
/// bitwise identical to a direct sum.
#[derive(Debug, Clone)]
pub(crate) struct LikelihoodCache<'a, T: Real> {
    channel: &'a Channel<T>,
    n: usize,
    count: usize,
    /// `symbols[pos * count + d]` = symbol of word `d` at `pos`.
    symbols: Vec<usize>,
    reference: Option<Vec<T>>,
    prefix: Vec<T>,
    ref_prefix: Vec<T>,
    prev: Vec<usize>,
    valid: usize,
}

impl<'a, T: Real> LikelihoodCache<'a, T> {
    pub fn new(channel: &'a Channel<T>, words: &[Word], n: usize, reference: Option<Vec<T>>) -> Self {
        let count = words.len();
        let mut symbols = vec![0; n * count];
        for (d, w) in words.iter().enumerate() {
            for (pos, &s) in w.iter().enumerate() {
                symbols[pos * count + d] = s;
            }
        }
        Self {
            channel,
            n,
            count,
            symbols,
            reference,
            prefix: vec![T::zero(); (n + 1) * count],
            ref_prefix: vec![T::zero(); n + 1],
            prev: vec![usize::MAX; n],
            valid: 0,
        }
    }

    /// Updates the cache to `y`; returns the per-word log-likelihoods and
    /// the reference log-likelihood (zero without a reference).
    pub fn update(&mut self, y: &[usize]) -> (&[T], T) {
        let mut start = 0;
        while start < self.valid && self.prev[start] == y[start] {
            start += 1;
        }
        let c = self.count;
        for pos in start..self.n {
            let yp = y[pos];
            let (done, rest) = self.prefix.split_at_mut((pos + 1) * c);
            let before = &done[pos * c..];
            let after = &mut rest[..c];
            let syms = &self.symbols[pos * c..(pos + 1) * c];
            for d in 0..c {
                after[d] = before[d] + self.channel.log2_row(syms[d])[yp];
            }
            if let Some(r) = &self.reference {
                self.ref_prefix[pos + 1] = self.ref_prefix[pos] + r[yp];
            }
            self.prev[pos] = yp;
        }
        self.valid = self.n;
        (&self.prefix[self.n * c..], self.ref_prefix[self.n])
    }
}

/// Stored list for every output word, in output-word index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub output_size: usize,
    pub n: usize,
    pub lists: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecoderSpec<T: Real = f64> {
    Threshold { prior: Distribution<T>, r3: T },
    ExplicitPartition(Partition),
    Grouped { base: Box<ListCode<T>>, group_size: usize },
    Concatenated(Box<ListCode<T>>, Box<ListCode<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListCode<T: Real = f64> {
    n: usize,
    l: usize,
    encoder: Encoder<T>,
    decoder: DecoderSpec<T>,
}

impl<T: Real> ListCode<T> {
    pub fn new(n: usize, l: usize, encoder: Encoder<T>, decoder: DecoderSpec<T>) -> Result<Self> {
        let code = Self { n, l, encoder, decoder };
        code.validate()?;
        Ok(code)
    }

    /// Deterministic code with the threshold decoder.
    pub fn threshold(codewords: Vec<Word>, prior: Distribution<T>, r3: T, l: usize) -> Result<Self> {
        let n = codewords.first().map(Vec::len).unwrap_or(0);
        Self::new(n, l, Encoder::Deterministic(codewords), DecoderSpec::Threshold { prior, r3 })
    }

    /// Deterministic code with a maximum-likelihood single-message decoder
    /// stored as a partition (ties to the lowest index).
    pub fn maximum_likelihood(channel: &Channel<T>, codewords: Vec<Word>) -> Result<Self> {
        let n = codewords.first().map(Vec::len).unwrap_or(0);
        let ky = channel.output_size();
        let total = partition_size(ky, n)?;
        let table = EncoderTable::new(&Encoder::Deterministic(codewords.clone()));
        for w in &codewords {
            check_word(w, channel.input_size(), n)?;
        }
        let mut cache = LikelihoodCache::new(channel, &table.words, n, None);
        let mut lists = Vec::with_capacity(total as usize);
        let mut y = vec![0; n];
        for _ in 0..total {
            let (ll, _) = cache.update(&y);
            let mut best = 0;
            for m in 1..codewords.len() {
                if table.message_ll(m, ll) > table.message_ll(best, ll) {
                    best = m;
                }
            }
            lists.push(vec![best]);
            advance(&mut y, ky);
        }
        Self::new(
            n,
            1,
            Encoder::Deterministic(codewords),
            DecoderSpec::ExplicitPartition(Partition { output_size: ky, n, lists }),
        )
    }

    /// `M = L = 1`: the constant block `symbol^n`, always listed.
    pub fn rate_zero(n: usize, symbol: usize, input_size: usize) -> Result<Self> {
        if symbol >= input_size {
            return Err(Error::SymbolOutOfRange { symbol, alphabet: input_size });
        }
        Self::threshold(
            vec![vec![symbol; n]],
            Distribution::point_mass(input_size, symbol),
            T::zero(),
            1,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Message count `M`.
    pub fn m(&self) -> usize {
        self.encoder.len()
    }

    /// List cap `L`.
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn encoder(&self) -> &Encoder<T> {
        &self.encoder
    }

    pub fn decoder_spec(&self) -> &DecoderSpec<T> {
        &self.decoder
    }

    /// `log2(M)/n` and `log2(L)/n`.
    pub fn rates(&self) -> (f64, f64) {
        let n = self.n.max(1) as f64;
        ((self.m() as f64).log2() / n, (self.l as f64).log2() / n)
    }

    fn validate(&self) -> Result<()> {
        let m = self.m();
        if m == 0 {
            return Err(Error::InvalidCode("code has no messages".into()));
        }
        if self.l == 0 || self.l > m {
            return Err(Error::InvalidCode(format!("list size {} outside 1..={m}", self.l)));
        }
        if let Some(len) = self.encoder.block_length() {
            if len != self.n {
                return Err(Error::LengthMismatch { expected: self.n, got: len });
            }
        }
        match &self.encoder {
            Encoder::Deterministic(ws) => {
                for w in ws {
                    if w.len() != self.n {
                        return Err(Error::LengthMismatch { expected: self.n, got: w.len() });
                    }
                }
            }
            Encoder::Stochastic(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    if row.is_empty() {
                        return Err(Error::InvalidCode(format!("message {i} has no codeword")));
                    }
                    let mut sum = T::zero();
                    for (w, p) in row {
                        if w.len() != self.n {
                            return Err(Error::LengthMismatch { expected: self.n, got: w.len() });
                        }
                        if !(*p >= T::zero()) {
                            return Err(Error::NegativeProbability { index: i, value: p.as_f64() });
                        }
                        sum = sum + *p;
                    }
                    if (sum.as_f64() - 1.0).abs() > T::SUM_TOL {
                        return Err(Error::NotNormalized(sum.as_f64()));
                    }
                }
            }
        }
        match &self.decoder {
            DecoderSpec::Threshold { prior, r3 } => {
                if r3.is_nan() {
                    return Err(Error::InvalidCode("threshold rate is NaN".into()));
                }
                self.check_symbols(prior.len())?;
            }
            DecoderSpec::ExplicitPartition(p) => {
                if p.n != self.n {
                    return Err(Error::LengthMismatch { expected: self.n, got: p.n });
                }
                let total = partition_size(p.output_size, p.n)?;
                if p.lists.len() as u64 != total {
                    return Err(Error::InvalidCode(format!(
                        "partition has {} lists for {total} output words",
                        p.lists.len()
                    )));
                }
                for list in &p.lists {
                    if list.len() > self.l {
                        return Err(Error::InvalidCode(format!("stored list longer than L = {}", self.l)));
                    }
                    for (i, &msg) in list.iter().enumerate() {
                        if msg >= m || list[..i].contains(&msg) {
                            return Err(Error::InvalidCode(format!("bad message {msg} in stored list")));
                        }
                    }
                }
            }
            DecoderSpec::Grouped { base, group_size } => {
                let g = *group_size;
                if g == 0 || base.m() * g != m || base.l * g != self.l || base.n != self.n {
                    return Err(Error::InvalidCode("grouped code sizes inconsistent with base".into()));
                }
                for msg in 0..m {
                    if self.encoder.word_dist(msg) != base.encoder.word_dist(msg / g) {
                        return Err(Error::InvalidCode(format!("message {msg} not encoded as its group")));
                    }
                }
            }
            DecoderSpec::Concatenated(a, b) => {
                if a.n + b.n != self.n || a.m() * b.m() != m || a.l * b.l != self.l {
                    return Err(Error::InvalidCode("concatenated code sizes inconsistent".into()));
                }
                for msg in 0..m {
                    if self.encoder.word_dist(msg) != concat_dist(&a.encoder, &b.encoder, msg / b.m(), msg % b.m()) {
                        return Err(Error::InvalidCode(format!("message {msg} not the product codeword")));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_symbols(&self, k: usize) -> Result<()> {
        for m in 0..self.m() {
            for (w, _) in self.encoder.word_dist(m) {
                check_word(&w, k, self.n)?;
            }
        }
        Ok(())
    }

    /// Checks that the code is usable over `channel`.
    pub fn check_channel(&self, channel: &Channel<T>) -> Result<()> {
        self.check_symbols(channel.input_size())?;
        match &self.decoder {
            DecoderSpec::Threshold { prior, .. } => {
                if prior.len() != channel.input_size() {
                    return Err(Error::AlphabetMismatch(format!(
                        "decoder prior has {} symbols, channel input has {}",
                        prior.len(),
                        channel.input_size()
                    )));
                }
            }
            DecoderSpec::ExplicitPartition(p) => {
                if p.output_size != channel.output_size() {
                    return Err(Error::AlphabetMismatch(format!(
                        "partition built for {} output symbols, channel has {}",
                        p.output_size,
                        channel.output_size()
                    )));
                }
            }
            DecoderSpec::Grouped { base, .. } => base.check_channel(channel)?,
            DecoderSpec::Concatenated(a, b) => {
                a.check_channel(channel)?;
                b.check_channel(channel)?;
            }
        }
        Ok(())
    }

    /// Runtime decoder over `channel`.
    pub fn decoder<'a>(&'a self, channel: &'a Channel<T>) -> Result<ListDecoder<'a, T>> {
        self.check_channel(channel)?;
        Ok(self.decoder_unchecked(channel))
    }

    pub(crate) fn decoder_unchecked<'a>(&'a self, channel: &'a Channel<T>) -> ListDecoder<'a, T> {
        let kind = match &self.decoder {
            DecoderSpec::Threshold { prior, r3 } => {
                let table = EncoderTable::new(&self.encoder);
                let reference: Vec<T> = channel
                    .output_probs(prior.probs())
                    .into_iter()
                    .map(|v| v.log2())
                    .collect();
                let cache = LikelihoodCache::new(channel, &table.words, self.n, Some(reference));
                Kind::Threshold(Box::new(ThresholdState {
                    table,
                    cache,
                    threshold: T::from_count(self.n) * *r3,
                    l: self.l,
                    llr: Vec::new(),
                    candidates: Vec::new(),
                }))
            }
            DecoderSpec::ExplicitPartition(p) => Kind::Partition(p),
            DecoderSpec::Grouped { base, group_size } => Kind::Grouped {
                base: Box::new(base.decoder_unchecked(channel)),
                group_size: *group_size,
                scratch: Vec::new(),
            },
            DecoderSpec::Concatenated(a, b) => Kind::Concatenated {
                first: Box::new(a.decoder_unchecked(channel)),
                second: Box::new(b.decoder_unchecked(channel)),
                split: a.n,
                m_second: b.m(),
                scratch: (Vec::new(), Vec::new()),
            },
        };
        ListDecoder { n: self.n, kind }
    }

    /// Decodes one output block (convenience; prefer [`ListCode::decoder`] in loops).
    pub fn decode(&self, channel: &Channel<T>, y: &[usize]) -> Result<Vec<usize>> {
        let mut dec = self.decoder(channel)?;
        let mut out = Vec::new();
        dec.decode(y, &mut out)?;
        Ok(out)
    }
}

fn partition_size(ky: usize, n: usize) -> Result<u64> {
    match word_count(ky, n) {
        Some(c) if c <= PARTITION_LIMIT => Ok(c),
        _ => Err(Error::BudgetExceeded {
            required: crate::words::word_count_f64(ky, n),
            budget: PARTITION_LIMIT,
        }),
    }
}

fn concat_dist<T: Real>(a: &Encoder<T>, b: &Encoder<T>, ma: usize, mb: usize) -> Vec<(Word, T)> {
    let mut out = Vec::new();
    for (wa, pa) in a.word_dist(ma) {
        for (wb, pb) in b.word_dist(mb) {
            let mut w = wa.clone();
            w.extend_from_slice(&wb);
            out.push((w, pa * pb));
        }
    }
    out
}

/// `L` messages share each codeword of `base`; the decoder returns the whole
/// group of every message the base decoder lists.
pub fn grouped_trivial_code<T: Real>(base: &ListCode<T>, group_size: usize) -> Result<ListCode<T>> {
    if group_size == 0 {
        return Err(Error::InvalidArgument("group size must be positive".into()));
    }
    let m = base.m() * group_size;
    let encoder = match &base.encoder {
        Encoder::Deterministic(ws) => Encoder::Deterministic((0..m).map(|i| ws[i / group_size].clone()).collect()),
        Encoder::Stochastic(rows) => Encoder::Stochastic((0..m).map(|i| rows[i / group_size].clone()).collect()),
    };
    ListCode::new(
        base.n,
        base.l * group_size,
        encoder,
        DecoderSpec::Grouped { base: Box::new(base.clone()), group_size },
    )
}

/// Side-by-side code: message `(a, b)` has index `a * M_b + b`, codeword
/// `φ_a(a) φ_b(b)` and list `list_a × list_b`.
pub fn concatenate<T: Real>(a: &ListCode<T>, b: &ListCode<T>) -> Result<ListCode<T>> {
    if let (
        DecoderSpec::Threshold { prior: pa, .. },
        DecoderSpec::Threshold { prior: pb, .. },
    ) = (&a.decoder, &b.decoder)
    {
        if pa.len() != pb.len() {
            return Err(Error::AlphabetMismatch(format!(
                "input alphabets of size {} and {}",
                pa.len(),
                pb.len()
            )));
        }
    }
    if let (DecoderSpec::ExplicitPartition(pa), DecoderSpec::ExplicitPartition(pb)) = (&a.decoder, &b.decoder) {
        if pa.output_size != pb.output_size {
            return Err(Error::AlphabetMismatch(format!(
                "output alphabets of size {} and {}",
                pa.output_size, pb.output_size
            )));
        }
    }
    let m = a.m() * b.m();
    let encoder = if a.encoder.is_deterministic() && b.encoder.is_deterministic() {
        Encoder::Deterministic(
            (0..m)
                .map(|i| concat_dist(&a.encoder, &b.encoder, i / b.m(), i % b.m()).remove(0).0)
                .collect(),
        )
    } else {
        Encoder::Stochastic((0..m).map(|i| concat_dist(&a.encoder, &b.encoder, i / b.m(), i % b.m())).collect())
    };
    ListCode::new(
        a.n + b.n,
        a.l * b.l,
        encoder,
        DecoderSpec::Concatenated(Box::new(a.clone()), Box::new(b.clone())),
    )
}

#[derive(Debug, Clone)]
struct ThresholdState<'a, T: Real> {
    table: EncoderTable<T>,
    cache: LikelihoodCache<'a, T>,
    threshold: T,
    l: usize,
    llr: Vec<T>,
    /// Messages passing the threshold at the last decode, ascending.
    candidates: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Kind<'a, T: Real> {
    Threshold(Box<ThresholdState<'a, T>>),
    Partition(&'a Partition),
    Grouped {
        base: Box<ListDecoder<'a, T>>,
        group_size: usize,
        scratch: Vec<usize>,
    },
    Concatenated {
        first: Box<ListDecoder<'a, T>>,
        second: Box<ListDecoder<'a, T>>,
        split: usize,
        m_second: usize,
        scratch: (Vec<usize>, Vec<usize>),
    },
}

/// Decoder bound to a channel. Cheap to clone; keeps per-instance caches,
/// so consecutive output words sharing a prefix decode faster.
#[derive(Debug, Clone)]
pub struct ListDecoder<'a, T: Real = f64> {
    n: usize,
    kind: Kind<'a, T>,
}

impl<'a, T: Real> ListDecoder<'a, T> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Writes the ordered list for `y` into `out` (cleared first).
    pub fn decode(&mut self, y: &[usize], out: &mut Vec<usize>) -> Result<()> {
        if y.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: y.len() });
        }
        self.decode_unchecked(y, out);
        Ok(())
    }

    pub(crate) fn decode_unchecked(&mut self, y: &[usize], out: &mut Vec<usize>) {
        out.clear();
        match &mut self.kind {
            Kind::Threshold(st) => st.decode(y, out),
            Kind::Partition(p) => {
                out.extend_from_slice(&p.lists[word_index(y, p.output_size) as usize]);
            }
            Kind::Grouped { base, group_size, scratch } => {
                base.decode_unchecked(y, scratch);
                for &b in scratch.iter() {
                    out.extend(b * *group_size..(b + 1) * *group_size);
                }
            }
            Kind::Concatenated { first, second, split, m_second, scratch } => {
                first.decode_unchecked(&y[..*split], &mut scratch.0);
                second.decode_unchecked(&y[*split..], &mut scratch.1);
                for &a in &scratch.0 {
                    for &b in &scratch.1 {
                        out.push(a * *m_second + b);
                    }
                }
            }
        }
    }

    /// For threshold decoders, messages that passed the threshold in the last
    /// decode (before truncation to `L`), ascending.
    pub fn threshold_candidates(&self) -> Option<&[usize]> {
        match &self.kind {
            Kind::Threshold(st) => Some(&st.candidates),
            _ => None,
        }
    }

    /// Log-likelihood ratios of the last threshold decode, per message.
    pub fn last_llr(&self) -> Option<&[T]> {
        match &self.kind {
            Kind::Threshold(st) => Some(&st.llr),
            _ => None,
        }
    }
}

impl<'a, T: Real> ThresholdState<'a, T> {
    fn decode(&mut self, y: &[usize], out: &mut Vec<usize>) {
        let (word_ll, reference) = self.cache.update(y);
        let m = self.table.rows.len();
        self.llr.clear();
        self.candidates.clear();
        for msg in 0..m {
            let v = self.table.message_ll(msg, word_ll) - reference;
            self.llr.push(v);
            if v >= self.threshold {
                self.candidates.push(msg);
            }
        }
        out.extend_from_slice(&self.candidates);
        let llr = &self.llr;
        out.sort_by(|&a, &b| {
            llr[b]
                .partial_cmp(&llr[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        out.truncate(self.l);
    }
}

// ---- JSON ----

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct WeightedWord<T> {
    word: Word,
    p: T,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct CodeJson<T> {
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "L")]
    l: usize,
    codewords: Vec<Word>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stochastic: Option<Vec<Vec<WeightedWord<T>>>>,
    decoder: DecoderJson<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", bound = "T: Real")]
enum DecoderJson<T> {
    Threshold {
        #[serde(rename = "P")]
        prior: Vec<T>,
        r3: T,
    },
    /// Run-length encoded lists: `[run, [messages]]` over output words in index order.
    Explicit {
        output_size: usize,
        assignment: Vec<(u64, Vec<usize>)>,
    },
    Grouped {
        group_size: usize,
        base: Box<CodeJson<T>>,
    },
    Concatenated {
        first: Box<CodeJson<T>>,
        second: Box<CodeJson<T>>,
    },
}

impl<T: Real> From<&ListCode<T>> for CodeJson<T> {
    fn from(c: &ListCode<T>) -> Self {
        let (codewords, stochastic) = match &c.encoder {
            Encoder::Deterministic(w) => (w.clone(), None),
            Encoder::Stochastic(rows) => (
                Vec::new(),
                Some(
                    rows.iter()
                        .map(|r| r.iter().map(|(w, p)| WeightedWord { word: w.clone(), p: *p }).collect())
                        .collect(),
                ),
            ),
        };
        let decoder = match &c.decoder {
            DecoderSpec::Threshold { prior, r3 } => DecoderJson::Threshold { prior: prior.probs().to_vec(), r3: *r3 },
            DecoderSpec::ExplicitPartition(p) => {
                let mut runs: Vec<(u64, Vec<usize>)> = Vec::new();
                for list in &p.lists {
                    match runs.last_mut() {
                        Some((count, last)) if last == list => *count += 1,
                        _ => runs.push((1, list.clone())),
                    }
                }
                DecoderJson::Explicit { output_size: p.output_size, assignment: runs }
            }
            DecoderSpec::Grouped { base, group_size } => DecoderJson::Grouped {
                group_size: *group_size,
                base: Box::new(CodeJson::from(base.as_ref())),
            },
            DecoderSpec::Concatenated(a, b) => DecoderJson::Concatenated {
                first: Box::new(CodeJson::from(a.as_ref())),
                second: Box::new(CodeJson::from(b.as_ref())),
            },
        };
        CodeJson { n: c.n, m: c.m(), l: c.l, codewords, stochastic, decoder }
    }
}

impl<T: Real> TryFrom<CodeJson<T>> for ListCode<T> {
    type Error = Error;

    fn try_from(j: CodeJson<T>) -> Result<Self> {
        let encoder = match j.stochastic {
            Some(rows) => Encoder::Stochastic(
                rows.into_iter()
                    .map(|r| r.into_iter().map(|ww| (ww.word, ww.p)).collect())
                    .collect(),
            ),
            None => Encoder::Deterministic(j.codewords),
        };
        if encoder.len() != j.m {
            return Err(Error::InvalidCode(format!("M = {} but {} codewords", j.m, encoder.len())));
        }
        let decoder = match j.decoder {
            DecoderJson::Threshold { prior, r3 } => DecoderSpec::Threshold { prior: Distribution::new(prior)?, r3 },
            DecoderJson::Explicit { output_size, assignment } => {
                let total = partition_size(output_size, j.n)?;
                let covered: u64 = assignment.iter().map(|(c, _)| *c).sum();
                if covered != total {
                    return Err(Error::InvalidCode(format!(
                        "assignment covers {covered} of {total} output words"
                    )));
                }
                let mut lists = Vec::with_capacity(total as usize);
                for (count, list) in assignment {
                    for _ in 0..count {
                        lists.push(list.clone());
                    }
                }
                DecoderSpec::ExplicitPartition(Partition { output_size, n: j.n, lists })
            }
            DecoderJson::Grouped { group_size, base } => DecoderSpec::Grouped {
                base: Box::new(ListCode::try_from(*base)?),
                group_size,
            },
            DecoderJson::Concatenated { first, second } => DecoderSpec::Concatenated(
                Box::new(ListCode::try_from(*first)?),
                Box::new(ListCode::try_from(*second)?),
            ),
        };
        ListCode::new(j.n, j.l, encoder, decoder)
    }
}

impl<T: Real> Serialize for ListCode<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CodeJson::from(self).serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for ListCode<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = CodeJson::<T>::deserialize(d)?;
        ListCode::try_from(j).map_err(serde::de::Error::custom)
    }
}

impl<T: Real> ListCode<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("code serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Every output word of length `n` in index order (small `n` only).
pub fn all_words(k: usize, n: usize) -> impl Iterator<Item = Word> {
    let total = word_count(k, n).unwrap_or(0);
    (0..total).map(move |i| word_from_index(i, k, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn bsc01() -> Channel {
        Channel::bsc(0.1).unwrap()
    }

    fn repetition(n: usize) -> Vec<Word> {
        vec![vec![0; n], vec![1; n]]
    }

    #[test]
    fn noiseless_threshold_lists_sent_message() {
        let ch = Channel::<f64>::noiseless(2).unwrap();
        let words = vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0], vec![1, 1, 1]];
        let code = ListCode::threshold(words.clone(), Distribution::uniform(2), 0.1, 2).unwrap();
        for (m, w) in words.iter().enumerate() {
            assert_eq!(code.decode(&ch, w).unwrap(), vec![m]);
        }
    }

    #[test]
    fn ties_go_to_lower_index() {
        let ch = bsc01();
        let code = ListCode::threshold(vec![vec![0, 0], vec![1, 1]], Distribution::uniform(2), -10.0, 1).unwrap();
        assert_eq!(code.decode(&ch, &[0, 1]).unwrap(), vec![0]);
        assert_eq!(code.decode(&ch, &[1, 0]).unwrap(), vec![0]);
        let ml = ListCode::maximum_likelihood(&ch, vec![vec![0, 0], vec![1, 1]]).unwrap();
        assert_eq!(ml.decode(&ch, &[1, 0]).unwrap(), vec![0]);
        assert_eq!(ml.decode(&ch, &[1, 1]).unwrap(), vec![1]);
    }

    #[test]
    fn threshold_candidates_match_direct_enumeration() {
        let ch = bsc01();
        let words = vec![vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]];
        let code = ListCode::threshold(words.clone(), Distribution::uniform(2), 0.2, 4).unwrap();
        let mut dec = code.decoder(&ch).unwrap();
        let mut out = Vec::new();
        for y in all_words(2, 3) {
            dec.decode(&y, &mut out).unwrap();
            // W_{P^n}(y) = 2^-3 under the uniform prior on BSC
            let oracle: Vec<usize> = (0..4)
                .filter(|&i| ch.product_prob(&words[i], &y).unwrap() >= 2f64.powf(3.0 * 0.2) * 0.125)
                .collect();
            let mut sorted = out.clone();
            sorted.sort();
            assert_eq!(sorted, oracle, "y = {y:?}");
        }
    }

    #[test]
    fn list_truncated_by_likelihood() {
        let ch = bsc01();
        let words = vec![vec![1, 1, 1], vec![0, 0, 1], vec![0, 0, 0]];
        let code = ListCode::threshold(words, Distribution::uniform(2), -5.0, 2).unwrap();
        let mut dec = code.decoder(&ch).unwrap();
        let mut out = Vec::new();
        dec.decode(&[0, 0, 0], &mut out).unwrap();
        assert_eq!(out, vec![2, 1]);
        assert_eq!(dec.threshold_candidates().unwrap(), &[0, 1, 2]);
    }

    #[test]
    fn cached_decoding_equals_fresh_decoding() {
        let ch = Channel::new(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]]).unwrap();
        let mut rng = rng_from_seed(9);
        let words: Vec<Word> = (0..6).map(|_| (0..4).map(|_| rng.gen_range(0..2)).collect()).collect();
        let code = ListCode::threshold(words, Distribution::new(vec![0.4, 0.6]).unwrap(), 0.05, 3).unwrap();
        let mut dec = code.decoder(&ch).unwrap();
        let mut out = Vec::new();
        let mut ys: Vec<Word> = all_words(3, 4).collect();
        ys.reverse();
        for y in all_words(3, 4).chain(ys) {
            dec.decode(&y, &mut out).unwrap();
            assert_eq!(out, code.decode(&ch, &y).unwrap());
            assert!(out.len() <= 3);
        }
    }

    #[test]
    fn grouped_code_shape() {
        let ch = bsc01();
        let base = ListCode::maximum_likelihood(&ch, repetition(3)).unwrap();
        let g = grouped_trivial_code(&base, 4).unwrap();
        assert_eq!((g.m(), g.l()), (8, 4));
        let words = g.encoder().codewords().unwrap();
        assert!(words[..4].iter().all(|w| w == &vec![0, 0, 0]));
        assert_eq!(g.decode(&ch, &[1, 1, 0]).unwrap(), vec![4, 5, 6, 7]);
    }

    #[test]
    fn concatenation_shape() {
        let ch = bsc01();
        let a = ListCode::threshold(repetition(2), Distribution::uniform(2), -1.0, 2).unwrap();
        let z = ListCode::rate_zero(3, 0, 2).unwrap();
        let c = concatenate(&a, &z).unwrap();
        assert_eq!((c.n(), c.m(), c.l()), (5, 2, 2));
        let (r1, r2) = c.rates();
        let (a1, a2) = a.rates();
        assert!((r1 - a1 * 2.0 / 5.0).abs() < 1e-12 && (r2 - a2 * 2.0 / 5.0).abs() < 1e-12);
        let b = ListCode::maximum_likelihood(&ch, repetition(2)).unwrap();
        let c = concatenate(&a, &b).unwrap();
        assert_eq!((c.m(), c.l()), (4, 2));
        let y = [0, 0, 1, 1];
        let la = a.decode(&ch, &y[..2]).unwrap();
        let lb = b.decode(&ch, &y[2..]).unwrap();
        let expect: Vec<usize> = la.iter().flat_map(|&x| lb.iter().map(move |&v| x * 2 + v)).collect();
        assert_eq!(c.decode(&ch, &y).unwrap(), expect);
        let q = ListCode::threshold(vec![vec![2, 2]], Distribution::uniform(3), 0.0, 1).unwrap();
        assert!(matches!(concatenate(&a, &q), Err(Error::AlphabetMismatch(_))));
    }

    #[test]
    fn invalid_codes_rejected() {
        let p = Distribution::uniform(2);
        assert!(ListCode::threshold(repetition(3), p.clone(), 0.1, 3).is_err());
        assert!(ListCode::threshold(repetition(3), p.clone(), 0.1, 0).is_err());
        assert!(ListCode::threshold(vec![vec![0, 0], vec![1]], p.clone(), 0.1, 1).is_err());
        assert!(ListCode::threshold(vec![vec![0, 2]], p, 0.1, 1).is_err());
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let ch = bsc01();
        let base = ListCode::maximum_likelihood(&ch, repetition(4)).unwrap();
        let codes = vec![
            ListCode::threshold(repetition(3), Distribution::new(vec![0.3, 0.7]).unwrap(), 0.123, 1).unwrap(),
            grouped_trivial_code(&base, 2).unwrap(),
            concatenate(&base, &ListCode::rate_zero(2, 1, 2).unwrap()).unwrap(),
            ListCode::new(
                2,
                1,
                Encoder::Stochastic(vec![
                    vec![(vec![0, 0], 0.25), (vec![0, 1], 0.75)],
                    vec![(vec![1, 1], 1.0)],
                ]),
                DecoderSpec::Threshold { prior: Distribution::uniform(2), r3: 0.0 },
            )
            .unwrap(),
        ];
        for c in codes {
            let s = c.to_json();
            let back: ListCode = ListCode::from_json(&s).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_json(), s);
        }
        let s = base.to_json();
        assert!(s.contains("\"explicit\""));
        assert!(ListCode::<f64>::from_json("{\"n\":1}").is_err());
    }

    #[test]
    fn threshold_json_layout() {
        let c = ListCode::threshold(repetition(2), Distribution::uniform(2), 0.5, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(v["M"], 2);
        assert_eq!(v["L"], 1);
        assert_eq!(v["decoder"]["type"], "threshold");
        assert_eq!(v["decoder"]["P"][0], 0.5);
        assert_eq!(v["codewords"][1][0], 1);
    }

    #[test]
    fn partition_over_limit_rejected() {
        let ch = bsc01();
        assert!(matches!(
            ListCode::maximum_likelihood(&ch, repetition(21)),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    proptest! {
        #[test]
        fn decode_respects_list_size_and_order(seed in any::<u64>(), l in 1usize..5, r3 in -1.0f64..1.0) {
            let ch = Channel::new(vec![vec![0.8, 0.15, 0.05], vec![0.1, 0.2, 0.7], vec![0.3, 0.4, 0.3]]).unwrap();
            let mut rng = rng_from_seed(seed);
            let words: Vec<Word> = (0..6).map(|_| (0..3).map(|_| rng.gen_range(0..3)).collect()).collect();
            let code = ListCode::threshold(words, Distribution::uniform(3), r3, l).unwrap();
            let mut dec = code.decoder(&ch).unwrap();
            let mut out = Vec::new();
            for y in all_words(3, 3) {
                dec.decode(&y, &mut out).unwrap();
                prop_assert!(out.len() <= l);
                let llr = dec.last_llr().unwrap();
                for pair in out.windows(2) {
                    prop_assert!(llr[pair[0]] > llr[pair[1]] || (llr[pair[0]] == llr[pair[1]] && pair[0] < pair[1]));
                }
            }
        }

        #[test]
        fn partition_covers_every_output_once(seed in any::<u64>()) {
            let ch = bsc01();
            let mut rng = rng_from_seed(seed);
            let words: Vec<Word> = (0..4).map(|_| (0..4).map(|_| rng.gen_range(0..2)).collect()).collect();
            let code = ListCode::maximum_likelihood(&ch, words).unwrap();
            let DecoderSpec::ExplicitPartition(p) = code.decoder_spec() else { unreachable!() };
            prop_assert_eq!(p.lists.len(), 16);
            prop_assert!(p.lists.iter().all(|l| l.len() == 1));
        }
    }
}
