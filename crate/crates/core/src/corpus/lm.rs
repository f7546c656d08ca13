use std::collections::{BTreeMap, HashMap};

use super::{Corpus, TokenId};
use crate::error::{Error, Result};

pub const DEFAULT_ADD_K: f64 = 0.1;

/// Add-k smoothed bigram model over token ids.
///
/// The first token of a sequence is scored by the smoothed unigram
/// distribution, every later token by the bigram conditional on its
/// predecessor. Context counts only include tokens that have a successor, so
/// each conditional is a proper distribution over the vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct BigramLm {
    vocab_size: usize,
    add_k: f64,
    unigram: Vec<u64>,
    total: u64,
    context: Vec<u64>,
    bigram: HashMap<(TokenId, TokenId), u64>,
}

impl BigramLm {
    pub fn untrained(vocab_size: usize, add_k: f64) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::InvalidParameter("vocab_size must be positive".into()));
        }
        if !(add_k > 0.0 && add_k.is_finite()) {
            return Err(Error::InvalidParameter(format!("add_k must be > 0, got {add_k}")));
        }
        Ok(BigramLm {
            vocab_size,
            add_k,
            unigram: vec![0; vocab_size],
            total: 0,
            context: vec![0; vocab_size],
            bigram: HashMap::new(),
        })
    }

    pub fn train<'a>(
        sequences: impl IntoIterator<Item = &'a [TokenId]>,
        vocab_size: usize,
        add_k: f64,
    ) -> Result<Self> {
        let mut lm = Self::untrained(vocab_size, add_k)?;
        for seq in sequences {
            for (i, &t) in seq.iter().enumerate() {
                lm.unigram[t as usize] += 1;
                lm.total += 1;
                if let Some(&next) = seq.get(i + 1) {
                    lm.context[t as usize] += 1;
                    *lm.bigram.entry((t, next)).or_insert(0) += 1;
                }
            }
        }
        Ok(lm)
    }

    pub fn from_corpus(corpus: &Corpus, add_k: f64) -> Result<Self> {
        Self::train(
            corpus.docs().iter().map(|d| d.tokens.as_slice()),
            corpus.vocab.len(),
            add_k,
        )
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn add_k(&self) -> f64 {
        self.add_k
    }

    /// `log P(token | prev)`, or the unigram log-probability without context.
    pub fn log_prob(&self, prev: Option<TokenId>, token: TokenId) -> f64 {
        let v = self.vocab_size as f64;
        let k = self.add_k;
        let tok = token as usize;
        match prev {
            None => {
                let c = self.unigram.get(tok).copied().unwrap_or(0) as f64;
                ((c + k) / (self.total as f64 + k * v)).ln()
            }
            Some(p) => {
                let c = self.bigram.get(&(p, token)).copied().unwrap_or(0) as f64;
                let ctx = self.context.get(p as usize).copied().unwrap_or(0) as f64;
                ((c + k) / (ctx + k * v)).ln()
            }
        }
    }

    /// Total negative log-likelihood of a sequence.
    pub fn nll(&self, tokens: &[TokenId]) -> f64 {
        let mut prev = None;
        let mut total = 0.0;
        for &t in tokens {
            total -= self.log_prob(prev, t);
            prev = Some(t);
        }
        total
    }

    /// `exp(mean NLL)`; always in `[1, inf)`.
    pub fn perplexity(&self, tokens: &[TokenId]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok((self.nll(tokens) / tokens.len() as f64).exp())
    }

    /// Count file: header, then `u id count` and `b prev next count` lines in
    /// id order.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "rankattack-bigram v1 vocab={} add_k={}\n",
            self.vocab_size, self.add_k
        );
        for (id, &c) in self.unigram.iter().enumerate() {
            if c > 0 {
                out.push_str(&format!("u\t{id}\t{c}\n"));
            }
        }
        let sorted: BTreeMap<_, _> = self.bigram.iter().collect();
        for ((a, b), c) in sorted {
            out.push_str(&format!("b\t{a}\t{b}\t{c}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l).unwrap_or("");
        let bad = |line: usize, reason: &str| Error::MalformedLine {
            line,
            reason: reason.to_string(),
        };
        let mut parts = header.split_whitespace();
        if parts.next() != Some("rankattack-bigram") || parts.next() != Some("v1") {
            return Err(bad(1, "expected `rankattack-bigram v1` header"));
        }
        let mut vocab = None;
        let mut add_k = None;
        for p in parts {
            match p.split_once('=') {
                Some(("vocab", v)) => vocab = v.parse::<usize>().ok(),
                Some(("add_k", v)) => add_k = v.parse::<f64>().ok(),
                _ => return Err(bad(1, "unknown header field")),
            }
        }
        let mut lm = Self::untrained(
            vocab.ok_or_else(|| bad(1, "missing vocab"))?,
            add_k.ok_or_else(|| bad(1, "missing add_k"))?,
        )?;
        for (n, line) in lines {
            let f: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| s.parse::<u64>().map_err(|_| bad(n + 1, "bad number"));
            match f.as_slice() {
                ["u", id, c] => {
                    let id = num(id)? as usize;
                    if id >= lm.vocab_size {
                        return Err(bad(n + 1, "id out of range"));
                    }
                    let c = num(c)?;
                    lm.unigram[id] = c;
                    lm.total += c;
                }
                ["b", a, b, c] => {
                    let (a, b, c) = (num(a)?, num(b)?, num(c)?);
                    if a as usize >= lm.vocab_size || b as usize >= lm.vocab_size {
                        return Err(bad(n + 1, "id out of range"));
                    }
                    lm.context[a as usize] += c;
                    lm.bigram.insert((a as TokenId, b as TokenId), c);
                }
                _ => return Err(bad(n + 1, "expected u or b record")),
            }
        }
        Ok(lm)
    }
}
