use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::corpus::{Corpus, Query, TokenId, Vocabulary, UNK};
use crate::error::{Error, Result};

/// Token → interchangeable tokens. No token lists itself; lists are
/// deduplicated and keep insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SynonymTable {
    map: HashMap<TokenId, Vec<TokenId>>,
}

impl SynonymTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, token: TokenId, synonym: TokenId) {
        if token == synonym || token == UNK || synonym == UNK {
            return;
        }
        let list = self.map.entry(token).or_default();
        if !list.contains(&synonym) {
            list.push(synonym);
        }
    }

    /// Every member of a group becomes a synonym of every other member.
    pub fn from_groups(groups: &[Vec<String>], vocab: &Vocabulary) -> Self {
        let mut table = SynonymTable::new();
        for g in groups {
            let ids: Vec<TokenId> = g.iter().filter_map(|w| vocab.get(w)).collect();
            for &a in &ids {
                for &b in &ids {
                    table.insert(a, b);
                }
            }
        }
        table
    }

    pub fn get(&self, token: TokenId) -> &[TokenId] {
        self.map.get(&token).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// `token<TAB>syn1,syn2,...` lines; words unknown to `vocab` are skipped.
    pub fn parse_tsv(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let mut table = SynonymTable::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (head, syns) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
                line: n + 1,
                reason: "expected token<TAB>syn1,syn2,...".into(),
            })?;
            let Some(tok) = vocab.get(head.trim()) else {
                continue;
            };
            for s in syns.split(',') {
                if let Some(id) = vocab.get(s.trim()) {
                    table.insert(tok, id);
                }
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text, vocab)
    }

    pub fn to_tsv(&self, vocab: &Vocabulary) -> String {
        let sorted: BTreeMap<_, _> = self.map.iter().collect();
        let mut out = String::new();
        for (tok, syns) in sorted {
            let list: Vec<&str> = syns.iter().map(|&s| vocab.token(s)).collect();
            out.push_str(&format!("{}\t{}\n", vocab.token(*tok), list.join(",")));
        }
        out
    }
}

pub const MIN_PHRASE_LEN: usize = 2;
pub const MAX_PHRASE_LEN: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Phrase {
    pub tokens: Vec<TokenId>,
    pub freq: u64,
}

/// Corpus n-grams of length 2 to 5 with their frequencies.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhraseTable {
    entries: Vec<Phrase>,
}

impl PhraseTable {
    /// Counts n-grams inside sentence bounds and keeps those seen at least
    /// `min_freq` times, most frequent first.
    pub fn from_corpus(corpus: &Corpus, min_freq: u64) -> Self {
        let mut counts: HashMap<&[TokenId], u64> = HashMap::new();
        for d in corpus.docs() {
            for &(s, e) in &d.sentence_bounds {
                let sent = &d.tokens[s..e];
                for n in MIN_PHRASE_LEN..=MAX_PHRASE_LEN {
                    for w in sent.windows(n) {
                        if !w.contains(&UNK) {
                            *counts.entry(w).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
        let entries = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_freq.max(1))
            .map(|(t, freq)| Phrase {
                tokens: t.to_vec(),
                freq,
            })
            .collect();
        Self::from_entries(entries)
    }

    pub fn from_entries(mut entries: Vec<Phrase>) -> Self {
        entries.retain(|p| (MIN_PHRASE_LEN..=MAX_PHRASE_LEN).contains(&p.tokens.len()) && !p.tokens.contains(&UNK));
        entries.sort_by(|a, b| b.freq.cmp(&a.freq).then_with(|| a.tokens.cmp(&b.tokens)));
        PhraseTable { entries }
    }

    pub fn entries(&self) -> &[Phrase] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry indices ordered by query-term overlap, then frequency, then
    /// token order.
    pub fn ranked_for(&self, query: &Query) -> Vec<usize> {
        let overlaps: Vec<usize> = self.entries.iter().map(|p| query.overlap(&p.tokens)).collect();
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| {
            overlaps[b]
                .cmp(&overlaps[a])
                .then_with(|| self.entries[b].freq.cmp(&self.entries[a].freq))
                .then_with(|| self.entries[a].tokens.cmp(&self.entries[b].tokens))
        });
        idx
    }

    /// `phrase<TAB>freq` lines; phrases with unknown words are dropped.
    pub fn parse_tsv(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: &str| Error::MalformedLine {
                line: n + 1,
                reason: reason.to_string(),
            };
            let (phrase, freq) = line.split_once('\t').ok_or_else(|| bad("expected phrase<TAB>freq"))?;
            let freq = freq.trim().parse().map_err(|_| bad("bad frequency"))?;
            let tokens: Vec<TokenId> = phrase.split_whitespace().map(|w| vocab.id(w)).collect();
            entries.push(Phrase { tokens, freq });
        }
        Ok(Self::from_entries(entries))
    }

    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text, vocab)
    }

    pub fn to_tsv(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for p in &self.entries {
            out.push_str(&format!("{}\t{}\n", vocab.detokenize(&p.tokens), p.freq));
        }
        out
    }
}
