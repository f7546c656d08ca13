//! Documents, queries, tokenization, vocabulary and the bigram language model.

mod io;
mod lm;
mod synthetic;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use io::{
    ingest_corpus, ingest_records, load_qrels, load_queries, queries_from_records, read_records,
    write_qrels, write_records, Qrel, Record,
};
pub use lm::{BigramLm, DEFAULT_ADD_K};
pub use synthetic::{generate_synthetic_corpus, relevance_grade, SyntheticConfig, SyntheticCorpus};

pub type TokenId = u32;

/// Id reserved for out-of-vocabulary tokens.
pub const UNK: TokenId = 0;
const UNK_TOKEN: &str = "<unk>";

pub const DEFAULT_MAX_DOC_LEN: usize = 512;

/// Bijection between surface tokens and dense ids, with corpus frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut index = HashMap::new();
        index.insert(UNK_TOKEN.to_string(), UNK);
        Vocabulary {
            tokens: vec![UNK_TOKEN.to_string()],
            counts: vec![0],
            index,
        }
    }

    /// Builds a vocabulary from token lists; ids follow first occurrence.
    pub fn from_words<'a, I, W>(docs: I) -> Self
    where
        I: IntoIterator<Item = W>,
        W: IntoIterator<Item = &'a str>,
    {
        let mut vocab = Vocabulary::new();
        for doc in docs {
            for w in doc {
                vocab.observe(w);
            }
        }
        vocab
    }

    /// Adds one occurrence of `word`, creating an id if needed.
    pub fn observe(&mut self, word: &str) -> TokenId {
        let id = match self.index.get(word) {
            Some(&id) => id,
            None => {
                let id = self.tokens.len() as TokenId;
                self.tokens.push(word.to_string());
                self.counts.push(0);
                self.index.insert(word.to_string(), id);
                id
            }
        };
        self.counts[id as usize] += 1;
        id
    }

    pub fn id(&self, word: &str) -> TokenId {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn get(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .unwrap_or(UNK_TOKEN)
    }

    pub fn count(&self, id: TokenId) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> {
        0..self.tokens.len() as TokenId
    }

    pub fn detokenize(&self, tokens: &[TokenId]) -> String {
        tokens
            .iter()
            .map(|&t| self.token(t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Renders tokens back to text with a period closing each sentence.
    pub fn render(&self, tokens: &[TokenId], bounds: &[(usize, usize)]) -> String {
        let sentences: Vec<String> = bounds
            .iter()
            .map(|&(s, e)| format!("{}.", self.detokenize(&tokens[s..e])))
            .collect();
        sentences.join(" ")
    }

    /// Plain-text form: a header line then `token<TAB>count` per id.
    pub fn to_text(&self) -> String {
        let mut out = String::from("rankattack-vocab v1\n");
        for (t, c) in self.tokens.iter().zip(&self.counts) {
            out.push_str(&format!("{t}\t{c}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "rankattack-vocab v1")) => {}
            _ => {
                return Err(Error::MalformedLine {
                    line: 1,
                    reason: "expected `rankattack-vocab v1` header".into(),
                })
            }
        }
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        let mut index = HashMap::new();
        for (n, line) in lines {
            let (tok, count) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
                line: n + 1,
                reason: "expected token<TAB>count".into(),
            })?;
            let count = count.parse().map_err(|_| Error::MalformedLine {
                line: n + 1,
                reason: format!("bad count `{count}`"),
            })?;
            if index.insert(tok.to_string(), tokens.len() as TokenId).is_some() {
                return Err(Error::DuplicateId(tok.to_string()));
            }
            tokens.push(tok.to_string());
            counts.push(count);
        }
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::MalformedLine {
                line: 2,
                reason: "id 0 must be <unk>".into(),
            });
        }
        Ok(Vocabulary {
            tokens,
            counts,
            index,
        })
    }
}

/// Lowercased words of `text` plus sentence bounds over the word sequence.
///
/// Punctuation is stripped from each word; `.`, `!` and `?` close a sentence.
pub fn split_words(text: &str) -> (Vec<String>, Vec<(usize, usize)>) {
    let mut words = Vec::new();
    let mut bounds = Vec::new();
    let mut sentence_start = 0;
    for raw in text.split_whitespace() {
        let word: String = raw
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        if !word.is_empty() {
            words.push(word);
        }
        let closes = raw.ends_with(['.', '!', '?']);
        if closes && words.len() > sentence_start {
            bounds.push((sentence_start, words.len()));
            sentence_start = words.len();
        }
    }
    if words.len() > sentence_start {
        bounds.push((sentence_start, words.len()));
    }
    (words, bounds)
}

pub fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<TokenId> {
    tokenize_with_bounds(text, vocab).0
}

pub fn tokenize_with_bounds(text: &str, vocab: &Vocabulary) -> (Vec<TokenId>, Vec<(usize, usize)>) {
    let (words, bounds) = split_words(text);
    (words.iter().map(|w| vocab.id(w)).collect(), bounds)
}

/// Drops bounds past `len` and clips the last one.
pub(crate) fn truncate_bounds(bounds: &[(usize, usize)], len: usize) -> Vec<(usize, usize)> {
    bounds
        .iter()
        .filter(|(s, _)| *s < len)
        .map(|&(s, e)| (s, e.min(len)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub tokens: Vec<TokenId>,
    pub sentence_bounds: Vec<(usize, usize)>,
}

impl Document {
    /// Builds a document from already tokenized content, rendering `text`.
    pub fn from_tokens(
        id: impl Into<String>,
        tokens: Vec<TokenId>,
        sentence_bounds: Vec<(usize, usize)>,
        vocab: &Vocabulary,
    ) -> Self {
        let text = vocab.render(&tokens, &sentence_bounds);
        Document {
            id: id.into(),
            text,
            tokens,
            sentence_bounds,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub tokens: Vec<TokenId>,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>, vocab: &Vocabulary) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        let tokens = tokenize(&text, vocab);
        if tokens.is_empty() {
            return Err(Error::InvalidParameter(format!("query `{id}` has no tokens")));
        }
        Ok(Query { id, text, tokens })
    }

    pub fn contains(&self, token: TokenId) -> bool {
        token != UNK && self.tokens.contains(&token)
    }

    /// Number of document positions holding a query term.
    pub fn overlap(&self, tokens: &[TokenId]) -> usize {
        tokens.iter().filter(|&&t| self.contains(t)).count()
    }
}

/// An ingested collection with id lookup.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub vocab: Vocabulary,
    docs: Vec<Document>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(vocab: Vocabulary, docs: Vec<Document>) -> Result<Self> {
        let mut index = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if index.insert(d.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(d.id.clone()));
            }
        }
        Ok(Corpus { vocab, docs, index })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn get(&self, id: &str) -> Result<&Document> {
        self.index
            .get(id)
            .map(|&i| &self.docs[i])
            .ok_or_else(|| Error::UnknownDocument(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.docs.iter().map(|d| d.id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}
