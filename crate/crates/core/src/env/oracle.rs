//! Naturalness scoring of a perturbed document against its original.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{BigramLm, TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::linalg::cosine;
use crate::ranker::NeuralRanker;

/// Embedding-similarity and bigram-perplexity scores, both in `[0, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct LocalOracle<'a> {
    pub embeddings: &'a NeuralRanker,
    pub lm: &'a BigramLm,
}

impl LocalOracle<'_> {
    /// `(1 + cos(ē_t, ē_0)) / 2`.
    pub fn similarity(&self, current: &[TokenId], original: &[TokenId]) -> Result<f64> {
        if current == original && !current.is_empty() {
            return Ok(1.0);
        }
        let a = self.embeddings.mean_embedding(current)?;
        let b = self.embeddings.mean_embedding(original)?;
        Ok(((1.0 + cosine(&a, &b)) / 2.0).clamp(0.0, 1.0))
    }

    /// `exp(-max(0, PPL_t / PPL_0 - 1))`.
    pub fn fluency(&self, current: &[TokenId], original: &[TokenId]) -> Result<f64> {
        let ratio = self.lm.perplexity(current)? / self.lm.perplexity(original)?;
        Ok((-(ratio - 1.0).max(0.0)).exp())
    }
}

/// Where and how to reach a remote judge.
///
/// Each criterion is one `POST` of
/// `{"criterion": "similarity" | "fluency", "original": text, "perturbed": text}`
/// answered by `{"score": number}` on `[scale_min, scale_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    pub endpoint: String,
    pub timeout_ms: u64,
    pub retries: u32,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        ExternalConfig {
            endpoint: "http://127.0.0.1:8080/judge".into(),
            timeout_ms: 2000,
            retries: 2,
            scale_min: 0.0,
            scale_max: 10.0,
        }
    }
}

#[derive(Serialize)]
struct JudgeRequest<'a> {
    criterion: &'a str,
    original: &'a str,
    perturbed: &'a str,
}

#[derive(Deserialize)]
struct JudgeResponse {
    score: f64,
}

pub struct ExternalOracle<'a> {
    config: ExternalConfig,
    agent: ureq::Agent,
    vocab: &'a Vocabulary,
    fallback: LocalOracle<'a>,
    fallbacks: AtomicUsize,
}

impl<'a> ExternalOracle<'a> {
    pub fn new(config: ExternalConfig, vocab: &'a Vocabulary, fallback: LocalOracle<'a>) -> Result<Self> {
        if !(config.scale_max > config.scale_min) {
            return Err(Error::InvalidParameter("external scale_max must exceed scale_min".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Ok(ExternalOracle {
            config,
            agent,
            vocab,
            fallback,
            fallbacks: AtomicUsize::new(0),
        })
    }

    /// Calls that fell back to the local oracle so far.
    pub fn fallback_count(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }

    fn request(&self, criterion: &str, original: &str, perturbed: &str) -> Result<f64> {
        let body = JudgeRequest {
            criterion,
            original,
            perturbed,
        };
        let mut last = String::new();
        for _ in 0..=self.config.retries {
            let sent = self
                .agent
                .post(&self.config.endpoint)
                .send_json(&body)
                .and_then(|mut r| r.body_mut().read_json::<JudgeResponse>());
            match sent {
                Ok(r) if r.score.is_finite() => {
                    let span = self.config.scale_max - self.config.scale_min;
                    return Ok(((r.score - self.config.scale_min) / span).clamp(0.0, 1.0));
                }
                Ok(r) => last = format!("non-finite score {}", r.score),
                Err(e) => last = e.to_string(),
            }
        }
        Err(Error::Oracle(last))
    }

    fn judged(&self, criterion: &str, current: &[TokenId], original: &[TokenId], local: impl Fn() -> Result<f64>) -> Result<f64> {
        let a = self.vocab.detokenize(original);
        let b = self.vocab.detokenize(current);
        match self.request(criterion, &a, &b) {
            Ok(v) => Ok(v),
            Err(e) => {
                log::warn!("external {criterion} judge failed ({e}); using the local oracle");
                self.fallbacks.fetch_add(1, Ordering::Relaxed);
                local()
            }
        }
    }
}

pub enum NaturalnessOracle<'a> {
    Local(LocalOracle<'a>),
    External(ExternalOracle<'a>),
}

impl<'a> NaturalnessOracle<'a> {
    pub fn local(embeddings: &'a NeuralRanker, lm: &'a BigramLm) -> Self {
        NaturalnessOracle::Local(LocalOracle { embeddings, lm })
    }

    pub fn mode(&self) -> &'static str {
        match self {
            NaturalnessOracle::Local(_) => "local",
            NaturalnessOracle::External(_) => "external",
        }
    }

    pub fn similarity(&self, current: &[TokenId], original: &[TokenId]) -> Result<f64> {
        match self {
            NaturalnessOracle::Local(l) => l.similarity(current, original),
            NaturalnessOracle::External(x) => {
                x.judged("similarity", current, original, || x.fallback.similarity(current, original))
            }
        }
    }

    pub fn fluency(&self, current: &[TokenId], original: &[TokenId]) -> Result<f64> {
        match self {
            NaturalnessOracle::Local(l) => l.fluency(current, original),
            NaturalnessOracle::External(x) => {
                x.judged("fluency", current, original, || x.fallback.fluency(current, original))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    use super::*;
    use crate::ranker::RankerConfig;

    fn fixture() -> (NeuralRanker, BigramLm) {
        let mut r = NeuralRanker::zeros(4, RankerConfig { dim: 2, hidden: 2 });
        r.embeddings = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, -1.0, 0.0];
        let seq = [1u32, 2, 1, 2, 1, 3];
        let lm = BigramLm::train([&seq[..]], 4, 0.1).unwrap();
        (r, lm)
    }

    #[test]
    fn similarity_maps_cosine_to_unit_interval() {
        let (r, lm) = fixture();
        let o = NaturalnessOracle::local(&r, &lm);
        assert_eq!(o.similarity(&[1, 2], &[1, 2]).unwrap(), 1.0);
        assert!((o.similarity(&[1], &[2]).unwrap() - 0.5).abs() < 1e-12);
        assert!(o.similarity(&[1], &[3]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fluency_examples() {
        let (r, lm) = fixture();
        let o = LocalOracle { embeddings: &r, lm: &lm };
        assert_eq!(o.fluency(&[1, 2, 1], &[1, 2, 1]).unwrap(), 1.0);
        // a more probable document is clamped to 1
        assert_eq!(o.fluency(&[1, 2, 1, 2], &[3, 3, 3, 3]).unwrap(), 1.0);
        let ratio = lm.perplexity(&[3, 3, 3]).unwrap() / lm.perplexity(&[1, 2, 1]).unwrap();
        let f = o.fluency(&[3, 3, 3], &[1, 2, 1]).unwrap();
        assert!((f - (-(ratio - 1.0)).exp()).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&f));
    }

    fn serve(responses: Vec<&'static str>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for body in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                let reply = format!(
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}/judge")
    }

    #[test]
    fn external_scores_are_rescaled() {
        let (r, lm) = fixture();
        let vocab = Vocabulary::from_words([["a", "b", "c"].into_iter()]);
        let endpoint = serve(vec![r#"{"score": 7.5}"#, r#"{"score": 12}"#]);
        let cfg = ExternalConfig { endpoint, ..Default::default() };
        let x = ExternalOracle::new(cfg, &vocab, LocalOracle { embeddings: &r, lm: &lm }).unwrap();
        let o = NaturalnessOracle::External(x);
        assert!((o.similarity(&[1, 2], &[1, 3]).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(o.fluency(&[1, 2], &[1, 3]).unwrap(), 1.0);
    }

    #[test]
    fn unreachable_endpoint_falls_back_to_local() {
        let (r, lm) = fixture();
        let vocab = Vocabulary::from_words([["a", "b", "c"].into_iter()]);
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let cfg = ExternalConfig {
            endpoint: format!("http://127.0.0.1:{port}/judge"),
            timeout_ms: 200,
            retries: 1,
            ..Default::default()
        };
        let local = LocalOracle { embeddings: &r, lm: &lm };
        let x = ExternalOracle::new(cfg, &vocab, local).unwrap();
        let want = local.similarity(&[1, 2], &[1, 3]).unwrap();
        let o = NaturalnessOracle::External(x);
        assert_eq!(o.similarity(&[1, 2], &[1, 3]).unwrap(), want);
        if let NaturalnessOracle::External(x) = &o {
            assert_eq!(x.fallback_count(), 1);
        }
    }
}
