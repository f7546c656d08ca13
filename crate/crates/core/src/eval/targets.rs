use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranker::RankedList;

pub const LIST_DEPTH: usize = 100;
pub const EASY_RANKS: (usize, usize) = (30, 60);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Hard,
    Mixture,
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Difficulty::Easy),
            "hard" => Ok(Difficulty::Hard),
            "mixture" | "mixed" => Ok(Difficulty::Mixture),
            _ => Err(Error::BadValue {
                key: "difficulty".into(),
                value: s.into(),
            }),
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Hard => "hard",
            Difficulty::Mixture => "mixture",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackTarget {
    pub query_id: String,
    pub doc_id: String,
    /// 1-based rank in the target's list at selection time.
    pub rank: usize,
}

/// Easy: uniform from ranks 30..=60. Hard: the bottom `n` of the top 100.
/// Mixture: uniform from the union of both pools.
pub fn select_targets<R: Rng + ?Sized>(
    lists: &[RankedList],
    difficulty: Difficulty,
    n_per_query: usize,
    rng: &mut R,
) -> Result<Vec<AttackTarget>> {
    let mut out = Vec::new();
    for list in lists {
        if list.len() < LIST_DEPTH {
            return Err(Error::InvalidParameter(format!(
                "list for `{}` has depth {} < {LIST_DEPTH}",
                list.query_id,
                list.len()
            )));
        }
        let n_hard = n_per_query.min(LIST_DEPTH);
        let easy: Vec<usize> = (EASY_RANKS.0..=EASY_RANKS.1).collect();
        let hard: Vec<usize> = (LIST_DEPTH - n_hard + 1..=LIST_DEPTH).collect();
        let mut ranks: Vec<usize> = match difficulty {
            Difficulty::Easy => easy.choose_multiple(rng, n_per_query).copied().collect(),
            Difficulty::Hard => hard,
            Difficulty::Mixture => {
                let mut pool = easy;
                pool.extend(hard.into_iter().filter(|r| *r > EASY_RANKS.1));
                pool.choose_multiple(rng, n_per_query).copied().collect()
            }
        };
        ranks.sort_unstable();
        out.extend(ranks.into_iter().map(|rank| AttackTarget {
            query_id: list.query_id.clone(),
            doc_id: list.at(rank).expect("rank within depth").to_string(),
            rank,
        }));
    }
    Ok(out)
}
