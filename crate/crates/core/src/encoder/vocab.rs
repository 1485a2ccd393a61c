//! Frequency-capped vocabulary with reserved control tokens.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const CLS_TOKEN: &str = "<cls>";
pub const SEP_TOKEN: &str = "<sep>";

/// Token -> id map. Ids 0..n_reserved are control tokens; unknown tokens map
/// to `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabSerde", into = "VocabSerde")]
pub struct Vocabulary {
    items: Vec<String>,
    n_reserved: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabSerde {
    items: Vec<String>,
    n_reserved: usize,
}

impl From<VocabSerde> for Vocabulary {
    fn from(v: VocabSerde) -> Vocabulary {
        Vocabulary::from_items(v.items, v.n_reserved)
    }
}

impl From<Vocabulary> for VocabSerde {
    fn from(v: Vocabulary) -> VocabSerde {
        VocabSerde {
            items: v.items,
            n_reserved: v.n_reserved,
        }
    }
}

impl Vocabulary {
    fn from_items(items: Vec<String>, n_reserved: usize) -> Vocabulary {
        let index = items
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            items,
            n_reserved,
            index,
        }
    }

    /// Build from a token stream: `<pad>`, `<unk>`, then the most frequent
    /// content tokens up to `cap` (ties broken lexicographically).
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, cap: usize) -> Vocabulary {
        Self::build_reserved(tokens, cap, &[PAD_TOKEN, UNK_TOKEN])
    }

    /// Like [`build`](Vocabulary::build) but also reserving the pair-input
    /// markers `<cls>` and `<sep>`.
    pub fn build_with_markers<'a>(
        tokens: impl IntoIterator<Item = &'a str>,
        cap: usize,
    ) -> Vocabulary {
        Self::build_reserved(tokens, cap, &[PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN])
    }

    fn build_reserved<'a>(
        tokens: impl IntoIterator<Item = &'a str>,
        cap: usize,
        reserved: &[&str],
    ) -> Vocabulary {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        for r in reserved {
            counts.remove(r);
        }
        let mut entries: Vec<(&str, usize)> = counts.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        entries.truncate(cap);

        let mut items: Vec<String> = reserved.iter().map(|r| r.to_string()).collect();
        items.extend(entries.into_iter().map(|(t, _)| t.to_string()));
        Self::from_items(items, reserved.len())
    }

    /// Id for a token; unknown tokens get the `<unk>` id.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn n_reserved(&self) -> usize {
        self.n_reserved
    }

    pub const PAD_ID: usize = 0;
    pub const UNK_ID: usize = 1;

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}
