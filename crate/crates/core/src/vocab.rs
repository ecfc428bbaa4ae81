//! Token vocabulary: token id to byte expansion, plus the end-of-sequence
//! token.
//!
//! File format (UTF-8 JSON):
//!
//! ```text
//! {"tokens": [<base64 of the token bytes>, ...], "eos": <index>, "byte_fallback": <bool>}
//! ```
//!
//! Ids are assigned from file order. `byte_fallback` may be omitted, in which
//! case it is derived from the table.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub type TokenId = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VocabError {
    #[error("malformed vocabulary: {0}")]
    MalformedVocab(String),
    #[error("token {0} has an empty expansion")]
    EmptyExpansion(TokenId),
    #[error("vocabulary does not declare an end-of-sequence token")]
    MissingEos,
    #[error("no token matches the input at byte {offset}")]
    Untokenizable { offset: usize },
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    eos: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    byte_fallback: Option<bool>,
}

/// Byte trie over every non-eos expansion.
#[derive(Debug, Clone, Default)]
pub(crate) struct ExpansionTrie {
    pub(crate) nodes: Vec<TrieNode>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct TrieNode {
    /// Sorted by byte.
    pub(crate) children: Vec<(u8, u32)>,
    /// Tokens whose expansion ends exactly at this node, ascending.
    pub(crate) tokens: Vec<TokenId>,
}

impl ExpansionTrie {
    fn build(expansions: &[Vec<u8>], eos: TokenId) -> Self {
        let mut trie = ExpansionTrie { nodes: vec![TrieNode::default()] };
        for (id, bytes) in expansions.iter().enumerate() {
            if id as TokenId == eos {
                continue;
            }
            let mut node = 0usize;
            for &b in bytes {
                node = match trie.nodes[node].children.binary_search_by_key(&b, |&(c, _)| c) {
                    Ok(i) => trie.nodes[node].children[i].1 as usize,
                    Err(i) => {
                        let child = trie.nodes.len();
                        trie.nodes.push(TrieNode::default());
                        trie.nodes[node].children.insert(i, (b, child as u32));
                        child
                    }
                };
            }
            trie.nodes[node].tokens.push(id as TokenId);
        }
        trie
    }

    pub(crate) fn child(&self, node: u32, b: u8) -> Option<u32> {
        let children = &self.nodes[node as usize].children;
        children.binary_search_by_key(&b, |&(c, _)| c).ok().map(|i| children[i].1)
    }
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    expansions: Vec<Vec<u8>>,
    eos: TokenId,
    byte_fallback: bool,
    trie: ExpansionTrie,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.expansions == other.expansions && self.eos == other.eos && self.byte_fallback == other.byte_fallback
    }
}

impl Eq for Vocabulary {}

impl Vocabulary {
    /// Builds a vocabulary; `byte_fallback` is derived from the table.
    pub fn new(expansions: Vec<Vec<u8>>, eos: TokenId) -> Result<Self, VocabError> {
        Self::with_fallback(expansions, eos, None)
    }

    fn with_fallback(expansions: Vec<Vec<u8>>, eos: TokenId, declared: Option<bool>) -> Result<Self, VocabError> {
        if let Some(id) = expansions.iter().position(Vec::is_empty) {
            return Err(VocabError::EmptyExpansion(id as TokenId));
        }
        if expansions.len() > u32::MAX as usize {
            return Err(VocabError::MalformedVocab("too many tokens".into()));
        }
        if eos as usize >= expansions.len() {
            return Err(VocabError::MalformedVocab(format!("eos index {eos} out of range")));
        }
        let trie = ExpansionTrie::build(&expansions, eos);
        let root = &trie.nodes[0];
        let complete = root.children.len() == 256
            && root.children.iter().all(|&(_, n)| !trie.nodes[n as usize].tokens.is_empty());
        let byte_fallback = match declared {
            Some(true) if !complete => {
                return Err(VocabError::MalformedVocab(
                    "byte_fallback declared but some single byte has no token".into(),
                ))
            }
            Some(flag) => flag,
            None => complete,
        };
        Ok(Vocabulary { expansions, eos, byte_fallback, trie })
    }

    pub fn len(&self) -> usize {
        self.expansions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expansions.is_empty()
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn byte_fallback(&self) -> bool {
        self.byte_fallback
    }

    pub fn expansion(&self, id: TokenId) -> &[u8] {
        &self.expansions[id as usize]
    }

    pub fn expansions(&self) -> &[Vec<u8>] {
        &self.expansions
    }

    pub(crate) fn trie(&self) -> &ExpansionTrie {
        &self.trie
    }

    /// Lowest id whose expansion is exactly `bytes`.
    pub fn id_of(&self, bytes: &[u8]) -> Option<TokenId> {
        let mut node = 0;
        for &b in bytes {
            node = self.trie.child(node, b)?;
        }
        self.trie.nodes[node as usize].tokens.first().copied()
    }

    /// Concatenated expansions; the eos token contributes nothing.
    pub fn detokenize(&self, ids: &[TokenId]) -> Vec<u8> {
        let mut out = Vec::new();
        for &id in ids {
            if id != self.eos {
                out.extend_from_slice(self.expansion(id));
            }
        }
        out
    }

    /// Greedy longest-match segmentation. Intended for building fixtures and
    /// counting tokens; decoding never tokenizes.
    pub fn tokenize_greedy(&self, text: &[u8]) -> Result<Vec<TokenId>, VocabError> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let mut node = 0;
            let mut best = None;
            for (i, &b) in text[pos..].iter().enumerate() {
                match self.trie.child(node, b) {
                    Some(n) => node = n,
                    None => break,
                }
                if let Some(&id) = self.trie.nodes[node as usize].tokens.first() {
                    best = Some((id, i + 1));
                }
            }
            let (id, len) = best.ok_or(VocabError::Untokenizable { offset: pos })?;
            out.push(id);
            pos += len;
        }
        Ok(out)
    }

    /// SHA-256 over the id table, eos index and fallback flag.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.expansions.len() as u64).to_le_bytes());
        for e in &self.expansions {
            h.update((e.len() as u64).to_le_bytes());
            h.update(e);
        }
        h.update(self.eos.to_le_bytes());
        h.update([self.byte_fallback as u8]);
        h.finalize().into()
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            tokens: self.expansions.iter().map(|e| STANDARD.encode(e)).collect(),
            eos: Some(self.eos as usize),
            byte_fallback: Some(self.byte_fallback),
        };
        serde_json::to_string(&file).expect("serializing vocabulary")
    }
}

/// Parses a vocabulary file.
pub fn load_vocab(document: &[u8]) -> Result<Vocabulary, VocabError> {
    let file: VocabFile =
        serde_json::from_slice(document).map_err(|e| VocabError::MalformedVocab(e.to_string()))?;
    let eos = file.eos.ok_or(VocabError::MissingEos)?;
    let expansions = file
        .tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            STANDARD
                .decode(t)
                .map_err(|e| VocabError::MalformedVocab(format!("token {i}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let eos = TokenId::try_from(eos).map_err(|_| VocabError::MalformedVocab("eos index out of range".into()))?;
    Vocabulary::with_fallback(expansions, eos, file.byte_fallback)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn file(tokens: &[&[u8]], eos: Option<usize>, fallback: Option<bool>) -> Vec<u8> {
        serde_json::to_vec(&VocabFile {
            tokens: tokens.iter().map(|t| STANDARD.encode(t)).collect(),
            eos,
            byte_fallback: fallback,
        })
        .unwrap()
    }

    fn vocab(tokens: &[&str]) -> Vocabulary {
        let mut exp: Vec<Vec<u8>> = tokens.iter().map(|t| t.as_bytes().to_vec()).collect();
        exp.push(b"<EOS>".to_vec());
        let eos = (exp.len() - 1) as TokenId;
        Vocabulary::new(exp, eos).unwrap()
    }

    fn byte_complete() -> Vocabulary {
        let mut exp: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        for extra in ["fr", "from", "om", "\": ", "{\""] {
            exp.push(extra.as_bytes().to_vec());
        }
        exp.push(b"<EOS>".to_vec());
        let eos = (exp.len() - 1) as TokenId;
        Vocabulary::new(exp, eos).unwrap()
    }

    #[test]
    fn loads_small_vocab() {
        let doc = file(&[b"{", b"\"", b"from", b":", b"2", b",", b"}", b"<EOS>"], Some(7), Some(false));
        let v = load_vocab(&doc).unwrap();
        assert_eq!(v.len(), 8);
        assert_eq!(v.eos(), 7);
        assert!(!v.byte_fallback());
    }

    #[test]
    fn byte_complete_file_sets_fallback() {
        let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        tokens.push(b"<EOS>".to_vec());
        let refs: Vec<&[u8]> = tokens.iter().map(Vec::as_slice).collect();
        let v = load_vocab(&file(&refs, Some(256), Some(true))).unwrap();
        assert!(v.byte_fallback());
        let v = load_vocab(&file(&refs, Some(256), None)).unwrap();
        assert!(v.byte_fallback());
    }

    #[test]
    fn load_errors() {
        assert_eq!(load_vocab(&file(&[b"a"], None, None)), Err(VocabError::MissingEos));
        assert_eq!(load_vocab(&file(&[b"a", b""], Some(0), None)), Err(VocabError::EmptyExpansion(1)));
        assert!(matches!(load_vocab(&file(&[b"a"], Some(3), None)), Err(VocabError::MalformedVocab(_))));
        assert!(matches!(load_vocab(&file(&[b"a", b"E"], Some(1), Some(true))), Err(VocabError::MalformedVocab(_))));
        assert!(matches!(load_vocab(b"{\"tokens\": [\"!!\"], \"eos\": 0}"), Err(VocabError::MalformedVocab(_))));
    }

    #[test]
    fn greedy_examples() {
        let v = vocab(&["{", "\""]);
        assert_eq!(v.tokenize_greedy(b"{\"").unwrap(), vec![0, 1]);

        let v = vocab(&["fr", "from", "om"]);
        assert_eq!(v.tokenize_greedy(b"from").unwrap(), vec![1]);
        assert_eq!(v.tokenize_greedy(b"frx"), Err(VocabError::Untokenizable { offset: 2 }));
    }

    #[test]
    fn eos_is_not_matched_by_text() {
        let v = vocab(&["<", "E", "O", "S", ">"]);
        let ids = v.tokenize_greedy(b"<EOS>").unwrap();
        assert_eq!(ids.len(), 5);
        assert!(!ids.contains(&v.eos()));
        assert_eq!(v.detokenize(&[0, v.eos()]), b"<");
    }

    #[test]
    fn json_round_trip_and_fingerprint() {
        let v = byte_complete();
        let again = load_vocab(v.to_json().as_bytes()).unwrap();
        assert_eq!(v, again);
        assert_eq!(v.fingerprint(), again.fingerprint());
        assert_ne!(v.fingerprint(), vocab(&["a"]).fingerprint());
    }

    proptest! {
        #[test]
        fn greedy_round_trip(text in proptest::collection::vec(any::<u8>(), 0..64)) {
            let v = byte_complete();
            let ids = v.tokenize_greedy(&text).unwrap();
            prop_assert_eq!(v.detokenize(&ids), text);
        }
    }
}
