//! Binary file format for compiled session automata.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! magic "TOOLDEC\0" | version u32 | vocab fingerprint [32] | states u32 | vocab size u32
//! vocab json | inventory json | scaffold json        (each: len u32 + bytes)
//! start u32 | final u32
//! per state: origin u32 (u32::MAX = none)
//!            label count u32, labels (tag u8 + two u32)
//!            transition count u32, (token u32, target u32)*
//! per state: mask words u64 * ceil(vocab size / 64)
//! sha-256 of everything above [32]
//! ```
//!
//! Encoding is canonical, so writing a loaded artifact reproduces the input
//! bytes exactly.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fsm::{StateId, StateLabel, TokenFsm};
use crate::linker::{build_name_trie, ScaffoldSpec, SessionFsm};
use crate::mask::TokenMask;
use crate::schema::{parse_inventory, to_simple_json, DocFormat};
use crate::vocab::{load_vocab, Vocabulary};

pub const MAGIC: &[u8; 8] = b"TOOLDEC\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArtifactError {
    #[error("not a compiled artifact (bad magic)")]
    BadMagic,
    #[error("artifact format version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupted artifact: {0}")]
    Corrupted(String),
    #[error("artifact was compiled against a different vocabulary")]
    VocabMismatch,
}

/// A compiled session together with the vocabulary it was built for.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub vocab: Vocabulary,
    pub session: SessionFsm,
}

impl Artifact {
    pub fn new(vocab: Vocabulary, session: SessionFsm) -> Self {
        Artifact { vocab, session }
    }

    pub fn fsm(&self) -> &TokenFsm {
        self.session.fsm()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let fsm = self.session.fsm();
        let mut w = Vec::new();
        w.extend_from_slice(MAGIC);
        put_u32(&mut w, FORMAT_VERSION);
        w.extend_from_slice(&self.vocab.fingerprint());
        put_u32(&mut w, fsm.state_count() as u32);
        put_u32(&mut w, fsm.vocab_size() as u32);
        for section in [
            self.vocab.to_json(),
            to_simple_json(self.session.inventory()),
            self.session.scaffold().to_json(),
        ] {
            put_u32(&mut w, section.len() as u32);
            w.extend_from_slice(section.as_bytes());
        }
        put_u32(&mut w, fsm.start());
        put_u32(&mut w, fsm.final_state());
        for s in 0..fsm.state_count() as StateId {
            put_u32(&mut w, fsm.origin(s).unwrap_or(u32::MAX));
            let labels = fsm.labels(s);
            put_u32(&mut w, labels.len() as u32);
            for l in labels {
                let (tag, a, b) = match *l {
                    StateLabel::FreeText { phase, progress } => (0u8, phase as u32, progress as u32),
                    StateLabel::ToolSelect => (1, 0, 0),
                    StateLabel::ToolEntry(k) => (2, k, 0),
                };
                w.push(tag);
                put_u32(&mut w, a);
                put_u32(&mut w, b);
            }
            let row = fsm.transitions(s);
            put_u32(&mut w, row.len() as u32);
            for &(tok, t) in row {
                put_u32(&mut w, tok);
                put_u32(&mut w, t);
            }
        }
        for s in 0..fsm.state_count() as StateId {
            for &word in fsm.mask(s).words() {
                w.extend_from_slice(&word.to_le_bytes());
            }
        }
        let digest: [u8; 32] = Sha256::digest(&w).into();
        w.extend_from_slice(&digest);
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArtifactError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(ArtifactError::BadMagic);
        }
        let mut r = Reader { buf: bytes, pos: MAGIC.len() };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(ArtifactError::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        if bytes.len() < 32 + r.pos {
            return Err(corrupt("truncated"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: r.pos };
        let fingerprint: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let n_states = r.u32()? as usize;
        let n_vocab = r.u32()? as usize;

        let vocab = load_vocab(r.section()?).map_err(|e| corrupt(&format!("vocabulary: {e}")))?;
        if vocab.fingerprint() != fingerprint || vocab.len() != n_vocab {
            return Err(corrupt("embedded vocabulary does not match header"));
        }
        let inventory = parse_inventory(r.section()?, DocFormat::SimpleJson)
            .map_err(|e| corrupt(&format!("inventory: {e}")))?;
        let scaffold = ScaffoldSpec::from_json(r.section()?).map_err(|e| corrupt(&format!("scaffold: {e}")))?;

        let start = r.u32()?;
        let final_state = r.u32()?;
        if n_states == 0 || start as usize >= n_states || final_state as usize >= n_states {
            return Err(corrupt("start or final state out of range"));
        }
        // Every state takes at least 12 bytes; reject absurd counts early.
        if n_states > body.len() / 12 {
            return Err(corrupt("state count exceeds file size"));
        }
        let mut origin = Vec::with_capacity(n_states);
        let mut labels = Vec::with_capacity(n_states);
        let mut trans = Vec::with_capacity(n_states);
        for _ in 0..n_states {
            let o = r.u32()?;
            origin.push((o != u32::MAX).then_some(o));
            let n_labels = r.u32()? as usize;
            let mut ls = Vec::with_capacity(n_labels.min(16));
            for _ in 0..n_labels {
                let tag = r.take(1)?[0];
                let (a, b) = (r.u32()?, r.u32()?);
                ls.push(match tag {
                    0 if a <= u16::MAX as u32 && b <= u16::MAX as u32 => {
                        StateLabel::FreeText { phase: a as u16, progress: b as u16 }
                    }
                    1 => StateLabel::ToolSelect,
                    2 => StateLabel::ToolEntry(a),
                    _ => return Err(corrupt("unknown state label")),
                });
            }
            labels.push(ls);
            let n_trans = r.u32()? as usize;
            if n_trans > n_vocab {
                return Err(corrupt("more transitions than tokens"));
            }
            let mut row = Vec::with_capacity(n_trans);
            for _ in 0..n_trans {
                let (tok, t) = (r.u32()?, r.u32()?);
                if tok as usize >= n_vocab || t as usize >= n_states {
                    return Err(corrupt("transition out of range"));
                }
                row.push((tok, t));
            }
            if row.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(corrupt("transitions not sorted"));
            }
            trans.push(row);
        }
        let words = n_vocab.div_ceil(64);
        let mut masks = Vec::with_capacity(n_states);
        for row in &trans {
            let ws = (0..words).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
            let m = TokenMask::from_words(ws, n_vocab).ok_or_else(|| corrupt("mask has bits past the vocabulary"))?;
            if m.count() != row.len() || row.iter().any(|&(tok, _)| !m.contains(tok as usize)) {
                return Err(corrupt("mask disagrees with transitions"));
            }
            masks.push(m);
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        let fsm = TokenFsm::assemble(n_vocab, vocab.eos(), start, final_state, trans, masks, origin, labels)
            .map_err(|(s, _)| corrupt(&format!("state {s} cannot reach the final state")))?;
        let trie = build_name_trie(&inventory, &vocab, scaffold.name_terminator())
            .map_err(|e| corrupt(&format!("tool names: {e}")))?;
        let session = SessionFsm::from_parts(fsm, inventory, scaffold, trie).map_err(|e| corrupt(&e.to_string()))?;
        Ok(Artifact { vocab, session })
    }

    /// Loads and checks that the artifact was built for `vocab`.
    pub fn from_bytes_for(bytes: &[u8], vocab: &Vocabulary) -> Result<Self, ArtifactError> {
        let a = Self::from_bytes(bytes)?;
        if a.vocab.fingerprint() != vocab.fingerprint() {
            return Err(ArtifactError::VocabMismatch);
        }
        Ok(a)
    }
}

fn corrupt(msg: &str) -> ArtifactError {
    ArtifactError::Corrupted(msg.to_string())
}

fn put_u32(w: &mut Vec<u8>, x: u32) {
    w.extend_from_slice(&x.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArtifactError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| corrupt("truncated"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ArtifactError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ArtifactError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn section(&mut self) -> Result<&'a [u8], ArtifactError> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linker::build_session_fsm;
    use crate::schema::fixtures::flight_search;
    use crate::schema::ToolInventory;
    use crate::TokenId;

    fn artifact() -> Artifact {
        let mut exp: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        exp.push(b"<EOS>".to_vec());
        let v = Vocabulary::new(exp, 256 as TokenId).unwrap();
        let inv = ToolInventory { tools: vec![flight_search()] };
        let s = build_session_fsm(&inv, &v, &ScaffoldSpec::react()).unwrap();
        Artifact::new(v, s)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let a = artifact();
        let bytes = a.to_bytes();
        let b = Artifact::from_bytes(&bytes).unwrap();
        assert_eq!(b.to_bytes(), bytes);
        assert_eq!(b.session.inventory(), a.session.inventory());
        assert_eq!(b.fsm().state_count(), a.fsm().state_count());
        assert_eq!(b.session.select_state(), a.session.select_state());
    }

    #[test]
    fn load_errors() {
        let bytes = artifact().to_bytes();
        assert_eq!(Artifact::from_bytes(b"nope").unwrap_err(), ArtifactError::BadMagic);
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(matches!(Artifact::from_bytes(&v2), Err(ArtifactError::VersionMismatch { found: 2, .. })));
        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 1;
        assert!(matches!(Artifact::from_bytes(&flipped), Err(ArtifactError::Corrupted(_))));
        assert!(matches!(Artifact::from_bytes(&bytes[..bytes.len() - 1]), Err(ArtifactError::Corrupted(_))));
        let other = Vocabulary::new(vec![b"a".to_vec(), b"<EOS>".to_vec()], 1).unwrap();
        assert_eq!(Artifact::from_bytes_for(&bytes, &other).unwrap_err(), ArtifactError::VocabMismatch);
    }
}
