//! Element identity, input segmentation/reassembly and content digests.
//!
//! Every reduction in this crate works on an [`ElementList`]: an ordered
//! sequence of atomic units (lines, words or characters) cut from the raw
//! input bytes. Reduction only ever deletes elements, never reorders them,
//! and `reassemble(segment(x, g)) == x` holds byte-for-byte at every
//! granularity.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fmt;

/// Stable identity of one element within a reduction run.
///
/// Ids are assigned 1-based at segmentation time and never reused after
/// deletion, so deletion candidates can be compared across list versions.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ElementId(pub u64);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// One atomic unit of the input: a stable id plus immutable payload bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub id: ElementId,
    pub payload: Vec<u8>,
}

/// How the raw input is cut into elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Line,
    Word,
    Char,
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "line" => Ok(Granularity::Line),
            "word" => Ok(Granularity::Word),
            "char" => Ok(Granularity::Char),
            other => Err(format!("unknown granularity {other:?} (expected line|word|char)")),
        }
    }
}

/// Ordered sequence of elements; the unit all reducers operate on.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ElementList {
    elements: Vec<Element>,
}

impl ElementList {
    pub fn new(elements: Vec<Element>) -> Self {
        ElementList { elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn ids(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.elements.iter().map(|e| e.id)
    }

    pub fn id_set(&self) -> BTreeSet<ElementId> {
        self.ids().collect()
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.elements.iter().any(|e| e.id == id)
    }

    /// New list with the given ids removed; survivor order is preserved.
    pub fn without(&self, deleted: &BTreeSet<ElementId>) -> ElementList {
        ElementList {
            elements: self
                .elements
                .iter()
                .filter(|e| !deleted.contains(&e.id))
                .cloned()
                .collect(),
        }
    }

    /// New list keeping only the given ids, in the stored order.
    pub fn retain_only(&self, kept: &BTreeSet<ElementId>) -> ElementList {
        ElementList {
            elements: self
                .elements
                .iter()
                .filter(|e| kept.contains(&e.id))
                .cloned()
                .collect(),
        }
    }

    /// True if `self`'s ids appear in `other` in the same relative order.
    pub fn is_subsequence_of(&self, other: &ElementList) -> bool {
        let mut it = other.elements.iter();
        self.elements
            .iter()
            .all(|e| it.by_ref().any(|o| o.id == e.id))
    }
}

/// Cut raw input bytes into an [`ElementList`].
///
/// Line mode keeps the trailing newline with its line. Word mode attaches
/// each maximal whitespace run to the preceding token; leading whitespace
/// attaches to the first token. Char mode splits on UTF-8 character
/// boundaries, falling back to single bytes for non-UTF-8 input.
pub fn segment(input: &[u8], granularity: Granularity) -> ElementList {
    let payloads: Vec<Vec<u8>> = match granularity {
        Granularity::Line => split_lines(input),
        Granularity::Word => split_words(input),
        Granularity::Char => split_chars(input),
    };
    let elements = payloads
        .into_iter()
        .enumerate()
        .map(|(i, payload)| Element {
            id: ElementId(i as u64 + 1),
            payload,
        })
        .collect();
    ElementList::new(elements)
}

fn split_lines(input: &[u8]) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &b) in input.iter().enumerate() {
        if b == b'\n' {
            out.push(input[start..=i].to_vec());
            start = i + 1;
        }
    }
    if start < input.len() {
        out.push(input[start..].to_vec());
    }
    out
}

fn split_words(input: &[u8]) -> Vec<Vec<u8>> {
    if input.is_empty() {
        return Vec::new();
    }
    let is_ws = |b: u8| b.is_ascii_whitespace();
    let mut out: Vec<Vec<u8>> = Vec::new();
    let mut i = 0;
    // Leading whitespace belongs to the first token.
    let mut current: Vec<u8> = Vec::new();
    while i < input.len() && is_ws(input[i]) {
        current.push(input[i]);
        i += 1;
    }
    if i == input.len() {
        // All-whitespace input becomes a single element.
        return vec![current];
    }
    while i < input.len() {
        while i < input.len() && !is_ws(input[i]) {
            current.push(input[i]);
            i += 1;
        }
        while i < input.len() && is_ws(input[i]) {
            current.push(input[i]);
            i += 1;
        }
        out.push(std::mem::take(&mut current));
    }
    out
}

fn split_chars(input: &[u8]) -> Vec<Vec<u8>> {
    match std::str::from_utf8(input) {
        Ok(s) => s.chars().map(|c| c.to_string().into_bytes()).collect(),
        Err(_) => input.iter().map(|&b| vec![b]).collect(),
    }
}

/// Concatenate payloads in stored order.
pub fn reassemble(list: &ElementList) -> Vec<u8> {
    let mut out = Vec::new();
    for e in list.elements() {
        out.extend_from_slice(&e.payload);
    }
    out
}

/// SHA-256 of the reassembled bytes, hex-encoded. Equal content, equal digest.
pub fn content_digest(list: &ElementList) -> String {
    let mut hasher = Sha256::new();
    hasher.update(reassemble(list));
    hex::encode(hasher.finalize())
}

/// Final record of one reduction: the surviving list plus counters.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionOutcome {
    pub final_list: ElementList,
    pub oracle_invocations: u64,
    pub cache_hits: u64,
    pub wall_time_secs: f64,
    pub rounds: u64,
}

impl ReductionOutcome {
    pub fn final_size(&self) -> usize {
        self.final_list.len()
    }

    pub fn final_bytes(&self) -> usize {
        reassemble(&self.final_list).len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_mode_keeps_trailing_newline() {
        let l = segment(b"a\nb\n", Granularity::Line);
        let payloads: Vec<&[u8]> = l.elements().iter().map(|e| e.payload.as_slice()).collect();
        assert_eq!(payloads, vec![b"a\n".as_slice(), b"b\n".as_slice()]);
    }

    #[test]
    fn empty_input_yields_empty_list() {
        for g in [Granularity::Line, Granularity::Word, Granularity::Char] {
            assert!(segment(b"", g).is_empty());
        }
    }

    #[test]
    fn word_mode_attaches_trailing_whitespace() {
        let l = segment(b"x  y", Granularity::Word);
        let payloads: Vec<&[u8]> = l.elements().iter().map(|e| e.payload.as_slice()).collect();
        assert_eq!(payloads, vec![b"x  ".as_slice(), b"y".as_slice()]);
        assert_eq!(reassemble(&l), b"x  y");
    }

    #[test]
    fn word_mode_leading_whitespace_joins_first_token() {
        let l = segment(b"  a b", Granularity::Word);
        let payloads: Vec<&[u8]> = l.elements().iter().map(|e| e.payload.as_slice()).collect();
        assert_eq!(payloads, vec![b"  a ".as_slice(), b"b".as_slice()]);
    }

    #[test]
    fn round_trip_all_granularities() {
        for x in [&b"a b\nc"[..], b"crash(c)", b"\n\n", b"  ", b"\xff\xfe ok"] {
            for g in [Granularity::Line, Granularity::Word, Granularity::Char] {
                assert_eq!(reassemble(&segment(x, g)), x, "granularity {g:?}");
            }
        }
    }

    #[test]
    fn reassemble_single_payload() {
        let l = ElementList::new(vec![Element {
            id: ElementId(8),
            payload: b"crash(c)".to_vec(),
        }]);
        assert_eq!(reassemble(&l), b"crash(c)");
        assert_eq!(reassemble(&ElementList::default()), b"");
    }

    #[test]
    fn digest_is_content_based() {
        let empty = ElementList::default();
        assert_eq!(content_digest(&empty), content_digest(&segment(b"", Granularity::Line)));
        let a = segment(b"a", Granularity::Line);
        let b = segment(b"b", Granularity::Line);
        assert_ne!(content_digest(&a), content_digest(&b));
        assert_eq!(content_digest(&a), content_digest(&a));
    }

    #[test]
    fn deletion_preserves_survivor_order() {
        let l = segment(b"a\nb\nc\nd\n", Granularity::Line);
        let deleted: BTreeSet<ElementId> = [ElementId(2)].into_iter().collect();
        let survivors = l.without(&deleted);
        let ids: Vec<u64> = survivors.ids().map(|i| i.0).collect();
        assert_eq!(ids, vec![1, 3, 4]);
        assert!(survivors.is_subsequence_of(&l));
    }
}
