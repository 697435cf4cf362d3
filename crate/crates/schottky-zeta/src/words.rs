//! Free-group word machinery: cyclic reduction, primitivity, canonical
//! class representatives, and exhaustive enumeration of primitive conjugacy
//! classes by word length.
//!
//! Letters are nonzero signed generator indices in {±1..±g}. The canonical
//! representative of a conjugacy class is the least of its cyclic rotations
//! under the letter order 1 < -1 < 2 < -2 < ...; a class and its inverse
//! class are distinct and both enumerated.

use rug::Complex;

use crate::error::{Error, Result};
use crate::moebius::{MarkedSchottkyGroup, MoebiusMap};

pub type Letter = i32;

/// Rank of a letter in the canonical order 1 < -1 < 2 < -2 < ...
#[inline]
pub fn letter_rank(l: Letter) -> u32 {
    debug_assert!(l != 0);
    let base = (l.unsigned_abs() - 1) * 2;
    if l < 0 {
        base + 1
    } else {
        base
    }
}

/// A word in the free group of the given rank. Not necessarily reduced.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    letters: Vec<Letter>,
    rank: usize,
}

impl Word {
    pub fn new(letters: Vec<Letter>, rank: usize) -> Result<Self> {
        for &l in &letters {
            if l == 0 || l.unsigned_abs() as usize > rank {
                return Err(Error::RankMismatch { rank, letter: l });
            }
        }
        Ok(Self { letters, rank })
    }

    pub fn empty(rank: usize) -> Self {
        Self { letters: Vec::new(), rank }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self {
            letters: self.letters.iter().rev().map(|l| -l).collect(),
            rank: self.rank,
        }
    }

    pub fn rotated(&self, shift: usize) -> Self {
        if self.letters.is_empty() {
            return self.clone();
        }
        let n = self.letters.len();
        let s = shift % n;
        let mut letters = Vec::with_capacity(n);
        letters.extend_from_slice(&self.letters[s..]);
        letters.extend_from_slice(&self.letters[..s]);
        Self { letters, rank: self.rank }
    }

    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|w| w[0] != -w[1])
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.is_reduced()
            && (self.letters.len() < 2 || self.letters[0] != -*self.letters.last().unwrap())
    }

    /// Lexicographic comparison in the canonical letter order, shorter words
    /// first on ties of a common prefix.
    pub fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        let n = self.letters.len().min(other.letters.len());
        for i in 0..n {
            let a = letter_rank(self.letters[i]);
            let b = letter_rank(other.letters[i]);
            if a != b {
                return a.cmp(&b);
            }
        }
        self.letters.len().cmp(&other.letters.len())
    }
}

/// Freely reduce, then trim conjugating ends until the first letter is not
/// the inverse of the last. Errors with `EmptyWord` when a nonempty input
/// represents the identity.
pub fn cyclic_reduce(w: &Word) -> Result<Word> {
    let mut stack: Vec<Letter> = Vec::with_capacity(w.len());
    for &l in w.letters() {
        if stack.last().is_some_and(|&t| t == -l) {
            stack.pop();
        } else {
            stack.push(l);
        }
    }
    if stack.is_empty() {
        if w.is_empty() {
            return Ok(Word::empty(w.rank()));
        }
        return Err(Error::EmptyWord);
    }
    let mut lo = 0;
    let mut hi = stack.len();
    while hi - lo >= 2 && stack[lo] == -stack[hi - 1] {
        lo += 1;
        hi -= 1;
    }
    if lo == hi {
        return Err(Error::EmptyWord);
    }
    Ok(Word {
        letters: stack[lo..hi].to_vec(),
        rank: w.rank(),
    })
}

/// True iff the cyclically reduced word is not a proper power, by the
/// rotation-period test.
pub fn is_primitive(w: &Word) -> bool {
    let n = w.len();
    if n == 0 {
        return false;
    }
    let ls = w.letters();
    'period: for d in 1..n {
        if n % d != 0 {
            continue;
        }
        for i in 0..n {
            if ls[i] != ls[(i + d) % n] {
                continue 'period;
            }
        }
        return false;
    }
    true
}

/// The least cyclic rotation of a cyclically reduced word.
pub fn canonical_rotation(w: &Word) -> Word {
    let mut best = w.clone();
    for s in 1..w.len() {
        let r = w.rotated(s);
        if r.canonical_cmp(&best) == std::cmp::Ordering::Less {
            best = r;
        }
    }
    best
}

/// Canonical representative of a primitive conjugacy class, with the cached
/// multiplier of its image in a marked group.
#[derive(Debug, Clone)]
pub struct ConjClassRep {
    pub word: Word,
    pub multiplier: Option<Complex>,
}

impl ConjClassRep {
    pub fn new(word: Word) -> Self {
        Self { word, multiplier: None }
    }
}

/// True iff `w` (cyclically reduced) is strictly least among its nontrivial
/// rotations; equality at a nonzero shift means a proper power.
pub(crate) fn is_canonical_primitive(ls: &[Letter]) -> bool {
    let n = ls.len();
    for s in 1..n {
        // compare rotation by s against the word itself
        for i in 0..n {
            let a = letter_rank(ls[(i + s) % n]);
            let b = letter_rank(ls[i]);
            match a.cmp(&b) {
                std::cmp::Ordering::Less => return false,
                std::cmp::Ordering::Greater => break,
                std::cmp::Ordering::Equal => {
                    if i == n - 1 {
                        // periodic: proper power
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Every primitive conjugacy class with a representative of length <= max_len,
/// exactly once, in (length, lexicographic) order. A class and its inverse
/// both appear.
pub fn enumerate_classes(rank: usize, max_len: usize) -> Vec<ConjClassRep> {
    let mut out = Vec::new();
    if rank == 0 {
        return out;
    }
    let letters_by_rank: Vec<Letter> = (0..rank as i32)
        .flat_map(|i| [i + 1, -(i + 1)])
        .collect();
    let mut buf: Vec<Letter> = Vec::with_capacity(max_len);
    for len in 1..=max_len {
        for &first in &letters_by_rank {
            buf.clear();
            buf.push(first);
            extend(&mut buf, len, &letters_by_rank, &mut out, rank);
        }
    }
    out
}

fn extend(
    buf: &mut Vec<Letter>,
    target: usize,
    letters_by_rank: &[Letter],
    out: &mut Vec<ConjClassRep>,
    rank: usize,
) {
    if buf.len() == target {
        let first = buf[0];
        let last = *buf.last().unwrap();
        if (target < 2 || first != -last) && is_canonical_primitive(buf) {
            out.push(ConjClassRep::new(Word {
                letters: buf.clone(),
                rank,
            }));
        }
        return;
    }
    let first_rank = letter_rank(buf[0]);
    let prev = *buf.last().unwrap();
    for &l in letters_by_rank {
        // the canonical representative starts with a minimal letter
        if letter_rank(l) < first_rank {
            continue;
        }
        if l == -prev {
            continue;
        }
        buf.push(l);
        extend(buf, target, letters_by_rank, out, rank);
        buf.pop();
    }
}

/// Product of generator matrices over the letters; inverse letters use the
/// adjugate, so exact entries stay exact.
pub fn evaluate(w: &Word, group: &MarkedSchottkyGroup) -> Result<MoebiusMap> {
    if w.rank() > group.rank() {
        return Err(Error::RankMismatch {
            rank: group.rank(),
            letter: w.rank() as i32,
        });
    }
    let mut m = MoebiusMap::identity(group.precision());
    for &l in w.letters() {
        let idx = (l.unsigned_abs() - 1) as usize;
        if idx >= group.rank() {
            return Err(Error::RankMismatch { rank: group.rank(), letter: l });
        }
        let g = group.generator(idx);
        if l > 0 {
            m = m.compose(g);
        } else {
            m = m.compose(&g.inverse());
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prec::{cabs, csub};
    use rug::Float;
    use std::collections::BTreeSet;

    const P: u32 = 128;

    fn w(ls: &[Letter]) -> Word {
        Word::new(ls.to_vec(), 2).unwrap()
    }

    #[test]
    fn cyclic_reduce_examples() {
        // a b b^-1 a -> a a
        assert_eq!(cyclic_reduce(&w(&[1, 2, -2, 1])).unwrap().letters(), &[1, 1]);
        // a^-1 b a -> b
        assert_eq!(cyclic_reduce(&w(&[-1, 2, 1])).unwrap().letters(), &[2]);
        assert!(matches!(cyclic_reduce(&w(&[1, -1])), Err(Error::EmptyWord)));
        assert!(cyclic_reduce(&Word::empty(2)).unwrap().is_empty());
    }

    #[test]
    fn cyclic_reduce_is_conjugate_by_matrix_evaluation() {
        // trace invariant agrees after evaluation in a rational matrix group
        let g1 = MoebiusMap::from_int_entries(5, 1, 2, 1, P).unwrap();
        let g2 = MoebiusMap::from_int_entries(3, 1, 1, 2, P).unwrap();
        let group = MarkedSchottkyGroup::new(vec![g1, g2], None, P).unwrap();
        let samples = [
            w(&[1, 2, -2, 1]),
            w(&[-1, 2, 1]),
            w(&[2, -1, -1, 2, 2, 1, 1, -2]),
            w(&[1, 1, 2, -1, -1, 2]),
        ];
        for word in samples {
            let red = cyclic_reduce(&word).unwrap();
            assert!(red.is_cyclically_reduced());
            let t0 = evaluate(&word, &group).unwrap().trace_invariant();
            let t1 = evaluate(&red, &group).unwrap().trace_invariant();
            assert!(cabs(&csub(&t0, &t1)) < Float::with_val(P, 1e-28));
        }
    }

    #[test]
    fn primitivity_examples_and_brute_force() {
        assert!(is_primitive(&w(&[1, 2])));
        assert!(!is_primitive(&w(&[1, 2, 1, 2])));
        // all cyclically reduced words of length <= 6 against the definition
        let brute = |word: &Word| -> bool {
            let n = word.len();
            for d in 1..n {
                if n % d == 0 {
                    let base = Word::new(word.letters()[..d].to_vec(), 2).unwrap();
                    let mut power = Vec::new();
                    for _ in 0..n / d {
                        power.extend_from_slice(base.letters());
                    }
                    if power == word.letters() {
                        return false;
                    }
                }
            }
            true
        };
        for word in all_cyclically_reduced(2, 6) {
            assert_eq!(is_primitive(&word), brute(&word), "word {:?}", word.letters());
        }
    }

    fn all_cyclically_reduced(rank: usize, max_len: usize) -> Vec<Word> {
        let alphabet: Vec<Letter> = (1..=rank as i32).flat_map(|i| [i, -i]).collect();
        let mut words = vec![Vec::new()];
        let mut result = Vec::new();
        for _ in 0..max_len {
            let mut next = Vec::new();
            for base in &words {
                for &l in &alphabet {
                    if base.last().is_some_and(|&t| t == -l) {
                        continue;
                    }
                    let mut v = base.clone();
                    v.push(l);
                    next.push(v);
                }
            }
            for v in &next {
                if v.len() >= 2 && v[0] == -v[v.len() - 1] {
                    continue;
                }
                result.push(Word::new(v.clone(), rank).unwrap());
            }
            words = next;
        }
        result
    }

    #[test]
    fn enumeration_counts() {
        // rank 1: exactly the two classes (1), (-1) at any cutoff
        let r1 = enumerate_classes(1, 7);
        assert_eq!(r1.len(), 2);
        assert_eq!(r1[0].word.letters(), &[1]);
        assert_eq!(r1[1].word.letters(), &[-1]);

        let len1 = enumerate_classes(2, 1);
        assert_eq!(len1.len(), 4);
        let len2 = enumerate_classes(2, 2);
        assert_eq!(len2.len(), 8);
    }

    #[test]
    fn enumeration_matches_brute_force_and_is_sorted() {
        let max_len = 6;
        let stream = enumerate_classes(2, max_len);
        // no duplicates, sorted by (length, lex)
        for pair in stream.windows(2) {
            let (a, b) = (&pair[0].word, &pair[1].word);
            let ord = a
                .len()
                .cmp(&b.len())
                .then_with(|| a.canonical_cmp(b));
            assert_eq!(ord, std::cmp::Ordering::Less);
        }
        // independent brute force: canonicalize every cyclically reduced
        // primitive word by scanning its rotation orbit
        let mut brute: BTreeSet<Vec<Letter>> = BTreeSet::new();
        for word in all_cyclically_reduced(2, max_len) {
            if !is_primitive(&word) {
                continue;
            }
            let mut best = word.clone();
            for s in 1..word.len() {
                let r = word.rotated(s);
                if r.canonical_cmp(&best) == std::cmp::Ordering::Less {
                    best = r;
                }
            }
            brute.insert(best.letters().to_vec());
        }
        let stream_set: BTreeSet<Vec<Letter>> =
            stream.iter().map(|c| c.word.letters().to_vec()).collect();
        assert_eq!(stream_set.len(), stream.len());
        assert_eq!(stream_set, brute);
        // closed under inversion + canonicalization
        for c in &stream {
            let inv = canonical_rotation(&c.word.inverse());
            assert!(stream_set.contains(inv.letters()));
        }
        // shell count sanity bound: N_L <= 2 * 2g (2g-1)^(L-1) / L
        for len in 1..=max_len {
            let count = stream.iter().filter(|c| c.word.len() == len).count();
            assert!(count * len <= 2 * 4 * 3usize.pow(len as u32 - 1));
        }
    }

    #[test]
    fn evaluate_words() {
        let g1 = MoebiusMap::from_int_entries(5, 1, 2, 1, P).unwrap();
        let g2 = MoebiusMap::from_int_entries(3, 1, 1, 2, P).unwrap();
        let group = MarkedSchottkyGroup::new(vec![g1.clone(), g2], None, P).unwrap();
        let id = evaluate(&Word::empty(2), &group).unwrap();
        assert!(id.projectively_eq(&MoebiusMap::identity(P), &Float::with_val(P, 1e-30)));
        let single = evaluate(&w(&[1]), &group).unwrap();
        assert!(single.projectively_eq(&g1, &Float::with_val(P, 1e-30)));
        let word = w(&[1, 2, -1, 2, 2]);
        let prod = evaluate(&word, &group)
            .unwrap()
            .compose(&evaluate(&word.inverse(), &group).unwrap());
        assert!(prod.projectively_eq(&MoebiusMap::identity(P), &Float::with_val(P, 1e-25)));
        // rotation invariance of the multiplier
        let q0 = evaluate(&word, &group).unwrap().multiplier().unwrap();
        for s in 1..word.len() {
            let q1 = evaluate(&word.rotated(s), &group).unwrap().multiplier().unwrap();
            assert!(cabs(&csub(&q0, &q1)) < Float::with_val(P, 1e-28));
        }
        let bad = Word::new(vec![3], 3).unwrap();
        assert!(matches!(
            evaluate(&bad, &group),
            Err(Error::RankMismatch { .. })
        ));
    }
}
