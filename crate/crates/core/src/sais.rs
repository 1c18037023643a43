//! Linear-time suffix sorting by induced sorting (SA-IS).
//!
//! The text is treated as if terminated by a virtual sentinel smaller than
//! every symbol, so a suffix that is a proper prefix of another sorts first.
//! Indices are `u32`; callers keep texts below `u32::MAX` symbols.
//!
//! Working memory is the output array (4 bytes/symbol), one type flag per
//! symbol, two bucket arrays of `alphabet` words, and the recursive problem
//! on at most half the symbols.

use alloc::vec;
use alloc::vec::Vec;

const EMPTY: u32 = u32::MAX;

/// Largest text length accepted by [`suffix_array`].
pub const MAX_LEN: usize = (u32::MAX - 1) as usize;

/// Sort all suffixes of `text`, whose symbols lie in `0..alphabet`.
pub fn suffix_array<T: Copy + Into<u32>>(text: &[T], alphabet: usize) -> Vec<u32> {
    assert!(text.len() <= MAX_LEN, "text too long for 32-bit suffix array");
    let mut sa = vec![EMPTY; text.len()];
    sais(text, alphabet, &mut sa);
    sa
}

#[inline]
fn sym<T: Copy + Into<u32>>(text: &[T], i: usize) -> usize {
    text[i].into() as usize
}

fn bucket_heads(counts: &[u32], heads: &mut [u32]) {
    let mut sum = 0u32;
    for (h, &c) in heads.iter_mut().zip(counts) {
        *h = sum;
        sum += c;
    }
}

fn bucket_tails(counts: &[u32], tails: &mut [u32]) {
    let mut sum = 0u32;
    for (t, &c) in tails.iter_mut().zip(counts) {
        sum += c;
        *t = sum;
    }
}

fn induce<T: Copy + Into<u32>>(
    text: &[T],
    sa: &mut [u32],
    is_s: &[bool],
    counts: &[u32],
    bkt: &mut [u32],
) {
    let n = text.len();
    // L-type suffixes, left to right. The suffix just before the virtual
    // sentinel is always L-type and comes first in its bucket.
    bucket_heads(counts, bkt);
    let c = sym(text, n - 1);
    sa[bkt[c] as usize] = (n - 1) as u32;
    bkt[c] += 1;
    for r in 0..n {
        let j = sa[r];
        if j == EMPTY || j == 0 {
            continue;
        }
        let p = j as usize - 1;
        if !is_s[p] {
            let c = sym(text, p);
            sa[bkt[c] as usize] = p as u32;
            bkt[c] += 1;
        }
    }
    // S-type suffixes, right to left.
    bucket_tails(counts, bkt);
    for r in (0..n).rev() {
        let j = sa[r];
        if j == EMPTY || j == 0 {
            continue;
        }
        let p = j as usize - 1;
        if is_s[p] {
            let c = sym(text, p);
            bkt[c] -= 1;
            sa[bkt[c] as usize] = p as u32;
        }
    }
}

fn sais<T: Copy + Into<u32>>(text: &[T], alphabet: usize, sa: &mut [u32]) {
    let n = text.len();
    match n {
        0 => return,
        1 => {
            sa[0] = 0;
            return;
        }
        _ => {}
    }

    let mut is_s = vec![false; n];
    for i in (0..n - 1).rev() {
        let (a, b) = (sym(text, i), sym(text, i + 1));
        is_s[i] = a < b || (a == b && is_s[i + 1]);
    }
    let is_lms = |i: usize| i > 0 && is_s[i] && !is_s[i - 1];

    let mut counts = vec![0u32; alphabet];
    for i in 0..n {
        counts[sym(text, i)] += 1;
    }
    let mut bkt = vec![0u32; alphabet];

    // Stage 1: sort LMS substrings.
    sa.fill(EMPTY);
    bucket_tails(&counts, &mut bkt);
    for i in 1..n {
        if is_lms(i) {
            let c = sym(text, i);
            bkt[c] -= 1;
            sa[bkt[c] as usize] = i as u32;
        }
    }
    induce(text, sa, &is_s, &counts, &mut bkt);

    // Compact the sorted LMS positions into the front of `sa`.
    let mut m = 0;
    for r in 0..n {
        let j = sa[r];
        if j != EMPTY && is_lms(j as usize) {
            sa[m] = j;
            m += 1;
        }
    }
    if m == 0 {
        // Non-increasing text: induction alone produced the final order.
        return;
    }

    // Name LMS substrings; names go to sa[m + pos/2] (LMS positions are at
    // least two apart, so slots never collide).
    for r in m..n {
        sa[r] = EMPTY;
    }
    let mut name = 0u32;
    let mut prev: Option<usize> = None;
    for r in 0..m {
        let pos = sa[r] as usize;
        let differs = match prev {
            None => true,
            Some(p) => lms_substrings_differ(text, &is_s, p, pos),
        };
        if differs {
            name += 1;
        }
        prev = Some(pos);
        sa[m + pos / 2] = name - 1;
    }
    let names = name as usize;

    // Gather the reduced string at the tail of `sa`, in text order.
    let mut w = n;
    for r in (m..n).rev() {
        if sa[r] != EMPTY {
            w -= 1;
            sa[w] = sa[r];
        }
    }
    debug_assert_eq!(w, n - m);

    let (head, tail) = sa.split_at_mut(n - m);
    let reduced = &tail[..];
    let sa1 = &mut head[..m];
    if names < m {
        let reduced_owned: Vec<u32> = reduced.to_vec();
        sais(&reduced_owned[..], names, sa1);
    } else {
        for (i, &c) in reduced.iter().enumerate() {
            sa1[c as usize] = i as u32;
        }
    }

    // Map reduced ranks back to LMS positions (reuse the tail for the
    // position list).
    let mut k = 0;
    for i in 1..n {
        if is_lms(i) {
            tail[k] = i as u32;
            k += 1;
        }
    }
    for r in 0..m {
        head[r] = tail[head[r] as usize];
    }
    for r in m..n {
        sa[r] = EMPTY;
    }

    // Stage 2: place sorted LMS suffixes at bucket tails and induce.
    bucket_tails(&counts, &mut bkt);
    for r in (0..m).rev() {
        let j = sa[r];
        sa[r] = EMPTY;
        let c = sym(text, j as usize);
        bkt[c] -= 1;
        sa[bkt[c] as usize] = j;
    }
    induce(text, sa, &is_s, &counts, &mut bkt);
}

fn lms_substrings_differ<T: Copy + Into<u32>>(text: &[T], is_s: &[bool], a: usize, b: usize) -> bool {
    let n = text.len();
    let is_lms = |i: usize| i > 0 && is_s[i] && !is_s[i - 1];
    let mut d = 0;
    loop {
        let (x, y) = (a + d, b + d);
        // Reaching the virtual sentinel makes a substring unique.
        if x == n || y == n {
            return true;
        }
        if sym(text, x) != sym(text, y) || is_s[x] != is_s[y] {
            return true;
        }
        if d > 0 {
            let (lx, ly) = (is_lms(x), is_lms(y));
            if lx && ly {
                return false;
            }
            if lx != ly {
                return true;
            }
        }
        d += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use infgram_testkit::{naive_suffix_array, ChaCha8Rng, SeedableRng};
    use rand::Rng;

    fn check<T: Copy + Into<u32> + Ord>(text: &[T], alphabet: usize) {
        let got: Vec<usize> = suffix_array(text, alphabet).iter().map(|&x| x as usize).collect();
        assert_eq!(got, naive_suffix_array(text));
    }

    #[test]
    fn toy_string() {
        let sa = suffix_array(b"aabaca", 256);
        assert_eq!(sa, [5, 0, 1, 3, 2, 4]);
    }

    #[test]
    fn degenerate_inputs() {
        check::<u8>(&[], 256);
        check(&[7u8], 256);
        check(b"aaaaaaaa", 256);
        check(b"abababab", 256);
        check(b"dcba", 256);
        check(b"mississippi", 256);
        check(&[3u16, 3, 2, 2, 1, 1, 0, 0], 4);
    }

    #[test]
    fn random_texts_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for round in 0..300 {
            let n = rng.gen_range(0..400);
            let k: u16 = [2, 3, 4, 17, 300][round % 5];
            let text: Vec<u16> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            check(&text, k as usize);
        }
    }
}
