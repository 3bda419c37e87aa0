//! Character n-grams of `<word>` hashed with 64-bit FNV-1a.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// All character n-grams of `<word>` with `min_n <= n <= max_n`, in order of
/// start position then length. Duplicates are kept.
pub fn char_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let wrapped: Vec<char> = std::iter::once('<').chain(word.chars()).chain(['>']).collect();
    let mut out = Vec::new();
    for start in 0..wrapped.len() {
        for n in min_n..=max_n {
            if start + n > wrapped.len() {
                break;
            }
            out.push(wrapped[start..start + n].iter().collect());
        }
    }
    out
}

/// Bucket rows for `word`. When the wrapped word is shorter than `min_n`, the
/// wrapped word itself is hashed so every string maps to at least one row.
pub fn ngram_buckets(word: &str, min_n: usize, max_n: usize, buckets: usize) -> Vec<usize> {
    let grams = char_ngrams(word, min_n, max_n);
    let bucket = |s: &str| (fnv1a64(s.as_bytes()) % buckets as u64) as usize;
    if grams.is_empty() {
        vec![bucket(&format!("<{word}>"))]
    } else {
        grams.iter().map(|g| bucket(g)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapped_trigrams_of_cat() {
        assert_eq!(char_ngrams("cat", 3, 3), vec!["<ca", "cat", "at>"]);
        assert_eq!(char_ngrams("ab", 3, 4), vec!["<ab", "<ab>", "ab>"]);
    }

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn short_words_still_get_a_bucket() {
        assert_eq!(ngram_buckets("", 3, 6, 100).len(), 1);
        assert_eq!(ngram_buckets("a", 3, 6, 100).len(), 1);
    }
}
