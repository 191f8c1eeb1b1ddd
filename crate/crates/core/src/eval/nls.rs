//! Normalized Levenshtein similarity: 1 - LD / max(len).

/// Character-level edit distance, two-row dynamic programming.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// 1 - LD(pred, gold) / max(len(pred), len(gold)); two empty strings
/// score 1.0. Lengths count chars, not bytes.
pub fn nls(pred: &str, gold: &str) -> f64 {
    let lp = pred.chars().count();
    let lg = gold.chars().count();
    if lp == 0 && lg == 0 {
        return 1.0;
    }
    1.0 - levenshtein(pred, gold) as f64 / lp.max(lg) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_strings_score_one() {
        assert_eq!(nls("radar altimeter", "radar altimeter"), 1.0);
    }

    #[test]
    fn empty_vs_nonempty_scores_zero() {
        assert_eq!(nls("", "abc"), 0.0);
        assert_eq!(nls("abc", ""), 0.0);
    }

    #[test]
    fn both_empty_is_defined_one() {
        assert_eq!(nls("", ""), 1.0);
    }

    #[test]
    fn kitten_sitting_classic() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert!((nls("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_in_range() {
        let pairs = [
            ("surface", "surfase"),
            ("", "x"),
            ("abcdef", "fedcba"),
            ("héllo", "hello"),
        ];
        for (a, b) in pairs {
            let ab = nls(a, b);
            let ba = nls(b, a);
            assert_eq!(ab, ba);
            assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn counts_chars_not_bytes() {
        // multibyte chars: one substitution out of two chars
        assert_eq!(levenshtein("éa", "éb"), 1);
        assert!((nls("éa", "éb") - 0.5).abs() < 1e-12);
    }
}
