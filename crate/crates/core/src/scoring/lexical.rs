use std::collections::HashSet;

use super::{MatchScorer, ScoreError};
use crate::ingest::tokens;

fn token_set(text: &str) -> HashSet<String> {
    tokens(text).map(str::to_lowercase).collect()
}

/// Jaccard similarity of the lowercased token sets.
pub fn lexical_score(a: &str, b: &str) -> f64 {
    let (sa, sb) = (token_set(a), token_set(b));
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Offline fallback match scorer backed by [`lexical_score`]. Ignores topic.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl MatchScorer for LexicalScorer {
    fn score(&self, comment: &str, key_point: &str, _topic: &str) -> Result<f64, ScoreError> {
        Ok(lexical_score(comment, key_point))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(lexical_score("the city needs parks", "the city needs parks"), 1.0);
        assert_eq!(lexical_score("more buses", "lower taxes"), 0.0);
        assert_eq!(lexical_score("city needs parks", "city parks"), 2.0 / 3.0);
        assert_eq!(lexical_score("", "!!"), 0.0);
        assert_eq!(lexical_score("City PARKS!", "city parks"), 1.0);
    }

    proptest! {
        #[test]
        fn self_similarity_is_one(text in "[a-z]{1,6}( [a-z]{1,6}){0,8}") {
            prop_assert_eq!(lexical_score(&text, &text), 1.0);
        }

        #[test]
        fn bounded_and_symmetric(a in "[a-c ]{0,12}", b in "[a-c ]{0,12}") {
            let s = lexical_score(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, lexical_score(&b, &a));
        }
    }
}
