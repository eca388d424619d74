//! Whitespace tokenizer and a small rule-based tagger for demos. The tags are
//! low quality; real input should come with POS tags.

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "some", "every", "each", "no",
];
const PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them",
];
const PREPOSITIONS: &[&str] = &[
    "in", "on", "at", "by", "for", "with", "from", "of", "about", "into", "over", "under", "after",
    "before", "during", "through", "against", "between", "without", "near",
];
const MODALS: &[&str] = &[
    "can", "could", "may", "might", "must", "should", "shall", "will", "would",
];
const CONJUNCTIONS: &[&str] = &["and", "or", "but"];
const BE_PRESENT: &[&str] = &["is", "'s"];
const BE_PAST: &[&str] = &["was", "were"];
const BE_OTHER: &[&str] = &["are", "am"];

/// Splits on whitespace and detaches leading/trailing punctuation.
pub fn fallback_tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let start = word
            .find(|c: char| c.is_alphanumeric())
            .unwrap_or(word.len());
        let end = word
            .rfind(|c: char| c.is_alphanumeric())
            .map(|i| i + word[i..].chars().next().unwrap().len_utf8());
        let end = end.unwrap_or(start).max(start);
        tokens.extend(word[..start].chars().map(String::from));
        if start < end {
            tokens.push(word[start..end].to_string());
        }
        tokens.extend(word[end..].chars().map(String::from));
    }
    tokens
}

/// Penn-style tags from closed word lists and suffixes.
pub fn fallback_tag(tokens: &[String]) -> Vec<String> {
    let mut tags: Vec<String> = Vec::with_capacity(tokens.len());
    for (i, token) in tokens.iter().enumerate() {
        let lower = token.to_lowercase();
        let w = lower.as_str();
        let previous = if i > 0 { tags[i - 1].as_str() } else { "" };
        let tag = if matches!(w, "." | "!" | "?") {
            "."
        } else if !w.chars().any(char::is_alphanumeric) {
            ","
        } else if w.chars().all(|c| c.is_ascii_digit()) {
            "CD"
        } else if DETERMINERS.contains(&w) {
            "DT"
        } else if PRONOUNS.contains(&w) {
            "PRP"
        } else if PREPOSITIONS.contains(&w) {
            "IN"
        } else if MODALS.contains(&w) {
            "MD"
        } else if CONJUNCTIONS.contains(&w) {
            "CC"
        } else if w == "to" {
            "TO"
        } else if BE_PRESENT.contains(&w) {
            "VBZ"
        } else if BE_PAST.contains(&w) {
            "VBD"
        } else if BE_OTHER.contains(&w) {
            "VBP"
        } else if matches!(previous, "MD" | "TO") {
            "VB"
        } else if w.ends_with("ing") && w.len() > 4 {
            "VBG"
        } else if w.ends_with("ed") && w.len() > 3 {
            if matches!(previous, "VBZ" | "VBD" | "VBP") {
                "VBN"
            } else {
                "VBD"
            }
        } else if w.ends_with("ly") && w.len() > 3 {
            "RB"
        } else if i > 0 && token.chars().next().is_some_and(char::is_uppercase) {
            "NNP"
        } else if w.ends_with('s') && matches!(previous, "NN" | "NNP" | "PRP") {
            "VBZ"
        } else if w.ends_with('s') && w.len() > 3 {
            "NNS"
        } else {
            "NN"
        };
        tags.push(tag.to_string());
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::identify_verbs;

    #[test]
    fn tokenizes_punctuation() {
        assert_eq!(
            fallback_tokenize("She left, (quickly)."),
            vec!["She", "left", ",", "(", "quickly", ")", "."]
        );
        assert!(fallback_tokenize("   ").is_empty());
    }

    #[test]
    fn tags_feed_verb_identification() {
        let tokens = fallback_tokenize("The mayor blamed the council.");
        let tags = fallback_tag(&tokens);
        assert_eq!(tags, vec!["DT", "NN", "VBD", "DT", "NN", "."]);
        assert_eq!(identify_verbs(&tokens, &tags).unwrap(), vec![2]);
        let tokens = fallback_tokenize("She was blamed by them.");
        let tags = fallback_tag(&tokens);
        assert_eq!(identify_verbs(&tokens, &tags).unwrap(), vec![2]);
    }
}
