use super::CorpusError;

const BE_FORMS: &[&str] = &[
    "be", "am", "is", "are", "was", "were", "been", "being", "'s", "'re", "'m",
];
const HAVE_FORMS: &[&str] = &["have", "has", "had", "having", "'ve", "'d"];
const DO_FORMS: &[&str] = &["do", "does", "did", "doing", "done"];

fn is_sentence_final(tag: &str) -> bool {
    tag == "."
}

/// Tag of the next `VB*` token after `i`, stopping at sentence-final punctuation.
fn next_verb_tag<'a>(pos_tags: &'a [String], i: usize) -> Option<&'a str> {
    pos_tags[i + 1..]
        .iter()
        .take_while(|t| !is_sentence_final(t))
        .find(|t| t.starts_with("VB"))
        .map(String::as_str)
}

/// Indices of verbal predicates: `VB*` tokens other than forms of "be" and
/// auxiliary "have"/"do". Modals are tagged `MD` and never returned.
///
/// "have" is auxiliary when the next verb is tagged `VBN`, "do" when it is
/// tagged `VB`.
pub fn identify_verbs(tokens: &[String], pos_tags: &[String]) -> Result<Vec<usize>, CorpusError> {
    if tokens.len() != pos_tags.len() {
        return Err(CorpusError::LengthMismatch {
            tokens: tokens.len(),
            tags: pos_tags.len(),
        });
    }
    let mut verbs = Vec::new();
    for (i, (token, tag)) in tokens.iter().zip(pos_tags).enumerate() {
        if !tag.starts_with("VB") {
            continue;
        }
        let word = token.to_lowercase();
        let word = word.as_str();
        if BE_FORMS.contains(&word) {
            continue;
        }
        let auxiliary_before = if HAVE_FORMS.contains(&word) {
            Some("VBN")
        } else if DO_FORMS.contains(&word) {
            Some("VB")
        } else {
            None
        };
        if let Some(expected) = auxiliary_before {
            if next_verb_tag(pos_tags, i) == Some(expected) {
                continue;
            }
        }
        verbs.push(i);
    }
    Ok(verbs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str, tags: &str) -> Vec<usize> {
        let tokens: Vec<String> = text.split(' ').map(String::from).collect();
        let tags: Vec<String> = tags.split('/').map(String::from).collect();
        identify_verbs(&tokens, &tags).unwrap()
    }

    #[test]
    fn heuristic_examples() {
        assert_eq!(run("She was blamed .", "PRP/VBD/VBN/."), vec![2]);
        assert_eq!(run("They have finished .", "PRP/VBP/VBN/."), vec![2]);
        assert_eq!(run("They have a dog .", "PRP/VBP/DT/NN/."), vec![1]);
    }

    #[test]
    fn do_support_and_modals() {
        assert_eq!(run("Did n't she go ?", "VBD/RB/PRP/VB/."), vec![3]);
        assert_eq!(run("What did she do ?", "WP/VBD/PRP/VB/."), vec![3]);
        assert_eq!(run("She will have gone", "PRP/MD/VB/VBN"), vec![3]);
        assert_eq!(run("She did it . Go", "PRP/VBD/PRP/./VB"), vec![1, 4]);
    }

    #[test]
    fn length_mismatch() {
        let tokens = vec!["a".to_string()];
        assert!(matches!(
            identify_verbs(&tokens, &[]),
            Err(CorpusError::LengthMismatch { .. })
        ));
    }
}
