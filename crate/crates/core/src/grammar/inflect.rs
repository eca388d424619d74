//! Verb inflection: a static lexicon of irregular verbs backed by regular rules.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::slots::VerbForm;
use super::GrammarError;

const BUILTIN_LEXICON: &str = include_str!("../../data/irregular_verbs.tsv");

/// The five surface forms of a verb.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InflectionTable {
    pub stem: String,
    pub present_singular3rd: String,
    pub present_participle: String,
    pub past: String,
    pub past_participle: String,
}

impl InflectionTable {
    pub fn form(&self, form: VerbForm) -> &str {
        match form {
            VerbForm::Stem => &self.stem,
            VerbForm::PresentSingular3rd => &self.present_singular3rd,
            VerbForm::PresentParticiple => &self.present_participle,
            VerbForm::Past => &self.past,
            VerbForm::PastParticiple => &self.past_participle,
        }
    }

    pub fn is_complete(&self) -> bool {
        VerbForm::ALL.iter().all(|&f| !self.form(f).is_empty())
    }

    /// Whether `surface` is one of this table's forms.
    pub fn matches(&self, surface: &str) -> bool {
        VerbForm::ALL.iter().any(|&f| self.form(f) == surface)
    }
}

/// Stem-keyed inflection lexicon.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, InflectionTable>,
}

impl Lexicon {
    pub fn empty() -> Self {
        Lexicon::default()
    }

    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse_tsv(BUILTIN_LEXICON.as_bytes()).expect("builtin lexicon is well formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GrammarError> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::parse_tsv(std::io::BufReader::new(file))
    }

    /// Reads `stem<TAB>3sg<TAB>ing<TAB>past<TAB>pastParticiple` lines.
    pub fn parse_tsv(reader: impl BufRead) -> Result<Self, GrammarError> {
        let mut entries = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 || cols.iter().any(|c| c.trim().is_empty()) {
                return Err(GrammarError::Lexicon {
                    line: lineno + 1,
                    message: "expected 5 non-empty columns".into(),
                });
            }
            let table = InflectionTable {
                stem: cols[0].trim().to_string(),
                present_singular3rd: cols[1].trim().to_string(),
                present_participle: cols[2].trim().to_string(),
                past: cols[3].trim().to_string(),
                past_participle: cols[4].trim().to_string(),
            };
            entries.insert(table.stem.clone(), table);
        }
        Ok(Lexicon { entries })
    }

    pub fn insert(&mut self, table: InflectionTable) {
        self.entries.insert(table.stem.clone(), table);
    }

    pub fn get(&self, stem: &str) -> Option<&InflectionTable> {
        self.entries.get(stem)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Recovers the inflection table of a surface verb form. The Penn tag,
    /// when given, selects which form the surface is expected to be.
    pub fn lemmatize(&self, surface: &str, pos: Option<&str>) -> InflectionTable {
        let surface = surface.to_lowercase();
        let expected: &[VerbForm] = match pos {
            Some("VB") | Some("VBP") => &[VerbForm::Stem],
            Some("VBZ") => &[VerbForm::PresentSingular3rd],
            Some("VBG") => &[VerbForm::PresentParticiple],
            Some("VBD") => &[VerbForm::Past],
            Some("VBN") => &[VerbForm::PastParticiple],
            _ => &VerbForm::ALL,
        };
        let hit = |t: &InflectionTable| expected.iter().any(|&f| t.form(f) == surface);
        if let Some(t) = self
            .entries
            .values()
            .filter(|t| hit(t))
            .min_by(|a, b| a.stem.cmp(&b.stem))
        {
            return t.clone();
        }
        if expected.contains(&VerbForm::Stem) && expected.len() == 1 {
            return inflect(&surface, self);
        }
        let matching: Vec<InflectionTable> = candidate_stems(&surface)
            .into_iter()
            .map(|stem| inflect(&stem, self))
            .filter(|t| t.stem != surface && hit(t) && !odd_double_ending(&t.stem))
            .collect();
        // "refused" fits both "refus" and "refuse"; "walked" fits "walk" and "walke".
        let prefer_e = |t: &InflectionTable| {
            let Some(base) = t.stem.strip_suffix('e') else {
                return false;
            };
            let rev: Vec<char> = base.chars().rev().take(2).collect();
            match rev.as_slice() {
                [c, ..] if matches!(c, 'c' | 'g' | 'v' | 'z' | 'u') => true,
                [c, v] => !is_vowel(*c) && is_vowel(*v),
                _ => false,
            }
        };
        matching
            .iter()
            .find(|t| prefer_e(t))
            .or_else(|| matching.iter().find(|t| !t.stem.ends_with('e')))
            .or(matching.first())
            .cloned()
            .unwrap_or_else(|| inflect(&surface, self))
    }
}

/// Lexicon entry if present, otherwise regular English inflection.
pub fn inflect(stem: &str, lexicon: &Lexicon) -> InflectionTable {
    if let Some(t) = lexicon.get(stem) {
        return t.clone();
    }
    InflectionTable {
        stem: stem.to_string(),
        present_singular3rd: third_singular(stem),
        present_participle: present_participle(stem),
        past: past(stem),
        past_participle: past(stem),
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Single-syllable consonant-vowel-consonant ending ("stop", "plan"),
/// which doubles its final consonant before a vowel suffix.
fn doubles_final_consonant(stem: &str) -> bool {
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    if n < 3 {
        return false;
    }
    let (a, b, c) = (chars[n - 3], chars[n - 2], chars[n - 1]);
    if is_vowel(a) || !is_vowel(b) || is_vowel(c) || matches!(c, 'w' | 'x' | 'y') {
        return false;
    }
    let vowel_groups = chars
        .iter()
        .enumerate()
        .filter(|&(i, &ch)| is_vowel(ch) && (i == 0 || !is_vowel(chars[i - 1])))
        .count();
    vowel_groups == 1
}

fn ends_consonant_y(stem: &str) -> bool {
    let mut rev = stem.chars().rev();
    matches!((rev.next(), rev.next()), (Some('y'), Some(c)) if !is_vowel(c))
}

fn third_singular(stem: &str) -> String {
    if ends_consonant_y(stem) {
        format!("{}ies", &stem[..stem.len() - 1])
    } else if ["s", "x", "z", "ch", "sh", "o"]
        .iter()
        .any(|s| stem.ends_with(s))
    {
        format!("{stem}es")
    } else {
        format!("{stem}s")
    }
}

fn present_participle(stem: &str) -> String {
    if let Some(base) = stem.strip_suffix("ie") {
        format!("{base}ying")
    } else if stem.ends_with("ee") || stem.ends_with("ye") || stem.ends_with("oe") {
        format!("{stem}ing")
    } else if let Some(base) = stem.strip_suffix('e').filter(|b| !b.is_empty()) {
        format!("{base}ing")
    } else if doubles_final_consonant(stem) {
        let last = stem.chars().last().unwrap();
        format!("{stem}{last}ing")
    } else {
        format!("{stem}ing")
    }
}

fn past(stem: &str) -> String {
    if stem.ends_with('e') {
        format!("{stem}d")
    } else if ends_consonant_y(stem) {
        format!("{}ied", &stem[..stem.len() - 1])
    } else if doubles_final_consonant(stem) {
        let last = stem.chars().last().unwrap();
        format!("{stem}{last}ed")
    } else {
        format!("{stem}ed")
    }
}

/// "stopp": a doubled final consonant that English stems rarely end in.
fn odd_double_ending(stem: &str) -> bool {
    let mut rev = stem.chars().rev();
    match (rev.next(), rev.next()) {
        (Some(a), Some(b)) => a == b && !is_vowel(a) && !matches!(a, 's' | 'l' | 'f' | 'z'),
        _ => false,
    }
}

/// Plausible stems for a regular surface form.
fn candidate_stems(surface: &str) -> Vec<String> {
    let mut out = Vec::new();
    let strip = |suffix: &str| surface.strip_suffix(suffix).map(str::to_string);
    for suffix in ["ing", "ed", "es", "s", "d"] {
        if let Some(base) = strip(suffix) {
            out.push(base.clone());
            out.push(format!("{base}e"));
            if let Some(undoubled) = base.get(..base.len().saturating_sub(1)) {
                out.push(undoubled.to_string());
            }
        }
    }
    if let Some(base) = strip("ies").or_else(|| strip("ied")) {
        out.push(format!("{base}y"));
    }
    if let Some(base) = strip("ying") {
        out.push(format!("{base}ie"));
    }
    out.retain(|s| !s.is_empty());
    out
}
