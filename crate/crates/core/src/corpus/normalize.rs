use unicode_general_category::{get_general_category, GeneralCategory};

/// Options for [`normalize_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NormalizeOptions {
    pub lowercase: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions { lowercase: true }
    }
}

/// Strip numbers and punctuation, lowercase, and collapse whitespace.
///
/// Letters (general category `L*`) are kept; whitespace separates words;
/// everything else (punctuation `P*`, symbols `S*`, numbers `N*`, marks,
/// controls) is deleted without leaving a gap, so `"don't"` becomes `"dont"`.
pub fn normalize(text: &str) -> String {
    normalize_with(text, NormalizeOptions::default())
}

pub fn normalize_with(text: &str, opts: NormalizeOptions) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if !is_letter(c) {
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        if opts.lowercase {
            // Some lowercase mappings expand into combining marks (U+0130).
            out.extend(c.to_lowercase().filter(|&l| is_letter(l)));
        } else {
            out.push(c);
        }
    }
    out
}

fn is_letter(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::UppercaseLetter
            | GeneralCategory::LowercaseLetter
            | GeneralCategory::TitlecaseLetter
            | GeneralCategory::ModifierLetter
            | GeneralCategory::OtherLetter
    )
}

/// Whitespace tokenization of already-normalized text.
pub fn tokens(norm_text: &str) -> impl Iterator<Item = &str> {
    norm_text.split_whitespace()
}
