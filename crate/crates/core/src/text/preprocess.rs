use serde::Serialize;

use super::lexicon::LemmaDictionary;

/// Characters that close a negation scope and drop a pending intensifier.
const SENTENCE_PUNCT: [char; 6] = [',', '.', ';', ':', '!', '?'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Content,
    Negation,
    Intensifier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub kind: TokenKind,
    pub multiplier: f64,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedIntensifier {
    pub phrase: String,
    pub multiplier: f64,
    /// Index into [`TextAnalysis::tokens`] of the token that received it.
    pub target: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TextAnalysis {
    pub tokens: Vec<Token>,
    pub negations_detected: usize,
    pub intensifiers_applied: Vec<AppliedIntensifier>,
}

impl TextAnalysis {
    pub fn content_tokens(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.kind == TokenKind::Content)
    }
}

/// Intensifier phrases with multipliers, matched longest phrase first.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensifierTable {
    // (words, phrase, multiplier), sorted by word count descending
    phrases: Vec<(Vec<String>, String, f64)>,
}

impl IntensifierTable {
    pub fn new<'a>(entries: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        let mut phrases: Vec<(Vec<String>, String, f64)> = entries
            .into_iter()
            .map(|(phrase, mult)| {
                let words: Vec<String> = tokenize(phrase)
                    .into_iter()
                    .filter_map(|t| match t {
                        Lexeme::Word(w) => Some(w),
                        Lexeme::Break => None,
                    })
                    .collect();
                (words.clone(), words.join(" "), mult)
            })
            .filter(|(words, _, _)| !words.is_empty())
            .collect();
        phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(&b.1)));
        Self { phrases }
    }

    /// Multiplier table used by default.
    pub fn standard() -> Self {
        Self::new(DEFAULT_INTENSIFIERS.iter().copied())
    }

    fn match_at(&self, words: &[Lexeme], at: usize) -> Option<(&str, f64, usize)> {
        self.phrases.iter().find_map(|(phrase_words, phrase, mult)| {
            let n = phrase_words.len();
            let window = words.get(at..at + n)?;
            let hit = window
                .iter()
                .zip(phrase_words)
                .all(|(lex, w)| matches!(lex, Lexeme::Word(s) if s == w));
            hit.then_some((phrase.as_str(), *mult, n))
        })
    }
}

pub const DEFAULT_INTENSIFIERS: [(&str, f64); 7] = [
    ("muy", 1.5),
    ("extremadamente", 2.0),
    ("sumamente", 1.8),
    ("totalmente", 1.6),
    ("algo", 0.8),
    ("un poco", 0.7),
    ("poco", 0.6),
];

pub const DEFAULT_NEGATIONS: [&str; 5] = ["no", "nunca", "jamás", "sin", "tampoco"];

#[derive(Debug, Clone, PartialEq)]
enum Lexeme {
    Word(String),
    Break,
}

/// Lowercases and splits into words; sentence punctuation becomes a break.
fn tokenize(text: &str) -> Vec<Lexeme> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
            continue;
        }
        if !current.is_empty() {
            out.push(Lexeme::Word(std::mem::take(&mut current)));
        }
        if SENTENCE_PUNCT.contains(&ch) {
            out.push(Lexeme::Break);
        }
    }
    if !current.is_empty() {
        out.push(Lexeme::Word(current));
    }
    out
}

/// Tokenizes, lemmatizes, attaches intensifier multipliers to the next
/// content token and marks tokens inside negation scopes.
///
/// A negation opens a scope over the following `scope_len` content tokens,
/// closed early by sentence punctuation. Overlapping scopes toggle, so a
/// token under two negations is not negated. Consecutive intensifiers
/// compose multiplicatively.
pub fn preprocess(
    text: &str,
    lemmas: &LemmaDictionary,
    negation_markers: &[String],
    intensifiers: &IntensifierTable,
    scope_len: usize,
) -> TextAnalysis {
    let lexemes = tokenize(text);
    let mut analysis = TextAnalysis::default();
    let mut pending: Vec<(String, f64)> = Vec::new();
    let mut scopes: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < lexemes.len() {
        let word = match &lexemes[i] {
            Lexeme::Break => {
                pending.clear();
                scopes.clear();
                i += 1;
                continue;
            }
            Lexeme::Word(w) => w,
        };

        if let Some((phrase, mult, n)) = intensifiers.match_at(&lexemes, i) {
            for lex in &lexemes[i..i + n] {
                if let Lexeme::Word(w) = lex {
                    analysis.tokens.push(Token {
                        surface: w.clone(),
                        lemma: w.clone(),
                        kind: TokenKind::Intensifier,
                        multiplier: 1.0,
                        negated: false,
                    });
                }
            }
            pending.push((phrase.to_string(), mult));
            i += n;
            continue;
        }

        if negation_markers.iter().any(|m| m == word) {
            analysis.negations_detected += 1;
            analysis.tokens.push(Token {
                surface: word.clone(),
                lemma: word.clone(),
                kind: TokenKind::Negation,
                multiplier: 1.0,
                negated: false,
            });
            if scope_len > 0 {
                scopes.push(scope_len);
            }
            i += 1;
            continue;
        }

        let target = analysis.tokens.len();
        let mut multiplier = 1.0;
        for (phrase, mult) in pending.drain(..) {
            multiplier *= mult;
            analysis.intensifiers_applied.push(AppliedIntensifier {
                phrase,
                multiplier: mult,
                target,
            });
        }
        analysis.tokens.push(Token {
            surface: word.clone(),
            lemma: lemmas.lemma(word).to_string(),
            kind: TokenKind::Content,
            multiplier,
            negated: scopes.len() % 2 == 1,
        });
        for remaining in scopes.iter_mut() {
            *remaining -= 1;
        }
        scopes.retain(|r| *r > 0);
        i += 1;
    }
    analysis
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> TextAnalysis {
        let negs: Vec<String> = DEFAULT_NEGATIONS.iter().map(|s| s.to_string()).collect();
        preprocess(text, &LemmaDictionary::seed(), &negs, &IntensifierTable::standard(), 3)
    }

    fn token<'a>(a: &'a TextAnalysis, surface: &str) -> &'a Token {
        a.tokens.iter().find(|t| t.surface == surface).unwrap()
    }

    #[test]
    fn muy_feliz() {
        let a = run("muy feliz");
        assert_eq!(token(&a, "feliz").multiplier, 1.5);
        assert_eq!(a.intensifiers_applied.len(), 1);
        assert_eq!(a.intensifiers_applied[0].phrase, "muy");
    }

    #[test]
    fn bigram_beats_unigram() {
        let a = run("un poco triste");
        assert_eq!(token(&a, "triste").multiplier, 0.7);
        assert_eq!(a.intensifiers_applied.len(), 1);
        assert_eq!(a.intensifiers_applied[0].phrase, "un poco");
    }

    #[test]
    fn empty_text() {
        let a = run("");
        assert!(a.tokens.is_empty());
        assert_eq!(a.negations_detected, 0);
    }

    #[test]
    fn negation_scope_is_three_content_tokens() {
        let a = run("no estoy nada muy feliz hoy");
        let flags: Vec<(&str, bool)> = a.content_tokens().map(|t| (t.surface.as_str(), t.negated)).collect();
        assert_eq!(
            flags,
            vec![("estoy", true), ("nada", true), ("feliz", true), ("hoy", false)]
        );
    }

    #[test]
    fn punctuation_closes_scope() {
        let a = run("No, estoy feliz");
        assert!(!token(&a, "feliz").negated);
        let a = run("muy. feliz");
        assert_eq!(token(&a, "feliz").multiplier, 1.0);
    }

    #[test]
    fn double_negation_cancels() {
        let a = run("no no feliz");
        assert_eq!(a.negations_detected, 2);
        assert!(!token(&a, "feliz").negated);
        let a = run("nunca estoy sin miedo");
        assert!(!token(&a, "miedo").negated);
        assert!(token(&a, "estoy").negated);
    }

    #[test]
    fn lemmatization_and_case() {
        let a = run("¡Estoy MUY Contenta!");
        let t = token(&a, "contenta");
        assert_eq!(t.lemma, "contento");
        assert_eq!(t.multiplier, 1.5);
        assert_eq!(token(&a, "estoy").lemma, "estar");
    }

    #[test]
    fn stacked_intensifiers_compose() {
        let a = run("muy poco feliz");
        assert!((token(&a, "feliz").multiplier - 0.9).abs() < 1e-12);
        assert_eq!(a.intensifiers_applied.len(), 2);
    }

    #[test]
    fn counts_match_flags() {
        let a = run("no, nunca muy triste; sin algo de miedo");
        let markers = a.tokens.iter().filter(|t| t.kind == TokenKind::Negation).count();
        assert_eq!(markers, a.negations_detected);
        for app in &a.intensifiers_applied {
            assert_eq!(a.tokens[app.target].kind, TokenKind::Content);
        }
        assert!(a.tokens.iter().all(|t| t.multiplier > 0.0));
    }
}
