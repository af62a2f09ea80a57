//! Mutation-based fuzzing baseline: tokenize existing test cases on spaces
//! and newlines, then mutate 30% of tokens by type.

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Int,
    Float,
    Str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FollowingSeparator {
    Space,
    Newline,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: Vec<u8>,
    pub kind: TokenKind,
    pub following_separator: FollowingSeparator,
}

/// A test case split on spaces and newlines. Lossless: [`detokenize`]
/// reconstructs the original bytes exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedCase {
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FuzzError {
    #[error("cannot mutate an empty case")]
    EmptyCase,
}

fn classify(token: &[u8]) -> TokenKind {
    let body = token.strip_prefix(b"-").unwrap_or(token);
    if !body.is_empty() && body.iter().all(|c| c.is_ascii_digit()) {
        return TokenKind::Int;
    }
    let dots = body.iter().filter(|&&c| c == b'.').count();
    if dots == 1 && body.len() > 1 && body.iter().all(|&c| c.is_ascii_digit() || c == b'.') {
        return TokenKind::Float;
    }
    TokenKind::Str
}

/// Splits on single space/newline characters, remembering each token's
/// following separator. Consecutive separators produce empty `Str` tokens.
pub fn tokenize_case(text: &[u8]) -> TokenizedCase {
    let mut tokens = Vec::new();
    let mut start = 0;
    for (i, &b) in text.iter().enumerate() {
        if b == b' ' || b == b'\n' {
            tokens.push(Token {
                text: text[start..i].to_vec(),
                kind: classify(&text[start..i]),
                following_separator: if b == b' ' {
                    FollowingSeparator::Space
                } else {
                    FollowingSeparator::Newline
                },
            });
            start = i + 1;
        }
    }
    tokens.push(Token {
        text: text[start..].to_vec(),
        kind: classify(&text[start..]),
        following_separator: FollowingSeparator::End,
    });
    TokenizedCase { tokens }
}

pub fn detokenize(tc: &TokenizedCase) -> Vec<u8> {
    let mut out = Vec::new();
    for t in &tc.tokens {
        out.extend_from_slice(&t.text);
        match t.following_separator {
            FollowingSeparator::Space => out.push(b' '),
            FollowingSeparator::Newline => out.push(b'\n'),
            FollowingSeparator::End => {}
        }
    }
    out
}

/// Default token-selection ratio.
pub const DEFAULT_RATIO: f64 = 0.3;

/// Mutates exactly `max(1, round(ratio * tokens))` distinct tokens, chosen
/// uniformly. Separators and token count are untouched. Mutation is
/// type-preserving unless `chaotic` is set.
pub fn mutate_case<R: Rng>(
    tc: &TokenizedCase,
    ratio: f64,
    chaotic: bool,
    rng: &mut R,
) -> Result<Vec<u8>, FuzzError> {
    if tc.tokens.is_empty() || (tc.tokens.len() == 1 && tc.tokens[0].text.is_empty()) {
        return Err(FuzzError::EmptyCase);
    }
    let n = tc.tokens.len();
    let count = ((ratio * n as f64).round() as usize).clamp(1, n);
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(rng);
    positions.truncate(count);
    let mut mutated = tc.clone();
    for &i in &positions {
        let token = &mut mutated.tokens[i];
        token.text = mutate_token(&token.text, token.kind, chaotic, rng);
    }
    Ok(detokenize(&mutated))
}

fn mutate_token<R: Rng>(text: &[u8], kind: TokenKind, chaotic: bool, rng: &mut R) -> Vec<u8> {
    let kind = if chaotic { TokenKind::Str } else { kind };
    // retry until the token actually changes
    for _ in 0..64 {
        let out = match kind {
            TokenKind::Int => mutate_int(text, rng),
            TokenKind::Float => mutate_float(text, rng),
            TokenKind::Str => mutate_str(text, rng),
        };
        if out != text {
            return out;
        }
    }
    // all-same-digit shuffles etc.: force an arithmetic change
    mutate_int(text, rng)
}

/// Integer: add ±uniform(1..=9), or shuffle the digits (coin flip).
fn mutate_int<R: Rng>(text: &[u8], rng: &mut R) -> Vec<u8> {
    let parsed = std::str::from_utf8(text).ok().and_then(|s| s.parse::<i128>().ok());
    let Some(value) = parsed else {
        return mutate_str(text, rng);
    };
    if rng.gen_bool(0.5) {
        let delta = rng.gen_range(1..=9i128);
        let delta = if rng.gen_bool(0.5) { delta } else { -delta };
        (value + delta).to_string().into_bytes()
    } else {
        let negative = text.first() == Some(&b'-');
        let mut digits: Vec<u8> = text.iter().copied().filter(|c| c.is_ascii_digit()).collect();
        digits.shuffle(rng);
        let mut out = Vec::new();
        if negative {
            out.push(b'-');
        }
        out.extend(digits);
        out
    }
}

/// Float: perturb by ±10%, rounded to the original decimal precision.
fn mutate_float<R: Rng>(text: &[u8], rng: &mut R) -> Vec<u8> {
    let parsed = std::str::from_utf8(text).ok().and_then(|s| s.parse::<f64>().ok());
    let Some(value) = parsed else {
        return mutate_str(text, rng);
    };
    let precision = text
        .iter()
        .position(|&c| c == b'.')
        .map(|i| text.len() - i - 1)
        .unwrap_or(0);
    let factor = if rng.gen_bool(0.5) { 1.1 } else { 0.9 };
    let perturbed = value * factor;
    let mut out = format!("{perturbed:.precision$}");
    if out.as_bytes() == text {
        // rounding swallowed the perturbation; nudge the last decimal
        let step = 10f64.powi(-(precision as i32));
        out = format!("{:.precision$}", value + step);
    }
    out.into_bytes()
}

/// String: substitute one character with another from the same character
/// class (lowercase, uppercase, digit, or printable ASCII).
fn mutate_str<R: Rng>(text: &[u8], rng: &mut R) -> Vec<u8> {
    if text.is_empty() {
        return text.to_vec();
    }
    let pos = rng.gen_range(0..text.len());
    let original = text[pos];
    let class: Vec<u8> = if original.is_ascii_lowercase() {
        (b'a'..=b'z').collect()
    } else if original.is_ascii_uppercase() {
        (b'A'..=b'Z').collect()
    } else if original.is_ascii_digit() {
        (b'0'..=b'9').collect()
    } else {
        (b'!'..=b'~').collect()
    };
    let mut out = text.to_vec();
    loop {
        let replacement = class[rng.gen_range(0..class.len())];
        if replacement != original {
            out[pos] = replacement;
            return out;
        }
    }
}
