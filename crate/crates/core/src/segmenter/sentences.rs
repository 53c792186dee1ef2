use std::collections::HashSet;

/// Shortest repeated phrase, in tokens, that gets collapsed.
const MIN_PHRASE_LEN: usize = 3;

/// Removes repeated sentences and immediately repeated phrases.
///
/// Sentences end at `.`, `!` or `?` followed by whitespace, or at a line
/// break. Two sentences are duplicates when they agree after case folding
/// and whitespace collapsing; the first occurrence is kept. Inside a
/// sentence a run of three or more tokens repeated back to back is reduced
/// to a single copy. Lines are preserved, sentences within a line are
/// joined by one space.
pub fn dedupe_sentences(text: &str) -> String {
    let mut seen: HashSet<String> = HashSet::new();
    let mut lines = Vec::new();

    for line in text.lines() {
        let mut kept: Vec<String> = Vec::new();
        for sentence in split_sentences(line) {
            let tokens = collapse_repeated_phrases(sentence.split_whitespace().collect());
            if tokens.is_empty() {
                continue;
            }
            let sentence = tokens.join(" ");
            if seen.insert(sentence.to_lowercase()) {
                kept.push(sentence);
            }
        }
        if !kept.is_empty() {
            lines.push(kept.join(" "));
        }
    }
    lines.join("\n")
}

fn split_sentences(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = line.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
            if at_boundary {
                let end = i + c.len_utf8();
                out.push(&line[start..end]);
                start = end;
            }
        }
    }
    if start < line.len() {
        out.push(&line[start..]);
    }
    out
}

fn phrase_key(token: &str) -> String {
    let trimmed = token.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        token.to_lowercase()
    } else {
        trimmed.to_lowercase()
    }
}

/// Repeatedly drops the first copy of any back-to-back repeated phrase, so
/// the trailing copy (which may carry the terminal punctuation) survives.
fn collapse_repeated_phrases(mut tokens: Vec<&str>) -> Vec<&str> {
    let mut keys: Vec<String> = tokens.iter().map(|t| phrase_key(t)).collect();
    'outer: loop {
        let n = keys.len();
        for len in MIN_PHRASE_LEN..=n / 2 {
            for start in 0..=n - 2 * len {
                if keys[start..start + len] == keys[start + len..start + 2 * len] {
                    tokens.drain(start..start + len);
                    keys.drain(start..start + len);
                    continue 'outer;
                }
            }
        }
        return tokens;
    }
}
