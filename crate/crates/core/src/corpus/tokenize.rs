//! Tweet tokenization: whitespace-and-punctuation splitting that keeps
//! hashtags and emoticons whole, replaces mentions with `@username` and
//! URLs with `@url`, and lowercases everything.

/// True when a whitespace token looks like a URL: an `http://`, `https://`
/// scheme or a leading `www.` (case-insensitive).
fn is_url(token: &str) -> bool {
    let lower = token.to_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Emoticon shapes kept as single tokens: eyes-first (`:-)`, `;p`, `=D`),
/// reversed (`(-:`), and hearts (`<3`).
fn is_emoticon(token: &str) -> bool {
    let bytes: Vec<char> = token.chars().collect();
    if bytes.len() < 2 || bytes.len() > 6 {
        return false;
    }
    if token.starts_with('<') && token[1..].chars().all(|c| c == '3') {
        return true;
    }
    let eyes = |c: char| matches!(c, ':' | ';' | '=' | '8' | 'x' | 'X');
    let nose = |c: char| matches!(c, '-' | 'o' | '*' | '\'' | '^');
    let mouth = |c: char| {
        matches!(
            c,
            ')' | '(' | ']' | '[' | 'd' | 'D' | 'p' | 'P' | '/' | '\\' | '|' | '}' | '{' | '@'
                | '3' | 'o' | 'O' | '*' | 's' | 'S' | 'c' | 'C'
        )
    };
    // eyes [nose] mouth+
    let forward = |chars: &[char]| {
        if !eyes(chars[0]) {
            return false;
        }
        let rest = &chars[1..];
        let rest = if !rest.is_empty() && nose(rest[0]) && rest.len() > 1 {
            &rest[1..]
        } else {
            rest
        };
        !rest.is_empty() && rest.iter().all(|&c| mouth(c))
    };
    // mouth+ [nose] eyes
    let backward = |chars: &[char]| {
        let n = chars.len();
        if !eyes(chars[n - 1]) {
            return false;
        }
        let rest = &chars[..n - 1];
        let rest = if !rest.is_empty() && nose(rest[rest.len() - 1]) && rest.len() > 1 {
            &rest[..rest.len() - 1]
        } else {
            rest
        };
        !rest.is_empty() && rest.iter().all(|&c| mouth(c))
    };
    forward(&bytes) || backward(&bytes)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

/// Split one whitespace token into word runs and punctuation runs,
/// keeping a leading hashtag attached to its word.
fn split_punct(token: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = token.chars().collect();
    let hashtag_at = |i: usize| -> bool {
        chars[i] == '#' && i + 1 < chars.len() && is_word_char(chars[i + 1])
    };
    let mut i = 0;
    while i < chars.len() {
        if hashtag_at(i) {
            let start = i;
            i += 1;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else if is_word_char(chars[i]) {
            let start = i;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else {
            // Punctuation run; a bare '#' with no word after it belongs here.
            let start = i;
            while i < chars.len() && !is_word_char(chars[i]) && !hashtag_at(i) {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        }
    }
}

/// Tokenize one raw tweet. Mentions become the literal token `@username`,
/// URLs become `@url`, hashtags and emoticons survive as single tokens,
/// and the output is lowercased.
pub fn tokenize_tweet(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        if raw.starts_with('@') {
            out.push("@username".to_string());
        } else if is_url(raw) {
            out.push("@url".to_string());
        } else if is_emoticon(raw) {
            out.push(raw.to_lowercase());
        } else {
            let before = out.len();
            split_punct(&raw.to_lowercase(), &mut out);
            debug_assert!(out.len() > before || raw.is_empty());
        }
    }
    out
}

/// The reduced rule set for already-tokenized input: mention and URL
/// replacement plus lowercasing, nothing else.
pub fn normalize_pretokenized(token: &str) -> String {
    if token.starts_with('@') {
        "@username".to_string()
    } else if is_url(token) {
        "@url".to_string()
    } else {
        token.to_lowercase()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mentions_and_urls_replaced() {
        assert_eq!(
            tokenize_tweet("Thanks @bob http://x.co !"),
            ["thanks", "@username", "@url", "!"]
        );
    }

    #[test]
    fn empty_input_gives_empty_list() {
        assert_eq!(tokenize_tweet(""), Vec::<String>::new());
        assert_eq!(tokenize_tweet("   \t  "), Vec::<String>::new());
    }

    #[test]
    fn hashtags_lowercased_and_www_is_url() {
        assert_eq!(
            tokenize_tweet("#Fun #fun WWW.A.B"),
            ["#fun", "#fun", "@url"]
        );
    }

    #[test]
    fn punctuation_splits_off_words() {
        assert_eq!(tokenize_tweet("wow!!! really?"), ["wow", "!!!", "really", "?"]);
        assert_eq!(tokenize_tweet("don't stop"), ["don't", "stop"]);
    }

    #[test]
    fn emoticons_survive() {
        assert_eq!(tokenize_tweet("great day :) <3"), ["great", "day", ":)", "<3"]);
        assert_eq!(tokenize_tweet("sad :-("), ["sad", ":-("]);
        assert_eq!(tokenize_tweet("lol :D"), ["lol", ":d"]);
    }

    #[test]
    fn hashtag_with_trailing_punct() {
        assert_eq!(tokenize_tweet("#winning!!"), ["#winning", "!!"]);
    }

    #[test]
    fn https_and_mixed_case_scheme() {
        assert_eq!(tokenize_tweet("HTTPS://Example.com rocks"), ["@url", "rocks"]);
    }

    #[test]
    fn mention_with_punctuation_is_single_username() {
        assert_eq!(tokenize_tweet("@bob!"), ["@username"]);
    }

    #[test]
    fn pretokenized_rules() {
        assert_eq!(normalize_pretokenized("@alice"), "@username");
        assert_eq!(normalize_pretokenized("www.x.y"), "@url");
        assert_eq!(normalize_pretokenized("Hello,World"), "hello,world");
        assert_eq!(normalize_pretokenized("我们"), "我们");
    }

    proptest! {
        #[test]
        fn no_token_contains_whitespace(text in "\\PC{0,200}") {
            for tok in tokenize_tweet(&text) {
                prop_assert!(!tok.chars().any(char::is_whitespace), "token {tok:?}");
                prop_assert!(!tok.is_empty());
            }
        }

        #[test]
        fn at_initial_tokens_become_username(word in "[a-zA-Z0-9_]{1,10}") {
            let text = format!("@{word}");
            prop_assert_eq!(tokenize_tweet(&text), vec!["@username".to_string()]);
        }

        #[test]
        fn output_is_lowercase(text in "[a-zA-Z !#@.]{0,80}") {
            for tok in tokenize_tweet(&text) {
                prop_assert_eq!(tok.clone(), tok.to_lowercase());
            }
        }
    }
}
