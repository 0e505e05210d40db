//! Line-oriented tokenizer for `.ckb` sources.

use chrono::NaiveDate;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Number(f64),
    Date(NaiveDate),
    /// Punctuation and comparison operators, normalised to ASCII (`≠` becomes `!=`).
    Sym(&'static str),
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Number(n) => format!("number {n}"),
            Tok::Date(d) => format!("date {d}"),
            Tok::Sym(s) => format!("`{s}`"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub column: usize,
}

#[derive(Debug, Clone)]
pub struct Line {
    pub number: usize,
    /// Column of the first token; indentation carries no meaning.
    pub column: usize,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')
}

/// Split source text into non-empty token lines. CRLF and LF are both accepted.
pub fn tokenize(text: &str) -> (Vec<Line>, Vec<LexError>) {
    let mut lines = Vec::new();
    let mut errors = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        match tokenize_line(raw) {
            Ok(tokens) if tokens.is_empty() => {}
            Ok(tokens) => lines.push(Line { number: idx + 1, column: tokens[0].column, tokens }),
            Err((column, message)) => errors.push(LexError { line: idx + 1, column, message }),
        }
    }
    (lines, errors)
}

fn tokenize_line(line: &str) -> Result<Vec<Token>, (usize, String)> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err((column, "unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let esc = chars.get(i + 1).ok_or((i + 1, "dangling escape".to_string()))?;
                        s.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            '"' => '"',
                            '\\' => '\\',
                            other => return Err((i + 1, format!("unknown escape \\{other}"))),
                        });
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), column });
            continue;
        }
        let starts_number = c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()));
        if starts_number {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_digit() || matches!(chars[i], '.' | '-')) {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if text[1..].contains('-') {
                NaiveDate::parse_from_str(&text, "%Y-%m-%d")
                    .map(Tok::Date)
                    .map_err(|_| (column, format!("invalid date `{text}` (expected YYYY-MM-DD)")))?
            } else {
                text.parse::<f64>()
                    .ok()
                    .filter(|n| n.is_finite())
                    .map(Tok::Number)
                    .ok_or((column, format!("invalid number `{text}`")))?
            };
            out.push(Token { tok, column });
            continue;
        }
        if is_ident_start(c) {
            let start = i;
            i += 1;
            while i < chars.len() {
                let ch = chars[i];
                if is_ident_continue(ch) || (ch == ':' && chars.get(i + 1).is_some_and(|n| is_ident_continue(*n))) {
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), column });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let (sym, len) = match (two.as_str(), c) {
            ("!=", _) => ("!=", 2),
            ("<=", _) => ("<=", 2),
            (">=", _) => (">=", 2),
            (_, '≠') => ("!=", 1),
            (_, '≤') => ("<=", 1),
            (_, '≥') => (">=", 1),
            (_, '=') => ("=", 1),
            (_, '<') => ("<", 1),
            (_, '>') => (">", 1),
            (_, '(') => ("(", 1),
            (_, ')') => (")", 1),
            (_, ',') => (",", 1),
            (_, ':') => (":", 1),
            (_, '[') => ("[", 1),
            (_, ']') => ("]", 1),
            _ => return Err((column, format!("unexpected character `{c}`"))),
        };
        out.push(Token { tok: Tok::Sym(sym), column });
        i += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize_line(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn provision_ids_keep_colons() {
        assert_eq!(
            toks("provisions GDPR:Art.37 GDPR:Recital.97"),
            vec![
                Tok::Ident("provisions".into()),
                Tok::Ident("GDPR:Art.37".into()),
                Tok::Ident("GDPR:Recital.97".into())
            ]
        );
    }

    #[test]
    fn declaration_colon_is_separate() {
        assert_eq!(
            toks("question dpo.public_authority: boolean"),
            vec![
                Tok::Ident("question".into()),
                Tok::Ident("dpo.public_authority".into()),
                Tok::Sym(":"),
                Tok::Ident("boolean".into())
            ]
        );
    }

    #[test]
    fn literals() {
        assert_eq!(
            toks(r#"x >= -2.5 y ≠ 2018-05-25 "a\"b" # trailing"#),
            vec![
                Tok::Ident("x".into()),
                Tok::Sym(">="),
                Tok::Number(-2.5),
                Tok::Ident("y".into()),
                Tok::Sym("!="),
                Tok::Date(NaiveDate::from_ymd_opt(2018, 5, 25).unwrap()),
                Tok::Str("a\"b".into()),
            ]
        );
    }

    #[test]
    fn crlf_and_errors_report_positions() {
        let (lines, errors) = tokenize("rule a: if b\r\n\r\n  text \"open\n");
        assert_eq!(lines.len(), 1);
        assert_eq!(errors, vec![LexError { line: 3, column: 8, message: "unterminated string".into() }]);
    }
}
