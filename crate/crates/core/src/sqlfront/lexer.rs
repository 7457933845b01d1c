use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// Undelimited identifier or keyword, folded to upper case.
    Word(String),
    /// `"..."` identifier, case preserved.
    Quoted(String),
    Str(String),
    Num(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

const SYMBOLS: [&str; 19] =
    ["<>", "!=", "<=", ">=", "||", "(", ")", ",", ".", ";", "*", "+", "-", "/", "=", "<", ">", "[", "]"];

pub fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| Error::Syntax { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
            for k in 0..n {
                if chars[*i + k] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
            }
            *i += n;
        };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let tok = if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
                col += 1;
            }
            Tok::Word(chars[start..i].iter().collect::<String>().to_uppercase())
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            col += i - start;
            Tok::Num(chars[start..i].iter().collect())
        } else if c == '\'' || c == '"' {
            let mut s = String::new();
            advance(&mut i, &mut line, &mut col, 1);
            loop {
                match chars.get(i) {
                    None => {
                        let what = if c == '\'' { "string literal" } else { "quoted identifier" };
                        return Err(err(tl, tc, format!("unterminated {what}")));
                    }
                    Some(&q) if q == c => {
                        if chars.get(i + 1) == Some(&c) {
                            s.push(c);
                            advance(&mut i, &mut line, &mut col, 2);
                        } else {
                            advance(&mut i, &mut line, &mut col, 1);
                            break;
                        }
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(&mut i, &mut line, &mut col, 1);
                    }
                }
            }
            if c == '\'' {
                Tok::Str(s)
            } else {
                if s.is_empty() {
                    return Err(err(tl, tc, "empty quoted identifier".into()));
                }
                Tok::Quoted(s)
            }
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    advance(&mut i, &mut line, &mut col, s.len());
                    Tok::Sym(s)
                }
                None => return Err(err(tl, tc, format!("unexpected character {c:?}"))),
            }
        };
        out.push(Token { tok, line: tl, column: tc });
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn folds_and_quotes() {
        assert_eq!(
            toks(r#"select "Customer", cust from t"#),
            vec![
                Tok::Word("SELECT".into()),
                Tok::Quoted("Customer".into()),
                Tok::Sym(","),
                Tok::Word("CUST".into()),
                Tok::Word("FROM".into()),
                Tok::Word("T".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn strings_and_operators() {
        assert_eq!(
            toks("'it''s' || 'x' <= 17000.00"),
            vec![
                Tok::Str("it's".into()),
                Tok::Sym("||"),
                Tok::Str("x".into()),
                Tok::Sym("<="),
                Tok::Num("17000.00".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions() {
        let t = tokenize("select *\n  frm t").unwrap();
        assert_eq!((t[2].line, t[2].column), (2, 3));
        assert!(matches!(tokenize("'abc"), Err(Error::Syntax { line: 1, column: 1, .. })));
    }
}
