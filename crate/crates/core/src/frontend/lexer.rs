//! Tokenizer for MiniML phrases.

use super::{Span, SyntaxError};

#[derive(Clone, Debug, PartialEq)]
pub enum Token {
    Int(i64),
    /// Integer literal whose magnitude is exactly 2^62; only valid after a unary minus.
    IntMinMagnitude,
    Float(f64),
    Str(String),
    Ident(String),
    // keywords
    Let,
    Rec,
    In,
    Fun,
    If,
    Then,
    Else,
    While,
    Do,
    Done,
    For,
    To,
    True,
    False,
    Begin,
    End,
    Mod,
    // punctuation
    LParen,
    RParen,
    ArrayOpen,  // [|
    ArrayClose, // |]
    Semi,
    SemiSemi,
    Comma,
    Arrow,     // ->
    LeftArrow, // <-
    DotLParen, // .(
    Equal,
    NotEqual, // <>
    Less,
    LessEq,
    Greater,
    GreaterEq,
    Plus,
    Minus,
    Star,
    Slash,
    PlusDot,
    MinusDot,
    StarDot,
    SlashDot,
    AndAnd,
    OrOr,
    Underscore,
    Hash,
    Eof,
}

impl Token {
    pub fn describe(&self) -> String {
        match self {
            Token::Int(n) => n.to_string(),
            Token::IntMinMagnitude => "4611686018427387904".into(),
            Token::Float(f) => f.to_string(),
            Token::Str(_) => "string literal".into(),
            Token::Ident(s) => s.clone(),
            Token::Eof => "end of input".into(),
            other => format!("{:?}", other),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spanned {
    pub token: Token,
    pub span: Span,
}

pub const MAX_INT: i64 = (1 << 62) - 1;

pub fn tokenize(src: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let mut lexer = Lexer {
        src: src.as_bytes(),
        text: src,
        pos: 0,
    };
    let mut out = Vec::new();
    loop {
        let tok = lexer.next_token()?;
        let done = tok.token == Token::Eof;
        out.push(tok);
        if done {
            return Ok(out);
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn peek(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn skip_trivia(&mut self) -> Result<(), SyntaxError> {
        loop {
            match self.peek(0) {
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(b'(') if self.peek(1) == Some(b'*') => self.skip_comment()?,
                _ => return Ok(()),
            }
        }
    }

    fn skip_comment(&mut self) -> Result<(), SyntaxError> {
        let start = self.pos;
        let mut depth = 0usize;
        while self.pos < self.src.len() {
            if self.peek(0) == Some(b'(') && self.peek(1) == Some(b'*') {
                depth += 1;
                self.pos += 2;
            } else if self.peek(0) == Some(b'*') && self.peek(1) == Some(b')') {
                depth -= 1;
                self.pos += 2;
                if depth == 0 {
                    return Ok(());
                }
            } else if self.peek(0) == Some(b'"') {
                // string literals inside comments are skipped as a unit
                self.pos += 1;
                while let Some(c) = self.peek(0) {
                    self.pos += 1;
                    if c == b'\\' {
                        self.pos += 1;
                    } else if c == b'"' {
                        break;
                    }
                }
            } else {
                self.pos += 1;
            }
        }
        Err(SyntaxError::incomplete(
            Span::new(start, self.src.len()),
            "unterminated comment",
        ))
    }

    fn next_token(&mut self) -> Result<Spanned, SyntaxError> {
        self.skip_trivia()?;
        let start = self.pos;
        let Some(c) = self.peek(0) else {
            return Ok(Spanned {
                token: Token::Eof,
                span: Span::new(start, start),
            });
        };
        let token = if c.is_ascii_digit() {
            self.number()?
        } else if c.is_ascii_alphabetic() || c == b'_' {
            self.word()
        } else if c == b'"' {
            self.string()?
        } else {
            self.symbol()?
        };
        Ok(Spanned {
            token,
            span: Span::new(start, self.pos),
        })
    }

    fn number(&mut self) -> Result<Token, SyntaxError> {
        let start = self.pos;
        while matches!(self.peek(0), Some(c) if c.is_ascii_digit() || c == b'_') {
            self.pos += 1;
        }
        let mut is_float = false;
        if self.peek(0) == Some(b'.') && self.peek(1) != Some(b'(') {
            is_float = true;
            self.pos += 1;
            while matches!(self.peek(0), Some(c) if c.is_ascii_digit() || c == b'_') {
                self.pos += 1;
            }
        }
        if matches!(self.peek(0), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(0), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(0), Some(c) if c.is_ascii_digit()) {
                is_float = true;
                while matches!(self.peek(0), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.text[start..self.pos]
            .chars()
            .filter(|&c| c != '_')
            .collect();
        let span = Span::new(start, self.pos);
        if is_float {
            text.parse::<f64>()
                .map(Token::Float)
                .map_err(|_| SyntaxError::new(span, "malformed float literal"))
        } else {
            match text.parse::<i64>() {
                Ok(n) if n <= MAX_INT => Ok(Token::Int(n)),
                Ok(n) if n == MAX_INT + 1 => Ok(Token::IntMinMagnitude),
                _ => Err(SyntaxError::new(
                    span,
                    "integer literal exceeds the range of representable integers",
                )),
            }
        }
    }

    fn word(&mut self) -> Token {
        let start = self.pos;
        while matches!(self.peek(0), Some(c) if c.is_ascii_alphanumeric() || c == b'_' || c == b'\'')
        {
            self.pos += 1;
        }
        match &self.text[start..self.pos] {
            "let" => Token::Let,
            "rec" => Token::Rec,
            "in" => Token::In,
            "fun" => Token::Fun,
            "if" => Token::If,
            "then" => Token::Then,
            "else" => Token::Else,
            "while" => Token::While,
            "do" => Token::Do,
            "done" => Token::Done,
            "for" => Token::For,
            "to" => Token::To,
            "true" => Token::True,
            "false" => Token::False,
            "begin" => Token::Begin,
            "end" => Token::End,
            "mod" => Token::Mod,
            "_" => Token::Underscore,
            w => Token::Ident(w.to_string()),
        }
    }

    fn string(&mut self) -> Result<Token, SyntaxError> {
        let start = self.pos;
        self.pos += 1;
        let mut bytes = Vec::new();
        loop {
            let Some(c) = self.peek(0) else {
                return Err(SyntaxError::incomplete(
                    Span::new(start, self.pos),
                    "unterminated string literal",
                ));
            };
            self.pos += 1;
            match c {
                b'"' => break,
                b'\\' => {
                    let esc = self.peek(0).ok_or_else(|| {
                        SyntaxError::incomplete(
                            Span::new(start, self.pos),
                            "unterminated string literal",
                        )
                    })?;
                    self.pos += 1;
                    bytes.push(match esc {
                        b'n' => b'\n',
                        b't' => b'\t',
                        b'r' => b'\r',
                        b'b' => 8,
                        b'\\' => b'\\',
                        b'"' => b'"',
                        b'\'' => b'\'',
                        b' ' => b' ',
                        _ => {
                            return Err(SyntaxError::new(
                                Span::new(self.pos - 2, self.pos),
                                "illegal escape sequence in string",
                            ))
                        }
                    });
                }
                _ => bytes.push(c),
            }
        }
        // the source is valid UTF-8 and escapes only produce ASCII
        Ok(Token::Str(
            String::from_utf8(bytes).expect("string literal is UTF-8"),
        ))
    }

    fn symbol(&mut self) -> Result<Token, SyntaxError> {
        let two = (self.peek(0).unwrap(), self.peek(1).unwrap_or(0));
        let (tok, len) = match two {
            (b';', b';') => (Token::SemiSemi, 2),
            (b'[', b'|') => (Token::ArrayOpen, 2),
            (b'|', b']') => (Token::ArrayClose, 2),
            (b'|', b'|') => (Token::OrOr, 2),
            (b'&', b'&') => (Token::AndAnd, 2),
            (b'-', b'>') => (Token::Arrow, 2),
            (b'<', b'-') => (Token::LeftArrow, 2),
            (b'<', b'>') => (Token::NotEqual, 2),
            (b'<', b'=') => (Token::LessEq, 2),
            (b'>', b'=') => (Token::GreaterEq, 2),
            (b'.', b'(') => (Token::DotLParen, 2),
            (b'+', b'.') => (Token::PlusDot, 2),
            (b'-', b'.') => (Token::MinusDot, 2),
            (b'*', b'.') => (Token::StarDot, 2),
            (b'/', b'.') => (Token::SlashDot, 2),
            (b'(', _) => (Token::LParen, 1),
            (b')', _) => (Token::RParen, 1),
            (b';', _) => (Token::Semi, 1),
            (b',', _) => (Token::Comma, 1),
            (b'=', _) => (Token::Equal, 1),
            (b'<', _) => (Token::Less, 1),
            (b'>', _) => (Token::Greater, 1),
            (b'+', _) => (Token::Plus, 1),
            (b'-', _) => (Token::Minus, 1),
            (b'*', _) => (Token::Star, 1),
            (b'/', _) => (Token::Slash, 1),
            (b'#', _) => (Token::Hash, 1),
            _ => {
                let ch = self.text[self.pos..].chars().next().unwrap();
                return Err(SyntaxError::new(
                    Span::new(self.pos, self.pos + ch.len_utf8()),
                    format!("illegal character {:?}", ch),
                ));
            }
        };
        self.pos += len;
        Ok(tok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Token> {
        tokenize(s).unwrap().into_iter().map(|t| t.token).collect()
    }

    #[test]
    fn nested_comments_are_skipped() {
        assert_eq!(
            toks("1 (* a (* b *) c *) 2"),
            vec![Token::Int(1), Token::Int(2), Token::Eof]
        );
    }

    #[test]
    fn float_forms() {
        assert_eq!(
            toks("1.5 2. 1e3 7"),
            vec![
                Token::Float(1.5),
                Token::Float(2.0),
                Token::Float(1000.0),
                Token::Int(7),
                Token::Eof
            ]
        );
    }

    #[test]
    fn array_index_is_not_a_float() {
        assert_eq!(
            toks("a.(1)"),
            vec![
                Token::Ident("a".into()),
                Token::DotLParen,
                Token::Int(1),
                Token::RParen,
                Token::Eof
            ]
        );
    }

    #[test]
    fn unterminated_comment_needs_more_input() {
        let err = tokenize("1 (* oops").unwrap_err();
        assert!(err.incomplete);
    }

    #[test]
    fn string_escapes() {
        assert_eq!(toks(r#""a\n\"b""#)[0], Token::Str("a\n\"b".into()));
    }

    #[test]
    fn oversized_literal_is_rejected() {
        assert!(tokenize("99999999999999999999").is_err());
        assert_eq!(toks("4611686018427387903")[0], Token::Int(MAX_INT));
    }
}
