//! Recursive-descent parser for MiniML phrases.
//!
//! Precedence, loosest first: `let`/`fun`/`if`, `;`, `<-`, `,`, `||`, `&&`,
//! comparisons, additive, multiplicative, unary minus, application, `.( )`.

use super::ast::*;
use super::lexer::{tokenize, Spanned, Token};
use super::{Span, SyntaxError};

/// Parses one phrase. The text must end with `;;`; a phrase without its
/// terminator reports an incomplete-input error so a REPL can keep reading.
pub fn parse_phrase(src: &str) -> Result<Ast, SyntaxError> {
    let tokens = tokenize(src)?;
    let terminators = tokens.iter().filter(|t| t.token == Token::SemiSemi).count();
    if terminators == 0 {
        let end = src.len();
        if src.trim().is_empty() {
            return Err(SyntaxError::incomplete(Span::new(0, end), "empty phrase"));
        }
        return Err(SyntaxError::incomplete(
            Span::new(end, end),
            "phrase is not terminated by `;;`",
        ));
    }
    let mut p = Parser { tokens, pos: 0 };
    let ast = p.phrase()?;
    p.expect(Token::SemiSemi, "`;;`")?;
    if p.peek() != &Token::Eof {
        return Err(SyntaxError::new(p.span(), "unexpected input after `;;`"));
    }
    Ok(ast)
}

/// Parses a standalone expression (no terminator), used by tests and tools.
pub fn parse_expr(src: &str) -> Result<Expr, SyntaxError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.seq_expr()?;
    if p.peek() != &Token::Eof {
        return Err(SyntaxError::new(
            p.span(),
            format!("unexpected {}", p.peek().describe()),
        ));
    }
    Ok(e)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].token
    }

    fn peek_at(&self, off: usize) -> &Token {
        let i = (self.pos + off).min(self.tokens.len() - 1);
        &self.tokens[i].token
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.tokens[self.pos - 1].span.end
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].token.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Token) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Token, what: &str) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &str) -> SyntaxError {
        let msg = format!("expected {} but found {}", what, self.peek().describe());
        if self.peek() == &Token::Eof {
            SyntaxError::incomplete(self.span(), msg)
        } else {
            SyntaxError::new(self.span(), msg)
        }
    }

    fn phrase(&mut self) -> PResult<Ast> {
        if self.peek() == &Token::Let {
            let start = self.span().start;
            self.bump();
            let rec = self.eat(&Token::Rec);
            let (pat, bound) = self.binding(rec)?;
            if self.eat(&Token::In) {
                let body = self.seq_expr()?;
                let span = Span::new(start, body.span.end);
                let e = Expr::new(
                    ExprKind::Let {
                        rec,
                        pat,
                        bound: Box::new(bound),
                        body: Box::new(body),
                    },
                    span,
                );
                return Ok(Ast::Expr(e));
            }
            let span = Span::new(start, self.prev_end());
            return Ok(Ast::Def {
                rec,
                pat,
                expr: bound,
                span,
            });
        }
        Ok(Ast::Expr(self.seq_expr()?))
    }

    /// `pat = e` or `f p1 .. pn = e` (sugar for `f = fun p1 .. pn -> e`).
    fn binding(&mut self, rec: bool) -> PResult<(Pattern, Expr)> {
        let pat = self.let_pattern()?;
        let mut params = Vec::new();
        while self.peek() != &Token::Equal {
            if !self.starts_simple_pattern() {
                return Err(self.unexpected("`=`"));
            }
            params.push(self.simple_pattern()?);
        }
        self.bump();
        let body = self.seq_expr()?;
        if !params.is_empty() {
            if !matches!(pat, Pattern::Var(..)) {
                return Err(SyntaxError::new(
                    pat.span(),
                    "only a name can be given parameters",
                ));
            }
            let span = Span::new(params[0].span().start, body.span.end);
            return Ok((pat, Expr::new(ExprKind::Fun(params, Box::new(body)), span)));
        }
        if rec && !matches!(pat, Pattern::Var(..)) {
            return Err(SyntaxError::new(
                pat.span(),
                "`let rec` must bind a single name",
            ));
        }
        Ok((pat, body))
    }

    fn let_pattern(&mut self) -> PResult<Pattern> {
        let first = self.simple_pattern()?;
        if self.peek() != &Token::Comma {
            return Ok(first);
        }
        let start = first.span().start;
        let mut items = vec![first];
        while self.eat(&Token::Comma) {
            items.push(self.simple_pattern()?);
        }
        Ok(Pattern::Tuple(items, Span::new(start, self.prev_end())))
    }

    fn starts_simple_pattern(&self) -> bool {
        matches!(
            self.peek(),
            Token::Ident(_) | Token::Underscore | Token::LParen
        )
    }

    fn simple_pattern(&mut self) -> PResult<Pattern> {
        let span = self.span();
        match self.peek().clone() {
            Token::Ident(n) => {
                self.bump();
                Ok(Pattern::Var(n, span))
            }
            Token::Underscore => {
                self.bump();
                Ok(Pattern::Wildcard(span))
            }
            Token::LParen => {
                self.bump();
                if self.eat(&Token::RParen) {
                    return Ok(Pattern::Unit(Span::new(span.start, self.prev_end())));
                }
                let inner = self.let_pattern()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(match inner {
                    Pattern::Tuple(items, _) => {
                        Pattern::Tuple(items, Span::new(span.start, self.prev_end()))
                    }
                    p => p,
                })
            }
            _ => Err(self.unexpected("a pattern")),
        }
    }

    fn ends_seq(&self) -> bool {
        matches!(
            self.peek(),
            Token::Done
                | Token::RParen
                | Token::End
                | Token::SemiSemi
                | Token::In
                | Token::Then
                | Token::Else
                | Token::ArrayClose
                | Token::Do
                | Token::To
                | Token::Eof
        )
    }

    fn seq_expr(&mut self) -> PResult<Expr> {
        let first = self.expr()?;
        if self.peek() == &Token::Semi {
            self.bump();
            if self.ends_seq() {
                return Ok(first);
            }
            let rest = self.seq_expr()?;
            let span = Span::new(first.span.start, rest.span.end);
            return Ok(Expr::new(
                ExprKind::Seq(Box::new(first), Box::new(rest)),
                span,
            ));
        }
        Ok(first)
    }

    /// Expression without a top-level sequence.
    fn expr(&mut self) -> PResult<Expr> {
        let start = self.span().start;
        match self.peek() {
            Token::Let => {
                self.bump();
                let rec = self.eat(&Token::Rec);
                let (pat, bound) = self.binding(rec)?;
                self.expect(Token::In, "`in`")?;
                let body = self.seq_expr()?;
                let span = Span::new(start, body.span.end);
                Ok(Expr::new(
                    ExprKind::Let {
                        rec,
                        pat,
                        bound: Box::new(bound),
                        body: Box::new(body),
                    },
                    span,
                ))
            }
            Token::Fun => {
                self.bump();
                let mut params = vec![self.simple_pattern()?];
                while self.peek() != &Token::Arrow {
                    if !self.starts_simple_pattern() {
                        return Err(self.unexpected("`->`"));
                    }
                    params.push(self.simple_pattern()?);
                }
                self.bump();
                let body = self.seq_expr()?;
                let span = Span::new(start, body.span.end);
                Ok(Expr::new(ExprKind::Fun(params, Box::new(body)), span))
            }
            Token::If => {
                self.bump();
                let c = self.seq_expr()?;
                self.expect(Token::Then, "`then`")?;
                let t = self.expr()?;
                let e = if self.eat(&Token::Else) {
                    Some(Box::new(self.expr()?))
                } else {
                    None
                };
                let end = e.as_ref().map(|e| e.span.end).unwrap_or(t.span.end);
                Ok(Expr::new(
                    ExprKind::If(Box::new(c), Box::new(t), e),
                    Span::new(start, end),
                ))
            }
            _ => self.assign(),
        }
    }

    fn assign(&mut self) -> PResult<Expr> {
        let lhs = self.tuple()?;
        if self.peek() == &Token::LeftArrow {
            let arrow = self.span();
            self.bump();
            let rhs = self.expr()?;
            let span = Span::new(lhs.span.start, rhs.span.end);
            return match lhs.kind {
                ExprKind::Index(a, i) => Ok(Expr::new(ExprKind::Assign(a, i, Box::new(rhs)), span)),
                _ => Err(SyntaxError::new(
                    arrow,
                    "`<-` needs an array element `a.(i)` on its left",
                )),
            };
        }
        Ok(lhs)
    }

    fn tuple(&mut self) -> PResult<Expr> {
        let first = self.operand(Self::or_expr)?;
        if self.peek() != &Token::Comma {
            return Ok(first);
        }
        let start = first.span.start;
        let mut items = vec![first];
        while self.eat(&Token::Comma) {
            items.push(self.operand(Self::or_expr)?);
        }
        let span = Span::new(start, self.prev_end());
        Ok(Expr::new(ExprKind::Tuple(items), span))
    }

    /// Operands may be an unparenthesized `let`, `fun` or `if`, which then
    /// extends as far right as possible.
    fn operand(&mut self, next: fn(&mut Self) -> PResult<Expr>) -> PResult<Expr> {
        if matches!(self.peek(), Token::Let | Token::Fun | Token::If) {
            self.expr()
        } else {
            next(self)
        }
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let lhs = self.and_expr()?;
        if self.eat(&Token::OrOr) {
            let rhs = self.operand(Self::or_expr)?;
            return Ok(binop(BinOp::Or, lhs, rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let lhs = self.cmp_expr()?;
        if self.eat(&Token::AndAnd) {
            let rhs = self.operand(Self::and_expr)?;
            return Ok(binop(BinOp::And, lhs, rhs));
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.add_expr()?;
        loop {
            let op = match self.peek() {
                Token::Equal => BinOp::Eq,
                Token::NotEqual => BinOp::Ne,
                Token::Less => BinOp::Lt,
                Token::LessEq => BinOp::Le,
                Token::Greater => BinOp::Gt,
                Token::GreaterEq => BinOp::Ge,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.operand(Self::add_expr)?;
            lhs = binop(op, lhs, rhs);
        }
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                Token::PlusDot => BinOp::FAdd,
                Token::MinusDot => BinOp::FSub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.operand(Self::mul_expr)?;
            lhs = binop(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                Token::Mod => BinOp::Mod,
                Token::StarDot => BinOp::FMul,
                Token::SlashDot => BinOp::FDiv,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.operand(Self::unary)?;
            lhs = binop(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span().start;
        match self.peek() {
            Token::Minus => {
                self.bump();
                match self.peek().clone() {
                    Token::Int(n) if !self.literal_is_applied() => {
                        let end = self.span().end;
                        self.bump();
                        Ok(Expr::new(ExprKind::Int(-n), Span::new(start, end)))
                    }
                    Token::IntMinMagnitude => {
                        let end = self.span().end;
                        self.bump();
                        Ok(Expr::new(
                            ExprKind::Int(i64::MIN >> 1),
                            Span::new(start, end),
                        ))
                    }
                    Token::Float(f) if !self.literal_is_applied() => {
                        let end = self.span().end;
                        self.bump();
                        Ok(Expr::new(ExprKind::Float(-f), Span::new(start, end)))
                    }
                    _ => {
                        let e = self.operand(Self::unary)?;
                        let span = Span::new(start, e.span.end);
                        Ok(Expr::new(ExprKind::UnOp(UnOp::Neg, Box::new(e)), span))
                    }
                }
            }
            Token::MinusDot => {
                self.bump();
                match self.peek().clone() {
                    Token::Float(f) if !self.literal_is_applied() => {
                        let end = self.span().end;
                        self.bump();
                        Ok(Expr::new(ExprKind::Float(-f), Span::new(start, end)))
                    }
                    _ => {
                        let e = self.operand(Self::unary)?;
                        let span = Span::new(start, e.span.end);
                        Ok(Expr::new(ExprKind::UnOp(UnOp::FNeg, Box::new(e)), span))
                    }
                }
            }
            Token::IntMinMagnitude => Err(SyntaxError::new(
                self.span(),
                "integer literal exceeds the range of representable integers",
            )),
            _ => self.app(),
        }
    }

    /// `-1.(0)` style oddities aside, a literal directly followed by `.(`
    /// would be indexed, so the minus must not be folded into it.
    fn literal_is_applied(&self) -> bool {
        matches!(self.peek_at(1), Token::DotLParen)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Token::Int(_)
                | Token::Float(_)
                | Token::Str(_)
                | Token::True
                | Token::False
                | Token::Ident(_)
                | Token::LParen
                | Token::Begin
                | Token::ArrayOpen
                | Token::While
                | Token::For
        )
    }

    fn app(&mut self) -> PResult<Expr> {
        let head = self.postfix()?;
        let mut args = Vec::new();
        while self.starts_atom() {
            args.push(self.postfix()?);
        }
        if args.is_empty() {
            return Ok(head);
        }
        let span = Span::new(head.span.start, args.last().unwrap().span.end);
        Ok(Expr::new(ExprKind::App(Box::new(head), args), span))
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.atom()?;
        while self.peek() == &Token::DotLParen {
            self.bump();
            let idx = self.seq_expr()?;
            self.expect(Token::RParen, "`)`")?;
            let span = Span::new(e.span.start, self.prev_end());
            e = Expr::new(ExprKind::Index(Box::new(e), Box::new(idx)), span);
        }
        Ok(e)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let span = self.span();
        let start = span.start;
        let kind = match self.peek().clone() {
            Token::Int(n) => {
                self.bump();
                ExprKind::Int(n)
            }
            Token::Float(f) => {
                self.bump();
                ExprKind::Float(f)
            }
            Token::Str(s) => {
                self.bump();
                ExprKind::Str(s)
            }
            Token::True => {
                self.bump();
                ExprKind::Bool(true)
            }
            Token::False => {
                self.bump();
                ExprKind::Bool(false)
            }
            Token::Ident(n) => {
                self.bump();
                ExprKind::Var(n)
            }
            Token::LParen => {
                self.bump();
                if self.eat(&Token::RParen) {
                    ExprKind::Unit
                } else {
                    let inner = self.seq_expr()?;
                    self.expect(Token::RParen, "`)`")?;
                    return Ok(Expr::new(inner.kind, Span::new(start, self.prev_end())));
                }
            }
            Token::Begin => {
                self.bump();
                if self.eat(&Token::End) {
                    ExprKind::Unit
                } else {
                    let inner = self.seq_expr()?;
                    self.expect(Token::End, "`end`")?;
                    return Ok(Expr::new(inner.kind, Span::new(start, self.prev_end())));
                }
            }
            Token::ArrayOpen => {
                self.bump();
                let mut items = Vec::new();
                while self.peek() != &Token::ArrayClose {
                    items.push(self.expr()?);
                    if !self.eat(&Token::Semi) {
                        break;
                    }
                }
                self.expect(Token::ArrayClose, "`|]`")?;
                ExprKind::Array(items)
            }
            Token::While => {
                self.bump();
                let c = self.seq_expr()?;
                self.expect(Token::Do, "`do`")?;
                let body = if self.peek() == &Token::Done {
                    Expr::new(ExprKind::Unit, self.span())
                } else {
                    self.seq_expr()?
                };
                self.expect(Token::Done, "`done`")?;
                ExprKind::While(Box::new(c), Box::new(body))
            }
            Token::For => {
                self.bump();
                let var = match self.bump() {
                    Token::Ident(n) => n,
                    _ => {
                        self.pos -= 1;
                        return Err(self.unexpected("a loop variable"));
                    }
                };
                self.expect(Token::Equal, "`=`")?;
                let lo = self.seq_expr()?;
                self.expect(Token::To, "`to`")?;
                let hi = self.seq_expr()?;
                self.expect(Token::Do, "`do`")?;
                let body = if self.peek() == &Token::Done {
                    Expr::new(ExprKind::Unit, self.span())
                } else {
                    self.seq_expr()?
                };
                self.expect(Token::Done, "`done`")?;
                ExprKind::For {
                    var,
                    lo: Box::new(lo),
                    hi: Box::new(hi),
                    body: Box::new(body),
                }
            }
            _ => return Err(self.unexpected("an expression")),
        };
        Ok(Expr::new(kind, Span::new(start, self.prev_end())))
    }
}

fn binop(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = Span::new(lhs.span.start, rhs.span.end);
    Expr::new(ExprKind::BinOp(op, Box::new(lhs), Box::new(rhs)), span)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr_of(src: &str) -> Expr {
        match parse_phrase(src).unwrap() {
            Ast::Expr(e) => e,
            other => panic!("expected expression, got {:?}", other),
        }
    }

    #[test]
    fn addition_is_a_binop_of_literals() {
        let e = expr_of("1 + 2;;");
        match e.kind {
            ExprKind::BinOp(BinOp::Add, a, b) => {
                assert!(matches!(a.kind, ExprKind::Int(1)));
                assert!(matches!(b.kind, ExprKind::Int(2)));
            }
            k => panic!("{:?}", k),
        }
    }

    #[test]
    fn function_definition_sugar() {
        match parse_phrase("let f x = x;;").unwrap() {
            Ast::Def {
                rec: false,
                pat: Pattern::Var(name, _),
                expr,
                ..
            } => {
                assert_eq!(name, "f");
                match expr.kind {
                    ExprKind::Fun(params, body) => {
                        assert!(matches!(&params[..], [Pattern::Var(x, _)] if x == "x"));
                        assert!(matches!(body.kind, ExprKind::Var(ref v) if v == "x"));
                    }
                    k => panic!("{:?}", k),
                }
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn missing_expression_points_at_terminator() {
        let src = "let x = ;;";
        let err = parse_phrase(src).unwrap_err();
        assert!(!err.incomplete);
        assert_eq!(err.span, Span::new(8, 10));
    }

    #[test]
    fn unterminated_phrase_asks_for_more() {
        let err = parse_phrase("let x = 1").unwrap_err();
        assert!(err.incomplete);
        let err = parse_phrase("let f x =\n  if x then").unwrap_err();
        assert!(err.incomplete);
    }

    #[test]
    fn application_binds_tighter_than_operators() {
        let e = expr_of("f x + g y z;;");
        match e.kind {
            ExprKind::BinOp(BinOp::Add, a, b) => {
                assert!(matches!(a.kind, ExprKind::App(_, ref args) if args.len() == 1));
                assert!(matches!(b.kind, ExprKind::App(_, ref args) if args.len() == 2));
            }
            k => panic!("{:?}", k),
        }
    }

    #[test]
    fn sequence_is_looser_than_if() {
        let e = expr_of("if c then f 1; g 2;;");
        assert!(matches!(e.kind, ExprKind::Seq(ref a, _) if matches!(a.kind, ExprKind::If(..))));
    }

    #[test]
    fn array_assignment() {
        let e = expr_of("a.(i + 1) <- 2.5;;");
        assert!(matches!(e.kind, ExprKind::Assign(..)));
        assert!(parse_phrase("x <- 1;;").is_err());
    }

    #[test]
    fn tuple_pattern_definition() {
        match parse_phrase("let (a, b) = p;;").unwrap() {
            Ast::Def {
                pat: Pattern::Tuple(items, _),
                ..
            } => assert_eq!(items.len(), 2),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn negative_literals_fold() {
        assert!(matches!(expr_of("-5;;").kind, ExprKind::Int(-5)));
        assert!(
            matches!(expr_of("-4611686018427387904;;").kind, ExprKind::Int(n) if n == -(1 << 62))
        );
        assert!(matches!(
            expr_of("1 - 5;;").kind,
            ExprKind::BinOp(BinOp::Sub, ..)
        ));
    }

    #[test]
    fn loops_and_arrays() {
        let e = expr_of("for i = 0 to 9 do a.(i) <- [| 1; 2 |] done;;");
        assert!(matches!(e.kind, ExprKind::For { .. }));
        let e = expr_of("while x > 0 do () done;;");
        assert!(matches!(e.kind, ExprKind::While(..)));
    }

    #[test]
    fn trailing_input_after_terminator_is_rejected() {
        assert!(parse_phrase("1;; 2;;").is_err());
    }
}
