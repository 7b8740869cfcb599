//! Recursive-descent parser for the statement language.
//!
//! Grammar (keywords case-insensitive, variables case-sensitive):
//!
//! ```text
//! formula := modal '(' agent ',' inner ')'
//! modal   := 'believes' | 'knows' | 'certain'
//! inner   := and_expr ('or' and_expr)*
//! and_expr:= unary ('and' unary)*
//! unary   := 'not' unary
//!          | 'exists' VAR '.' inner        (extends greedily right)
//!          | '(' inner ')'
//!          | atom
//! atom    := 'inside' '(' keyterm ',' BOX ')'
//!          | 'iscolor' '(' keyterm ',' COLOR ')'
//!          | 'empty' '(' BOX ')'
//! keyterm := VAR | COLOR
//! BOX     := 'box' DIGITS      (1-based)
//! ```

use std::str::FromStr;

use super::{BoxId, EpistemicFormula, InnerFormula, KeyTerm, Modal};
use crate::error::{Error, Result};
use crate::grid::KeyColor;

const KEYWORDS: &[&str] = &[
    "believes", "knows", "certain", "and", "or", "not", "exists", "inside", "iscolor", "empty",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Dot,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
        }
    }
}

#[derive(Clone)]
struct Token {
    tok: Tok,
    /// 1-based character position in the source.
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let pos = i + 1;
        match c {
            '(' => {
                tokens.push(Token { tok: Tok::LParen, pos });
                i += 1;
            }
            ')' => {
                tokens.push(Token { tok: Tok::RParen, pos });
                i += 1;
            }
            ',' => {
                tokens.push(Token { tok: Tok::Comma, pos });
                i += 1;
            }
            '.' => {
                tokens.push(Token { tok: Tok::Dot, pos });
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                tokens.push(Token {
                    tok: Tok::Ident(word),
                    pos,
                });
            }
            other => {
                return Err(Error::FormulaParse {
                    pos,
                    msg: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    cursor: usize,
    end_pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor)
    }

    fn here(&self) -> usize {
        self.peek().map(|t| t.pos).unwrap_or(self.end_pos)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.cursor).cloned()?;
        self.cursor += 1;
        Some(t)
    }

    fn fail<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T> {
        Err(Error::FormulaParse {
            pos,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, want: Tok, context: &str) -> Result<usize> {
        let pos = self.here();
        match self.advance() {
            Some(t) if t.tok == want => Ok(t.pos),
            Some(t) => self.fail(
                pos,
                format!(
                    "expected {} {context}, found {}",
                    want.describe(),
                    t.tok.describe()
                ),
            ),
            None => self.fail(
                pos,
                format!("expected {} {context}, found end of input", want.describe()),
            ),
        }
    }

    fn expect_ident(&mut self, context: &str) -> Result<(String, usize)> {
        let pos = self.here();
        match self.advance() {
            Some(Token {
                tok: Tok::Ident(s),
                pos,
            }) => Ok((s, pos)),
            Some(t) => self.fail(pos, format!("expected {context}, found {}", t.tok.describe())),
            None => self.fail(pos, format!("expected {context}, found end of input")),
        }
    }

    /// Consumes the next token if it is the given keyword (case-insensitive).
    fn eat_keyword(&mut self, word: &str) -> bool {
        let found = matches!(
            self.peek(),
            Some(Token { tok: Tok::Ident(s), .. }) if s.eq_ignore_ascii_case(word)
        );
        if found {
            self.cursor += 1;
        }
        found
    }

    fn parse_formula(&mut self) -> Result<EpistemicFormula> {
        let (modal_word, modal_pos) = self.expect_ident("a modal (believes/knows/certain)")?;
        let modal = match modal_word.to_ascii_lowercase().as_str() {
            "believes" => Modal::Believes,
            "knows" => Modal::Knows,
            "certain" => Modal::Certain,
            _ => {
                return self.fail(
                    modal_pos,
                    format!("unknown modal `{modal_word}` (expected believes, knows, or certain)"),
                );
            }
        };
        self.expect(Tok::LParen, "after the modal")?;
        let (agent, agent_pos) = self.expect_ident("an agent name")?;
        if is_keyword(&agent) {
            return self.fail(agent_pos, format!("`{agent}` cannot be an agent name"));
        }
        self.expect(Tok::Comma, "after the agent")?;
        let inner = self.parse_or()?;
        self.expect(Tok::RParen, "to close the statement")?;
        if let Some(extra) = self.peek() {
            let found = extra.tok.describe();
            return self.fail(extra.pos, format!("unexpected {found} after the statement"));
        }
        Ok(EpistemicFormula {
            modal,
            agent,
            inner,
        })
    }

    fn parse_or(&mut self) -> Result<InnerFormula> {
        let mut left = self.parse_and()?;
        while self.eat_keyword("or") {
            let right = self.parse_and()?;
            left = InnerFormula::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<InnerFormula> {
        let mut left = self.parse_unary()?;
        while self.eat_keyword("and") {
            let right = self.parse_unary()?;
            left = InnerFormula::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<InnerFormula> {
        if self.eat_keyword("not") {
            let operand = self.parse_unary()?;
            return Ok(InnerFormula::Not(Box::new(operand)));
        }
        if self.eat_keyword("exists") {
            let (var, var_pos) = self.expect_ident("a variable after `exists`")?;
            if is_keyword(&var) || KeyColor::from_str(&var).is_ok() || parse_box_name(&var).is_some()
            {
                return self.fail(var_pos, format!("`{var}` cannot be a variable name"));
            }
            self.expect(Tok::Dot, "after the `exists` variable")?;
            let body = self.parse_or()?;
            return Ok(InnerFormula::Exists(var, Box::new(body)));
        }
        if let Some(Token {
            tok: Tok::LParen, ..
        }) = self.peek()
        {
            self.advance();
            let inner = self.parse_or()?;
            self.expect(Tok::RParen, "to close the group")?;
            return Ok(inner);
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<InnerFormula> {
        let (name, pos) = self.expect_ident("an atom (inside/iscolor/empty)")?;
        match name.to_ascii_lowercase().as_str() {
            "inside" => {
                self.expect(Tok::LParen, "after `inside`")?;
                let term = self.parse_keyterm()?;
                self.expect(Tok::Comma, "between the key term and the box")?;
                let b = self.parse_box()?;
                self.expect(Tok::RParen, "to close `inside`")?;
                Ok(InnerFormula::Inside(term, b))
            }
            "iscolor" => {
                self.expect(Tok::LParen, "after `iscolor`")?;
                let term = self.parse_keyterm()?;
                self.expect(Tok::Comma, "between the key term and the color")?;
                let (color_word, color_pos) = self.expect_ident("a color")?;
                let color = KeyColor::from_str(&color_word)
                    .map_err(|_| Error::FormulaParse {
                        pos: color_pos,
                        msg: format!("unknown color `{color_word}`"),
                    })?;
                self.expect(Tok::RParen, "to close `iscolor`")?;
                Ok(InnerFormula::IsColor(term, color))
            }
            "empty" => {
                self.expect(Tok::LParen, "after `empty`")?;
                let b = self.parse_box()?;
                self.expect(Tok::RParen, "to close `empty`")?;
                Ok(InnerFormula::Empty(b))
            }
            _ => self.fail(
                pos,
                format!("expected an atom (inside/iscolor/empty), found `{name}`"),
            ),
        }
    }

    fn parse_keyterm(&mut self) -> Result<KeyTerm> {
        let (word, pos) = self.expect_ident("a key term (variable or color)")?;
        if let Ok(color) = KeyColor::from_str(&word) {
            return Ok(KeyTerm::Color(color));
        }
        if parse_box_name(&word).is_some() {
            return self.fail(pos, format!("`{word}` is a box, not a key term"));
        }
        if is_keyword(&word) {
            return self.fail(pos, format!("`{word}` cannot be a variable name"));
        }
        Ok(KeyTerm::Var(word))
    }

    fn parse_box(&mut self) -> Result<BoxId> {
        let (word, pos) = self.expect_ident("a box (box1, box2, ...)")?;
        match parse_box_name(&word) {
            Some(b) => Ok(b),
            None => self.fail(pos, format!("expected a box (box1, box2, ...), found `{word}`")),
        }
    }
}

fn is_keyword(word: &str) -> bool {
    let lower = word.to_ascii_lowercase();
    KEYWORDS.contains(&lower.as_str())
}

fn parse_box_name(word: &str) -> Option<BoxId> {
    let rest = word
        .strip_prefix("box")
        .or_else(|| word.strip_prefix("Box"))
        .or_else(|| word.strip_prefix("BOX"))?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n: usize = rest.parse().ok()?;
    if n == 0 {
        return None;
    }
    Some(BoxId(n - 1))
}

fn check_bound(formula: &InnerFormula, scope: &mut Vec<String>) -> Result<()> {
    let check_term = |term: &KeyTerm, scope: &[String]| -> Result<()> {
        if let KeyTerm::Var(name) = term {
            if !scope.iter().any(|bound| bound == name) {
                return Err(Error::UnboundVariable(name.clone()));
            }
        }
        Ok(())
    };
    match formula {
        InnerFormula::Inside(term, _) | InnerFormula::IsColor(term, _) => check_term(term, scope),
        InnerFormula::Empty(_) => Ok(()),
        InnerFormula::Not(inner) => check_bound(inner, scope),
        InnerFormula::And(l, r) | InnerFormula::Or(l, r) => {
            check_bound(l, scope)?;
            check_bound(r, scope)
        }
        InnerFormula::Exists(var, body) => {
            scope.push(var.clone());
            let result = check_bound(body, scope);
            scope.pop();
            result
        }
    }
}

/// Parses a statement. Errors carry the 1-based character position.
pub fn parse(text: &str) -> Result<EpistemicFormula> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        end_pos: text.chars().count() + 1,
    };
    let formula = parser.parse_formula()?;
    check_bound(&formula.inner, &mut Vec::new())?;
    Ok(formula)
}
