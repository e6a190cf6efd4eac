use super::{BindingTable, Formula, LtlError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    True,
    False,
    Not,
    And,
    Or,
    Implies,
    Always,
    Eventually,
    Next,
    Until,
    Release,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(n) => format!("`{n}`"),
            Tok::End => "end of input".into(),
            other => format!("`{}`", other.spelling()),
        }
    }

    fn spelling(&self) -> &'static str {
        match self {
            Tok::Ident(_) => "proposition",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Not => "!",
            Tok::And => "&",
            Tok::Or => "|",
            Tok::Implies => "->",
            Tok::Always => "G",
            Tok::Eventually => "F",
            Tok::Next => "X",
            Tok::Until => "U",
            Tok::Release => "R",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::End => "end of input",
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, LtlError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '!' | '~' | '¬' => Tok::Not,
            '∧' => Tok::And,
            '∨' => Tok::Or,
            '□' | '◻' => Tok::Always,
            '◇' | '◊' => Tok::Eventually,
            '○' | '◯' => Tok::Next,
            '→' => Tok::Implies,
            '⊤' => Tok::True,
            '⊥' => Tok::False,
            '&' => {
                if chars.get(i + 1) == Some(&'&') {
                    i += 1;
                }
                Tok::And
            }
            '|' => {
                if chars.get(i + 1) == Some(&'|') {
                    i += 1;
                }
                Tok::Or
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                i += 1;
                Tok::Implies
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                i = j;
                out.push((
                    start,
                    match word.as_str() {
                        "G" => Tok::Always,
                        "F" => Tok::Eventually,
                        "X" => Tok::Next,
                        "U" => Tok::Until,
                        "R" => Tok::Release,
                        "true" => Tok::True,
                        "false" => Tok::False,
                        _ => Tok::Ident(word),
                    },
                ));
                continue;
            }
            other => {
                return Err(LtlError::Syntax {
                    position: start,
                    expected: vec!["operator, proposition or parenthesis".into()],
                    found: format!("`{other}`"),
                })
            }
        };
        i += 1;
        out.push((start, tok));
    }
    out.push((chars.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

const OPERAND_START: &[&str] = &["proposition", "true", "false", "(", "!", "G", "F", "X"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> LtlError {
        let (position, tok) = &self.toks[self.pos];
        LtlError::Syntax {
            position: *position,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: tok.describe(),
        }
    }

    // implies := or ('->' implies)?
    fn implies(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.temporal()?;
        while *self.peek() == Tok::And {
            self.bump();
            lhs = Formula::and(lhs, self.temporal()?);
        }
        Ok(lhs)
    }

    // right-associative U / R
    fn temporal(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.unary()?;
        match self.peek() {
            Tok::Until => {
                self.bump();
                Ok(Formula::until(lhs, self.temporal()?))
            }
            Tok::Release => {
                self.bump();
                Ok(Formula::release(lhs, self.temporal()?))
            }
            _ => Ok(lhs),
        }
    }

    fn unary(&mut self) -> Result<Formula, LtlError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Always => {
                self.bump();
                Ok(Formula::always(self.unary()?))
            }
            Tok::Eventually => {
                self.bump();
                Ok(Formula::eventually(self.unary()?))
            }
            Tok::Next => {
                self.bump();
                Ok(Formula::next(self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, LtlError> {
        match self.peek().clone() {
            Tok::True => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::False => {
                self.bump();
                Ok(Formula::falsum())
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Formula::Atom(name))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.implies()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error(&[")", "&", "|", "->", "U", "R"]));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.error(OPERAND_START)),
        }
    }
}

/// Parses LTL text without checking atom names.
///
/// Precedence from tightest: unary (`!`, `G`, `F`, `X`), then `U`/`R`
/// (right-associative), `&`, `|`, `->` (right-associative).
pub fn parse_formula(text: &str) -> Result<Formula, LtlError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    if *p.peek() == Tok::End {
        return Err(p.error(OPERAND_START));
    }
    let f = p.implies()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["&", "|", "->", "U", "R", "end of input"]));
    }
    Ok(f)
}

/// Parses an intent formula and resolves every atom against `bindings`.
pub fn parse_intent(text: &str, bindings: &BindingTable) -> Result<Formula, LtlError> {
    let f = parse_formula(text)?;
    for name in f.atoms() {
        if bindings.get(&name).is_none() {
            return Err(LtlError::UnknownProposition(name));
        }
    }
    Ok(f)
}
