//! Surface syntax for differential expressions and operators.
//!
//! Expressions: identifiers resolved against the context, primes and
//! `u^(n)` for derivatives, integer literals, `+ - * / ^`, and
//! `sqrt(...)` / `exp(...)` matching registered auxiliaries. Exponents
//! are integer literals, optionally negative or parenthesized.

use crate::diffalg::{Ctx, DiffExpr};
use crate::poly::Var;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Prime,
    LPar,
    RPar,
    LBracket,
    RBracket,
    Comma,
}

pub fn lex(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '\'' => {
                out.push(Tok::Prime);
                i += 1;
            }
            '(' => {
                out.push(Tok::LPar);
                i += 1;
            }
            ')' => {
                out.push(Tok::RPar);
                i += 1;
            }
            '[' => {
                out.push(Tok::LBracket);
                i += 1;
            }
            ']' => {
                out.push(Tok::RBracket);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let n: i64 = text.parse().map_err(|_| format!("integer too large: {}", text))?;
                out.push(Tok::Int(n));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(format!("unexpected character '{}'", other)),
        }
    }
    Ok(out)
}

pub struct Tokens {
    toks: Vec<Tok>,
    pos: usize,
}

impl Tokens {
    pub fn new(toks: Vec<Tok>) -> Tokens {
        Tokens { toks, pos: 0 }
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    pub fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1)
    }

    pub fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn expect(&mut self, t: &Tok) -> Result<(), String> {
        match self.next() {
            Some(ref got) if got == t => Ok(()),
            got => Err(format!("expected {:?}, found {:?}", t, got)),
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

pub fn parse_expr(s: &str, ctx: &Ctx) -> Result<DiffExpr, String> {
    let mut toks = Tokens::new(lex(s)?);
    let e = expr_bp(&mut toks, ctx, 0)?;
    if !toks.at_end() {
        return Err(format!("trailing input at {:?}", toks.peek()));
    }
    Ok(e)
}

/// Parse an expression from an existing stream, stopping at any token the
/// grammar cannot continue with (used by the operator parser).
pub fn expr_bp(toks: &mut Tokens, ctx: &Ctx, min_bp: u8) -> Result<DiffExpr, String> {
    let mut lhs = match toks.next() {
        Some(Tok::Int(n)) => DiffExpr::num_i64(n, ctx),
        Some(Tok::Minus) => {
            let rhs = expr_bp(toks, ctx, 5)?;
            -rhs
        }
        Some(Tok::LPar) => {
            let inner = expr_bp(toks, ctx, 0)?;
            toks.expect(&Tok::RPar)?;
            inner
        }
        Some(Tok::Ident(name)) if name == "sqrt" || name == "exp" => {
            toks.expect(&Tok::LPar)?;
            let inner = expr_bp(toks, ctx, 0)?;
            toks.expect(&Tok::RPar)?;
            let v = if name == "sqrt" {
                ctx.sqrt_aux_for(inner.raw())
            } else {
                ctx.exp_aux_for(inner.raw())
            };
            match v {
                Some(v) => DiffExpr::var(v, ctx),
                None => {
                    return Err(format!(
                        "{}({}) does not match a registered auxiliary",
                        name, inner
                    ))
                }
            }
        }
        Some(Tok::Ident(name)) => {
            let v = ctx
                .lookup(&name)
                .ok_or_else(|| format!("unknown identifier '{}'", name))?;
            parse_var_suffix(toks, ctx, v)?
        }
        got => return Err(format!("unexpected token {:?}", got)),
    };

    loop {
        let (op, lbp, rbp) = match toks.peek() {
            Some(Tok::Plus) => ('+', 1, 2),
            Some(Tok::Minus) => ('-', 1, 2),
            Some(Tok::Star) => ('*', 3, 4),
            Some(Tok::Slash) => ('/', 3, 4),
            Some(Tok::Caret) => ('^', 9, 0),
            _ => break,
        };
        if lbp < min_bp {
            break;
        }
        toks.next();
        if op == '^' {
            let e = parse_int_exponent(toks)?;
            lhs = lhs.pow(e);
            continue;
        }
        let rhs = expr_bp(toks, ctx, rbp)?;
        lhs = match op {
            '+' => lhs + rhs,
            '-' => lhs - rhs,
            '*' => lhs * rhs,
            '/' => {
                if rhs.is_zero() {
                    return Err("division by zero".into());
                }
                lhs / rhs
            }
            _ => unreachable!(),
        };
    }
    Ok(lhs)
}

/// Primes and the `^(n)` derivative notation on a bare variable.
fn parse_var_suffix(toks: &mut Tokens, ctx: &Ctx, v: Var) -> Result<DiffExpr, String> {
    let mut primes = 0usize;
    while matches!(toks.peek(), Some(Tok::Prime)) {
        toks.next();
        primes += 1;
    }
    if primes > 0 {
        match v.as_uvar() {
            Some((i, 0)) => return Ok(DiffExpr::u(i, primes, ctx)),
            _ => return Err("primes apply only to differential variables".into()),
        }
    }
    // u^(n): parenthesized nonnegative integer directly after ^ on a bare
    // differential variable is a derivative order, not a power
    if let (Some(&Tok::Caret), Some(&Tok::LPar)) = (toks.peek(), toks.peek2()) {
        if let Some((i, 0)) = v.as_uvar() {
            if let Some(Tok::Int(n)) = toks.toks.get(toks.pos + 2) {
                let n = *n;
                if n >= 0 && matches!(toks.toks.get(toks.pos + 3), Some(Tok::RPar)) {
                    toks.pos += 4;
                    return Ok(DiffExpr::u(i, n as usize, ctx));
                }
            }
        }
    }
    Ok(DiffExpr::var(v, ctx))
}

fn parse_int_exponent(toks: &mut Tokens) -> Result<i64, String> {
    match toks.next() {
        Some(Tok::Int(n)) => Ok(n),
        Some(Tok::Minus) => match toks.next() {
            Some(Tok::Int(n)) => Ok(-n),
            got => Err(format!("expected integer exponent, found {:?}", got)),
        },
        Some(Tok::LPar) => {
            let mut neg = false;
            let mut t = toks.next();
            if t == Some(Tok::Minus) {
                neg = true;
                t = toks.next();
            }
            match t {
                Some(Tok::Int(n)) => {
                    toks.expect(&Tok::RPar)?;
                    Ok(if neg { -n } else { n })
                }
                got => Err(format!("expected integer exponent, found {:?}", got)),
            }
        }
        got => Err(format!("expected integer exponent, found {:?}", got)),
    }
}
