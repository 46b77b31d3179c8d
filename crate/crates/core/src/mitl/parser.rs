//! Concrete syntax.
//!
//! ```text
//! until   := or ( "U" interval until )?
//! or      := and ( "|" and )*
//! and     := unary ( "&" unary )*
//! unary   := "!" unary | "G" interval unary | "F" interval unary | primary
//! primary := "TRUE" | quoted-atom | "(" until ")"
//! interval:= "[" nat "," nat "]"
//! ```
//!
//! Operator chains are n-ary: `"a" & "b" & "c"` is one `And` with three
//! children, while parenthesised groups stay nested. Printing adds exactly
//! the parentheses needed, so `parse(&f.to_string()) == Ok(f)` for every
//! well-formed formula.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{Formula, Interval, MitlError, Priority, Task, TaskSet};

pub fn parse(text: &str) -> Result<Formula, MitlError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    p.skip_ws();
    if p.at_end() {
        return Err(MitlError::Syntax { pos: 0, msg: "empty input" });
    }
    let f = p.until()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(f)
}

/// Parses one `<priority> ; <formula>` line.
pub fn parse_task_line(line: &str) -> Result<Task, MitlError> {
    let (prio, formula) =
        line.split_once(';').ok_or(MitlError::Syntax { pos: 0, msg: "expected `<priority> ; <formula>`" })?;
    let priority = Priority::parse(prio)?;
    let offset = prio.len() + 1;
    let formula = parse(formula).map_err(|e| match e {
        MitlError::Syntax { pos, msg } => MitlError::Syntax { pos: pos + offset, msg },
        other => other,
    })?;
    Ok(Task { formula, priority })
}

/// Parses a task file: one task per line, blank lines and `#` comments
/// ignored.
pub fn parse_task_file(text: &str) -> Result<TaskSet, MitlError> {
    let mut tasks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let task = parse_task_line(trimmed).map_err(|e| MitlError::TaskLine { line: i + 1, source: Box::new(e) })?;
        tasks.push(task);
    }
    TaskSet::new(tasks)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn error(&self, msg: &'static str) -> MitlError {
        MitlError::Syntax { pos: self.pos, msg }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8, msg: &'static str) -> Result<(), MitlError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(msg))
        }
    }

    fn keyword(&mut self, kw: &[u8]) -> bool {
        self.skip_ws();
        if !self.src[self.pos..].starts_with(kw) {
            return false;
        }
        let next = self.src.get(self.pos + kw.len()).copied();
        // the temporal operators take an interval; `TRUE` must end at a word boundary
        let boundary = match kw {
            b"TRUE" => !matches!(next, Some(c) if c.is_ascii_alphanumeric() || c == b'_'),
            _ => true,
        };
        if boundary {
            self.pos += kw.len();
        }
        boundary
    }

    fn until(&mut self) -> Result<Formula, MitlError> {
        let lhs = self.or()?;
        if self.keyword(b"U") {
            let iv = self.interval()?;
            let rhs = self.until()?;
            return Ok(Formula::Until(iv, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, MitlError> {
        let first = self.and()?;
        let mut items = vec![first];
        while self.eat(b'|') {
            items.push(self.and()?);
        }
        Ok(if items.len() == 1 { items.pop().expect("one item") } else { Formula::Or(items) })
    }

    fn and(&mut self) -> Result<Formula, MitlError> {
        let first = self.unary()?;
        let mut items = vec![first];
        while self.eat(b'&') {
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 { items.pop().expect("one item") } else { Formula::And(items) })
    }

    fn unary(&mut self) -> Result<Formula, MitlError> {
        if self.eat(b'!') {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.keyword(b"G") {
            let iv = self.interval()?;
            return Ok(Formula::Globally(iv, Box::new(self.unary()?)));
        }
        if self.keyword(b"F") {
            let iv = self.interval()?;
            return Ok(Formula::Eventually(iv, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula, MitlError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let f = self.until()?;
                self.expect(b')', "expected `)`")?;
                Ok(f)
            }
            Some(b'"') => self.atom(),
            Some(_) if self.keyword(b"TRUE") => Ok(Formula::True),
            Some(_) => Err(self.error("expected atom, `TRUE`, `(` or an operator")),
        }
    }

    fn atom(&mut self) -> Result<Formula, MitlError> {
        let open = self.pos;
        self.pos += 1;
        let mut name = String::new();
        loop {
            let rest = match core::str::from_utf8(&self.src[self.pos..]) {
                Ok(s) => s,
                Err(e) => core::str::from_utf8(&self.src[self.pos..self.pos + e.valid_up_to()]).unwrap_or(""),
            };
            let Some(c) = rest.chars().next() else {
                return Err(MitlError::Syntax { pos: open, msg: "unterminated atom" });
            };
            self.pos += c.len_utf8();
            match c {
                '"' => break,
                '\\' => match self.peek() {
                    Some(e @ (b'"' | b'\\')) => {
                        name.push(e as char);
                        self.pos += 1;
                    }
                    _ => return Err(self.error("invalid escape in atom")),
                },
                c => name.push(c),
            }
        }
        if name.is_empty() {
            return Err(MitlError::Syntax { pos: open, msg: "empty atom name" });
        }
        Ok(Formula::Atom(name))
    }

    fn interval(&mut self) -> Result<Interval, MitlError> {
        self.expect(b'[', "expected `[` to open an interval")?;
        let lo = self.nat()?;
        self.expect(b',', "expected `,` in interval")?;
        let hi = self.nat()?;
        self.expect(b']', "expected `]` to close an interval")?;
        Interval::new(lo, hi)
    }

    fn nat(&mut self) -> Result<u32, MitlError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a nonnegative integer"));
        }
        let digits = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        digits.parse().map_err(|_| MitlError::Syntax { pos: start, msg: "interval bound out of range" })
    }
}

/// Binding strength used by the printer; larger binds tighter.
fn level(f: &Formula) -> u8 {
    match f {
        Formula::Until(..) => 0,
        Formula::Or(_) => 1,
        Formula::And(_) => 2,
        Formula::Not(_) | Formula::Globally(..) | Formula::Eventually(..) => 3,
        Formula::True | Formula::Atom(_) => 4,
    }
}

struct Prec<'a>(&'a Formula, u8);

impl fmt::Display for Prec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if level(self.0) < self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("TRUE"),
            Formula::Atom(name) => {
                f.write_str("\"")?;
                for c in name.chars() {
                    if c == '"' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("\"")
            }
            Formula::Not(c) => write!(f, "!{}", Prec(c, 3)),
            Formula::Globally(iv, c) => write!(f, "G[{},{}] {}", iv.lo(), iv.hi(), Prec(c, 3)),
            Formula::Eventually(iv, c) => write!(f, "F[{},{}] {}", iv.lo(), iv.hi(), Prec(c, 3)),
            Formula::And(cs) | Formula::Or(cs) => {
                let (sep, min) = if matches!(self, Formula::And(_)) { (" & ", 3) } else { (" | ", 2) };
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "{}", Prec(c, min))?;
                }
                Ok(())
            }
            Formula::Until(iv, l, r) => write!(f, "{} U[{},{}] {}", Prec(l, 1), iv.lo(), iv.hi(), Prec(r, 0)),
        }
    }
}

impl core::str::FromStr for Formula {
    type Err = MitlError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn globally_exit() {
        let f = parse(r#"G[1,2] "exit""#).unwrap();
        assert_eq!(f, Formula::globally(1, 2, Formula::atom("exit")).unwrap());
        assert_eq!(f.to_string(), r#"G[1,2] "exit""#);
    }

    #[test]
    fn precedence_example() {
        let f = parse(r#"("a" U[0,5] "b") & F[2,4] !"c""#).unwrap();
        let expect = Formula::and(vec![
            Formula::until(0, 5, Formula::atom("a"), Formula::atom("b")).unwrap(),
            Formula::eventually(2, 4, Formula::not(Formula::atom("c"))).unwrap(),
        ])
        .unwrap();
        assert_eq!(f, expect);
        assert_eq!(parse(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn until_is_loosest_and_right_associative() {
        let f = parse(r#""a" | "b" U[0,1] "c" U[2,3] "d""#).unwrap();
        let Formula::Until(iv, lhs, rhs) = &f else { panic!("expected until, got {f:?}") };
        assert_eq!((iv.lo(), iv.hi()), (0, 1));
        assert!(matches!(**lhs, Formula::Or(_)));
        assert!(matches!(**rhs, Formula::Until(..)));
    }

    #[test]
    fn chains_flatten_but_groups_nest() {
        assert!(matches!(parse(r#""a" & "b" & "c""#).unwrap(), Formula::And(v) if v.len() == 3));
        let nested = parse(r#"("a" & "b") & "c""#).unwrap();
        assert!(matches!(&nested, Formula::And(v) if v.len() == 2));
        assert_eq!(nested.to_string(), r#"("a" & "b") & "c""#);
    }

    #[test]
    fn simple_printing() {
        assert_eq!(Formula::atom("a").to_string(), r#""a""#);
        assert_eq!(Formula::not(Formula::atom("a")).to_string(), r#"!"a""#);
        assert_eq!(Formula::atom(r#"q"x\"#).to_string(), r#""q\"x\\""#);
        assert_eq!(parse(r#""q\"x\\""#).unwrap(), Formula::atom(r#"q"x\"#));
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(parse("   "), Err(MitlError::Syntax { pos: 0, msg: "empty input" }));
        assert!(matches!(parse(r#"G[3,1] "a""#), Err(MitlError::BadInterval { lo: 3, hi: 1 })));
        assert!(matches!(parse(r#""a" &"#), Err(MitlError::Syntax { pos: 5, .. })));
        assert!(matches!(parse(r#""a" "b""#), Err(MitlError::Syntax { pos: 4, .. })));
        assert!(matches!(parse(r#"G "a""#), Err(MitlError::Syntax { .. })));
        assert!(parse(r#"("a""#).is_err());
        assert!(parse(r#""unterminated"#).is_err());
        assert!(parse("TRUEx").is_err());
        assert!(parse(r#""""#).is_err());
    }

    #[test]
    fn task_files() {
        let text = "# office tasks\n\n2 ; F[0,12] \"off1\"\n1/2; G[1,2] \"exit\"\n";
        let ts = parse_task_file(text).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.tasks()[1].priority, Priority::new(1, 2).unwrap());
        assert_eq!(ts.horizon(), 12);
        let err = parse_task_file("1 ; \"a\"\noops\n").unwrap_err();
        assert!(matches!(err, MitlError::TaskLine { line: 2, .. }));
        assert_eq!(parse_task_file("# nothing\n"), Err(MitlError::NoTasks));
    }
}
