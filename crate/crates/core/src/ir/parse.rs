use std::collections::HashSet;

use thiserror::Error;

use super::{validate, Block, Function, Inst, Module, Opcode, Operand, Phi, Terminator, ValidationError};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}, col {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("function @{function} is invalid: {}", .errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid {
        function: String,
        errors: Vec<ValidationError>,
    },
}

/// Parses and validates a module.
pub fn parse_module(text: &str) -> Result<Module, IrError> {
    let module = parse_module_unchecked(text)?;
    for f in &module.functions {
        let errors = validate(f);
        if !errors.is_empty() {
            return Err(IrError::Invalid {
                function: f.name.clone(),
                errors,
            });
        }
    }
    Ok(module)
}

/// Parses a module that must contain exactly one function.
pub fn parse_function(text: &str) -> Result<Function, IrError> {
    let mut m = parse_module(text)?;
    match m.functions.len() {
        1 => Ok(m.functions.pop().unwrap()),
        n => Err(IrError::Parse(ParseError {
            line: 1,
            col: 1,
            message: format!("expected exactly one function, found {n}"),
        })),
    }
}

/// Parses without running `validate`. Block-structure errors (misplaced or
/// missing terminators) are still reported, as `IrError::Invalid`.
pub fn parse_module_unchecked(text: &str) -> Result<Module, IrError> {
    let mut parser = Parser::default();
    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.split(';').next().unwrap_or("");
        let toks = lex(line, i + 1)?;
        if toks.is_empty() {
            continue;
        }
        parser.line(Line { no: i + 1, toks })?;
    }
    parser.finish(text.split('\n').count())
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Local(String),
    Global(String),
    Int(i64),
    Punct(char),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Local(v) => format!("`%{v}`"),
            Tok::Global(g) => format!("`@{g}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Punct(c) => format!("`{c}`"),
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(line: &str, no: usize) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let err = |col: usize, message: String| ParseError { line: no, col, message };
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '%' || c == '@' {
            let start = i + 1;
            i = start;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            if i == start {
                return Err(err(col, format!("expected a name after `{c}`")));
            }
            let name: String = chars[start..i].iter().collect();
            toks.push((col, if c == '%' { Tok::Local(name) } else { Tok::Global(name) }));
        } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v: i64 = s
                .parse()
                .map_err(|_| err(col, format!("integer literal `{s}` out of range")))?;
            toks.push((col, Tok::Int(v)));
        } else if c.is_ascii_alphabetic() || c == '_' || c == '.' {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            toks.push((col, Tok::Word(chars[start..i].iter().collect())));
        } else if "(){}[],=:".contains(c) {
            toks.push((col, Tok::Punct(c)));
            i += 1;
        } else {
            return Err(err(col, format!("unexpected character `{c}`")));
        }
    }
    Ok(toks)
}

struct Line {
    no: usize,
    toks: Vec<(usize, Tok)>,
}

struct Cursor<'a> {
    no: usize,
    toks: &'a [(usize, Tok)],
    pos: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: &'a Line) -> Self {
        let end_col = line.toks.last().map(|(c, t)| c + t.describe().len() - 2).unwrap_or(1);
        Cursor {
            no: line.no,
            toks: &line.toks,
            pos: 0,
            end_col,
        }
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(c, _)| *c).unwrap_or(self.end_col)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.no,
            col: self.col(),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t);
        self.pos += 1;
        t
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expect_punct(&mut self, p: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Punct(c)) if *c == p => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error(format!("expected `{p}`, found {}", t.describe()))),
            None => Err(self.error(format!("expected `{p}`, found end of line"))),
        }
    }

    fn eat_punct(&mut self, p: char) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(c)) if *c == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_local(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Local(v)) => {
                let v = v.clone();
                self.pos += 1;
                Ok(v)
            }
            Some(t) => Err(self.error(format!("expected a value name, found {}", t.describe()))),
            None => Err(self.error("expected a value name, found end of line")),
        }
    }

    fn expect_label(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            Some(t) => Err(self.error(format!("expected a label, found {}", t.describe()))),
            None => Err(self.error("expected a label, found end of line")),
        }
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        match self.peek() {
            Some(Tok::Local(v)) => {
                let v = v.clone();
                self.pos += 1;
                Ok(Operand::Value(v))
            }
            Some(Tok::Int(i)) => {
                let i = *i;
                if !(-(1i64 << 31)..=u32::MAX as i64).contains(&i) {
                    return Err(self.error(format!("literal {i} does not fit in 32 bits")));
                }
                self.pos += 1;
                Ok(Operand::Lit(i as u32))
            }
            Some(t) => Err(self.error(format!("expected an operand, found {}", t.describe()))),
            None => Err(self.error("expected an operand, found end of line")),
        }
    }

    fn operand_list(&mut self) -> Result<Vec<Operand>, ParseError> {
        let mut ops = Vec::new();
        if self.at_end() {
            return Ok(ops);
        }
        loop {
            ops.push(self.operand()?);
            if !self.eat_punct(',') {
                break;
            }
        }
        Ok(ops)
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.error(format!("unexpected {}", t.describe()))),
        }
    }
}

struct PartialBlock {
    label: String,
    phis: Vec<Phi>,
    body: Vec<Inst>,
    term: Option<Terminator>,
}

struct PartialFunction {
    name: String,
    params: Vec<String>,
    blocks: Vec<PartialBlock>,
    structural: Vec<ValidationError>,
}

#[derive(Default)]
struct Parser {
    module: Module,
    names: HashSet<String>,
    current: Option<PartialFunction>,
}

impl Parser {
    fn line(&mut self, line: Line) -> Result<(), IrError> {
        let mut cur = Cursor::new(&line);
        match self.current.as_mut() {
            None => {
                self.header(&mut cur)?;
            }
            Some(func) => {
                if matches!(cur.peek(), Some(Tok::Punct('}'))) {
                    cur.next();
                    cur.finish()?;
                    let func = self.current.take().unwrap();
                    self.close(func)?;
                } else if matches!(cur.toks.get(1), Some((_, Tok::Punct(':')))) && cur.toks.len() == 2 {
                    let label = cur.expect_label()?;
                    func.blocks.push(PartialBlock {
                        label,
                        phis: Vec::new(),
                        body: Vec::new(),
                        term: None,
                    });
                } else {
                    let Some(block) = func.blocks.last_mut() else {
                        return Err(cur.error("instruction outside of a block").into());
                    };
                    statement(&mut cur, block, &mut func.structural)?;
                }
            }
        }
        Ok(())
    }

    fn header(&mut self, cur: &mut Cursor<'_>) -> Result<(), ParseError> {
        match cur.peek() {
            Some(Tok::Word(w)) if w == "func" => {
                cur.next();
            }
            _ => return Err(cur.error("expected `func`")),
        }
        let name = match cur.peek() {
            Some(Tok::Global(g)) => g.clone(),
            _ => return Err(cur.error("expected a function name like `@f`")),
        };
        if self.names.contains(&name) {
            return Err(cur.error(format!("duplicate function @{name}")));
        }
        cur.next();
        cur.expect_punct('(')?;
        let mut params = Vec::new();
        if !cur.eat_punct(')') {
            loop {
                params.push(cur.expect_local()?);
                if cur.eat_punct(')') {
                    break;
                }
                cur.expect_punct(',')?;
            }
        }
        cur.expect_punct('{')?;
        cur.finish()?;
        self.names.insert(name.clone());
        self.current = Some(PartialFunction {
            name,
            params,
            blocks: Vec::new(),
            structural: Vec::new(),
        });
        Ok(())
    }

    fn close(&mut self, func: PartialFunction) -> Result<(), IrError> {
        let mut structural = func.structural;
        if func.blocks.is_empty() {
            structural.push(ValidationError::EmptyFunction);
        }
        let mut blocks = Vec::new();
        for b in func.blocks {
            let term = match b.term {
                Some(t) => t,
                None => {
                    structural.push(ValidationError::Terminator {
                        block: b.label.clone(),
                        message: "block has no terminator".into(),
                    });
                    Terminator::Ret(Operand::Lit(0))
                }
            };
            blocks.push(Block {
                label: b.label,
                phis: b.phis,
                body: b.body,
                term,
            });
        }
        if !structural.is_empty() {
            return Err(IrError::Invalid {
                function: func.name,
                errors: structural,
            });
        }
        self.module.functions.push(Function {
            name: func.name,
            params: func.params,
            blocks,
        });
        Ok(())
    }

    fn finish(mut self, lines: usize) -> Result<Module, IrError> {
        if let Some(f) = self.current.take() {
            return Err(ParseError {
                line: lines,
                col: 1,
                message: format!("unterminated function @{}", f.name),
            }
            .into());
        }
        Ok(self.module)
    }
}

fn statement(
    cur: &mut Cursor<'_>,
    block: &mut PartialBlock,
    structural: &mut Vec<ValidationError>,
) -> Result<(), ParseError> {
    let misplaced = |block: &PartialBlock, structural: &mut Vec<ValidationError>, what: &str| {
        if block.term.is_some() {
            structural.push(ValidationError::Terminator {
                block: block.label.clone(),
                message: format!("{what} after the block terminator"),
            });
        }
    };
    match cur.peek().cloned() {
        Some(Tok::Local(result)) => {
            cur.next();
            cur.expect_punct('=')?;
            let op = match cur.next() {
                Some(Tok::Word(w)) => w.clone(),
                _ => {
                    cur.pos -= 1;
                    return Err(cur.error("expected an opcode"));
                }
            };
            if op == "phi" {
                if !block.body.is_empty() {
                    cur.pos -= 1;
                    return Err(cur.error("phi must precede the body instructions of its block"));
                }
                misplaced(block, structural, "phi");
                let mut incoming = Vec::new();
                loop {
                    cur.expect_punct('[')?;
                    let v = cur.operand()?;
                    cur.expect_punct(',')?;
                    let l = cur.expect_label()?;
                    cur.expect_punct(']')?;
                    incoming.push((v, l));
                    if !cur.eat_punct(',') {
                        break;
                    }
                }
                cur.finish()?;
                block.phis.push(Phi { result, incoming });
                return Ok(());
            }
            let Some(opcode) = Opcode::from_name(&op) else {
                cur.pos -= 1;
                return Err(cur.error(format!("unknown opcode `{op}`")));
            };
            if opcode == Opcode::Store {
                cur.pos -= 1;
                return Err(cur.error("store does not produce a value"));
            }
            let operands = cur.operand_list()?;
            cur.finish()?;
            misplaced(block, structural, "instruction");
            block.body.push(Inst {
                result: Some(result),
                opcode,
                operands,
            });
        }
        Some(Tok::Word(w)) => {
            cur.next();
            match w.as_str() {
                "store" => {
                    let operands = cur.operand_list()?;
                    cur.finish()?;
                    misplaced(block, structural, "instruction");
                    block.body.push(Inst {
                        result: None,
                        opcode: Opcode::Store,
                        operands,
                    });
                }
                "ret" | "br" | "condbr" => {
                    let term = match w.as_str() {
                        "ret" => Terminator::Ret(cur.operand()?),
                        "br" => Terminator::Br(cur.expect_label()?),
                        _ => {
                            let cond = cur.operand()?;
                            cur.expect_punct(',')?;
                            let then_label = cur.expect_label()?;
                            cur.expect_punct(',')?;
                            let else_label = cur.expect_label()?;
                            Terminator::CondBr {
                                cond,
                                then_label,
                                else_label,
                            }
                        }
                    };
                    cur.finish()?;
                    if block.term.is_some() {
                        structural.push(ValidationError::Terminator {
                            block: block.label.clone(),
                            message: "block has more than one terminator".into(),
                        });
                    } else {
                        block.term = Some(term);
                    }
                }
                _ => {
                    cur.pos -= 1;
                    return Err(cur.error(format!("unknown statement `{w}`")));
                }
            }
        }
        Some(t) => return Err(cur.error(format!("unexpected {}", t.describe()))),
        None => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BIN2BCD: &str = "func @bin2bcd(%val) {
entry:
  %q = udiv %val, 10
  %h = shl %q, 4
  %r = urem %val, 10
  %s = add %h, %r
  ret %s
}
";

    #[test]
    fn parses_bin2bcd() {
        let m = parse_module(BIN2BCD).unwrap();
        assert_eq!(m.functions.len(), 1);
        let f = &m.functions[0];
        assert_eq!(f.blocks.len(), 1);
        assert_eq!(f.blocks[0].body.len() + 1, 5);
        assert_eq!(f.params, vec!["val"]);
    }

    #[test]
    fn empty_input_is_empty_module() {
        assert_eq!(parse_module("").unwrap().functions.len(), 0);
        assert_eq!(parse_module("; just a comment\n\n").unwrap().functions.len(), 0);
    }

    #[test]
    fn malformed_header_reports_line_one() {
        match parse_module("func @f(") {
            Err(IrError::Parse(e)) => assert_eq!(e.line, 1),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_positions() {
        let text = "func @f(%a) {\nentry:\n  %x = frob %a, 1\n  ret %x\n}\n";
        match parse_module(text) {
            Err(IrError::Parse(e)) => {
                assert_eq!((e.line, e.col), (3, 8));
                assert!(e.message.contains("frob"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_rets_are_a_terminator_error() {
        let text = "func @f(%a) {\nentry:\n  ret %a\n  ret 0\n}\n";
        match parse_module(text) {
            Err(IrError::Invalid { errors, .. }) => {
                assert!(matches!(errors[0], ValidationError::Terminator { .. }))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_literals_wrap() {
        let f = parse_function("func @f(%a) {\nentry:\n  %x = add %a, -1\n  ret %x\n}\n").unwrap();
        assert_eq!(f.blocks[0].body[0].operands[1], Operand::Lit(u32::MAX));
    }

    #[test]
    fn duplicate_function_names_rejected() {
        let text = "func @f() {\nentry:\n  ret 0\n}\nfunc @f() {\nentry:\n  ret 1\n}\n";
        assert!(matches!(parse_module(text), Err(IrError::Parse(e)) if e.line == 5));
    }
}
