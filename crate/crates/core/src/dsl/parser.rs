use super::lexer::{tokenize, Tok, Token};
use super::{keyword, ParseError, ParsedRule, RuleSpans, SourceSpan};
use crate::capability::{ActionRef, EventRef, Value};
use crate::rule::{Rule, RuleId, StatePredicate};

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        ParseError {
            span: t.span,
            expected: expected.iter().map(|s| (*s).to_owned()).collect(),
            found: t.tok.describe(),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if keyword(s) == Some(kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<SourceSpan, ParseError> {
        if self.at_keyword(kw) {
            Ok(self.next().span)
        } else {
            Err(self.error(&[kw]))
        }
    }

    fn ident(&mut self) -> Result<(String, SourceSpan), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if keyword(s).is_none() => {
                let t = self.next();
                match t.tok {
                    Tok::Ident(s) => Ok((s, t.span)),
                    _ => unreachable!(),
                }
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn dotted(&mut self) -> Result<(String, String, SourceSpan), ParseError> {
        let (device, start) = self.ident()?;
        if self.peek().tok != Tok::Dot {
            return Err(self.error(&["`.`"]));
        }
        self.next();
        let (member, end) = self.ident()?;
        Ok((device, member, join(start, end)))
    }

    fn literal(&mut self) -> Result<(Value, SourceSpan), ParseError> {
        let value = match &self.peek().tok {
            Tok::Int(i) => Value::Int(*i),
            Tok::Str(s) => Value::Symbol(s.clone()),
            Tok::Ident(s) if s.eq_ignore_ascii_case("true") => Value::Bool(true),
            Tok::Ident(s) if s.eq_ignore_ascii_case("false") => Value::Bool(false),
            Tok::Ident(s) if keyword(s).is_none() => Value::Symbol(s.clone()),
            _ => return Err(self.error(&["literal"])),
        };
        Ok((value, self.next().span))
    }

    fn predicate(&mut self) -> Result<(StatePredicate, SourceSpan), ParseError> {
        let (device, attribute, start) = self.dotted()?;
        let comparator = match self.peek().tok {
            Tok::Cmp(c) => c,
            _ => return Err(self.error(&["comparator"])),
        };
        self.next();
        let (literal, end) = self.literal()?;
        Ok((
            StatePredicate {
                device,
                attribute,
                comparator,
                literal,
            },
            join(start, end),
        ))
    }

    fn rule(&mut self) -> Result<ParsedRule, ParseError> {
        let mut id = None;
        if self.peek().tok == Tok::At {
            let at = self.next().span;
            let (name, name_span) = self.ident()?;
            if self.peek().tok != Tok::Colon {
                return Err(self.error(&["`:`"]));
            }
            self.next();
            id = Some((RuleId::new(name), join(at, name_span)));
        }
        self.expect_keyword("DO")?;
        let mut actions = Vec::new();
        let mut action_spans = Vec::new();
        loop {
            let (device, capability, span) = self.dotted()?;
            actions.push(ActionRef { device, capability });
            action_spans.push(span);
            if self.at_keyword("THEN") {
                self.next();
                continue;
            }
            if self.at_keyword("WHEN") {
                break;
            }
            return Err(self.error(&["THEN", "WHEN"]));
        }
        self.expect_keyword("WHEN")?;
        let (device, capability, event_span) = self.dotted()?;
        let event = EventRef { device, capability };

        let mut predicates = Vec::new();
        let mut predicate_spans = Vec::new();
        if self.at_keyword("WHILE") {
            self.next();
            loop {
                let (p, span) = self.predicate()?;
                predicates.push(p);
                predicate_spans.push(span);
                if self.at_keyword("AND") {
                    self.next();
                    continue;
                }
                if self.peek().tok == Tok::Eof {
                    break;
                }
                return Err(self.error(&["AND", "end of input"]));
            }
        } else if self.peek().tok != Tok::Eof {
            return Err(self.error(&["WHILE", "end of input"]));
        }

        let (rule_id, id_span) = match id {
            Some((id, span)) => (Some(id), Some(span)),
            None => (None, None),
        };
        Ok(ParsedRule {
            rule: Rule {
                id: rule_id.clone().unwrap_or_else(|| RuleId::positional(1)),
                do_part: actions,
                when_part: event,
                while_part: predicates,
            },
            explicit_id: rule_id.is_some(),
            spans: RuleSpans {
                id: id_span,
                actions: action_spans,
                event: event_span,
                predicates: predicate_spans,
            },
        })
    }
}

fn join(start: SourceSpan, end: SourceSpan) -> SourceSpan {
    let length = if start.line == end.line {
        end.column + end.length - start.column
    } else {
        start.length
    };
    SourceSpan {
        line: start.line,
        column: start.column,
        length,
    }
}

pub(super) fn parse(text: &str) -> Result<ParsedRule, ParseError> {
    let tokens = tokenize(text)?;
    Parser { tokens, pos: 0 }.rule()
}
