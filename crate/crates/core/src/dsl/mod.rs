//! Concrete syntax for rules.
//!
//! ```text
//! rule      := "DO" action ("THEN" action)* "WHEN" event ("WHILE" predicate ("AND" predicate)*)?
//! action    := ident "." ident
//! event     := ident "." ident
//! predicate := ident "." ident cmp literal
//! cmp       := "=" | "!=" | "<" | ">" | "<=" | ">="
//! literal   := "true" | "false" | integer | quoted-string | ident
//! ```
//!
//! Keywords are case-insensitive and `#` starts a line comment. The WHEN part
//! takes exactly one event; a second event is a syntax error, not a
//! validation error. Rules files hold one rule per line, optionally prefixed
//! with `@name:` to pin the rule id.

mod legacy;
mod lexer;
mod parser;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::capability::Value;
use crate::rule::{Rule, RuleId};

pub use legacy::{import_legacy, load_legacy, ImportError, ImportReport, LegacyRule, LegacyTrigger, TriggerClass, TriggerClassification};

const KEYWORDS: [&str; 5] = ["DO", "THEN", "WHEN", "WHILE", "AND"];

/// The canonical spelling of `word` if it is a reserved keyword.
fn keyword(word: &str) -> Option<&'static str> {
    KEYWORDS.into_iter().find(|k| k.eq_ignore_ascii_case(word))
}

/// 1-based position of a piece of source text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[error("{span}: expected {}, found {found}", .expected.join(" or "))]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

/// Where each part of a parsed rule came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpans {
    pub id: Option<SourceSpan>,
    pub actions: Vec<SourceSpan>,
    pub event: SourceSpan,
    pub predicates: Vec<SourceSpan>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedRule {
    pub rule: Rule,
    pub spans: RuleSpans,
    /// Whether the id came from an `@name:` prefix rather than position.
    pub explicit_id: bool,
}

/// Parses a single rule. Without an `@name:` prefix the rule is given id `r1`.
pub fn parse_rule(text: &str) -> Result<ParsedRule, ParseError> {
    parser::parse(text)
}

/// Parses a rules file: one rule per line, blank lines and comments skipped.
///
/// Rules without an explicit id are numbered `r1, r2, ...` by their position
/// among the file's rules. Spans refer to lines of the whole file.
pub fn parse_rules_file(text: &str) -> Result<Vec<ParsedRule>, ParseError> {
    let mut out: Vec<ParsedRule> = Vec::new();
    let mut seen = HashSet::new();
    for (offset, line) in text.lines().enumerate() {
        let content = line.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let shift = |mut span: SourceSpan| {
            span.line += offset;
            span
        };
        let mut parsed = parse_rule(line).map_err(|mut e| {
            e.span = shift(e.span);
            e
        })?;
        parsed.spans.id = parsed.spans.id.map(shift);
        parsed.spans.event = shift(parsed.spans.event);
        for s in parsed.spans.actions.iter_mut().chain(parsed.spans.predicates.iter_mut()) {
            *s = shift(*s);
        }
        if !parsed.explicit_id {
            parsed.rule.id = RuleId::positional(out.len() + 1);
        }
        if !seen.insert(parsed.rule.id.clone()) {
            let span = parsed.spans.id.unwrap_or(SourceSpan {
                line: offset + 1,
                column: 1,
                length: 1,
            });
            return Err(ParseError {
                span,
                expected: vec!["unique rule id".into()],
                found: format!("duplicate id `{}`", parsed.rule.id),
            });
        }
        out.push(parsed);
    }
    Ok(out)
}

/// [`parse_rules_file`] without the spans.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>, ParseError> {
    Ok(parse_rules_file(text)?.into_iter().map(|p| p.rule).collect())
}

fn is_bare_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && keyword(s).is_none()
        && !s.eq_ignore_ascii_case("true")
        && !s.eq_ignore_ascii_case("false")
}

fn print_literal(v: &Value, out: &mut String) {
    match v {
        Value::Symbol(s) if !is_bare_symbol(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Canonical text of a rule: uppercase keywords, single spaces, no WHILE
/// when the conjunction is empty. The id is not printed.
pub fn print_rule(rule: &Rule) -> String {
    let mut out = String::from("DO ");
    for (i, a) in rule.do_part.iter().enumerate() {
        if i > 0 {
            out.push_str(" THEN ");
        }
        out.push_str(&a.to_string());
    }
    out.push_str(" WHEN ");
    out.push_str(&rule.when_part.to_string());
    for (i, p) in rule.while_part.iter().enumerate() {
        out.push_str(if i == 0 { " WHILE " } else { " AND " });
        out.push_str(&format!("{}.{} {} ", p.device, p.attribute, p.comparator));
        print_literal(&p.literal, &mut out);
    }
    out
}

/// Prints one rule per line, adding `@id:` wherever the id differs from the
/// one position would assign.
pub fn print_rules_file(rules: &[Rule]) -> String {
    let mut out = String::new();
    for (i, rule) in rules.iter().enumerate() {
        if rule.id != RuleId::positional(i + 1) {
            out.push_str(&format!("@{}: ", rule.id));
        }
        out.push_str(&print_rule(rule));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capability::{ActionRef, EventRef};
    use crate::rule::{Comparator, StatePredicate};
    use proptest::prelude::*;

    #[test]
    fn t1_sentence() {
        let parsed = parse_rule("DO camera_front.start_recording WHEN doorbell.buzzed").unwrap();
        assert_eq!(
            parsed.rule,
            Rule::new(
                "r1",
                vec![ActionRef::new("camera_front", "start_recording")],
                EventRef::new("doorbell", "buzzed"),
                vec![]
            )
        );
        assert_eq!(parsed.spans.actions, vec![SourceSpan { line: 1, column: 4, length: 28 }]);
        assert_eq!(parsed.spans.event, SourceSpan { line: 1, column: 38, length: 15 });
    }

    #[test]
    fn t2_sentence() {
        let rule = parse_rule(
            "DO window_1.close THEN window_2.close WHEN weather.rain_started WHILE user.location != home",
        )
        .unwrap()
        .rule;
        assert_eq!(rule.do_part.len(), 2);
        assert_eq!(rule.when_part, EventRef::new("weather", "rain_started"));
        assert_eq!(
            rule.while_part,
            vec![StatePredicate::new("user", "location", Comparator::Ne, "home")]
        );
    }

    #[test]
    fn two_events_do_not_parse() {
        let err = parse_rule("DO x.a WHEN e.one AND e.two").unwrap_err();
        assert_eq!(err.span, SourceSpan { line: 1, column: 19, length: 3 });
        assert_eq!(err.found, "AND");
        assert_eq!(err.expected, vec!["WHILE", "end of input"]);
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let a = parse_rule("do w.close then w.lock when d.buzzed while a.armed = TRUE and u.n >= -3").unwrap();
        let b = parse_rule("DO w.close THEN w.lock WHEN d.buzzed WHILE a.armed = true AND u.n >= -3").unwrap();
        assert_eq!(a.rule, b.rule);
        assert_eq!(a.rule.while_part[1].literal, Value::Int(-3));
    }

    #[test]
    fn comments_and_whitespace() {
        let parsed = parse_rule("  DO a.b   # trailing\n WHEN\tc.d # done").unwrap();
        assert_eq!(print_rule(&parsed.rule), "DO a.b WHEN c.d");
    }

    #[test]
    fn literal_forms() {
        let rule = parse_rule(r#"DO a.b WHEN c.d WHILE x.y = "two words" AND x.z != office AND x.w < 10"#)
            .unwrap()
            .rule;
        let lits: Vec<_> = rule.while_part.iter().map(|p| p.literal.clone()).collect();
        assert_eq!(lits, vec![Value::symbol("two words"), Value::symbol("office"), Value::Int(10)]);
        assert_eq!(
            print_rule(&rule),
            r#"DO a.b WHEN c.d WHILE x.y = "two words" AND x.z != office AND x.w < 10"#
        );
    }

    #[test]
    fn error_cases() {
        let cases: &[(&str, (usize, usize), &[&str])] = &[
            ("", (1, 1), &["DO"]),
            ("WHEN a.b", (1, 1), &["DO"]),
            ("DO a.b", (1, 7), &["THEN", "WHEN"]),
            ("DO a WHEN b.c", (1, 6), &["`.`"]),
            ("DO a.b WHEN c.d WHILE", (1, 22), &["identifier"]),
            ("DO a.b WHEN c.d WHILE x.y", (1, 26), &["comparator"]),
            ("DO a.b WHEN c.d WHILE x.y =", (1, 28), &["literal"]),
            ("DO a.b WHEN c.d WHILE x.y = 1 x.z = 2", (1, 31), &["AND", "end of input"]),
            ("DO when.b WHEN c.d", (1, 4), &["identifier"]),
            ("DO a.b WHEN c.d WHILE x.y ! 1", (1, 27), &["`!=`"]),
            ("DO a.b WHEN c.d WHILE x.y = \"open", (1, 29), &["closing `\"`"]),
            ("DO a.b WHEN c.d WHILE x.y = 99999999999999999999", (1, 29), &["integer in 64-bit range"]),
            ("DO a.b WHEN c.d WHILE x.y = 1 $", (1, 31), &["identifier", "keyword", "literal"]),
        ];
        for (src, (line, column), expected) in cases {
            let err = parse_rule(src).unwrap_err();
            assert_eq!((err.span.line, err.span.column), (*line, *column), "{src}: {err}");
            assert_eq!(&err.expected, expected, "{src}");
        }
    }

    #[test]
    fn empty_while_is_not_printed() {
        let rule = parse_rule("DO a.b WHEN c.d").unwrap().rule;
        assert!(!print_rule(&rule).contains("WHILE"));
    }

    #[test]
    fn rules_file_ids() {
        let src = "# house rules\n\nDO a.b WHEN c.d\n@night: DO a.c WHEN c.e\nDO a.d WHEN c.f # third\n";
        let parsed = parse_rules_file(src).unwrap();
        let ids: Vec<_> = parsed.iter().map(|p| p.rule.id.as_str()).collect();
        assert_eq!(ids, ["r1", "night", "r3"]);
        assert_eq!(parsed[2].spans.event.line, 5);
        let printed = print_rules_file(&parsed.iter().map(|p| p.rule.clone()).collect::<Vec<_>>());
        assert_eq!(printed, "DO a.b WHEN c.d\n@night: DO a.c WHEN c.e\nDO a.d WHEN c.f\n");
    }

    #[test]
    fn rules_file_errors_point_at_file_lines() {
        let err = parse_rules_file("DO a.b WHEN c.d\n\nDO a.b WHEN\n").unwrap_err();
        assert_eq!(err.span.line, 3);
        let err = parse_rules_file("@r2: DO a.b WHEN c.d\nDO a.b WHEN c.d\n").unwrap_err();
        assert_eq!(err.span.line, 2);
        assert!(err.found.contains("duplicate"));
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-zA-Z_][a-zA-Z0-9_]{0,8}".prop_filter("keywords are reserved", |s| keyword(s).is_none())
    }

    fn literal() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<bool>().prop_map(Value::Bool),
            any::<i64>().prop_map(Value::Int),
            ident().prop_map(Value::Symbol),
            "[ -~]{0,10}".prop_map(Value::Symbol),
        ]
    }

    prop_compose! {
        fn predicate()(d in ident(), a in ident(), c in prop::sample::select(Comparator::ALL.to_vec()), v in literal()) -> StatePredicate {
            StatePredicate { device: d, attribute: a, comparator: c, literal: v }
        }
    }

    prop_compose! {
        fn rule()(
            actions in prop::collection::vec((ident(), ident()), 1..4),
            event in (ident(), ident()),
            preds in prop::collection::vec(predicate(), 0..4),
        ) -> Rule {
            Rule {
                id: RuleId::positional(1),
                do_part: actions.into_iter().map(|(d, c)| ActionRef { device: d, capability: c }).collect(),
                when_part: EventRef { device: event.0, capability: event.1 },
                while_part: preds,
            }
        }
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(r in rule()) {
            let text = print_rule(&r);
            prop_assert_eq!(parse_rule(&text).unwrap().rule, r);
        }

        #[test]
        fn print_is_a_fixpoint(r in rule()) {
            let once = print_rule(&parse_rule(&print_rule(&r)).unwrap().rule);
            prop_assert_eq!(once.clone(), print_rule(&parse_rule(&once).unwrap().rule));
        }

        #[test]
        fn parser_is_total(s in "\\PC{0,60}") {
            if let Err(e) = parse_rule(&s) {
                let lines: Vec<&str> = s.split('\n').collect();
                prop_assert!(e.span.line >= 1 && e.span.line <= lines.len());
                prop_assert!(e.span.column >= 1 && e.span.column <= lines[e.span.line - 1].chars().count() + 1);
            }
        }
    }
}
