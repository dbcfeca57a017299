//! Recursive-descent parser for the sentence grammar.
//!
//! ```text
//! sentence  = claim "is" label | atom ;
//! prompt    = claim "is" | entity relation ;
//! claim     = quoted_body [ ("and" | "or") quoted_atom ] ;
//! body      = [ "not" ] atom ;
//! atom      = entity relation entity ;
//! label     = "true" | "false" ;
//! document  = sentence { "." sentence } "." ;
//! ```
//!
//! Entity and relation names may span several words; they are matched longest first.

use std::ops::Range;

use crate::error::ParseError;
use crate::ids::FactKey;
use crate::language::ast::{Atom, Claim, Prompt, Sentence};
use crate::language::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Quote,
}

#[derive(Debug, Clone)]
struct Token<'a> {
    tok: Tok<'a>,
    span: Range<usize>,
}

fn lex(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() || c == '"' {
            if let Some(s) = start.take() {
                out.push(Token {
                    tok: Tok::Word(&text[s..i]),
                    span: s..i,
                });
            }
            if c == '"' {
                out.push(Token {
                    tok: Tok::Quote,
                    span: i..i + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            tok: Tok::Word(&text[s..]),
            span: s..text.len(),
        });
    }
    out
}

struct Parser<'t, 'v> {
    text: &'t str,
    toks: &'t [Token<'t>],
    pos: usize,
    vocab: &'v Vocabulary,
}

fn join_words(words: &[Token<'_>]) -> String {
    words
        .iter()
        .filter_map(|t| match t.tok {
            Tok::Word(w) => Some(w),
            Tok::Quote => None,
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn span_of(words: &[Token<'_>]) -> Range<usize> {
    match (words.first(), words.last()) {
        (Some(a), Some(b)) => a.span.start..b.span.end,
        _ => 0..0,
    }
}

/// Resolves `entity relation entity` over exactly `words`, preferring the longest subject and
/// relation. Reports the deepest failure.
fn resolve_atom(
    words: &[Token<'_>],
    vocab: &Vocabulary,
    end_pos: usize,
) -> Result<Atom, ParseError> {
    let n = words.len();
    if n < 3 {
        return Err(ParseError::Syntax {
            pos: words.first().map_or(end_pos, |t| t.span.start),
            message: "an atom needs a subject, a relation and an object".into(),
        });
    }
    let mut deepest: Option<(usize, ParseError)> = None;
    let mut note = |depth: usize, err: ParseError| {
        if deepest.as_ref().is_none_or(|(d, _)| depth > *d) {
            deepest = Some((depth, err));
        }
    };
    let max_s = vocab.max_entity_words().min(n - 2);
    for sl in (1..=max_s).rev() {
        let Some(subject) = vocab.entity(&join_words(&words[..sl])) else {
            continue;
        };
        let max_r = vocab.max_relation_words().min(n - sl - 1);
        let mut found_relation = false;
        for rl in (1..=max_r).rev() {
            let Some(relation) = vocab.relation(&join_words(&words[sl..sl + rl])) else {
                continue;
            };
            found_relation = true;
            let obj = &words[sl + rl..];
            match vocab.entity(&join_words(obj)) {
                Some(object) => {
                    return Ok(Atom {
                        subject: subject.clone(),
                        relation: relation.clone(),
                        object: object.clone(),
                    })
                }
                None => note(
                    2,
                    ParseError::UnknownEntity {
                        span: span_of(obj),
                        text: join_words(obj),
                    },
                ),
            }
        }
        if !found_relation {
            let rest = &words[sl..];
            let take = vocab.max_relation_words().max(1).min(rest.len());
            note(
                1,
                ParseError::UnknownRelation {
                    span: span_of(&rest[..take]),
                    text: join_words(&rest[..take]),
                },
            );
        }
    }
    Err(deepest.map(|(_, e)| e).unwrap_or_else(|| {
        let take = vocab.max_entity_words().max(1).min(n);
        ParseError::UnknownEntity {
            span: span_of(&words[..take]),
            text: join_words(&words[..take]),
        }
    }))
}

/// Resolves `entity relation` over exactly `words`.
fn resolve_key(
    words: &[Token<'_>],
    vocab: &Vocabulary,
    end_pos: usize,
) -> Result<FactKey, ParseError> {
    let n = words.len();
    if n < 2 {
        return Err(ParseError::Syntax {
            pos: words.first().map_or(end_pos, |t| t.span.start),
            message: "a prompt needs a subject and a relation".into(),
        });
    }
    for sl in (1..=vocab.max_entity_words().min(n - 1)).rev() {
        if let Some(subject) = vocab.entity(&join_words(&words[..sl])) {
            if let Some(relation) = vocab.relation(&join_words(&words[sl..])) {
                return Ok(FactKey::new(subject.clone(), relation.clone()));
            }
        }
    }
    Err(ParseError::UnknownRelation {
        span: span_of(words),
        text: join_words(words),
    })
}

impl<'t, 'v> Parser<'t, 'v> {
    fn peek(&self) -> Option<&Token<'t>> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.text.len(), |t| t.span.start)
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.here(),
            message: message.into(),
        })
    }

    fn expect_quote(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Quote, ..
            }) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.syntax("expected '\"'"),
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w), ..
            }) if *w == word => {
                self.pos += 1;
                Ok(())
            }
            _ => self.syntax(format!("expected {word:?}")),
        }
    }

    /// Words up to the next quote; consumes the closing quote.
    fn quoted_words(&mut self) -> Result<&'t [Token<'t>], ParseError> {
        self.expect_quote()?;
        let start = self.pos;
        while let Some(t) = self.peek() {
            if t.tok == Tok::Quote {
                let words = &self.toks[start..self.pos];
                self.pos += 1;
                return Ok(words);
            }
            self.pos += 1;
        }
        Err(ParseError::Syntax {
            pos: self.text.len(),
            message: "unterminated quote".into(),
        })
    }

    fn body(&self, words: &[Token<'_>], end: usize) -> Result<Claim, ParseError> {
        if let Some(Token {
            tok: Tok::Word("not"),
            ..
        }) = words.first()
        {
            match resolve_atom(&words[1..], self.vocab, end) {
                Ok(a) => return Ok(Claim::Not(a)),
                Err(not_err) => {
                    // an entity whose name starts with "not"
                    return resolve_atom(words, self.vocab, end)
                        .map(Claim::Atom)
                        .map_err(|_| not_err);
                }
            }
        }
        resolve_atom(words, self.vocab, end).map(Claim::Atom)
    }

    fn claim(&mut self) -> Result<Claim, ParseError> {
        let first = self.quoted_words()?;
        let end = self.toks[self.pos - 1].span.start;
        let left = self.body(first, end)?;
        let op = match self.peek() {
            Some(Token {
                tok: Tok::Word(w @ ("and" | "or")),
                ..
            }) => *w,
            _ => return Ok(left),
        };
        let op_pos = self.here();
        self.pos += 1;
        let Claim::Atom(a) = left else {
            return Err(ParseError::Syntax {
                pos: op_pos,
                message: format!("{op:?} cannot follow a negated claim"),
            });
        };
        let second = self.quoted_words()?;
        let end = self.toks[self.pos - 1].span.start;
        let b = resolve_atom(second, self.vocab, end)?;
        Ok(if op == "and" {
            Claim::And(a, b)
        } else {
            Claim::Or(a, b)
        })
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => self.syntax("unexpected trailing input"),
        }
    }

    fn sentence(&mut self) -> Result<Sentence, ParseError> {
        match self.peek() {
            None => self.syntax("empty sentence"),
            Some(Token {
                tok: Tok::Quote, ..
            }) => {
                let claim = self.claim()?;
                self.expect_word("is")?;
                let label = match self.peek() {
                    Some(Token {
                        tok: Tok::Word("true"),
                        ..
                    }) => true,
                    Some(Token {
                        tok: Tok::Word("false"),
                        ..
                    }) => false,
                    _ => return self.syntax("expected \"true\" or \"false\""),
                };
                self.pos += 1;
                self.finish()?;
                Ok(Sentence::Truth { claim, label })
            }
            Some(_) => {
                if let Some(q) = self.toks.iter().find(|t| t.tok == Tok::Quote) {
                    return Err(ParseError::Syntax {
                        pos: q.span.start,
                        message: "unexpected '\"' in atomic sentence".into(),
                    });
                }
                resolve_atom(self.toks, self.vocab, self.text.len()).map(Sentence::Atomic)
            }
        }
    }

    fn prompt(&mut self) -> Result<Prompt, ParseError> {
        match self.peek() {
            None => self.syntax("empty prompt"),
            Some(Token {
                tok: Tok::Quote, ..
            }) => {
                let claim = self.claim()?;
                self.expect_word("is")?;
                self.finish()?;
                Ok(Prompt::Truth(claim))
            }
            Some(_) => resolve_key(self.toks, self.vocab, self.text.len()).map(Prompt::NextObject),
        }
    }
}

/// Parses one sentence in canonical form.
pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Sentence, ParseError> {
    let toks = lex(text);
    Parser {
        text,
        toks: &toks,
        pos: 0,
        vocab,
    }
    .sentence()
}

/// Parses a probe prompt: `s r` or a claim followed by `is`.
pub fn parse_prompt(text: &str, vocab: &Vocabulary) -> Result<Prompt, ParseError> {
    let toks = lex(text);
    Parser {
        text,
        toks: &toks,
        pos: 0,
        vocab,
    }
    .prompt()
}

/// Splits a document line at `.` tokens and parses each sentence. Spans index into `line`.
pub fn parse_document(line: &str, vocab: &Vocabulary) -> Result<Vec<Sentence>, ParseError> {
    let toks = lex(line);
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.tok == Tok::Word(".") {
            if i == start {
                return Err(ParseError::Syntax {
                    pos: t.span.start,
                    message: "empty sentence".into(),
                });
            }
            let mut p = Parser {
                text: line,
                toks: &toks[start..i],
                pos: 0,
                vocab,
            };
            out.push(p.sentence().map_err(|e| match e {
                // an error at the end of a slice points at the period
                ParseError::Syntax { pos, message } if pos == line.len() => ParseError::Syntax {
                    pos: t.span.start,
                    message,
                },
                other => other,
            })?);
            start = i + 1;
        }
    }
    if start != toks.len() {
        return Err(ParseError::Syntax {
            pos: toks[start].span.start,
            message: "document must end with \".\"".into(),
        });
    }
    Ok(out)
}

/// Whitespace tokens in a line; the corpus token statistic.
pub fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}
