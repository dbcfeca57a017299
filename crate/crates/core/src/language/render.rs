use crate::ids::FactKey;
use crate::language::ast::{Atom, Claim, Document, Prompt, Sentence};
use crate::language::vocab::Vocabulary;

pub fn render_atom(atom: &Atom, vocab: &Vocabulary) -> String {
    format!(
        "{} {} {}",
        vocab.entity_surface(&atom.subject),
        vocab.relation_surface(&atom.relation),
        vocab.entity_surface(&atom.object)
    )
}

fn label(l: bool) -> &'static str {
    if l {
        "true"
    } else {
        "false"
    }
}

/// Claim text up to and including `is`.
pub fn render_claim_prompt(claim: &Claim, vocab: &Vocabulary) -> String {
    match claim {
        Claim::Atom(a) => format!("\"{}\" is", render_atom(a, vocab)),
        Claim::Not(a) => format!("\"not {}\" is", render_atom(a, vocab)),
        Claim::And(a, b) => format!(
            "\"{}\" and \"{}\" is",
            render_atom(a, vocab),
            render_atom(b, vocab)
        ),
        Claim::Or(a, b) => format!(
            "\"{}\" or \"{}\" is",
            render_atom(a, vocab),
            render_atom(b, vocab)
        ),
    }
}

pub fn render_key_prompt(key: &FactKey, vocab: &Vocabulary) -> String {
    format!(
        "{} {}",
        vocab.entity_surface(&key.subject),
        vocab.relation_surface(&key.relation)
    )
}

pub fn render_prompt(prompt: &Prompt, vocab: &Vocabulary) -> String {
    match prompt {
        Prompt::NextObject(key) => render_key_prompt(key, vocab),
        Prompt::Truth(claim) => render_claim_prompt(claim, vocab),
    }
}

/// Canonical surface form of a sentence.
pub fn render(sentence: &Sentence, vocab: &Vocabulary) -> String {
    match sentence {
        Sentence::Atomic(a) => render_atom(a, vocab),
        Sentence::Truth { claim, label: l } => {
            format!("{} {}", render_claim_prompt(claim, vocab), label(*l))
        }
    }
}

/// Sentences joined by ` . ` and terminated by ` .`, as one line.
pub fn render_document(doc: &Document, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for s in &doc.sentences {
        out.push_str(&render(s, vocab));
        out.push_str(" . ");
    }
    out.pop();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        let mut v = Vocabulary::new();
        v.add_entity("gsc".into(), "grace stone coates");
        v.add_entity("sc".into(), "scions");
        v.add_relation("edu".into(), "educated at");
        v
    }

    #[test]
    fn atomic_sentence_is_space_joined() {
        let a = Atom::new("gsc", "edu", "sc");
        assert_eq!(
            render(&Sentence::Atomic(a), &vocab()),
            "grace stone coates educated at scions"
        );
    }

    #[test]
    fn false_truth_claim_is_quoted() {
        let a = Atom::new("gsc", "edu", "sc");
        assert_eq!(
            render(&Sentence::truth(Claim::Atom(a), false), &vocab()),
            "\"grace stone coates educated at scions\" is false"
        );
    }

    #[test]
    fn document_terminates_with_period() {
        let a = Atom::new("gsc", "edu", "sc");
        let doc = Document {
            topic: "gsc".into(),
            sentences: vec![
                Sentence::Atomic(a.clone()),
                Sentence::truth(Claim::Not(a), true),
            ],
        };
        assert_eq!(
            render_document(&doc, &vocab()),
            "grace stone coates educated at scions . \"not grace stone coates educated at scions\" is true ."
        );
    }
}
