//! The formal language: atoms, truth claims and the not/and/or connectives.

pub mod ast;
pub mod parse;
pub mod render;
pub mod vocab;

pub use ast::{Atom, Claim, Document, Prompt, Sentence, MAX_DOCUMENT_SENTENCES};
pub use parse::{parse, parse_document, parse_prompt, whitespace_tokens};
pub use render::{
    render, render_atom, render_claim_prompt, render_document, render_key_prompt, render_prompt,
};
pub use vocab::Vocabulary;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WORDS: &[&str] = &[
        "kalo", "mirta", "ven", "sari", "dor", "elbru", "naquil", "tesfa", "gor", "halim",
    ];

    fn vocab() -> Vocabulary {
        let mut v = Vocabulary::new();
        let mut k = 0;
        for a in WORDS {
            v.add_entity(format!("e{k}").into(), a);
            k += 1;
            for b in WORDS.iter().take(4) {
                v.add_entity(format!("e{k}").into(), &format!("{a} {b}"));
                k += 1;
            }
        }
        for (i, r) in ["educated at", "occupation", "place of birth", "sport"]
            .iter()
            .enumerate()
        {
            v.add_relation(format!("r{i}").into(), r);
        }
        v
    }

    fn atom_strategy(n_entities: usize) -> impl Strategy<Value = Atom> + Clone {
        (0..n_entities, 0..4usize, 0..n_entities).prop_map(|(s, r, o)| {
            Atom::new(
                format!("e{s}").as_str(),
                format!("r{r}").as_str(),
                format!("e{o}").as_str(),
            )
        })
    }

    fn sentence_strategy(n: usize) -> impl Strategy<Value = Sentence> {
        let a = atom_strategy(n);
        prop_oneof![
            a.clone().prop_map(Sentence::Atomic),
            (a.clone(), any::<bool>()).prop_map(|(x, l)| Sentence::truth(Claim::Atom(x), l)),
            (a.clone(), any::<bool>()).prop_map(|(x, l)| Sentence::truth(Claim::Not(x), l)),
            (a.clone(), a.clone(), any::<bool>())
                .prop_map(|(x, y, l)| Sentence::truth(Claim::And(x, y), l)),
            (a.clone(), a, any::<bool>()).prop_map(|(x, y, l)| Sentence::truth(Claim::Or(x, y), l)),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn parse_inverts_render(s in sentence_strategy(WORDS.len() * 5)) {
            let v = vocab();
            let text = render(&s, &v);
            let back = parse(&text, &v).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(render(&back, &v), text);
        }
    }
}
