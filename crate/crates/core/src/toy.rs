//! A small probabilistic grammar that writes tagged, parsed English-like
//! text. Used for fixtures and desk-scale experiments where no real corpus is
//! at hand.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::seed::rng_for;
use crate::sentence::{AnnotatedSentence, Token};
use crate::tree::ParseTree;

const DT: &[&str] = &["the", "a", "this", "that", "every", "some", "one"];
const JJ: &[&str] = &[
    "small", "old", "green", "quiet", "bright", "heavy", "strange", "happy", "busy", "cold", "young", "famous",
    "empty", "narrow", "local", "careful", "long", "new", "tired", "clever",
];
const NN: &[&str] = &[
    "dog", "city", "teacher", "river", "book", "car", "window", "garden", "student", "market", "letter", "bridge",
    "doctor", "train", "song", "house", "farmer", "road", "child", "story", "picture", "school", "boat", "village",
    "friend", "kitchen", "problem", "meeting", "report", "plan", "machine", "forest", "museum", "table", "game",
    "voice", "station", "party", "lesson", "storm",
];
const NNS: &[&str] = &[
    "dogs",
    "cities",
    "teachers",
    "books",
    "cars",
    "windows",
    "students",
    "letters",
    "doctors",
    "songs",
    "houses",
    "farmers",
    "children",
    "stories",
    "pictures",
    "boats",
    "friends",
    "problems",
    "plans",
    "machines",
    "tables",
    "games",
    "lessons",
    "people",
    "questions",
    "flowers",
    "rules",
    "ideas",
];
const NNP: &[&str] = &[
    "John", "Mary", "London", "Paris", "Alice", "Tokyo", "Peter", "Anna", "Berlin", "Maria", "David", "Sarah", "Rome",
    "Kenji", "Lagos",
];
const PRP_SUBJ: &[&str] = &["he", "she", "they", "we", "it", "you", "I"];
const VBD_T: &[&str] = &[
    "saw",
    "found",
    "visited",
    "liked",
    "built",
    "opened",
    "wrote",
    "read",
    "painted",
    "carried",
    "watched",
    "moved",
    "closed",
    "cleaned",
    "sold",
    "bought",
    "met",
    "followed",
    "answered",
    "repaired",
    "described",
    "needed",
    "lost",
    "kept",
    "changed",
];
const VBD_I: &[&str] = &[
    "slept",
    "arrived",
    "laughed",
    "waited",
    "left",
    "smiled",
    "worked",
    "agreed",
    "returned",
    "stayed",
    "danced",
    "shouted",
    "disappeared",
    "improved",
];
const VB: &[&str] = &[
    "see", "find", "visit", "like", "build", "open", "write", "read", "carry", "watch", "move", "clean", "sell", "buy",
    "meet", "answer", "repair", "need", "keep", "change",
];
const MD: &[&str] = &["will", "can", "should", "might", "must"];
const RB: &[&str] = &[
    "quickly",
    "often",
    "yesterday",
    "today",
    "again",
    "slowly",
    "always",
    "never",
    "later",
    "early",
    "together",
    "outside",
    "carefully",
    "finally",
    "there",
];
const IN: &[&str] = &[
    "in", "near", "with", "behind", "under", "after", "before", "without", "across", "from",
];
const SUB: &[&str] = &["because", "when", "although", "while", "if", "since"];
const CC: &[&str] = &["and", "but", "so"];
const VBD_SAY: &[&str] = &[
    "said", "thought", "knew", "believed", "noticed", "heard", "felt", "hoped",
];
/// Transitive verbs that also read naturally without an object.
const VBD_OPT: &[&str] = &[
    "read", "watched", "moved", "changed", "cleaned", "answered", "painted", "followed",
];
const ADV_FRONT: &[&str] = &[
    "yesterday",
    "today",
    "later",
    "finally",
    "then",
    "suddenly",
    "now",
    "usually",
];

/// A bracketed-tree builder that also records leaves and tags.
struct Builder {
    tree: String,
    words: Vec<String>,
    tags: Vec<String>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            tree: String::new(),
            words: Vec::new(),
            tags: Vec::new(),
        }
    }

    fn open(&mut self, label: &str) {
        self.tree.push('(');
        self.tree.push_str(label);
        self.tree.push(' ');
    }

    fn close(&mut self) {
        if self.tree.ends_with(' ') {
            self.tree.pop();
        }
        self.tree.push_str(") ");
    }

    fn leaf(&mut self, tag: &str, word: &str) {
        self.tree.push_str(&format!("({tag} {word}) "));
        self.words.push(word.to_string());
        self.tags.push(tag.to_string());
    }

    fn pick(&mut self, rng: &mut impl Rng, tag: &str, list: &[&str]) {
        let w = *list.choose(rng).expect("non-empty word list");
        self.leaf(tag, w);
    }
}

fn noun_phrase(b: &mut Builder, rng: &mut impl Rng, subject: bool, depth: usize) {
    b.open("NP");
    let r: f64 = rng.gen();
    if subject && r < 0.3 {
        b.pick(rng, "PRP", PRP_SUBJ);
    } else if r < 0.42 {
        b.pick(rng, "NNP", NNP);
    } else {
        let plural = rng.gen_bool(0.3);
        if !plural || rng.gen_bool(0.5) {
            let dets: &[&str] = if plural { &["the", "some", "these", "many"] } else { DT };
            b.pick(rng, "DT", dets);
        }
        if rng.gen_bool(0.4) {
            b.pick(rng, "JJ", JJ);
        }
        if plural {
            b.pick(rng, "NNS", NNS);
        } else {
            b.pick(rng, "NN", NN);
        }
        if depth < 2 && rng.gen_bool(0.15) {
            prep_phrase(b, rng, depth + 1);
        } else if !subject && depth < 2 && rng.gen_bool(0.1) {
            // "the book (that) she read"
            b.open("SBAR");
            if rng.gen_bool(0.4) {
                b.open("WHNP");
                b.leaf("WDT", "that");
                b.close();
            }
            b.open("S");
            noun_phrase(b, rng, true, depth + 1);
            b.open("VP");
            b.pick(rng, "VBD", VBD_T);
            b.close();
            b.close();
            b.close();
        }
    }
    b.close();
}

fn prep_phrase(b: &mut Builder, rng: &mut impl Rng, depth: usize) {
    b.open("PP");
    b.pick(rng, "IN", IN);
    noun_phrase(b, rng, false, depth);
    b.close();
}

fn verb_phrase(b: &mut Builder, rng: &mut impl Rng, depth: usize) {
    b.open("VP");
    let r: f64 = rng.gen();
    if r < 0.12 && depth < 2 {
        // "said (that) he left"
        b.pick(rng, "VBD", VBD_SAY);
        b.open("SBAR");
        if rng.gen_bool(0.5) {
            b.leaf("IN", "that");
        }
        clause(b, rng, depth + 1);
        b.close();
        b.close();
        return;
    } else if r < 0.22 {
        b.pick(rng, "VBD", VBD_OPT);
    } else if r < 0.38 {
        b.pick(rng, "MD", MD);
        b.open("VP");
        b.pick(rng, "VB", VB);
        noun_phrase(b, rng, false, depth);
        b.close();
    } else if r < 0.58 {
        b.pick(rng, "VBD", VBD_I);
    } else {
        b.pick(rng, "VBD", VBD_T);
        noun_phrase(b, rng, false, depth);
    }
    if rng.gen_bool(0.25) {
        prep_phrase(b, rng, depth);
    }
    if rng.gen_bool(0.3) {
        b.open("ADVP");
        b.pick(rng, "RB", RB);
        b.close();
    }
    b.close();
}

fn clause(b: &mut Builder, rng: &mut impl Rng, depth: usize) {
    b.open("S");
    if depth == 0 && rng.gen_bool(0.15) {
        if rng.gen_bool(0.6) {
            b.open("ADVP");
            b.pick(rng, "RB", ADV_FRONT);
            b.close();
        } else {
            prep_phrase(b, rng, 1);
        }
    }
    noun_phrase(b, rng, true, depth);
    verb_phrase(b, rng, depth);
    if depth == 0 {
        let r: f64 = rng.gen();
        if r < 0.12 {
            b.open("SBAR");
            b.pick(rng, "IN", SUB);
            clause(b, rng, depth + 1);
            b.close();
        } else if r < 0.22 {
            b.leaf(",", ",");
            b.pick(rng, "CC", CC);
            clause(b, rng, depth + 1);
        }
    }
    b.close();
}

/// One sentence ending in `.`, with POS tags and a parse.
pub fn sentence(rng: &mut impl Rng) -> AnnotatedSentence {
    let mut b = Builder::new();
    b.open("ROOT");
    b.open("S");
    clause(&mut b, rng, 0);
    b.leaf(".", ".");
    b.close();
    b.close();
    // Capitalize the first word in both the token list and the tree.
    let first = b.words[0].clone();
    let cap = crate::sentence::uppercase_first(&first);
    let marker = format!(" {first})");
    let text = b.tree.trim_end().replacen(&marker, &format!(" {cap})"), 1);
    b.words[0] = cap;
    let tree = ParseTree::parse(&text).expect("generated trees are well formed");
    let tokens = b
        .words
        .iter()
        .zip(&b.tags)
        .map(|(w, t)| Token::new(w.as_str(), Some(t.clone())).expect("valid token"))
        .collect();
    AnnotatedSentence::new(tokens, Some(tree), "toy").expect("leaves match tokens")
}

fn paragraph(rng: &mut impl Rng, p: usize) -> Vec<AnnotatedSentence> {
    let n = rng.gen_range(3..=8);
    (0..n)
        .map(|i| {
            let s = sentence(rng);
            AnnotatedSentence::new(s.tokens().to_vec(), s.parse().cloned(), format!("toy{p}.{i}")).expect("same tokens")
        })
        .collect()
}

/// `paragraphs` paragraphs of 3 to 8 sentences each, seeded.
pub fn corpus(paragraphs: usize, seed: u64) -> Vec<Vec<AnnotatedSentence>> {
    let mut rng = rng_for(seed, "toy");
    (0..paragraphs).map(|p| paragraph(&mut rng, p)).collect()
}

/// Paragraphs from the same stream as [`corpus`], until at least
/// `sentences` sentences exist.
pub fn corpus_with_sentences(sentences: usize, seed: u64) -> Vec<Vec<AnnotatedSentence>> {
    let mut rng = rng_for(seed, "toy");
    let mut out: Vec<Vec<AnnotatedSentence>> = Vec::new();
    let mut total = 0;
    while total < sentences {
        let para = paragraph(&mut rng, out.len());
        total += para.len();
        out.push(para);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn sentences_are_consistent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let s = sentence(&mut rng);
            assert!(s.tokens()[0].is_capitalized());
            assert_eq!(s.tokens().last().unwrap().surface(), ".");
            assert_eq!(s.parse().unwrap().leaf_count(), s.len());
            assert!(s.tokens().iter().all(|t| t.pos().is_some()));
        }
    }

    #[test]
    fn corpus_is_seeded() {
        assert_eq!(corpus(5, 1), corpus(5, 1));
        assert_ne!(corpus(5, 1), corpus(5, 2));
        let c = corpus_with_sentences(100, 4);
        assert!(c.iter().map(Vec::len).sum::<usize>() >= 100);
        assert_eq!(c[..5], corpus(5, 4)[..]);
    }
}
