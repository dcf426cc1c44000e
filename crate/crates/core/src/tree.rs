//! Constituency trees in bracketed (Penn Treebank) notation.
//!
//! Trees are stored as an arena of nodes. Leaves are the words; a node whose
//! only child is a leaf is a preterminal (its label is the POS tag).

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("unbalanced brackets at byte {0}")]
    Unbalanced(usize),
    #[error("unexpected token {token:?} at byte {offset}")]
    Unexpected { token: String, offset: usize },
    #[error("empty tree")]
    Empty,
    #[error("malformed tree: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    label: String,
    parent: Option<usize>,
    children: Vec<usize>,
}

/// A rooted, labeled constituency tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTree {
    nodes: Vec<Node>,
    root: usize,
    leaves: Vec<usize>,
}

/// The two constituents that separate adjacent leaves: the children of their
/// lowest common ancestor that lie on the path to each leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UncommonAncestors {
    pub left: String,
    pub right: String,
    pub left_preterminal: bool,
    pub right_preterminal: bool,
}

impl UncommonAncestors {
    /// `preterminal/phrase` style description of the pair.
    pub fn pair_kind(&self) -> String {
        fn kind(pre: bool) -> &'static str {
            if pre {
                "preterminal"
            } else {
                "phrase"
            }
        }
        format!("{}/{}", kind(self.left_preterminal), kind(self.right_preterminal))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Lexeme<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(input: &str) -> Vec<(usize, Lexeme<'_>)> {
    let mut out = Vec::new();
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Lexeme::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Lexeme::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'(' && bytes[i] != b')' {
                    i += 1;
                }
                out.push((start, Lexeme::Atom(&input[start..i])));
            }
        }
    }
    out
}

impl ParseTree {
    /// Parses a bracketed tree such as `(S (NP (PRP we)) (VP (VBP do)))`.
    ///
    /// An unlabeled outer bracket, as in `( (S ...))`, yields a root with an
    /// empty label.
    pub fn parse(input: &str) -> Result<Self, TreeError> {
        let lexemes = lex(input);
        if lexemes.is_empty() {
            return Err(TreeError::Empty);
        }
        let mut tree = ParseTree {
            nodes: Vec::new(),
            root: 0,
            leaves: Vec::new(),
        };
        let mut pos = 0;
        let root = tree.parse_node(&lexemes, &mut pos, None)?;
        if pos != lexemes.len() {
            let (offset, lx) = &lexemes[pos];
            return Err(TreeError::Unexpected {
                token: format!("{lx:?}"),
                offset: *offset,
            });
        }
        tree.root = root;
        if tree.leaves.is_empty() {
            return Err(TreeError::Malformed("tree has no leaves".into()));
        }
        Ok(tree)
    }

    fn parse_node(
        &mut self,
        lexemes: &[(usize, Lexeme<'_>)],
        pos: &mut usize,
        parent: Option<usize>,
    ) -> Result<usize, TreeError> {
        let (offset, lx) = lexemes.get(*pos).ok_or(TreeError::Unbalanced(usize::MAX))?;
        match lx {
            Lexeme::Atom(word) => {
                *pos += 1;
                let id = self.push(word, parent);
                self.leaves.push(id);
                Ok(id)
            }
            Lexeme::Close => Err(TreeError::Unbalanced(*offset)),
            Lexeme::Open => {
                *pos += 1;
                let label = match lexemes.get(*pos) {
                    Some((_, Lexeme::Atom(l))) => {
                        *pos += 1;
                        *l
                    }
                    Some((_, Lexeme::Open)) => "",
                    Some((o, Lexeme::Close)) => {
                        return Err(TreeError::Malformed(format!("empty constituent at byte {o}")))
                    }
                    None => return Err(TreeError::Unbalanced(*offset)),
                };
                let id = self.push(label, parent);
                loop {
                    match lexemes.get(*pos) {
                        Some((_, Lexeme::Close)) => {
                            *pos += 1;
                            break;
                        }
                        Some(_) => {
                            let child = self.parse_node(lexemes, pos, Some(id))?;
                            self.nodes[id].children.push(child);
                        }
                        None => return Err(TreeError::Unbalanced(*offset)),
                    }
                }
                if self.nodes[id].children.is_empty() {
                    return Err(TreeError::Malformed(format!(
                        "constituent {label:?} at byte {offset} has no children"
                    )));
                }
                Ok(id)
            }
        }
    }

    fn push(&mut self, label: &str, parent: Option<usize>) -> usize {
        self.nodes.push(Node {
            label: label.to_string(),
            parent,
            children: Vec::new(),
        });
        self.nodes.len() - 1
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Leaf words in order.
    pub fn leaves(&self) -> impl Iterator<Item = &str> + '_ {
        self.leaves.iter().map(|&id| self.nodes[id].label.as_str())
    }

    pub fn root_label(&self) -> &str {
        &self.nodes[self.root].label
    }

    fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_empty()
    }

    fn is_preterminal(&self, id: usize) -> bool {
        let ch = &self.nodes[id].children;
        ch.len() == 1 && self.is_leaf(ch[0])
    }

    /// Path from the root down to `id`, inclusive.
    fn path_from_root(&self, mut id: usize) -> Vec<usize> {
        let mut path = vec![id];
        while let Some(p) = self.nodes[id].parent {
            path.push(p);
            id = p;
        }
        path.reverse();
        path
    }

    /// Finds the lowest common ancestor of leaves `gap` and `gap + 1` and
    /// returns its children on the way to each leaf.
    pub fn highest_uncommon_ancestors(&self, gap: usize) -> Result<UncommonAncestors, TreeError> {
        if gap + 1 >= self.leaves.len() {
            return Err(TreeError::Malformed(format!(
                "gap {gap} out of range for a tree with {} leaves",
                self.leaves.len()
            )));
        }
        let left = self.path_from_root(self.leaves[gap]);
        let right = self.path_from_root(self.leaves[gap + 1]);
        let shared = left.iter().zip(&right).take_while(|(a, b)| a == b).count();
        // Distinct leaves can never share the whole path.
        let l = left[shared];
        let r = right[shared];
        Ok(UncommonAncestors {
            left: self.nodes[l].label.clone(),
            right: self.nodes[r].label.clone(),
            left_preterminal: self.is_preterminal(l),
            right_preterminal: self.is_preterminal(r),
        })
    }

    pub(crate) fn set_leaf(&mut self, index: usize, word: &str) {
        let id = self.leaves[index];
        self.nodes[id].label = word.to_string();
    }

    /// Copy of the subtree rooted at `id`, skipping the leaf `drop_leaf` and
    /// any constituent left without children by that removal.
    fn copy_into(
        &self,
        id: usize,
        drop_leaf: Option<usize>,
        out: &mut ParseTree,
        parent: Option<usize>,
    ) -> Option<usize> {
        if Some(id) == drop_leaf {
            return None;
        }
        let new_id = out.push(&self.nodes[id].label, parent);
        if self.is_leaf(id) {
            out.leaves.push(new_id);
            return Some(new_id);
        }
        for &c in &self.nodes[id].children {
            if let Some(nc) = self.copy_into(c, drop_leaf, out, Some(new_id)) {
                out.nodes[new_id].children.push(nc);
            }
        }
        if out.nodes[new_id].children.is_empty() {
            out.nodes.pop();
            return None;
        }
        Some(new_id)
    }

    /// Joins two sentence trees into one, dropping the first tree's final
    /// leaf (its terminal punctuation).
    ///
    /// Wrapper roots with a single child (`ROOT`, or the unlabeled PTB outer
    /// bracket) are unwrapped and the two clauses become siblings under a
    /// fresh copy of the first tree's wrapper label.
    pub(crate) fn join_without_final_leaf(a: &ParseTree, b: &ParseTree) -> Option<ParseTree> {
        fn inner(t: &ParseTree) -> (usize, Option<&str>) {
            let root = &t.nodes[t.root];
            if root.children.len() == 1 && !t.is_leaf(root.children[0]) && !t.is_preterminal(t.root) {
                (root.children[0], Some(root.label.as_str()))
            } else {
                (t.root, None)
            }
        }
        let (a_in, wrap) = inner(a);
        let (b_in, _) = inner(b);
        let mut out = ParseTree {
            nodes: Vec::new(),
            root: 0,
            leaves: Vec::new(),
        };
        let root = out.push(wrap.unwrap_or("ROOT"), None);
        let drop = a.leaves.last().copied();
        let left = a.copy_into(a_in, drop, &mut out, Some(root))?;
        out.nodes[root].children.push(left);
        let right = b.copy_into(b_in, None, &mut out, Some(root))?;
        out.nodes[root].children.push(right);
        out.root = root;
        Some(out)
    }

    fn write_node(&self, id: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let node = &self.nodes[id];
        if node.children.is_empty() {
            return f.write_str(&node.label);
        }
        f.write_str("(")?;
        f.write_str(&node.label)?;
        for &c in &node.children {
            f.write_str(" ")?;
            self.write_node(c, f)?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_node(self.root, f)
    }
}

impl std::str::FromStr for ParseTree {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParseTree::parse(s)
    }
}
