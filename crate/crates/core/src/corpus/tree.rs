//! Bracketed (Penn-style) constituency parse strings.
//!
//! Trees arrive as strings like `(S (NP (NN dog)) (VP (VBZ barks)))`. The
//! reader is a small recursive-descent parser over the bracket language; the
//! [`linearize`](ParseTree::linearize) operation flattens a tree back into a
//! bracket-token sequence so it can be fed to a sequence encoder.

use crate::error::{Error, Result};

/// A constituency tree: interior nodes carry a label, leaves carry a word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseTree {
    Node {
        label: String,
        children: Vec<ParseTree>,
    },
    Leaf {
        word: String,
    },
}

/// What [`ParseTree::linearize`] emits for leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linearize {
    /// Brackets and node labels only; terminal words are dropped.
    LabelsOnly,
    /// Brackets, node labels and terminal words.
    LabelsAndTerminals,
}

impl ParseTree {
    /// Parse a bracketed tree string.
    ///
    /// Accepts the common PTB wrapping `( (S ...) )` (an unlabeled root) as
    /// well as plain `(S ...)`. Unbalanced brackets, trailing garbage, and
    /// empty input are rejected.
    pub fn parse(s: &str) -> Result<ParseTree> {
        let tokens = lex(s)?;
        let mut pos = 0;
        let tree = parse_node(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::validation(format!(
                "trailing content after parse tree (token {pos} of {})",
                tokens.len()
            )));
        }
        Ok(tree)
    }

    /// Number of terminal words.
    pub fn terminal_count(&self) -> usize {
        match self {
            ParseTree::Leaf { .. } => 1,
            ParseTree::Node { children, .. } => children.iter().map(|c| c.terminal_count()).sum(),
        }
    }

    /// Terminal words, left to right.
    pub fn terminals(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_terminals(&mut out);
        out
    }

    fn collect_terminals<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ParseTree::Leaf { word } => out.push(word),
            ParseTree::Node { children, .. } => {
                for c in children {
                    c.collect_terminals(out);
                }
            }
        }
    }

    /// Flatten the tree into a bracket-token sequence.
    ///
    /// Every interior node contributes an opening token `(<label>` and a
    /// closing token `)`, so the output is always balanced.
    pub fn linearize(&self, mode: Linearize) -> Vec<String> {
        let mut out = Vec::new();
        self.linearize_into(mode, &mut out);
        out
    }

    fn linearize_into(&self, mode: Linearize, out: &mut Vec<String>) {
        match self {
            ParseTree::Leaf { word } => {
                if mode == Linearize::LabelsAndTerminals {
                    out.push(word.clone());
                }
            }
            ParseTree::Node { label, children } => {
                out.push(format!("({label}"));
                for c in children {
                    c.linearize_into(mode, out);
                }
                out.push(")".to_string());
            }
        }
    }
}

#[derive(Debug, PartialEq)]
enum Tok {
    Open,
    Close,
    Word(String),
}

fn lex(s: &str) -> Result<Vec<Tok>> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in s.chars() {
        if ch == '(' || ch == ')' || ch.is_whitespace() {
            if !word.is_empty() {
                tokens.push(Tok::Word(std::mem::take(&mut word)));
            }
            match ch {
                '(' => tokens.push(Tok::Open),
                ')' => tokens.push(Tok::Close),
                _ => {}
            }
        } else {
            word.push(ch);
        }
    }
    if !word.is_empty() {
        tokens.push(Tok::Word(word));
    }
    if tokens.is_empty() {
        return Err(Error::validation("empty parse string".to_string()));
    }
    Ok(tokens)
}

/// Parse one `( label children... )` group starting at `*pos`.
fn parse_node(tokens: &[Tok], pos: &mut usize) -> Result<ParseTree> {
    match tokens.get(*pos) {
        Some(Tok::Open) => {}
        Some(Tok::Word(w)) => {
            return Err(Error::validation(format!(
                "expected '(' but found word {w:?}"
            )))
        }
        Some(Tok::Close) | None => {
            return Err(Error::validation("unbalanced parse brackets".to_string()))
        }
    }
    *pos += 1;

    // Optional label: `( (S ...) )` has none.
    let label = match tokens.get(*pos) {
        Some(Tok::Word(w)) => {
            *pos += 1;
            w.clone()
        }
        _ => String::new(),
    };

    let mut children = Vec::new();
    loop {
        match tokens.get(*pos) {
            Some(Tok::Close) => {
                *pos += 1;
                break;
            }
            Some(Tok::Open) => children.push(parse_node(tokens, pos)?),
            Some(Tok::Word(w)) => {
                children.push(ParseTree::Leaf { word: w.clone() });
                *pos += 1;
            }
            None => return Err(Error::validation("unbalanced parse brackets".to_string())),
        }
    }
    Ok(ParseTree::Node { label, children })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_counts_terminals() {
        let t = ParseTree::parse("(S (NP (NN dog)) (VP (VBZ barks)))").unwrap();
        assert_eq!(t.terminal_count(), 2);
        assert_eq!(t.terminals(), vec!["dog", "barks"]);
    }

    #[test]
    fn accepts_unlabeled_ptb_root() {
        let t = ParseTree::parse("( (S (NN x)) )").unwrap();
        assert_eq!(t.terminal_count(), 1);
        match &t {
            ParseTree::Node { label, children } => {
                assert_eq!(label, "");
                assert_eq!(children.len(), 1);
            }
            _ => panic!("root should be a node"),
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(ParseTree::parse("").is_err());
        assert!(ParseTree::parse("(S (NP x)").is_err());
        assert!(ParseTree::parse("(S x))").is_err());
        assert!(ParseTree::parse("no brackets").is_err());
        assert!(ParseTree::parse("(S x) (S y)").is_err());
    }

    #[test]
    fn linearize_labels_only_drops_terminals() {
        let t = ParseTree::parse("(S (NP (NN dog)) (VP (VBZ barks)))").unwrap();
        let toks = t.linearize(Linearize::LabelsOnly);
        assert_eq!(
            toks,
            vec!["(S", "(NP", "(NN", ")", ")", "(VP", "(VBZ", ")", ")", ")"]
        );
    }

    #[test]
    fn linearize_with_terminals_keeps_words() {
        let t = ParseTree::parse("(S (NP (NN dog)) (VP (VBZ barks)))").unwrap();
        let toks = t.linearize(Linearize::LabelsAndTerminals);
        assert_eq!(
            toks,
            vec!["(S", "(NP", "(NN", "dog", ")", ")", "(VP", "(VBZ", "barks", ")", ")", ")"]
        );
    }

    #[test]
    fn linearization_is_balanced() {
        // Oracle: count opens and closes over a batch of generated trees.
        for depth in 1..6 {
            let mut s = String::new();
            for d in 0..depth {
                s.push_str(&format!("(N{d} "));
            }
            s.push_str("leaf");
            s.push_str(&")".repeat(depth));
            let t = ParseTree::parse(&s).unwrap();
            for mode in [Linearize::LabelsOnly, Linearize::LabelsAndTerminals] {
                let toks = t.linearize(mode);
                let opens = toks.iter().filter(|t| t.starts_with('(')).count();
                let closes = toks.iter().filter(|t| t.as_str() == ")").count();
                assert_eq!(opens, closes);
                assert_eq!(opens, depth);
            }
        }
    }
}
