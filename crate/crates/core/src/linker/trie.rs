use super::LinkError;
use crate::schema::ToolInventory;
use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Node {
    /// Sorted by token id.
    children: Vec<(TokenId, u32)>,
    tool: Option<usize>,
}

/// Token-level prefix tree over `name + terminator` for every tool.
///
/// Each path is the greedy tokenization of the tool's name followed by the
/// name terminator. Because the terminator cannot occur inside a name, no
/// path is a prefix of another and every leaf identifies one tool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameTrie {
    nodes: Vec<Node>,
    leaves: usize,
}

pub fn build_name_trie(inv: &ToolInventory, v: &Vocabulary, terminator: &[u8]) -> Result<NameTrie, LinkError> {
    let mut trie = NameTrie { nodes: vec![Node::default()], leaves: 0 };
    for (i, tool) in inv.tools.iter().enumerate() {
        let mut text = tool.tool_name.as_bytes().to_vec();
        text.extend_from_slice(terminator);
        let path = v
            .tokenize_greedy(&text)
            .map_err(|_| LinkError::InexpressibleName { tool: tool.tool_name.clone() })?;
        let mut node = 0u32;
        for &tok in &path {
            if trie.nodes[node as usize].tool.is_some() {
                return Err(LinkError::AmbiguousName { tool: tool.tool_name.clone() });
            }
            node = match trie.child(node, tok) {
                Some(c) => c,
                None => {
                    let c = trie.nodes.len() as u32;
                    trie.nodes.push(Node::default());
                    let row = &mut trie.nodes[node as usize].children;
                    let at = row.partition_point(|&(t, _)| t < tok);
                    row.insert(at, (tok, c));
                    c
                }
            };
        }
        let leaf = &mut trie.nodes[node as usize];
        if leaf.tool.is_some() || !leaf.children.is_empty() {
            return Err(LinkError::AmbiguousName { tool: tool.tool_name.clone() });
        }
        leaf.tool = Some(i);
        trie.leaves += 1;
    }
    Ok(trie)
}

impl NameTrie {
    pub fn root(&self) -> u32 {
        0
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    pub fn child(&self, node: u32, tok: TokenId) -> Option<u32> {
        let row = &self.nodes[node as usize].children;
        row.binary_search_by_key(&tok, |&(t, _)| t).ok().map(|i| row[i].1)
    }

    pub fn children(&self, node: u32) -> &[(TokenId, u32)] {
        &self.nodes[node as usize].children
    }

    /// Tool index at a leaf.
    pub fn tool(&self, node: u32) -> Option<usize> {
        self.nodes[node as usize].tool
    }

    /// Tool selected by a complete token path.
    pub fn lookup(&self, tokens: &[TokenId]) -> Option<usize> {
        let mut node = self.root();
        for &t in tokens {
            node = self.child(node, t)?;
        }
        self.tool(node)
    }

    /// Every root-to-leaf path with its tool index, in depth-first token order.
    pub fn paths(&self) -> Vec<(Vec<TokenId>, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(0u32, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            if let Some(t) = self.tool(node) {
                out.push((path.clone(), t));
            }
            for &(tok, c) in self.children(node).iter().rev() {
                let mut p = path.clone();
                p.push(tok);
                stack.push((c, p));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ToolSchema;

    fn inv(names: &[&str]) -> ToolInventory {
        ToolInventory {
            tools: names
                .iter()
                .map(|n| ToolSchema { tool_name: n.to_string(), description: String::new(), params: vec![] })
                .collect(),
        }
    }

    fn vocab(tokens: &[&str]) -> Vocabulary {
        let mut exp: Vec<Vec<u8>> = tokens.iter().map(|t| t.as_bytes().to_vec()).collect();
        exp.push(b"<EOS>".to_vec());
        let eos = (exp.len() - 1) as TokenId;
        Vocabulary::new(exp, eos).unwrap()
    }

    #[test]
    fn shared_prefix_shape() {
        let v = vocab(&["get_", "time", "date", "("]);
        let t = build_name_trie(&inv(&["get_time", "get_date"]), &v, b"(").unwrap();
        assert_eq!(t.leaf_count(), 2);
        assert_eq!(t.children(t.root()).len(), 1);
        let mid = t.child(t.root(), 0).unwrap();
        assert_eq!(t.children(mid).iter().map(|c| c.0).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(t.lookup(&[0, 1, 3]), Some(0));
        assert_eq!(t.lookup(&[0, 2, 3]), Some(1));
        assert_eq!(t.lookup(&[0, 2]), None);
    }

    #[test]
    fn terminator_separates_prefix_names() {
        let v = vocab(&["search", "_pro", "\n", "A"]);
        let t = build_name_trie(&inv(&["search", "search_pro"]), &v, b"\nA").unwrap();
        assert_eq!(t.leaf_count(), 2);
        for (path, tool) in t.paths() {
            let text = v.detokenize(&path);
            let name = ["search", "search_pro"][tool];
            assert_eq!(text, format!("{name}\nA").into_bytes());
        }
    }

    #[test]
    fn untokenizable_name() {
        let v = vocab(&["a", "("]);
        assert_eq!(
            build_name_trie(&inv(&["ab"]), &v, b"("),
            Err(LinkError::InexpressibleName { tool: "ab".into() })
        );
    }

    #[test]
    fn duplicate_names_are_ambiguous() {
        let v = vocab(&["a", "("]);
        assert!(matches!(build_name_trie(&inv(&["a", "a"]), &v, b"("), Err(LinkError::AmbiguousName { .. })));
    }
}
