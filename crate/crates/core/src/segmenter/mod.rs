//! HTML decoding, block segmentation and text clean-up.
//!
//! A page is split into blocks at `table`, `p` and `div` elements. Text is
//! always attributed to its nearest segmenting ancestor, so a wrapper `div`
//! only becomes a block of its own when it holds text directly. Text that
//! sits outside every segmenting element is gathered into one synthetic
//! block placed after the others.

mod sentences;
mod tokenize;

use std::path::PathBuf;

use ego_tree::iter::Edge;
use scraper::{Html, Node};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use sentences::dedupe_sentences;
pub use tokenize::{Tokenizer, ENGLISH_STOP_WORDS};

/// Case-folded words of `text`, stop words included.
pub(crate) fn words_of(text: &str) -> Vec<String> {
    tokenize::words(text).collect()
}

/// Default link-to-text threshold above which anchor text is dropped.
pub const DEFAULT_LINK_THRESHOLD: f64 = 0.5;

/// A decoded input document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub source_path: Option<PathBuf>,
    html: String,
}

impl RawDocument {
    pub fn with_source_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.source_path = Some(path.into());
        self
    }

    pub fn html(&self) -> &str {
        &self.html
    }
}

/// Decodes raw bytes into a document ready for segmentation.
///
/// Input must be UTF-8 (a leading byte-order mark is ignored). Character
/// references such as `&#x0905;` are resolved by the HTML parser during
/// segmentation.
pub fn parse_document(bytes: &[u8], doc_id: &str) -> Result<RawDocument> {
    if bytes.is_empty() {
        return Err(Error::Parse {
            doc_id: doc_id.to_string(),
            reason: "empty document".to_string(),
        });
    }
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let html = String::from_utf8(bytes.to_vec()).map_err(|e| Error::Parse {
        doc_id: doc_id.to_string(),
        reason: format!("not valid UTF-8 ({e})"),
    })?;
    Ok(RawDocument {
        doc_id: doc_id.to_string(),
        source_path: None,
        html,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Table,
    Paragraph,
    Div,
    /// Text found outside every segmenting element.
    Synthetic,
}

impl BlockKind {
    fn from_tag(name: &str) -> Option<Self> {
        match name {
            "table" => Some(BlockKind::Table),
            "p" => Some(BlockKind::Paragraph),
            "div" => Some(BlockKind::Div),
            _ => None,
        }
    }
}

/// One structural segment of a page.
///
/// `text` keeps heading and paragraph boundaries as newlines; the character
/// counts are taken over that collapsed text, excluding the newlines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub index: usize,
    pub kind: BlockKind,
    pub linked_chars: usize,
    pub unlinked_chars: usize,
    pub text: String,
    /// `text` with every character inside an anchor removed.
    pub unlinked_text: String,
}

impl Block {
    /// Fraction of the block's visible characters that sit inside anchors.
    pub fn link_to_text_ratio(&self) -> f64 {
        let total = self.linked_chars + self.unlinked_chars;
        if total == 0 {
            0.0
        } else {
            self.linked_chars as f64 / total as f64
        }
    }

    /// Clean text of the block, with anchor text dropped when the block is
    /// link-dominated (ratio strictly above `threshold`). An empty result
    /// marks a noise block.
    pub fn extract_text(&self, threshold: f64) -> &str {
        if self.link_to_text_ratio() > threshold {
            &self.unlinked_text
        } else {
            &self.text
        }
    }
}

/// Elements whose content is never rendered as text.
fn is_hidden(name: &str) -> bool {
    matches!(
        name,
        "head" | "script" | "style" | "noscript" | "template" | "svg" | "math" | "iframe" | "object"
    )
}

/// Elements that end a sentence-level unit inside a block.
fn is_break(name: &str) -> bool {
    matches!(
        name,
        "h1" | "h2"
            | "h3"
            | "h4"
            | "h5"
            | "h6"
            | "br"
            | "hr"
            | "li"
            | "ul"
            | "ol"
            | "dl"
            | "dt"
            | "dd"
            | "tr"
            | "td"
            | "th"
            | "caption"
            | "blockquote"
            | "pre"
            | "section"
            | "article"
            | "header"
            | "footer"
            | "nav"
            | "aside"
            | "main"
            | "form"
            | "fieldset"
            | "figure"
            | "figcaption"
            | "address"
    )
}

#[derive(Debug, Clone, Copy)]
enum Item {
    Char(char, bool),
    Break,
}

#[derive(Debug)]
struct Pending {
    kind: BlockKind,
    items: Vec<Item>,
}

impl Pending {
    fn new(kind: BlockKind) -> Self {
        Pending {
            kind,
            items: Vec::new(),
        }
    }

    fn into_block(self, index: usize) -> Option<Block> {
        let all = collapse(&self.items, |_| true);
        if all.text.is_empty() {
            return None;
        }
        let unlinked = collapse(&self.items, |linked| !linked);
        Some(Block {
            index,
            kind: self.kind,
            linked_chars: all.linked,
            unlinked_chars: all.unlinked,
            text: all.text,
            unlinked_text: unlinked.text,
        })
    }
}

struct Collapsed {
    text: String,
    linked: usize,
    unlinked: usize,
}

/// Collapses whitespace runs to one space, trims every line and drops
/// empty lines. Only characters accepted by `keep` take part.
fn collapse(items: &[Item], keep: impl Fn(bool) -> bool) -> Collapsed {
    let mut lines: Vec<String> = Vec::new();
    let mut line = String::new();
    let mut pending_space: Option<bool> = None;
    let (mut linked_count, mut unlinked_count) = (0, 0);
    let mut tally = |linked: bool| {
        if linked {
            linked_count += 1;
        } else {
            unlinked_count += 1;
        }
    };

    for item in items {
        match *item {
            Item::Char(c, linked) => {
                if !keep(linked) {
                    continue;
                }
                if c.is_whitespace() {
                    if !line.is_empty() && pending_space.is_none() {
                        pending_space = Some(linked);
                    }
                    continue;
                }
                if let Some(space_linked) = pending_space.take() {
                    line.push(' ');
                    tally(space_linked);
                }
                line.push(c);
                tally(linked);
            }
            Item::Break => {
                pending_space = None;
                if !line.is_empty() {
                    lines.push(std::mem::take(&mut line));
                }
            }
        }
    }
    if !line.is_empty() {
        lines.push(line);
    }
    Collapsed {
        text: lines.join("\n"),
        linked: linked_count,
        unlinked: unlinked_count,
    }
}

/// Splits a document into blocks in document order.
///
/// Blocks are numbered contiguously from zero. A segmenting element that
/// holds no text of its own (only nested segmenting children) yields no
/// block.
pub fn segment_blocks(doc: &RawDocument) -> Vec<Block> {
    let html = Html::parse_document(&doc.html);

    let mut pending: Vec<Pending> = Vec::new();
    let mut synthetic = Pending::new(BlockKind::Synthetic);
    let mut owners: Vec<usize> = Vec::new();
    let mut hidden_depth = 0usize;
    let mut link_depth = 0usize;

    fn target<'a>(
        owners: &[usize],
        pending: &'a mut [Pending],
        synthetic: &'a mut Pending,
    ) -> &'a mut Pending {
        match owners.last() {
            Some(&i) => &mut pending[i],
            None => synthetic,
        }
    }

    for edge in html.tree.root().traverse() {
        match edge {
            Edge::Open(node) => match node.value() {
                Node::Element(el) => {
                    let name = el.name();
                    if hidden_depth > 0 || is_hidden(name) {
                        hidden_depth += 1;
                        continue;
                    }
                    if let Some(kind) = BlockKind::from_tag(name) {
                        target(&owners, &mut pending, &mut synthetic)
                            .items
                            .push(Item::Break);
                        pending.push(Pending::new(kind));
                        owners.push(pending.len() - 1);
                    } else if is_break(name) {
                        target(&owners, &mut pending, &mut synthetic)
                            .items
                            .push(Item::Break);
                    }
                    if name == "a" {
                        link_depth += 1;
                    }
                }
                Node::Text(text) if hidden_depth == 0 => {
                    let linked = link_depth > 0;
                    let block = target(&owners, &mut pending, &mut synthetic);
                    block
                        .items
                        .extend(text.chars().map(|c| Item::Char(c, linked)));
                }
                _ => {}
            },
            Edge::Close(node) => {
                if let Node::Element(el) = node.value() {
                    if hidden_depth > 0 {
                        hidden_depth -= 1;
                        continue;
                    }
                    let name = el.name();
                    if BlockKind::from_tag(name).is_some() {
                        owners.pop();
                        target(&owners, &mut pending, &mut synthetic)
                            .items
                            .push(Item::Break);
                    } else if is_break(name) {
                        target(&owners, &mut pending, &mut synthetic)
                            .items
                            .push(Item::Break);
                    }
                    if name == "a" {
                        link_depth = link_depth.saturating_sub(1);
                    }
                }
            }
        }
    }

    let mut blocks = Vec::new();
    for p in pending.into_iter().chain(std::iter::once(synthetic)) {
        if let Some(block) = p.into_block(blocks.len()) {
            blocks.push(block);
        }
    }
    blocks
}

/// Free-function form of [`Block::link_to_text_ratio`].
pub fn link_to_text_ratio(block: &Block) -> f64 {
    block.link_to_text_ratio()
}

/// Free-function form of [`Block::extract_text`], returning an owned string.
pub fn extract_block_text(block: &Block, threshold: f64) -> String {
    block.extract_text(threshold).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks_of(html: &str) -> Vec<Block> {
        segment_blocks(&parse_document(html.as_bytes(), "t").unwrap())
    }

    fn texts(html: &str) -> Vec<String> {
        blocks_of(html).into_iter().map(|b| b.text).collect()
    }

    fn block(linked: usize, unlinked: usize) -> Block {
        Block {
            index: 0,
            kind: BlockKind::Div,
            linked_chars: linked,
            unlinked_chars: unlinked,
            text: String::new(),
            unlinked_text: String::new(),
        }
    }

    #[test]
    fn parses_minimal_document() {
        let doc = parse_document(b"<p>hi</p>", "d1").unwrap();
        assert_eq!(doc.doc_id, "d1");
        assert_eq!(texts("<p>hi</p>"), vec!["hi"]);
    }

    #[test]
    fn decodes_numeric_references() {
        assert_eq!(texts("<p>&#x41;</p>"), vec!["A"]);
        assert_eq!(texts("<p>&#65;&#x0905;</p>"), vec!["A\u{0905}"]);
    }

    #[test]
    fn rejects_empty_and_invalid_bytes() {
        let err = parse_document(b"", "d3").unwrap_err();
        assert!(matches!(err, Error::Parse { ref doc_id, .. } if doc_id == "d3"));
        let err = parse_document(&[0x3c, 0xff, 0xfe, 0x3e], "bad").unwrap_err();
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn strips_byte_order_mark() {
        let doc = parse_document(b"\xEF\xBB\xBF<p>x</p>", "bom").unwrap();
        assert!(doc.html().starts_with("<p>"));
    }

    #[test]
    fn disjoint_segments() {
        assert_eq!(texts("<div>a</div><p>b</p>"), vec!["a", "b"]);
    }

    #[test]
    fn tag_free_document_is_one_synthetic_block() {
        let blocks = blocks_of("plain text only");
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].kind, BlockKind::Synthetic);
        assert_eq!(blocks[0].text, "plain text only");
    }

    #[test]
    fn nested_wrappers_split_at_deepest_text_holders() {
        assert_eq!(texts("<div><p>x</p><p>y</p></div>"), vec!["x", "y"]);
        let blocks = blocks_of("<div>intro <p>x</p> outro</div>");
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].text, "intro\noutro");
        assert_eq!(blocks[1].text, "x");
    }

    #[test]
    fn synthetic_block_trails() {
        let blocks = blocks_of("<body><h1>Title</h1><p>body</p>tail</body>");
        let kinds: Vec<_> = blocks.iter().map(|b| b.kind).collect();
        assert_eq!(kinds, vec![BlockKind::Paragraph, BlockKind::Synthetic]);
        assert_eq!(blocks[1].text, "Title\ntail");
        assert_eq!(blocks[1].index, 1);
    }

    #[test]
    fn tables_keep_cells_as_lines() {
        let blocks = blocks_of("<table><tr><td>a b</td><td>c</td></tr></table>");
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].kind, BlockKind::Table);
        assert_eq!(blocks[0].text, "a b\nc");
    }

    #[test]
    fn scripts_and_head_are_invisible() {
        let html = "<html><head><title>t</title><style>p{}</style></head>\
                    <body><div>x<script>var y = 1;</script></div></body></html>";
        assert_eq!(texts(html), vec!["x"]);
    }

    #[test]
    fn inline_markup_does_not_split_words() {
        assert_eq!(texts("<p>be<b>ach</b>  \n sand</p>"), vec!["beach sand"]);
    }

    #[test]
    fn counts_linked_and_unlinked_characters() {
        let blocks = blocks_of("<p><a href='/'>home</a> beach resorts</p>");
        let b = &blocks[0];
        assert_eq!(b.text, "home beach resorts");
        assert_eq!(b.linked_chars, 4);
        assert_eq!(b.unlinked_chars, 14);
        assert_eq!(b.unlinked_text, "beach resorts");
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(block(0, 5).link_to_text_ratio(), 0.0);
        assert_eq!(block(5, 0).link_to_text_ratio(), 1.0);
        assert_eq!(block(2, 6).link_to_text_ratio(), 0.25);
        assert_eq!(block(0, 0).link_to_text_ratio(), 0.0);
    }

    #[test]
    fn extraction_below_threshold_keeps_text() {
        let b = &blocks_of("<p>goa beach</p>")[0];
        assert_eq!(b.link_to_text_ratio(), 0.0);
        assert_eq!(extract_block_text(b, 0.5), "goa beach");
    }

    #[test]
    fn extraction_of_pure_link_block_is_empty() {
        let b = &blocks_of("<div><a href='x'>home contact</a></div>")[0];
        assert_eq!(b.link_to_text_ratio(), 1.0);
        assert_eq!(extract_block_text(b, 0.5), "");
    }

    #[test]
    fn extraction_drops_anchors_when_link_dominated() {
        let mut b = blocks_of("<p><a href='/'>home</a> beach resorts</p>").remove(0);
        b.linked_chars = 8;
        b.unlinked_chars = 2;
        assert_eq!(b.link_to_text_ratio(), 0.8);
        assert_eq!(extract_block_text(&b, 0.5), "beach resorts");
        // exactly at the threshold is not "more"
        let half = blocks_of("<p><a href='/'>ab</a>cd</p>").remove(0);
        assert_eq!(half.link_to_text_ratio(), 0.5);
        assert_eq!(extract_block_text(&half, 0.5), "abcd");
    }

    #[test]
    fn malformed_markup_is_repaired() {
        let blocks = blocks_of("<div><p>open <b>bold<p>second</div></span>");
        let joined: Vec<_> = blocks.iter().map(|b| b.text.as_str()).collect();
        assert_eq!(joined, vec!["open bold", "second"]);
    }

    #[test]
    fn whitespace_only_document_has_no_blocks() {
        assert!(blocks_of("  <p> </p> \n").is_empty());
    }
}
