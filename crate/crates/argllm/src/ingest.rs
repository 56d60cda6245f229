//! PDF to markdown conversion for prompt grounding.
//!
//! Text is pulled from each page's content stream in drawing order. Font
//! sizes drive the structure: lines set noticeably larger than the body
//! text become headings, vertical gaps start new paragraphs, and pages are
//! separated by horizontal rules. Layout fidelity is best effort; the
//! output is plain text with structure hints. There is no OCR: a PDF made
//! only of images yields an empty document flagged `extraction_empty`.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use lopdf::content::Content;
use lopdf::{Document as PdfDocument, Encoding, Object};
use serde::{Deserialize, Serialize};

pub const MAX_PDF_BYTES: usize = 20 * 1024 * 1024;

/// Appended by [`truncate_for_prompt`] when text was cut.
pub const TRUNCATION_MARKER: &str = "\n\n[truncated]";

const PAGE_RULE: &str = "\n\n---\n\n";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("empty upload")]
    Empty,
    #[error("not a PDF (missing %PDF- header)")]
    NotAPdf,
    #[error("the PDF is encrypted")]
    Encrypted,
    #[error("upload of {0} bytes exceeds the {MAX_PDF_BYTES} byte limit")]
    TooLarge(usize),
    #[error("could not parse the PDF: {0}")]
    Unreadable(String),
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::Empty => "empty-upload",
            IngestError::NotAPdf => "not-a-pdf",
            IngestError::Encrypted => "encrypted-pdf",
            IngestError::TooLarge(_) => "too-large",
            IngestError::Unreadable(_) => "unreadable-pdf",
        }
    }
}

/// Deterministic part of an ingested PDF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub markdown: String,
    pub page_count: usize,
    pub byte_size: usize,
    /// A valid PDF without extractable text, e.g. a scan.
    pub extraction_empty: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub filename: String,
    pub markdown: String,
    pub page_count: usize,
    pub byte_size: usize,
    pub uploaded_at: DateTime<Utc>,
    pub extraction_empty: bool,
}

impl Document {
    /// Converts an uploaded PDF, giving it a fresh id and timestamp.
    pub fn ingest(filename: &str, bytes: &[u8]) -> Result<Self, IngestError> {
        let ex = pdf_to_markdown(bytes)?;
        Ok(Document {
            id: uuid::Uuid::new_v4().simple().to_string(),
            filename: filename.to_owned(),
            markdown: ex.markdown,
            page_count: ex.page_count,
            byte_size: ex.byte_size,
            uploaded_at: Utc::now(),
            extraction_empty: ex.extraction_empty,
        })
    }
}

pub fn is_pdf(bytes: &[u8]) -> bool {
    // the header may be preceded by junk within the first KiB
    bytes.len() >= 5 && bytes[..bytes.len().min(1024)].windows(5).any(|w| w == b"%PDF-")
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

pub fn pdf_to_markdown(bytes: &[u8]) -> Result<Extraction, IngestError> {
    if bytes.is_empty() {
        return Err(IngestError::Empty);
    }
    if bytes.len() > MAX_PDF_BYTES {
        return Err(IngestError::TooLarge(bytes.len()));
    }
    if !is_pdf(bytes) {
        return Err(IngestError::NotAPdf);
    }
    let doc = match PdfDocument::load_mem(bytes) {
        Ok(doc) => doc,
        Err(_) if contains(bytes, b"/Encrypt") => return Err(IngestError::Encrypted),
        Err(e) => return Err(IngestError::Unreadable(e.to_string())),
    };
    if doc.is_encrypted() || doc.encryption_state.is_some() {
        return Err(IngestError::Encrypted);
    }

    let pages = doc.get_pages();
    let mut page_lines = Vec::with_capacity(pages.len());
    for page_id in pages.values() {
        page_lines.push(page_text_lines(&doc, *page_id));
    }

    let body = body_size(&page_lines);
    let rendered: Vec<String> = page_lines
        .iter()
        .map(|lines| render_page(lines, body))
        .filter(|p| !p.is_empty())
        .collect();
    let markdown = rendered.join(PAGE_RULE);
    Ok(Extraction {
        extraction_empty: markdown.is_empty(),
        markdown,
        page_count: pages.len(),
        byte_size: bytes.len(),
    })
}

#[derive(Debug, Clone)]
struct Line {
    text: String,
    size: f64,
    y: f64,
}

#[derive(Debug, Clone, Copy)]
struct TextState {
    size: f64,
    scale: f64,
    leading: f64,
    x: f64,
    y: f64,
}

fn num(obj: &Object) -> Option<f64> {
    match obj {
        Object::Integer(i) => Some(*i as f64),
        Object::Real(r) => Some(f64::from(*r)),
        _ => None,
    }
}

fn decode(encoding: Option<&Encoding>, bytes: &[u8]) -> String {
    encoding
        .and_then(|enc| PdfDocument::decode_text(enc, bytes).ok())
        .unwrap_or_else(|| bytes.iter().map(|&b| b as char).collect())
}

fn page_text_lines(doc: &PdfDocument, page_id: lopdf::ObjectId) -> Vec<Line> {
    let encodings: BTreeMap<Vec<u8>, Encoding> = doc
        .get_page_fonts(page_id)
        .map(|fonts| {
            fonts
                .into_iter()
                .filter_map(|(name, font)| font.get_font_encoding(doc).ok().map(|e| (name, e)))
                .collect()
        })
        .unwrap_or_default();
    let Ok(content) = doc.get_page_content(page_id).and_then(|data| Content::decode(&data)) else {
        return Vec::new();
    };

    let mut lines: Vec<Line> = Vec::new();
    let mut state = TextState { size: 12.0, scale: 1.0, leading: 0.0, x: 0.0, y: 0.0 };
    let mut line_start = (0.0, 0.0);
    let mut encoding: Option<&Encoding> = None;

    let show = |text: String, state: &TextState, lines: &mut Vec<Line>| {
        if text.trim().is_empty() {
            return;
        }
        let size = state.size * state.scale;
        match lines.last_mut() {
            Some(last) if (last.y - state.y).abs() < 0.5 => {
                if !last.text.ends_with(' ') && !text.starts_with(' ') {
                    last.text.push(' ');
                }
                last.text.push_str(&text);
                last.size = last.size.max(size);
            }
            _ => lines.push(Line { text, size, y: state.y }),
        }
    };

    for op in &content.operations {
        let operands = &op.operands;
        match op.operator.as_str() {
            "BT" => {
                state.x = 0.0;
                state.y = 0.0;
                state.scale = 1.0;
                line_start = (0.0, 0.0);
            }
            "Tf" => {
                encoding = operands.first().and_then(|o| o.as_name().ok()).and_then(|n| encodings.get(n));
                if let Some(size) = operands.get(1).and_then(num) {
                    state.size = size.abs();
                }
            }
            "TL" => state.leading = operands.first().and_then(num).unwrap_or(0.0),
            "Tm" => {
                if let [a, b, _, d, e, f] = operands.as_slice() {
                    let (a, b, d) = (num(a).unwrap_or(1.0), num(b).unwrap_or(0.0), num(d).unwrap_or(1.0));
                    state.scale = if d.abs() > 0.0 { d.abs() } else { (a * a + b * b).sqrt() };
                    state.x = num(e).unwrap_or(0.0);
                    state.y = num(f).unwrap_or(0.0);
                    line_start = (state.x, state.y);
                }
            }
            "Td" | "TD" => {
                let tx = operands.first().and_then(num).unwrap_or(0.0);
                let ty = operands.get(1).and_then(num).unwrap_or(0.0);
                if op.operator == "TD" {
                    state.leading = -ty;
                }
                line_start = (line_start.0 + tx * state.scale, line_start.1 + ty * state.scale);
                state.x = line_start.0;
                state.y = line_start.1;
            }
            "T*" | "'" | "\"" => {
                line_start.1 -= state.leading * state.scale;
                state.x = line_start.0;
                state.y = line_start.1;
                if op.operator != "T*" {
                    let string = operands.last().and_then(|o| o.as_str().ok()).unwrap_or_default();
                    show(decode(encoding, string), &state, &mut lines);
                }
            }
            "Tj" => {
                if let Some(Ok(bytes)) = operands.first().map(Object::as_str) {
                    show(decode(encoding, bytes), &state, &mut lines);
                }
            }
            "TJ" => {
                let mut text = String::new();
                for item in operands.first().and_then(|o| o.as_array().ok()).into_iter().flatten() {
                    match item {
                        Object::String(bytes, _) => text.push_str(&decode(encoding, bytes)),
                        // large negative kerning is a word gap
                        other if num(other).is_some_and(|n| n < -200.0) && !text.ends_with(' ') => text.push(' '),
                        _ => {}
                    }
                }
                show(text, &state, &mut lines);
            }
            _ => {}
        }
    }
    for line in &mut lines {
        line.text = line.text.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    lines.retain(|l| !l.text.is_empty());
    lines
}

/// Most common font size, weighted by characters.
fn body_size(pages: &[Vec<Line>]) -> f64 {
    let mut weights: BTreeMap<i64, usize> = BTreeMap::new();
    for line in pages.iter().flatten() {
        *weights.entry((line.size * 10.0).round() as i64).or_default() += line.text.chars().count();
    }
    weights
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(12.0, |(size, _)| size as f64 / 10.0)
}

fn heading_level(size: f64, body: f64) -> Option<usize> {
    let ratio = size / body;
    if ratio >= 1.6 {
        Some(1)
    } else if ratio >= 1.3 {
        Some(2)
    } else if ratio >= 1.15 {
        Some(3)
    } else {
        None
    }
}

fn render_page(lines: &[Line], body: f64) -> String {
    let mut blocks: Vec<String> = Vec::new();
    let mut paragraph: Vec<&str> = Vec::new();
    let mut prev: Option<&Line> = None;
    let flush = |paragraph: &mut Vec<&str>, blocks: &mut Vec<String>| {
        if !paragraph.is_empty() {
            blocks.push(paragraph.join(" "));
            paragraph.clear();
        }
    };
    for line in lines {
        if let Some(level) = heading_level(line.size, body) {
            flush(&mut paragraph, &mut blocks);
            blocks.push(format!("{} {}", "#".repeat(level), line.text));
            prev = None;
            continue;
        }
        if let Some(p) = prev {
            let gap = (p.y - line.y).abs();
            if gap > 1.6 * line.size.max(p.size) || (p.size - line.size).abs() > 0.5 {
                flush(&mut paragraph, &mut blocks);
            }
        }
        paragraph.push(&line.text);
        prev = Some(line);
    }
    flush(&mut paragraph, &mut blocks);
    blocks.join("\n\n")
}

/// A prefix of the markdown that fits in `max_chars`, cut at the last
/// paragraph break, followed by [`TRUNCATION_MARKER`] when anything was
/// dropped. With no paragraph break inside the budget the prefix is empty
/// and the result is the bare marker text.
pub fn truncate_for_prompt(markdown: &str, max_chars: usize) -> String {
    let max_chars = max_chars.max(1);
    if markdown.chars().count() <= max_chars {
        return markdown.to_owned();
    }
    let cut = markdown.char_indices().nth(max_chars).map_or(markdown.len(), |(i, _)| i);
    let window = &markdown[..cut];
    match window.rfind("\n\n") {
        Some(end) if !window[..end].trim().is_empty() => format!("{}{TRUNCATION_MARKER}", window[..end].trim_end()),
        _ => TRUNCATION_MARKER.trim_start().to_owned(),
    }
}

/// Minimal PDF writer used to build fixtures in tests and demos.
#[doc(hidden)]
pub mod fixtures {
    use lopdf::content::{Content, Operation};
    use lopdf::{dictionary, Document, Object, Stream};

    /// One line of text at a font size; an empty text adds vertical space.
    pub struct FixtureLine<'a> {
        pub text: &'a str,
        pub size: f32,
    }

    pub fn line(text: &str, size: f32) -> FixtureLine<'_> {
        FixtureLine { text, size }
    }

    fn finish(mut doc: Document, pages_id: lopdf::ObjectId, kids: Vec<lopdf::ObjectId>, resources: lopdf::ObjectId) -> Vec<u8> {
        let count = kids.len() as i64;
        let pages = dictionary! {
            "Type" => "Pages",
            "Kids" => kids.into_iter().map(Object::Reference).collect::<Vec<_>>(),
            "Count" => count,
            "Resources" => resources,
            "MediaBox" => vec![0.into(), 0.into(), 595.into(), 842.into()],
        };
        doc.objects.insert(pages_id, Object::Dictionary(pages));
        let catalog = doc.add_object(dictionary! { "Type" => "Catalog", "Pages" => pages_id });
        doc.trailer.set("Root", catalog);
        let mut out = Vec::new();
        doc.save_to(&mut out).expect("in-memory write");
        out
    }

    /// A PDF whose pages hold the given lines, top to bottom.
    pub fn text_pdf(pages: &[Vec<FixtureLine<'_>>]) -> Vec<u8> {
        let mut doc = Document::with_version("1.5");
        let pages_id = doc.new_object_id();
        let font = doc.add_object(dictionary! {
            "Type" => "Font", "Subtype" => "Type1", "BaseFont" => "Helvetica", "Encoding" => "WinAnsiEncoding",
        });
        let resources = doc.add_object(dictionary! { "Font" => dictionary! { "F1" => font } });
        let mut kids = Vec::new();
        for page in pages {
            let mut ops = Vec::new();
            let mut y = 800.0f32;
            for l in page {
                y -= l.size * 1.4;
                if l.text.is_empty() {
                    continue;
                }
                ops.push(Operation::new("BT", vec![]));
                ops.push(Operation::new("Tf", vec!["F1".into(), l.size.into()]));
                ops.push(Operation::new("Td", vec![72.into(), y.into()]));
                ops.push(Operation::new("Tj", vec![Object::string_literal(l.text)]));
                ops.push(Operation::new("ET", vec![]));
            }
            let stream = Stream::new(dictionary! {}, Content { operations: ops }.encode().expect("encode"));
            let content = doc.add_object(stream);
            kids.push(doc.add_object(dictionary! { "Type" => "Page", "Parent" => pages_id, "Contents" => content }));
        }
        finish(doc, pages_id, kids, resources)
    }

    /// A text PDF whose trailer declares a standard security handler.
    pub fn encrypted_pdf() -> Vec<u8> {
        let plain = text_pdf(&[vec![line("secret", 12.0)]]);
        let mut doc = Document::load_mem(&plain).expect("fixture parses");
        let encrypt = doc.add_object(dictionary! {
            "Filter" => "Standard", "V" => 1, "R" => 2, "P" => -4,
            "O" => Object::string_literal(vec![7u8; 32]),
            "U" => Object::string_literal(vec![9u8; 32]),
        });
        doc.trailer.set("Encrypt", encrypt);
        let mut out = Vec::new();
        doc.save_to(&mut out).expect("in-memory write");
        out
    }

    /// A single page that only paints an image.
    pub fn image_only_pdf() -> Vec<u8> {
        let mut doc = Document::with_version("1.5");
        let pages_id = doc.new_object_id();
        let image = doc.add_object(Stream::new(
            dictionary! {
                "Type" => "XObject", "Subtype" => "Image", "Width" => 2, "Height" => 2,
                "ColorSpace" => "DeviceGray", "BitsPerComponent" => 8,
            },
            vec![0, 255, 255, 0],
        ));
        let resources = doc.add_object(dictionary! { "XObject" => dictionary! { "Im1" => image } });
        let ops = vec![
            Operation::new("q", vec![]),
            Operation::new("cm", vec![200.into(), 0.into(), 0.into(), 200.into(), 100.into(), 400.into()]),
            Operation::new("Do", vec!["Im1".into()]),
            Operation::new("Q", vec![]),
        ];
        let content = doc.add_object(Stream::new(dictionary! {}, Content { operations: ops }.encode().expect("encode")));
        let page = doc.add_object(dictionary! { "Type" => "Page", "Parent" => pages_id, "Contents" => content });
        finish(doc, pages_id, vec![page], resources)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::{encrypted_pdf, image_only_pdf, line, text_pdf};
    use super::*;

    #[test]
    fn hello_world_single_page() {
        let pdf = text_pdf(&[vec![line("Hello world", 12.0)]]);
        let ex = pdf_to_markdown(&pdf).unwrap();
        assert!(ex.markdown.contains("Hello world"), "{:?}", ex.markdown);
        assert_eq!(ex.page_count, 1);
        assert_eq!(ex.byte_size, pdf.len());
        assert!(!ex.extraction_empty);
    }

    #[test]
    fn headings_paragraphs_and_page_rules() {
        let pdf = text_pdf(&[
            vec![
                line("Accession Report", 24.0),
                line("The first paragraph starts here", 11.0),
                line("and continues on a second line.", 11.0),
                line("", 11.0),
                line("", 11.0),
                line("A second paragraph.", 11.0),
                line("Background", 15.0),
                line("Body text under the subheading.", 11.0),
            ],
            vec![line("Page two text.", 11.0)],
        ]);
        let md = pdf_to_markdown(&pdf).unwrap().markdown;
        assert_eq!(
            md,
            "# Accession Report\n\nThe first paragraph starts here and continues on a second line.\n\n\
             A second paragraph.\n\n## Background\n\nBody text under the subheading.\n\n---\n\nPage two text."
        );
    }

    #[test]
    fn extraction_is_deterministic() {
        let pdf = text_pdf(&[vec![line("Same input", 12.0)], vec![line("twice", 12.0)]]);
        assert_eq!(pdf_to_markdown(&pdf).unwrap(), pdf_to_markdown(&pdf).unwrap());
        let a = Document::ingest("x.pdf", &pdf).unwrap();
        let b = Document::ingest("x.pdf", &pdf).unwrap();
        assert_ne!(a.id, b.id);
        assert_eq!((a.markdown, a.page_count, a.byte_size), (b.markdown, b.page_count, b.byte_size));
    }

    #[test]
    fn rejects_non_pdf_and_empty() {
        assert_eq!(pdf_to_markdown(b"not a pdf").unwrap_err(), IngestError::NotAPdf);
        assert_eq!(pdf_to_markdown(b"").unwrap_err(), IngestError::Empty);
        assert!(matches!(pdf_to_markdown(b"%PDF-1.4 garbage"), Err(IngestError::Unreadable(_))));
    }

    #[test]
    fn too_large_is_checked_before_parsing() {
        let mut big = b"%PDF-1.4\n".to_vec();
        big.resize(MAX_PDF_BYTES + 1, b' ');
        assert_eq!(pdf_to_markdown(&big).unwrap_err(), IngestError::TooLarge(MAX_PDF_BYTES + 1));
    }

    #[test]
    fn image_only_pdf_is_flagged_empty() {
        let ex = pdf_to_markdown(&image_only_pdf()).unwrap();
        assert!(ex.extraction_empty);
        assert_eq!(ex.markdown, "");
        assert_eq!(ex.page_count, 1);
    }

    #[test]
    fn encrypted_pdf_is_rejected() {
        assert_eq!(pdf_to_markdown(&encrypted_pdf()).unwrap_err(), IngestError::Encrypted);
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_for_prompt("short", 100), "short");
        let paragraphs: Vec<String> = (0..100).map(|i| format!("Paragraph {i:03} {}", "x".repeat(80))).collect();
        let doc = paragraphs.join("\n\n");
        assert!(doc.len() >= 9_000);
        let out = truncate_for_prompt(&doc, 1_000);
        assert!(out.ends_with(TRUNCATION_MARKER));
        let prefix = out.strip_suffix(TRUNCATION_MARKER).unwrap();
        assert!(prefix.chars().count() <= 1_000);
        assert!(doc.starts_with(prefix));
        assert!(doc[prefix.len()..].starts_with("\n\n"));
        assert_eq!(truncate_for_prompt(&doc, 1), "[truncated]");
    }
}
