//! Bibliographic records, topics, relevance judgments and source keys.
//!
//! Documents come from GIRT-style tagged XML (one `<DOC>` element per record),
//! topics from CLEF-style `<top>` elements and judgments from the usual
//! four-column qrels text format.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("malformed markup at byte {offset}: {message}")]
    Markup { offset: u64, message: String },
    #[error("record at byte {offset} has no {tag}")]
    MissingField { offset: u64, tag: &'static str },
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("invalid topic number {value:?} at byte {offset}")]
    InvalidTopicNumber { offset: u64, value: String },
    #[error("duplicate topic number {0}")]
    DuplicateTopic(u32),
    #[error("qrels line {line}: {message}")]
    QrelsLine { line: usize, message: String },
    #[error("qrels line {line}: duplicate judgment for topic {topic}, document {doc_id:?}")]
    DuplicateJudgment {
        line: usize,
        topic: u32,
        doc_id: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocType {
    JournalArticle,
    Monograph,
    Other,
}

impl DocType {
    /// Maps a raw DOCTYPE value. Anything unrecognised is `Other`.
    pub fn from_raw(raw: &str) -> Self {
        match raw.trim().to_ascii_lowercase().as_str() {
            "journalarticle" => DocType::JournalArticle,
            "monograph" => DocType::Monograph,
            _ => DocType::Other,
        }
    }

    pub fn as_raw(self) -> &'static str {
        match self {
            DocType::JournalArticle => "journalarticle",
            DocType::Monograph => "monograph",
            DocType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub doctype: DocType,
    /// Journal title for articles, publisher for monographs.
    pub source_field: Option<String>,
    pub issn: Option<String>,
    pub year: Option<i32>,
    pub database_id: String,
    pub language_code: Option<String>,
    pub controlled_terms: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, doctype: DocType) -> Self {
        Document {
            doc_id: doc_id.into(),
            title: String::new(),
            doctype,
            source_field: None,
            issn: None,
            year: None,
            database_id: String::new(),
            language_code: None,
            controlled_terms: Vec::new(),
        }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source_field = Some(source.into());
        self
    }

    pub fn with_issn(mut self, issn: impl Into<String>) -> Self {
        self.issn = Some(issn.into());
        self
    }

    pub fn with_database(mut self, database_id: impl Into<String>) -> Self {
        self.database_id = database_id.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub number: u32,
    pub title: String,
    pub description: String,
    pub narrative: String,
}

/// Relevance judgments keyed by `(topic, doc_id)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<(u32, String), u32>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false (and leaves the map untouched) if the pair is already judged.
    pub fn insert(&mut self, topic: u32, doc_id: impl Into<String>, grade: u32) -> bool {
        use std::collections::btree_map::Entry;
        match self.judgments.entry((topic, doc_id.into())) {
            Entry::Occupied(_) => false,
            Entry::Vacant(v) => {
                v.insert(grade);
                true
            }
        }
    }

    pub fn grade(&self, topic: u32, doc_id: &str) -> Option<u32> {
        // BTreeMap<(u32, String), _> cannot be queried by (u32, &str) directly.
        self.judgments
            .range((topic, doc_id.to_string())..=(topic, doc_id.to_string()))
            .next()
            .map(|(_, g)| *g)
    }

    /// Binary view: judged with grade > 0.
    pub fn is_relevant(&self, topic: u32, doc_id: &str) -> bool {
        self.grade(topic, doc_id).is_some_and(|g| g > 0)
    }

    pub fn is_judged(&self, topic: u32, doc_id: &str) -> bool {
        self.grade(topic, doc_id).is_some()
    }

    pub fn topics(&self) -> BTreeSet<u32> {
        self.judgments.keys().map(|(t, _)| *t).collect()
    }

    /// Judged documents of one topic, in ascending doc_id order.
    pub fn pool(&self, topic: u32) -> impl Iterator<Item = (&str, u32)> + '_ {
        self.judgments
            .range((topic, String::new())..)
            .take_while(move |((t, _), _)| *t == topic)
            .map(|((_, d), g)| (d.as_str(), *g))
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Journal,
    Publisher,
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceKind::Journal => "journal",
            SourceKind::Publisher => "publisher",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceKey {
    pub kind: SourceKind,
    pub key: String,
}

impl SourceKey {
    /// Builds a key from a raw string; `None` when nothing is left after normalization.
    pub fn new(kind: SourceKind, raw: &str) -> Option<Self> {
        let key = normalize_key(raw);
        (!key.is_empty()).then_some(SourceKey { kind, key })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    Journal,
    Publisher,
    #[default]
    Auto,
}

impl std::str::FromStr for KeyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "journal" => Ok(KeyMode::Journal),
            "publisher" => Ok(KeyMode::Publisher),
            "auto" => Ok(KeyMode::Auto),
            other => Err(format!(
                "unknown key mode {other:?} (expected journal, publisher or auto)"
            )),
        }
    }
}

/// Unicode case fold plus whitespace collapse. No diacritic stripping.
pub fn normalize_key(raw: &str) -> String {
    let folded = caseless::default_case_fold_str(raw);
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn source_key(doc: &Document, mode: KeyMode) -> Option<SourceKey> {
    let journal = || {
        doc.issn
            .as_deref()
            .and_then(|issn| SourceKey::new(SourceKind::Journal, issn))
            .or_else(|| {
                doc.source_field
                    .as_deref()
                    .and_then(|s| SourceKey::new(SourceKind::Journal, s))
            })
    };
    let publisher = || {
        doc.source_field
            .as_deref()
            .and_then(|s| SourceKey::new(SourceKind::Publisher, s))
    };
    match mode {
        KeyMode::Journal => journal(),
        KeyMode::Publisher => publisher(),
        KeyMode::Auto => match doc.doctype {
            DocType::JournalArticle => journal(),
            DocType::Monograph => publisher(),
            DocType::Other => None,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DocFormat {
    #[default]
    GirtXml,
}

/// Parses a document file. `database_id` is used for records without a
/// `<DATABASE>` tag (merged files carry the tag, raw per-database exports do not).
pub fn parse_documents(
    input: &[u8],
    format: DocFormat,
    database_id: &str,
) -> Result<Vec<Document>, CorpusError> {
    match format {
        DocFormat::GirtXml => parse_girt(input, database_id),
    }
}

fn parse_girt(input: &[u8], database_id: &str) -> Result<Vec<Document>, CorpusError> {
    let records = read_records(input, "DOC")?;
    let mut seen = HashSet::new();
    let mut docs = Vec::with_capacity(records.len());
    for rec in records {
        let doc_id = rec
            .first(&["DOCID"])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or(CorpusError::MissingField {
                offset: rec.offset,
                tag: "DOCID",
            })?
            .to_string();
        if !seen.insert(doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId(doc_id));
        }
        let controlled_terms = rec
            .all(&["CONTROLLED-TERM-DE", "CONTROLLED-TERM-EN"])
            .flat_map(|v| v.split('#'))
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect();
        docs.push(Document {
            title: rec
                .first(&["TITLE-DE", "TITLE-EN", "TITLE"])
                .map(|t| t.trim().to_string())
                .unwrap_or_default(),
            doctype: rec
                .first(&["DOCTYPE"])
                .map(DocType::from_raw)
                .unwrap_or(DocType::Other),
            source_field: rec.non_empty(&["SOURCE"]),
            issn: rec.non_empty(&["ISSN"]),
            year: rec
                .first(&["PUBLICATION-YEAR"])
                .and_then(|y| y.trim().parse().ok()),
            database_id: rec
                .non_empty(&["DATABASE"])
                .unwrap_or_else(|| database_id.to_string()),
            language_code: rec.non_empty(&["LANGUAGE-CODE"]),
            controlled_terms,
            doc_id,
        });
    }
    Ok(docs)
}

pub fn parse_topics(input: &[u8]) -> Result<Vec<Topic>, CorpusError> {
    let records = read_records(input, "top")?;
    let mut seen = HashSet::new();
    let mut topics = Vec::with_capacity(records.len());
    for rec in records {
        let raw = rec.first(&["num"]).ok_or(CorpusError::MissingField {
            offset: rec.offset,
            tag: "num",
        })?;
        let number = parse_topic_number(raw).ok_or_else(|| CorpusError::InvalidTopicNumber {
            offset: rec.offset,
            value: raw.trim().to_string(),
        })?;
        if !seen.insert(number) {
            return Err(CorpusError::DuplicateTopic(number));
        }
        let text = |tags: &[&str]| {
            rec.first(tags)
                .map(|s| s.trim().to_string())
                .unwrap_or_default()
        };
        topics.push(Topic {
            number,
            title: text(&["EN-title", "title"]),
            description: text(&["EN-desc", "desc"]),
            narrative: text(&["EN-narr", "narr"]),
        });
    }
    Ok(topics)
}

fn parse_topic_number(raw: &str) -> Option<u32> {
    raw.trim().parse().ok().filter(|n| *n > 0)
}

pub fn parse_qrels(input: &[u8]) -> Result<Qrels, CorpusError> {
    let text = std::str::from_utf8(input).map_err(|e| {
        let line = input[..e.valid_up_to()]
            .iter()
            .filter(|b| **b == b'\n')
            .count()
            + 1;
        CorpusError::QrelsLine {
            line,
            message: "invalid UTF-8".into(),
        }
    })?;
    let mut qrels = Qrels::new();
    for (idx, raw_line) in text.split('\n').enumerate() {
        let line = idx + 1;
        let cols: Vec<&str> = raw_line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        let bad = |message: String| CorpusError::QrelsLine { line, message };
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 columns, found {}", cols.len())));
        }
        let topic = parse_topic_number(cols[0])
            .ok_or_else(|| bad(format!("invalid topic {:?}", cols[0])))?;
        let grade: u32 = cols[3]
            .parse()
            .map_err(|_| bad(format!("invalid grade {:?}", cols[3])))?;
        if !qrels.insert(topic, cols[2], grade) {
            return Err(CorpusError::DuplicateJudgment {
                line,
                topic,
                doc_id: cols[2].to_string(),
            });
        }
    }
    Ok(qrels)
}

/// Counts of a corpus split by whether a source key resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CorpusAccounting {
    pub total: usize,
    pub bradfordizable: usize,
    pub skipped: usize,
    pub journal_articles: usize,
    pub monographs: usize,
    pub other: usize,
}

impl CorpusAccounting {
    pub fn of(docs: &[Document], mode: KeyMode) -> Self {
        let mut acc = CorpusAccounting {
            total: docs.len(),
            ..Default::default()
        };
        for d in docs {
            if source_key(d, mode).is_some() {
                acc.bradfordizable += 1;
            } else {
                acc.skipped += 1;
            }
            match d.doctype {
                DocType::JournalArticle => acc.journal_articles += 1,
                DocType::Monograph => acc.monographs += 1,
                DocType::Other => acc.other += 1,
            }
        }
        acc
    }
}

/// Serializes documents back into GIRT-style markup, one `<DOC>` per record.
pub fn write_girt(docs: &[Document]) -> String {
    use quick_xml::escape::escape;
    use std::fmt::Write;

    let mut out = String::from("<DOCS>\n");
    for d in docs {
        out.push_str("<DOC>\n");
        let mut field = |tag: &str, value: &str| {
            let _ = writeln!(out, "<{tag}>{}</{tag}>", escape(value));
        };
        field("DOCID", &d.doc_id);
        field("DATABASE", &d.database_id);
        if let Some(issn) = &d.issn {
            field("ISSN", issn);
        }
        field("TITLE-DE", &d.title);
        field("DOCTYPE", d.doctype.as_raw());
        if let Some(s) = &d.source_field {
            field("SOURCE", s);
        }
        if let Some(y) = d.year {
            field("PUBLICATION-YEAR", &y.to_string());
        }
        if let Some(l) = &d.language_code {
            field("LANGUAGE-CODE", l);
        }
        if !d.controlled_terms.is_empty() {
            field("CONTROLLED-TERM-DE", &d.controlled_terms.join("#"));
        }
        out.push_str("</DOC>\n");
    }
    out.push_str("</DOCS>\n");
    out
}

/// Direct children of one record element, as (upper-cased tag, text) pairs.
struct Record {
    offset: u64,
    fields: Vec<(String, String)>,
}

impl Record {
    fn all<'a>(&'a self, tags: &'a [&'a str]) -> impl Iterator<Item = &'a str> + 'a {
        self.fields
            .iter()
            .filter(move |(t, _)| tags.iter().any(|want| want.eq_ignore_ascii_case(t)))
            .map(|(_, v)| v.as_str())
    }

    /// First value for the first tag in `tags` that is present.
    fn first(&self, tags: &[&str]) -> Option<&str> {
        tags.iter().find_map(|want| {
            self.fields
                .iter()
                .find(|(t, _)| want.eq_ignore_ascii_case(t))
                .map(|(_, v)| v.as_str())
        })
    }

    fn non_empty(&self, tags: &[&str]) -> Option<String> {
        self.first(tags)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
    }
}

fn read_records(input: &[u8], record_tag: &str) -> Result<Vec<Record>, CorpusError> {
    let mut reader = Reader::from_reader(input);
    reader.config_mut().check_end_names = true;

    let mut records = Vec::new();
    // Open element names, outermost first.
    let mut stack: Vec<Vec<u8>> = Vec::new();
    // Index into `stack` of the active record element, if any.
    let mut record_depth: Option<usize> = None;
    let mut current: Option<Record> = None;
    let mut child_text = String::new();

    let markup = |offset: u64, message: String| CorpusError::Markup { offset, message };

    loop {
        let pos = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| markup(reader.error_position(), e.to_string()))?;
        match event {
            Event::Start(e) => {
                let name = e.name().as_ref().to_vec();
                if record_depth.is_none() && eq_tag(&name, record_tag) {
                    record_depth = Some(stack.len());
                    current = Some(Record {
                        offset: pos,
                        fields: Vec::new(),
                    });
                } else if record_depth.is_some_and(|d| stack.len() == d + 1) {
                    child_text.clear();
                }
                stack.push(name);
            }
            Event::Empty(e) => {
                let qname = e.name();
                let name = qname.as_ref();
                if let (Some(d), Some(rec)) = (record_depth, current.as_mut()) {
                    if stack.len() == d + 1 {
                        rec.fields.push((tag_string(name), String::new()));
                    }
                } else if eq_tag(name, record_tag) {
                    records.push(Record {
                        offset: pos,
                        fields: Vec::new(),
                    });
                }
            }
            Event::End(_) => {
                let closed = stack.pop().unwrap_or_default();
                let depth = stack.len();
                match record_depth {
                    Some(d) if depth == d => {
                        record_depth = None;
                        records.extend(current.take());
                    }
                    Some(d) if depth == d + 1 => {
                        if let Some(rec) = current.as_mut() {
                            rec.fields
                                .push((tag_string(&closed), std::mem::take(&mut child_text)));
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                if record_depth.is_some_and(|d| stack.len() > d + 1) {
                    let text = t.unescape().map_err(|e| markup(pos, e.to_string()))?;
                    child_text.push_str(&text);
                }
            }
            Event::CData(c) => {
                if record_depth.is_some_and(|d| stack.len() > d + 1) {
                    let text =
                        std::str::from_utf8(c.as_ref()).map_err(|e| markup(pos, e.to_string()))?;
                    child_text.push_str(text);
                }
            }
            Event::Eof => {
                if let Some(open) = stack.last() {
                    return Err(markup(
                        reader.buffer_position(),
                        format!("unexpected end of input, <{}> not closed", tag_string(open)),
                    ));
                }
                break;
            }
            Event::Decl(_) | Event::PI(_) | Event::Comment(_) | Event::DocType(_) => {}
        }
    }
    Ok(records)
}

fn eq_tag(name: &[u8], tag: &str) -> bool {
    name.eq_ignore_ascii_case(tag.as_bytes())
}

fn tag_string(name: &[u8]) -> String {
    String::from_utf8_lossy(name).to_ascii_uppercase()
}
