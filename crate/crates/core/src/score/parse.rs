use std::collections::{BTreeMap, HashMap};

use num_rational::Rational64;
use num_traits::Zero;
use roxmltree::{Document, Node};

use super::kinds::suffix_for_kind;
use super::{HarmonizedScore, HarmonyNote, ScoreDocument, ScoreError};
use crate::chord::ChordSymbol;
use crate::event::{quantize_duration, Beats, ChordChange, Event, StandardizedScore, REST};

const SUBSET: &[&str] = &[
    "score-partwise",
    "part-list",
    "score-part",
    "part-name",
    "part",
    "measure",
    "attributes",
    "divisions",
    "key",
    "fifths",
    "mode",
    "time",
    "beats",
    "beat-type",
    "clef",
    "sign",
    "line",
    "note",
    "pitch",
    "step",
    "alter",
    "octave",
    "rest",
    "duration",
    "type",
    "dot",
    "tie",
    "voice",
    "harmony",
    "root",
    "root-step",
    "root-alter",
    "kind",
    "degree",
    "degree-value",
    "degree-alter",
    "degree-type",
];

const HARMONY_PART: &str = "Harmony";

struct Ctx<'a> {
    doc: &'a Document<'a>,
    strict: bool,
}

impl Ctx<'_> {
    fn pos(&self, node: Node) -> (u32, u32) {
        let p = self.doc.text_pos_at(node.range().start);
        (p.row, p.col)
    }

    fn malformed(&self, node: Node, message: impl Into<String>) -> ScoreError {
        let (line, column) = self.pos(node);
        ScoreError::Malformed {
            line,
            column,
            message: message.into(),
        }
    }

    fn unsupported(&self, node: Node, element: impl Into<String>) -> ScoreError {
        let (line, column) = self.pos(node);
        ScoreError::Unsupported {
            element: element.into(),
            line,
            column,
        }
    }

    fn child_text<'b>(&self, node: Node<'b, 'b>, name: &str) -> Option<&'b str> {
        node.children().find(|c| c.has_tag_name(name)).and_then(|c| c.text()).map(str::trim)
    }

    fn child_int(&self, node: Node, name: &str) -> Result<Option<i64>, ScoreError> {
        match node.children().find(|c| c.has_tag_name(name)) {
            None => Ok(None),
            Some(c) => {
                let t = c.text().unwrap_or("").trim();
                t.parse::<i64>()
                    .map(Some)
                    .map_err(|_| self.malformed(c, format!("`{name}` must be an integer, found `{t}`")))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct RawNote {
    pitch: u8,
    onset: Beats,
    length: Beats,
}

#[derive(Debug, Default)]
struct PartData {
    name: String,
    notes: Vec<RawNote>,
    harmonies: BTreeMap<Beats, Option<String>>,
    percussion: bool,
}

impl PartData {
    fn pitched(&self) -> usize {
        self.notes.iter().filter(|n| n.pitch != REST).count()
    }
}

fn step_pc(step: &str) -> Option<i64> {
    Some(match step {
        "C" => 0,
        "D" => 2,
        "E" => 4,
        "F" => 5,
        "G" => 7,
        "A" => 9,
        "B" => 11,
        _ => return None,
    })
}

fn harmony_text(ctx: &Ctx, h: Node) -> Result<Option<String>, ScoreError> {
    let kind_node = h
        .children()
        .find(|c| c.has_tag_name("kind"))
        .ok_or_else(|| ctx.malformed(h, "harmony without kind"))?;
    let kind = kind_node.text().unwrap_or("").trim();
    if kind == "none" {
        return Ok(None);
    }
    let suffix = suffix_for_kind(kind).ok_or_else(|| ctx.unsupported(kind_node, format!("kind {kind}")))?;
    let root = h
        .children()
        .find(|c| c.has_tag_name("root"))
        .ok_or_else(|| ctx.malformed(h, "harmony without root"))?;
    let step = ctx
        .child_text(root, "root-step")
        .ok_or_else(|| ctx.malformed(root, "root without root-step"))?;
    if step_pc(step).is_none() {
        return Err(ctx.malformed(root, format!("unknown root step `{step}`")));
    }
    let mut text = step.to_string();
    match ctx.child_int(root, "root-alter")?.unwrap_or(0) {
        0 => {}
        1 => text.push('#'),
        -1 => text.push('b'),
        a => return Err(ctx.malformed(root, format!("root-alter {a} is not supported"))),
    }
    text.push_str(suffix);
    for d in h.children().filter(|c| c.has_tag_name("degree")) {
        let value = ctx.child_int(d, "degree-value")?.ok_or_else(|| ctx.malformed(d, "degree without value"))?;
        let alter = ctx.child_int(d, "degree-alter")?.unwrap_or(0);
        let dtype = ctx.child_text(d, "degree-type").unwrap_or("alter");
        if dtype == "subtract" || !matches!(alter, -1 | 1) || !matches!(value, 5 | 9 | 11 | 13) {
            return Err(ctx.unsupported(d, format!("degree {dtype} {value} {alter}")));
        }
        text.push(if alter < 0 { 'b' } else { '#' });
        text.push_str(&value.to_string());
    }
    let sym = ChordSymbol::parse(&text).map_err(|e| ctx.malformed(h, e.to_string()))?;
    Ok(Some(sym.canonical()))
}

fn read_part(ctx: &Ctx, part: Node, name: String) -> Result<PartData, ScoreError> {
    let mut data = PartData {
        name,
        ..Default::default()
    };
    let mut divisions: Option<i64> = None;
    let mut cursor = Beats::zero();
    let to_beats = |node: Node, d: i64, divisions: Option<i64>| -> Result<Beats, ScoreError> {
        let div = divisions.ok_or_else(|| ctx.malformed(node, "duration before divisions are declared"))?;
        if d < 0 {
            return Err(ctx.malformed(node, "negative duration"));
        }
        Ok(Rational64::new(d, div))
    };
    for measure in part.children().filter(|c| c.is_element()) {
        if !measure.has_tag_name("measure") {
            if ctx.strict {
                return Err(ctx.unsupported(measure, measure.tag_name().name()));
            }
            continue;
        }
        for el in measure.children().filter(|c| c.is_element()) {
            match el.tag_name().name() {
                "attributes" => {
                    if let Some(d) = ctx.child_int(el, "divisions")? {
                        if d <= 0 {
                            return Err(ctx.malformed(el, "divisions must be positive"));
                        }
                        divisions = Some(d);
                    }
                    for clef in el.children().filter(|c| c.has_tag_name("clef")) {
                        if ctx.child_text(clef, "sign") == Some("percussion") {
                            data.percussion = true;
                        }
                    }
                }
                "harmony" => {
                    // Unknown kinds are dropped in lenient mode.
                    match harmony_text(ctx, el) {
                        Ok(chord) => {
                            data.harmonies.insert(cursor, chord);
                        }
                        Err(e @ ScoreError::Unsupported { .. }) if ctx.strict => return Err(e),
                        Err(ScoreError::Unsupported { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
                "backup" | "forward" => {
                    let d = ctx.child_int(el, "duration")?.ok_or_else(|| ctx.malformed(el, "missing duration"))?;
                    let b = to_beats(el, d, divisions)?;
                    if el.has_tag_name("backup") {
                        cursor -= b;
                        if cursor < Beats::zero() {
                            return Err(ctx.malformed(el, "backup before the start of the part"));
                        }
                    } else {
                        cursor += b;
                    }
                }
                "note" => read_note(ctx, el, &mut data, &mut cursor, divisions, &to_beats)?,
                _ => {}
            }
        }
    }
    Ok(data)
}

fn read_note(
    ctx: &Ctx,
    el: Node,
    data: &mut PartData,
    cursor: &mut Beats,
    divisions: Option<i64>,
    to_beats: &dyn Fn(Node, i64, Option<i64>) -> Result<Beats, ScoreError>,
) -> Result<(), ScoreError> {
    if el.children().any(|c| c.has_tag_name("grace") || c.has_tag_name("chord")) {
        return Ok(());
    }
    let d = ctx.child_int(el, "duration")?.ok_or_else(|| ctx.malformed(el, "note without duration"))?;
    let length = to_beats(el, d, divisions)?;
    let onset = *cursor;
    *cursor += length;
    if ctx.child_text(el, "voice").is_some_and(|v| v != "1") {
        return Ok(());
    }
    if el.children().any(|c| c.has_tag_name("unpitched")) {
        data.percussion = true;
        return Ok(());
    }
    let pitch = if el.children().any(|c| c.has_tag_name("rest")) {
        REST
    } else if let Some(p) = el.children().find(|c| c.has_tag_name("pitch")) {
        let step = ctx.child_text(p, "step").unwrap_or("");
        let pc = step_pc(step).ok_or_else(|| ctx.malformed(p, format!("unknown step `{step}`")))?;
        let alter = ctx.child_int(p, "alter")?.unwrap_or(0);
        let octave = ctx.child_int(p, "octave")?.ok_or_else(|| ctx.malformed(p, "pitch without octave"))?;
        let midi = (octave + 1) * 12 + pc + alter;
        if !(0..=127).contains(&midi) {
            return Err(ctx.malformed(p, format!("MIDI pitch {midi} out of range")));
        }
        midi as u8
    } else {
        return Err(ctx.malformed(el, "note is neither pitch nor rest"));
    };
    let tie_stop = el
        .children()
        .any(|c| c.has_tag_name("tie") && c.attribute("type") == Some("stop"));
    if tie_stop {
        if let Some(prev) = data.notes.last_mut() {
            if prev.pitch == pitch && prev.onset + prev.length == onset {
                prev.length += length;
                return Ok(());
            }
        }
    }
    if length.is_zero() {
        return Err(ctx.malformed(el, "zero-length note"));
    }
    data.notes.push(RawNote { pitch, onset, length });
    Ok(())
}

struct Parsed {
    parts: Vec<PartData>,
}

fn read_document(doc: &ScoreDocument, strict: bool) -> Result<Parsed, ScoreError> {
    let xml = Document::parse(&doc.text).map_err(|e| {
        let p = e.pos();
        ScoreError::Xml {
            line: p.row,
            column: p.col,
            message: e.to_string(),
        }
    })?;
    let ctx = Ctx { doc: &xml, strict };
    let root = xml.root_element();
    if !root.has_tag_name("score-partwise") {
        return Err(ctx.unsupported(root, root.tag_name().name()));
    }
    if strict {
        if let Some(bad) = root
            .descendants()
            .find(|n| n.is_element() && !SUBSET.contains(&n.tag_name().name()))
        {
            return Err(ctx.unsupported(bad, bad.tag_name().name()));
        }
    }
    let mut names = HashMap::new();
    for sp in root.descendants().filter(|n| n.has_tag_name("score-part")) {
        if let Some(id) = sp.attribute("id") {
            names.insert(id.to_string(), ctx.child_text(sp, "part-name").unwrap_or("").to_string());
        }
    }
    let mut parts = Vec::new();
    for part in root.children().filter(|n| n.has_tag_name("part")) {
        let name = part.attribute("id").and_then(|id| names.get(id)).cloned().unwrap_or_default();
        parts.push(read_part(&ctx, part, name)?);
    }
    Ok(Parsed { parts })
}

fn to_events(notes: &[RawNote]) -> Result<Vec<Event>, ScoreError> {
    notes
        .iter()
        .map(|n| Ok(Event::new(n.pitch, quantize_duration(n.length)?, n.onset, None)?))
        .collect()
}

fn melody_index(parts: &[PartData]) -> Option<usize> {
    let candidates: Vec<usize> = (0..parts.len())
        .filter(|&i| !parts[i].percussion && !parts[i].name.eq_ignore_ascii_case(HARMONY_PART))
        .collect();
    candidates
        .iter()
        .copied()
        .find(|&i| parts[i].pitched() > 0)
        .or_else(|| candidates.iter().copied().find(|&i| !parts[i].notes.is_empty()))
}

fn build_score(part: &PartData) -> Result<StandardizedScore, ScoreError> {
    let chords = part
        .harmonies
        .iter()
        .map(|(onset, chord)| ChordChange {
            onset: *onset,
            chord: chord.clone(),
        })
        .collect();
    Ok(StandardizedScore::with_chords(to_events(&part.notes)?, chords)?)
}

/// Melody and chord track of the first pitched, non-percussion part.
pub fn parse_score(doc: &ScoreDocument, strict: bool) -> Result<StandardizedScore, ScoreError> {
    let parsed = read_document(doc, strict)?;
    let idx = melody_index(&parsed.parts).ok_or(ScoreError::EmptyMelody)?;
    build_score(&parsed.parts[idx])
}

/// Reads a document written by [`serialize_score`](super::serialize_score):
/// the melody plus the part named `Harmony`, whose notes are matched to
/// melody onsets. Harmony rests between melody onsets are padding and are
/// dropped.
pub fn parse_harmonized(doc: &ScoreDocument, strict: bool) -> Result<HarmonizedScore, ScoreError> {
    let parsed = read_document(doc, strict)?;
    let idx = melody_index(&parsed.parts).ok_or(ScoreError::EmptyMelody)?;
    let score = build_score(&parsed.parts[idx])?;
    let hpart = parsed
        .parts
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(HARMONY_PART))
        .ok_or_else(|| ScoreError::Unrepresentable("no Harmony part".into()))?;
    let by_onset: BTreeMap<Beats, &RawNote> = hpart.notes.iter().map(|n| (n.onset, n)).collect();
    let mut harmony = Vec::with_capacity(score.len());
    for m in score.melody() {
        let n = by_onset.get(&m.onset).ok_or_else(|| ScoreError::Malformed {
            line: 0,
            column: 0,
            message: format!("no harmony note at beat {}", m.onset),
        })?;
        harmony.push(HarmonyNote {
            pitch: n.pitch,
            duration: quantize_duration(n.length)?,
            onset: n.onset,
        });
    }
    let melody_onsets: std::collections::BTreeSet<Beats> = score.melody().iter().map(|e| e.onset).collect();
    if let Some(extra) = hpart.notes.iter().find(|n| !melody_onsets.contains(&n.onset) && n.pitch != REST) {
        return Err(ScoreError::Malformed {
            line: 0,
            column: 0,
            message: format!("harmony note at beat {} has no melody partner", extra.onset),
        });
    }
    Ok(HarmonizedScore::new(score, harmony)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FilterReport {
    pub kept: usize,
    pub unparseable: usize,
    pub no_melody: usize,
    pub no_chords: usize,
}

impl FilterReport {
    pub fn dropped(&self) -> usize {
        self.unparseable + self.no_melody + self.no_chords
    }
}

/// Keeps scores with at least one pitched melody note and at least one chord
/// annotation. Documents are parsed leniently.
pub fn filter_corpus(docs: &[ScoreDocument]) -> (Vec<StandardizedScore>, FilterReport) {
    let mut report = FilterReport::default();
    let mut kept = Vec::new();
    for d in docs {
        match parse_score(d, false) {
            Err(ScoreError::EmptyMelody) => report.no_melody += 1,
            Err(_) => report.unparseable += 1,
            Ok(s) if s.pitched_count() == 0 => report.no_melody += 1,
            Ok(s) if s.chords().iter().all(|c| c.chord.is_none()) => report.no_chords += 1,
            Ok(s) => {
                report.kept += 1;
                kept.push(s);
            }
        }
    }
    (kept, report)
}
