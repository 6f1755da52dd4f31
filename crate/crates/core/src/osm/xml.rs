//! OSM XML reading and writing.
//!
//! Reads the standard `<osm><node/><way><nd ref/><tag k v/></way></osm>`
//! schema from UTF-8 bytes. Unknown elements (relations, metadata) are
//! skipped. Writing emits the same schema, with coordinates in degrees
//! using the shortest representation that parses back to the same value.

use std::collections::HashMap;
use std::io::Read;

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, Event};
use quick_xml::{Reader, Writer};
use thiserror::Error;

use super::{OsmNode, OsmWay};
use crate::geo::GeoPoint;

#[derive(Debug, Error)]
pub enum OsmError {
    #[error("osm xml, line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("osm read failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Counts of recoverable oddities encountered while parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseWarnings {
    /// Node ids seen more than once (last definition kept).
    pub duplicate_nodes: usize,
    /// Way ids seen more than once (last definition kept).
    pub duplicate_ways: usize,
    /// Ways dropped for unresolvable node refs or fewer than 2 nodes.
    pub dropped_ways: usize,
}

impl ParseWarnings {
    pub fn total(&self) -> usize {
        self.duplicate_nodes + self.duplicate_ways + self.dropped_ways
    }
}

/// Parse output: document-order nodes and ways plus warning counters.
#[derive(Debug, Clone, Default)]
pub struct ParsedOsm {
    pub nodes: Vec<OsmNode>,
    pub ways: Vec<OsmWay>,
    pub warnings: ParseWarnings,
}

/// 1-based line number of byte offset `pos` in `bytes`.
fn line_at(bytes: &[u8], pos: usize) -> usize {
    let pos = pos.min(bytes.len());
    1 + bytes[..pos].iter().filter(|&&b| b == b'\n').count()
}

struct DocParser<'a> {
    bytes: &'a [u8],
}

impl<'a> DocParser<'a> {
    fn err(&self, pos: u64, message: impl Into<String>) -> OsmError {
        let pos = usize::try_from(pos).unwrap_or(self.bytes.len());
        OsmError::Parse {
            line: line_at(self.bytes, pos),
            message: message.into(),
        }
    }

    fn attributes(&self, e: &BytesStart, pos: u64) -> Result<Vec<(String, String)>, OsmError> {
        let mut out = Vec::new();
        for attr in e.attributes() {
            let attr = attr.map_err(|err| self.err(pos, err.to_string()))?;
            let value = attr
                .unescape_value()
                .map_err(|err| self.err(pos, err.to_string()))?;
            let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
            out.push((key, value.into_owned()));
        }
        Ok(out)
    }

    fn required<'b>(
        &self,
        attrs: &'b [(String, String)],
        key: &str,
        element: &str,
        pos: u64,
    ) -> Result<&'b str, OsmError> {
        attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| self.err(pos, format!("<{element}> missing attribute {key:?}")))
    }

    fn parse_num<T: std::str::FromStr>(
        &self,
        raw: &str,
        what: &str,
        pos: u64,
    ) -> Result<T, OsmError> {
        raw.parse()
            .map_err(|_| self.err(pos, format!("invalid {what}: {raw:?}")))
    }
}

/// Reads an OSM XML document into nodes and ways.
///
/// Duplicate node or way ids keep the last definition and bump a warning
/// counter. Ways with unresolvable node refs or fewer than two nodes are
/// dropped, also counted. Malformed XML or malformed attribute data is an
/// error carrying the 1-based line number.
pub fn parse_osm_xml<R: Read>(mut input: R) -> Result<ParsedOsm, OsmError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let doc = DocParser { bytes: &bytes };

    let mut reader = Reader::from_reader(&bytes[..]);
    let mut buf = Vec::new();

    let mut warnings = ParseWarnings::default();
    let mut nodes: Vec<OsmNode> = Vec::new();
    let mut node_slot: HashMap<i64, usize> = HashMap::new();
    let mut ways: Vec<OsmWay> = Vec::new();
    let mut way_slot: HashMap<i64, usize> = HashMap::new();
    let mut current_way: Option<OsmWay> = None;

    let mut commit_way = |way: OsmWay, warnings: &mut ParseWarnings| {
        match way_slot.get(&way.id) {
            Some(&slot) => {
                warnings.duplicate_ways += 1;
                ways[slot] = way;
            }
            None => {
                way_slot.insert(way.id, ways.len());
                ways.push(way);
            }
        }
    };

    loop {
        let pos = reader.buffer_position() as u64;
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|err| doc.err(reader.buffer_position() as u64, err.to_string()))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                match e.name().as_ref() {
                    b"node" => {
                        let attrs = doc.attributes(e, pos)?;
                        let id: i64 =
                            doc.parse_num(doc.required(&attrs, "id", "node", pos)?, "node id", pos)?;
                        let lat: f64 = doc.parse_num(
                            doc.required(&attrs, "lat", "node", pos)?,
                            "node lat",
                            pos,
                        )?;
                        let lon: f64 = doc.parse_num(
                            doc.required(&attrs, "lon", "node", pos)?,
                            "node lon",
                            pos,
                        )?;
                        let geo = GeoPoint::from_degrees(lat, lon)
                            .map_err(|err| doc.err(pos, format!("node {id}: {err}")))?;
                        let node = OsmNode { id, pos: geo };
                        match node_slot.get(&id) {
                            Some(&slot) => {
                                warnings.duplicate_nodes += 1;
                                nodes[slot] = node;
                            }
                            None => {
                                node_slot.insert(id, nodes.len());
                                nodes.push(node);
                            }
                        }
                    }
                    b"way" => {
                        let attrs = doc.attributes(e, pos)?;
                        let id: i64 =
                            doc.parse_num(doc.required(&attrs, "id", "way", pos)?, "way id", pos)?;
                        let way = OsmWay {
                            id,
                            node_ids: Vec::new(),
                            tags: Default::default(),
                        };
                        if empty {
                            commit_way(way, &mut warnings);
                        } else {
                            current_way = Some(way);
                        }
                    }
                    b"nd" => {
                        if let Some(way) = current_way.as_mut() {
                            let attrs = doc.attributes(e, pos)?;
                            let nref: i64 = doc.parse_num(
                                doc.required(&attrs, "ref", "nd", pos)?,
                                "nd ref",
                                pos,
                            )?;
                            way.node_ids.push(nref);
                        }
                    }
                    b"tag" => {
                        if let Some(way) = current_way.as_mut() {
                            let attrs = doc.attributes(e, pos)?;
                            let k = doc.required(&attrs, "k", "tag", pos)?.to_string();
                            let v = doc.required(&attrs, "v", "tag", pos)?.to_string();
                            way.tags.insert(k, v);
                        }
                    }
                    _ => {}
                }
            }
            Event::End(ref e) => {
                if e.name().as_ref() == b"way" {
                    if let Some(way) = current_way.take() {
                        commit_way(way, &mut warnings);
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    let kept: Vec<OsmWay> = ways
        .into_iter()
        .filter(|way| {
            let ok = way.node_ids.len() >= 2
                && way.node_ids.iter().all(|id| node_slot.contains_key(id));
            if !ok {
                warnings.dropped_ways += 1;
            }
            ok
        })
        .collect();

    Ok(ParsedOsm {
        nodes,
        ways: kept,
        warnings,
    })
}

const WRITE_MSG: &str = "xml write to in-memory buffer";

fn push_coord(e: &mut BytesStart, key: &str, value_deg: f64) {
    e.push_attribute((key, format!("{value_deg}").as_str()));
}

/// Serializes nodes and ways as an OSM XML document.
///
/// Coordinates are written in degrees with the shortest digit string that
/// parses back to the same f64, so a parse of the output reproduces the
/// input collections whenever the degree/radian unit conversion of the
/// source values is itself lossless.
pub fn write_osm_xml(nodes: &[OsmNode], ways: &[OsmWay]) -> String {
    let mut writer = Writer::new_with_indent(Vec::new(), b' ', 2);
    writer
        .write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))
        .expect(WRITE_MSG);
    let mut osm = BytesStart::new("osm");
    osm.push_attribute(("version", "0.6"));
    writer.write_event(Event::Start(osm)).expect(WRITE_MSG);

    for node in nodes {
        let mut e = BytesStart::new("node");
        e.push_attribute(("id", node.id.to_string().as_str()));
        push_coord(&mut e, "lat", node.pos.lat_deg());
        push_coord(&mut e, "lon", node.pos.lon_deg());
        writer.write_event(Event::Empty(e)).expect(WRITE_MSG);
    }
    for way in ways {
        let mut e = BytesStart::new("way");
        e.push_attribute(("id", way.id.to_string().as_str()));
        writer.write_event(Event::Start(e)).expect(WRITE_MSG);
        for nref in &way.node_ids {
            let mut e = BytesStart::new("nd");
            e.push_attribute(("ref", nref.to_string().as_str()));
            writer.write_event(Event::Empty(e)).expect(WRITE_MSG);
        }
        for (k, v) in &way.tags {
            let mut e = BytesStart::new("tag");
            e.push_attribute(("k", k.as_str()));
            e.push_attribute(("v", v.as_str()));
            writer.write_event(Event::Empty(e)).expect(WRITE_MSG);
        }
        writer
            .write_event(Event::End(BytesEnd::new("way")))
            .expect(WRITE_MSG);
    }
    writer
        .write_event(Event::End(BytesEnd::new("osm")))
        .expect(WRITE_MSG);

    let mut out = writer.into_inner();
    out.push(b'\n');
    String::from_utf8(out).expect("writer emits UTF-8")
}
