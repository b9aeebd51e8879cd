//! Dataset parsing and the canonical CSV formats.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::DateTime;
use semloc_core::dataset::{CheckIn, Poi, UserLocationSample};
use semloc_core::features::FeatureMatrix;
use semloc_core::geo::GeoPoint;
use semloc_core::model::GbdtModel;
use semloc_core::taxonomy::{LabelMap, LabelTarget, Taxonomy};
use semloc_core::time::Timestamp;
use serde::{Deserialize, Serialize};

/// Share of malformed check-in lines above which parsing fails.
pub const MAX_MALFORMED_FRACTION: f64 = 0.01;

const CHECKIN_TIME_FORMAT: &str = "%a %b %d %H:%M:%S %z %Y";

pub const FOURSQUARE_MAP: &str = include_str!("../data/foursquare_categories.map");
pub const OSM_MAP: &str = include_str!("../data/osm_categories.map");

#[derive(Debug, Default)]
pub struct ParsedCheckins {
    pub checkins: Vec<CheckIn>,
    /// 1-based line numbers.
    pub malformed: Vec<usize>,
    pub lines: usize,
}

fn parse_checkin_line(line: &str) -> Option<CheckIn> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 8 {
        return None;
    }
    let lat: f64 = f[4].trim().parse().ok()?;
    let lon: f64 = f[5].trim().parse().ok()?;
    let offset: i16 = f[6].trim().parse().ok()?;
    let utc = DateTime::parse_from_str(f[7].trim(), CHECKIN_TIME_FORMAT)
        .ok()?
        .timestamp();
    let time = Timestamp::new(utc, offset);
    if !time.offset_is_valid() || f[0].is_empty() || f[1].is_empty() {
        return None;
    }
    Some(CheckIn {
        user_id: f[0].to_string(),
        venue_id: f[1].to_string(),
        raw_category: f[3].to_string(),
        geo: GeoPoint::new(lat, lon).ok()?,
        time,
    })
}

/// Parses the 8-column tab-separated check-in format.
pub fn parse_checkins_from<R: Read>(reader: R) -> Result<ParsedCheckins> {
    let mut out = ParsedCheckins::default();
    let mut reader = BufReader::new(reader);
    let mut buf = Vec::new();
    for i in 0.. {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        let line = decode_line(&buf);
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        out.lines += 1;
        match parse_checkin_line(line) {
            Some(c) => out.checkins.push(c),
            None => out.malformed.push(i + 1),
        }
    }
    if out.malformed.len() as f64 > MAX_MALFORMED_FRACTION * out.lines as f64 {
        let shown: Vec<String> = out.malformed.iter().take(20).map(|n| n.to_string()).collect();
        bail!(
            "{} of {} lines are malformed (lines {}{})",
            out.malformed.len(),
            out.lines,
            shown.join(", "),
            if out.malformed.len() > 20 { ", ..." } else { "" }
        );
    }
    Ok(out)
}

/// UTF-8, or Latin-1 for lines that are not (the public dump mixes both).
fn decode_line(bytes: &[u8]) -> std::borrow::Cow<'_, str> {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.into(),
        Err(_) => bytes.iter().map(|&b| b as char).collect::<String>().into(),
    }
}

pub fn parse_checkins(path: &Path) -> Result<ParsedCheckins> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_checkins_from(f).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Deserialize)]
struct OsmRow {
    poi_id: String,
    lat: f64,
    lon: f64,
    source_label: String,
}

/// POI CSV with header `poi_id,lat,lon,source_label`. Returns the POIs and
/// the number of rows dropped by the mapping.
pub fn parse_osm_pois_from<R: Read>(reader: R, map: &LabelMap) -> Result<(Vec<Poi>, usize)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut pois = Vec::new();
    let mut dropped = 0;
    for (i, row) in rdr.deserialize::<OsmRow>().enumerate() {
        let row = row.with_context(|| format!("POI row {}", i + 2))?;
        match map.resolve_strict(&row.source_label.replace('_', " "))? {
            LabelTarget::Drop => dropped += 1,
            LabelTarget::Category(category) => pois.push(Poi {
                id: row.poi_id,
                geo: GeoPoint::new(row.lat, row.lon)?,
                category,
                subcategory: row.source_label,
            }),
        }
    }
    Ok((pois, dropped))
}

pub fn parse_osm_pois(path: &Path, map: &LabelMap) -> Result<(Vec<Poi>, usize)> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_osm_pois_from(f, map).with_context(|| format!("parsing {}", path.display()))
}

/// One label per line; `#` starts a comment.
pub fn parse_taxonomy(text: &str) -> Result<Taxonomy> {
    let labels: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .collect();
    Ok(Taxonomy::new(labels)?)
}

pub fn load_taxonomy(path: Option<&Path>) -> Result<Taxonomy> {
    match path {
        Some(p) => parse_taxonomy(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => Ok(Taxonomy::foursquare()),
    }
}

/// Loads a mapping file, or the shipped one when `path` is `None`.
pub fn load_label_map(path: Option<&Path>, builtin: &str, taxonomy: &Taxonomy) -> Result<LabelMap> {
    let text = match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => builtin.to_string(),
    };
    Ok(LabelMap::parse(&text, taxonomy)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRow {
    user_id: String,
    location_id: String,
    lat: f64,
    lon: f64,
    category: String,
    visits: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PoiRow {
    poi_id: String,
    lat: f64,
    lon: f64,
    category: String,
    subcategory: String,
}

fn format_visits(v: &[Timestamp]) -> String {
    v.iter()
        .map(|t| format!("{}:{}", t.utc, t.offset_min))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_visits(s: &str) -> Result<Vec<Timestamp>> {
    s.split(';')
        .map(|t| {
            let (utc, off) = t.split_once(':').with_context(|| format!("bad visit {t:?}"))?;
            Ok(Timestamp::new(utc.parse()?, off.parse()?))
        })
        .collect()
}

fn category_of(taxonomy: &Taxonomy, label: &str) -> Result<semloc_core::taxonomy::CategoryId> {
    taxonomy
        .id(label)
        .with_context(|| format!("category {label:?} is not in the taxonomy"))
}

pub fn write_samples(path: &Path, samples: &[UserLocationSample], taxonomy: &Taxonomy) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for s in samples {
        w.serialize(SampleRow {
            user_id: s.user_id.clone(),
            location_id: s.location_id.clone(),
            lat: s.geo.lat,
            lon: s.geo.lon,
            category: taxonomy.label(s.category).to_string(),
            visits: format_visits(&s.visits),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path, taxonomy: &Taxonomy) -> Result<Vec<UserLocationSample>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<SampleRow>().enumerate() {
        let r = row.with_context(|| format!("{} row {}", path.display(), i + 2))?;
        let s = UserLocationSample {
            category: category_of(taxonomy, &r.category)?,
            visits: parse_visits(&r.visits)?,
            geo: GeoPoint::new(r.lat, r.lon)?,
            user_id: r.user_id,
            location_id: r.location_id,
        };
        s.validate(taxonomy.len())?;
        out.push(s);
    }
    Ok(out)
}

pub fn write_pois(path: &Path, pois: &[Poi], taxonomy: &Taxonomy) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for p in pois {
        w.serialize(PoiRow {
            poi_id: p.id.clone(),
            lat: p.geo.lat,
            lon: p.geo.lon,
            category: taxonomy.label(p.category).to_string(),
            subcategory: p.subcategory.clone(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pois(path: &Path, taxonomy: &Taxonomy) -> Result<Vec<Poi>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<PoiRow>().enumerate() {
        let r = row.with_context(|| format!("{} row {}", path.display(), i + 2))?;
        out.push(Poi {
            category: category_of(taxonomy, &r.category)?,
            geo: GeoPoint::new(r.lat, r.lon)?,
            id: r.poi_id,
            subcategory: r.subcategory,
        });
    }
    Ok(out)
}

pub fn write_feature_matrix(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&m.schema().columns)?;
    for i in 0..m.n_rows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub const MODEL_FORMAT: &str = "semloc-gbdt";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: GbdtModel,
}

pub fn save_model(path: &Path, model: &GbdtModel) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    fs::write(path, serde_json::to_vec(&file)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<GbdtModel> {
    let file: ModelFile = serde_json::from_slice(&fs::read(path)?)?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        bail!("unsupported model file {} v{}", file.format, file.version);
    }
    Ok(file.model)
}
