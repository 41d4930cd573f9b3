//! CSV formats for trajectories, lane maps and lane-change events.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every value bit for bit. Missing feature
//! values are written as empty cells and read back as NaN.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::extract::{Lane, LaneChangeEvent, LaneMap, Polyline, Track, TrajectorySample};
use crate::types::{Behavior, Outcome, VehicleType};

pub const TRAJECTORY_HEADER: [&str; 9] =
    ["track_id", "time", "x", "y", "heading", "speed", "accel", "yaw_rate", "vtype"];
pub const MAP_HEADER: [&str; 8] =
    ["lane_id", "seq", "x", "y", "left_id", "right_id", "exit_ids", "interpolated"];
pub const LABEL_COLUMNS: [&str; 3] = ["active_label", "passive_label", "outcome"];

pub fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    File::create(path)
        .and_then(|mut f| f.write_all(contents.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn check_header(file: &str, rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<csv::StringRecord> {
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(file, 1, e.to_string()))?
        .clone();
    if header.len() < expected.len() || header.iter().zip(expected).any(|(h, e)| h != *e) {
        return Err(Error::parse(
            file,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    Ok(header)
}

fn records(file: &str, rdr: &mut csv::Reader<&[u8]>) -> Result<Vec<csv::StringRecord>> {
    rdr.records()
        .map(|r| {
            r.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::parse(file, line, e.to_string())
            })
        })
        .collect()
}

struct Row<'a> {
    file: &'a str,
    rec: &'a csv::StringRecord,
}

impl Row<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.file, line_of(self.rec), msg)
    }

    fn str(&self, i: usize, name: &str) -> Result<&str> {
        self.rec
            .get(i)
            .ok_or_else(|| self.err(format!("missing column `{name}`")))
    }

    fn f64(&self, i: usize, name: &str) -> Result<f64> {
        let s = self.str(i, name)?;
        let v: f64 = s
            .parse()
            .map_err(|_| self.err(format!("column `{name}`: `{s}` is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(format!("column `{name}` is not finite")));
        }
        Ok(v)
    }

    /// Empty cell reads as NaN.
    fn f64_or_nan(&self, i: usize, name: &str) -> Result<f64> {
        if self.str(i, name)?.is_empty() {
            Ok(f64::NAN)
        } else {
            self.f64(i, name)
        }
    }

    fn i64(&self, i: usize, name: &str) -> Result<i64> {
        let s = self.str(i, name)?;
        s.parse()
            .map_err(|_| self.err(format!("column `{name}`: `{s}` is not an integer")))
    }

    fn opt_i64(&self, i: usize, name: &str) -> Result<Option<i64>> {
        if self.str(i, name)?.is_empty() {
            Ok(None)
        } else {
            self.i64(i, name).map(Some)
        }
    }

    fn parse<T: std::str::FromStr<Err = String>>(&self, i: usize, name: &str) -> Result<T> {
        self.str(i, name)?
            .parse()
            .map_err(|e: String| self.err(format!("column `{name}`: {e}")))
    }

    fn bool(&self, i: usize, name: &str) -> Result<bool> {
        match self.str(i, name)? {
            "1" | "true" | "True" | "TRUE" => Ok(true),
            "0" | "false" | "False" | "FALSE" | "" => Ok(false),
            other => Err(self.err(format!("column `{name}`: `{other}` is not a boolean"))),
        }
    }
}

/// Parses the trajectory CSV. Rows of one track may be interleaved with
/// other tracks; each track's rows are sorted by time.
pub fn parse_trajectories(text: &str) -> Result<Vec<Track>> {
    const FILE: &str = "trajectories";
    let mut rdr = reader(text);
    check_header(FILE, &mut rdr, &TRAJECTORY_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, (VehicleType, Vec<TrajectorySample>)> = BTreeMap::new();
    for rec in records(FILE, &mut rdr)? {
        let row = Row { file: FILE, rec: &rec };
        let id = row.str(0, "track_id")?.to_string();
        if id.is_empty() {
            return Err(row.err("empty track_id"));
        }
        let sample = TrajectorySample {
            time: row.f64(1, "time")?,
            x: row.f64(2, "x")?,
            y: row.f64(3, "y")?,
            heading: row.f64(4, "heading")?,
            speed: row.f64(5, "speed")?,
            accel: row.f64(6, "accel")?,
            yaw_rate: row.f64(7, "yaw_rate")?,
        };
        let vtype: VehicleType = row.parse(8, "vtype")?;
        match by_id.get_mut(&id) {
            Some((t, samples)) => {
                if *t != vtype {
                    return Err(row.err(format!("track {id} changes vehicle type")));
                }
                samples.push(sample);
            }
            None => {
                order.push(id.clone());
                by_id.insert(id, (vtype, vec![sample]));
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let (vtype, mut samples) = by_id.remove(&id).expect("id recorded");
            samples.sort_by(|a, b| a.time.total_cmp(&b.time));
            Track { id, vtype, samples }
        })
        .collect())
}

pub fn write_trajectories(tracks: &[Track]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(TRAJECTORY_HEADER).map_err(csv_err)?;
    for t in tracks {
        for s in &t.samples {
            w.write_record([
                t.id.clone(),
                s.time.to_string(),
                s.x.to_string(),
                s.y.to_string(),
                s.heading.to_string(),
                s.speed.to_string(),
                s.accel.to_string(),
                s.yaw_rate.to_string(),
                t.vtype.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// Parses the lane-map CSV into a validated [`LaneMap`].
pub fn parse_map(text: &str) -> Result<LaneMap> {
    const FILE: &str = "map";
    let mut rdr = reader(text);
    check_header(FILE, &mut rdr, &MAP_HEADER)?;
    struct Acc {
        left: Option<i64>,
        right: Option<i64>,
        exits: Vec<i64>,
        interpolated: bool,
        points: Vec<(i64, [f64; 2])>,
    }
    let mut order = Vec::new();
    let mut lanes: BTreeMap<i64, Acc> = BTreeMap::new();
    for rec in records(FILE, &mut rdr)? {
        let row = Row { file: FILE, rec: &rec };
        let id = row.i64(0, "lane_id")?;
        let seq = row.i64(1, "seq")?;
        let pt = [row.f64(2, "x")?, row.f64(3, "y")?];
        let left = row.opt_i64(4, "left_id")?;
        let right = row.opt_i64(5, "right_id")?;
        let exits = row
            .str(6, "exit_ids")?
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<i64>()
                    .map_err(|_| row.err(format!("exit id `{s}` is not an integer")))
            })
            .collect::<Result<Vec<_>>>()?;
        let interpolated = row.bool(7, "interpolated")?;
        match lanes.get_mut(&id) {
            Some(acc) => {
                if acc.left != left || acc.right != right || acc.exits != exits || acc.interpolated != interpolated {
                    return Err(row.err(format!("lane {id} attributes differ between rows")));
                }
                acc.points.push((seq, pt));
            }
            None => {
                order.push(id);
                lanes.insert(
                    id,
                    Acc {
                        left,
                        right,
                        exits,
                        interpolated,
                        points: vec![(seq, pt)],
                    },
                );
            }
        }
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut acc = lanes.remove(&id).expect("id recorded");
        acc.points.sort_by_key(|(seq, _)| *seq);
        if acc.points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::MapFormat(format!("lane {id} repeats a seq number")));
        }
        let centerline = Polyline::new(acc.points.into_iter().map(|(_, p)| p).collect())
            .map_err(|e| Error::MapFormat(format!("lane {id}: {e}")))?;
        out.push(Lane {
            id,
            centerline,
            left: acc.left,
            right: acc.right,
            exits: acc.exits,
            interpolated: acc.interpolated,
        });
    }
    LaneMap::new(out)
}

pub fn write_map(lanes: &[Lane]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(MAP_HEADER).map_err(csv_err)?;
    let opt = |v: Option<i64>| v.map(|v| v.to_string()).unwrap_or_default();
    for lane in lanes {
        for (seq, p) in lane.centerline.points().iter().enumerate() {
            w.write_record([
                lane.id.to_string(),
                seq.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                opt(lane.left),
                opt(lane.right),
                lane.exits.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(";"),
                u8::from(lane.interpolated).to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Column names of the event CSV, without the optional label columns.
pub fn event_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "event_id",
        "active_id",
        "lead_id",
        "passive_id",
        "crossing_time",
        "start_time",
        "end_time",
        "active_type",
        "passive_type",
        "boundary_flagged",
        "lane_crossing_angle",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((1..=10).map(|i| format!("xa{i}")));
    h.extend((1..=4).map(|i| format!("xp{i}")));
    h.extend((1..=11).map(|i| format!("s{i}")));
    h
}

const EVENT_BASE_COLUMNS: usize = 11 + 10 + 4 + 11;

/// One event row, optionally carrying cluster labels and the joint outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub event: LaneChangeEvent,
    pub active_label: Option<Behavior>,
    pub passive_label: Option<Behavior>,
    pub outcome: Option<Outcome>,
}

impl EventRow {
    pub fn unlabeled(event: LaneChangeEvent) -> Self {
        EventRow {
            event,
            active_label: None,
            passive_label: None,
            outcome: None,
        }
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn write_events(rows: &[EventRow], with_labels: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    let mut header = event_header();
    if with_labels {
        header.extend(LABEL_COLUMNS.iter().map(|s| s.to_string()));
    }
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let e = &row.event;
        let mut rec = vec![
            e.event_id.clone(),
            e.active_id.clone(),
            e.lead_id.clone(),
            e.passive_id.clone(),
            fmt_f64(e.crossing_time),
            fmt_f64(e.start_time),
            fmt_f64(e.end_time),
            e.active_type.to_string(),
            e.passive_type.to_string(),
            u8::from(e.boundary_flagged).to_string(),
            fmt_f64(e.lane_crossing_angle),
        ];
        rec.extend(e.active_features.iter().map(|v| fmt_f64(*v)));
        rec.extend(e.passive_features.iter().map(|v| fmt_f64(*v)));
        rec.extend(e.state.iter().map(|v| fmt_f64(*v)));
        if with_labels {
            let lbl = |b: Option<Behavior>| b.map(|b| b.as_str().to_string()).unwrap_or_default();
            rec.push(lbl(row.active_label));
            rec.push(lbl(row.passive_label));
            rec.push(row.outcome.map(|o| o.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

/// Parses an event CSV with or without the trailing label columns.
pub fn parse_events(text: &str) -> Result<Vec<EventRow>> {
    const FILE: &str = "events";
    let mut rdr = reader(text);
    let expected = event_header();
    let expected_ref: Vec<&str> = expected.iter().map(String::as_str).collect();
    let header = check_header(FILE, &mut rdr, &expected_ref)?;
    let labeled = header.len() >= EVENT_BASE_COLUMNS + 3
        && header.iter().skip(EVENT_BASE_COLUMNS).take(3).eq(LABEL_COLUMNS.iter().copied());
    let mut out = Vec::new();
    for rec in records(FILE, &mut rdr)? {
        let row = Row { file: FILE, rec: &rec };
        let mut active_features = [0.0; 10];
        for (k, v) in active_features.iter_mut().enumerate() {
            *v = row.f64_or_nan(11 + k, "xa")?;
        }
        let mut passive_features = [0.0; 4];
        for (k, v) in passive_features.iter_mut().enumerate() {
            *v = row.f64_or_nan(21 + k, "xp")?;
        }
        let mut state = [0.0; 11];
        for (k, v) in state.iter_mut().enumerate() {
            *v = row.f64(25 + k, "s")?;
        }
        let event = LaneChangeEvent {
            event_id: row.str(0, "event_id")?.to_string(),
            active_id: row.str(1, "active_id")?.to_string(),
            lead_id: row.str(2, "lead_id")?.to_string(),
            passive_id: row.str(3, "passive_id")?.to_string(),
            crossing_time: row.f64_or_nan(4, "crossing_time")?,
            start_time: row.f64_or_nan(5, "start_time")?,
            end_time: row.f64_or_nan(6, "end_time")?,
            active_type: row.parse(7, "active_type")?,
            passive_type: row.parse(8, "passive_type")?,
            boundary_flagged: row.bool(9, "boundary_flagged")?,
            lane_crossing_angle: row.f64_or_nan(10, "lane_crossing_angle")?,
            active_features,
            passive_features,
            state,
        };
        let (mut active_label, mut passive_label, mut outcome) = (None, None, None);
        if labeled {
            let opt = |i: usize, name: &str| -> Result<Option<&str>> {
                let s = row.str(i, name)?;
                Ok((!s.is_empty()).then_some(s))
            };
            if let Some(s) = opt(EVENT_BASE_COLUMNS, "active_label")? {
                active_label = Some(s.parse().map_err(|e: String| row.err(e))?);
            }
            if let Some(s) = opt(EVENT_BASE_COLUMNS + 1, "passive_label")? {
                passive_label = Some(s.parse().map_err(|e: String| row.err(e))?);
            }
            if let Some(s) = opt(EVENT_BASE_COLUMNS + 2, "outcome")? {
                outcome = Some(s.parse().map_err(|e: String| row.err(e))?);
            }
        }
        out.push(EventRow {
            event,
            active_label,
            passive_label,
            outcome,
        });
    }
    Ok(out)
}
