//! Text formats for every artifact. Parsers take raw bytes and never panic; writers emit
//! shortest round-trip decimals so save/load is lossless.

use crate::fivegfix::DetectorRecord;
use crate::fusion::{FusionState, UpdateEvent};
use crate::geo::{degrees_exact, geodetic_to_utm_in_zone, quaternion_to_attitude, Attitude, GeodeticPosition, UtmPosition, UtmZone};
use crate::scenario::{BsSite, Building, LinkState, ScheduleWindow, Trajectory, TrajectoryEpoch};
use crate::sensors::{BiasState, ImuSample, Meas5G, OdoSample};
use crate::solution::{NavSolution, SolutionSource};
use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::Write as _;

pub const TRAJECTORY_HEADER: [&str; 10] =
    ["t", "lat_deg", "lon_deg", "h_m", "ve_ms", "vn_ms", "vu_ms", "pitch_deg", "roll_deg", "azimuth_deg"];
pub const SITES_HEADER: [&str; 6] = ["id", "easting_m", "northing_m", "height_m", "boresight_deg", "zone"];
pub const VISIBILITY_HEADER: [&str; 4] = ["bs_id", "t_start_s", "t_end_s", "state"];
pub const IMU_HEADER: [&str; 7] = ["t", "fx", "fy", "fz", "wx", "wy", "wz"];
pub const ODO_HEADER: [&str; 2] = ["t", "wheel_rate_rps"];
pub const SOLUTION_HEADER: [&str; 9] = ["t", "lat_deg", "lon_deg", "h_m", "cov_xx", "cov_yy", "cov_zz", "n_los_bs", "source"];
pub const FUSED_HEADER: [&str; 17] = [
    "t",
    "lat_deg",
    "lon_deg",
    "h_m",
    "ve",
    "vn",
    "vu",
    "pitch_deg",
    "roll_deg",
    "azimuth_deg",
    "bgx",
    "bgy",
    "bgz",
    "bax",
    "bay",
    "baz",
    "p_trace",
];

/// Parse failure with the 1-based line it occurred on (0 when not tied to a line).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: u64,
    pub message: String,
}

impl ParseError {
    fn new(line: u64, message: impl std::fmt::Display) -> Self {
        Self { line, message: message.to_string() }
    }
}

struct Row {
    line: u64,
    rec: csv::StringRecord,
}

impl Row {
    fn str(&self, i: usize) -> &str {
        self.rec.get(i).unwrap_or("").trim()
    }

    fn f64(&self, i: usize, name: &str) -> Result<f64, ParseError> {
        let s = self.str(i);
        let v: f64 = s.parse().map_err(|_| ParseError::new(self.line, format!("`{name}`: `{s}` is not a number")))?;
        if !v.is_finite() {
            return Err(ParseError::new(self.line, format!("`{name}` must be finite")));
        }
        Ok(v)
    }

    fn opt_f64(&self, i: usize, name: &str) -> Result<Option<f64>, ParseError> {
        if self.str(i).is_empty() {
            Ok(None)
        } else {
            self.f64(i, name).map(Some)
        }
    }

    fn u32(&self, i: usize, name: &str) -> Result<u32, ParseError> {
        let s = self.str(i);
        s.parse().map_err(|_| ParseError::new(self.line, format!("`{name}`: `{s}` is not a non-negative integer")))
    }

    fn err(&self, message: impl std::fmt::Display) -> ParseError {
        ParseError::new(self.line, message)
    }
}

fn read_rows(data: &[u8], header: &[&str]) -> Result<Vec<Row>, ParseError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(data);
    let got = rdr.headers().map_err(|e| ParseError::new(1, e))?.clone();
    let got: Vec<&str> = got.iter().map(str::trim).collect();
    if got != header {
        return Err(ParseError::new(1, format!("expected header `{}`, found `{}`", header.join(","), got.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ParseError::new(e.position().map_or(0, |p| p.line()), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(Row { line, rec });
    }
    Ok(rows)
}

fn header_line(h: &[&str]) -> String {
    let mut s = h.join(",");
    s.push('\n');
    s
}

fn deg(rad: f64) -> f64 {
    degrees_exact(rad)
}

fn join(values: &[String]) -> String {
    let mut s = values.join(",");
    s.push('\n');
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn geodetic(row: &Row, lat: usize, lon: usize, h: usize) -> Result<GeodeticPosition, ParseError> {
    let (lat, lon, h) = (row.f64(lat, "lat_deg")?, row.f64(lon, "lon_deg")?, row.f64(h, "h_m")?);
    GeodeticPosition::from_degrees(lat, lon, h).map_err(|e| row.err(e))
}

fn sorted<T>(rows: &[T], t: impl Fn(&T) -> f64, strict: bool, line: impl Fn(usize) -> u64) -> Result<(), ParseError> {
    for i in 1..rows.len() {
        let (a, b) = (t(&rows[i - 1]), t(&rows[i]));
        if b < a || (strict && b == a) {
            return Err(ParseError::new(line(i), format!("time {b} does not follow {a}")));
        }
    }
    Ok(())
}

pub fn parse_trajectory(data: &[u8]) -> Result<Trajectory, ParseError> {
    let rows = read_rows(data, &TRAJECTORY_HEADER)?;
    let mut epochs = Vec::with_capacity(rows.len());
    for r in &rows {
        let att =
            Attitude::new(r.f64(7, "pitch_deg")?.to_radians(), r.f64(8, "roll_deg")?.to_radians(), r.f64(9, "azimuth_deg")?.to_radians());
        epochs.push(TrajectoryEpoch {
            t: r.f64(0, "t")?,
            pos: geodetic(r, 1, 2, 3)?,
            v_l: Vector3::new(r.f64(4, "ve_ms")?, r.f64(5, "vn_ms")?, r.f64(6, "vu_ms")?),
            att,
        });
    }
    sorted(&epochs, |e| e.t, true, |i| rows[i].line)?;
    Trajectory::new(epochs).map_err(|e| ParseError::new(0, e))
}

pub fn write_trajectory(traj: &Trajectory) -> String {
    let mut s = header_line(&TRAJECTORY_HEADER);
    for e in traj.epochs() {
        s += &join(&[
            e.t.to_string(),
            deg(e.pos.lat).to_string(),
            deg(e.pos.lon).to_string(),
            e.pos.h.to_string(),
            e.v_l.x.to_string(),
            e.v_l.y.to_string(),
            e.v_l.z.to_string(),
            deg(e.att.pitch).to_string(),
            deg(e.att.roll).to_string(),
            deg(e.att.azimuth).to_string(),
        ]);
    }
    s
}

pub fn parse_sites(data: &[u8]) -> Result<Vec<BsSite>, ParseError> {
    let rows = read_rows(data, &SITES_HEADER)?;
    let mut sites: Vec<BsSite> = Vec::with_capacity(rows.len());
    for r in &rows {
        let zone = UtmZone::parse(r.str(5)).map_err(|e| r.err(e))?;
        let id = r.u32(0, "id")?;
        if sites.iter().any(|s| s.id == id) {
            return Err(r.err(format!("duplicate site id {id}")));
        }
        if sites.first().is_some_and(|s| s.pos.zone != zone) {
            return Err(r.err("all sites must share one UTM zone"));
        }
        sites.push(BsSite {
            id,
            pos: UtmPosition { easting: r.f64(1, "easting_m")?, northing: r.f64(2, "northing_m")?, height: r.f64(3, "height_m")?, zone },
            boresight: r.f64(4, "boresight_deg")?.to_radians(),
        });
    }
    Ok(sites)
}

pub fn write_sites(sites: &[BsSite]) -> String {
    let mut s = header_line(&SITES_HEADER);
    for b in sites {
        s += &join(&[
            b.id.to_string(),
            b.pos.easting.to_string(),
            b.pos.northing.to_string(),
            b.pos.height.to_string(),
            deg(b.boresight).to_string(),
            b.pos.zone.label(),
        ]);
    }
    s
}

pub fn parse_visibility(data: &[u8]) -> Result<Vec<ScheduleWindow>, ParseError> {
    let rows = read_rows(data, &VISIBILITY_HEADER)?;
    rows.iter()
        .map(|r| {
            let w = ScheduleWindow {
                bs_id: r.u32(0, "bs_id")?,
                t_start: r.f64(1, "t_start_s")?,
                t_end: r.f64(2, "t_end_s")?,
                state: r.str(3).parse::<LinkState>().map_err(|e| r.err(e))?,
            };
            if !(w.t_end > w.t_start) {
                return Err(r.err("t_end_s must exceed t_start_s"));
            }
            Ok(w)
        })
        .collect()
}

pub fn write_visibility<'a>(windows: impl IntoIterator<Item = &'a ScheduleWindow>) -> String {
    let mut s = header_line(&VISIBILITY_HEADER);
    for w in windows {
        s += &join(&[w.bs_id.to_string(), w.t_start.to_string(), w.t_end.to_string(), w.state.to_string()]);
    }
    s
}

pub fn parse_imu(data: &[u8]) -> Result<Vec<ImuSample>, ParseError> {
    let rows = read_rows(data, &IMU_HEADER)?;
    let samples = rows
        .iter()
        .map(|r| {
            Ok(ImuSample {
                t: r.f64(0, "t")?,
                f_b: Vector3::new(r.f64(1, "fx")?, r.f64(2, "fy")?, r.f64(3, "fz")?),
                w_b: Vector3::new(r.f64(4, "wx")?, r.f64(5, "wy")?, r.f64(6, "wz")?),
            })
        })
        .collect::<Result<Vec<_>, ParseError>>()?;
    sorted(&samples, |m| m.t, true, |i| rows[i].line)?;
    Ok(samples)
}

pub fn write_imu(samples: &[ImuSample]) -> String {
    let mut s = header_line(&IMU_HEADER);
    for m in samples {
        let v = [m.t, m.f_b.x, m.f_b.y, m.f_b.z, m.w_b.x, m.w_b.y, m.w_b.z];
        s += &join(&v.map(|x| x.to_string()));
    }
    s
}

pub fn parse_odo(data: &[u8]) -> Result<Vec<OdoSample>, ParseError> {
    let rows = read_rows(data, &ODO_HEADER)?;
    let samples = rows
        .iter()
        .map(|r| Ok(OdoSample { t: r.f64(0, "t")?, wheel_rate: r.f64(1, "wheel_rate_rps")? }))
        .collect::<Result<Vec<_>, ParseError>>()?;
    sorted(&samples, |m| m.t, true, |i| rows[i].line)?;
    Ok(samples)
}

pub fn write_odo(samples: &[OdoSample]) -> String {
    let mut s = header_line(&ODO_HEADER);
    for m in samples {
        s += &join(&[m.t.to_string(), m.wheel_rate.to_string()]);
    }
    s
}

/// Also accepts the header without `source`; such rows are labelled 5G-SA.
pub fn parse_solutions(data: &[u8]) -> Result<Vec<NavSolution>, ParseError> {
    let rows = read_rows(data, &SOLUTION_HEADER).or_else(|e| read_rows(data, &SOLUTION_HEADER[..8]).map_err(|_| e))?;
    let sols = rows
        .iter()
        .map(|r| {
            let cov = [r.opt_f64(4, "cov_xx")?, r.opt_f64(5, "cov_yy")?, r.opt_f64(6, "cov_zz")?];
            let cov_diag = match cov {
                [Some(a), Some(b), Some(c)] if a >= 0.0 && b >= 0.0 && c >= 0.0 => Some([a, b, c]),
                [None, None, None] => None,
                _ => return Err(r.err("covariance must be three non-negative values or empty")),
            };
            Ok(NavSolution {
                t: r.f64(0, "t")?,
                pos: geodetic(r, 1, 2, 3)?,
                cov_diag,
                n_los_bs: r.u32(7, "n_los_bs")?,
                source: match r.rec.len() {
                    8 => SolutionSource::FiveGStandalone,
                    _ => r.str(8).parse().map_err(|e: String| r.err(e))?,
                },
            })
        })
        .collect::<Result<Vec<_>, ParseError>>()?;
    sorted(&sols, |s| s.t, true, |i| rows[i].line)?;
    Ok(sols)
}

pub fn write_solutions(sols: &[NavSolution]) -> String {
    let mut s = header_line(&SOLUTION_HEADER);
    for p in sols {
        let c = p.cov_diag.map(|c| c.map(Some)).unwrap_or([None; 3]);
        s += &join(&[
            p.t.to_string(),
            deg(p.pos.lat).to_string(),
            deg(p.pos.lon).to_string(),
            p.pos.h.to_string(),
            fmt_opt(c[0]),
            fmt_opt(c[1]),
            fmt_opt(c[2]),
            p.n_los_bs.to_string(),
            p.source.label().to_string(),
        ]);
    }
    s
}

/// One row of the fused navigation output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedNavRecord {
    pub t: f64,
    pub pos: GeodeticPosition,
    pub v_l: Vector3<f64>,
    pub att: Attitude,
    pub bias: BiasState,
    pub p_trace: f64,
}

impl FusedNavRecord {
    pub fn from_state(s: &FusionState) -> Self {
        Self { t: s.t, pos: s.nav.pos, v_l: s.nav.v_l, att: quaternion_to_attitude(&s.nav.q).0, bias: s.bias, p_trace: s.cov.trace() }
    }

    pub fn to_solution(&self) -> NavSolution {
        NavSolution { t: self.t, pos: self.pos, cov_diag: None, n_los_bs: 0, source: SolutionSource::Fused }
    }
}

pub fn parse_fused_nav(data: &[u8]) -> Result<Vec<FusedNavRecord>, ParseError> {
    let rows = read_rows(data, &FUSED_HEADER)?;
    let recs = rows
        .iter()
        .map(|r| {
            let v = |i: usize| r.f64(i, FUSED_HEADER[i]);
            Ok(FusedNavRecord {
                t: v(0)?,
                pos: geodetic(r, 1, 2, 3)?,
                v_l: Vector3::new(v(4)?, v(5)?, v(6)?),
                att: Attitude::new(v(7)?.to_radians(), v(8)?.to_radians(), v(9)?.to_radians()),
                bias: BiasState { dw: Vector3::new(v(10)?, v(11)?, v(12)?), df: Vector3::new(v(13)?, v(14)?, v(15)?) },
                p_trace: v(16)?,
            })
        })
        .collect::<Result<Vec<_>, ParseError>>()?;
    sorted(&recs, |s| s.t, true, |i| rows[i].line)?;
    Ok(recs)
}

pub fn write_fused_nav(states: &[FusionState]) -> String {
    let mut s = header_line(&FUSED_HEADER);
    for st in states {
        let r = FusedNavRecord::from_state(st);
        let (b, f) = (r.bias.dw, r.bias.df);
        let v = [
            r.t,
            deg(r.pos.lat),
            deg(r.pos.lon),
            r.pos.h,
            r.v_l.x,
            r.v_l.y,
            r.v_l.z,
            deg(r.att.pitch),
            deg(r.att.roll),
            deg(r.att.azimuth),
            b.x,
            b.y,
            b.z,
            f.x,
            f.y,
            f.z,
            r.p_trace,
        ];
        s += &join(&v.map(|x| x.to_string()));
    }
    s
}

/// Solutions from either the nav solution format or the fused format, told apart by header.
pub fn parse_any_solutions(data: &[u8]) -> Result<Vec<NavSolution>, ParseError> {
    let first = data.split(|b| *b == b'\n').next().unwrap_or_default();
    if first.starts_with(b"t,lat_deg,lon_deg,h_m,ve,") {
        Ok(parse_fused_nav(data)?.iter().map(FusedNavRecord::to_solution).collect())
    } else {
        parse_solutions(data)
    }
}

fn parse_jsonl<T: DeserializeOwned>(data: &[u8]) -> Result<Vec<T>, ParseError> {
    let text = std::str::from_utf8(data).map_err(|e| ParseError::new(0, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| ParseError::new(i as u64 + 1, e))?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for it in items {
        let _ = writeln!(s, "{}", serde_json::to_string(it).expect("records serialize"));
    }
    s
}

pub fn parse_meas5g(data: &[u8]) -> Result<Vec<Meas5G>, ParseError> {
    let meas: Vec<Meas5G> = parse_jsonl(data)?;
    for (i, m) in meas.iter().enumerate() {
        let line = i as u64 + 1;
        if ![m.t, m.rtt, m.aod_h, m.aod_v, m.rx_power].iter().all(|x| x.is_finite()) {
            return Err(ParseError::new(line, "non-finite value"));
        }
        if !(m.rtt > 0.0) {
            return Err(ParseError::new(line, "rtt_s must be positive"));
        }
    }
    sorted(&meas, |m| m.t, false, |i| i as u64 + 1)?;
    Ok(meas)
}

pub fn write_meas5g(meas: &[Meas5G]) -> String {
    write_jsonl(meas)
}

pub fn parse_events(data: &[u8]) -> Result<Vec<UpdateEvent>, ParseError> {
    parse_jsonl(data)
}

pub fn write_events(events: &[UpdateEvent]) -> String {
    write_jsonl(events)
}

pub fn parse_detector(data: &[u8]) -> Result<Vec<DetectorRecord>, ParseError> {
    parse_jsonl(data)
}

pub fn write_detector(records: &[DetectorRecord]) -> String {
    write_jsonl(records)
}

/// Building prisms from a GeoJSON feature collection of polygons in WGS-84 longitude and
/// latitude degrees, each with a `height_m` property. Only the outer ring is used.
pub fn parse_buildings(data: &[u8], zone: UtmZone) -> Result<Vec<Building>, ParseError> {
    use serde_json::Value;
    let root: Value = serde_json::from_slice(data).map_err(|e| ParseError::new(e.line() as u64, e))?;
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| ParseError::new(0, "expected a FeatureCollection with a `features` array"))?;
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let bad = |m: &str| ParseError::new(0, format!("feature {i}: {m}"));
        let height =
            f.pointer("/properties/height_m").and_then(Value::as_f64).ok_or_else(|| bad("missing numeric `properties.height_m`"))?;
        if f.pointer("/geometry/type").and_then(Value::as_str) != Some("Polygon") {
            return Err(bad("geometry must be a Polygon"));
        }
        let ring = f.pointer("/geometry/coordinates/0").and_then(Value::as_array).ok_or_else(|| bad("polygon has no outer ring"))?;
        let mut footprint = Vec::with_capacity(ring.len());
        for v in ring {
            let (lon, lat) = match v.as_array().map(Vec::as_slice) {
                Some([lon, lat, ..]) => (lon.as_f64(), lat.as_f64()),
                _ => (None, None),
            };
            let (Some(lon), Some(lat)) = (lon, lat) else {
                return Err(bad("vertices must be [lon, lat] numbers"));
            };
            let p = GeodeticPosition::from_degrees(lat, lon, 0.0).map_err(|e| bad(&e.to_string()))?;
            let u = geodetic_to_utm_in_zone(&p, zone).map_err(|e| bad(&e.to_string()))?;
            footprint.push((u.easting, u.northing));
        }
        if footprint.len() > 1 && footprint.first() == footprint.last() {
            footprint.pop();
        }
        out.push(Building { footprint, height_m: height });
    }
    Ok(out)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::Block;
    use crate::scenario::downtown_tour;
    use proptest::prelude::*;

    #[test]
    fn trajectory_round_trips_exactly() {
        let traj = downtown_tour(43.6452, -79.3806, 1.5, 10.0).generate().unwrap();
        let text = write_trajectory(&traj);
        assert!(text.starts_with("t,lat_deg,lon_deg,h_m,ve_ms,vn_ms,vu_ms,pitch_deg,roll_deg,azimuth_deg\n"));
        assert_eq!(parse_trajectory(text.as_bytes()).unwrap(), traj);
    }

    #[test]
    fn header_mismatch_is_reported() {
        let err = parse_imu(b"t,fx,fy\n0,1,2\n").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("expected header"));
    }

    #[test]
    fn bad_number_names_the_column_and_line() {
        let err = parse_odo(b"t,wheel_rate_rps\n0,1\n0.1,abc\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("wheel_rate_rps"), "{}", err.message);
        assert!(parse_odo(b"t,wheel_rate_rps\n0,NaN\n").is_err());
        assert!(parse_odo(b"t,wheel_rate_rps\n0.2,1\n0.1,1\n").is_err());
    }

    #[test]
    fn solutions_round_trip_with_and_without_covariance() {
        let pos = GeodeticPosition::from_degrees(43.6, -79.4, 1.5).unwrap();
        let sols = vec![
            NavSolution { t: 0.1, pos, cov_diag: Some([0.01, 0.02, 0.0025]), n_los_bs: 2, source: SolutionSource::FiveGStandalone },
            NavSolution { t: 0.2, pos, cov_diag: None, n_los_bs: 0, source: SolutionSource::InsStandalone },
        ];
        let text = write_solutions(&sols);
        assert_eq!(text.lines().nth(2).unwrap(), "0.2,43.6,-79.4,1.5,,,,0,INS-SA");
        assert_eq!(parse_solutions(text.as_bytes()).unwrap(), sols);
        assert_eq!(parse_any_solutions(text.as_bytes()).unwrap(), sols);
        assert!(parse_solutions(b"t,lat_deg,lon_deg,h_m,cov_xx,cov_yy,cov_zz,n_los_bs,source\n0,1,2,3,1,,,0,5G-SA\n").is_err());
        let bare =
            parse_solutions(b"t,lat_deg,lon_deg,h_m,cov_xx,cov_yy,cov_zz,n_los_bs\n0.1,43.6,-79.4,1.5,0.01,0.02,0.0025,2\n").unwrap();
        assert_eq!(bare, sols[..1]);
        assert!(parse_solutions(b"t,lat_deg,lon_deg,h_m\n0,1,2,3\n").is_err());
    }

    #[test]
    fn sites_and_visibility_round_trip() {
        let zone = UtmZone::parse("17N").unwrap();
        let sites = vec![BsSite {
            id: 3,
            pos: UtmPosition { easting: 630084.5, northing: 4833438.25, height: 10.0, zone },
            boresight: 90f64.to_radians(),
        }];
        assert_eq!(parse_sites(write_sites(&sites).as_bytes()).unwrap(), sites);
        let windows = vec![ScheduleWindow { bs_id: 3, t_start: 141.5, t_end: 150.5, state: LinkState::Blocked }];
        let text = write_visibility(&windows);
        assert_eq!(text, "bs_id,t_start_s,t_end_s,state\n3,141.5,150.5,blocked\n");
        assert_eq!(parse_visibility(text.as_bytes()).unwrap(), windows);
        assert!(parse_sites(b"id,easting_m,northing_m,height_m,boresight_deg,zone\n1,0,0,0,0,17N\n1,0,0,0,0,17N\n").is_err());
    }

    #[test]
    fn meas_jsonl_uses_documented_keys() {
        let m =
            Meas5G { t: 0.1, bs_id: 4, rtt: 6.7e-7, aod_h: 1.0, aod_v: -0.05, rx_power: -70.5, truth_los: true, aod_h_degenerate: false };
        let text = write_meas5g(&[m]);
        assert_eq!(
            text,
            "{\"t\":0.1,\"bs_id\":4,\"rtt_s\":6.7e-7,\"aod_h_rad\":1.0,\"aod_v_rad\":-0.05,\"rx_power_dbm\":-70.5,\"truth_los\":true}\n"
        );
        assert_eq!(parse_meas5g(text.as_bytes()).unwrap(), vec![m]);
        let err = parse_meas5g(b"{\"t\":0.1}\n").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn events_round_trip() {
        let e = UpdateEvent { t: 1.0, block: Block::Velocity, innovation: [0.1, -0.2, 0.0], nis: 2.5, accepted: true };
        let text = write_events(&[e]);
        assert!(text.contains("\"block\":\"velocity\""));
        assert_eq!(parse_events(text.as_bytes()).unwrap(), vec![e]);
    }

    #[test]
    fn buildings_from_geojson() {
        let zone = UtmZone::parse("17N").unwrap();
        let doc = br#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"height_m":30},
            "geometry":{"type":"Polygon","coordinates":[[[-79.381,43.645],[-79.380,43.645],[-79.380,43.646],[-79.381,43.645]]]}}]}"#;
        let b = parse_buildings(doc, zone).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].footprint.len(), 3);
        assert_eq!(b[0].height_m, 30.0);
        assert!(parse_buildings(br#"{"features":[{"properties":{},"geometry":{"type":"Polygon","coordinates":[]}}]}"#, zone).is_err());
    }

    proptest! {
        #[test]
        fn imu_round_trip(vals in proptest::collection::vec(proptest::array::uniform6(-1e3f64..1e3), 1..20)) {
            let samples: Vec<ImuSample> = vals.iter().enumerate().map(|(i, v)| ImuSample {
                t: i as f64 * 0.01,
                f_b: Vector3::new(v[0], v[1], v[2]),
                w_b: Vector3::new(v[3], v[4], v[5]),
            }).collect();
            prop_assert_eq!(parse_imu(write_imu(&samples).as_bytes()).unwrap(), samples);
        }

        #[test]
        fn parsers_never_panic(data in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = parse_trajectory(&data);
            let _ = parse_sites(&data);
            let _ = parse_visibility(&data);
            let _ = parse_imu(&data);
            let _ = parse_odo(&data);
            let _ = parse_any_solutions(&data);
            let _ = parse_meas5g(&data);
            let _ = parse_events(&data);
            let _ = parse_buildings(&data, UtmZone::parse("17N").unwrap());
        }
    }
}
