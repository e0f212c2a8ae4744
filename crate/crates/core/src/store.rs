//! On-disk formats: the bank file, query sets and encoder parameter files.
//!
//! Bank file layout: a UTF-8 manifest of newline-terminated lines
//!
//! ```text
//! NEWTON-BANK 1
//! descriptor_dim <D>
//! raw_dim <R>
//! states <S>
//! entries <K>
//! entry <id> <scenario> <azimuth> <elevation>              (K lines)
//! state <id> <index> <t> <p x3> <v x3> <f x3> <speed>      (K*S lines)
//! payload <bytes>
//! ```
//!
//! followed by exactly `<bytes> = K*D*S*4` bytes: one D x S matrix per entry in
//! entry order, row-major, little-endian `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, Vector2};

use crate::catalog::{self, CatalogEntry, ViewpointSpec, ENTRY_COUNT};
use crate::dynamics::{TrajectoryState, Vec3, STATES_PER_ENTRY};
use crate::error::{Error, Result};
use crate::matching::{EncoderParams, ScenarioBank, StateDescriptorMatrix};
use crate::metrics::Curve3D;

pub const BANK_MAGIC: &str = "NEWTON-BANK";
pub const PARAMS_MAGIC: &str = "NEWTON-PARAMS";
pub const FORMAT_VERSION: &str = "1";

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::storage(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::storage(path, e))?;
    tmp.persist(path).map_err(|e| Error::storage(path, e.error))?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::storage(path, e))
}

/// Rounds through `f32`, the precision the bank payload stores.
pub fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankFile {
    pub bank: ScenarioBank,
    pub raw_dim: usize,
    /// Sampled world-frame states, one list per entry in catalog order.
    pub states: Vec<Vec<TrajectoryState>>,
}

/// Splits off the text header up to and including the `payload` line.
fn split_manifest<'a>(bytes: &'a [u8], magic: &str) -> Result<(Vec<String>, usize, &'a [u8])> {
    let mut lines = Vec::new();
    let mut pos = 0;
    loop {
        let rest = &bytes[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("manifest ended before the payload line".into()))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| Error::Format("manifest is not UTF-8".into()))?
            .to_string();
        pos += nl + 1;
        if lines.is_empty() {
            let mut it = line.split_whitespace();
            if it.next() != Some(magic) {
                return Err(Error::Format(format!("missing {magic} header")));
            }
            match it.next() {
                Some(FORMAT_VERSION) => {}
                Some(v) => return Err(Error::Format(format!("unsupported {magic} version {v}"))),
                None => return Err(Error::Format("manifest version missing".into())),
            }
        }
        if let Some(n) = line.strip_prefix("payload ") {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad payload length {n:?}")))?;
            lines.push(line);
            return Ok((lines, n, &bytes[pos..]));
        }
        lines.push(line);
    }
}

fn keyed<'a>(lines: &'a [String], key: &str) -> Result<&'a str> {
    lines
        .iter()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .ok_or_else(|| Error::Format(format!("manifest is missing `{key}`")))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse {what} from {s:?}")))
}

impl BankFile {
    pub fn payload_len(&self) -> usize {
        self.bank.len() * self.bank.descriptor_dim() * STATES_PER_ENTRY * 4
    }

    fn validate(&self) -> Result<()> {
        if self.bank.len() != ENTRY_COUNT {
            return Err(Error::Bank(format!(
                "bank file needs {ENTRY_COUNT} entries, got {}",
                self.bank.len()
            )));
        }
        if self.bank.catalog() != catalog::build_catalog().as_slice() {
            return Err(Error::Bank("bank catalog differs from the canonical catalog".into()));
        }
        if self.bank.matrices().iter().any(|m| m.states() != STATES_PER_ENTRY) {
            return Err(Error::Bank(format!("every entry needs {STATES_PER_ENTRY} states")));
        }
        if self.states.len() != ENTRY_COUNT || self.states.iter().any(|s| s.len() != STATES_PER_ENTRY) {
            return Err(Error::Bank(format!(
                "bank file needs {STATES_PER_ENTRY} sampled states for each of {ENTRY_COUNT} entries"
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let d = self.bank.descriptor_dim();
        let mut text = String::new();
        text.push_str(&format!("{BANK_MAGIC} {FORMAT_VERSION}\n"));
        text.push_str(&format!("descriptor_dim {d}\n"));
        text.push_str(&format!("raw_dim {}\n", self.raw_dim));
        text.push_str(&format!("states {STATES_PER_ENTRY}\n"));
        text.push_str(&format!("entries {}\n", self.bank.len()));
        for e in self.bank.catalog() {
            text.push_str(&format!(
                "entry {} {} {} {}\n",
                e.entry_id, e.scenario_id, e.viewpoint.azimuth, e.viewpoint.elevation
            ));
        }
        for (e, states) in self.bank.catalog().iter().zip(&self.states) {
            for (i, s) in states.iter().enumerate() {
                let (p, v, f) = (s.position, s.velocity_dir, s.force_dir);
                text.push_str(&format!(
                    "state {} {} {} {} {} {} {} {} {} {} {} {} {}\n",
                    e.entry_id,
                    i + 1,
                    s.t,
                    p.x,
                    p.y,
                    p.z,
                    v.x,
                    v.y,
                    v.z,
                    f.x,
                    f.y,
                    f.z,
                    s.speed
                ));
            }
        }
        text.push_str(&format!("payload {}\n", self.payload_len()));
        let mut out = text.into_bytes();
        out.reserve(self.payload_len());
        for m in self.bank.matrices() {
            for r in 0..d {
                for c in 0..STATES_PER_ENTRY {
                    out.extend_from_slice(&(m.columns[(r, c)] as f32).to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (lines, payload_len, payload) = split_manifest(bytes, BANK_MAGIC)?;
        let d: usize = parse(keyed(&lines, "descriptor_dim")?, "descriptor_dim")?;
        let raw_dim: usize = parse(keyed(&lines, "raw_dim")?, "raw_dim")?;
        let states: usize = parse(keyed(&lines, "states")?, "states")?;
        let entries: usize = parse(keyed(&lines, "entries")?, "entries")?;
        if states != STATES_PER_ENTRY || entries != ENTRY_COUNT || d == 0 {
            return Err(Error::Format(format!(
                "unsupported bank shape: {entries} entries x {states} states, dim {d}"
            )));
        }
        let expected = entries * d * states * 4;
        if payload_len != expected || payload.len() != expected {
            return Err(Error::Format(format!(
                "payload must be {expected} bytes, manifest says {payload_len}, file has {}",
                payload.len()
            )));
        }

        let mut catalog_entries = Vec::with_capacity(entries);
        let mut sampled: Vec<Vec<TrajectoryState>> = vec![Vec::new(); entries];
        for line in &lines[1..] {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("entry") => {
                    let f: Vec<&str> = it.collect();
                    if f.len() != 4 {
                        return Err(Error::Format(format!("bad entry line {line:?}")));
                    }
                    let viewpoint = ViewpointSpec::new(parse(f[2], "azimuth")?, parse(f[3], "elevation")?)?;
                    catalog_entries.push(CatalogEntry {
                        entry_id: parse(f[0], "entry id")?,
                        scenario_id: parse(f[1], "scenario id")?,
                        viewpoint,
                    });
                }
                Some("state") => {
                    let f: Vec<&str> = it.collect();
                    if f.len() != 13 {
                        return Err(Error::Format(format!("bad state line {line:?}")));
                    }
                    let id: usize = parse(f[0], "entry id")?;
                    let index: usize = parse(f[1], "state index")?;
                    let nums: Vec<f64> = f[2..].iter().map(|s| parse(s, "state value")).collect::<Result<_>>()?;
                    if id == 0 || id > entries || index != sampled[id - 1].len() + 1 {
                        return Err(Error::Format(format!("state line out of order: {line:?}")));
                    }
                    sampled[id - 1].push(TrajectoryState {
                        t: nums[0],
                        position: Vec3::new(nums[1], nums[2], nums[3]),
                        velocity_dir: Vec3::new(nums[4], nums[5], nums[6]),
                        force_dir: Vec3::new(nums[7], nums[8], nums[9]),
                        speed: nums[10],
                    });
                }
                _ => {}
            }
        }
        if catalog_entries != catalog::build_catalog() {
            return Err(Error::Format(
                "bank catalog does not match the canonical catalog".into(),
            ));
        }

        let mut floats = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
        let matrices = catalog_entries
            .iter()
            .map(|e| {
                let mut columns = DMatrix::zeros(d, states);
                for r in 0..d {
                    for c in 0..states {
                        columns[(r, c)] = floats.next().expect("payload length checked");
                    }
                }
                StateDescriptorMatrix {
                    entry_id: e.entry_id,
                    columns,
                }
            })
            .collect();
        let file = BankFile {
            bank: ScenarioBank::new(catalog_entries, matrices)?,
            raw_dim,
            states: sampled,
        };
        file.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

pub fn params_to_bytes(params: &EncoderParams) -> Vec<u8> {
    let flat = params.to_flat();
    let mut out = format!(
        "{PARAMS_MAGIC} {FORMAT_VERSION}\nraw_dim {}\ndescriptor_dim {}\nentries {}\npayload {}\n",
        params.raw_dim(),
        params.descriptor_dim(),
        params.entries(),
        flat.len() * 8
    )
    .into_bytes();
    for v in flat {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<EncoderParams> {
    let (lines, payload_len, payload) = split_manifest(bytes, PARAMS_MAGIC)?;
    let raw_dim: usize = parse(keyed(&lines, "raw_dim")?, "raw_dim")?;
    let d: usize = parse(keyed(&lines, "descriptor_dim")?, "descriptor_dim")?;
    let k: usize = parse(keyed(&lines, "entries")?, "entries")?;
    let count = d * raw_dim + d + k * d + k;
    if payload_len != count * 8 || payload.len() != count * 8 {
        return Err(Error::Format(format!(
            "params payload must be {} bytes, found {}",
            count * 8,
            payload.len()
        )));
    }
    let flat: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let p = EncoderParams::from_flat(raw_dim, d, k, &flat)?;
    p.validate()?;
    Ok(p)
}

pub fn write_params(path: &Path, params: &EncoderParams) -> Result<()> {
    write_atomic(path, &params_to_bytes(params))
}

pub fn read_params(path: &Path) -> Result<EncoderParams> {
    params_from_bytes(&read_file(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// One query: a raw feature vector plus whatever ground truth is known.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub id: String,
    pub features: Vec<f64>,
    pub entry_id: Option<u16>,
    pub flow: Option<Vector2<f64>>,
    pub curve: Option<Curve3D>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuerySet {
    pub records: Vec<QueryRecord>,
}

const QUERY_FIXED_COLUMNS: [&str; 5] = ["id", "entry_id", "flow_u", "flow_v", "curve"];

fn format_curve(c: &Curve3D) -> String {
    c.points()
        .iter()
        .map(|p| format!("{} {} {}", p.x, p.y, p.z))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_curve(s: &str, id: &str) -> Result<Curve3D> {
    let points = s
        .split(';')
        .map(|p| {
            let v: Vec<f64> = p
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Ingestion(format!("record {id}: bad curve point {p:?}")))?;
            if v.len() != 3 {
                return Err(Error::Ingestion(format!(
                    "record {id}: curve point needs 3 coordinates"
                )));
            }
            Ok(Vec3::new(v[0], v[1], v[2]))
        })
        .collect::<Result<Vec<_>>>()?;
    Curve3D::new(points).map_err(|e| Error::Ingestion(format!("record {id}: {e}")))
}

impl QuerySet {
    pub fn raw_dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.features.len())
    }

    pub fn validate(&self) -> Result<()> {
        let Some(r0) = self.raw_dim() else { return Ok(()) };
        for r in &self.records {
            if r.features.len() != r0 {
                return Err(Error::Ingestion(format!(
                    "record {} has {} features, expected {r0}",
                    r.id,
                    r.features.len()
                )));
            }
            if let Some(e) = r.entry_id {
                if e == 0 || e as usize > ENTRY_COUNT {
                    return Err(Error::Ingestion(format!(
                        "record {}: entry id {e} outside 1..=66",
                        r.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let r = self.raw_dim().unwrap_or(0);
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> = QUERY_FIXED_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain((0..r).map(|i| format!("f{i}")))
            .collect();
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(&header).map_err(csv_err)?;
        for rec in &self.records {
            let mut row = vec![
                rec.id.clone(),
                rec.entry_id.map(|e| e.to_string()).unwrap_or_default(),
                rec.flow.map(|f| f.x.to_string()).unwrap_or_default(),
                rec.flow.map(|f| f.y.to_string()).unwrap_or_default(),
                rec.curve.as_ref().map(format_curve).unwrap_or_default(),
            ];
            row.extend(rec.features.iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(bytes);
        let header = rdr.headers().map_err(|e| Error::Ingestion(e.to_string()))?.clone();
        let fixed: Vec<&str> = header.iter().take(QUERY_FIXED_COLUMNS.len()).collect();
        if fixed != QUERY_FIXED_COLUMNS {
            return Err(Error::Ingestion(format!(
                "query header must start with {}",
                QUERY_FIXED_COLUMNS.join(",")
            )));
        }
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| Error::Ingestion(e.to_string()))?;
            if row.len() != header.len() {
                return Err(Error::Ingestion(format!(
                    "row has {} fields, header has {}",
                    row.len(),
                    header.len()
                )));
            }
            let id = row[0].to_string();
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Ingestion(format!("record {id}: bad number {s:?}")))
            };
            let entry_id = match row[1].trim() {
                "" => None,
                s => Some(
                    s.parse::<u16>()
                        .map_err(|_| Error::Ingestion(format!("record {id}: bad entry id {s:?}")))?,
                ),
            };
            let flow = match (row[2].trim(), row[3].trim()) {
                ("", "") => None,
                (u, v) => Some(Vector2::new(num(u)?, num(v)?)),
            };
            let curve = match row[4].trim() {
                "" => None,
                s => Some(parse_curve(s, &id)?),
            };
            let features = row
                .iter()
                .skip(QUERY_FIXED_COLUMNS.len())
                .map(num)
                .collect::<Result<_>>()?;
            records.push(QueryRecord {
                id,
                features,
                entry_id,
                flow,
                curve,
            });
        }
        let set = QuerySet { records };
        set.validate()?;
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv(&read_file(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> QuerySet {
        QuerySet {
            records: vec![
                QueryRecord {
                    id: "a".into(),
                    features: vec![0.1, -2.5, 1e-7],
                    entry_id: Some(12),
                    flow: Some(Vector2::new(0.6, -0.8)),
                    curve: Some(Curve3D::new(vec![Vec3::new(0.0, 1.5, -2.0), Vec3::new(0.25, 1.0, 3.0)]).unwrap()),
                },
                QueryRecord {
                    id: "b".into(),
                    features: vec![1.0, 2.0, 3.0],
                    entry_id: None,
                    flow: None,
                    curve: None,
                },
            ],
        }
    }

    #[test]
    fn query_set_round_trip() {
        let s = sample_set();
        let back = QuerySet::from_csv(&s.to_csv().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn query_set_rejects_bad_input() {
        let mut s = sample_set();
        s.records[1].features.push(4.0);
        assert!(matches!(s.to_csv(), Err(Error::Ingestion(_))));
        let bad_entry = b"id,entry_id,flow_u,flow_v,curve,f0\nq,70,,,,1.0\n";
        assert!(QuerySet::from_csv(bad_entry).is_err());
        let bad_header = b"name,f0\nq,1.0\n";
        assert!(QuerySet::from_csv(bad_header).is_err());
        let bad_curve = b"id,entry_id,flow_u,flow_v,curve,f0\nq,1,,,1 2,1.0\n";
        assert!(QuerySet::from_csv(bad_curve).is_err());
    }

    #[test]
    fn params_round_trip_and_version_check() {
        let p = EncoderParams::gaussian(10, 64, 66, 5);
        let bytes = params_to_bytes(&p);
        assert_eq!(params_from_bytes(&bytes).unwrap(), p);
        let mut bumped = bytes.clone();
        let pos = PARAMS_MAGIC.len() + 1;
        bumped[pos] = b'9';
        assert!(matches!(params_from_bytes(&bumped), Err(Error::Format(_))));
        assert!(params_from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
