//! JSON and CSV artifacts. JSON floats carry 17 significant digits;
//! big integers and rationals are decimal strings throughout.

use std::fs;
use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::lattice::PeriodicConfig;
use crate::perturbation::BumpSpec;

/// Pretty printing with every float as `{:.16e}`.
pub struct SciFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Default for SciFormatter<'_> {
    fn default() -> Self {
        SciFormatter {
            inner: PrettyFormatter::with_indent(b"  "),
        }
    }
}

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn to_json<T: Serialize + ?Sized>(x: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter::default());
    x.serialize(&mut ser).map_err(|e| Error::Parse(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn from_json<T: DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
}

fn io_err(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_text(path: &Path, s: &str) -> Result<()> {
    fs::write(path, s).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, x: &T) -> Result<()> {
    write_text(path, &to_json(x)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&read_text(path)?).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// `i,value` rows for slots 1..=p.
pub fn config_to_csv(x: &PeriodicConfig) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["i", "value"]).map_err(csv_err)?;
    for (t, v) in x.values.iter().enumerate() {
        w.write_record([(t + 1).to_string(), format!("{v:.16e}")]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}

/// Values from an `i,value` table, ordered by i.
pub fn values_from_csv(s: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(s.as_bytes());
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.len() < 2 || &headers[0] != "i" || &headers[1] != "value" {
        return Err(Error::Parse("expected header `i,value`".into()));
    }
    let mut rows: Vec<(i64, f64)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let i = rec[0].trim().parse::<i64>().map_err(|e| Error::Parse(format!("index {:?}: {e}", &rec[0])))?;
        let v = rec[1].trim().parse::<f64>().map_err(|e| Error::Parse(format!("value {:?}: {e}", &rec[1])))?;
        rows.push((i, v));
    }
    rows.sort_by_key(|r| r.0);
    Ok(rows.into_iter().map(|r| r.1).collect())
}

pub fn config_from_csv(s: &str, q: i64) -> Result<PeriodicConfig> {
    let values = values_from_csv(s)?;
    PeriodicConfig::new(values.len(), q, values)
}

/// ξ, φ, φ′, …, φ^{(k)} on `n` points of [0, 1).
pub fn bump_to_csv(b: &BumpSpec, n: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["xi".to_string(), "phi".to_string()];
    header.extend((1..=b.k).map(|d| format!("d{d}")));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..n {
        let xi = i as f64 / n as f64;
        let row: Vec<String> = std::iter::once(format!("{xi:.16e}"))
            .chain(b.derivs(xi, b.k).iter().map(|v| format!("{v:.16e}")))
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}
