//! Delimited-text ingestion, trend tables and atomic file output.

use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use trendline::series::{TimeSeries, Trend, TrendSequence};

use crate::config::{Column, DatasetConfig};

fn delimiter_byte(c: char) -> anyhow::Result<u8> {
    u8::try_from(c).map_err(|_| anyhow!("delimiter {c:?} is not a single byte"))
}

/// Read one column of a delimited file. Cells equal to the missing token,
/// or empty, become gaps; anything else must parse as a finite number.
pub fn load_csv(cfg: &DatasetConfig) -> anyhow::Result<TimeSeries> {
    let file = std::fs::File::open(&cfg.path).with_context(|| format!("opening {}", cfg.path.display()))?;
    read_series(file, cfg)
}

pub fn read_series<R: std::io::Read>(input: R, cfg: &DatasetConfig) -> anyhow::Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(cfg.delimiter)?)
        .has_headers(cfg.has_header)
        .flexible(true)
        .from_reader(input);
    let index = match &cfg.column {
        Column::Index(i) => *i,
        Column::Name(name) => {
            if !cfg.has_header {
                bail!("column {name:?} selected by name but the file has no header");
            }
            let headers = reader.headers().context("reading header")?;
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| anyhow!("no column named {name:?} in header"))?
        }
    };

    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.context("malformed row")?;
        let row = record.position().map_or(0, |p| p.line());
        let cell = record
            .get(index)
            .ok_or_else(|| anyhow!("row {row}: no column {}", cfg.column))?
            .trim();
        if cell.is_empty() || cell == cfg.missing {
            values.push(None);
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| anyhow!("row {row}: cannot parse {cell:?} as a number"))?;
        if !v.is_finite() {
            bail!("row {row}: non-finite value {cell:?}");
        }
        values.push(Some(v));
    }
    if values.is_empty() {
        bail!("no data rows");
    }
    Ok(TimeSeries::from_options(values)?)
}

/// Replace `path` with `bytes` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// `index,start,end,slope,duration` rows.
pub fn trend_table(trends: &TrendSequence) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "start", "end", "slope", "duration"])?;
    for (k, t) in trends.trends().iter().enumerate() {
        let r = trends.range(k);
        w.write_record([
            k.to_string(),
            r.start.to_string(),
            r.end.to_string(),
            t.slope.to_string(),
            t.duration.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn parse_trend_table(text: &str) -> anyhow::Result<TrendSequence> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut trends = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).ok_or_else(|| anyhow!("row {row}: missing field {i}"));
        let slope: f64 = field(3)?.parse().map_err(|_| anyhow!("row {row}: bad slope"))?;
        let duration: usize = field(4)?.parse().map_err(|_| anyhow!("row {row}: bad duration"))?;
        trends.push(Trend::new(slope, duration)?);
    }
    Ok(TrendSequence::from_trends(trends)?)
}
