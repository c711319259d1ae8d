use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::{Error, Result};

/// The `# key=value ...` line that opens every CSV the harness writes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metadata {
    pub experiment: String,
    pub kind: String,
    /// Column distinguishing curves, if any.
    pub series: Option<String>,
    pub x: String,
    pub y: String,
    pub extra: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(experiment: &str, kind: &str, series: Option<&str>, x: &str, y: &str) -> Self {
        Metadata {
            experiment: experiment.to_string(),
            kind: kind.to_string(),
            series: series.map(str::to_string),
            x: x.to_string(),
            y: y.to_string(),
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: &str) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.extra.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_line(&self) -> String {
        let mut line = format!(
            "# experiment={} kind={} series={} x={} y={}",
            self.experiment,
            self.kind,
            self.series.as_deref().unwrap_or("-"),
            self.x,
            self.y
        );
        for (k, v) in &self.extra {
            line.push_str(&format!(" {k}={v}"));
        }
        line
    }

    pub fn parse_line(line: &str) -> Result<Metadata> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing '# experiment=...' metadata line".into()))?;
        let mut pairs = Vec::new();
        for token in body.split_whitespace() {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad metadata token {token:?}")))?;
            pairs.push((k.to_string(), v.to_string()));
        }
        let mut take = |key: &str| -> Result<String> {
            let i = pairs
                .iter()
                .position(|(k, _)| k == key)
                .ok_or_else(|| Error::Parse(format!("metadata has no {key:?}")))?;
            Ok(pairs.remove(i).1)
        };
        let experiment = take("experiment")?;
        let kind = take("kind")?;
        let series = take("series")?;
        let x = take("x")?;
        let y = take("y")?;
        Ok(Metadata {
            experiment,
            kind,
            series: (series != "-").then_some(series),
            x,
            y,
            extra: pairs,
        })
    }
}

/// A metadata line, a header row and string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Metadata,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(metadata: Metadata, header: &[&str]) -> Self {
        Table {
            metadata,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("no column {name:?} in {:?}", self.header)))
    }

    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse()
                    .map_err(|_| Error::Parse(format!("column {name:?}: {:?} is not a number", r[c])))
            })
            .collect()
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.metadata.to_line())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read<R: Read>(input: R) -> Result<Table> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let metadata = Metadata::parse_line(first.trim_end())?;
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(Error::Parse("missing header row".into()));
        }
        let mut rows = Vec::new();
        for record in r.records() {
            rows.push(record?.iter().map(str::to_string).collect());
        }
        Ok(Table {
            metadata,
            header,
            rows,
        })
    }

    pub fn read_path(path: &Path) -> Result<Table> {
        Table::read(std::fs::File::open(path)?)
    }

    /// Writes to `path` via a temporary file in the same directory and an
    /// atomic rename.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string()?.as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Formats `v` with at most 9 significant digits.
pub fn fmt_float(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    if rounded == 0.0 {
        return "0".to_string();
    }
    let plain = rounded.to_string();
    let exp = rounded.abs().log10().floor() as i32;
    if (-5..=15).contains(&exp) {
        plain
    } else {
        let s = format!("{rounded:.8e}");
        let (mantissa, e) = s.split_once('e').unwrap_or((&s, "0"));
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Median,
    Mean,
}

impl Statistic {
    pub fn as_str(&self) -> &'static str {
        match self {
            Statistic::Median => "median",
            Statistic::Mean => "mean",
        }
    }

    pub fn parse(s: &str) -> Result<Statistic> {
        match s {
            "median" => Ok(Statistic::Median),
            "mean" => Ok(Statistic::Mean),
            _ => Err(Error::Parse(format!("unknown statistic {s:?} (median or mean)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorBand {
    Interquartile,
    StandardError,
}

impl ErrorBand {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorBand::Interquartile => "interquartile",
            ErrorBand::StandardError => "standard-error",
        }
    }

    pub fn parse(s: &str) -> Result<ErrorBand> {
        match s {
            "interquartile" | "iqr" => Ok(ErrorBand::Interquartile),
            "standard-error" | "stderr" | "se" => Ok(ErrorBand::StandardError),
            _ => Err(Error::Parse(format!(
                "unknown error band {s:?} (interquartile or standard-error)"
            ))),
        }
    }
}

/// Linear-interpolation quantile of sorted data (the usual "type 7").
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub statistic: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn summarize(values: &[f64], statistic: Statistic, band: ErrorBand) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty set".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let center = match statistic {
        Statistic::Median => quantile(&sorted, 0.5),
        Statistic::Mean => mean,
    };
    let (lower, upper) = match band {
        ErrorBand::Interquartile => (quantile(&sorted, 0.25), quantile(&sorted, 0.75)),
        ErrorBand::StandardError => {
            let se = if n > 1 {
                let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            (center - se, center + se)
        }
    };
    Ok(Summary {
        n,
        statistic: center,
        lower,
        upper,
    })
}

pub const AGGREGATE_KIND: &str = "aggregate";
pub const AGGREGATE_HEADER: [&str; 6] = ["series", "x", "n", "statistic", "lower", "upper"];

/// Groups rows by series and x (in order of first appearance) and
/// summarizes the y column across the remaining rows of each group.
pub fn aggregate(table: &Table, statistic: Statistic, band: ErrorBand) -> Result<Table> {
    let meta = &table.metadata;
    if meta.kind == AGGREGATE_KIND {
        return Err(Error::InvalidArgument("table is already aggregated".into()));
    }
    if table.rows.is_empty() {
        return Err(Error::InvalidArgument("no records to aggregate".into()));
    }
    let sc = meta.series.as_deref().map(|s| table.column(s)).transpose()?;
    let xc = table.column(&meta.x)?;
    let ys = table.numeric_column(&meta.y)?;
    let mut groups: Vec<((String, String), Vec<f64>)> = Vec::new();
    for (row, y) in table.rows.iter().zip(ys) {
        let key = (sc.map_or_else(String::new, |c| row[c].clone()), row[xc].clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(y),
            None => groups.push((key, vec![y])),
        }
    }
    let metadata = Metadata::new(&meta.experiment, AGGREGATE_KIND, Some("series"), "x", "statistic")
        .with("source", &meta.kind)
        .with("xlabel", &meta.x)
        .with("ylabel", &meta.y)
        .with("statistic", statistic.as_str())
        .with("error", band.as_str());
    let mut out = Table::new(metadata, &AGGREGATE_HEADER);
    for ((series, x), values) in groups {
        let s = summarize(&values, statistic, band)?;
        out.push(vec![
            series,
            x,
            s.n.to_string(),
            fmt_float(s.statistic),
            fmt_float(s.lower),
            fmt_float(s.upper),
        ]);
    }
    Ok(out)
}
