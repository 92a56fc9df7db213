use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::Scheme;
use super::driver::SweepResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid("format", format!("unknown format `{other}`"))),
        }
    }
}

/// Flat CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub throughput: f64,
    pub throughput_se: f64,
    pub per_common: Option<f64>,
    pub per_private: Option<f64>,
    pub mer: Option<f64>,
    pub latency: Option<f64>,
    pub latency_se: Option<f64>,
    pub n_drops: usize,
}

pub const CSV_HEADER: [&str; 10] = [
    "snr_db",
    "scheme",
    "throughput",
    "throughput_se",
    "per_common",
    "per_private",
    "mer",
    "latency",
    "latency_se",
    "n_drops",
];

pub fn rows(result: &SweepResult) -> Vec<ResultRow> {
    result
        .points
        .iter()
        .map(|p| ResultRow {
            snr_db: p.snr_db,
            scheme: p.scheme,
            throughput: p.throughput,
            throughput_se: p.throughput_se,
            per_common: p.per_common,
            per_private: p.per_private,
            mer: p.mer,
            latency: p.latency,
            latency_se: p.latency_se,
            n_drops: p.n_drops,
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_into<W: Write>(result: &SweepResult, out: W) -> csv::Result<W> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows(result) {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut w = csv_into(result, create(path)?).map_err(csv_err(path))?;
    w.flush().map_err(io_err(path))
}

/// The file contents `emit_results` would write.
pub fn render(result: &SweepResult, format: OutputFormat) -> Result<String> {
    let here = Path::new("<memory>");
    let bytes = match format {
        OutputFormat::Csv => csv_into(result, Vec::new()).map_err(csv_err(here))?,
        OutputFormat::Json => {
            let mut v = serde_json::to_vec_pretty(result).map_err(|source| Error::Json {
                path: here.to_path_buf(),
                source,
            })?;
            v.push(b'\n');
            v
        }
    };
    Ok(String::from_utf8(bytes).expect("csv and json output are UTF-8"))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

/// Full result including the configuration echo.
pub fn write_json(result: &SweepResult, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, result).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json(path: &Path) -> Result<SweepResult> {
    let f = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(f)).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_results(result: &SweepResult, format: OutputFormat, path: &Path) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(result, path),
        OutputFormat::Json => write_json(result, path),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// SNR in the first column, one column group per scheme.
fn write_table<F>(result: &SweepResult, path: &Path, columns: &[&str], cells: F) -> Result<()>
where
    F: Fn(&super::driver::PointResult) -> Vec<String>,
{
    let mut schemes: Vec<Scheme> = result.points.iter().map(|p| p.scheme).collect();
    schemes.sort();
    schemes.dedup();
    let mut snrs: Vec<f64> = result.points.iter().map(|p| p.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();

    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["snr_db".to_string()];
    for s in &schemes {
        header.extend(columns.iter().map(|c| format!("{s}_{c}")));
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for snr in snrs {
        let mut rec = vec![snr.to_string()];
        for &s in &schemes {
            match result.point(s, snr) {
                Some(p) => rec.extend(cells(p)),
                None => rec.extend(columns.iter().map(|_| String::new())),
            }
        }
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `throughput.csv`, `per.csv`, `mer.csv` and `latency.csv` into
/// `dir` and returns their paths.
pub fn emit_plot_data(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let out = |name: &str| dir.join(name);
    write_table(result, &out("throughput.csv"), &["throughput", "se"], |p| {
        vec![p.throughput.to_string(), p.throughput_se.to_string()]
    })?;
    write_table(result, &out("per.csv"), &["common", "private"], |p| {
        vec![fmt_opt(p.per_common), fmt_opt(p.per_private)]
    })?;
    write_table(result, &out("mer.csv"), &["mer"], |p| vec![fmt_opt(p.mer)])?;
    write_table(result, &out("latency.csv"), &["latency", "se"], |p| {
        vec![fmt_opt(p.latency), fmt_opt(p.latency_se)]
    })?;
    Ok(["throughput.csv", "per.csv", "mer.csv", "latency.csv"]
        .iter()
        .map(|n| out(n))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimConfig;

    #[test]
    fn empty_sweep_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let r = SweepResult {
            config: SimConfig::default(),
            points: vec![],
        };
        write_csv(&r, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.trim_end(), CSV_HEADER.join(","));
        assert!(read_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn io_errors_carry_the_path() {
        let r = SweepResult {
            config: SimConfig::default(),
            points: vec![],
        };
        let bad = Path::new("/nonexistent-dir/x.csv");
        match write_csv(&r, bad) {
            Err(Error::Io { path, .. }) => assert_eq!(path, bad),
            other => panic!("{other:?}"),
        }
    }
}
