use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliResult;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Destination for CSV data: a file, or standard output.
pub struct Sink {
    path: Option<PathBuf>,
    out: Box<dyn Write>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> CliResult<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Self {
            path: path.map(Path::to_path_buf),
            out,
        })
    }

    pub fn is_stdout(&self) -> bool {
        self.path.is_none()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn header(&mut self, columns: &[String]) -> CliResult<()> {
        writeln!(self.out, "{}", columns.join(","))?;
        Ok(())
    }

    pub fn row(&mut self, values: &[f64]) -> CliResult<()> {
        let cells: Vec<String> = values.iter().map(|v| float(*v)).collect();
        writeln!(self.out, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Run metadata as `key = value` lines: a `.meta.toml` file next to the
/// CSV, or standard error when the CSV goes to standard output.
pub fn write_metadata(csv: Option<&Path>, entries: &[(&str, String)]) -> CliResult<()> {
    let body: String = entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    match csv {
        Some(p) => {
            let mut name = p.as_os_str().to_owned();
            name.push(".meta.toml");
            std::fs::write(PathBuf::from(name), body)?;
        }
        None => eprint!("{}", body.lines().map(|l| format!("# {l}\n")).collect::<String>()),
    }
    Ok(())
}

/// TOML literal for a string value.
pub fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.184802057337662, 1e-300, 6.02e23] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert!(!s.contains(','));
        }
        assert_eq!(float(0.5), "5.0000000000000000e-1");
        assert_eq!(float(f64::NAN), "NaN");
    }

    #[test]
    fn metadata_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("run.csv");
        write_metadata(Some(&csv), &[("seed", "3".into()), ("system", quoted("srb"))]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("run.csv.meta.toml")).unwrap();
        let v: toml::Table = toml::from_str(&text).unwrap();
        assert_eq!(v["seed"].as_integer(), Some(3));
        assert_eq!(v["system"].as_str(), Some("srb"));
    }
}
