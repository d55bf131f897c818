//! CSV rows flushed as they are produced, plus a companion gnuplot script.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

pub struct CsvSink {
    writer: csv::Writer<Box<dyn Write>>,
    path: Option<PathBuf>,
}

impl CsvSink {
    pub fn open(path: Option<&Path>, header: &[&str]) -> io::Result<Self> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout()),
        };
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(header)?;
        writer.flush()?;
        Ok(Self {
            writer,
            path: path.map(Path::to_path_buf),
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> io::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        self.writer.flush()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }
}

/// Shortest round-trip representation, scientific outside `[1e-4, 1e6)`;
/// empty for absent values.
pub fn num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| {
        let a = x.abs();
        if a == 0.0 || !a.is_finite() || (1e-4..1e6).contains(&a) {
            format!("{x}")
        } else {
            format!("{x:e}")
        }
    })
}

/// Plot description for [`write_plot_script`].
pub struct Plot<'a> {
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub log_x: bool,
    /// `(1-based column, title)` pairs plotted against column 1.
    pub series: Vec<(usize, String)>,
}

/// Write `<csv stem>.gp` next to the CSV and return its path.
pub fn write_plot_script(csv_path: &Path, plot: &Plot) -> io::Result<PathBuf> {
    let script = csv_path.with_extension("gp");
    let name = csv_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut f = BufWriter::new(File::create(&script)?);
    writeln!(f, "# gnuplot -p {}", script.file_name().unwrap().to_string_lossy())?;
    writeln!(f, "set datafile separator ','")?;
    writeln!(f, "set xlabel '{}'", plot.xlabel)?;
    writeln!(f, "set ylabel '{}'", plot.ylabel)?;
    if plot.log_x {
        writeln!(f, "set logscale x")?;
    }
    writeln!(f, "set key outside")?;
    let parts: Vec<String> = plot
        .series
        .iter()
        .enumerate()
        .map(|(i, (col, title))| {
            let file = if i == 0 { format!("'{name}'") } else { "''".to_string() };
            format!("{file} using 1:{col} skip 1 with linespoints title '{title}' noenhanced")
        })
        .collect();
    writeln!(f, "plot {}", parts.join(", \\\n     "))?;
    f.flush()?;
    Ok(script)
}
