//! Row formatting for CSV and JSON-lines output.

use std::io::{self, Write};

/// One output cell. Reals print with 17 significant digits so they round-trip.
#[derive(Clone, Debug)]
pub enum Field {
    Real(f64),
    Int(u64),
    Text(&'static str),
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::Real(v) => real(*v),
            Field::Int(v) => v.to_string(),
            Field::Text(s) => s.to_string(),
        }
    }

    fn json(&self) -> String {
        match self {
            Field::Real(v) if v.is_finite() => real(*v),
            // JSON has no infinities; keep the CLI's `inf` literal as a string
            Field::Real(v) => serde_json::to_string(&real(*v)).expect("string"),
            Field::Int(v) => v.to_string(),
            Field::Text(s) => serde_json::to_string(s).expect("string"),
        }
    }
}

fn real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

enum Inner<W: Write> {
    Csv(Box<csv::Writer<W>>),
    Jsonl(W),
}

/// Writes rows under a fixed list of columns, one line per row.
pub struct RowWriter<W: Write> {
    inner: Inner<W>,
    columns: &'static [&'static str],
}

impl<W: Write> RowWriter<W> {
    pub fn new(out: W, format: Format, columns: &'static [&'static str]) -> io::Result<Self> {
        let inner = match format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
                w.write_record(columns)?;
                Inner::Csv(Box::new(w))
            }
            Format::Jsonl => Inner::Jsonl(out),
        };
        Ok(RowWriter { inner, columns })
    }

    pub fn row(&mut self, fields: &[Field]) -> io::Result<()> {
        debug_assert_eq!(fields.len(), self.columns.len());
        match &mut self.inner {
            Inner::Csv(w) => w.write_record(fields.iter().map(Field::csv))?,
            Inner::Jsonl(w) => {
                let body: Vec<String> = self
                    .columns
                    .iter()
                    .zip(fields)
                    .map(|(name, f)| format!("\"{name}\":{}", f.json()))
                    .collect();
                writeln!(w, "{{{}}}", body.join(","))?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> io::Result<()> {
        match self.inner {
            Inner::Csv(mut w) => w.flush(),
            Inner::Jsonl(mut w) => w.flush(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(format: Format) -> String {
        let mut buf = Vec::new();
        let mut w = RowWriter::new(&mut buf, format, &["x", "kind", "n"]).unwrap();
        w.row(&[Field::Real(0.1), Field::Text("exit"), Field::Int(3)]).unwrap();
        w.row(&[Field::Real(f64::INFINITY), Field::Text("none"), Field::Int(0)]).unwrap();
        w.finish().unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn csv_rows() {
        assert_eq!(
            render(Format::Csv),
            "x,kind,n\n1.0000000000000001e-1,exit,3\ninf,none,0\n"
        );
    }

    #[test]
    fn jsonl_rows_parse() {
        let text = render(Format::Jsonl);
        let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(rows[0]["x"].as_f64(), Some(0.1));
        assert_eq!(rows[1]["x"], "inf");
        assert_eq!(rows[0]["kind"], "exit");
    }

    #[test]
    fn reals_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02e23, -1e-300, f64::MIN_POSITIVE] {
            assert_eq!(real(v).parse::<f64>().unwrap(), v);
        }
    }
}
