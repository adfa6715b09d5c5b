use anyhow::Result;
use usersim_core::metrics::Stat;

/// A rendered table: CSV for machines, aligned text for people.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, title: &str, headers: &[&str]) -> Self {
        Table {
            name: name.into(),
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner()?)
    }

    /// First column left-aligned, the rest right-aligned.
    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                let pad = w - c.chars().count();
                if i == 0 {
                    s.push_str(c);
                    s.extend(std::iter::repeat_n(' ', pad));
                } else {
                    s.extend(std::iter::repeat_n(' ', pad));
                    s.push_str(c);
                }
            }
            s.trim_end().to_string()
        };
        let total: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
        let mut out = format!("{}\n", self.title);
        out.push_str(&line(&self.headers));
        out.push('\n');
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.4}")
}

pub fn fmt_stat(s: Stat) -> String {
    match s {
        Stat::Value(v) => fmt_f64(v),
        Stat::Undefined => "Undefined".into(),
    }
}

/// Small p-values in scientific notation.
pub fn fmt_p(s: Stat) -> String {
    match s {
        Stat::Value(v) if v > 0.0 && v < 1e-3 => format!("{v:.2e}"),
        other => fmt_stat(other),
    }
}

pub fn missing() -> String {
    "-".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_csv_layout() {
        let mut t = Table::new("x", "Example", &["Generator", "IMDB"]);
        t.push(vec!["Human".into(), fmt_f64(12.6149)]);
        t.push(vec!["DI, with comma".into(), fmt_stat(Stat::Undefined)]);
        assert_eq!(
            t.to_text(),
            "Example\nGenerator            IMDB\n-------------------------\nHuman             12.6149\nDI, with comma  Undefined\n"
        );
        assert_eq!(
            String::from_utf8(t.to_csv().unwrap()).unwrap(),
            "Generator,IMDB\nHuman,12.6149\n\"DI, with comma\",Undefined\n"
        );
        assert_eq!(fmt_p(Stat::Value(0.00001234)), "1.23e-5");
    }
}
