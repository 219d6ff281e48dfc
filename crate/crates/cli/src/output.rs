//! Structured records and delimited tables.

use std::fmt::Write as _;

use crate::args::Format;

/// 17 significant digits, enough to reproduce any double exactly.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Default)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

impl Section {
    pub fn new(name: &str) -> Self {
        Section {
            name: name.to_string(),
            entries: Vec::new(),
        }
    }

    pub fn text(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn num(self, key: &str, value: f64) -> Self {
        self.text(key, num(value))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Table::default()
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }
}

/// Everything a command writes to its output.
#[derive(Debug, Clone, Default)]
pub struct Document {
    pub sections: Vec<Section>,
    pub table: Option<Table>,
    /// Closing line, e.g. a pass count.
    pub summary: Option<String>,
}

impl Document {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Record => self.render_record(),
            Format::Csv => self.render_csv(),
        }
    }

    fn render_record(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            write_section(&mut out, s);
        }
        if let Some(t) = &self.table {
            for c in &t.comments {
                writeln!(out, "# {c}").unwrap();
            }
            for row in &t.rows {
                out.push_str("[row]\n");
                for (k, v) in t.columns.iter().zip(row) {
                    writeln!(out, "{k} = {v}").unwrap();
                }
                out.push('\n');
            }
        }
        if let Some(s) = &self.summary {
            writeln!(out, "[summary]\nresult = {s}").unwrap();
        }
        out
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        if !self.sections.is_empty() {
            out.push_str("section,key,value\n");
            for s in &self.sections {
                for (k, v) in &s.entries {
                    writeln!(out, "{},{},{}", s.name, k, csv_cell(v)).unwrap();
                }
            }
        }
        if let Some(t) = &self.table {
            if !self.sections.is_empty() {
                out.push('\n');
            }
            writeln!(out, "{}", t.columns.join(",")).unwrap();
            for c in &t.comments {
                writeln!(out, "# {c}").unwrap();
            }
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(|c| csv_cell(c)).collect();
                writeln!(out, "{}", cells.join(",")).unwrap();
            }
        }
        if let Some(s) = &self.summary {
            writeln!(out, "# {s}").unwrap();
        }
        out
    }
}

fn write_section(out: &mut String, s: &Section) {
    writeln!(out, "[{}]", s.name).unwrap();
    for (k, v) in &s.entries {
        writeln!(out, "{k} = {v}").unwrap();
    }
    out.push('\n');
}

fn csv_cell(v: &str) -> String {
    if v.contains([',', '"', '\n']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}

/// The machine-parsable error record written to stderr.
pub fn error_record(kind: &str, field: Option<&str>, message: &str) -> String {
    let mut s = Section::new("error").text("kind", kind);
    if let Some(f) = field {
        s = s.text("field", f);
    }
    s = s.text("message", message.replace('\n', " "));
    let mut out = String::new();
    write_section(&mut out, &s);
    out
}
