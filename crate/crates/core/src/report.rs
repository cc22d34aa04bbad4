//! Plain-text reports: `key = value` lines followed by CSV tables.
//!
//! ```text
//! # bend ensemble
//! method = sbend
//! accuracy = 0.9
//!
//! [per_classifier]
//! classifier,accuracy
//! 0,0.85
//! ```

use std::fmt::{Display, Write};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub command: String,
    pub fields: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report {
            command: command.into(),
            fields: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn field(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.fields.push((key.into(), value.to_string()));
        self
    }

    pub fn table(&mut self, name: impl Into<String>, header: &[&str], rows: Vec<Vec<String>>) -> &mut Self {
        self.tables.push(Table {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows,
        });
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn table_named(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = format!("# bend {}\n", self.command);
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{k} = {v}");
        }
        for t in &self.tables {
            let _ = writeln!(out, "\n[{}]\n{}", t.name, t.header.join(","));
            for r in &t.rows {
                let _ = writeln!(out, "{}", r.join(","));
            }
        }
        out
    }
}
