use serde_json::{Map, Value};

use crate::Format;

/// Ordered key/value result printed to stdout.
#[derive(Debug, Default)]
pub struct Report {
    fields: Vec<(String, Value)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.fields.push((key.to_string(), value.into()));
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let map: Map<String, Value> = self.fields.iter().cloned().collect();
                let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("plain values");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = String::from("key,value\n");
                for (k, v) in &self.fields {
                    let text = match v {
                        Value::String(t) => t.clone(),
                        other => other.to_string(),
                    };
                    s.push_str(&format!("{k},{}\n", csv_escape(&text)));
                }
                s
            }
        }
    }
}

pub fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Fixed-width text rendering of a confusion matrix.
pub fn confusion_table(classes: &[String], confusion: &[Vec<f64>]) -> String {
    let width = classes.iter().map(String::len).max().unwrap_or(0).max("true\\pred".len());
    let mut s = format!("{:>width$}", "true\\pred");
    for c in classes {
        s.push_str(&format!(" {c:>width$}"));
    }
    s.push('\n');
    for (c, row) in classes.iter().zip(confusion) {
        s.push_str(&format!("{c:>width$}"));
        for v in row {
            s.push_str(&format!(" {v:>width$.3}"));
        }
        s.push('\n');
    }
    s
}
