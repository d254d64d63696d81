//! In-memory artifacts and the files they become.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use smms_lab::Domain;

use crate::error::CliError;
use crate::fields::axis_names;

/// Shortest decimal that round-trips to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Fixed-column CSV table.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Table with `node` and coordinate columns followed by one column per field.
pub fn node_table(d: &Domain, columns: &[(&str, &[f64])]) -> Table {
    let mut header = vec!["node".to_string()];
    header.extend(axis_names(d).iter().map(|s| s.to_string()));
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    let mut t = Table::new(header);
    for i in 0..d.node_count() {
        let mut row = vec![i.to_string()];
        row.extend(d.coord(i).iter().map(|&x| num(x)));
        row.extend(columns.iter().map(|(_, v)| num(v[i])));
        t.push(row);
    }
    t
}

/// Same for boundary fields, with the boundary slot and its node.
pub fn boundary_table(d: &Domain, columns: &[(&str, &[f64])]) -> Table {
    let mut header = vec!["slot".to_string(), "node".to_string()];
    header.extend(axis_names(d).iter().map(|s| s.to_string()));
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    let mut t = Table::new(header);
    for (s, &i) in d.boundary_index_set().iter().enumerate() {
        let mut row = vec![s.to_string(), i.to_string()];
        row.extend(d.coord(i).iter().map(|&x| num(x)));
        row.extend(columns.iter().map(|(_, v)| num(v[s])));
        t.push(row);
    }
    t
}

/// Everything a command produced, keyed by file name.
#[derive(Default)]
pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
    /// Printed on stdout after a successful run.
    pub summary: Value,
    /// Files read besides the configuration.
    pub inputs: Vec<PathBuf>,
}

impl Artifacts {
    pub fn csv(&mut self, name: &str, t: &Table) {
        self.files.insert(name.to_string(), t.to_bytes());
    }

    pub fn json(&mut self, name: &str, v: &impl Serialize) {
        let mut bytes = serde_json::to_vec_pretty(v).expect("serializable artifact");
        bytes.push(b'\n');
        self.files.insert(name.to_string(), bytes);
    }

    pub fn write_all(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (name, bytes) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, bytes).map_err(|e| CliError::io(p, e))?;
        }
        Ok(())
    }
}
