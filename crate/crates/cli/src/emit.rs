//! Output assembly: CSV with a fixed header and 17-significant-digit values,
//! or a JSON mirror carrying the same rows plus a metadata block.

use std::io::Write;

/// One table cell: trajectory identifiers print as plain integers, physics
/// values in full-precision scientific notation.
#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Index(usize),
    Number(f64),
}

/// A fully assembled output table.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: serde_json::Value,
}

fn render(cell: &Cell) -> String {
    match cell {
        Cell::Index(i) => i.to_string(),
        Cell::Number(v) => format!("{v:.16e}"),
    }
}

pub fn write_csv(out: &mut dyn Write, table: &Table) -> std::io::Result<()> {
    writeln!(out, "{}", table.columns.join(","))?;
    for row in &table.rows {
        let line: Vec<String> = row.iter().map(render).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

fn json_value(table: &Table) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = table
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| match c {
                    Cell::Index(i) => serde_json::json!(i),
                    Cell::Number(v) => serde_json::json!(v),
                })
                .collect()
        })
        .collect();
    serde_json::json!({
        "metadata": table.metadata,
        "columns": table.columns,
        "rows": rows,
    })
}

pub fn write_json(out: &mut dyn Write, table: &Table) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, &json_value(table))?;
    writeln!(out)
}

/// Several tables in one JSON stream become an array document.
pub fn write_json_many(out: &mut dyn Write, tables: &[Table]) -> std::io::Result<()> {
    let docs: Vec<serde_json::Value> = tables.iter().map(json_value).collect();
    serde_json::to_writer_pretty(&mut *out, &docs)?;
    writeln!(out)
}
