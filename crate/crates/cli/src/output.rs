use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use dbmc::sim::{max_abs, Trajectory};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header `t,node_1,...,node_n,vplus,vminus,maxabs_err`; node columns hold
/// the state errors.
pub fn write_trajectory_csv<W: Write>(tr: &Trajectory, out: W) -> Result<()> {
    let n = tr.errors.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("node_{i}")));
    header.extend(["vplus", "vminus", "maxabs_err"].map(String::from));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(n + 4);
    for k in 0..tr.len() {
        row.clear();
        row.push(fmt(tr.times[k]));
        row.extend(tr.errors[k].iter().map(|&e| fmt(e)));
        row.push(fmt(tr.v_plus[k]));
        row.push(fmt(tr.v_minus[k]));
        row.push(fmt(max_abs(&tr.errors[k])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_file(tr: &Trajectory, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trajectory_csv(tr, std::io::BufWriter::new(file))
}

/// Time column and per-node error columns of a trajectory CSV.
pub struct ErrorTable {
    pub times: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
}

pub fn read_error_table<R: std::io::Read>(input: R) -> Result<ErrorTable> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().context("reading CSV header")?.clone();
    if headers.get(0) != Some("t") {
        anyhow::bail!("malformed trajectory CSV: first column must be `t`");
    }
    let node_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("node_"))
        .map(|(i, _)| i)
        .collect();
    if node_cols.is_empty() {
        anyhow::bail!("malformed trajectory CSV: no node_ columns");
    }
    let mut table = ErrorTable { times: Vec::new(), nodes: vec![Vec::new(); node_cols.len()] };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("CSV row {}", line + 2))?;
        let parse = |i: usize| -> Result<f64> {
            let field = rec.get(i).with_context(|| format!("row {} is missing column {i}", line + 2))?;
            field.trim().parse().with_context(|| format!("row {}: bad number {field:?}", line + 2))
        };
        table.times.push(parse(0)?);
        for (slot, &c) in node_cols.iter().enumerate() {
            table.nodes[slot].push(parse(c)?);
        }
    }
    if table.times.is_empty() {
        anyhow::bail!("trajectory CSV has no samples");
    }
    Ok(table)
}
