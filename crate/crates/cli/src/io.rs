//! File formats. Every file starts with a `# config-sha256: <hex>` line;
//! readers skip `#` lines.
//!
//! Graph edge list: a line `n <count>`, then one `i j w` line per edge,
//! meaning `a_ij = w` (an edge from `j` to `i`), in row-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context};

use sisalloc_core::centralized::{Allocation, AllocationProblem, Bound, CornerReport};
use sisalloc_core::dadmm::{Message, RunTrace};
use sisalloc_core::epidemic::Trajectory;
use sisalloc_core::graph::DirectedGraph;

fn create(path: &Path, hash: &str) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# config-sha256: {hash}")?;
    Ok(w)
}

fn csv_writer(path: &Path, hash: &str) -> anyhow::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(create(path, hash)?))
}

fn csv_reader(path: &Path) -> anyhow::Result<csv::Reader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file))
}

fn fmt(values: impl IntoIterator<Item = f64>) -> impl Iterator<Item = String> {
    values.into_iter().map(|v| v.to_string())
}

pub fn write_graph(path: &Path, g: &DirectedGraph, hash: &str) -> anyhow::Result<()> {
    let mut w = create(path, hash)?;
    writeln!(w, "n {}", g.node_count())?;
    for (i, j, a) in g.edges() {
        writeln!(w, "{i} {j} {a}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_graph(path: &Path) -> anyhow::Result<DirectedGraph> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut n = None;
    let mut edges = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || anyhow!("{}:{}: malformed line {line:?}", path.display(), lineno + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (n, fields.as_slice()) {
            (None, ["n", count]) => n = Some(count.parse::<usize>().map_err(|_| bad())?),
            (Some(_), [i, j, w]) => edges.push((
                i.parse().map_err(|_| bad())?,
                j.parse().map_err(|_| bad())?,
                w.parse().map_err(|_| bad())?,
            )),
            _ => return Err(bad()),
        }
    }
    let n = n.ok_or_else(|| anyhow!("{}: missing `n <count>` line", path.display()))?;
    Ok(DirectedGraph::from_edges(n, edges)?)
}

pub fn write_allocation(path: &Path, a: &Allocation, prob: &AllocationProblem, hash: &str) -> anyhow::Result<()> {
    let mut w = csv_writer(path, hash)?;
    w.write_record(["node", "beta", "delta", "f_cost", "g_cost"])?;
    for i in 0..a.beta.len() {
        let f = prob.cost.vaccine_cost(i, a.beta[i])?;
        let g = prob.cost.antidote_cost(i, a.delta[i])?;
        let mut rec = vec![i.to_string()];
        rec.extend(fmt([a.beta[i], a.delta[i], f, g]));
        w.write_record(&rec)?;
    }
    let mut inner = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    writeln!(
        inner,
        "# summary total_cost={} abscissa={} eps_bar={}",
        a.total_cost, a.abscissa, prob.eps_bar
    )?;
    inner.flush()?;
    Ok(())
}

/// `(beta, delta)` columns of an allocation file.
pub fn read_allocation(path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv_reader(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["node", "beta", "delta", "f_cost", "g_cost"] {
        bail!("{}: unexpected header {:?}", path.display(), headers);
    }
    let (mut beta, mut delta) = (Vec::new(), Vec::new());
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let node: usize = rec[0].parse()?;
        if node != k {
            bail!("{}: rows must be ordered by node", path.display());
        }
        beta.push(rec[1].parse()?);
        delta.push(rec[2].parse()?);
    }
    Ok((beta, delta))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory, hash: &str) -> anyhow::Result<()> {
    let n = traj.node_count();
    let mut w = csv_writer(path, hash)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("p_{i}")));
    if traj.std_errors.is_some() {
        header.extend((1..=n).map(|i| format!("se_{i}")));
    }
    w.write_record(&header)?;
    for (k, (t, p)) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut rec: Vec<String> = fmt(std::iter::once(*t).chain(p.iter().copied())).collect();
        if let Some(se) = &traj.std_errors {
            rec.extend(fmt(se[k].iter().copied()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &RunTrace, hash: &str) -> anyhow::Result<()> {
    let with_gap = trace.records.first().is_some_and(|r| r.gap.is_some());
    let mut w = csv_writer(path, hash)?;
    let mut header = vec!["iter", "total_cost", "consensus_residual", "max_dual_norm", "worst_slack"];
    if with_gap {
        header.push("gap");
    }
    w.write_record(&header)?;
    for r in &trace.records {
        let mut rec = vec![r.iter.to_string()];
        rec.extend(fmt([r.total_cost, r.consensus_residual, r.max_dual_norm, r.worst_slack]));
        if let Some(g) = r.gap {
            rec.push(g.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_messages(path: &Path, log: &[Message], hash: &str) -> anyhow::Result<()> {
    let mut w = create(path, hash)?;
    for m in log {
        write!(w, "{},{},{}", m.iter, m.src, m.dst)?;
        for v in &m.values {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn bound_name(b: Bound) -> &'static str {
    match b {
        Bound::Lo => "lo",
        Bound::Hi => "hi",
    }
}

pub fn write_corners(path: &Path, report: &CornerReport, hash: &str) -> anyhow::Result<()> {
    let mut w = csv_writer(path, hash)?;
    w.write_record(["beta", "delta", "abscissa", "shifted_radius", "violates"])?;
    for c in &report.corners {
        w.write_record([
            bound_name(c.beta).to_string(),
            bound_name(c.delta).to_string(),
            c.abscissa.to_string(),
            c.shifted_radius.to_string(),
            c.violates(report.eps_bar).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable corner table.
pub fn format_corners(report: &CornerReport) -> String {
    let mut s = format!(
        "{:<6} {:<6} {:>14} {:>14}  stable at eps_bar={}\n",
        "beta", "delta", "lambda_1", "rho(BA+I-D)", report.eps_bar
    );
    for c in &report.corners {
        s.push_str(&format!(
            "{:<6} {:<6} {:>14.6} {:>14.6}  {}\n",
            bound_name(c.beta),
            bound_name(c.delta),
            c.abscissa,
            c.shifted_radius,
            if c.violates(report.eps_bar) { "no" } else { "yes" }
        ));
    }
    s
}
