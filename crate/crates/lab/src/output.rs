//! CSV tables, field dumps and sidecar text, all written through a temporary file
//! in the target directory and renamed into place.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use finsler_core::discrete::Field;
use finsler_core::{DecayModel, Mesh};

use crate::config::Config;
use crate::error::Result;
use crate::experiments::Ladder;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_float(*v)))?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// `x1,..,xd,value`, one row per node.
pub fn field_csv(mesh: &Mesh, field: &Field) -> Result<Vec<u8>> {
    let mut header: Vec<String> = (1..=mesh.dim()).map(|k| format!("x{k}")).collect();
    header.push("value".into());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for (i, v) in field.values.iter().enumerate() {
        let mut rec: Vec<String> = mesh.coords(i).iter().map(|x| fmt_float(*x)).collect();
        rec.push(fmt_float(*v));
        w.write_record(&rec)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// `iteration,stage,value` for a concatenated multi-stage trace.
pub fn trace_csv(trace: &[f64], stage_starts: &[usize]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "stage", "value"])?;
    let mut stage = 0;
    let mut local = 0;
    for (k, v) in trace.iter().enumerate() {
        if stage + 1 < stage_starts.len() && k >= stage_starts[stage + 1] {
            stage += 1;
            local = 0;
        }
        w.write_record([local.to_string(), stage.to_string(), fmt_float(*v)])?;
        local += 1;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn model_name(m: DecayModel) -> &'static str {
    match m {
        DecayModel::Power => "power",
        DecayModel::Exponential => "exponential",
    }
}

/// Config, version, reference values, fits and checks of a ladder run.
pub fn fits_text(cfg: &Config, ladder: &Ladder) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "finsler-lab {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "experiment: {}", ladder.kind.name());
    let _ = writeln!(s, "solver seed: {}; multi-start seeds: {:?}", cfg.seed, cfg.seeds);
    let _ = writeln!(s);
    for (name, v) in &ladder.reference {
        let _ = writeln!(s, "{name} = {}", fmt_float(*v));
    }
    if !ladder.fits.is_empty() {
        let _ = writeln!(s, "\nfits:");
    }
    for f in &ladder.fits {
        match &f.fit {
            Ok(r) => {
                let param = if r.model == DecayModel::Power { "exponent" } else { "rate" };
                let _ = writeln!(
                    s,
                    "  {} {}: {param} = {:.6}, constant = {:.6e}, r_squared = {:.6}, dropped = {}, below noise floor = {}",
                    f.label,
                    model_name(f.model),
                    r.exponent_or_rate,
                    r.constant,
                    r.r_squared,
                    r.dropped,
                    f.below_floor
                );
            }
            Err(e) => {
                let _ = writeln!(s, "  {} {}: {e} (below noise floor = {})", f.label, model_name(f.model), f.below_floor);
            }
        }
    }
    let _ = writeln!(s, "\nchecks:");
    for c in &ladder.checks {
        let _ = writeln!(s, "  [{}] {}{}", if c.passed { "pass" } else { "FAIL" }, c.name, if c.detail.is_empty() { String::new() } else { format!(": {}", c.detail) });
    }
    let _ = writeln!(s, "\nconfig:");
    for line in cfg.to_string().lines() {
        let _ = writeln!(s, "  {line}");
    }
    s
}

/// A gnuplot script plotting every data column of `csv_name` against ℓ.
pub fn plot_script(ladder: &Ladder, csv_name: &str) -> String {
    let logscale = match ladder.kind {
        crate::config::ExperimentKind::SolutionRate | crate::config::ExperimentKind::EigenRate => "set logscale y\n",
        _ => "",
    };
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'ell'\n{logscale}set terminal pngcairo size 900,600\nset output '{}.png'\n",
        ladder.kind.name()
    );
    let curves: Vec<String> = (2..=ladder.header.len()).map(|k| format!("'{csv_name}' using 1:{k} with linespoints")).collect();
    let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
    s
}

/// Writes `<kind>.csv`, `fits.txt`, `plot.gp` and `resolved.cfg` into `dir`.
pub fn write_ladder(dir: &Path, cfg: &Config, ladder: &Ladder) -> Result<()> {
    let csv_name = format!("{}.csv", ladder.kind.name());
    write_atomic(&dir.join(&csv_name), &csv_table(&ladder.header, &ladder.rows)?)?;
    write_atomic(&dir.join("fits.txt"), fits_text(cfg, ladder).as_bytes())?;
    write_atomic(&dir.join("plot.gp"), plot_script(ladder, &csv_name).as_bytes())?;
    write_resolved(dir, cfg)
}

pub fn write_resolved(dir: &Path, cfg: &Config) -> Result<()> {
    write_atomic(&dir.join("resolved.cfg"), cfg.to_string().as_bytes())
}
