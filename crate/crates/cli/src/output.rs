//! Artifact writers. Every float is written with Rust's `{:e}` formatting
//! (shortest round-trip mantissa), so identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lowrank_csd::dlra::LowRankFactors;
use lowrank_csd::grid::Grid2D;
use lowrank_csd::solver::{RunReport, StepRecord};
use nalgebra::DMatrix;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.sha256";

/// Collects files written below one directory.
pub struct ArtifactDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, CliError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: impl AsRef<Path>, contents: &str) -> Result<(), CliError> {
        let rel = rel.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(rel.to_path_buf());
        Ok(())
    }

    /// `sha256sum`-compatible listing of every file written, sorted by path.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.written.sort();
        self.written.dedup();
        let mut text = String::new();
        for rel in &self.written {
            let path = self.root.join(rel);
            let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            let digest = Sha256::digest(&bytes);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            let _ = writeln!(text, "{hex}  {}", rel_string(rel));
        }
        let path = self.root.join(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

fn rel_string(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn grid_header(grid: &Grid2D) -> String {
    let (x0, y0) = grid.origin();
    format!(
        "# nx={} ny={} dx={:e} dy={:e} origin_x={:e} origin_y={:e}\n",
        grid.nx(),
        grid.ny(),
        grid.dx(),
        grid.dy(),
        x0,
        y0
    )
}

/// Cell field: two `#` lines, then `nx` rows (index i) of `ny` values (index j).
pub fn field_csv(name: &str, grid: &Grid2D, values: &[f64]) -> String {
    let mut s = format!("# field={name}\n");
    s.push_str(&grid_header(grid));
    for i in 0..grid.nx() {
        let row: Vec<String> = (0..grid.ny()).map(|j| format!("{:e}", values[grid.cell(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Plain matrix with a `# rows=.. cols=..` line.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = format!("# rows={} cols={}\n", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// `step,t,component,rank` for every recorded step and moment component.
pub fn ranks_csv(names: &[String], records: &[StepRecord]) -> String {
    let mut s = String::from("step,t,component,rank\n");
    for r in records {
        for (name, rank) in names[1..].iter().zip(&r.ranks) {
            let _ = writeln!(s, "{},{:e},{},{}", r.step, r.t, name, rank);
        }
    }
    s
}

/// `step,t,dt,<component norms>,total_before,total_after`.
pub fn norms_csv(names: &[String], records: &[StepRecord]) -> String {
    let mut s = format!("step,t,dt,{},total_before,total_after\n", names.join(","));
    for r in records {
        let norms: Vec<String> = r.norms.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(
            s,
            "{},{:e},{:e},{},{:e},{:e}",
            r.step,
            r.t,
            r.dt,
            norms.join(","),
            r.total_before,
            r.total_after
        );
    }
    s
}

/// Legacy VTK structured points, x fastest, cell centres as points.
pub fn vtk(name: &str, grid: &Grid2D, values: &[f64]) -> String {
    let (x0, y0) = grid.origin();
    let mut s = format!(
        "# vtk DataFile Version 3.0\nlowrank-csd {name}\nASCII\nDATASET STRUCTURED_POINTS\nDIMENSIONS {} {} 1\nORIGIN {:e} {:e} 0e0\nSPACING {:e} {:e} 1e0\nPOINT_DATA {}\nSCALARS {name} double 1\nLOOKUP_TABLE default\n",
        grid.nx(),
        grid.ny(),
        x0 + 0.5 * grid.dx(),
        y0 + 0.5 * grid.dy(),
        grid.dx(),
        grid.dy(),
        grid.n_cells()
    );
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let _ = writeln!(s, "{:e}", values[grid.cell(i, j)]);
        }
    }
    s
}

/// Gnuplot script drawing the dose map and the rank histories.
pub fn plot_script(grid: &Grid2D, names: &[String]) -> String {
    let (x0, y0) = grid.origin();
    let comps: Vec<&str> = names[1..].iter().map(String::as_str).collect();
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 900,800\n\
         set output 'dose.png'\n\
         set view map\n\
         set size ratio -1\n\
         set xlabel 'x [cm]'\n\
         set ylabel 'y [cm]'\n\
         x0 = {x0:e}; y0 = {y0:e}; dx = {dx:e}; dy = {dy:e}\n\
         # rows of dose.csv are x indices, columns y indices\n\
         plot 'dose.csv' matrix using (x0 + ($2 + 0.5) * dx):(y0 + ($1 + 0.5) * dy):3 with image notitle\n\
         set output 'ranks.png'\n\
         set size noratio\n\
         set xlabel 't'\n\
         set ylabel 'rank'\n\
         plot for [c in \"{comps}\"] 'ranks.csv' every ::1 using 2:(strcol(3) eq c ? $4 : 1/0) with lines title c\n",
        dx = grid.dx(),
        dy = grid.dy(),
        comps = comps.join(" ")
    )
}

/// Writes the fields, histories, factors and summary of `report` under `prefix`.
pub fn write_report(
    dir: &mut ArtifactDir,
    prefix: &str,
    report: &RunReport,
    degree: usize,
    vtk_files: bool,
    extra: serde_json::Value,
) -> Result<(), CliError> {
    let p = |name: &str| if prefix.is_empty() { name.to_string() } else { format!("{prefix}/{name}") };
    let grid = &report.grid;
    let names = &report.component_names;
    dir.write(p("dose.csv"), &field_csv("dose", grid, report.dose.values()))?;
    dir.write(p("flux.csv"), &field_csv("scalar_flux", grid, &report.scalar_flux))?;
    dir.write(p("ranks.csv"), &ranks_csv(names, &report.records))?;
    dir.write(p("norms.csv"), &norms_csv(names, &report.records))?;
    for (name, f) in &report.factors {
        write_factors(dir, &p(&format!("factors/{name}")), name, f, grid, degree)?;
    }
    dir.write(p("plot.gp"), &plot_script(grid, names))?;
    if vtk_files {
        dir.write(p("dose.vtk"), &vtk("dose", grid, report.dose.values()))?;
        dir.write(p("flux.vtk"), &vtk("scalar_flux", grid, &report.scalar_flux))?;
    }
    let mut max_ranks = vec![0; names.len() - 1];
    for r in &report.records {
        for (m, &k) in max_ranks.iter_mut().zip(&r.ranks) {
            *m = (*m).max(k);
        }
    }
    let summary = json!({
        "tag": report.tag,
        "grid": grid_json(grid),
        "components": names,
        "steps": report.steps,
        "t_final": report.t_final,
        "dose_max": report.dose.max(),
        "final_ranks": report.records.last().map(|r| r.ranks.clone()).unwrap_or_default(),
        "max_ranks": max_ranks,
        "stability_violations": report.stability_violations,
        "extra": extra,
    });
    dir.write(p("report.json"), &format!("{:#}\n", summary))?;
    Ok(())
}

pub fn grid_json(grid: &Grid2D) -> serde_json::Value {
    let (x0, y0) = grid.origin();
    json!({"nx": grid.nx(), "ny": grid.ny(), "dx": grid.dx(), "dy": grid.dy(), "origin": [x0, y0]})
}

pub fn write_factors(
    dir: &mut ArtifactDir,
    rel: &str,
    name: &str,
    f: &LowRankFactors,
    grid: &Grid2D,
    degree: usize,
) -> Result<(), CliError> {
    dir.write(format!("{rel}/X.csv"), &matrix_csv(&f.x))?;
    dir.write(format!("{rel}/S.csv"), &matrix_csv(&f.s))?;
    dir.write(format!("{rel}/W.csv"), &matrix_csv(&f.w))?;
    let meta = json!({
        "component": name,
        "n_x": f.n_x(),
        "m": f.m(),
        "rank": f.rank(),
        "degree": degree,
        "grid": grid_json(grid),
    });
    dir.write(format!("{rel}/meta.json"), &format!("{:#}\n", meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lowrank_csd::grid::{build_grid, BoundaryMode};

    #[test]
    fn field_layout_and_header() {
        let grid = build_grid(3, 4, 0.5, 0.25, (1.0, -2.0), &[1.0; 12], BoundaryMode::DirichletGhost, 0.0).unwrap();
        let values: Vec<f64> = (0..12).map(|k| k as f64).collect();
        let text = field_csv("dose", &grid, &values);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# field=dose");
        assert_eq!(lines[1], "# nx=3 ny=4 dx=5e-1 dy=2.5e-1 origin_x=1e0 origin_y=-2e0");
        assert_eq!(lines.len(), 5);
        // row i, column j holds cell i * ny + j
        assert_eq!(lines[3], "4e0,5e0,6e0,7e0");
        let v = vtk("dose", &grid, &values);
        let data: Vec<&str> = v.lines().skip(10).collect();
        assert_eq!(&data[..4], ["0e0", "4e0", "8e0", "1e0"]);
    }

    #[test]
    fn manifest_lists_files_with_checksums() {
        let tmp = tempfile::tempdir().unwrap();
        let mut dir = ArtifactDir::create(tmp.path()).unwrap();
        dir.write("b/x.csv", "abc").unwrap();
        dir.write("a.csv", "").unwrap();
        let path = dir.finish().unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(
            text,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855  a.csv\n\
             ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad  b/x.csv\n"
        );
    }
}
