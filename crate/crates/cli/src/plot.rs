//! Gnuplot-ready columns extracted from run outputs.

use std::fs;
use std::path::{Path, PathBuf};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Ids,
    Occupation,
    Fk,
    Scaled,
}

impl std::str::FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ids" => Ok(Self::Ids),
            "occupation" => Ok(Self::Occupation),
            "fk" => Ok(Self::Fk),
            "scaled" => Ok(Self::Scaled),
            _ => Err(HarnessError::Validation(format!("unknown plot kind {s:?}"))),
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_csv(path: &Path) -> Result<Table, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|e| HarnessError::Validation(format!("missing input {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().split(',').map(str::to_owned).collect();
    let rows = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').map(str::to_owned).collect()).collect();
    Ok(Table { header, rows })
}

fn columns(t: &Table, names: &[&str]) -> Result<Vec<Vec<String>>, HarnessError> {
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            t.header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| HarnessError::Validation(format!("column {n} not found")))
        })
        .collect::<Result<_, _>>()?;
    Ok(t.rows.iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect())
}

/// Writes `plot_<kind>.dat` into the run directory and returns its path.
pub fn emit_plot_data(run: &Path, kind: PlotKind) -> Result<PathBuf, HarnessError> {
    let (src, cols, title, name): (PathBuf, &[&str], &str, &str) = match kind {
        PlotKind::Ids => (run.join("ids.csv"), &["E", "nu_mean", "nu_oracle"], "integrated density of states: ensemble mean vs closed form", "ids"),
        PlotKind::Occupation => (
            run.join("condensate.csv"),
            &["l", "atom", "atom_kinetic"],
            "condensate atom vs l in the random and kinetic bases",
            "occupation",
        ),
        PlotKind::Fk => (run.join("fk.csv"), &["epsilon", "F", "F_se"], "limiting kinetic occupation density F(epsilon)", "fk"),
        PlotKind::Scaled => {
            let mut found: Vec<PathBuf> = fs::read_dir(run)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("scaled_l") && n.ends_with(".csv")))
                .collect();
            found.sort();
            let src = found.pop().ok_or_else(|| HarnessError::Validation("no scaled_l*.csv in run".into()))?;
            (src, &["epsilon", "F_closed_form", "fv_density"], "scaled potential: finite-volume density vs limit", "scaled")
        }
    };
    let table = read_csv(&src)?;
    let data = columns(&table, cols)?;
    let mut text = format!("# {title}\n# source: {}\n# columns: {}\n", src.file_name().unwrap().to_string_lossy(), cols.join(" "));
    for row in data {
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    let out = run.join(format!("plot_{name}.dat"));
    fs::write(&out, text)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse() {
        assert_eq!("fk".parse::<PlotKind>().unwrap(), PlotKind::Fk);
        assert!("thermo".parse::<PlotKind>().is_err());
    }

    #[test]
    fn missing_column_reported() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("fk.csv"), "epsilon,F\n0.1,0.2\n").unwrap();
        let err = emit_plot_data(dir.path(), PlotKind::Fk).unwrap_err();
        assert!(err.to_string().contains("F_se"));
    }
}
