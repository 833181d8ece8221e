use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::surface::{IndexConfig, IndexSurface};

const COLUMNS: &str = "stage,p,gamma";
const DIFF_COLUMNS: &str = "stage,p,gamma_minus_p";

/// Grid points read back from a file may differ from the generated grid by
/// decimal round-off only.
const GRID_MATCH_TOL: f64 = 1e-12;

fn config_line(config: &IndexConfig) -> String {
    format!(
        "# k={} beta={} T={} n0={} Np={} Ngamma={}",
        config.k(),
        config.beta(),
        config.horizon(),
        config.n0(),
        config.p_points(),
        config.gamma_points()
    )
}

fn render(surface: &IndexSurface, columns: &str, value: impl Fn(f64, f64) -> f64) -> String {
    let config = surface.config();
    let grid = config.p_grid();
    let mut out = String::new();
    out.push_str(&config_line(config));
    out.push('\n');
    out.push_str(columns);
    out.push('\n');
    for (t, row) in surface.stages().enumerate() {
        for (&p, &gamma) in grid.iter().zip(row) {
            // 17 significant digits round-trip every double.
            writeln!(out, "{t},{p:.16e},{:.16e}", value(p, gamma)).expect("writing to a String");
        }
    }
    out
}

/// Serializes the surface as `stage,p,gamma` rows under a config header.
pub fn surface_to_csv(surface: &IndexSurface) -> String {
    render(surface, COLUMNS, |_, gamma| gamma)
}

/// Same layout with `gamma - p` in the last column, for plotting the
/// difference between the index and the estimated probability.
pub fn surface_diff_to_csv(surface: &IndexSurface) -> String {
    render(surface, DIFF_COLUMNS, |p, gamma| gamma - p)
}

fn parse_config(line: &str) -> Result<IndexConfig> {
    let body = line.trim_start_matches('#');
    let mut fields = std::collections::HashMap::new();
    for pair in body.split_whitespace() {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("malformed header field `{pair}`")))?;
        fields.insert(key, value);
    }
    fn get<T: std::str::FromStr>(
        fields: &std::collections::HashMap<&str, &str>,
        key: &str,
    ) -> Result<T> {
        let raw = fields
            .get(key)
            .ok_or_else(|| Error::Parse(format!("surface header lacks `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::Parse(format!("bad value `{raw}` for `{key}`")))
    }
    IndexConfig::with_grids(
        get(&fields, "k")?,
        get(&fields, "beta")?,
        get(&fields, "T")?,
        get(&fields, "n0")?,
        get(&fields, "Np")?,
        get(&fields, "Ngamma")?,
    )
}

/// Parses the format written by [`surface_to_csv`]. Every `(stage, p)` cell
/// must appear exactly once.
pub fn surface_from_csv(text: &str) -> Result<IndexSurface> {
    let mut lines = text.lines().enumerate();
    let config = loop {
        match lines.next() {
            Some((_, line)) if line.trim().is_empty() => continue,
            Some((_, line)) if line.starts_with('#') => break parse_config(line)?,
            _ => {
                return Err(Error::Parse(
                    "surface file must start with a config header".into(),
                ))
            }
        }
    };
    let grid = config.p_grid();
    let width = config.p_points();
    let mut cells = vec![None; config.horizon() * width];

    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == COLUMNS {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("line {}: {what}: `{line}`", lineno + 1));
        let mut parts = line.split(',');
        let (Some(stage), Some(p), Some(gamma), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad("expected three columns"));
        };
        let stage: usize = stage.trim().parse().map_err(|_| bad("bad stage"))?;
        let p: f64 = p.trim().parse().map_err(|_| bad("bad p"))?;
        let gamma: f64 = gamma.trim().parse().map_err(|_| bad("bad gamma"))?;
        if stage >= config.horizon() {
            return Err(bad("stage out of range"));
        }
        let i = (p * (width - 1) as f64).round();
        if !(0.0..width as f64).contains(&i) || (grid[i as usize] - p).abs() > GRID_MATCH_TOL {
            return Err(bad("p is not a grid point"));
        }
        let slot = &mut cells[stage * width + i as usize];
        if slot.replace(gamma).is_some() {
            return Err(bad("duplicate cell"));
        }
    }

    let mut values = Vec::with_capacity(config.horizon());
    for (t, row) in cells.chunks(width).enumerate() {
        let row: Option<Vec<f64>> = row.iter().copied().collect();
        values.push(row.ok_or_else(|| Error::Parse(format!("stage {t} is incomplete")))?);
    }
    IndexSurface::from_parts(config, values)
}

pub fn write_surface(surface: &IndexSurface, path: &Path) -> Result<()> {
    fs::write(path, surface_to_csv(surface)).map_err(|e| Error::io(path, e))
}

pub fn read_surface(path: &Path) -> Result<IndexSurface> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    surface_from_csv(&text)
}
