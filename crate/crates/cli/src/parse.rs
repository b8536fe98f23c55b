//! Parsers for the textual flag values and the grid file.

use ewens_pitman::mdp::ScaleSchedule;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty list")]
    Empty,
    #[error("invalid number `{0}`")]
    Number(String),
    #[error("`{0}` is not a nonnegative integer")]
    Integer(String),
    #[error("schedule needs exactly three values c,p,q, got {0}")]
    ScheduleArity(usize),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("grid must be strictly increasing")]
    NotIncreasing,
    #[error("invalid grid file: {0}")]
    GridFile(String),
}

fn parse_number(token: &str) -> Result<f64, ParseError> {
    let t = token.trim();
    let v: f64 = t.parse().map_err(|_| ParseError::Number(t.to_string()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ParseError::Number(t.to_string()))
    }
}

/// A nonnegative integer, also accepted in exponent notation (`1e6`).
pub fn parse_count(token: &str) -> Result<u64, ParseError> {
    let t = token.trim();
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    let v = parse_number(t).map_err(|_| ParseError::Integer(t.to_string()))?;
    // 2^64 is the first float past u64::MAX
    if v >= 0.0 && v.fract() == 0.0 && v < 18_446_744_073_709_551_616.0 {
        Ok(v as u64)
    } else {
        Err(ParseError::Integer(t.to_string()))
    }
}

/// Comma-separated finite floats.
pub fn parse_f64_list(text: &str) -> Result<Vec<f64>, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    text.split(',').map(parse_number).collect()
}

/// Comma-separated positive, strictly increasing sample sizes.
pub fn parse_n_grid(text: &str) -> Result<Vec<u64>, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let grid = text.split(',').map(parse_count).collect::<Result<Vec<_>, _>>()?;
    check_grid(&grid)?;
    Ok(grid)
}

fn check_grid(grid: &[u64]) -> Result<(), ParseError> {
    if grid.is_empty() {
        return Err(ParseError::Empty);
    }
    if grid[0] == 0 {
        return Err(ParseError::Integer("0".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ParseError::NotIncreasing);
    }
    Ok(())
}

/// `c,p,q` for `β_n = c n^p (ln n)^q`.
pub fn parse_schedule(text: &str) -> Result<ScaleSchedule, ParseError> {
    let parts = parse_f64_list(text)?;
    if parts.len() != 3 {
        return Err(ParseError::ScheduleArity(parts.len()));
    }
    ScaleSchedule::new(parts[0], parts[1], parts[2]).map_err(|e| ParseError::Schedule(e.to_string()))
}

/// Grids for large scans, read from JSON:
/// `{"n_grid": [1000, 10000], "lambda": [0.5, 1, 2]}`. Either key may be
/// omitted.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub n_grid: Option<Vec<u64>>,
    pub lambda: Option<Vec<f64>>,
}

pub fn parse_grid_file(text: &str) -> Result<GridFile, ParseError> {
    let grid: GridFile = serde_json::from_str(text).map_err(|e| ParseError::GridFile(e.to_string()))?;
    if let Some(n) = &grid.n_grid {
        check_grid(n)?;
    }
    if let Some(l) = &grid.lambda {
        if l.is_empty() {
            return Err(ParseError::Empty);
        }
    }
    Ok(grid)
}
