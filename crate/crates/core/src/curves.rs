//! Discretized curves, datasets and the Brownian simulation design.
//!
//! Every curve lives on a uniform grid `t_j = (j-1)/(p-1)` of `[0, 1]` and all
//! L² quantities use the trapezoid rule on that grid.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID_HEADER: &str = "# grid:";

/// Reproducible generator for replication `stream` of a study seeded with `seed`.
///
/// Streams are independent ChaCha streams, so replications can be evaluated in
/// any order (or in parallel) and still produce identical draws.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `p` equidistant points on `[0, 1]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    p: usize,
}

impl Grid {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidArgument(format!(
                "a grid needs at least 2 points, got {p}"
            )));
        }
        Ok(Grid { p })
    }

    pub fn len(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.p - 1) as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        if j + 1 == self.p {
            1.0
        } else {
            j as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.p).map(|j| self.point(j)).collect()
    }

    /// Trapezoid quadrature weights; `Σ w_j f(t_j)` approximates `∫₀¹ f`.
    pub fn weights(&self) -> Vec<f64> {
        let step = self.step();
        let mut w = vec![step; self.p];
        w[0] = 0.5 * step;
        w[self.p - 1] = 0.5 * step;
        w
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.p);
        let inner: f64 = values[1..self.p - 1].iter().sum();
        self.step() * (inner + 0.5 * (values[0] + values[self.p - 1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "curve has {} values but the grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "curve value at index {j} is not finite"
            )));
        }
        Ok(Curve { grid, values })
    }

    /// Samples `f` on the grid.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Curve::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn check_grid(&self, other: &Curve) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Dimension(format!(
                "curves live on grids of {} and {} points",
                self.grid.len(),
                other.grid.len()
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Curve {
            grid: self.grid,
            values,
        })
    }

    pub fn scale(&self, c: f64) -> Curve {
        Curve {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// Trapezoid approximation of `∫₀¹ f(t) g(t) dt`.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    f.check_grid(g)?;
    Ok(weighted_dot(&f.grid.weights(), &f.values, &g.values))
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// The regression operator of the simulation design, `r(χ) = ∫₀¹ χ(s)² ds`.
pub fn target_operator(chi: &Curve) -> f64 {
    let squares: Vec<f64> = chi.values.iter().map(|v| v * v).collect();
    chi.grid.integrate(&squares)
}

/// Curves together with optional scalar responses. Order is significant: the
/// position of an observation is its arrival index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    grid: Grid,
    curves: Vec<Curve>,
    responses: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(curves: Vec<Curve>, responses: Option<Vec<f64>>) -> Result<Self> {
        let grid = curves.first().map(Curve::grid).ok_or(Error::EmptyDataset)?;
        if let Some(i) = curves.iter().position(|c| c.grid != grid) {
            return Err(Error::Dimension(format!(
                "curve {i} has {} points, expected {}",
                curves[i].grid.len(),
                grid.len()
            )));
        }
        if let Some(y) = &responses {
            if y.len() != curves.len() {
                return Err(Error::Dimension(format!(
                    "{} curves but {} responses",
                    curves.len(),
                    y.len()
                )));
            }
            if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "response {i} is not finite"
                )));
            }
        }
        Ok(Dataset {
            grid,
            curves,
            responses,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn responses(&self) -> Option<&[f64]> {
        self.responses.as_deref()
    }

    pub fn require_responses(&self, what: &'static str) -> Result<&[f64]> {
        self.responses().ok_or(Error::MissingResponses(what))
    }

    /// First `n` observations, in order.
    pub fn prefix(&self, n: usize) -> Result<Dataset> {
        let n = n.min(self.len());
        Dataset::new(
            self.curves[..n].to_vec(),
            self.responses.as_ref().map(|y| y[..n].to_vec()),
        )
    }
}

pub fn brownian_curve<R: Rng + ?Sized>(grid: Grid, rng: &mut R) -> Curve {
    let sd = grid.step().sqrt();
    let mut values = Vec::with_capacity(grid.len());
    let mut level = 0.0;
    values.push(level);
    for _ in 1..grid.len() {
        let z: f64 = rng.sample(StandardNormal);
        level += sd * z;
        values.push(level);
    }
    Curve { grid, values }
}

/// `n` standard Brownian paths on a `p`-point grid, built from cumulative
/// Gaussian increments.
pub fn simulate_brownian(n: usize, p: usize, seed: u64) -> Result<Vec<Curve>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let grid = Grid::new(p)?;
    let mut rng = stream_rng(seed, 0);
    Ok((0..n).map(|_| brownian_curve(grid, &mut rng)).collect())
}

/// One `(X, Y)` pair with `Y = r(X) + ε`, `ε ~ N(0, noise_sd²)`.
///
/// The noise draw is consumed even when `noise_sd == 0` so that designs with
/// different noise levels share their curves.
pub fn brownian_observation<R: Rng + ?Sized>(grid: Grid, noise_sd: f64, rng: &mut R) -> (Curve, f64) {
    let x = brownian_curve(grid, rng);
    let z: f64 = rng.sample(StandardNormal);
    let y = target_operator(&x) + noise_sd * z;
    (x, y)
}

pub fn simulate_regression_sample(n: usize, p: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise standard deviation must be finite and nonnegative, got {noise_sd}"
        )));
    }
    let grid = Grid::new(p)?;
    let mut rng = stream_rng(seed, 0);
    let (curves, responses) = (0..n)
        .map(|_| brownian_observation(grid, noise_sd, &mut rng))
        .unzip();
    Dataset::new(curves, Some(responses))
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    let trimmed = cell.trim();
    trimmed
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            row,
            column,
            cell: trimmed.to_string(),
        })
}

/// Reads a curve file: one curve per row, optional `# grid: t1,...,tp` first line.
pub fn read_curves(path: impl AsRef<Path>) -> Result<(Grid, Vec<Curve>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let header = first.trim_start().strip_prefix(GRID_HEADER).map(|rest| {
        rest.split(',')
            .enumerate()
            .map(|(j, cell)| parse_cell(cell, 1, j + 1))
            .collect::<Result<Vec<f64>>>()
    });
    let (declared, offset, body): (Option<Vec<f64>>, usize, Box<dyn Read>) = match header {
        Some(points) => (Some(points?), 1, Box::new(reader)),
        None => (
            None,
            0,
            Box::new(std::io::Cursor::new(first.into_bytes()).chain(reader)),
        ),
    };

    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(body);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in csv.records().enumerate() {
        let record = record?;
        let row = r + 1 + offset;
        let values = record
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, row, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(expected) = rows.first().map(Vec::len) {
            if values.len() != expected {
                return Err(Error::Format(format!(
                    "ragged rows: row {row} has {} cells, expected {expected}",
                    values.len()
                )));
            }
        }
        rows.push(values);
    }

    let p = rows
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Format(format!("{} contains no curves", path.display())))?;
    if p < 2 {
        return Err(Error::Format(format!("curves need at least 2 columns, found {p}")));
    }
    let grid = Grid::new(p)?;
    if let Some(points) = declared {
        if points.len() != p {
            return Err(Error::Format(format!(
                "grid header lists {} points but rows have {p} cells",
                points.len()
            )));
        }
        let uniform = grid.points();
        if points.iter().zip(&uniform).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(Error::Format(
                "grid header is not the uniform grid of [0, 1]".into(),
            ));
        }
    }
    let curves = rows
        .into_iter()
        .map(|values| Curve::new(grid, values))
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, curves))
}

pub fn read_responses(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for (r, record) in csv.records().enumerate() {
        let record = record?;
        if record.len() != 1 {
            return Err(Error::Format(format!(
                "response row {} has {} cells, expected 1",
                r + 1,
                record.len()
            )));
        }
        out.push(parse_cell(&record[0], r + 1, 1)?);
    }
    Ok(out)
}

pub fn load_dataset(curves_path: impl AsRef<Path>, responses_path: Option<&Path>) -> Result<Dataset> {
    let (_, curves) = read_curves(curves_path)?;
    let responses = responses_path.map(read_responses).transpose()?;
    Dataset::new(curves, responses)
}

pub fn write_curves(path: impl AsRef<Path>, curves: &[Curve]) -> Result<()> {
    let path = path.as_ref();
    let grid = curves.first().map(Curve::grid).ok_or(Error::EmptyDataset)?;
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    let header: Vec<String> = grid.points().iter().map(|t| t.to_string()).collect();
    writeln!(file, "{GRID_HEADER} {}", header.join(",")).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    for curve in curves {
        csv.write_record(curve.values.iter().map(|v| v.to_string()))?;
    }
    csv.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_responses(path: impl AsRef<Path>, responses: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for y in responses {
        writeln!(file, "{y}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
