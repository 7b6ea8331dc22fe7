//! Finite metric-measure spaces: point clouds with Euclidean metric or
//! explicit distance matrices, both carrying a probability weight vector.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Tolerance for the weight-vector normalization invariant.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Distance matrices with asymmetry below this are symmetrized by averaging.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Diagonal entries of a distance matrix must vanish within this tolerance.
pub const DIAGONAL_TOL: f64 = 1e-12;

/// Geometric payload of a [`FiniteMeasureSpace`].
#[derive(Debug, Clone)]
pub enum Geometry {
    /// `n` points in `R^dim`, row-major flat storage, Euclidean metric.
    Points { coords: Vec<f64>, dim: usize },
    /// Symmetric `n x n` matrix of pairwise distances, row-major.
    Matrix { dist: Vec<f64>, n: usize },
}

/// A finite mm-space: geometry plus a probability vector over its points.
///
/// Immutable after construction; cheap to share across worker threads.
#[derive(Debug, Clone)]
pub struct FiniteMeasureSpace {
    geometry: Geometry,
    weights: Vec<f64>,
    labels: Option<Vec<String>>,
}

fn normalize_weights(mut weights: Vec<f64>) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights("empty weight vector".into()));
    }
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidWeights(format!(
                "weight {w} at index {i} is negative or non-finite"
            )));
        }
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        for w in &mut weights {
            *w /= sum;
        }
    }
    Ok(weights)
}

impl FiniteMeasureSpace {
    /// Point-cloud space with uniform weights.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::from_points_weighted(points, vec![1.0 / n.max(1) as f64; n])
    }

    /// Point-cloud space with explicit (not necessarily normalized) weights.
    pub fn from_points_weighted(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Parse {
                    path: "<memory>".into(),
                    line: i + 1,
                    msg: format!("expected {dim} coordinates, got {}", p.len()),
                });
            }
            coords.extend_from_slice(p);
        }
        if weights.len() != points.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} points",
                weights.len(),
                points.len()
            )));
        }
        Ok(Self {
            geometry: Geometry::Points { coords, dim },
            weights: normalize_weights(weights)?,
            labels: None,
        })
    }

    /// Flat row-major variant of [`Self::from_points_weighted`].
    pub fn from_flat_coords(coords: Vec<f64>, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim.max(1),
                got: coords.len(),
            });
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        if weights.len() != n {
            return Err(Error::InvalidWeights(format!("{} weights for {n} points", weights.len())));
        }
        Ok(Self {
            geometry: Geometry::Points { coords, dim },
            weights: normalize_weights(weights)?,
            labels: None,
        })
    }

    /// Distance-matrix space with uniform weights.
    ///
    /// The matrix must be square with zero diagonal and nonnegative entries.
    /// Asymmetry below [`SYMMETRY_TOL`] is repaired by averaging `(M + M^T)/2`;
    /// anything larger is rejected.
    pub fn from_distance_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        Self::from_distance_matrix_weighted(rows, vec![1.0 / n.max(1) as f64; n])
    }

    /// Distance-matrix space with explicit weights (Example-10 style graphs).
    pub fn from_distance_matrix_weighted(rows: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                    row: i,
                });
            }
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = rows[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NegativeDistance { i, j, value: v });
                }
                dist[i * n + j] = v;
            }
            let d = dist[i * n + i];
            if d.abs() > DIAGONAL_TOL {
                return Err(Error::NonzeroDiagonal { i, value: d });
            }
            dist[i * n + i] = 0.0;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let dev = (dist[i * n + j] - dist[j * n + i]).abs();
                if dev >= SYMMETRY_TOL {
                    return Err(Error::Asymmetric {
                        i,
                        j,
                        max_dev: dev,
                        tol: SYMMETRY_TOL,
                    });
                }
                let avg = 0.5 * (dist[i * n + j] + dist[j * n + i]);
                dist[i * n + j] = avg;
                dist[j * n + i] = avg;
            }
        }
        if weights.len() != n {
            return Err(Error::InvalidWeights(format!("{} weights for {n} points", weights.len())));
        }
        Ok(Self {
            geometry: Geometry::Matrix { dist, n },
            weights: normalize_weights(weights)?,
            labels: None,
        })
    }

    /// Attach point labels (for reporting only).
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidWeights(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn is_coordinate_form(&self) -> bool {
        matches!(self.geometry, Geometry::Points { .. })
    }

    /// Ambient dimension for coordinate-form spaces.
    pub fn dim(&self) -> Option<usize> {
        match &self.geometry {
            Geometry::Points { dim, .. } => Some(*dim),
            Geometry::Matrix { .. } => None,
        }
    }

    /// Coordinates of point `i` (coordinate form only).
    pub fn point(&self, i: usize) -> Option<&[f64]> {
        match &self.geometry {
            Geometry::Points { coords, dim } => coords.get(i * dim..(i + 1) * dim),
            Geometry::Matrix { .. } => None,
        }
    }

    /// Flat coordinate buffer (coordinate form only).
    pub fn flat_coords(&self) -> Option<(&[f64], usize)> {
        match &self.geometry {
            Geometry::Points { coords, dim } => Some((coords.as_slice(), *dim)),
            Geometry::Matrix { .. } => None,
        }
    }

    /// Distance between support points `i` and `j`.
    ///
    /// Euclidean for coordinate form, matrix lookup otherwise. Exactly
    /// symmetric in `(i, j)` by construction.
    pub fn pairwise_distance(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.len();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        Ok(match &self.geometry {
            Geometry::Points { coords, dim } => {
                // Sort the operands so (i,j) and (j,i) run the identical
                // float expression.
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                euclidean(
                    &coords[a * dim..(a + 1) * dim],
                    &coords[b * dim..(b + 1) * dim],
                )
            }
            Geometry::Matrix { dist, n } => dist[i * n + j],
        })
    }

    /// Distance from an arbitrary coordinate query to support point `j`.
    pub fn distance_to_point(&self, query: &[f64], j: usize) -> Result<f64> {
        match &self.geometry {
            Geometry::Points { coords, dim } => {
                if query.len() != *dim {
                    return Err(Error::DimensionMismatch {
                        expected: *dim,
                        got: query.len(),
                    });
                }
                if j >= self.len() {
                    return Err(Error::IndexOutOfRange {
                        index: j,
                        len: self.len(),
                    });
                }
                Ok(euclidean(query, &coords[j * dim..(j + 1) * dim]))
            }
            Geometry::Matrix { .. } => Err(Error::CoordinateQueryOnMatrix),
        }
    }

    /// Copy of this space with all distances multiplied by `lambda`.
    pub fn scale(&self, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParams(format!("scale factor {lambda} must be positive")));
        }
        let geometry = match &self.geometry {
            Geometry::Points { coords, dim } => Geometry::Points {
                coords: coords.iter().map(|c| c * lambda).collect(),
                dim: *dim,
            },
            Geometry::Matrix { dist, n } => Geometry::Matrix {
                dist: dist.iter().map(|d| d * lambda).collect(),
                n: *n,
            },
        };
        Ok(Self {
            geometry,
            weights: self.weights.clone(),
            labels: self.labels.clone(),
        })
    }

    /// Full O(N^3) triangle-inequality check for matrix-form spaces.
    ///
    /// Coordinate-form spaces satisfy it by construction and return `Ok`.
    pub fn validate_metric(&self) -> Result<()> {
        let Geometry::Matrix { dist, n } = &self.geometry else {
            return Ok(());
        };
        let n = *n;
        for i in 0..n {
            for j in 0..n {
                let dij = dist[i * n + j];
                for k in 0..n {
                    let dik = dist[i * n + k];
                    let djk = dist[j * n + k];
                    if dik > dij + djk + 1e-12 {
                        return Err(Error::MetricViolation {
                            i,
                            j,
                            k,
                            dik,
                            sum: dij + djk,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Write a coordinate-form space as CSV (`x0,...,x{d-1}[,weight]`).
    ///
    /// The weight column is emitted only when weights are non-uniform, so
    /// plain uniform clouds stay plain. Floats use the shortest round-trip
    /// representation, making save/load lossless.
    pub fn save_points_csv(&self, path: &Path) -> Result<()> {
        let (coords, dim) = self
            .flat_coords()
            .ok_or(Error::CoordinateQueryOnMatrix)?;
        let n = self.len();
        let uniform = self.has_uniform_weights();
        let mut out = String::new();
        for j in 0..dim {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "x{j}");
        }
        if !uniform {
            out.push_str(",weight");
        }
        out.push('\n');
        for i in 0..n {
            for j in 0..dim {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", coords[i * dim + j]);
            }
            if !uniform {
                let _ = write!(out, ",{}", self.weights[i]);
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Write a matrix-form space as a headerless N x N CSV.
    pub fn save_matrix_csv(&self, path: &Path) -> Result<()> {
        let Geometry::Matrix { dist, n } = &self.geometry else {
            return Err(Error::ShapeUnsupported(
                "save_matrix_csv requires a distance-matrix space".into(),
            ));
        };
        let mut out = String::new();
        for i in 0..*n {
            for j in 0..*n {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", dist[i * n + j]);
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn has_uniform_weights(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|&w| (w - u).abs() <= WEIGHT_SUM_TOL)
    }
}

#[inline]
fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A subset of support indices realizing the `n` / `N - n` sample split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsampleIndex {
    indices: Vec<usize>,
    parent_len: usize,
}

impl SubsampleIndex {
    pub fn new(indices: Vec<usize>, parent_len: usize) -> Result<Self> {
        if indices.len() > parent_len {
            return Err(Error::InvalidSubsample(format!(
                "{} indices from a space of size {parent_len}",
                indices.len()
            )));
        }
        let mut seen = vec![false; parent_len];
        for &i in &indices {
            if i >= parent_len {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: parent_len,
                });
            }
            if seen[i] {
                return Err(Error::InvalidSubsample(format!("duplicate index {i}")));
            }
            seen[i] = true;
        }
        Ok(Self { indices, parent_len })
    }

    /// The degenerate split using every point.
    pub fn full(parent_len: usize) -> Self {
        Self {
            indices: (0..parent_len).collect(),
            parent_len,
        }
    }

    /// Draw `n` distinct indices uniformly without replacement.
    pub fn sample<R: rand::Rng>(n: usize, parent_len: usize, rng: &mut R) -> Result<Self> {
        if n > parent_len {
            return Err(Error::InvalidSubsample(format!(
                "subsample size {n} exceeds space size {parent_len}"
            )));
        }
        let mut indices = rand::seq::index::sample(rng, parent_len, n).into_vec();
        indices.sort_unstable();
        Ok(Self { indices, parent_len })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn parent_len(&self) -> usize {
        self.parent_len
    }

    /// Image of this subsample under a relabeling of the parent space.
    ///
    /// `perm[old] = new`; used by isometry-invariance checks.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.parent_len {
            return Err(Error::InvalidSubsample(format!(
                "permutation of length {} for parent of size {}",
                perm.len(),
                self.parent_len
            )));
        }
        let mut indices: Vec<usize> = self.indices.iter().map(|&i| perm[i]).collect();
        indices.sort_unstable();
        Self::new(indices, self.parent_len)
    }
}

/// Load a point cloud CSV: one row per point, comma-separated coordinates,
/// optional header. A header column named `weight` flags per-point weights,
/// which are normalized by their sum.
pub fn load_point_cloud(path: &Path) -> Result<FiniteMeasureSpace> {
    let text = std::fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    parse_point_cloud(&text, &pstr)
}

fn parse_point_cloud(text: &str, path: &str) -> Result<FiniteMeasureSpace> {
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        rows.push((lineno + 1, line.split(',').map(str::trim).collect()));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 0,
            msg: "empty file".into(),
        });
    }
    // A first row with any non-numeric field is a header.
    let has_header = rows[0].1.iter().any(|f| f.parse::<f64>().is_err());
    let mut weight_col = None;
    if has_header {
        for (j, name) in rows[0].1.iter().enumerate() {
            if *name == "weight" {
                weight_col = Some(j);
            }
        }
    }
    let ncols = rows[0].1.len();
    let data = if has_header { &rows[1..] } else { &rows[..] };
    if data.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: rows[0].0,
            msg: "header without data rows".into(),
        });
    }
    let dim = ncols - usize::from(weight_col.is_some());
    if dim == 0 {
        return Err(Error::Parse {
            path: path.into(),
            line: rows[0].0,
            msg: "no coordinate columns".into(),
        });
    }
    let mut points = Vec::with_capacity(data.len());
    let mut weights = Vec::with_capacity(data.len());
    for (lineno, fields) in data {
        if fields.len() != ncols {
            return Err(Error::Parse {
                path: path.into(),
                line: *lineno,
                msg: format!("expected {ncols} fields, got {}", fields.len()),
            });
        }
        let mut point = Vec::with_capacity(dim);
        for (j, field) in fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: *lineno,
                msg: format!("non-numeric field '{field}'"),
            })?;
            if Some(j) == weight_col {
                weights.push(v);
            } else {
                point.push(v);
            }
        }
        points.push(point);
    }
    if weight_col.is_some() {
        FiniteMeasureSpace::from_points_weighted(points, weights)
    } else {
        FiniteMeasureSpace::from_points(points)
    }
}

/// Load a headerless N x N distance-matrix CSV with uniform weights.
pub fn load_distance_matrix(path: &Path) -> Result<FiniteMeasureSpace> {
    let text = std::fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    parse_distance_matrix(&text, &pstr)
}

fn parse_distance_matrix(text: &str, path: &str) -> Result<FiniteMeasureSpace> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: lineno + 1,
                msg: format!("non-numeric field '{field}'"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    FiniteMeasureSpace::from_distance_matrix(rows)
}

/// Load a one-column CSV of weights (sidecar for weighted distance matrices).
pub fn load_weight_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    let mut weights = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line == "weight") {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            path: pstr.clone(),
            line: lineno + 1,
            msg: format!("non-numeric weight '{line}'"),
        })?;
        weights.push(v);
    }
    Ok(weights)
}
