//! Seeded sample generators: the noisy spiral family, uniform shapes,
//! Gaussian mixtures and the 9-vertex counter-example graph pair.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::analytic::UniformShape;
use crate::error::{Error, Result};
use crate::seeding::{domain, stream_rng};
use crate::space::FiniteMeasureSpace;

/// Default coordinate noise of the spiral family.
pub const SPIRAL_NOISE: f64 = 0.03;

/// Which of the two counter-example weight assignments to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphSide {
    Mu,
    Nu,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    /// `(R sin(vR) + noise * G, R cos(vR) + noise * G')` with `R` uniform on
    /// `(0,1)` and `G`, `G'` standard normal.
    Spiral { v: f64, noise: f64 },
    /// Uniform measure on a supported shape.
    Shape(UniformShape),
    /// One of the two 9-vertex weighted graphs (fixed size, `n` ignored).
    Graph(GraphSide),
    /// Isotropic Gaussian mixture: component `k` is centred at `centers[k]`
    /// with scale `sigmas[k]`, picked with probability `weights[k]`.
    GaussianMixture {
        centers: Vec<Vec<f64>>,
        sigmas: Vec<f64>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub seed: u64,
}

/// Noise-free point of the spiral curve at parameter `r`.
pub fn spiral_curve_point(v: f64, r: f64) -> [f64; 2] {
    [r * (v * r).sin(), r * (v * r).cos()]
}

const GEN_BLOCK: usize = 1024;

/// Draw a seeded sample.
///
/// Coordinate samples are produced in blocks of fixed size, one RNG stream
/// per block, so the output is identical under any worker count.
pub fn sample(spec: &GeneratorSpec) -> Result<FiniteMeasureSpace> {
    match &spec.kind {
        GeneratorKind::Graph(side) => {
            let (mu, nu) = graph_pair();
            Ok(match side {
                GraphSide::Mu => mu,
                GraphSide::Nu => nu,
            })
        }
        kind => {
            if spec.n == 0 {
                return Err(Error::TooFewPoints { needed: 1, got: 0 });
            }
            validate_kind(kind)?;
            let dim = kind_dim(kind);
            let blocks = spec.n.div_ceil(GEN_BLOCK);
            let chunks: Vec<Vec<f64>> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut rng = stream_rng(spec.seed, domain::GEN_BLOCK, b as u64);
                    let count = GEN_BLOCK.min(spec.n - b * GEN_BLOCK);
                    let mut out = Vec::with_capacity(count * dim);
                    for _ in 0..count {
                        emit_point(kind, &mut rng, &mut out);
                    }
                    out
                })
                .collect();
            let coords: Vec<f64> = chunks.into_iter().flatten().collect();
            FiniteMeasureSpace::from_flat_coords(coords, dim, vec![1.0 / spec.n as f64; spec.n])
        }
    }
}

fn validate_kind(kind: &GeneratorKind) -> Result<()> {
    match kind {
        GeneratorKind::Spiral { v, noise } => {
            if !v.is_finite() || !noise.is_finite() || *noise < 0.0 {
                return Err(Error::InvalidGenerator(format!(
                    "spiral v={v} noise={noise}"
                )));
            }
        }
        GeneratorKind::GaussianMixture {
            centers,
            sigmas,
            weights,
        } => {
            if centers.is_empty()
                || centers.len() != sigmas.len()
                || centers.len() != weights.len()
            {
                return Err(Error::InvalidGenerator(
                    "mixture needs matching centers/sigmas/weights".into(),
                ));
            }
            let dim = centers[0].len();
            if dim == 0 || centers.iter().any(|c| c.len() != dim) {
                return Err(Error::InvalidGenerator("ragged mixture centers".into()));
            }
            if sigmas.iter().any(|s| !(*s >= 0.0)) {
                return Err(Error::InvalidGenerator("negative mixture sigma".into()));
            }
            if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidGenerator("invalid mixture weights".into()));
            }
        }
        _ => {}
    }
    Ok(())
}

fn kind_dim(kind: &GeneratorKind) -> usize {
    match kind {
        GeneratorKind::Spiral { .. } => 2,
        GeneratorKind::Shape(shape) => shape.dim(),
        GeneratorKind::GaussianMixture { centers, .. } => centers[0].len(),
        GeneratorKind::Graph(_) => 0,
    }
}

fn emit_point<R: Rng>(kind: &GeneratorKind, rng: &mut R, out: &mut Vec<f64>) {
    match kind {
        GeneratorKind::Spiral { v, noise } => {
            let r: f64 = rng.random_range(0.0..1.0);
            let [x, y] = spiral_curve_point(*v, r);
            if *noise > 0.0 {
                let gx: f64 = StandardNormal.sample(rng);
                let gy: f64 = StandardNormal.sample(rng);
                out.push(x + noise * gx);
                out.push(y + noise * gy);
            } else {
                out.push(x);
                out.push(y);
            }
        }
        GeneratorKind::Shape(shape) => emit_shape_point(shape, rng, out),
        GeneratorKind::GaussianMixture {
            centers,
            sigmas,
            weights,
        } => {
            let total: f64 = weights.iter().sum();
            let mut pick: f64 = rng.random_range(0.0..total);
            let mut k = 0;
            while k + 1 < weights.len() && pick >= weights[k] {
                pick -= weights[k];
                k += 1;
            }
            for &c in &centers[k] {
                let g: f64 = StandardNormal.sample(rng);
                out.push(c + sigmas[k] * g);
            }
        }
        GeneratorKind::Graph(_) => unreachable!("graph spaces are fixed"),
    }
}

fn emit_shape_point<R: Rng>(shape: &UniformShape, rng: &mut R, out: &mut Vec<f64>) {
    match *shape {
        UniformShape::Cube { dim, side } => {
            for _ in 0..dim {
                out.push(rng.random_range(0.0..side));
            }
        }
        UniformShape::Ball { dim, radius } => {
            // Gaussian direction, radius from the volume CDF: exact for any d.
            let dir = unit_direction(dim, rng);
            let u: f64 = rng.random_range(0.0..1.0);
            let r = radius * u.powf(1.0 / dim as f64);
            out.extend(dir.into_iter().map(|x| x * r));
        }
        UniformShape::Annulus { dim, inner, outer } => {
            let dir = unit_direction(dim, rng);
            let u: f64 = rng.random_range(0.0..1.0);
            let d = dim as f64;
            let r = (inner.powf(d) + u * (outer.powf(d) - inner.powf(d))).powf(1.0 / d);
            out.extend(dir.into_iter().map(|x| x * r));
        }
    }
}

fn unit_direction<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// The two 9-vertex weighted graphs sharing one metric: three clusters of
/// three vertices, distance 1 inside a cluster and 2 across. Every cluster
/// carries total mass exactly 1/3 under both assignments, so the two
/// DTM-signatures coincide for every mass parameter even though the spaces
/// are not isomorphic.
pub fn graph_pair() -> (FiniteMeasureSpace, FiniteMeasureSpace) {
    let n = 9;
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = if i == j {
                0.0
            } else if i / 3 == j / 3 {
                1.0
            } else {
                2.0
            };
        }
    }
    let mu = vec![
        23.0 / 140.0,
        1.0 / 105.0,
        67.0 / 420.0,
        3.0 / 28.0,
        1.0 / 28.0,
        4.0 / 21.0,
        2.0 / 15.0,
        1.0 / 15.0,
        2.0 / 15.0,
    ];
    let nu = vec![
        3.0 / 28.0,
        1.0 / 15.0,
        67.0 / 420.0,
        2.0 / 15.0,
        4.0 / 21.0,
        1.0 / 105.0,
        23.0 / 140.0,
        2.0 / 15.0,
        1.0 / 28.0,
    ];
    let a = FiniteMeasureSpace::from_distance_matrix_weighted(rows.clone(), mu)
        .expect("graph mu is valid");
    let b =
        FiniteMeasureSpace::from_distance_matrix_weighted(rows, nu).expect("graph nu is valid");
    (a, b)
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    /// Parse a compact generator description:
    /// `spiral:v=10,noise=0.03`, `ball:d=2,r=1`, `cube:d=2,side=1`,
    /// `annulus:d=2,inner=1,outer=2`, `graph:mu`, `graph:nu`,
    /// `mixture:d=2,centers=0 0;3 0,sigma=0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = std::collections::BTreeMap::new();
        for item in rest.split(',').filter(|p| !p.is_empty()) {
            match item.split_once('=') {
                Some((k, v)) => {
                    params.insert(k.trim().to_string(), v.trim().to_string());
                }
                None => {
                    params.insert(item.trim().to_string(), String::new());
                }
            }
        }
        let get_f64 = |params: &std::collections::BTreeMap<String, String>,
                       key: &str,
                       default: Option<f64>|
         -> Result<f64> {
            match params.get(key) {
                Some(v) => v
                    .parse()
                    .map_err(|_| Error::InvalidGenerator(format!("bad {key}={v}"))),
                None => default.ok_or_else(|| {
                    Error::InvalidGenerator(format!("missing parameter '{key}' for {name}"))
                }),
            }
        };
        match name {
            "spiral" => Ok(GeneratorKind::Spiral {
                v: get_f64(&params, "v", None)?,
                noise: get_f64(&params, "noise", Some(SPIRAL_NOISE))?,
            }),
            "ball" => Ok(GeneratorKind::Shape(UniformShape::ball(
                get_f64(&params, "d", Some(2.0))? as usize,
                get_f64(&params, "r", Some(1.0))?,
            )?)),
            "cube" => Ok(GeneratorKind::Shape(UniformShape::cube(
                get_f64(&params, "d", Some(2.0))? as usize,
                get_f64(&params, "side", Some(1.0))?,
            )?)),
            "annulus" => Ok(GeneratorKind::Shape(UniformShape::annulus(
                get_f64(&params, "d", Some(2.0))? as usize,
                get_f64(&params, "inner", None)?,
                get_f64(&params, "outer", None)?,
            )?)),
            "graph" => {
                if params.contains_key("mu") {
                    Ok(GeneratorKind::Graph(GraphSide::Mu))
                } else if params.contains_key("nu") {
                    Ok(GeneratorKind::Graph(GraphSide::Nu))
                } else {
                    Err(Error::InvalidGenerator(
                        "graph needs ':mu' or ':nu'".into(),
                    ))
                }
            }
            "mixture" => {
                let centers_raw = params.get("centers").ok_or_else(|| {
                    Error::InvalidGenerator("mixture needs centers=x y;x y".into())
                })?;
                let mut centers = Vec::new();
                for c in centers_raw.split(';') {
                    let coords: std::result::Result<Vec<f64>, _> = c
                        .split_whitespace()
                        .map(str::parse)
                        .collect();
                    centers.push(coords.map_err(|_| {
                        Error::InvalidGenerator(format!("bad mixture center '{c}'"))
                    })?);
                }
                let sigma = get_f64(&params, "sigma", Some(1.0))?;
                let k = centers.len();
                Ok(GeneratorKind::GaussianMixture {
                    sigmas: vec![sigma; k],
                    weights: vec![1.0 / k as f64; k],
                    centers,
                })
            }
            other => Err(Error::InvalidGenerator(format!("unknown kind '{other}'"))),
        }
    }
}
