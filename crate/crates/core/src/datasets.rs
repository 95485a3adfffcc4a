//! Labeled training sets: the four-point XOR set, a seeded 1-D two-class
//! Gaussian mixture, and CSV persistence.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ℓ` points of a common dimension with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::contract("dataset must contain at least one point"));
        }
        Error::check_dim(points.len(), labels.len())?;
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::contract("points must have dimension >= 1"));
        }
        for p in &points {
            Error::check_dim(dim, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::contract("point coordinates must be finite"));
            }
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::contract(format!("label must be 0 or 1, got {bad}")));
        }
        Ok(Dataset { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Labels as reals, the `Y` vector of the QP.
    pub fn label_vector(&self) -> Vec<f64> {
        self.labels.iter().map(|&y| f64::from(y)).collect()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Empirical frequency of class 1.
    pub fn p1(&self) -> f64 {
        self.positives() as f64 / self.len() as f64
    }
}

/// X = (0,0),(1,1),(0,1),(1,0) with labels (0,0,1,1).
pub fn xor_dataset() -> Dataset {
    Dataset {
        points: vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ],
        labels: vec![0, 0, 1, 1],
    }
}

/// Two 1-D Gaussian classes: `n1` draws from N(mu1, sigma1²) labeled 0, then
/// `n2` draws from N(mu2, sigma2²) labeled 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub n1: usize,
    pub n2: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub seed: u64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        MixtureConfig {
            n1: 100,
            n2: 100,
            mu1: 1.0,
            mu2: 10.0,
            sigma1: 2.0,
            sigma2: 3.0,
            seed: 42,
        }
    }
}

impl MixtureConfig {
    pub fn with_seed(seed: u64) -> Self {
        MixtureConfig {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::contract("mixture class sizes must be >= 1"));
        }
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0) {
            return Err(Error::contract("mixture standard deviations must be > 0"));
        }
        if !(self.mu1.is_finite() && self.mu2.is_finite()) {
            return Err(Error::contract("mixture means must be finite"));
        }
        Ok(())
    }
}

/// Standard normal deviates by the Box–Muller transform over a
/// xoshiro256** stream (seeded through SplitMix64). Both outputs of each
/// transform are used, cosine branch first.
pub struct NormalStream {
    rng: Xoshiro256StarStar,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream {
            rng: Xoshiro256StarStar::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on [0, 1) with 53 random bits.
    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

pub fn gaussian_mixture(config: &MixtureConfig) -> Result<Dataset> {
    config.validate()?;
    let mut normals = NormalStream::new(config.seed);
    let mut points = Vec::with_capacity(config.n1 + config.n2);
    for _ in 0..config.n1 {
        points.push(vec![config.mu1 + config.sigma1 * normals.next_standard()]);
    }
    for _ in 0..config.n2 {
        points.push(vec![config.mu2 + config.sigma2 * normals.next_standard()]);
    }
    let mut labels = vec![0u8; config.n1];
    labels.resize(config.n1 + config.n2, 1);
    Dataset::new(points, labels)
}

/// Write `x1,…,xn,y` followed by one row per point. Reals use Rust's shortest
/// round-trip formatting, so `load_csv(save_csv(d)) == d`.
pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    let header: Vec<String> = (1..=data.dim())
        .map(|k| format!("x{k}"))
        .chain(std::iter::once("y".to_string()))
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for (p, y) in data.points.iter().zip(&data.labels) {
        let mut line = String::new();
        for v in p {
            line.push_str(&format!("{v:?},"));
        }
        line.push_str(&y.to_string());
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let parse_err = |line: u64, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let width = header.len();
    let header_ok = width >= 2
        && header.get(width - 1) == Some("y")
        && (0..width - 1).all(|k| header.get(k) == Some(format!("x{}", k + 1).as_str()));
    if !header_ok {
        return Err(parse_err(
            1,
            "header must be `x1,…,xn,y` with n >= 1".to_string(),
        ));
    }

    let mut points = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let mut point = Vec::with_capacity(width - 1);
        for (k, field) in record.iter().take(width - 1).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("x{} is not a number: `{field}`", k + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("x{} is not finite", k + 1)));
            }
            point.push(v);
        }
        let label = match &record[width - 1] {
            "0" => 0,
            "1" => 1,
            _ => return Err(parse_err(line, "label must be 0 or 1".to_string())),
        };
        points.push(point);
        labels.push(label);
    }
    if points.is_empty() {
        return Err(parse_err(1, "no data rows".to_string()));
    }
    Dataset::new(points, labels)
}
