//! Seeded random families of affine subspaces with a common member.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Point};
use crate::sets::AffineSet;

/// Shape of a random family: `k` sets in `R^dim`, set `l` of codimension
/// `codims[l]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub dim: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codims: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    /// Subspaces through the origin instead of translated ones.
    #[serde(default)]
    pub linear: bool,
}

impl FamilySpec {
    pub fn new(dim: usize, k: usize, seed: u64) -> Self {
        Self { dim, k, codims: None, seed, linear: false }
    }

    /// Codimensions, defaulting to `max(1, (dim - 1) / (2k))` per set.
    pub fn resolved_codims(&self) -> Vec<usize> {
        self.codims.clone().unwrap_or_else(|| vec![((self.dim.saturating_sub(1)) / (2 * self.k.max(1))).max(1); self.k])
    }

    fn validate(&self) -> Result<()> {
        let codims = self.resolved_codims();
        if self.dim < 2 || self.k == 0 {
            return Err(Error::InvalidProblem("random family needs dim >= 2 and k >= 1".into()));
        }
        if codims.len() != self.k {
            return Err(Error::InvalidProblem(format!("{} codimensions given for k = {}", codims.len(), self.k)));
        }
        if codims.iter().any(|&c| c == 0 || c >= self.dim) {
            return Err(Error::InvalidProblem("each codimension must lie in 1..dim".into()));
        }
        Ok(())
    }

    /// A random shape with `2 <= k <= max_k`, `4 <= dim <= max_dim` and total
    /// codimension at most `dim - 1`.
    pub fn random_shape(seed: u64, max_dim: usize, max_k: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5a9e);
        let k = rng.random_range(2..=max_k.max(2));
        let dim = rng.random_range((2 * k).max(4)..=max_dim.max(2 * k).max(4));
        let budget = dim - 1;
        let mut codims = Vec::with_capacity(k);
        let mut left = budget;
        for l in 0..k {
            let reserve = k - l - 1;
            let hi = (left - reserve).min(dim / 2).max(1);
            let c = rng.random_range(1..=hi);
            codims.push(c);
            left -= c;
        }
        Self { dim, k, codims: Some(codims), seed, linear: false }
    }
}

impl FromStr for FamilySpec {
    type Err = Error;

    /// `dim=20,k=3,seed=7[,codims=2:3:4][,linear]`
    fn from_str(s: &str) -> Result<Self> {
        let mut spec = FamilySpec::new(0, 0, 0);
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').unwrap_or((part, ""));
            let bad = || Error::Parse(format!("bad random-family field '{part}'"));
            match key {
                "dim" => spec.dim = value.parse().map_err(|_| bad())?,
                "k" => spec.k = value.parse().map_err(|_| bad())?,
                "seed" => spec.seed = value.parse().map_err(|_| bad())?,
                "codims" => {
                    let c: std::result::Result<Vec<usize>, _> = value.split(':').map(str::parse).collect();
                    spec.codims = Some(c.map_err(|_| bad())?);
                }
                "linear" => spec.linear = value.is_empty() || value == "true",
                _ => return Err(bad()),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// A generated problem: sets, a starting point and a known common member.
#[derive(Debug, Clone)]
pub struct RandomFamily {
    pub spec: FamilySpec,
    pub sets: Vec<AffineSet>,
    pub x0: Point,
    /// A member of every set (the origin for linear families).
    pub anchor: Point,
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Builds `{x : C_l x = C_l z}` for Gaussian `C_l` and a Gaussian anchor `z`.
pub fn random_family(spec: &FamilySpec) -> Result<RandomFamily> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.dim;
    let anchor = if spec.linear { Point::zeros(n) } else { Point::new(normal_vec(&mut rng, n))? };
    let mut sets = Vec::with_capacity(spec.k);
    for c in spec.resolved_codims() {
        let matrix = DenseMatrix::new(c, n, normal_vec(&mut rng, c * n))?;
        let rhs = matrix.mul_vec(&anchor)?;
        sets.push(AffineSet::rows(matrix, rhs)?);
    }
    let x0 = Point::new(normal_vec(&mut rng, n))?.scaled(2.0);
    Ok(RandomFamily { spec: spec.clone(), sets, x0, anchor })
}

/// `count` members of `∩ M_l`: the anchor plus random directions projected
/// onto the common direction space.
pub fn sample_members(family: &RandomFamily, count: usize, seed: u64) -> Result<Vec<Point>> {
    let sc = crate::oracle::stack(&family.sets)?;
    let homogeneous = crate::sets::RowConstraint::new(sc.matrix.clone(), Point::zeros(sc.rows()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir = homogeneous.project(&Point::new(normal_vec(&mut rng, family.spec.dim))?);
            Ok(family.anchor.add(&dir))
        })
        .collect()
}
