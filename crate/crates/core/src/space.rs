//! Block spaces: finite truncations of a space with a finite-dimensional
//! decomposition.
//!
//! Blocks are indexed from 1 in the public API, so that `P_0 = 0` and
//! `P_N` is the identity on an `N`-block space.

use crate::error::{invalid, Error, Result};
use crate::norm::{
    coordinate_ball_vertices, sample_p_ball, Norm, PExponent, Point, TableNorm,
};
use crate::rng::SimRng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Norm carried by a single block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockNorm {
    P(PExponent),
    Table(TableNorm),
}

impl BlockNorm {
    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            BlockNorm::P(p) => p.eval(v),
            BlockNorm::Table(t) => t.eval_slice(v),
        }
    }

    pub fn dual(&self, g: &[f64]) -> Option<f64> {
        match self {
            BlockNorm::P(p) => Some(p.dual().eval(g)),
            BlockNorm::Table(t) if t.dim() == 1 => {
                // a one-dimensional table is |f| times the absolute value
                Some(g[0].abs() / t.eval_slice(&[1.0]))
            }
            BlockNorm::Table(_) => None,
        }
    }

    pub fn subgradient_into(&self, v: &[f64], out: &mut [f64]) {
        match self {
            BlockNorm::P(p) => p.subgradient_into(v, out),
            BlockNorm::Table(t) => t.subgradient_into(v, out),
        }
    }

    /// Block-norm unit vector attaining the dual norm of `g`, when known.
    pub fn norming_point(&self, g: &[f64]) -> Option<Vec<f64>> {
        match self {
            BlockNorm::P(p) => Some(p.norming_point(g)),
            BlockNorm::Table(t) if t.dim() == 1 => {
                let s = if g[0] < 0.0 { -1.0 } else { 1.0 };
                Some(vec![s / t.eval_slice(&[1.0])])
            }
            BlockNorm::Table(_) => None,
        }
    }

    /// Whether the norm depends only on absolute values of coordinates and
    /// grows with each of them.
    pub fn is_lattice(&self, dim: usize) -> bool {
        matches!(self, BlockNorm::P(_)) || dim == 1
    }

    pub fn tag(&self) -> String {
        match self {
            BlockNorm::P(p) => p.tag().to_string(),
            BlockNorm::Table(_) => "table".into(),
        }
    }
}

/// One block of the decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub dim: usize,
    pub norm: BlockNorm,
}

/// An ordered list of blocks, aggregated by a p-sum rule.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpace {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    ambient: PExponent,
    monotone: bool,
}

impl BlockSpace {
    pub fn new(blocks: Vec<Block>, ambient: PExponent) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid("a block space needs at least one block"));
        }
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for b in &blocks {
            if b.dim == 0 {
                return Err(invalid("block dimensions must be positive"));
            }
            if let BlockNorm::Table(t) = &b.norm {
                if t.dim() != b.dim {
                    return Err(Error::DimensionMismatch { expected: b.dim, got: t.dim() });
                }
            }
            offsets.push(offsets.last().unwrap() + b.dim);
        }
        // p-sums over blocks are 1-unconditional, so every P_n has norm one
        Ok(Self { blocks, offsets, ambient, monotone: true })
    }

    /// `n` one-dimensional blocks: a space with a 1-unconditional basis.
    pub fn one_dimensional(n: usize, ambient: PExponent) -> Result<Self> {
        Self::uniform(&vec![1; n], PExponent::Two, ambient)
    }

    /// Blocks of the given dimensions, all carrying the same p-norm.
    pub fn uniform(dims: &[usize], block: PExponent, ambient: PExponent) -> Result<Self> {
        Self::new(
            dims.iter().map(|&dim| Block { dim, norm: BlockNorm::P(block) }).collect(),
            ambient,
        )
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn ambient_rule(&self) -> PExponent {
        self.ambient
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    /// Coordinates of block `i` (1-based).
    pub fn block_range(&self, i: usize) -> Range<usize> {
        assert!(i >= 1 && i <= self.blocks.len(), "block index {i} out of range");
        self.offsets[i - 1]..self.offsets[i]
    }

    /// Number of coordinates in blocks `1..=n`.
    pub fn prefix_dim(&self, n: usize) -> usize {
        self.offsets[n.min(self.blocks.len())]
    }

    /// 1-based block containing coordinate `c` (0-based).
    pub fn block_of_coord(&self, c: usize) -> usize {
        self.offsets.partition_point(|&o| o <= c)
    }

    pub fn check(&self, x: &Point) -> Result<()> {
        if x.len() != self.total_dim() {
            return Err(Error::DimensionMismatch { expected: self.total_dim(), got: x.len() });
        }
        Ok(())
    }

    fn check_index(&self, n: usize, lo: usize) -> Result<()> {
        if n < lo || n > self.blocks.len() {
            return Err(Error::IndexOutOfRange { index: n, lo, hi: self.blocks.len() });
        }
        Ok(())
    }

    /// `x_i = (P_i - P_{i-1}) x` for every block, zero-padded.
    pub fn block_components(&self, x: &Point) -> Vec<Point> {
        (1..=self.block_count())
            .map(|i| {
                let mut c = Point::zeros(x.len());
                let r = self.block_range(i);
                c.as_mut_slice()[r.clone()].copy_from_slice(&x.as_slice()[r]);
                c
            })
            .collect()
    }

    /// The slice of `x` living in block `i`.
    pub fn block_slice<'a>(&self, x: &'a Point, i: usize) -> &'a [f64] {
        &x.as_slice()[self.block_range(i)]
    }

    /// `P_n x`, the sum of the first `n` block components.
    pub fn canonical_projection(&self, x: &Point, n: usize) -> Result<Point> {
        self.check_index(n, 0)?;
        let mut y = x.clone();
        let k = self.prefix_dim(n);
        y.as_mut_slice()[k..].iter_mut().for_each(|v| *v = 0.0);
        Ok(y)
    }

    pub fn block_norm(&self, x: &Point, i: usize) -> f64 {
        self.blocks[i - 1].norm.eval(self.block_slice(x, i))
    }

    pub fn block_norms(&self, x: &Point) -> Vec<f64> {
        (1..=self.block_count()).map(|i| self.block_norm(x, i)).collect()
    }

    pub fn ambient_norm(&self, x: &Point) -> f64 {
        if self.blocks.iter().all(|b| b.dim == 1) {
            // fast path: the ambient norm is a coordinate p-norm
            return self.ambient.eval(x.as_slice());
        }
        self.ambient.eval(&self.block_norms(x))
    }

    /// `sum_{i <= m} ||x_i||`.
    pub fn ell1_block_sum(&self, x: &Point, m: usize) -> Result<f64> {
        self.check_index(m, 0)?;
        Ok((1..=m).map(|i| self.block_norm(x, i)).sum())
    }

    /// `A_m = 2m`, the default comparison constant between the l1-sum of block
    /// norms and the norm of `P_m x` for a monotone decomposition.
    pub fn a_m_default(m: usize) -> f64 {
        2.0 * m as f64
    }

    /// Whether every block norm is a lattice norm, so that zeroing
    /// coordinates never increases the norm.
    pub fn is_lattice(&self) -> bool {
        self.blocks.iter().all(|b| b.norm.is_lattice(b.dim))
    }

    /// Whether the ambient norm is the Euclidean norm of the coordinates.
    pub fn is_euclidean_model(&self) -> bool {
        self.ambient == PExponent::Two
            && self
                .blocks
                .iter()
                .all(|b| b.dim == 1 || b.norm == BlockNorm::P(PExponent::Two))
    }

    /// Zero every coordinate from `k` on.
    pub fn truncate_coords(x: &Point, k: usize) -> Point {
        let mut y = x.clone();
        y.as_mut_slice()[k.min(x.len())..].iter_mut().for_each(|v| *v = 0.0);
        y
    }

    /// The subspace spanned by the first `k` coordinates, as a block space.
    /// A block cut in the middle keeps its p-norm on the surviving
    /// coordinates; table norms cannot be cut.
    pub fn coordinate_subspace(&self, k: usize) -> Result<BlockSpace> {
        if k == 0 || k > self.total_dim() {
            return Err(Error::IndexOutOfRange { index: k, lo: 1, hi: self.total_dim() });
        }
        let mut blocks = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let lo = self.offsets[i];
            if lo >= k {
                break;
            }
            let keep = (k - lo).min(b.dim);
            if keep < b.dim {
                if let BlockNorm::Table(_) = b.norm {
                    return Err(Error::Unsupported("cutting a table-norm block".into()));
                }
            }
            blocks.push(Block { dim: keep, norm: b.norm.clone() });
        }
        BlockSpace::new(blocks, self.ambient)
    }

    /// Unit vector of block `i` along its first coordinate, scaled to block norm one.
    pub fn block_unit(&self, i: usize) -> Point {
        let mut v = Point::zeros(self.total_dim());
        let r = self.block_range(i);
        v[r.start] = 1.0;
        let n = self.block_norm(&v, i);
        v / n
    }

    /// A random point of the unit ball of block `i`, embedded in the space.
    pub fn sample_block_ball(&self, i: usize, rng: &mut SimRng) -> Point {
        let b = &self.blocks[i - 1];
        let local = match &b.norm {
            BlockNorm::P(p) => sample_p_ball(*p, b.dim, rng),
            BlockNorm::Table(t) => t.sample_unit_ball(rng),
        };
        let mut v = Point::zeros(self.total_dim());
        v.as_mut_slice()[self.block_range(i)].copy_from_slice(local.as_slice());
        v
    }

    /// A random point of the unit sphere of block `i`, embedded in the space.
    pub fn sample_block_sphere(&self, i: usize, rng: &mut SimRng) -> Point {
        loop {
            let v = self.sample_block_ball(i, rng);
            let n = self.block_norm(&v, i);
            if n > 1e-12 {
                return v / n;
            }
        }
    }
}

impl Norm for BlockSpace {
    fn dim(&self) -> usize {
        self.total_dim()
    }

    fn norm(&self, x: &Point) -> f64 {
        self.ambient_norm(x)
    }

    fn dual_norm(&self, g: &Point) -> Option<f64> {
        let duals: Option<Vec<f64>> = (1..=self.block_count())
            .map(|i| self.blocks[i - 1].norm.dual(self.block_slice(g, i)))
            .collect();
        duals.map(|d| self.ambient.dual().eval(&d))
    }

    fn subgradient(&self, x: &Point) -> Point {
        let norms = self.block_norms(x);
        let mut outer = vec![0.0; norms.len()];
        self.ambient.subgradient_into(&norms, &mut outer);
        let mut g = Point::zeros(x.len());
        for i in 1..=self.block_count() {
            let r = self.block_range(i);
            let gs = &mut g.as_mut_slice()[r.clone()];
            self.blocks[i - 1].norm.subgradient_into(&x.as_slice()[r], gs);
            gs.iter_mut().for_each(|v| *v *= outer[i - 1]);
        }
        g
    }

    fn unit_ball_vertices(&self) -> Option<Vec<Point>> {
        let coord = self.coordinate_rule()?;
        coordinate_ball_vertices(coord, self.total_dim())
    }

    fn sample_unit_ball(&self, rng: &mut SimRng) -> Point {
        match self.coordinate_rule() {
            Some(p) => sample_p_ball(p, self.total_dim(), rng),
            None => {
                let d = self.total_dim();
                let g = crate::norm::gaussian(d, rng);
                let n = self.ambient_norm(&g);
                let radius: f64 = rand::Rng::random::<f64>(rng).powf(1.0 / d as f64);
                g * (radius / n.max(1e-300))
            }
        }
    }

    fn is_euclidean(&self) -> bool {
        self.is_euclidean_model()
    }
}

impl BlockSpace {
    /// If the ambient norm is a plain coordinate p-norm, its exponent.
    pub fn coordinate_rule(&self) -> Option<PExponent> {
        let all = self.blocks.iter().all(|b| match &b.norm {
            BlockNorm::P(p) => b.dim == 1 || *p == self.ambient,
            BlockNorm::Table(_) => false,
        });
        all.then_some(self.ambient)
    }
}

/// Text schema of a block space:
///
/// ```toml
/// blocks = 3
/// dims = [2, 2, 3]
/// block_norm = "l2"          # or one tag per block, or { functionals = [[...]] }
/// ambient_rule = "l2"
/// monotone = true
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub blocks: usize,
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    #[serde(default = "default_block_norm")]
    pub block_norm: BlockNormSpec,
    pub ambient_rule: String,
    #[serde(default)]
    pub monotone: Option<bool>,
}

fn default_block_norm() -> BlockNormSpec {
    BlockNormSpec::One(NormEntry::Tag("l2".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlockNormSpec {
    One(NormEntry),
    PerBlock(Vec<NormEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NormEntry {
    Tag(String),
    Table { functionals: Vec<Vec<f64>> },
}

impl NormEntry {
    fn build(&self) -> Result<BlockNorm> {
        match self {
            NormEntry::Tag(s) => Ok(BlockNorm::P(PExponent::parse(s)?)),
            NormEntry::Table { functionals } => Ok(BlockNorm::Table(TableNorm::new(functionals.clone())?)),
        }
    }

    fn of(norm: &BlockNorm) -> Self {
        match norm {
            BlockNorm::P(p) => NormEntry::Tag(p.tag().into()),
            BlockNorm::Table(t) => NormEntry::Table { functionals: t.functionals().to_vec() },
        }
    }
}

impl SpaceSpec {
    pub fn build(&self) -> Result<BlockSpace> {
        let dims = self.dims.clone().unwrap_or_else(|| vec![1; self.blocks]);
        if dims.len() != self.blocks {
            return Err(Error::Schema(format!(
                "`dims` has {} entries but `blocks` = {}",
                dims.len(),
                self.blocks
            )));
        }
        let norms: Vec<BlockNorm> = match &self.block_norm {
            BlockNormSpec::One(e) => {
                let n = e.build()?;
                vec![n; self.blocks]
            }
            BlockNormSpec::PerBlock(v) => {
                if v.len() != self.blocks {
                    return Err(Error::Schema("`block_norm` list length differs from `blocks`".into()));
                }
                v.iter().map(NormEntry::build).collect::<Result<_>>()?
            }
        };
        let ambient = PExponent::parse(&self.ambient_rule)?;
        let space = BlockSpace::new(
            dims.into_iter().zip(norms).map(|(dim, norm)| Block { dim, norm }).collect(),
            ambient,
        )?;
        if self.monotone == Some(false) {
            log::info!("monotone = false ignored: p-sum rules always give monotone projections");
        }
        Ok(space)
    }

    pub fn of(space: &BlockSpace) -> Self {
        let entries: Vec<NormEntry> = space.blocks.iter().map(|b| NormEntry::of(&b.norm)).collect();
        let block_norm = if entries.windows(2).all(|w| w[0] == w[1]) {
            BlockNormSpec::One(entries[0].clone())
        } else {
            BlockNormSpec::PerBlock(entries)
        };
        SpaceSpec {
            blocks: space.block_count(),
            dims: Some(space.dims()),
            block_norm,
            ambient_rule: space.ambient.tag().into(),
            monotone: Some(space.monotone),
        }
    }
}
