use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChoiMatrix;
use crate::error::{DilateError, Result};
use crate::generators::TimeGrid;
use crate::linalg::{c, eigh_desc, hermitian_part, polar_unitary, CMatrix, CVector};

/// How many eigen-tracks become Kraus operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RankPolicy {
    /// Exactly `rank` tracks, the most significant first.
    Fixed { rank: usize },
    /// Every track whose eigenvalue exceeds `threshold · d` somewhere in the
    /// window.
    MaxOverWindow { threshold: f64 },
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::MaxOverWindow { threshold: 1e-12 }
    }
}

/// Grid point where tracking had to choose between nearly equal options.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub index: usize,
    pub t: f64,
    pub tracks: Vec<usize>,
}

/// Tracks whose eigenvalues were too close to separate at one grid point.
///
/// Their vectors span the right subspace but are not individual
/// eigenvectors; `root` is the square root of the Choi matrix restricted to
/// that basis, `S^{1/2}` with `S_ij = ⟨v_i|Λ|v_j⟩`.
#[derive(Debug, Clone)]
pub struct NearDegenerateBlock {
    pub tracks: Vec<usize>,
    pub root: CMatrix,
}

/// Continuously followed eigenpairs of a Choi path.
///
/// `values[n][k]` and column `k` of `vectors[n]` belong to track `k` at grid
/// point `n`. All `d²` tracks are kept; `retained` lists the ones that carry
/// Kraus operators, most significant first. Inside a near-degenerate block
/// `values` holds the diagonal of `S`.
#[derive(Debug, Clone)]
pub struct EigenTrack {
    pub grid: TimeGrid,
    pub dim: usize,
    pub values: Vec<Vec<f64>>,
    pub vectors: Vec<CMatrix>,
    pub blocks: Vec<Vec<NearDegenerateBlock>>,
    pub retained: Vec<usize>,
    pub crossings: Vec<Crossing>,
}

impl EigenTrack {
    pub fn rank(&self) -> usize {
        self.retained.len()
    }

    /// Eigenvalue of the `k`-th retained track at grid point `n`.
    pub fn lambda(&self, k: usize, n: usize) -> f64 {
        self.values[n][self.retained[k]]
    }

    /// Eigenvector of the `k`-th retained track at grid point `n`.
    pub fn vector(&self, k: usize, n: usize) -> CVector {
        self.vectors[n].column(self.retained[k]).into_owned()
    }

    /// `√λ_k v_k` for the `k`-th retained track at grid point `n`, mixed
    /// with its block partners when it sits in a near-degenerate block whose
    /// tracks are all retained. Summing the outer products of these vectors
    /// reproduces the Choi matrix on the retained subspace.
    pub fn weighted_vector(&self, k: usize, n: usize) -> CVector {
        let track = self.retained[k];
        let block = self.blocks[n].iter().find(|b| {
            b.tracks.contains(&track) && b.tracks.iter().all(|j| self.retained.contains(j))
        });
        match block {
            Some(b) => {
                let col = b
                    .tracks
                    .iter()
                    .position(|&j| j == track)
                    .expect("track is in its block");
                let mut out = CVector::zeros(self.vectors[n].nrows());
                for (row, &j) in b.tracks.iter().enumerate() {
                    out += self.vectors[n].column(j) * b.root[(row, col)];
                }
                out
            }
            None => self.vector(k, n) * c(self.lambda(k, n).max(0.0).sqrt(), 0.0),
        }
    }

    /// `max_n |Σ_k λ_k − d|` over all tracks.
    pub fn trace_residual(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (v.iter().sum::<f64>() - self.dim as f64).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_n max_k ‖v_k(t_{n+1}) − v_k(t_n)‖` over retained tracks, from
    /// index `from` on.
    pub fn max_vector_step(&self, from: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for n in from..self.vectors.len().saturating_sub(1) {
            for &k in &self.retained {
                let step = (self.vectors[n + 1].column(k) - self.vectors[n].column(k)).norm();
                worst = worst.max(step);
            }
        }
        worst
    }
}

/// Tuning knobs for [`eigentrack`].
#[derive(Debug, Clone, Copy)]
pub struct TrackOptions {
    pub rank_policy: RankPolicy,
    /// Eigenvalues closer than `cluster_gap · d` are treated as one
    /// degenerate cluster; merging such clusters is reported as a crossing.
    pub cluster_gap: f64,
    /// Eigenvalues closer than `smooth_gap · d` are followed as a subspace
    /// rather than as individual eigenvectors, whose numerical noise grows
    /// like the inverse of the gap.
    pub smooth_gap: f64,
    /// Assignment weights closer than this are reported as crossings.
    pub degeneracy_tol: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            rank_policy: RankPolicy::default(),
            cluster_gap: 1e-10,
            smooth_gap: 1e-6,
            degeneracy_tol: 1e-8,
        }
    }
}

/// Multiply `v` by the phase that makes its first near-maximal component
/// real and positive.
fn canonical_phase(v: &mut CVector) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    if let Some(z) = v.iter().find(|z| z.norm() >= max - 1e-9).copied() {
        let phase = z.conj() / z.norm();
        *v *= phase;
    }
}

fn sqrt_psd(s: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh_desc(s);
    let diag = CVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v.max(0.0).sqrt(), 0.0)));
    &vecs * CMatrix::from_diagonal(&diag) * vecs.adjoint()
}

fn clusters(values: &[f64], gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || (values[i - 1] - values[i]).abs() > gap {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Follow the eigenpairs of `path` across the grid.
///
/// Per-point decompositions run in parallel. A sequential sweep then assigns
/// the previous tracks greedily to the new eigenvalue clusters by overlap
/// weight and picks, inside each cluster, the orthonormal basis closest to
/// the previous vectors. The resulting successive overlaps are Hermitian
/// positive semidefinite, so each track's overlap with itself is real and
/// positive.
pub fn eigentrack(path: &[ChoiMatrix], grid: &TimeGrid, opts: TrackOptions) -> Result<EigenTrack> {
    if path.len() != grid.len() {
        return Err(DilateError::GridMismatch(format!(
            "{} Choi matrices for {} grid points",
            path.len(),
            grid.len()
        )));
    }
    let dim = path[0].dim();
    let n2 = dim * dim;
    let decomps: Vec<(Vec<f64>, CMatrix)> =
        path.par_iter().map(|ch| eigh_desc(ch.matrix())).collect();
    let gap = opts.smooth_gap.max(opts.cluster_gap) * dim as f64;
    let tight_gap = opts.cluster_gap * dim as f64;
    let weak_floor = opts.cluster_gap * dim as f64;

    let (v0, mut prev) = decomps[0].clone();
    for k in 0..n2 {
        let mut col = prev.column(k).into_owned();
        canonical_phase(&mut col);
        prev.set_column(k, &col);
    }
    let mut values = vec![v0];
    let mut vectors = vec![prev.clone()];
    let mut prev_cluster: Vec<usize> = {
        let mut ids = vec![0; n2];
        for (cid, range) in clusters(&values[0], tight_gap).into_iter().enumerate() {
            for k in range {
                ids[k] = cid;
            }
        }
        ids
    };
    let mut crossings = Vec::new();
    let mut all_blocks = vec![Vec::new()];

    for (n, (vals, vecs)) in decomps.iter().enumerate().skip(1) {
        let groups = clusters(vals, gap);
        let blocks: Vec<CMatrix> = groups
            .iter()
            .map(|r| vecs.columns(r.start, r.len()).into_owned())
            .collect();
        let weights: Vec<Vec<f64>> = (0..n2)
            .map(|j| {
                let v = prev.column(j);
                blocks
                    .iter()
                    .map(|w| (w.adjoint() * v).norm_squared())
                    .collect()
            })
            .collect();

        let mut pairs: Vec<(usize, usize)> = (0..n2)
            .flat_map(|j| (0..groups.len()).map(move |g| (j, g)))
            .collect();
        pairs.sort_by(|a, b| {
            weights[b.0][b.1]
                .total_cmp(&weights[a.0][a.1])
                .then(a.cmp(b))
        });
        let mut capacity: Vec<usize> = groups.iter().map(|r| r.len()).collect();
        let mut assigned: Vec<Option<usize>> = vec![None; n2];
        for (j, g) in pairs {
            if assigned[j].is_none() && capacity[g] > 0 {
                assigned[j] = Some(g);
                capacity[g] -= 1;
            }
        }

        let prev_vals = values.last().expect("at least one point");
        let mut flagged: Vec<usize> = Vec::new();
        for j in 0..n2 {
            if prev_vals[j] <= weak_floor {
                continue;
            }
            let mut w = weights[j].clone();
            w.sort_by(|a, b| b.total_cmp(a));
            if w.len() > 1 && w[0] - w[1] < opts.degeneracy_tol {
                flagged.push(j);
            }
        }
        let tight = clusters(vals, tight_gap);
        let tight_id = |x: f64| {
            let nearest = (0..n2)
                .min_by(|&i, &k| (vals[i] - x).abs().total_cmp(&(vals[k] - x).abs()))
                .expect("non-empty");
            tight
                .iter()
                .position(|r| r.contains(&nearest))
                .expect("clusters cover every index")
        };
        let choi = path[n].matrix();
        let mut next = CMatrix::zeros(n2, n2);
        let mut next_vals = vec![0.0; n2];
        let mut next_cluster = vec![0; n2];
        let mut step_blocks = Vec::new();
        for (g, range) in groups.iter().enumerate() {
            let members: Vec<usize> = (0..n2).filter(|&j| assigned[j] == Some(g)).collect();
            let w = &blocks[g];
            let old = CMatrix::from_fn(n2, members.len(), |r, col| prev[(r, members[col])]);
            let mut rotated = w * polar_unitary(&(w.adjoint() * &old));
            for (col, &j) in members.iter().enumerate() {
                let mut v = rotated.column(col).into_owned();
                if old.column(col).dotc(&v).norm() < 1e-6 {
                    canonical_phase(&mut v);
                    rotated.set_column(col, &v);
                }
                next.set_column(j, &v);
            }
            if range.len() == 1 {
                next_vals[members[0]] = vals[range.start];
                next_cluster[members[0]] = tight_id(vals[range.start]);
                continue;
            }
            let restricted = hermitian_part(&(rotated.adjoint() * choi * &rotated));
            for (col, &j) in members.iter().enumerate() {
                next_vals[j] = restricted[(col, col)].re;
                next_cluster[j] = tight_id(next_vals[j]);
            }
            step_blocks.push(NearDegenerateBlock {
                tracks: members,
                root: sqrt_psd(&restricted),
            });
        }
        for (tid, range) in tight.iter().enumerate() {
            if range.len() < 2 {
                continue;
            }
            let members: Vec<usize> = (0..n2)
                .filter(|&j| next_cluster[j] == tid && prev_vals[j] > weak_floor)
                .collect();
            let mut origins: Vec<usize> = members.iter().map(|&j| prev_cluster[j]).collect();
            origins.sort_unstable();
            origins.dedup();
            if origins.len() > 1 {
                flagged.extend(members);
            }
        }
        if !flagged.is_empty() {
            flagged.sort_unstable();
            flagged.dedup();
            crossings.push(Crossing {
                index: n,
                t: grid.time(n),
                tracks: flagged,
            });
        }
        all_blocks.push(step_blocks);
        values.push(next_vals);
        vectors.push(next.clone());
        prev = next;
        prev_cluster = next_cluster;
    }

    let window_max: Vec<f64> = (0..n2)
        .map(|k| {
            values
                .iter()
                .map(|v| v[k])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut order: Vec<usize> = (0..n2).collect();
    order.sort_by(|&a, &b| {
        values[0][b]
            .total_cmp(&values[0][a])
            .then(window_max[b].total_cmp(&window_max[a]))
            .then(a.cmp(&b))
    });
    let retained = match opts.rank_policy {
        RankPolicy::MaxOverWindow { threshold } => {
            let floor = threshold * dim as f64;
            let mut r: Vec<usize> = order
                .iter()
                .copied()
                .filter(|&k| window_max[k] > floor)
                .collect();
            if r.is_empty() {
                r.push(order[0]);
            }
            r
        }
        RankPolicy::Fixed { rank } => {
            if rank == 0 || rank > n2 {
                return Err(DilateError::InvalidInput(format!(
                    "fixed rank must lie in 1..={n2}, got {rank}"
                )));
            }
            order[..rank].to_vec()
        }
    };
    Ok(EigenTrack {
        grid: *grid,
        dim,
        values,
        vectors,
        blocks: all_blocks,
        retained,
        crossings,
    })
}

/// Choi matrix built from prescribed eigenpairs; used to construct tracking
/// test cases with known answers.
pub fn choi_from_eigenpairs(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v, 0.0)),
    ));
    vectors * diag * vectors.adjoint()
}
