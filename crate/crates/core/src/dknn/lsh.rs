//! Cross-polytope-style locality-sensitive hashing for cosine similarity.
//!
//! Each table hashes a vector by projecting it through a seeded Gaussian
//! matrix and coding the strongest coordinate with its sign; several such
//! codes are concatenated per table. Queries multi-probe the highest-scoring
//! code combinations per table. Candidate sets are re-ranked by exact cosine
//! by default; correctness is always anchored to the exact backend.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{domain, RngStream};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LshConfig {
    /// Independent hash tables.
    pub tables: usize,
    /// Concatenated cross-polytope codes per table.
    pub hashes_per_table: usize,
    /// Gaussian projection dimension per code (2*projection_dim buckets).
    pub projection_dim: usize,
    /// Code combinations probed per table at query time.
    pub probes: usize,
    /// Re-rank candidates by exact cosine before taking the k nearest.
    pub rerank: bool,
    pub seed: u64,
}

impl Default for LshConfig {
    fn default() -> Self {
        LshConfig {
            tables: 10,
            hashes_per_table: 2,
            projection_dim: 16,
            probes: 8,
            rerank: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LshTables {
    cfg: LshConfig,
    dim: usize,
    /// One `projection_dim x dim` matrix per (table, hash) pair, row-major.
    projections: Vec<Vec<f32>>,
    buckets: Vec<BTreeMap<u64, Vec<u32>>>,
}

impl LshTables {
    /// Hash all `n` stored vectors (flattened `n x dim`).
    pub fn build(cfg: &LshConfig, layer_id: usize, dim: usize, vectors: &[f32]) -> Self {
        let n = vectors.len().checked_div(dim).unwrap_or(0);
        let mut projections = Vec::with_capacity(cfg.tables * cfg.hashes_per_table);
        for t in 0..cfg.tables {
            for h in 0..cfg.hashes_per_table {
                let mut s = RngStream::keyed(
                    cfg.seed,
                    &[domain::LSH, layer_id as u64, t as u64, h as u64],
                );
                let m: Vec<f32> = (0..cfg.projection_dim * dim)
                    .map(|_| s.normal() as f32)
                    .collect();
                projections.push(m);
            }
        }
        let mut buckets = vec![BTreeMap::new(); cfg.tables];
        let mut tables = LshTables {
            cfg: cfg.clone(),
            dim,
            projections,
            buckets: Vec::new(),
        };
        for i in 0..n {
            let v = &vectors[i * dim..(i + 1) * dim];
            for (t, bucket) in buckets.iter_mut().enumerate() {
                let code = tables.code_for(t, v);
                bucket.entry(code).or_insert_with(Vec::new).push(i as u32);
            }
        }
        tables.buckets = buckets;
        tables
    }

    fn project(&self, table: usize, hash: usize, v: &[f32]) -> Vec<f64> {
        let m = &self.projections[table * self.cfg.hashes_per_table + hash];
        (0..self.cfg.projection_dim)
            .map(|r| {
                let row = &m[r * self.dim..(r + 1) * self.dim];
                row.iter()
                    .zip(v)
                    .map(|(&a, &b)| a as f64 * b as f64)
                    .sum::<f64>()
            })
            .collect()
    }

    /// Strongest-coordinate code: 2*argmax|y| + sign bit.
    fn cp_code(y: &[f64]) -> u64 {
        let mut best = 0usize;
        let mut best_abs = f64::NEG_INFINITY;
        for (j, &v) in y.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = j;
            }
        }
        2 * best as u64 + (y[best] < 0.0) as u64
    }

    fn code_for(&self, table: usize, v: &[f32]) -> u64 {
        let radix = 2 * self.cfg.projection_dim as u64;
        let mut code = 0u64;
        for h in 0..self.cfg.hashes_per_table {
            let y = self.project(table, h, v);
            code = code * radix + Self::cp_code(&y);
        }
        code
    }

    /// Candidate indices in deterministic first-seen order, plus how many
    /// probes hit each candidate.
    pub fn candidates(&self, query: &[f64]) -> (Vec<u32>, BTreeMap<u32, u32>) {
        let qf: Vec<f32> = query.iter().map(|&v| v as f32).collect();
        let radix = 2 * self.cfg.projection_dim as u64;
        let mut order: Vec<u32> = Vec::new();
        let mut hits: BTreeMap<u32, u32> = BTreeMap::new();
        for t in 0..self.cfg.tables {
            // Top-3 code options per hash position, scored by |y|.
            let mut opts: Vec<Vec<(f64, u64)>> = Vec::with_capacity(self.cfg.hashes_per_table);
            for h in 0..self.cfg.hashes_per_table {
                let y = self.project(t, h, &qf);
                let mut ranked: Vec<(f64, u64)> = y
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| (v.abs(), 2 * j as u64 + (v < 0.0) as u64))
                    .collect();
                ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                ranked.truncate(3);
                opts.push(ranked);
            }
            // Enumerate combinations in decreasing total score.
            let mut combos: Vec<(f64, u64)> = vec![(0.0, 0)];
            for opt in &opts {
                let mut next = Vec::with_capacity(combos.len() * opt.len());
                for &(score, code) in &combos {
                    for &(s, c) in opt {
                        next.push((score + s, code * radix + c));
                    }
                }
                combos = next;
            }
            combos.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            combos.truncate(self.cfg.probes);
            for (_, code) in combos {
                if let Some(ids) = self.buckets[t].get(&code) {
                    for &i in ids {
                        let hit = hits.entry(i).or_insert(0);
                        if *hit == 0 {
                            order.push(i);
                        }
                        *hit += 1;
                    }
                }
            }
        }
        (order, hits)
    }
}
