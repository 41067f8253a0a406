//! Minimum-weight perfect matching decoder.
//!
//! Edge weights are discretised to integers so that path lengths and the blossom duals
//! are exact. Shortest paths are precomputed for every pair of detectors in each
//! connected component (on the fly for very large components). Per shot, flagged
//! detectors are split into clusters that cannot interact in an optimal matching, and
//! each cluster is matched exactly with boundary partners.

pub mod blossom;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dem::MatchingGraph;
use crate::error::{Error, Result};
use crate::frame::{Block, Frame, FrameSampler, LANES};
use crate::noise::NoisyCircuit;
use crate::shots::ShotBatch;

/// Components above this size are not given a dense distance table.
pub const MAX_DENSE_NODES: usize = 6000;
/// Target resolution of the integer weights (units per unit of log-likelihood).
pub const WEIGHT_SCALE: f64 = 1.0e4;

const NONE: u32 = u32::MAX;
const UNREACHABLE: u32 = u32::MAX;

#[derive(Clone, Debug, Default)]
struct Component {
    nodes: Vec<usize>,
    offsets: Vec<u32>,
    targets: Vec<u32>,
    weights: Vec<u32>,
    flips: Vec<bool>,
    /// Row-major `m x (m + 1)` table of `dist << 1 | parity`; column `m` is the boundary.
    dense: Option<Vec<u32>>,
}

impl Component {
    fn size(&self) -> usize {
        self.nodes.len()
    }

    /// Single-source shortest paths with the boundary as a sink. Stops early once every
    /// node in `targets` (local ids) and the boundary are settled, when given.
    fn dijkstra(&self, src: usize, row: &mut Vec<u32>, targets: Option<&[usize]>) {
        let m = self.size();
        row.clear();
        row.resize(m + 1, UNREACHABLE);
        let mut settled = vec![false; m + 1];
        let mut remaining = targets.map(|t| t.len() + 1);
        let mut heap = BinaryHeap::new();
        row[src] = 0;
        heap.push(Reverse((0u32, src as u32)));
        while let Some(Reverse((packed, u))) = heap.pop() {
            let u = u as usize;
            if settled[u] || packed != row[u] {
                continue;
            }
            settled[u] = true;
            if let (Some(r), Some(t)) = (remaining.as_mut(), targets) {
                if u == m || t.contains(&u) {
                    *r -= 1;
                    if *r == 0 {
                        break;
                    }
                }
            }
            if u == m {
                continue;
            }
            let (dist, parity) = (packed >> 1, packed & 1);
            for e in self.offsets[u] as usize..self.offsets[u + 1] as usize {
                let v = self.targets[e] as usize;
                if settled[v] {
                    continue;
                }
                let nd = dist + self.weights[e];
                let np = parity ^ u32::from(self.flips[e]);
                let cand = (nd << 1) | np;
                // strict improvement in distance; equal distances keep the first path
                if row[v] == UNREACHABLE || nd < (row[v] >> 1) {
                    row[v] = cand;
                    heap.push(Reverse((cand, v as u32)));
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DecoderOptions {
    /// Skip components in which no edge flips the observable. Their matching cannot
    /// change the prediction, so this is exact for the observable, but the reported
    /// matching weight then only covers the remaining components.
    pub skip_unobservable: bool,
}

#[derive(Clone, Debug)]
pub struct Decoder {
    num_detectors: usize,
    scale: f64,
    component_of: Vec<u32>,
    local: Vec<u32>,
    components: Vec<Component>,
}

/// Outcome of decoding one syndrome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub flips_observable: bool,
    /// Total matching weight in integer units (see [`Decoder::scale`]).
    pub weight: i64,
}

#[derive(Default)]
pub struct Scratch {
    rows: Vec<Vec<u32>>,
    by_component: Vec<Vec<usize>>,
}

impl Decoder {
    pub fn new(graph: &MatchingGraph) -> Result<Self> {
        Self::with_options(graph, DecoderOptions { skip_unobservable: true })
    }

    pub fn with_options(graph: &MatchingGraph, options: DecoderOptions) -> Result<Self> {
        let n = graph.num_detectors;
        for e in &graph.edges {
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidParameter(format!("edge {}-{:?} has weight {}", e.u, e.v, e.weight)));
            }
        }
        // connected components over detector nodes (the boundary does not join them)
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &graph.edges {
            if let Some(v) = e.v {
                let (a, b) = (find(&mut parent, e.u), find(&mut parent, v));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut root_comp = vec![NONE; n];
        let mut component_of = vec![NONE; n];
        let mut local = vec![NONE; n];
        let mut components: Vec<Component> = Vec::new();
        for d in 0..n {
            let r = find(&mut parent, d);
            if root_comp[r] == NONE {
                root_comp[r] = components.len() as u32;
                components.push(Component::default());
            }
            let c = root_comp[r];
            component_of[d] = c;
            local[d] = components[c as usize].nodes.len() as u32;
            components[c as usize].nodes.push(d);
        }
        let mut observable = vec![false; components.len()];
        let mut max_weight = 0f64;
        for e in &graph.edges {
            if e.flips_observable {
                observable[component_of[e.u] as usize] = true;
            }
            max_weight = max_weight.max(e.weight);
        }
        let largest = components.iter().map(Component::size).max().unwrap_or(1).max(1);
        // keep every shortest path below 2^30 units
        let scale = WEIGHT_SCALE.min((1u64 << 30) as f64 / ((largest + 1) as f64 * max_weight.max(1.0)));
        let to_int = |w: f64| ((w * scale).round() as u32).max(1);

        let mut adjacency: Vec<Vec<Vec<(u32, u32, bool)>>> =
            components.iter().map(|c| vec![Vec::new(); c.size()]).collect();
        for e in &graph.edges {
            let c = component_of[e.u] as usize;
            let m = components[c].size() as u32;
            let w = to_int(e.weight);
            let lu = local[e.u];
            match e.v {
                Some(v) => {
                    let lv = local[v];
                    adjacency[c][lu as usize].push((lv, w, e.flips_observable));
                    adjacency[c][lv as usize].push((lu, w, e.flips_observable));
                }
                None => adjacency[c][lu as usize].push((m, w, e.flips_observable)),
            }
        }
        for (c, comp) in components.iter_mut().enumerate() {
            let mut offsets = vec![0u32];
            for list in &mut adjacency[c] {
                list.sort();
                for &(t, w, f) in list.iter() {
                    comp.targets.push(t);
                    comp.weights.push(w);
                    comp.flips.push(f);
                }
                offsets.push(comp.targets.len() as u32);
            }
            comp.offsets = offsets;
        }
        if options.skip_unobservable {
            for (d, c) in component_of.iter_mut().enumerate() {
                if !observable[*c as usize] {
                    *c = NONE;
                    local[d] = NONE;
                }
            }
            for (c, comp) in components.iter_mut().enumerate() {
                if !observable[c] {
                    *comp = Component::default();
                }
            }
        }
        let dense: Vec<Option<Vec<u32>>> = components
            .par_iter()
            .map(|comp| {
                let m = comp.size();
                if m == 0 || m > MAX_DENSE_NODES {
                    return None;
                }
                let mut table = Vec::with_capacity(m * (m + 1));
                let mut row = Vec::new();
                for s in 0..m {
                    comp.dijkstra(s, &mut row, None);
                    table.extend_from_slice(&row);
                }
                Some(table)
            })
            .collect();
        for (comp, table) in components.iter_mut().zip(dense) {
            comp.dense = table;
        }
        Ok(Decoder { num_detectors: n, scale, component_of, local, components })
    }

    pub fn num_detectors(&self) -> usize {
        self.num_detectors
    }

    /// Integer units per unit of edge weight.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Shortest-path table entry `dist << 1 | parity` between detectors (or to the
    /// boundary when `v` is `None`); `None` if unreachable or not in a decoded component.
    pub fn path(&self, u: usize, v: Option<usize>) -> Option<(i64, bool)> {
        let c = self.component_of[u];
        if c == NONE {
            return None;
        }
        let comp = &self.components[c as usize];
        let lu = self.local[u] as usize;
        let lv = match v {
            Some(v) => {
                if self.component_of[v] != c {
                    return None;
                }
                self.local[v] as usize
            }
            None => comp.size(),
        };
        let packed = match &comp.dense {
            Some(t) => t[lu * (comp.size() + 1) + lv],
            None => {
                let mut row = Vec::new();
                comp.dijkstra(lu, &mut row, None);
                row[lv]
            }
        };
        (packed != UNREACHABLE).then(|| ((packed >> 1) as i64, packed & 1 == 1))
    }

    /// Decodes one syndrome given as a list of flagged detector ids.
    pub fn decode(&self, flagged: &[u32], scratch: &mut Scratch) -> Result<Prediction> {
        if scratch.by_component.len() < self.components.len() {
            scratch.by_component.resize(self.components.len(), Vec::new());
        }
        let mut touched: Vec<usize> = Vec::new();
        for &d in flagged {
            let d = d as usize;
            if d >= self.num_detectors {
                return Err(Error::InvalidParameter(format!("detector {d} out of range")));
            }
            let c = self.component_of[d];
            if c == NONE {
                continue;
            }
            let list = &mut scratch.by_component[c as usize];
            if list.is_empty() {
                touched.push(c as usize);
            }
            list.push(self.local[d] as usize);
        }
        touched.sort_unstable();
        let mut flip = false;
        let mut weight = 0i64;
        let mut failure = None;
        for &c in &touched {
            let mut nodes = std::mem::take(&mut scratch.by_component[c]);
            if failure.is_none() {
                match self.decode_component(c, &mut nodes, &mut scratch.rows) {
                    Ok((f, w)) => {
                        flip ^= f;
                        weight += w;
                    }
                    Err(e) => failure = Some(e),
                }
            }
            nodes.clear();
            scratch.by_component[c] = nodes;
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(Prediction { flips_observable: flip, weight }),
        }
    }

    fn decode_component(&self, c: usize, nodes: &mut Vec<usize>, rows: &mut Vec<Vec<u32>>) -> Result<(bool, i64)> {
        let comp = &self.components[c];
        let m = comp.size();
        nodes.sort_unstable();
        nodes.dedup();
        let k = nodes.len();
        // packed distances among the flagged nodes and to the boundary
        let mut pair = vec![UNREACHABLE; k * k];
        let mut bnd = vec![UNREACHABLE; k];
        match &comp.dense {
            Some(t) => {
                for (i, &a) in nodes.iter().enumerate() {
                    let row = &t[a * (m + 1)..(a + 1) * (m + 1)];
                    bnd[i] = row[m];
                    for (j, &b) in nodes.iter().enumerate() {
                        pair[i * k + j] = row[b];
                    }
                }
            }
            None => {
                if rows.is_empty() {
                    rows.push(Vec::new());
                }
                for (i, &a) in nodes.iter().enumerate() {
                    comp.dijkstra(a, &mut rows[0], Some(nodes));
                    bnd[i] = rows[0][m];
                    for (j, &b) in nodes.iter().enumerate() {
                        pair[i * k + j] = rows[0][b];
                    }
                }
            }
        }
        let dist = |p: u32| if p == UNREACHABLE { None } else { Some((p >> 1) as i64) };
        let par = |p: u32| p & 1 == 1;

        // Sending a node to the boundary is the same as leaving it unmatched, so this is
        // a maximum-weight matching on the savings `b_i + b_j - d_ij` of pairing two
        // nodes instead. Nodes without a boundary path get a saving that outweighs all
        // others together, so they are matched whenever possible.
        let finite: i64 = bnd.iter().chain(&pair).filter_map(|&p| dist(p)).sum();
        let big = 2 * finite + 1;
        let b_of = |i: usize| dist(bnd[i]).unwrap_or(big);
        let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); k];
        let mut cand = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let Some(d) = dist(pair[i * k + j]) else { continue };
                let w = b_of(i) + b_of(j) - d;
                if w > 0 {
                    cand.push((i, j, w));
                    adj[i].push((j, w));
                    adj[j].push((i, w));
                }
            }
        }

        // Clusters start from best-saving links and are matched independently. Each
        // solution comes with optimal vertex duals; if no candidate pair between clusters
        // violates them, the union of the cluster optima is optimal overall. Otherwise
        // the offending clusters are merged and solved again, starting from the union of
        // their previous solutions.
        let mut uf: Vec<usize> = (0..k).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut valid = vec![false; k];
        let union = |uf: &mut Vec<usize>, valid: &mut Vec<bool>, a: usize, b: usize| {
            let (ra, rb) = (find(uf, a), find(uf, b));
            if ra != rb {
                let (lo, hi) = (ra.min(rb), ra.max(rb));
                uf[hi] = lo;
                valid[lo] = false;
            }
        };
        for i in 0..k {
            if let Some(&(j, _)) = adj[i].iter().max_by_key(|&&(j, w)| (w, std::cmp::Reverse(j))) {
                union(&mut uf, &mut valid, i, j);
            }
        }
        // partner[i]: Some(j) for a pair, None for the boundary; u: duals in doubled units
        let mut partner: Vec<Option<usize>> = vec![None; k];
        let mut u = vec![0i64; k];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        let mut slot = vec![0usize; k];
        let mut local: Vec<(usize, usize, i64)> = Vec::new();
        loop {
            for list in members.iter_mut() {
                list.clear();
            }
            for i in 0..k {
                let r = find(&mut uf, i);
                members[r].push(i);
            }
            for r in 0..k {
                if members[r].is_empty() || valid[r] {
                    continue;
                }
                valid[r] = true;
                let cl = &members[r];
                let s = cl.len();
                if s == 2 {
                    let (i, j) = (cl[0], cl[1]);
                    if let Some(&(_, w)) = adj[i].iter().find(|&&(x, _)| x == j) {
                        partner[i] = Some(j);
                        partner[j] = Some(i);
                        u[i] = w;
                        u[j] = w;
                        continue;
                    }
                }
                if s == 1 {
                    partner[cl[0]] = None;
                    u[cl[0]] = 0;
                    continue;
                }
                for (a, &i) in cl.iter().enumerate() {
                    slot[i] = a;
                }
                local.clear();
                for &i in cl {
                    for &(j, w) in &adj[i] {
                        if i < j && find(&mut uf, j) == r {
                            local.push((slot[i], slot[j], w));
                        }
                    }
                }
                let (mate, dual) = blossom::max_weight_matching_with_duals(s, &local);
                for (a, &i) in cl.iter().enumerate() {
                    partner[i] = mate[a].map(|x| cl[x]);
                    u[i] = dual[a];
                }
            }
            let mut merged = false;
            for &(i, j, w) in &cand {
                if u[i] + u[j] < 2 * w && find(&mut uf, i) != find(&mut uf, j) {
                    union(&mut uf, &mut valid, i, j);
                    merged = true;
                }
            }
            if !merged {
                break;
            }
        }
        if let Some(i) = (0..k).find(|&i| partner[i].is_none() && dist(bnd[i]).is_none()) {
            return Err(infeasible(comp, &[i], nodes));
        }

        let mut flip = false;
        let mut weight = 0i64;
        for i in 0..k {
            match partner[i] {
                None => {
                    weight += dist(bnd[i]).unwrap();
                    flip ^= par(bnd[i]);
                }
                Some(j) if j > i => {
                    weight += dist(pair[i * k + j]).unwrap();
                    flip ^= par(pair[i * k + j]);
                }
                Some(_) => {}
            }
        }
        Ok((flip, weight))
    }

    /// Predicted observable flip for one shot.
    pub fn decode_shot(&self, detector_bits: &[bool]) -> Result<bool> {
        if detector_bits.len() != self.num_detectors {
            return Err(Error::InvalidParameter(format!(
                "syndrome has {} bits, graph has {} detectors",
                detector_bits.len(),
                self.num_detectors
            )));
        }
        let flagged: Vec<u32> = detector_bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u32).collect();
        Ok(self.decode(&flagged, &mut Scratch::default())?.flips_observable)
    }
}

fn infeasible(comp: &Component, which: &[usize], nodes: &[usize]) -> Error {
    let ids: Vec<usize> = which.iter().map(|&i| comp.nodes[nodes[i]]).collect();
    Error::InfeasibleMatching(format!("detectors {ids:?} cannot be matched"))
}

/// Decodes a single syndrome against `graph`.
pub fn decode_shot(graph: &MatchingGraph, detector_bits: &[bool]) -> Result<bool> {
    Decoder::new(graph)?.decode_shot(detector_bits)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub predicted_observable_flip: Vec<bool>,
    pub n_shots: usize,
    pub n_fails: usize,
}

impl DecodeResult {
    pub fn logical_error_rate(&self) -> (f64, f64) {
        ler_with_error(self.n_fails, self.n_shots)
    }
}

/// `P_L = n_fails / n_shots` and its binomial standard error.
pub fn ler_with_error(n_fails: usize, n_shots: usize) -> (f64, f64) {
    let p = n_fails as f64 / n_shots as f64;
    (p, (p * (1.0 - p) / n_shots as f64).sqrt())
}

pub fn decode_batch(decoder: &Decoder, shots: &ShotBatch) -> Result<DecodeResult> {
    if shots.n_detectors != decoder.num_detectors() {
        return Err(Error::InvalidParameter(format!(
            "shots have {} detectors, graph has {}",
            shots.n_detectors,
            decoder.num_detectors()
        )));
    }
    let predictions: Vec<bool> = (0..shots.n_shots)
        .into_par_iter()
        .map_init(Scratch::default, |scratch, s| {
            let flagged: Vec<u32> = shots.flagged(s).into_iter().map(|d| d as u32).collect();
            decoder.decode(&flagged, scratch).map(|p| p.flips_observable)
        })
        .collect::<Result<_>>()?;
    let n_fails = predictions.iter().enumerate().filter(|(s, &p)| p != shots.observable(*s)).count();
    Ok(DecodeResult { predicted_observable_flip: predictions, n_shots: shots.n_shots, n_fails })
}

/// `(P_L, std_err)` for a batch of shots.
pub fn estimate_ler(graph: &MatchingGraph, shots: &ShotBatch) -> Result<(f64, f64)> {
    if shots.n_shots == 0 {
        return Err(Error::InvalidParameter("no shots to decode".into()));
    }
    let result = decode_batch(&Decoder::new(graph)?, shots)?;
    Ok(result.logical_error_rate())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCount {
    pub n_shots: usize,
    pub n_fails: usize,
}

/// Samples and decodes `n_shots` shots block by block without storing them. Produces
/// the same count as sampling a [`ShotBatch`] with the same seed and decoding it.
pub fn sample_and_decode(
    sampler: &FrameSampler,
    decoder: &Decoder,
    n_shots: usize,
    seed: u64,
) -> Result<FailureCount> {
    if sampler.num_detectors() != decoder.num_detectors() {
        return Err(Error::InvalidParameter("sampler and decoder disagree on detector count".into()));
    }
    let program = sampler.program();
    let n_blocks = n_shots.div_ceil(LANES);
    let fails: Vec<usize> = (0..n_blocks as u64)
        .into_par_iter()
        .map_init(
            || {
                (
                    Frame::new(program.num_qubits, program.num_records),
                    Block::default(),
                    vec![Vec::new(); LANES],
                    Scratch::default(),
                )
            },
            |(frame, block, lanes, scratch), b| -> Result<usize> {
                sampler.sample_block_with(frame, seed, b, block);
                let live = (n_shots - b as usize * LANES).min(LANES);
                block.flagged_per_lane(&mut lanes[..live]);
                let mut fails = 0;
                for (lane, flagged) in lanes[..live].iter().enumerate() {
                    let pred = decoder.decode(flagged, scratch)?.flips_observable;
                    if pred != ((block.observable >> lane) & 1 == 1) {
                        fails += 1;
                    }
                }
                Ok(fails)
            },
        )
        .collect::<Result<_>>()?;
    Ok(FailureCount { n_shots, n_fails: fails.iter().sum() })
}

/// Convenience wrapper: compiles the sampler and decoder, then streams.
pub fn run_memory_point(noisy: &NoisyCircuit, graph: &MatchingGraph, n_shots: usize, seed: u64) -> Result<FailureCount> {
    let sampler = FrameSampler::new(noisy)?;
    let decoder = Decoder::new(graph)?;
    sample_and_decode(&sampler, &decoder, n_shots, seed)
}
