//! Exact s-t max-flow / min-cut on integer capacities (Dinic).
//!
//! A node on the source side pays its sink capacity, a node on the sink side
//! pays its source capacity, and a pair split by the cut pays its pairwise
//! capacity. Minimal and maximal minimizers are read off the residual graph.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::fixed::CAPACITY_LIMIT;

/// A cut problem with one node per cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CutProblem {
    pub source_cap: Vec<i128>,
    pub sink_cap: Vec<i128>,
    /// Symmetric pairwise capacities `(i, j, c)`.
    pub pairs: Vec<(u32, u32, i128)>,
}

impl CutProblem {
    pub fn new(nodes: usize) -> Self {
        Self {
            source_cap: vec![0; nodes],
            sink_cap: vec![0; nodes],
            pairs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.source_cap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_cap.is_empty()
    }

    /// Cut value of the partition whose source side is `source_side`.
    pub fn cut_value(&self, source_side: &[bool]) -> i128 {
        let unary: i128 = (0..self.len())
            .map(|i| {
                if source_side[i] {
                    self.sink_cap[i]
                } else {
                    self.source_cap[i]
                }
            })
            .sum();
        let pair: i128 = self
            .pairs
            .iter()
            .filter(|&&(i, j, _)| source_side[i as usize] != source_side[j as usize])
            .map(|p| p.2)
            .sum();
        unary + pair
    }
}

/// Optimal cut with extremal minimizers and the flow that certifies it.
#[derive(Clone, Debug, PartialEq)]
pub struct CutSolution {
    pub value: i128,
    /// Smallest optimal source side.
    pub minimal_source_side: Vec<bool>,
    /// Largest optimal source side.
    pub maximal_source_side: Vec<bool>,
    /// Net flow from `i` to `j` on each pair, in problem order.
    pub pair_flow: Vec<i128>,
    /// Flow entering each node from the source.
    pub source_flow: Vec<i128>,
    /// Flow leaving each node to the sink.
    pub sink_flow: Vec<i128>,
}

impl CutSolution {
    /// Smallest optimal sink side (complement of the maximal source side).
    pub fn minimal_sink_side(&self) -> Vec<bool> {
        self.maximal_source_side.iter().map(|b| !b).collect()
    }

    /// Largest optimal sink side.
    pub fn maximal_sink_side(&self) -> Vec<bool> {
        self.minimal_source_side.iter().map(|b| !b).collect()
    }
}

struct Network {
    head: Vec<usize>,
    to: Vec<u32>,
    rev: Vec<usize>,
    cap: Vec<i128>,
}

impl Network {
    fn out(&self, v: usize) -> std::ops::Range<usize> {
        self.head[v]..self.head[v + 1]
    }

    fn bfs_levels(&self, s: usize, t: usize, level: &mut [i32]) -> bool {
        level.fill(-1);
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for e in self.out(v) {
                let u = self.to[e] as usize;
                if self.cap[e] > 0 && level[u] < 0 {
                    level[u] = level[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        level[t] >= 0
    }

    /// Blocking flow along the level graph with current-arc pointers.
    fn blocking_flow(&mut self, s: usize, t: usize, level: &mut [i32]) -> i128 {
        let mut it: Vec<usize> = self.head[..self.head.len() - 1].to_vec();
        let mut path: Vec<usize> = Vec::new();
        let mut total = 0;
        let mut v = s;
        loop {
            if v == t {
                let push = path.iter().map(|&e| self.cap[e]).min().unwrap();
                total += push;
                let mut cut_at = path.len();
                for (k, &e) in path.iter().enumerate() {
                    self.cap[e] -= push;
                    self.cap[self.rev[e]] += push;
                    if self.cap[e] == 0 && cut_at == path.len() {
                        cut_at = k;
                    }
                }
                path.truncate(cut_at);
                v = match path.last() {
                    Some(&e) => self.to[e] as usize,
                    None => s,
                };
                continue;
            }
            let end = self.head[v + 1];
            while it[v] < end {
                let e = it[v];
                let u = self.to[e] as usize;
                if self.cap[e] > 0 && level[u] == level[v] + 1 {
                    break;
                }
                it[v] += 1;
            }
            if it[v] < end {
                let e = it[v];
                path.push(e);
                v = self.to[e] as usize;
            } else {
                // Dead end: drop v from the level graph and retreat.
                level[v] = -1;
                match path.pop() {
                    Some(e) => {
                        v = self.to[self.rev[e]] as usize;
                        it[v] += 1;
                    }
                    None => return total,
                }
            }
        }
    }
}

/// Solves the min-cut problem exactly.
pub fn solve_cut(problem: &CutProblem) -> Result<CutSolution> {
    let n = problem.len();
    if problem.sink_cap.len() != n {
        return Err(Error::InvalidParameter("source and sink capacity lengths differ".into()));
    }
    let mut total: i128 = 0;
    for &c in problem.source_cap.iter().chain(&problem.sink_cap) {
        if c < 0 {
            return Err(Error::InvalidParameter("negative capacity".into()));
        }
        total = total.saturating_add(c);
    }
    for &(i, j, c) in &problem.pairs {
        if c < 0 || i as usize >= n || j as usize >= n || i == j {
            return Err(Error::InvalidParameter(format!("bad pair ({i}, {j}, {c})")));
        }
        total = total.saturating_add(c.saturating_mul(2));
    }
    if total >= CAPACITY_LIMIT {
        return Err(Error::CapacityOverflow(format!("total capacity {total} too large")));
    }

    // Terminal capacities shared by both sides are paid by every cut.
    let mut value = 0;
    let mut src = problem.source_cap.clone();
    let mut snk = problem.sink_cap.clone();
    let mut pre = vec![0i128; n];
    for i in 0..n {
        let d = src[i].min(snk[i]);
        pre[i] = d;
        value += d;
        src[i] -= d;
        snk[i] -= d;
    }

    let s = n;
    let t = n + 1;
    let mut degree = vec![0usize; n + 2];
    for i in 0..n {
        if src[i] > 0 {
            degree[s] += 1;
            degree[i] += 1;
        }
        if snk[i] > 0 {
            degree[i] += 1;
            degree[t] += 1;
        }
    }
    for &(i, j, c) in &problem.pairs {
        if c > 0 {
            degree[i as usize] += 1;
            degree[j as usize] += 1;
        }
    }
    let mut head = vec![0usize; n + 3];
    for v in 0..n + 2 {
        head[v + 1] = head[v] + degree[v];
    }
    let m = head[n + 2];
    let mut net = Network {
        head: head.clone(),
        to: vec![0; m],
        rev: vec![0; m],
        cap: vec![0; m],
    };
    let mut fill = head;
    let mut add = |net: &mut Network, a: usize, b: usize, c_ab: i128, c_ba: i128| -> usize {
        let ea = fill[a];
        let eb = fill[b];
        fill[a] += 1;
        fill[b] += 1;
        net.to[ea] = b as u32;
        net.to[eb] = a as u32;
        net.cap[ea] = c_ab;
        net.cap[eb] = c_ba;
        net.rev[ea] = eb;
        net.rev[eb] = ea;
        ea
    };
    let mut src_edge = vec![usize::MAX; n];
    let mut snk_edge = vec![usize::MAX; n];
    for i in 0..n {
        if src[i] > 0 {
            src_edge[i] = add(&mut net, s, i, src[i], 0);
        }
        if snk[i] > 0 {
            snk_edge[i] = add(&mut net, i, t, snk[i], 0);
        }
    }
    let pair_edge: Vec<usize> = problem
        .pairs
        .iter()
        .map(|&(i, j, c)| {
            if c > 0 {
                add(&mut net, i as usize, j as usize, c, c)
            } else {
                usize::MAX
            }
        })
        .collect();

    let mut level = vec![-1i32; n + 2];
    while net.bfs_levels(s, t, &mut level) {
        value += net.blocking_flow(s, t, &mut level);
    }

    // Residual reachability from the source.
    let mut from_s = vec![false; n + 2];
    from_s[s] = true;
    let mut queue = VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        for e in net.out(v) {
            let u = net.to[e] as usize;
            if net.cap[e] > 0 && !from_s[u] {
                from_s[u] = true;
                queue.push_back(u);
            }
        }
    }
    // Residual co-reachability to the sink.
    let mut to_t = vec![false; n + 2];
    to_t[t] = true;
    let mut queue = VecDeque::from([t]);
    while let Some(v) = queue.pop_front() {
        for e in net.out(v) {
            let u = net.to[e] as usize;
            if net.cap[net.rev[e]] > 0 && !to_t[u] {
                to_t[u] = true;
                queue.push_back(u);
            }
        }
    }

    let pair_flow = problem
        .pairs
        .iter()
        .zip(&pair_edge)
        .map(|(&(_, _, c), &e)| if e == usize::MAX { 0 } else { c - net.cap[e] })
        .collect();
    let source_flow = (0..n)
        .map(|i| {
            pre[i]
                + if src_edge[i] == usize::MAX {
                    0
                } else {
                    src[i] - net.cap[src_edge[i]]
                }
        })
        .collect();
    let sink_flow = (0..n)
        .map(|i| {
            pre[i]
                + if snk_edge[i] == usize::MAX {
                    0
                } else {
                    snk[i] - net.cap[snk_edge[i]]
                }
        })
        .collect();
    Ok(CutSolution {
        value,
        minimal_source_side: from_s[..n].to_vec(),
        maximal_source_side: to_t[..n].iter().map(|b| !b).collect(),
        pair_flow,
        source_flow,
        sink_flow,
    })
}
