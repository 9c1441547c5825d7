//! Skeleton graph: spur pruning and longest geodesic path extraction.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::mask::{LumenMask, Pixel};

pub(crate) struct SkeletonGraph {
    pub pixels: Vec<Pixel>,
    alive: Vec<bool>,
    adj: Vec<Vec<usize>>,
}

fn step(a: Pixel, b: Pixel) -> f64 {
    if a.row != b.row && a.col != b.col {
        std::f64::consts::SQRT_2
    } else {
        1.0
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then index for determinism
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

enum Walk {
    Junction(Vec<usize>, f64),
    Isolated,
}

impl SkeletonGraph {
    pub fn from_mask(skel: &LumenMask) -> Self {
        let pixels: Vec<Pixel> = skel.foreground().collect();
        let lookup: HashMap<Pixel, usize> =
            pixels.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let adj = pixels
            .iter()
            .map(|p| {
                skel.neighbours(*p)
                    .filter_map(|q| lookup.get(&q).copied())
                    .collect()
            })
            .collect();
        Self {
            alive: vec![true; pixels.len()],
            pixels,
            adj,
        }
    }

    fn live_neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].iter().copied().filter(|&j| self.alive[j])
    }

    fn degree(&self, i: usize) -> usize {
        self.live_neighbours(i).count()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    fn endpoints(&self) -> Vec<usize> {
        (0..self.pixels.len())
            .filter(|&i| self.alive[i] && self.degree(i) == 1)
            .collect()
    }

    fn walk_from(&self, start: usize) -> Walk {
        let mut path = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        let mut len = 0.0;
        loop {
            if cur != start && self.degree(cur) >= 3 {
                path.pop();
                return Walk::Junction(path, len);
            }
            let next = self
                .live_neighbours(cur)
                .find(|&j| j != prev && !path.contains(&j));
            match next {
                None => return Walk::Isolated,
                Some(j) => {
                    len += step(self.pixels[cur], self.pixels[j]);
                    prev = cur;
                    cur = j;
                    path.push(cur);
                }
            }
        }
    }

    /// Removes end branches shorter than `max_len_px` that terminate at a junction, repeating
    /// until nothing changes.
    pub fn prune_spurs(&mut self, max_len_px: f64) {
        loop {
            let mut changed = false;
            for e in self.endpoints() {
                if !self.alive[e] || self.degree(e) != 1 {
                    continue;
                }
                if let Walk::Junction(path, len) = self.walk_from(e) {
                    if len < max_len_px {
                        for i in path {
                            self.alive[i] = false;
                        }
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Single-source geodesic distances with predecessor links.
    fn dijkstra(&self, source: usize) -> (Vec<f64>, Vec<usize>) {
        let n = self.pixels.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry(0.0, source));
        while let Some(Entry(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for j in self.live_neighbours(i) {
                let nd = d + step(self.pixels[i], self.pixels[j]);
                if nd < dist[j] {
                    dist[j] = nd;
                    pred[j] = i;
                    heap.push(Entry(nd, j));
                }
            }
        }
        (dist, pred)
    }

    /// Longest geodesic path between two endpoints of the pruned skeleton, as pixel indices.
    /// Falls back to a double sweep when the skeleton has fewer than two endpoints (a loop).
    pub fn longest_path(&self) -> Vec<usize> {
        let live: Vec<usize> = (0..self.pixels.len()).filter(|&i| self.alive[i]).collect();
        if live.len() <= 1 {
            return live;
        }
        let mut sources = self.endpoints();
        if sources.len() < 2 {
            let (d0, _) = self.dijkstra(live[0]);
            sources = vec![argmax(&d0)];
        }
        let mut best: Option<(f64, usize, Vec<usize>)> = None;
        for &s in &sources {
            let (dist, pred) = self.dijkstra(s);
            let far = argmax(&dist);
            if best.as_ref().is_none_or(|(d, _, _)| dist[far] > *d + 1e-12) {
                best = Some((dist[far], far, pred));
            }
        }
        let (_, mut cur, pred) = best.expect("at least one source");
        let mut path = vec![cur];
        while pred[cur] != usize::MAX {
            cur = pred[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }
}

fn argmax(dist: &[f64]) -> usize {
    let mut best = 0;
    for (i, d) in dist.iter().enumerate() {
        if d.is_finite() && (!dist[best].is_finite() || *d > dist[best]) {
            best = i;
        }
    }
    best
}

/// Euclidean step length between successive path pixels, in pixels.
pub(crate) fn step_len(a: Pixel, b: Pixel) -> f64 {
    step(a, b)
}
