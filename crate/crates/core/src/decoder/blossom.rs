//! Maximum-weight matching on general graphs (Edmonds' blossom algorithm with dual
//! variables, O(n³)). Integer weights keep all dual arithmetic exact.
//!
//! This follows the classic formulation with S/T labels, nested blossoms stored as
//! cyclic child lists, and least-slack edge tracking per blossom.

/// Returns `mate[v]` (or `None`) for a maximum-weight matching. With
/// `max_cardinality` the matching is maximum-weight among maximum-cardinality ones.
pub fn max_weight_matching(edges: &[(usize, usize, i64)], max_cardinality: bool) -> Vec<Option<usize>> {
    if edges.is_empty() {
        return Vec::new();
    }
    let n = edges.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap();
    let mut m = Matcher::new(n, edges, max_cardinality);
    m.solve();
    (0..n).map(|v| (m.mate[v] >= 0).then(|| m.endpoint[m.mate[v] as usize])).collect()
}

/// Maximum-weight matching on vertices `0..n` together with optimal vertex duals `u` in
/// doubled units: `u >= 0`, every edge `(i, j, w)` not inside a common blossom has
/// `u[i] + u[j] >= 2w` (equality on matched edges), and unmatched vertices have `u = 0`.
pub fn max_weight_matching_with_duals(n: usize, edges: &[(usize, usize, i64)]) -> (Vec<Option<usize>>, Vec<i64>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    MATCHER.with(|cell| {
        let mut m = cell.borrow_mut();
        m.reset(n, edges.iter().copied(), false);
        m.solve();
        let mate = (0..n).map(|v| (m.mate[v] >= 0).then(|| m.endpoint[m.mate[v] as usize])).collect();
        (mate, m.dualvar[..n].to_vec())
    })
}

thread_local! {
    static MATCHER: std::cell::RefCell<Matcher> = std::cell::RefCell::new(Matcher::default());
}

#[derive(Default)]
struct Matcher {
    n: usize,
    edges: Vec<(usize, usize, i64)>,
    max_cardinality: bool,
    endpoint: Vec<usize>,
    /// Incident edge endpoints of vertex `v`: `neighbend[nb_off[v]..nb_off[v + 1]]`.
    nb_off: Vec<usize>,
    neighbend: Vec<usize>,
    mate: Vec<i64>,
    label: Vec<u8>,
    labelend: Vec<i64>,
    inblossom: Vec<usize>,
    blossomparent: Vec<i64>,
    blossomchilds: Vec<Vec<usize>>,
    blossombase: Vec<i64>,
    blossomendps: Vec<Vec<usize>>,
    bestedge: Vec<i64>,
    blossombestedges: Vec<Option<Vec<usize>>>,
    unusedblossoms: Vec<usize>,
    dualvar: Vec<i64>,
    allowedge: Vec<bool>,
    queue: Vec<usize>,
    leaf_buf: Vec<usize>,
    bestedgeto: Vec<i64>,
}

fn wrap(j: i64, len: usize) -> usize {
    j.rem_euclid(len as i64) as usize
}

impl Matcher {
    fn new(n: usize, edges: &[(usize, usize, i64)], max_cardinality: bool) -> Self {
        let mut m = Matcher::default();
        m.reset(n, edges.iter().copied(), max_cardinality);
        m
    }

    /// Reinitialises for a new graph, keeping allocations.
    fn reset(&mut self, n: usize, edges: impl Iterator<Item = (usize, usize, i64)>, max_cardinality: bool) {
        self.n = n;
        self.max_cardinality = max_cardinality;
        self.edges.clear();
        self.edges.extend(edges);
        let maxweight = self.edges.iter().map(|e| e.2).max().unwrap_or(0).max(0);
        self.endpoint.clear();
        for &(i, j, _) in &self.edges {
            self.endpoint.push(i);
            self.endpoint.push(j);
        }
        self.nb_off.clear();
        self.nb_off.resize(n + 1, 0);
        for &(i, j, _) in &self.edges {
            self.nb_off[i + 1] += 1;
            self.nb_off[j + 1] += 1;
        }
        for v in 0..n {
            self.nb_off[v + 1] += self.nb_off[v];
        }
        let mut fill = std::mem::take(&mut self.leaf_buf);
        fill.clear();
        fill.extend_from_slice(&self.nb_off[..n]);
        self.neighbend.clear();
        self.neighbend.resize(2 * self.edges.len(), 0);
        for (k, &(i, j, _)) in self.edges.iter().enumerate() {
            self.neighbend[fill[i]] = 2 * k + 1;
            fill[i] += 1;
            self.neighbend[fill[j]] = 2 * k;
            fill[j] += 1;
        }
        self.leaf_buf = fill;
        let refill = |v: &mut Vec<i64>, len: usize, x: i64| {
            v.clear();
            v.resize(len, x);
        };
        refill(&mut self.mate, n, -1);
        self.label.clear();
        self.label.resize(2 * n, 0);
        refill(&mut self.labelend, 2 * n, -1);
        self.inblossom.clear();
        self.inblossom.extend(0..n);
        refill(&mut self.blossomparent, 2 * n, -1);
        for list in self.blossomchilds.iter_mut().chain(self.blossomendps.iter_mut()) {
            list.clear();
        }
        self.blossomchilds.resize(2 * n, Vec::new());
        self.blossomendps.resize(2 * n, Vec::new());
        self.blossombase.clear();
        self.blossombase.extend((0..n as i64).chain(std::iter::repeat_n(-1, n)));
        refill(&mut self.bestedge, 2 * n, -1);
        self.blossombestedges.clear();
        self.blossombestedges.resize(2 * n, None);
        self.unusedblossoms.clear();
        self.unusedblossoms.extend(n..2 * n);
        refill(&mut self.dualvar, n, maxweight);
        self.dualvar.resize(2 * n, 0);
        self.allowedge.clear();
        self.allowedge.resize(self.edges.len(), false);
        self.queue.clear();
        refill(&mut self.bestedgeto, 2 * n, -1);
    }

    fn slack(&self, k: usize) -> i64 {
        let (i, j, w) = self.edges[k];
        self.dualvar[i] + self.dualvar[j] - 2 * w
    }

    /// Appends the vertices of blossom `b` to `out`.
    fn leaves(&self, b: usize, out: &mut Vec<usize>) {
        if b < self.n {
            out.push(b);
            return;
        }
        let start = out.len();
        out.push(b);
        let mut i = start;
        // expand in place: blossoms are replaced by their children until only vertices remain
        while i < out.len() {
            let x = out[i];
            if x < self.n {
                i += 1;
            } else {
                out.swap_remove(i);
                out.extend_from_slice(&self.blossomchilds[x]);
            }
        }
    }

    /// Vertices of blossom `b`, in a buffer the caller must return with `put_leaves`.
    fn take_leaves(&mut self, b: usize) -> Vec<usize> {
        let mut out = std::mem::take(&mut self.leaf_buf);
        out.clear();
        self.leaves(b, &mut out);
        out
    }

    fn put_leaves(&mut self, buf: Vec<usize>) {
        if buf.capacity() > self.leaf_buf.capacity() {
            self.leaf_buf = buf;
        }
    }

    fn assign_label(&mut self, w: usize, t: u8, p: i64) {
        let mut w = w;
        let mut t = t;
        let mut p = p;
        loop {
            let b = self.inblossom[w];
            debug_assert!(self.label[w] == 0 && self.label[b] == 0);
            self.label[w] = t;
            self.label[b] = t;
            self.labelend[w] = p;
            self.labelend[b] = p;
            self.bestedge[w] = -1;
            self.bestedge[b] = -1;
            if t == 1 {
                let mut q = std::mem::take(&mut self.queue);
                self.leaves(b, &mut q);
                self.queue = q;
                return;
            }
            let base = self.blossombase[b] as usize;
            let mb = self.mate[base];
            debug_assert!(mb >= 0);
            w = self.endpoint[mb as usize];
            t = 1;
            p = mb ^ 1;
        }
    }

    fn scan_blossom(&mut self, v: usize, w: usize) -> i64 {
        let mut path = Vec::new();
        let mut base = -1;
        let mut v = v as i64;
        let mut w = w as i64;
        while v != -1 || w != -1 {
            let mut b = self.inblossom[v as usize];
            if self.label[b] & 4 != 0 {
                base = self.blossombase[b];
                break;
            }
            path.push(b);
            self.label[b] = 5;
            if self.labelend[b] == -1 {
                v = -1;
            } else {
                let vv = self.endpoint[self.labelend[b] as usize];
                b = self.inblossom[vv];
                v = self.endpoint[self.labelend[b] as usize] as i64;
            }
            if w != -1 {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = 1;
        }
        base
    }

    fn add_blossom(&mut self, base: usize, k: usize) {
        let (mut v, mut w, _) = self.edges[k];
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];
        let b = self.unusedblossoms.pop().expect("blossom slot");
        self.blossombase[b] = base as i64;
        self.blossomparent[b] = -1;
        self.blossomparent[bb] = b as i64;
        let mut path = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossomparent[bv] = b as i64;
            path.push(bv);
            endps.push(self.labelend[bv] as usize);
            v = self.endpoint[self.labelend[bv] as usize];
            bv = self.inblossom[v];
        }
        path.push(bb);
        path.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossomparent[bw] = b as i64;
            path.push(bw);
            endps.push((self.labelend[bw] ^ 1) as usize);
            w = self.endpoint[self.labelend[bw] as usize];
            bw = self.inblossom[w];
        }
        self.label[b] = 1;
        self.labelend[b] = self.labelend[bb];
        self.dualvar[b] = 0;
        self.blossomchilds[b] = path.clone();
        self.blossomendps[b] = endps;
        let leaves = self.take_leaves(b);
        for &v in &leaves {
            if self.label[self.inblossom[v]] == 2 {
                self.queue.push(v);
            }
            self.inblossom[v] = b;
        }
        self.put_leaves(leaves);
        let mut bestedgeto = std::mem::take(&mut self.bestedgeto);
        let mut touched = Vec::new();
        let mut consider = |m: &Self, k: usize, bestedgeto: &mut Vec<i64>| {
            let (i, j, _) = m.edges[k];
            let j = if m.inblossom[j] == b { i } else { j };
            let bj = m.inblossom[j];
            if bj != b && m.label[bj] == 1 {
                if bestedgeto[bj] == -1 {
                    touched.push(bj);
                    bestedgeto[bj] = k as i64;
                } else if m.slack(k) < m.slack(bestedgeto[bj] as usize) {
                    bestedgeto[bj] = k as i64;
                }
            }
        };
        for &bv in &path {
            match self.blossombestedges[bv].take() {
                None => {
                    let leaves = self.take_leaves(bv);
                    for &v in &leaves {
                        for &p in &self.neighbend[self.nb_off[v]..self.nb_off[v + 1]] {
                            consider(self, p / 2, &mut bestedgeto);
                        }
                    }
                    self.put_leaves(leaves);
                }
                Some(list) => {
                    for k in list {
                        consider(self, k, &mut bestedgeto);
                    }
                }
            }
            self.bestedge[bv] = -1;
        }
        touched.sort_unstable();
        let list: Vec<usize> = touched.iter().map(|&bj| bestedgeto[bj] as usize).collect();
        for &bj in &touched {
            bestedgeto[bj] = -1;
        }
        self.bestedgeto = bestedgeto;
        self.bestedge[b] = -1;
        for &k in &list {
            if self.bestedge[b] == -1 || self.slack(k) < self.slack(self.bestedge[b] as usize) {
                self.bestedge[b] = k as i64;
            }
        }
        self.blossombestedges[b] = Some(list);
    }

    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        let childs = std::mem::take(&mut self.blossomchilds[b]);
        for &s in &childs {
            self.blossomparent[s] = -1;
            if s < self.n {
                self.inblossom[s] = s;
            } else if endstage && self.dualvar[s] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                let leaves = self.take_leaves(s);
                for &v in &leaves {
                    self.inblossom[v] = s;
                }
                self.put_leaves(leaves);
            }
        }
        if !endstage && self.label[b] == 2 {
            let len = childs.len();
            let endps = std::mem::take(&mut self.blossomendps[b]);
            let entrychild = self.inblossom[self.endpoint[(self.labelend[b] ^ 1) as usize]];
            let mut j = childs.iter().position(|&c| c == entrychild).unwrap() as i64;
            let (jstep, endptrick): (i64, i64) = if j & 1 == 1 {
                j -= len as i64;
                (1, 0)
            } else {
                (-1, 1)
            };
            let mut p = self.labelend[b];
            while j != 0 {
                let e = self.endpoint[(p ^ 1) as usize];
                self.label[e] = 0;
                let q = endps[wrap(j - endptrick, len)] as i64;
                let e2 = self.endpoint[(q ^ endptrick ^ 1) as usize];
                self.label[e2] = 0;
                self.assign_label(e, 2, p);
                self.allowedge[(q / 2) as usize] = true;
                j += jstep;
                p = endps[wrap(j - endptrick, len)] as i64 ^ endptrick;
                self.allowedge[(p / 2) as usize] = true;
                j += jstep;
            }
            let bv = childs[wrap(j, len)];
            let e = self.endpoint[(p ^ 1) as usize];
            self.label[e] = 2;
            self.label[bv] = 2;
            self.labelend[e] = p;
            self.labelend[bv] = p;
            self.bestedge[bv] = -1;
            j += jstep;
            while childs[wrap(j, len)] != entrychild {
                let bv = childs[wrap(j, len)];
                if self.label[bv] == 1 {
                    j += jstep;
                    continue;
                }
                let leaves = self.take_leaves(bv);
                let reached = leaves.iter().copied().find(|&v| self.label[v] != 0);
                self.put_leaves(leaves);
                if let Some(v) = reached {
                    debug_assert_eq!(self.label[v], 2);
                    self.label[v] = 0;
                    let mb = self.mate[self.blossombase[bv] as usize];
                    let e = self.endpoint[mb as usize];
                    self.label[e] = 0;
                    let le = self.labelend[v];
                    self.assign_label(v, 2, le);
                }
                j += jstep;
            }
        }
        self.label[b] = u8::MAX;
        self.labelend[b] = -1;
        self.blossomchilds[b] = Vec::new();
        self.blossomendps[b] = Vec::new();
        self.blossombase[b] = -1;
        self.blossombestedges[b] = None;
        self.bestedge[b] = -1;
        self.unusedblossoms.push(b);
    }

    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossomparent[t] != b as i64 {
            t = self.blossomparent[t] as usize;
        }
        if t >= self.n {
            self.augment_blossom(t, v);
        }
        let len = self.blossomchilds[b].len();
        let i = self.blossomchilds[b].iter().position(|&c| c == t).unwrap();
        let mut j = i as i64;
        let (jstep, endptrick): (i64, i64) = if i & 1 == 1 {
            j -= len as i64;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t = self.blossomchilds[b][wrap(j, len)];
            let p = self.blossomendps[b][wrap(j - endptrick, len)] as i64 ^ endptrick;
            if t >= self.n {
                let e = self.endpoint[p as usize];
                self.augment_blossom(t, e);
            }
            j += jstep;
            let t = self.blossomchilds[b][wrap(j, len)];
            if t >= self.n {
                let e = self.endpoint[(p ^ 1) as usize];
                self.augment_blossom(t, e);
            }
            let e0 = self.endpoint[p as usize];
            let e1 = self.endpoint[(p ^ 1) as usize];
            self.mate[e0] = p ^ 1;
            self.mate[e1] = p;
        }
        self.blossomchilds[b].rotate_left(i);
        self.blossomendps[b].rotate_left(i);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        debug_assert_eq!(self.blossombase[b], v as i64);
    }

    fn augment_matching(&mut self, k: usize) {
        let (v, w, _) = self.edges[k];
        for (s0, p0) in [(v, 2 * k as i64 + 1), (w, 2 * k as i64)] {
            let mut s = s0;
            let mut p = p0;
            loop {
                let bs = self.inblossom[s];
                if bs >= self.n {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.labelend[bs] == -1 {
                    break;
                }
                let t = self.endpoint[self.labelend[bs] as usize];
                let bt = self.inblossom[t];
                s = self.endpoint[self.labelend[bt] as usize];
                let j = self.endpoint[(self.labelend[bt] ^ 1) as usize];
                if bt >= self.n {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.labelend[bt];
                p = self.labelend[bt] ^ 1;
            }
        }
    }

    fn solve(&mut self) {
        let n = self.n;
        for _ in 0..n {
            self.label.fill(0);
            self.bestedge.fill(-1);
            for b in n..2 * n {
                self.blossombestedges[b] = None;
            }
            self.allowedge.fill(false);
            self.queue.clear();
            for v in 0..n {
                if self.mate[v] == -1 && self.label[self.inblossom[v]] == 0 {
                    self.assign_label(v, 1, -1);
                }
            }
            let mut augmented = false;
            loop {
                while !augmented {
                    let Some(v) = self.queue.pop() else { break };
                    for idx in self.nb_off[v]..self.nb_off[v + 1] {
                        let p = self.neighbend[idx];
                        let k = p / 2;
                        let w = self.endpoint[p];
                        if self.inblossom[v] == self.inblossom[w] {
                            continue;
                        }
                        let mut kslack = 0;
                        if !self.allowedge[k] {
                            kslack = self.slack(k);
                            if kslack <= 0 {
                                self.allowedge[k] = true;
                            }
                        }
                        let bw = self.inblossom[w];
                        if self.allowedge[k] {
                            if self.label[bw] == 0 {
                                self.assign_label(w, 2, (p ^ 1) as i64);
                            } else if self.label[bw] == 1 {
                                let base = self.scan_blossom(v, w);
                                if base >= 0 {
                                    self.add_blossom(base as usize, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == 0 {
                                self.label[w] = 2;
                                self.labelend[w] = (p ^ 1) as i64;
                            }
                        } else if self.label[bw] == 1 {
                            let b = self.inblossom[v];
                            if self.bestedge[b] == -1 || kslack < self.slack(self.bestedge[b] as usize) {
                                self.bestedge[b] = k as i64;
                            }
                        } else if self.label[w] == 0
                            && (self.bestedge[w] == -1 || kslack < self.slack(self.bestedge[w] as usize))
                        {
                            self.bestedge[w] = k as i64;
                        }
                    }
                }
                if augmented {
                    break;
                }

                let mut deltatype = -1;
                let mut delta = 0i64;
                let mut deltaedge = 0usize;
                let mut deltablossom = 0usize;
                if !self.max_cardinality {
                    deltatype = 1;
                    delta = *self.dualvar[..n].iter().min().unwrap();
                }
                for v in 0..n {
                    if self.label[self.inblossom[v]] == 0 && self.bestedge[v] != -1 {
                        let d = self.slack(self.bestedge[v] as usize);
                        if deltatype == -1 || d < delta {
                            delta = d;
                            deltatype = 2;
                            deltaedge = self.bestedge[v] as usize;
                        }
                    }
                }
                for b in 0..2 * n {
                    if self.blossomparent[b] == -1 && self.label[b] == 1 && self.bestedge[b] != -1 {
                        let kslack = self.slack(self.bestedge[b] as usize);
                        debug_assert_eq!(kslack % 2, 0);
                        let d = kslack / 2;
                        if deltatype == -1 || d < delta {
                            delta = d;
                            deltatype = 3;
                            deltaedge = self.bestedge[b] as usize;
                        }
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] >= 0
                        && self.blossomparent[b] == -1
                        && self.label[b] == 2
                        && (deltatype == -1 || self.dualvar[b] < delta)
                    {
                        delta = self.dualvar[b];
                        deltatype = 4;
                        deltablossom = b;
                    }
                }
                if deltatype == -1 {
                    deltatype = 1;
                    delta = (*self.dualvar[..n].iter().min().unwrap()).max(0);
                }

                for v in 0..n {
                    match self.label[self.inblossom[v]] {
                        1 => self.dualvar[v] -= delta,
                        2 => self.dualvar[v] += delta,
                        _ => {}
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] >= 0 && self.blossomparent[b] == -1 {
                        match self.label[b] {
                            1 => self.dualvar[b] += delta,
                            2 => self.dualvar[b] -= delta,
                            _ => {}
                        }
                    }
                }

                match deltatype {
                    1 => break,
                    2 => {
                        self.allowedge[deltaedge] = true;
                        let (mut i, j, _) = self.edges[deltaedge];
                        if self.label[self.inblossom[i]] == 0 {
                            i = j;
                        }
                        self.queue.push(i);
                    }
                    3 => {
                        self.allowedge[deltaedge] = true;
                        let (i, _, _) = self.edges[deltaedge];
                        self.queue.push(i);
                    }
                    _ => self.expand_blossom(deltablossom, false),
                }
            }
            if !augmented {
                break;
            }
            for b in n..2 * n {
                if self.blossomparent[b] == -1 && self.blossombase[b] >= 0 && self.label[b] == 1 && self.dualvar[b] == 0 {
                    self.expand_blossom(b, true);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weight(edges: &[(usize, usize, i64)], mate: &[Option<usize>]) -> i64 {
        edges
            .iter()
            .filter(|&&(i, j, _)| mate[i] == Some(j))
            .map(|e| e.2)
            .sum()
    }

    fn brute(n: usize, edges: &[(usize, usize, i64)], max_card: bool) -> (usize, i64) {
        // best (cardinality, weight) over all matchings, by recursion on the lowest vertex
        fn rec(
            used: &mut Vec<bool>,
            adj: &Vec<Vec<(usize, i64)>>,
            start: usize,
            card: usize,
            w: i64,
            best: &mut Vec<(usize, i64)>,
        ) {
            let v = (start..used.len()).find(|&v| !used[v]);
            let Some(v) = v else {
                best.push((card, w));
                return;
            };
            used[v] = true;
            rec(used, adj, v + 1, card, w, best);
            for &(u, wt) in &adj[v] {
                if !used[u] {
                    used[u] = true;
                    rec(used, adj, v + 1, card + 1, w + wt, best);
                    used[u] = false;
                }
            }
            used[v] = false;
        }
        let mut adj = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        let mut all = Vec::new();
        rec(&mut vec![false; n], &adj, 0, 0, 0, &mut all);
        if max_card {
            let c = all.iter().map(|x| x.0).max().unwrap();
            (c, all.iter().filter(|x| x.0 == c).map(|x| x.1).max().unwrap())
        } else {
            let w = all.iter().map(|x| x.1).max().unwrap();
            (0, w)
        }
    }

    #[test]
    fn small_cases() {
        assert_eq!(max_weight_matching(&[(0, 1, 1)], false), vec![Some(1), Some(0)]);
        let e = [(1, 2, 10), (2, 3, 11)];
        assert_eq!(max_weight_matching(&e, false), vec![None, None, Some(3), Some(2)]);
        let e = [(1, 2, 5), (2, 3, 11), (3, 4, 5)];
        assert_eq!(max_weight_matching(&e, false), vec![None, None, Some(3), Some(2), None]);
        assert_eq!(max_weight_matching(&e, true), vec![None, Some(2), Some(1), Some(4), Some(3)]);
    }

    fn mates(v: &[i64]) -> Vec<Option<usize>> {
        v.iter().map(|&x| (x >= 0).then_some(x as usize)).collect()
    }

    #[test]
    fn blossom_cases() {
        let cases: Vec<(Vec<(usize, usize, i64)>, Vec<i64>)> = vec![
            (vec![(1, 2, 8), (1, 3, 9), (2, 3, 10), (3, 4, 7)], vec![-1, 2, 1, 4, 3]),
            (
                vec![(1, 2, 8), (1, 3, 9), (2, 3, 10), (3, 4, 7), (1, 6, 5), (4, 5, 6)],
                vec![-1, 6, 3, 2, 5, 4, 1],
            ),
            (
                vec![(1, 2, 9), (1, 3, 8), (2, 3, 10), (1, 4, 5), (4, 5, 4), (1, 6, 3)],
                vec![-1, 6, 3, 2, 5, 4, 1],
            ),
            (
                vec![(1, 2, 9), (1, 3, 9), (2, 3, 10), (2, 4, 8), (3, 5, 8), (4, 5, 10), (5, 6, 6)],
                vec![-1, 3, 4, 1, 2, 6, 5],
            ),
            (
                vec![(1, 2, 23), (1, 5, 22), (1, 6, 15), (2, 3, 25), (3, 4, 22), (4, 5, 25), (4, 8, 14), (5, 7, 13)],
                vec![-1, 6, 3, 2, 8, 7, 1, 5, 4],
            ),
        ];
        for (edges, expected) in cases {
            let m = max_weight_matching(&edges, false);
            assert_eq!(m, mates(&expected), "{edges:?}");
            assert_eq!(weight(&edges, &m), brute(m.len(), &edges, false).1);
        }
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..400 {
            let n = rng.random_range(2..=10);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.5) {
                        edges.push((i, j, rng.random_range(1..30)));
                    }
                }
            }
            if edges.is_empty() {
                continue;
            }
            let nv = edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap();
            for max_card in [false, true] {
                let m = max_weight_matching(&edges, max_card);
                for (v, &mv) in m.iter().enumerate() {
                    if let Some(u) = mv {
                        assert_eq!(m[u], Some(v));
                    }
                }
                let card = m.iter().filter(|x| x.is_some()).count() / 2;
                let (bc, bw) = brute(nv, &edges, max_card);
                assert_eq!(weight(&edges, &m), bw, "trial {trial} max_card {max_card}");
                if max_card {
                    assert_eq!(card, bc);
                }
            }
        }
    }

    #[test]
    fn duals_are_feasible_and_complementary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..400 {
            let n = rng.random_range(2..=10);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.5) {
                        edges.push((i, j, rng.random_range(1..40)));
                    }
                }
            }
            let (mate, u) = max_weight_matching_with_duals(n, &edges);
            let best = if edges.is_empty() { 0 } else { brute(n, &edges, false).1 };
            assert_eq!(weight(&edges, &mate), best, "trial {trial}");
            for v in 0..n {
                assert!(u[v] >= 0);
                if mate[v].is_none() {
                    assert_eq!(u[v], 0, "trial {trial}");
                }
            }
        }
    }

    #[test]
    fn split_solutions_certified_by_duals_are_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut certified = 0;
        for trial in 0..600 {
            let n = rng.random_range(2..=10);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.4) {
                        edges.push((i, j, rng.random_range(1..40)));
                    }
                }
            }
            if edges.is_empty() {
                continue;
            }
            let side: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let inner: Vec<_> = edges.iter().copied().filter(|&(i, j, _)| side[i] == side[j]).collect();
            let (mate, u) = max_weight_matching_with_duals(n, &inner);
            let ok = edges.iter().all(|&(i, j, w)| side[i] == side[j] || u[i] + u[j] >= 2 * w);
            if ok {
                certified += 1;
                assert_eq!(weight(&edges, &mate), brute(n, &edges, false).1, "trial {trial}");
            }
        }
        assert!(certified > 50, "{certified}");
    }
}
