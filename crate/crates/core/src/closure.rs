//! Union-find with congruence closure over labeled edges.
//!
//! Elements carry type sets (dense ids, kept sorted at the representative).
//! [`Closure::run`] unions the targets of any two edges that leave the same
//! class with the same label and whose target classes share a type, until no
//! such pair remains. Pinned elements are never unioned and never take part
//! in the closure as targets.
//!
//! The signature table is keyed by (source class, label, type) and stores
//! one target element per key. When a class loses a union its out- and
//! in-edges are requeued; the winner's in-edges are requeued only if its
//! type set grew. Classes are joined by weight (incident edge count), so each
//! edge is requeued O(log N) times through its endpoints.

use std::collections::HashMap;

pub(crate) struct Closure {
    parent: Vec<u32>,
    types: Vec<Vec<u32>>,
    pinned: Vec<bool>,
    out: Vec<Vec<u32>>,
    inn: Vec<Vec<u32>>,
    edges: Vec<(u32, u32, u32)>,
    sig: HashMap<(u32, u32, u32), u32>,
    queue: Vec<u32>,
    queued: Vec<bool>,
    started: bool,
}

impl Closure {
    pub fn new(types: Vec<Vec<u32>>, pinned: Vec<bool>) -> Self {
        let n = types.len();
        debug_assert_eq!(pinned.len(), n);
        let types = types
            .into_iter()
            .map(|mut t| {
                t.sort_unstable();
                t.dedup();
                t
            })
            .collect();
        Closure {
            parent: (0..n as u32).collect(),
            types,
            pinned,
            out: vec![Vec::new(); n],
            inn: vec![Vec::new(); n],
            edges: Vec::new(),
            sig: HashMap::new(),
            queue: Vec::new(),
            queued: Vec::new(),
            started: false,
        }
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn add_edge(&mut self, src: u32, label: u32, tgt: u32) {
        let e = self.edges.len() as u32;
        self.edges.push((src, label, tgt));
        self.queued.push(false);
        let (s, t) = (self.find(src), self.find(tgt));
        self.out[s as usize].push(e);
        self.inn[t as usize].push(e);
        if self.started {
            self.enqueue(e);
        }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    #[cfg(test)]
    pub fn types(&mut self, x: u32) -> &[u32] {
        let r = self.find(x);
        &self.types[r as usize]
    }

    fn enqueue(&mut self, e: u32) {
        if !self.queued[e as usize] {
            self.queued[e as usize] = true;
            self.queue.push(e);
        }
    }

    /// Joins the classes of `a` and `b`. Returns false if they were already
    /// joined or either is pinned.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb || self.pinned[ra as usize] || self.pinned[rb as usize] {
            return false;
        }
        let w = |c: &Closure, r: u32| c.out[r as usize].len() + c.inn[r as usize].len() + 1;
        let (win, lose) = match w(self, ra).cmp(&w(self, rb)) {
            std::cmp::Ordering::Less => (rb, ra),
            std::cmp::Ordering::Greater => (ra, rb),
            std::cmp::Ordering::Equal => (ra.min(rb), ra.max(rb)),
        };
        let (wi, li) = (win as usize, lose as usize);
        self.parent[li] = win;

        let lose_types = std::mem::take(&mut self.types[li]);
        let before = self.types[wi].len();
        let merged = merge_sorted(&self.types[wi], &lose_types);
        let grew = merged.len() > before;
        self.types[wi] = merged;

        let lose_out = std::mem::take(&mut self.out[li]);
        let lose_in = std::mem::take(&mut self.inn[li]);
        if self.started {
            for &e in lose_out.iter().chain(&lose_in) {
                self.enqueue(e);
            }
            if grew {
                for i in 0..self.inn[wi].len() {
                    let e = self.inn[wi][i];
                    self.enqueue(e);
                }
            }
        }
        self.out[wi].extend(lose_out);
        self.inn[wi].extend(lose_in);
        true
    }

    /// Runs the closure to its fixpoint.
    pub fn run(&mut self) {
        if !self.started {
            self.started = true;
            for e in 0..self.edges.len() as u32 {
                self.enqueue(e);
            }
        }
        while let Some(e) = self.queue.pop() {
            self.queued[e as usize] = false;
            self.process(e);
        }
    }

    fn process(&mut self, e: u32) {
        let (src, label, tgt) = self.edges[e as usize];
        let s = self.find(src);
        let t = self.find(tgt);
        if self.pinned[t as usize] {
            return;
        }
        for i in 0..self.types[t as usize].len() {
            let ty = self.types[t as usize][i];
            match self.sig.get(&(s, label, ty)) {
                Some(&other) => {
                    let ro = self.find(other);
                    if ro != t {
                        self.union(t, ro);
                        self.enqueue(e);
                        return;
                    }
                }
                None => {
                    self.sig.insert((s, label, ty), tgt);
                }
            }
        }
    }
}

fn merge_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
