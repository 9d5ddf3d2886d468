//! Dynamic weighted sampling over the pages of one host.
//!
//! Recency weights `exp(-(t - t_p)/tau)` share the factor `exp(-t/tau)`
//! across all pages, so each page stores `base(p) * exp((t_p - t_ref)/tau)`
//! against a reference time `t_ref` instead. Ratios between pages are then
//! independent of the current time and never need refreshing; `t_ref` only
//! moves forward when a new page's exponent would get close to overflow.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Exponent above which the reference time is moved forward.
pub const REBASE_EXPONENT: f64 = 500.0;

/// Growable Fenwick tree over non-negative weights.
#[derive(Debug, Clone, Default)]
pub struct FenwickTree {
    // 1-based; tree[0] is unused
    tree: Vec<f64>,
}

#[inline]
fn lsb(i: usize) -> usize {
    i & i.wrapping_neg()
}

impl FenwickTree {
    pub fn new() -> Self {
        Self { tree: vec![0.0] }
    }

    pub fn from_weights(weights: &[f64]) -> Self {
        let mut tree = Vec::with_capacity(weights.len() + 1);
        tree.push(0.0);
        tree.extend_from_slice(weights);
        for i in 1..tree.len() {
            let parent = i + lsb(i);
            if parent < tree.len() {
                tree[parent] += tree[i];
            }
        }
        Self { tree }
    }

    pub fn len(&self) -> usize {
        self.tree.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, w: f64) {
        if self.tree.is_empty() {
            self.tree.push(0.0);
        }
        let n = self.tree.len();
        let mut node = w;
        let stop = n - lsb(n);
        let mut j = n - 1;
        while j > stop {
            node += self.tree[j];
            j -= lsb(j);
        }
        self.tree.push(node);
    }

    pub fn add(&mut self, idx: usize, delta: f64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += lsb(i);
        }
    }

    /// Sum of the first `count` weights.
    pub fn prefix(&self, count: usize) -> f64 {
        let mut i = count;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= lsb(i);
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.prefix(self.len())
    }

    /// Smallest index whose inclusive prefix sum exceeds `u`.
    ///
    /// Returns `len()` when `u` is not below the total.
    pub fn find(&self, mut u: f64) -> usize {
        let n = self.len();
        let mut pos = 0;
        let mut step = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    created_at: f64,
    quality: f64,
    degree: u32,
    decay: f64,
}

/// Candidate registry of one host under one attractiveness law.
#[derive(Debug, Clone)]
pub struct HostSamplerState {
    spec: ModelSpec,
    tau: f64,
    d0: f64,
    t_ref: Option<f64>,
    slots: Vec<Slot>,
    weights: Vec<f64>,
    tree: FenwickTree,
    positive: usize,
    rebases: u64,
}

impl HostSamplerState {
    pub fn new(spec: ModelSpec, tau: f64, d0: f64) -> Result<Self> {
        // tau = inf switches the decay off
        if spec.use_recency && !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tau must be > 0, got {tau}"
            )));
        }
        if !(d0 >= 0.0 && d0.is_finite()) {
            return Err(Error::InvalidArgument(format!("d0 must be >= 0, got {d0}")));
        }
        Ok(Self {
            spec,
            tau,
            d0,
            t_ref: None,
            slots: Vec::new(),
            weights: Vec::new(),
            tree: FenwickTree::new(),
            positive: 0,
            rebases: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn rebase_count(&self) -> u64 {
        self.rebases
    }

    pub fn reference_time(&self) -> Option<f64> {
        self.t_ref
    }

    pub fn degree(&self, idx: usize) -> u32 {
        self.slots[idx].degree
    }

    #[inline]
    fn base(&self, s: &Slot) -> f64 {
        let mut b = 1.0;
        if self.spec.use_quality {
            b *= s.quality;
        }
        if self.spec.use_degree {
            b *= s.degree as f64 + self.d0;
        }
        b
    }

    fn decay_at(&self, created_at: f64) -> f64 {
        match (self.spec.use_recency, self.t_ref) {
            (true, Some(t_ref)) => ((created_at - t_ref) / self.tau).exp(),
            _ => 1.0,
        }
    }

    /// Registers a page created at `created_at`. Pages must arrive in time order.
    pub fn insert(&mut self, created_at: f64, quality: f64) -> usize {
        if self.spec.use_recency {
            match self.t_ref {
                None => self.t_ref = Some(created_at),
                Some(t_ref) if (created_at - t_ref) / self.tau > REBASE_EXPONENT => {
                    self.rebase(created_at)
                }
                _ => {}
            }
        }
        let slot = Slot {
            created_at,
            quality,
            degree: 0,
            decay: self.decay_at(created_at),
        };
        let w = self.base(&slot) * slot.decay;
        self.slots.push(slot);
        self.weights.push(w);
        self.tree.push(w);
        if w > 0.0 {
            self.positive += 1;
        }
        if !self.tree.total().is_finite() && self.spec.use_recency {
            self.rebase(created_at);
        }
        self.slots.len() - 1
    }

    /// Records one more incoming link to the page.
    pub fn increment_degree(&mut self, idx: usize) {
        self.slots[idx].degree += 1;
        if self.spec.use_degree {
            let slot = self.slots[idx];
            let w = self.base(&slot) * slot.decay;
            let old = self.weights[idx];
            self.weights[idx] = w;
            self.tree.add(idx, w - old);
            if old <= 0.0 && w > 0.0 {
                self.positive += 1;
            }
        }
    }

    /// Moves the reference time to `now` and recomputes every weight from scratch.
    pub fn rebase(&mut self, now: f64) {
        if !self.spec.use_recency {
            return;
        }
        self.t_ref = Some(now);
        self.positive = 0;
        for i in 0..self.slots.len() {
            let decay = self.decay_at(self.slots[i].created_at);
            self.slots[i].decay = decay;
            let w = self.base(&self.slots[i]) * decay;
            self.weights[i] = w;
            if w > 0.0 {
                self.positive += 1;
            }
        }
        self.tree = FenwickTree::from_weights(&self.weights);
        self.rebases += 1;
    }

    /// Stored (rebased) weight of a page.
    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.tree.total()
    }

    /// Sum of weights over candidates other than `exclude`.
    pub fn total_excluding(&self, exclude: Option<usize>) -> f64 {
        let total = self.tree.total();
        match exclude {
            Some(ex) if ex < self.weights.len() => (total - self.weights[ex]).max(0.0),
            _ => total,
        }
    }

    fn has_candidate(&self, exclude: Option<usize>) -> bool {
        let excluded_positive =
            matches!(exclude, Some(ex) if self.weights.get(ex).is_some_and(|w| *w > 0.0));
        self.positive > usize::from(excluded_positive)
    }

    /// Selection probability of `idx` among all candidates except `exclude`.
    pub fn probability(&self, idx: usize, exclude: Option<usize>) -> Option<f64> {
        if Some(idx) == exclude || !self.has_candidate(exclude) {
            return None;
        }
        let denom = self.total_excluding(exclude);
        (denom > 0.0).then(|| self.weights[idx] / denom)
    }

    /// Draws a page with probability proportional to its weight, never `exclude`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, exclude: Option<usize>) -> Result<usize> {
        if !self.has_candidate(exclude) {
            return Err(Error::NoTarget);
        }
        let w_ex = exclude
            .and_then(|ex| self.weights.get(ex))
            .copied()
            .unwrap_or(0.0);
        let avail = self.total_excluding(exclude);
        let mut u = rng.random::<f64>() * avail;
        if let Some(ex) = exclude {
            if ex < self.weights.len() && u >= self.tree.prefix(ex) {
                u += w_ex;
            }
        }
        let idx = self.tree.find(u);
        if idx < self.weights.len() && self.weights[idx] > 0.0 && Some(idx) != exclude {
            return Ok(idx);
        }
        // rounding at a bucket boundary: fall back to the nearest valid page
        let ok = |i: &usize| self.weights[*i] > 0.0 && Some(*i) != exclude;
        let start = idx.min(self.weights.len() - 1);
        (0..=start)
            .rev()
            .find(ok)
            .or_else(|| (start..self.weights.len()).find(ok))
            .ok_or(Error::NoTarget)
    }

    /// Attractiveness of each page recomputed directly at time `now`.
    pub fn direct_attractiveness(&self, now: f64) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| {
                let mut f = self.base(s);
                if self.spec.use_recency {
                    f *= (-(now - s.created_at) / self.tau).exp();
                }
                f
            })
            .collect()
    }
}
