//! Pages and the timestamped edge log every stage produces or consumes.

use crate::error::{Error, Result};

/// Pages are identified by their index in [`EdgeLog::pages`].
pub type PageId = usize;
pub type HostId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub host: HostId,
    pub created_at: f64,
    /// Known for simulated pages, `None` for ingested ones.
    pub quality: Option<f64>,
    pub indegree: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: PageId,
    pub target: PageId,
    pub created_at: f64,
}

/// Append-only record of a growing citation graph.
///
/// Edges are ordered by non-decreasing time, never point to the future and
/// never loop. Parallel edges are allowed. In-degrees are derived from the
/// edges at construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeLog {
    hosts: Vec<String>,
    pages: Vec<Page>,
    urls: Vec<String>,
    edges: Vec<Edge>,
}

impl EdgeLog {
    pub fn new(hosts: Vec<String>, mut pages: Vec<Page>, edges: Vec<Edge>) -> Result<Self> {
        for p in &mut pages {
            p.indegree = 0;
        }
        for (i, p) in pages.iter().enumerate() {
            if p.host >= hosts.len() {
                return Err(Error::InvalidLog(format!(
                    "page {i} references host {} but only {} hosts exist",
                    p.host,
                    hosts.len()
                )));
            }
            if !p.created_at.is_finite() {
                return Err(Error::InvalidLog(format!(
                    "page {i} has non-finite creation time"
                )));
            }
        }
        let mut last = f64::NEG_INFINITY;
        for (k, e) in edges.iter().enumerate() {
            let (Some(src), Some(dst)) = (pages.get(e.source), pages.get(e.target)) else {
                return Err(Error::InvalidLog(format!(
                    "edge {k} references a missing page"
                )));
            };
            if e.source == e.target {
                return Err(Error::InvalidLog(format!("edge {k} is a self-edge")));
            }
            if e.created_at < last {
                return Err(Error::InvalidLog(format!("edge {k} is out of time order")));
            }
            if src.created_at != e.created_at {
                return Err(Error::InvalidLog(format!(
                    "edge {k} time {} differs from its source creation time {}",
                    e.created_at, src.created_at
                )));
            }
            if dst.created_at > e.created_at {
                return Err(Error::InvalidLog(format!("edge {k} points to the future")));
            }
            last = e.created_at;
        }
        for e in &edges {
            pages[e.target].indegree += 1;
        }
        Ok(Self {
            hosts,
            pages,
            urls: Vec::new(),
            edges,
        })
    }

    /// Attaches one URL per page, used by the TSV writer.
    pub fn with_urls(mut self, urls: Vec<String>) -> Result<Self> {
        if urls.len() != self.pages.len() {
            return Err(Error::DimensionMismatch {
                expected: self.pages.len(),
                found: urls.len(),
            });
        }
        self.urls = urls;
        Ok(self)
    }

    pub fn hosts(&self) -> &[String] {
        &self.hosts
    }

    pub fn pages(&self) -> &[Page] {
        &self.pages
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn urls(&self) -> Option<&[String]> {
        if self.urls.is_empty() && !self.pages.is_empty() {
            None
        } else {
            Some(&self.urls)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn host_count(&self) -> usize {
        self.hosts.len()
    }

    /// URL of a page, synthesized from host name and id when none is stored.
    pub fn url(&self, page: PageId) -> String {
        match self.urls.get(page) {
            Some(u) => u.clone(),
            None => format!("http://{}/p{}", self.hosts[self.pages[page].host], page),
        }
    }

    /// Age difference of the endpoints of each edge, in log time units.
    pub fn age_differences(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges
            .iter()
            .map(|e| self.pages[e.source].created_at - self.pages[e.target].created_at)
    }

    /// Page ids sorted by creation time; ties keep id order.
    pub fn pages_by_creation(&self) -> Vec<PageId> {
        let mut ids: Vec<PageId> = (0..self.pages.len()).collect();
        ids.sort_by(|&a, &b| {
            self.pages[a]
                .created_at
                .total_cmp(&self.pages[b].created_at)
        });
        ids
    }
}
