//! Canonical TSV link logs: `source_url \t source_ts \t target_url \t target_ts`.
//!
//! UTF-8, LF line endings, no header, integer epoch seconds.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{Edge, EdgeLog, Page};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogFormat {
    #[default]
    Tsv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLinkRecord {
    pub source_url: String,
    pub source_ts: u64,
    pub target_url: String,
    pub target_ts: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines_read: u64,
    pub edges_kept: u64,
    /// Links whose target is newer than their source.
    pub dropped_future: u64,
    pub dropped_malformed: u64,
    pub distinct_pages: u64,
    pub distinct_hosts: u64,
    pub host_internal_fraction: f64,
}

/// Lowercased authority (`[userinfo@]host[:port]`) of a URL.
pub fn authority(url: &str) -> Option<String> {
    let rest = match url.find("://") {
        Some(i) => &url[i + 3..],
        None => url,
    };
    let end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let auth = &rest[..end];
    (!auth.is_empty()).then(|| auth.to_ascii_lowercase())
}

fn parse_line(line: &str) -> Option<RawLinkRecord> {
    let mut it = line.split('\t');
    let (src, sts, dst, dts) = (it.next()?, it.next()?, it.next()?, it.next()?);
    if it.next().is_some() || src.is_empty() || dst.is_empty() {
        return None;
    }
    authority(src)?;
    authority(dst)?;
    Some(RawLinkRecord {
        source_url: src.to_string(),
        source_ts: sts.trim().parse().ok()?,
        target_url: dst.to_string(),
        target_ts: dts.trim().parse().ok()?,
    })
}

/// Reads a link log, dropping malformed lines and links into the future.
///
/// Pages are identified by exact URL; a page's creation time is the earliest
/// timestamp it carries in any kept line, and each edge takes its source's
/// creation time. A link that points to a newer page under these canonical
/// times also counts as `dropped_future`. Edges are stably sorted by time.
pub fn parse<R: BufRead>(mut input: R, format: LogFormat) -> io::Result<(EdgeLog, IngestReport)> {
    let LogFormat::Tsv = format;
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        report.lines_read += 1;
        let line = std::str::from_utf8(&buf)
            .ok()
            .map(|s| s.trim_end_matches(['\n', '\r']));
        match line.and_then(parse_line) {
            None => report.dropped_malformed += 1,
            Some(r) if r.target_ts > r.source_ts => report.dropped_future += 1,
            Some(r) => records.push(r),
        }
    }

    let mut host_ids: HashMap<String, usize> = HashMap::new();
    let mut hosts: Vec<String> = Vec::new();
    let mut page_ids: HashMap<String, usize> = HashMap::new();
    let mut urls: Vec<String> = Vec::new();
    let mut pages: Vec<Page> = Vec::new();
    let mut intern = |url: &str, ts: u64, pages: &mut Vec<Page>| -> usize {
        if let Some(&id) = page_ids.get(url) {
            let p = &mut pages[id];
            p.created_at = p.created_at.min(ts as f64);
            return id;
        }
        let host_name = authority(url).expect("validated url");
        let host = *host_ids.entry(host_name.clone()).or_insert_with(|| {
            hosts.push(host_name);
            hosts.len() - 1
        });
        let id = pages.len();
        page_ids.insert(url.to_string(), id);
        urls.push(url.to_string());
        pages.push(Page {
            host,
            created_at: ts as f64,
            quality: None,
            indegree: 0,
        });
        id
    };
    let mut pairs = Vec::with_capacity(records.len());
    for r in &records {
        let s = intern(&r.source_url, r.source_ts, &mut pages);
        let t = intern(&r.target_url, r.target_ts, &mut pages);
        pairs.push((s, t));
    }

    let mut edges = Vec::with_capacity(pairs.len());
    for (s, t) in pairs {
        if s == t {
            report.dropped_malformed += 1;
            continue;
        }
        if pages[t].created_at > pages[s].created_at {
            report.dropped_future += 1;
            continue;
        }
        edges.push(Edge {
            source: s,
            target: t,
            created_at: pages[s].created_at,
        });
    }
    edges.sort_by(|a, b| a.created_at.total_cmp(&b.created_at));

    report.edges_kept = edges.len() as u64;
    report.distinct_pages = pages.len() as u64;
    report.distinct_hosts = hosts.len() as u64;
    let internal = edges
        .iter()
        .filter(|e| pages[e.source].host == pages[e.target].host)
        .count();
    report.host_internal_fraction = if edges.is_empty() {
        0.0
    } else {
        internal as f64 / edges.len() as f64
    };

    let log = EdgeLog::new(hosts, pages, edges)
        .and_then(|log| log.with_urls(urls))
        .map_err(to_io)?;
    Ok((log, report))
}

fn to_io(e: crate::error::Error) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

/// Writes the log as canonical TSV, converting times to integer seconds.
pub fn write<W: Write>(log: &EdgeLog, seconds_per_unit: f64, mut out: W) -> io::Result<()> {
    let ts = |t: f64| -> io::Result<u64> {
        let s = (t * seconds_per_unit).round();
        if s >= 0.0 && s < u64::MAX as f64 {
            Ok(s as u64)
        } else {
            Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("timestamp {t} is not representable as epoch seconds"),
            ))
        }
    };
    for e in log.edges() {
        let (s, t) = (&log.pages()[e.source], &log.pages()[e.target]);
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            log.url(e.source),
            ts(s.created_at)?,
            log.url(e.target),
            ts(t.created_at)?
        )?;
    }
    out.flush()
}

/// Convenience wrapper returning the crate error type.
pub fn parse_str(text: &str) -> Result<(EdgeLog, IngestReport)> {
    parse(text.as_bytes(), LogFormat::Tsv)
        .map_err(|e| crate::error::Error::InvalidLog(e.to_string()))
}
