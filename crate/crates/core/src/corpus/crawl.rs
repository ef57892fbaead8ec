//! Repository search against a code-hosting API.
//!
//! Search endpoints cap every query at 1,000 results, so the star and size
//! ranges are bisected until each sub-query fits under the cap.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{filter_manifests, license_evidence, RepoManifest};
use crate::http::{HttpClient, HttpError};

pub const SEARCH_RESULT_CAP: u64 = 1000;
const PER_PAGE: u64 = 100;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepoHit {
    /// `owner/name`.
    pub full_name: String,
    pub stars: u64,
    pub size_kb: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchPage {
    pub total_count: u64,
    pub items: Vec<RepoHit>,
}

/// Inclusive ranges; `None` upper bounds are open.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchRange {
    pub stars: (u64, Option<u64>),
    pub size_kb: (u64, u64),
}

pub trait SearchApi: Sync {
    /// One page (1-based) of Python repositories in `range`, most-starred first.
    fn search(&self, range: &SearchRange, page: u64, per_page: u64) -> Result<SearchPage, HttpError>;
    /// README text, or `None` when the repository has none.
    fn readme(&self, full_name: &str) -> Result<Option<String>, HttpError>;
}

#[derive(Clone, Debug, Serialize)]
pub struct CrawlConfig {
    pub host: String,
    pub min_stars: u64,
    pub max_size_kb: u64,
    pub require_license: bool,
    pub workers: usize,
    pub retrieval_date: NaiveDate,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CrawlReport {
    pub queries: u64,
    pub hits: u64,
    pub without_readme: u64,
    pub without_license: u64,
    /// Ranges that still exceeded the search cap at single-star,
    /// single-kilobyte width; their results are incomplete.
    pub truncated_ranges: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CrawlError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CrawlError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, CrawlError::Http(e) if e.is_retriable())
    }
}

impl SearchRange {
    pub fn query(&self) -> String {
        let stars = match self.stars {
            (lo, None) => format!("stars:>={lo}"),
            (lo, Some(hi)) => format!("stars:{lo}..{hi}"),
        };
        format!(
            "language:python {stars} size:{}..{}",
            self.size_kb.0, self.size_kb.1
        )
    }
}

fn collect_range(
    api: &dyn SearchApi,
    range: SearchRange,
    out: &mut BTreeMap<String, RepoHit>,
    report: &mut CrawlReport,
) -> Result<(), HttpError> {
    let first = api.search(&range, 1, PER_PAGE)?;
    report.queries += 1;
    if first.total_count > SEARCH_RESULT_CAP {
        let (slo, shi) = range.stars;
        let shi = match shi {
            Some(h) => h,
            None => first.items.first().map_or(slo, |h| h.stars.max(slo)),
        };
        let (zlo, zhi) = range.size_kb;
        if shi > slo {
            let mid = slo + (shi - slo) / 2;
            for stars in [(slo, Some(mid)), (mid + 1, Some(shi))] {
                collect_range(api, SearchRange { stars, ..range }, out, report)?;
            }
            return Ok(());
        }
        if zhi > zlo {
            let mid = zlo + (zhi - zlo) / 2;
            for size_kb in [(zlo, mid), (mid + 1, zhi)] {
                let sub = SearchRange {
                    stars: (slo, Some(shi)),
                    size_kb,
                };
                collect_range(api, sub, out, report)?;
            }
            return Ok(());
        }
        tracing::warn!(query = %range.query(), total = first.total_count, "search range truncated");
        report.truncated_ranges.push(range.query());
    }
    let pages = first.total_count.min(SEARCH_RESULT_CAP).div_ceil(PER_PAGE);
    let mut page_items = first.items;
    let mut page = 1;
    loop {
        for hit in page_items {
            out.entry(hit.full_name.clone()).or_insert(hit);
        }
        page += 1;
        if page > pages {
            break;
        }
        let next = api.search(&range, page, PER_PAGE)?;
        report.queries += 1;
        if next.items.is_empty() {
            break;
        }
        page_items = next.items;
    }
    Ok(())
}

/// Searches, checks each README for license evidence, and returns manifests
/// satisfying both thresholds, sorted by identifier.
pub fn crawl_repositories(
    api: &dyn SearchApi,
    config: &CrawlConfig,
) -> Result<(Vec<RepoManifest>, CrawlReport), CrawlError> {
    let mut report = CrawlReport::default();
    let mut hits = BTreeMap::new();
    let range = SearchRange {
        stars: (config.min_stars, None),
        size_kb: (0, config.max_size_kb),
    };
    collect_range(api, range, &mut hits, &mut report)?;
    report.hits = hits.len() as u64;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| CrawlError::Pool(e.to_string()))?;
    let hits: Vec<RepoHit> = hits.into_values().collect();
    let readmes: Vec<Result<Option<String>, HttpError>> = pool.install(|| {
        hits.par_iter()
            .map(|h| {
                if config.require_license {
                    api.readme(&h.full_name)
                } else {
                    Ok(None)
                }
            })
            .collect()
    });

    let mut manifests = Vec::new();
    for (hit, readme) in hits.into_iter().zip(readmes) {
        let evidence = match readme? {
            Some(text) => license_evidence(&text),
            None if config.require_license => {
                report.without_readme += 1;
                continue;
            }
            None => None,
        };
        if config.require_license && evidence.is_none() {
            report.without_license += 1;
            continue;
        }
        manifests.push(RepoManifest {
            identifier: format!("{}/{}", config.host, hit.full_name),
            stars: hit.stars,
            size_kb: hit.size_kb,
            license_evidence: evidence,
            retrieval_date: config.retrieval_date,
        });
    }
    Ok((
        filter_manifests(manifests, config.min_stars, config.max_size_kb),
        report,
    ))
}

/// The GitHub REST API.
pub struct GithubApi {
    client: HttpClient,
    base: String,
}

impl GithubApi {
    pub fn new(client: HttpClient, base: impl Into<String>) -> Self {
        Self {
            client,
            base: base.into().trim_end_matches('/').to_owned(),
        }
    }
}

#[derive(Deserialize)]
struct GithubSearch {
    total_count: u64,
    items: Vec<GithubRepo>,
}

#[derive(Deserialize)]
struct GithubRepo {
    full_name: String,
    stargazers_count: u64,
    size: u64,
}

impl SearchApi for GithubApi {
    fn search(&self, range: &SearchRange, page: u64, per_page: u64) -> Result<SearchPage, HttpError> {
        let url = format!(
            "{}/search/repositories?q={}&sort=stars&order=desc&per_page={per_page}&page={page}",
            self.base,
            encode_query(&range.query())
        );
        let value = self
            .client
            .get_json(&url, &[("Accept", "application/vnd.github+json")])?;
        let parsed: GithubSearch =
            serde_json::from_value(value).map_err(|e| HttpError::Decode {
                url: url.clone(),
                message: e.to_string(),
            })?;
        Ok(SearchPage {
            total_count: parsed.total_count,
            items: parsed
                .items
                .into_iter()
                .map(|r| RepoHit {
                    full_name: r.full_name,
                    stars: r.stargazers_count,
                    size_kb: r.size,
                })
                .collect(),
        })
    }

    fn readme(&self, full_name: &str) -> Result<Option<String>, HttpError> {
        let url = format!("{}/repos/{full_name}/readme", self.base);
        match self
            .client
            .get_text(&url, &[("Accept", "application/vnd.github.raw+json")])
        {
            Ok(r) => Ok(Some(r.body)),
            Err(e) if e.status() == Some(404) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn encode_query(q: &str) -> String {
    let mut out = String::with_capacity(q.len());
    for b in q.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(b as char)
            }
            b' ' => out.push('+'),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    /// An in-memory search index honouring ranges, paging and the cap.
    struct FakeIndex {
        repos: Vec<RepoHit>,
        readmes: BTreeMap<String, String>,
        queries: Mutex<Vec<String>>,
    }

    impl FakeIndex {
        fn new(repos: Vec<RepoHit>) -> Self {
            Self {
                repos,
                readmes: BTreeMap::new(),
                queries: Mutex::new(Vec::new()),
            }
        }
    }

    impl SearchApi for FakeIndex {
        fn search(&self, range: &SearchRange, page: u64, per_page: u64) -> Result<SearchPage, HttpError> {
            self.queries.lock().unwrap().push(range.query());
            let mut matching: Vec<_> = self
                .repos
                .iter()
                .filter(|r| {
                    r.stars >= range.stars.0
                        && range.stars.1.is_none_or(|h| r.stars <= h)
                        && r.size_kb >= range.size_kb.0
                        && r.size_kb <= range.size_kb.1
                })
                .cloned()
                .collect();
            matching.sort_by_key(|r| std::cmp::Reverse(r.stars));
            let total_count = matching.len() as u64;
            let start = ((page - 1) * per_page) as usize;
            let items = if start as u64 >= SEARCH_RESULT_CAP {
                Vec::new()
            } else {
                matching.into_iter().skip(start).take(per_page as usize).collect()
            };
            Ok(SearchPage { total_count, items })
        }

        fn readme(&self, full_name: &str) -> Result<Option<String>, HttpError> {
            Ok(self.readmes.get(full_name).cloned())
        }
    }

    fn config(min_stars: u64, max_size_kb: u64, require_license: bool) -> CrawlConfig {
        CrawlConfig {
            host: "github.com".into(),
            min_stars,
            max_size_kb,
            require_license,
            workers: 4,
            retrieval_date: NaiveDate::from_ymd_opt(2022, 12, 16).unwrap(),
        }
    }

    fn hit(name: &str, stars: u64, size_kb: u64) -> RepoHit {
        RepoHit {
            full_name: name.into(),
            stars,
            size_kb,
        }
    }

    #[test]
    fn bisection_recovers_everything_past_the_cap() {
        let repos: Vec<_> = (0..2500u64)
            .map(|i| hit(&format!("o/r{i:04}"), 100 + i % 37, 1 + (i * 7919) % 5000))
            .collect();
        let api = FakeIndex::new(repos);
        let (manifests, report) = crawl_repositories(&api, &config(100, 204_800, false)).unwrap();
        assert_eq!(manifests.len(), 2500);
        assert!(report.truncated_ranges.is_empty());
        assert!(manifests.windows(2).all(|w| w[0].identifier < w[1].identifier));
        assert!(report.queries > 3);
    }

    #[test]
    fn filters_are_sound_and_inclusive() {
        let mut api = FakeIndex::new(vec![
            hit("o/a", 50, 10),
            hit("o/b", 100, 10),
            hit("o/c", 900, 204_800),
            hit("o/d", 900, 204_801),
        ]);
        for n in ["o/a", "o/b", "o/c", "o/d"] {
            api.readmes.insert(n.into(), "Licensed under CC-BY-4.0".into());
        }
        let (m, _) = crawl_repositories(&api, &config(100, 204_800, true)).unwrap();
        let ids: Vec<_> = m.iter().map(|m| m.identifier.as_str()).collect();
        assert_eq!(ids, ["github.com/o/b", "github.com/o/c"]);
        assert_eq!(m[0].license_evidence.as_deref(), Some("CC-BY-4.0"));
        let (m, _) = crawl_repositories(&api, &config(0, 0, true)).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn license_requirement_drops_and_counts() {
        let mut api = FakeIndex::new(vec![hit("o/a", 200, 1), hit("o/b", 200, 1), hit("o/c", 200, 1)]);
        api.readmes.insert("o/a".into(), "MIT".into());
        api.readmes
            .insert("o/b".into(), "https://creativecommons.org/licenses/by/4.0/".into());
        let (m, report) = crawl_repositories(&api, &config(100, 10, true)).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(report.without_license, 1);
        assert_eq!(report.without_readme, 1);
    }

    #[test]
    fn degenerate_range_is_reported_not_hidden() {
        let repos: Vec<_> = (0..1200).map(|i| hit(&format!("o/r{i}"), 150, 3)).collect();
        let api = FakeIndex::new(repos);
        let (m, report) = crawl_repositories(&api, &config(100, 10, false)).unwrap();
        assert_eq!(m.len(), 1000);
        assert_eq!(report.truncated_ranges.len(), 1);
    }

    #[test]
    fn github_adapter_against_fake_server() {
        use crate::http::{testing::serve, ClientConfig, RateLimiter, RetryPolicy};
        use std::sync::Arc;
        let server = serve(|_, path, _| {
            if path.starts_with("/search/repositories") {
                assert!(path.contains("q=language%3Apython+stars%3A%3E%3D100+size%3A0..10"), "{path}");
                (
                    200,
                    r#"{"total_count":1,"items":[{"full_name":"o/a","stargazers_count":120,"size":4}]}"#.into(),
                )
            } else if path == "/repos/o/a/readme" {
                (200, "cc by 4.0".into())
            } else {
                (404, "{}".into())
            }
        });
        let client = HttpClient::new(
            ClientConfig {
                token: None,
                retry: RetryPolicy::none(),
                ..ClientConfig::default()
            },
            Arc::new(RateLimiter::unlimited()),
        )
        .unwrap();
        let api = GithubApi::new(client, &server.base);
        let (m, _) = crawl_repositories(&api, &config(100, 10, true)).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].identifier, "github.com/o/a");
        assert_eq!(api.readme("o/missing").unwrap(), None);
    }

    #[test]
    fn errors_carry_status() {
        struct Failing;
        impl SearchApi for Failing {
            fn search(&self, _: &SearchRange, _: u64, _: u64) -> Result<SearchPage, HttpError> {
                Err(HttpError::Status {
                    status: 401,
                    url: "u".into(),
                    body: String::new(),
                })
            }
            fn readme(&self, _: &str) -> Result<Option<String>, HttpError> {
                Ok(None)
            }
        }
        match crawl_repositories(&Failing, &config(1, 1, false)) {
            Err(CrawlError::Http(e)) => assert_eq!(e.status(), Some(401)),
            other => panic!("{other:?}"),
        }
    }
}
