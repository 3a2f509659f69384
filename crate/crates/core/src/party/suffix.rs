//! Registrable-domain extraction over a public-suffix rule set.

use std::collections::HashSet;

const BUNDLED: &str = include_str!("../../data/public_suffix.dat");

#[derive(Debug, Clone, Default)]
pub struct SuffixList {
    rules: HashSet<String>,
    /// parents of `*.` rules
    wildcards: HashSet<String>,
    exceptions: HashSet<String>,
}

impl SuffixList {
    pub fn parse(text: &str) -> Self {
        let mut list = SuffixList::default();
        for line in text.lines() {
            let Some(rule) = line.split_whitespace().next() else {
                continue;
            };
            if rule.starts_with("//") {
                continue;
            }
            let rule = rule.to_ascii_lowercase();
            if let Some(rest) = rule.strip_prefix('!') {
                list.exceptions.insert(rest.to_string());
            } else if let Some(rest) = rule.strip_prefix("*.") {
                list.wildcards.insert(rest.to_string());
            } else {
                list.rules.insert(rule);
            }
        }
        list
    }

    pub fn bundled() -> &'static SuffixList {
        static LIST: std::sync::OnceLock<SuffixList> = std::sync::OnceLock::new();
        LIST.get_or_init(|| SuffixList::parse(BUNDLED))
    }

    /// Number of trailing labels forming the public suffix of `labels`.
    fn suffix_labels(&self, labels: &[&str]) -> usize {
        let n = labels.len();
        let mut best = 1; // implicit "*" rule
        for i in 0..n {
            let candidate = labels[i..].join(".");
            if self.exceptions.contains(&candidate) {
                return n - i - 1;
            }
            let wildcard = i + 1 < n && self.wildcards.contains(&labels[i + 1..].join("."));
            if (self.rules.contains(&candidate) || wildcard) && n - i > best {
                best = n - i;
            }
        }
        best
    }

    /// Public suffix plus one label, or `None` when `host` is itself a suffix.
    /// Expects a lowercase dotted name.
    pub fn registrable<'h>(&self, host: &'h str) -> Option<&'h str> {
        let labels: Vec<&str> = host.split('.').collect();
        let keep = self.suffix_labels(&labels) + 1;
        if keep > labels.len() {
            return None;
        }
        let skip: usize = labels[..labels.len() - keep].iter().map(|l| l.len() + 1).sum();
        Some(&host[skip..])
    }
}
