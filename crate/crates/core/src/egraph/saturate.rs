use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{analysis, EGraph, Id, Subst};
use crate::expr::Symbol;
use crate::rules::RewriteRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationLimits {
    pub max_iterations: usize,
    /// Checked between rule applications, so one iteration may overshoot by
    /// the instantiations of a single rule.
    pub max_nodes: usize,
    #[serde(rename = "time_budget_ms", with = "crate::serde_millis")]
    pub time_budget: Duration,
    /// Matches a rule may produce in one iteration before it is banned.
    /// Doubles with each ban; `usize::MAX` disables banning.
    pub match_limit: usize,
    /// Iterations a first ban lasts; doubles with each ban.
    pub ban_length: usize,
    /// Skip matches whose right-hand side differs from the matched class in
    /// sampled domain or value (see the numeric analysis).
    pub numeric_guard: bool,
}

impl Default for SaturationLimits {
    fn default() -> Self {
        SaturationLimits {
            max_iterations: 30,
            max_nodes: 50_000,
            time_budget: Duration::from_secs(600),
            match_limit: 1_000,
            ban_length: 5,
            numeric_guard: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Saturated,
    IterLimit,
    NodeLimit,
    TimeLimit,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Saturated => "saturated",
            StopReason::IterLimit => "iter-limit",
            StopReason::NodeLimit => "node-limit",
            StopReason::TimeLimit => "time-limit",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub iterations: usize,
    pub enodes: usize,
    pub eclasses: usize,
    pub stop_reason: StopReason,
    /// Matches applied per rule, for rules that fired at least once.
    pub rule_applications: Vec<(String, usize)>,
    /// Total number of times any rule was banned for exceeding its match limit.
    pub bans: usize,
    /// Matches skipped by the numeric guard.
    pub guard_rejections: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Classes containing at least one e-node with each top symbol.
fn symbol_index(g: &EGraph) -> HashMap<&Symbol, Vec<Id>> {
    let mut index: HashMap<&Symbol, Vec<Id>> = HashMap::new();
    for id in g.class_ids() {
        let mut last = None;
        for n in g.nodes(id) {
            if last != Some(&n.sym) {
                index.entry(&n.sym).or_default().push(id);
                last = Some(&n.sym);
            }
        }
    }
    index
}

fn collect_matches(
    g: &EGraph,
    rule: &RewriteRule,
    index: &HashMap<&Symbol, Vec<Id>>,
    limit: usize,
) -> Vec<(Id, Subst)> {
    let root = rule.lhs.root();
    let n = rule.lhs.var_count();
    match root.top_symbol() {
        None => g.search_pattern_limited(root, n, g.class_ids(), limit),
        Some(sym) => match index.get(sym) {
            Some(ids) => g.search_pattern_limited(root, n, ids.iter().copied(), limit),
            None => Vec::new(),
        },
    }
}

/// Per-rule backoff: a rule whose matches exceed its limit is skipped for a
/// while, and both its limit and its next ban length double.
#[derive(Debug, Clone, Copy, Default)]
struct RuleStats {
    times_banned: u32,
    banned_until: usize,
}

impl RuleStats {
    fn threshold(&self, base: usize) -> usize {
        base.checked_shl(self.times_banned)
            .filter(|&t| t >> self.times_banned == base)
            .unwrap_or(usize::MAX)
    }
}

/// Equality saturation with match-then-apply phasing: each iteration finds
/// every match against the graph as it stood at the start of the iteration,
/// then applies them all and rebuilds once.
///
/// Rules exceeding their match limit in an iteration are banned (egg-style
/// backoff) and contribute nothing that iteration. The graph only counts as
/// saturated once an iteration with no bans in force changes nothing.
pub fn saturate(g: &mut EGraph, rules: &[RewriteRule], lim: &SaturationLimits) -> SaturationReport {
    let start = Instant::now();
    let mut applied = vec![0usize; rules.len()];
    let mut stats = vec![RuleStats::default(); rules.len()];
    let mut bans = 0;
    let mut rejected = 0;
    let mut iterations = 0;
    g.rebuild();

    let stop_reason = 'outer: loop {
        if iterations >= lim.max_iterations {
            break StopReason::IterLimit;
        }
        iterations += 1;
        let before = g.change_counters();

        let matches: Vec<Vec<(Id, Subst)>> = {
            let index = symbol_index(g);
            let mut all = Vec::with_capacity(rules.len());
            for (rule, st) in rules.iter().zip(stats.iter_mut()) {
                if start.elapsed() > lim.time_budget {
                    break 'outer StopReason::TimeLimit;
                }
                if st.banned_until >= iterations {
                    all.push(Vec::new());
                    continue;
                }
                let threshold = st.threshold(lim.match_limit);
                let m = collect_matches(g, rule, &index, threshold);
                if m.len() > threshold {
                    st.times_banned += 1;
                    let len = lim.ban_length.checked_shl(st.times_banned - 1).unwrap_or(usize::MAX);
                    st.banned_until = iterations.saturating_add(len);
                    bans += 1;
                    all.push(Vec::new());
                } else {
                    all.push(m);
                }
            }
            all
        };

        for (i, (rule, ms)) in rules.iter().zip(matches).enumerate() {
            for (class, subst) in &ms {
                if lim.numeric_guard && !analysis::agrees(g.values(*class), &g.pattern_values(rule.rhs.root(), subst)) {
                    rejected += 1;
                    continue;
                }
                let id = g.add_pattern(&rule.rhs, subst);
                g.union(*class, id);
                applied[i] += 1;
            }
            if g.node_count() > lim.max_nodes {
                g.rebuild();
                break 'outer StopReason::NodeLimit;
            }
            if start.elapsed() > lim.time_budget {
                g.rebuild();
                break 'outer StopReason::TimeLimit;
            }
        }
        g.rebuild();

        if g.change_counters() == before {
            let banned: Vec<&mut RuleStats> = stats.iter_mut().filter(|s| s.banned_until >= iterations).collect();
            if banned.is_empty() {
                break StopReason::Saturated;
            }
            // Nothing else to do: lift the bans early.
            for s in banned {
                s.banned_until = iterations;
            }
        }
    };

    SaturationReport {
        iterations,
        enodes: g.node_count(),
        eclasses: g.class_count(),
        stop_reason,
        rule_applications: rules
            .iter()
            .zip(applied)
            .filter(|(_, n)| *n > 0)
            .map(|(r, n)| (r.name.clone(), n))
            .collect(),
        bans,
        guard_rejections: rejected,
        elapsed: start.elapsed(),
    }
}
