//! Rule schedulers decide which rules are searched each iteration.

use serde::{Deserialize, Serialize};

use crate::rewrite::RuleMatches;

pub trait Scheduler: Send {
    /// Whether rule number `rule` may be searched in `iteration`.
    fn can_search(&mut self, iteration: usize, rule: usize) -> bool;

    /// Inspects a rule's matches before they are applied. Returns `false` if
    /// the rule was banned and its matches dropped.
    fn filter(&mut self, iteration: usize, rule: usize, matches: &mut RuleMatches) -> bool;

    /// Asked when an iteration changed nothing. Returning `false` keeps the
    /// run going.
    fn can_stop(&mut self, _iteration: usize) -> bool {
        true
    }
}

/// Searches and applies every rule every iteration.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimpleScheduler;

impl Scheduler for SimpleScheduler {
    fn can_search(&mut self, _iteration: usize, _rule: usize) -> bool {
        true
    }

    fn filter(&mut self, _iteration: usize, _rule: usize, _matches: &mut RuleMatches) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct RuleState {
    times_banned: u32,
    banned_until: Option<usize>,
}

/// Temporarily bans rules whose match count exceeds a threshold that
/// doubles with each ban. A rule banned in iteration `i` sits out through
/// iteration `i + ban_length * 2^k`, where `k` counts its earlier bans.
#[derive(Debug, Clone)]
pub struct BackoffScheduler {
    match_limit: usize,
    ban_length: usize,
    rules: Vec<RuleState>,
}

impl Default for BackoffScheduler {
    fn default() -> Self {
        BackoffScheduler::new(1000, 5)
    }
}

impl BackoffScheduler {
    pub fn new(match_limit: usize, ban_length: usize) -> Self {
        BackoffScheduler {
            match_limit,
            ban_length,
            rules: Vec::new(),
        }
    }

    fn state(&mut self, rule: usize) -> &mut RuleState {
        if self.rules.len() <= rule {
            self.rules.resize(rule + 1, RuleState::default());
        }
        &mut self.rules[rule]
    }

    /// The iteration through which `rule` is banned, if it is.
    pub fn banned_until(&self, rule: usize) -> Option<usize> {
        self.rules.get(rule).and_then(|s| s.banned_until)
    }
}

impl Scheduler for BackoffScheduler {
    fn can_search(&mut self, iteration: usize, rule: usize) -> bool {
        let state = self.state(rule);
        match state.banned_until {
            Some(until) if iteration <= until => false,
            _ => {
                state.banned_until = None;
                true
            }
        }
    }

    fn filter(&mut self, iteration: usize, rule: usize, matches: &mut RuleMatches) -> bool {
        let (limit, ban) = (self.match_limit, self.ban_length);
        let state = self.state(rule);
        let threshold = limit.saturating_mul(1 << state.times_banned.min(31));
        if matches.len() <= threshold {
            return true;
        }
        let length = ban.saturating_mul(1 << state.times_banned.min(31));
        state.banned_until = Some(iteration + length);
        state.times_banned += 1;
        log::debug!("banning rule {rule} until iteration {}", iteration + length);
        *matches = RuleMatches::default();
        false
    }

    fn can_stop(&mut self, iteration: usize) -> bool {
        let mut pending = false;
        for state in &mut self.rules {
            if state.banned_until.is_some_and(|until| until > iteration) {
                state.banned_until = None;
                pending = true;
            }
        }
        !pending
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    EveryRule,
    Backoff { match_limit: usize, ban_length: usize },
}

impl Default for SchedulerKind {
    fn default() -> Self {
        SchedulerKind::Backoff {
            match_limit: 1000,
            ban_length: 5,
        }
    }
}

impl SchedulerKind {
    pub fn build(self) -> Box<dyn Scheduler> {
        match self {
            SchedulerKind::EveryRule => Box::new(SimpleScheduler),
            SchedulerKind::Backoff {
                match_limit,
                ban_length,
            } => Box::new(BackoffScheduler::new(match_limit, ban_length)),
        }
    }
}
