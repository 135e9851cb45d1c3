//! Periodic evaluation on simulated time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::verdict::{SliceVerdict, Status};
use super::TrustError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub id: u64,
    pub slice: String,
    pub interval: u64,
    pub next_due: u64,
    /// Status of the last evaluation, or of the deployment gate.
    pub last: Status,
    pub evaluations: u64,
}

/// A change in a slice's aggregate status.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub slice: String,
    pub tick: u64,
    pub from: Status,
    pub to: Status,
    /// `(vnf, vm)` members untrusted in the new verdict.
    pub flagged: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scheduler {
    subs: BTreeMap<String, Subscription>,
    next_id: u64,
}

impl Scheduler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Evaluates `slice` every `interval` ticks, the first time at
    /// `now + interval`.
    pub fn schedule(&mut self, slice: &str, interval: u64, now: u64, initial: Status) -> Result<u64, TrustError> {
        if interval == 0 {
            return Err(TrustError::InvalidInterval);
        }
        if self.subs.contains_key(slice) {
            return Err(TrustError::DuplicateSubscription(slice.to_string()));
        }
        self.next_id += 1;
        let sub = Subscription {
            id: self.next_id,
            slice: slice.to_string(),
            interval,
            next_due: now + interval,
            last: initial,
            evaluations: 0,
        };
        self.subs.insert(slice.to_string(), sub);
        Ok(self.next_id)
    }

    pub fn cancel(&mut self, slice: &str) -> Result<Subscription, TrustError> {
        self.subs.remove(slice).ok_or_else(|| TrustError::UnknownSubscription(slice.to_string()))
    }

    pub fn get(&self, slice: &str) -> Option<&Subscription> {
        self.subs.get(slice)
    }

    pub fn subscriptions(&self) -> impl Iterator<Item = &Subscription> {
        self.subs.values()
    }

    /// Slices due at or before `now`, ordered by due tick then subscription
    /// id.
    pub fn due(&self, now: u64) -> Vec<String> {
        let mut due: Vec<&Subscription> = self.subs.values().filter(|s| s.next_due <= now).collect();
        due.sort_by_key(|s| (s.next_due, s.id));
        due.into_iter().map(|s| s.slice.clone()).collect()
    }

    /// Records an evaluation made at `tick`, advances the subscription and
    /// returns an alert if the aggregate status changed.
    pub fn record(&mut self, verdict: &SliceVerdict, tick: u64) -> Option<Alert> {
        let sub = self.subs.get_mut(&verdict.slice)?;
        sub.evaluations += 1;
        while sub.next_due <= tick {
            sub.next_due += sub.interval;
        }
        let from = std::mem::replace(&mut sub.last, verdict.aggregate);
        (from != verdict.aggregate).then(|| Alert {
            slice: verdict.slice.clone(),
            tick,
            from,
            to: verdict.aggregate,
            flagged: verdict.members.iter().filter(|m| m.status == Status::Untrusted).map(|m| (m.vnf_id.clone(), m.vm_id.clone())).collect(),
        })
    }

    /// Rebinds a subscription's baseline, e.g. after a mitigation gate.
    pub fn reset_status(&mut self, slice: &str, status: Status) {
        if let Some(s) = self.subs.get_mut(slice) {
            s.last = status;
        }
    }
}
