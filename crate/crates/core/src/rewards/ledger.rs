use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MilestoneKind, RewardConfig, RewardError};
use crate::socialgraph::{PropId, TaskCompletion, Timestamp, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardCategory {
    CompleteMission,
    SurpriseCollective,
    AchievementBased,
    Offline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardPayload {
    Prop(PropId),
    Physical(String),
    Badge(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardEvent {
    pub seq: u64,
    pub user: UserId,
    pub at: Timestamp,
    pub category: RewardCategory,
    pub payload: RewardPayload,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Achievement {
    pub badge: String,
    pub earned_at: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRewards {
    /// Virtual props held, as a multiset.
    pub props: BTreeMap<PropId, u32>,
    pub physical: Vec<String>,
    pub achievements: Vec<Achievement>,
    pub tasks_completed: u64,
    /// Append-only.
    pub history: Vec<RewardEvent>,
}

impl UserRewards {
    pub fn has_badge(&self, badge: &str) -> bool {
        self.achievements.iter().any(|a| a.badge == badge)
    }

    pub fn prop_count(&self, prop: &PropId) -> u32 {
        self.props.get(prop).copied().unwrap_or(0)
    }

    /// Removes one prop from the multiset, e.g. when it is fed to the pet.
    /// The grant that produced it stays in the history.
    pub fn consume_prop(&mut self, prop: &PropId) -> bool {
        match self.props.get_mut(prop) {
            Some(n) if *n > 1 => {
                *n -= 1;
                true
            }
            Some(_) => {
                self.props.remove(prop);
                true
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardLedger {
    users: BTreeMap<UserId, UserRewards>,
    next_seq: u64,
}

impl RewardLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, user: UserId) {
        self.users.entry(user).or_default();
    }

    pub fn user(&self, user: &UserId) -> Result<&UserRewards, RewardError> {
        self.users
            .get(user)
            .ok_or_else(|| RewardError::UnknownUser(user.clone()))
    }

    fn user_mut(&mut self, user: &UserId) -> Result<&mut UserRewards, RewardError> {
        self.users
            .get_mut(user)
            .ok_or_else(|| RewardError::UnknownUser(user.clone()))
    }

    pub fn consume_prop(&mut self, user: &UserId, prop: &PropId) -> Result<bool, RewardError> {
        Ok(self.user_mut(user)?.consume_prop(prop))
    }

    pub fn grant(
        &mut self,
        user: &UserId,
        category: RewardCategory,
        payload: RewardPayload,
        at: Timestamp,
    ) -> Result<RewardEvent, RewardError> {
        let seq = self.next_seq;
        let entry = self.user_mut(user)?;
        match &payload {
            RewardPayload::Prop(p) => *entry.props.entry(p.clone()).or_insert(0) += 1,
            RewardPayload::Physical(item) => entry.physical.push(item.clone()),
            RewardPayload::Badge(badge) => entry.achievements.push(Achievement {
                badge: badge.clone(),
                earned_at: at,
            }),
        }
        let event = RewardEvent {
            seq,
            user: user.clone(),
            at,
            category,
            payload,
        };
        entry.history.push(event.clone());
        self.next_seq += 1;
        Ok(event)
    }

    fn award_milestones(
        &mut self,
        user: &UserId,
        kind: MilestoneKind,
        value: u64,
        config: &RewardConfig,
        at: Timestamp,
    ) -> Result<Vec<RewardEvent>, RewardError> {
        let mut events = Vec::new();
        for m in config.milestones.iter().filter(|m| m.kind == kind) {
            if value >= m.threshold && !self.user(user)?.has_badge(&m.badge) {
                events.push(self.grant(
                    user,
                    RewardCategory::AchievementBased,
                    RewardPayload::Badge(m.badge.clone()),
                    at,
                )?);
            }
        }
        Ok(events)
    }

    /// Complete-mission grants for both participants of a finished task, plus
    /// any task-count badges they just reached.
    pub fn on_task_completed(
        &mut self,
        done: &TaskCompletion,
        config: &RewardConfig,
    ) -> Result<Vec<RewardEvent>, RewardError> {
        let at = done.task.completed_at.unwrap_or(done.task.issued_at);
        let prop = done
            .task
            .reward_prop
            .clone()
            .unwrap_or_else(|| config.mission_prop.clone());
        self.user(&done.task.a)?;
        self.user(&done.task.b)?;
        let mut events = Vec::new();
        for u in [&done.task.a, &done.task.b] {
            events.push(self.grant(
                u,
                RewardCategory::CompleteMission,
                RewardPayload::Prop(prop.clone()),
                at,
            )?);
            let count = {
                let entry = self.user_mut(u)?;
                entry.tasks_completed += 1;
                entry.tasks_completed
            };
            events.extend(self.award_milestones(
                u,
                MilestoneKind::TasksCompleted,
                count,
                config,
                at,
            )?);
        }
        Ok(events)
    }

    /// One outdoor tick: a single draw against the surprise table.
    pub fn outdoor_tick<R: Rng + ?Sized>(
        &mut self,
        user: &UserId,
        config: &RewardConfig,
        rng: &mut R,
        at: Timestamp,
    ) -> Result<Option<RewardEvent>, RewardError> {
        self.user(user)?;
        let draw: f64 = rng.random();
        let Some(entry) = config.surprise_for(draw) else {
            return Ok(None);
        };
        let payload = match (&entry.prop, &entry.physical) {
            (Some(p), _) => RewardPayload::Prop(p.clone()),
            (None, Some(item)) => RewardPayload::Physical(item.clone()),
            (None, None) => return Ok(None),
        };
        self.grant(user, RewardCategory::SurpriseCollective, payload, at)
            .map(Some)
    }

    /// Pet-growth badges for a pet that is `days` old.
    pub fn on_pet_age(
        &mut self,
        user: &UserId,
        days: u64,
        config: &RewardConfig,
        at: Timestamp,
    ) -> Result<Vec<RewardEvent>, RewardError> {
        self.award_milestones(user, MilestoneKind::PetAgeDays, days, config, at)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::{RewardParams, SurpriseEntry};
    use crate::socialgraph::{Catalog, GeoPoint, SocialGraph, UserProfile};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (SocialGraph, RewardLedger) {
        let mut g = SocialGraph::new(
            Catalog {
                attributes: 0,
                preferences: 0,
            },
            RewardParams::default(),
        )
        .unwrap();
        let mut ledger = RewardLedger::new();
        for id in ["a", "b"] {
            let id = g
                .add_user(UserProfile::new(id, GeoPoint::new(0.0, 0.0)))
                .unwrap();
            ledger.register(id);
        }
        (g, ledger)
    }

    #[test]
    fn task_completion_grants_configured_prop() {
        let (mut g, mut ledger) = setup();
        let cfg = RewardConfig::default();
        g.issue_task("t".into(), &"a".into(), &"b".into(), 0, None, Some("bone".into()))
            .unwrap();
        let done = g.complete_task(&"t".into(), 1).unwrap();
        let events = ledger.on_task_completed(&done, &cfg).unwrap();
        let missions: Vec<_> = events
            .iter()
            .filter(|e| e.category == RewardCategory::CompleteMission)
            .collect();
        assert_eq!(missions.len(), 2);
        assert!(missions
            .iter()
            .all(|e| e.payload == RewardPayload::Prop("bone".into())));
        assert_eq!(ledger.user(&"a".into()).unwrap().prop_count(&"bone".into()), 1);
    }

    #[test]
    fn tenth_task_badge_appears_once() {
        let (mut g, mut ledger) = setup();
        let cfg = RewardConfig::default();
        for i in 0..25u64 {
            let id = format!("t{i}");
            g.issue_task(id.clone().into(), &"a".into(), &"b".into(), i, None, None)
                .unwrap();
            let done = g.complete_task(&id.into(), i).unwrap();
            let events = ledger.on_task_completed(&done, &cfg).unwrap();
            let tens = events
                .iter()
                .filter(|e| e.payload == RewardPayload::Badge("10-tasks".into()))
                .count();
            assert_eq!(tens, if i == 9 { 2 } else { 0 }, "task {i}");
        }
        let a = ledger.user(&"a".into()).unwrap();
        assert_eq!(
            a.achievements.iter().filter(|x| x.badge == "10-tasks").count(),
            1
        );
        assert_eq!(a.achievements.iter().find(|x| x.badge == "10-tasks").unwrap().earned_at, 9);
    }

    #[test]
    fn history_is_append_only_and_explains_props() {
        let (_, mut ledger) = setup();
        let cfg = RewardConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in 0..2000 {
            ledger.outdoor_tick(&"a".into(), &cfg, &mut rng, t).unwrap();
        }
        ledger.consume_prop(&"a".into(), &"ration".into()).unwrap();
        let a = ledger.user(&"a".into()).unwrap();
        let seqs: Vec<u64> = a.history.iter().map(|e| e.seq).collect();
        assert!(seqs.windows(2).all(|w| w[0] < w[1]));
        for (prop, held) in &a.props {
            let granted = a
                .history
                .iter()
                .filter(|e| e.payload == RewardPayload::Prop(prop.clone()))
                .count() as u32;
            assert!(*held <= granted);
        }
    }

    #[test]
    fn surprise_frequency_matches_table() {
        let (_, mut ledger) = setup();
        let mut cfg = RewardConfig::default();
        cfg.surprise = vec![SurpriseEntry {
            prop: Some("propA".into()),
            physical: None,
            probability: 0.3,
        }];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut hits = 0;
        for t in 0..n {
            if ledger.outdoor_tick(&"b".into(), &cfg, &mut rng, t).unwrap().is_some() {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.01, "{freq}");
    }

    #[test]
    fn pet_age_badges_and_unknown_user() {
        let (_, mut ledger) = setup();
        let cfg = RewardConfig::default();
        assert_eq!(ledger.on_pet_age(&"a".into(), 8, &cfg, 8).unwrap().len(), 1);
        assert!(ledger.on_pet_age(&"a".into(), 9, &cfg, 9).unwrap().is_empty());
        assert_eq!(
            ledger
                .grant(
                    &"zed".into(),
                    RewardCategory::Offline,
                    RewardPayload::Physical("mug".into()),
                    0
                )
                .unwrap_err(),
            RewardError::UnknownUser("zed".into())
        );
    }
}
