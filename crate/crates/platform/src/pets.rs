//! One live tick loop per pet.
//!
//! The loop task owns the engine. Feed and environment inputs arrive on an
//! ordered queue and are applied between ticks, readers see the latest
//! snapshot through a watch channel, and every tick record is broadcast in
//! tick order.

use std::sync::Arc;
use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use tomtalk_core::emotion::{EmotionEngine, EmotionError, EngineSnapshot, SensorFrame, TickRecord};
use tomtalk_core::socialgraph::PropId;

/// Tick records buffered per subscriber before it starts lagging.
const STREAM_BUFFER: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedAck {
    pub pet: String,
    pub prop_id: PropId,
    pub s3: f64,
    pub s4: f64,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvironmentAck {
    pub pet: String,
    pub comfort: f64,
    pub s1: f64,
    pub s2: f64,
    pub tick: u64,
}

enum Command {
    Feed(PropId, oneshot::Sender<Result<FeedAck, EmotionError>>),
    Environment(SensorFrame, oneshot::Sender<Result<EnvironmentAck, EmotionError>>),
}

/// The loop has stopped; the service is shutting down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PetStopped;

#[derive(Debug)]
pub struct PetHandle {
    id: String,
    commands: mpsc::Sender<Command>,
    state: watch::Receiver<Arc<EngineSnapshot>>,
    ticks: broadcast::Sender<Arc<TickRecord>>,
}

impl PetHandle {
    /// Starts the loop. It runs until `stop` flips to true and then hands the
    /// engine back through the join handle.
    pub fn spawn(
        id: String,
        mut engine: EmotionEngine,
        mut rng: ChaCha8Rng,
        period: Duration,
        mut stop: watch::Receiver<bool>,
    ) -> (Self, JoinHandle<EmotionEngine>) {
        let (cmd_tx, mut cmd_rx) = mpsc::channel::<Command>(64);
        let (state_tx, state_rx) = watch::channel(Arc::new(engine.snapshot()));
        let (tick_tx, _) = broadcast::channel(STREAM_BUFFER);
        let ticks = tick_tx.clone();
        let pet = id.clone();
        let join = tokio::spawn(async move {
            let mut interval = tokio::time::interval(period);
            interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
            interval.tick().await;
            loop {
                tokio::select! {
                    biased;
                    changed = stop.changed() => {
                        if changed.is_err() || *stop.borrow() {
                            break;
                        }
                    }
                    Some(cmd) = cmd_rx.recv() => {
                        let tick = engine.tick_count();
                        match cmd {
                            Command::Feed(prop, reply) => {
                                let out = engine.feed(&prop).map(|(s3, s4)| FeedAck {
                                    pet: pet.clone(),
                                    prop_id: prop,
                                    s3,
                                    s4,
                                    tick,
                                });
                                let _ = reply.send(out);
                            }
                            Command::Environment(frame, reply) => {
                                let out = engine.sense(&frame).map(|(comfort, s1, s2)| EnvironmentAck {
                                    pet: pet.clone(),
                                    comfort,
                                    s1,
                                    s2,
                                    tick,
                                });
                                let _ = reply.send(out);
                            }
                        }
                        state_tx.send_replace(Arc::new(engine.snapshot()));
                    }
                    _ = interval.tick() => {
                        let record = engine.tick(&mut rng);
                        state_tx.send_replace(Arc::new(engine.snapshot()));
                        let _ = tick_tx.send(Arc::new(record));
                    }
                }
            }
            engine
        });
        let handle = Self {
            id,
            commands: cmd_tx,
            state: state_rx,
            ticks,
        };
        (handle, join)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Latest published state; never waits on the loop.
    pub fn snapshot(&self) -> Arc<EngineSnapshot> {
        self.state.borrow().clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<TickRecord>> {
        self.ticks.subscribe()
    }

    pub async fn feed(&self, prop: PropId) -> Result<Result<FeedAck, EmotionError>, PetStopped> {
        let (tx, rx) = oneshot::channel();
        self.commands
            .send(Command::Feed(prop, tx))
            .await
            .map_err(|_| PetStopped)?;
        rx.await.map_err(|_| PetStopped)
    }

    pub async fn environment(
        &self,
        frame: SensorFrame,
    ) -> Result<Result<EnvironmentAck, EmotionError>, PetStopped> {
        let (tx, rx) = oneshot::channel();
        self.commands
            .send(Command::Environment(frame, tx))
            .await
            .map_err(|_| PetStopped)?;
        rx.await.map_err(|_| PetStopped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use tomtalk_core::emotion::{EngineConfig, Liking, PropItem, TransitionStats};

    #[tokio::test]
    async fn ticks_arrive_in_order_and_feed_lands_on_the_next_one() {
        let mut engine = EmotionEngine::new(EngineConfig::default(), TransitionStats::bundled()).unwrap();
        engine.register_prop(PropItem::new("toy", Liking::Liked, 0.6).unwrap());
        let (stop_tx, stop_rx) = watch::channel(false);
        let (pet, join) = PetHandle::spawn(
            "tom".into(),
            engine,
            ChaCha8Rng::seed_from_u64(1),
            Duration::from_millis(5),
            stop_rx,
        );
        let mut rx = pet.subscribe();
        let ack = pet.feed("toy".into()).await.unwrap().unwrap();
        assert_eq!((ack.s3, ack.s4), (0.6, 0.0));
        let mut last = 0;
        loop {
            let rec = rx.recv().await.unwrap();
            assert!(rec.tick > last);
            last = rec.tick;
            if rec.tick > ack.tick {
                assert!(rec.stimuli.s3 > 0.0);
                break;
            }
        }
        stop_tx.send(true).unwrap();
        let engine = join.await.unwrap();
        assert!(engine.tick_count() >= last);
        assert!(pet.feed("toy".into()).await.is_err());
    }
}
