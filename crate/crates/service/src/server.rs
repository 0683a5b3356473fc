//! Live sessions over WebSocket.
//!
//! One thread owns the [`Engine`] and ticks it at the scenario rate. Each
//! connection gets its own handler thread; handlers and the sim thread talk
//! only through channels. Inbound messages queue until the sim thread drains
//! them at the start of the next tick. Outbound messages go through a
//! bounded per-connection queue that the sim thread never blocks on: when it
//! is full the message is dropped, and a `gap` control message reports the
//! count once there is room again.

use std::collections::BTreeMap;
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use teleop_core::sim::SimError;
use tungstenite::{Message, WebSocket};

use crate::session::{ingest_sirc, Engine, Session};
use crate::wire::{self, Body, Control, Hello, InboundGate, Sequencer};

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub listen: String,
    /// Outbound messages buffered per connection before dropping.
    pub outbound_capacity: usize,
    /// Stop after this many ticks.
    pub max_ticks: Option<u64>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            listen: "127.0.0.1:8080".into(),
            outbound_capacity: 256,
            max_ticks: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Shutdown,
    Fallen,
    TickLimit,
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServeSummary {
    pub ticks: u64,
    pub reason: StopReason,
}

enum ToSim {
    Connect { id: u64, outbound: SyncSender<Body> },
    Disconnect { id: u64 },
    Message { id: u64, body: Body },
}

struct Subscriber {
    outbound: SyncSender<Body>,
    dropped: u64,
    session: Session,
    alive: bool,
}

impl Subscriber {
    fn deliver(&mut self, body: Body) {
        if !self.alive {
            return;
        }
        if self.dropped > 0 {
            match self
                .outbound
                .try_send(Body::Control(Control::Gap { dropped: self.dropped }))
            {
                Ok(()) => self.dropped = 0,
                Err(TrySendError::Full(_)) => {
                    self.dropped += 1;
                    return;
                }
                Err(TrySendError::Disconnected(_)) => {
                    self.alive = false;
                    return;
                }
            }
        }
        match self.outbound.try_send(body) {
            Ok(()) => {}
            Err(TrySendError::Full(_)) => self.dropped += 1,
            Err(TrySendError::Disconnected(_)) => self.alive = false,
        }
    }
}

pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    sim: JoinHandle<Result<ServeSummary, SimError>>,
    accept: JoinHandle<()>,
}

impl Server {
    pub fn start(engine: Engine, options: ServeOptions) -> io::Result<Server> {
        let listener = TcpListener::bind(&options.listen)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let (to_sim, from_clients) = mpsc::channel();
        let hello = Arc::new(engine.hello().clone());

        let sim = {
            let stop = stop.clone();
            let max_ticks = options.max_ticks;
            thread::Builder::new()
                .name("sim".into())
                .spawn(move || sim_loop(engine, from_clients, stop, max_ticks))?
        };
        let accept = {
            let stop = stop.clone();
            let capacity = options.outbound_capacity.max(1);
            thread::Builder::new()
                .name("accept".into())
                .spawn(move || accept_loop(listener, to_sim, hello, stop, capacity))?
        };
        log::info!("listening on ws://{addr}");
        Ok(Server {
            addr,
            stop,
            sim,
            accept,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Asks the sim loop to end after its current tick.
    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    pub fn is_finished(&self) -> bool {
        self.sim.is_finished()
    }

    /// Waits for the sim loop to end.
    pub fn join(self) -> Result<ServeSummary, SimError> {
        let summary = self.sim.join().expect("sim thread panicked");
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.accept.join();
        summary
    }
}

fn sim_loop(
    mut engine: Engine,
    inbound: Receiver<ToSim>,
    stop: Arc<AtomicBool>,
    max_ticks: Option<u64>,
) -> Result<ServeSummary, SimError> {
    let period = Duration::from_millis(engine.tick_ms() as u64);
    let mut subscribers: BTreeMap<u64, Subscriber> = BTreeMap::new();
    let mut next = Instant::now();
    let reason = 'run: loop {
        if stop.load(Ordering::SeqCst) {
            break StopReason::Stopped;
        }
        if max_ticks.is_some_and(|m| engine.sim().tick() >= m) {
            break StopReason::TickLimit;
        }
        while let Ok(msg) = inbound.try_recv() {
            match msg {
                ToSim::Connect { id, outbound } => {
                    subscribers.insert(
                        id,
                        Subscriber {
                            outbound,
                            dropped: 0,
                            session: Session::default(),
                            alive: true,
                        },
                    );
                }
                ToSim::Disconnect { id } => {
                    subscribers.remove(&id);
                }
                ToSim::Message { id, body } => {
                    let Some(sub) = subscribers.get_mut(&id) else { continue };
                    match body {
                        Body::AudioChunk(chunk) => match sub.session.ingest_audio(&chunk) {
                            Ok(events) => {
                                for e in events {
                                    log::debug!("session {id}: digit {}", e.symbol);
                                    engine.queue_digit(&e);
                                    sub.deliver(Body::DigitEvent(e));
                                }
                            }
                            Err(e) => sub.deliver(Body::error(format!("audio chunk dropped: {e}"))),
                        },
                        Body::SircTrain(train) => match ingest_sirc(&train.pulses) {
                            Ok(frame) => engine.queue_sirc(frame),
                            Err(e) => sub.deliver(Body::error(format!("sirc train dropped: {e}"))),
                        },
                        Body::Control(Control::Shutdown) => {
                            log::info!("session {id} requested shutdown");
                            break 'run StopReason::Shutdown;
                        }
                        other => log::warn!("session {id}: ignoring {}", other.type_name()),
                    }
                }
            }
        }

        let record = engine.step()?;
        let fallen = record.fallen;
        let telemetry = Body::Telemetry(Box::new(record));
        for sub in subscribers.values_mut() {
            sub.deliver(telemetry.clone());
        }
        subscribers.retain(|_, s| s.alive);
        if fallen {
            log::warn!("robot fell at tick {}", engine.sim().tick() - 1);
            break StopReason::Fallen;
        }

        next += period;
        let now = Instant::now();
        if next > now {
            thread::sleep(next - now);
        } else {
            next = now;
        }
    };
    for sub in subscribers.values_mut() {
        sub.deliver(Body::Control(Control::Shutdown));
    }
    stop.store(true, Ordering::SeqCst);
    Ok(ServeSummary {
        ticks: engine.sim().tick(),
        reason,
    })
}

fn accept_loop(
    listener: TcpListener,
    to_sim: Sender<ToSim>,
    hello: Arc<Hello>,
    stop: Arc<AtomicBool>,
    capacity: usize,
) {
    let mut next_id = 0u64;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next_id;
                next_id += 1;
                let to_sim = to_sim.clone();
                let hello = hello.clone();
                let spawned = thread::Builder::new().name(format!("conn-{id}")).spawn(move || {
                    if let Err(e) = serve_connection(stream, id, to_sim, &hello, capacity) {
                        log::debug!("connection {id} ({peer}) ended: {e}");
                    }
                });
                if let Err(e) = spawned {
                    log::error!("cannot spawn handler for {peer}: {e}");
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
}

// tungstenite's error type is large; it is only ever passed straight up.
#[allow(clippy::result_large_err)]
fn send(ws: &mut WebSocket<TcpStream>, seq: &mut Sequencer, body: Body) -> tungstenite::Result<()> {
    ws.send(Message::text(wire::encode(&seq.stamp(body))))
}

#[allow(clippy::result_large_err)]
fn serve_connection(
    stream: TcpStream,
    id: u64,
    to_sim: Sender<ToSim>,
    hello: &Hello,
    capacity: usize,
) -> tungstenite::Result<()> {
    stream.set_nonblocking(false)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(5)))?;
    let mut seq = Sequencer::default();
    let mut gate = InboundGate::default();
    send(&mut ws, &mut seq, Body::Control(Control::Hello(hello.clone())))?;

    let (outbound, from_sim) = mpsc::sync_channel(capacity);
    if to_sim.send(ToSim::Connect { id, outbound }).is_err() {
        send(&mut ws, &mut seq, Body::Control(Control::Shutdown))?;
        return ws.close(None);
    }
    log::info!("session {id} connected");
    let result = (|| loop {
        loop {
            match from_sim.try_recv() {
                Ok(body) => {
                    let last = body == Body::Control(Control::Shutdown);
                    send(&mut ws, &mut seq, body)?;
                    if last {
                        return ws.close(None);
                    }
                }
                Err(mpsc::TryRecvError::Empty) => break,
                Err(mpsc::TryRecvError::Disconnected) => return ws.close(None),
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => match gate.admit(text.as_str()) {
                Ok(msg) => {
                    if to_sim.send(ToSim::Message { id, body: msg.body }).is_err() {
                        return ws.close(None);
                    }
                }
                Err(e) => send(&mut ws, &mut seq, Body::error(e.to_string()))?,
            },
            Ok(Message::Binary(_)) => send(&mut ws, &mut seq, Body::error("binary frames are not supported"))?,
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
    })();
    let _ = to_sim.send(ToSim::Disconnect { id });
    log::info!("session {id} disconnected");
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subscriber(capacity: usize) -> (Subscriber, Receiver<Body>) {
        let (outbound, rx) = mpsc::sync_channel(capacity);
        let sub = Subscriber {
            outbound,
            dropped: 0,
            session: Session::default(),
            alive: true,
        };
        (sub, rx)
    }

    #[test]
    fn full_queue_drops_and_reports_a_gap() {
        let (mut sub, rx) = subscriber(2);
        for i in 0..5 {
            sub.deliver(Body::error(i.to_string()));
        }
        assert_eq!(sub.dropped, 3);
        assert_eq!(rx.try_recv().unwrap(), Body::error("0"));
        // one slot free: the gap notice takes it and the new message is dropped
        sub.deliver(Body::error("5"));
        assert_eq!(sub.dropped, 1);
        assert_eq!(rx.try_recv().unwrap(), Body::error("1"));
        assert_eq!(rx.try_recv().unwrap(), Body::Control(Control::Gap { dropped: 3 }));
        sub.deliver(Body::error("6"));
        assert_eq!(rx.try_recv().unwrap(), Body::Control(Control::Gap { dropped: 1 }));
        assert_eq!(rx.try_recv().unwrap(), Body::error("6"));
        assert_eq!(sub.dropped, 0);
    }

    #[test]
    fn closed_queue_marks_the_subscriber_dead() {
        let (mut sub, rx) = subscriber(1);
        drop(rx);
        sub.deliver(Body::error("x"));
        assert!(!sub.alive);
    }
}
