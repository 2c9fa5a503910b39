use std::collections::{HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use crossbeam_channel::{unbounded, Receiver, Sender};

use crate::operators::{JoinOptions, Message, NodeRuntime, NodeTask, Outbox, Report};
use crate::planner::{GlobalPlan, NodeId, NodeKind};
use crate::storage::TableStore;

pub(crate) enum Control {
    Task(NodeTask),
    Msg(Message),
    Stop,
}

pub(crate) enum Event {
    Report(Report),
    Panic(String),
}

struct WorkerOut<'a> {
    me: usize,
    assign: &'a [usize],
    senders: &'a [Sender<Control>],
    local: &'a mut VecDeque<Message>,
    events: &'a Sender<Event>,
}

impl Outbox for WorkerOut<'_> {
    fn send(&mut self, m: Message) {
        let w = self.assign[m.to.0];
        if w == self.me {
            self.local.push_back(m);
        } else {
            let _ = self.senders[w].send(Control::Msg(m));
        }
    }

    fn report(&mut self, r: Report) {
        let _ = self.events.send(Event::Report(r));
    }
}

/// Worker threads, each owning a fixed set of plan nodes.
pub(crate) struct Pool {
    senders: Vec<Sender<Control>>,
    assign: Vec<usize>,
    handles: Vec<JoinHandle<()>>,
    pub events: Receiver<Event>,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "worker panicked".into())
}

impl Pool {
    /// Spawns `workers` threads and hands out nodes round-robin in
    /// topological order.
    pub fn spawn(
        plan: Arc<GlobalPlan>,
        tables: &[Arc<Mutex<TableStore>>],
        workers: usize,
        opts: JoinOptions,
        chunk: usize,
    ) -> Pool {
        let workers = workers.clamp(1, plan.nodes.len());
        let mut assign = vec![0; plan.nodes.len()];
        let mut owned: Vec<Vec<NodeRuntime>> = (0..workers).map(|_| Vec::new()).collect();
        for (i, id) in plan.topological_order().into_iter().enumerate() {
            let w = i % workers;
            assign[id.0] = w;
            let table = match plan.node(id).kind {
                NodeKind::Table { table } => Some(tables[table as usize].clone()),
                _ => None,
            };
            owned[w].push(NodeRuntime::new(plan.clone(), id, opts, table).with_chunk(chunk));
        }
        let (event_tx, events) = unbounded();
        let channels: Vec<(Sender<Control>, Receiver<Control>)> = (0..workers).map(|_| unbounded()).collect();
        let senders: Vec<Sender<Control>> = channels.iter().map(|(s, _)| s.clone()).collect();
        let mut handles = Vec::new();
        for (me, ((_, rx), nodes)) in channels.into_iter().zip(owned).enumerate() {
            let senders = senders.clone();
            let assign = assign.clone();
            let events = event_tx.clone();
            let h = std::thread::Builder::new()
                .name(format!("worker-{me}"))
                .spawn(move || run_worker(me, nodes, rx, senders, assign, events))
                .expect("spawn worker thread");
            handles.push(h);
        }
        Pool {
            senders,
            assign,
            handles,
            events,
        }
    }

    pub fn workers(&self) -> usize {
        self.senders.len()
    }

    pub fn dispatch(&self, task: NodeTask) {
        let _ = self.senders[self.assign[task.node.0]].send(Control::Task(task));
    }

    pub fn stop(&mut self) {
        for s in &self.senders {
            let _ = s.send(Control::Stop);
        }
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for Pool {
    fn drop(&mut self) {
        self.stop();
    }
}

fn run_worker(
    me: usize,
    nodes: Vec<NodeRuntime>,
    rx: Receiver<Control>,
    senders: Vec<Sender<Control>>,
    assign: Vec<usize>,
    events: Sender<Event>,
) {
    let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id(), i)).collect();
    let mut nodes = nodes;
    let mut local: VecDeque<Message> = VecDeque::new();
    loop {
        let control = match local.pop_front() {
            Some(m) => Control::Msg(m),
            None => match rx.recv() {
                Ok(c) => c,
                Err(_) => return,
            },
        };
        let (node, work): (NodeId, Box<dyn FnOnce(&mut NodeRuntime, &mut dyn Outbox)>) = match control {
            Control::Stop => return,
            Control::Task(t) => (t.node, Box::new(move |n, out| n.begin(t, out))),
            Control::Msg(m) => (m.to, Box::new(move |n, out| n.deliver(m, out))),
        };
        let Some(&i) = index.get(&node) else {
            let _ = events.send(Event::Panic(format!("worker {me} does not own node {}", node.0)));
            continue;
        };
        let mut out = WorkerOut {
            me,
            assign: &assign,
            senders: &senders,
            local: &mut local,
            events: &events,
        };
        if let Err(p) = catch_unwind(AssertUnwindSafe(|| work(&mut nodes[i], &mut out))) {
            let _ = events.send(Event::Panic(panic_message(p)));
        }
    }
}
