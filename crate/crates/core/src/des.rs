//! Event-driven simulation of the `s`-server queue with impatient customers, in
//! either impatience model, started empty at time 0 with arrivals at
//! `T_{n+1} = T_n + xi_n`.
//!
//! Waiting customers are served FIFO by the lowest-index free server. The
//! congestion `X_t` is tracked together with the largest remaining maximal and
//! minimal sojourn times `L_t` and `M_t`, and `{L_t = 0} ⊆ {X_t = 0} ⊆ {M_t = 0}` is
//! checked after every batch of simultaneous events.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marks::{AlphaKind, MarkSource, MarkTriple};
use crate::recursion::{pos, prob_zero_estimate, RecursionSpec, ZeroProbability};
use crate::stationary::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub servers: usize,
    pub model: Model,
    pub source: MarkSource,
    pub horizon_customers: usize,
}

impl Scenario {
    pub fn new(servers: usize, model: Model, source: MarkSource, horizon_customers: usize) -> Result<Self> {
        if servers == 0 || horizon_customers == 0 {
            return Err(Error::InvalidArgument("servers and horizon_customers must be positive".into()));
        }
        Ok(Self { servers, model, source, horizon_customers })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Served,
    AbandonedQueue,
    AbortedInService,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Served => "served",
            Outcome::AbandonedQueue => "abandoned_queue",
            Outcome::AbortedInService => "aborted_in_service",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomerRecord {
    pub index: usize,
    pub arrival: f64,
    pub sigma: f64,
    pub dpat: f64,
    pub service_start: Option<f64>,
    pub departure: f64,
    pub outcome: Outcome,
    /// Service rendered before an abort at the deadline.
    pub service_received: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathStatistics {
    pub customers: usize,
    pub events: usize,
    /// Transitions of `X` to 0.
    pub empty_epoch_count: usize,
    pub inclusion_violations: usize,
    /// Customers leaving outside their sojourn window.
    pub sojourn_violations: usize,
    /// Batches with a waiting customer and a free server.
    pub idling_violations: usize,
    pub served: usize,
    pub abandoned_queue: usize,
    pub aborted_in_service: usize,
    pub in_system_at_end: usize,
    pub time_average_congestion: f64,
    pub end_time: f64,
    /// Arrivals finding `L = 0`, `X = 0` and `M = 0`.
    pub arrivals_l_zero: usize,
    pub arrivals_x_zero: usize,
    pub arrivals_m_zero: usize,
}

impl PathStatistics {
    pub fn conserves_customers(&self) -> bool {
        self.customers == self.served + self.abandoned_queue + self.aborted_in_service + self.in_system_at_end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub records: Vec<CustomerRecord>,
    pub stats: PathStatistics,
    /// Single server only: workload found by each arrival, just before it joins.
    pub workload_before: Option<Vec<f64>>,
    pub l_before: Vec<f64>,
    pub m_before: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Class {
    Completion = 0,
    Deadline = 1,
    Arrival = 2,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    class: Class,
    customer: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.class.cmp(&other.class))
            .then(self.customer.cmp(&other.customer))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Pending,
    Waiting,
    InService { server: usize, start: f64 },
    Gone,
}

struct Engine<'a> {
    scn: &'a Scenario,
    marks: Vec<MarkTriple>,
    arrivals: Vec<f64>,
    deadlines: Vec<f64>,
    state: Vec<State>,
    servers: Vec<Option<usize>>,
    queue: VecDeque<usize>,
    waiting: usize,
    in_system: usize,
    calendar: BinaryHeap<Reverse<Event>>,
    records: Vec<Option<CustomerRecord>>,
    l_expiry: f64,
    m_expiry: f64,
    stats: PathStatistics,
    workload_before: Option<Vec<f64>>,
    l_before: Vec<f64>,
    m_before: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(scn: &'a Scenario) -> Self {
        let n = scn.horizon_customers;
        let marks: Vec<MarkTriple> = scn.source.cursor(0).take(n).collect();
        let mut arrivals = Vec::with_capacity(n);
        let mut t = 0.0;
        for m in &marks {
            arrivals.push(t);
            t += m.xi;
        }
        let deadlines = arrivals.iter().zip(&marks).map(|(t, m)| t + m.dpat).collect();
        let mut calendar = BinaryHeap::new();
        calendar.push(Reverse(Event { time: 0.0, class: Class::Arrival, customer: 0 }));
        Self {
            scn,
            marks,
            arrivals,
            deadlines,
            state: vec![State::Pending; n],
            servers: vec![None; scn.servers],
            queue: VecDeque::new(),
            waiting: 0,
            in_system: 0,
            calendar,
            records: vec![None; n],
            l_expiry: f64::NEG_INFINITY,
            m_expiry: f64::NEG_INFINITY,
            stats: PathStatistics { customers: n, ..PathStatistics::default() },
            workload_before: (scn.servers == 1).then(|| Vec::with_capacity(n)),
            l_before: Vec::with_capacity(n),
            m_before: Vec::with_capacity(n),
        }
    }

    /// Latest departure the customer can have: deadline plus service in the
    /// begin model, the deadline in the end model.
    fn max_exit(&self, c: usize) -> f64 {
        match self.scn.model {
            Model::Begin => self.deadlines[c] + self.marks[c].sigma,
            Model::End => self.deadlines[c],
        }
    }

    fn min_exit(&self, c: usize) -> f64 {
        self.arrivals[c] + self.marks[c].sigma_min_d()
    }

    /// Time at which the single server finishes the work already committed
    /// when no further customer arrives.
    fn single_server_free_at(&self, now: f64) -> f64 {
        let mut free = match (self.servers[0], self.scn.model) {
            (None, _) => now,
            (Some(c), Model::Begin) => self.completion_time(c),
            (Some(c), Model::End) => self.completion_time(c).min(self.deadlines[c]),
        };
        for &c in self.queue.iter().filter(|c| self.state[**c] == State::Waiting) {
            let deadline = self.deadlines[c];
            if free <= deadline {
                free = match self.scn.model {
                    Model::Begin => free + self.marks[c].sigma,
                    Model::End => (free + self.marks[c].sigma).min(deadline),
                };
            }
        }
        free
    }

    fn completion_time(&self, c: usize) -> f64 {
        match self.state[c] {
            State::InService { start, .. } => start + self.marks[c].sigma,
            _ => unreachable!("completion time of a customer not in service"),
        }
    }

    fn start_service(&mut self, c: usize, server: usize, now: f64) {
        self.state[c] = State::InService { server, start: now };
        self.servers[server] = Some(c);
        self.calendar.push(Reverse(Event { time: now + self.marks[c].sigma, class: Class::Completion, customer: c }));
    }

    fn leave(&mut self, c: usize, now: f64, outcome: Outcome) {
        let (service_start, service_received) = match self.state[c] {
            State::InService { server, start } => {
                self.servers[server] = None;
                let received = (outcome == Outcome::AbortedInService).then_some(now - start);
                (Some(start), received)
            }
            _ => {
                self.waiting -= 1;
                (None, None)
            }
        };
        self.state[c] = State::Gone;
        self.in_system -= 1;
        match outcome {
            Outcome::Served => self.stats.served += 1,
            Outcome::AbandonedQueue => self.stats.abandoned_queue += 1,
            Outcome::AbortedInService => self.stats.aborted_in_service += 1,
        }
        if now < self.min_exit(c) || now > self.max_exit(c) {
            self.stats.sojourn_violations += 1;
        }
        let m = self.marks[c];
        self.records[c] = Some(CustomerRecord {
            index: c,
            arrival: self.arrivals[c],
            sigma: m.sigma,
            dpat: m.dpat,
            service_start,
            departure: now,
            outcome,
            service_received,
        });
    }

    fn dispatch(&mut self, now: f64) {
        while self.waiting > 0 {
            let Some(server) = self.servers.iter().position(Option::is_none) else { return };
            let c = loop {
                let c = self.queue.pop_front().expect("waiting customers are queued");
                if self.state[c] == State::Waiting {
                    break c;
                }
            };
            self.waiting -= 1;
            self.start_service(c, server, now);
        }
    }

    fn handle(&mut self, ev: Event) {
        let (c, now) = (ev.customer, ev.time);
        match ev.class {
            Class::Arrival => {
                if self.workload_before.is_some() {
                    let w = pos(self.single_server_free_at(now) - now);
                    self.workload_before.as_mut().expect("checked above").push(w);
                }
                let l = pos(self.l_expiry - now);
                let m = pos(self.m_expiry - now);
                self.l_before.push(l);
                self.m_before.push(m);
                self.stats.arrivals_l_zero += usize::from(l == 0.0);
                self.stats.arrivals_m_zero += usize::from(m == 0.0);
                self.stats.arrivals_x_zero += usize::from(self.in_system == 0);
                self.l_expiry = self.l_expiry.max(self.max_exit(c));
                self.m_expiry = self.m_expiry.max(self.min_exit(c));
                self.in_system += 1;
                self.state[c] = State::Waiting;
                self.waiting += 1;
                self.queue.push_back(c);
                if self.scn.model == Model::End || self.servers.iter().all(Option::is_some) {
                    self.calendar.push(Reverse(Event { time: self.deadlines[c], class: Class::Deadline, customer: c }));
                }
                self.dispatch(now);
                if c + 1 < self.marks.len() {
                    let next = Event { time: self.arrivals[c + 1], class: Class::Arrival, customer: c + 1 };
                    self.calendar.push(Reverse(next));
                }
            }
            Class::Deadline => match (self.state[c], self.scn.model) {
                (State::Waiting, _) => self.leave(c, now, Outcome::AbandonedQueue),
                (State::InService { .. }, Model::End) => {
                    self.leave(c, now, Outcome::AbortedInService);
                    self.dispatch(now);
                }
                _ => {}
            },
            Class::Completion => {
                // a completion left over from a service aborted at the deadline finds the customer gone
                if let State::InService { .. } = self.state[c] {
                    self.leave(c, now, Outcome::Served);
                    self.dispatch(now);
                }
            }
        }
    }

    fn check_batch(&mut self, now: f64, prev_in_system: usize) {
        let l = pos(self.l_expiry - now);
        let m = pos(self.m_expiry - now);
        let x = self.in_system;
        if (l == 0.0 && x != 0) || (x == 0 && m != 0.0) {
            self.stats.inclusion_violations += 1;
        }
        if x == 0 && prev_in_system > 0 {
            self.stats.empty_epoch_count += 1;
        }
        if self.waiting > 0 && self.servers.iter().any(Option::is_none) {
            self.stats.idling_violations += 1;
        }
    }

    fn run(mut self) -> Simulation {
        let mut last = 0.0;
        let mut area = 0.0;
        while let Some(Reverse(first)) = self.calendar.pop() {
            let now = first.time;
            let before = self.in_system;
            area += before as f64 * (now - last);
            last = now;
            self.stats.events += 1;
            self.handle(first);
            while let Some(Reverse(ev)) = self.calendar.peek().copied() {
                if ev.time != now {
                    break;
                }
                self.calendar.pop();
                self.stats.events += 1;
                self.handle(ev);
            }
            self.check_batch(now, before);
        }
        self.stats.end_time = last;
        self.stats.time_average_congestion = if last > 0.0 { area / last } else { 0.0 };
        self.stats.in_system_at_end = self.in_system;
        Simulation {
            records: self.records.into_iter().map(|r| r.expect("every customer departs after draining")).collect(),
            stats: self.stats,
            workload_before: self.workload_before,
            l_before: self.l_before,
            m_before: self.m_before,
        }
    }
}

/// Runs the scenario to completion: all customers arrive, then the system drains.
pub fn simulate(scn: &Scenario) -> Result<Simulation> {
    if scn.servers == 0 || scn.horizon_customers == 0 {
        return Err(Error::InvalidArgument("servers and horizon_customers must be positive".into()));
    }
    Ok(Engine::new(scn).run())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenerationReport {
    pub stats: PathStatistics,
    /// Fractions of arrivals finding `L = 0` and `M = 0`.
    pub freq_l_zero: f64,
    pub freq_m_zero: f64,
    /// `P(Y = 0)` for the dominating and the dominated recursion.
    pub prob_zero_upper: ZeroProbability,
    pub prob_zero_lower: ZeroProbability,
}

/// Path statistics next to the zero probabilities of the dominating recursion
/// (sufficient condition for emptying) and the dominated one (necessary).
pub fn regeneration_stats(scn: &Scenario, sim: &Simulation, replicas: usize, max_depth: usize) -> Result<RegenerationReport> {
    let upper = match scn.model {
        Model::Begin => AlphaKind::SigmaPlusD,
        Model::End => AlphaKind::DOnly,
    };
    let n = sim.stats.customers.max(1) as f64;
    Ok(RegenerationReport {
        stats: sim.stats.clone(),
        freq_l_zero: sim.stats.arrivals_l_zero as f64 / n,
        freq_m_zero: sim.stats.arrivals_m_zero as f64 / n,
        prob_zero_upper: prob_zero_estimate(&RecursionSpec::new(upper), &scn.source, replicas, max_depth)?,
        prob_zero_lower: prob_zero_estimate(&RecursionSpec::sigma_min_d(), &scn.source, replicas, max_depth)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub customers: usize,
    /// `max_n |DES workload before T_n - W_n|`.
    pub max_workload_discrepancy: f64,
    /// Same for `L` and `M` against their arrival-epoch recursions.
    pub max_l_discrepancy: f64,
    pub max_m_discrepancy: f64,
}

/// Single-server DES against the arrival-epoch recursions on the same marks.
pub fn cross_validate_recursion(scn: &Scenario) -> Result<CrossValidation> {
    if scn.servers != 1 {
        return Err(Error::Capability(format!(
            "cross-validation needs a single server, scenario has {}",
            scn.servers
        )));
    }
    let sim = simulate(scn)?;
    let des_w = sim.workload_before.as_ref().expect("single-server runs record the workload");
    let upper = RecursionSpec::new(match scn.model {
        Model::Begin => AlphaKind::SigmaPlusD,
        Model::End => AlphaKind::DOnly,
    });
    let lower = RecursionSpec::sigma_min_d();
    let (mut w, mut l, mut m) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut out = CrossValidation {
        customers: scn.horizon_customers,
        max_workload_discrepancy: 0.0,
        max_l_discrepancy: 0.0,
        max_m_discrepancy: 0.0,
    };
    for (n, mark) in scn.source.cursor(0).take(scn.horizon_customers).enumerate() {
        out.max_workload_discrepancy = out.max_workload_discrepancy.max((des_w[n] - w).abs());
        out.max_l_discrepancy = out.max_l_discrepancy.max((sim.l_before[n] - l).abs());
        out.max_m_discrepancy = out.max_m_discrepancy.max((sim.m_before[n] - m).abs());
        w = scn.model.step(w, &mark)?;
        l = crate::recursion::step(l, &mark, &upper)?;
        m = crate::recursion::step(m, &mark, &lower)?;
    }
    Ok(out)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-customer CSV: index, arrival, sigma, dpat, service_start, departure, outcome.
pub fn write_records_csv(records: &[CustomerRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "index,arrival,sigma,dpat,service_start,departure,outcome,service_received")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.index,
            r.arrival,
            r.sigma,
            r.dpat,
            opt(r.service_start),
            r.departure,
            r.outcome,
            opt(r.service_received)
        )?;
    }
    Ok(())
}
