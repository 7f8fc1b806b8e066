use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::{EventCounts, Packet, ReplicationResult, SimConfig};

/// Independent Poisson packet streams feeding one zero-buffer server.
#[derive(Debug, Clone)]
pub(crate) struct StreamSet {
    pub rates: Vec<f64>,
    pub preempt: Vec<f64>,
    /// Row-major `streams x processes` probabilities that a packet is informative.
    pub informative: Vec<f64>,
    pub n_processes: usize,
    pub service_rate: f64,
}

impl StreamSet {
    fn n_streams(&self) -> usize {
        self.rates.len()
    }
}

struct InService {
    packet: Packet,
    completes_at: f64,
}

struct Tracker {
    warmup: f64,
    horizon: f64,
    /// Generation time of the freshest delivered update, per process.
    last_generated: Vec<f64>,
    area: Vec<f64>,
    occupancy: Vec<[f64; 3]>,
}

impl Tracker {
    /// Accumulates age area and server-state time over `[from, to]` clipped to the window.
    fn advance(&mut self, from: f64, to: f64, server: Option<&InService>) {
        let a = from.max(self.warmup);
        let b = to.min(self.horizon);
        if b <= a {
            return;
        }
        let len = b - a;
        for (j, (area, &t0)) in self.area.iter_mut().zip(&self.last_generated).enumerate() {
            *area += 0.5 * ((a - t0) + (b - t0)) * len;
            let state = match server {
                None => 0,
                Some(s) if s.packet.informative_for[j] => 1,
                Some(_) => 2,
            };
            self.occupancy[j][state] += len;
        }
    }
}

#[inline]
fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

/// Runs one replication. The generator is ChaCha8 keyed by `sim.seed` on stream `replication`.
pub(crate) fn run_replication(
    streams: &StreamSet,
    sim: &SimConfig,
    replication: u64,
) -> ReplicationResult {
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    rng.set_stream(replication);
    let m = streams.n_processes;
    let horizon = sim.horizon;

    let mut next_arrival: Vec<f64> = streams
        .rates
        .iter()
        .map(|&r| {
            if r > 0.0 {
                exp_sample(&mut rng, r)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut last_arrival = vec![0.0f64; streams.n_streams()];
    let mut tracker = Tracker {
        warmup: sim.warmup,
        horizon,
        last_generated: vec![0.0; m],
        area: vec![0.0; m],
        occupancy: vec![[0.0; 3]; m],
    };
    let mut counts = EventCounts::default();
    let mut server: Option<InService> = None;
    let mut spare = vec![false; m];
    let mut now = 0.0;

    loop {
        let (source, arrival_at) = next_arrival.iter().copied().enumerate().fold(
            (usize::MAX, f64::INFINITY),
            |best, (i, t)| {
                if t < best.1 {
                    (i, t)
                } else {
                    best
                }
            },
        );
        let completion_at = server.as_ref().map_or(f64::INFINITY, |s| s.completes_at);
        let t = arrival_at.min(completion_at);
        if t > horizon {
            tracker.advance(now, horizon, server.as_ref());
            break;
        }
        tracker.advance(now, t, server.as_ref());
        now = t;

        if completion_at <= arrival_at {
            let done = server.take().expect("completion without packet in service");
            for (j, &informative) in done.packet.informative_for.iter().enumerate() {
                if informative && done.packet.generated_at > tracker.last_generated[j] {
                    tracker.last_generated[j] = done.packet.generated_at;
                }
            }
            spare = done.packet.informative_for;
            counts.completions += 1;
            continue;
        }

        counts.arrivals += 1;
        debug_assert!(now >= last_arrival[source]);
        last_arrival[source] = now;
        next_arrival[source] = now + exp_sample(&mut rng, streams.rates[source]);
        let row = &streams.informative[source * m..(source + 1) * m];
        for (bit, &c) in spare.iter_mut().zip(row) {
            *bit = rng.random::<f64>() < c;
        }
        let packet = Packet {
            source,
            generated_at: now,
            informative_for: std::mem::take(&mut spare),
        };
        match server.as_mut() {
            None => {
                server = Some(InService {
                    packet,
                    completes_at: now + exp_sample(&mut rng, streams.service_rate),
                });
            }
            Some(busy) => {
                if rng.random::<f64>() < streams.preempt[source] {
                    counts.preemptions += 1;
                    let old = std::mem::replace(&mut busy.packet, packet);
                    busy.completes_at = now + exp_sample(&mut rng, streams.service_rate);
                    spare = old.informative_for;
                } else {
                    counts.drops += 1;
                    spare = packet.informative_for;
                }
            }
        }
        if spare.len() != m {
            spare = vec![false; m];
        }
    }
    counts.in_service_at_horizon = u64::from(server.is_some());

    let window = horizon - sim.warmup;
    ReplicationResult {
        replication,
        aoi: tracker.area.iter().map(|a| a / window).collect(),
        occupancy: tracker
            .occupancy
            .iter()
            .map(|o| [o[0] / window, o[1] / window, o[2] / window])
            .collect(),
        counts,
    }
}
