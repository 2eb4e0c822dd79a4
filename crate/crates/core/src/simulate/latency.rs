//! Frame-by-frame queueing of finite traffic and per-packet latency.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::Result;
use crate::model::{Direction, Duplex, LinkId, NodeId};
use crate::simulate::frame::{BaselineState, FrameEngine, Scheme};

/// Bits offered by every flow in every frame: `frames[f][flow]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTrace {
    pub frames: Vec<Vec<f64>>,
}

impl DemandTrace {
    /// Uniform per-frame demand with mean `mean_bits` per flow, split between
    /// directions by `downlink_fraction` (0.5 is symmetric).
    pub fn uniform<R: Rng + ?Sized>(
        directions: &[Direction],
        frames: usize,
        mean_bits: f64,
        downlink_fraction: f64,
        rng: &mut R,
    ) -> Self {
        let frames = (0..frames)
            .map(|_| {
                directions
                    .iter()
                    .map(|d| {
                        let weight = match d {
                            Direction::Downlink => downlink_fraction,
                            Direction::Uplink => 1.0 - downlink_fraction,
                        };
                        let mean = 2.0 * weight * mean_bits;
                        if mean > 0.0 {
                            rng.random_range(0.0..2.0 * mean)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self { frames }
    }

    /// The same demand in every frame.
    pub fn constant(flow_bits: Vec<f64>, frames: usize) -> Self {
        Self {
            frames: vec![flow_bits; frames],
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    /// Frames from arrival to delivery, one entry per packet.
    pub per_packet_latency: Vec<f64>,
    /// Packets still queued when the drain budget ran out.
    pub undelivered: usize,
    pub offered_bits: f64,
    /// Bits delivered during the arrival window.
    pub delivered_bits: f64,
    pub throughput: f64,
    pub per_flow_throughput: Vec<f64>,
    pub switch_points: Vec<BTreeMap<NodeId, f64>>,
}

impl LatencyReport {
    pub fn mean_latency(&self) -> f64 {
        if self.per_packet_latency.is_empty() {
            return 0.0;
        }
        self.per_packet_latency.iter().sum::<f64>() / self.per_packet_latency.len() as f64
    }
}

#[derive(Debug, Clone)]
struct Chunk {
    packet: usize,
    hop: usize,
    bits: f64,
    ready: usize,
}

#[derive(Debug, Clone)]
struct Packet {
    flow: usize,
    arrival: usize,
    remaining: f64,
    delivered: Option<usize>,
}

const BIT_EPS: f64 = 1e-6;

/// Runs the arrival trace, then drains queues for at most `drain_frames`.
///
/// Each link serves its queue first-in first-out up to its frame capacity.
/// Bits reaching a relay move on next frame, or within the same frame when
/// the relay is full duplex and both hops are active together.
pub fn packet_latency(
    engine: &FrameEngine,
    scheme: Scheme,
    trace: &DemandTrace,
    drain_frames: usize,
) -> Result<LatencyReport> {
    let radio = engine.radio();
    let frame_length = radio.params().frame_length;
    let flows = engine.flows();
    let mut queues: BTreeMap<LinkId, Vec<Chunk>> =
        engine.links().iter().map(|&l| (l, Vec::new())).collect();
    let mut packets: Vec<Packet> = Vec::new();
    let mut state = BaselineState::default();
    let mut switch_points = Vec::new();
    let mut delivered_bits = 0.0;
    let mut per_flow = vec![0.0; flows.len()];
    let mut offered = 0.0;
    let window = trace.len();

    let mut f = 0;
    loop {
        if f < window {
            for (i, &bits) in trace.frames[f].iter().enumerate() {
                if bits <= BIT_EPS || flows[i].links.is_empty() {
                    continue;
                }
                offered += bits;
                let id = packets.len();
                packets.push(Packet {
                    flow: i,
                    arrival: f,
                    remaining: bits,
                    delivered: None,
                });
                queues
                    .get_mut(&flows[i].links[0])
                    .expect("flow link")
                    .push(Chunk {
                        packet: id,
                        hop: 0,
                        bits,
                        ready: f,
                    });
            }
        }
        let pending = queues.values().any(|q| !q.is_empty());
        if f >= window && (!pending || f >= window + drain_frames) {
            break;
        }

        // Queued bits, plus bits that can cross full-duplex relays within this frame
        // when the scheme activates several links at once.
        let mut link_bits: BTreeMap<LinkId, f64> = queues.keys().map(|&l| (l, 0.0)).collect();
        for q in queues.values() {
            for c in q.iter().filter(|c| c.ready <= f) {
                let path = &flows[packets[c.packet].flow].links;
                for (h, l) in path.iter().enumerate().skip(c.hop) {
                    *link_bits.get_mut(l).expect("flow link") += c.bits;
                    if scheme != Scheme::Jsra
                        || (h + 1 < path.len() && radio.duplex(radio.link(*l).rx) == Duplex::Half)
                    {
                        break;
                    }
                }
            }
        }
        let alloc = engine.allocate(scheme, Some(&link_bits), &mut state)?;
        switch_points.push(engine.switch_points(&alloc, |l| link_bits[&l] > 0.0));
        let mut capacity: BTreeMap<LinkId, f64> = alloc
            .link_rate
            .iter()
            .map(|(&l, &r)| (l, r * frame_length))
            .collect();

        let mut progress = true;
        while progress {
            progress = false;
            for &l in engine.links() {
                let mut cap = capacity[&l];
                if cap <= BIT_EPS {
                    continue;
                }
                let queue = queues.get_mut(&l).expect("queue");
                let mut served: Vec<(usize, usize, f64)> = Vec::new();
                for c in queue.iter_mut() {
                    if cap <= BIT_EPS {
                        break;
                    }
                    if c.ready > f || c.bits <= 0.0 {
                        continue;
                    }
                    let take = c.bits.min(cap);
                    c.bits -= take;
                    cap -= take;
                    served.push((c.packet, c.hop, take));
                }
                queue.retain(|c| c.bits > BIT_EPS);
                capacity.insert(l, cap);
                for (packet, hop, bits) in served {
                    progress = true;
                    let flow = &flows[packets[packet].flow];
                    if hop + 1 == flow.links.len() {
                        let p = &mut packets[packet];
                        p.remaining -= bits;
                        if f < window {
                            delivered_bits += bits;
                            per_flow[p.flow] += bits;
                        }
                        if p.remaining <= BIT_EPS && p.delivered.is_none() {
                            p.delivered = Some(f);
                        }
                    } else {
                        let next = flow.links[hop + 1];
                        let relay = radio.link(l).rx;
                        let together = alloc.unit_of.get(&l) == alloc.unit_of.get(&next);
                        let ready = if together && radio.duplex(relay) != Duplex::Half {
                            f
                        } else {
                            f + 1
                        };
                        queues.get_mut(&next).expect("queue").push(Chunk {
                            packet,
                            hop: hop + 1,
                            bits,
                            ready,
                        });
                    }
                }
            }
        }
        f += 1;
    }

    let mut latency = Vec::with_capacity(packets.len());
    let mut undelivered = 0;
    for p in &packets {
        let done = p.delivered.unwrap_or_else(|| {
            undelivered += 1;
            f
        });
        latency.push((done + 1 - p.arrival) as f64);
    }
    let seconds = window as f64 * frame_length;
    Ok(LatencyReport {
        per_packet_latency: latency,
        undelivered,
        offered_bits: offered,
        delivered_bits,
        throughput: if seconds > 0.0 {
            delivered_bits / seconds
        } else {
            0.0
        },
        per_flow_throughput: per_flow
            .into_iter()
            .map(|b| if seconds > 0.0 { b / seconds } else { 0.0 })
            .collect(),
        switch_points,
    })
}
