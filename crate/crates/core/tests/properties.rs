//! Property tests for the invariants each module promises.

use crosslayer::baselines::{maxci_allocate, mlwdf_allocate, pf_allocate, RoundRobin, ThroughputAverage};
use crosslayer::channel::{CqiGrid, McsTable, MAX_CQI, MIN_CQI};
use crosslayer::mac::downlink::td_allocate;
use crosslayer::mac::uplink::{
    ack_priority, playback_weight, schedule_flags, tu_allocate, PendingAck, UplinkClient, UplinkConfig,
};
use crosslayer::sim::session::{Playback, PlaybackState};
use crosslayer::sim::{run, SimConfig};
use crosslayer::tcp::{TcpConfig, TcpFlow, MSS};
use proptest::prelude::*;

fn grid_strategy(max_k: usize, max_n: usize) -> impl Strategy<Value = CqiGrid> {
    (1..=max_k, 1..=max_n).prop_flat_map(|(k, n)| {
        prop::collection::vec(prop::collection::vec(MIN_CQI..=MAX_CQI, n), k)
            .prop_map(|rows| CqiGrid::from_rows(&rows))
    })
}

fn queues_for(grid: &CqiGrid, raw: &[u64]) -> Vec<u64> {
    (0..grid.clients()).map(|k| raw[k % raw.len()]).collect()
}

// ---------------------------------------------------------------- tcp

#[derive(Clone, Debug)]
enum Event {
    Send,
    AckNext(u8),
    DupAck,
    Timeout,
    Resend,
}

fn event() -> impl Strategy<Value = Event> {
    prop_oneof![
        4 => Just(Event::Send),
        3 => (1u8..4).prop_map(Event::AckNext),
        2 => Just(Event::DupAck),
        1 => Just(Event::Timeout),
        2 => Just(Event::Resend),
    ]
}

/// Replay `events`, checking the flow after each one; returns the trajectory.
fn replay(events: &[Event]) -> Result<Vec<(u64, u64, u64, u64)>, TestCaseError> {
    let mut f = TcpFlow::new(TcpConfig::default());
    let mut now = 0.0;
    let mut trail = Vec::new();
    for e in events {
        now += 0.003;
        match *e {
            // Retransmissions go first, as in the engine.
            Event::Send => {
                if f.can_send() >= MSS as u64 && !f.has_retransmission() {
                    f.send_new(MSS, now);
                }
            }
            Event::AckNext(n) => {
                let ack = (f.snd_una() + n as u64 * MSS as u64).min(f.snd_max());
                f.on_ack(ack, now);
            }
            Event::DupAck => f.on_ack(f.snd_una(), now),
            Event::Timeout => f.on_timeout(now),
            Event::Resend => {
                let _ = f.take_retransmission(now);
            }
        }
        prop_assert!(f.cwnd() >= MSS as f64, "cwnd {}", f.cwnd());
        prop_assert!(f.ssthresh() >= 2.0 * MSS as f64, "ssthresh {}", f.ssthresh());
        prop_assert!((0.2..=4.0).contains(&f.rto()), "rto {}", f.rto());
        let seqs: Vec<u64> = f.ledger().iter().map(|s| s.seq).collect();
        prop_assert!(seqs.windows(2).all(|w| w[0] < w[1]), "ledger {seqs:?}");
        prop_assert!(seqs.first().is_none_or(|&s| s >= f.snd_una()), "acked bytes back in ledger");
        trail.push((f.cwnd().to_bits(), f.ssthresh().to_bits(), f.rto().to_bits(), f.snd_una()));
    }
    Ok(trail)
}

proptest! {
    #[test]
    fn tcp_state_stays_in_bounds(events in prop::collection::vec(event(), 1..300)) {
        replay(&events)?;
    }

    #[test]
    fn tcp_event_streams_are_deterministic(events in prop::collection::vec(event(), 1..200)) {
        prop_assert_eq!(replay(&events)?, replay(&events)?);
    }
}

// ---------------------------------------------------------------- channel

proptest! {
    #[test]
    fn superset_never_raises_mcs(
        cqis in prop::collection::vec(MIN_CQI..=MAX_CQI, 1..20),
        extra in MIN_CQI..=MAX_CQI,
    ) {
        let t = McsTable::standard();
        let base = t.max_mcs(cqis.iter().copied()).unwrap();
        let grown = t.max_mcs(cqis.iter().copied().chain([extra])).unwrap();
        prop_assert!(grown <= base);
    }

    #[test]
    fn set_capacity_is_count_times_weakest_rate(cqis in prop::collection::vec(MIN_CQI..=MAX_CQI, 0..20)) {
        let t = McsTable::standard();
        let expect = match cqis.iter().min() {
            None => 0,
            Some(&m) => cqis.len() as u32 * t.rb_capacity(t.mcs_for_cqi(m)).unwrap(),
        };
        prop_assert_eq!(t.set_capacity(cqis.iter().copied()), expect);
    }
}

// ---------------------------------------------------------------- downlink

proptest! {
    #[test]
    fn td_ownership_mcs_and_determinism(
        grid in grid_strategy(8, 20),
        raw_q in prop::collection::vec(0u64..6000, 8),
        raw_r in prop::collection::vec(0.0f64..500.0, 8),
    ) {
        let t = McsTable::standard();
        let q = queues_for(&grid, &raw_q);
        let r: Vec<f64> = (0..grid.clients()).map(|k| raw_r[k]).collect();
        let a = td_allocate(&grid, &r, &q, &t);
        prop_assert_eq!(a.verify(&grid, &t), Ok(()));
        prop_assert_eq!(&a, &td_allocate(&grid, &r, &q, &t));
    }

    #[test]
    fn td_phase_one_serves_requirements_first(
        grid in grid_strategy(8, 20),
        raw_q in prop::collection::vec(1u64..6000, 8),
        raw_r in prop::collection::vec(1.0f64..500.0, 8),
    ) {
        let t = McsTable::standard();
        let q = queues_for(&grid, &raw_q);
        let need: Vec<f64> = (0..grid.clients()).map(|k| raw_r[k].min(q[k] as f64)).collect();
        let a = td_allocate(&grid, &need, &q, &t);
        // Replay the grants: while another client is short of its
        // requirement, nobody already covered gets another RB.
        let phases: Vec<u8> = a.grants.iter().map(|g| g.phase).collect();
        prop_assert!(phases.windows(2).all(|w| w[0] <= w[1]), "{phases:?}");
        let mut held: Vec<Vec<u8>> = vec![Vec::new(); grid.clients()];
        for g in &a.grants {
            let cap = |k: usize, h: &Vec<Vec<u8>>| t.set_capacity(h[k].iter().copied()) as f64;
            let other_short = (0..grid.clients()).any(|k| k != g.client && cap(k, &held) < need[k]);
            if other_short {
                prop_assert!(cap(g.client, &held) < need[g.client], "surplus grant {g:?} while others wait");
                prop_assert_eq!(g.phase, 1);
            }
            held[g.client].push(grid.get(g.client, g.rb));
        }
    }

    #[test]
    fn td_covers_requirements_when_feasible(
        k in 1usize..6,
        n in 1usize..25,
        row_cqi in prop::collection::vec(MIN_CQI..=MAX_CQI, 6),
        raw_r in prop::collection::vec(1.0f64..400.0, 6),
    ) {
        // Flat rows: one CQI per client, so feasibility is exact.
        let t = McsTable::standard();
        let grid = CqiGrid::from_rows(&(0..k).map(|i| vec![row_cqi[i]; n]).collect::<Vec<_>>());
        let need: Vec<f64> = raw_r[..k].to_vec();
        let q = vec![u64::MAX / 4; k];
        let rbs: u64 = (0..k).map(|i| (need[i].ceil() as u64).div_ceil(t.cqi_rate(row_cqi[i]) as u64)).sum();
        prop_assume!(rbs <= n as u64);
        let a = td_allocate(&grid, &need, &q, &t);
        for i in 0..k {
            prop_assert!(a.capacity[i] as f64 >= need[i], "client {i}: {} < {}", a.capacity[i], need[i]);
        }
    }
}

// ---------------------------------------------------------------- uplink

fn uplink_client() -> impl Strategy<Value = UplinkClient> {
    (
        prop::collection::vec((1u32..=40, 0.0f64..1.0), 0..6),
        1.0f64..60.0,
        2.0f64..60.0,
        0.2f64..4.0,
        0.01f64..0.99,
    )
        .prop_map(|(acks, cw, ss, rto, share)| UplinkClient {
            acks: acks.into_iter().map(|(size, age)| PendingAck { size, sent: 10.0 - age }).collect(),
            cwnd: cw * MSS as f64,
            ssthresh: ss * MSS as f64,
            rto,
            urgency_share: share,
        })
}

proptest! {
    #[test]
    fn tu_fifo_prefix_and_capacity_ceiling(
        grid in grid_strategy(6, 12),
        clients in prop::collection::vec(uplink_client(), 6),
    ) {
        let t = McsTable::standard();
        let clients = &clients[..grid.clients()];
        let a = tu_allocate(&grid, clients, 10.0, &t, &UplinkConfig::default());
        prop_assert_eq!(a.verify(&grid, &t), Ok(()));
        for (k, c) in clients.iter().enumerate() {
            let sizes: Vec<u32> = c.acks.iter().map(|a| a.size).collect();
            let flags = schedule_flags(&sizes, a.capacity[k] as u64);
            prop_assert!(flags.windows(2).all(|w| w[0] >= w[1]), "not a prefix: {flags:?}");
            if let Some(m) = a.mcs[k] {
                let one_rb = t.rb_capacity(m).unwrap() as u64;
                prop_assert!(a.capacity[k] as u64 <= c.pending_bytes() + one_rb);
            }
        }
    }

    #[test]
    fn priority_branches_are_ordered(
        deadline in 1e-6f64..2.0,
        below in 1.0f64..1e6,
        above in 1.0f64..1e6,
    ) {
        // An urgent ACK (deadline at most half of a threshold up to 4 s)
        // beats both window branches at any gap. Between the window
        // branches only equal gaps are comparable: 1e3 / 1e6 is below 1 / 1.
        let cfg = UplinkConfig::default();
        let threshold = 4.0;
        let urgent = ack_priority(deadline, threshold, 0.0, 0.0, &cfg);
        let growing = ack_priority(threshold, threshold, 1e6 - below, 1e6, &cfg);
        let probing = ack_priority(threshold, threshold, 1e6 + above, 1e6, &cfg);
        prop_assert!(urgent > growing && urgent > probing, "{urgent} vs {growing}, {probing}");
        let probing_same_gap = ack_priority(threshold, threshold, 1e6 + below, 1e6, &cfg);
        prop_assert!(growing > probing_same_gap);
    }

    #[test]
    fn playback_weight_is_a_proper_share(own in 0u64..1000, others in 0u64..1000, clients in 1usize..50) {
        let w = playback_weight(own, own + others, clients);
        prop_assert!(w > 0.0 && w < 1.0 || (clients == 1 && others == 0 && w == 1.0));
    }
}

// ---------------------------------------------------------------- baselines

proptest! {
    #[test]
    fn baselines_are_valid_and_deterministic(
        grid in grid_strategy(8, 20),
        raw_q in prop::collection::vec(0u64..6000, 8),
        avg in prop::collection::vec(1.0f64..2e5, 8),
        hol in prop::collection::vec(0.0f64..0.5, 8),
        rounds in 1usize..4,
    ) {
        let t = McsTable::standard();
        let k = grid.clients();
        let q = queues_for(&grid, &raw_q);
        let avg = ThroughputAverage::with_values(avg[..k].to_vec());
        let hol = &hol[..k];
        let pf = pf_allocate(&grid, &q, &avg, &t);
        let mc = maxci_allocate(&grid, &q, &t);
        let ml = mlwdf_allocate(&grid, &q, hol, &avg, &t);
        for a in [&pf, &mc, &ml] {
            prop_assert_eq!(a.verify(&grid, &t), Ok(()));
        }
        prop_assert_eq!(&pf, &pf_allocate(&grid, &q, &avg, &t));
        prop_assert_eq!(&mc, &maxci_allocate(&grid, &q, &t));
        prop_assert_eq!(&ml, &mlwdf_allocate(&grid, &q, hol, &avg, &t));
        let (mut r1, mut r2) = (RoundRobin::default(), RoundRobin::default());
        for _ in 0..rounds {
            let a = r1.allocate(&grid, &q, &t);
            prop_assert_eq!(a.verify(&grid, &t), Ok(()));
            prop_assert_eq!(a, r2.allocate(&grid, &q, &t));
        }
    }
}

// ---------------------------------------------------------------- playback

proptest! {
    #[test]
    fn rebuffering_adds_up_and_stalls_have_nothing_buffered(
        frames in prop::collection::vec(1u32..4, 5..60),
        arrivals in prop::collection::vec(0usize..6, 200..600),
        startup in 1usize..10,
    ) {
        let dt = 0.01;
        let mut p = Playback::new(frames.clone(), 25, startup);
        let mut pending: Vec<usize> = frames.iter().enumerate().flat_map(|(f, &n)| vec![f; n as usize]).collect();
        pending.reverse();
        let mut now = 0.0;
        for burst in arrivals {
            for _ in 0..burst {
                if let Some(f) = pending.pop() {
                    p.packet_resolved(f);
                }
            }
            let expect = (p.complete_frames() - p.started_frames().min(p.complete_frames())) as f64 / 25.0;
            prop_assert!((p.buffered_seconds() - expect).abs() < 1e-12);
            if p.state() == PlaybackState::Stalled {
                prop_assert_eq!(p.buffered_seconds(), 0.0);
            }
            now += dt;
            p.advance(now, dt);
        }
        let closed: f64 = p.stalls.iter().map(|s| s.end.unwrap_or(now) - s.start).sum();
        // An open stall is charged per tick, so it trails the clock by one tick.
        let slack = if p.state() == PlaybackState::Stalled { dt } else { 0.0 };
        prop_assert!((p.rebuffer_time - closed).abs() <= slack + 1e-9, "{} vs {closed}", p.rebuffer_time);
        prop_assert_eq!(p.rebuffer_events(), p.stalls.len());
    }
}

// ---------------------------------------------------------------- engine

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn runs_conserve_bytes_and_never_overdeliver(
        seed in 0u64..1000,
        combo in 0usize..6,
        clients in 2usize..6,
        dl_rbs in 4usize..20,
        apd in any::<bool>(),
        loss in 0.0f64..0.02,
    ) {
        let (ul, dl) = [("tu", "td"), ("tu", "maxci"), ("pf", "pf"), ("rr", "rr"), ("mlwdf", "mlwdf"), ("pf", "rr")][combo];
        let mut cfg = SimConfig::preset("poor_channel_8c").unwrap().with_clients(clients);
        cfg.seed = seed;
        cfg.dl_rbs = dl_rbs;
        cfg.ul_sched = ul.into();
        cfg.dl_sched = dl.into();
        cfg.apd.enabled = apd;
        cfg.duration_ttis = 3000;
        let traces = crosslayer::sim::engine::build_traces(&cfg, None).unwrap();
        let mut sim = crosslayer::sim::Simulation::new(cfg.clone(), traces).unwrap();
        sim.loss_probability = loss;
        while !sim.done() {
            sim.step();
        }
        let r = sim.report();
        prop_assert!(r.conservation_ok);
        prop_assert_eq!(r.phantom_deliveries, 0);
        for c in &r.clients {
            prop_assert_eq!(c.generated_bytes, c.apd_dropped_bytes + c.delivered_bytes + c.queued_bytes);
            prop_assert!(c.rebuffer_s >= 0.0 && (0.0..=1.0).contains(&c.quality_retention));
        }
        if !apd {
            prop_assert!(r.clients.iter().all(|c| c.apd_dropped_bytes == 0));
        }
        let _ = run(&cfg).unwrap();
    }
}
