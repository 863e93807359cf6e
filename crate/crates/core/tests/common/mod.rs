//! Shared builders and mechanism checks for the integration tests.
//!
//! The checks return `Err(reason)` instead of panicking so the acceptance
//! target can report them line by line.

#![allow(dead_code)]

use assist_core::engine::Phase;
use assist_core::{Detail, Engine, EngineParams, Label, LabeledGraph, NodeId, Side, TickReport};

pub type Check = Result<(), String>;

pub fn graph(side: Side, vocab: usize, nodes: &[(u32, u64)], edges: &[(NodeId, NodeId)]) -> LabeledGraph {
    let mut g = LabeledGraph::new(side, vocab);
    for &(l, d) in nodes {
        g.add_node(Label(l), Detail(d)).unwrap();
    }
    for &(u, v) in edges {
        g.add_edge(u, v).unwrap();
    }
    g
}

/// A1 - B1 in both graphs.
pub fn pair() -> (LabeledGraph, LabeledGraph) {
    let nodes = [(0, 1), (1, 1)];
    (
        graph(Side::Query, 2, &nodes, &[(0, 1)]),
        graph(Side::Data, 2, &nodes, &[(0, 1)]),
    )
}

pub fn capped(cap: usize) -> EngineParams {
    EngineParams {
        max_agents_per_tick: Some(cap),
        ..EngineParams::default()
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// With no agents every node decays as 0.9^t until it crosses the floor,
/// then reads exactly zero.
pub fn pure_decay() -> Check {
    let (q, d) = pair();
    let mut e = Engine::new(q, d, capped(0)).unwrap();
    for t in 1..=140 {
        let r = e.tick();
        ensure(r.spawned == 0, || format!("tick {t}: spawned {}", r.spawned))?;
        let expect = 0.9f64.powi(t);
        for side in [Side::Query, Side::Data] {
            for n in 0..2 {
                let p = e.graph(side).node(n).pher;
                let want = if expect > 1e-6 { expect } else { 0.0 };
                ensure(close(p, want, 1e-12), || {
                    format!("tick {t} {side:?} node {n}: pher {p}, want {want}")
                })?;
            }
        }
    }
    Ok(())
}

/// Query path A1-B1-C1-D1, data A1-B1-C1 with D1 hanging off B1. With one
/// agent per tick from A1, the first circuit closes on tick 4 and deposits
/// 0.1 on A1, B1 of both graphs and on the two A1-B1 edges, nothing else.
pub fn single_circuit_deposit() -> Check {
    let q = graph(
        Side::Query,
        4,
        &[(0, 1), (1, 1), (2, 1), (3, 1)],
        &[(0, 1), (1, 2), (2, 3)],
    );
    let d = graph(
        Side::Data,
        4,
        &[(0, 1), (1, 1), (2, 1), (3, 1)],
        &[(0, 1), (1, 2), (1, 3)],
    );
    let mut e = Engine::new(q, d, capped(1)).unwrap();
    let mut reports: Vec<TickReport> = Vec::new();
    for _ in 0..4 {
        reports.push(e.tick());
    }
    let circuits: Vec<usize> = reports.iter().map(|r| r.circuits).collect();
    ensure(circuits == [0, 0, 0, 1], || format!("circuits per tick {circuits:?}"))?;

    let decayed = 0.9f64.powi(4);
    let reinforced = 0.9 * (0.9f64.powi(3) + 0.1);
    for (side, n, want) in [
        (Side::Query, 0, reinforced),
        (Side::Query, 1, reinforced),
        (Side::Query, 2, decayed),
        (Side::Query, 3, decayed),
        (Side::Data, 0, reinforced),
        (Side::Data, 1, reinforced),
        (Side::Data, 2, decayed),
        (Side::Data, 3, decayed),
    ] {
        let p = e.graph(side).node(n).pher;
        ensure(close(p, want, 1e-12), || {
            format!("{side:?} node {n}: pher {p}, want {want}")
        })?;
    }
    let qe = e.query().edge_between(0, 1).unwrap();
    let de = e.data().edge_between(0, 1).unwrap();
    for (side, id) in [(Side::Query, qe), (Side::Data, de)] {
        let p = e.graph(side).edge(id).pher;
        ensure(close(p, 0.09, 1e-12), || {
            format!("{side:?} edge {id}: pher {p}, want 0.09")
        })?;
    }
    let others = [
        (Side::Query, e.query().edge_between(1, 2).unwrap()),
        (Side::Query, e.query().edge_between(2, 3).unwrap()),
        (Side::Data, e.data().edge_between(1, 2).unwrap()),
        (Side::Data, e.data().edge_between(1, 3).unwrap()),
    ];
    for (side, id) in others {
        let p = e.graph(side).edge(id).pher;
        ensure(p == 0.0, || format!("{side:?} edge {id} received pheromone {p}"))?;
    }

    // Totals before and after the deposit, taken from the tick reports.
    let before = reports[2].query_node_pher + reports[2].data_node_pher + reports[2].edge_pher;
    let after = reports[3].query_node_pher + reports[3].data_node_pher + reports[3].edge_pher;
    let deposited = after / 0.9 - before;
    ensure(close(deposited, 0.6, 1e-9), || {
        format!("deposit total {deposited}, want 0.6")
    })
}

/// Data neighbor whose only query peer is not adjacent to the start: the
/// agent reaches mode 4, finds no closing edge and leaves without deposit.
pub fn open_circuit_leaves_no_trace() -> Check {
    // query: 0=A1 - 1=C1, 2=C2 - 3=A2
    let q = graph(Side::Query, 3, &[(0, 1), (2, 1), (2, 2), (0, 2)], &[(0, 1), (2, 3)]);
    // data: 0=A1 - 1=C2, 2=C1 and 3=A2 isolated
    let d = graph(Side::Data, 3, &[(0, 1), (2, 2), (2, 1), (0, 2)], &[(0, 1)]);
    let mut e = Engine::new(q, d, capped(1)).unwrap();
    for _ in 0..3 {
        e.tick();
    }
    let first = &e.agents()[0];
    ensure(
        first.mode == assist_core::Mode::SeekStart && first.location == (Side::Query, 2),
        || {
            format!(
                "after three ticks the first agent is {:?} at {:?}",
                first.mode, first.location
            )
        },
    )?;
    let r = e.tick();
    ensure(r.circuits == 0 && r.deallocated >= 1, || format!("tick 4 report {r:?}"))?;
    ensure(e.registry().matched_edge_count() == 0, || {
        "open circuit was recorded".into()
    })?;
    for side in [Side::Query, Side::Data] {
        let g = e.graph(side);
        for n in g.node_ids() {
            let p = g.node(n).pher;
            ensure(close(p, 0.9f64.powi(4), 1e-12), || {
                format!("{side:?} node {n}: pher {p}")
            })?;
        }
        for id in g.edge_ids() {
            ensure(g.edge(id).pher == 0.0, || format!("{side:?} edge {id} got pheromone"))?;
        }
    }
    Ok(())
}

/// Matched-edge counts never fall, over a whole scenario run.
pub fn monotone_matches(counts: &[usize]) -> Check {
    match counts.windows(2).position(|w| w[1] < w[0]) {
        None => Ok(()),
        Some(i) => Err(format!(
            "matched edges fell from {} to {} at tick {}",
            counts[i],
            counts[i + 1],
            i + 2
        )),
    }
}

/// Every recorded node pair is a peer link and every recorded edge pair joins
/// real edges on both sides.
pub fn matches_within_peers(e: &Engine) -> Check {
    let links: std::collections::HashSet<(NodeId, NodeId)> = e.links().iter().map(|l| (l.query, l.data)).collect();
    for (q, d) in e.registry().node_pairs() {
        ensure(links.contains(&(q, d)), || {
            format!("matched pair ({q}, {d}) is not a peer link")
        })?;
    }
    for m in e.registry().edge_matches() {
        let (a, b) = m.query_ends;
        let (x, y) = m.data_ends;
        ensure(e.query().edge_between(a, b) == Some(m.query_edge), || {
            format!("bad query edge in {m:?}")
        })?;
        ensure(e.data().edge_between(x, y) == Some(m.data_edge), || {
            format!("bad data edge in {m:?}")
        })?;
        ensure(links.contains(&(a, x)) && links.contains(&(b, y)), || {
            format!("edge match {m:?} pairs non-peers")
        })?;
    }
    Ok(())
}

/// Two engines with the same seed produce identical tick reports and match sets.
pub fn deterministic(make: impl Fn() -> Engine, ticks: usize) -> Check {
    let (mut a, mut b) = (make(), make());
    for t in 1..=ticks {
        let (ra, rb) = (a.tick(), b.tick());
        ensure(ra == rb, || format!("tick {t}: {ra:?} != {rb:?}"))?;
    }
    let ea: Vec<_> = a.registry().edge_matches().cloned().collect();
    let eb: Vec<_> = b.registry().edge_matches().cloned().collect();
    ensure(ea == eb, || "match sets differ".into())
}

/// Every tick runs its phases in the fixed order, with deposits only while
/// agents step.
#[cfg(debug_assertions)]
pub fn phase_order(e: &mut Engine, ticks: usize) -> Check {
    use Phase::*;
    for t in 1..=ticks {
        e.tick();
        let log = e.phase_log();
        let core: Vec<Phase> = log.iter().copied().filter(|&p| p != Deposit).collect();
        ensure(
            core == [LiveEdges, Spawn, Step, NbrPhers, EvaporateNodes, EvaporateEdges],
            || format!("tick {t}: phases {log:?}"),
        )?;
        let step = log.iter().position(|&p| p == Step).unwrap();
        let nbr = log.iter().position(|&p| p == NbrPhers).unwrap();
        ensure(
            log.iter()
                .enumerate()
                .all(|(i, &p)| p != Deposit || (step < i && i < nbr)),
            || format!("tick {t}: deposit outside the step phase {log:?}"),
        )?;
    }
    Ok(())
}

#[cfg(not(debug_assertions))]
pub fn phase_order(_: &mut Engine, _: usize) -> Check {
    Ok(())
}
