use bcast_core::engine::{derive_stream, EventPayload, EventQueue, KeyedNormals, SimTime};
use proptest::prelude::*;
use rand::RngCore;

#[derive(Clone, Debug, PartialEq)]
enum Ev {
    Tag(usize),
    End,
}

impl EventPayload for Ev {
    fn simulation_end() -> Self {
        Ev::End
    }
    fn is_simulation_end(&self) -> bool {
        matches!(self, Ev::End)
    }
}

// chi-square 0.999 quantile, 81 degrees of freedom
const CHI2_81_999: f64 = 126.082_558_333;

proptest! {
    #[test]
    fn pops_in_time_then_insertion_order(times in prop::collection::vec(0u8..20, 1..200)) {
        let mut q = EventQueue::new();
        for (i, t) in times.iter().enumerate() {
            q.schedule(SimTime::new(*t as f64 * 0.5).unwrap(), Ev::Tag(i)).unwrap();
        }
        let mut expected: Vec<(u8, usize)> = times.iter().copied().zip(0..).collect();
        expected.sort();
        let mut got = Vec::new();
        let mut last = SimTime::ZERO;
        while let Some(e) = q.pop() {
            prop_assert!(e.at >= last);
            prop_assert_eq!(q.now(), e.at);
            last = e.at;
            if let Ev::Tag(i) = e.kind {
                got.push(i);
            }
        }
        prop_assert_eq!(got, expected.iter().map(|p| p.1).collect::<Vec<_>>());
    }

    #[test]
    fn run_until_handles_exactly_the_horizon(times in prop::collection::vec(0.0f64..10.0, 0..60), horizon in 0.0f64..10.0) {
        let mut q = EventQueue::new();
        for (i, t) in times.iter().enumerate() {
            q.schedule(SimTime::new(*t).unwrap(), Ev::Tag(i)).unwrap();
        }
        let end = SimTime::new(horizon).unwrap();
        q.schedule(end, Ev::End).unwrap();
        let log = q.run_until(end, true, |_, _| Ok::<(), bcast_core::Error>(())).unwrap();
        let inside = times.iter().filter(|t| **t <= horizon).count();
        prop_assert_eq!(log.processed, inside + 1);
        prop_assert_eq!(q.len(), times.len() - inside);
        prop_assert_eq!(q.now(), end);
    }
}

fn chi_square(table: &[[f64; 10]; 10]) -> f64 {
    let total: f64 = table.iter().flatten().sum();
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..10).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut stat = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let e = rows[i] * cols[j] / total;
            stat += (table[i][j] - e).powi(2) / e;
        }
    }
    stat
}

fn decile(x: u64) -> usize {
    ((x >> 32) * 10 >> 32) as usize
}

#[test]
fn sibling_streams_are_independent() {
    for (la, lb) in [("net/order/0", "net/order/1"), ("forge", "tx"), ("net/latency", "policy/0/node/3")] {
        let mut a = derive_stream(2024, la);
        let mut b = derive_stream(2024, lb);
        let mut table = [[0.0; 10]; 10];
        for _ in 0..10_000 {
            table[decile(a.next_u64())][decile(b.next_u64())] += 1.0;
        }
        let stat = chi_square(&table);
        assert!(stat < CHI2_81_999, "{la} vs {lb}: chi2 {stat}");
    }
}

#[test]
fn keyed_channels_are_independent_and_order_free() {
    let mut k = KeyedNormals::new(5, "net/latency", 4);
    let mut table = [[0.0; 10]; 10];
    let bin = |z: f64| ((0.5 * (1.0 + statrs::function::erf::erf(z / 2f64.sqrt())) * 10.0) as usize).min(9);
    let mut first = Vec::new();
    for _ in 0..10_000 {
        let (x, y) = (k.draw(1), k.draw(2));
        first.push(x);
        table[bin(x)][bin(y)] += 1.0;
    }
    assert!(chi_square(&table) < CHI2_81_999);
    // channel 1 alone gives the same sequence
    let mut alone = KeyedNormals::new(5, "net/latency", 4);
    for x in first.iter().take(500) {
        assert_eq!(alone.draw(1), *x);
    }
}
