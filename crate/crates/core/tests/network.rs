use bcast_core::engine::RngStream;
use bcast_core::network::{LatencyConfig, LatencyModel, ProcessingMode, Region, Topology, TopologyConfig};
use bcast_core::protocol::schedule_forging;
use proptest::prelude::*;
use rand::Rng;

fn model(processing: ProcessingMode, b: f64, t_proc: f64) -> LatencyModel {
    LatencyModel::from_config(&LatencyConfig {
        bandwidth_bps: b,
        t_proc_s: t_proc,
        processing,
        ..LatencyConfig::default()
    })
    .unwrap()
}

#[test]
fn transmission_delay_matches_formula_on_random_inputs() {
    let mut rng = RngStream::derive(77, "t_bpp");
    for _ in 0..100 {
        let l = rng.random_range(1e-4..0.5);
        let size: u64 = rng.random_range(1..2_000_000);
        let b = rng.random_range(1e4..1e9);
        let t_proc = rng.random_range(0.0..1e-6);
        let got = model(ProcessingMode::PerByte, b, t_proc).transmission_delay(size, l);
        let want = l + size as f64 * (1.0 / b + t_proc);
        assert!(((got - want) / want).abs() <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn lognormal_mean_matches_closed_form() {
    let m = LatencyModel::from_config(&LatencyConfig::default()).unwrap();
    let mut rng = RngStream::derive(3, "lognormal");
    for (a, b, base) in [(Region::Ohio, Region::Ohio, 0.020), (Region::Ireland, Region::Tokyo, 0.220)] {
        let n = 100_000;
        let mean = (0..n).map(|_| m.sample_latency(a, b, &mut rng).unwrap()).sum::<f64>() / n as f64;
        let want = base * (0.25f64 * 0.25 / 2.0).exp();
        assert!((mean / want - 1.0).abs() < 0.01, "{mean} vs {want}");
    }
}

#[test]
fn forging_count_is_poisson_mean() {
    let topo = Topology::build(&TopologyConfig::default(), &mut RngStream::derive(1, "topology")).unwrap();
    let runs = 10_000;
    let mut total = 0usize;
    let mut by_region = [0usize; 3];
    for s in 0..runs {
        let sched = schedule_forging(&topo, 13.0, 10.0, 70.0, &mut RngStream::derive(s, "forge")).unwrap();
        for w in sched.windows(2) {
            assert!(w[0].0 < w[1].0);
        }
        for (t, f) in &sched {
            assert!((10.0..70.0).contains(t));
            assert!(topo.nodes[*f].is_miner);
            by_region[topo.region_of(*f).index()] += 1;
        }
        total += sched.len();
    }
    let mean = total as f64 / runs as f64;
    assert!((mean / (60.0 / 13.0) - 1.0).abs() < 0.02, "{mean}");
    // equal hash shares and 25 miners per region
    for c in by_region {
        assert!((c as f64 / total as f64 - 1.0 / 3.0).abs() < 0.02);
    }
}

proptest! {
    #[test]
    fn delay_is_affine_in_size(l in 1e-4f64..1.0, s1 in 0u64..1_000_000, s2 in 0u64..1_000_000, b in 1e4f64..1e9, tp in 0.0f64..1e-6) {
        let m = model(ProcessingMode::PerByte, b, tp);
        let lhs = m.transmission_delay(s1 + s2, l) - l;
        let rhs = (m.transmission_delay(s1, l) - l) + (m.transmission_delay(s2, l) - l);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-9));
        prop_assert!(m.transmission_delay(s1, l) >= m.min_one_hop_delay(s1));
    }

    #[test]
    fn per_message_cost_is_charged_once(l in 1e-4f64..1.0, s in 1u64..1_000_000, tp in 0.0f64..0.01) {
        let m = model(ProcessingMode::PerMessage, 1.25e6, tp);
        let want = l + s as f64 / 1.25e6 + tp;
        prop_assert!((m.transmission_delay(s, l) - want).abs() <= 1e-12 * want);
    }
}
