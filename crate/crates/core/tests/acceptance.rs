//! Acceptance suite. Each criterion prints one PASS/FAIL line; the test fails
//! if any criterion fails. Run with `cargo test --test acceptance -- --nocapture`
//! to see the report.

use colearn::belief::{Belief, Evidence, TruthValue};
use colearn::engine::{SimConfig, SimState};
use colearn::environment::{observe, sample_ground_truth, NoiseModel, Point};
use colearn::experiment::{self, CellSummary, SweepSpec};
use colearn::network::{eligible_edges, physical_edges, InteractionNetwork, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: usize = 50;
const BASE_SEED: u64 = 2023;

fn spec(
    topology: &[Topology],
    comm_radius: &[f64],
    comm_freq: f64,
    epsilon: f64,
) -> SweepSpec {
    SweepSpec {
        topology: topology.to_vec(),
        comm_radius: comm_radius.to_vec(),
        comm_freq: vec![comm_freq],
        epsilon: vec![epsilon],
        repeats: SEEDS,
        base_seed: BASE_SEED,
        base: SimConfig::default(),
    }
}

fn sweep(spec: &SweepSpec) -> Vec<CellSummary> {
    experiment::run_sweep(spec, 8).expect("sweep runs").summaries
}

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, id: u32, name: &str, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        let line = format!("[{tag}] criterion {id}: {name} | {detail}");
        println!("{line}");
        self.lines.push((ok, line));
    }
}

fn asocial_baseline(r: &mut Report) {
    let mut ok = true;
    let mut detail = Vec::new();
    for eps in [0.1, 0.3] {
        let s = &sweep(&spec(&[Topology::Complete], &[20.0], 0.0, eps))[0];
        ok &= (s.mean_error - eps).abs() <= 0.03;
        detail.push(format!("eps={eps}: mean={:.4}", s.mean_error));
    }
    r.check(1, "asocial error within eps ± 0.03", ok, detail.join(", "));
}

fn noise_free_learning(r: &mut Report) {
    let s = &sweep(&spec(&[Topology::Complete], &[20.0], 0.1, 0.0))[0];
    let ok = s.mean_error <= 0.02 && s.consensus_fraction >= 0.9;
    r.check(
        2,
        "noise-free error <= 0.02 and consensus >= 0.9",
        ok,
        format!("mean={:.4}, consensus={:.2}", s.mean_error, s.consensus_fraction),
    );
}

fn error_below_noise(r: &mut Report) {
    let s = &sweep(&spec(&[Topology::Complete], &[20.0], 0.025, 0.3))[0];
    let upper = s.mean_error + s.ci95;
    r.check(
        3,
        "eps=0.3, C_f=0.025: error and CI upper bound < 0.3",
        s.mean_error < 0.3 && upper < 0.3,
        format!("mean={:.4}, upper={:.4}", s.mean_error, upper),
    );
}

fn lattices() -> Vec<Topology> {
    [2, 4, 8, 16].into_iter().map(|k| Topology::Lattice { k }).collect()
}

fn less_is_more(r: &mut Report) {
    let out = sweep(&spec(&lattices(), &[20.0], 1.0, 0.3));
    let errors: Vec<f64> = out.iter().map(|s| s.mean_error).collect();
    let increasing = errors.windows(2).all(|w| w[0] < w[1]);
    let ratio = errors[0] / errors[3];
    r.check(
        4,
        "error strictly increasing in k and error(k=2)/error(k=16) <= 0.5",
        increasing && ratio <= 0.5,
        format!("errors(k=2,4,8,16)={errors:.4?}, ratio={ratio:.3}"),
    );
}

fn convergence_trade_off(r: &mut Report) {
    let topo = [Topology::Lattice { k: 2 }, Topology::Lattice { k: 16 }];
    let out = sweep(&spec(&topo, &[20.0], 0.2, 0.3));
    let (k2, k16) = (&out[0], &out[1]);
    let ok = k2.mean_terminal_tick > k16.mean_terminal_tick && k2.mean_error < k16.mean_error;
    r.check(
        5,
        "k=2 converges slower but to lower error than k=16",
        ok,
        format!(
            "ticks k2={:.0} k16={:.0}; error k2={:.4} k16={:.4}",
            k2.mean_terminal_tick, k16.mean_terminal_tick, k2.mean_error, k16.mean_error
        ),
    );
}

fn physical_flatness(r: &mut Report) {
    let out = sweep(&spec(&[Topology::Complete], &[20.0, 60.0, 100.0], 0.1, 0.1));
    let errors: Vec<f64> = out.iter().map(|s| s.mean_error).collect();
    let spread = errors.iter().cloned().fold(f64::MIN, f64::max)
        - errors.iter().cloned().fold(f64::MAX, f64::min);
    r.check(
        6,
        "error spread across C_r in {20,60,100} <= 0.05",
        spread <= 0.05,
        format!("errors={errors:.4?}, spread={spread:.4}"),
    );
}

fn fusion_table_laws() -> Result<(), String> {
    use TruthValue::{False as F, True as T, Unknown as U};
    let table = [[F, F, U], [F, U, T], [U, T, T]];
    for (i, a) in TruthValue::ALL.into_iter().enumerate() {
        for (j, b) in TruthValue::ALL.into_iter().enumerate() {
            if a.fuse(b) != table[i][j] {
                return Err(format!("table mismatch at {a:?},{b:?}"));
            }
            if a.fuse(b) != b.fuse(a) {
                return Err("not commutative".into());
            }
            if a.is_certain() && b.is_certain() && a != b && a.fuse(b) != U {
                return Err("disagreement does not yield unknown".into());
            }
        }
        if a.fuse(a) != a || a.fuse(U) != a {
            return Err("idempotence or identity fails".into());
        }
    }
    Ok(())
}

fn evidence_form_and_locality() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..2_000 {
        let n = rng.gen_range(1..60);
        let truth = sample_ground_truth(n, &mut rng);
        let noise = NoiseModel::new(rng.gen_range(0.0..=0.5)).unwrap();
        let belief = Belief::from_values(
            (0..n).map(|_| TruthValue::ALL[rng.gen_range(0..3)]).collect(),
        );
        let i = rng.gen_range(0..n);
        let ev = observe(i, &truth, noise, &mut rng).unwrap();
        let form = ev.to_belief(n).unwrap();
        if form.certainty() != 1 || Evidence::try_from_belief(&form).unwrap() != ev {
            return Err(format!("trial {trial}: evidence not single-certain"));
        }
        let updated = belief.update_with_evidence(&form).unwrap();
        if (0..n).any(|j| j != i && updated[j] != belief[j]) {
            return Err(format!("trial {trial}: update touched another proposition"));
        }
    }
    Ok(())
}

fn edge_properties() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..500 {
        let m = rng.gen_range(4..25usize);
        let positions: Vec<Point> = (0..m)
            .map(|_| Point::new(rng.gen_range(-120.0..120.0), rng.gen_range(-120.0..120.0)))
            .collect();
        let radius = rng.gen_range(5.0..120.0);
        let net = if rng.gen_bool(0.5) || m < 4 {
            InteractionNetwork::complete(m).unwrap()
        } else {
            let kmax = (m - 2) / 2 * 2;
            let k = 2 * rng.gen_range(1..=kmax / 2);
            InteractionNetwork::ring_lattice(m, k).unwrap()
        };
        let on: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.6)).collect();
        let physical = physical_edges(&positions, radius);
        let eligible = eligible_edges(&physical, &net, &on);
        if !eligible.is_subset(&physical) || eligible.iter().any(|(i, j)| !net.is_adjacent(i, j)) {
            return Err(format!("trial {trial}: eligible not contained"));
        }
        if !physical.is_subset(&physical_edges(&positions, radius + rng.gen_range(0.0..50.0))) {
            return Err(format!("trial {trial}: physical edges not monotone in radius"));
        }
    }
    Ok(())
}

fn matching_validity() -> Result<(), String> {
    for (seed, topology) in [(3, Topology::Complete), (4, Topology::Lattice { k: 4 })] {
        let cfg = SimConfig { comm_freq: 1.0, epsilon: 0.3, comm_radius: 60.0, topology, seed, ..SimConfig::default() };
        let mut state = SimState::initialize(&cfg).map_err(|e| e.to_string())?;
        let mut fusions = 0;
        for _ in 0..3_000 {
            state.tick().map_err(|e| e.to_string())?;
            let mut seen = vec![false; cfg.agents];
            for &(i, j) in state.last_fusions() {
                if seen[i] || seen[j] {
                    return Err(format!("agent matched twice at tick {}", state.tick_count()));
                }
                seen[i] = true;
                seen[j] = true;
                let d = state.agents()[i].position.distance(state.agents()[j].position);
                if !state.network().is_adjacent(i, j) || d > cfg.comm_radius {
                    return Err(format!("ineligible pair ({i},{j}) at tick {}", state.tick_count()));
                }
                fusions += 1;
            }
        }
        if fusions == 0 {
            return Err("no fusions observed".into());
        }
    }
    Ok(())
}

fn initial_error() -> Result<(), String> {
    for seed in 0..20 {
        let state = SimState::initialize(&SimConfig { seed, ..SimConfig::default() })
            .map_err(|e| e.to_string())?;
        if state.average_error() != 0.5 {
            return Err(format!("seed {seed}: initial error {}", state.average_error()));
        }
    }
    Ok(())
}

fn run_determinism() -> Result<(), String> {
    let s = SweepSpec {
        topology: vec![Topology::Lattice { k: 2 }, Topology::Complete],
        comm_radius: vec![20.0, 60.0],
        comm_freq: vec![0.2],
        epsilon: vec![0.3],
        repeats: 4,
        base_seed: 77,
        base: SimConfig { max_ticks: 5_000, ..SimConfig::default() },
    };
    let one = experiment::run_sweep(&s, 1).map_err(|e| e.to_string())?;
    let eight = experiment::run_sweep(&s, 8).map_err(|e| e.to_string())?;
    if one.records != eight.records {
        return Err("records differ between 1 and 8 workers".into());
    }
    let again = experiment::run_sweep(&s, 1).map_err(|e| e.to_string())?;
    let json = |o: &experiment::SweepOutcome| o.records.iter().map(|r| r.to_json()).collect::<Vec<_>>();
    if json(&one) != json(&again) {
        return Err("serialised records differ between identical runs".into());
    }
    Ok(())
}

type Suite = fn() -> Result<(), String>;

fn property_suites(r: &mut Report) {
    let suites: [(&str, Suite); 6] = [
        ("fusion table laws", fusion_table_laws),
        ("evidence form and locality", evidence_form_and_locality),
        ("eligible containment and C_r monotonicity", edge_properties),
        ("matching validity", matching_validity),
        ("initial error 0.5", initial_error),
        ("determinism with 1 and 8 workers", run_determinism),
    ];
    let mut failures = Vec::new();
    for (name, suite) in suites {
        if let Err(e) = suite() {
            failures.push(format!("{name}: {e}"));
        }
    }
    let detail = if failures.is_empty() {
        format!("{} suites passed", suites.len())
    } else {
        failures.join("; ")
    };
    r.check(7, "property suites", failures.is_empty(), detail);
}

#[test]
fn acceptance() {
    let mut report = Report { lines: Vec::new() };
    asocial_baseline(&mut report);
    noise_free_learning(&mut report);
    error_below_noise(&mut report);
    less_is_more(&mut report);
    convergence_trade_off(&mut report);
    physical_flatness(&mut report);
    property_suites(&mut report);

    let failed: Vec<&String> = report.lines.iter().filter(|(ok, _)| !ok).map(|(_, l)| l).collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.iter().map(|l| l.as_str()).collect::<Vec<_>>().join("\n"));
}
