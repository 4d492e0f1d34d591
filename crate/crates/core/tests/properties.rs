//! Property tests for the structural invariants of each module.

use proptest::prelude::*;

use fhnsync::diagnostics::{lyapunov_v, pair_index, sync_error};
use fhnsync::fhn::{coupling_rhs, reaction_rhs, FhnParams, ForcingProfile};
use fhnsync::grid::{lq_norm, Field, Grid};
use fhnsync::lab::{
    desk_config, fit_inverse_n, fit_quadratic, sweep_from_csv, sweep_to_csv, Evaluation, FitResult, SearchMethod,
    SweepEntry, ThresholdResult, TopologyKind,
};
use fhnsync::network::{load_matrix, CouplingMatrix};
use fhnsync::simulator::{run, InitialCondition, NetworkState, SimConfig};
use fhnsync::sync_theory::{alpha_from_adjacency, estimate_constant_a, TieBreak};

fn grid_strategy() -> impl Strategy<Value = Grid<f64>> {
    (3usize..12, 3usize..12, 0.5f64..3.0, 0.5f64..3.0)
        .prop_map(|(nx, ny, dx, dy)| Grid::new(nx, ny, nx as f64 * dx, ny as f64 * dy).unwrap())
}

fn field_on(grid: Grid<f64>) -> impl Strategy<Value = Field<f64>> {
    proptest::collection::vec(-2.0f64..2.0, grid.len()).prop_map(move |v| Field::from_values(grid, v).unwrap())
}

fn field_strategy() -> impl Strategy<Value = Field<f64>> {
    grid_strategy().prop_flat_map(field_on)
}

fn state_strategy(max_n: usize) -> impl Strategy<Value = NetworkState<f64>> {
    (2usize..=max_n, grid_strategy()).prop_flat_map(|(n, grid)| {
        proptest::collection::vec((field_on(grid), field_on(grid)), n)
            .prop_map(|nodes| NetworkState::new(nodes).unwrap())
    })
}

/// Weighted sums of `P - I` over permutation matrices `P`: zero row and column
/// sums with nonnegative off-diagonal entries. A cyclic shift keeps it connected.
fn coupling_strategy(n: usize) -> impl Strategy<Value = CouplingMatrix<f64>> {
    let perm = Just((0..n).collect::<Vec<usize>>()).prop_shuffle();
    let shift: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    (0.01f64..2.0, proptest::collection::vec((perm, 0.01f64..2.0), 0..3)).prop_map(move |(w0, mut terms)| {
        let mut e = vec![0.0; n * n];
        terms.push((shift.clone(), w0));
        for (p, w) in terms {
            for (i, &pi) in p.iter().enumerate() {
                e[i * n + pi] += w;
                e[i * n + i] -= w;
            }
        }
        CouplingMatrix::from_rows(n, e).unwrap()
    })
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn connected_graph() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (2usize..=8).prop_flat_map(|n| {
        let tree = (1..n).map(|v| 0..v).collect::<Vec<_>>();
        let extra = proptest::collection::vec((0..n, 0..n), 0..=n);
        (Just(n), tree, extra).prop_map(|(n, parents, extra)| {
            let mut adj = vec![Vec::new(); n];
            let mut add = |a: usize, b: usize| {
                if a != b && !adj[a].contains(&b) {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            };
            for (v, p) in parents.into_iter().enumerate() {
                add(v + 1, p);
            }
            for (a, b) in extra {
                add(a, b);
            }
            for a in &mut adj {
                a.sort_unstable();
            }
            adj
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lq_norm_scales_with_the_domain(f in field_strategy(), s in 0.5f64..4.0, q in 1u32..=6) {
        let g = f.grid();
        let stretched = Grid::new(g.nx(), g.ny(), g.lx() * s, g.ly() * s).unwrap();
        let h = Field::from_values(stretched, f.values().to_vec()).unwrap();
        let expected = s.powf(2.0 / q as f64) * lq_norm(&f, q);
        prop_assert!(close(lq_norm(&h, q), expected, 1e-12));
    }

    #[test]
    fn lq_norm_vanishes_only_on_zero(f in field_strategy(), q in 1u32..=6) {
        let norm = lq_norm(&f, q);
        prop_assert!(norm >= 0.0);
        prop_assert_eq!(norm == 0.0, f.values().iter().all(|&x| x == 0.0));
        prop_assert_eq!(lq_norm(&Field::zeros(*f.grid()), q), 0.0);
    }

    #[test]
    fn builders_have_zero_line_sums(n in 3usize..16, g in 0.01f64..10.0) {
        for m in [CouplingMatrix::complete(n, g).unwrap(), CouplingMatrix::ring_unidirectional(n, g).unwrap()] {
            for i in 0..n {
                let row: f64 = (0..n).map(|k| m.get(i, k)).sum();
                let col: f64 = (0..n).map(|k| m.get(k, i)).sum();
                prop_assert!(row.abs() <= 1e-12 * (1.0 + g) && col.abs() <= 1e-12 * (1.0 + g));
                for k in (0..n).filter(|&k| k != i) {
                    prop_assert!(m.get(i, k) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn complete_network_is_relabeling_invariant((n, perm) in (2usize..10).prop_flat_map(|n| (Just(n), permutation(n))), g in 0.01f64..5.0) {
        let m = CouplingMatrix::complete(n, g).unwrap();
        prop_assert_eq!(m.permuted(&perm).unwrap(), m);
    }

    #[test]
    fn matrix_text_round_trips(m in (2usize..7).prop_flat_map(coupling_strategy)) {
        let back: CouplingMatrix<f64> = load_matrix(&m.to_text()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn alpha_sums_squared_path_lengths(adj in connected_graph()) {
        let t = alpha_from_adjacency(&adj, TieBreak::Lexicographic).unwrap();
        let lhs: u64 = t.alpha.values().sum();
        let rhs: u64 = t.paths.values().map(|p| ((p.len() - 1) * (p.len() - 1)) as u64).sum();
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(t.paths.len(), adj.len() * (adj.len() - 1) / 2);
    }

    #[test]
    fn node_constant_is_monotone(eps in 0.01f64..1.0, a in 0.1f64..5.0, b in 1e-4f64..1.0, m in 0.0f64..5.0, dm in 0.0f64..5.0, db in 0.0f64..1.0) {
        let (base, _) = estimate_constant_a(eps, a, b, m).unwrap();
        let (wider, _) = estimate_constant_a(eps, a, b, m + dm).unwrap();
        let (damped, _) = estimate_constant_a(eps, a, b + db, m).unwrap();
        prop_assert!(wider >= base);
        prop_assert!(damped <= base);
    }

    #[test]
    fn reaction_is_odd_without_forcing(grid in grid_strategy(), seed in any::<u64>()) {
        let mut rng = seed;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        let u = Field::from_fn(grid, |_, _| next());
        let v = Field::from_fn(grid, |_, _| next());
        let neg = |f: &Field<f64>| Field::from_values(grid, f.values().iter().map(|x| -x).collect()).unwrap();
        let params = FhnParams::reference();
        let forcing = ForcingProfile::constant(0.0);
        let (du, dv) = reaction_rhs(&u, &v, &params, &forcing).unwrap();
        let (du_n, dv_n) = reaction_rhs(&neg(&u), &neg(&v), &params, &forcing).unwrap();
        for (x, y) in du.values().iter().zip(du_n.values()).chain(dv.values().iter().zip(dv_n.values())) {
            prop_assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn coupling_vanishes_on_the_sync_manifold_and_conserves((g, state) in (2usize..6).prop_flat_map(|n| {
        (coupling_strategy(n), grid_strategy().prop_flat_map(move |grid| {
            proptest::collection::vec((field_on(grid), field_on(grid)), n)
        }))
    })) {
        let params = FhnParams::reference();
        let n = g.n();
        let state = NetworkState::new(state).unwrap();
        let inc = coupling_rhs(&state, &g, &params).unwrap();
        let cells = state.grid().len();
        for cell in 0..cells {
            let total: f64 = inc.iter().map(|f| f.values()[cell]).sum();
            let scale: f64 = inc.iter().map(|f| f.values()[cell].abs()).sum::<f64>() + 1.0;
            prop_assert!(total.abs() <= 1e-12 * scale, "sum {total}");
        }

        let (u0, v0) = (state.u(0).clone(), state.v(0).clone());
        let synced = NetworkState::new(vec![(u0.clone(), v0.clone()); n]).unwrap();
        for f in coupling_rhs(&synced, &g, &params).unwrap() {
            prop_assert!(f.values().iter().all(|&x| x == 0.0));
        }
        let (du, dv) = reaction_rhs(&u0, &v0, &params, &ForcingProfile::default()).unwrap();
        for i in 0..n {
            let (dui, dvi) = reaction_rhs(synced.u(i), synced.v(i), &params, &ForcingProfile::default()).unwrap();
            prop_assert_eq!(&dui, &du);
            prop_assert_eq!(&dvi, &dv);
        }
    }

    #[test]
    fn sync_measures_follow_relabeling((state, perm) in state_strategy(5).prop_flat_map(|s| {
        let n = s.n();
        (Just(s), permutation(n))
    })) {
        let n = state.n();
        let relabeled = NetworkState::new(
            perm.iter().map(|&p| (state.u(p).clone(), state.v(p).clone())).collect(),
        )
        .unwrap();
        prop_assert!(close(lyapunov_v(&relabeled), lyapunov_v(&state), 1e-12));
        let (_, pairs) = sync_error(&state);
        let (total, moved) = sync_error(&relabeled);
        let mut consecutive = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
                prop_assert_eq!(moved[pair_index(n, i, j)], pairs[pair_index(n, a, b)]);
            }
            if i + 1 < n {
                let (a, b) = (perm[i].min(perm[i + 1]), perm[i].max(perm[i + 1]));
                consecutive += pairs[pair_index(n, a, b)];
            }
        }
        prop_assert!(close(total, consecutive, 1e-12));
    }

    #[test]
    fn fits_are_local_least_squares_minima(points in proptest::collection::vec((1.0f64..30.0, -1.0f64..1.0), 4..12)) {
        let fits: Vec<FitResult> = [fit_inverse_n(&points), fit_quadratic(&points)].into_iter().flatten().collect();
        for fit in fits {
            let rmse = |c: &[f64]| {
                let probe = FitResult { coefficients: c.to_vec(), ..fit.clone() };
                (points.iter().map(|&(x, y)| (probe.predict(x) - y).powi(2)).sum::<f64>() / points.len() as f64).sqrt()
            };
            let base = rmse(&fit.coefficients);
            prop_assert!(close(base, fit.rmse, 1e-9));
            for k in 0..fit.coefficients.len() {
                for step in [1e-6, -1e-6] {
                    let mut c = fit.coefficients.clone();
                    c[k] += step;
                    prop_assert!(rmse(&c) >= base - 1e-12, "{:?} coefficient {k}", fit.model);
                }
            }
            prop_assert_eq!(FitResult::from_csv(&fit.to_csv()).unwrap(), fit);
        }
    }

    #[test]
    fn sweep_tables_round_trip(rows in proptest::collection::vec((3usize..30, 1e-4f64..0.5, 1e-5f64..1e-2, 1usize..80, 0.0f64..100.0), 1..8)) {
        let entries: Vec<SweepEntry<f64>> = rows
            .iter()
            .map(|&(n, g, w, evals, wall)| SweepEntry {
                key: n as f64,
                result: Ok(ThresholdResult {
                    topology: TopologyKind::Complete,
                    n,
                    g_star: g,
                    bracket: (g - w, g),
                    evaluations: vec![Evaluation { g, synchronized: true, final_error: 0.0 }; evals],
                    method: SearchMethod::Bisection,
                }),
                wall_time: wall,
            })
            .collect();
        let (key, back) = sweep_from_csv(&sweep_to_csv("n", &entries)).unwrap();
        prop_assert_eq!(key, "n");
        prop_assert_eq!(back.len(), rows.len());
        for (r, &(n, g, w, evals, wall)) in back.iter().zip(&rows) {
            prop_assert_eq!((r.key, r.g_star, r.bracket_lo, r.bracket_hi, r.evaluations, r.wall_time), (n as f64, g, g - w, g, evals, wall));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn traces_round_trip(seed in any::<u64>(), n in 2usize..5, g in 0.0f64..0.3) {
        let mut c = SimConfig::new(Grid::unit_spacing(6).unwrap(), CouplingMatrix::complete(n, g).unwrap(), 2.0);
        c.seed = seed;
        c.record_every = 10;
        let csv = run(&c).unwrap().trace.to_csv();
        let back: fhnsync::SyncTrace64 = fhnsync::SyncTrace64::from_csv(&csv).unwrap();
        prop_assert_eq!(back.to_csv(), csv);
    }
}

fn desk(g: f64, ic: InitialCondition<f64>) -> SimConfig<f64> {
    let mut c = desk_config(CouplingMatrix::complete(3, 1.0).unwrap().scaled(g).unwrap());
    c.ic = ic;
    c.seed = 1;
    c
}

#[test]
fn halving_the_step_barely_moves_the_final_error() {
    let mut coarse = desk(0.05, InitialCondition::default());
    coarse.t_end = 30.0;
    coarse.record_every = 30;
    let mut fine = coarse.clone();
    fine.dt = coarse.dt / 2.0;
    fine.record_every = 2 * coarse.record_every;
    let e1 = run(&coarse).unwrap().trace.final_error().unwrap();
    let e2 = run(&fine).unwrap().trace.final_error().unwrap();
    assert!((e1 - e2).abs() < 0.05 * e2, "dt: {e1}, dt/2: {e2}");
}

#[test]
fn energy_settles_into_a_common_absorbing_set() {
    let ics = [
        InitialCondition::Homogeneous {
            values: vec![(-1.0, 0.5), (0.2, 0.0), (1.5, -0.3)],
        },
        InitialCondition::default(),
        InitialCondition::SpiralSeed,
        InitialCondition::Mixture { p_percent: 50.0 },
    ];
    let late: Vec<f64> = ics
        .into_iter()
        .map(|ic| {
            let tr = run(&desk(0.015, ic)).unwrap().trace;
            let from = tr.len() * 9 / 10;
            tr.energies[from..].iter().map(|e| e.l2_u + e.l2_v).fold(0.0, f64::max)
        })
        .collect();
    let hi = late.iter().cloned().fold(0.0, f64::max);
    let lo = late.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi <= 2.0 * lo, "late energy bounds {late:?}");
}

#[test]
fn measured_thresholds_sit_below_the_sufficient_bound() {
    use fhnsync::lab::{find_threshold, ThresholdSearch};
    use fhnsync::sync_theory::sufficient_strength;
    let mut base = SimConfig::new(Grid::unit_spacing(8).unwrap(), CouplingMatrix::complete(3, 1.0).unwrap(), 40.0);
    base.seed = 3;
    base.record_every = 40;
    let search = ThresholdSearch {
        g_lo: 0.0,
        g_hi: 0.4,
        resolution: 0.02,
        ..ThresholdSearch::default()
    };
    let r = find_threshold(&base, TopologyKind::Complete, &search).unwrap();
    let (a_const, _) = estimate_constant_a(0.1, 1.0, 0.001, 2.0).unwrap();
    let bound = sufficient_strength(&base.coupling, a_const, 0.1, TieBreak::Lexicographic).unwrap();
    assert!(r.g_star <= bound, "g_star {} above {bound}", r.g_star);
}
