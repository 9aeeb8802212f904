use mechlab_core::lp::{
    best_deterministic_on_grid, build_lp, build_lp_with, deterministic_gap, grid_revenue, max_violation, monotonicity_check,
    solve_lp, Allocation, TypeGrid,
};
use mechlab_core::mechanism::DeterministicMechanism;
use mechlab_core::optimizer::optimize_deterministic;
use mechlab_core::simplex::{solve, PivotRule, SimplexOptions};
use mechlab_core::{BaseDensity, Density, Domain};
use proptest::prelude::*;

/// Best revenue over allocations on a lattice of step `1/k`, each paired
/// with its cheapest incentive-compatible payoffs: the least fixed point of
/// `u_i = max(0, max_j u_j + (v_i - v_j)·q_j)`.
fn brute_force(grid: &TypeGrid, k: usize) -> f64 {
    let levels: Vec<(f64, f64)> = (0..=k)
        .flat_map(|i| (0..=i).map(move |j| (i as f64 / k as f64, j as f64 / k as f64)))
        .collect();
    let m = grid.len();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; m];
    loop {
        let q: Vec<(f64, f64)> = idx.iter().map(|&i| levels[i]).collect();
        let v = &grid.nodes;
        let mut u = vec![0.0; m];
        let mut stable = false;
        for _ in 0..=m {
            let mut changed = false;
            for i in 0..m {
                for j in 0..m {
                    let cand = u[j] + (v[i][0] - v[j][0]) * q[j].0 + (v[i][1] - v[j][1]) * q[j].1;
                    if cand > u[i] + 1e-12 {
                        u[i] = cand;
                        changed = true;
                    }
                }
            }
            if !changed {
                stable = true;
                break;
            }
        }
        if stable {
            let rev: f64 = (0..m).map(|i| grid.weights[i] * (v[i][0] * q[i].0 + v[i][1] * q[i].1 - u[i])).sum();
            best = best.max(rev);
        }
        let mut p = 0;
        while p < m {
            idx[p] += 1;
            if idx[p] < levels.len() {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
        if p == m {
            return best;
        }
    }
}

#[test]
fn two_node_grid_matches_enumeration() {
    let domain = Domain::dmv(1.0).unwrap();
    for nodes in [vec![[1.0, 1.0], [0.5, 0.5]], vec![[1.0, 0.3], [0.6, 0.5]], vec![[0.9, 0.1], [0.4, 0.35]]] {
        let grid = TypeGrid::from_nodes(domain, nodes, vec![1.0, 1.0]).unwrap();
        let sol = solve_lp(&build_lp_with(grid.clone(), Allocation::Free).unwrap()).unwrap();
        let bf = brute_force(&grid, 20);
        assert!((sol.objective - bf).abs() < 1e-9, "{:?}: {} vs {bf}", grid.nodes, sol.objective);
    }
}

#[test]
fn lp_dominates_grid_prices_and_is_feasible() {
    let fams = [
        Density::uniform_triangle(0.5).unwrap(),
        Density::ordered_decreasing(BaseDensity::power(2.0).unwrap(), 1.0).unwrap(),
        Density::conditional_decreasing(BaseDensity::power(2.0).unwrap(), BaseDensity::uniform()).unwrap(),
        Density::imv_quadratic(),
    ];
    for d in &fams {
        for n in [4, 7] {
            let (rep, sol) = deterministic_gap(d, n).unwrap();
            assert!(rep.gap >= -1e-7, "{:?} n={n}: gap {}", d.kind, rep.gap);
            assert!(sol.max_violation <= 1e-7);
            assert!((max_violation(&sol.outcomes) - sol.max_violation).abs() < 1e-15);
            let det = grid_revenue(&TypeGrid::new(d, n).unwrap(), &rep.best_prices);
            assert!((det - rep.best_det_on_grid).abs() < 1e-12);
        }
    }
}

#[test]
fn first_unit_can_be_rounded_on_the_uniform_grid() {
    let d = Density::uniform_triangle(1.0).unwrap();
    let inst = build_lp(&d, 10).unwrap();
    let sol = solve_lp(&inst).unwrap();
    let rounded: Vec<f64> = sol.outcomes.iter().map(|o| if o.q1 >= 0.5 { 1.0 } else { 0.0 }).collect();
    let pinned = solve_lp(&build_lp_with(inst.grid.clone(), Allocation::FixedFirst(rounded.clone())).unwrap()).unwrap();
    assert!(sol.objective - pinned.objective <= 1e-6);
    for (o, q) in pinned.outcomes.iter().zip(&rounded) {
        assert_eq!(o.q1, *q);
    }
}

#[test]
fn imv_grid_respects_orientation() {
    let g = TypeGrid::new(&Density::imv_quadratic(), 10).unwrap();
    assert!(g.nodes.iter().all(|p| p[0] <= p[1] + 1e-15));
    assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(g.len(), 55);
    assert!(g.nodes.contains(&[0.0, 1.0]) && g.nodes.contains(&[1.0, 1.0]));
}

#[test]
fn grid_optimum_approaches_the_continuum_from_above() {
    // measured: 0.6042 (n=8), 0.5940 (n=10), 0.5860 (n=12) against 0.5492
    let d = Density::uniform_triangle(1.0).unwrap();
    let cont = optimize_deterministic(&d).unwrap().revenue;
    let vals: Vec<f64> = [8, 10, 12].iter().map(|&n| solve_lp(&build_lp(&d, n).unwrap()).unwrap().objective).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
    assert!(vals.iter().all(|&v| v > cont));
    assert!(vals[2] - cont < 0.04, "{} vs {cont}", vals[2]);
}

#[test]
fn revenue_rises_along_power_family() {
    // power(α) first-order dominates power(α') for α > α'
    let vals: Vec<f64> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&alpha| {
            let d = Density::ordered_decreasing(BaseDensity::power(alpha).unwrap(), 1.0).unwrap();
            solve_lp(&build_lp(&d, 8).unwrap()).unwrap().objective
        })
        .collect();
    assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-7), "{vals:?}");
}

#[test]
fn tilt_table_is_deterministic() {
    let d = Density::uniform_triangle(1.0).unwrap();
    let rows = monotonicity_check(&d, &[0.0, 0.0, 0.7], 6).unwrap();
    assert_eq!(rows[0].lp_value, rows[1].lp_value);
    assert!(rows[2].lp_value >= rows[0].lp_value - 1e-7);
}

#[test]
fn pivot_rules_agree() {
    let inst = build_lp(&Density::ordered_decreasing(BaseDensity::exponential(1.0).unwrap(), 1.0).unwrap(), 6).unwrap();
    let bland = solve(&inst.problem, &SimplexOptions { rule: PivotRule::Bland, ..Default::default() }).unwrap();
    let dantzig = solve(&inst.problem, &SimplexOptions::default()).unwrap();
    assert!((bland.objective - dantzig.objective).abs() < 1e-10);
    assert!(inst.problem.max_violation(&bland.x) < 1e-9);
}

#[test]
fn exports_cover_every_node_and_row() {
    let inst = build_lp(&Density::uniform_triangle(1.0).unwrap(), 4).unwrap();
    let sol = solve_lp(&inst).unwrap();
    let csv = sol.to_csv();
    assert_eq!(csv.lines().count(), inst.grid.len() + 1);
    assert!(csv.starts_with("v1,v2,q1,q2,t"));
    let text = inst.to_lp_text();
    assert_eq!(text.matches(" <= ").count(), inst.problem.rows.len());
    assert_eq!(inst.counts.total(), inst.grid.len() * (inst.grid.len() - 1) + 4 * inst.grid.len());
}

#[test]
fn best_grid_prices_beat_every_candidate_pair() {
    let g = TypeGrid::new(&Density::uniform_triangle(1.0).unwrap(), 6).unwrap();
    let (_, best) = best_deterministic_on_grid(&g);
    for i in 0..=40 {
        for j in 0..=40 {
            let m = DeterministicMechanism::new(i as f64 / 20.0, j as f64 / 40.0);
            assert!(grid_revenue(&g, &m) <= best + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn small_random_grids(pts in prop::collection::vec((0.05f64..1.0, 0.0f64..1.0, 0.1f64..1.0), 2..4)) {
        let domain = Domain::dmv(1.0).unwrap();
        let nodes: Vec<[f64; 2]> = pts.iter().map(|&(x, f, _)| [x, f * x]).collect();
        let weights: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let grid = TypeGrid::from_nodes(domain, nodes, weights).unwrap();
        let sol = solve_lp(&build_lp_with(grid.clone(), Allocation::Free).unwrap()).unwrap();
        let (_, det) = best_deterministic_on_grid(&grid);
        prop_assert!(sol.max_violation <= 1e-7);
        prop_assert!(sol.objective >= det - 1e-7);
        prop_assert!(sol.objective >= brute_force(&grid, 4) - 1e-9);
    }
}
