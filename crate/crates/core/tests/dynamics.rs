use std::f64::consts::PI;

use zk_core::calculus::{self, apply_operator, OperatorKind};
use zk_core::dynamics::*;
use zk_core::geometry::{DomainKind, Field, GeometryError, Grid};
use zk_core::snapshot;
use zk_core::spectral::{minimal_critical_rectangle, stationary_mode};

fn bump(grid: Grid, t_end: f64, amplitude: f64) -> SimConfig {
    SimConfig::new(grid, 1, t_end, InitialCondition::new(Shape::SineBump, Scaling::Amplitude(amplitude)))
}

/// Max difference on the nodes shared by a grid with `n + 1` cells and one with `2(n + 1)`.
fn coarse_node_diff(coarse: &Field, fine: &Field) -> f64 {
    let g = coarse.grid();
    let mut m = 0.0_f64;
    for i in 0..g.nx() + 2 {
        for j in 0..g.ny() + 2 {
            m = m.max((coarse.get(i, j) - fine.get(2 * i, 2 * j)).abs());
        }
    }
    m
}

#[test]
fn second_order_in_time() {
    let g = Grid::rectangle(2.0, 1.0, 31, 31).unwrap();
    let finals: Vec<Field> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            let mut c = bump(g, 0.4, 0.5);
            c.dt = dt;
            simulate(&c).unwrap().final_state().clone()
        })
        .collect();
    let e1 = l2_distance(&finals[0], &finals[1]);
    let e2 = l2_distance(&finals[1], &finals[2]);
    let ratio = e1 / e2;
    assert!((3.0..=5.0).contains(&ratio), "{e1:e} {e2:e} {ratio}");
}

#[test]
fn second_order_in_space() {
    let finals: Vec<Field> = [15, 31, 63]
        .iter()
        .map(|&n| {
            let mut c = bump(Grid::rectangle(2.0, 1.0, n, n).unwrap(), 0.1, 0.5);
            c.dt = 5e-4;
            simulate(&c).unwrap().final_state().clone()
        })
        .collect();
    let e1 = coarse_node_diff(&finals[0], &finals[1]);
    let e2 = coarse_node_diff(&finals[1], &finals[2]);
    let ratio = e1 / e2;
    assert!((3.0..=5.0).contains(&ratio), "{e1:e} {e2:e} {ratio}");
}

#[test]
fn identical_configs_give_identical_bits() {
    let mut c = bump(Grid::rectangle(2.0, 1.0, 23, 19).unwrap(), 0.3, 0.8);
    c.dt = 0.005;
    c.trace_stride = 3;
    let a = simulate(&c).unwrap();
    let b = simulate(&c).unwrap();
    assert_eq!(a.trace.samples.len(), b.trace.samples.len());
    for (x, y) in a.trace.samples.iter().zip(&b.trace.samples) {
        assert_eq!(x.weighted.to_bits(), y.weighted.to_bits());
        assert_eq!(x.flux0.to_bits(), y.flux0.to_bits());
    }
    assert!(a.final_state().values().iter().zip(b.final_state().values()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn linear_energy_is_dissipated_through_the_inflow_trace() {
    let g = Grid::rectangle(4.0, 2.0, 31, 31).unwrap();
    let mut c = SimConfig::new(g, 1, 3.0, InitialCondition::new(Shape::OutflowRamp, Scaling::Unit));
    c.linear = true;
    c.dt = 2e-3;
    c.trace_stride = 1;
    let s = simulate(&c).unwrap().trace.samples;
    let e0 = s[0].l2_sq;
    let mut dissipated = 0.0;
    for k in 1..s.len() {
        assert!(s[k].l2_sq <= s[k - 1].l2_sq, "growth at t = {}", s[k].t);
        dissipated += s[k - 1].flux0 * (s[k].t - s[k - 1].t);
        assert!(((s[k].l2_sq + dissipated) / e0 - 1.0).abs() < 0.02, "t = {}", s[k].t);
    }
    assert!(s.iter().all(|x| x.weighted >= x.l2_sq));
}

#[test]
fn stationary_mode_barely_moves_in_one_step() {
    let b = PI;
    let l = minimal_critical_rectangle(b).unwrap();
    let mut defects = Vec::new();
    for n in [31, 63] {
        let g = Grid::rectangle(l, b, n, n).unwrap();
        let mut c = SimConfig::new(g, 1, 0.01, InitialCondition::new(Shape::StationaryMode { k: 1, l: 1, n: 1 }, Scaling::Unit));
        c.linear = true;
        c.dt = 0.01;
        let traj = simulate(&c).unwrap();
        let u0 = &traj.snapshots[0].1;
        defects.push(l2_distance(traj.final_state(), u0) / calculus::l2_sq(u0).sqrt());
    }
    assert!(defects[0] < 1e-3, "{defects:?}");
    assert!(defects[1] < defects[0] / 3.0, "{defects:?}");
}

#[test]
fn stationary_mode_residual_is_second_order() {
    let b = PI;
    let mode = stationary_mode(1, 1, 1, b).unwrap();
    let residual = |n: usize| {
        let g = Grid::rectangle(mode.length(), b, n, n).unwrap();
        let u = mode.sample(g).unwrap();
        let op = assemble_linear_part(g, 1, 0.0).unwrap();
        op.apply(&u).unwrap().max_abs()
    };
    let r: Vec<f64> = [63, 127, 255].iter().map(|&n| residual(n)).collect();
    for w in r.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.0..=5.0).contains(&ratio), "{r:?}");
    }
}

#[test]
fn operator_matches_continuous_derivatives_at_second_order() {
    // v = sin^2(pi x / L) sin(pi (y + B) / 2B) satisfies every wall condition of the operator
    let (l, b) = (2.0, 1.0);
    let exact = |x: f64, y: f64| {
        let (k, m) = (PI / l, PI / (2.0 * b));
        let s = (m * (y + b)).sin();
        // f = (1 - cos 2kx) / 2
        let fx = k * (2.0 * k * x).sin();
        let fxxx = -4.0 * k.powi(3) * (2.0 * k * x).sin();
        fx * s + fxxx * s - m * m * fx * s
    };
    let err = |n: usize| {
        let g = Grid::rectangle(l, b, n, n).unwrap();
        let u =
            Field::sample(g, |x, y| (PI * x / l).sin().powi(2) * (PI * (y + b) / (2.0 * b)).sin()).unwrap().enforce_dirichlet();
        let au = assemble_linear_part(g, 1, 0.0).unwrap().apply(&u).unwrap();
        let mut m = 0.0_f64;
        for i in 1..=n {
            for j in 1..=n {
                m = m.max((au.get(i, j) - exact(g.x(i), g.y(j))).abs());
            }
        }
        m
    };
    let (e1, e2) = (err(31), err(63));
    assert!((3.0..=5.0).contains(&(e1 / e2)), "{e1:e} {e2:e}");
}

#[test]
fn regularization_is_dissipative_up_to_closure_error() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for n in [15, 31, 63] {
        let g = Grid::rectangle(2.0, 1.0, n, n).unwrap();
        for _ in 0..10 {
            let coef: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = Field::sample(g, |x, y| {
                let mut v = 0.0;
                for p in 0..3 {
                    for q in 0..3 {
                        v += coef[3 * p + q]
                            * ((p + 1) as f64 * PI * x / 2.0).sin()
                            * ((q + 1) as f64 * PI * (y + 1.0) / 2.0).sin();
                    }
                }
                v
            })
            .unwrap()
            .enforce_dirichlet();
            let d4 = apply_operator(&u, OperatorKind::Dx4).unwrap();
            let e4 = apply_operator(&u, OperatorKind::Dy4).unwrap();
            let form = calculus::inner(&d4, &u) + calculus::inner(&e4, &u);
            assert!(form >= -g.hx() * calculus::l2_sq(&u), "n = {n}: {form}");
        }
    }
}

#[test]
fn small_perturbations_stay_small() {
    let g = Grid::rectangle(2.0, 1.0, 31, 31).unwrap();
    let mut c = SimConfig::new(g, 1, 5.0, InitialCondition::new(Shape::SineBump, Scaling::WeightedEnergy(0.5 * 441.0 / 256.0)));
    c.dt = 5e-3;
    let u0 = c.initial.build(g).unwrap();
    let bump = Field::sample(g, |x, y| (PI * x).sin() * (PI * (y + 1.0)).sin()).unwrap().enforce_dirichlet();
    let scale = 1e-6 / calculus::l2_sq(&bump).sqrt();
    let perturbed_values: Vec<f64> = u0.values().iter().zip(bump.values()).map(|(a, b)| a + scale * b).collect();
    let perturbed = Field::from_values(g, perturbed_values).unwrap();
    let delta0 = l2_distance(&u0, &perturbed);
    let a = simulate_from(&c, u0).unwrap();
    let b = simulate_from(&c, perturbed).unwrap();
    let k = l2_distance(a.final_state(), b.final_state()) / delta0;
    assert!(k.is_finite() && k < 1.0, "K = {k}");
}

#[test]
fn regularized_sweep_of_zero_datum() {
    let g = Grid::rectangle(2.0, 1.0, 15, 15).unwrap();
    let mut c = bump(g, 0.1, 0.0);
    c.dt = 0.01;
    let sweep = simulate_regularized_sweep(&c, &[1e-2, 5e-3, 0.0]).unwrap();
    assert_eq!(sweep.distances, vec![0.0, 0.0]);
    assert_eq!(sweep.trajectories.len(), 3);
}

#[test]
fn regularization_converges_at_first_order() {
    let g = Grid::rectangle(2.0, 1.0, 31, 31).unwrap();
    let mut c = bump(g, 0.2, 0.5);
    c.dt = 2e-3;
    let sweep = simulate_regularized_sweep(&c, &[4e-3, 2e-3, 1e-3, 5e-4]).unwrap();
    let d = &sweep.distances;
    // halving gaps: consecutive distances drop by about two
    for w in d.windows(2) {
        let r = w[0] / w[1];
        assert!((1.6..=2.4).contains(&r), "{d:?}");
    }
}

#[test]
fn strip_runs_check_truncation() {
    let narrow = Grid::new(2.0, 1.0, 15, 31, DomainKind::TruncatedStrip).unwrap();
    let c = SimConfig::new(narrow, 1, 0.1, InitialCondition::new(Shape::StripPacket { radius: 0.5 }, Scaling::Unit));
    assert!(matches!(simulate_strip(&c), Err(DynamicsError::Geometry(GeometryError::StripTooNarrow { .. }))));

    let rect = Grid::rectangle(2.0, 2.0, 15, 31).unwrap();
    let c = SimConfig::new(rect, 1, 0.1, InitialCondition::new(Shape::StripPacket { radius: 0.5 }, Scaling::Unit));
    assert!(matches!(simulate_strip(&c), Err(DynamicsError::InvalidConfig { key: "domain_kind", .. })));

    let wide = Grid::new(2.0, 2.0, 15, 31, DomainKind::TruncatedStrip).unwrap();
    let mut c = SimConfig::new(wide, 1, 0.2, InitialCondition::new(Shape::StripPacket { radius: 0.5 }, Scaling::Amplitude(0.3)));
    c.dt = 0.01;
    let run = simulate_strip(&c).unwrap();
    assert_eq!(run.widened.config.grid.ny(), 47);
    assert!(run.sensitivity < 0.01, "{}", run.sensitivity);
}

#[test]
fn snapshot_datum_round_trips_through_a_run() {
    let g = Grid::rectangle(2.0, 1.0, 15, 15).unwrap();
    let mut c = bump(g, 0.05, 0.4);
    c.dt = 0.01;
    let first = simulate(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u0.bin");
    snapshot::write_snapshot(&path, &first.snapshots[0].1, 0.0).unwrap();
    let mut from_file = c.clone();
    from_file.initial = InitialCondition::new(Shape::Snapshot { path: path.clone() }, Scaling::Unit);
    let second = simulate(&from_file).unwrap();
    assert_eq!(first.final_state(), second.final_state());

    let other = Grid::rectangle(2.0, 1.0, 17, 15).unwrap();
    from_file.grid = other;
    assert!(matches!(simulate(&from_file), Err(DynamicsError::InvalidConfig { key: "initial", .. })));
}

#[test]
fn trace_and_snapshot_sampling() {
    let g = Grid::rectangle(2.0, 1.0, 15, 15).unwrap();
    let mut c = bump(g, 0.1, 0.3);
    c.dt = 0.01;
    c.trace_stride = 3;
    c.snapshot_stride = 4;
    let t = simulate(&c).unwrap();
    let times: Vec<f64> = t.trace.times();
    assert_eq!(times.len(), 1 + 3 + 1); // 0, 3, 6, 9, and the final step 10
    assert!(times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(t.snapshots.len(), 1 + 2 + 1);
    assert!(t.snapshots.iter().all(|(_, f)| f.is_clean()));
    assert!((t.final_time() - 0.1).abs() < 1e-12);
    assert!(t.trace.i0_initial.unwrap() > 0.0);
}
