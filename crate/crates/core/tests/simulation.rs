mod common;

use nalgebra::DVector;
use regsync_core::demos::{self, DemoCase};
use regsync_core::design::design_protocol;
use regsync_core::dynamics::{simulate, DelayProfile, InitialConditions};
use regsync_core::{AgentModel, CommGraph, CouplingMode, DesignOverrides, ProtocolDesign, RealMatrix, Trajectory};

const STEPS: usize = 200;
const TOL: f64 = 1e-10;

fn pinned(model: &AgentModel, kappa_bar: u32, mode: CouplingMode) -> ProtocolDesign {
    let overrides = DesignOverrides { epsilon: Some(1e-3), rho: None };
    design_protocol(model, kappa_bar, mode, overrides).unwrap()
}

fn scaled_expanded_laplacian(g: &CommGraph) -> RealMatrix {
    let n = g.len();
    RealMatrix::from_fn(n, n, |i, j| {
        let d: f64 = (0..n).map(|l| g.weight(i, l)).sum();
        let entry = if i == j { d + g.root_flag(i) } else { -g.weight(i, j) };
        entry / (2.0 + d)
    })
}

fn put(dst: &mut RealMatrix, row: usize, col: usize, block: &RealMatrix) {
    let mut view = dst.view_mut((row, col), block.shape());
    view += block;
}

/// Closed-loop update matrix on `[x; χ; x̂; x_r]` (x̂ omitted in full mode)
/// for zero delays.
fn monolithic(model: &AgentModel, design: &ProtocolDesign, g: &CommGraph) -> RealMatrix {
    let (agents, n) = (g.len(), model.n());
    let nn = agents * n;
    let partial = design.mode == CouplingMode::Partial;
    let blocks = if partial { 3 } else { 2 };
    let dim = blocks * nn + n;
    let (xs, cs, hs, rs) = (0, nn, 2 * nn, blocks * nn);
    let eye = RealMatrix::identity(agents, agents);
    let m = scaled_expanded_laplacian(g);
    let m1 = &m * DVector::from_element(agents, 1.0);
    let a = &model.a;
    let bk = &model.b * design.feedback();
    let mut t = RealMatrix::zeros(dim, dim);

    put(&mut t, xs, xs, &eye.kronecker(a));
    put(&mut t, xs, cs, &-eye.kronecker(&bk));
    put(&mut t, cs, cs, &(eye.kronecker(&(a - &bk)) - m.kronecker(a)));
    put(&mut t, rs, rs, a);
    if partial {
        let fc = design.f.as_ref().unwrap() * &model.c;
        put(&mut t, cs, hs, &eye.kronecker(a));
        put(&mut t, hs, hs, &eye.kronecker(&(a - &fc)));
        put(&mut t, hs, cs, &-m.kronecker(&bk));
        put(&mut t, hs, xs, &m.kronecker(&fc));
        put(&mut t, hs, rs, &-RealMatrix::from_column_slice(agents, 1, m1.as_slice()).kronecker(&fc));
    } else {
        put(&mut t, cs, xs, &m.kronecker(a));
        put(&mut t, cs, rs, &-RealMatrix::from_column_slice(agents, 1, m1.as_slice()).kronecker(a));
    }
    t
}

fn stacked(traj: &Trajectory, k: usize, partial: bool) -> DVector<f64> {
    let s = &traj.steps[k];
    let mut v: Vec<f64> = s.nodes.iter().flat_map(|nd| nd.x.iter().copied().collect::<Vec<_>>()).collect();
    v.extend(s.nodes.iter().flat_map(|nd| nd.chi.iter().copied().collect::<Vec<_>>()));
    if partial {
        v.extend(s.nodes.iter().flat_map(|nd| nd.xhat.as_ref().unwrap().iter().copied().collect::<Vec<_>>()));
    }
    v.extend(s.exo.iter().copied());
    DVector::from_vec(v)
}

fn random_initial(seed: u64, agents: usize, n: usize) -> InitialConditions {
    let mut rng = common::rng(seed);
    InitialConditions {
        x0: common::random_states(&mut rng, agents, n),
        chi0: Some(common::random_states(&mut rng, agents, n)),
        xhat0: Some(common::random_states(&mut rng, agents, n)),
        past_inputs: None,
        xr0: common::random_states(&mut rng, 1, n).remove(0),
    }
}

#[test]
fn zero_delay_matches_monolithic_iteration() {
    let mut rng = common::rng(21);
    let graphs = [common::three_cycle(), common::random_rooted_graph(&mut rng, 5)];
    for mode in [CouplingMode::Full, CouplingMode::Partial] {
        let model = common::mode_model(mode);
        let design = pinned(&model, 0, mode);
        for (gi, g) in graphs.iter().enumerate() {
            let initial = random_initial(22 + gi as u64, g.len(), model.n());
            let traj = simulate(&model, &design, g, &DelayProfile::uniform(g.len(), 0), &initial, STEPS).unwrap();
            let t = monolithic(&model, &design, g);
            let partial = mode == CouplingMode::Partial;
            let mut z = stacked(&traj, 0, partial);
            for k in 1..=STEPS {
                z = &t * z;
                let dev = (&z - stacked(&traj, k, partial)).amax();
                assert!(dev <= TOL, "{mode} graph {gi} step {k}: {dev:e}");
            }
        }
    }
}

/// Straightforward simulator keeping the full input history.
fn reference(
    model: &AgentModel,
    design: &ProtocolDesign,
    g: &CommGraph,
    kappa: &[u32],
    initial: &InitialConditions,
    steps: usize,
) -> Vec<Vec<DVector<f64>>> {
    let agents = g.len();
    let n = model.n();
    let m = scaled_expanded_laplacian(g);
    let partial = design.mode == CouplingMode::Partial;
    let out = |x: &DVector<f64>| if partial { &model.c * x } else { x.clone() };
    let mut x = initial.x0.clone();
    let mut chi = initial.chi0.clone().unwrap();
    let mut xhat = initial.xhat0.clone().unwrap();
    let mut xr = initial.xr0.clone();
    let mut u_hist: Vec<Vec<DVector<f64>>> = Vec::new();
    let mut states = vec![x.clone()];
    let gain = design.feedback();
    for k in 0..steps {
        u_hist.push(chi.iter().map(|c| -(&gain * c)).collect());
        let ud: Vec<DVector<f64>> = (0..agents)
            .map(|i| {
                let t = k as i64 - i64::from(kappa[i]);
                if t < 0 {
                    DVector::zeros(model.m())
                } else {
                    u_hist[t as usize][i].clone()
                }
            })
            .collect();
        let mut next_x = Vec::new();
        let mut next_chi = Vec::new();
        let mut next_xhat = Vec::new();
        for i in 0..agents {
            let norm = 1.0 / (2.0 + g.in_degree(i));
            let mut zbar = out(&(&x[i] - &xr)) * (g.root_flag(i) * norm);
            let mut zchi = DVector::zeros(n);
            let mut zu = DVector::zeros(model.m());
            for j in 0..agents {
                zbar += out(&(&x[i] - &x[j])) * (g.weight(i, j) * norm);
                zchi += &chi[j] * m[(i, j)];
                zu += &ud[j] * m[(i, j)];
            }
            next_x.push(&model.a * &x[i] + &model.b * &ud[i]);
            if partial {
                let f = design.f.as_ref().unwrap();
                next_xhat.push(&model.a * &xhat[i] + &model.b * zu + f * (zbar - &model.c * &xhat[i]));
                next_chi.push(&model.a * (&chi[i] + &xhat[i] - zchi) + &model.b * &ud[i]);
            } else {
                next_chi.push(&model.a * (&chi[i] + zbar - zchi) + &model.b * &ud[i]);
            }
        }
        x = next_x;
        chi = next_chi;
        if partial {
            xhat = next_xhat;
        }
        xr = &model.a * xr;
        states.push(x.clone());
    }
    states
}

#[test]
fn delayed_runs_match_reference_simulator() {
    let mut rng = common::rng(31);
    let g = common::random_rooted_graph(&mut rng, 4);
    for mode in [CouplingMode::Full, CouplingMode::Partial] {
        let model = common::mode_model(mode);
        let design = pinned(&model, 2, mode);
        let kappa = vec![2, 0, 1, 2];
        let initial = random_initial(32, 4, model.n());
        let traj = simulate(&model, &design, &g, &DelayProfile::new(kappa.clone()), &initial, STEPS).unwrap();
        let oracle = reference(&model, &design, &g, &kappa, &initial, STEPS);
        for k in 0..=STEPS {
            for i in 0..4 {
                let dev = (&traj.steps[k].nodes[i].x - &oracle[k][i]).amax();
                assert!(dev <= TOL, "{mode} step {k} agent {i}: {dev:e}");
            }
        }
    }
}

#[test]
fn synchronized_start_stays_synchronized() {
    for case in DemoCase::ALL {
        for mode in [CouplingMode::Full, CouplingMode::Partial] {
            let mut cfg = demos::case_config(case, mode);
            let xr = cfg.sim.exosystem.clone();
            cfg.sim.initial_states = vec![xr; case.agents()];
            let design = cfg.design().unwrap();
            let traj = cfg.simulate_for(&design, 300).unwrap();
            assert!(traj.errors().iter().all(|&e| e == 0.0), "{}", case.name(mode));
        }
    }
}

#[test]
fn delays_act_only_after_they_elapse() {
    let cfg = demos::case_config(DemoCase::One, CouplingMode::Full);
    let design = cfg.design().unwrap();
    let (model, g, initial) = (cfg.model().unwrap(), cfg.graph().unwrap(), cfg.initial_conditions());
    let profiles = [vec![1, 1, 2], vec![2, 2, 2], vec![2, 1, 1]];
    let runs: Vec<Trajectory> = profiles
        .iter()
        .map(|k| simulate(&model, &design, &g, &DelayProfile::new(k.clone()), &initial, 20).unwrap())
        .collect();
    for (p, q) in [(0, 1), (0, 2), (1, 2)] {
        let shared = *profiles[p].iter().chain(&profiles[q]).min().unwrap() as usize;
        for k in 0..=shared {
            assert_eq!(runs[p].steps[k].nodes, runs[q].steps[k].nodes, "profiles {p}/{q} at step {k}");
        }
        assert_ne!(runs[p].steps[20].nodes, runs[q].steps[20].nodes);
    }
}

#[test]
fn identical_configs_give_identical_trajectories() {
    let cfg = demos::case_config(DemoCase::Two, CouplingMode::Partial);
    let design = cfg.design().unwrap();
    let first = cfg.simulate_for(&design, 500).unwrap();
    let second = cfg.clone().simulate_for(&cfg.design().unwrap(), 500).unwrap();
    let bits = |t: &Trajectory| -> Vec<u64> {
        t.steps
            .iter()
            .flat_map(|s| s.nodes.iter().flat_map(|nd| nd.x.iter().chain(nd.chi.iter()).map(|v| v.to_bits()).collect::<Vec<_>>()))
            .collect()
    };
    assert_eq!(bits(&first), bits(&second));
}

#[test]
fn trajectory_shape() {
    let cfg = demos::case_config(DemoCase::Three, CouplingMode::Full);
    let traj = cfg.simulate_for(&cfg.design().unwrap(), 37).unwrap();
    assert_eq!(traj.steps.len(), 38);
    assert_eq!(traj.k_max(), 37);
    assert_eq!(traj.agents(), 10);
    for s in &traj.steps {
        let worst = s.nodes.iter().map(|nd| (&nd.x - &s.exo).norm()).fold(0.0, f64::max);
        assert_eq!(s.error, worst);
    }
}
