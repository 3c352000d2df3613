mod common;

use common::*;
use hmimo_core::binary::*;
use hmimo_core::mm::{lorentzian_from_unit, mm_solve, unit_from_lorentzian};
use hmimo_core::sphere::*;
use hmimo_core::wmmse::{update_all_precoders, update_decoders, update_weights, wmmse_objective};
use hmimo_core::{RMat, RVec};

#[test]
fn fixing_agrees_with_optimum_m10() {
    for seed in 0..50 {
        let qf = random_qf(10, seed);
        let (opt, _) = brute_force(&qf);
        let p = build_sd_problem(&qf).unwrap();
        for (k, f) in p.fixed.iter().enumerate() {
            if let Some(v) = f {
                assert_eq!(*v, opt[k], "seed {seed} coordinate {k}");
            }
        }
    }
}

#[test]
fn lower_bound_with_zero_target() {
    // choose the tail so the residual target of the leading block vanishes
    let qf = random_qf(8, 3);
    let p = build_sd_problem(&qf).unwrap();
    let mut p0 = p.clone();
    let k = 5;
    let tail = vec![1.0, -1.0, 1.0, 1.0];
    let t = p.c.view((0, k - 1), (k - 1, 4)) * RVec::from_column_slice(&tail);
    for i in 0..k - 1 {
        p0.d[i] = t[i];
    }
    let lb = hc_lower_bound(&p0, &tail, k);
    let c11 = p0.c.view((0, 0), (k - 1, k - 1)).into_owned();
    let gram = c11.transpose() * &c11;
    let lam_min = gram.symmetric_eigenvalues().min();
    let exact = (0u64..1 << (k - 1))
        .map(|mask| (&c11 * signs(k - 1, mask)).norm_squared())
        .fold(f64::INFINITY, f64::min);
    assert!(lb >= 0.0 && lb <= exact + 1e-12);
    assert!(
        (lb - lam_min * (k - 1) as f64).abs() <= 1e-6 * (1.0 + lb),
        "{lb} vs {}",
        lam_min * (k - 1) as f64
    );
}

#[test]
fn lower_bound_only_shrinks_the_tree() {
    for seed in 0..100 {
        let qf = random_qf(11, 500 + seed);
        let p = build_sd_problem(&qf).unwrap();
        let r0 = p.radius_sq_through(&hc_solve(&qf, &RVec::from_element(11, 1.0)).x);
        let plain = sd_search(&p, r0, SdVariant::Plain.options()).unwrap();
        let lb = sd_search(&p, r0, SdVariant::LowerBound.options()).unwrap();
        assert_eq!(plain.q_star, lb.q_star);
        assert!(lb.nodes_visited <= plain.nodes_visited);
    }
}

#[test]
fn node_count_ordering_on_average() {
    let mut rng = rng(14);
    let inst: Vec<QuadraticForm> = (0..60)
        .map(|_| QuadraticForm::random(14, &mut rng))
        .collect();
    let rows = hmimo_core::harness::sd_bench(&inst, &SdVariant::ALL).unwrap();
    let avg = |v: SdVariant| {
        let xs: Vec<f64> = rows
            .iter()
            .filter(|r| r.variant == v.name())
            .map(|r| r.nodes_visited as f64)
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let (plain, oc, acc) = (
        avg(SdVariant::Plain),
        avg(SdVariant::OptimalCondition),
        avg(SdVariant::Accelerated),
    );
    assert!(acc <= oc && oc <= plain, "{acc} {oc} {plain}");
}

#[test]
fn radius_trace_decreases() {
    let qf = random_qf(12, 8);
    let p = build_sd_problem(&qf).unwrap();
    let r = sd_search(&p, f64::INFINITY, SdOptions::default()).unwrap();
    assert!(r.radius_trace.windows(2).all(|w| w[1] < w[0]));
    assert!((r.radius_trace.last().unwrap() - p.distance_sq(&r.q_star)).abs() < 1e-9);
}

#[test]
fn hc_relaxation_bounds_binary_optimum() {
    for seed in 0..100 {
        let m = 2 + seed as usize % 9;
        let qf = random_qf(m, 900 + seed);
        let (_, opt) = brute_force(&qf);
        let out = hc_solve(&qf, &RVec::from_element(m, -1.0));
        assert!(out.relaxed.value <= opt + 1e-9 * (1.0 + opt.abs()));
        assert!(out.objective >= opt - 1e-12);
    }
}

#[test]
fn hc_multi_pass_reaches_local_optimum() {
    let qf = random_qf(12, 77);
    let out = hc_solve_with(&qf, &RVec::from_element(12, 1.0), LocalSearch::UntilStable);
    let mut x = out.x.clone();
    assert_eq!(local_search(&qf, &mut x), 0);
}

#[test]
fn text_file_round_trip() {
    let qf = random_qf(7, 1);
    let path = std::env::temp_dir().join(format!("hmimo-quadform-{}.txt", std::process::id()));
    std::fs::write(&path, qf.to_text()).unwrap();
    let back = QuadraticForm::from_text(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(back, qf);
    assert!(QuadraticForm::new(
        RMat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]),
        RVec::zeros(2)
    )
    .is_err());
}

/// An element update inside a network never raises the WMMSE objective.
#[test]
fn element_updates_descend_in_network() {
    for seed in 0..10 {
        let net = random_network(seed, 2, 2, 2, 1, 2, 3);
        let mut st = random_state(&net, seed + 11);
        let varpi = 0.8;
        st.q =
            st.q.iter()
                .map(|q| q.map(|_| hmimo_core::linalg::cr(varpi)))
                .collect();
        update_decoders(&net, &mut st).unwrap();
        update_weights(&net, &mut st).unwrap();
        update_all_precoders(&net, &mut st);
        let before = wmmse_objective(&net, &st).unwrap();
        let mut hc_state = st.clone();
        let mut sd_state = st.clone();
        for cell in 0..net.cells() {
            let p = assemble_element_problem(&net, &st, cell);
            let qf = to_real_binary(&p, varpi);
            let prev = response_to_signs(&st.q[cell], varpi);
            hc_state.q[cell] = signs_to_response(&hc_solve(&qf, &prev).x, varpi);
            sd_state.q[cell] = signs_to_response(
                &sd_solve(&qf, &prev, SdOptions::default()).unwrap().q_star,
                varpi,
            );
        }
        let hc = wmmse_objective(&net, &hc_state).unwrap();
        let sd = wmmse_objective(&net, &sd_state).unwrap();
        let tol = 1e-9 * before.abs();
        assert!(hc <= before + tol && sd <= hc + tol, "{before} {hc} {sd}");

        let mut lz = st.clone();
        lz.q =
            st.q.iter()
                .map(|q| {
                    lorentzian_from_unit(&unit_from_lorentzian(
                        &q.map(|z| z * 0.0 + hmimo_core::linalg::c(0.5, 0.5)),
                    ))
                })
                .collect();
        let start = wmmse_objective(&net, &lz).unwrap();
        let snapshot = lz.clone();
        for cell in 0..net.cells() {
            let p = assemble_element_problem(&net, &snapshot, cell);
            lz.q[cell] =
                mm_solve(&p, &unit_from_lorentzian(&snapshot.q[cell])).lorentzian_response();
        }
        assert!(wmmse_objective(&net, &lz).unwrap() <= start + 1e-9 * start.abs());
    }
}
