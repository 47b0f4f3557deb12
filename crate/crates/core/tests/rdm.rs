mod common;

use ccresp::cc::{fci_rdm1, fci_rdm2, fci_solve, solve_ccsd, solve_lambda, CcOptions};
use ccresp::gauge::{AmplitudeSet, Gauge};
use ccresp::response::{cc_rdm1, cc_rdms, energy_from_rdms, hf_rdm1, hf_rdm2, natural_occupations, one_body_expectation, xccsd_rdm1};
use common::*;
use ndarray::Array2;

fn random_amps(o: usize, v: usize, seed: u64) -> AmplitudeSet {
    let mut r = rng(seed);
    let mut a = AmplitudeSet::zeros(o, v, Gauge::Canonical, "");
    a.t1 = random2(&mut r, (o, v), 0.2);
    a.t2 = random4(&mut r, (o, o, v, v), 0.2);
    a.l1 = random2(&mut r, (o, v), 0.2);
    a.l2 = random4(&mut r, (o, o, v, v), 0.2);
    a
}

#[test]
fn densities_match_fock_space_oracle_for_arbitrary_amplitudes() {
    for (o, v, seed) in [(2, 2, 1), (2, 4, 2), (4, 2, 3)] {
        let amps = random_amps(o, v, seed);
        let (g1, g2) = oracle_rdms(o + v, &amps.t1, &amps.t2, &amps.l1, &amps.l2);
        let block = cc_rdm1(&amps).unwrap();
        let (ad1, ad2) = cc_rdms(&amps).unwrap();
        assert!(max_diff2(&block.gamma, &g1) < 1e-12, "block γ {}", max_diff2(&block.gamma, &g1));
        assert!(max_diff2(&ad1.gamma, &g1) < 1e-12, "adjoint γ {}", max_diff2(&ad1.gamma, &g1));
        assert!(max_diff4(&ad2.gamma, &g2) < 1e-12, "adjoint Γ {}", max_diff4(&ad2.gamma, &g2));
    }
}

#[test]
fn reference_limit() {
    let amps = AmplitudeSet::zeros(2, 4, Gauge::Canonical, "");
    let (g1, g2) = cc_rdms(&amps).unwrap();
    assert_eq!(g1.gamma, hf_rdm1(6, 2).gamma);
    assert_eq!(g2.gamma, hf_rdm2(6, 2).gamma);
    assert_eq!(cc_rdm1(&amps).unwrap().gamma, hf_rdm1(6, 2).gamma);
    assert_eq!(xccsd_rdm1(&amps, 2).unwrap().gamma, hf_rdm1(6, 2).gamma);
    assert!(xccsd_rdm1(&amps, 4).is_err());
    let occ = natural_occupations(&hf_rdm1(6, 2));
    assert_eq!(occ.len(), 3);
    assert!((occ[0] - 2.0).abs() < 1e-14 && occ[1].abs() < 1e-14);
}

#[test]
fn two_electron_systems_match_fci_densities() {
    let opts = CcOptions::default();
    for mol in [h2(1.4), h2(3.0), heh_cation(1.46)] {
        let p = prepare(&mol);
        let cc = solve_lambda(&p.sys, &solve_ccsd(&p.sys, &opts).unwrap(), &opts).unwrap();
        let fci = fci_solve(&p.sys, 2).unwrap();
        let n = p.sys.n_so();
        let (g1, g2) = cc_rdms(&cc.amps).unwrap();
        let f1 = fci_rdm1(&fci, n);
        let f2 = fci_rdm2(&fci, n);
        assert!(max_diff2(&g1.symmetrized().gamma, &f1) < 1e-8);
        assert!(max_diff4(&g2.gamma, &f2) < 1e-8);
        assert!((g1.trace() - 2.0).abs() < 1e-8);
        assert!((g2.pair_trace() - 2.0).abs() < 1e-6);
        assert!((energy_from_rdms(&p.sys, &g1, &g2) - cc.e_total).abs() < 1e-7);
        let occ = natural_occupations(&g1);
        assert!(occ.iter().all(|&x| x > 0.0 && x < 2.0));
        assert!((occ.iter().sum::<f64>() - 2.0).abs() < 1e-8);
    }
}

#[test]
fn four_electron_densities_are_consistent() {
    let opts = CcOptions::default();
    let p = prepare(&distorted_h4());
    let cc = solve_lambda(&p.sys, &solve_ccsd(&p.sys, &opts).unwrap(), &opts).unwrap();
    let (g1, g2) = cc_rdms(&cc.amps).unwrap();
    let n_el = 4.0;
    assert!((g1.trace() - n_el).abs() < 1e-8);
    assert!((g2.pair_trace() - n_el * (n_el - 1.0)).abs() < 1e-6);
    let pt = g2.partial_trace();
    assert!(max_diff2(&pt, &(&g1.gamma * (n_el - 1.0))) < 1e-7);
    assert!((energy_from_rdms(&p.sys, &g1, &g2) - cc.e_total).abs() < 1e-7);
    // block formulas and adjoint agree on a converged state
    assert!(max_diff2(&cc_rdm1(&cc.amps).unwrap().gamma, &g1.gamma) < 1e-12);
}

#[test]
fn one_body_expectations() {
    let p = prepare(&h2(1.4));
    let hf = hf_rdm1(4, 2);
    let n = one_body_expectation(&hf, &Array2::eye(4)).unwrap();
    assert!((n - 2.0).abs() < 1e-14);
    let ef = one_body_expectation(&hf, &p.sys.f).unwrap();
    assert!((ef - 2.0 * p.scf.eps[0]).abs() < 1e-10);
    let dz = p.sys.dipole.as_ref().unwrap()[2].clone();
    let opts = CcOptions::default();
    let cc = solve_lambda(&p.sys, &solve_ccsd(&p.sys, &opts).unwrap(), &opts).unwrap();
    let g = cc_rdm1(&cc.amps).unwrap();
    assert!(one_body_expectation(&g, &dz).unwrap().abs() < 1e-9);
    assert!(one_body_expectation(&g, &Array2::eye(3)).is_err());
}
