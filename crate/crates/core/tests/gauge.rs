mod common;

use ccresp::cc::{solve_ccsd, solve_lambda, CcOptions};
use ccresp::chem::{compute_integrals, Molecule};
use ccresp::gauge::{
    canonicalize, localize, localized_gauge, matrix_id, mulliken_populations, spin_expand, transform_amplitudes,
    AmplitudeSet, Direction, Gauge, GaugeSpec, LocalizeOptions, OrbitalSpace,
};
use ccresp::response::{cc_rdm1, natural_occupations, system_dipole};
use ccresp::Error;
use common::*;
use ndarray::{s, Array2};
use rand::Rng;

fn dimer(sep: f64) -> Molecule {
    Molecule::new(
        vec![atom(1, 0.0, 0.0, 0.0), atom(1, 0.0, 0.0, 1.4), atom(1, sep, 0.0, 0.0), atom(1, sep, 0.0, 1.4)],
        0,
    )
    .unwrap()
}

fn gauge_of(p: &Prepared) -> GaugeSpec {
    localized_gauge(&p.scf, &p.ints, &p.mol, &LocalizeOptions::default()).unwrap()
}

fn orthogonality_error(u: &Array2<f64>) -> f64 {
    let n = u.ncols();
    max_diff2(&u.t().dot(u), &Array2::eye(n))
}

fn boys(c: &Array2<f64>, p: &Prepared) -> f64 {
    (0..c.ncols())
        .map(|k| {
            let col = c.column(k);
            p.ints.dipole.iter().map(|d| col.dot(&d.dot(&col)).powi(2)).sum::<f64>()
        })
        .sum()
}

#[test]
fn separated_dimer_orbitals_localize_on_fragments() {
    let p = prepare(&dimer(50.0));
    let g = gauge_of(&p);
    assert!(g.converged);
    let c = g.c_localized();
    let pops = mulliken_populations(&c, &p.ints.s, &p.basis, 4);
    for pop in &pops[..g.n_occ()] {
        let on_a = pop[0] + pop[1];
        assert!(on_a.max(1.0 - on_a) > 0.99, "{pop:?}");
    }
    // Only one rotation angle exists between the two occupied orbitals: scan it.
    let c_occ = p.scf.c.slice(s![.., ..2]).to_owned();
    let best = (0..=20000)
        .map(|k| {
            let th = std::f64::consts::PI * k as f64 / 20000.0;
            let r = Array2::from_shape_vec((2, 2), vec![th.cos(), -th.sin(), th.sin(), th.cos()]).unwrap();
            boys(&c_occ.dot(&r), &p)
        })
        .fold(f64::MIN, f64::max);
    let got = boys(&c.slice(s![.., ..2]).to_owned(), &p);
    assert!(got >= best - 1e-9 && got - best < 1e-6 * best.abs(), "{got} vs {best}");
}

#[test]
fn single_occupied_orbital_is_not_rotated() {
    let p = prepare(&h2(1.4));
    let b = localize(&p.scf, &p.ints, OrbitalSpace::Occupied, &LocalizeOptions::default()).unwrap();
    assert_eq!(b.u.dim(), (1, 1));
    assert_eq!(b.u[[0, 0]].abs(), 1.0);
    assert_eq!(b.objective.len(), 1);
    assert!(b.converged);
}

#[test]
fn localization_preserves_reference_and_orthonormality() {
    for mol in [dimer(50.0), distorted_h4()] {
        let p = prepare(&mol);
        let g = gauge_of(&p);
        assert!(orthogonality_error(&g.u_occ) < 1e-10);
        assert!(orthogonality_error(&g.u_virt) < 1e-10);
        let c = g.c_localized();
        assert!(max_diff2(&c.t().dot(&p.ints.s).dot(&c), &Array2::eye(c.ncols())) < 1e-9);
        let co = c.slice(s![.., ..g.n_occ()]);
        let dens = co.dot(&co.t()) * 2.0;
        assert!(max_diff2(&dens, &p.scf.density) < 1e-10);
        let e = 0.5 * (&dens * &(&p.ints.hcore + &fock_of(&p, &dens))).sum();
        assert!((e + p.ints.e_nuc - p.scf.e_hf).abs() < 1e-10);
        for space in [OrbitalSpace::Occupied, OrbitalSpace::Virtual] {
            let b = localize(&p.scf, &p.ints, space, &LocalizeOptions::default()).unwrap();
            assert!(b.objective.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        }
    }
}

/// `F = h + G(D)` for a closed-shell density `D`.
fn fock_of(p: &Prepared, d: &Array2<f64>) -> Array2<f64> {
    let n = d.nrows();
    Array2::from_shape_fn((n, n), |(m, v)| {
        let mut x = p.ints.hcore[[m, v]];
        for l in 0..n {
            for s in 0..n {
                x += d[[l, s]] * (p.ints.eri[[m, v, l, s]] - 0.5 * p.ints.eri[[m, l, v, s]]);
            }
        }
        x
    })
}

#[test]
fn canonicalize_is_idempotent_and_phase_blind() {
    let p = prepare(&distorted_h4());
    let g = gauge_of(&p);
    let again = canonicalize(&g).unwrap();
    assert_eq!(again, g);
    let mut r = rng(3);
    for _ in 0..10 {
        let mut flipped = g.clone();
        for k in 0..g.n_occ() {
            if r.random_bool(0.5) {
                flipped.u_occ.column_mut(k).mapv_inplace(|x| -x);
            }
        }
        for k in 0..g.n_virt() {
            if r.random_bool(0.5) {
                flipped.u_virt.column_mut(k).mapv_inplace(|x| -x);
            }
        }
        let c = canonicalize(&flipped).unwrap();
        assert_eq!(c.u_occ, g.u_occ);
        assert_eq!(c.u_virt, g.u_virt);
        assert_eq!(c.basis_id, g.basis_id);
    }
}

#[test]
fn translation_shifts_centroids_and_keeps_order() {
    let p = prepare(&distorted_h4());
    let g = gauge_of(&p);
    let d = [1.3, -0.7, 2.1];
    let q = prepare(&p.mol.translated(d));
    let h = gauge_of(&q);
    assert_eq!(h.order, g.order);
    for (a, b) in g.centroids.iter().zip(&h.centroids) {
        for k in 0..3 {
            assert!((b[k] - a[k] - d[k]).abs() < 1e-8);
        }
    }
    for (a, b) in g.spreads.iter().zip(&h.spreads) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn exact_centroid_ties_are_rejected() {
    let p = prepare(&distorted_h4());
    let mut g = gauge_of(&p);
    g.centroids[1] = g.centroids[0];
    g.spreads[1] = g.spreads[0];
    assert!(matches!(canonicalize(&g), Err(Error::CanonicalTie(_, _))));
}

fn solved(p: &Prepared) -> AmplitudeSet {
    let opts = CcOptions::default();
    let cc = solve_lambda(&p.sys, &solve_ccsd(&p.sys, &opts).unwrap(), &opts).unwrap();
    let mut amps = cc.amps;
    amps.basis_id = matrix_id(&p.scf.c);
    amps
}

#[test]
fn amplitude_transforms_round_trip_and_check_their_inputs() {
    let p = prepare(&distorted_h4());
    let g = gauge_of(&p);
    let amps = solved(&p);
    let loc = transform_amplitudes(&amps, &g, Direction::ToLocalized).unwrap();
    assert_eq!(loc.gauge, Gauge::Localized);
    assert_eq!(loc.basis_id, g.basis_id);
    loc.validate().unwrap();
    let back = transform_amplitudes(&loc, &g, Direction::ToCanonical).unwrap();
    assert!(back.max_abs_diff(&amps) < 1e-12);
    assert!(matches!(transform_amplitudes(&loc, &g, Direction::ToLocalized), Err(Error::GaugeMismatch(_))));
    let mut foreign = amps.clone();
    foreign.basis_id = "0000000000000000".into();
    assert!(matches!(transform_amplitudes(&foreign, &g, Direction::ToLocalized), Err(Error::GaugeMismatch(_))));
    let small = AmplitudeSet::zeros(2, 2, Gauge::Canonical, "");
    assert!(matches!(transform_amplitudes(&small, &g, Direction::ToLocalized), Err(Error::Dimension(_))));

    let mut identity = g.clone();
    identity.u_occ = Array2::eye(g.n_occ());
    identity.u_virt = Array2::eye(g.n_virt());
    let same = transform_amplitudes(&amps, &identity, Direction::ToLocalized).unwrap();
    assert!(same.max_abs_diff(&amps) < 1e-15);
}

#[test]
fn observables_are_gauge_invariant() {
    let p = prepare(&distorted_h4());
    let g = gauge_of(&p);
    let amps = solved(&p);
    let (uo, uv) = g.spin_blocks();
    let loc_sys = p.sys.rotated(&uo, &uv).unwrap();
    assert!(loc_sys.max_offdiag_fock() > 1e-3);
    let opts = CcOptions::default();
    let cc_loc = solve_lambda(&loc_sys, &solve_ccsd(&loc_sys, &opts).unwrap(), &opts).unwrap();
    let cc_can = solve_ccsd(&p.sys, &opts).unwrap();
    assert!((cc_loc.e_corr - cc_can.e_corr).abs() < 1e-10);

    let loc = transform_amplitudes(&amps, &g, Direction::ToLocalized).unwrap();
    assert!(max_diff2(&loc.t1, &cc_loc.amps.t1) < 1e-8);
    assert!(max_diff4(&loc.t2, &cc_loc.amps.t2) < 1e-8);
    assert!(max_diff4(&loc.l2, &cc_loc.amps.l2) < 1e-8);

    let (e_corr, _, _) = ccresp::cc::ccsd_residuals(&loc_sys, &loc.t1, &loc.t2);
    assert!((e_corr - cc_can.e_corr).abs() < 1e-10);

    let rdm_can = cc_rdm1(&amps).unwrap();
    let rdm_loc = cc_rdm1(&loc).unwrap();
    let mu_can = system_dipole(&rdm_can, &p.sys).unwrap();
    let mu_loc = system_dipole(&rdm_loc, &loc_sys).unwrap();
    for k in 0..3 {
        assert!((mu_can[k] - mu_loc[k]).abs() < 1e-10);
    }
    let (a, b) = (natural_occupations(&rdm_can), natural_occupations(&rdm_loc));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn orbital_sign_flips_follow_the_odd_count_rule() {
    let p = prepare(&distorted_h4());
    let amps = solved(&p);
    let (o, v) = (p.sys.n_occ / 2, p.sys.n_virt / 2);
    let mut r = rng(11);
    for _ in 0..5 {
        let sign: Vec<f64> = (0..o + v).map(|_| if r.random_bool(0.5) { -1.0 } else { 1.0 }).collect();
        let so = |k: usize| sign[k / 2];
        let uo = spin_expand(&Array2::from_diag(&ndarray::Array1::from(sign[..o].to_vec())));
        let uv = spin_expand(&Array2::from_diag(&ndarray::Array1::from(sign[o..].to_vec())));
        let flipped = solved_sys(&p.sys.rotated(&uo, &uv).unwrap());
        let n_occ = p.sys.n_occ;
        for ((i, a), &x) in amps.t1.indexed_iter() {
            let s = so(i) * so(n_occ + a);
            assert!((flipped.t1[[i, a]] - s * x).abs() < 1e-10);
            assert!((flipped.l1[[i, a]] - s * amps.l1[[i, a]]).abs() < 1e-10);
        }
        for ((i, j, a, b), &x) in amps.t2.indexed_iter() {
            let s = so(i) * so(j) * so(n_occ + a) * so(n_occ + b);
            assert!((flipped.t2[[i, j, a, b]] - s * x).abs() < 1e-10);
            assert!((flipped.l2[[i, j, a, b]] - s * amps.l2[[i, j, a, b]]).abs() < 1e-10);
        }
    }
}

fn solved_sys(sys: &ccresp::cc::SpinOrbitalSystem) -> AmplitudeSet {
    let opts = CcOptions::default();
    solve_lambda(sys, &solve_ccsd(sys, &opts).unwrap(), &opts).unwrap().amps
}

#[test]
fn localization_requires_dipole_integrals() {
    let p = prepare(&h2(1.4));
    let mut ints = compute_integrals(&p.mol, &p.basis, p.mol.charge_center());
    ints.has_multipoles = false;
    assert!(localize(&p.scf, &ints, OrbitalSpace::Virtual, &LocalizeOptions::default()).is_err());
}
