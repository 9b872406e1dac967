mod common;

use qlsp_core::ansatz::AnsatzCircuit;
use qlsp_core::cost::{CostTermTable, PREPROCESS_TOL};
use qlsp_core::problems::{self, Stencil};
use qlsp_core::shadow::shadow_size;
use qlsp_core::vqls::{circuits_per_step_sqls, circuits_per_step_vqls};
use qlsp_core::PauliString;

fn ps(s: &str) -> PauliString {
    s.parse().unwrap()
}

fn coefficient(p: &qlsp_core::problems::LinearProblem, s: &str) -> f64 {
    p.a.terms()
        .iter()
        .find(|(_, t)| *t == ps(s))
        .map(|(c, _)| c.re)
        .unwrap_or(0.0)
}

#[test]
fn fixture_coefficients_are_verbatim() {
    let i = problems::ising_problem().unwrap();
    assert_eq!(coefficient(&i, "ZZII"), 0.0123);
    assert_eq!(coefficient(&i, "IZZI"), -0.0123);
    assert_eq!(coefficient(&i, "XIII"), 0.123);
    assert_eq!(coefficient(&i, "IIII"), 0.508);
    let r1 = problems::rqlsp1().unwrap();
    assert_eq!(coefficient(&r1, "IXXI"), -0.0513);
    assert_eq!(coefficient(&r1, "IIYY"), -0.366);
    let r2 = problems::rqlsp2().unwrap();
    assert_eq!(coefficient(&r2, "XIIX"), 0.183);
    assert_eq!(r2.a.max_locality(), 2);
    assert_eq!(ps("XIIX").locality(), 2);
    assert_eq!(ps("ZZII").locality(), 2);
}

#[test]
fn rqlsp_condition_numbers_are_near_ten() {
    for p in [problems::rqlsp1().unwrap(), problems::rqlsp2().unwrap()] {
        assert!((p.kappa() - 10.0).abs() < 0.1, "{}: {}", p.label(), p.kappa());
    }
}

#[test]
fn printed_iqlsp_condition_number() {
    // three-figure rounding of the tuned coefficients moves κ from 60 to about 66.4
    let k = problems::ising_problem().unwrap().kappa();
    assert!((k - 66.386).abs() < 1e-3, "{k}");
}

#[test]
fn potential_grid_entries() {
    let p = problems::potential_grid_4x4().unwrap();
    let a = p.a_dense();
    assert!((a.get(5, 5).re - 0.22941573).abs() < 1e-12);
    assert!((a.get(5, 6).re + 0.05735393).abs() < 1e-12);
    assert!((a.get(5, 9).re + 0.05735393).abs() < 1e-12);
    assert!(a.get(5, 7).norm() < 1e-12);
    assert!((a.get(5, 5).re / a.get(5, 6).re + 4.0).abs() < 1e-6);
    assert!(p.meta.norm <= 1.0);
}

#[test]
fn laplace16_normalization() {
    let p = problems::laplace_grid(16, Stencil::Banded).unwrap();
    let a = p.a_dense();
    assert!((a.get(0, 0).re - 0.0562544).abs() < 5e-8);
    assert!((a.get(0, 1).re + 0.0140636).abs() < 5e-8);
    assert!((a.get(0, 16).re + 0.0140636).abs() < 5e-8);
    assert!((a.get(15, 16).re + 0.0140636).abs() < 5e-8);
    assert!(p.meta.norm <= 1.0);
    let nonzero: Vec<usize> = (0..256).filter(|&i| p.b.amplitudes()[i].norm() > 1e-12).collect();
    assert_eq!(nonzero, (0..16).collect::<Vec<_>>());
    assert!((p.meta.b_scale.unwrap() - 0.25 * p.meta.norm * 4.0).abs() < 1e-12);
    assert!(problems::laplace_grid(8, Stencil::Banded).is_err());
}

#[test]
fn ansatz_parameter_counts() {
    assert_eq!(AnsatzCircuit::hardware_efficient(4, 1).unwrap().param_count(), 12);
    assert_eq!(AnsatzCircuit::real_amplitude(4, 1).unwrap().param_count(), 6);
}

#[test]
fn circuit_count_formulas() {
    let v = circuits_per_step_vqls(2500, 50, 10_000) as f64;
    let s = circuits_per_step_sqls(2500, 50, 2, 0.01).unwrap() as f64;
    assert!((v / 1.594e12 - 1.0).abs() < 5e-3, "{v}");
    assert!((s / 6.86e7 - 1.0).abs() < 5e-3, "{s}");
    // few terms favour the Hadamard test, the shadow count wins from L ≈ 20 on
    assert!(circuits_per_step_sqls(4, 50, 2, 0.01).unwrap() > circuits_per_step_vqls(4, 50, 10_000));
    for l in [20, 100, 2500] {
        assert!(circuits_per_step_sqls(l, 50, 2, 0.01).unwrap() < circuits_per_step_vqls(l, 50, 10_000));
    }
    let mut prev = (0, 0);
    for l in [2u64, 4, 8, 16, 100, 1000] {
        let cur = (circuits_per_step_vqls(l, 10, 100), circuits_per_step_sqls(l, 10, 2, 0.05).unwrap());
        assert!(cur.0 > prev.0 && cur.1 > prev.1);
        prev = cur;
    }
}

#[test]
fn shadow_budget_examples() {
    assert_eq!(shadow_size(76, 5, 0.01, 1.0).unwrap(), 15_182_464);
    let a = shadow_size(40, 3, 0.02, 1.0).unwrap() as f64;
    let b = shadow_size(40, 3, 0.01, 1.0).unwrap() as f64;
    assert!((b / a - 4.0).abs() < 1e-4);
}

#[test]
fn preprocessing_shrinks_the_potential_grid_tables() {
    let p = problems::potential_grid_4x4().unwrap();
    let raw = CostTermTable::build(&p.a, &p.u).unwrap();
    let pp = raw.preprocess(PREPROCESS_TOL);
    assert!(pp.n_pp() < raw.raw_count());
    let direct = CostTermTable::build_preprocessed(&p.a, &p.u, PREPROCESS_TOL).unwrap();
    assert_eq!(direct.n_pp(), pp.n_pp());
    assert_eq!(direct.raw_count(), raw.raw_count());
}
