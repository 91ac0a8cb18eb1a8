//! Randomized invariant checks over the library primitives.

use bogospec::config::RunConfig;
use bogospec::json::{render, Json};
use bogospec::linalg::{complement_basis, symmetrize, SymEigen};
use bogospec::operators::excitation_levels;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn finite_f64() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

proptest! {
    // Float emission is lossless: parsing the rendered text recovers the
    // exact bit pattern.
    #[test]
    fn json_floats_round_trip(x in finite_f64()) {
        let s = render(&Json::Num(x)).unwrap();
        let back: f64 = s.trim().parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    // Rendered JSON always reparses under an independent parser, with
    // key order preserved.
    #[test]
    fn json_objects_reparse(
        ints in prop::collection::vec(any::<i64>(), 0..8),
        floats in prop::collection::vec(finite_f64(), 0..8),
        text in "[ -~]{0,40}",
    ) {
        let v = Json::obj(vec![
            ("ints", Json::Arr(ints.iter().map(|&i| Json::Int(i)).collect())),
            ("floats", Json::floats(&floats)),
            ("text", Json::Str(text.clone())),
            ("flag", Json::Bool(true)),
        ]);
        let s = render(&v).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(parsed["text"].as_str().unwrap(), text.as_str());
        prop_assert_eq!(parsed["ints"].as_array().unwrap().len(), ints.len());
        for (a, &b) in parsed["floats"].as_array().unwrap().iter().zip(&floats) {
            prop_assert_eq!(a.as_f64().unwrap().to_bits(), b.to_bits());
        }
    }

    // The complement basis of any unit vector is orthonormal and
    // annihilates the vector.
    #[test]
    fn complement_basis_is_orthonormal(
        raw in prop::collection::vec(-1.0f64..1.0, 2..12),
    ) {
        let v = DVector::from_vec(raw);
        prop_assume!(v.norm() > 1e-3);
        let v = v.normalize();
        let b = complement_basis(&v);
        let n = v.len();
        let gram = b.transpose() * &b;
        let id = DMatrix::<f64>::identity(n - 1, n - 1);
        prop_assert!((gram - id).norm() < 1e-12);
        prop_assert!((b.transpose() * &v).norm() < 1e-12);
    }

    // Eigendecomposition reconstructs the input and orders eigenvalues.
    #[test]
    fn sym_eigen_reconstructs(
        raw in prop::collection::vec(-10.0f64..10.0, 9..=9),
    ) {
        let m = symmetrize(&DMatrix::from_vec(3, 3, raw));
        let eig = SymEigen::new(&m);
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let rec = eig.apply(|x| x);
        prop_assert!((rec - &m).norm() <= 1e-12 * m.norm().max(1.0));
    }

    // Spectral square root squares back to the matrix on PSD inputs.
    #[test]
    fn spectral_sqrt_squares_back(
        raw in prop::collection::vec(-3.0f64..3.0, 16..=16),
    ) {
        let a = DMatrix::from_vec(4, 4, raw);
        let m = symmetrize(&(&a * a.transpose()));
        let root = SymEigen::new(&m).apply(|x| x.max(0.0).sqrt());
        prop_assert!((&root * &root - &m).norm() <= 1e-10 * m.norm().max(1.0));
    }

    // Level enumeration: starts at the vacuum, ascends, stays under the
    // cutoff, and is monotone in the cutoff.
    #[test]
    fn excitation_levels_invariants(
        mut eigs in prop::collection::vec(0.2f64..3.0, 1..4),
        zeta in 1.0f64..6.0,
    ) {
        eigs.sort_by(f64::total_cmp);
        let levels = excitation_levels(&eigs, zeta).unwrap();
        prop_assert_eq!(levels[0].value, 0.0);
        prop_assert!(levels[0].multiplicity >= 1);
        prop_assert!(levels.windows(2).all(|w| w[0].value < w[1].value));
        prop_assert!(levels.iter().all(|l| l.value <= zeta));
        let tighter = excitation_levels(&eigs, 0.5 * zeta).unwrap();
        let count = |ls: &[bogospec::operators::Level]| -> usize {
            ls.iter().map(|l| l.multiplicity).sum()
        };
        prop_assert!(count(&tighter) <= count(&levels));
    }

    // Config parsing: numeric overrides land in the right fields, and a
    // misspelled key never parses.
    #[test]
    fn config_overrides_apply(
        kappa in 0.1f64..50.0,
        zeta in 0.5f64..20.0,
        seed in any::<u64>(),
    ) {
        let text = format!(
            "[ebog]\nkappa = {kappa}\n[spectrum]\nzeta = {zeta}\n[output]\nseed = {seed}\n"
        );
        let cfg = RunConfig::from_str_with_base(&text, std::path::Path::new(".")).unwrap();
        prop_assert_eq!(cfg.kappa, kappa);
        prop_assert_eq!(cfg.zeta, zeta);
        prop_assert_eq!(cfg.seed, seed);
        let bad = format!("[ebog]\nkapa = {kappa}\n");
        prop_assert!(RunConfig::from_str_with_base(&bad, std::path::Path::new(".")).is_err());
    }
}
