use fk_hetero::energy::sum_w;
use fk_hetero::lattice::{compare, lattice_max_min, Relation};
use fk_hetero::{make_fk_potential, ClampRefs, Configuration, Domain, LocalPotential, PotentialSpec, Ratio};
use proptest::prelude::*;

fn sg(n: usize, coupling: f64) -> LocalPotential {
    make_fk_potential(&PotentialSpec::sine_gordon(n, coupling)).unwrap()
}

fn periodic_2d() -> impl Strategy<Value = Configuration> {
    (1i64..4, 1i64..4).prop_flat_map(|(a, b)| {
        prop::collection::vec(-2.0f64..2.0, (a * b) as usize)
            .prop_map(move |v| Configuration::periodic(Domain::periodic(&[a, b]).unwrap(), v).unwrap())
    })
}

fn kink_window(values: Vec<f64>) -> Configuration {
    let h = (values.len() as i64 - 1) / 2;
    let domain = Domain::hetero(1, h, &[]).unwrap();
    let refs = ClampRefs::between(&Configuration::constant(1, 0.0), &Configuration::constant(1, 1.0));
    Configuration::clamped(domain, values, refs).unwrap()
}

proptest! {
    #[test]
    fn periodic_lookup_is_total(u in periodic_2d(), i in -20i64..20, j in -20i64..20) {
        let ranges = u.domain().ranges();
        let (a, b) = (ranges[0].1 + 1, ranges[1].1 + 1);
        prop_assert_eq!(u.lookup(&[i, j]), u.lookup(&[i + a, j - b]));
    }

    #[test]
    fn lifted_lookup_adds_rotation(v in prop::collection::vec(0.0f64..1.0, 3), i in -30i64..30) {
        let alpha = [Ratio::new(1, 3).unwrap()];
        let domain = Domain::new(Domain::periodic(&[3]).unwrap().axes().to_vec(), Some(alpha.to_vec())).unwrap();
        let u = Configuration::periodic(domain, v).unwrap();
        prop_assert!((u.lookup(&[i + 3]) - u.lookup(&[i]) - 1.0).abs() < 1e-12);
        prop_assert_eq!(u.raw(&[i + 3]), u.raw(&[i]));
    }

    #[test]
    fn shifts_compose(u in periodic_2d(), s in -5i64..5, t in -5i64..5, axis in 0usize..2) {
        let once = u.shift(s + t, axis);
        let twice = u.shift(s, axis).shift(t, axis);
        for i in -4..4 {
            for j in -4..4 {
                prop_assert_eq!(once.lookup(&[i, j]), twice.lookup(&[i, j]));
            }
        }
    }

    #[test]
    fn clamped_shift_reads_forward(v in prop::collection::vec(0.0f64..1.0, 11), s in -15i64..15, i in -30i64..30) {
        let u = kink_window(v);
        prop_assert_eq!(u.shift(s, 0).lookup(&[i]), u.lookup(&[i + s]));
    }

    #[test]
    fn compare_is_antisymmetric(u in periodic_2d(), noise in prop::collection::vec(-1.0f64..1.0, 9)) {
        let values: Vec<f64> = u.values().iter().zip(&noise).map(|(a, b)| a + b).collect();
        let v = u.with_values(values).unwrap();
        let forward = compare(&u, &v, None).unwrap().relation;
        let backward = compare(&v, &u, None).unwrap().relation;
        let flipped = match forward {
            Relation::Less => Relation::Greater,
            Relation::Greater => Relation::Less,
            r => r,
        };
        prop_assert_eq!(backward, flipped);
    }

    #[test]
    fn max_min_bracket_and_sum(u in periodic_2d(), noise in prop::collection::vec(-1.0f64..1.0, 9)) {
        let values: Vec<f64> = u.values().iter().zip(&noise).map(|(a, b)| a + b).collect();
        let v = u.with_values(values).unwrap();
        let (hi, lo) = lattice_max_min(&u, &v).unwrap();
        prop_assert_ne!(compare(&hi, &u, None).unwrap().relation, Relation::Less);
        prop_assert_ne!(compare(&lo, &v, None).unwrap().relation, Relation::Greater);
        for k in 0..u.values().len() {
            prop_assert_eq!(hi.values()[k] + lo.values()[k], u.values()[k] + v.values()[k]);
        }
    }

    #[test]
    fn max_min_lowers_energy(u in periodic_2d(), noise in prop::collection::vec(-1.0f64..1.0, 9), coupling in 0.1f64..4.0) {
        let p = sg(2, coupling);
        let values: Vec<f64> = u.values().iter().zip(&noise).map(|(a, b)| a + b).collect();
        let v = u.with_values(values).unwrap();
        let (hi, lo) = lattice_max_min(&u, &v).unwrap();
        let cell = u.domain().sites();
        let excess = sum_w(&p, &hi, &cell) + sum_w(&p, &lo, &cell) - sum_w(&p, &u, &cell) - sum_w(&p, &v, &cell);
        prop_assert!(excess <= 1e-12, "excess {}", excess);
    }

    #[test]
    fn energy_is_invariant_under_integer_translation(u in periodic_2d(), k in -3i32..3) {
        let p = sg(2, 1.0);
        let cell = u.domain().sites();
        let moved = u.with_values(u.values().iter().map(|x| x + k as f64).collect()).unwrap();
        prop_assert!((sum_w(&p, &moved, &cell) - sum_w(&p, &u, &cell)).abs() < 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences(w in prop::collection::vec(-2.0f64..2.0, 5), coupling in 0.1f64..4.0) {
        let p = sg(2, coupling);
        let g = p.grad(&w).unwrap();
        let h = 1e-6;
        for k in 0..w.len() {
            let mut a = w.clone();
            let mut b = w.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (p.eval(&a).unwrap() - p.eval(&b).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() < 1e-6, "slot {}: {} vs {}", k, fd, g[k]);
        }
    }
}
