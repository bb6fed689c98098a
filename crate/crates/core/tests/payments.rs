use flexauction::mechanism::Mechanism;
use flexauction::model::{MarketStructure, ValuationModel};
use flexauction::AllocatorConfig;
use proptest::prelude::*;

type Case = (Vec<u64>, Vec<f64>, Vec<f64>, Vec<(f64, usize)>, bool);

fn case() -> impl Strategy<Value = Case> {
    (1usize..=3).prop_flat_map(|k| {
        (
            prop::collection::vec(0u64..=2, k),
            prop::collection::btree_set(1u32..=40, k),
            prop::collection::btree_set(5u32..=40, k),
            prop::collection::vec((0.0f64..1.0, 1usize..=k), 1..=6),
            any::<bool>(),
        )
            .prop_map(|(m, p, u, reports, exponential)| {
                let p: Vec<f64> = p.into_iter().rev().map(|x| x as f64 / 4.0).collect();
                let u: Vec<f64> = u.into_iter().rev().map(f64::from).collect();
                // scale onto the reported level's support
                let reports = reports
                    .into_iter()
                    .map(|(x, c)| (x * u[c - 1], c))
                    .collect();
                (m, p, u, reports, exponential)
            })
    })
}

fn model(u: &[f64], exponential: bool) -> ValuationModel {
    let k = u.len();
    if exponential {
        let rates: Vec<f64> = (0..k).map(|i| 0.1 + 0.2 * i as f64).collect();
        ValuationModel::truncated_exponential(&rates, u[0], vec![1.0 / k as f64; k]).unwrap()
    } else {
        ValuationModel::uniform(u, vec![1.0 / k as f64; k]).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn threshold_and_integral_payments_agree((m, p, u, reports, exponential) in case()) {
        let mk = MarketStructure::new(m, p).unwrap();
        let model = model(&u, exponential);
        let (r, c): (Vec<f64>, Vec<usize>) = reports.into_iter().unzip();
        // the exponential family shares one support, so rescale reports onto it
        let r: Vec<f64> = r.iter().zip(&c).map(|(x, &ci)| if exponential { x / u[ci - 1] * u[0] } else { *x }).collect();
        let mech = Mechanism::new(mk, vec![model; r.len()], AllocatorConfig::default()).unwrap();
        let (out, _) = mech.run_reports(&r, &c).unwrap();
        for l in 0..r.len() {
            let t = mech.integral_payment(&r, &c, l, 33).unwrap();
            prop_assert!((t - out.t[l]).abs() <= 1e-6, "consumer {}: integral {} threshold {}", l, t, out.t[l]);
            prop_assert!(out.t[l] >= 0.0);
            if out.xi[l] {
                prop_assert!(out.t[l] <= r[l] + 1e-12);
            } else {
                prop_assert_eq!(out.t[l], 0.0);
            }
        }
    }
}
