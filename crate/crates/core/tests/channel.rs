use flatbill::jacobi::{launch_for_trap, ode_to_turn, step, step_leading, ChannelModel, ChannelState, Outcome};
use proptest::prelude::*;

fn model(m: u64) -> ChannelModel<f64> {
    ChannelModel::new(4.0, 0.25, m, 1.0, 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trap_orbits_descend_then_climb(r0 in 1e-3..0.1f64, k in 4usize..150, m in 2u64..40) {
        let md = model(m);
        let tr = launch_for_trap(&md, r0, k).unwrap();
        prop_assert_eq!(tr.outcome, Outcome::Returned);
        prop_assert!(tr.trap_length() >= k);
        let kp = tr.k_prime.unwrap();
        let s = &tr.states;
        for j in 0..s.len() - 1 {
            prop_assert!(s[j + 1].v < s[j].v, "angle rose at {j}");
            if j < kp {
                prop_assert!(s[j + 1].r < s[j].r, "offset rose before the turn at {j}");
            } else {
                prop_assert!(s[j + 1].r >= s[j].r, "offset fell after the turn at {j}");
            }
        }
    }

    #[test]
    fn exact_step_lags_the_leading_form(r in 1e-4..0.2f64, u in 1e-6..1.0f64, m in 1u64..30) {
        let md = model(m);
        let s = ChannelState { j: 0, r, v: u * r / md.coeff, m };
        let exact = step(&md, &s).unwrap();
        prop_assume!(exact.r > 0.0);
        let lead = step_leading(&md, &s);
        prop_assert!(lead.r - exact.r >= 0.0, "R_r = {}", lead.r - exact.r);
        prop_assert!(exact.v - lead.v >= 0.0, "R_v = {}", exact.v - lead.v);
    }

    #[test]
    fn continuous_flow_keeps_its_invariant(r0 in 1e-3..0.1f64, frac in 0.3..0.995f64, m in 2u64..30) {
        let md = model(m);
        let v0 = frac * md.separatrix(r0);
        let o = ode_to_turn(&md, r0, v0, 1e6, 1e-11).unwrap();
        prop_assert!(o.h_drift < 1e-8, "drift {}", o.h_drift);
        prop_assert!(o.r.iter().all(|&r| r > 0.0));
    }
}
