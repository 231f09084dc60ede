use helium_gl::snapshot;
use helium_gl_core::{FieldState, Grid, UniformInit};
use proptest::prelude::*;

fn any_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => -1e3..1e3f64,
        1 => any::<f64>().prop_filter("finite", |v| v.is_finite()),
        1 => Just(-0.0),
        1 => Just(f64::MIN_POSITIVE / 8.0),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_read_is_bit_exact(
        two_d in any::<bool>(),
        nx in 4usize..9,
        ny in 4usize..8,
        hx in 1e-3..10.0f64,
        values in proptest::collection::vec(any_value(), 11 * 8 * 7),
    ) {
        let grid = if two_d { Grid::new_2d(nx, ny, hx, hx * 0.7).unwrap() } else { Grid::new_1d(nx, hx).unwrap() };
        let mut st = FieldState::uniform(&grid, &UniformInit::default());
        for (n, (_, _, k)) in grid.interior_cells().enumerate() {
            let v = &values[11 * n..11 * n + 11];
            st.phi[k] = v[0];
            st.v_s.set(k, [v[1], v[2], v[3]]);
            st.phi_s[k] = v[4];
            st.v_n.set(k, [v[5], v[6], v[7]]);
            st.p[k] = v[8];
            st.rho[k] = v[9];
            st.theta[k] = v[10];
        }
        // Only states that satisfy the wall rules are stored.
        st.apply_bcs(&grid, 0.0);
        let (g2, back) = snapshot::parse(&snapshot::to_string(&grid, &st)).unwrap();
        prop_assert_eq!(&g2, &grid);
        for (_, _, k) in grid.interior_cells() {
            let a = [st.phi[k], st.phi_s[k], st.p[k], st.rho[k], st.theta[k]];
            let b = [back.phi[k], back.phi_s[k], back.p[k], back.rho[k], back.theta[k]];
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in st.v_s.at(k).iter().chain(&st.v_n.at(k)).zip(back.v_s.at(k).iter().chain(&back.v_n.at(k))) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
