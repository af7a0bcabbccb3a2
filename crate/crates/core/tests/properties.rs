use std::f64::consts::PI;

use proptest::prelude::*;

use dynphasor::devices::network::{branch_derivative, node_derivative};
use dynphasor::phasor::{
    abc_to_pnz, dq0_to_pnz, dq_to_pnz, pnz_to_abc, pnz_to_dq, pnz_to_dq0, DpSet, Frame, FrameAngle, SeqTriple, C64,
};

const WS: f64 = 2.0 * PI * 60.0;

fn cplx() -> impl Strategy<Value = C64> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm())
}

proptest! {
    #[test]
    fn abc_pnz_round_trip(a in cplx(), b in cplx(), c in cplx()) {
        let back = pnz_to_abc(abc_to_pnz([a, b, c]));
        for (x, y) in back.iter().zip([a, b, c]) {
            prop_assert!(close(*x, y, 1e-14));
        }
    }

    #[test]
    fn dq0_pnz_round_trip(d in cplx(), q in cplx(), z in cplx()) {
        let (p, n, zz) = dq0_to_pnz(d, q, z);
        let (d2, q2, z2) = pnz_to_dq0(p, n, zz);
        prop_assert!(close(d2, d, 1e-14) && close(q2, q, 1e-14) && close(z2, z, 1e-14));
    }

    #[test]
    fn dq_pnz_round_trip(p in cplx(), n in cplx(), delta in -20.0..20.0f64) {
        let (d, q) = pnz_to_dq(p, n, FrameAngle(delta));
        let (p2, n2) = dq_to_pnz(d, q, FrameAngle(delta));
        prop_assert!(close(p2, p, 1e-14) && close(n2, n, 1e-14));
    }

    #[test]
    fn sequence_scaling_is_linear(p in cplx(), n in cplx(), z in cplx(), s in cplx()) {
        let t = SeqTriple::new(p, n, z);
        let lhs = abc_to_pnz(pnz_to_abc(t.scale(s)));
        prop_assert!(close(lhs.p, p * s, 1e-13) && close(lhs.n, n * s, 1e-13) && close(lhs.z, z * s, 1e-13));
    }

    #[test]
    fn derivatives_respect_conjugate_symmetry(
        v in cplx(), i in cplx(), k in 0i32..4, r in 0.0..0.1f64, x in 0.01..1.0f64,
    ) {
        let a = branch_derivative(k, v, i, r, x, WS);
        let b = branch_derivative(-k, v.conj(), i.conj(), r, x, WS);
        prop_assert!(close(a.conj(), b, 1e-13));
        let a = node_derivative(k, i, v, x, WS);
        let b = node_derivative(-k, i.conj(), v.conj(), x, WS);
        prop_assert!(close(a.conj(), b, 1e-13));
    }

    #[test]
    fn reconstruction_is_direct_fourier_sum(
        x0 in -2.0..2.0f64, x1 in cplx(), x2 in cplx(), t in 0.0..0.1f64,
    ) {
        let mut dp = DpSet::new(Frame::AbcPhase, WS);
        dp.set(0, C64::new(x0, 0.0));
        dp.set(1, x1);
        dp.set(2, x2);
        let mut direct = C64::new(x0, 0.0);
        for (k, xk) in [(1.0, x1), (2.0, x2)] {
            let e = C64::from_polar(1.0, k * WS * t);
            direct += xk * e + xk.conj() * e.conj();
        }
        prop_assert!((dp.reconstruct(t) - direct.re).abs() < 1e-12 * (1.0 + direct.norm()));
        prop_assert!(direct.im.abs() < 1e-12 * (1.0 + direct.norm()));
    }
}
