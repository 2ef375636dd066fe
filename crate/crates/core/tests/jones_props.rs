use mzweak_core::jones::{
    expectation, hwp, nonhermitian_expectation_via_weak, polar_decompose, qwp, weak_value, weak_value_chain, JonesMatrix,
    JonesVector,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disc_sample(rng: &mut impl Rng) -> Complex64 {
    loop {
        let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if z.norm_sqr() <= 1.0 {
            return z;
        }
    }
}

fn random_matrix(rng: &mut impl Rng) -> JonesMatrix {
    JonesMatrix::new(disc_sample(rng), disc_sample(rng), disc_sample(rng), disc_sample(rng))
}

fn random_state(rng: &mut impl Rng) -> JonesVector {
    loop {
        let v = JonesVector::new(disc_sample(rng), disc_sample(rng));
        if let Some(n) = v.normalized() {
            if v.norm() > 1e-3 {
                return n;
            }
        }
    }
}

/// ⟨ψ|A|ψ⟩ written out component by component.
fn direct_expectation(a: &JonesMatrix, psi: &JonesVector) -> Complex64 {
    let m = a.m;
    let av = [m[0][0] * psi.h + m[0][1] * psi.v, m[1][0] * psi.h + m[1][1] * psi.v];
    psi.h.conj() * av[0] + psi.v.conj() * av[1]
}

fn frob(m: &JonesMatrix) -> f64 {
    m.m.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn polar_reconstruction_ten_thousand() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let a = random_matrix(&mut rng);
        let pd = polar_decompose(&a);
        let scale = frob(&a).max(1.0);
        assert!(frob(&(a - pd.u * pd.r)) <= 1e-10 * scale);
        let uu = pd.u.adjoint() * pd.u;
        assert!(frob(&(uu - JonesMatrix::identity())) <= 1e-10);
        // R is the PSD square root of A†A.
        assert!(frob(&(pd.r * pd.r - a.adjoint() * a)) <= 1e-10 * scale * scale);
        assert!(frob(&(pd.r - pd.r.adjoint())) <= 1e-10 * scale);
        let (l0, l1) = pd.r.hermitian_eigenvalues();
        assert!(l0.min(l1) >= -1e-10 * scale);
    }
}

#[test]
fn identity_chain_ten_thousand() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for _ in 0..10_000 {
        let a = random_matrix(&mut rng);
        let psi = random_state(&mut rng);
        let pd = polar_decompose(&a);
        if psi.inner(&pd.u.apply(&psi)).norm() <= 1e-6 {
            continue;
        }
        let chain = weak_value_chain(&a, &psi).unwrap();
        let direct = direct_expectation(&a, &psi);
        assert!((chain.z - direct).norm() <= 1e-10, "{} vs {}", chain.z, direct);
        assert!((chain.weak_value * chain.overlap - chain.z).norm() <= 1e-15);
        checked += 1;
    }
    assert!(checked > 9_900);
}

#[test]
fn lowering_operator_exact() {
    let pd = polar_decompose(&JonesMatrix::lowering());
    let close = |m: &JonesMatrix, t: &JonesMatrix| m.m.iter().flatten().zip(t.m.iter().flatten()).all(|(x, y)| (x - y).norm() <= 1e-12);
    assert!(close(&pd.u, &JonesMatrix::pauli_x()));
    assert!(close(&pd.r, &JonesMatrix::proj_h()));
    let z = nonhermitian_expectation_via_weak(&JonesMatrix::lowering(), &JonesVector::diagonal()).unwrap();
    assert!((z - 0.5).norm() < 1e-15);
}

fn arb_c() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(r, i)| Complex64::new(r, i))
}

fn arb_state() -> impl Strategy<Value = JonesVector> {
    (arb_c(), arb_c())
        .prop_filter("non-null", |(h, v)| h.norm_sqr() + v.norm_sqr() > 1e-4)
        .prop_map(|(h, v)| JonesVector::new(h, v).normalized().unwrap())
}

fn arb_matrix() -> impl Strategy<Value = JonesMatrix> {
    (arb_c(), arb_c(), arb_c(), arb_c()).prop_map(|(a, b, c, d)| JonesMatrix::new(a, b, c, d))
}

proptest! {
    #[test]
    fn weak_value_of_identity_is_one(psi in arb_state(), phi in arb_state()) {
        prop_assume!(phi.inner(&psi).norm() > 1e-6);
        let w = weak_value(&JonesMatrix::identity(), &psi, &phi).unwrap();
        prop_assert!((w - 1.0).norm() < 1e-12);
    }

    #[test]
    fn hwp_hermitian_unitary_and_pi_periodic(theta in -10.0f64..10.0) {
        let w = hwp(theta);
        prop_assert!(w.is_hermitian(1e-14));
        prop_assert!(w.is_unitary(1e-14));
        prop_assert!(w.approx_eq(&hwp(theta + std::f64::consts::PI), 1e-12));
        prop_assert!(qwp(theta).is_unitary(1e-14));
    }

    #[test]
    fn chain_matches_expectation(a in arb_matrix(), psi in arb_state()) {
        let pd = polar_decompose(&a);
        prop_assume!(psi.inner(&pd.u.apply(&psi)).norm() > 1e-6);
        let via = nonhermitian_expectation_via_weak(&a, &psi).unwrap();
        let direct = expectation(&a, &psi).unwrap();
        prop_assert!((via - direct).norm() <= 1e-10);
        prop_assert!((direct - direct_expectation(&a, &psi)).norm() <= 1e-15);
    }

    #[test]
    fn polar_factors_well_formed(a in arb_matrix()) {
        let pd = polar_decompose(&a);
        prop_assert!(pd.residual <= 1e-10 * frob(&a).max(1.0));
        prop_assert!(pd.u.is_unitary(1e-10));
        prop_assert!(pd.r.is_psd(1e-10));
    }
}

#[test]
fn projectors_complete() {
    assert_eq!(JonesMatrix::proj_h() + JonesMatrix::proj_v(), JonesMatrix::identity());
}
