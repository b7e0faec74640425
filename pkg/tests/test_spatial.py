import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergolift.spatial import (SpatialInertia, SpatialVelocity, Wrench,
                              WrenchTransform, assemble_spatial_inertia,
                              check_physical_inertia, dual_cross,
                              dual_cross_matrix, ensure_rotation, exp_so3,
                              is_rotation, newton_euler_residual,
                              project_rotation, skew, triangle_inequality_defect,
                              wrench_transform)

finite_vec = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)


def random_rotation(rng):
    return ensure_rotation(exp_so3(rng.normal(size=3)))


class TestSkew:
    def test_canonical_cross(self):
        out = skew(np.array([1.0, 0, 0])) @ np.array([0.0, 1, 0])
        np.testing.assert_array_equal(out, [0.0, 0, 1])

    def test_zero(self):
        np.testing.assert_array_equal(skew(np.zeros(3)), np.zeros((3, 3)))

    def test_self_annihilation(self):
        v = np.array([0.3, -1.2, 2.0])
        np.testing.assert_allclose(skew(v) @ v, np.zeros(3), atol=1e-15)

    def test_exact_antisymmetry(self):
        v = np.array([0.1234567, -9.87, 3.3e-7])
        S = skew(v)
        assert np.array_equal(S, -S.T)

    @given(v=finite_vec, u=finite_vec)
    def test_matches_cross(self, v, u):
        np.testing.assert_allclose(skew(v) @ u, np.cross(v, u), atol=1e-12)


class TestWrenchTransform:
    def test_identity(self):
        w = Wrench(np.array([1.0, -2, 3]), np.array([0.5, 0, -1]))
        out = wrench_transform(WrenchTransform.identity(), w)
        np.testing.assert_array_equal(out.force, w.force)
        np.testing.assert_array_equal(out.torque, w.torque)

    def test_pure_translation_point_force(self):
        # oracle: a force f acting at the source origin, which sits at p in
        # the target frame, has moment p x f about the target origin
        p = np.array([0.0, 0, 1])
        f = np.array([1.0, 0, 0])
        X = WrenchTransform(np.eye(3), p)
        out = wrench_transform(X, Wrench(f, np.zeros(3)))
        np.testing.assert_allclose(out.force, f, atol=1e-15)
        np.testing.assert_allclose(out.torque, np.cross(p, f), atol=1e-15)
        np.testing.assert_allclose(out.torque, [0.0, 1.0, 0.0], atol=1e-15)

    def test_pure_rotation(self):
        Rz = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 1]])
        X = WrenchTransform(Rz, np.zeros(3))
        out = wrench_transform(X, Wrench(np.array([1.0, 0, 0]),
                                         np.array([0.0, 0, 2])))
        np.testing.assert_allclose(out.force, [0, 1, 0], atol=1e-15)
        np.testing.assert_allclose(out.torque, [0, 0, 2], atol=1e-15)

    def test_inverse_composes_to_identity(self, rng):
        for _ in range(20):
            X = WrenchTransform(random_rotation(rng), rng.normal(size=3))
            I = X.compose(X.inverse())
            assert np.abs(I.rotation - np.eye(3)).max() <= 1e-9
            assert np.abs(I.translation).max() <= 1e-9

    def test_composition_on_wrenches(self, rng):
        for _ in range(30):
            Xab = WrenchTransform(random_rotation(rng), rng.normal(size=3))
            Xbc = WrenchTransform(random_rotation(rng), rng.normal(size=3))
            w = Wrench(rng.normal(size=3), rng.normal(size=3))
            lhs = wrench_transform(Xab.compose(Xbc), w)
            rhs = wrench_transform(Xab, wrench_transform(Xbc, w))
            np.testing.assert_allclose(lhs.as_vector(), rhs.as_vector(),
                                       atol=1e-9)

    def test_matrix6_matches_apply(self, rng):
        X = WrenchTransform(random_rotation(rng), rng.normal(size=3))
        w = Wrench(rng.normal(size=3), rng.normal(size=3))
        np.testing.assert_allclose(X.matrix6() @ w.as_vector(),
                                   wrench_transform(X, w).as_vector(),
                                   atol=1e-12)


class TestDualCross:
    def test_zero_velocity(self):
        out = dual_cross(np.zeros(6), np.array([1.0, 2, 3, 4, 5, 6]))
        np.testing.assert_array_equal(out, np.zeros(6))

    def test_unit_spin(self):
        v = np.array([0.0, 0, 0, 0, 0, 1])
        out = dual_cross(v, np.array([1.0, 0, 0, 0, 0, 0]))
        np.testing.assert_allclose(out, [0, 1, 0, 0, 0, 0], atol=1e-15)

    def test_block_structure(self, rng):
        v = rng.normal(size=6)
        M = dual_cross_matrix(v)
        np.testing.assert_array_equal(M[:3, :3], skew(v[3:]))
        np.testing.assert_array_equal(M[:3, 3:], np.zeros((3, 3)))
        np.testing.assert_array_equal(M[3:, :3], skew(v[:3]))
        np.testing.assert_array_equal(M[3:, 3:], skew(v[3:]))

    def test_linearity(self, rng):
        for _ in range(10):
            v = rng.normal(size=6)
            w1, w2 = rng.normal(size=6), rng.normal(size=6)
            a, b = rng.normal(), rng.normal()
            np.testing.assert_allclose(
                dual_cross(v, a * w1 + b * w2),
                a * dual_cross(v, w1) + b * dual_cross(v, w2), atol=1e-12)


class TestSpatialInertia:
    def test_massless(self):
        M = assemble_spatial_inertia(0.0, np.zeros(3), np.zeros((3, 3)))
        np.testing.assert_array_equal(M, np.zeros((6, 6)))

    def test_centered_unit_body(self):
        M = assemble_spatial_inertia(1.0, np.zeros(3), np.eye(3))
        np.testing.assert_array_equal(M, np.eye(6))

    def test_offdiagonal_blocks(self):
        c = np.array([0.1, 0.0, 0.0])
        I = np.diag([0.2, 0.3, 0.4])
        M = assemble_spatial_inertia(2.0, c, I)
        np.testing.assert_array_equal(M[:3, 3:], -2.0 * skew(c))
        np.testing.assert_array_equal(M[3:, :3], 2.0 * skew(c))

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            assemble_spatial_inertia(-1.0, np.zeros(3), np.eye(3))
        with pytest.raises(ValueError):
            SpatialInertia(-1.0, np.zeros(3), np.eye(3))

    def test_symmetry(self, rng):
        for _ in range(10):
            c = rng.normal(size=3)
            A = rng.normal(size=(3, 3))
            I = A @ A.T
            M = assemble_spatial_inertia(rng.uniform(0.1, 5), c, I)
            assert np.abs(M - M.T).max() <= 1e-12

    def test_quadratic_form_nonnegative(self, rng):
        # physically consistent body: CoM inertia of a box, shifted
        for _ in range(20):
            m = rng.uniform(0.1, 10)
            dims = rng.uniform(0.05, 1.0, size=3)
            I_cm = m / 12.0 * np.diag([dims[1]**2 + dims[2]**2,
                                       dims[0]**2 + dims[2]**2,
                                       dims[0]**2 + dims[1]**2])
            c = rng.normal(size=3)
            Sc = skew(c)
            I_origin = I_cm - m * (Sc @ Sc)
            M = assemble_spatial_inertia(m, c, I_origin)
            v = rng.normal(size=6)
            assert v @ M @ v >= -1e-10

    def test_check_physical_inertia(self):
        check_physical_inertia(1.0, np.zeros(3), (2.0 / 5.0) * np.eye(3))
        # a rod-like inertia violating the triangle inequality
        with pytest.raises(ValueError):
            check_physical_inertia(1.0, np.zeros(3),
                                   np.diag([1.0, 0.1, 0.1]))

    def test_triangle_defect_sign(self):
        assert triangle_inequality_defect(np.eye(3)) < 0
        assert triangle_inequality_defect(np.diag([1.0, 0.2, 0.2])) > 0


class TestNewtonEuler:
    def test_static_support(self):
        Mi = SpatialInertia(2.0, np.array([0.05, 0.0, 0.02]),
                            np.diag([0.1, 0.12, 0.08]))
        R = exp_so3(np.array([0.3, -0.2, 0.5]))
        gravity = np.array([0.0, 0, -9.81])
        g_body = R.T @ gravity
        f = Wrench.from_vector(
            Mi.matrix() @ (-np.concatenate([g_body, np.zeros(3)])))
        r = newton_euler_residual(Mi, SpatialVelocity.zero(), np.zeros(6),
                                  gravity, R, f)
        np.testing.assert_allclose(r, np.zeros(6), atol=1e-12)

    def test_free_fall(self):
        Mi = SpatialInertia(3.0, np.array([0.0, 0.1, 0.0]),
                            np.diag([0.2, 0.2, 0.1]))
        R = exp_so3(np.array([0.0, 0.4, 0.1]))
        gravity = np.array([0.0, 0, -9.81])
        a = np.concatenate([R.T @ gravity, np.zeros(3)])
        r = newton_euler_residual(Mi, SpatialVelocity.zero(), a, gravity, R,
                                  Wrench(np.zeros(3), np.zeros(3)))
        np.testing.assert_allclose(r, np.zeros(6), atol=1e-12)

    def test_spinning_top_hand_computation(self):
        # m = 1 kg, c = [0.05, 0, 0], w = [0, 0, 10] rad/s, a = 0, f = 0
        m, c = 1.0, np.array([0.05, 0.0, 0.0])
        I = np.diag([0.01, 0.012, 0.014])
        Mi = SpatialInertia(m, c, I)
        w = np.array([0.0, 0, 10])
        v = SpatialVelocity(np.zeros(3), w)
        gravity = np.array([0.0, 0, -9.81])
        r = newton_euler_residual(Mi, v, np.zeros(6), gravity, np.eye(3),
                                  Wrench(np.zeros(3), np.zeros(3)))
        # hand blocks: Mv = [m v - m c x w ; m c x v + I w]
        lin_mom = -m * np.cross(c, w)
        ang_mom = I @ w
        gyro = np.concatenate([np.cross(w, lin_mom), np.cross(w, ang_mom)])
        grav_term = np.concatenate([-m * gravity,
                                    -m * np.cross(c, gravity)])
        np.testing.assert_allclose(r, grav_term + gyro, atol=1e-12)
        np.testing.assert_allclose(
            r, [-5.0, 0.0, 9.81, 0.0, -0.4905, 0.0], atol=1e-12)

    def test_linearity_in_accel_and_wrench(self, rng):
        Mi = SpatialInertia(2.0, rng.normal(size=3) * 0.1,
                            np.diag(rng.uniform(0.05, 0.2, size=3)))
        R = exp_so3(rng.normal(size=3))
        gravity = np.array([0.0, 0, -9.81])
        v = SpatialVelocity(rng.normal(size=3), rng.normal(size=3))

        def res(a, f):
            return newton_euler_residual(Mi, v, a, gravity, R,
                                         Wrench.from_vector(f))

        a1, a2 = rng.normal(size=6), rng.normal(size=6)
        f1, f2 = rng.normal(size=6), rng.normal(size=6)
        base = res(np.zeros(6), np.zeros(6))
        lhs = res(2.0 * a1 + a2, 3.0 * f1 - f2)
        rhs = (2.0 * (res(a1, np.zeros(6)) - base) + (res(a2, np.zeros(6)) - base)
               + 3.0 * (res(np.zeros(6), f1) - base) - (res(np.zeros(6), f2) - base)
               + base)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)


class TestRotationRepair:
    def test_project_restores_orthonormality(self, rng):
        R = random_rotation(rng)
        drifted = R + 1e-6 * rng.normal(size=(3, 3))
        repaired = project_rotation(drifted)
        assert is_rotation(repaired, 1e-12)
        assert np.abs(repaired - R).max() < 1e-5

    def test_ensure_rotation_passthrough(self, rng):
        R = random_rotation(rng)
        assert ensure_rotation(R) is not None
        np.testing.assert_allclose(ensure_rotation(R), R, atol=1e-12)
