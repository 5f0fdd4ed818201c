import numpy as np
import pytest

from mimosim.power_allocation import mse_cost
from mimosim.precoding import (
    LinkBudget,
    SingularChannelError,
    mf_precoder,
    mmse_oracle,
    mmse_precoder,
    optimal_receiver_scale,
    zf_precoder,
)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def power_at_unit_n(P):
    return np.sum(np.abs(P) ** 2)


class TestMf:
    def test_identity_channel(self):
        prec = mf_precoder(np.eye(2, dtype=complex), LinkBudget(e_tx=2.0))
        assert np.allclose(prec.P, np.eye(2))
        assert prec.f == 1.0

    def test_power_binds(self):
        rng = np.random.default_rng(0)
        prec = mf_precoder(crandn(rng, 4, 16), LinkBudget(e_tx=7.0))
        assert power_at_unit_n(prec.P) == pytest.approx(7.0, abs=1e-9)

    def test_channel_scale_absorbed(self):
        rng = np.random.default_rng(1)
        H = crandn(rng, 4, 16)
        p1 = mf_precoder(H, LinkBudget(e_tx=4.0))
        p2 = mf_precoder(2.0 * H, LinkBudget(e_tx=4.0))
        assert np.allclose(p1.P, p2.P)


class TestZf:
    def test_identity_channel(self):
        prec = zf_precoder(np.eye(2, dtype=complex), LinkBudget(e_tx=2.0))
        assert np.allclose(prec.P, np.eye(2))
        assert prec.f == pytest.approx(1.0)

    def test_inverts_channel(self):
        rng = np.random.default_rng(2)
        H = crandn(rng, 4, 16)
        prec = zf_precoder(H, LinkBudget(e_tx=10.0))
        # f recovers the unscaled pseudo-inverse: f * H @ P = I
        assert np.max(np.abs(prec.f * (H @ prec.P) - np.eye(4))) < 1e-10

    def test_scalar_inverse(self):
        prec = zf_precoder(2.0 * np.eye(2, dtype=complex), LinkBudget(e_tx=2.0))
        assert np.allclose(prec.f * prec.P, 0.5 * np.eye(2))

    def test_power_binds(self):
        rng = np.random.default_rng(3)
        prec = zf_precoder(crandn(rng, 4, 16), LinkBudget(e_tx=3.0))
        assert power_at_unit_n(prec.P) == pytest.approx(3.0, abs=1e-9)

    def test_rank_deficient_raises(self):
        H = np.ones((3, 8), dtype=complex)   # identical rows
        with pytest.raises(SingularChannelError):
            zf_precoder(H, LinkBudget(e_tx=1.0))


class TestMmse:
    def test_scalar_closed_form(self):
        # H = I (K = 2), sigma_n^2 = 1, E_tx = 2: direction is I / (1 + tr(C_n)/E_tx)
        budget = LinkBudget(e_tx=2.0, sigma_n_sq=1.0)
        prec = mmse_precoder(np.eye(2, dtype=complex), np.ones(2), budget)
        # f * P recovers the unscaled direction
        assert np.allclose(prec.f * prec.P, 0.5 * np.eye(2), atol=1e-12)

    def test_power_binds(self):
        rng = np.random.default_rng(4)
        n = rng.uniform(0.5, 1.5, 4)
        prec = mmse_precoder(crandn(rng, 4, 16), n, LinkBudget(e_tx=9.0))
        assert np.sum(np.abs(prec.P * n[None, :]) ** 2) == pytest.approx(9.0, abs=1e-9)

    def test_cf_shape(self):
        rng = np.random.default_rng(5)
        prec = mmse_precoder(crandn(rng, 16, 64), np.ones(16), LinkBudget(e_tx=10.0))
        assert prec.P.shape == (64, 16)

    def test_nonpositive_allocation_rejected(self):
        with pytest.raises(ValueError):
            mmse_precoder(np.eye(2, dtype=complex), np.array([1.0, 0.0]), LinkBudget(e_tx=2.0))

    def test_vanishing_regularizer_matches_zf_direction(self):
        rng = np.random.default_rng(6)
        H = crandn(rng, 4, 16)
        e_tx = 1.0
        zf = zf_precoder(H, LinkBudget(e_tx=e_tx))
        mm = mmse_precoder(H, np.ones(4), LinkBudget(e_tx=e_tx, sigma_n_sq=1e-12 / 4))
        unit = lambda P: P / np.linalg.norm(P, axis=0, keepdims=True)
        assert np.max(np.abs(unit(mm.P) - unit(zf.P))) < 1e-5

    def test_stored_f_is_mse_optimal(self):
        rng = np.random.default_rng(7)
        H = crandn(rng, 3, 8)
        budget = LinkBudget(e_tx=5.0, sigma_n_sq=0.8)
        prec = mmse_precoder(H, np.ones(3), budget)
        assert prec.f == pytest.approx(optimal_receiver_scale(H, prec.P, np.ones(3), budget), rel=1e-10)

    def test_first_order_optimality(self):
        # no feasible perturbation of the closed form lowers the cost
        rng = np.random.default_rng(8)
        H = crandn(rng, 3, 5)
        budget = LinkBudget(e_tx=4.0, sigma_n_sq=1.0)
        n = np.ones(3)
        prec = mmse_precoder(H, n, budget)
        base = mse_cost(H, prec.P, n, prec.f, budget)
        for _ in range(100):
            D = crandn(rng, 5, 3)
            P2 = prec.P + 1e-3 * D / np.linalg.norm(D)
            P2 *= np.sqrt(budget.e_tx / np.sum(np.abs(P2) ** 2))
            assert mse_cost(H, P2, n, prec.f, budget) >= base - 1e-9


class TestOracle:
    def test_identity_channel_recovers_scaled_identity(self):
        budget = LinkBudget(e_tx=2.0, sigma_n_sq=1.0)
        orc = mmse_oracle(np.eye(2, dtype=complex), np.ones(2), budget,
                          rng=np.random.default_rng(0))
        assert np.max(np.abs(orc.P - np.eye(2))) < 2e-2
        closed = mmse_precoder(np.eye(2, dtype=complex), np.ones(2), budget)
        c_closed = mse_cost(np.eye(2, dtype=complex), closed.P, np.ones(2), closed.f, budget)
        c_oracle = mse_cost(np.eye(2, dtype=complex), orc.P, np.ones(2), orc.f, budget)
        assert abs(c_oracle - c_closed) < 1e-6

    def test_oracle_never_beats_closed_form(self):
        rng = np.random.default_rng(1)
        for i in range(5):
            H = crandn(rng, 2, 2)
            budget = LinkBudget(e_tx=2.0, sigma_n_sq=0.5)
            closed = mmse_precoder(H, np.ones(2), budget)
            orc = mmse_oracle(H, np.ones(2), budget, rng=np.random.default_rng(50 + i))
            c_closed = mse_cost(H, closed.P, np.ones(2), closed.f, budget)
            c_oracle = mse_cost(H, orc.P, np.ones(2), orc.f, budget)
            assert c_oracle >= c_closed - 1e-4

    def test_iteration_cap_reports_nonconvergence(self):
        from mimosim.precoding import OracleConvergenceError
        rng = np.random.default_rng(2)
        H = crandn(rng, 3, 3)
        with pytest.raises(OracleConvergenceError):
            mmse_oracle(H, np.ones(3), LinkBudget(e_tx=3.0), n_starts=1, max_iters=1,
                        tol=0.0, rng=np.random.default_rng(0))
