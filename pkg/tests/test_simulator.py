import numpy as np
import pytest

from idestab.errors import GridMismatch
from idestab.fundamental import fundamental_derivative, fundamental_matrix
from idestab.grids import GridFunction
from idestab.kernel import affine_scalar_kernel
from idestab.simulator import (
    cauchy_check,
    constant_phi,
    fit_log_slope,
    fundamental_shift_phi,
    piecewise_constant_phi,
    positive_real_root,
    random_phi,
    seminorm,
    solve_ide,
    stability_oracle,
)

from oracles import scalar_real_root, scalar_trajectory_oracle


def test_zero_kernel_trajectory_is_zero(zero_case):
    kernel, _ = zero_case
    phi = constant_phi(kernel, [3.0], 1e-2)
    x = solve_ide(kernel, phi, 2.0, 1e-2)
    assert np.all(x.samples == 0.0)


def test_scalar_constant_phi_closed_form(stable_case):
    # ODE reduction: x' = 0.5 (x - 1) with x(0) = 0.5, so x = 1 - 0.5 e^{t/2}
    kernel, _ = stable_case
    phi = constant_phi(kernel, [1.0], 1e-3)
    x = solve_ide(kernel, phi, 1.0, 1e-3)
    ts = np.linspace(0.0, 1.0, 21)
    expected = 1.0 - 0.5 * np.exp(0.5 * ts)
    assert np.max(np.abs(x(ts)[:, 0, 0] - expected)) < 1e-7


def test_scalar_against_method_of_steps(stable_case):
    kernel, _ = stable_case
    phi = constant_phi(kernel, [1.0], 1e-3)
    x = solve_ide(kernel, phi, 3.0, 1e-3)
    oracle = scalar_trajectory_oracle(0.5, 1.0, lambda t: 1.0, 3.0)
    ts = np.linspace(0.0, 3.0, 61)
    assert np.max(np.abs(x(ts)[:, 0, 0] - oracle(ts))) < 1e-6


def test_fundamental_shift_initial_condition(stable_case, stable_k):
    # prehistory K(tau + theta) - K0 evolves as K(t + tau) - K(t)
    kernel, _ = stable_case
    phi = fundamental_shift_phi(stable_k, kernel, 1.0, 1e-3)
    x = solve_ide(kernel, phi, 3.0, 1e-3)
    ts = np.linspace(0.0, 3.0, 31)
    expected = stable_k(ts + 1.0)[:, 0, 0] - stable_k(ts)[:, 0, 0]
    assert np.max(np.abs(x(ts)[:, 0, 0] - expected)) < 1e-4


def test_superposition(stable_case):
    kernel, _ = stable_case
    step = 2e-3
    rng = np.random.default_rng(7)
    phi1 = random_phi(kernel, rng, step)
    phi2 = random_phi(kernel, rng, step)
    a, b = 0.7, -1.3
    combo = GridFunction(
        phi1.t0, phi1.t1, step, a * phi1.samples + b * phi2.samples
    )
    x1 = solve_ide(kernel, phi1, 2.0, step)
    x2 = solve_ide(kernel, phi2, 2.0, step)
    xc = solve_ide(kernel, combo, 2.0, step)
    assert np.max(np.abs(xc.samples - a * x1.samples - b * x2.samples)) < 1e-10


def test_phi_grid_validation(stable_case):
    kernel, _ = stable_case
    phi = constant_phi(kernel, [1.0], 2e-3)
    with pytest.raises(GridMismatch):
        solve_ide(kernel, phi, 1.0, 1e-3)


def test_seminorm_values(stable_case):
    kernel, _ = stable_case
    step = 1e-3
    zero = constant_phi(kernel, [0.0], step)
    assert seminorm(zero) == 0.0
    one = constant_phi(kernel, [1.0], step)
    assert seminorm(one) == pytest.approx(1.0, abs=1e-12)
    m = round(1.0 / step)
    theta = (-1.0 + step * np.arange(m + 1)).reshape(-1, 1, 1)
    ramp = GridFunction(-1.0, 0.0, step, theta)
    assert seminorm(ramp) == pytest.approx(1.0 / np.sqrt(3.0), abs=1e-5)


def test_cauchy_zero_kernel(zero_case):
    kernel, constants = zero_case
    k = fundamental_matrix(kernel, constants, 4.0, 1e-2)
    kp = fundamental_derivative(kernel, k)
    phi = constant_phi(kernel, [1.0], 1e-2)
    assert cauchy_check(kernel, k, kp, phi, [0.5, 1.5]) == 0.0


def test_cauchy_scalar(stable_case, stable_k, stable_kprime):
    kernel, _ = stable_case
    phi = constant_phi(kernel, [1.0], 1e-3)
    dev = cauchy_check(kernel, stable_k, stable_kprime, phi, [0.5, 1.5, 3.0])
    assert dev < 1e-3


def test_cauchy_benchmark_matrix_random_phi(ex2_stable_case):
    kernel, constants = ex2_stable_case
    k = fundamental_matrix(kernel, constants, 5.0, 1e-3)
    kp = fundamental_derivative(kernel, k)
    phi = random_phi(kernel, np.random.default_rng(3), 1e-3)
    dev = cauchy_check(kernel, k, kp, phi, [0.5, 1.5, 3.0])
    assert dev < 1e-2


def test_cauchy_refinement(stable_case):
    kernel, constants = stable_case
    devs = []
    for step in (8e-3, 2e-3):
        k = fundamental_matrix(kernel, constants, 4.0, step)
        kp = fundamental_derivative(kernel, k)
        phi = constant_phi(kernel, [1.0], step)
        devs.append(cauchy_check(kernel, k, kp, phi, [0.5, 1.5, 3.0]))
    assert devs[1] < devs[0] / 3.0  # at least first order under a 4x step change


def test_piecewise_phi_boundary_mean(stable_case):
    kernel, _ = stable_case
    vals = np.arange(8, dtype=float).reshape(8, 1)
    phi = piecewise_constant_phi(kernel, vals, 1.0 / 16)
    assert phi(-1.0)[0, 0] == 0.0
    assert phi(-0.5)[0, 0] == pytest.approx(3.5)  # boundary node: mean of 3, 4
    assert phi(-0.4375)[0, 0] == pytest.approx(4.0)


def test_positive_real_root_matches_brentq(unstable_case):
    kernel, _ = unstable_case
    root = positive_real_root(kernel, tol=1e-8)
    expected = scalar_real_root(1.5)
    assert root is not None and expected is not None
    assert abs(root - expected) < 1e-6


def test_no_real_root_for_stable(stable_case):
    kernel, _ = stable_case
    assert positive_real_root(kernel) is None


def test_oracle_verdicts_scalar_family():
    # positive real root exists iff c h > 1 (bisection oracle); trajectory
    # slopes confirm the labels on both sides
    for c in (-5.0, -1.0, 0.5, 0.9):
        kernel = affine_scalar_kernel(0.0, c)
        verdict = stability_oracle(kernel, trials=2, horizon=20.0, step=4e-3, seed=3)
        assert verdict.label == "stable", (c, verdict)
        assert scalar_real_root(c) is None
    for c in (1.1, 1.5, 3.0):
        kernel = affine_scalar_kernel(0.0, c)
        verdict = stability_oracle(kernel, trials=2, horizon=20.0, step=4e-3, seed=3)
        assert verdict.label == "unstable", (c, verdict)
        assert verdict.real_root == pytest.approx(scalar_real_root(c), abs=1e-5)


def test_oracle_zero_kernel(zero_case):
    kernel, _ = zero_case
    verdict = stability_oracle(kernel, trials=2, horizon=10.0, step=1e-2, seed=1)
    assert verdict.label == "stable"
    assert all(s == float("-inf") for s in verdict.slopes)


def test_fit_log_slope():
    ts = np.linspace(0.0, 5.0, 11)
    assert fit_log_slope(ts, np.exp(-0.8 * ts)) == pytest.approx(-0.8)
    assert fit_log_slope(ts, np.zeros_like(ts)) == float("-inf")


def test_random_phi_is_normalized_and_seeded(stable_case):
    kernel, _ = stable_case
    phi1 = random_phi(kernel, np.random.default_rng(42), 1e-2)
    phi2 = random_phi(kernel, np.random.default_rng(42), 1e-2)
    assert seminorm(phi1) == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(phi1.samples, phi2.samples)
