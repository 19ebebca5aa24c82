import numpy as np
import pytest

from idestab.fundamental import fundamental_derivative, fundamental_matrix
from idestab.kernel import affine_scalar_kernel, constant_kernel, derive_constants
from idestab.lyapunov import lyapunov_collocate, lyapunov_direct


def example2_matrix(b1: float, b2: float) -> np.ndarray:
    return np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-2.0, -b1, -1.0, -b2],
        ]
    )


@pytest.fixture(scope="session")
def zero_case():
    kernel = affine_scalar_kernel(0.0, 0.0)
    constants = derive_constants(kernel)
    return kernel, constants


@pytest.fixture(scope="session")
def stable_case():
    kernel = affine_scalar_kernel(0.0, 0.5)
    constants = derive_constants(kernel)
    return kernel, constants


@pytest.fixture(scope="session")
def unstable_case():
    kernel = affine_scalar_kernel(0.0, 1.5)
    constants = derive_constants(kernel)
    return kernel, constants


@pytest.fixture(scope="session")
def stable_k(stable_case):
    kernel, constants = stable_case
    return fundamental_matrix(kernel, constants, 22.0, 1e-3)


@pytest.fixture(scope="session")
def stable_kprime(stable_case, stable_k):
    kernel, _ = stable_case
    return fundamental_derivative(kernel, stable_k)


@pytest.fixture(scope="session")
def stable_table(stable_case):
    kernel, constants = stable_case
    return lyapunov_collocate(kernel, constants, 200)


@pytest.fixture(scope="session")
def stable_table_direct(stable_case, stable_k):
    kernel, constants = stable_case
    return lyapunov_direct(kernel, constants, stable_k, 200)


@pytest.fixture(scope="session")
def unstable_table(unstable_case):
    kernel, constants = unstable_case
    return lyapunov_collocate(kernel, constants, 240)


@pytest.fixture(scope="session")
def unstable_k(unstable_case):
    kernel, constants = unstable_case
    return fundamental_matrix(kernel, constants, 5.0, 1e-3)


@pytest.fixture(scope="session")
def ex2_stable_case():
    kernel = constant_kernel(example2_matrix(4.0, 4.0), 1.0)
    constants = derive_constants(kernel)
    return kernel, constants
