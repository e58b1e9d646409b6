import math

import numpy as np
import pytest
import sympy as sp

PI = math.pi
BASIS = [(0.0, 0.0), (0.0, PI), (PI, 0.0), (PI, PI)]


def _sympy_oracle():
    """Symbolic transfer matrices, built independently of the package."""
    phi, psi = sp.symbols("phi psi", real=True)
    bs = sp.Matrix([[1, sp.I], [sp.I, 1]]) / sp.sqrt(2)

    def shifter(a):
        return sp.diag(1, sp.exp(sp.I * a))

    def mz(a):
        return bs * shifter(a) * bs

    src = sp.Matrix([1, 0])
    e34 = shifter(phi) * bs * src
    e56 = mz(phi) * src
    e78 = shifter(psi) * bs * e56
    e910 = mz(psi) * e56
    f = lambda expr: sp.lambdify((phi, psi), expr, "numpy")
    return {
        "bs": np.array(bs.evalf(), dtype=complex),
        "mz": f(mz(phi)),
        "bh": f(mz(psi) * mz(phi)),
        "e34": f(e34),
        "e56": f(e56),
        "e78": f(e78),
        "e910": f(e910),
    }


@pytest.fixture(scope="session")
def oracle():
    return _sympy_oracle()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
