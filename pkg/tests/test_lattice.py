import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from susylloyd.lattice import LatticeError, LatticeSpec, assemble, build_laplacian, free_spectrum

def safe_spec(d, L, bc):
    if bc == "periodic" and L < 3:
        bc = "restriction"
    return LatticeSpec(d, L, bc)


spec_strategy = st.builds(safe_spec, st.integers(1, 3), st.integers(1, 6), st.sampled_from(["restriction", "periodic"]))


def test_chain_restriction():
    H = build_laplacian(LatticeSpec(1, 3)).matrix
    assert np.array_equal(H, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])


def test_ring_spectrum():
    ev = np.linalg.eigvalsh(build_laplacian(LatticeSpec(1, 4, "periodic")).matrix)
    assert np.allclose(ev, [0, 2, 2, 4])


def test_square_2x2_restriction():
    spec = LatticeSpec(2, 2)
    H = build_laplacian(spec).matrix
    assert np.array_equal(np.diag(H), [2, 2, 2, 2])
    assert all(len(spec.neighbors(j)) == 2 for j in range(4))


def test_periodic_small_L_rejected():
    with pytest.raises(LatticeError):
        LatticeSpec(1, 2, "periodic")
    with pytest.raises(LatticeError):
        LatticeSpec(0, 3)
    with pytest.raises(LatticeError):
        LatticeSpec(1, 3, "dirichlet")
    with pytest.raises(LatticeError):
        LatticeSpec(3, 17)


def test_single_site():
    H = assemble(LatticeSpec(1, 1), 1.7, [2.0]).matrix
    assert np.array_equal(H, [[3.4]])


def test_assemble_example():
    H = assemble(LatticeSpec(1, 2), 2.0, [1.0, 0.0]).matrix
    assert np.array_equal(H, [[3, -1], [-1, 1]])


def test_lambda_zero_gives_laplacian():
    spec = LatticeSpec(2, 3)
    assert np.array_equal(assemble(spec, 0.0, np.arange(9.0)).matrix, build_laplacian(spec).matrix)


def test_nan_potential_rejected():
    with pytest.raises(LatticeError):
        assemble(LatticeSpec(1, 3), 1.0, [0.0, np.nan, 1.0])
    with pytest.raises(LatticeError):
        assemble(LatticeSpec(1, 3), 1.0, [0.0, 1.0])


def test_laplacian_read_only():
    H = build_laplacian(LatticeSpec(1, 3)).matrix
    with pytest.raises(ValueError):
        H[0, 0] = 5


@settings(max_examples=40, deadline=None)
@given(spec_strategy)
def test_spectrum_in_range_and_closed_form(spec):
    H = build_laplacian(spec).matrix
    assert np.array_equal(H, H.T)
    ev = np.linalg.eigvalsh(H)
    assert ev.min() > -1e-12 and ev.max() < 4 * spec.d + 1e-12
    assert np.allclose(ev, free_spectrum(spec), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(spec_strategy)
def test_neighbour_counts(spec):
    for j in range(spec.N):
        n = len(spec.neighbors(j))
        if spec.bc == "periodic":
            assert n == 2 * spec.d
        elif spec.L > 1:
            assert spec.d <= n <= 2 * spec.d
        assert build_laplacian(spec).matrix[j, j] == n


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 2), st.integers(3, 6))
def test_periodic_commutes_with_shift(d, L):
    spec = LatticeSpec(d, L, "periodic")
    H = build_laplacian(spec).matrix
    P = np.zeros((spec.N, spec.N))
    for j in range(spec.N):
        c = list(spec.coords(j))
        c[0] = (c[0] + 1) % L
        P[spec.index(c), j] = 1
    assert np.array_equal(P @ H, H @ P)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 3))
def test_assemble_linear(seed, lam):
    rng = np.random.default_rng(seed)
    spec = LatticeSpec(2, 3)
    V1, V2 = rng.standard_cauchy(9), rng.standard_cauchy(9)
    diff = assemble(spec, lam, V1 + V2).matrix - assemble(spec, lam, V1).matrix
    assert np.allclose(diff, lam * np.diag(V2), atol=1e-9 * (1 + np.abs(V1).max() + np.abs(V2).max()))


def test_distance_minimum_image():
    spec = LatticeSpec(1, 8, "periodic")
    assert spec.distance(0, 7) == 1 and spec.distance(0, 4) == 4
    assert LatticeSpec(1, 8).distance(0, 7) == 7
    D = LatticeSpec(2, 4, "periodic").distance_matrix()
    assert D.max() == 4 and np.array_equal(D, D.T)
