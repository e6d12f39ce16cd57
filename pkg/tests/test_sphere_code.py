import math

import numpy as np
import pytest

from lowrank_mdl.errors import DomainError, InvalidInputError
from lowrank_mdl.tools.sphere_code_tool import (
    cap_bin_mass,
    complement_basis,
    encode_spherical_matrix,
    matrix_spherical_codelength,
    orthocomplement_coordinates,
    sphere_density_codelength,
    quantize_coordinates,
    sphere_vector_codelength,
    spherical_cap_cdf,
)


def uniform_sphere(gen, count, m):
    x = gen.normal(size=(count, m))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


@pytest.mark.parametrize("m", [2, 3, 10, 50])
def test_cdf_symmetry_and_ends(m):
    assert spherical_cap_cdf(0.0, m) == pytest.approx(0.5, abs=1e-14)
    assert spherical_cap_cdf(-1.0, m) == 0.0
    assert spherical_cap_cdf(1.0, m) == 1.0
    assert spherical_cap_cdf(0.3, m) == pytest.approx(1.0 - spherical_cap_cdf(-0.3, m), abs=1e-14)


def test_cdf_closed_form_in_three_dimensions():
    assert spherical_cap_cdf(-0.5, 3) == pytest.approx(0.25, abs=1e-10)
    u = np.linspace(-1.0, 1.0, 21)
    np.testing.assert_allclose(spherical_cap_cdf(u, 3), (1.0 + u) / 2.0, atol=1e-10)


@pytest.mark.parametrize("m", [3, 10, 50])
def test_cdf_matches_sampled_first_coordinates(rng, m):
    first = np.concatenate([uniform_sphere(rng, 50000, m)[:, 0] for _ in range(4)])
    grid = np.linspace(-1.0, 1.0, 201)
    empirical = np.searchsorted(np.sort(first), grid, side="right") / first.size
    assert np.max(np.abs(empirical - spherical_cap_cdf(grid, m))) <= 0.01


def test_cdf_domain():
    with pytest.raises(DomainError):
        spherical_cap_cdf(1.5, 3)
    with pytest.raises(DomainError):
        spherical_cap_cdf(0.0, 1)


def test_bin_masses_partition_the_sphere():
    edges = np.linspace(-1.0, 1.0, 41)
    for m in (2, 5, 10, 200):
        assert cap_bin_mass(edges[:-1], edges[1:], m).sum() == pytest.approx(1.0, abs=1e-12)


def test_bin_mass_agrees_with_cdf_difference():
    lo = np.array([-0.9, -0.2, 0.1, 0.6])
    hi = np.array([-0.7, 0.3, 0.2, 0.95])
    expected = spherical_cap_cdf(hi, 7) - spherical_cap_cdf(lo, 7)
    np.testing.assert_allclose(cap_bin_mass(lo, hi, 7), expected, atol=1e-13)


def test_tail_bins_keep_relative_precision():
    mass = cap_bin_mass(0.9, 0.95, 200)
    assert 0.0 < mass < 1e-40
    assert math.isfinite(-math.log2(mass))


def test_fine_bins_approach_the_density():
    delta, u, m = 1e-4, 0.3, 10
    bits = -math.log2(cap_bin_mass(u - delta / 2, u + delta / 2, m))
    assert bits == pytest.approx(sphere_density_codelength(u, m) - math.log2(delta), abs=1e-3)


def test_one_dimensional_vector_costs_its_sign():
    assert sphere_vector_codelength([1.0], 0.3).bits == 1.0
    assert sphere_vector_codelength([-1.0], 1e-6).bits == 1.0


def test_axis_vector_uses_central_bins():
    delta = 0.1
    bits = sphere_vector_codelength([0.0, 0.0, 1.0], delta).bits
    # d = 3: mass (1 + u) / 2 over [-0.05, 0.05]; d = 2: (2 / pi) asin(0.05)
    expected = -math.log2(0.05) - math.log2(2.0 / math.pi * math.asin(0.05)) + 1.0
    assert bits == pytest.approx(expected, abs=1e-8)


def test_coarse_grid_never_fails(rng):
    u = uniform_sphere(rng, 1, 12)[0]
    bits = sphere_vector_codelength(u, 5.0).bits
    assert math.isfinite(bits) and bits >= 1.0


def test_non_unit_vector_is_rejected():
    with pytest.raises(InvalidInputError):
        sphere_vector_codelength([0.5, 0.5], 0.1)


def test_complement_of_first_axis():
    coords = orthocomplement_coordinates(np.array([[1.0], [0.0], [0.0]]), np.array([0.0, 1.0, 0.0]))
    np.testing.assert_allclose(coords, [1.0, 0.0], atol=1e-12)


def test_empty_complement_is_identity(rng):
    u = uniform_sphere(rng, 1, 5)[0]
    np.testing.assert_array_equal(orthocomplement_coordinates(np.zeros((5, 0)), u), u)


def test_complement_coordinates_have_unit_norm(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    coords = orthocomplement_coordinates(Q[:, :2], Q[:, 2])
    assert coords.size == 4
    assert np.linalg.norm(coords) == pytest.approx(1.0, abs=1e-8)


def test_complement_basis_is_orthonormal_and_signed(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(7, 3)))
    basis = complement_basis(Q)
    np.testing.assert_allclose(basis.T @ basis, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(Q.T @ basis, 0.0, atol=1e-12)
    idx = np.argmax(np.abs(basis), axis=0)
    assert np.all(basis[idx, np.arange(4)] > 0)


def test_non_orthogonal_vector_is_rejected():
    prev = np.array([[1.0], [0.0], [0.0]])
    with pytest.raises(InvalidInputError):
        orthocomplement_coordinates(prev, np.array([0.6, 0.8, 0.0]))


def test_matrix_code_sums_the_codes_of_decoded_complement_columns(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(9, 3)))
    delta = 1.0 / 3.0
    bits, decoded = encode_spherical_matrix(Q, delta)
    per_column = 0.0
    for i in range(3):
        c = orthocomplement_coordinates(decoded[:, :i], Q[:, i], project=True)
        per_column += sphere_vector_codelength(c, delta).bits
    assert bits.bits == pytest.approx(per_column, rel=1e-12)
    assert matrix_spherical_codelength(Q, delta).bits == bits.bits
    assert matrix_spherical_codelength(np.zeros((9, 0)), delta).bits == 0.0


@pytest.mark.parametrize("delta", [0.5, 0.1, 1e-3])
def test_decoded_columns_are_orthonormal_and_close(rng, delta):
    Q, _ = np.linalg.qr(rng.normal(size=(12, 4)))
    _, decoded = encode_spherical_matrix(Q, delta)
    np.testing.assert_allclose(decoded.T @ decoded, np.eye(4), atol=1e-10)
    if delta < 0.01:
        np.testing.assert_allclose(decoded, Q, atol=20 * delta)


def test_decoding_follows_only_the_transmitted_bins(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(8, 3)))
    delta = 0.2
    _, decoded = encode_spherical_matrix(Q, delta)
    # a decoder rebuilds column i from the decoded columns before it
    for i in range(3):
        basis = complement_basis(decoded[:, :i])
        c = orthocomplement_coordinates(decoded[:, :i], Q[:, i], project=True)
        np.testing.assert_allclose(decoded[:, i], basis @ quantize_coordinates(c, delta).decoded,
                                   atol=1e-12)


def test_bins_of_every_coordinate_partition_the_radius(rng):
    u = uniform_sphere(rng, 1, 10)[0]
    delta = 0.3
    code = quantize_coordinates(u, delta)
    for t, r in enumerate(code.radius):
        top = math.floor(r / delta + 0.5)
        q = np.arange(-top, top + 1)
        lo = np.clip((q * delta - delta / 2) / r, -1.0, 1.0)
        hi = np.clip((q * delta + delta / 2) / r, -1.0, 1.0)
        assert cap_bin_mass(lo, hi, code.dims[t]).sum() == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(code.decoded) == pytest.approx(1.0, abs=1e-12)


def test_coarse_grid_exhausts_the_radius():
    code = quantize_coordinates(np.array([0.8, 0.6, 0.0, 0.0]), 1.0)
    # 0.8 falls in the outer bin of the unit radius and takes all of it
    np.testing.assert_allclose(code.decoded, [1.0, 0.0, 0.0, 0.0], atol=1e-12)
    assert code.lo.size == 1


def test_projection_renormalizes_a_non_orthogonal_vector():
    prev = np.array([[1.0], [0.0], [0.0]])
    coords = orthocomplement_coordinates(prev, np.array([0.6, 0.8, 0.0]), project=True)
    np.testing.assert_allclose(coords, [1.0, 0.0], atol=1e-12)


def test_cap_code_is_calibrated_on_uniform_vectors(rng):
    d, delta = 10, math.sqrt(1.0 / 10)
    samples = uniform_sphere(rng, 10000, d)
    chosen, every = [], []
    for u in samples:
        code = quantize_coordinates(u, delta)
        chosen.append(np.column_stack([code.lo, code.hi, code.dims]))
        # all bins each coded coordinate could have fallen in
        for t, r in enumerate(code.radius):
            top = math.floor(r / delta + 0.5)
            q = np.arange(-top, top + 1)
            lo = np.clip((q * delta - delta / 2) / r, -1.0, 1.0)
            hi = np.clip((q * delta + delta / 2) / r, -1.0, 1.0)
            every.append(np.column_stack([lo, hi, np.full(q.size, code.dims[t])]))
    chosen, every = np.concatenate(chosen), np.concatenate(every)
    coded = -np.log2(cap_bin_mass(chosen[:, 0], chosen[:, 1], chosen[:, 2])).sum() + len(samples)
    p = cap_bin_mass(every[:, 0], every[:, 1], every[:, 2])
    p = p[p > 0]
    entropy = -np.sum(p * np.log2(p)) + len(samples)
    assert coded / len(samples) == pytest.approx(entropy / len(samples), rel=0.02)
    first = quantize_coordinates(samples[0], delta)
    expected = -np.log2(cap_bin_mass(first.lo, first.hi, first.dims)).sum() + 1.0
    assert sphere_vector_codelength(samples[0], delta).bits == pytest.approx(expected, rel=1e-12)
