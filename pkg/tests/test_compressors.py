"""Compressor mechanics: rounding, field contracts, certificates, bits."""

from __future__ import annotations

from math import comb

import numpy as np
import pytest

import smoothquant as sq
from smoothquant.errors import (
    BlockSizesMismatch,
    DimensionMismatch,
    InvalidProbability,
    OutOfRange,
    UnknownKind,
)
from conftest import random_psd_singular, random_spd


def test_stochastic_round_fixes_lattice_points():
    rng = np.random.default_rng(0)
    for k in range(6):
        for _ in range(10):
            assert sq.stochastic_round(k * 0.25, 0.25, rng) == k * 0.25


def test_stochastic_round_two_point_support():
    rng = np.random.default_rng(1)
    seen = sorted({sq.stochastic_round(0.3, 0.2, rng) for _ in range(200)})
    np.testing.assert_allclose(seen, [0.2, 0.4], rtol=1e-12)


def test_stochastic_round_unbiased():
    """Mean of 2e5 draws of round(0.37, 0.2) within 4 sigma of 0.37."""
    rng = np.random.default_rng(2)
    draws = 200_000
    total = sum(sq.stochastic_round(0.37, 0.2, rng) for _ in range(draws))
    # one-draw variance h^2 p (1-p) with p = 0.85
    sigma_mean = 0.2 * np.sqrt(0.85 * 0.15 / draws)
    assert abs(total / draws - 0.37) <= 4 * sigma_mean


def test_stochastic_round_rejects_bad_input():
    rng = np.random.default_rng(3)
    with pytest.raises(OutOfRange):
        sq.stochastic_round(1.0, 0.0, rng)
    with pytest.raises(OutOfRange):
        sq.stochastic_round(-0.1, 0.5, rng)


def test_quantized_vector_field_contracts():
    """Signs vanish exactly on zero levels; magnitudes are float32 values."""
    rng = np.random.default_rng(4)
    for _ in range(50):
        dim = int(rng.integers(1, 20))
        x = rng.standard_normal(dim) * rng.choice([0.0, 1.0], size=dim)
        q = sq.quantize_standard(x, 4, rng)
        np.testing.assert_array_equal(q.signs == 0, q.levels == 0)
        assert np.all((q.signs == 0) | (q.signs == np.sign(x).astype(np.int8)))
        for mag in q.magnitudes:
            assert float(np.float32(mag)) == mag
        # reconstruction lands on the lattice of the rounded magnitude
        rec = q.reconstruct()
        assert np.all(np.abs(rec) <= q.magnitudes[0] * q.levels.astype(float) * 0.25 + 1e-15)


def test_zero_vector_consumes_no_randomness():
    """An all-zero input is deterministic and must not advance the stream."""
    rng_a = np.random.default_rng(5)
    q = sq.quantize_standard(np.zeros(7), 3, rng_a)
    assert q.reconstruct() == pytest.approx(np.zeros(7))
    rng_b = np.random.default_rng(5)
    assert rng_a.random() == rng_b.random()


def test_standard_equals_varying_with_uniform_steps():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(9)
    q_std = sq.quantize_standard(x, 5, np.random.default_rng(42))
    q_var = sq.quantize_varying(x, np.full(9, 0.2), np.random.default_rng(42))
    np.testing.assert_array_equal(q_std.levels, q_var.levels)
    np.testing.assert_array_equal(q_std.signs, q_var.signs)
    np.testing.assert_array_equal(q_std.magnitudes, q_var.magnitudes)
    np.testing.assert_allclose(q_std.reconstruct(), q_var.reconstruct(), rtol=0)


def test_block_quantize_layout():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(6)
    q = sq.quantize_block(x, [2, 4], np.array([0.5, 0.25]), rng)
    np.testing.assert_array_equal(q.block_starts, [0, 2])
    np.testing.assert_allclose(q.steps, [0.5, 0.5, 0.25, 0.25, 0.25, 0.25])
    assert q.magnitudes[0] == pytest.approx(np.linalg.norm(x[:2]), rel=1e-6)
    assert q.magnitudes[1] == pytest.approx(np.linalg.norm(x[2:]), rel=1e-6)


def test_quantize_validation():
    rng = np.random.default_rng(8)
    x = np.ones(4)
    with pytest.raises(OutOfRange):
        sq.quantize_standard(x, 0, rng)
    with pytest.raises(OutOfRange):
        sq.quantize_standard(x, 1.5, rng)
    with pytest.raises(DimensionMismatch):
        sq.quantize_varying(x, np.ones(3), rng)
    with pytest.raises(OutOfRange):
        sq.quantize_varying(x, np.array([1.0, -1.0, 1.0, 1.0]), rng)
    with pytest.raises(BlockSizesMismatch):
        sq.quantize_block(x, [2, 3], np.ones(2), rng)
    with pytest.raises(BlockSizesMismatch):
        sq.quantize_block(x, [2, 2], np.ones(3), rng)


def test_certificate_standard_frozen():
    """d=4, s=2: omega = min(4/4, 2/2) = 1."""
    cert = sq.certify(sq.StandardQuantizer(2), sq.identity_factor(4))
    assert cert.omega_bound == pytest.approx(1.0)
    assert cert.calL_bound == pytest.approx(1.0)


def test_certificate_varying_frozen():
    """Unit steps on diag(1,4): calL = min(5, sqrt(17)), omega = sqrt(2)."""
    factor = sq.build_factor(np.diag([1.0, 4.0]))
    cert = sq.certify(sq.VaryingStepQuantizer(np.ones(2)), factor)
    assert cert.omega_bound == pytest.approx(np.sqrt(2.0), rel=1e-12)
    assert cert.calL_bound == pytest.approx(np.sqrt(17.0), rel=1e-12)


def test_certificate_block_frozen():
    """Worst block of the min-pair: sizes (2,2), steps (0.5,1) on diag(1..4)."""
    factor = sq.build_factor(np.diag([1.0, 2.0, 3.0, 4.0]))
    cert = sq.certify(sq.BlockQuantizer([2, 2], np.array([0.5, 1.0])), factor)
    assert cert.omega_bound == pytest.approx(np.sqrt(2.0), rel=1e-12)
    assert cert.calL_bound == pytest.approx(5.0, rel=1e-12)


def test_certificate_rand_tau_frozen():
    """max (1-p)/p L_jj: probs (1/2, 4/5) on diag(1,4) gives max(1, 1) = 1."""
    factor = sq.build_factor(np.diag([1.0, 4.0]))
    cert = sq.certify(sq.RandTauSparsifier(np.array([0.5, 0.8])), factor)
    assert cert.omega_bound == pytest.approx(1.0, rel=1e-12)
    assert cert.calL_bound == pytest.approx(1.0, rel=1e-12)


def test_certificate_identity_is_zero():
    cert = sq.certify(sq.IdentityCompressor(), sq.identity_factor(5, 3.0))
    assert cert.omega_bound == 0.0
    assert cert.calL_bound == 0.0


def test_certificate_never_exceeds_omega_cap():
    rng = np.random.default_rng(9)
    for _ in range(30):
        dim = int(rng.integers(2, 10))
        factor = sq.build_factor(random_spd(rng, dim))
        comps = [
            sq.StandardQuantizer(int(rng.integers(1, 6))),
            sq.VaryingStepQuantizer(rng.uniform(0.1, 2.0, size=dim)),
            sq.RandTauSparsifier(rng.uniform(0.2, 1.0, size=dim)),
        ]
        for comp in comps:
            cert = sq.certify(comp, factor)
            assert cert.calL_bound <= cert.omega_bound * factor.lambda_max * (1 + 1e-12)


def test_certify_rejects_noncompressor():
    with pytest.raises(UnknownKind):
        sq.certify(object(), sq.identity_factor(2))


def test_certificate_dimension_mismatch():
    factor = sq.identity_factor(3)
    with pytest.raises(DimensionMismatch):
        sq.certify(sq.VaryingStepQuantizer(np.ones(2)), factor)
    with pytest.raises(DimensionMismatch):
        sq.certify(sq.RandTauSparsifier(np.full(2, 0.5)), factor)


def test_rand_tau_probability_validation():
    with pytest.raises(InvalidProbability):
        sq.RandTauSparsifier(np.array([0.5, 0.0]))
    with pytest.raises(InvalidProbability):
        sq.RandTauSparsifier(np.array([0.5, 1.2]))


def test_rand_tau_small_dim_moments():
    """d=2: empirical mean is x, weighted error matches (1-p)/p L x^2."""
    rng = np.random.default_rng(10)
    probs = np.array([0.4, 0.9])
    comp = sq.RandTauSparsifier(probs)
    x = np.array([1.5, -2.0])
    diag = np.array([2.0, 3.0])
    draws = comp.sample(x, 400_000, rng)
    np.testing.assert_allclose(draws.mean(axis=0), x, atol=0.02)
    emp = np.mean(np.sum(diag * (draws - x) ** 2, axis=1))
    expected = float(np.sum((1 - probs) / probs * diag * x**2))
    assert emp == pytest.approx(expected, rel=0.02)
    # outputs are exactly x_j / p_j or zero
    support = np.unique(draws[:, 0])
    np.testing.assert_allclose(support, [0.0, 1.5 / 0.4], rtol=1e-12, atol=0)


def test_optimal_sampling_probs_frozen():
    """diag (1,4), tau=1: equalizer c=2 gives p = (1/3, 2/3)."""
    probs = sq.optimal_sampling_probs(np.array([1.0, 4.0]), 1.0)
    np.testing.assert_allclose(probs, [1 / 3, 2 / 3], rtol=1e-10)


def test_optimal_sampling_probs_properties():
    rng = np.random.default_rng(11)
    for _ in range(25):
        dim = int(rng.integers(2, 12))
        diag = rng.uniform(0.0, 5.0, size=dim)
        diag[rng.random(dim) < 0.2] = 0.0
        tau = float(rng.uniform(0.5, dim))
        probs = sq.optimal_sampling_probs(diag, tau)
        assert probs.sum() == pytest.approx(tau, rel=1e-8)
        assert np.all(probs > 0) and np.all(probs <= 1)
        positive = diag > 0
        if positive.sum() >= 2 and np.all(probs[positive] < 1 - 1e-9):
            penalties = (1 - probs[positive]) / probs[positive] * diag[positive]
            assert penalties.max() - penalties.min() <= 1e-6 * max(penalties.max(), 1e-12)
        np.testing.assert_allclose(probs[~positive], tau / dim, rtol=1e-12)


def test_optimal_sampling_probs_edge_cases():
    assert np.all(sq.optimal_sampling_probs(np.array([1.0, 2.0]), 2.0) == 1.0)
    with pytest.raises(OutOfRange):
        sq.optimal_sampling_probs(np.array([1.0, 2.0]), 0.0)
    with pytest.raises(OutOfRange):
        sq.optimal_sampling_probs(np.array([1.0, 2.0]), 2.5)


def test_wrapped_identity_is_range_projection():
    """With a lossless inner channel the wrap is exactly P_range(L)."""
    rng = np.random.default_rng(12)
    for _ in range(10):
        dim = int(rng.integers(3, 8))
        rank = int(rng.integers(1, dim))
        factor = sq.build_factor(random_psd_singular(rng, dim, rank))
        wrapped = sq.wrap_with_smoothness(sq.IdentityCompressor(), factor)
        x = rng.standard_normal(dim)
        proj = factor.sqrt @ factor.pinv_sqrt
        np.testing.assert_allclose(wrapped(x, rng), proj @ x, atol=1e-10)
        # gradients of an L-smooth loss live in range(L): fixed exactly
        y = factor.matrix @ x
        np.testing.assert_allclose(wrapped(y, rng), y, atol=1e-10)


def test_wrapped_certificate_uses_own_factor():
    factor = sq.build_factor(np.diag([1.0, 4.0]))
    wrapped = sq.wrap_with_smoothness(sq.VaryingStepQuantizer(np.ones(2)), factor)
    cert = wrapped.certificate()
    assert cert.calL_bound == pytest.approx(np.sqrt(17.0), rel=1e-12)


def test_transmit_bits_quantizer_matches_encoder():
    rng = np.random.default_rng(13)
    for comp in (
        sq.StandardQuantizer(3),
        sq.VaryingStepQuantizer(np.full(8, 0.4)),
        sq.BlockQuantizer([3, 5], np.array([0.5, 0.3])),
    ):
        x = np.random.default_rng(99).standard_normal(8)
        vec, bits = comp.transmit(x, np.random.default_rng(7))
        q = comp.quantize(x, np.random.default_rng(7))
        expected, _ = sq.encoded_bit_count(q.levels, 8, q.block_starts)
        assert bits == expected
        np.testing.assert_allclose(vec, q.reconstruct(), rtol=0)


def test_transmit_bits_rand_tau_formula():
    rng = np.random.default_rng(14)
    comp = sq.RandTauSparsifier(np.full(10, 0.35))
    x = rng.standard_normal(10)
    for _ in range(20):
        vec, bits = comp.transmit(x, rng)
        nnz = int(np.count_nonzero(vec))
        assert bits == 32 * nnz + (10).bit_length() + (comb(10, nnz) - 1).bit_length()


def test_transmit_bits_identity():
    vec, bits = sq.IdentityCompressor().transmit(np.ones(6), np.random.default_rng(0))
    assert bits == 32 * 6
    np.testing.assert_array_equal(vec, np.ones(6))


def test_sample_matches_single_draws():
    """The batched sampler shares the distribution of repeated single calls."""
    rng = np.random.default_rng(15)
    x = rng.standard_normal(5)
    comp = sq.VaryingStepQuantizer(np.full(5, 0.5))
    batch = comp.sample(x, 50_000, np.random.default_rng(1))
    singles = np.array(
        [comp(x, rng) for _ in range(50_000)]
    )
    np.testing.assert_allclose(batch.mean(axis=0), singles.mean(axis=0), atol=0.02)
    np.testing.assert_allclose(batch.var(axis=0), singles.var(axis=0), rtol=0.1, atol=5e-4)
