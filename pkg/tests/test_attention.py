"""Attention variants: worked examples, algebraic identity, invariance properties."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from longattn.attention import (
    AttentionVariant,
    apply_soft_mask,
    attention_weights,
    attn_gaussian,
    attn_kernel_form,
    attn_relative,
    attn_shared_qk,
    attn_soft_mask,
    attn_standard,
    export_attn_csv,
    frame_index_augment,
    init_attention_params,
    kernel_form_factors,
    multi_head_attention,
    scores_relative,
    sigma_inverse,
    signed_sinusoid_table,
    sinusoid_encoding,
    soft_mask_matrix,
)
from longattn.attention.params import AttentionParams
from longattn.attention.variants import soft_mask_tensor
from longattn.errors import ConfigError
from longattn.numerics import const, param
from longattn.numerics.linalg import softmax_rows


def rel_diff(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


def make_params(variant, d_model, d_k, d_v, seed, alpha=100.0):
    rng = np.random.default_rng(seed)
    return init_attention_params(variant, d_model, d_k, d_v, alpha, rng)


# ---------------------------------------------------------------------------
# positional encoding
# ---------------------------------------------------------------------------


def test_sinusoid_row_zero_alternates():
    enc = sinusoid_encoding(3, 6)
    npt.assert_array_equal(enc[0], [0.0, 1.0, 0.0, 1.0, 0.0, 1.0])


def test_sinusoid_first_entry():
    enc = sinusoid_encoding(2, 4)
    assert abs(enc[1, 0] - math.sin(1.0)) < 1e-12


def test_sinusoid_pointwise_oracle():
    dim = 8
    enc = sinusoid_encoding(11, dim)
    for i in range(11):
        for d in range(dim):
            k2 = d if d % 2 == 0 else d - 1
            arg = i / 10000.0 ** (k2 / dim)
            expected = math.sin(arg) if d % 2 == 0 else math.cos(arg)
            assert abs(enc[i, d] - expected) < 1e-12


def test_sinusoid_rejects_odd_dim():
    with pytest.raises(ConfigError):
        sinusoid_encoding(4, 5)


def test_signed_table_covers_full_span():
    table = signed_sinusoid_table(5, 4)
    assert table.shape == (9, 4)
    npt.assert_allclose(table[4], sinusoid_encoding(1, 4)[0], atol=1e-15)
    assert abs(table[4 - 3, 0] - math.sin(-3.0)) < 1e-12


# ---------------------------------------------------------------------------
# soft mask
# ---------------------------------------------------------------------------


def test_soft_mask_diagonal_zero():
    npt.assert_array_equal(np.diag(soft_mask_matrix(6, 2.0)), np.zeros(6))


def test_soft_mask_values():
    m = soft_mask_matrix(4, 1.0)
    assert m[1, 0] == -0.5
    m2 = soft_mask_matrix(5, 2.0)
    assert m2[4, 1] == -1.125
    npt.assert_array_equal(m, m.T)


def test_soft_mask_rejects_bad_sigma():
    with pytest.raises(ConfigError):
        soft_mask_matrix(4, 0.0)


def test_apply_soft_mask_zero_is_identity():
    rng = np.random.default_rng(0)
    scores = rng.normal(size=(4, 4))
    npt.assert_array_equal(apply_soft_mask(scores, np.zeros((4, 4))), scores)


def test_apply_soft_mask_neg_inf_surrogate():
    scores = np.zeros((2, 2))
    mask = np.zeros((2, 2))
    mask[0, 1] = -1e30
    p = softmax_rows(apply_soft_mask(scores, mask))
    assert p[0, 1] < 1e-300


def test_huge_sigma_equals_unmasked():
    rng = np.random.default_rng(1)
    scores = rng.normal(size=(8, 8))
    masked = softmax_rows(apply_soft_mask(scores, soft_mask_matrix(8, 1e8)))
    plain = softmax_rows(scores)
    assert np.abs(masked - plain).max() <= 1e-10


def test_soft_mask_tensor_matches_array_form():
    log_sigma = param([[math.log(3.5)]])
    npt.assert_allclose(soft_mask_tensor(7, log_sigma).data, soft_mask_matrix(7, 3.5),
                        atol=1e-12)


# ---------------------------------------------------------------------------
# standard and shared-QK attention
# ---------------------------------------------------------------------------


def oracle_standard(x, w_q, w_k):
    """Column-convention double loop straight from the scaled dot-product form."""
    L, _ = x.shape
    xa = np.concatenate([x, np.ones((L, 1))], axis=1)
    d_k = w_q.shape[0]
    raw = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            raw[i, j] = math.exp((w_q @ xa[i]) @ (w_k @ xa[j]) / math.sqrt(d_k))
    return raw / raw.sum(axis=1, keepdims=True)


def test_attn_standard_singleton():
    p = make_params(AttentionVariant.STANDARD, 3, 4, 3, 0)
    out = attn_standard(np.zeros((1, 3)), p.w_q, p.w_k_x)
    npt.assert_array_equal(out.data, [[1.0]])


def test_attn_standard_identical_frames_uniform():
    p = make_params(AttentionVariant.STANDARD, 3, 4, 3, 1)
    x = np.tile(np.array([[0.4, -1.0, 2.0]]), (5, 1))
    npt.assert_allclose(attn_standard(x, p.w_q, p.w_k_x).data, np.full((5, 5), 0.2),
                        atol=1e-12)


def test_attn_standard_matches_double_loop_oracle():
    rng = np.random.default_rng(2)
    p = make_params(AttentionVariant.STANDARD, 4, 5, 4, 3)
    x = rng.normal(size=(6, 4))
    out = attn_standard(x, p.w_q, p.w_k_x).data
    npt.assert_allclose(out, oracle_standard(x, p.w_q.data, p.w_k_x.data), atol=1e-12)


def test_attn_shared_qk_singleton_and_equivalence():
    p = make_params(AttentionVariant.SHARED_QK, 4, 4, 4, 4)
    npt.assert_array_equal(attn_shared_qk(np.zeros((1, 4)), p.w_s).data, [[1.0]])
    rng = np.random.default_rng(5)
    x = rng.normal(size=(7, 4))
    via_standard = attn_standard(x, p.w_s, p.w_s).data
    assert np.abs(attn_shared_qk(x, p.w_s).data - via_standard).max() <= 1e-15


def test_shared_qk_presoftmax_scores_symmetric():
    rng = np.random.default_rng(6)
    p = make_params(AttentionVariant.SHARED_QK, 4, 5, 4, 7)
    x = rng.normal(size=(6, 4))
    xa = np.concatenate([x, np.ones((6, 1))], axis=1)
    q = xa @ p.w_s.data.T
    scores = q @ q.T / math.sqrt(5)
    assert np.abs(scores - scores.T).max() <= 1e-12


# ---------------------------------------------------------------------------
# kernel form (the algebraic identity oracle)
# ---------------------------------------------------------------------------


def test_kernel_form_identity_100_random_instances():
    rng = np.random.default_rng(8)
    for _ in range(100):
        L = int(rng.integers(1, 17))
        D = int(rng.integers(1, 9))
        d_k = int(rng.integers(1, 9))
        x = rng.normal(size=(L, D))
        w_s = rng.normal(scale=1.0 / math.sqrt(D + 1), size=(d_k, D + 1))
        direct = attn_shared_qk(x, const(w_s)).data
        rewritten = attn_kernel_form(x, w_s)
        assert rel_diff(rewritten, direct) <= 1e-10


def test_kernel_form_singleton():
    npt.assert_array_equal(attn_kernel_form(np.zeros((1, 3)), np.ones((2, 4))), [[1.0]])


def test_sigma_inverse_positive_semidefinite():
    rng = np.random.default_rng(9)
    for _ in range(20):
        w_s = rng.normal(size=(4, 6))
        s_inv = sigma_inverse(w_s)
        for _ in range(10):
            z = rng.normal(size=6)
            assert z @ s_inv @ z >= -1e-10


def test_energy_term_factorization():
    rng = np.random.default_rng(10)
    for _ in range(20):
        x = rng.normal(size=(6, 4))
        w_s = rng.normal(scale=0.5, size=(3, 5))
        kernel, energy = kernel_form_factors(x, w_s)
        xa = np.concatenate([x, np.ones((6, 1))], axis=1)
        gram = np.exp(xa @ sigma_inverse(w_s) @ xa.T)
        product = kernel * energy[:, None] * energy[None, :]
        assert rel_diff(product, gram) <= 1e-10


# ---------------------------------------------------------------------------
# Gaussian kernelized attention
# ---------------------------------------------------------------------------


def oracle_gaussian(x, w_s):
    """Explicit per-pair Mahalanobis distances on bias-augmented frames."""
    L = x.shape[0]
    xa = np.concatenate([x, np.ones((L, 1))], axis=1)
    s_inv = sigma_inverse(w_s)
    raw = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            d = xa[i] - xa[j]
            raw[i, j] = math.exp(-0.5 * d @ s_inv @ d)
    return raw / raw.sum(axis=1, keepdims=True)


def test_attn_gaussian_identical_frames_uniform():
    p = make_params(AttentionVariant.GAUSSIAN, 3, 4, 3, 11)
    x = np.tile(np.array([[1.0, 2.0, -0.5]]), (6, 1))
    npt.assert_allclose(attn_gaussian(x, p.w_s).data, np.full((6, 6), 1 / 6), atol=1e-12)


def test_attn_gaussian_matches_mahalanobis_oracle():
    rng = np.random.default_rng(12)
    p = make_params(AttentionVariant.GAUSSIAN, 5, 3, 5, 13)
    x = rng.normal(size=(7, 5))
    npt.assert_allclose(attn_gaussian(x, p.w_s).data,
                        oracle_gaussian(x, p.w_s.data), atol=1e-12)


def test_gaussian_prenormalization_diagonal_is_one():
    rng = np.random.default_rng(13)
    x = rng.normal(size=(5, 4))
    w_s = rng.normal(size=(3, 5))
    kernel, _ = kernel_form_factors(x, w_s)
    npt.assert_allclose(np.diag(kernel), np.ones(5), atol=1e-12)


def test_gaussian_shift_invariance():
    rng = np.random.default_rng(14)
    p = make_params(AttentionVariant.GAUSSIAN, 4, 4, 4, 15)
    x = rng.normal(size=(8, 4))
    base = attn_gaussian(x, p.w_s).data
    for _ in range(5):
        c = rng.normal(size=(1, 4))
        shifted = attn_gaussian(x + c, p.w_s).data
        assert np.abs(shifted - base).max() <= 1e-10


def test_standard_attention_shift_witness():
    rng = np.random.default_rng(15)
    hits = 0
    for trial in range(100):
        p = make_params(AttentionVariant.STANDARD, 4, 4, 4, 1000 + trial)
        x = rng.normal(size=(6, 4))
        base = attn_standard(x, p.w_q, p.w_k_x).data
        found = False
        for _ in range(10):
            c = rng.normal(size=(1, 4))
            if np.abs(attn_standard(x + c, p.w_q, p.w_k_x).data - base).max() > 1e-3:
                found = True
                break
        hits += found
    assert hits >= 95


def test_gaussian_scores_symmetric():
    rng = np.random.default_rng(16)
    x = rng.normal(size=(6, 4))
    w_s = rng.normal(size=(3, 5))
    kernel, _ = kernel_form_factors(x, w_s)
    assert np.abs(kernel - kernel.T).max() <= 1e-12


# ---------------------------------------------------------------------------
# frame indexing
# ---------------------------------------------------------------------------


def test_frame_index_values():
    x = np.zeros((300, 2))
    aug = frame_index_augment(x, start_index=0, alpha=100.0)
    assert aug[0, -1] == 0.0
    assert aug[250, -1] == 2.5
    assert aug.shape == (300, 3)


def test_frame_index_difference_vector():
    aug = frame_index_augment(np.zeros((20, 2)), start_index=7, alpha=100.0)
    for i, j in [(0, 5), (13, 2), (19, 19)]:
        assert abs((aug[i, -1] - aug[j, -1]) - (i - j) / 100.0) < 1e-15


def test_frame_index_rejects_bad_alpha():
    with pytest.raises(ConfigError):
        frame_index_augment(np.zeros((3, 2)), 0, 0.0)


def test_gaussian_frame_index_translation_invariance():
    rng = np.random.default_rng(17)
    p = make_params(AttentionVariant.GAUSSIAN_FRAME_INDEX, 4, 4, 4, 18)
    x = rng.normal(size=(9, 4))
    outs = [
        attention_weights(x, p, AttentionVariant.GAUSSIAN_FRAME_INDEX,
                          alpha=100.0, start_index=s).data
        for s in (0, 37, 1000)
    ]
    assert np.abs(outs[1] - outs[0]).max() <= 1e-10
    assert np.abs(outs[2] - outs[0]).max() <= 1e-10


def test_standard_frame_index_breaks_translation_invariance():
    rng = np.random.default_rng(19)
    hits = 0
    for trial in range(100):
        p = make_params(AttentionVariant.STANDARD_FRAME_INDEX, 4, 4, 4, 2000 + trial)
        x = rng.normal(size=(6, 4))
        base = attention_weights(x, p, AttentionVariant.STANDARD_FRAME_INDEX,
                                 alpha=100.0, start_index=0).data
        shifted = attention_weights(x, p, AttentionVariant.STANDARD_FRAME_INDEX,
                                    alpha=100.0, start_index=1000).data
        hits += np.abs(shifted - base).max() > 1e-3
    assert hits >= 95


# ---------------------------------------------------------------------------
# relative positional encoding
# ---------------------------------------------------------------------------


def oracle_relative(x, w_q, w_k_x, w_k_r, u, v, table):
    L = x.shape[0]
    xa = np.concatenate([x, np.ones((L, 1))], axis=1)
    scores = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            r = table[i - j + L - 1]
            scores[i, j] = (
                xa[i] @ w_q.T @ w_k_x @ xa[j]
                + xa[i] @ w_q.T @ w_k_r @ r
                + u @ w_k_x @ xa[j]
                + v @ w_k_r @ r
            )
    return scores


def test_scores_relative_reduces_to_standard_qk():
    rng = np.random.default_rng(20)
    p = make_params(AttentionVariant.RELATIVE_PE, 4, 3, 4, 21)
    x = rng.normal(size=(5, 4))
    zero_like = lambda t: const(np.zeros_like(t.data))
    got = scores_relative(x, p.w_q, p.w_k_x, zero_like(p.w_k_r),
                          zero_like(p.u), zero_like(p.v)).data
    xa = np.concatenate([x, np.ones((5, 1))], axis=1)
    expected = (xa @ p.w_q.data.T) @ (xa @ p.w_k_x.data.T).T
    npt.assert_allclose(got, expected, atol=1e-12)


def test_scores_relative_depends_only_on_offset():
    # constant features isolate the positional terms: scores must be Toeplitz
    p = make_params(AttentionVariant.RELATIVE_PE, 4, 3, 4, 22)
    x = np.tile(np.array([[0.3, -1.2, 0.7, 0.1]]), (7, 1))
    s = scores_relative(x, p.w_q, p.w_k_x, p.w_k_r, p.u, p.v).data
    for i in range(6):
        for j in range(6):
            assert abs(s[i, j] - s[i + 1, j + 1]) <= 1e-12


def test_scores_relative_matches_four_term_oracle():
    rng = np.random.default_rng(23)
    p = make_params(AttentionVariant.RELATIVE_PE, 4, 3, 4, 24)
    x = rng.normal(size=(5, 4))
    table = signed_sinusoid_table(5, p.w_k_r.data.shape[1])
    got = scores_relative(x, p.w_q, p.w_k_x, p.w_k_r, p.u, p.v, const(table)).data
    expected = oracle_relative(x, p.w_q.data, p.w_k_x.data, p.w_k_r.data,
                               p.u.data[0], p.v.data[0], table)
    npt.assert_allclose(got, expected, atol=1e-12)


def test_attn_relative_rows_stochastic():
    rng = np.random.default_rng(25)
    p = make_params(AttentionVariant.RELATIVE_PE, 4, 4, 4, 26)
    x = rng.normal(size=(6, 4))
    out = attn_relative(x, p.w_q, p.w_k_x, p.w_k_r, p.u, p.v).data
    npt.assert_allclose(out.sum(axis=1), np.ones(6), atol=1e-12)


# ---------------------------------------------------------------------------
# multi-head wrapper
# ---------------------------------------------------------------------------


def test_multi_head_single_head_singleton():
    rng = np.random.default_rng(27)
    head = make_params(AttentionVariant.STANDARD, 4, 3, 4, 28)
    w_o = param(rng.normal(size=(4, 5)))
    x = rng.normal(size=(1, 4))
    out = multi_head_attention(x, [head], w_o, AttentionVariant.STANDARD).data
    xa = np.concatenate([x, np.ones((1, 1))], axis=1)
    values = xa @ head.w_v.data.T
    expected = np.concatenate([values, np.ones((1, 1))], axis=1) @ w_o.data.T
    npt.assert_allclose(out, expected, atol=1e-12)


def test_multi_head_permutation_symmetry():
    rng = np.random.default_rng(29)
    d_model, d_v = 6, 3
    heads = [make_params(AttentionVariant.STANDARD, d_model, 4, d_v, 30 + i)
             for i in range(2)]
    w_o = rng.normal(size=(d_model, 2 * d_v + 1))
    x = rng.normal(size=(5, d_model))
    out = multi_head_attention(x, heads, const(w_o), AttentionVariant.STANDARD).data
    # swap the two heads along with their slices of the output weight
    w_o_swapped = np.concatenate(
        [w_o[:, d_v:2 * d_v], w_o[:, :d_v], w_o[:, -1:]], axis=1
    )
    swapped = multi_head_attention(x, heads[::-1], const(w_o_swapped),
                                   AttentionVariant.STANDARD).data
    assert np.abs(out - swapped).max() <= 1e-12


def test_multi_head_matches_manual_two_slice():
    rng = np.random.default_rng(31)
    d_model, d_v = 6, 3
    heads = [make_params(AttentionVariant.GAUSSIAN, d_model, 4, d_v, 40 + i)
             for i in range(2)]
    w_o = rng.normal(size=(d_model, 2 * d_v + 1))
    x = rng.normal(size=(5, d_model))
    out = multi_head_attention(x, heads, const(w_o), AttentionVariant.GAUSSIAN).data
    xa = np.concatenate([x, np.ones((5, 1))], axis=1)
    slices = []
    for head in heads:
        attn = attn_gaussian(x, head.w_s).data
        slices.append(attn @ (xa @ head.w_v.data.T))
    manual = np.concatenate(slices + [np.ones((5, 1))], axis=1) @ w_o.T
    npt.assert_allclose(out, manual, atol=1e-12)


# ---------------------------------------------------------------------------
# cross-variant properties
# ---------------------------------------------------------------------------

ALL_VARIANTS = list(AttentionVariant)


@pytest.mark.parametrize("variant", ALL_VARIANTS, ids=lambda v: v.value)
def test_all_variants_row_stochastic(variant):
    rng = np.random.default_rng(32)
    for trial in range(10):
        L = int(rng.integers(1, 12))
        x = rng.normal(size=(L, 6))
        p = make_params(variant, 6, 4, 6, 5000 + trial)
        w = attention_weights(x, p, variant, alpha=100.0).data
        npt.assert_allclose(w.sum(axis=1), np.ones(L), atol=1e-12)
        assert np.all(w > 0)


def test_export_attn_csv_round_trip(tmp_path):
    rng = np.random.default_rng(33)
    w = softmax_rows(rng.normal(size=(4, 4)))
    path = tmp_path / "attn.csv"
    export_attn_csv(w, path)
    back = np.loadtxt(path, delimiter=",")
    npt.assert_array_equal(back, w)


def test_attention_params_named_only_present_fields():
    p = make_params(AttentionVariant.GAUSSIAN, 4, 3, 4, 50)
    names = [n for n, _ in p.named("h.")]
    assert names == ["h.w_s", "h.w_v"]
    p2 = make_params(AttentionVariant.RELATIVE_PE, 4, 3, 4, 51)
    names2 = [n for n, _ in p2.named()]
    assert names2 == ["w_q", "w_k_x", "w_k_r", "u", "v", "w_v"]


def test_soft_mask_sigma_positive_and_matches_init():
    p = make_params(AttentionVariant.SOFT_MASK, 4, 3, 4, 52)
    assert abs(p.sigma_mask - 10.0) < 1e-12
    p.log_sigma_mask.data[0, 0] = -40.0
    assert p.sigma_mask > 0.0


def test_offset_table_span_is_checked():
    from longattn.attention.variants import offset_dot
    from longattn.errors import InternalError
    from longattn.numerics import const

    q = const(np.zeros((4, 3)))
    bad_table = const(np.zeros((5, 3)))  # needs 2*4-1 = 7 rows
    with pytest.raises(InternalError):
        offset_dot(q, bad_table)
