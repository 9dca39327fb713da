"""Shared helpers for the test suite."""

import numpy as np

import longattn.encoder as encoder_module

RELU_GAP_THRESHOLD = 3e-3


def min_relu_gap(f) -> float:
    """Smallest |pre-activation| any encoder relu saw while running ``f`` once.

    Central finite differences are only a valid gradient oracle away from the
    relu kink; callers use this to screen evaluation points.
    """
    gaps: list[float] = []
    original = encoder_module.relu

    def probe(t):
        if t.data.size:
            gaps.append(float(np.abs(t.data).min()))
        return original(t)

    encoder_module.relu = probe
    try:
        f()
    finally:
        encoder_module.relu = original
    return min(gaps) if gaps else float("inf")


def screen_seed(make_case, base_seed: int, attempts: int = 20) -> int:
    """First seed whose forward pass keeps relu inputs clear of the kink."""
    for i in range(attempts):
        seed = base_seed + 1000 * i
        f = make_case(seed)
        if min_relu_gap(f) > RELU_GAP_THRESHOLD:
            return seed
    raise AssertionError(f"no kink-free seed found starting from {base_seed}")
