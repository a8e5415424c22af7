"""Class-weighted categorical cross entropy, summed over batch samples.

Labels arrive as class indices (0..L-1); positions can be masked out (label
undefined or inside the burn-in prefix) and contribute exactly zero to both
the loss and the gradient. Probabilities are clipped to [1e-7, 1 - 1e-7]
before the log; at a clipped position the gradient is zero.
"""

from __future__ import annotations

import numpy as np

CLIP_LO = 1e-7
CLIP_HI = 1.0 - 1e-7


def weighted_cross_entropy(
    probs: np.ndarray,
    label_idx: np.ndarray,
    class_weights: np.ndarray,
    mask: np.ndarray | None = None,
):
    """Return (loss_sum, dloss/dprobs, n_terms, per_position_loss).

    ``probs`` is (..., L) with rows summing to 1; ``label_idx`` is the
    integer class per position, shape = probs.shape[:-1]. ``mask`` selects
    the positions that count.
    """
    lead_shape = probs.shape[:-1]
    L = probs.shape[-1]
    if label_idx.shape != lead_shape:
        raise ValueError(f"labels {label_idx.shape} do not align with "
                         f"predictions {probs.shape}")
    if class_weights.shape != (L,):
        raise ValueError(f"need {L} class weights, got {class_weights.shape}")
    flat_probs = probs.reshape(-1, L)
    flat_labels = label_idx.reshape(-1)
    if mask is None:
        flat_mask = np.ones(flat_labels.shape, dtype=bool)
    else:
        if mask.shape != lead_shape:
            raise ValueError(f"mask {mask.shape} does not align with labels")
        flat_mask = mask.reshape(-1)

    rows = np.arange(flat_probs.shape[0])
    safe_labels = np.where(flat_mask, flat_labels, 0)
    p_true = flat_probs[rows, safe_labels]
    clipped = np.clip(p_true, CLIP_LO, CLIP_HI)
    w = class_weights[safe_labels]
    per_pos = np.where(flat_mask, -w * np.log(clipped), 0.0)
    loss = float(per_pos.sum())

    dprobs = np.zeros_like(flat_probs)
    in_range = (p_true > CLIP_LO) & (p_true < CLIP_HI) & flat_mask
    dprobs[rows[in_range], safe_labels[in_range]] = \
        (-w[in_range] / clipped[in_range]).astype(flat_probs.dtype)
    n_terms = int(flat_mask.sum())
    return loss, dprobs.reshape(probs.shape), n_terms, per_pos.reshape(lead_shape)
