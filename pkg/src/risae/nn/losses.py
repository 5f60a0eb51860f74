import numpy as np

PROB_FLOOR = 1e-12


def cross_entropy(probs, onehot):
    """Categorical cross-entropy averaged over all one-hot rows.

    Returns ``(loss, grad)`` where ``grad`` is the derivative with respect to
    the pre-softmax logits, ``(probs - onehot) / M``.
    """
    if probs.shape != onehot.shape:
        raise ValueError(f"probs shape {probs.shape} != onehot shape {onehot.shape}")
    m = probs.size // probs.shape[-1]
    loss = -np.sum(onehot * np.log(np.maximum(probs, PROB_FLOOR))) / m
    return float(loss), (probs - onehot) / m
