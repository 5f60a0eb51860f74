"""Central finite-difference verification of analytic gradients."""
import numpy as np


def relative_error(analytic, numeric, floor=1e-6):
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def grad_check_report(loss_and_grads, params, inputs, eps=1e-5, max_per_param=None, seed=0):
    """Per-parameter worst relative error between analytic and numeric gradients.

    ``loss_and_grads(inputs)`` must return ``(loss, grads)`` computed from the
    live arrays in ``params``; entries are perturbed in place and restored.
    With ``max_per_param`` set, only that many entries of each array are
    checked (chosen with a fixed seed); otherwise every entry is.
    """
    rng = np.random.default_rng(seed)
    _, analytic = loss_and_grads(inputs)
    analytic = {k: np.array(v, copy=True) for k, v in analytic.items()}
    report = {}
    for name, p in params.items():
        flat = p.reshape(-1)
        if max_per_param is None or flat.size <= max_per_param:
            idx = np.arange(flat.size)
        else:
            idx = rng.choice(flat.size, size=max_per_param, replace=False)
        a = analytic[name].reshape(-1)[idx]
        num = np.empty(idx.size)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus, _ = loss_and_grads(inputs)
            flat[i] = orig - eps
            f_minus, _ = loss_and_grads(inputs)
            flat[i] = orig
            num[j] = (f_plus - f_minus) / (2 * eps)
        report[name] = float(relative_error(a, num).max()) if idx.size else 0.0
    return report


def grad_check(loss_and_grads, params, inputs, eps=1e-5, max_per_param=None, seed=0):
    """Worst relative error over every parameter array; see :func:`grad_check_report`."""
    report = grad_check_report(loss_and_grads, params, inputs, eps, max_per_param, seed)
    return max(report.values()) if report else 0.0
