"""Central finite-difference oracle for backprop gradients."""
import numpy as np

from wavecxr import model as M


def numeric_gradients(model, x, y, step=1e-5):
    """Perturb every parameter in place by +-step and difference the loss."""
    grads = []
    for layer in model.layers:
        pair = []
        for arr in (layer.weight, layer.bias):
            g = np.zeros_like(arr)
            flat, gflat = arr.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + step
                up = M.loss(M.forward(model, x), y)
                flat[i] = keep - step
                down = M.loss(M.forward(model, x), y)
                flat[i] = keep
                gflat[i] = (up - down) / (2 * step)
            pair.append(g)
        grads.append(pair)
    return grads


def compare(model, x, y, rel=1e-5, abs_=1e-7, step=1e-5):
    """Return ``(n_checked, n_bad, worst_abs_error)`` over all parameters."""
    analytic, _ = M.backward(model, x, y)
    numeric = numeric_gradients(model, x, y, step)
    n = bad = 0
    worst = 0.0
    for (nw, nb), aw, ab in zip(numeric, analytic.weights, analytic.biases):
        for num, ana in ((nw, aw), (nb, ab)):
            err = np.abs(num - ana)
            scale = np.maximum(np.abs(num), np.abs(ana))
            ok = (err <= abs_) | (err <= rel * scale)
            n += err.size
            bad += int(np.count_nonzero(~ok))
            worst = max(worst, float(err.max(initial=0.0)))
    return n, bad, worst


def relu_margin(model, x):
    """Smallest |pre-activation| over all ReLU units; central differences are
    only valid when this exceeds the change a single step can cause."""
    _, cache = M.forward_logits(model, x, keep_cache=True)
    return min(
        float(np.abs(z).min()) for layer, (_, _, z, _) in zip(model.layers, cache) if layer.spec.activation == M.RELU
    )
