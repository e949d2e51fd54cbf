"""Finite-difference comparison shared by the learner tests and the acceptance suite."""
import numpy as np

from asd import learner
from asd.data import AugmentationSpec
from oracles import central_difference

# absolute floor of the relative-error denominator: central differences at
# eps=1e-6 carry ~1e-10 absolute error, so entries below 1e-6 are compared
# in absolute terms
REL_FLOOR = 1e-6


def max_relative_error(analytic: dict, numeric: dict) -> float:
    worst = 0.0
    for name in analytic:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_FLOOR)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def random_case(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 9))
    h = int(rng.integers(2, 17))
    e = int(rng.integers(2, 9))
    n_l = int(rng.integers(2, 7))
    k = int(rng.integers(2, 5))
    model = learner.init_model(d, n_l, k, hidden=h, embed=e, seed=rng)
    for p in model.params.values():
        p += 0.1 * rng.standard_normal(p.shape)
    return rng, model, d, n_l, k


def check_instance(seed):
    rng, model, d, n_l, _ = random_case(seed)
    x = rng.standard_normal((n_l, d))
    y = rng.random((n_l, n_l))
    y /= y.sum(axis=1, keepdims=True)
    _, g = learner.loss_instance(model, x, y)
    num = central_difference(lambda: learner.loss_instance(model, x, y)[0], model.params)
    return max_relative_error(g, num)


def check_supervised(seed):
    rng, model, d, n_l, k = random_case(seed)
    x = rng.standard_normal((n_l, d))
    labels = rng.integers(0, k, n_l)
    _, g = learner.loss_supervised(model, x, labels)
    num = central_difference(lambda: learner.loss_supervised(model, x, labels)[0], model.params)
    return max_relative_error(g, num)


def check_unsupervised(seed):
    """Confident case: pseudo-labels and mask are piecewise constant in the
    parameters, so away from the threshold the numeric derivative sees only
    the strong-view path."""
    rng, model, d, _, k = random_case(seed)
    model.params["clu_W"] *= 8.0
    x = rng.standard_normal((12, d))
    spec = AugmentationSpec(0.1, 0.3, 0.2)
    weak = x + 0.1 * rng.standard_normal(x.shape)
    strong = x + 0.3 * rng.standard_normal(x.shape)
    conf = learner.softmax(learner.cluster_logits(model, weak)).max(axis=1)
    # put the threshold in the widest gap between confidences
    srt = np.sort(conf)
    gaps = np.diff(srt)
    j = int(np.argmax(gaps))
    tau = float(min(max((srt[j] + srt[j + 1]) / 2, 1e-3), 1 - 1e-3))
    loss, g, rate = learner.loss_unsupervised(model, x, spec, tau, views=(weak, strong))
    num = central_difference(
        lambda: learner.loss_unsupervised(model, x, spec, tau, views=(weak, strong))[0], model.params
    )
    return max_relative_error(g, num), rate
