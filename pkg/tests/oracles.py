"""Slow, independent reference implementations used only by the tests."""
import itertools
import math
from fractions import Fraction

import numpy as np


def coverage_enumerate(n_l, k, n):
    """Exact P(all classes hit) by listing every n_l-subset of a balanced pool."""
    per = n // k
    cls = [i // per for i in range(n)]
    hit = total = 0
    for combo in itertools.combinations(range(n), n_l):
        total += 1
        hit += len({cls[i] for i in combo}) == k
    return Fraction(hit, total)


def coverage_fraction(n_l, k, n):
    """Inclusion-exclusion in exact rational arithmetic with integer binomials."""
    per = n // k
    s = Fraction(0)
    for i in range(1, k + 1):
        s += (-1) ** (i - 1) * math.comb(k, i) * Fraction(math.comb(n - i * per, n_l), math.comb(n, n_l))
    return 1 - s


def accuracy_bruteforce(pred, truth):
    pred = list(pred)
    truth = list(truth)
    p_labels = sorted(set(pred))
    t_labels = sorted(set(truth))
    size = max(len(p_labels), len(t_labels))
    t_pad = t_labels + [None] * (size - len(t_labels))
    best = 0
    for perm in itertools.permutations(t_pad, len(p_labels)):
        mapping = dict(zip(p_labels, perm))
        best = max(best, sum(mapping[p] == t for p, t in zip(pred, truth)))
    return best / len(pred)


def nmi_scalar(pred, truth):
    n = len(pred)
    pc = {}
    tc = {}
    joint = {}
    for p, t in zip(pred, truth):
        pc[p] = pc.get(p, 0) + 1
        tc[t] = tc.get(t, 0) + 1
        joint[(p, t)] = joint.get((p, t), 0) + 1
    hp = -sum(c / n * math.log(c / n) for c in pc.values())
    ht = -sum(c / n * math.log(c / n) for c in tc.values())
    if hp == 0 or ht == 0:
        return 1.0 if hp == ht else 0.0
    mi = sum(c / n * math.log(c * n / (pc[p] * tc[t])) for (p, t), c in joint.items())
    return mi / math.sqrt(hp * ht)


def ari_pairs(pred, truth):
    """ARI from pair-counting over all C(n, 2) pairs."""
    n = len(pred)
    ss = sd = ds = dd = 0
    for i, j in itertools.combinations(range(n), 2):
        same_p = pred[i] == pred[j]
        same_t = truth[i] == truth[j]
        if same_p and same_t:
            ss += 1
        elif same_p:
            sd += 1
        elif same_t:
            ds += 1
        else:
            dd += 1
    total = ss + sd + ds + dd
    # index = ss, a-pairs = ss + sd, b-pairs = ss + ds
    a = ss + sd
    b = ss + ds
    expected = a * b / total if total else 0.0
    mx = (a + b) / 2
    if mx == expected:
        return 1.0 if ss == mx else 0.0
    return (ss - expected) / (mx - expected)


def kmedoids_exhaustive(D, k):
    n = D.shape[0]
    best = math.inf
    for med in itertools.combinations(range(n), k):
        best = min(best, float(D[:, list(med)].min(axis=1).sum()))
    return best


def assignment_bruteforce(C):
    """Minimum-cost perfect matching by trying every permutation."""
    n = C.shape[0]
    return min(sum(C[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def cosine_cost_loop(A, B):
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            na = math.sqrt(sum(v * v for v in A[i]))
            nb = math.sqrt(sum(v * v for v in B[j]))
            out[i, j] = 1.0 - sum(a * b for a, b in zip(A[i], B[j])) / (na * nb)
    return out


def mlp_forward_loop(params, x):
    """Scalar-loop forward pass of the tanh-tanh-linear extractor for one vector."""

    def dense(v, W, b, act):
        out = []
        for j in range(W.shape[1]):
            s = b[j] + sum(v[i] * W[i, j] for i in range(W.shape[0]))
            out.append(math.tanh(s) if act else s)
        return out

    h1 = dense(list(x), params["W1"], params["b1"], True)
    h2 = dense(h1, params["W2"], params["b2"], True)
    return np.array(dense(h2, params["W3"], params["b3"], False))


def central_difference(loss_fn, params, eps=1e-6):
    """Numerical gradient of loss_fn() w.r.t. every entry of every array in params."""
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + eps
            up = loss_fn()
            p[idx] = old - eps
            down = loss_fn()
            p[idx] = old
            g[idx] = (up - down) / (2 * eps)
        grads[name] = g
    return grads
