"""Independent straight-line evaluations of every model formula.

Everything here is written with explicit Python loops directly from the
mathematical definitions, deliberately sharing no code with the package,
so it can serve as an oracle for the vectorized implementations.
"""

import math

import numpy as np

KERNEL_SIZES = (2, 3, 4, 5)


def sl_affine(W, b, x):
    out = np.zeros(W.shape[0])
    for o in range(W.shape[0]):
        acc = b[o]
        for i in range(W.shape[1]):
            acc += W[o, i] * x[i]
        out[o] = acc
    return out


def sl_softmax(z):
    es = [math.exp(v) for v in z]
    s = sum(es)
    return np.array([e / s for e in es])


def sl_expert_mean(W, b, H):
    T, d = H.shape
    u = np.zeros(d)
    for i in range(T):
        for j in range(d):
            u[j] += H[i, j] / T
    return sl_affine(W, b, u)


def sl_expert_max(W, b, H):
    T, d = H.shape
    u = np.array([max(H[i, j] for i in range(T)) for j in range(d)])
    return sl_affine(W, b, u)


def sl_expert_selfattn(W, b, v, H):
    T, d = H.shape
    scores = [math.tanh(sum(H[i, j] * v[j] for j in range(d))) for i in range(T)]
    alpha = sl_softmax(scores)
    u = np.zeros(d)
    for i in range(T):
        for j in range(d):
            u[j] += alpha[i] * H[i, j]
    return sl_affine(W, b, u)


def sl_expert_cnn(W, b, kernels, kernel_biases, P, pb, H):
    """kernels: {k: (n_f, k, d)}, kernel_biases: {k: (n_f,)}, P/pb: inner
    projection, W/b: outer projection."""
    T, d = H.shape
    n_f = kernels[KERNEL_SIZES[0]].shape[0]
    feats = []
    for k in KERNEL_SIZES:
        if T < k:
            feats.extend([0.0] * n_f)
            continue
        L = T - k + 1
        for f in range(n_f):
            acc = 0.0
            for t in range(L):
                c = kernel_biases[k][f]
                for j in range(k):
                    for j2 in range(d):
                        c += kernels[k][f, j, j2] * H[t + j, j2]
                acc += max(c, 0.0)
            feats.append(acc / L)
    inner = sl_affine(P, pb, np.array(feats))
    return sl_affine(W, b, inner)


def sl_expert_cue(W, b, H, C, eps):
    d = H.shape[1]
    u = np.zeros(d)
    for i in sorted(C):
        for j in range(d):
            u[j] += H[i, j]
    u = u / (len(C) + eps)
    return sl_affine(W, b, u)


def sl_expert_contrast(W, b, H, D, lam, eps):
    T, d = H.shape
    if not D:
        return np.zeros(W.shape[0])
    u = np.zeros(d)
    for i in range(T):
        scale = lam if i in D else 1.0
        for j in range(d):
            u[j] += scale * H[i, j]
    u = u / (len(D) + eps)
    return sl_affine(W, b, u)


def sl_gate(Wg, bg, h_cls):
    return sl_softmax(sl_affine(Wg, bg, h_cls))


def sl_fuse(g, vectors):
    d = len(vectors[0])
    out = np.zeros(d)
    for gi, e in zip(g, vectors):
        for j in range(d):
            out[j] += gi * e[j]
    return out


def sl_classify(Wo, bo, h):
    logits = sl_affine(Wo, bo, h)
    return logits, sl_softmax(logits)


def sl_metrics(golds, preds, n_classes=3):
    """Brute-force accuracy and per-class P/R/F1 computed from raw lists."""
    correct = sum(1 for g, p in zip(golds, preds) if g == p)
    accuracy = correct / len(golds)
    precision, recall, f1 = [], [], []
    for c in range(n_classes):
        tp = sum(1 for g, p in zip(golds, preds) if g == c and p == c)
        fp = sum(1 for g, p in zip(golds, preds) if g != c and p == c)
        fn = sum(1 for g, p in zip(golds, preds) if g == c and p != c)
        prec = tp / (tp + fp) if tp + fp > 0 else 0.0
        rec = tp / (tp + fn) if tp + fn > 0 else 0.0
        precision.append(prec)
        recall.append(rec)
        f1.append(2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0)
    return {
        "accuracy": accuracy,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "macro_precision": sum(precision) / n_classes,
        "macro_recall": sum(recall) / n_classes,
        "macro_f1": sum(f1) / n_classes,
    }
