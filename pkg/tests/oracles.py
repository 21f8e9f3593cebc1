"""Independent reference implementations used as test oracles.

Everything here is written straight-line in plain Python (lists, math.exp),
sharing no code with the package under test. The helpers at the bottom
(flattening, rectifier probing) are numpy plumbing for finite-difference
checks, not oracles themselves.
"""

from __future__ import annotations

import math

import numpy as np


def _matv(mat, vec):
    n = len(mat)
    return [sum(mat[r][c] * vec[c] for c in range(len(vec))) for r in range(n)]


def encode_reference(anchor_vec, class_rows, neighbor_rows,
                     self_proj, neighbor_proj, out_proj, score,
                     alpha, beta):
    """Re-evaluate the full encoding chain with plain Python loops.

    Inputs are nested lists of floats. Returns (pre, post, attention) as
    lists: pre/post have one row per class, attention one weight list per
    class (empty when there are no neighbors).
    """
    d = len(anchor_vec)
    pre = [[anchor_vec[t] + alpha * row[t] for t in range(d)]
           for row in class_rows]
    post, attention = [], []
    for p in pre:
        sp = _matv(self_proj, p)
        s_self = sum(score[t] * sp[t] for t in range(d))
        raw = []
        for x in neighbor_rows:
            nx = _matv(neighbor_proj, x)
            raw.append(s_self + sum(score[d + t] * nx[t] for t in range(d)))
        rect = [r if r > 0.0 else 0.0 for r in raw]
        if rect:
            top = max(rect)
            ex = [math.exp(r - top) for r in rect]
            tot = sum(ex)
            weights = [e / tot for e in ex]
        else:
            weights = []
        agg = [sum(weights[u] * neighbor_rows[u][t]
                   for u in range(len(neighbor_rows))) for t in range(d)]
        mixed = [beta * p[t] + (1.0 - beta) * agg[t] for t in range(d)]
        post.append(_matv(out_proj, mixed))
        attention.append(weights)
    return pre, post, attention


def contrastive_loss_reference(pres, posts, tau, include_positive=False):
    """50-digit evaluation of the contrastive objective, written directly
    from its definition: one log-ratio per (instance, class), positives
    against the fused pre-encoding, negatives the sibling encodings.

    pres/posts: per-instance lists of C rows (nested lists of floats).
    """
    from mpmath import exp, log, mp, mpf, sqrt

    def dot(a, b):
        total = mpf(0)
        for x, y in zip(a, b):
            total += mpf(x) * mpf(y)
        return total

    def cos(a, b):
        na, nb = sqrt(dot(a, a)), sqrt(dot(b, b))
        if na == 0 or nb == 0:
            return mpf(0)
        return dot(a, b) / (na * nb)

    old_dps = mp.dps
    mp.dps = 50
    try:
        n, n_classes = len(posts), len(posts[0])
        t = mpf(tau)
        total = mpf(0)
        for i in range(n):
            for j in range(n_classes):
                s_pos = cos(posts[i][j], pres[i][j])
                den = mpf(0)
                for q in range(n_classes):
                    if q != j:
                        den += exp(cos(posts[i][j], posts[i][q]) / t)
                if include_positive:
                    den += exp(s_pos / t)
                total += log(exp(s_pos / t) / den)
        return float(-total / (n_classes * n))
    finally:
        mp.dps = old_dps


def roc_auc_pair_oracle(scores, truth):
    """Literal pair counting: fraction of (positive, negative) pairs where
    the positive outscores the negative, ties worth one half."""
    pos = [s for s, t in zip(scores, truth) if t == 1]
    neg = [s for s, t in zip(scores, truth) if t == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def flatten_tensors(tensors):
    """Concatenate arrays into one flat float64 vector (fixed order)."""
    return np.concatenate([np.asarray(t, dtype=np.float64).ravel()
                           for t in tensors])


def split_flat(vec, shapes):
    """Inverse of flatten_tensors for the given shape list."""
    out, at = [], 0
    for shape in shapes:
        size = int(np.prod(shape)) if shape else 1
        out.append(np.asarray(vec[at:at + size]).reshape(shape))
        at += size
    return out


def rectifier_inputs(anchor_vec, class_rows, neighbor_rows,
                     self_proj, neighbor_proj, score, alpha):
    """Raw attention scores before rectification, shape (C, m).

    Used to locate rectifier kinks when validating analytic gradients;
    numpy arithmetic is fine here because only signs and magnitudes matter.
    """
    a = np.asarray(anchor_vec, dtype=np.float64)
    cls = np.asarray(class_rows, dtype=np.float64)
    nbr = np.asarray(neighbor_rows, dtype=np.float64)
    score = np.asarray(score, dtype=np.float64)
    d = a.shape[0]
    pre = a[None, :] + alpha * cls
    if nbr.size == 0:
        return np.zeros((pre.shape[0], 0))
    s_self = (pre @ np.asarray(self_proj).T) @ score[:d]
    s_nbr = (nbr @ np.asarray(neighbor_proj).T) @ score[d:]
    return s_self[:, None] + s_nbr[None, :]


def kink_free_mask(raw_of_flat, x, h=1e-5, margin=1e-6):
    """Which parameter coordinates admit a trustworthy central difference.

    Coordinate i is excluded when, at x or x +- h*e_i, any rectifier input
    lies within `margin` of 0 or changes sign across the stencil: the
    difference quotient would straddle the kink. On generic data the mask
    is all True.
    """
    base = raw_of_flat(x)
    mask = np.ones(x.size, dtype=bool)
    if base.size == 0:
        return mask
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        up, dn = raw_of_flat(xp), raw_of_flat(xm)
        near = (np.abs(base) <= margin) | (np.abs(up) <= margin) \
            | (np.abs(dn) <= margin)
        flip = (np.sign(up) != np.sign(base)) | (np.sign(dn) != np.sign(base))
        if bool(np.any(near | flip)):
            mask[i] = False
    return mask
