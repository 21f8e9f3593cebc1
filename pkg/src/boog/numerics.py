"""Dense linear algebra, nonlinearities, similarities, Adam, and a
finite-difference gradient checker.

Everything operates on float64 numpy arrays: a DenseVector is a 1-D array,
a DenseMatrix a 2-D array. No public operation lets a NaN/Inf escape; the
validating constructors below are used at every ingestion boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation, ShapeError

__all__ = [
    "as_vector",
    "as_matrix",
    "matvec",
    "relu",
    "softmax",
    "softmax_rows",
    "cosine_sim",
    "AdamState",
    "adam_init",
    "adam_step",
    "finite_diff_grad",
]


def as_vector(data, dim: int | None = None) -> np.ndarray:
    """Validate and return a 1-D float64 vector.

    Raises ShapeError on wrong rank/dim and ContractViolation on
    non-finite entries.
    """
    v = np.asarray(data, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError("expected a 1-D vector", v.shape, None)
    if dim is not None and v.shape[0] != dim:
        raise ShapeError("vector has wrong dimension", v.shape, (dim,))
    if not np.all(np.isfinite(v)):
        raise ContractViolation("vector contains non-finite entries")
    return v


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Validate and return a 2-D float64 matrix."""
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError("expected a 2-D matrix", m.shape, None)
    if rows is not None and m.shape[0] != rows:
        raise ShapeError("matrix has wrong row count", m.shape, (rows, cols))
    if cols is not None and m.shape[1] != cols:
        raise ShapeError("matrix has wrong column count", m.shape, (rows, cols))
    if not np.all(np.isfinite(m)):
        raise ContractViolation("matrix contains non-finite entries")
    return m


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product with shape checking."""
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ShapeError("matvec dimension mismatch", m.shape, v.shape)
    return m @ v


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(scores: np.ndarray) -> np.ndarray:
    """Stable softmax of a non-empty score vector (max-subtraction)."""
    s = as_vector(scores)
    if s.shape[0] == 0:
        raise ContractViolation("softmax of an empty score vector is undefined")
    e = np.exp(s - s.max())
    return e / e.sum()


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax of a (r, c) matrix with c >= 1."""
    s = as_matrix(scores)
    if s.shape[1] == 0:
        raise ContractViolation("softmax over zero columns is undefined")
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; zero-norm inputs yield 0.0.

    A zero vector carries no directional information, so its similarity
    to anything is defined as 0 rather than raising.
    """
    a = as_vector(a)
    b = as_vector(b)
    if a.shape[0] != b.shape[0]:
        raise ShapeError("cosine_sim dimension mismatch", a.shape, b.shape)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    # Clip to the legal range: rounding can push |dot| past ||a||*||b||.
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class AdamState:
    """First/second-moment accumulators shaped like the parameter list."""

    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    step: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: Sequence[np.ndarray], lr: float,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    if lr <= 0:
        raise ContractViolation(f"learning rate must be positive, got {lr}")
    zeros = tuple(np.zeros_like(p) for p in params)
    return AdamState(m=zeros, v=tuple(np.zeros_like(p) for p in params),
                     step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              state: AdamState) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update. Pure: returns new params and state."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("parameter/gradient/state count mismatch",
                         len(params), len(grads))
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError("parameter/gradient shape mismatch", p.shape, g.shape)
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_m.append(m)
        new_v.append(v)
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return new_p, replace(state, m=tuple(new_m), v=tuple(new_v), step=t)


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray,
                     h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector.

    The verification oracle for every analytic gradient in the package;
    exact up to 1e-8 on polynomials of degree <= 2 at h=1e-5.
    """
    if h <= 0:
        raise ContractViolation(f"step size must be positive, got {h}")
    x = as_vector(x)
    g = np.zeros_like(x)
    for i in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g
