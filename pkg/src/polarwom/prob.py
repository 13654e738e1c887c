"""Exact finite-probability primitives.

Binary pmfs, finite pmfs, binary-input channels and joint (bit, observation)
distributions, together with the entropy / Bhattacharyya functionals and the
stochastic-degradation check that the rest of the library is built on.

All probabilities are 64-bit floats.  Pmf validation uses a 1e-12 tolerance,
and 0*log(0) is taken to be 0 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PMF_TOL = 1e-12


def _xlog2x(p: np.ndarray) -> np.ndarray:
    # 0*log2(0) := 0
    out = np.zeros_like(p, dtype=float)
    mask = p > 0
    out[mask] = p[mask] * np.log2(p[mask])
    return out


def binary_entropy(p):
    """h(p) = -p*log2(p) - (1-p)*log2(1-p) in bits; accepts scalars or arrays."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("binary_entropy argument must lie in [0, 1]")
    h = -(_xlog2x(p) + _xlog2x(1.0 - p))
    return float(h) if h.ndim == 0 else h


def star_convolve(e, a):
    """Binary convolution e*a = e(1-a) + (1-e)a."""
    e = np.asarray(e, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.any((e < 0) | (e > 1)) or np.any((a < 0) | (a > 1)):
        raise ValueError("star_convolve arguments must lie in [0, 1]")
    r = e * (1.0 - a) + (1.0 - e) * a
    return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class BinaryPmf:
    """Distribution of a single bit, stored as P(1)."""

    p1: float

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise ValueError(f"p1={self.p1} outside [0, 1]")

    @property
    def p0(self) -> float:
        return 1.0 - self.p1

    def as_array(self) -> np.ndarray:
        return np.array([self.p0, self.p1])


@dataclass(frozen=True)
class FinitePmf:
    """Pmf over a finite alphabet {0, ..., K-1}."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-D vector")
        if np.any(probs < -PMF_TOL):
            raise ValueError("pmf entries must be nonnegative")
        if abs(probs.sum() - 1.0) > PMF_TOL:
            raise ValueError(f"pmf entries sum to {probs.sum()}, not 1")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class BinaryInputChannel:
    """DMC with binary input: rows[x] is the output pmf given input x."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] != 2:
            raise ValueError("rows must have shape (2, |output alphabet|)")
        for x in range(2):
            FinitePmf(rows[x])  # validates each row
        rows = np.clip(rows, 0.0, None)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n_outputs(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class JointBase:
    """Joint pmf of (bit V, finite observation O); weights[v, o] = P(V=v, O=o)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != 2:
            raise ValueError("weights must have shape (2, |observation alphabet|)")
        if np.any(w < -PMF_TOL):
            raise ValueError("joint weights must be nonnegative")
        if abs(w.sum() - 1.0) > PMF_TOL:
            raise ValueError(f"joint weights sum to {w.sum()}, not 1")
        w = np.clip(w, 0.0, None)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_observations(self) -> int:
        return self.weights.shape[1]


def _joint_weights(j) -> np.ndarray:
    if isinstance(j, JointBase):
        return j.weights
    w = np.asarray(j, dtype=float)
    if w.ndim != 2 or w.shape[0] != 2:
        raise ValueError("expected a JointBase or a (2, K) array")
    return w


def bhattacharyya(j) -> float:
    """Z(V|O) = 2 * sum_o sqrt(P(0,o) P(1,o)), clamped into [0, 1]."""
    w = _joint_weights(j)
    z = 2.0 * np.sum(np.sqrt(w[0] * w[1]))
    return float(min(max(z, 0.0), 1.0))


def conditional_entropy(j) -> float:
    """H(V|O) in bits for a joint (bit, observation) pmf."""
    w = _joint_weights(j)
    p_o = w.sum(axis=0)
    # H(V|O) = H(V,O) - H(O)
    h_vo = -np.sum(_xlog2x(w))
    h_o = -np.sum(_xlog2x(p_o))
    return float(max(h_vo - h_o, 0.0))


def verify_degraded(w2: BinaryInputChannel, w1: BinaryInputChannel, w) -> float:
    """Max violation of W1(y1|x) = sum_y2 W2(y2|x) W(y1|y2).

    `w` is a stochastic matrix of shape (|Y2|, |Y1|); 0 means `w` is an exact
    degradation witness.  Raises on dimension mismatch or a non-stochastic w.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise ValueError("degrading channel must be a 2-D matrix")
    if w.shape[0] != w2.n_outputs or w.shape[1] != w1.n_outputs:
        raise ValueError(
            f"degrading channel shape {w.shape} incompatible with "
            f"({w2.n_outputs} -> {w1.n_outputs})"
        )
    if np.any(w < -PMF_TOL) or np.any(np.abs(w.sum(axis=1) - 1.0) > PMF_TOL):
        raise ValueError("degrading channel rows must be valid pmfs")
    composed = w2.rows @ w
    return float(np.max(np.abs(w1.rows - composed)))
