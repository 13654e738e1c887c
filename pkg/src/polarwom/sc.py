"""Successive-cancellation engine.

Computes exact conditionals p(u_i | u_[i-1], o_[n]) for a model where the
bits v_1..v_n are independent with per-position joint weights p(v_i, o_i),
the observations o are memoryless given v, and u = v * G_n.  One generic
pass serves encoder-side conditioning (observation = state) and decoder-side
conditioning (observation = channel output) alike.

The pass is batched over blocks and runs in a single compiled kernel; per
recursion level every (v, o) leaf weight pair is renormalized, which keeps
conditionals exact (they are invariant under per-leaf scaling) while
avoiding the underflow of length-n weight products.

A brute-force oracle (explicit summation over all 2^n bit vectors) is
provided for n <= 16.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .prob import JointBase
from .transform import polar_transform

# per-index pass rules
RANDOM_ROUND = 0
FIXED = 1
ARGMAX = 2


class DecodeFailure(Exception):
    """Observation has probability zero under the model (unnormalizable pass)."""


@dataclass(frozen=True)
class ScContext:
    """Per-position joint weights of (v_i, o_i), all positions over one alphabet.

    bases has shape (n, 2, |O|); bases[i, v, o] = P(V_i=v, O_i=o).
    """

    n: int
    bases: np.ndarray

    def __post_init__(self):
        if self.n < 1 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"block length {self.n} is not a power of 2")
        bases = np.ascontiguousarray(self.bases, dtype=float)
        if bases.shape[:2] != (self.n, 2) or bases.ndim != 3:
            raise ValueError("bases must have shape (n, 2, |O|)")
        for i in range(self.n):
            JointBase(bases[i])  # validates each position
        bases.setflags(write=False)
        object.__setattr__(self, "bases", bases)

    @classmethod
    def iid(cls, base, n: int) -> "ScContext":
        """All n positions share one JointBase (the i.i.d. case)."""
        w = base.weights if isinstance(base, JointBase) else np.asarray(base, float)
        return cls(n=n, bases=np.broadcast_to(w, (n,) + w.shape).copy())

    @property
    def n_observations(self) -> int:
        return self.bases.shape[2]


# kernel states for the explicit-stack recursion
_ENTER, _MID, _EXIT = 0, 1, 2


@njit(cache=True)
def _pass_kernel(bases, obs, mode, fixed, rand_u, p_out, u_out, v_out, failed):
    """One batched SC pass.

    bases:  (n, 2, A) float64
    obs:    (B, n) int64 observation symbols
    mode:   (n,) uint8 per-index rule (RANDOM_ROUND / FIXED / ARGMAX)
    fixed:  (B, n) uint8 bit values used where mode == FIXED
    rand_u: (B, n) float64 uniforms consumed where mode == RANDOM_ROUND
    p_out:  (B, n) float64, filled with p(U_i=1 | decisions, obs)
    u_out, v_out: (B, n) uint8 results, v = u * G_n
    failed: (B,) bool, set where some conditional was unnormalizable
    """
    B, n = obs.shape
    m = 0
    while (1 << m) < n:
        m += 1

    # depth-d work segment lives at offset woff[d], length n >> d
    woff = np.empty(m + 1, dtype=np.int64)
    acc = 0
    for d in range(m + 1):
        woff[d] = acc
        acc += n >> d
    wbuf = np.empty((B, acc, 2))   # leaf weights of the active node per depth
    vbuf = np.empty((B, acc), dtype=np.uint8)   # v-vector output per depth
    vsave = np.empty((B, acc), dtype=np.uint8)  # first child's v, kept across second child

    # initial leaf weights from the observations
    for b in range(B):
        for j in range(n):
            wbuf[b, j, 0] = bases[j, 0, obs[b, j]]
            wbuf[b, j, 1] = bases[j, 1, obs[b, j]]

    # DFS over the recursion tree: node = (depth, u-offset, state)
    stack_d = np.empty(2 * (m + 2), dtype=np.int64)
    stack_off = np.empty(2 * (m + 2), dtype=np.int64)
    stack_st = np.empty(2 * (m + 2), dtype=np.int64)
    top = 0
    stack_d[0], stack_off[0], stack_st[0] = 0, 0, _ENTER

    while top >= 0:
        d = stack_d[top]
        off = stack_off[top]
        st = stack_st[top]
        top -= 1
        L = n >> d
        base_w = woff[d]

        if st == _ENTER:
            if L == 1:
                for b in range(B):
                    w0 = wbuf[b, base_w, 0]
                    w1 = wbuf[b, base_w, 1]
                    tot = w0 + w1
                    if tot <= 0.0:
                        failed[b] = True
                        p1 = 0.5
                    else:
                        p1 = w1 / tot
                    p_out[b, off] = p1
                    md = mode[off]
                    if md == 0:      # RANDOM_ROUND
                        bit = 1 if rand_u[b, off] < p1 else 0
                    elif md == 1:    # FIXED
                        bit = fixed[b, off]
                        # forcing a probability-zero value is a model
                        # contradiction, not a legal encoding
                        if (bit == 1 and w1 <= 0.0) or (bit == 0 and w0 <= 0.0):
                            failed[b] = True
                    else:            # ARGMAX, ties (p1 == 0.5) break to 0
                        bit = 1 if p1 > 0.5 else 0
                    u_out[b, off] = bit
                    vbuf[b, base_w] = bit
                continue
            h = L >> 1
            child_w = woff[d + 1]
            # check combination: v'_j = v_{a,j} xor v_{b,j}
            for b in range(B):
                for j in range(h):
                    a0 = wbuf[b, base_w + j, 0]
                    a1 = wbuf[b, base_w + j, 1]
                    b0 = wbuf[b, base_w + h + j, 0]
                    b1 = wbuf[b, base_w + h + j, 1]
                    c0 = a0 * b0 + a1 * b1
                    c1 = a1 * b0 + a0 * b1
                    s = c0 + c1
                    if s <= 0.0:
                        failed[b] = True
                        c0 = 0.5
                        c1 = 0.5
                        s = 1.0
                    wbuf[b, child_w + j, 0] = c0 / s
                    wbuf[b, child_w + j, 1] = c1 / s
            top += 1
            stack_d[top], stack_off[top], stack_st[top] = d, off, _MID
            top += 1
            stack_d[top], stack_off[top], stack_st[top] = d + 1, off, _ENTER

        elif st == _MID:
            h = L >> 1
            child_w = woff[d + 1]
            # first child's v (= v_a xor v_b) is in vbuf at depth d+1; save it,
            # then build the plus combination w''(c) = w_a(v' xor c) * w_b(c)
            for b in range(B):
                for j in range(h):
                    vp = vbuf[b, child_w + j]
                    vsave[b, base_w + j] = vp
                    if vp == 0:
                        a0 = wbuf[b, base_w + j, 0]
                        a1 = wbuf[b, base_w + j, 1]
                    else:
                        a0 = wbuf[b, base_w + j, 1]
                        a1 = wbuf[b, base_w + j, 0]
                    c0 = a0 * wbuf[b, base_w + h + j, 0]
                    c1 = a1 * wbuf[b, base_w + h + j, 1]
                    s = c0 + c1
                    if s <= 0.0:
                        failed[b] = True
                        c0 = 0.5
                        c1 = 0.5
                        s = 1.0
                    wbuf[b, child_w + j, 0] = c0 / s
                    wbuf[b, child_w + j, 1] = c1 / s
            top += 1
            stack_d[top], stack_off[top], stack_st[top] = d, off, _EXIT
            top += 1
            stack_d[top], stack_off[top], stack_st[top] = d + 1, off + h, _ENTER

        else:  # _EXIT: second child's v (= v_b) is in vbuf at depth d+1
            h = L >> 1
            child_w = woff[d + 1]
            for b in range(B):
                for j in range(h):
                    vpp = vbuf[b, child_w + j]
                    vbuf[b, base_w + j] = vsave[b, base_w + j] ^ vpp
                    vbuf[b, base_w + h + j] = vpp

    for b in range(B):
        for j in range(n):
            v_out[b, j] = vbuf[b, j]


@dataclass
class ScPassResult:
    u: np.ndarray        # (B, n) uint8
    v: np.ndarray        # (B, n) uint8, v = u * G_n
    p1: np.ndarray       # (B, n) conditional P(U_i = 1 | past, obs)
    failed: np.ndarray   # (B,) bool


def _as_obs(ctx: ScContext, obs) -> tuple[np.ndarray, bool]:
    o = np.asarray(obs)
    single = o.ndim == 1
    if single:
        o = o[None, :]
    if o.shape[1] != ctx.n:
        raise ValueError(f"observation length {o.shape[1]} != n={ctx.n}")
    if np.any(o < 0) or np.any(o >= ctx.n_observations):
        raise ValueError("observation symbols outside alphabet bounds")
    return np.ascontiguousarray(o, dtype=np.int64), single


def sc_pass(
    ctx: ScContext,
    obs,
    mode,
    fixed=None,
    rng: np.random.Generator | None = None,
    raise_on_failure: bool = False,
) -> ScPassResult:
    """Run one left-to-right SC pass under a per-index policy.

    mode is a length-n vector over {RANDOM_ROUND, FIXED, ARGMAX}; fixed
    supplies the bit values at FIXED indices ((n,) or (B, n)).  obs may be a
    single observation vector or a (B, n) batch.
    """
    o, single = _as_obs(ctx, obs)
    B, n = o.shape
    mode = np.ascontiguousarray(mode, dtype=np.uint8)
    if mode.shape != (n,):
        raise ValueError("mode must be a length-n vector")
    if np.any(mode > 2):
        raise ValueError("unknown pass rule in mode vector")
    if fixed is None:
        if np.any(mode == FIXED):
            raise ValueError("mode uses FIXED but no fixed bits were given")
        fx = np.zeros((B, n), dtype=np.uint8)
    else:
        fx = np.asarray(fixed, dtype=np.uint8)
        if fx.ndim == 1:
            fx = np.broadcast_to(fx, (B, n))
        if fx.shape != (B, n):
            raise ValueError("fixed bits must have shape (n,) or (B, n)")
        fx = np.ascontiguousarray(fx)
    if np.any(mode == RANDOM_ROUND):
        if rng is None:
            raise ValueError("mode uses RANDOM_ROUND but no rng was given")
        ru = rng.random((B, n))
    else:
        ru = np.zeros((B, n))

    p1 = np.empty((B, n))
    u = np.empty((B, n), dtype=np.uint8)
    v = np.empty((B, n), dtype=np.uint8)
    failed = np.zeros(B, dtype=np.bool_)
    _pass_kernel(ctx.bases, o, mode, fx, ru, p1, u, v, failed)
    if raise_on_failure and failed.any():
        raise DecodeFailure(
            f"{int(failed.sum())} block(s) had observations inconsistent with the model"
        )
    if single:
        return ScPassResult(u=u[0], v=v[0], p1=p1[0], failed=failed)
    return ScPassResult(u=u, v=v, p1=p1, failed=failed)


def sc_conditional(ctx: ScContext, obs, prefix) -> float:
    """Exact P(U_i = 1 | u_[i-1] = prefix, o_[n] = obs) with i = len(prefix)+1."""
    prefix = np.asarray(prefix, dtype=np.uint8).reshape(-1)
    i = prefix.size
    if i >= ctx.n:
        raise ValueError(f"prefix length {i} must be < n={ctx.n}")
    o = np.asarray(obs)
    if o.ndim != 1:
        raise ValueError("sc_conditional takes a single observation vector")
    mode = np.full(ctx.n, ARGMAX, dtype=np.uint8)
    mode[:i] = FIXED
    fx = np.zeros(ctx.n, dtype=np.uint8)
    fx[:i] = prefix
    res = sc_pass(ctx, o, mode, fixed=fx)
    if res.failed.any():
        raise DecodeFailure("observation inconsistent with the model")
    return float(res.p1[i])


_BRUTE_MAX_N = 16


def sc_bruteforce(ctx: ScContext, obs, prefix) -> float:
    """The same conditional by explicit summation over all 2^n bit vectors."""
    if ctx.n > _BRUTE_MAX_N:
        raise ValueError(f"brute force limited to n <= {_BRUTE_MAX_N}")
    prefix = np.asarray(prefix, dtype=np.uint8).reshape(-1)
    i = prefix.size
    if i >= ctx.n:
        raise ValueError(f"prefix length {i} must be < n={ctx.n}")
    o, _ = _as_obs(ctx, obs)
    o = o[0]
    n = ctx.n
    vs = ((np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.uint8)
    w = np.prod(ctx.bases[np.arange(n)[None, :], vs, o[None, :]], axis=1)
    us = polar_transform(vs)
    consistent = np.all(us[:, :i] == prefix[None, :], axis=1)
    denom = w[consistent].sum()
    if denom <= 0.0:
        raise DecodeFailure("observation inconsistent with the model")
    num = w[consistent & (us[:, i] == 1)].sum()
    return float(num / denom)
