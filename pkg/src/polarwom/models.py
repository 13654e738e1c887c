"""Channel/state models, capacity formulas and capacity oracles.

Covers the two binary rewriting models (a noisy WOM and a WOM with writing
noise), plain asymmetric channels expressed as degenerate-state models, the
closed-form capacity of the writing-noise WOM, an exhaustive grid oracle for
the informed-encoder (Gelfand-Pinsker) capacity, and the explicit degrading
channel that witnesses the writing-noise model's degraded structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .prob import (
    BinaryInputChannel,
    FinitePmf,
    JointBase,
    binary_entropy,
    star_convolve,
    verify_degraded,
    _xlog2x,
)


@dataclass(frozen=True)
class StateChannelSpec:
    """A DMC with a discrete memoryless state, input cost, and auxiliary maps.

    transition[x, s, y] = p(y | x, s) for binary input x.
    cost[x] = b(x); cost_budget is the normalized constraint B.
    aux, when set, holds the encoding functions: p_v_given_s[s] = P(V=1|S=s)
    and x_map[v, s] = x(v, s).
    """

    model_id: str
    state_pmf: FinitePmf
    transition: np.ndarray
    cost: np.ndarray
    cost_budget: float
    p_v_given_s: np.ndarray | None = None
    x_map: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=float)
        ns = len(self.state_pmf)
        if t.ndim != 3 or t.shape[0] != 2 or t.shape[1] != ns:
            raise ValueError("transition must have shape (2, |S|, |Y|)")
        for x in range(2):
            for s in range(ns):
                FinitePmf(t[x, s])
        t.setflags(write=False)
        object.__setattr__(self, "transition", t)
        c = np.asarray(self.cost, dtype=float)
        if c.shape != (2,):
            raise ValueError("cost must give b(x) for x in {0, 1}")
        c.setflags(write=False)
        object.__setattr__(self, "cost", c)
        if self.cost_budget < 0:
            raise ValueError("cost budget must be nonnegative")
        if self.p_v_given_s is not None:
            p = np.asarray(self.p_v_given_s, dtype=float)
            if p.shape != (ns,) or np.any((p < 0) | (p > 1)):
                raise ValueError("p_v_given_s must give P(V=1|s) per state")
            p.setflags(write=False)
            object.__setattr__(self, "p_v_given_s", p)
        if self.x_map is not None:
            xm = np.asarray(self.x_map, dtype=np.uint8)
            if xm.shape != (2, ns) or np.any(xm > 1):
                raise ValueError("x_map must be a binary (2, |S|) table")
            xm.setflags(write=False)
            object.__setattr__(self, "x_map", xm)

    @property
    def has_aux(self) -> bool:
        return self.p_v_given_s is not None and self.x_map is not None

    @property
    def n_states(self) -> int:
        return len(self.state_pmf)

    @property
    def n_outputs(self) -> int:
        return self.transition.shape[2]

    def with_aux(self, p_v_given_s, x_map) -> "StateChannelSpec":
        return StateChannelSpec(
            model_id=self.model_id,
            state_pmf=self.state_pmf,
            transition=self.transition,
            cost=self.cost,
            cost_budget=self.cost_budget,
            p_v_given_s=np.asarray(p_v_given_s, dtype=float),
            x_map=np.asarray(x_map, dtype=np.uint8),
            params=dict(self.params),
        )

    # joint structure used by the SC engine ---------------------------------

    def joint_vs(self) -> np.ndarray:
        """p(v, s) = p(s) p(v|s), shape (2, |S|)."""
        self._require_aux()
        ps = self.state_pmf.probs
        pv1 = self.p_v_given_s
        return np.stack([ps * (1.0 - pv1), ps * pv1])

    def encoder_base(self) -> JointBase:
        """Joint of (v, observed state) seen by the encoder-side SC pass."""
        return JointBase(self.joint_vs())

    def decoder_base(self) -> JointBase:
        """Joint p(v, y) = sum_s p(s) p(v|s) p(y | x(v,s), s) seen by the decoder."""
        self._require_aux()
        vs = self.joint_vs()  # (2, |S|)
        w = np.zeros((2, self.n_outputs))
        for v in range(2):
            for s in range(self.n_states):
                w[v] += vs[v, s] * self.transition[self.x_map[v, s], s]
        return JointBase(w)

    def channel_given_v(self) -> BinaryInputChannel:
        """p(y|v) under the auxiliary encoding."""
        w = self.decoder_base().weights
        return BinaryInputChannel(w / w.sum(axis=1, keepdims=True))

    def state_given_v(self) -> BinaryInputChannel:
        """p(s|v) under the auxiliary encoding."""
        w = self.joint_vs()
        return BinaryInputChannel(w / w.sum(axis=1, keepdims=True))

    def _require_aux(self):
        if not self.has_aux:
            raise ValueError(
                f"model '{self.model_id}' has no auxiliary functions set; "
                "supply p(v|s) and x(v,s) (e.g. from gp_capacity_grid)"
            )


def make_example1(alpha0: float, alpha1: float, beta: float) -> StateChannelSpec:
    """Noisy WOM: state-1 cells behave as if 1 was written, regardless of input.

    p(1|x,s) = alpha0 for (x,s)=(0,0) and 1-alpha1 otherwise; cost b(x) = x.
    No closed-form optimal auxiliary is known; obtain one from
    gp_capacity_grid and attach it with with_aux().
    """
    for name, p in (("alpha0", alpha0), ("alpha1", alpha1), ("beta", beta)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name}={p} outside [0, 1]")
    t = np.empty((2, 2, 2))
    p1 = np.array([[alpha0, 1.0 - alpha1], [1.0 - alpha1, 1.0 - alpha1]])
    t[:, :, 1] = p1
    t[:, :, 0] = 1.0 - p1
    return StateChannelSpec(
        model_id="example1",
        state_pmf=FinitePmf(np.array([1.0 - beta, beta])),
        transition=t,
        cost=np.array([0.0, 1.0]),
        cost_budget=np.inf,
        params={"alpha0": alpha0, "alpha1": alpha1, "beta": beta},
    )


def _example2_epsilon(alpha: float, beta: float, B: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha={alpha} outside [0, 1]")
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta={beta} must be in [0, 1)")
    eps = B / (1.0 - beta)
    if not 0.0 <= eps <= 0.5:
        # the capacity argument relies on eps <= 1/2
        raise ValueError(f"epsilon = B/(1-beta) = {eps} must be in [0, 1/2]")
    return eps


def make_example2(alpha: float, beta: float, B: float) -> StateChannelSpec:
    """WOM with writing noise: output stuck at 1 when s=1, BSC(alpha) when s=0.

    Includes the capacity-achieving auxiliary: x(v,s) = v AND NOT s,
    P(V=1|S=0) = eps, P(V=1|S=1) = eps(1-alpha)/(eps*alpha), eps = B/(1-beta).
    """
    eps = _example2_epsilon(alpha, beta, B)
    t = np.empty((2, 2, 2))
    p1 = np.array([[alpha, 1.0], [1.0 - alpha, 1.0]])  # p(y=1|x,s)
    t[:, :, 1] = p1
    t[:, :, 0] = 1.0 - p1
    ea = star_convolve(eps, alpha)
    pv1_s1 = eps * (1.0 - alpha) / ea if ea > 0 else 0.0
    return StateChannelSpec(
        model_id="example2",
        state_pmf=FinitePmf(np.array([1.0 - beta, beta])),
        transition=t,
        cost=np.array([0.0, 1.0]),
        cost_budget=B,
        p_v_given_s=np.array([eps, pv1_s1]),
        x_map=np.array([[0, 0], [1, 0]], dtype=np.uint8),  # x(v,s) = v & ~s
        params={"alpha": alpha, "beta": beta, "B": B},
    )


def make_asymmetric(p10: float, p01: float, p_x1: float | None = None) -> StateChannelSpec:
    """Binary asymmetric channel p(1|0)=p10, p(0|1)=p01 as a degenerate-state model.

    p_x1 is the input distribution P(X=1); when omitted it is taken from the
    capacity oracle.  No cost constraint.
    """
    for name, p in (("p10", p10), ("p01", p01)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name}={p} outside [0, 1]")
    t = np.empty((2, 1, 2))
    t[0, 0] = [1.0 - p10, p10]
    t[1, 0] = [p01, 1.0 - p01]
    spec = StateChannelSpec(
        model_id="basym",
        state_pmf=FinitePmf(np.array([1.0])),
        transition=t,
        cost=np.zeros(2),
        cost_budget=np.inf,
        p_v_given_s=None if p_x1 is None else np.array([p_x1]),
        x_map=np.array([[0], [1]], dtype=np.uint8),
        params={"p10": p10, "p01": p01},
    )
    if p_x1 is None:
        _, aux = gp_capacity_grid(spec)
        spec = spec.with_aux(aux["p_v_given_s"], aux["x_map"])
    return spec


def make_bsc(alpha: float, p_x1: float = 0.5) -> StateChannelSpec:
    """Binary symmetric channel with crossover alpha, degenerate state."""
    base = make_asymmetric(alpha, alpha, p_x1)
    return StateChannelSpec(
        model_id="bsc",
        state_pmf=base.state_pmf,
        transition=base.transition,
        cost=base.cost,
        cost_budget=base.cost_budget,
        p_v_given_s=base.p_v_given_s,
        x_map=base.x_map,
        params={"alpha": alpha},
    )


def capacity_example2(alpha: float, beta: float, B: float) -> float:
    """Closed-form capacity (1-beta)[h(eps*alpha) - h(alpha)], eps = B/(1-beta)."""
    eps = _example2_epsilon(alpha, beta, B)
    return (1.0 - beta) * (binary_entropy(star_convolve(eps, alpha)) - binary_entropy(alpha))


def degradation_witness(alpha: float, beta: float, B: float) -> BinaryInputChannel:
    """The explicit degrading channel W: Y -> S for the writing-noise WOM.

    W(1|1) = beta / ((eps*alpha)(1-beta) + beta), W(1|0) = 0; composing it
    after p(y|v) reproduces p(s|v) exactly.
    """
    eps = _example2_epsilon(alpha, beta, B)
    denom = star_convolve(eps, alpha) * (1.0 - beta) + beta
    w11 = beta / denom if denom > 0 else 0.0
    return BinaryInputChannel(np.array([[1.0, 0.0], [1.0 - w11, w11]]))


# Gelfand-Pinsker capacity oracle -------------------------------------------


def _objective(spec: StateChannelSpec, pv1, x_map):
    """I(V;Y) - I(V;S) = H(V|S) - H(V|Y) plus E[b(X)], vectorized over pv1 grids.

    pv1: array of shape (..., |S|) of P(V=1|s) values.
    """
    ps = spec.state_pmf.probs
    pv1 = np.asarray(pv1, dtype=float)
    h_v_given_s = np.sum(ps * binary_entropy(pv1), axis=-1)
    # joint p(v, s): shape (..., 2, |S|)
    pvs = np.stack([ps * (1.0 - pv1), ps * pv1], axis=-2)
    # p(v, y) = sum_s p(v,s) p(y | x(v,s), s): shape (..., 2, |Y|)
    ny = spec.n_outputs
    pvy = np.zeros(pvs.shape[:-1] + (ny,))
    cost = np.zeros(pvs.shape[:-2])
    for v in range(2):
        for s in range(spec.n_states):
            pvy[..., v, :] += pvs[..., v, s, None] * spec.transition[x_map[v, s], s]
            cost = cost + pvs[..., v, s] * spec.cost[x_map[v, s]]
    py = pvy.sum(axis=-2)
    h_vy = -np.sum(_xlog2x(pvy), axis=(-2, -1))
    h_y = -np.sum(_xlog2x(py), axis=-1)
    h_v_given_y = h_vy - h_y
    return h_v_given_s - h_v_given_y, cost


def _all_x_maps(n_states: int):
    n_entries = 2 * n_states
    for code in range(1 << n_entries):
        bits = (code >> np.arange(n_entries)) & 1
        yield bits.reshape(2, n_states).astype(np.uint8)


def _grid_axes(lo, hi, step, n_states):
    axes = [np.arange(lo[s], hi[s] + step / 2, step) for s in range(n_states)]
    axes = [np.clip(a, 0.0, 1.0) for a in axes]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, n_states)


def gp_capacity_grid(spec: StateChannelSpec, grid_resolution: float = 1e-3):
    """Exhaustive-search capacity oracle: max over p(v|s) grids and all
    deterministic x(v,s) maps of I(V;Y) - I(V;S) under the cost budget.

    Returns (capacity, aux) where aux holds the maximizing p_v_given_s and
    x_map.  A coarse scan is refined locally around the argmax down to
    grid_resolution and then to a 100x finer step, so boundary optima (cost
    constraints active) are located accurately.  Among ties the canonical
    representative with P(V=1|s=0) <= 1/2 is returned (the v -> 1-v
    relabeling always yields an equivalent maximizer).
    """
    ns = spec.n_states
    best = (-np.inf, None, None)
    for x_map in _all_x_maps(ns):
        pts = _grid_axes([0.0] * ns, [1.0] * ns, 0.01, ns)
        val, cost = _objective(spec, pts, x_map)
        val = np.where(cost <= spec.cost_budget + 1e-12, val, -np.inf)
        k = int(np.argmax(val))
        if not np.isfinite(val[k]):
            continue
        center = pts[k]
        step = 0.01
        target = max(grid_resolution, 1e-12)
        while step > target / 10:
            nxt = max(step / 10, target / 10)
            pts = _grid_axes(center - 2 * step, center + 2 * step, nxt, ns)
            val, cost = _objective(spec, pts, x_map)
            val = np.where(cost <= spec.cost_budget + 1e-12, val, -np.inf)
            k = int(np.argmax(val))
            center = pts[k]
            step = nxt
        if val[k] > best[0] + 1e-12:
            best = (float(val[k]), center.copy(), x_map)
        elif abs(val[k] - best[0]) <= 1e-12 and best[1] is not None:
            if _prefer_aux(center, best[1]):
                best = (float(val[k]), center.copy(), x_map)
    if best[1] is None:
        raise ValueError("no cost-feasible point found")
    cap, pv1, x_map = best
    # canonical relabeling: keep P(V=1|s=0) on the low side
    if pv1[0] > 0.5 + 1e-12:
        pv1 = 1.0 - pv1
        x_map = x_map[::-1].copy()
    return max(cap, 0.0), {"p_v_given_s": pv1, "x_map": x_map}


def _prefer_aux(cand, incumbent) -> bool:
    """Tie-break among equal-capacity maximizers: smaller P(V=1|s=0), then
    larger later entries (picks the canonical labeling deterministically)."""
    c = cand if cand[0] <= 0.5 else 1.0 - cand
    i = incumbent if incumbent[0] <= 0.5 else 1.0 - incumbent
    key_c = (round(c[0], 9),) + tuple(-round(x, 9) for x in c[1:])
    key_i = (round(i[0], 9),) + tuple(-round(x, 9) for x in i[1:])
    return key_c < key_i


def simulate_channel(spec: StateChannelSpec, x, s, rng: np.random.Generator) -> np.ndarray:
    """Sample y_i ~ p(.|x_i, s_i) i.i.d.; x and s may be batched (..., n)."""
    x = np.asarray(x, dtype=np.intp)
    s = np.asarray(s, dtype=np.intp)
    if x.shape != s.shape:
        raise ValueError("input and state vectors must have equal shape")
    cdf = np.cumsum(spec.transition, axis=2)  # (2, |S|, |Y|)
    r = rng.random(x.shape)
    y = (r[..., None] >= cdf[x, s]).sum(axis=-1)
    return y.astype(np.int64)


def sample_state(spec: StateChannelSpec, shape, rng: np.random.Generator) -> np.ndarray:
    """Draw i.i.d. state symbols from p(s)."""
    cdf = np.cumsum(spec.state_pmf.probs)
    r = rng.random(shape)
    return (r[..., None] >= cdf).sum(axis=-1).astype(np.int64)


def sample_v_given_s(spec: StateChannelSpec, s, rng: np.random.Generator) -> np.ndarray:
    """Draw V ~ p(v|s) elementwise."""
    spec._require_aux()
    p1 = spec.p_v_given_s[np.asarray(s, dtype=np.intp)]
    return (rng.random(p1.shape) < p1).astype(np.uint8)


# model registry -------------------------------------------------------------

_REGISTRY = {
    "example1": (make_example1, ("alpha0", "alpha1", "beta")),
    "example2": (make_example2, ("alpha", "beta", "B")),
    "basym": (make_asymmetric, ("p10", "p01")),
    "bsc": (make_bsc, ("alpha",)),
}


def make_model(model_id: str, params: dict) -> StateChannelSpec:
    """Build a registered model from an id string and a parameter map."""
    if model_id not in _REGISTRY:
        raise ValueError(f"unknown model id '{model_id}'; known: {sorted(_REGISTRY)}")
    fn, required = _REGISTRY[model_id]
    missing = [k for k in required if k not in params]
    if missing:
        raise ValueError(f"model '{model_id}' missing parameters {missing}")
    return fn(**params)
