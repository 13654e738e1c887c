"""End-to-end encoders and decoders.

Three schemes share one SC pass:

* asymmetric point-to-point coding (a degenerate single-valued state),
* multicoding for informed-encoder channels with a degraded structure,
* chained multicoding, which relays each block's side bits through the
  reliable region of the next block and decodes backwards.

All entry points are batched over blocks; 1-D inputs get 1-D outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import StateChannelSpec, sample_state, simulate_channel
from .profiles import CodeProfile
from .sc import ARGMAX, FIXED, RANDOM_ROUND, ScContext, sc_pass

__all__ = [
    "SideChannelPayload",
    "ChainProfile",
    "BlockOutcome",
    "c1_encode",
    "c1_decode",
    "c2_encode",
    "c2_decode",
    "c3_encode",
    "c3_decode",
    "effective_rate",
    "simulate_blocks",
    "degenerate_state_vector",
]


@dataclass(frozen=True)
class SideChannelPayload:
    """Bits at the side indices, transferred out of band (losslessly)."""

    bits: np.ndarray
    block_index: int = 0


@dataclass(frozen=True)
class ChainProfile:
    """k linked blocks sharing one code profile.

    Block 0's relay source is the all-zeros vector, so encoder and decoder
    agree without extra shared state.
    """

    k: int
    profile: CodeProfile

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("chain length k must be >= 1")
        if not self.profile.chainable():
            raise ValueError(
                f"profile not chainable: |relay|={self.profile.relay_set.size} "
                f"!= |side|={self.profile.side.size}"
            )

    @property
    def message_bits_per_block(self) -> int:
        return self.profile.message.size - self.profile.relay_set.size


@dataclass(frozen=True)
class BlockOutcome:
    """Record of one encode/transmit/decode trial."""

    message: np.ndarray
    state: np.ndarray
    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    y: np.ndarray
    estimate: np.ndarray
    cost: float
    success: bool
    side_payload: SideChannelPayload
    decode_failed: bool = False


def _as_batch(arr, width, what, dtype=np.uint8):
    a = np.asarray(arr, dtype=dtype)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != width:
        raise ValueError(f"{what} must have shape ({width},) or (B, {width})")
    return a, single


def _encode_mode(profile: CodeProfile, relay_fixed: bool) -> np.ndarray:
    mode = np.empty(profile.n, dtype=np.uint8)
    mode[profile.random_low] = RANDOM_ROUND
    mode[profile.side] = RANDOM_ROUND
    mode[profile.message] = FIXED
    mode[profile.frozen] = FIXED
    del relay_fixed  # relay indices are message indices, already FIXED
    return mode


def _decode_mode(profile: CodeProfile) -> np.ndarray:
    mode = np.empty(profile.n, dtype=np.uint8)
    mode[profile.message] = ARGMAX
    mode[profile.random_low] = ARGMAX
    mode[profile.side] = FIXED
    mode[profile.frozen] = FIXED
    return mode


def c2_encode(profile: CodeProfile, spec: StateChannelSpec, message, s, rng,
              relay_bits=None):
    """Informed-encoder block encode.

    Randomized rounding on the high-source-entropy complement, message bits on
    the message set (relay positions taken from relay_bits when chaining),
    frozen bits elsewhere; then v = u * G_n and x_i = x(v_i, s_i).

    Returns (x, side_payload, outcome_arrays) where outcome_arrays is a dict
    holding u, v and per-block cost; batched when inputs are batched.
    """
    spec._require_aux()
    s, single = _as_batch(s, profile.n, "state vector", dtype=np.int64)
    B = s.shape[0]
    n_relay = profile.relay_set.size if relay_bits is not None else 0
    n_msg = profile.message.size - n_relay
    message, msingle = _as_batch(message, n_msg, "message")
    if message.shape[0] != B or msingle != single:
        raise ValueError("message and state batch shapes disagree")

    fixed = np.zeros((B, profile.n), dtype=np.uint8)
    fixed[:, profile.frozen] = profile.frozen_bits[None, :]
    if relay_bits is None:
        fixed[:, profile.message] = message
    else:
        rb, _ = _as_batch(relay_bits, profile.relay_set.size, "relay bits")
        plain = np.setdiff1d(profile.message, profile.relay_set)
        fixed[:, plain] = message
        fixed[:, profile.relay_set] = rb

    ctx = ScContext.iid(spec.encoder_base(), profile.n)
    res = sc_pass(ctx, s, _encode_mode(profile, relay_bits is not None),
                  fixed=fixed, rng=rng)
    x = spec.x_map[res.v, s]
    cost = spec.cost[x].sum(axis=1)
    side = res.u[:, profile.side]
    if single:
        return x[0], SideChannelPayload(bits=side[0]), {
            "u": res.u[0], "v": res.v[0], "cost": float(cost[0])}
    return x, SideChannelPayload(bits=side), {"u": res.u, "v": res.v, "cost": cost}


def c2_decode(profile: CodeProfile, spec: StateChannelSpec, y, side):
    """Informed-encoder block decode: argmax over the reliable set, side
    payload and frozen bits fixed.  The decoder never sees the state.

    Returns (message_estimate, info) with info holding u and a per-block
    decode-failure flag (probability-zero observation under the model).
    """
    spec._require_aux()
    y, single = _as_batch(y, profile.n, "channel output", dtype=np.int64)
    B = y.shape[0]
    side_bits = side.bits if isinstance(side, SideChannelPayload) else side
    sb, _ = _as_batch(side_bits, profile.side.size, "side payload") \
        if profile.side.size else (np.zeros((B, 0), np.uint8), single)
    if sb.shape[0] not in (1, B):
        raise ValueError("side payload batch size mismatch")
    fixed = np.zeros((B, profile.n), dtype=np.uint8)
    fixed[:, profile.frozen] = profile.frozen_bits[None, :]
    if profile.side.size:
        fixed[:, profile.side] = sb
    ctx = ScContext.iid(spec.decoder_base(), profile.n)
    res = sc_pass(ctx, y, _decode_mode(profile), fixed=fixed)
    est = res.u[:, profile.message]
    if single:
        return est[0], {"u": res.u[0], "failed": bool(res.failed[0])}
    return est, {"u": res.u, "failed": res.failed}


def degenerate_state_vector(n: int, batch: int | None = None) -> np.ndarray:
    """The all-zeros state used when coding without encoder side information."""
    return np.zeros(n if batch is None else (batch, n), dtype=np.int64)


def c1_encode(profile: CodeProfile, spec: StateChannelSpec, message, rng):
    """Asymmetric point-to-point encode: the informed-encoder scheme under a
    degenerate single-valued state (bit-identical code path)."""
    msg = np.asarray(message)
    s = degenerate_state_vector(profile.n, None if msg.ndim == 1 else msg.shape[0])
    x, side, info = c2_encode(profile, spec, message, s, rng)
    return x, side, info


def c1_decode(profile: CodeProfile, spec: StateChannelSpec, y, side):
    """Asymmetric point-to-point decode (same code path as c2_decode)."""
    return c2_decode(profile, spec, y, side)


# chaining -------------------------------------------------------------------


def c3_encode(chain: ChainProfile, spec: StateChannelSpec, messages, states, rng):
    """Chained encode: block j's relay positions carry block j-1's side bits;
    the last block's side bits are exported as the final payload.

    messages: (k, msg) or (B, k, msg); states: (k, n) or (B, k, n).
    """
    profile = chain.profile
    k, n = chain.k, profile.n
    msg_len = chain.message_bits_per_block
    messages = np.asarray(messages, dtype=np.uint8)
    states = np.asarray(states, dtype=np.int64)
    single = messages.ndim == 2
    if single:
        messages = messages[None]
        states = states[None]
    B = messages.shape[0]
    if messages.shape != (B, k, msg_len):
        raise ValueError(f"messages must have shape (B, {k}, {msg_len})")
    if states.shape != (B, k, n):
        raise ValueError(f"states must have shape (B, {k}, {n})")

    xs = np.empty((B, k, n), dtype=np.uint8)
    costs = np.zeros(B)
    relay = np.zeros((B, profile.side.size), dtype=np.uint8)  # u_[n],0 = zeros
    for j in range(k):
        x, side, info = c2_encode(
            profile, spec, messages[:, j], states[:, j], rng, relay_bits=relay
        )
        xs[:, j] = x
        costs += np.asarray(info["cost"], dtype=float)
        relay = side.bits
    payload = SideChannelPayload(bits=relay, block_index=k - 1)
    if single:
        return xs[0], SideChannelPayload(bits=relay[0], block_index=k - 1), {"cost": float(costs[0])}
    return xs, payload, {"cost": costs}


def c3_decode(chain: ChainProfile, spec: StateChannelSpec, ys, final_side):
    """Chained decode, backwards: block k's side bits come from the payload,
    block j's from the decoded relay positions of block j+1."""
    profile = chain.profile
    k, n = chain.k, profile.n
    ys = np.asarray(ys, dtype=np.int64)
    single = ys.ndim == 2
    if single:
        ys = ys[None]
    B = ys.shape[0]
    if ys.shape != (B, k, n):
        raise ValueError(f"channel outputs must have shape (B, {k}, {n})")
    side_bits = final_side.bits if isinstance(final_side, SideChannelPayload) else final_side
    sb, _ = _as_batch(side_bits, profile.side.size, "final side payload") \
        if profile.side.size else (np.zeros((B, 0), np.uint8), True)
    if sb.shape[0] == 1 and B > 1:
        sb = np.broadcast_to(sb, (B, sb.shape[1]))

    plain = np.setdiff1d(profile.message, profile.relay_set)
    ests = np.empty((B, k, plain.size), dtype=np.uint8)
    failed = np.zeros(B, dtype=bool)
    side = sb
    for j in range(k - 1, -1, -1):
        est, info = c2_decode(profile, spec, ys[:, j], side)
        failed |= np.asarray(info["failed"], dtype=bool).reshape(-1)
        u = info["u"]
        # message positions of this block, relay values for the block below
        in_plain = np.isin(profile.message, plain)
        ests[:, j] = est[:, in_plain]
        side = u[:, profile.relay_set]
    if single:
        return ests[0], {"failed": bool(failed[0])}
    return ests, {"failed": failed}


def effective_rate(obj) -> float:
    """Message bits per cell, debiting the out-of-band side payload.

    For a single block: (|message| - |side|) / n.  For a k-chain each block
    gives up |relay| message positions and the final side payload is debited
    once: (k (|message| - |relay|) - |side|) / (k n).
    """
    if isinstance(obj, ChainProfile):
        p = obj.profile
        k = obj.k
        return (k * (p.message.size - p.relay_set.size) - p.side.size) / (k * p.n)
    p = obj
    return (p.message.size - p.side.size) / p.n


# simulation helper (used by the frozen-vector search and the CLI) -----------


@dataclass(frozen=True)
class SimStats:
    blocks: int
    errors: int
    fer: float
    mean_cost: float
    decode_failures: int
    wom_violations: int


def simulate_blocks(
    profile: CodeProfile,
    spec: StateChannelSpec,
    blocks: int,
    rng: np.random.Generator,
    k: int | None = None,
) -> SimStats:
    """Run encode -> channel -> decode trials and aggregate FER and cost.

    With k set, trials are k-block chains (a chain counts as one frame; any
    wrong message bit in any block is a frame error).
    """
    if blocks < 1:
        raise ValueError("blocks must be >= 1")
    n = profile.n
    if k is None:
        msgs = rng.integers(0, 2, (blocks, profile.message.size)).astype(np.uint8)
        s = sample_state(spec, (blocks, n), rng)
        x, side, info = c2_encode(profile, spec, msgs, s, rng)
        y = simulate_channel(spec, x, s, rng)
        est, dinfo = c2_decode(profile, spec, y, side)
        errors = int(np.any(est != msgs, axis=1).sum())
        cost = np.asarray(info["cost"], dtype=float)
        failures = int(np.asarray(dinfo["failed"]).sum())
    else:
        chain = ChainProfile(k=k, profile=profile)
        msgs = rng.integers(
            0, 2, (blocks, k, chain.message_bits_per_block)
        ).astype(np.uint8)
        s = sample_state(spec, (blocks, k, n), rng)
        x, side, info = c3_encode(chain, spec, msgs, s, rng)
        y = simulate_channel(spec, x, s, rng)
        plain = np.setdiff1d(profile.message, profile.relay_set)
        est, dinfo = c3_decode(chain, spec, y, side)
        errors = int(np.any(est != msgs, axis=(1, 2)).sum())
        cost = np.asarray(info["cost"], dtype=float) / k
        failures = int(np.asarray(dinfo["failed"]).sum())
    wom = _wom_violations(spec, x, s)
    return SimStats(
        blocks=blocks,
        errors=errors,
        fer=errors / blocks,
        mean_cost=float(cost.mean()) / n,
        decode_failures=failures,
        wom_violations=wom,
    )


def _wom_violations(spec: StateChannelSpec, x, s) -> int:
    """Cells written to 1 while stuck at state 1 (only meaningful for
    rewriting models; always 0 when x(v, 1) = 0)."""
    if spec.n_states < 2:
        return 0
    return int(np.sum((np.asarray(s) == 1) & (np.asarray(x) == 1)))
