"""Code construction.

Monte Carlo estimation of per-index Bhattacharyya profiles (genie-aided,
conditioning on true past bits), selection of the four index sets, the
random search for a good frozen vector, and profile persistence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .models import StateChannelSpec, sample_state, sample_v_given_s, simulate_channel
from .sc import FIXED, ScContext, sc_pass
from .transform import polar_transform

PROFILE_VERSION = 1

# blocks per Monte Carlo chunk; fixed so results do not depend on memory limits
_CHUNK = 128


def _rng_stream(seed: int, *stream) -> np.random.Generator:
    """Derived, reproducible counter-based stream: root seed + stream-id path."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((seed,) + tuple(stream)))
    )


@dataclass(frozen=True)
class ZProfile:
    """Per-index Bhattacharyya estimates Z(U_i | U_[i-1], obs)."""

    n: int
    z_source: np.ndarray   # obs = state (or nothing, for stateless models)
    z_channel: np.ndarray  # obs = channel output
    sample_count: int
    seed: int

    def __post_init__(self):
        zs = np.asarray(self.z_source, dtype=float)
        zc = np.asarray(self.z_channel, dtype=float)
        if zs.shape != (self.n,) or zc.shape != (self.n,):
            raise ValueError("z profiles must have length n")
        if np.any((zs < 0) | (zs > 1)) or np.any((zc < 0) | (zc > 1)):
            raise ValueError("Z estimates must lie in [0, 1]")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        zs.setflags(write=False)
        zc.setflags(write=False)
        object.__setattr__(self, "z_source", zs)
        object.__setattr__(self, "z_channel", zc)


@dataclass(frozen=True)
class CodeProfile:
    """The persisted artifact of code construction.

    message/frozen/random_low/side partition [0, n); frozen_bits run over the
    frozen indices in ascending order; relay_set is the subset of message
    indices used to embed the previous block's side bits when chaining.
    """

    n: int
    message: np.ndarray
    frozen: np.ndarray
    random_low: np.ndarray
    side: np.ndarray
    frozen_bits: np.ndarray
    relay_set: np.ndarray
    thresholds: dict
    z_source: np.ndarray
    z_channel: np.ndarray
    seed: int
    sample_count: int
    model_id: str
    version: int = PROFILE_VERSION

    def __post_init__(self):
        sets = {}
        for name in ("message", "frozen", "random_low", "side", "relay_set"):
            arr = np.sort(np.asarray(getattr(self, name), dtype=np.int64).reshape(-1))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            sets[name] = arr
        parts = [sets[k] for k in ("message", "frozen", "random_low", "side")]
        allidx = np.concatenate(parts) if parts else np.array([], dtype=np.int64)
        if len(np.unique(allidx)) != allidx.size or allidx.size != self.n or (
            allidx.size and (allidx.min() < 0 or allidx.max() >= self.n)
        ):
            raise ValueError("message/frozen/random_low/side must partition [0, n)")
        fb = np.asarray(self.frozen_bits, dtype=np.uint8).reshape(-1)
        if fb.size != self.frozen.size or np.any(fb > 1):
            raise ValueError("frozen_bits must be one bit per frozen index")
        fb.setflags(write=False)
        object.__setattr__(self, "frozen_bits", fb)
        if self.relay_set.size and not np.isin(self.relay_set, self.message).all():
            raise ValueError("relay set must be a subset of the message set")
        for name in ("z_source", "z_channel"):
            z = np.asarray(getattr(self, name), dtype=float)
            if z.shape != (self.n,):
                raise ValueError(f"{name} must have length n")
            z.setflags(write=False)
            object.__setattr__(self, name, z)

    @property
    def rate(self) -> float:
        return self.message.size / self.n

    def with_frozen_bits(self, bits) -> "CodeProfile":
        return replace(self, frozen_bits=np.asarray(bits, dtype=np.uint8))

    def chainable(self) -> bool:
        return self.relay_set.size == self.side.size


def estimate_profile(
    spec: StateChannelSpec, n: int, sample_count: int, seed: int
) -> ZProfile:
    """Genie-aided Monte Carlo Z profiles.

    Draws (v, s, y) blocks from the model, runs SC passes fixed to the true
    u = v * G_n on both the state side and the channel-output side, and
    averages 2*sqrt(p_i (1-p_i)) of the captured conditionals.
    """
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"n={n} is not a power of 2")
    enc_ctx = ScContext.iid(spec.encoder_base(), n)
    dec_ctx = ScContext.iid(spec.decoder_base(), n)
    mode = np.full(n, FIXED, dtype=np.uint8)
    zs_sum = np.zeros(n)
    zc_sum = np.zeros(n)
    done = 0
    chunk_id = 0
    while done < sample_count:
        b = min(_CHUNK, sample_count - done)
        rng = _rng_stream(seed, 0, chunk_id)
        s = sample_state(spec, (b, n), rng)
        v = sample_v_given_s(spec, s, rng)
        u = polar_transform(v)
        x = spec.x_map[v, s]
        y = simulate_channel(spec, x, s, rng)
        res_s = sc_pass(enc_ctx, s, mode, fixed=u)
        res_y = sc_pass(dec_ctx, y, mode, fixed=u)
        zs_sum += np.sum(2.0 * np.sqrt(res_s.p1 * (1.0 - res_s.p1)), axis=0)
        zc_sum += np.sum(2.0 * np.sqrt(res_y.p1 * (1.0 - res_y.p1)), axis=0)
        done += b
        chunk_id += 1
    return ZProfile(
        n=n,
        z_source=np.clip(zs_sum / sample_count, 0.0, 1.0),
        z_channel=np.clip(zc_sum / sample_count, 0.0, 1.0),
        sample_count=sample_count,
        seed=seed,
    )


def select_sets(
    zp: ZProfile,
    z_high_threshold: float = 0.9,
    z_low_threshold: float | None = None,
    error_target: float = 0.1,
    target_rate: float | None = None,
    model_id: str = "",
) -> CodeProfile:
    """Partition [0, n) into message / frozen / random_low / side.

    High-entropy indices (z_source >= z_high_threshold) carry message or
    frozen bits; the rest are randomized.  Reliable indices (z_channel <=
    z_low_threshold) are decodable; z_low_threshold defaults to the largest
    value whose union-bound error estimate sum(z_channel over the reliable
    set) stays within error_target.  With target_rate set, surplus message
    indices (largest z_channel first) are demoted to frozen.
    """
    n = zp.n
    if not 0.0 < z_high_threshold < 1.0:
        raise ValueError("z_high_threshold must lie in (0, 1)")
    if z_low_threshold is None:
        z_low_threshold = _union_bound_threshold(zp.z_channel, error_target)
    if not 0.0 <= z_low_threshold <= 1.0 or z_low_threshold > z_high_threshold:
        raise ValueError("need 0 <= z_low_threshold <= z_high_threshold < 1")

    high = zp.z_source >= z_high_threshold       # entropy-carrying positions
    low = zp.z_channel <= z_low_threshold        # decoder-reliable positions
    idx = np.arange(n)
    message = idx[high & low]
    frozen = idx[high & ~low]
    random_low = idx[~high & low]
    side = idx[~high & ~low]
    if message.size == 0:
        raise ValueError(
            "empty message set: thresholds "
            f"(high={z_high_threshold}, low={z_low_threshold}) are degenerate for this profile"
        )
    if target_rate is not None:
        want = int(np.floor(target_rate * n))
        if want < 1:
            raise ValueError(f"target_rate={target_rate} leaves no message bits")
        if message.size > want:
            order = np.argsort(zp.z_channel[message], kind="stable")
            keep = np.sort(message[order[:want]])
            demote = np.setdiff1d(message, keep)
            frozen = np.sort(np.concatenate([frozen, demote]))
            message = keep
    relay = _pick_relay(message, side.size, zp.z_channel)
    return CodeProfile(
        n=n,
        message=message,
        frozen=frozen,
        random_low=random_low,
        side=side,
        frozen_bits=np.zeros(frozen.size, dtype=np.uint8),
        relay_set=relay,
        thresholds={
            "z_high": float(z_high_threshold),
            "z_low": float(z_low_threshold),
            "error_target": float(error_target),
            "target_rate": None if target_rate is None else float(target_rate),
        },
        z_source=zp.z_source,
        z_channel=zp.z_channel,
        seed=zp.seed,
        sample_count=zp.sample_count,
        model_id=model_id,
    )


def _union_bound_threshold(z_channel: np.ndarray, error_target: float) -> float:
    """Largest threshold t with sum of z_channel values <= t within error_target."""
    z = np.sort(z_channel)
    csum = np.cumsum(z)
    ok = np.nonzero(csum <= error_target)[0]
    if ok.size == 0:
        return 0.0
    return float(z[ok[-1]])


def _pick_relay(message: np.ndarray, count: int, z_channel: np.ndarray) -> np.ndarray:
    """|side| message indices with smallest z_channel (ties: lowest index)."""
    if count == 0:
        return np.array([], dtype=np.int64)
    if count > message.size:
        return np.array([], dtype=np.int64)  # chaining unavailable
    order = np.lexsort((message, z_channel[message]))
    return np.sort(message[order[:count]])


@dataclass(frozen=True)
class FrozenSearchReport:
    accepted: bool
    draws: int
    fer: float
    mean_cost: float


def search_frozen(
    profile: CodeProfile,
    spec: StateChannelSpec,
    seed: int,
    trials_budget: int = 20,
    cost_slack: float = 0.02,
    error_target: float = 0.1,
    batch: int = 200,
) -> tuple[CodeProfile, FrozenSearchReport]:
    """Find a frozen vector by repeated uniform draws.

    Each candidate is judged on a fresh simulation batch: accepted when the
    empirical mean cost per cell stays within cost_budget + cost_slack and
    the frame error rate within error_target.  Returns the best candidate
    found (flagged unaccepted) if the budget runs out.
    """
    from .schemes import simulate_blocks  # runtime import avoids a cycle

    if trials_budget < 1:
        raise ValueError("trials_budget must be >= 1")
    budget = spec.cost_budget + cost_slack
    best = None
    for draw in range(trials_budget):
        rng = _rng_stream(seed, 1, draw)
        cand = profile.with_frozen_bits(
            rng.integers(0, 2, profile.frozen.size).astype(np.uint8)
        )
        stats = simulate_blocks(cand, spec, batch, rng)
        ok = stats.fer <= error_target and stats.mean_cost <= budget
        rank = (stats.fer, max(stats.mean_cost - budget, 0.0))
        if best is None or rank < best[0]:
            best = (rank, cand, stats, draw + 1)
        if ok:
            return cand, FrozenSearchReport(
                accepted=True, draws=draw + 1, fer=stats.fer, mean_cost=stats.mean_cost
            )
    _, cand, stats, draws = best
    return cand, FrozenSearchReport(
        accepted=False, draws=trials_budget, fer=stats.fer, mean_cost=stats.mean_cost
    )


# persistence ----------------------------------------------------------------


def save_profile(profile: CodeProfile, path) -> None:
    """Write the profile as a JSON document (lossless round-trip)."""
    doc = {
        "version": profile.version,
        "model_id": profile.model_id,
        "n": profile.n,
        "thresholds": profile.thresholds,
        "z_source": profile.z_source.tolist(),
        "z_channel": profile.z_channel.tolist(),
        "sets": {
            "message": profile.message.tolist(),
            "frozen": profile.frozen.tolist(),
            "random_low": profile.random_low.tolist(),
            "side": profile.side.tolist(),
        },
        "frozen_bits": profile.frozen_bits.tolist(),
        "relay_set": profile.relay_set.tolist(),
        "seed": profile.seed,
        "sample_count": profile.sample_count,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_profile(path) -> CodeProfile:
    """Read a profile file; raises on version mismatch, malformed files or
    invariant violations."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed profile file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise ValueError(f"malformed profile file {path}: missing version")
    if doc["version"] != PROFILE_VERSION:
        raise ValueError(
            f"profile version {doc['version']} unsupported (expected {PROFILE_VERSION})"
        )
    try:
        sets = doc["sets"]
        return CodeProfile(
            n=int(doc["n"]),
            message=sets["message"],
            frozen=sets["frozen"],
            random_low=sets["random_low"],
            side=sets["side"],
            frozen_bits=doc["frozen_bits"],
            relay_set=doc["relay_set"],
            thresholds=doc["thresholds"],
            z_source=doc["z_source"],
            z_channel=doc["z_channel"],
            seed=int(doc["seed"]),
            sample_count=int(doc["sample_count"]),
            model_id=doc["model_id"],
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed profile file {path}: {exc}") from exc
