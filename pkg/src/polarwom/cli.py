"""Experiment runner: code construction, Monte Carlo simulation, capacity
computation, parameter sweeps and self-verification.

Subcommands
-----------
construct   estimate a reliability profile, pick index sets, search a frozen
            vector and write the profile file
simulate    load a profile and measure FER / cost over many trials
capacity    closed-form and grid-oracle capacity values for a model
sweep       construct + simulate over a list of block lengths, emitting one
            CSV row per point
verify      run the built-in oracle and identity suites

All randomness flows from a single root seed through named counter-based
(Philox) streams, so results are byte-identical across reruns and across
worker counts.  Config files are JSON; every CLI flag overrides the matching
config field, and the fully resolved config is echoed into each JSON summary.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .models import (
    capacity_example2,
    degradation_witness,
    gp_capacity_grid,
    make_model,
    simulate_channel,
    sample_state,
)
from .prob import JointBase, binary_entropy, star_convolve, verify_degraded
from .profiles import (
    _rng_stream,
    estimate_profile,
    load_profile,
    save_profile,
    search_frozen,
    select_sets,
)
from .schemes import simulate_blocks, c1_encode, c2_encode, degenerate_state_vector
from .sc import ScContext, sc_bruteforce, sc_conditional
from .transform import polar_transform

RNG_ALGORITHM = "philox"
CSV_COLUMNS = ["n", "rate", "capacity", "FER", "FER_CI_low", "FER_CI_high",
               "cost", "seed"]
# fixed trial chunk size: the chunk -> stream mapping must not depend on the
# worker count, or reproducibility across --threads values breaks
TRIAL_CHUNK = 128


def wilson_interval(errors: int, trials: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if errors == 0 else max(center - half, 0.0)
    hi = 1.0 if errors == trials else min(center + half, 1.0)
    return lo, hi


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def write_csv(path, rows, columns=None):
    columns = columns or CSV_COLUMNS
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c, "")) for c in columns))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def parse_params(text):
    """Parse 'k=v,k=v' into a dict with numeric values where possible."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise ValueError(f"bad --params entry '{item}', expected k=v")
        key, raw = item.split("=", 1)
        try:
            val = float(raw)
            if val.is_integer() and "." not in raw and "e" not in raw.lower():
                val = int(raw)
        except ValueError:
            val = raw
        out[key.strip()] = val
    return out


def closed_form_capacity(model_id: str, params: dict):
    """Analytic capacity where one exists; None otherwise."""
    if model_id == "example2":
        return capacity_example2(params["alpha"], params["beta"], params["B"])
    if model_id == "bsc":
        eps = params.get("p_x1", 0.5)
        return binary_entropy(star_convolve(eps, params["alpha"])) \
            - binary_entropy(params["alpha"])
    return None


def reference_capacity(model_id: str, params: dict) -> float:
    cf = closed_form_capacity(model_id, params)
    if cf is not None:
        return float(cf)
    spec = make_model(model_id, params)
    cap, _ = gp_capacity_grid(spec)
    return float(cap)


def _resolve_config(args, defaults):
    """defaults < config file < explicit CLI flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config fields {sorted(unknown)}")
        cfg.update(loaded)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg.get("params") is not None and isinstance(cfg["params"], str):
        cfg["params"] = parse_params(cfg["params"])
    return cfg


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ValueError(f"missing required settings: {missing}")


def _check_n(n):
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"block length n={n} is not a power of 2 (>= 2)")


def run_trials(profile, spec, trials, seed, k=None, threads=1):
    """Chunked deterministic simulation; identical results for any thread
    count because stream ids are chunk indices, not worker ids."""
    chunks = []
    done = 0
    idx = 0
    while done < trials:
        size = min(TRIAL_CHUNK, trials - done)
        chunks.append((idx, size))
        done += size
        idx += 1

    def one(chunk):
        ci, size = chunk
        rng = _rng_stream(seed, 3, ci)
        return simulate_blocks(profile, spec, size, rng, k=k)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, chunks))
    else:
        parts = [one(c) for c in chunks]

    blocks = sum(p.blocks for p in parts)
    errors = sum(p.errors for p in parts)
    cost = sum(p.mean_cost * p.blocks for p in parts) / blocks
    return {
        "blocks": blocks,
        "errors": errors,
        "fer": errors / blocks,
        "mean_cost": cost,
        "decode_failures": sum(p.decode_failures for p in parts),
        "wom_violations": sum(p.wom_violations for p in parts),
    }


def _summary(cfg, payload, out_path):
    doc = {
        "resolved_config": {k: cfg[k] for k in sorted(cfg)},
        "rng_algorithm": RNG_ALGORITHM,
        "ci_method": "wilson-95",
        **payload,
    }
    text = json.dumps(doc, indent=2, sort_keys=False, default=str)
    print(text)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    return doc


# subcommands ---------------------------------------------------------------

CONSTRUCT_DEFAULTS = {
    "model": None, "params": None, "n": None, "seed": 0, "samples": 2000,
    "z_high": 0.9, "z_low": None, "error_target": 0.1, "target_rate": None,
    "search_budget": 20, "search_error_target": 0.1, "cost_slack": 0.02,
    "search_batch": 200, "out": None, "threads": 1,
}


def cmd_construct(args):
    cfg = _resolve_config(args, CONSTRUCT_DEFAULTS)
    _require(cfg, "model", "params", "n", "out")
    _check_n(cfg["n"])
    spec = make_model(cfg["model"], cfg["params"])
    zp = estimate_profile(spec, cfg["n"], cfg["samples"], cfg["seed"])
    profile = select_sets(
        zp,
        z_high_threshold=cfg["z_high"],
        z_low_threshold=cfg["z_low"],
        error_target=cfg["error_target"],
        target_rate=cfg["target_rate"],
        model_id=cfg["model"],
    )
    profile, report = search_frozen(
        profile, spec, seed=cfg["seed"],
        trials_budget=cfg["search_budget"],
        cost_slack=cfg["cost_slack"],
        error_target=cfg["search_error_target"],
        batch=cfg["search_batch"],
    )
    save_profile(profile, cfg["out"])
    cap = reference_capacity(cfg["model"], cfg["params"])
    _summary(cfg, {
        "profile_file": cfg["out"],
        "n": profile.n,
        "rate": profile.rate,
        "capacity": cap,
        "rate_over_capacity": profile.rate / cap if cap > 0 else None,
        "set_sizes": {
            "message": int(profile.message.size),
            "frozen": int(profile.frozen.size),
            "random_low": int(profile.random_low.size),
            "side": int(profile.side.size),
        },
        "frozen_search": {
            "accepted": report.accepted,
            "draws": report.draws,
            "fer": report.fer,
            "mean_cost": report.mean_cost,
        },
    }, None)
    return 0


SIMULATE_DEFAULTS = {
    "model": None, "params": None, "profile": None, "trials": 500,
    "k_blocks": 1, "seed": 0, "out": None, "threads": 1,
}


def cmd_simulate(args):
    cfg = _resolve_config(args, SIMULATE_DEFAULTS)
    _require(cfg, "model", "params", "profile")
    if cfg["trials"] < 1:
        raise ValueError("trials must be >= 1")
    profile = load_profile(cfg["profile"])
    if profile.model_id and profile.model_id != cfg["model"]:
        raise ValueError(
            f"profile was built for model '{profile.model_id}', got '{cfg['model']}'")
    spec = make_model(cfg["model"], cfg["params"])
    k = cfg["k_blocks"] if cfg["k_blocks"] > 1 else None
    stats = run_trials(profile, spec, cfg["trials"], cfg["seed"], k=k,
                       threads=cfg["threads"])
    lo, hi = wilson_interval(stats["errors"], stats["blocks"])
    cap = reference_capacity(cfg["model"], cfg["params"])
    row = {
        "n": profile.n, "rate": profile.rate, "capacity": cap,
        "FER": stats["fer"], "FER_CI_low": lo, "FER_CI_high": hi,
        "cost": stats["mean_cost"], "seed": cfg["seed"],
    }
    if cfg["out"]:
        write_csv(cfg["out"], [row])
    _summary(cfg, {"trial_report": {**row, **stats}}, None)
    return 0


CAPACITY_DEFAULTS = {"model": None, "params": None, "out": None}


def cmd_capacity(args):
    cfg = _resolve_config(args, CAPACITY_DEFAULTS)
    _require(cfg, "model", "params")
    spec = make_model(cfg["model"], cfg["params"])
    grid_cap, aux = gp_capacity_grid(spec)
    closed = closed_form_capacity(cfg["model"], cfg["params"])
    payload = {
        "closed_form": closed,
        "grid": float(grid_cap),
        "gap": None if closed is None else abs(closed - grid_cap),
        "aux_p_v_given_s": [float(p) for p in aux["p_v_given_s"]],
        "aux_x_map": np.asarray(aux["x_map"]).tolist(),
    }
    _summary(cfg, {"capacity": payload}, cfg["out"])
    return 0


SWEEP_DEFAULTS = {
    "model": None, "params": None, "n_list": None, "trials": 500,
    "k_blocks": 1, "seed": 0, "samples": 2000, "z_high": 0.9, "z_low": None,
    "error_target": 0.1, "target_rate": None, "search_budget": 20,
    "search_error_target": 0.1, "cost_slack": 0.02, "search_batch": 200,
    "out": None, "threads": 1,
}


def cmd_sweep(args):
    cfg = _resolve_config(args, SWEEP_DEFAULTS)
    _require(cfg, "model", "params", "n_list")
    n_list = cfg["n_list"]
    if isinstance(n_list, str):
        n_list = [int(x) for x in n_list.split(",") if x.strip()]
    if not n_list:
        raise ValueError("sweep list is empty")
    spec = make_model(cfg["model"], cfg["params"])
    cap = reference_capacity(cfg["model"], cfg["params"])
    rows, failures = [], []
    for n in n_list:
        try:
            _check_n(n)
            zp = estimate_profile(spec, n, cfg["samples"], cfg["seed"])
            profile = select_sets(
                zp, z_high_threshold=cfg["z_high"], z_low_threshold=cfg["z_low"],
                error_target=cfg["error_target"], target_rate=cfg["target_rate"],
                model_id=cfg["model"])
            profile, _ = search_frozen(
                profile, spec, seed=cfg["seed"],
                trials_budget=cfg["search_budget"], cost_slack=cfg["cost_slack"],
                error_target=cfg["search_error_target"], batch=cfg["search_batch"])
            k = cfg["k_blocks"] if cfg["k_blocks"] > 1 else None
            stats = run_trials(profile, spec, cfg["trials"], cfg["seed"], k=k,
                               threads=cfg["threads"])
            lo, hi = wilson_interval(stats["errors"], stats["blocks"])
            rows.append({
                "n": n, "rate": profile.rate, "capacity": cap,
                "FER": stats["fer"], "FER_CI_low": lo, "FER_CI_high": hi,
                "cost": stats["mean_cost"], "seed": cfg["seed"],
            })
        except ValueError as exc:
            failures.append({"n": n, "error": str(exc)})
    write_csv(cfg["out"], rows)
    _summary(cfg, {"points": len(rows), "failed_points": failures}, None)
    return 0 if rows else 1


def cmd_verify(args):
    del args
    checks = []
    rng = np.random.default_rng(0)

    # transform: involution and dense-matrix agreement
    g = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    gn = g
    for _ in range(5):
        gn = np.kron(gn, g)
    u = rng.integers(0, 2, (64, 64)).astype(np.uint8)
    dense_ok = np.array_equal(polar_transform(u), (u @ gn) % 2)
    inv_ok = np.array_equal(polar_transform(polar_transform(u)), u)
    checks.append(("transform dense-matrix + involution", dense_ok and inv_ok))

    # SC conditionals against exhaustive enumeration
    worst = 0.0
    for _ in range(25):
        w = rng.random((2, 2)) + 1e-3
        ctx = ScContext.iid(JointBase(w / w.sum()), 8)
        obs = rng.integers(0, 2, 8)
        pref = rng.integers(0, 2, rng.integers(0, 8)).astype(np.uint8)
        worst = max(worst, abs(sc_conditional(ctx, obs, pref)
                               - sc_bruteforce(ctx, obs, pref)))
    checks.append((f"sc engine vs brute force (worst {worst:.2e})", worst <= 1e-9))

    # capacity: closed form vs grid oracle
    spec = make_model("example2", {"alpha": 0.1, "beta": 0.5, "B": 0.25})
    grid_cap, _ = gp_capacity_grid(spec)
    closed = capacity_example2(0.1, 0.5, 0.25)
    checks.append((f"capacity grid vs closed form (gap {abs(grid_cap-closed):.2e})",
                   abs(grid_cap - closed) <= 1e-3))

    # degradation witness identity
    w = degradation_witness(0.1, 0.5, 0.25)
    viol = verify_degraded(spec.channel_given_v(), spec.state_given_v(), w.rows)
    checks.append((f"state degraded via witness (viol {viol:.2e})", viol <= 1e-12))

    # point-to-point scheme == state-aware scheme under a degenerate state
    from .models import make_asymmetric
    from .profiles import estimate_profile as _ep, select_sets as _ss
    aspec = make_asymmetric(0.02, 0.2)
    zp = _ep(aspec, 64, 500, seed=1)
    prof = _ss(zp, error_target=1.0, model_id="basym")
    prof = prof.with_frozen_bits(
        np.random.default_rng(1).integers(0, 2, prof.frozen.size).astype(np.uint8))
    msg = np.random.default_rng(2).integers(0, 2, prof.message.size).astype(np.uint8)
    x1, _, _ = c1_encode(prof, aspec, msg, _rng_stream(9))
    x2, _, _ = c2_encode(prof, aspec, msg, degenerate_state_vector(64),
                         _rng_stream(9))
    checks.append(("degenerate-state scheme identity", np.array_equal(x1, x2)))

    failed = 0
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failed += 0 if ok else 1
    return 0 if failed == 0 else 1


# entry point ---------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--model", help="model id (example1, example2, basym, bsc)")
    p.add_argument("--params", help="model parameters as k=v,k=v")
    p.add_argument("--seed", type=int, help="root RNG seed")
    p.add_argument("--out", help="output file path")
    p.add_argument("--threads", type=int, help="worker threads (results identical)")


def _add_construction(p):
    p.add_argument("--samples", type=int, help="Monte Carlo samples for estimation")
    p.add_argument("--z-high", dest="z_high", type=float)
    p.add_argument("--z-low", dest="z_low", type=float)
    p.add_argument("--error-target", dest="error_target", type=float)
    p.add_argument("--target-rate", dest="target_rate", type=float)
    p.add_argument("--search-budget", dest="search_budget", type=int)
    p.add_argument("--search-error-target", dest="search_error_target", type=float)
    p.add_argument("--cost-slack", dest="cost_slack", type=float)
    p.add_argument("--search-batch", dest="search_batch", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="polarwom",
        description="polar coding for asymmetric channels and informed-encoder "
                    "rewriting: construction, simulation, capacity, sweeps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build and save a code profile")
    _add_common(p)
    _add_construction(p)
    p.add_argument("--n", type=int, help="block length (power of 2)")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("simulate", help="measure FER/cost from a saved profile")
    _add_common(p)
    p.add_argument("--profile", help="profile file from 'construct'")
    p.add_argument("--trials", type=int)
    p.add_argument("--k-blocks", dest="k_blocks", type=int,
                   help="chain length (1 = single blocks)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("capacity", help="capacity values for a model")
    _add_common(p)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("sweep", help="construct+simulate over block lengths")
    _add_common(p)
    _add_construction(p)
    p.add_argument("--n-list", dest="n_list", help="comma-separated block lengths")
    p.add_argument("--trials", type=int)
    p.add_argument("--k-blocks", dest="k_blocks", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the oracle/identity suites")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
