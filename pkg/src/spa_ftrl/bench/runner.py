"""Episode execution, aggregation across seeds and certificate evaluation."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path

import numpy as np

from .. import bounds
from ..bandits import run_episode, spa_config
from ..environments import AdversarialSparse, CorruptedStochastic, RegretTrace, gaps, stochastic_sparsity
from .config import ExperimentConfig, build_agent, build_env, build_pm, config_hash
from .traceio import read_trace, write_trace

TREND_FACTOR = 3.0
CURVE_POINTS = 200


@lru_cache(maxsize=8)
def _pm_setup(raw_json: str):
    import json
    return build_pm(json.loads(raw_json))


def run_one(raw: dict, artifact: str, T: int, seed: int) -> RegretTrace:
    if artifact == "mab":
        agent = build_agent(raw, T, seed)
        env = build_env(raw, agent.k)
        return run_episode(agent, env, T=T, checks=raw.get("certificates", {}).get("per_round", True))
    import json
    from ..pm.runner import pm_run
    game, geom, model, src = _pm_setup(json.dumps(raw, sort_keys=True))
    return pm_run(game, geom, src, model, T, seed=seed)


def trace_path(out: Path, T: int, index: int, seed: int) -> Path:
    return out / "traces" / f"T{T}" / f"ep{index:03d}-seed{seed}.csv"


def episode_bound(raw: dict, artifact: str, T: int, totals: dict) -> float | None:
    """The regret bound certified for one episode, from its configuration and totals."""
    if artifact == "pm":
        return totals["certificate"] + bounds.pm_additive(totals["B"], totals["k"], T)
    agent = build_agent(raw, T, 0)
    env = build_env(raw, agent.k)
    k, L2 = agent.k, totals["L2"]
    algo = agent.algo.value
    if algo == "sparse_exp3_spa":
        return bounds.exp3_bound(L2, k, T)
    if algo == "sparse_lb_spa":
        return bounds.log_barrier_bound(L2, k, T)
    if isinstance(env, AdversarialSparse):
        return bounds.bobw_adversarial_bound(L2, k, T)
    g = gaps(env)
    delta = float(g[g > 0].min())
    corruption = 2.0 * env.C if isinstance(env, CorruptedStochastic) else 0.0
    c1 = spa_config(agent)[0].c1
    return bounds.bobw_self_bounding_bound(k, T, stochastic_sparsity(env), delta, corruption, c1)


def beta_monotone(beta: np.ndarray) -> tuple[bool, int | None]:
    drops = np.nonzero(np.diff(beta) < 0)[0]
    if drops.size:
        return False, int(drops[0] + 2)   # 1-based round whose beta fell below the previous one
    return True, None


def episode_record(trace: RegretTrace, raw: dict, artifact: str, T: int, index: int, seed: int,
                   checkpoints=()) -> dict:
    cols = trace.columns
    reg = cols["regret_cum"]
    n = reg.size
    if n:
        pts = np.unique(np.clip(np.round(np.geomspace(1, n, min(CURVE_POINTS, n))).astype(np.int64), 1, n)) - 1
    else:
        pts = np.zeros(0, dtype=np.int64)
    ok, first_drop = beta_monotone(cols["beta"])
    totals = trace.totals
    error = totals.get("error")
    rec = {
        "T": T, "index": index, "seed": seed,
        "rounds": n,
        "final_regret": float(reg[-1]) if n else math.nan,
        "violations": trace.violations(),
        "beta_monotone": ok, "beta_first_drop": first_drop,
        "error": error,
        "checkpoints": {int(c): float(reg[c - 1]) for c in checkpoints if c <= n},
        "curve_t": (pts + 1).tolist(),
        "curve_regret": reg[pts].tolist(),
        "curve_beta": cols["beta"][pts].tolist(),
    }
    if artifact == "mab":
        rec["L2"] = float(cols["sq_norm"].sum())
        totals = dict(totals, L2=rec["L2"])
    else:
        k = totals["k"]
        rec["sum_vprime"] = float(cols["z"].sum())
        rec["certificate"] = math.sqrt(2.0 * rec["sum_vprime"] * math.log(k) * math.log1p(T))
        totals = dict(totals, certificate=rec["certificate"])
    rec["bound"] = episode_bound(raw, artifact, T, totals) if not error and n == T else None
    return rec


def _job(args) -> dict:
    raw, artifact, T, index, seed, out, checkpoints = args
    t0 = time.perf_counter()
    try:
        trace = run_one(raw, artifact, T, seed)
    except Exception as exc:  # surfaced in the report, never swallowed silently
        return {"T": T, "index": index, "seed": seed, "rounds": 0, "final_regret": math.nan,
                "violations": {}, "beta_monotone": True, "beta_first_drop": None,
                "error": f"{type(exc).__name__}: {exc}", "checkpoints": {}, "curve_t": [],
                "curve_regret": [], "curve_beta": [], "bound": None, "wall_clock": time.perf_counter() - t0}
    meta = {"config_hash": config_hash(raw), "config_name": raw.get("name", "experiment"),
            "artifact": artifact, "T": T, "seed": seed, "episode_index": index}
    if out is not None:
        write_trace(trace_path(Path(out), T, index, seed), trace, meta)
    rec = episode_record(trace, raw, artifact, T, index, seed, checkpoints)
    rec["wall_clock"] = time.perf_counter() - t0
    return rec


def run_episodes(cfg: ExperimentConfig, out: str | Path | None, parallel: int | None = None) -> list[dict]:
    """Run every (T, seed) episode; records come back in (T, seed index) order."""
    jobs = [(cfg.raw, cfg.artifact, T, i, seed, None if out is None else str(out), cfg.checkpoints)
            for T in cfg.T_grid for i, seed in enumerate(cfg.seeds)]
    workers = cfg.parallel if parallel is None else parallel
    if workers <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


# ---------------------------------------------------------------- aggregation


def _mean_se(vals) -> tuple[float, float]:
    v = np.asarray(vals, dtype=np.float64)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def trend_points(cfg: ExperimentConfig, records: list[dict]) -> list[tuple[int, float]]:
    if len(cfg.T_grid) > 1:
        return [(T, _mean_se([r["final_regret"] for r in records if r["T"] == T])[0]) for T in cfg.T_grid]
    T = cfg.T_grid[0]
    pts = [(c, _mean_se([r["checkpoints"][c] for r in records if c in r["checkpoints"]])[0])
           for c in cfg.checkpoints if c < T]
    pts.append((T, _mean_se([r["final_regret"] for r in records])[0]))
    return pts


def per_decade(points: list[tuple[int, float]]) -> list[dict]:
    out = []
    for (t1, r1), (t2, r2) in zip(points, points[1:]):
        decades = math.log10(t2 / t1)
        if r1 > 0 and r2 > 0:
            ratio = (r2 / r1) ** (1.0 / decades)
        elif r2 <= 0:
            ratio = 0.0
        else:
            ratio = math.inf
        out.append({"from": t1, "to": t2, "mean_from": r1, "mean_to": r2, "ratio_per_decade": ratio,
                    "pass": bool(ratio <= TREND_FACTOR)})
    return out


def summarize(cfg: ExperimentConfig, records: list[dict], wall_clock: float | None = None) -> dict:
    rows = []
    for T in cfg.T_grid:
        recs = [r for r in records if r["T"] == T]
        mean, se = _mean_se([r["final_regret"] for r in recs if not r["error"]])
        bnds = [r["bound"] for r in recs if r["bound"] is not None]
        bound = float(np.mean(bnds)) if bnds else math.nan
        row = {"T": T, "episodes": len(recs), "mean_regret": mean, "se_regret": se, "mean_bound": bound,
               "ratio": mean / bound if bnds and bound > 0 else math.nan,
               "bound_pass": bool(bnds and len(bnds) == len(recs) and mean <= bound)}
        if cfg.artifact == "mab":
            row["mean_L2"] = _mean_se([r["L2"] for r in recs if "L2" in r])[0]
        else:
            row["mean_certificate"] = _mean_se([r["certificate"] for r in recs if "certificate" in r])[0]
        rows.append(row)
    families: dict[str, dict] = {}
    errors = [f"T={r['T']} seed={r['seed']}: {r['error']}" for r in records if r["error"]]
    families["episodes"] = {"violations": len(errors), "pass": not errors, "details": errors}
    if cfg.certificates.get("bound", True):
        families["bound"] = {"violations": sum(not r["bound_pass"] for r in rows),
                             "pass": all(r["bound_pass"] for r in rows)}
    if cfg.certificates.get("trend", False):
        steps = per_decade(trend_points(cfg, records))
        families["trend"] = {"violations": sum(not s["pass"] for s in steps), "pass": all(s["pass"] for s in steps),
                             "steps": steps}
    if cfg.certificates.get("per_round", True):
        counts: dict[str, int] = {}
        for r in records:
            for name, v in r["violations"].items():
                counts[name] = counts.get(name, 0) + v
        for name in sorted(counts):
            families[name] = {"violations": counts[name], "pass": counts[name] == 0}
    drops = [f"T={r['T']} seed={r['seed']}: beta decreased at round {r['beta_first_drop']}"
             for r in records if not r["beta_monotone"]]
    families["beta_monotone"] = {"violations": len(drops), "pass": not drops, "details": drops}
    report = {
        "name": cfg.name, "artifact": cfg.artifact, "config_hash": cfg.config_hash,
        "seeds": list(cfg.seeds), "T_grid": list(cfg.T_grid), "rows": rows, "families": families,
        "pass": all(f["pass"] for f in families.values()),
    }
    if wall_clock is not None:
        report["wall_clock_s"] = wall_clock
    return report


def records_from_dir(trace_dir: str | Path, raw: dict) -> list[dict]:
    """Re-derive episode records from trace files, and check them against the values
    logged in each sidecar."""
    from .traceio import TraceFormatError
    trace_dir = Path(trace_dir)
    files = sorted((trace_dir / "traces").glob("T*/*.csv")) if (trace_dir / "traces").is_dir() \
        else sorted(trace_dir.glob("**/*.csv"))
    files = [f for f in files if f.with_suffix(".json").is_file()]
    if not files:
        raise TraceFormatError(f"no trace files under {trace_dir}")
    checkpoints = tuple(raw.get("checkpoints", []))
    records = []
    for f in files:
        trace, meta = read_trace(f)
        if meta["config_hash"] != config_hash(raw):
            raise TraceFormatError(f"{f}: config hash {meta['config_hash']} does not match the run config")
        rec = episode_record(trace, raw, meta["artifact"], meta["T"], meta["episode_index"], meta["seed"],
                             checkpoints)
        logged = meta["totals"]
        mismatches = []
        if logged.get("violations", {}) != rec["violations"]:
            mismatches.append("per-round violation counts")
        if rec["rounds"] and not math.isclose(logged.get("final_regret", math.nan), rec["final_regret"],
                                              rel_tol=0, abs_tol=1e-9):
            mismatches.append("final regret")
        if meta["artifact"] == "pm" and rec["rounds"]:
            if not math.isclose(float(trace.columns["certificate"][-1]), rec["certificate"],
                                rel_tol=1e-12, abs_tol=1e-12):
                mismatches.append("certificate")
        rec["mismatches"] = mismatches
        records.append(rec)
    records.sort(key=lambda r: (r["T"], r["index"]))
    return records
