"""Summary report: JSON, long-format CSV, a markdown ratio table and PNG figures."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def ratio_table(report: dict) -> str:
    extra = "mean_L2" if report["artifact"] == "mab" else "mean_certificate"
    lines = [f"| T | episodes | mean regret | s.e. | {extra} | bound | regret / bound | pass |",
             "|---|---|---|---|---|---|---|---|"]
    for r in report["rows"]:
        lines.append(f"| {r['T']} | {r['episodes']} | {r['mean_regret']:.3f} | {r['se_regret']:.3f} | "
                     f"{r.get(extra, math.nan):.3f} | {r['mean_bound']:.3f} | {r['ratio']:.4f} | "
                     f"{'yes' if r['bound_pass'] else 'no'} |")
    return "\n".join(lines)


def families_table(report: dict) -> str:
    lines = ["| family | violations | pass |", "|---|---|---|"]
    for name, fam in report["families"].items():
        lines.append(f"| {name} | {fam['violations']} | {'yes' if fam['pass'] else 'no'} |")
    trend = report["families"].get("trend")
    if trend:
        lines += ["", "| from | to | mean regret (from) | mean regret (to) | growth per decade | pass |",
                  "|---|---|---|---|---|---|"]
        for s in trend["steps"]:
            lines.append(f"| {s['from']} | {s['to']} | {s['mean_from']:.3f} | {s['mean_to']:.3f} | "
                         f"{s['ratio_per_decade']:.3f} | {'yes' if s['pass'] else 'no'} |")
    return "\n".join(lines)


def write_summary(out: str | Path, report: dict, records: list[dict], figures: bool = True,
                  stem: str = "summary") -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.json").write_text(json.dumps(_clean(report), indent=2) + "\n", encoding="utf-8")
    with open(out / f"{stem}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["config", "T", "metric", "value"])
        for r in report["rows"]:
            for key, val in r.items():
                if key != "T":
                    w.writerow([report["name"], r["T"], key, val])
        for name, fam in report["families"].items():
            w.writerow([report["name"], "all", f"{name}_violations", fam["violations"]])
    md = [f"# {report['name']}", "", f"config hash `{report['config_hash']}`, "
          f"{len(report['seeds'])} seeds, overall {'PASS' if report['pass'] else 'FAIL'}", "",
          ratio_table(report), "", families_table(report), ""]
    (out / f"{stem}.md").write_text("\n".join(md), encoding="utf-8")
    with open(out / "curves.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "seed", "t", "regret_cum", "beta"])
        for r in records:
            for t, reg, beta in zip(r["curve_t"], r["curve_regret"], r["curve_beta"]):
                w.writerow([r["T"], r["seed"], t, repr(float(reg)), repr(float(beta))])
    if figures:
        plot_figures(out / "figures", report, records)


def plot_figures(fig_dir: Path, report: dict, records: list[dict]) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig_dir.mkdir(parents=True, exist_ok=True)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    for T in report["T_grid"]:
        recs = [r for r in records if r["T"] == T and r["curve_t"]]
        if not recs:
            continue
        t = np.asarray(recs[0]["curve_t"])
        same = [r for r in recs if len(r["curve_t"]) == t.size]
        reg = np.mean([r["curve_regret"] for r in same], axis=0)
        beta = np.mean([r["curve_beta"] for r in same], axis=0)
        ax1.plot(t, reg, label=f"T={T}")
        row = next(r for r in report["rows"] if r["T"] == T)
        if row["mean_bound"] is not None and math.isfinite(row["mean_bound"]):
            ax1.hlines(row["mean_bound"], t[0], t[-1], linestyles="dashed", colors="gray")
        ax2.plot(t, beta, label=f"T={T}")
    ax1.set_xscale("log")
    ax1.set_xlabel("round")
    ax1.set_ylabel("mean cumulative regret")
    ax1.set_title("regret (dashed: certified bound)")
    ax1.legend()
    ax2.set_xscale("log")
    ax2.set_yscale("log")
    ax2.set_xlabel("round")
    ax2.set_ylabel("mean beta_t")
    ax2.set_title("inverse learning rate")
    ax2.legend()
    fig.suptitle(report["name"])
    fig.tight_layout()
    fig.savefig(fig_dir / "regret_and_beta.png", dpi=110)
    plt.close(fig)
