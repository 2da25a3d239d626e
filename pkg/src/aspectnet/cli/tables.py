"""Plain-text report tables, and optional PNG figures when matplotlib is importable."""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

from ..data import ASPECTS, SENTIMENTS

log = logging.getLogger(__name__)


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    fmt = lambda row: "  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip()  # noqa: E731
    return "\n".join([fmt(header), fmt(["-" * w for w in widths]), *map(fmt, rows)]) + "\n"


def render_stats(stats: dict) -> str:
    out = [f"reviews: {stats['n_reviews']}  annotations: {stats['n_annotations']}", ""]
    rows = [[a, *(str(stats["aspects"][a].get(s, 0)) for s in SENTIMENTS),
             str(sum(stats["aspects"][a].values()))] for a in ASPECTS]
    out.append(_table(["aspect", *SENTIMENTS, "total"], rows))
    out.append(_table(["platform", "reviews"], [[k, str(v)] for k, v in stats["platforms"].items()]))
    fmt = lambda v: "-" if v is None else f"{v:.3f}"  # noqa: E731
    out.append(_table(["jaccard", *ASPECTS], [[a, *map(fmt, row)] for a, row in
                                               zip(ASPECTS, stats["jaccard"]["matrix"])]))
    out.append(_table(["bucket", "reviews"], [[k, str(v)] for k, v in stats["length_buckets"].items()]))
    return "\n".join(out)


def _metric_row(name: str, m: dict) -> list[str]:
    return [name, f"{m['accuracy']:.4f}", f"{m['macro_precision']:.4f}", f"{m['macro_recall']:.4f}",
            f"{m['macro_f1']:.4f}"]


def render_summary(summary: dict) -> str:
    out = []
    ev = summary.get("evaluation")
    if ev:
        rows = [_metric_row(k, m) for k, m in ev["members"].items()] + [_metric_row("ensemble", ev["ensemble"])]
        out += ["Test-set metrics", _table(["model", "accuracy", "precision", "recall", "f1"], rows)]
    if summary.get("ablation"):
        rows = [[r["configuration"], f"{r['accuracy']:.4f}", f"{r['precision']:.4f}", f"{r['recall']:.4f}",
                 f"{r['f1']:.4f}"] for r in summary["ablation"]]
        out += ["Ablation", _table(["configuration", "accuracy", "precision", "recall", "f1"], rows)]
    if summary.get("weights"):
        rows = list(csv.reader(io.StringIO(summary["weights"])))
        out += ["Ensemble weights", _table(rows[0], rows[1:])]
    if summary.get("calibration"):
        c = summary["calibration"]
        out += [f"Temperature {c['temperature']:.4f}  (validation NLL {c['nll_before']:.4f} -> {c['nll_after']:.4f})",
                ""]
    tr = summary.get("transfer")
    if tr:
        rows = [[d, f"{z['f1']:.4f}", f"{z['gap_percent']:.2f}"] for d, z in tr["zero_shot"].items()]
        out += [f"Zero-shot transfer (source macro-F1 {tr['source_f1']:.4f})",
                _table(["domain", "f1", "gap %"], rows)]
        curves = [[d, b, f"{sum(v) / len(v):.4f}", str(len(v))] for d, c in tr["curves"].items()
                  for b, v in sorted(c.items(), key=lambda kv: int(kv[0]))]
        if curves:
            out += ["Few-shot adaptation", _table(["domain", "budget", "mean f1", "seeds"], curves)]
    return "\n".join(out) if out else "nothing to report yet\n"


def write_figures(summary: dict, directory: Path) -> list[Path]:
    """Bar and line charts of whatever sections the summary holds; [] without matplotlib."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.info("matplotlib not installed; skipping figures")
        return []
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    def save(fig, name):
        path = directory / name
        # fixed metadata keeps the bytes stable across runs
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
        written.append(path)

    ev = summary.get("evaluation")
    if ev:
        names = [*ev["members"], "ensemble"]
        f1 = [m["macro_f1"] for m in ev["members"].values()] + [ev["ensemble"]["macro_f1"]]
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.bar(names, f1)
        ax.set_ylabel("macro F1")
        ax.set_ylim(0, 1)
        save(fig, "models.png")
    if summary.get("ablation"):
        rows = summary["ablation"]
        fig, ax = plt.subplots(figsize=(7, 3.5))
        ax.barh([r["configuration"] for r in rows], [r["f1"] for r in rows])
        ax.set_xlabel("macro F1")
        ax.set_xlim(0, 1)
        fig.tight_layout()
        save(fig, "ablation.png")
    tr = summary.get("transfer")
    if tr and tr["curves"]:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for d, c in tr["curves"].items():
            budgets = sorted(c, key=int)
            ax.plot([int(b) for b in budgets], [sum(c[b]) / len(c[b]) for b in budgets], marker="o", label=d)
        ax.set_xscale("log")
        ax.set_xlabel("labelled target reviews")
        ax.set_ylabel("macro F1")
        ax.legend()
        save(fig, "few_shot.png")
    return written
