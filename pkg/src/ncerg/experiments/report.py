"""Merging suite reports into JSON and CSV outputs."""
from __future__ import annotations

import csv
import io
import json
import os

from .runner import TABLE_FIELDS, strip_timing

CHECK_FIELDS = ("suite", "seed", "check", "instance", "value", "pass")
PLOT_FIELDS = ("series", "x", "y")


def load(path: str) -> list[dict]:
    with open(path) as fh:
        obj = json.load(fh)
    if isinstance(obj, dict) and "reports" in obj:
        return list(obj["reports"])
    return [obj]


def _key(report: dict) -> str:
    return json.dumps(strip_timing(report), sort_keys=True)


def merge(reports: list[dict]) -> dict:
    """Deduplicate (ignoring timing) and order by (suite, seed, content)."""
    unique = {}
    for r in reports:
        unique.setdefault(_key(r), r)
    ordered = sorted(unique.items(), key=lambda kv: (kv[1].get("suite", ""), kv[1].get("seed", 0), kv[0]))
    return {"reports": [r for _, r in ordered]}


def checks_csv(merged: dict) -> str:
    """One row per (check, instance)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CHECK_FIELDS)
    for rep in merged["reports"]:
        for chk in rep.get("checks", []):
            for i, v in enumerate(chk.get("values", [])):
                w.writerow((rep["suite"], rep["seed"], chk["name"], i, repr(v), chk["pass"]))
    return buf.getvalue()


def plot_csv(merged: dict) -> str:
    """Plot data: lambda against the normalized distribution, and p against empirical constants."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_FIELDS)
    for rep in merged["reports"]:
        for chk in rep.get("checks", []):
            for x, y in chk.get("plot", []):
                w.writerow((f"{rep['suite']}:{chk['name']}", repr(x), repr(y)))
        for row in rep.get("table", []):
            w.writerow((f"constant:{row['class']}:L={row['length']}", repr(float(row["p"])), repr(row["max_ratio"])))
    return buf.getvalue()


def table_rows(merged: dict) -> list[dict]:
    rows = []
    for rep in merged["reports"]:
        rows.extend(rep.get("table", []))
    return rows


def write(merged: dict, out_dir: str, fmt: str = "json") -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if fmt == "json":
        path = os.path.join(out_dir, "merged.json")
        with open(path, "w") as fh:
            fh.write(json.dumps(merged, indent=2) + "\n")
        paths.append(path)
    elif fmt == "csv":
        path = os.path.join(out_dir, "checks.csv")
        with open(path, "w") as fh:
            fh.write(checks_csv(merged))
        paths.append(path)
        rows = table_rows(merged)
        if rows:
            path = os.path.join(out_dir, "constants.csv")
            with open(path, "w") as fh:
                w = csv.DictWriter(fh, TABLE_FIELDS, lineterminator="\n")
                w.writeheader()
                w.writerows(rows)
            paths.append(path)
    else:
        raise ValueError("format must be 'json' or 'csv'")
    path = os.path.join(out_dir, "plot_data.csv")
    with open(path, "w") as fh:
        fh.write(plot_csv(merged))
    paths.append(path)
    return paths
