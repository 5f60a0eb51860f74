"""BER curves: exact binomial bookkeeping, CSV round-trip and comparison."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import beta

CSV_COLUMNS = ["eb_n0_db", "bit_errors", "total_bits", "ber", "ci_low", "ci_high"]
CONFIDENCE = 0.95


class GridMismatchError(ValueError):
    pass


def _f(x):
    return format(float(x), ".17g")


def clopper_pearson(errors, total, confidence=CONFIDENCE):
    alpha = 1.0 - confidence
    lo = 0.0 if errors == 0 else float(beta.ppf(alpha / 2, errors, total - errors + 1))
    hi = 1.0 if errors == total else float(beta.ppf(1 - alpha / 2, errors + 1, total - errors))
    return lo, hi


@dataclass(frozen=True)
class BerPoint:
    eb_n0_db: float
    bit_errors: int
    total_bits: int

    def __post_init__(self):
        if self.total_bits <= 0:
            raise ValueError("total_bits must be positive")
        if not 0 <= self.bit_errors <= self.total_bits:
            raise ValueError("bit_errors must lie in [0, total_bits]")

    @property
    def ber(self):
        return self.bit_errors / self.total_bits

    def ci(self, confidence=CONFIDENCE):
        return clopper_pearson(self.bit_errors, self.total_bits, confidence)


@dataclass
class BerCurve:
    points: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.eb_n0_db)

    @property
    def eb_n0_db(self):
        return np.array([p.eb_n0_db for p in self.points])

    @property
    def ber(self):
        return np.array([p.ber for p in self.points])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for p in self.points:
                lo, hi = p.ci()
                w.writerow([_f(p.eb_n0_db), p.bit_errors, p.total_bits, _f(p.ber), _f(lo), _f(hi)])

    def write(self, stem):
        """Write ``<stem>.csv`` plus the metadata sidecar ``<stem>.meta.json``."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        self.to_csv(stem.with_suffix(".csv"))
        stem.with_suffix(".meta.json").write_text(
            json.dumps(self.metadata, indent=2, sort_keys=True, default=str) + "\n"
        )
        return stem.with_suffix(".csv")

    @classmethod
    def from_csv(cls, path, metadata=None):
        points = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                points.append(
                    BerPoint(float(row["eb_n0_db"]), int(row["bit_errors"]), int(row["total_bits"]))
                )
        if metadata is None:
            meta_path = Path(path).with_suffix(".meta.json")
            metadata = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls(points, metadata)

    def ebn0_at_ber(self, target):
        """Eb/N0 where the curve crosses ``target``, interpolating log10(BER) linearly.

        Returns ``nan`` when the curve never crosses the target.
        """
        x = self.eb_n0_db
        b = self.ber
        for i in range(len(x) - 1):
            b0, b1 = b[i], b[i + 1]
            if b0 >= target > b1:
                if b1 <= 0:
                    # zero errors: interpolate towards a half-count pseudo-BER
                    b1 = 0.5 / self.points[i + 1].total_bits
                    if b1 >= target:
                        return float(x[i + 1])
                l0, l1 = math.log10(b0), math.log10(b1)
                return float(x[i] + (math.log10(target) - l0) * (x[i + 1] - x[i]) / (l1 - l0))
        return float("nan")


def compare_curves(curves, names=None):
    """Pointwise comparison of every curve against the first one.

    Returns a dict with one row per (curve, Eb/N0) holding the BER ratio,
    difference, both confidence intervals, whether the curve is at or
    below the reference, whether the intervals overlap, and the Eb/N0
    positions where the ordering flips.
    """
    if len(curves) < 2:
        raise ValueError("compare_curves needs at least two curves")
    names = names or [c.metadata.get("name", f"curve{i}") for i, c in enumerate(curves)]
    ref = curves[0]
    grid = ref.eb_n0_db
    for c in curves[1:]:
        if c.eb_n0_db.shape != grid.shape or not np.array_equal(c.eb_n0_db, grid):
            raise GridMismatchError("curves must share the same Eb/N0 grid; interpolation is refused")
    rows = []
    crossings = {}
    for name, c in zip(names[1:], curves[1:]):
        signs = []
        for pr, pc in zip(ref.points, c.points):
            lo_r, hi_r = pr.ci()
            lo_c, hi_c = pc.ci()
            if pr.ber == 0 and pc.ber == 0:
                ratio = 1.0
            elif pr.ber == 0:
                ratio = math.inf
            else:
                ratio = pc.ber / pr.ber
            diff = pc.ber - pr.ber
            rows.append(
                {
                    "curve": name,
                    "reference": names[0],
                    "eb_n0_db": pr.eb_n0_db,
                    "ber": pc.ber,
                    "ref_ber": pr.ber,
                    "ratio": ratio,
                    "difference": diff,
                    "ci_low": lo_c,
                    "ci_high": hi_c,
                    "ref_ci_low": lo_r,
                    "ref_ci_high": hi_r,
                    "at_or_below_reference": pc.ber <= pr.ber,
                    "ci_overlap": not (hi_c < lo_r or hi_r < lo_c),
                }
            )
            signs.append(np.sign(diff))
        flips = []
        nonzero = [(x, s) for x, s in zip(grid, signs) if s != 0]
        for (x0, s0), (x1, s1) in zip(nonzero, nonzero[1:]):
            if s0 != s1:
                flips.append((float(x0), float(x1)))
        crossings[name] = flips
    return {"rows": rows, "crossings": crossings, "names": list(names)}


REPORT_COLUMNS = [
    "curve", "reference", "eb_n0_db", "ber", "ref_ber", "ratio", "difference",
    "ci_low", "ci_high", "ref_ci_low", "ref_ci_high", "at_or_below_reference", "ci_overlap",
]


def write_report(report, csv_path, summary_path=None):
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in report["rows"]:
            w.writerow([_f(v) if isinstance(v, float) else v for v in (row[c] for c in REPORT_COLUMNS)])
    if summary_path is not None:
        Path(summary_path).write_text(format_summary(report))


def format_summary(report):
    lines = []
    by_curve = {}
    for row in report["rows"]:
        by_curve.setdefault(row["curve"], []).append(row)
    for name, rows in by_curve.items():
        ref = rows[0]["reference"]
        lines.append(f"{name} vs {ref}")
        for r in rows:
            mark = "<=" if r["at_or_below_reference"] else "> "
            lines.append(
                f"  {r['eb_n0_db']:7.2f} dB  {r['ber']:.3e} {mark} {r['ref_ber']:.3e}  ratio {r['ratio']:.3g}"
            )
        flips = report["crossings"][name]
        lines.append("  crossings: " + (", ".join(f"{a:g}..{b:g} dB" for a, b in flips) if flips else "none"))
    return "\n".join(lines) + "\n"
