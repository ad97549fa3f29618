"""Per-sample metric reports with a mean +/- population-std summary row."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..waldsim.degrade import DEFAULT_SIGMA, RATIO
from .quality import d_lambda, d_s, ergas, psnr, q2n, qnr, sam

REDUCED_COLUMNS = ("psnr", "sam", "ergas", "q2n")
FULL_COLUMNS = ("d_lambda", "d_s", "qnr")
SUMMARY_ID = "mean±std"


@dataclass
class _Report:
    columns: tuple[str, ...] = ()
    rows: list[dict] = field(default_factory=list)

    def add(self, sample_id: str, **values) -> None:
        self.rows.append({"id": sample_id, **{c: float(values[c]) for c in self.columns}})

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=np.float64)

    def mean(self) -> dict[str, float]:
        return {c: float(np.mean(self.column(c))) for c in self.columns}

    def std(self) -> dict[str, float]:
        """Population std; NaN when a column holds an infinite value (PSNR of exact matches)."""
        with np.errstate(invalid="ignore"):
            return {c: float(np.std(self.column(c))) for c in self.columns}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("id",) + self.columns)
        for r in self.rows:
            writer.writerow([r["id"]] + [_num(r[c]) for c in self.columns])
        mean, std = self.mean(), self.std()
        writer.writerow([SUMMARY_ID] + [f"{_num(mean[c])}±{_num(std[c])}" for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "columns": list(self.columns),
            "samples": [{k: _json_num(v) for k, v in r.items()} for r in self.rows],
            "mean": {k: _json_num(v) for k, v in self.mean().items()},
            "std": {k: _json_num(v) for k, v in self.std().items()},
        }
        return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def write(self, out_dir, stem: str = "report") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        json_path.write_text(self.to_json(), encoding="utf-8")
        return csv_path, json_path


class ReducedReport(_Report):
    def __init__(self):
        super().__init__(columns=REDUCED_COLUMNS)


class FullReport(_Report):
    def __init__(self):
        super().__init__(columns=FULL_COLUMNS)


def _num(v: float) -> str:
    if not math.isfinite(v):
        return str(v)
    return f"{v:.6f}"


def _json_num(v):
    # JSON has no inf/nan literals; use their string spellings
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def reduced_metrics(pred, gt, ratio: int = RATIO, window: int = 32, peak: float = 1.0) -> dict:
    return {
        "psnr": psnr(pred, gt, peak),
        "sam": sam(pred, gt),
        "ergas": ergas(pred, gt, ratio),
        "q2n": q2n(pred, gt, window),
    }


def full_metrics(pred, lrms, pan, pan_lr=None, ratio: int = RATIO, window: int = 32,
                 sigma: float = DEFAULT_SIGMA) -> dict:
    dl = d_lambda(pred, lrms, window=window, ratio=ratio)
    ds = d_s(pred, pan, lrms, pan_lr, window=window, ratio=ratio, sigma=sigma)
    return {"d_lambda": dl, "d_s": ds, "qnr": qnr(dl, ds)}
