"""Pansharpening quality indices and the report writers."""

from .quality import (
    cd_conj,
    cd_mul,
    d_lambda,
    d_s,
    ergas,
    next_pow2,
    psnr,
    q2n,
    qnr,
    sam,
    uiqi,
    window_starts,
)
from .report import (
    FULL_COLUMNS,
    REDUCED_COLUMNS,
    FullReport,
    ReducedReport,
    full_metrics,
    reduced_metrics,
)

__all__ = [
    "FULL_COLUMNS", "FullReport", "REDUCED_COLUMNS", "ReducedReport", "cd_conj", "cd_mul",
    "d_lambda", "d_s", "ergas", "full_metrics", "next_pow2", "psnr", "q2n", "qnr",
    "reduced_metrics", "sam", "uiqi", "window_starts",
]
