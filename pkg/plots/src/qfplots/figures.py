"""Deterministic figure rendering from experiment CSV files.

Four figure kinds mirror the experiment summaries: planned flow count
versus horizon, detector error versus the detectability budget epsilon,
failure probability versus the reliability slack zeta, and decode accuracy
versus the codebook rate ratio. Theoretical overlays (capacity, the
1/2 - epsilon line) come from the plan JSON emitted by the harness, never
re-derived with different conventions.

Rendering is byte-stable: fixed backend, fonts, DPI, and stripped PNG
metadata, so identical inputs produce identical files.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import matplotlib
import numpy as np
from scipy.special import lambertw

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "svg.hashsalt": "qfplots",
}


class FigureKind(str, Enum):
    M_VS_T = "m-vs-T"
    PE_VS_EPS = "pe-vs-eps"
    PF_VS_ZETA = "pf-vs-zeta"
    DECODE_VS_RATE = "decode-vs-rate"


REQUIRED_COLUMNS = {
    FigureKind.M_VS_T: ("T", "m_planned"),
    FigureKind.PE_VS_EPS: ("epsilon", "pe_emp"),
    FigureKind.PF_VS_ZETA: ("zeta", "pf_emp"),
    FigureKind.DECODE_VS_RATE: ("rate", "decode_acc"),
}


class FigureError(ValueError):
    """Bad figure input; message names the missing column or file issue."""


@dataclass(frozen=True)
class FigureSpec:
    input_csv: str | Path
    kind: FigureKind
    output: str | Path
    plan_json: str | Path | None = None
    axis_overrides: dict = field(default_factory=dict)


def read_csv_columns(path: str | Path, columns: tuple[str, ...]) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FigureError(f"{path}: empty CSV, no header row")
        missing = [c for c in columns if c not in reader.fieldnames]
        if missing:
            raise FigureError(f"{path}: missing required columns {missing}")
        rows = list(reader)
    if not rows:
        raise FigureError(f"{path}: no data rows")
    return {c: np.array([float(r[c]) for r in rows]) for c in columns}


def load_plan(path: str | Path | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the output path. Deterministic per input."""
    data = read_csv_columns(spec.input_csv, REQUIRED_COLUMNS[spec.kind])
    plan = load_plan(spec.plan_json)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.5))
        if spec.kind is FigureKind.M_VS_T:
            _draw_m_vs_t(ax, data, plan)
        elif spec.kind is FigureKind.PE_VS_EPS:
            _draw_pe_vs_eps(ax, data)
        elif spec.kind is FigureKind.PF_VS_ZETA:
            _draw_pf_vs_zeta(ax, data)
        else:
            _draw_decode_vs_rate(ax, data)
        for key, value in spec.axis_overrides.items():
            getattr(ax, f"set_{key}")(value)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
        fig.tight_layout()
        out = Path(spec.output)
        fig.savefig(out, metadata=_stable_metadata(out))
        plt.close(fig)
    return out


def _stable_metadata(out: Path) -> dict:
    # Strip the library-version "Software" tag (and any date) so the byte
    # stream depends only on the drawn content.
    if out.suffix.lower() == ".png":
        return {"Software": None}
    if out.suffix.lower() == ".svg":
        return {"Date": None}
    return {}


def _draw_m_vs_t(ax, data: dict, plan: dict) -> None:
    T = data["T"]
    m = data["m_planned"]
    keep = m >= 1  # infeasible sweep points are flagged with m_planned = 0
    T, m = T[keep], m[keep]
    if T.size == 0:
        raise FigureError("m-vs-T: every row is flagged infeasible (m_planned < 1)")
    order = np.argsort(T)
    T, m = T[order], m[order]
    ax.plot(T, m, "o-", label="planned flow count")
    C = plan.get("C")
    if C is not None:
        shape = T / np.real(lambertw(C * T))
        c = float(np.sum(m * shape) / np.sum(shape**2))
        ax.plot(T, c * shape, "--", label=f"fit {c:.3g} * T / W(C T)")
        print(f"m-vs-T fitted constant c = {c:.6g}")
    ax.set_xlabel("horizon T (s)")
    ax.set_ylabel("flow count m")
    ax.set_title("Supported flows vs horizon")


def _draw_pe_vs_eps(ax, data: dict) -> None:
    eps = data["epsilon"]
    order = np.argsort(eps)
    eps, pe = eps[order], data["pe_emp"][order]
    ax.plot(eps, pe, "o-", label="empirical detector error")
    grid = np.linspace(float(eps.min()), float(eps.max()), 100)
    ax.plot(grid, np.maximum(0.5 - grid, 0.0), "--", label="1/2 - epsilon bound")
    ax.set_xlabel("detectability budget epsilon")
    ax.set_ylabel("detector error (P_FA + P_MD) / 2")
    ax.set_title("Invisibility margin")


def _draw_pf_vs_zeta(ax, data: dict) -> None:
    zeta = data["zeta"]
    order = np.argsort(zeta)
    zeta, pf = zeta[order], data["pf_emp"][order]
    ax.plot(zeta, pf, "o-", label="empirical failure probability")
    grid = np.linspace(float(zeta.min()), float(zeta.max()), 100)
    ax.plot(grid, grid, "--", label="target P_f = zeta")
    ax.set_xlabel("reliability slack zeta")
    ax.set_ylabel("failure probability")
    ax.set_title("Reliability target")


def _draw_decode_vs_rate(ax, data: dict) -> None:
    rate = data["rate"]
    order = np.argsort(rate)
    rate, acc = rate[order], data["decode_acc"][order]
    ax.plot(rate, acc, "o-", label="decode accuracy")
    ax.axvline(1.0, linestyle="--", color="gray", label="capacity bound ln(M)/(C T2) = 1")
    ax.set_xlabel("rate ratio ln(M) / (C T2)")
    ax.set_ylabel("decode accuracy")
    ax.set_title("Decoding vs codebook rate")
