"""Deterministic JSON and SVG artifact writers."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .estimator import EnsembleStats, EstimationTrace  # noqa: E402
from .montecarlo import DetectionSeries  # noqa: E402

# fixed salt and no Date entry keep SVG bytes a function of the data only
_SVG_RC = {"svg.hashsalt": "photon-presence", "svg.fonttype": "none"}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) else (str(v) if math.isinf(v) else v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj) -> Path:
    """Sorted, indented JSON; NaN becomes null and infinities become strings."""
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    return path


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_counts(series: DetectionSeries, path, title: Optional[str] = None) -> Path:
    """Counts per window with the expectation curve."""
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(7, 3.5))
        k = np.arange(1, len(series) + 1)
        ax.plot(k, series.counts, ".", ms=3, color="tab:blue", label="simulated $N_k$")
        ax.plot(k, series.expected, "-", lw=1, color="black", label=r"$N_s P_k$")
        ax.set_xlabel("time step k")
        ax.set_ylabel("postselected photons")
        ax.set_title(title or series.model.label)
        ax.legend(loc="upper right", fontsize=8)
        fig.tight_layout()
        return _save(fig, path)


def plot_traces(traces: Sequence[Tuple[EstimationTrace, str, str]], path, title: str = "") -> Path:
    """Estimated frequency against prefix length m, with the true values dashed."""
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(7, 3.5))
        for tr, label, color in traces:
            m = np.arange(1, tr.estimates.size + 1)
            ax.plot(m, tr.estimates, ".", ms=3, color=color, label=label)
            ax.axhline(tr.true_omega, ls="--", lw=0.8, color=color)
        ax.set_xlabel("m")
        ax.set_ylabel(r"$\tilde\omega$ [s$^{-1}$]")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper right", fontsize=8)
        fig.tight_layout()
        return _save(fig, path)


def plot_ensembles(stats: Iterable[Tuple[EnsembleStats, str, str]], path, title: str = "") -> Path:
    """Mean deviation (left) and mean cumulative postselected photons (right)."""
    with plt.rc_context(_SVG_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.5))
        for st, label, color in stats:
            m = np.arange(1, st.mean_deviation.size + 1)
            ax1.plot(m, st.mean_deviation, "-", lw=1, color=color, label=label)
            ax2.plot(m, st.mean_n_post, "-", lw=1, color=color, label=label)
        ax1.axhline(1.0, ls=":", lw=0.8, color="gray")
        ax1.set_yscale("log")
        ax1.set_xlabel("m")
        ax1.set_ylabel(r"$\langle|\tilde\omega-\omega|\rangle$ [s$^{-1}$]")
        ax2.set_yscale("log")
        ax2.set_xlabel("m")
        ax2.set_ylabel(r"$\langle N_m \rangle$")
        ax1.legend(fontsize=8)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)
