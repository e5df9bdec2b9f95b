"""Denormal-frequency telemetry.

Quantized tensors are summarized into per-(tensor, phase, step) class
counts.  The headline number is the denormal fraction: denormal count
over total element count, zeros, infinities and NaNs included in the
denominator only.  A sink collects records over a run and reduces them
to per-tensor and global maxima, which is what the convergence studies
care about: the worst-case density of denormals a hardware unit would
have had to absorb.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formats import FpFormat, classify_array

__all__ = ["Phase", "DenormalStats", "RunSummary", "TelemetrySink"]

CSV_COLUMNS = [
    "run_id",
    "tensor_id",
    "phase",
    "step",
    "n_zero",
    "n_denormal",
    "n_normal",
    "n_inf",
    "n_nan",
    "fraction",
]


class Phase(enum.Enum):
    FORWARD_ACTIVATION = "forward_activation"
    WEIGHT = "weight"
    ACTIVATION_GRADIENT = "activation_gradient"


def _phase_str(phase) -> str:
    if isinstance(phase, Phase):
        return phase.value
    if phase is None:
        return ""
    return str(phase)


@dataclass(frozen=True)
class DenormalStats:
    """Class counts for one tensor at one step."""

    tensor_id: str
    phase: str
    step: int
    n_zero: int
    n_denormal: int
    n_normal: int
    n_inf: int
    n_nan: int

    @classmethod
    def from_array(
        cls, values: np.ndarray, fmt: FpFormat, *, tensor_id: str, phase, step: int
    ) -> "DenormalStats":
        codes = classify_array(values, fmt)
        counts = np.bincount(codes.ravel(), minlength=5)
        return cls(
            tensor_id=tensor_id,
            phase=_phase_str(phase),
            step=step,
            n_zero=int(counts[0]),
            n_denormal=int(counts[1]),
            n_normal=int(counts[2]),
            n_inf=int(counts[3]),
            n_nan=int(counts[4]),
        )

    @property
    def total(self) -> int:
        return self.n_zero + self.n_denormal + self.n_normal + self.n_inf + self.n_nan

    @property
    def fraction_denormal(self) -> float:
        """Denormal share of all elements. Empty tensors count as 0."""
        total = self.total
        if total == 0:
            return 0.0
        return self.n_denormal / total

    def key(self) -> tuple[str, int, str]:
        return (self.tensor_id, self.step, self.phase)


@dataclass
class RunSummary:
    """Reduction of a run's telemetry plus run-level metadata."""

    run_id: str
    fmt: str
    dls: bool
    accum_mode: str
    per_tensor_max: dict[str, float]
    global_max: float
    n_records: int
    final_loss: float | None = None
    outcome: str | None = None

    def to_json(self) -> str:
        payload = {
            "run_id": self.run_id,
            "format": self.fmt,
            "dls": self.dls,
            "accum_mode": self.accum_mode,
            "per_tensor_max_denormal_fraction": self.per_tensor_max,
            "global_max_denormal_fraction": self.global_max,
            "n_records": self.n_records,
            "final_loss": self.final_loss,
            "outcome": self.outcome,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunSummary":
        d = json.loads(text)
        return cls(
            run_id=d["run_id"],
            fmt=d["format"],
            dls=d["dls"],
            accum_mode=d["accum_mode"],
            per_tensor_max=d["per_tensor_max_denormal_fraction"],
            global_max=d["global_max_denormal_fraction"],
            n_records=d["n_records"],
            final_loss=d.get("final_loss"),
            outcome=d.get("outcome"),
        )


@dataclass
class TelemetrySink:
    """Collects DenormalStats records for one run.

    Re-recording the same (tensor_id, step, phase) is an error: it would
    silently double-count in the maxima.
    """

    run_id: str
    records: list[DenormalStats] = field(default_factory=list)
    _seen: set[tuple[str, int, str]] = field(default_factory=set)

    def record(self, stats: DenormalStats) -> None:
        key = stats.key()
        if key in self._seen:
            raise ValueError(f"duplicate telemetry record for {key}")
        self._seen.add(key)
        self.records.append(stats)

    def per_tensor_max(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for r in self.records:
            frac = r.fraction_denormal
            if frac > out.get(r.tensor_id, -1.0):
                out[r.tensor_id] = frac
        return dict(sorted(out.items()))

    def global_max(self) -> float:
        per = self.per_tensor_max()
        return max(per.values(), default=0.0)

    def summarize(
        self,
        *,
        fmt: str,
        dls: bool,
        accum_mode: str,
        final_loss: float | None = None,
        outcome: str | None = None,
    ) -> RunSummary:
        return RunSummary(
            run_id=self.run_id,
            fmt=fmt,
            dls=dls,
            accum_mode=accum_mode,
            per_tensor_max=self.per_tensor_max(),
            global_max=self.global_max(),
            n_records=len(self.records),
            final_loss=final_loss,
            outcome=outcome,
        )

    # ── CSV round trip ─────────────────────────────────────────────────

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow(
                    [
                        self.run_id,
                        r.tensor_id,
                        r.phase,
                        r.step,
                        r.n_zero,
                        r.n_denormal,
                        r.n_normal,
                        r.n_inf,
                        r.n_nan,
                        repr(r.fraction_denormal),
                    ]
                )

    @classmethod
    def read_csv(cls, path: str | Path) -> "TelemetrySink":
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != CSV_COLUMNS:
                raise ValueError(f"unexpected telemetry CSV header: {reader.fieldnames}")
            sink = None
            for row in reader:
                if sink is None:
                    sink = cls(run_id=row["run_id"])
                stats = DenormalStats(
                    tensor_id=row["tensor_id"],
                    phase=row["phase"],
                    step=int(row["step"]),
                    n_zero=int(row["n_zero"]),
                    n_denormal=int(row["n_denormal"]),
                    n_normal=int(row["n_normal"]),
                    n_inf=int(row["n_inf"]),
                    n_nan=int(row["n_nan"]),
                )
                declared = float(row["fraction"])
                if declared != stats.fraction_denormal:
                    raise ValueError(
                        f"fraction column disagrees with counts at {stats.key()}"
                    )
                sink.record(stats)
        return sink if sink is not None else cls(run_id="")
