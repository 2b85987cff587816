"""Run traces: per-iteration error, payload and simulated-time records."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyTraces, MalformedLine

CSV_HEADER = "iter,rel_error,f_gap,bits_cum,time_ms"


def _format_number(value: float) -> str:
    value = float(value)
    if value.is_integer() and abs(value) < 2**63:
        return str(int(value))
    return repr(value)


@dataclass
class Trace:
    """One run (or seed-average): aligned per-iteration columns."""

    iters: np.ndarray
    rel_error: np.ndarray
    f_gap: np.ndarray
    bits_cum: np.ndarray
    time_ms: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.iters)

    def to_csv(self, path: str | Path) -> None:
        lines = [CSV_HEADER]
        for k in range(len(self.iters)):
            lines.append(
                ",".join(
                    (
                        str(int(self.iters[k])),
                        _format_number(self.rel_error[k]),
                        _format_number(self.f_gap[k]),
                        _format_number(self.bits_cum[k]),
                        _format_number(self.time_ms[k]),
                    )
                )
            )
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "Trace":
        text = Path(path).read_text().strip().splitlines()
        if not text or text[0].strip() != CSV_HEADER:
            raise MalformedLine(f"{path}: expected header {CSV_HEADER!r}")
        columns = [[], [], [], [], []]
        for lineno, line in enumerate(text[1:], start=2):
            parts = line.split(",")
            if len(parts) != 5:
                raise MalformedLine(f"{path}: line {lineno} has {len(parts)} fields")
            for col, part in zip(columns, parts):
                col.append(float(part))
        return cls(
            iters=np.asarray(columns[0], dtype=int),
            rel_error=np.asarray(columns[1]),
            f_gap=np.asarray(columns[2]),
            bits_cum=np.asarray(columns[3]),
            time_ms=np.asarray(columns[4]),
            meta={"path": str(path)},
        )

    def first_reach(self, threshold: float) -> dict | None:
        """First record with rel_error <= threshold, or None."""
        hits = np.nonzero(self.rel_error <= threshold)[0]
        if hits.size == 0:
            return None
        k = int(hits[0])
        return {
            "iter": int(self.iters[k]),
            "bits": float(self.bits_cum[k]),
            "time_ms": float(self.time_ms[k]),
        }


def average_traces(traces: list[Trace]) -> Trace:
    """Pointwise arithmetic mean across seeds; iterations must align."""
    if not traces:
        raise EmptyTraces("nothing to average")
    length = min(len(t) for t in traces)
    if length == 0:
        raise EmptyTraces("cannot average empty traces")
    first = traces[0]
    for t in traces[1:]:
        if not np.array_equal(t.iters[:length], first.iters[:length]):
            raise MalformedLine("traces have mismatched iteration grids")
    meta = {k: v for k, v in first.meta.items() if k != "seed"}
    meta["n_seeds"] = len(traces)
    return Trace(
        iters=first.iters[:length].copy(),
        rel_error=np.mean([t.rel_error[:length] for t in traces], axis=0),
        f_gap=np.mean([t.f_gap[:length] for t in traces], axis=0),
        bits_cum=np.mean([t.bits_cum[:length] for t in traces], axis=0),
        time_ms=np.mean([t.time_ms[:length] for t in traces], axis=0),
        meta=meta,
    )
