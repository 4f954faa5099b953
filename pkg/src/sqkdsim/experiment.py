"""Experiment orchestration and report emission."""
from __future__ import annotations

import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Sequence

from .adversary import SequencingError
from .analysis import RunReport, detection_probability
from .config import ExperimentSpec, NamedRun, RunConfig
from .exact import BranchBudgetExceeded, enumerate_exact, round_distribution
from .protocol import run_protocol, simulate_rounds
from .quantum import CorruptStateError
from .transcript import RoundCategory, RoundRecord

__all__ = [
    "report_to_dict",
    "reports_to_json",
    "reports_to_csv",
    "transcript_lines",
    "DetectionPoint",
    "estimate_detection_curve",
    "execute",
]

log = logging.getLogger(__name__)

DECIMALS = 6
CSV_COLUMNS = (
    "run_name",
    "category",
    "count",
    "qber",
    "sift_rate",
    "eve_agreement",
    "eve_known_fraction",
    "mutual_information_bits",
    "verdict",
)


def _num(x: Optional[float]) -> Optional[float]:
    return None if x is None else round(float(x), DECIMALS)


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.{DECIMALS}f}"
    return str(x)


def report_to_dict(name: str, config: RunConfig, report: RunReport) -> dict:
    return {
        "name": name,
        "config": config.to_dict(),
        "counts": {c.value: report.counts[c] for c in RoundCategory},
        "mismatches": {c.value: report.mismatches[c] for c in RoundCategory},
        "qber": {c.value: _num(report.qber[c]) for c in RoundCategory},
        "raw_key_length": report.raw_key_length,
        "sift_rate": _num(report.sift_rate),
        "eve_agreement": _num(report.eve_agreement),
        "eve_known_fraction": _num(report.eve_known_fraction),
        "mutual_information_bits": _num(report.mutual_information_bits),
        "verdict": report.verdict.value,
    }


def reports_to_json(entries: Sequence[dict]) -> str:
    return json.dumps(list(entries), indent=2, sort_keys=True) + "\n"


def reports_to_csv(entries: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for entry in sorted(entries, key=lambda e: e["name"]):
        for cat in RoundCategory:
            writer.writerow(
                [
                    entry["name"],
                    cat.value,
                    entry["counts"][cat.value],
                    _cell(entry["qber"][cat.value]),
                    _cell(entry["sift_rate"]),
                    _cell(entry["eve_agreement"]),
                    _cell(entry["eve_known_fraction"]),
                    _cell(entry["mutual_information_bits"]),
                    entry["verdict"],
                ]
            )
    return buf.getvalue()


def transcript_lines(name: str, records: Iterable[RoundRecord]) -> Iterable[str]:
    for rec in records:
        yield json.dumps({"run": name, **rec.to_dict()}, sort_keys=True, separators=(",", ":")) + "\n"


@dataclass(frozen=True)
class DetectionPoint:
    m: int
    trials: int
    detected: int
    per_photon_error: float

    @property
    def observed(self) -> float:
        return self.detected / self.trials

    @property
    def predicted(self) -> float:
        return detection_probability(self.per_photon_error, self.m)


def estimate_detection_curve(
    config: RunConfig, m_values: Sequence[int], trials: int, chunk: int = 65536
) -> list[DetectionPoint]:
    """Monte Carlo chance that ``m`` CTRL_X check photons reveal an error.

    Rounds are simulated in order and their CTRL_X check results split into
    ``trials`` consecutive disjoint blocks of ``m``.  All ``m`` share the same
    underlying sequence.  The prediction uses the exact per-photon CTRL_X
    error probability from branch enumeration.
    """
    if trials < 1 or not m_values or min(m_values) < 1:
        raise ValueError("need trials >= 1 and every m >= 1")
    needed = max(m_values) * trials
    errors: list[bool] = []
    start = 0
    while len(errors) < needed:
        for rec in simulate_rounds(config, start, start + chunk):
            if rec.category is RoundCategory.CTRL_X:
                errors.append(rec.alice_bit != rec.alice_return_bit)
        start += chunk
        if start > 1000 * needed:
            raise RuntimeError("configuration produces too few CTRL_X rounds")
    dist, _ = round_distribution(config)
    e_exact = sum(p for o, p in dist.items() if o.category is RoundCategory.CTRL_X and o.error)
    e_exact /= sum(p for o, p in dist.items() if o.category is RoundCategory.CTRL_X)
    points = []
    for m in m_values:
        detected = sum(any(errors[t * m : (t + 1) * m]) for t in range(trials))
        points.append(DetectionPoint(m, trials, detected, float(e_exact)))
    return points


def _detection_rows(name: str, points: Sequence[DetectionPoint]) -> list[dict]:
    return [
        {
            "name": name,
            "m": p.m,
            "trials": p.trials,
            "detected": p.detected,
            "observed": _num(p.observed),
            "predicted": _num(p.predicted),
            "per_photon_error": _num(p.per_photon_error),
        }
        for p in points
    ]


def _rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _exact_entry(run: NamedRun) -> dict:
    return {"name": run.name, "config": run.config.to_dict(), **enumerate_exact(run.config).to_dict()}


def _exact_csv(entries: Sequence[dict]) -> str:
    rows = [
        {
            "run_name": e["name"],
            "category": cat.value,
            "category_probability": e["category_probability"][cat.value],
            "error_probability": e["error_probability"][cat.value],
            "eve_bob_agreement": e["eve_bob_agreement"],
            "abort_probability": e["abort_probability"],
        }
        for e in sorted(entries, key=lambda e: e["name"])
        for cat in RoundCategory
    ]
    return _rows_to_csv(
        rows,
        ("run_name", "category", "category_probability", "error_probability", "eve_bob_agreement", "abort_probability"),
    )


def _write(text: str, path: Optional[str], stdout: IO[str]) -> None:
    if path is None or path == "-":
        stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def execute(
    spec: ExperimentSpec,
    *,
    transcript_path: Optional[str] = None,
    exact: bool = False,
    workers: int = 1,
    detection_m: Optional[Sequence[int]] = None,
    trials: int = 10_000,
    stdout: Optional[IO[str]] = None,
    stderr: Optional[IO[str]] = None,
) -> int:
    """Run every experiment in ``spec`` and write the report.

    Returns 0 on success whatever the verdicts; 1 when a run cannot be
    executed or its output cannot be written.
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        if exact:
            entries = [_exact_entry(run) for run in spec.runs]
            text = reports_to_json(entries) if spec.format == "json" else _exact_csv(entries)
        elif detection_m:
            rows = []
            for run in spec.runs:
                log.info("detection curve for %s", run.name)
                rows += _detection_rows(run.name, estimate_detection_curve(run.config, detection_m, trials))
            if spec.format == "json":
                text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
            else:
                text = _rows_to_csv(rows, ("name", "m", "trials", "detected", "observed", "predicted", "per_photon_error"))
        else:
            entries = []
            transcript = open(transcript_path, "w", encoding="utf-8") if transcript_path else None
            try:
                for run in spec.runs:
                    log.info("running %s (%d rounds, %s)", run.name, run.config.rounds, run.config.strategy.name)
                    records, report = run_protocol(run.config, workers=workers)
                    entries.append(report_to_dict(run.name, run.config, report))
                    if transcript:
                        transcript.writelines(transcript_lines(run.name, records))
            finally:
                if transcript:
                    transcript.close()
            text = reports_to_json(entries) if spec.format == "json" else reports_to_csv(entries)
        _write(text, spec.out, stdout)
    except OSError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    except (SequencingError, CorruptStateError, BranchBudgetExceeded, AssertionError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return 1
    return 0
