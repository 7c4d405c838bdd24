"""Input documents and JSON report (de)serialization.

Reports are written with 17 significant digits so floats round-trip exactly.
Non-finite values never appear as numbers: they are written as the strings
``"plus-infinity"`` / ``"minus-infinity"``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, is_dataclass
from pathlib import Path

import numpy as np

from .baselines import HsdQuantile
from .clb import LowerBound
from .model import CovFamilyTag, GaussianModel, multinomial_gaussian_approx, sample_covariance, validate
from .sim import SimResult
from .verifier import FastCheckResult, SelectivePValue, VerificationReport

PLUS_INF = "plus-infinity"
MINUS_INF = "minus-infinity"


class InputError(ValueError):
    """Malformed or inconsistent input document."""


@dataclass
class InputDocument:
    """One of three covariance sources: ``covariance``, ``samples`` (rows whose
    sample covariance is the covariance of the observation vector, e.g.
    bootstrap replicates) or ``counts`` (multinomial mode, observations are the
    proportions)."""

    observations: list[float] | None = None
    covariance: list[list[float]] | None = None
    samples: list[list[float]] | None = None
    counts: list[int] | None = None
    t: int | None = None
    labels: list[str] | None = None

    def check(self) -> None:
        sources = [s for s in ("covariance", "samples", "counts") if getattr(self, s) is not None]
        if len(sources) != 1:
            raise InputError(f"exactly one of covariance/samples/counts is required, got {sources or 'none'}")
        if self.counts is not None:
            if self.observations is not None:
                raise InputError("multinomial mode derives observations from counts; drop 'observations'")
        elif self.observations is None:
            raise InputError("'observations' is required")
        if self.t is not None and self.counts is None:
            raise InputError("'t' only applies with 'counts'")
        n = len(self.counts) if self.counts is not None else len(self.observations)
        if self.labels is not None and len(self.labels) != n:
            raise InputError(f"{len(self.labels)} labels for {n} observations")

    def to_model(self) -> GaussianModel:
        self.check()
        if self.counts is not None:
            try:
                pi_hat, sigma = multinomial_gaussian_approx(self.counts, self.t)
            except ValueError as exc:
                raise InputError(str(exc)) from None
            return validate(pi_hat, sigma)
        if self.samples is not None:
            try:
                sigma = sample_covariance(self.samples)
            except ValueError as exc:
                raise InputError(str(exc)) from None
            return validate(self.observations, sigma)
        return validate(self.observations, self.covariance)


def _floats(values, where: str) -> list[float]:
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError):
        raise InputError(f"non-numeric entry in {where}") from None


def parse_document(data: dict) -> InputDocument:
    if not isinstance(data, dict):
        raise InputError("input must be a JSON object")
    known = {"observations", "covariance", "samples", "counts", "t", "labels"}
    unknown = set(data) - known
    if unknown:
        raise InputError(f"unknown fields: {sorted(unknown)}")
    doc = InputDocument(
        observations=_floats(data["observations"], "observations") if "observations" in data else None,
        covariance=[_floats(r, "covariance") for r in data["covariance"]] if "covariance" in data else None,
        samples=[_floats(r, "samples") for r in data["samples"]] if "samples" in data else None,
        counts=list(data["counts"]) if "counts" in data else None,
        t=data.get("t"),
        labels=[str(s) for s in data["labels"]] if "labels" in data else None,
    )
    doc.check()
    return doc


def _read_csv(path: Path) -> tuple[list[str], list[list[float]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one data row")
    header = [c.strip() for c in rows[0]]
    body = [_floats(r, str(path)) for r in rows[1:]]
    if any(len(r) != len(header) for r in body):
        raise InputError(f"{path}: ragged rows")
    return header, body


def load_document(path, covariance_path=None) -> InputDocument:
    """Read a JSON document, or an observations CSV plus a covariance CSV.

    CSV files are comma-separated with a header row of labels; the
    observations file has one data row, the covariance file n rows.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if covariance_path is None:
            raise InputError("CSV input needs --covariance with the covariance CSV")
        labels, obs_rows = _read_csv(path)
        if len(obs_rows) != 1:
            raise InputError(f"{path}: expected exactly one row of observations")
        cov_labels, cov = _read_csv(Path(covariance_path))
        if cov_labels != labels:
            raise InputError("observation and covariance headers differ")
        doc = InputDocument(observations=obs_rows[0], covariance=cov, labels=labels)
        doc.check()
        return doc
    if covariance_path is not None:
        raise InputError("--covariance only applies to CSV input")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    return parse_document(data)


# --- serialization ------------------------------------------------------------


def _plain(obj):
    """Dataclasses/tuples/numpy scalars to JSON-ready Python values."""
    if is_dataclass(obj):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _encode(value, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, bool) or value is None or isinstance(value, (str, int)):
        return json.dumps(value)
    if isinstance(value, float):
        if math.isnan(value):
            return json.dumps("nan")
        if math.isinf(value):
            return json.dumps(PLUS_INF if value > 0 else MINUS_INF)
        text = format(value, ".17g")
        if text.lstrip("-").isdigit():
            text += ".0"
        return text
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in value):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in value) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(_plain(obj), indent, 0)


def _num(value) -> float:
    if value == PLUS_INF:
        return math.inf
    if value == MINUS_INF:
        return -math.inf
    if value == "nan":
        return math.nan
    return float(value)


def report_to_dict(report) -> dict:
    return json.loads(dumps(report))


def verification_report_from_dict(d: dict) -> VerificationReport:
    fc = d["fast_check"]
    tag = d.get("reduction_detected")
    return VerificationReport(
        reject=bool(d["reject"]),
        alpha=_num(d["alpha"]),
        delta=_num(d["delta"]),
        k=int(d["k"]),
        method=d["method"],
        selected=tuple(int(i) for i in d["selected"]),
        worst_pair=tuple(int(i) for i in d["worst_pair"]),
        worst_p=_num(d["worst_p"]),
        worst_p_kind=d["worst_p_kind"],
        fast_check=FastCheckResult(
            i=int(fc["i"]), j=int(fc["j"]), d_plus=_num(fc["d_plus"]),
            p_two_sided=_num(fc["p_two_sided"]), passes=bool(fc["passes"]),
        ),
        all_pairs=tuple(
            SelectivePValue(
                i=int(p["i"]), j=int(p["j"]), p=_num(p["p"]), trunc_lo=_num(p["trunc_lo"]),
                trunc_hi=_num(p["trunc_hi"]), d_delta=_num(p["d_delta"]),
            )
            for p in d["all_pairs"]
        ),
        reduction_detected=None if tag is None else CovFamilyTag(
            tag["kind"], None if tag["parameter"] is None else _num(tag["parameter"])
        ),
        tie_broken=bool(d["tie_broken"]),
        rho_threshold_hits=int(d["rho_threshold_hits"]),
        psd=bool(d["psd"]),
        notes=tuple(d["notes"]),
    )


def lower_bound_from_dict(d: dict) -> LowerBound:
    return LowerBound(
        value=_num(d["value"]),
        alpha=_num(d["alpha"]),
        method=d["method"],
        iterations=int(d["iterations"]),
        bracket=(_num(d["bracket"][0]), _num(d["bracket"][1])),
        status=d["status"],
    )


def hsd_quantile_from_dict(d: dict) -> HsdQuantile:
    return HsdQuantile(
        h=_num(d["h"]), alpha=_num(d["alpha"]), reps=int(d["reps"]), seed=int(d["seed"]),
        std_error=_num(d["std_error"]), workers=int(d["workers"]), sigma_checksum=d["sigma_checksum"],
    )


def sim_result_from_dict(d: dict) -> SimResult:
    return SimResult(
        scenario=d["scenario"],
        estimand=d["estimand"],
        method=d["method"],
        target_s=tuple(int(i) for i in d["target_s"]),
        reps=int(d["reps"]),
        replicates=int(d["replicates"]),
        conditioning_event_rate=_num(d["conditioning_event_rate"]),
        conditional_rate=_num(d["conditional_rate"]),
        std_error=_num(d["std_error"]),
        seed=int(d["seed"]),
        alpha=_num(d["alpha"]),
        delta=_num(d["delta"]),
        boundary_leakage=None if d.get("boundary_leakage") is None else int(d["boundary_leakage"]),
    )
