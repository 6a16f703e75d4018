"""Scenario files: JSON objects describing a simulation and the tests to run on it.

Example::

    {
      "law": "beta(1,1)",
      "statistics": ["L"],
      "n": [1000],
      "replicates": 100000,
      "seed": 42,
      "tests": [{"statistic": "L", "n": 1000, "kind": "chi_square",
                 "target": "geometric:0.5"}]
    }

Top-level keys: ``law`` (required), ``statistics``, ``n`` or ``log_n``,
``replicates``, ``seed``, ``method``, ``tests``, ``outputs``.  Test keys:
``statistic``, ``n`` or ``log_n``, ``kind`` (chi_square | ks | moment | tv),
``target`` (a distribution tag or ``"exact"``), ``threshold``, ``mean``.
Unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from .errors import SieveError
from .laws import parse_law
from .sim import STATISTICS

TEST_KINDS = ("chi_square", "ks", "moment", "tv")
METHODS = ("marks", "coins")


class ScenarioError(SieveError, ValueError):
    pass


@dataclass(frozen=True)
class TestSpec:
    __test__ = False  # not a pytest class

    statistic: str
    kind: str
    target: str
    n: Optional[int] = None
    log_n: Optional[float] = None
    threshold: Optional[float] = None
    mean: Optional[float] = None

    _KEYS = ("statistic", "kind", "target", "n", "log_n", "threshold", "mean")

    @classmethod
    def from_dict(cls, d) -> "TestSpec":
        if not isinstance(d, dict):
            raise ScenarioError("each test must be an object")
        _reject_unknown(d, cls._KEYS, "test")
        for k in ("statistic", "kind", "target"):
            if k not in d:
                raise ScenarioError(f"test is missing {k!r}")
        spec = cls(statistic=_str(d["statistic"], "statistic"), kind=_str(d["kind"], "kind"),
                   target=_str(d["target"], "target"), n=_opt_int(d.get("n"), "n"),
                   log_n=_opt_float(d.get("log_n"), "log_n"),
                   threshold=_opt_float(d.get("threshold"), "threshold"),
                   mean=_opt_float(d.get("mean"), "mean"))
        if spec.statistic not in STATISTICS:
            raise ScenarioError(f"unknown statistic {spec.statistic!r}")
        if spec.kind not in TEST_KINDS:
            raise ScenarioError(f"unknown test kind {spec.kind!r}; expected one of {TEST_KINDS}")
        if (spec.n is None) == (spec.log_n is None):
            raise ScenarioError("a test needs exactly one of 'n' or 'log_n'")
        return spec

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class Scenario:
    law: str
    statistics: List[str] = field(default_factory=lambda: list(STATISTICS))
    n: Optional[List[int]] = None
    log_n: Optional[List[float]] = None
    replicates: int = 1000
    seed: int = 0
    method: str = "marks"
    tests: List[TestSpec] = field(default_factory=list)
    outputs: dict = field(default_factory=dict)

    _KEYS = ("law", "statistics", "n", "log_n", "replicates", "seed", "method", "tests",
             "outputs")
    _OUTPUT_KEYS = ("csv", "json", "report")

    @classmethod
    def from_dict(cls, d) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("a scenario must be a JSON object")
        _reject_unknown(d, cls._KEYS, "scenario")
        if "law" not in d:
            raise ScenarioError("scenario is missing 'law'")
        law = _str(d["law"], "law")
        try:
            parse_law(law)
        except SieveError as exc:
            raise ScenarioError(str(exc)) from exc
        stats_ = d.get("statistics", list(STATISTICS))
        if not isinstance(stats_, list) or not all(s in STATISTICS for s in stats_):
            raise ScenarioError(f"statistics must be a list drawn from {STATISTICS}")
        n = d.get("n")
        log_n = d.get("log_n")
        if n is not None:
            n = [_int(v, "n") for v in _list(n, "n")]
            if any(v < 0 for v in n):
                raise ScenarioError("n must be nonnegative")
        if log_n is not None:
            log_n = [_float(v, "log_n") for v in _list(log_n, "log_n")]
            if any(not v > 0 for v in log_n):
                raise ScenarioError("log_n must be positive")
        if n is None and log_n is None:
            raise ScenarioError("scenario needs 'n' or 'log_n'")
        method = _str(d.get("method", "marks"), "method")
        if method not in METHODS:
            raise ScenarioError(f"method must be one of {METHODS}")
        reps = _int(d.get("replicates", 1000), "replicates")
        if reps < 1:
            raise ScenarioError("replicates must be >= 1")
        seed = _int(d.get("seed", 0), "seed")
        if not 0 <= seed < 2 ** 64:
            raise ScenarioError("seed must be a 64-bit unsigned integer")
        tests = [TestSpec.from_dict(t) for t in _list(d.get("tests", []), "tests")]
        for t in tests:
            if t.n is not None and (n is None or t.n not in n):
                raise ScenarioError(f"test refers to n={t.n}, which is not simulated")
            if t.log_n is not None and (log_n is None or t.log_n not in log_n):
                raise ScenarioError(f"test refers to log_n={t.log_n}, which is not simulated")
            if t.statistic not in stats_:
                raise ScenarioError(f"test uses statistic {t.statistic} that is not simulated")
        outputs = d.get("outputs", {})
        if not isinstance(outputs, dict):
            raise ScenarioError("outputs must be an object")
        _reject_unknown(outputs, cls._OUTPUT_KEYS, "outputs")
        return cls(law, list(stats_), n, log_n, reps, seed, method, tests,
                   {k: _str(v, k) for k, v in outputs.items()})

    def to_dict(self) -> dict:
        out = {"law": self.law, "statistics": list(self.statistics),
               "replicates": self.replicates, "seed": self.seed, "method": self.method,
               "tests": [t.to_dict() for t in self.tests]}
        if self.n is not None:
            out["n"] = list(self.n)
        if self.log_n is not None:
            out["log_n"] = list(self.log_n)
        if self.outputs:
            out["outputs"] = dict(self.outputs)
        return out


def parse_scenario(text: str) -> Scenario:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}") from exc
    return Scenario.from_dict(d)


def render_scenario(sc: Scenario) -> str:
    return json.dumps(sc.to_dict(), indent=2, sort_keys=True)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return parse_scenario(fh.read())


def _reject_unknown(d, allowed, where):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ScenarioError(f"unknown {where} key(s): {', '.join(extra)}")


def _str(v, name):
    if not isinstance(v, str):
        raise ScenarioError(f"{name} must be a string")
    return v


def _int(v, name):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{name} must be an integer")
    return v


def _float(v, name):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{name} must be a number")
    return float(v)


def _opt_int(v, name):
    return None if v is None else _int(v, name)


def _opt_float(v, name):
    return None if v is None else _float(v, name)


def _list(v, name):
    if not isinstance(v, list):
        raise ScenarioError(f"{name} must be a list")
    return v
