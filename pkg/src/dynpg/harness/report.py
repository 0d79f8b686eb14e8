"""Suite reports: one JSON record per residual plus a summary document.

Serialization is deterministic: keys are sorted, floats use repr, and wall
times are left out unless explicitly requested, so two runs of the same
config produce identical bytes.
"""
import json
from dataclasses import dataclass, field

from .config import MAX_SKIP_RATE


@dataclass
class SuiteReport:
    name: str
    records: list = field(default_factory=list)   # (class, Residual)
    attempted: int = 0
    skipped: int = 0
    skip_reasons: list = field(default_factory=list)
    aborted: str = None       # reason the suite did not run
    not_applicable: str = None  # the configured model has no such structure
    error: str = None         # unexpected exception text
    wall_time: float = 0.0

    def add(self, cls, residuals):
        for r in residuals:
            self.records.append((cls, r))

    def skip(self, reason):
        self.skipped += 1
        self.skip_reasons.append(reason)

    @property
    def skip_rate(self):
        return self.skipped / self.attempted if self.attempted else 0.0

    @property
    def failures(self):
        return [(c, r) for c, r in self.records if not r.passed]

    @property
    def passed(self):
        if self.not_applicable:
            return True
        if self.aborted or self.error:
            return False
        return not self.failures and self.skip_rate <= MAX_SKIP_RATE and bool(self.records)

    @property
    def status(self):
        if self.not_applicable:
            return "not_applicable"
        if self.aborted:
            return "skipped"
        return "pass" if self.passed else "fail"

    @property
    def max_residual(self):
        return max((float(r.value) for _, r in self.records), default=0.0)

    def summary(self, timing=False):
        out = {
            "suite": self.name,
            "status": self.status,
            "residuals": len(self.records),
            "passed": sum(r.passed for _, r in self.records),
            "failed": len(self.failures),
            "attempted_samples": self.attempted,
            "skipped_samples": self.skipped,
            "skip_rate": self.skip_rate,
            "max_residual": self.max_residual,
            "failures": sorted({r.name for _, r in self.failures}),
        }
        if self.aborted:
            out["skip_reason"] = self.aborted
        if self.not_applicable:
            out["reason"] = self.not_applicable
        if self.error:
            out["error"] = self.error
        if self.skip_reasons:
            out["sample_skip_reasons"] = sorted(set(self.skip_reasons))
        if timing:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class Report:
    config: dict
    calibration: dict = field(default_factory=dict)
    suites: list = field(default_factory=list)

    @property
    def passed(self):
        return all(s.passed for s in self.suites)

    def records(self):
        for s in self.suites:
            for cls, r in s.records:
                rec = r.as_record()
                rec["suite"] = s.name
                rec["class"] = cls
                yield rec

    def summary(self, timing=False):
        return {
            "config": self.config,
            "calibration": self.calibration,
            "suites": [s.summary(timing) for s in self.suites],
            "pass": self.passed,
        }

    def dumps_records(self):
        return "".join(_dumps(rec) + "\n" for rec in self.records())

    def dumps_summary(self, timing=False):
        return json.dumps(_clean(self.summary(timing)), sort_keys=True, indent=2) + "\n"

    def write(self, directory, timing=False):
        import os
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "records.jsonl"), "w") as fh:
            fh.write(self.dumps_records())
        with open(os.path.join(directory, "summary.json"), "w") as fh:
            fh.write(self.dumps_summary(timing))


def _clean(obj):
    """Make numpy scalars and complex numbers JSON-safe."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag] if obj.imag else obj.real
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def _dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"))
