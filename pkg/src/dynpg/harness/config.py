"""Run configuration and the tolerance ledger.

Every residual the suites emit belongs to exactly one tolerance class below;
suites never pass a literal tolerance.  A config file may override any class
but may not introduce new ones.
"""
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from ..dynrmat import DynamicalR, TwoForm, perturb, standard_r, zero_r
from ..liealg import build_algebra
from ..numerics import DEFAULT_FD_STEP, sample_rng

SUITE_ORDER = ("liealg", "dynrmat", "pgroupoid", "bialgebroid", "doublegpd")

# class -> tolerance; one entry per residual class
DEFAULT_TOLERANCES = {
    "algebra": 1e-12,
    "rmatrix": 1e-8,
    "chi_consistency": 1e-10,
    "groupoid": 1e-12,
    "bracket_terms": 1e-10,
    "jacobi_fd": 1e-5,
    "jacobi_analytic": 1e-8,
    "cocycle": 1e-9,
    "coisotropy_exact": 1e-9,
    "psi_isomorphism": 1e-9,
    "connection": 1e-9,
    "roundtrip": 1e-12,
    "intertwining": 1e-7,
    "dual_cocycle": 1e-7,
    "linearization": 1e-8,
    "chart": 1e-10,
    "factorization": 1e-9,
    "gamma_axioms": 1e-9,
    "coisotropy_fd": 1e-5,
    "matched": 1e-9,
    "actions": 1e-8,
    "double": 1e-8,
    "sprime": 1e-9,
    "dressing_exact": 1e-9,
    "dressing_fd": 1e-6,
    "gradient_fd": 1e-5,
    "symplectic_fd": 1e-6,
    "leaves": 1e-6,
    "reduction": 1e-6,
    "count": 0.5,   # integer-valued checks (rank deficits, dimension gaps)
}

MAX_SKIP_RATE = 0.10


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    series: str = "A"
    rank: int = 1
    gamma: tuple = (0,)
    mu: tuple = None          # None: sampled from the seed
    twoform: object = "zero"  # "zero" | "random" | {"constant": matrix} | {"linear": tensor}
    r_mode: str = "dynamical"
    seed: int = 42
    samples: int = 4
    fd_step: float = DEFAULT_FD_STEP
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    suites: tuple = SUITE_ORDER
    perturbation: float = 0.0  # > 0 turns R into a negative control

    def tol(self, cls):
        return self.tolerances[cls]

    def with_overrides(self, seed=None, suites=None):
        out = self
        if seed is not None:
            out = replace(out, seed=int(seed))
        if suites:
            out = replace(out, suites=tuple(suites))
        out.validate()
        return out

    def validate(self):
        if self.series != "A":
            raise ConfigError(f"series {self.series!r} not supported; only A")
        if not 1 <= self.rank <= 3:
            raise ConfigError("rank must be 1, 2 or 3")
        if any(not 0 <= i < self.rank for i in self.gamma):
            raise ConfigError(f"gamma indices {self.gamma} must lie in [0, {self.rank})")
        if self.r_mode not in ("dynamical", "standard-constant", "zero"):
            raise ConfigError(f"unknown r_mode {self.r_mode!r}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.mu is not None and len(self.mu) != self.rank:
            raise ConfigError("mu must have one entry per Cartan direction")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance classes {sorted(unknown)}")
        missing = set(DEFAULT_TOLERANCES) - set(self.tolerances)
        if missing:
            raise ConfigError(f"tolerance classes missing {sorted(missing)}")
        if any(v <= 0 for v in self.tolerances.values()):
            raise ConfigError("tolerances must be positive")
        bad = [s for s in self.suites if s not in SUITE_ORDER]
        if bad:
            raise ConfigError(f"unknown suites {bad}")
        return self

    def echo(self):
        return {
            "series": self.series, "rank": self.rank, "gamma": list(self.gamma),
            "mu": None if self.mu is None else [float(v) for v in self.mu],
            "twoform": self.twoform, "r_mode": self.r_mode, "seed": self.seed,
            "samples": self.samples, "fd_step": self.fd_step,
            "tolerances": dict(sorted(self.tolerances.items())),
            "suites": list(self.suites), "perturbation": self.perturbation,
        }

    # model construction ---------------------------------------------------
    def algebra(self):
        return build_algebra(self.series, self.rank)

    def r_matrix(self):
        g = self.algebra()
        rng = sample_rng(self.seed, "config")
        if self.r_mode == "zero":
            r = zero_r(g)
        elif self.r_mode == "standard-constant":
            r = standard_r(g)
        else:
            mu = np.asarray(self.mu, dtype=np.complex128) if self.mu is not None else \
                rng.uniform(0.3, 0.6, self.rank) * rng.choice([-1, 1], self.rank)
            r = DynamicalR(g, tuple(self.gamma), mu, _twoform(self.twoform, self.rank, rng))
        if self.perturbation:
            r = perturb(r, self.perturbation, rng)
        return r


def _twoform(spec, rank, rng):
    if spec in (None, "zero"):
        return TwoForm.zero(rank)
    if spec == "random":
        return TwoForm.random_closed(rank, rng, linear=rank > 1)
    if isinstance(spec, dict) and "constant" in spec:
        c = np.asarray(spec["constant"], dtype=np.complex128)
        if c.shape != (rank, rank) or np.max(np.abs(c + c.T)) > 0:
            raise ConfigError("constant two-form must be an antisymmetric rank x rank matrix")
        return TwoForm.constant(c)
    if isinstance(spec, dict) and "linear" in spec:
        lin = np.asarray(spec["linear"], dtype=np.complex128)
        const = np.asarray(spec.get("const", np.zeros((rank, rank))), dtype=np.complex128)
        form = TwoForm(const, lin)
        if form.closedness_residual() > 1e-12:
            raise ConfigError("linear two-form is not closed")
        return form
    raise ConfigError(f"unrecognized twoform {spec!r}")


def load_config(path=None):
    """Config from a YAML file; missing keys take their defaults."""
    if path is None:
        return Config().validate()
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    known = set(Config.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update({k: float(v) for k, v in (raw.pop("tolerances", None) or {}).items()})
    for key in ("gamma", "suites", "mu"):
        if raw.get(key) is not None:
            raw[key] = tuple(raw[key])
    for key in ("fd_step", "perturbation"):
        if key in raw:
            raw[key] = float(raw[key])
    return Config(tolerances=tol, **raw).validate()
