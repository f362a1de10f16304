"""Stationary Gaussian noise laws described by their covariance sequence.

Every model is normalised so that ``rho(0) == 1``.  Parameters are not checked
at construction time; ``validate_model`` reports problems without raising and
``covariance_sequence`` raises ``ValidationError`` on the first bad field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

KINDS = ("white", "ma1", "ar1", "fgn", "custom")

# Below this lag the fGn second difference is evaluated directly.
_FGN_SERIES_FROM = 4


@dataclass(frozen=True)
class NoiseModel:
    kind: str
    param: float | None = None
    rho: tuple[float, ...] | None = field(default=None, repr=False)

    @classmethod
    def white(cls) -> "NoiseModel":
        return cls("white")

    @classmethod
    def ma1(cls, alpha: float) -> "NoiseModel":
        return cls("ma1", float(alpha))

    @classmethod
    def ar1(cls, alpha: float) -> "NoiseModel":
        return cls("ar1", float(alpha))

    @classmethod
    def fgn(cls, hurst: float) -> "NoiseModel":
        return cls("fgn", float(hurst))

    @classmethod
    def custom(cls, rho) -> "NoiseModel":
        return cls("custom", None, tuple(float(r) for r in rho))

    def label(self) -> str:
        if self.kind == "white":
            return "white"
        if self.kind == "custom":
            return f"custom[{len(self.rho or ())}]"
        return f"{self.kind}:{self.param:g}"


@dataclass(frozen=True)
class Diagnostic:
    field: str
    ok: bool
    message: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Diagnostic, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[Diagnostic]:
        return [c for c in self.checks if not c.ok]


def validate_model(model: NoiseModel) -> ValidationReport:
    """Range checks for the model parameters. Never raises."""
    checks = []
    if model.kind not in KINDS:
        checks.append(Diagnostic("kind", False, f"unknown noise kind {model.kind!r}"))
        return ValidationReport(tuple(checks))
    checks.append(Diagnostic("kind", True, model.kind))

    if model.kind in ("ma1", "ar1"):
        a = model.param
        if a is None or not math.isfinite(a):
            checks.append(Diagnostic("alpha", False, "alpha must be a finite real"))
        elif abs(a) >= 1:
            checks.append(Diagnostic("alpha", False, f"|alpha| >= 1 (alpha={a:g})"))
        else:
            checks.append(Diagnostic("alpha", True, f"alpha={a:g}"))
    elif model.kind == "fgn":
        h = model.param
        if h is None or not math.isfinite(h) or not 0.0 < h < 1.0:
            checks.append(Diagnostic("H", False, f"H out of (0,1) (H={h})"))
        else:
            checks.append(Diagnostic("H", True, f"H={h:g}"))
    elif model.kind == "custom":
        rho = model.rho
        if not rho:
            checks.append(Diagnostic("rho", False, "custom covariance is empty"))
        elif not all(math.isfinite(r) for r in rho):
            checks.append(Diagnostic("rho", False, "custom covariance has non-finite values"))
        elif rho[0] != 1.0:
            checks.append(Diagnostic("rho", False, f"rho(0) must be 1, got {rho[0]!r}"))
        elif any(abs(r) > 1.0 for r in rho):
            checks.append(Diagnostic("rho", False, "|rho(n)| > 1 for some lag"))
        else:
            checks.append(Diagnostic("rho", True, f"{len(rho)} lags"))
    return ValidationReport(tuple(checks))


def _require_valid(model: NoiseModel) -> None:
    bad = validate_model(model).failures()
    if bad:
        raise ValidationError(bad[0].message, field=bad[0].field)


def _binom(a: float, m: int) -> float:
    out = 1.0
    for i in range(m):
        out *= (a - i) / (i + 1)
    return out


def fgn_covariance(hurst: float, lags) -> np.ndarray:
    """fGn autocovariance 0.5(|n+1|^2H - 2|n|^2H + |n-1|^2H) at integer lags.

    For large lags the second difference is expanded as
    n^2H * sum_j C(2H, 2j) n^-2j, which avoids the cancellation of the plain
    three-term formula.
    """
    n = np.abs(np.asarray(lags, dtype=float))
    two_h = 2.0 * hurst
    out = np.empty_like(n)

    small = n < _FGN_SERIES_FROM
    ns = n[small]
    out[small] = 0.5 * (np.abs(ns + 1) ** two_h - 2.0 * ns**two_h + np.abs(ns - 1) ** two_h)

    nl = n[~small]
    if nl.size:
        inv2 = nl ** -2.0
        total = np.zeros_like(nl)
        power = np.ones_like(nl)
        lead = abs(_binom(two_h, 2)) * _FGN_SERIES_FROM**-2.0
        for j in range(1, 40):
            power = power * inv2
            c = _binom(two_h, 2 * j)
            if c == 0.0:
                break
            total += c * power
            if abs(c) * _FGN_SERIES_FROM ** (-2.0 * j) < 1e-18 * lead:
                break
        out[~small] = nl**two_h * total
    return out


def covariance_sequence(model: NoiseModel, max_lag: int) -> np.ndarray:
    """Return (rho(0), ..., rho(max_lag))."""
    if max_lag < 0:
        raise ValidationError(f"max_lag must be >= 0, got {max_lag}", field="max_lag")
    _require_valid(model)
    lags = np.arange(max_lag + 1)
    if model.kind == "white":
        rho = np.zeros(max_lag + 1)
        rho[0] = 1.0
    elif model.kind == "ma1":
        a = model.param
        rho = np.zeros(max_lag + 1)
        rho[0] = 1.0
        if max_lag >= 1:
            rho[1] = a / (1.0 + a * a)
    elif model.kind == "ar1":
        rho = model.param ** lags.astype(float)
        rho[0] = 1.0
    elif model.kind == "fgn":
        rho = fgn_covariance(model.param, lags)
        rho[0] = 1.0
    else:
        stored = np.asarray(model.rho, dtype=float)
        rho = np.zeros(max_lag + 1)
        m = min(len(stored), max_lag + 1)
        rho[:m] = stored[:m]
    return rho


def parse_noise(text: str) -> NoiseModel:
    """Parse ``white``, ``ma1:a``, ``ar1:a``, ``fgn:H`` or ``custom:path``.

    A custom file holds one lag value per line, starting with 1.0.
    """
    text = text.strip()
    kind, _, arg = text.partition(":")
    kind = kind.lower()
    if kind == "white":
        if arg:
            raise ValidationError("white noise takes no parameter", field="noise")
        return NoiseModel.white()
    if kind in ("ma1", "ar1", "fgn"):
        try:
            value = float(arg)
        except ValueError:
            raise ValidationError(f"bad numeric parameter in noise spec {text!r}", field="noise") from None
        return NoiseModel(kind, value)
    if kind == "custom":
        if not arg:
            raise ValidationError("custom noise needs a file path: custom:path", field="noise")
        try:
            with open(arg) as fh:
                values = [float(line) for line in fh if line.strip() and not line.lstrip().startswith("#")]
        except OSError as exc:
            raise ValidationError(f"cannot read covariance file {arg!r}: {exc}", field="noise") from None
        except ValueError:
            raise ValidationError(f"non-numeric line in covariance file {arg!r}", field="noise") from None
        return NoiseModel.custom(values)
    raise ValidationError(f"unknown noise kind {kind!r}", field="noise")
