"""Modal signal model: domain types, synthesis, noise injection, SNR bookkeeping.

A modal signal is a weighted sum of complex exponentials

    a_k = sum_j c_j * xi_j**k,    k = 0, ..., n-1,

where the complex modes ``xi_j`` encode decay (``|xi|``) and frequency
(``arg(xi) / (2*pi*delta)``).  Time is indexed by the integer sample index k;
the sampling interval ``delta`` is retained only for frequency reporting.
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ModalModel",
    "RealModalParams",
    "SignalSamples",
    "Hyperparameters",
    "synthesize",
    "real_to_complex",
    "add_noise",
    "snr",
    "save_samples",
    "load_samples",
    "save_model",
    "load_model",
]


class InvalidModelError(ValueError):
    """Raised when modal parameters violate their invariants."""


@dataclass(frozen=True)
class ModalModel:
    """A set of p complex modes with complex weights.

    Attributes
    ----------
    c : tuple of complex
        Mode weights.
    xi : tuple of complex
        Mode locations in the complex plane, pairwise distinct.
    """

    c: tuple
    xi: tuple

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(complex(v) for v in self.c))
        object.__setattr__(self, "xi", tuple(complex(v) for v in self.xi))
        if len(self.c) != len(self.xi):
            raise InvalidModelError("weight and mode lists must have equal length")
        if self.p < 1:
            raise InvalidModelError("a model needs at least one mode")
        for i in range(self.p):
            for j in range(i + 1, self.p):
                if self.xi[i] == self.xi[j]:
                    raise InvalidModelError(f"duplicate mode xi={self.xi[i]}")

    @property
    def p(self) -> int:
        return len(self.xi)

    def check_identifiable(self, delta: float) -> None:
        """Verify |arg(xi_j)| * delta <= pi for the sampling interval delta."""
        for z in self.xi:
            if abs(cmath.phase(z)) * delta > math.pi + 1e-12:
                raise InvalidModelError(
                    f"mode {z} aliases at sampling interval {delta}"
                )


@dataclass(frozen=True)
class RealModalParams:
    """Parameters of a real-valued sum of exponentially damped cosines.

    Each of the q components is ``A*rho**t * cos(2*pi*omega*t + theta)`` with
    amplitude A > 0, decay rho > 0, frequency omega in cycles per unit time and
    phase theta in radians.
    """

    amplitude: tuple
    decay: tuple
    frequency: tuple
    phase: tuple

    def __post_init__(self):
        q = len(self.amplitude)
        if q < 1:
            raise InvalidModelError("at least one component required")
        if not (len(self.decay) == len(self.frequency) == len(self.phase) == q):
            raise InvalidModelError("component arrays must have equal length")
        if any(a <= 0 for a in self.amplitude):
            raise InvalidModelError("amplitudes must be positive")
        if any(r <= 0 for r in self.decay):
            raise InvalidModelError("decays must be positive")
        freqs = self.frequency
        for i in range(q):
            for j in range(i + 1, q):
                if freqs[i] == freqs[j]:
                    raise InvalidModelError("component frequencies must be distinct")

    @property
    def q(self) -> int:
        return len(self.amplitude)

    def check_identifiable(self, delta: float) -> None:
        if any(abs(w) * delta > math.pi + 1e-12 for w in self.frequency):
            raise InvalidModelError("frequency aliases at this sampling interval")


@dataclass(frozen=True)
class SignalSamples:
    """Uniformly spaced complex samples with known noise level.

    Attributes
    ----------
    a : np.ndarray
        Complex samples, length n >= 2.
    delta : float
        Sampling interval (> 0), used only for frequency reporting.
    sigma : float
        Standard deviation of the complex Gaussian noise (>= 0).
    """

    a: np.ndarray
    delta: float = 1.0
    sigma: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.a, dtype=complex)
        object.__setattr__(self, "a", arr)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("samples must be a 1-D array of length >= 2")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def n(self) -> int:
        return self.a.size


@dataclass(frozen=True)
class Hyperparameters:
    """Settings for the automatic estimator.

    Defaults reproduce the benchmark configuration: overestimated order
    p_tilde = 20, smoothing beta = 0.6 * (2*p_tilde), diagonal filter exponent
    gamma = 0.4, density threshold tau = 2e-3, T = 20 pseudosamples with
    sigma'/sigma = 0.15, cluster acceptance fraction alpha = 0.75, 10 Cadzow
    iterations, and an 80x80 lattice on [-1.3, 1.3]^2.
    """

    p_tilde: int = 20
    beta_factor: float = 0.6
    gamma: float = 0.4
    tau: float = 2e-3
    T: int = 20
    sigma_ratio: float = 0.15
    alpha: float = 0.75
    cadzow_iters: int = 10
    lattice_dim: int = 80
    lattice_bounds: tuple = (-1.3, 1.3)

    def __post_init__(self):
        if self.p_tilde < 1:
            raise ValueError("p_tilde must be >= 1")
        if not (0.5 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0.5, 1]")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.T < 1 or self.cadzow_iters < 1 or self.lattice_dim < 3:
            raise ValueError("counts must be positive (lattice_dim >= 3)")
        if self.sigma_ratio < 0 or self.gamma < 0 or self.beta_factor <= 0:
            raise ValueError("ratios and exponents must be nonnegative")
        lo, hi = self.lattice_bounds
        if not lo < hi:
            raise ValueError("lattice_bounds must be an increasing pair")


def synthesize(model: ModalModel, n: int, delta: float = 1.0) -> SignalSamples:
    """Evaluate the noiseless signal a_k = sum_j c_j * xi_j**k for k < n."""
    if n < 2:
        raise ValueError("need at least two samples")
    model.check_identifiable(delta)
    k = np.arange(n)
    xi = np.asarray(model.xi)
    c = np.asarray(model.c)
    a = (xi[None, :] ** k[:, None]) @ c
    return SignalSamples(a=a, delta=delta, sigma=0.0)


def real_to_complex(params: RealModalParams) -> ModalModel:
    """Map q real damped cosines to the 2q-mode complex model.

    Each component contributes the conjugate pair
    ``c = A/2 * exp(+-i*theta)``, ``xi = rho * exp(+-i*2*pi*omega)``.

    Raises
    ------
    InvalidModelError
        If the resulting modes are not pairwise distinct (e.g. omega = 0
        collapses a conjugate pair).
    """
    c = []
    xi = []
    for A, rho, w, th in zip(
        params.amplitude, params.decay, params.frequency, params.phase
    ):
        c.append(0.5 * A * cmath.exp(1j * th))
        xi.append(rho * cmath.exp(1j * 2 * math.pi * w))
    for A, rho, w, th in zip(
        params.amplitude, params.decay, params.frequency, params.phase
    ):
        c.append(0.5 * A * cmath.exp(-1j * th))
        xi.append(rho * cmath.exp(-1j * 2 * math.pi * w))
    return ModalModel(c=tuple(c), xi=tuple(xi))


def add_noise(signal: SignalSamples, sigma: float, seed: int) -> SignalSamples:
    """Add i.i.d. zero-mean complex Gaussian noise of s.d. sigma.

    Real and imaginary parts are independent N(0, sigma**2 / 2), so
    E|eps_k|**2 = sigma**2.  Deterministic for a given seed; the output's
    ``sigma`` field records the injected level.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((signal.n, 2))
    eps = (sigma / math.sqrt(2.0)) * (z[:, 0] + 1j * z[:, 1])
    return SignalSamples(a=signal.a + eps, delta=signal.delta, sigma=sigma)


def snr(model: ModalModel, sigma: float) -> tuple[list[float], float]:
    """Per-mode signal-to-noise ratios sqrt(2)*|c_j|/sigma and their minimum."""
    if sigma <= 0:
        raise ValueError("SNR undefined for sigma <= 0")
    values = [math.sqrt(2.0) * abs(cj) / sigma for cj in model.c]
    return values, min(values)


# ---------------------------------------------------------------------------
# Serialization.  Samples go to CSV (header k,re,im) with a JSON sidecar
# holding {n, delta, sigma}; models go to JSON.  All floats are printed with
# 17 significant digits so round trips are lossless.

_FMT = "%.17g"


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def save_samples(signal: SignalSamples, path) -> None:
    path = Path(path)
    lines = ["k,re,im"]
    for k, v in enumerate(signal.a):
        lines.append(f"{k},{_FMT % v.real},{_FMT % v.imag}")
    path.write_text("\n".join(lines) + "\n")
    meta = {
        "n": signal.n,
        "delta": float(signal.delta),
        "sigma": float(signal.sigma),
    }
    _sidecar_path(path).write_text(json.dumps(meta, sort_keys=True) + "\n")


def load_samples(path) -> SignalSamples:
    """Read a samples CSV and its sidecar.

    Raises
    ------
    ValueError
        With the offending line number on malformed rows.
    """
    path = Path(path)
    rows = []
    with path.open() as fh:
        header = fh.readline()
        if header.strip().lower() != "k,re,im":
            raise ValueError(f"{path}: line 1: expected header 'k,re,im'")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                k, re, im = int(parts[0]), float(parts[1]), float(parts[2])
            except (ValueError, IndexError):
                raise ValueError(f"{path}: line {lineno}: malformed row {line!r}")
            rows.append((k, complex(re, im)))
    rows.sort(key=lambda t: t[0])
    a = np.array([v for _, v in rows], dtype=complex)
    delta, sigma = 1.0, 0.0
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        delta = float(meta.get("delta", 1.0))
        sigma = float(meta.get("sigma", 0.0))
        if meta.get("n") is not None and int(meta["n"]) != len(a):
            raise ValueError(f"{path}: sidecar n={meta['n']} but {len(a)} rows")
    return SignalSamples(a=a, delta=delta, sigma=sigma)


def save_model(model: ModalModel, path) -> None:
    doc = {
        "p": model.p,
        "modes": [
            {"re_c": c.real, "im_c": c.imag, "re_xi": x.real, "im_xi": x.imag}
            for c, x in zip(model.c, model.xi)
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_model(path) -> ModalModel:
    doc = json.loads(Path(path).read_text())
    modes = doc["modes"]
    if doc.get("p") is not None and int(doc["p"]) != len(modes):
        raise ValueError(f"{path}: p={doc['p']} but {len(modes)} modes listed")
    c = [complex(m["re_c"], m["im_c"]) for m in modes]
    xi = [complex(m["re_xi"], m["im_xi"]) for m in modes]
    return ModalModel(c=tuple(c), xi=tuple(xi))
