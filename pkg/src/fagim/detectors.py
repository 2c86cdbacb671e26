"""ML, linear MMSE and structured AMP (S-AMP) receivers.

Every detector accepts a single frame (``y: (Nr,)``, ``H: (Nr, N)``) or a
batch (``y: (B, Nr)``, ``H: (B, Nr, N)``) and returns a
:class:`DetectionResult` with matching leading shape.  Frames in a batch
are processed independently.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericalError
from .modem import FagimScheme, FaimScheme

log = logging.getLogger(__name__)

DEFAULT_DAMPING = 0.9
DEFAULT_MAX_ITER = 15
DEFAULT_TOL = 1e-16
DEFAULT_ML_CAP = 1 << 20
DEFAULT_INIT = "standard"
SAMP_INITS = ("standard", "verbatim")

# complex entries evaluated per chunk in the ML search
_ML_CHUNK = 1 << 22


@dataclass
class DetectionResult:
    active: np.ndarray  # 1-based port indices, (..., G)
    labels: np.ndarray  # constellation labels, (..., G)
    symbols: np.ndarray
    bits: np.ndarray
    detector: str
    iterations: Optional[np.ndarray] = None
    residual: Optional[np.ndarray] = None
    x_hat: Optional[np.ndarray] = None


def _as_batch(y, H):
    y = np.asarray(y)
    H = np.asarray(H)
    if H.ndim < 2 or y.shape != H.shape[:-1]:
        raise ValueError(f"incompatible shapes y{y.shape} and H{H.shape}")
    lead = y.shape[:-1]
    return y.reshape(-1, y.shape[-1]), H.reshape(-1, *H.shape[-2:]), lead


def _finish(scheme, active, labels, lead, detector, **extra) -> DetectionResult:
    G = active.shape[-1]
    active = active.reshape(*lead, G)
    labels = labels.reshape(*lead, G)
    reshaped = {k: (None if v is None else v.reshape(tuple(lead) + v.shape[1:])) for k, v in extra.items()}
    return DetectionResult(
        active=active,
        labels=labels,
        symbols=scheme.constellation.points[labels],
        bits=scheme.decode(active, labels),
        detector=detector,
        **reshaped,
    )


class CandidateSet:
    """Every transmit hypothesis of a scheme, in bit-word order.

    For FAG-IM this is groups ascending, then port, then constellation
    label, with group 1 the most significant; so the first minimizer found
    is also the lowest enumeration rank.
    """

    def __init__(self, scheme, cap: int = DEFAULT_ML_CAP):
        if scheme.n_candidates > cap:
            raise ConfigError(f"ML search over {scheme.n_candidates} candidates exceeds cap {cap}")
        frame = scheme.encode(scheme.all_words())
        self.x = frame.x
        self.active = frame.active
        self.labels = frame.labels

    def __len__(self):
        return len(self.x)


def _candidates(scheme, cap) -> CandidateSet:
    cached = getattr(scheme, "_ml_candidates", None)
    if cached is None:
        cached = CandidateSet(scheme, cap)
        scheme._ml_candidates = cached
    return cached


def ml_metric(y: np.ndarray, H: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Squared residual ``||y - H x||^2`` for a batch of frames and hypotheses."""
    r = y[..., None] - H @ x.T
    return np.einsum("brk,brk->bk", r.real, r.real) + np.einsum("brk,brk->bk", r.imag, r.imag)


def detect_ml(y, H, scheme: FagimScheme | FaimScheme, max_candidates: int = DEFAULT_ML_CAP) -> DetectionResult:
    """Exhaustive search over all hypotheses; ties go to the lowest rank."""
    yb, Hb, lead = _as_batch(y, H)
    cands = _candidates(scheme, max_candidates)
    K = len(cands)
    chunk = max(1, _ML_CHUNK // (K * Hb.shape[1]))
    best = np.empty(len(yb), dtype=np.int64)
    for start in range(0, len(yb), chunk):
        sl = slice(start, start + chunk)
        best[sl] = np.argmin(ml_metric(yb[sl], Hb[sl], cands.x), axis=-1)
    return _finish(scheme, cands.active[best], cands.labels[best], lead, "ml", x_hat=cands.x[best])


def mmse_estimate(y, H, noise_var) -> np.ndarray:
    """``(H^H H + N0 I)^-1 H^H y`` by a dense solve, batched."""
    yb, Hb, lead = _as_batch(y, H)
    noise_var = np.broadcast_to(np.asarray(noise_var, dtype=float).reshape(-1), (len(yb),))
    Hh = np.conj(np.swapaxes(Hb, -1, -2))
    A = Hh @ Hb + noise_var[:, None, None] * np.eye(Hb.shape[-1])
    b = Hh @ yb[..., None]
    try:
        x = np.linalg.solve(A, b)[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"MMSE solve failed: {exc}") from exc
    return x.reshape(*lead, Hb.shape[-1])


def extract_decisions(x_hat: np.ndarray, scheme) -> tuple[np.ndarray, np.ndarray]:
    """Port and symbol decisions from a soft estimate of ``x``.

    FAG-IM: strongest port of each group, then the nearest constellation
    point.  FA-IM: the ``G`` strongest ports overall.  Ties go to the lower
    port index.
    """
    mag = np.abs(x_hat)
    if scheme.mode == "fagim":
        G, P = scheme.plan.G, scheme.plan.P
        port = np.argmax(mag.reshape(*mag.shape[:-1], G, P), axis=-1)
        active = np.arange(G) * P + port + 1
    else:
        order = np.argsort(-mag, axis=-1, kind="stable")[..., : scheme.n_active]
        active = np.sort(order, axis=-1) + 1
    values = np.take_along_axis(x_hat, active - 1, axis=-1)
    return active, scheme.constellation.demap(values)


def detect_mmse(y, H, noise_var, scheme: FagimScheme | FaimScheme) -> DetectionResult:
    yb, Hb, lead = _as_batch(y, H)
    x_hat = mmse_estimate(yb, Hb, noise_var)
    active, labels = extract_decisions(x_hat, scheme)
    return _finish(scheme, active, labels, lead, "mmse", x_hat=x_hat)


@dataclass
class AmpState:
    """Iterates of the S-AMP detector for a batch of frames."""

    x: np.ndarray  # posterior means, (B, N)
    v: np.ndarray  # posterior variances, (B, N)
    V: np.ndarray  # (B, Nr)
    Z: np.ndarray  # (B, Nr)
    Sigma: Optional[np.ndarray] = None  # (B, N)
    R: Optional[np.ndarray] = None  # (B, N)
    q: Optional[np.ndarray] = None  # q(x_i = s), (B, N, M)

    @classmethod
    def initial(cls, batch: int, n_rx: int, n_ports: int, P: int) -> "AmpState":
        return cls(
            x=np.zeros((batch, n_ports), dtype=complex),
            v=np.full((batch, n_ports), 1.0 / P),
            V=np.full((batch, n_rx), 1.0 / P),
            Z=np.zeros((batch, n_rx), dtype=complex),
        )


def structured_posterior(R, Sigma, points, G: int, P: int):
    """Posterior over ``{0} U S`` for every port under the one-active-port-
    per-group prior.

    Returns ``(mean, variance, q)`` with ``q[..., i, k] = q(x_i = points[k])``.
    The exponents are shifted by their per-group maximum before ``exp``; the
    shift cancels between numerator and the group-shared denominator.
    """
    energy = np.abs(points) ** 2
    expo = (2.0 * (np.conj(points) * R[..., None]).real - energy) / Sigma[..., None]
    lead = expo.shape[:-2]
    M = len(points)
    grp = expo.reshape(*lead, G, P * M)
    grp = grp - grp.max(axis=-1, keepdims=True)
    w = np.exp(grp)
    w /= w.sum(axis=-1, keepdims=True)
    q = w.reshape(*lead, G * P, M)
    mean = q @ points
    var = np.maximum(q @ energy - np.abs(mean) ** 2, 0.0)
    return mean, var, q


def samp_iteration(state: AmpState, y, H, absH2, noise_var, points, G: int, P: int, damping: float,
                   onsager: bool = True) -> AmpState:
    """One damped S-AMP update of every frame in ``state``.

    ``noise_var`` has shape ``(B, 1)``; ``absH2`` is ``|H|**2``.  With
    ``onsager=False`` the Onsager correction is left out of the ``Z`` update.
    """
    V_new = damping * (absH2 @ state.v[..., None])[..., 0] + (1.0 - damping) * state.V
    if onsager:
        correction = V_new * (y - state.Z) / (noise_var + state.V)
    else:
        correction = 0.0
    Z_new = damping * ((H @ state.x[..., None])[..., 0] - correction) + (1.0 - damping) * state.Z
    inv = 1.0 / (noise_var + V_new)
    Sigma = 1.0 / (inv[:, None, :] @ absH2)[:, 0, :]
    R = state.x + Sigma * ((((y - Z_new) * inv)[:, None, :]) @ np.conj(H))[:, 0, :]
    x, v, q = structured_posterior(R, Sigma, points, G, P)
    return AmpState(x=x, v=v, V=V_new, Z=Z_new, Sigma=Sigma, R=R, q=q)


def _take(state: AmpState, idx) -> AmpState:
    return AmpState(
        **{k: (None if val is None else val[idx]) for k, val in vars(state).items()}
    )


def _put(dst: AmpState, idx, src: AmpState) -> None:
    for k, val in vars(src).items():
        if getattr(dst, k) is None:
            setattr(dst, k, np.zeros((len(dst.x), *val.shape[1:]), dtype=val.dtype))
        getattr(dst, k)[idx] = val


def run_samp(y, H, noise_var, scheme: FagimScheme, damping=DEFAULT_DAMPING, max_iter=DEFAULT_MAX_ITER,
             tol=DEFAULT_TOL, init=DEFAULT_INIT, callback=None):
    """Run S-AMP on a batch and return ``(state, iterations, residual)``.

    Iterates start from ``x = 0``, ``v = V = 1/P`` and ``Z = 0``.  With
    ``init="standard"`` the first iteration carries no Onsager correction,
    so the first ``R`` is the per-port matched-filter estimate.
    ``init="verbatim"`` applies the correction from the first iteration
    on, using ``V = 1/P`` and ``Z = 0`` as the previous iterates; this
    scales the first ``R`` up by roughly ``1 + V/(noise + 1/P)``.

    A frame stops once ``||x^t - x^{t-1}||^2 / ||x^t||^2 <= tol`` (never
    while ``x^t`` is all zero) or after ``max_iter`` iterations; frames that
    stop are frozen while the rest continue.  ``callback(t, state)``, when
    given, sees the full batch state after every iteration.
    """
    if init not in SAMP_INITS:
        raise ConfigError(f"unknown S-AMP init {init!r}; expected one of {SAMP_INITS}")
    if scheme.mode != "fagim":
        raise ConfigError("S-AMP relies on the grouped prior and only supports FAG-IM")
    if not 0.0 < damping <= 1.0:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    yb, Hb, lead = _as_batch(y, H)
    B, n_rx, N = Hb.shape
    G, P = scheme.plan.G, scheme.plan.P
    points = scheme.constellation.points
    nv = np.broadcast_to(np.asarray(noise_var, dtype=float).reshape(-1), (B,))
    # a zero noise variance (infinite SNR) would divide 0 by 0 once the posterior is certain
    nv = np.maximum(nv, 1e-30)[:, None]
    absH2 = Hb.real**2 + Hb.imag**2

    state = AmpState.initial(B, n_rx, N, P)
    iterations = np.zeros(B, dtype=np.int64)
    residual = np.full(B, np.inf)
    live = np.arange(B)
    for t in range(1, max_iter + 1):
        cur = _take(state, live)
        onsager = t > 1 or init == "verbatim"
        new = samp_iteration(cur, yb[live], Hb[live], absH2[live], nv[live], points, G, P, damping, onsager)
        if not np.all(np.isfinite(new.x)):
            raise NumericalError(f"S-AMP produced non-finite estimates at iteration {t}")
        _put(state, live, new)
        iterations[live] = t
        diff = np.sum(np.abs(new.x - cur.x) ** 2, axis=-1)
        norm = np.sum(np.abs(new.x) ** 2, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(norm > 0, diff / norm, np.inf)
        residual[live] = ratio
        if callback is not None:
            callback(t, state)
        live = live[~(ratio <= tol)]
        if live.size == 0:
            break
    return state, iterations.reshape(lead), residual.reshape(lead)


def marginal_decisions(q: np.ndarray, G: int, P: int) -> tuple[np.ndarray, np.ndarray]:
    """Most probable active port per group, then its most probable symbol."""
    activity = q.sum(axis=-1)
    port = np.argmax(activity.reshape(*activity.shape[:-1], G, P), axis=-1)
    active = np.arange(G) * P + port + 1
    q_active = np.take_along_axis(q, (active - 1)[..., None], axis=-2)
    return active, np.argmax(q_active, axis=-1)


def detect_samp(y, H, noise_var, scheme: FagimScheme, damping: float = DEFAULT_DAMPING,
                max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
                decision: str = "marginal", init: str = DEFAULT_INIT) -> DetectionResult:
    """Structured AMP detector for FAG-IM.

    ``decision="marginal"`` picks the port with the largest posterior
    activation mass in each group and the most probable symbol on it;
    ``decision="linear"`` applies the MMSE-style extraction to the final
    posterior mean instead.
    """
    if decision not in ("marginal", "linear"):
        raise ConfigError(f"unknown S-AMP decision rule {decision!r}")
    yb, Hb, lead = _as_batch(y, H)
    state, iters, resid = run_samp(yb, Hb, noise_var, scheme, damping, max_iter, tol, init)
    if decision == "marginal":
        active, labels = marginal_decisions(state.q, scheme.plan.G, scheme.plan.P)
    else:
        active, labels = extract_decisions(state.x, scheme)
    return _finish(scheme, active, labels, lead, "samp", iterations=iters.reshape(-1),
                   residual=resid.reshape(-1), x_hat=state.x)


DETECTORS = ("ml", "mmse", "samp")


def detect(name: str, y, H, noise_var, scheme, **options) -> DetectionResult:
    """Dispatch by detector name; ``options`` go to S-AMP / ML as applicable."""
    if name == "ml":
        return detect_ml(y, H, scheme, max_candidates=options.get("max_candidates", DEFAULT_ML_CAP))
    if name == "mmse":
        return detect_mmse(y, H, noise_var, scheme)
    if name == "samp":
        return detect_samp(
            y, H, noise_var, scheme,
            damping=options.get("damping", DEFAULT_DAMPING),
            max_iter=options.get("max_iter", DEFAULT_MAX_ITER),
            tol=options.get("tol", DEFAULT_TOL),
            decision=options.get("decision", "marginal"),
            init=options.get("init", DEFAULT_INIT),
        )
    raise ConfigError(f"unknown detector {name!r}; expected one of {DETECTORS}")
