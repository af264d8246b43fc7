"""Star-graph zero-range model with inner structure, fitted to essential poles.

The vertex carries a finite positive Hermitian matrix A restricted along
a deficiency subspace N and re-extended against the open wires through
boundary parameters beta.  Its Herglotz Q-function

    M(lam) = P_N (I + lam A)(A - lam)^{-1} P_N

drives the rational model scattering matrix

    S = (i K_+ - X)^{-1} (i K_+ + X),    X = beta00 - beta01 M beta10,

and with beta00 chosen to cancel the constant part, X reduces to minus
the Krein sum  sum_s (1 + k_s^4)/(k_s^2 - lam) beta01 Q_s beta10.
Matching that sum to the essential polar terms of the network DN map
makes the model scattering matrix reproduce the essential one
identically.  The scalar specialization, resonance continuation in the
coupling, Blaschke factorization and the one-resonance jump-start
construction live here too.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NoConvergenceError, RegimeError
from .scattering import ScatteringMatrix

#: smallest principal angle (radians) below which N_i and N_-i are declared
#: overlapping
OVERLAP_ANGLE = 1e-8


@dataclass(frozen=True)
class InnerModel:
    """Inner Hermitian matrix spectrum, deficiency frame, boundary parameters.

    ``eigenvalues`` are the k_s^2 > 0 of A (eigenvectors are the standard
    basis of E_A).  ``frame`` holds an orthonormal basis of the deficiency
    subspace N as columns; ``beta01`` maps N (in that basis) into the open
    channels; ``beta00`` is Hermitian on the open channels and
    ``beta10 = beta01*`` always.
    """

    eigenvalues: np.ndarray          # (n_T,)
    frame: np.ndarray                # (n_T, d)
    beta01: np.ndarray               # (n_open, d)
    beta00: np.ndarray               # (n_open, n_open)
    dense_defect: bool = False
    energy_shift: float = 0.0        # model energies = network energies + shift

    def __post_init__(self):
        for a in (self.eigenvalues, self.frame, self.beta01, self.beta00):
            a.setflags(write=False)
        if np.any(self.eigenvalues <= 0):
            raise ConfigError("inner matrix eigenvalues must be positive")

    @property
    def n_levels(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def d(self) -> int:
        return int(self.frame.shape[1])

    @property
    def beta10(self) -> np.ndarray:
        return self.beta01.conj().T

    def projections(self) -> np.ndarray:
        """P_N e_s coordinates in the frame basis, one column per level."""
        return self.frame.conj().T    # frame columns are orthonormal in E_A


def krein_function(model: InnerModel, lam: complex) -> np.ndarray:
    """Q-function M(lam) = P_N (I + lam A)(A - lam)^{-1} P_N on the frame."""
    k2 = model.eigenvalues
    if np.any(np.abs(lam - k2) == 0.0):
        s = int(np.argmin(np.abs(lam - k2)))
        raise RegimeError(f"Krein function pole at eigenvalue k^2={k2[s]}")
    c = model.projections()          # (d, n_T) coordinates of P_N e_s
    w = (1.0 + lam * k2) / (k2 - lam)
    return (c * w) @ c.conj().T


def model_s_matrix(model: InnerModel, kplus: np.ndarray, lam: float) -> ScatteringMatrix:
    """Model scattering matrix (i K_+ - X)^{-1} (i K_+ + X).

    ``lam`` is a network energy; a fitted energy shift moves it into the
    model's positive spectrum internally.
    """
    m = krein_function(model, lam + model.energy_shift)
    x = model.beta00 - model.beta01 @ m @ model.beta10
    denom = 1j * np.diag(kplus) - x
    s = np.linalg.solve(denom, 1j * np.diag(kplus) + x)
    return ScatteringMatrix(lam, s)


def krein_sum(model: InnerModel, lam: complex) -> np.ndarray:
    """sum_s (1 + k_s^4)/(k_s^2 - lam) beta01 Q_s beta10 on the open channels."""
    c = model.projections()
    g = model.beta01 @ c             # (n_open, n_T): beta01 P_N e_s columns
    w = (1.0 + model.eigenvalues**2) / (model.eigenvalues - lam)
    return (g * w) @ g.conj().T


def choose_beta00(model: InnerModel) -> np.ndarray:
    """beta00 cancelling the constant bracket: -sum_s k_s^2 beta01 Q_s beta10."""
    c = model.projections()
    g = model.beta01 @ c
    return -(g * model.eigenvalues) @ g.conj().T


def with_beta00(model: InnerModel) -> InnerModel:
    return InnerModel(model.eigenvalues.copy(), model.frame.copy(),
                      model.beta01.copy(), choose_beta00(model),
                      model.dense_defect, model.energy_shift)


def fit_model(pole_positions, residue_vectors, energy_shift: float = 0.0) -> InnerModel:
    """Solvable model whose Krein sum equals minus the essential DN map.

    ``pole_positions``: intermediate eigenvalues on the essential band;
    ``residue_vectors``: matching residue vectors of the intermediate DN
    map (open-channel, mass prefactor folded in).  Columns are scaled by
    1/sqrt(1 + lam_s^2) so each polar term matches exactly.  A positive
    ``energy_shift`` moves the origin when some pole is not positive.
    """
    lam_s = np.asarray(pole_positions, dtype=float) + energy_shift
    if lam_s.size == 0:
        raise ConfigError("fit_model needs at least one pole")
    if np.any(lam_s <= 0):
        raise ConfigError(
            f"pole positions must be positive after shifting (got {lam_s}); "
            "increase energy_shift"
        )
    g = np.column_stack([np.ravel(v) for v in residue_vectors]).astype(float)
    n_open = g.shape[0]
    targets = g / np.sqrt(1.0 + lam_s**2)

    u, sv, vt = np.linalg.svd(targets, full_matrices=False)
    tol = max(targets.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    d = int(np.sum(sv > tol))
    if d == 0:
        raise ConfigError("all residue vectors vanish; nothing to fit")
    if d < lam_s.size:
        warnings.warn(
            f"residue vectors are rank deficient (rank {d} < {lam_s.size}); "
            "deficiency dimension reduced"
        )
    frame = vt[:d].T                        # orthonormal in E_A, (n_T, d)
    beta01 = u[:, :d] * sv[:d]              # (n_open, d)

    dense = _defect_overlaps(lam_s, frame)
    model = InnerModel(lam_s, frame, beta01, np.zeros((n_open, n_open)),
                       dense, energy_shift)
    return with_beta00(model)


def _defect_overlaps(k2: np.ndarray, frame: np.ndarray) -> bool:
    """True when N_i and N_-i = (A+i)(A-i)^{-1} N_i share a direction.

    The one-level model always overlaps (the construction remains valid,
    matching the dim E_A = 1 exception); higher-dimensional overlaps are
    reported through a warning and the model is kept, since the fitted
    scattering matrix stays well defined.
    """
    cay = (k2 + 1j) / (k2 - 1j)
    other = cay[:, None] * frame
    q, _ = np.linalg.qr(other)
    sigma = np.linalg.svd(frame.conj().T @ q, compute_uv=False)
    theta_min = math.acos(min(1.0, float(sigma.max(initial=0.0))))
    if theta_min <= OVERLAP_ANGLE:
        if frame.shape[1] < frame.shape[0]:
            warnings.warn(
                "deficiency subspaces N_i and N_-i overlap; keeping the fitted "
                "dimension (scattering matrix unaffected)"
            )
        return True
    return False


# ------------------------------------------------------------------ scalar

def scalar_model_s(beta: float, levels: np.ndarray, weights: np.ndarray,
                   p: complex) -> complex:
    """Scalar model scattering matrix in the wavenumber p (lambda = p^2).

    S = (ip - beta^2 sum_s (1+k_s^4)/(k_s^2 - p^2) Q_s) / (ip + beta^2 sum ...).
    At p^2 on a level with nonzero weight the removable limit is -1.
    """
    k2 = np.asarray(levels, dtype=float)
    q = np.asarray(weights, dtype=float)
    lam = p * p
    gaps = k2 - lam
    hit = np.abs(gaps) < 1e-13 * np.maximum(1.0, np.abs(k2))
    if np.any(hit):
        if beta != 0.0 and np.any(q[hit] > 0):
            return -1.0 + 0.0j
        gaps = np.where(hit, np.inf, gaps)
    sigma = beta * beta * np.sum((1.0 + k2**2) / gaps * q)
    return (1j * p - sigma) / (1j * p + sigma)


def _scalar_numerator(beta, k2, q, p):
    sigma = beta * beta * np.sum((1.0 + k2**2) / (k2 - p * p) * q)
    return 1j * p - sigma


def resonance_continuation(k0: float, beta: float, levels=None, weights=None,
                           max_iter: int = 200, tol: float = 1e-13) -> complex:
    """Resonance k0(beta): zero of the scalar numerator continued from +k0.

    Fixed-point iteration on
        p = k0 - beta^2 (1+k0^4) Q0 / ((p + k0)(ip - beta^2 sum_{s!=0} ...)),
    with the step ratio monitored; on divergence the coupling is walked
    up in halved steps re-seeding each stage.
    """
    if levels is None:
        levels, weights = np.array([k0 * k0]), np.array([1.0])
    k2 = np.asarray(levels, dtype=float)
    q = np.asarray(weights, dtype=float)
    i0 = int(np.argmin(np.abs(k2 - k0 * k0)))
    if abs(k2[i0] - k0 * k0) > 1e-10 * max(1.0, k0 * k0):
        raise ConfigError("k0^2 must be one of the model levels")
    rest = np.ones(k2.size, dtype=bool)
    rest[i0] = False

    def solve_at(beta_val: float, seed: complex) -> complex:
        p = seed
        prev = np.inf
        for _ in range(max_iter):
            tail = beta_val**2 * np.sum((1.0 + k2[rest] ** 2) / (k2[rest] - p * p) * q[rest])
            nxt = k0 - beta_val**2 * (1.0 + k0**4) * q[i0] / ((p + k0) * (1j * p - tail))
            step = abs(nxt - p)
            p = nxt
            if step <= tol * max(1.0, abs(p)):
                return p
            if step > 0.5 * prev and step > 1e-6 * max(1.0, abs(p)):
                raise NoConvergenceError("step ratio above 0.5")
            prev = step
        return p

    try:
        return solve_at(beta, complex(k0))
    except NoConvergenceError:
        seed = complex(k0)
        stages = 8
        while stages <= 64:
            try:
                for frac in np.linspace(1.0 / stages, 1.0, stages):
                    seed = solve_at(beta * math.sqrt(frac), seed)
                return seed
            except NoConvergenceError:
                stages *= 2
                seed = complex(k0)
        raise NoConvergenceError(
            f"resonance continuation failed at beta={beta}"
        ) from None


def mirror_resonances(ks) -> list[complex]:
    """Each resonance with its mirror partner -conj(k) (upper half-plane)."""
    out = []
    for k in ks:
        out.extend([complex(k), -np.conj(complex(k))])
    return out


def blaschke_s(resonances, p) -> complex | np.ndarray:
    """Finite Blaschke product prod (p - k_s)/(p - conj k_s)."""
    p = np.asarray(p, dtype=complex)
    out = np.ones_like(p)
    for k in resonances:
        k = complex(k)
        if k.imag < 0:
            raise ConfigError(f"resonance {k} is not in the upper half-plane")
        out = out * (p - k) / (p - np.conj(k))
    return out if out.shape else complex(out)


def factor_group_s(k0: complex, p) -> complex | np.ndarray:
    """Blaschke factor group of one resonance and its mirror:
    [(p - k0)(p + conj k0)] / [(p - conj k0)(p + k0)]."""
    return blaschke_s([complex(k0), -np.conj(complex(k0))], p)


def factorize_and_complement(resonances, factor_set):
    """Split a scalar Blaschke scattering matrix into factor and complement.

    Both pieces are callables of p; their product reconstructs the full
    product over ``resonances``.  ``factor_set`` must be a subset (with
    multiplicity) of ``resonances``.
    """
    remaining = [complex(k) for k in resonances]
    chosen = []
    for k in factor_set:
        k = complex(k)
        hits = [r for r in remaining if abs(r - k) <= 1e-12 * max(1.0, abs(k))]
        if not hits:
            raise ConfigError(f"factor resonance {k} is not in the full set")
        remaining.remove(hits[0])
        chosen.append(hits[0])

    def factor(p):
        return blaschke_s(chosen, p)

    def complement(p):
        return blaschke_s(remaining, p)

    return factor, complement


# --------------------------------------------------------------- jump start

@dataclass(frozen=True)
class JumpStart:
    """One-resonance auxiliary model solving the factor-matching equations."""

    k0: complex
    kappa2: float
    beta00: float
    beta01_sq: float
    beta11: float
    c0: float = field(init=False)
    c2: float = field(init=False)

    def __post_init__(self):
        c2 = self.beta01_sq * self.kappa2**2 / (1.0 + self.kappa2**2)
        c0 = self.beta00 - self.beta01_sq * self.kappa2 / (1.0 + self.kappa2**2)
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "c2", c2)

    def model_s(self, p):
        """Scalar model scattering matrix (ip + W)/(ip - W), W = c0 - c2 p^2."""
        p = np.asarray(p, dtype=complex)
        w = self.c0 - self.c2 * p * p
        return (1j * p + w) / (1j * p - w)

    def target_s(self, p):
        """-S0^beta(p): minus the resonance factor group of k0."""
        return -factor_group_s(self.k0, p)


def model_to_dict(model: InnerModel) -> dict:
    """Plain-data form of the model (matches the CLI export schema)."""
    return {
        "eigenvalues": [float(x) for x in model.eigenvalues],
        "energy_shift": model.energy_shift,
        "frame": [[float(x) for x in row] for row in model.frame],
        "beta01": [[float(x) for x in row] for row in model.beta01],
        "beta00": [[float(x) for x in row] for row in model.beta00],
        "dense_defect": bool(model.dense_defect),
    }


def model_from_dict(doc: dict) -> InnerModel:
    """Rebuild a fitted model from its exported form."""
    return InnerModel(
        np.array(doc["eigenvalues"], dtype=float),
        np.array(doc["frame"], dtype=float),
        np.array(doc["beta01"], dtype=float),
        np.array(doc["beta00"], dtype=float),
        bool(doc.get("dense_defect", False)),
        float(doc.get("energy_shift", 0.0)),
    )


def fit_jump_start(k0: complex) -> JumpStart:
    """Parameters (kappa^2, beta00, |beta01|^2, beta11) matching -S0^beta.

    Uses the parameter family kappa^2 = 1/|k0|^2, beta11 = 1/kappa^2; the
    remaining two parameters come from the closed-form solution of the
    matching equations (the printed coefficient is bypassed: parameters
    are validated by the pointwise identity instead).
    """
    k0 = complex(k0)
    if k0.imag <= 0:
        raise RegimeError(f"resonance {k0} is real or in the lower half-plane")
    mod2 = abs(k0) ** 2
    im = k0.imag
    kappa2 = 1.0 / mod2
    beta11 = mod2
    beta00 = mod2 / im
    beta01_sq = (1.0 + mod2**2) / (2.0 * im)
    return JumpStart(k0, kappa2, beta00, beta01_sq, beta11)
