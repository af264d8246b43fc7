"""Dirichlet spectra of the compact part and boundary-trace coefficients.

The compact part of the network is the union of the wells with zero
boundary data everywhere, including the wire bottom sections.  Its
eigenvalues seed the resonance machinery; the boundary-trace matrix
holds, for every eigenfunction, the projections of its outward normal
derivative onto the transverse channel modes:

    C[r, (m, s)] = int_gamma e_s^m(y) dphi_r/dn(y) dy

with the normal pointing from the well into the wire.  Rectangles are
handled in closed form; arbitrary grid wells go through a 5-point
finite-difference eigensolve.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GeometryError, SolverError, UnsupportedNetworkError
from .network import Attachment, ChannelBasis, NetworkSpec, WellSpec

#: relative gap under which eigenvalues count as one degenerate group
GROUP_TOL = 1e-9


@dataclass(frozen=True)
class EigenPair:
    """One eigenvalue of the compact-part operator with its representation."""

    index: int
    value: float
    modes: tuple[int, int] | None = None   # (p, q) for the analytic rectangle path
    vector: np.ndarray | None = None       # grid representation, L2-normalized


@dataclass(frozen=True)
class SpectralData:
    """Retained eigenvalues plus the channel-projected boundary traces.

    ``trace`` rows follow ``eigenvalues``; columns follow the basis mode
    ordering (open modes first, then retained closed modes).  ``wells``
    tags each row with the well carrying the eigenfunction and ``masses``
    with that well's effective mass (rows of the DN series carry the
    1/(2 mu)^2 prefactor of their well).
    """

    eigenvalues: np.ndarray
    trace: np.ndarray
    wells: tuple[str, ...]
    lam_cut: float
    pairs: tuple[EigenPair, ...] = ()
    masses: np.ndarray | None = None

    def __post_init__(self):
        if self.masses is None:
            object.__setattr__(self, "masses", np.full(self.eigenvalues.shape, 0.5))
        self.eigenvalues.setflags(write=False)
        self.trace.setflags(write=False)
        self.masses.setflags(write=False)
        if self.trace.shape[0] != self.eigenvalues.shape[0]:
            raise ValueError("trace row count must match eigenvalue count")

    @property
    def n(self) -> int:
        return int(self.eigenvalues.shape[0])

    def groups(self, tol: float = GROUP_TOL) -> tuple[tuple[int, ...], ...]:
        """Indices of degenerate eigenvalue groups (nondecreasing order)."""
        groups: list[list[int]] = []
        for i, lam in enumerate(self.eigenvalues):
            if groups and abs(lam - self.eigenvalues[groups[-1][-1]]) <= tol * max(1.0, abs(lam)):
                groups[-1].append(i)
            else:
                groups.append([i])
        return tuple(tuple(g) for g in groups)

    def group_of(self, lam0: float, tol: float = GROUP_TOL) -> tuple[int, ...]:
        for g in self.groups(tol):
            if abs(self.eigenvalues[g[0]] - lam0) <= tol * max(1.0, abs(lam0)):
                return g
        raise ValueError(f"{lam0} is not a retained eigenvalue")


def merge(parts: list[SpectralData]) -> SpectralData:
    """Merge per-well spectral data into one table sorted by eigenvalue."""
    eig = np.concatenate([p.eigenvalues for p in parts])
    tr = np.vstack([p.trace for p in parts])
    mu = np.concatenate([p.masses for p in parts])
    wells = [w for p in parts for w in p.wells]
    pairs = [q for p in parts for q in p.pairs]
    order = np.argsort(eig, kind="stable")
    return SpectralData(
        eig[order].copy(),
        tr[order].copy(),
        tuple(wells[i] for i in order),
        max(p.lam_cut for p in parts),
        tuple(pairs[i] for i in order),
        mu[order].copy(),
    )


# --------------------------------------------------------------- rectangles

def rectangle_spectrum(well: WellSpec, lam_cut: float) -> list[EigenPair]:
    """All Dirichlet eigenvalues V + (pi^2/2mu)(p^2/a^2 + q^2/b^2) <= lam_cut."""
    if not well.is_rectangle:
        raise GeometryError("rectangle_spectrum needs a rectangle well")
    v0 = float(well.potential)
    c = math.pi**2 / (2.0 * well.mass)
    found: list[tuple[float, int, int]] = []
    if lam_cut > v0 + c * (1.0 / well.a**2 + 1.0 / well.b**2):
        pmax = int(math.floor(well.a * math.sqrt((lam_cut - v0) / c)))
        for p in range(1, pmax + 1):
            rem = (lam_cut - v0) / c - p * p / well.a**2
            if rem < 1.0 / well.b**2:
                continue
            qmax = int(math.floor(well.b * math.sqrt(rem)))
            for q in range(1, qmax + 1):
                found.append((v0 + c * (p * p / well.a**2 + q * q / well.b**2), p, q))
    if not found:
        warnings.warn(f"well {well.id}: no eigenvalues below lam_cut={lam_cut}")
    found.sort()
    return [EigenPair(r, lam, (p, q)) for r, (lam, p, q) in enumerate(found)]


def sine_overlap(s: int, delta: float, offset: float, beta: float) -> float:
    """Closed form of int_0^delta sin(s pi u/delta) sin(beta (u + offset)) du."""
    alpha = s * math.pi / delta
    # sin(s pi - x) = -(-1)^s sin(x): the boundary term carries -(-1)^s
    sign = 1.0 if s % 2 else -1.0
    if abs(alpha - beta) * delta < 1e-8:
        return 0.5 * delta * math.cos(beta * offset)
    num = alpha * (math.sin(beta * offset) + sign * math.sin(beta * (offset + delta)))
    return num / (alpha * alpha - beta * beta)


def _mode_columns(net: NetworkSpec, basis: ChannelBasis, well_id: str):
    """(column, mode, attachment) for every basis mode attached to a well."""
    out = []
    for col, mode in enumerate(basis.modes):
        wire = net.wire(mode.wire_id)
        for att in wire.attachments:
            if att.well == well_id:
                out.append((col, mode, att))
    return out


def _rect_trace_coeff(well: WellSpec, p: int, q: int, mode_width: float,
                      s: int, att: Attachment) -> float:
    """Trace coefficient of the (p, q) rectangle eigenfunction on one mode."""
    a, b = well.a, well.b
    norm = 2.0 / math.sqrt(a * b)
    if att.edge in ("left", "right"):
        beta = q * math.pi / b
        long_factor = p * math.pi / a
        sgn = (-1.0) ** p if att.edge == "right" else -1.0
    else:
        beta = p * math.pi / a
        long_factor = q * math.pi / b
        sgn = (-1.0) ** q if att.edge == "top" else -1.0
    overlap = sine_overlap(s, mode_width, att.offset, beta)
    return norm * sgn * long_factor * math.sqrt(2.0 / mode_width) * overlap


def boundary_trace_coeffs(pair: EigenPair, basis: ChannelBasis, well: WellSpec,
                          net: NetworkSpec) -> np.ndarray:
    """One trace-matrix row: channel projections of dphi_r/dn on the well edges."""
    row = np.zeros(len(basis.modes))
    if pair.modes is not None:
        p, q = pair.modes
        for col, mode, att in _mode_columns(net, basis, well.id):
            row[col] = _rect_trace_coeff(well, p, q, mode.width, mode.s, att)
        return row
    raise GeometryError("grid eigenpairs get their trace rows from fdm_spectrum")


def rectangle_spectral_data(well: WellSpec, basis: ChannelBasis, net: NetworkSpec,
                            lam_cut: float) -> SpectralData:
    pairs = rectangle_spectrum(well, lam_cut)
    eig = np.array([p.value for p in pairs])
    tr = np.zeros((len(pairs), len(basis.modes)))
    for i, pr in enumerate(pairs):
        tr[i] = boundary_trace_coeffs(pr, basis, well, net)
    return SpectralData(eig, tr, (well.id,) * len(pairs), lam_cut, tuple(pairs),
                        np.full(len(pairs), well.mass))


# --------------------------------------------------------------- grid wells

def _grid_operator(well: WellSpec, h: float):
    """5-point -(1/2mu) Laplacian + V on the interior nodes of the well."""
    nx = round(well.a / h)
    ny = round(well.b / h)
    if abs(nx * h - well.a) > 1e-9 * well.a or abs(ny * h - well.b) > 1e-9 * well.b:
        raise GeometryError(f"h={h} does not divide the well sides ({well.a}, {well.b})")
    mask = well.grid
    if mask is not None and mask.shape != (nx - 1, ny - 1):
        raise GeometryError("grid mask shape must be (a/h - 1, b/h - 1)")
    idx = -np.ones((nx - 1, ny - 1), dtype=np.int64)
    count = 0
    for i in range(nx - 1):
        for j in range(ny - 1):
            if mask is None or mask[i, j]:
                idx[i, j] = count
                count += 1
    coef = 1.0 / (2.0 * well.mass * h * h)
    pot = well.potential
    rows, cols, vals = [], [], []
    for i in range(nx - 1):
        for j in range(ny - 1):
            me = idx[i, j]
            if me < 0:
                continue
            v = 4.0 * coef
            if np.ndim(pot) == 0:
                v += float(pot)
            else:
                v += float(pot[i, j])
            rows.append(me), cols.append(me), vals.append(v)
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < nx - 1 and 0 <= jj < ny - 1 and idx[ii, jj] >= 0:
                    rows.append(me), cols.append(idx[ii, jj]), vals.append(-coef)
    op = sp.csr_matrix((vals, (rows, cols)), shape=(count, count))
    return op, idx, nx, ny


def _weyl_count(well: WellSpec, lam: float) -> float:
    vmin = float(np.min(well.potential))
    area = well.a * well.b
    return max(0.0, well.mass * area * (lam - vmin) / (2.0 * math.pi))


def fdm_spectrum(well: WellSpec, basis: ChannelBasis, net: NetworkSpec,
                 h: float, lam_cut: float) -> SpectralData:
    """Grid eigensolve of the well plus trace rows by one-sided differences.

    Converges at O(h^2) to the analytic values on rectangles.
    """
    op, idx, nx, ny = _grid_operator(well, h)
    n = op.shape[0]
    want = min(n - 2, int(_weyl_count(well, lam_cut) * 1.3) + 12)
    vmin = float(np.min(well.potential))
    try:
        k = max(want, 2)
        while True:
            vals, vecs = spla.eigsh(op, k=k, sigma=vmin - 1.0, which="LM")
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
            if vals[-1] > lam_cut or k >= n - 2:
                break
            k = min(n - 2, 2 * k)
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"eigensolve failed to converge: {exc}") from exc
    keep = vals <= lam_cut
    vals, vecs = vals[keep], vecs[:, keep]

    # L2-normalize on the grid (interior nodes; boundary values are zero)
    vecs = vecs / (h * np.sqrt(np.sum(vecs**2, axis=0)))

    pairs = []
    rows = np.zeros((vals.size, len(basis.modes)))
    cols_here = _mode_columns(net, basis, well.id)
    for r in range(vals.size):
        grid_vec = np.zeros((nx - 1, ny - 1))
        sel = idx >= 0
        grid_vec[sel] = vecs[:, r][idx[sel]]
        pairs.append(EigenPair(r, float(vals[r]), None, grid_vec))
        for col, mode, att in cols_here:
            rows[r, col] = _grid_trace_coeff(grid_vec, well, h, mode.width, mode.s, att)
    return SpectralData(np.asarray(vals, dtype=float), rows, (well.id,) * vals.size,
                        lam_cut, tuple(pairs), np.full(vals.size, well.mass))


def _grid_trace_coeff(grid_vec: np.ndarray, well: WellSpec, h: float,
                      width: float, s: int, att: Attachment) -> float:
    """Project the one-sided-difference normal derivative onto one wire mode."""
    nx1, ny1 = grid_vec.shape
    if att.edge in ("left", "right"):
        line1 = grid_vec[0, :] if att.edge == "left" else grid_vec[-1, :]
        line2 = grid_vec[1, :] if att.edge == "left" else grid_vec[-2, :]
        coords = (np.arange(1, ny1 + 1)) * h
    else:
        line1 = grid_vec[:, 0] if att.edge == "bottom" else grid_vec[:, -1]
        line2 = grid_vec[:, 1] if att.edge == "bottom" else grid_vec[:, -2]
        coords = (np.arange(1, nx1 + 1)) * h
    # second-order one-sided derivative at the Dirichlet edge (phi = 0 there)
    dn = (4.0 * line1 - line2) / (2.0 * h)
    u = coords - att.offset
    on = (u > 0) & (u < width)
    mode_vals = np.zeros_like(dn)
    mode_vals[on] = math.sqrt(2.0 / width) * np.sin(s * math.pi * u[on] / width)
    return float(h * np.sum(mode_vals * dn))


# --------------------------------------------------------------- assembly

def network_spectral_data(net: NetworkSpec, basis: ChannelBasis, lam_cut: float,
                          h: float | None = None) -> SpectralData:
    """Merged spectral data of all wells (rectangles analytic, grids by FDM)."""
    for wire in net.wires:
        if not wire.semi_infinite:
            raise UnsupportedNetworkError(
                "finite wires are not supported by the compact-part assembly"
            )
    parts = []
    for well in net.wells:
        if well.is_rectangle:
            parts.append(rectangle_spectral_data(well, basis, net, lam_cut))
        else:
            step = well.grid_h if h is None else h
            parts.append(fdm_spectrum(well, basis, net, step, lam_cut))
    return merge(parts)


def mean_spacing(net: NetworkSpec) -> float:
    """Weyl estimate of the compact-part eigenvalue spacing (area-based)."""
    dens = sum(w.mass * w.a * w.b for w in net.wells) / (2.0 * math.pi)
    return 1.0 / dens


def default_lam_cut(net: NetworkSpec) -> float:
    """Series truncation default: Fermi level + 40 mean spacings."""
    return net.fermi_level + 40.0 * mean_spacing(net)


# --------------------------------------------------------------- table I/O

TABLE_VERSION = "qnet-spectral-table v1"


def save_table(data: SpectralData, path) -> None:
    """Versioned text table: index, eigenvalue, well mass, trace row."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# {TABLE_VERSION}\n")
        f.write(f"# lam_cut {data.lam_cut:.17g}\n")
        f.write(f"# wells {' '.join(data.wells)}\n")
        for r in range(data.n):
            row = " ".join(f"{c:.17g}" for c in data.trace[r])
            f.write(f"{r} {data.eigenvalues[r]:.17g} {data.masses[r]:.17g} {row}\n")


def load_table(path) -> SpectralData:
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        if header != f"# {TABLE_VERSION}":
            raise ValueError(f"unsupported table version: {header!r}")
        lam_cut = float(f.readline().split()[-1])
        wells = tuple(f.readline().split()[2:])
        eig, mus, rows = [], [], []
        for line in f:
            parts = line.split()
            if not parts:
                continue
            eig.append(float(parts[1]))
            mus.append(float(parts[2]))
            rows.append([float(x) for x in parts[3:]])
    if not wells:
        wells = ("imported",) * len(eig)
    return SpectralData(np.array(eig), np.array(rows), wells, lam_cut,
                        masses=np.array(mus))
