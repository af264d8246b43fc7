"""Direct finite-difference scattering solver used as the acceptance oracle.

The composite domain (one rectangle well plus its semi-infinite wires,
truncated at length ``l_tr``) is discretized on a uniform 5-point grid.
Wires are terminated by the exact discrete outgoing map: on the last
wire column the ghost column is eliminated through per-mode propagation
factors of the discrete dispersion relation

    (1/(2 mu_par)) (2 - 2 cos(theta)) / h^2 = lam - T_s(discrete),

so the truncation reflects nothing, for open and evanescent modes alike.
The incoming wave is injected through the same relation, which keeps all
interior equations homogeneous.  Outgoing amplitudes are read off by
transverse projection at two stations (mid-wire for open modes, next to
the mouth for evanescent ones) and referenced back to the wire mouth.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BandEdgeError, GeometryError, UnsupportedNetworkError
from .network import ChannelBasis, NetworkSpec

_DIRS = {"left": (-1, 0), "right": (1, 0), "bottom": (0, -1), "top": (0, 1)}


def _units(x: float, h: float, what: str) -> int:
    n = round(x / h)
    if abs(n * h - x) > 1e-9 * max(1.0, abs(x)):
        raise GeometryError(f"h={h} does not divide {what}={x}")
    return int(n)


@dataclass
class _WireGrid:
    wire_id: str
    direction: tuple[int, int]
    origin: tuple[int, int]      # grid node of the mouth corner (offset side)
    m: int                       # transverse intervals (width / h)
    cols: int                    # interior columns 1..cols; closure acts on cols
    width: float
    mu_par: float
    mu_perp: float
    potential: float

    def node(self, c: int, t: int) -> tuple[int, int]:
        dx, dy = self.direction
        ox, oy = self.origin
        if dx:
            return ox + dx * c, oy + t
        return ox + t, oy + dy * c


class GridScene:
    """Stitched uniform grid over one rectangle well and its wires."""

    def __init__(self, net: NetworkSpec, h: float, l_tr: float):
        if len(net.wells) != 1 or not net.wells[0].is_rectangle:
            raise UnsupportedNetworkError("the FDM oracle supports one rectangle well")
        well = net.wells[0]
        self.net = net
        self.well = well
        self.h = h
        self.l_tr = l_tr
        nx = _units(well.a, h, "well side a")
        ny = _units(well.b, h, "well side b")
        if len({w.mass_par for w in net.wires} | {w.mass_perp for w in net.wires}
               | {well.mass}) != 1:
            raise UnsupportedNetworkError("the FDM oracle needs a uniform effective mass")
        self.wires: list[_WireGrid] = []
        for wire in net.wires:
            if not wire.semi_infinite:
                raise UnsupportedNetworkError("the FDM oracle needs semi-infinite wires")
            att = wire.attachments[0]
            m = _units(wire.width, h, f"width of wire {wire.id}")
            off = _units(att.offset, h, f"offset of wire {wire.id}")
            cols = _units(l_tr, h, "truncation length")
            origin = {
                "left": (0, off), "right": (nx, off),
                "bottom": (off, 0), "top": (off, ny),
            }[att.edge]
            self.wires.append(_WireGrid(wire.id, _DIRS[att.edge], origin, m, cols,
                                        wire.width, wire.mass_par, wire.mass_perp,
                                        wire.potential))

        # interior unknowns: well interior, junction lines, wire interiors
        index: dict[tuple[int, int], int] = {}
        pot: list[float] = []
        for i in range(1, nx):
            for j in range(1, ny):
                index[(i, j)] = len(index)
                pot.append(float(well.potential))
        for wg in self.wires:
            for t in range(1, wg.m):
                index[wg.node(0, t)] = len(index)
                pot.append(0.5 * (float(well.potential) + wg.potential))
            for c in range(1, wg.cols + 1):
                for t in range(1, wg.m):
                    index[wg.node(c, t)] = len(index)
                    pot.append(wg.potential)
        self.index = index
        self.potential = np.array(pot)
        self.mass = well.mass
        self.n = len(index)
        self._base = self._assemble_base()

    # ------------------------------------------------------------ assembly

    def _assemble_base(self) -> sp.csr_matrix:
        """Five-point operator without the truncation closure."""
        coef = 1.0 / (2.0 * self.mass * self.h * self.h)
        rows, cols, vals = [], [], []
        for (i, j), me in self.index.items():
            rows.append(me), cols.append(me), vals.append(4.0 * coef + self.potential[me])
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nb = self.index.get((i + di, j + dj))
                if nb is not None:
                    rows.append(me), cols.append(nb), vals.append(-coef)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def wire_modes(self, wg: _WireGrid, lam: float):
        """Discrete transverse modes, thresholds and propagation factors."""
        m = wg.m
        vecs = np.sin(np.pi * np.outer(np.arange(1, m), np.arange(1, m)) / m)
        t_disc = wg.potential + (2.0 - 2.0 * np.cos(np.pi * np.arange(1, m) / m)) / (
            2.0 * wg.mu_perp * self.h * self.h)
        z = 1.0 - wg.mu_par * self.h * self.h * (lam - t_disc)
        gamma = np.empty(m - 1, dtype=complex)
        for s in range(m - 1):
            if z[s] < -1.0:
                raise BandEdgeError("energy beyond the discrete band of the stencil")
            if abs(z[s]) <= 1.0:
                gamma[s] = cmath.exp(1j * math.acos(z[s]))
            else:
                gamma[s] = z[s] - math.sqrt(z[s] * z[s] - 1.0)
        return vecs, t_disc, gamma

    def factorize(self, lam: float):
        """LU of the closed operator plus per-wire closure data."""
        a = (self._base - lam * sp.eye(self.n, format="csr")).tolil().astype(complex)
        coef = 1.0 / (2.0 * self.mass * self.h * self.h)
        closures = []
        for wg in self.wires:
            vecs, _, gamma = self.wire_modes(wg, lam)
            proj = (2.0 / wg.m) * vecs
            bmat = vecs.T @ (gamma[:, None] * proj)        # ghost = B @ last column
            last = [self.index[wg.node(wg.cols, t)] for t in range(1, wg.m)]
            for ti, me in enumerate(last):
                for tj, other in enumerate(last):
                    a[me, other] -= coef * bmat[ti, tj]
            closures.append((wg, vecs, gamma, last))
        return spla.splu(a.tocsc()), closures, coef

    # -------------------------------------------------------------- solve

    def solve_scattering(self, lam: float, incoming: tuple[str, int],
                         _fact=None):
        """(open amplitudes, evanescent amplitudes) for a unit incoming mode.

        Dict keys are (wire id, s); amplitudes are mouth-referenced
        coefficients in the per-wire discrete transverse basis.
        """
        lu, closures, coef = self.factorize(lam) if _fact is None else _fact
        wire_in, s_in = incoming
        rhs = np.zeros(self.n, dtype=complex)
        found = False
        for wg, vecs, gamma, last in closures:
            if wg.wire_id != wire_in:
                continue
            found = True
            g_in = gamma[s_in - 1]
            if abs(abs(g_in) - 1.0) > 1e-10:
                raise BandEdgeError(f"incoming mode ({wire_in}, {s_in}) is not open")
            # incoming phi_c = e_s g^{-c}: ghost-column mismatch is the source
            corr = g_in ** (-(wg.cols + 1)) - g_in * g_in ** (-wg.cols)
            for ti, me in enumerate(last):
                rhs[me] += coef * corr * vecs[s_in - 1, ti]
        if not found:
            raise GeometryError(f"unknown incoming wire {wire_in!r}")
        psi = lu.solve(rhs)

        open_amp, evan_amp = {}, {}
        for wg, vecs, gamma, last in closures:
            for s in range(1, wg.m):
                g = gamma[s - 1]
                is_open = abs(abs(g) - 1.0) < 1e-10
                c1 = max(1, wg.cols // 2) if is_open else 1
                c2 = min(wg.cols, c1 + 1)
                est = []
                for c in (c1, c2):
                    nodes = [self.index[wg.node(c, t)] for t in range(1, wg.m)]
                    amp = (2.0 / wg.m) * np.dot(vecs[s - 1], psi[nodes])
                    if wg.wire_id == wire_in and s == s_in:
                        amp -= g ** (-c)
                    est.append(amp * g ** (-c))
                key = (wg.wire_id, s)
                (open_amp if is_open else evan_amp)[key] = 0.5 * (est[0] + est[1])
        return open_amp, evan_amp

    def s_matrix(self, lam: float, basis: ChannelBasis) -> np.ndarray:
        """Amplitude scattering matrix over the open modes of a basis.

        Widths may differ across wires; amplitudes are rescaled to the
        continuum mode normalization sqrt(2/width).
        """
        fact = self.factorize(lam)
        n = basis.n_open
        s = np.zeros((n, n), dtype=complex)
        for j, mode in enumerate(basis.open_modes):
            open_amp, _ = self.solve_scattering(lam, (mode.wire_id, mode.s), fact)
            for i, mi in enumerate(basis.open_modes):
                s[i, j] = open_amp[(mi.wire_id, mi.s)] * math.sqrt(mi.width / mode.width)
        return s


def default_l_tr(basis: ChannelBasis, lam_hi: float, h: float) -> float:
    """Truncation length: >= 6 decay lengths of the slowest evanescent mode."""
    decs = [math.sqrt(2.0 * m.mass_par * (m.threshold - lam_hi))
            for m in basis.closed_modes if m.threshold > lam_hi]
    if not decs:
        raise BandEdgeError("no evanescent mode above the sweep range")
    raw = 6.0 / min(decs)
    return math.ceil(raw / h) * h


def oracle_compare(scene: GridScene, basis: ChannelBasis, s_dn_of_lam, lams):
    """Per-energy deviation table between the DN route and the oracle.

    Rows: (lambda, max entrywise |S_dn - S_fdm|, S_dn, S_fdm).
    """
    rows = []
    for lam in lams:
        s_dn = s_dn_of_lam(lam)
        s_fd = scene.s_matrix(lam, basis)
        rows.append((float(lam), float(np.max(np.abs(s_dn - s_fd))), s_dn, s_fd))
    return rows
