"""Network geometry, channel thresholds and wavenumber matrices.

A network is a set of rectangular (or grid-sampled) quantum wells joined
to straight wires of constant width.  Units: hbar = 1 and the kinetic
term is -(1/2 mu) Laplace, so a wire of width ``delta`` with transverse
mass ``mu_perp`` and floor potential ``V`` has channel thresholds

    T(s) = V + s^2 pi^2 / (2 mu_perp delta^2),   s = 1, 2, ...

Channels with T < fermi_level are open (propagating), the rest are
closed (evanescent).  All classes here are frozen dataclasses; every
function is pure.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BandEdgeError,
    DegenerateFermiLevelError,
    GeometryError,
    InvalidIndexError,
)

EDGES = ("left", "right", "bottom", "top")

#: relative tolerance below which the Fermi level counts as degenerate
#: with a threshold
EPS_THRESHOLD = 1e-9


@dataclass(frozen=True)
class Attachment:
    """Placement of a wire bottom section on a well edge.

    ``offset`` is the distance from the edge origin (the corner with the
    smaller coordinate) to the start of the bottom section, measured
    along the edge.
    """

    well: str
    edge: str
    offset: float = 0.0

    def __post_init__(self):
        if self.edge not in EDGES:
            raise GeometryError(f"unknown edge {self.edge!r}, expected one of {EDGES}")
        if self.offset < 0:
            raise GeometryError("attachment offset must be nonnegative")


@dataclass(frozen=True)
class WireSpec:
    """Straight wire of constant width; semi-infinite unless ``length`` is finite."""

    id: str
    width: float
    mass_par: float
    mass_perp: float
    potential: float = 0.0
    length: float = math.inf
    attachments: tuple[Attachment, ...] = ()

    def __post_init__(self):
        if self.width <= 0:
            raise GeometryError(f"wire {self.id}: width must be positive")
        if self.mass_par <= 0 or self.mass_perp <= 0:
            raise GeometryError(f"wire {self.id}: masses must be positive")
        if self.length <= 0:
            raise GeometryError(f"wire {self.id}: length must be positive")
        n_att = len(self.attachments)
        if self.semi_infinite and n_att != 1:
            raise GeometryError(f"wire {self.id}: semi-infinite wires carry exactly one attachment")
        if not self.semi_infinite and n_att != 2:
            raise GeometryError(f"wire {self.id}: finite wires carry two attachments")

    @property
    def semi_infinite(self) -> bool:
        return math.isinf(self.length)


@dataclass(frozen=True)
class WellSpec:
    """Rectangular well a x b, or an externally supplied grid geometry.

    ``grid`` (optional) is a boolean mask of interior cells with spacing
    ``grid_h``; when present it overrides the analytic rectangle path.
    The potential is a constant for rectangles and may be a grid array
    for grid wells.
    """

    id: str
    a: float
    b: float
    mass: float
    potential: float = 0.0
    grid: np.ndarray | None = None
    grid_h: float | None = None

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise GeometryError(f"well {self.id}: side lengths must be positive")
        if self.mass <= 0:
            raise GeometryError(f"well {self.id}: mass must be positive")
        if self.grid is not None and self.grid_h is None:
            raise GeometryError(f"well {self.id}: grid geometry requires grid_h")

    @property
    def is_rectangle(self) -> bool:
        return self.grid is None

    def edge_length(self, edge: str) -> float:
        return self.b if edge in ("left", "right") else self.a


@dataclass(frozen=True)
class NetworkSpec:
    """One network instance: wells, wires and the Fermi level."""

    wells: tuple[WellSpec, ...]
    wires: tuple[WireSpec, ...]
    fermi_level: float

    def __post_init__(self):
        ids = [w.id for w in self.wells]
        if len(set(ids)) != len(ids):
            raise GeometryError("duplicate well ids")
        wire_ids = [w.id for w in self.wires]
        if len(set(wire_ids)) != len(wire_ids):
            raise GeometryError("duplicate wire ids")
        by_edge: dict[tuple[str, str], list[tuple[float, float, str]]] = {}
        for wire in self.wires:
            for att in wire.attachments:
                well = self.well(att.well)
                ell = well.edge_length(att.edge)
                if att.offset + wire.width > ell + 1e-12:
                    raise GeometryError(
                        f"wire {wire.id}: bottom section [{att.offset}, "
                        f"{att.offset + wire.width}] exceeds edge length {ell}"
                    )
                by_edge.setdefault((att.well, att.edge), []).append(
                    (att.offset, att.offset + wire.width, wire.id)
                )
        for (well_id, edge), spans in by_edge.items():
            spans.sort()
            for (a0, a1, w0), (b0, b1, w1) in zip(spans, spans[1:]):
                if b0 < a1 - 1e-12:
                    raise GeometryError(
                        f"wires {w0} and {w1} overlap on edge {edge} of well {well_id}"
                    )

    def well(self, well_id: str) -> WellSpec:
        for w in self.wells:
            if w.id == well_id:
                return w
        raise GeometryError(f"attachment references unknown well {well_id!r}")

    def wire(self, wire_id: str) -> WireSpec:
        for w in self.wires:
            if w.id == wire_id:
                return w
        raise GeometryError(f"unknown wire {wire_id!r}")

    @property
    def semi_infinite_wires(self) -> tuple[WireSpec, ...]:
        return tuple(w for w in self.wires if w.semi_infinite)


@dataclass(frozen=True)
class ChannelMode:
    """One transverse mode of one wire, with its threshold and status."""

    wire_id: str
    s: int
    threshold: float
    open_: bool
    mass_par: float
    mass_perp: float
    width: float

    @property
    def status(self) -> str:
        return "open" if self.open_ else "closed"


@dataclass(frozen=True)
class ChannelBasis:
    """Ordered open and retained closed modes; fixes every matrix indexing.

    Ordering is by (wire id, transverse index) within each group, open
    modes first.  ``s_max`` bounds the retained closed modes per wire.
    """

    open_modes: tuple[ChannelMode, ...]
    closed_modes: tuple[ChannelMode, ...]
    s_max: int
    fermi_level: float = field(default=float("nan"))

    @property
    def n_open(self) -> int:
        return len(self.open_modes)

    @property
    def n_closed(self) -> int:
        return len(self.closed_modes)

    @property
    def modes(self) -> tuple[ChannelMode, ...]:
        return self.open_modes + self.closed_modes

    def index(self, wire_id: str, s: int) -> int:
        for i, m in enumerate(self.modes):
            if m.wire_id == wire_id and m.s == s:
                return i
        raise InvalidIndexError(f"mode ({wire_id}, {s}) not in basis")


def threshold(wire: WireSpec, s: int) -> float:
    """Channel cut-off energy V + s^2 pi^2 / (2 mu_perp delta^2)."""
    if s < 1:
        raise InvalidIndexError(f"transverse index must be >= 1, got {s}")
    return wire.potential + (s * math.pi / wire.width) ** 2 / (2.0 * wire.mass_perp)


def classify_channels(net: NetworkSpec, s_max: int, eps_thr: float = EPS_THRESHOLD) -> ChannelBasis:
    """Split the transverse modes of all semi-infinite wires at the Fermi level.

    Raises ``DegenerateFermiLevelError`` when the Fermi level sits within
    ``eps_thr`` (relative) of any threshold, and ``InvalidIndexError``
    when ``s_max`` is too small to contain all open modes.  A basis with
    no open modes is legal but scattering is undefined; a warning is
    emitted.
    """
    if s_max < 1:
        raise InvalidIndexError("s_max must be >= 1")
    lam_f = net.fermi_level
    open_modes: list[ChannelMode] = []
    closed_modes: list[ChannelMode] = []
    scale = max(1.0, abs(lam_f))
    for wire in sorted(net.semi_infinite_wires, key=lambda w: w.id):
        if threshold(wire, s_max) < lam_f:
            raise InvalidIndexError(
                f"wire {wire.id}: open modes extend beyond s_max={s_max}; increase s_max"
            )
        for s in range(1, s_max + 1):
            t = threshold(wire, s)
            if abs(t - lam_f) <= eps_thr * scale:
                raise DegenerateFermiLevelError(
                    f"Fermi level {lam_f} coincides with threshold s={s} of wire {wire.id}"
                )
            mode = ChannelMode(wire.id, s, t, t < lam_f, wire.mass_par, wire.mass_perp, wire.width)
            (open_modes if mode.open_ else closed_modes).append(mode)
    if not open_modes:
        warnings.warn("no open channels at this Fermi level; scattering is undefined")
    return ChannelBasis(tuple(open_modes), tuple(closed_modes), s_max, lam_f)


def spectral_band(net: NetworkSpec, basis: ChannelBasis | None = None) -> tuple[float, float]:
    """Return (lam_max, lam_min): largest open and smallest closed threshold.

    With ``basis`` given, the closed list is restricted to the retained
    modes; an empty retained closed list yields +inf with a warning.
    Without a basis the first threshold above the Fermi level of every
    semi-infinite wire is used, which always exists.
    """
    lam_f = net.fermi_level
    if basis is not None:
        opens = [m.threshold for m in basis.open_modes]
        closeds = [m.threshold for m in basis.closed_modes]
    else:
        opens, closeds = [], []
        for wire in net.semi_infinite_wires:
            s = 1
            while threshold(wire, s) < lam_f:
                opens.append(threshold(wire, s))
                s += 1
            closeds.append(threshold(wire, s))
    if not opens:
        raise BandEdgeError("no open channels: spectral band undefined")
    lam_max = max(opens)
    if not closeds:
        warnings.warn("no closed channels retained; upper band edge reported as +inf")
        return lam_max, math.inf
    return lam_max, min(closeds)


def k_plus(basis: ChannelBasis, lam: float) -> np.ndarray:
    """Diagonal of K_+ over open modes: sqrt(2 mu_par) sqrt(lam - T)."""
    out = np.empty(basis.n_open)
    for i, m in enumerate(basis.open_modes):
        if lam <= m.threshold:
            raise BandEdgeError(
                f"lambda={lam} at or below open threshold {m.threshold} of ({m.wire_id}, s={m.s})"
            )
        out[i] = math.sqrt(2.0 * m.mass_par) * math.sqrt(lam - m.threshold)
    return out


def k_minus(basis: ChannelBasis, lam: float) -> np.ndarray:
    """Diagonal of K_- over retained closed modes: -sqrt(2 mu_par) sqrt(T - lam)."""
    out = np.empty(basis.n_closed)
    for i, m in enumerate(basis.closed_modes):
        if lam >= m.threshold:
            raise BandEdgeError(
                f"lambda={lam} at or above closed threshold {m.threshold} of ({m.wire_id}, s={m.s})"
            )
        out[i] = -math.sqrt(2.0 * m.mass_par) * math.sqrt(m.threshold - lam)
    return out


def k_plus_complex(basis: ChannelBasis, lam: complex) -> np.ndarray:
    """K_+ continued off the real axis (principal branch, Im sqrt >= 0)."""
    out = np.empty(basis.n_open, dtype=complex)
    for i, m in enumerate(basis.open_modes):
        out[i] = math.sqrt(2.0 * m.mass_par) * np.sqrt(complex(lam - m.threshold))
    return out
