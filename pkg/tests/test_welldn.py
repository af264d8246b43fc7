import math

import numpy as np
import pytest

from qnet.network import Attachment, NetworkSpec, WellSpec, WireSpec, classify_channels
from qnet.spectra import _mode_columns, rectangle_spectral_data
from qnet.welldn import GridDn, RectangleDn, assemble_dn_matrix, build_evaluators

PI = math.pi


def make_net(wires, wells=None, lam_f=20.0):
    wells = wells or (WellSpec("w", a=2.0, b=2.0, mass=0.5),)
    return NetworkSpec(wells=tuple(wells), wires=tuple(wires), fermi_level=lam_f)


def wire(wid, edge, offset, width=1.0):
    return WireSpec(wid, width=width, mass_par=0.5, mass_perp=0.5,
                    attachments=(Attachment("w", edge, offset),))


def grid_twin(well: WellSpec, h: float) -> WellSpec:
    nx, ny = round(well.a / h), round(well.b / h)
    return WellSpec(well.id, a=well.a, b=well.b, mass=well.mass,
                    potential=well.potential,
                    grid=np.ones((nx - 1, ny - 1), bool), grid_h=h)


class TestMatchedWidth:
    """Full-width attachments reduce to the 1D cot/csc factors exactly."""

    def setup_method(self):
        self.net = make_net(
            [wire("L", "left", 0.0), wire("R", "right", 0.0)],
            wells=(WellSpec("w", a=2.0, b=1.0, mass=0.5),),
        )
        self.basis = classify_channels(self.net, 3)
        self.ev = RectangleDn(self.net.wells[0], _mode_columns(self.net, self.basis, "w"))

    def test_diagonal_is_cot_factor(self):
        lam = 14.0
        k = math.sqrt(lam - PI**2)
        m = self.ev.matrix(lam)
        i = self.basis.index("L", 1)
        assert m[i, i] == pytest.approx(k / math.tan(2.0 * k), rel=1e-12)

    def test_offdiagonal_is_csc_factor(self):
        lam = 14.0
        k = math.sqrt(lam - PI**2)
        m = self.ev.matrix(lam)
        i, j = self.basis.index("L", 1), self.basis.index("R", 1)
        assert m[i, j] == pytest.approx(-k / math.sin(2.0 * k), rel=1e-12)

    def test_closed_channel_factor(self):
        lam = 14.0
        q = math.sqrt(4 * PI**2 - lam)
        m = self.ev.matrix(lam)
        i = self.basis.index("L", 2)
        assert m[i, i] == pytest.approx(q / math.tanh(2.0 * q), rel=1e-12)

    def test_cross_width_orthogonality(self):
        m = self.ev.matrix(14.0)
        assert m[self.basis.index("L", 1), self.basis.index("L", 2)] == pytest.approx(0.0, abs=1e-12)


class TestAgainstGridSolver:
    def cross_check(self, wires, lam, h, tol, s_max=3):
        net = make_net(wires)
        basis = classify_channels(net, s_max)
        ma = _mode_columns(net, basis, "w")
        rect = RectangleDn(net.wells[0], ma)
        grid = GridDn(grid_twin(net.wells[0], h), ma, h)
        m_r = rect.matrix(lam)
        m_g = grid.matrix(lam)
        # entrywise, relative to the entry scale: the grid error on high
        # evanescent diagonals grows with their magnitude
        diff = np.max(np.abs(m_r - m_g) / (1.0 + np.abs(m_r)))
        assert diff < tol

    def test_offset_parallel_wires(self):
        self.cross_check([wire("L", "left", 0.25), wire("R", "right", 0.75)],
                         14.0, 2.0 / 128, 0.03)

    def test_perpendicular_wires(self):
        self.cross_check([wire("L", "left", 0.5), wire("B", "bottom", 0.75)],
                         14.0, 2.0 / 128, 0.03)

    def test_same_edge_pair(self):
        self.cross_check([wire("A", "top", 0.125), wire("B", "top", 1.375, width=0.5)],
                         11.0, 2.0 / 128, 0.03)

    def test_grid_convergence(self):
        net = make_net([wire("L", "left", 0.25), wire("R", "right", 0.75)])
        basis = classify_channels(net, 3)
        ma = _mode_columns(net, basis, "w")
        rect = RectangleDn(net.wells[0], ma)
        target = rect.matrix(14.0)
        errs = []
        for n in (64, 128):
            h = 2.0 / n
            errs.append(np.max(np.abs(GridDn(grid_twin(net.wells[0], h), ma, h).matrix(14.0) - target)))
        assert errs[1] < errs[0] / 2.5


class TestStructure:
    def test_symmetry(self):
        net = make_net([wire("L", "left", 0.3), wire("B", "bottom", 0.6),
                        wire("T", "top", 0.9, width=0.5)])
        basis = classify_channels(net, 4)
        m = RectangleDn(net.wells[0], _mode_columns(net, basis, "w")).matrix(13.7)
        assert np.max(np.abs(m - m.T)) < 1e-12

    def test_pole_residue_matches_trace_dyad(self):
        net = make_net([wire("L", "left", 0.25), wire("R", "right", 0.75)])
        basis = classify_channels(net, 3)
        data = rectangle_spectral_data(net.wells[0], basis, net, 40.0)
        ev = RectangleDn(net.wells[0], _mode_columns(net, basis, "w"))
        lam0 = 12.337005501361697          # pi^2 (1^2 + 2^2)/4, twofold degenerate
        group = data.group_of(lam0)
        dyad = sum(np.outer(data.trace[i], data.trace[i]) for i in group)
        h = 1e-5
        probe = 0.5 * (h * ev.matrix(lam0 + h) - h * ev.matrix(lam0 - h))
        np.testing.assert_allclose(probe, dyad, atol=2e-5 * np.max(np.abs(dyad)))

    def test_assemble_multi_well(self):
        wells = (WellSpec("w", a=2.0, b=2.0, mass=0.5),
                 WellSpec("v", a=1.0, b=1.5, mass=0.5))
        wires = (wire("L", "left", 0.25),
                 WireSpec("X", width=0.5, mass_par=0.5, mass_perp=0.5,
                          attachments=(Attachment("v", "right", 0.5),)))
        net = NetworkSpec(wells=wells, wires=wires, fermi_level=42.0)
        basis = classify_channels(net, 3)
        evs = build_evaluators(net, basis)
        m = assemble_dn_matrix(evs, basis, 41.0)
        # block structure: no coupling between modes of different wells
        for i, mi in enumerate(basis.modes):
            for j, mj in enumerate(basis.modes):
                if mi.wire_id == "L" and mj.wire_id == "X":
                    assert m[i, j] == 0.0
