import math

import numpy as np
import pytest

from holeflow.estimates import (ExpandingHolesConfig, dissipation_check,
                                expanding_holes_run, gaussian_density_sup,
                                height_excess_sq, curvature_l2_sq,
                                l2_height_bound_check, slab_weighted_mass)
from holeflow.fixtures import icosphere, make_fixture, square_sheet
from holeflow.flow import DtPolicy, FlowTrajectory, evolve
from holeflow.geom import coordinate_plane
from holeflow.kernels import make_profile
from holeflow.varifold import (DiscreteVarifold, density_ratio,
                               mean_curvature, parabolic_rescale)

EPS = 0.05


def static_trajectory(v, times=(0.0, 0.5, 1.0)):
    return FlowTrajectory(times=list(times), snapshots=[v] * len(times),
                          cumulative_dissipation=[0.0] * len(times),
                          ledger=[], policy=DtPolicy())


@pytest.fixture(scope="module")
def window_cfg(t_plane=None):
    prof = make_profile(0.1)
    return ExpandingHolesConfig(
        t_plane=coordinate_plane([0, 1], 3), t1=0.0, t2=1.0,
        r1=1.0, r2=math.sqrt(2.0), rhat1=math.sqrt(2.0), rhat2=2.0,
        profile=prof)


class TestHeightExcess:
    def test_surface_in_plane(self, t_plane, flat_square):
        assert height_excess_sq(flat_square, t_plane, 0.5) == 0.0

    def test_single_sheet_at_height(self, t_plane):
        c = 0.3
        sheet = square_sheet(4.0, 5, height=c)
        got = height_excess_sq(sheet, t_plane, 1.0)
        assert got == pytest.approx(c * c * np.pi, rel=2e-2)

    def test_two_sheets_additive(self, t_plane):
        c = 0.3
        up = square_sheet(4.0, 5, height=c)
        down = square_sheet(4.0, 5, height=-c)
        both = DiscreteVarifold(
            np.vstack([up.vertices, down.vertices]),
            np.vstack([up.faces, down.faces + up.num_vertices]),
            np.concatenate([up.multiplicity, down.multiplicity]),
            np.concatenate([up.boundary, down.boundary]))
        a = height_excess_sq(up, t_plane, 1.0)
        b = height_excess_sq(down, t_plane, 1.0)
        assert height_excess_sq(both, t_plane, 1.0) == pytest.approx(a + b,
                                                                     rel=1e-12)


class TestCurvatureEnergy:
    def test_zero_field(self, flat_square):
        h = np.zeros_like(flat_square.vertices)
        assert curvature_l2_sq(flat_square, h,
                               lambda p: np.ones(len(p))) == 0.0

    def test_sphere_inside_plateau(self, sphere4):
        from holeflow.kernels import make_profile
        prof = make_profile(0.3)
        h = mean_curvature(sphere4)
        got = curvature_l2_sq(
            sphere4, h, lambda p: prof.value(np.linalg.norm(p, axis=1) / 2.0) ** 2)
        assert got == pytest.approx(16 * np.pi, rel=0.05)

    def test_zero_weight(self, sphere4):
        h = mean_curvature(sphere4)
        assert curvature_l2_sq(sphere4, h, lambda p: np.zeros(len(p))) == 0.0


class TestDissipationCheck:
    def test_stationary_plane_in_reference(self, window_cfg):
        sheet = square_sheet(6.0, 5, height=0.0)
        chk = dissipation_check(sheet, window_cfg, 0.0)
        assert chk["mu_sq"] == 0.0 and chk["alpha_sq"] == 0.0
        assert chk["pass"]
        assert abs(chk["lhs"]) <= chk["tol"]

    def test_support_annulus_guard(self, window_cfg):
        bad = square_sheet(6.0, 4, height=1.7)  # inside (sqrt(2), 2)
        with pytest.raises(ValueError, match="forbidden annulus"):
            dissipation_check(bad, window_cfg, 0.0)

    def test_passes_during_nucleated_flow(self, window_cfg, t_plane):
        from holeflow.nucleation import nucleate
        v0 = make_fixture("flat_stack", 2, 4, radius=4 * EPS,
                          spacing=0.02 * EPS)
        va = nucleate(v0, t_plane, EPS)
        tgrid = np.linspace(0, 1, 6) * EPS**2
        traj = evolve(va, EPS**2, snapshot_times=tgrid)
        for t in tgrid:
            v = parabolic_rescale(traj.snapshot_at(t), EPS)
            chk = dissipation_check(v, window_cfg, t / EPS**2)
            assert chk["pass"], chk


class TestExpandingHolesRun:
    def test_static_stack_zero_gain(self, window_cfg):
        # an exact multiplicity-2 plane inside the reference plane is
        # stationary; ratios at both window ends agree up to quadrature
        stack = make_fixture("flat_stack", 2, 5, radius=6.0, spacing=0.0)
        rep = expanding_holes_run(static_trajectory(stack), window_cfg)
        assert rep.empirical_M is None  # no normal excess anywhere
        assert rep.mu_bar_sq == 0.0
        assert abs(rep.ratio_gain) <= 0.01 * rep.mass_ratio_start
        assert rep.mass_ratio_start == pytest.approx(
            2.0 * slab_weighted_mass(stack, window_cfg, 0.0) / 2.0, rel=1e-12)

    def test_missing_endpoints_rejected(self, window_cfg):
        stack = make_fixture("flat_stack", 2, 4, radius=6.0, spacing=0.0)
        traj = static_trajectory(stack, times=(0.0, 0.25, 0.5))
        with pytest.raises(ValueError, match="endpoints"):
            expanding_holes_run(traj, window_cfg)

    def test_threaded_equals_serial(self, window_cfg):
        stack = make_fixture("flat_stack", 2, 4, radius=6.0, spacing=0.001)
        traj = static_trajectory(stack)
        a = expanding_holes_run(traj, window_cfg, threads=1)
        b = expanding_holes_run(traj, window_cfg, threads=4)
        assert a.mu_sq == b.mu_sq and a.mass_ratio_end == b.mass_ratio_end


class TestL2HeightBound:
    def test_plane_in_reference(self, t_plane):
        sheet = square_sheet(4.0, 4, height=0.0)
        traj = evolve(sheet, 0.16, snapshot_times=np.linspace(0, 0.16, 5))
        chk = l2_height_bound_check(traj, t_plane, 0.4, 4.0)
        assert chk["lhs"] == 0.0 and chk["pass"]

    def test_translated_plane_closed_form(self, t_plane):
        c, big_r, big_l = 0.05, 0.4, 4.0
        sheet = square_sheet(4.0, 4, height=c)
        traj = evolve(sheet, big_r**2,
                      snapshot_times=np.linspace(0, big_r**2, 5))
        chk = l2_height_bound_check(traj, t_plane, big_r, big_l)
        lhs_exact = c * c * np.pi * (big_r**2 - c * c) / big_r**4
        assert chk["lhs"] == pytest.approx(lhs_exact, rel=0.02)
        first_exact = (math.exp(0.25) * c * c * np.pi
                       * ((big_l * big_r) ** 2 - c * c) / big_r**4)
        assert chk["first_term"] == pytest.approx(first_exact, rel=0.02)
        assert chk["pass"]

    def test_shrinking_sphere(self, t_plane):
        s = icosphere(3)
        big_r = 0.3
        traj = evolve(s, big_r**2,
                      snapshot_times=np.linspace(0, big_r**2, 7))
        chk = l2_height_bound_check(traj, t_plane, big_r, 4.0)
        assert chk["pass"]

    def test_requires_l_at_least_two(self, t_plane, flat_square):
        traj = static_trajectory(flat_square, times=(0.0, 0.01))
        with pytest.raises(ValueError):
            l2_height_bound_check(traj, t_plane, 0.1, 1.5)


class TestGaussianDensitySup:
    def test_plane_near_one(self):
        sheet = square_sheet(4.0, 5, height=0.0)
        traj = static_trajectory(sheet, times=(0.0, 0.04))
        got = gaussian_density_sup(traj, 0.2, 0.05)
        assert got == pytest.approx(1.0, rel=0.05)

    def test_stack_near_two(self):
        stack = make_fixture("flat_stack", 2, 5, radius=1.0, spacing=0.002)
        traj = static_trajectory(stack, times=(0.0, 0.04))
        got = gaussian_density_sup(traj, 0.4, 0.05)
        assert got == pytest.approx(2.0, rel=0.05)

    def test_dominates_single_density_ratio(self):
        stack = make_fixture("flat_stack", 2, 4, radius=1.0, spacing=0.002)
        traj = static_trajectory(stack, times=(0.0, 0.04))
        sup = gaussian_density_sup(traj, 0.4, 0.05)
        single = density_ratio(stack, np.zeros(3), 0.2)
        assert sup >= single - 1e-12


class TestScaleCovariance:
    def test_height_excess_scaling(self, t_plane):
        stack = make_fixture("flat_stack", 2, 4, radius=0.2,
                             spacing=0.013)
        lam = 2.0
        big_r = 0.0753
        a = height_excess_sq(parabolic_rescale(stack, lam), t_plane, big_r)
        b = height_excess_sq(stack, t_plane, lam * big_r) / lam**4
        assert a == pytest.approx(b, rel=1e-10)

    def test_density_ratio_invariance(self, t_plane):
        stack = make_fixture("flat_stack", 2, 4, radius=0.2, spacing=0.013)
        lam = 3.7
        r = 0.0611
        a = density_ratio(parabolic_rescale(stack, lam), np.zeros(3), r)
        b = density_ratio(stack, np.zeros(3), lam * r)
        assert a == pytest.approx(b, rel=1e-10)
