"""Iteration schedule: error series, parameter conditions, orchestrator.

The per-step error series is

    a_q^2 = log^(n+2)(q) / log^(2a)(2^((q-1)/2) / log q)
          + log^(n+2)(q) * exp(-(log(q) - 1)^2 / 8),

summable exactly when a > 1/2.  Logarithms are natural by default with a
base-2 switch recorded in output metadata.  Inner logs are expanded as
(q-1)/2 * log 2 - log log q, which avoids overflow of 2^((q-1)/2) for large
q.  Admissibility of an index q requires

    (am1)  2^((-q+1)/2) * log(q) < r0,
    (am2)  2^((-q-1)/2) < r1,

where r1 is the empty-spot scale; for slow-growth exponents near 1/2 that
scale underflows double precision, so it is carried as its natural log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .geom import UNIT_BALL_VOLUME, Plane, coordinate_plane
from .kernels import CutoffProfile, cylindrical_cutoff, make_profile
from .varifold import DiscreteVarifold, weight_measure, parabolic_rescale
from .fixtures import make_fixture
from .nucleation import (GrowthEnvelope, SquashMap, envelope_check, nucleate,
                         verify_nucleation)
from .flow import (DtPolicy, FlowTrajectory, barrier_monitor, evolve,
                   sphere_barrier_from_scale)
from .estimates import (ExpandingHolesConfig, expanding_holes_run,
                        gaussian_density_sup)

LN2 = math.log(2.0)
MAX_TAIL_START = 10 ** 9


def _check_q(q) -> None:
    if q < 3:
        raise ValueError("formula domain: need q >= 3")


def series_term(q, alpha: float, n: int, log_base: float = math.e):
    """a_q^2 for scalar or array q >= 3."""
    q_arr = np.asarray(q, dtype=float)
    if np.any(q_arr < 3):
        raise ValueError("formula domain: need q >= 3")
    lb = math.log(log_base)
    lq = np.log(q_arr) / lb
    inner = ((q_arr - 1.0) * 0.5 * LN2 - np.log(lq)) / lb
    first = lq ** (n + 2) * inner ** (-2.0 * alpha)
    second = lq ** (n + 2) * np.exp(-((lq - 1.0) ** 2) / 8.0)
    out = first + second
    return out if out.ndim else float(out)


def partial_sum(k_start: int, q_max: int, alpha: float, n: int,
                log_base: float = math.e, chunk: int = 1_000_000) -> float:
    """Direct sum of a_q^2 for q in [k_start, q_max]; no convergence claim."""
    _check_q(k_start)
    total = 0.0
    q = k_start
    while q <= q_max:
        hi = min(q + chunk, q_max + 1)
        total += float(np.sum(series_term(np.arange(q, hi), alpha, n, log_base)))
        q = hi
    return total


def _tail_integral(q_from: float, alpha: float, n: int, log_base: float) -> float:
    """integral_{q_from}^inf a_x^2 dx via substitution u = log x (mpmath)."""
    import mpmath as mp

    lb = math.log(log_base)
    u0 = math.log(q_from)

    def integrand(u):
        x = mp.e ** u
        lq = u / lb
        inner = ((x - 1.0) * 0.5 * LN2 - mp.log(lq)) / lb
        first = lq ** (n + 2) * inner ** (-2.0 * alpha)
        second = lq ** (n + 2) * mp.e ** (-((lq - 1.0) ** 2) / 8.0)
        return (first + second) * x

    with mp.workdps(30):
        val = mp.quad(integrand, [u0, u0 + 2.0, u0 + 20.0, u0 + 200.0, mp.inf])
    return float(val)


def tail_sum(k_start: int, alpha: float, n: int, rel_tol: float = 1e-6,
             log_base: float = math.e) -> float:
    """sum_{q >= k_start} a_q^2 for alpha > 1/2.

    Terms are summed directly until the current term is negligible at
    rel_tol, then the remainder is replaced by the integral tail bound; the
    integral-test bracket keeps the total within rel_tol relative error.
    """
    if alpha <= 0.5:
        raise ValueError("series may diverge: need alpha > 1/2")
    _check_q(k_start)
    q = k_start
    total = 0.0
    chunk = 4096
    while True:
        hi = q + chunk
        total += float(np.sum(series_term(np.arange(q, hi), alpha, n, log_base)))
        q = hi
        last = float(series_term(q, alpha, n, log_base))
        tail = _tail_integral(q, alpha, n, log_base)
        if last <= rel_tol * (total + tail):
            return total + tail
        chunk = min(chunk * 2, 4_000_000)


def am1_holds(q: int, r0: float, log_base: float = math.e) -> bool:
    lhs_log = (-q + 1) * 0.5 * LN2 + math.log(math.log(q) / math.log(log_base))
    return lhs_log < math.log(r0)


def am2_holds(q: int, log_r1: float) -> bool:
    return (-q - 1) * 0.5 * LN2 < log_r1


def empty_spot_scale_log(n: int, r0: float, alpha: float,
                         bisect_iters: int = 200) -> float:
    """log of the largest admissible empty-spot scale r1(n, r0, alpha).

    Defining conditions: d1 / log^alpha(1/(r1 d1)) < 1 and
    (sqrt(2) + 2 d1) r1 < r0 with d1 = (8n + 2)/(sqrt(2) - 1).  Both are
    monotone in r1; the sup is located by bisection on y = -log r1.  For
    alpha near 1/2 the scale is far below the double-precision floor, which
    is why the log is the carried quantity.
    """
    d1 = (8.0 * n + 2.0) / (math.sqrt(2.0) - 1.0)

    def admissible(y: float) -> bool:
        # y = -log r1
        log_arg = y - math.log(d1)            # log(1/(r1 d1))
        cond1 = log_arg > 0 and d1 < log_arg ** alpha
        cond2 = -y < math.log(r0 / (math.sqrt(2.0) + 2.0 * d1))
        return cond1 and cond2

    lo, hi = 1e-6, 10.0
    while not admissible(hi):
        hi *= 2.0
        if hi > 1e9:
            raise RuntimeError("empty-spot bisection failed to bracket")
    for _ in range(bisect_iters):
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            hi = mid
        else:
            lo = mid
    return -hi


def choose_tail_start(alpha: float, n: int, budget: float, r0: float,
                      log_r1: float, c_e0_m: float,
                      rel_tol: float = 1e-4,
                      log_base: float = math.e) -> Optional[int]:
    """Minimal admissible K with tail_sum(K) <= budget / c_e0_m, or None.

    None means no K up to 10^9 closes the budget (expected for exponents
    barely above 1/2, where the series total is astronomically large).
    """
    if budget <= 0 or c_e0_m <= 0:
        raise ValueError("budget and measured constant must be positive")
    target = budget / c_e0_m
    q = 3
    while q < MAX_TAIL_START and not (am1_holds(q, r0, log_base)
                                      and am2_holds(q, log_r1)):
        q += 1
    k_cond = q
    if k_cond >= MAX_TAIL_START:
        return None
    if tail_sum(k_cond, alpha, n, rel_tol, log_base) <= target:
        return k_cond
    if tail_sum(MAX_TAIL_START, alpha, n, rel_tol, log_base) > target:
        return None
    lo, hi = k_cond, MAX_TAIL_START
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail_sum(mid, alpha, n, rel_tol, log_base) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def density_floor_check(gamma0: DiscreteVarifold, profile: CutoffProfile,
                        t_plane: Plane, r: float, q: int,
                        quad_order: int = 3):
    """Weighted density floor at scale r: ratio >= 1 + (Q-1)/2.

    ratio = (omega_n r^n)^-1 * ||Gamma0||(chi_r^2 restricted to
    {|T_perp| < sqrt(2) r}).
    """
    n = gamma0.surface_dim

    def integrand(p):
        chi = cylindrical_cutoff(profile, t_plane, r, p)
        slab = t_plane.normal_norm(p) < math.sqrt(2.0) * r
        return chi ** 2 * slab

    mass = weight_measure(gamma0, integrand, quad_order, 2)
    ratio = mass / (UNIT_BALL_VOLUME[n] * r ** n)
    return ratio >= 1.0 + (q - 1) / 2.0, ratio


@dataclass
class IterationSchedule:
    """Full parameter set of the expansion scheme.

    depth J fixes the nucleation scale eps = 2^(-J/2); windows run from
    h = 1 to J - tail_start with window scales L_h = log(J - h).
    """

    depth: int                    # J
    tail_start: int               # K
    alpha: float
    n: int
    r0: float
    log_r1: float
    eps: float
    window_scales: list
    terms: list                   # a_q^2 for q = K .. J-1
    tail: float
    conditions_ok: bool
    log_base: float = math.e
    failed_conditions: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["r1"] = math.exp(self.log_r1) if self.log_r1 > -700 else 0.0
        return d


def build_schedule(depth: int, tail_start: int, alpha: float, n: int,
                   r0: float, log_base: float = math.e,
                   rel_tol: float = 1e-6) -> IterationSchedule:
    if depth <= tail_start:
        raise ValueError("need depth J > tail start K")
    if tail_start < 3:
        raise ValueError("tail start must be >= 3")
    if depth - tail_start > 100_000:
        raise ValueError("schedule too deep to materialize")
    lb = math.log(log_base)
    log_r1 = empty_spot_scale_log(n, r0, alpha)
    eps = 2.0 ** (-depth / 2.0)
    windows = [math.log(depth - h) / lb for h in range(1, depth - tail_start + 1)]
    qs = np.arange(tail_start, depth)
    terms = list(series_term(qs, alpha, n, log_base))
    failed = [int(q) for q in qs
              if not (am1_holds(int(q), r0, log_base) and am2_holds(int(q), log_r1))]
    tail = tail_sum(tail_start, alpha, n, rel_tol, log_base)
    return IterationSchedule(
        depth=depth, tail_start=tail_start, alpha=alpha, n=n, r0=r0,
        log_r1=log_r1, eps=eps, window_scales=windows, terms=terms,
        tail=tail, conditions_ok=not failed, log_base=log_base,
        failed_conditions=failed)


@dataclass
class ExperimentConfig:
    """Desk-scale hole-expansion experiment parameters."""

    eps: float = 0.05
    j: int = 2
    q: int = 2
    alpha: float = 0.51
    r0: float = 0.1
    zeta: float = 0.1
    delta: float = 0.2
    mesh_level: int = 5
    kind: str = "flat_stack"
    spacing: float = 0.0
    radius_factor: float = 4.0
    dt_factor: float = 0.1
    quad_order: int = 3
    cadence: int = 20
    seed: int = 0
    log_base: float = math.e
    threads: int = 1

    def fixture_radius(self) -> float:
        return self.radius_factor * self.eps


@dataclass
class ExperimentResult:
    rows: list
    mass_initial: float
    mass_after_nucleation: float
    mass_final: float
    mass_drop_required: float
    lef2_lhs: float
    lef2_rhs: float
    final_ratio: float
    omega_n: float
    density_sup: float
    nucleation_report: dict
    chain_gaps: list
    barrier_contacts: list
    schedule_note: str
    passes: bool
    trajectory: FlowTrajectory = None
    reports: list = None

    @property
    def mass_drop_ok(self) -> bool:
        return self.mass_final <= self.mass_initial - self.mass_drop_required

    @property
    def lef2_ok(self) -> bool:
        return self.lef2_lhs < self.lef2_rhs


def _window_times(cfg: ExperimentConfig, h: int) -> np.ndarray:
    t1 = 0.0 if h == 1 else 0.5
    npts = max(2, int(round(cfg.cadence * (1.0 - t1))) + 1)
    lam_sq = 2.0 ** (h - 1) * cfg.eps ** 2
    return np.linspace(t1, 1.0, npts) * lam_sq


def _rescaled_window(traj: FlowTrajectory, cfg: ExperimentConfig,
                     h: int) -> FlowTrajectory:
    lam = 2.0 ** ((h - 1) / 2.0) * cfg.eps
    lam_sq = 2.0 ** (h - 1) * cfg.eps ** 2
    times = [t for t in traj.times
             if (0.0 if h == 1 else 0.5) * lam_sq - 1e-18 <= t <= lam_sq * (1 + 1e-12)]
    snaps = [parabolic_rescale(traj.snapshot_at(t), lam) for t in times]
    return FlowTrajectory(times=[t / lam_sq for t in times], snapshots=snaps,
                          cumulative_dissipation=[0.0] * len(times),
                          ledger=[], policy=traj.policy)


def _analytic_excess_bound(cfg: ExperimentConfig, h: int, e0: float):
    """Flatness-driven bound on the window excess, unit c(n).

    Needs a window scale L >= 2 with 2 L lambda_h < r0; at coarse desk
    scales no such L exists and the bound is not applicable (NaN).
    """
    lam = 2.0 ** ((h - 1) / 2.0) * cfg.eps
    l_max = cfg.r0 / (2.0 * lam)
    if l_max <= 2.0:
        return float("nan"), float("nan")
    big_l = min(l_max * (1.0 - 1e-9), max(2.0, math.log(max(3.0, 1.0 / lam))))
    n = 2
    lb = math.log(cfg.log_base)
    arg = 1.0 / (2.0 ** ((h + 1) / 2.0) * cfg.eps * big_l)
    logterm = (math.log(arg) / lb) ** (-2.0 * cfg.alpha) if arg > 1 else float("inf")
    bound = e0 * big_l ** (n + 2) * (logterm + math.exp(-(big_l - 1) ** 2 / 8.0))
    return bound, big_l


def orchestrate(cfg: ExperimentConfig,
                v0: Optional[DiscreteVarifold] = None,
                keep_trajectory: bool = False) -> ExperimentResult:
    """Run nucleation followed by j hole-expansion windows.

    Per window h the flow is parabolically rescaled by 2^((h-1)/2) eps, the
    empty-spot barrier is monitored, and the expanding-holes quantities are
    measured with the step-one window (t in [0,1], R^2 from 1 to 2) for
    h = 1 and the iteration window (t in [1/2, 1]) for h >= 2.  The result
    chains the density ratios, compares the final weighted mass against the
    initial surface (strict-drop check), and records the total mass drop.
    """
    if v0 is None:
        v0 = make_fixture(cfg.kind, cfg.q, cfg.mesh_level,
                          radius=cfg.fixture_radius(), spacing=cfg.spacing)
    n = v0.surface_dim
    omega = UNIT_BALL_VOLUME[n]
    t_plane = coordinate_plane(list(range(n)), v0.ambient_dim)
    envelope = GrowthEnvelope(alpha=cfg.alpha, r0=cfg.r0)
    ok, excess = envelope_check(v0, envelope, t_plane, cfg.r0)
    if not ok:
        raise ValueError(f"growth-envelope precheck failed (excess {excess:.3e})")
    profile = make_profile(cfg.zeta)
    r_floor = min(2.0 ** (cfg.j / 2.0) * cfg.eps, cfg.r0)
    floor_ok, floor_ratio = density_floor_check(v0, profile, t_plane,
                                                r_floor, cfg.q, cfg.quad_order)
    if not floor_ok:
        raise ValueError(f"density floor precheck failed (ratio {floor_ratio:.4f})")

    v_nuc = nucleate(v0, t_plane, cfg.eps, SquashMap(delta=cfg.delta))
    nuc_report = verify_nucleation(v0, v_nuc, t_plane, cfg.eps, envelope, cfg.q,
                                cfg.quad_order)

    t_end = 2.0 ** (cfg.j - 1) * cfg.eps ** 2
    snap_times = sorted({float(t) for h in range(1, cfg.j + 1)
                         for t in _window_times(cfg, h)})
    policy = DtPolicy(c_stab=cfg.dt_factor)
    traj = evolve(v_nuc, t_end, policy, snapshot_times=snap_times)

    e0 = gaussian_density_sup(traj, cfg.fixture_radius() / 2.0, cfg.eps,
                              quad_order=cfg.quad_order)

    rows, reports, chain_gaps, contacts = [], [], [], []
    schedule_notes = []
    prev_ratio_end = None
    for h in range(1, cfg.j + 1):
        lam = 2.0 ** ((h - 1) / 2.0) * cfg.eps
        wtraj = _rescaled_window(traj, cfg, h)
        barrier = sphere_barrier_from_scale(1.0, n, t_plane)
        contact = barrier_monitor(wtraj, barrier)
        contacts.append(contact)
        cfg_h = ExpandingHolesConfig(
            t_plane=t_plane, t1=(0.0 if h == 1 else 0.5), t2=1.0,
            r1=1.0, r2=math.sqrt(2.0), rhat1=math.sqrt(2.0), rhat2=2.0,
            profile=profile, quad_order=cfg.quad_order)
        rep = expanding_holes_run(wtraj, cfg_h, threads=cfg.threads)
        reports.append(rep)
        bound, big_l = _analytic_excess_bound(cfg, h, e0)
        if math.isnan(bound):
            schedule_notes.append(
                f"h={h}: window-scale condition infeasible at this eps; "
                "analytic excess bound not applicable")
        if prev_ratio_end is not None:
            chain_gaps.append(abs(rep.mass_ratio_start - prev_ratio_end))
        prev_ratio_end = rep.mass_ratio_end
        rows.append({
            "h": h, "scale": lam,
            "mu_h_sq_measured": rep.mu_bar_sq,
            "mu_h_sq_bound": bound,
            "ratio_before": rep.mass_ratio_start,
            "ratio_after": rep.mass_ratio_end,
            "M_empirical": rep.empirical_M,
        })

    r_f = 2.0 ** (cfg.j / 2.0) * cfg.eps

    def lef2_weight(v):
        def integrand(p):
            chi = cylindrical_cutoff(profile, t_plane, r_f, p)
            slab = t_plane.normal_norm(p) < math.sqrt(2.0) * r_f
            return chi ** 2 * slab
        return weight_measure(v, integrand, cfg.quad_order, 2)

    lef2_lhs = lef2_weight(traj.snapshot_at(t_end))
    lef2_rhs = lef2_weight(v0)

    mass_initial = v0.total_mass()
    mass_final = traj.snapshots[-1].total_mass()
    required = 0.5 * (cfg.q - 1) * omega * cfg.eps ** n

    diss_ok = all(c["pass"] for rep in reports for c in rep.dissipation)
    passes = (nuc_report["prop1_local"] and nuc_report["prop3_envelope"]
              and nuc_report["prop4_ok"] and nuc_report["prop5_ok"]
              and diss_ok and all(c is None for c in contacts)
              and lef2_lhs < lef2_rhs
              and mass_final <= mass_initial - required
              and traj.valid)

    return ExperimentResult(
        rows=rows, mass_initial=mass_initial,
        mass_after_nucleation=v_nuc.total_mass(), mass_final=mass_final,
        mass_drop_required=required, lef2_lhs=lef2_lhs, lef2_rhs=lef2_rhs,
        final_ratio=prev_ratio_end if prev_ratio_end is not None else 0.0,
        omega_n=omega, density_sup=e0, nucleation_report=nuc_report,
        chain_gaps=chain_gaps, barrier_contacts=contacts,
        schedule_note="; ".join(schedule_notes), passes=passes,
        trajectory=traj if keep_trajectory else None,
        reports=reports)
