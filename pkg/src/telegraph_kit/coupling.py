"""Exact couplings of two telegraph particles and their coalescence times.

Half-line pairs couple in two stages.  A crossing stage drives the gap to
zero: whenever the velocities agree the two copies share every clock and the
gap is frozen, and whenever they oppose each other across a shrinking gap a
single Exp(a+b) clock with a Bernoulli(a/(a+b)) mark decides which copy
flips first.  Once the copies meet with opposite velocities, a sticking
stage swaps the roles of the two clocks (ascent of one copy, descent of the
other) so the copies trade displacement until a descent outlasts the lower
copy's height, at which point both sit at the same state and stay merged
forever.  Every phase uses each copy's correct marginal clocks, so both legs
remain exact copies of the reflected process.

Whole-line pairs reuse the half-line machinery through the folding
correspondence, with one sign per leg that flips at every origin visit.  If
the signs disagree once the folded copies have merged, the pair waits at an
origin visit for one Exp(2b) flip assigned by a fair coin and then runs
mirror-symmetric blocks that either restore the symmetric configuration or
merge the pair at a shared flip.

The dominating time stacks the worst case of every phase: it is built from
one Exp(a+b) clock, origin-visit functionals and descent times, is sampled
exactly by the excursion decomposition, and its exponential moments have the
closed product form in :func:`dominating_time_mgf`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .excursions import sample_hitting, sample_sigma
from .model import INFINITE, LaplaceValue, ModelParams, excursion_mgf, hitting_exponent
from .paths import PiecewisePath
from .simulate import ExpSource

__all__ = [
    "CouplingResult",
    "DominatingTimeSample",
    "crossing_couple",
    "stick_couple",
    "coalescent_couple_reflected",
    "coalescent_couple_unreflected",
    "sample_dominating_time",
    "dominating_time_mgf",
    "write_coupling_batch_csv",
]


@dataclass
class CouplingResult:
    """Outcome of one coupled run.

    Times are None when the corresponding event did not happen before the
    horizon.  ``indep_clock`` is the length of the initial independent phase
    of the crossing stage (zero when the start needs none); the displacement
    at crossing is bounded by half the initial gap plus this clock, run by
    run.  Paths are None when the run was sampled in time-only mode.
    """

    crossing_time: float | None
    crossing_position: float | None
    coalescence_time: float | None
    indep_clock: float
    path_1: PiecewisePath | None
    path_2: PiecewisePath | None
    horizon: float

    @property
    def coalesced(self) -> bool:
        return self.coalescence_time is not None


def _dedup(times, xs, vs):
    """Collapse zero-duration knot pairs (keep the later state)."""
    out_t: list[float] = []
    out_x: list[float] = []
    out_v: list[int] = []
    for t, x, v in zip(times, xs, vs):
        if out_t and t == out_t[-1]:
            out_x[-1] = x
            out_v[-1] = v
            continue
        out_t.append(t)
        out_x.append(x)
        out_v.append(v)
    return out_t, out_x, out_v


class _PathRec:
    """Knot recorder for one reflected leg."""

    __slots__ = ("t", "x", "v")

    def __init__(self, x0: float, v0: int):
        self.t = [0.0]
        self.x = [float(x0)]
        self.v = [int(v0)]

    def add(self, t: float, x: float, v: int) -> None:
        self.t.append(t)
        self.x.append(x)
        self.v.append(v)

    def build(self, horizon: float) -> PiecewisePath:
        t, x, v = _dedup(self.t, self.x, self.v)
        k = len(t)
        while k > 1 and t[k - 1] > horizon:
            k -= 1
        return PiecewisePath.from_lists(t[:k], x[:k], v[:k], horizon)


class _NullRec:
    """Recorder stub for time-only runs."""

    __slots__ = ()

    def add(self, t: float, x: float, v: int) -> None:
        pass

    def build(self, horizon: float) -> None:
        return None


class _SignedRec:
    """Recorder for one whole-line leg fed by half-line machinery.

    Folded knots arrive through :meth:`add`; origin knots flip the leg's
    sign and vanish (the unfolded velocity is continuous there), other knots
    are stored as (t, sign*x, sign*v).  Phases that construct the whole-line
    pair directly bypass the sign with :meth:`add_raw`.
    """

    __slots__ = ("sign", "t", "y", "w")

    def __init__(self, y0: float, w0: int):
        self.sign = 1 if y0 > 0.0 else (-1 if y0 < 0.0 else int(w0))
        self.t = [0.0]
        self.y = [float(y0)]
        self.w = [int(w0)]

    def add(self, t: float, x: float, v: int) -> None:
        if x == 0.0:
            self.sign = -self.sign
            return
        self.t.append(t)
        self.y.append(self.sign * x)
        self.w.append(self.sign * v)

    def add_raw(self, t: float, y: float, w: int) -> None:
        self.t.append(t)
        self.y.append(y)
        self.w.append(w)

    def build(self, horizon: float) -> PiecewisePath:
        t, y, w = _dedup(self.t, self.y, self.w)
        k = len(t)
        while k > 1 and t[k - 1] > horizon:
            k -= 1
        return PiecewisePath.from_lists(t[:k], y[:k], w[:k], horizon)


class _NullSignedRec:
    """Sign tracking without storage, for time-only whole-line runs."""

    __slots__ = ("sign",)

    def __init__(self, y0: float, w0: int):
        self.sign = 1 if y0 > 0.0 else (-1 if y0 < 0.0 else int(w0))

    def add(self, t: float, x: float, v: int) -> None:
        if x == 0.0:
            self.sign = -self.sign

    def add_raw(self, t: float, y: float, w: int) -> None:
        pass

    def build(self, horizon: float) -> None:
        return None


def _check_reflected_state(x: float, v: int) -> tuple[float, int]:
    if v not in (-1, 1):
        raise ValueError(f"velocity must be -1 or +1, got {v}")
    x = float(x)
    if x < 0.0:
        raise ValueError("positions must be nonnegative")
    if x == 0.0 and v != 1:
        raise ValueError("a start at the origin requires velocity +1")
    return x, int(v)


def _glue_until_origin(x, u, delta, t, horizon, a, b, src, rec_hi, rec_lo):
    """Common-velocity phase: both legs share every clock, gap fixed at delta.

    Simulates the lower leg until its first origin hit; the upper leg rides
    delta above it.  Returns (hit time, delta) or None on horizon abort.
    """
    while True:
        if t > horizon:
            return None
        if u == 1:
            d = src.draw() / b
            t += d
            x += d
            rec_lo.add(t, x, -1)
            rec_hi.add(t, x + delta, -1)
            u = -1
        else:
            d = src.draw() / a
            if x <= d:
                t_hit = t + x
                rec_lo.add(t_hit, 0.0, 1)
                return t_hit, delta
            t += d
            x -= d
            rec_lo.add(t, x, 1)
            rec_hi.add(t, x + delta, 1)
            u = 1


def _crossing_phase(x_hi, v_hi, x_lo, v_lo, horizon, a, b, src, rec_hi, rec_lo):
    """Drive the ordered pair to equal positions with opposite velocities.

    Returns (crossing time, crossing position, independent-phase clock,
    upper-leg velocity at crossing) or None on horizon abort.  The caller
    guarantees x_hi >= x_lo and that the states are not identical.
    """
    t = 0.0
    indep = 0.0
    glue = None
    opp = None
    if v_hi == v_lo:
        glue = (x_lo, v_lo, x_hi - x_lo)
    elif x_hi == x_lo:
        # already meeting head-on; the sticking stage takes over immediately
        return 0.0, x_hi, 0.0, v_hi
    elif v_hi == 1:
        # upper climbs (rate b), lower descends (rate a): first of the two
        # flip clocks and the lower leg's origin hit ends the phase with a
        # shared velocity either way
        e_lo = src.draw() / a
        e_hi = src.draw() / b
        indep = min(e_lo, e_hi, x_lo)
        t = indep
        if x_lo <= e_lo and x_lo <= e_hi:
            rec_lo.add(t, 0.0, 1)
            glue = (0.0, 1, x_hi + x_lo)
        elif e_hi < e_lo:
            rec_hi.add(t, x_hi + e_hi, -1)
            glue = (x_lo - e_hi, -1, (x_hi - x_lo) + 2.0 * e_hi)
        else:
            rec_lo.add(t, x_lo - e_lo, 1)
            glue = (x_lo - e_lo, 1, (x_hi - x_lo) + 2.0 * e_lo)
    else:
        opp = (x_hi, x_lo)
    while True:
        if glue is not None:
            res = _glue_until_origin(*glue, t, horizon, a, b, src, rec_hi, rec_lo)
            if res is None:
                return None
            t, delta = res
            opp = (delta, 0.0)
            glue = None
        h, l = opp
        gap = h - l
        if gap == 0.0:
            return t, h, indep, -1
        # opposed phase: gap shrinks at speed 2; one Exp(a+b) clock races the
        # meeting point, a Bernoulli(a/(a+b)) mark names the leg that flips
        tau = src.draw() / (a + b)
        if tau >= 0.5 * gap:
            return t + 0.5 * gap, 0.5 * (h + l), indep, -1
        t += tau
        if t > horizon:
            return None
        h -= tau
        l += tau
        if src.uniform() < a / (a + b):
            rec_hi.add(t, h, 1)
            glue = (l, 1, h - l)
        else:
            rec_lo.add(t, l, -1)
            glue = (l, -1, h - l)


def _stick_phase(t, x_cur, horizon, a, b, src, rec_up, rec_dn):
    """Clock-swapped blocks from the met state until the legs merge.

    Per block the up leg climbs for Exp(b)=Q and the down leg descends for
    Exp(a)=R; swapping which leg consumes which clock re-opposes them at
    height x+Q-R when R < x, and merges them at (Q, -1) when the descent
    outlasts the height.  Returns (merge time, merged position) or None on
    horizon abort.  A synchronisation knot is written to the up leg at the
    merge so both legs share interpolation bases bit for bit afterwards.
    """
    while True:
        if t > horizon:
            return None
        r = src.draw() / a
        q = src.draw() / b
        if r < x_cur:
            t_end = t + (r + q)
            x_next = x_cur + (q - r)
            rec_up.add(t + q, x_cur + q, -1)
            rec_dn.add(t + r, x_cur - r, 1)
            rec_up.add(t_end, x_next, 1)
            rec_dn.add(t_end, x_next, -1)
            t = t_end
            x_cur = x_next
        else:
            rec_up.add(t + q, x_cur + q, -1)
            if x_cur > 0.0:
                t_hit = t + x_cur
                rec_dn.add(t_hit, 0.0, 1)
            else:
                t_hit = t
            t_end = t_hit + q
            rec_dn.add(t_end, q, -1)
            rec_up.add(t_end, q, -1)
            return t_end, q


def _extend_reflected(x, v, t, horizon, a, b, src, recs, stop_at_zero=False):
    """Shared reflected continuation; every knot goes to every recorder.

    With stop_at_zero the walk ends at (and records) the next origin hit and
    returns its time; otherwise it runs to the horizon and returns None.
    """
    while True:
        if v == -1:
            d = src.draw() / a
            if x <= d:
                t_hit = t + x
                if t_hit > horizon:
                    return None
                for r in recs:
                    r.add(t_hit, 0.0, 1)
                if stop_at_zero:
                    return t_hit
                t = t_hit
                x = 0.0
                v = 1
                continue
        else:
            d = src.draw() / b
        t_next = t + d
        if t_next > horizon:
            return None
        t = t_next
        x += v * d
        v = -v
        for r in recs:
            r.add(t, x, v)


def _extend_unreflected(y, w, t, horizon, a, b, src, recs):
    """Shared whole-line continuation to the horizon (raw knots)."""
    while True:
        if y * w < 0.0:
            d = src.draw() / a
            gap = abs(y)
            if gap <= d:
                t += gap
                y = 0.0
                if t >= horizon:
                    return
                continue
        else:
            d = src.draw() / b
        t_next = t + d
        if t_next > horizon:
            return
        t = t_next
        y += w * d
        w = -w
        for r in recs:
            r.add_raw(t, y, w)


def _symmetric_blocks(t, u, sigma, horizon, a, b, src, rec_away, rec_toward):
    """Mirror blocks for whole-line legs at +-u with common velocity sigma.

    The away leg sits at sigma*u moving away from the origin; the toward leg
    mirrors it.  Each block reuses the half-line clock swap through the
    mirror: R < u restores the symmetric picture at u+Q-R, R >= u lets the
    toward leg cross the origin and merges the pair at (sigma*Q, -sigma).
    Returns (merge time, merged position, merged velocity) or None.
    """
    while True:
        if t > horizon:
            return None
        r = src.draw() / a
        q = src.draw() / b
        if r < u:
            t_end = t + (r + q)
            u_next = u + (q - r)
            rec_away.add_raw(t + q, sigma * (u + q), -sigma)
            rec_toward.add_raw(t + r, -sigma * (u - r), -sigma)
            rec_away.add_raw(t_end, sigma * u_next, sigma)
            rec_toward.add_raw(t_end, -sigma * u_next, sigma)
            t = t_end
            u = u_next
        else:
            t_end = t + (u + q)
            rec_away.add_raw(t + q, sigma * (u + q), -sigma)
            rec_toward.add_raw(t_end, sigma * q, -sigma)
            rec_away.add_raw(t_end, sigma * q, -sigma)
            return t_end, sigma * q, -sigma


def _wait_and_blocks(t_zero, rec_1, rec_2, horizon, a, b, src):
    """Sign-mismatch repair at a shared origin visit.

    Both legs sit at the origin heading opposite ways.  The first of their
    two Exp(b) flip clocks fires after Exp(2b); a fair coin names the leg,
    which leaves the mirror-symmetric picture handled by the blocks.  Each
    leg's marginal flip stream stays rate correct because the losing clock
    is restarted by memorylessness.
    """
    e_wait = src.draw() / (2.0 * b)
    t_flip = t_zero + e_wait
    if t_flip > horizon:
        return None
    if src.uniform() < 0.5:
        rec_f, rec_o = rec_1, rec_2
    else:
        rec_f, rec_o = rec_2, rec_1
    s_f = rec_f.sign
    rec_f.add_raw(t_flip, s_f * e_wait, -s_f)
    sigma = rec_o.sign
    return _symmetric_blocks(t_flip, e_wait, sigma, horizon, a, b, src, rec_o, rec_f)


def _run_halfline_engine(x1, v1, x2, v2, horizon, params, src, rec1, rec2):
    """Crossing stage then sticking stage on ordered legs.

    Returns (crossing_time, crossing_position, indep_clock, merge_time,
    merged_position); times are None past the horizon.  Caller excludes
    identical starts.
    """
    a, b = params.a, params.b
    if (x1, v1) >= (x2, v2):
        hi_x, hi_v, rec_hi = x1, v1, rec1
        lo_x, lo_v, rec_lo = x2, v2, rec2
    else:
        hi_x, hi_v, rec_hi = x2, v2, rec2
        lo_x, lo_v, rec_lo = x1, v1, rec1
    cross = _crossing_phase(hi_x, hi_v, lo_x, lo_v, horizon, a, b, src, rec_hi, rec_lo)
    if cross is None:
        return None, None, 0.0, None, None
    t_c, pos_c, indep, hi_vel = cross
    if t_c > horizon:
        return None, None, indep, None, None
    if hi_vel == -1:
        rec_up, rec_dn = rec_lo, rec_hi
    else:
        rec_up, rec_dn = rec_hi, rec_lo
    stick = _stick_phase(t_c, pos_c, horizon, a, b, src, rec_up, rec_dn)
    if stick is None:
        return t_c, pos_c, indep, None, None
    t_m, x_m = stick
    if t_m > horizon:
        return t_c, pos_c, indep, None, None
    return t_c, pos_c, indep, t_m, x_m


def crossing_couple(
    x: float,
    v: int,
    x_other: float,
    v_other: int,
    params: ModelParams,
    rng: np.random.Generator,
    horizon: float | None = None,
    record_paths: bool = True,
) -> CouplingResult:
    """Couple two reflected legs until they first meet with opposite velocities.

    Requires x >= x_other; callers order the pair and remember the swap.
    With horizon=None the stage runs until it crosses (a.s. finite).  The
    returned paths stop at the crossing.  Identical starts share every clock
    and the crossing is declared at their first origin visit.
    """
    x, v = _check_reflected_state(x, v)
    x_other, v_other = _check_reflected_state(x_other, v_other)
    if x < x_other:
        raise ValueError("crossing_couple expects the first start at or above the second")
    hz = math.inf if horizon is None else float(horizon)
    rec1 = _PathRec(x, v) if record_paths else _NullRec()
    rec2 = _PathRec(x_other, v_other) if record_paths else _NullRec()
    src = ExpSource(rng)
    a, b = params.a, params.b
    if x == x_other and v == v_other:
        hit = _extend_reflected(x, v, 0.0, hz, a, b, src, (rec1, rec2), stop_at_zero=True)
        t_c, pos_c, indep = (hit, 0.0, 0.0) if hit is not None else (None, None, 0.0)
    else:
        cross = _crossing_phase(x, v, x_other, v_other, hz, a, b, src, rec1, rec2)
        if cross is None or cross[0] > hz:
            t_c, pos_c, indep = None, None, (0.0 if cross is None else cross[2])
        else:
            t_c, pos_c, indep = cross[0], cross[1], cross[2]
    path_horizon = t_c if t_c is not None else (hz if horizon is not None else 0.0)
    return CouplingResult(
        crossing_time=t_c,
        crossing_position=pos_c,
        coalescence_time=None,
        indep_clock=indep,
        path_1=rec1.build(path_horizon),
        path_2=rec2.build(path_horizon),
        horizon=path_horizon,
    )


def stick_couple(
    x: float,
    params: ModelParams,
    rng: np.random.Generator,
    horizon: float | None = None,
    record_paths: bool = True,
) -> CouplingResult:
    """Merge legs started at (x, +1) and (x, -1) by swapping their clocks.

    With horizon=None the blocks run until the merge (a.s. finite) and the
    paths stop there; with a horizon the merged leg is continued to it.  A
    start at the origin collapses the first descent: the second leg reflects
    instantly and the first block is the merging one.
    """
    x = float(x)
    if x < 0.0:
        raise ValueError("positions must be nonnegative")
    hz = math.inf if horizon is None else float(horizon)
    dn_v = 1 if x == 0.0 else -1
    rec_up = _PathRec(x, 1) if record_paths else _NullRec()
    rec_dn = _PathRec(x, dn_v) if record_paths else _NullRec()
    src = ExpSource(rng)
    a, b = params.a, params.b
    stick = _stick_phase(0.0, x, hz, a, b, src, rec_up, rec_dn)
    if stick is None or stick[0] > hz:
        t_m = None
        path_horizon = hz
    else:
        t_m, x_m = stick
        if horizon is None:
            path_horizon = t_m
        else:
            path_horizon = hz
            _extend_reflected(x_m, -1, t_m, hz, a, b, src, (rec_up, rec_dn))
    return CouplingResult(
        crossing_time=None,
        crossing_position=None,
        coalescence_time=t_m,
        indep_clock=0.0,
        path_1=rec_up.build(path_horizon),
        path_2=rec_dn.build(path_horizon),
        horizon=path_horizon,
    )


def coalescent_couple_reflected(
    x: float,
    v: int,
    x_other: float,
    v_other: int,
    horizon: float,
    params: ModelParams,
    rng: np.random.Generator,
    record_paths: bool = True,
) -> CouplingResult:
    """Full half-line coalescent: crossing stage, sticking stage, merged tail.

    Accepts the starts in either order; the result's paths follow the
    argument order.  After the merge both paths reference the same knots, so
    their evaluations agree bit for bit from the coalescence time on.
    """
    x, v = _check_reflected_state(x, v)
    x_other, v_other = _check_reflected_state(x_other, v_other)
    hz = float(horizon)
    if not (hz > 0.0 and math.isfinite(hz)):
        raise ValueError("horizon must be positive and finite")
    rec1 = _PathRec(x, v) if record_paths else _NullRec()
    rec2 = _PathRec(x_other, v_other) if record_paths else _NullRec()
    src = ExpSource(rng)
    a, b = params.a, params.b
    if x == x_other and v == v_other:
        _extend_reflected(x, v, 0.0, hz, a, b, src, (rec1, rec2))
        return CouplingResult(None, None, 0.0, 0.0, rec1.build(hz), rec2.build(hz), hz)
    t_c, pos_c, indep, t_m, x_m = _run_halfline_engine(
        x, v, x_other, v_other, hz, params, src, rec1, rec2
    )
    if t_m is not None:
        _extend_reflected(x_m, -1, t_m, hz, a, b, src, (rec1, rec2))
    return CouplingResult(t_c, pos_c, t_m, indep, rec1.build(hz), rec2.build(hz), hz)


def coalescent_couple_unreflected(
    y: float,
    w: int,
    y_other: float,
    w_other: int,
    horizon: float,
    params: ModelParams,
    rng: np.random.Generator,
    record_paths: bool = True,
) -> CouplingResult:
    """Whole-line coalescent built over the folded coupling.

    The folded pair is coupled on the half line; each leg unfolds with a
    sign that flips at its origin visits.  If the signs agree when the
    folded legs merge the pair is already equal; otherwise the run continues
    to the next origin visit and repairs the signs with an Exp(2b) wait and
    mirror blocks.  crossing_* report the folded stage's crossing.
    """
    if w not in (-1, 1) or w_other not in (-1, 1):
        raise ValueError("velocities must be -1 or +1")
    y = float(y)
    y_other = float(y_other)
    w = int(w)
    w_other = int(w_other)
    hz = float(horizon)
    if not (hz > 0.0 and math.isfinite(hz)):
        raise ValueError("horizon must be positive and finite")
    rec_cls = _SignedRec if record_paths else _NullSignedRec
    rec1 = rec_cls(y, w)
    rec2 = rec_cls(y_other, w_other)
    src = ExpSource(rng)
    a, b = params.a, params.b

    def result(t_c, pos_c, indep, t_coal):
        return CouplingResult(
            t_c, pos_c, t_coal, indep, rec1.build(hz), rec2.build(hz), hz
        )

    if y == y_other and w == w_other:
        _extend_unreflected(y, w, 0.0, hz, a, b, src, (rec1, rec2))
        return result(None, None, 0.0, 0.0)
    if y_other == -y and w_other == w and y != 0.0:
        # mirror-symmetric start: the folded copies are identical, so the
        # run goes straight to the sign repair blocks
        away, toward = (rec1, rec2) if y * w > 0.0 else (rec2, rec1)
        blocks = _symmetric_blocks(0.0, abs(y), w, hz, a, b, src, away, toward)
        if blocks is None or blocks[0] > hz:
            return result(None, None, 0.0, None)
        t_coal, y_m, w_m = blocks
        _extend_unreflected(y_m, w_m, t_coal, hz, a, b, src, (rec1, rec2))
        return result(None, None, 0.0, t_coal)
    x1 = abs(y)
    v1 = 1 if y == 0.0 else (1 if y > 0.0 else -1) * w
    x2 = abs(y_other)
    v2 = 1 if y_other == 0.0 else (1 if y_other > 0.0 else -1) * w_other
    if x1 == x2 and v1 == v2:
        # anti-symmetric pair: the folded copies coincide from the start but
        # the signs differ, so run one shared folded path to its next origin
        # visit and repair the signs there
        if x1 == 0.0:
            t_zero = 0.0
        else:
            t_zero = _extend_reflected(
                x1, v1, 0.0, hz, a, b, src, (rec1, rec2), stop_at_zero=True
            )
        if t_zero is None:
            return result(None, None, 0.0, None)
        blocks = _wait_and_blocks(t_zero, rec1, rec2, hz, a, b, src)
        if blocks is None or blocks[0] > hz:
            return result(None, None, 0.0, None)
        t_coal, y_m, w_m = blocks
        _extend_unreflected(y_m, w_m, t_coal, hz, a, b, src, (rec1, rec2))
        return result(None, None, 0.0, t_coal)
    t_c, pos_c, indep, t_m, x_m = _run_halfline_engine(
        x1, v1, x2, v2, hz, params, src, rec1, rec2
    )
    if t_m is None:
        return result(t_c, pos_c, indep, None)
    if rec1.sign == rec2.sign:
        # folded legs merged with matching signs: equal from the merge on
        _extend_reflected(x_m, -1, t_m, hz, a, b, src, (rec1, rec2))
        return result(t_c, pos_c, indep, t_m)
    t_zero = _extend_reflected(
        x_m, -1, t_m, hz, a, b, src, (rec1, rec2), stop_at_zero=True
    )
    if t_zero is None:
        return result(t_c, pos_c, indep, None)
    blocks = _wait_and_blocks(t_zero, rec1, rec2, hz, a, b, src)
    if blocks is None or blocks[0] > hz:
        return result(t_c, pos_c, indep, None)
    t_coal, y_m, w_m = blocks
    _extend_unreflected(y_m, w_m, t_coal, hz, a, b, src, (rec1, rec2))
    return result(t_c, pos_c, indep, t_coal)


@dataclass(frozen=True)
class DominatingTimeSample:
    """Exact draw of the time that dominates the half-line coalescence.

    The value is the sum of the pieces, each sampled by the excursion
    decomposition: the independent-phase clock, the origin-visit functional
    it feeds (at twice the clock), the descent from the clock's displacement,
    one full excursion per leg, the descent from the upper start, the
    deterministic half-sum of the starts and the origin-visit functional of
    the start gap.
    """

    value: float
    indep_clock: float
    indep_returns: float
    indep_descent: float
    excursion_first: float
    excursion_second: float
    start_descent: float
    offset: float
    gap_returns: float


def sample_dominating_time(
    x: float,
    x_other: float,
    params: ModelParams,
    rng: np.random.Generator,
) -> DominatingTimeSample:
    """Draw the dominating time for starts at heights x >= x_other >= 0."""
    x = float(x)
    x_other = float(x_other)
    if not 0.0 <= x_other <= x:
        raise ValueError("need x >= x_other >= 0")
    a, b = params.a, params.b
    f = float(rng.standard_exponential()) / (a + b)
    indep_returns = sample_sigma(2.0 * f, params, rng)
    indep_descent = sample_hitting(f, -1, params, rng)
    exc1 = sample_hitting(0.0, 1, params, rng)
    exc2 = sample_hitting(0.0, 1, params, rng)
    start_descent = sample_hitting(x, -1, params, rng)
    offset = 0.5 * (x + x_other)
    gap_returns = sample_sigma(x - x_other, params, rng)
    value = (
        f
        + indep_returns
        + indep_descent
        + exc1
        + exc2
        + start_descent
        + offset
        + gap_returns
    )
    return DominatingTimeSample(
        value, f, indep_returns, indep_descent, exc1, exc2, start_descent, offset, gap_returns
    )


def dominating_time_mgf(
    x: float, x_other: float, lam: float, params: ModelParams
) -> LaplaceValue:
    """Closed form of E[exp(lam * dominating time)]; finite for lam <= critical_rate.

    Product of the transforms of the independent pieces; the first factor
    packages the Exp(a+b) clock together with the functionals driven by it.
    """
    x = float(x)
    x_other = float(x_other)
    if not 0.0 <= x_other <= x:
        raise ValueError("need x >= x_other >= 0")
    a, b = params.a, params.b
    psi = excursion_mgf(lam, params)
    c = hitting_exponent(lam, params)
    if not (psi.is_finite and c.is_finite):
        return INFINITE
    denom = 2.0 * a + b - lam - a * psi.value - c.value
    if denom <= 0.0:
        return INFINITE
    exponent = (
        x * c.value
        + 0.5 * (x + x_other) * lam
        + 0.5 * (x - x_other) * a * (psi.value - 1.0)
    )
    return LaplaceValue((a + b) * psi.value**2 / denom * math.exp(exponent))


def write_coupling_batch_csv(results, dest) -> None:
    """Write one row per run: id, crossing/coalescence times, flag.

    Times that did not occur are written as empty fields; floats use repr.
    """
    own = isinstance(dest, (str, bytes))
    fh = open(dest, "w") if own else dest

    def fmt(value):
        return "" if value is None else repr(float(value))

    try:
        fh.write("run_id,crossing_time,coalescence_time,crossing_position,coalesced\n")
        for i, res in enumerate(results):
            fh.write(
                f"{i},{fmt(res.crossing_time)},{fmt(res.coalescence_time)},"
                f"{fmt(res.crossing_position)},{int(res.coalesced)}\n"
            )
    finally:
        if own:
            fh.close()
