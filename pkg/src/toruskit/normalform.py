"""Kolmogorov normalization for action-linear dissipative systems, the
conjugacy-based torus verification, and the contraction-based basin estimate.

Each normalization step removes, via two canonical transformations, the
angle-dependent action-degree-0 terms (generator chi1 = X(q) + xi.q, with
dissipative divisors i k.omega + eta) and the angle-dependent action-linear
terms (generator chi2, divisors i k.omega); the xi part simultaneously shifts
the external forcing frequency, Omega_hat = Omega + xi.  Sign conventions
follow L_chi g = {g, chi} with the bracket orientation of the series algebra;
the assembled step is validated against an independent symbolic oracle and a
numerical flow-conjugacy test in the test suite.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import dynamics
from .errors import DegenerateTwist, NotQuadratic, SmallDivisor
from .tfseries import (
    Generator,
    SeriesContext,
    TaylorFourierSeries,
    _k_abs,
    _k_component,
    lie_series_apply,
)

DEFAULT_DIVISOR_FLOOR = 1e-12
DEFAULT_NONDEG_FLOOR = 1e-8
DEFAULT_ORDER_CAP = 80


@dataclass
class StepRecord:
    """Per-step artifact: generators, their norms and closure diagnostics.

    residual_X / residual_chi2 are the relative residuals of the two
    homological equations (exact to round-off).  end_f0_low / end_f1_low are
    the l1 norms of the degree-0/1 classes with harmonics <= rK left at the
    end of the step: the removal itself is exact, but the Lie transports
    lawfully repopulate these classes at the next perturbative order, so they
    decay with r instead of vanishing."""

    r: int
    X: TaylorFourierSeries
    xi: tuple
    chi2: TaylorFourierSeries
    norms: dict
    C_matrix_det: float
    residual_X: float
    residual_chi2: float
    end_f0_low: float
    end_f1_low: float
    truncation_starved: bool = False


@dataclass
class NormalizationState:
    """Hamiltonian part (minus omega.p), forcing vector and step history."""

    r: int
    H: TaylorFourierSeries
    omega: tuple
    Omega_r: tuple
    eta: float
    history: List[StepRecord] = field(default_factory=list)
    aborted: Optional[str] = None

    @property
    def context(self) -> SeriesContext:
        return self.H.context


@dataclass
class ConjugacyTransform:
    """Ordered generators of the composed normalizing transformation; maps
    normalized to original coordinates (forward) and back (inverse, by
    reversed order with negated generators)."""

    context: SeriesContext
    omega1: float
    generators: List[Tuple[str, Generator]] = field(default_factory=list)
    order_cap: int = DEFAULT_ORDER_CAP
    _cache: dict = field(default_factory=dict, repr=False)

    def _p1_series(self) -> TaylorFourierSeries:
        j = [0] * self.context.n1
        j[0] = 1
        return TaylorFourierSeries.from_terms(
            self.context, [(tuple(j), (0,) * self.context.n, 1.0)]
        )

    def _take(self, r: Optional[int]):
        if r is None:
            return self.generators
        return self.generators[: 2 * r]

    def normalized_action_series(self, r: Optional[int] = None) -> TaylorFourierSeries:
        """P1 as a series in the translated original coordinates: inverse Lie
        transforms applied to the coordinate function in reverse order."""
        key = ("inverse", len(self._take(r)))
        if key not in self._cache:
            series = self._p1_series()
            for _, gen in reversed(self._take(r)):
                series = lie_series_apply(series, gen.negated(), self.order_cap)
            self._cache[key] = series
        return self._cache[key]

    def forward_series(self, r: Optional[int] = None):
        """(G_p, S_q): original p1 = G_p(P, Q) and q1 = Q1 + S_q(P, Q),
        both in the translated frame."""
        key = ("forward", len(self._take(r)))
        if key not in self._cache:
            gp = self._p1_series()
            sq = TaylorFourierSeries.zero(self.context)
            for _, gen in self._take(r):
                gp = lie_series_apply(gp, gen, self.order_cap)
                sq = self._apply_to_angle(sq, gen)
            self._cache[key] = (gp, sq)
        return self._cache[key]

    def _apply_to_angle(self, sq: TaylorFourierSeries, gen: Generator) -> TaylorFourierSeries:
        # exp(L_chi)(Q1 + S) = Q1 + sum_{j>=1} L^{j-1}(dchi/dp1)/j! + exp(L_chi) S
        out = lie_series_apply(sq, gen, self.order_cap)
        if gen.series is not None and not gen.series.is_zero():
            term = gen.series.partial_p(0)
            j = 1
            while not term.is_zero() and j <= self.order_cap:
                out = out + term
                j += 1
                term = gen.bracket(term).scale(1.0 / j)
        return out

    def to_original(self, P1, Q1, Q2, r: Optional[int] = None):
        """Map normalized points to original pendulum (p1, q1) on the section
        defined by Q2."""
        gp, sq = self.forward_series(r)
        P1 = np.atleast_1d(np.asarray(P1, dtype=float))
        Q1 = np.atleast_1d(np.asarray(Q1, dtype=float))
        Q2 = np.broadcast_to(np.asarray(Q2, dtype=float), Q1.shape)
        p = np.vstack([P1])
        q = np.vstack([Q1, Q2])
        p1 = gp.evaluate_many(p, q).real + self.omega1
        q1 = Q1 + sq.evaluate_many(p, q).real
        return p1, q1


def init_normalization(
    pendulum: "dynamics.ForcedPendulumParams",
    omega1: float,
    Omega_star: float,
    ctx: SeriesContext,
) -> NormalizationState:
    """Initial Hamiltonian data for the forced pendulum, in the frame
    translated by omega1: quadratic kinetic part plus the two-cosine forcing,
    with fixed frequency vector (omega1, 1) and forcing (Omega* - omega1, 0)."""
    if (ctx.n1, ctx.n2, ctx.K) != (1, 1, 2):
        raise ValueError("pendulum normalization needs context (n1=1, n2=1, K=2)")
    eps = pendulum.epsilon
    terms = [((2,), (0, 0), 0.5)]
    if eps != 0.0:
        terms += [
            ((0,), (1, 0), eps / 2.0),
            ((0,), (-1, 0), eps / 2.0),
            ((0,), (1, -1), eps / 2.0),
            ((0,), (-1, 1), eps / 2.0),
        ]
    H = TaylorFourierSeries.from_terms(ctx, terms)
    return NormalizationState(
        r=0,
        H=H,
        omega=(omega1, 1.0),
        Omega_r=(Omega_star - omega1, 0.0),
        eta=pendulum.eta,
    )


def _divisor_grids(ctx: SeriesContext, omega, eta):
    div = np.zeros((2 * ctx.trunc_fourier + 1,) * ctx.n, dtype=np.complex128)
    for i in range(ctx.n):
        div = div + 1j * omega[i] * _k_component(ctx.n, ctx.trunc_fourier, i)
    return div + eta


def _solve_by_division(f_sum, omega, eta, r, divisor_floor):
    """Divide every stored coefficient of f_sum (harmonics in (0, rK]) by
    i k.omega + eta, aborting on divisors below the floor."""
    ctx = f_sum.context
    div = _divisor_grids(ctx, omega, eta)
    kabs = _k_abs(ctx.n, ctx.trunc_fourier)
    grids = {}
    F = ctx.trunc_fourier
    for j, g in f_sum._grids.items():
        support = g != 0
        bad = support & (np.abs(div) < divisor_floor)
        if np.any(bad):
            idx = tuple(np.argwhere(bad)[0])
            k = tuple(int(i) - F for i in idx)
            raise SmallDivisor(k, div[idx])
        out = np.zeros_like(g)
        np.divide(g, div, out=out, where=support)
        grids[j] = out
    sol = TaylorFourierSeries(ctx, grids)
    sol._prune()
    return sol


def solve_homological_X(
    f0_sum: TaylorFourierSeries,
    omega,
    eta: float,
    r: int,
    divisor_floor: float = DEFAULT_DIVISOR_FLOOR,
) -> TaylorFourierSeries:
    """Angle-only generator X with coefficients c_k/(i k.omega + eta) over the
    harmonics 0 < |k| <= rK carried by f0_sum."""
    return _solve_by_division(f0_sum, omega, eta, r, divisor_floor)


def solve_homological_chi2(
    f1_sum: TaylorFourierSeries,
    omega,
    r: int,
    divisor_floor: float = DEFAULT_DIVISOR_FLOOR,
) -> TaylorFourierSeries:
    """Action-linear generator chi2 with divisors i k.omega (conservative
    divisors; requires non-resonance up to rK)."""
    return _solve_by_division(f1_sum, omega, 0.0, r, divisor_floor)


def homological_residual(sol, f_sum, omega, eta) -> float:
    """Largest per-mode relative residual of (i k.omega + eta) sol_k = f_k.

    The residual is normalised mode by mode against the terms entering the
    cancellation (backward-error style), so it measures the quality of the
    solve rather than the round-off of re-evaluating a difference that
    vanishes through a small divisor."""
    ctx = sol.context
    div = _divisor_grids(ctx, omega, eta)
    floor = 100.0 * ctx.drop_tol  # modes at the pruning floor are untestable
    worst = 0.0
    keys = set(sol._grids) | set(f_sum._grids)
    for j in keys:
        g = sol._grids.get(j)
        f = f_sum._grids.get(j)
        lhs = div * g if g is not None else 0.0
        rhs = f if f is not None else 0.0
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        mask = scale > floor
        if np.any(mask):
            rel = np.abs(lhs - rhs)[mask] / scale[mask]
            worst = max(worst, float(rel.max()))
    return worst


def solve_xi(
    f1_r0: TaylorFourierSeries,
    f2_r0: TaylorFourierSeries,
    nondeg_floor: float = DEFAULT_NONDEG_FLOOR,
):
    """Frequency-shift vector from the angle-free classes: with f2 = p.C p/2
    and f1 = g.p, solves C xi = g.

    The orientation (xi = +C^{-1} g together with Omega_hat = Omega + xi and
    the forward Lie transform) is the one that cancels the angle-free
    degree-1 terms; it is pinned by the flow-conjugacy tests.
    """
    ctx = f1_r0.context
    n1 = ctx.n1
    k0 = (0,) * ctx.n
    g = np.zeros(n1)
    for i in range(n1):
        e = [0] * n1
        e[i] = 1
        g[i] = f1_r0.coefficient(tuple(e), k0).real
    C = np.zeros((n1, n1))
    for i in range(n1):
        for j in range(i, n1):
            e = [0] * n1
            e[i] += 1
            e[j] += 1
            c = f2_r0.coefficient(tuple(e), k0).real
            if i == j:
                C[i, i] = 2.0 * c
            else:
                C[i, j] = C[j, i] = c
    det = float(np.linalg.det(C))
    if abs(det) < nondeg_floor:
        raise DegenerateTwist(f"det C = {det:.3e} below floor")
    xi = np.linalg.solve(C, g)
    return tuple(float(x) for x in xi), det


@dataclass
class _Intermediate:
    r: int
    Hhat: TaylorFourierSeries
    Omega_hat: tuple
    omega: tuple
    eta: float
    X: TaylorFourierSeries
    xi: tuple
    C_det: float
    residual_X: float
    starved: bool


def apply_first_half(
    state: NormalizationState,
    divisor_floor: float = DEFAULT_DIVISOR_FLOOR,
    nondeg_floor: float = DEFAULT_NONDEG_FLOOR,
    order_cap: int = DEFAULT_ORDER_CAP,
) -> _Intermediate:
    """Transformation generated by chi1 = X + xi.q: removes the angle-dependent
    degree-0 terms up to harmonic rK and the angle-free degree-1 terms, and
    shifts the forcing vector."""
    r = state.r + 1
    ctx = state.context
    H = state.H
    rK = min(r * ctx.K, ctx.trunc_fourier)

    f0slice = H.harmonic_slice(1, rK, degree=0)
    X = solve_homological_X(f0slice, state.omega, state.eta, r, divisor_floor)
    residual_X = homological_residual(X, f0slice, state.omega, state.eta)
    starved = f0slice.is_zero() and not H.harmonic_slice(1, ctx.trunc_fourier).is_zero()

    f1_0 = H.component(1, 0)
    f2_0 = H.component(2, 0)
    xi, C_det = solve_xi(f1_0, f2_0, nondeg_floor)

    chi1 = Generator(X, xi=xi)
    Hhat = H - f0slice
    wdotxi = sum(w * x for w, x in zip(state.omega, xi))
    if wdotxi != 0.0:
        Hhat = Hhat + TaylorFourierSeries.constant(ctx, -wdotxi)
    for l in range(1, ctx.trunc_action + 1):
        term = H.degree_component(l)
        if term.is_zero():
            continue
        for j in range(1, l + 1):
            term = chi1.bracket(term).scale(1.0 / j)
            if term.is_zero():
                break
            Hhat = Hhat + term

    Omega_hat = list(state.Omega_r)
    for i in range(ctx.n1):
        Omega_hat[i] += xi[i]
    return _Intermediate(
        r=r,
        Hhat=Hhat,
        Omega_hat=tuple(Omega_hat),
        omega=state.omega,
        eta=state.eta,
        X=X,
        xi=xi,
        C_det=C_det,
        residual_X=residual_X,
        starved=starved,
    )


def apply_second_half(
    inter: _Intermediate,
    state: NormalizationState,
    divisor_floor: float = DEFAULT_DIVISOR_FLOOR,
    order_cap: int = DEFAULT_ORDER_CAP,
):
    """Transformation generated by the action-linear chi2: removes the
    angle-dependent degree-1 terms up to harmonic rK; the forcing vector is
    unchanged and the friction stays action-linear."""
    r = inter.r
    ctx = inter.Hhat.context
    rK = min(r * ctx.K, ctx.trunc_fourier)
    Hhat = inter.Hhat

    f1slice = Hhat.harmonic_slice(1, rK, degree=1)
    chi2 = solve_homological_chi2(f1slice, inter.omega, r, divisor_floor)
    residual_chi2 = homological_residual(chi2, f1slice, inter.omega, 0.0)
    gen2 = Generator(chi2)

    Hnew = Hhat - f1slice

    # Lie tail of omega.p beyond the cancelled j = 1 term.
    term = f1slice.scale(-1.0)  # equals -omega . dchi2/dq by construction
    j = 1
    while not term.is_zero() and j < order_cap:
        j += 1
        term = gen2.bracket(term).scale(1.0 / j)
        Hnew = Hnew + term

    # Forcing contribution: exp(L_chi2)(-eta Omega_hat . q) + eta Omega_hat . q.
    if inter.eta != 0.0 and any(inter.Omega_hat):
        base = TaylorFourierSeries.zero(ctx)
        for i in range(ctx.n1):
            if inter.Omega_hat[i] != 0.0:
                base = base + chi2.partial_p(i).scale(-inter.eta * inter.Omega_hat[i])
        term = base
        j = 1
        Hnew = Hnew + term
        while not term.is_zero() and j < order_cap:
            j += 1
            term = gen2.bracket(term).scale(1.0 / j)
            Hnew = Hnew + term

    # Transports of the full Hamiltonian part.
    term = Hhat
    j = 0
    while not term.is_zero() and j < order_cap:
        j += 1
        term = gen2.bracket(term).scale(1.0 / j)
        Hnew = Hnew + term

    end_f1_low = Hnew.harmonic_slice(1, rK, degree=1).l1_norm()
    end_f0_low = Hnew.harmonic_slice(1, rK, degree=0).l1_norm()

    record = StepRecord(
        r=r,
        X=inter.X,
        xi=inter.xi,
        chi2=chi2,
        norms={
            "X": inter.X.l1_norm(),
            "xi": float(sum(abs(x) for x in inter.xi)),
            "chi2": chi2.l1_norm(),
            "Omega": float(sum(abs(x) for x in inter.Omega_hat)),
        },
        C_matrix_det=inter.C_det,
        residual_X=inter.residual_X,
        residual_chi2=residual_chi2,
        end_f0_low=end_f0_low,
        end_f1_low=end_f1_low,
        truncation_starved=inter.starved,
    )
    new_state = NormalizationState(
        r=r,
        H=Hnew,
        omega=inter.omega,
        Omega_r=inter.Omega_hat,
        eta=inter.eta,
        history=state.history + [record],
    )
    return new_state


def normalization_step(
    state: NormalizationState,
    divisor_floor: float = DEFAULT_DIVISOR_FLOOR,
    nondeg_floor: float = DEFAULT_NONDEG_FLOOR,
    order_cap: int = DEFAULT_ORDER_CAP,
) -> NormalizationState:
    inter = apply_first_half(state, divisor_floor, nondeg_floor, order_cap)
    return apply_second_half(inter, state, divisor_floor, order_cap)


def run_normalization(
    state0: NormalizationState,
    r_max: int,
    divisor_floor: float = DEFAULT_DIVISOR_FLOOR,
    nondeg_floor: float = DEFAULT_NONDEG_FLOOR,
    order_cap: int = DEFAULT_ORDER_CAP,
):
    """Execute r_max normalization steps (or stop early on SmallDivisor /
    DegenerateTwist, returning the partial history) and the composed
    conjugacy transform."""
    state = state0
    transform = ConjugacyTransform(
        context=state0.context, omega1=state0.omega[0], order_cap=order_cap
    )
    for _ in range(r_max):
        try:
            inter = apply_first_half(
                state, divisor_floor=divisor_floor, nondeg_floor=nondeg_floor,
                order_cap=order_cap,
            )
            state = apply_second_half(
                inter, state, divisor_floor=divisor_floor, order_cap=order_cap
            )
        except (SmallDivisor, DegenerateTwist) as exc:
            state.aborted = f"{type(exc).__name__}: {exc}"
            break
        transform.generators.append(("chi1", Generator(inter.X, xi=inter.xi)))
        transform.generators.append(("chi2", Generator(state.history[-1].chi2)))
    return state, transform


def chi2_norm_ratio(history: Sequence[StepRecord]) -> float:
    """Fitted geometric ratio of successive ||chi2|| norms (least squares in
    log scale over non-starved steps)."""
    pts = [
        (rec.r, math.log(rec.norms["chi2"]))
        for rec in history
        if rec.norms["chi2"] > 0 and not rec.truncation_starved
    ]
    if len(pts) < 2:
        return 0.0
    rs = np.array([p[0] for p in pts])
    ls = np.array([p[1] for p in pts])
    slope = np.polyfit(rs, ls, 1)[0]
    return float(math.exp(slope))


def conjugacy_normalized_action(transform: ConjugacyTransform, point) -> float:
    """Normalized action P1 evaluated at an original-coordinates pendulum
    point (p1, q1, q2)."""
    p1, q1, q2 = point
    series = transform.normalized_action_series()
    return float(series.evaluate([p1 - transform.omega1], [q1, q2]).real)


def verify_torus(
    transform: ConjugacyTransform,
    params: "dynamics.ForcedPendulumParams",
    r_list: Sequence[int],
    n_points: int,
    cfg: "dynamics.IntegratorConfig" = dynamics.DEFAULT_INTEGRATOR,
):
    """max |P1| over n_points Poincare iterates of the relaxed attractor
    orbit, for each truncation order r of the conjugacy."""
    W = dynamics.relaxation_count(params.eta) if params.eta > 0 else 0
    ps, qs, _ = dynamics.poincare_sections(
        (params.Omega, 0.0), W + n_points - 1, params, cfg
    )
    p = np.vstack([ps[W:] - transform.omega1])
    q = np.vstack([qs[W:], np.zeros(n_points)])
    out = []
    for r in r_list:
        series = transform.normalized_action_series(r)
        vals = series.evaluate_many(p, q).real
        out.append((r, float(np.abs(vals).max())))
    return out


@dataclass
class BasinEstimate:
    """Contraction bound B, guaranteed attraction radius eta/B in normalized
    action, and the two sampled boundary curves on the q2 = 0 section."""

    B: float
    radius: float
    unbounded: bool
    curves: tuple


def basin_estimate(
    final_state: NormalizationState,
    transform: ConjugacyTransform,
    n_curve_samples: int = 256,
) -> BasinEstimate:
    """Gronwall-type basin bound from the normal form's quadratic remainder:
    B bounds |d/dQ1| of the angle-dependent quadratic part per unit P1^2, so
    every normalized initial condition with |P1| < eta/B is attracted."""
    ctx = final_state.context
    H = final_state.H
    for j in H._grids:
        if sum(j) > 2:
            raise NotQuadratic(f"degree {sum(j)} present; bound assumes quadratic form")
    quad = H.harmonic_slice(1, ctx.trunc_fourier, degree=2)
    B = 0.0
    k1 = _k_component(ctx.n, ctx.trunc_fourier, 0)
    for _, g in quad._grids.items():
        B += float(np.sum(np.abs(k1 * g)))
    if B == 0.0:
        return BasinEstimate(B=0.0, radius=math.inf, unbounded=True, curves=(None, None))
    radius = final_state.eta / B
    Q1 = np.linspace(0.0, 2.0 * math.pi, n_curve_samples, endpoint=False)
    curves = []
    for sign in (+1.0, -1.0):
        p1, q1 = transform.to_original(np.full_like(Q1, sign * radius), Q1, 0.0)
        curves.append(np.column_stack([p1, q1 % (2.0 * math.pi)]))
    return BasinEstimate(B=B, radius=radius, unbounded=False, curves=tuple(curves))
