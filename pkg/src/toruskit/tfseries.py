"""Sparse Taylor-Fourier series arithmetic.

A series is a finite sum of monomials c_{j,k} * p^j * exp(i k.q) with j a
multi-index over the first n1 actions and k an integer harmonic over all
n = n1 + n2 angles.  Coefficients of a fixed action multi-index are held on a
dense harmonic grid over the diamond |k|_1 <= trunc_fourier, which makes
products (convolutions), derivatives and the homological divisions cheap;
the term-level view used by tests and serialization is reconstructed on
demand.  Series represent real functions: c_{j,-k} = conj(c_{j,k}).
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from scipy.signal import fftconvolve

from .errors import ContextMismatch, IndexOutOfRange, NonAdmissibleGenerator


@dataclass(frozen=True)
class SeriesContext:
    """Shape and truncation rules shared by a family of series.

    n1 actions enter polynomials, n2 extra angles carry no action; harmonics
    are grouped in Fourier blocks of size K; terms beyond |k|_1 >
    trunc_fourier or polynomial degree > trunc_action are discarded, and
    coefficients below drop_tol are pruned.
    """

    n1: int
    n2: int
    K: int
    trunc_fourier: int
    trunc_action: int = 2
    drop_tol: float = 1e-30

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 0 or self.K < 1:
            raise ValueError("need n1 >= 1, n2 >= 0, K >= 1")
        if self.trunc_fourier < 1 or self.trunc_action < 0:
            raise ValueError("truncations must be positive")

    @property
    def n(self) -> int:
        return self.n1 + self.n2


@lru_cache(maxsize=32)
def _k_axis(F: int) -> np.ndarray:
    return np.arange(-F, F + 1)


@lru_cache(maxsize=32)
def _k_component(n: int, F: int, axis: int) -> np.ndarray:
    shape = [1] * n
    shape[axis] = 2 * F + 1
    return _k_axis(F).reshape(shape)


@lru_cache(maxsize=32)
def _k_abs(n: int, F: int) -> np.ndarray:
    total = np.zeros((2 * F + 1,) * n, dtype=np.int64)
    for ax in range(n):
        total = total + np.abs(_k_component(n, F, ax))
    return total


@lru_cache(maxsize=32)
def _diamond(n: int, F: int) -> np.ndarray:
    return _k_abs(n, F) <= F


class TaylorFourierSeries:
    """Series over a SeriesContext; immutable by convention (all operations
    return new instances)."""

    __slots__ = ("context", "_grids")

    def __init__(self, context: SeriesContext, grids: Optional[Dict[tuple, np.ndarray]] = None):
        self.context = context
        self._grids: Dict[tuple, np.ndarray] = {}
        if grids:
            for j, g in grids.items():
                if np.any(g):
                    self._grids[tuple(j)] = g

    # -- construction -------------------------------------------------------

    @classmethod
    def zero(cls, context: SeriesContext) -> "TaylorFourierSeries":
        return cls(context)

    @classmethod
    def from_terms(
        cls,
        context: SeriesContext,
        terms: Iterable[Tuple[tuple, tuple, complex]],
        check_reality: bool = True,
    ) -> "TaylorFourierSeries":
        """Build a series from (j, k, coefficient) triples.

        Repeated (j, k) keys accumulate.  Terms outside the truncation rules
        are rejected; by default the result must satisfy the reality
        constraint c_{j,-k} = conj(c_{j,k}).
        """
        out = cls(context)
        F = context.trunc_fourier
        for j, k, c in terms:
            j = tuple(int(x) for x in j)
            k = tuple(int(x) for x in k)
            if len(j) != context.n1 or len(k) != context.n:
                raise ValueError(f"bad multi-index shapes {j}, {k}")
            if any(x < 0 for x in j):
                raise ValueError("action exponents must be non-negative")
            if sum(j) > context.trunc_action:
                raise ValueError(f"degree {sum(j)} exceeds trunc_action")
            if sum(abs(x) for x in k) > F:
                raise ValueError(f"harmonic {k} exceeds trunc_fourier")
            g = out._grids.get(j)
            if g is None:
                g = np.zeros((2 * F + 1,) * context.n, dtype=np.complex128)
                out._grids[j] = g
            g[tuple(x + F for x in k)] += c
        out._prune()
        if check_reality:
            defect = out.reality_defect()
            scale = max(out.l1_norm(), 1.0)
            if defect > 1e-9 * scale:
                raise ValueError(f"terms violate reality constraint (defect {defect:.2e})")
        return out

    @classmethod
    def constant(cls, context: SeriesContext, value: float) -> "TaylorFourierSeries":
        j = (0,) * context.n1
        k = (0,) * context.n
        return cls.from_terms(context, [(j, k, complex(value))])

    @classmethod
    def cosine(cls, context: SeriesContext, k: tuple, amplitude: float = 1.0) -> "TaylorFourierSeries":
        """amplitude * cos(k.q) as the conjugate pair of exponentials."""
        j = (0,) * context.n1
        km = tuple(-x for x in k)
        return cls.from_terms(
            context, [(j, k, amplitude / 2.0), (j, km, amplitude / 2.0)]
        )

    def copy(self) -> "TaylorFourierSeries":
        return TaylorFourierSeries(self.context, {j: g.copy() for j, g in self._grids.items()})

    # -- inspection ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self._grids

    def terms(self):
        """Yield (j, k, coefficient) for every stored nonzero monomial."""
        F = self.context.trunc_fourier
        for j in sorted(self._grids):
            g = self._grids[j]
            for idx in np.argwhere(g != 0):
                k = tuple(int(i) - F for i in idx)
                yield j, k, complex(g[tuple(idx)])

    def coefficient(self, j: tuple, k: tuple) -> complex:
        g = self._grids.get(tuple(j))
        if g is None:
            return 0.0 + 0.0j
        F = self.context.trunc_fourier
        if sum(abs(x) for x in k) > F:
            return 0.0 + 0.0j
        return complex(g[tuple(x + F for x in k)])

    def l1_norm(self) -> float:
        """Sum of the absolute values of all stored coefficients."""
        return float(sum(np.abs(g).sum() for g in self._grids.values()))

    def reality_defect(self) -> float:
        """max |c_{j,k} - conj(c_{j,-k})| over stored terms (0 for a real
        function)."""
        worst = 0.0
        for g in self._grids.values():
            mirror = np.conj(g[(slice(None, None, -1),) * self.context.n])
            worst = max(worst, float(np.abs(g - mirror).max()))
        return worst

    def degree_component(self, l: int) -> "TaylorFourierSeries":
        """Sub-series of exact polynomial degree l."""
        grids = {j: g.copy() for j, g in self._grids.items() if sum(j) == l}
        return TaylorFourierSeries(self.context, grids)

    def harmonic_slice(self, kmin: int, kmax: int, degree: Optional[int] = None) -> "TaylorFourierSeries":
        """Sub-series with kmin <= |k|_1 <= kmax (optionally of fixed degree)."""
        ctx = self.context
        mask = (_k_abs(ctx.n, ctx.trunc_fourier) >= kmin) & (
            _k_abs(ctx.n, ctx.trunc_fourier) <= kmax
        )
        grids = {}
        for j, g in self._grids.items():
            if degree is not None and sum(j) != degree:
                continue
            grids[j] = np.where(mask, g, 0.0)
        return TaylorFourierSeries(self.context, grids)

    def component(self, l: int, s: int) -> "TaylorFourierSeries":
        """The class slice of degree l and Fourier block s: harmonics in
        ((s-1)K, sK], with s = 0 holding the angle-free terms."""
        K = self.context.K
        if s == 0:
            return self.harmonic_slice(0, 0, degree=l)
        return self.harmonic_slice((s - 1) * K + 1, s * K, degree=l)

    def class_decomposition(self) -> Dict[tuple, "TaylorFourierSeries"]:
        """Split into nonzero (l, s) classes keyed by (degree, block index)."""
        K = self.context.K
        out = {}
        max_s = math.ceil(self.context.trunc_fourier / K)
        for l in sorted({sum(j) for j in self._grids}):
            for s in range(0, max_s + 1):
                part = self.component(l, s)
                if not part.is_zero():
                    out[(l, s)] = part
        return out

    # -- arithmetic -----------------------------------------------------------

    def _check(self, other: "TaylorFourierSeries"):
        if self.context != other.context:
            raise ContextMismatch("series built over different contexts")

    def _prune(self):
        tol = self.context.drop_tol
        dead = []
        for j, g in self._grids.items():
            small = np.abs(g) < tol
            if small.any():
                g[small] = 0.0
            if not np.any(g):
                dead.append(j)
        for j in dead:
            del self._grids[j]

    def __add__(self, other: "TaylorFourierSeries") -> "TaylorFourierSeries":
        self._check(other)
        grids = {j: g.copy() for j, g in self._grids.items()}
        for j, g in other._grids.items():
            if j in grids:
                grids[j] = grids[j] + g
            else:
                grids[j] = g.copy()
        out = TaylorFourierSeries(self.context, grids)
        out._prune()
        return out

    def __sub__(self, other: "TaylorFourierSeries") -> "TaylorFourierSeries":
        return self + other.scale(-1.0)

    def __neg__(self) -> "TaylorFourierSeries":
        return self.scale(-1.0)

    def scale(self, factor: float) -> "TaylorFourierSeries":
        """Multiply by a real scalar (complex scalars would break reality)."""
        if factor == 0.0:
            return TaylorFourierSeries.zero(self.context)
        return TaylorFourierSeries(
            self.context, {j: g * factor for j, g in self._grids.items()}
        )

    def multiply(self, other: "TaylorFourierSeries") -> "TaylorFourierSeries":
        """Product with truncation: degrees above trunc_action and harmonics
        above trunc_fourier are discarded."""
        self._check(other)
        ctx = self.context
        F = ctx.trunc_fourier
        mask = _diamond(ctx.n, F)
        crop = (slice(F, 3 * F + 1),) * ctx.n
        grids: Dict[tuple, np.ndarray] = {}
        for ja, ga in self._grids.items():
            for jb, gb in other._grids.items():
                jc = tuple(a + b for a, b in zip(ja, jb))
                if sum(jc) > ctx.trunc_action:
                    continue
                conv = fftconvolve(ga, gb, mode="full")[crop]
                conv = np.where(mask, conv, 0.0)
                if jc in grids:
                    grids[jc] += conv
                else:
                    grids[jc] = conv
        out = TaylorFourierSeries(ctx, grids)
        out._prune()
        return out

    def partial_q(self, i: int) -> "TaylorFourierSeries":
        """d/dq_i: multiplies each term by i*k_i."""
        ctx = self.context
        if not 0 <= i < ctx.n:
            raise IndexOutOfRange(f"angle index {i} outside [0, {ctx.n})")
        kfac = 1j * _k_component(ctx.n, ctx.trunc_fourier, i)
        out = TaylorFourierSeries(ctx, {j: g * kfac for j, g in self._grids.items()})
        out._prune()
        return out

    def partial_p(self, i: int) -> "TaylorFourierSeries":
        """d/dp_i: lowers the i-th action exponent with its combinatorial
        factor."""
        ctx = self.context
        if not 0 <= i < ctx.n1:
            raise IndexOutOfRange(f"action index {i} outside [0, {ctx.n1})")
        grids: Dict[tuple, np.ndarray] = {}
        for j, g in self._grids.items():
            if j[i] == 0:
                continue
            jl = list(j)
            fac = float(jl[i])
            jl[i] -= 1
            jc = tuple(jl)
            contrib = g * fac
            if jc in grids:
                grids[jc] += contrib
            else:
                grids[jc] = contrib
        out = TaylorFourierSeries(ctx, grids)
        out._prune()
        return out

    # -- evaluation -----------------------------------------------------------

    def evaluate(self, p, q) -> complex:
        """Value at actions p (length n1) and angles q (length n)."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        q = np.atleast_1d(np.asarray(q, dtype=float))
        ctx = self.context
        F = ctx.trunc_fourier
        axes = [np.exp(1j * _k_axis(F) * q[i]) for i in range(ctx.n)]
        total = 0.0 + 0.0j
        for j, g in self._grids.items():
            red = g
            for ax in axes:
                red = np.tensordot(red, ax, axes=([0], [0]))
            total += complex(red) * float(np.prod(p**np.array(j)))
        return total

    def evaluate_many(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Vectorised evaluation: p shape (n1, M), q shape (n, M)."""
        ctx = self.context
        F = ctx.trunc_fourier
        if ctx.n != 2:
            return np.array(
                [self.evaluate(p[:, m], q[:, m]) for m in range(q.shape[1])]
            )
        e0 = np.exp(1j * np.outer(_k_axis(F), q[0]))
        e1 = np.exp(1j * np.outer(_k_axis(F), q[1]))
        out = np.zeros(q.shape[1], dtype=np.complex128)
        for j, g in self._grids.items():
            vals = np.einsum("ab,am,bm->m", g, e0, e1, optimize=True)
            mono = np.prod(p ** np.array(j)[:, None], axis=0)
            out += vals * mono
        return out

    # -- serialization ---------------------------------------------------------

    def dumps(self) -> str:
        """Line-oriented exact text form: context header then one term per
        line `j1 .. j_n1 k1 .. k_n re im`."""
        ctx = self.context
        head = (
            f"# toruskit-series n1={ctx.n1} n2={ctx.n2} K={ctx.K} "
            f"trunc_fourier={ctx.trunc_fourier} trunc_action={ctx.trunc_action} "
            f"drop_tol={ctx.drop_tol!r}"
        )
        lines = [head]
        for j, k, c in self.terms():
            parts = [str(x) for x in j] + [str(x) for x in k]
            parts += [repr(c.real), repr(c.imag)]
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "TaylorFourierSeries":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# toruskit-series"):
            raise ValueError("missing series header")
        fields = dict(
            item.split("=") for item in lines[0].split()[2:] if "=" in item
        )
        ctx = SeriesContext(
            n1=int(fields["n1"]),
            n2=int(fields["n2"]),
            K=int(fields["K"]),
            trunc_fourier=int(fields["trunc_fourier"]),
            trunc_action=int(fields["trunc_action"]),
            drop_tol=float(fields["drop_tol"]),
        )
        terms = []
        for ln in lines[1:]:
            parts = ln.split()
            j = tuple(int(x) for x in parts[: ctx.n1])
            k = tuple(int(x) for x in parts[ctx.n1 : ctx.n1 + ctx.n])
            c = complex(float(parts[-2]), float(parts[-1]))
            terms.append((j, k, c))
        return cls.from_terms(ctx, terms, check_reality=False)


# -- linear forms and brackets -------------------------------------------------


@dataclass(frozen=True)
class LinearForm:
    """Non-periodic linear generator piece: xi.q (kind 'angle') over the n1
    polynomial actions' angles, or omega.p (kind 'action') over all n
    actions."""

    kind: str
    coefficients: tuple

    def __post_init__(self):
        if self.kind not in ("angle", "action"):
            raise ValueError("kind must be 'angle' or 'action'")
        object.__setattr__(
            self, "coefficients", tuple(float(c) for c in self.coefficients)
        )

    @classmethod
    def angle(cls, xi) -> "LinearForm":
        return cls("angle", tuple(xi))

    @classmethod
    def action(cls, omega) -> "LinearForm":
        return cls("action", tuple(omega))


def series_add(a: TaylorFourierSeries, b: TaylorFourierSeries) -> TaylorFourierSeries:
    return a + b


def series_scale(a: TaylorFourierSeries, factor: float) -> TaylorFourierSeries:
    return a.scale(factor)


def series_multiply(a: TaylorFourierSeries, b: TaylorFourierSeries) -> TaylorFourierSeries:
    return a.multiply(b)


def partial_q(a: TaylorFourierSeries, i: int) -> TaylorFourierSeries:
    return a.partial_q(i)


def partial_p(a: TaylorFourierSeries, i: int) -> TaylorFourierSeries:
    return a.partial_p(i)


def l1_norm(a: TaylorFourierSeries) -> float:
    return a.l1_norm()


def _bracket_series(a: TaylorFourierSeries, b: TaylorFourierSeries) -> TaylorFourierSeries:
    a._check(b)
    ctx = a.context
    out = TaylorFourierSeries.zero(ctx)
    for i in range(ctx.n):
        daq = a.partial_q(i)
        dbq = b.partial_q(i)
        if i < ctx.n1:
            dbp = b.partial_p(i)
            dap = a.partial_p(i)
        else:
            dbp = None
            dap = None
        if dbp is not None and not daq.is_zero() and not dbp.is_zero():
            out = out + daq.multiply(dbp)
        if dap is not None and not dap.is_zero() and not dbq.is_zero():
            out = out - dap.multiply(dbq)
    return out


def poisson_bracket(a, b) -> TaylorFourierSeries:
    """{a, b} = sum_i (da/dq_i db/dp_i - da/dp_i db/dq_i), summed over all n
    action/angle pairs.  Either argument may be a LinearForm (omega.p or
    xi.q); the series arguments never depend on the trailing n2 actions."""
    if isinstance(a, LinearForm) and isinstance(b, LinearForm):
        raise NonAdmissibleGenerator("bracket of two linear forms is constant; build it directly")
    if isinstance(b, LinearForm):
        return _bracket_with_form(a, b, +1.0)
    if isinstance(a, LinearForm):
        return _bracket_with_form(b, a, -1.0)
    return _bracket_series(a, b)


def _bracket_with_form(g: TaylorFourierSeries, form: LinearForm, sign: float) -> TaylorFourierSeries:
    ctx = g.context
    out = TaylorFourierSeries.zero(ctx)
    coeffs = form.coefficients
    if form.kind == "action":
        # {g, omega.p} = + sum_i omega_i dg/dq_i
        for i in range(min(len(coeffs), ctx.n)):
            if coeffs[i] != 0.0:
                out = out + g.partial_q(i).scale(sign * coeffs[i])
    else:
        # {g, xi.q} = - sum_i xi_i dg/dp_i
        for i in range(min(len(coeffs), ctx.n1)):
            if coeffs[i] != 0.0:
                out = out - g.partial_p(i).scale(sign * coeffs[i])
    return out


class Generator:
    """Generating function in one of the two admissible shapes: angle-only
    chi1 = X(q) + xi.q, or action-linear chi2 (degree exactly 1)."""

    def __init__(self, series: Optional[TaylorFourierSeries] = None, xi=None, context=None):
        if series is None and xi is None:
            raise NonAdmissibleGenerator("empty generator")
        self.series = series
        self.xi = tuple(float(x) for x in xi) if xi is not None else None
        self.context = context or (series.context if series is not None else None)
        degrees = {sum(j) for j in series._grids} if series is not None else set()
        if self.xi is not None:
            if degrees - {0}:
                raise NonAdmissibleGenerator("chi1 series part must be angle-only")
            self.kind = "angle"
        else:
            if degrees == set():
                self.kind = "action_linear"  # zero generator
            elif degrees == {0}:
                self.kind = "angle"
            elif degrees == {1}:
                self.kind = "action_linear"
            else:
                raise NonAdmissibleGenerator(
                    f"generator must be angle-only or action-linear, got degrees {sorted(degrees)}"
                )

    def negated(self) -> "Generator":
        series = self.series.scale(-1.0) if self.series is not None else None
        xi = tuple(-x for x in self.xi) if self.xi is not None else None
        return Generator(series, xi, context=self.context)

    def bracket(self, g: TaylorFourierSeries) -> TaylorFourierSeries:
        """L_chi g = {g, chi}."""
        out = TaylorFourierSeries.zero(g.context)
        if self.series is not None and not self.series.is_zero():
            out = out + _bracket_series(g, self.series)
        if self.xi is not None and any(self.xi):
            out = out + _bracket_with_form(g, LinearForm.angle(self.xi), +1.0)
        return out


def lie_series_apply(
    g: TaylorFourierSeries, chi: Generator, order_cap: int = 64
) -> TaylorFourierSeries:
    """exp(L_chi) g = sum_j (1/j!) L_chi^j g, truncated when a term vanishes
    identically under the context's truncation rules or at order_cap."""
    if not isinstance(chi, Generator):
        chi = Generator(chi)
    acc = g.copy()
    term = g
    for j in range(1, order_cap + 1):
        term = chi.bracket(term).scale(1.0 / j)
        if term.is_zero():
            break
        acc = acc + term
    return acc


def reorder(family: Dict[tuple, TaylorFourierSeries]) -> Dict[tuple, TaylorFourierSeries]:
    """Re-bucket a family indexed by (l, s) so that every monomial sits in the
    class matching its actual degree and harmonic block; the coefficient
    multiset is unchanged.  Idempotent."""
    total = None
    for part in family.values():
        total = part.copy() if total is None else total + part
    if total is None:
        return {}
    return total.class_decomposition()
