"""Linear programming backends for the robustness problems.

All problems have the standard form

    minimise c^T x  subject to  A x = b,  x >= 0.

The default backend is a revised simplex method written here. It uses
Dantzig pricing, switches to Bland's rule after a run of degenerate pivots
(which guarantees termination), keeps the basis inverse in product form on
top of an LU factorisation, and can run as column generation when the column
set is too large to price every iteration. A scipy/HiGHS backend is
available as an independent cross-check.

Columns are supplied through a small "column source" interface so the
stabiliser catalogues never have to be materialised as dense matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

EPS_LP = 1e-7


class LPError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# column sources


class DenseSource:
    def __init__(self, a, c=None):
        self.a = np.asarray(a, dtype=float)
        self.m, self.N = self.a.shape
        self.c = np.ones(self.N) if c is None else np.asarray(c, dtype=float)

    def columns(self, j):
        return self.a[:, j]

    def rmatvec(self, y):
        return self.a.T @ y

    def to_matrix(self):
        return self.a


class StabPairSource:
    """Columns [A, -A] of a stabiliser catalogue plus optional rows A[S] on the + half.

    Column j < N is +sigma_j, column N + j is -sigma_j. The extra rows carry
    linear constraints applied to the positive part only.
    """

    def __init__(self, catalog, extra_rows=None, positive_only=False):
        self.cat = catalog
        self.nc = len(catalog)
        self.rows = 4 ** catalog.n
        self.extra = np.zeros(0, dtype=np.int64) if extra_rows is None else np.asarray(extra_rows, dtype=np.int64)
        self.m = self.rows + self.extra.size
        self.positive_only = positive_only
        self.N = self.nc if positive_only else 2 * self.nc
        self.c = np.ones(self.N)

    def columns(self, j):
        j = np.atleast_1d(np.asarray(j, dtype=np.int64))
        out = np.zeros((self.m, j.size))
        base = j % self.nc
        neg = j >= self.nc
        idx = self.cat.idx[base].astype(np.int64)
        sgn = self.cat.sign[base].astype(float) * np.where(neg, -1.0, 1.0)[:, None]
        out[idx, np.arange(j.size)[:, None]] = sgn
        if self.extra.size:
            pos = ~neg
            out[self.rows:, pos] = out[self.extra][:, pos]
        return out

    def rmatvec(self, y):
        y = np.asarray(y, dtype=float)
        y1 = y[:self.rows]
        if self.extra.size:
            yp = y1.copy()
            np.add.at(yp, self.extra, y[self.rows:])
        else:
            yp = y1
        plus = self.cat.rmatvec(yp)
        if self.positive_only:
            return plus
        return np.concatenate([plus, -self.cat.rmatvec(y1)])

    def to_matrix(self):
        return self.columns(np.arange(self.N))


# ---------------------------------------------------------------------------


@dataclass
class LPResult:
    status: str
    x: np.ndarray
    y: np.ndarray
    objective: float
    iterations: int = 0
    basis: list = field(default_factory=list)
    backend: str = "simplex"

    def support(self, tol=1e-12):
        return np.flatnonzero(np.abs(self.x) > tol)


class _Basis:
    """Basis inverse in product form on top of an LU factorisation."""

    def __init__(self, bmat, refactor_every=64):
        self.refactor_every = refactor_every
        self.set(bmat)

    def set(self, bmat):
        self.lu = sla.lu_factor(bmat, check_finite=False)
        self.etas = []

    def ftran(self, a):
        x = sla.lu_solve(self.lu, a, check_finite=False)
        for r, alpha in self.etas:
            xr = x[r] / alpha[r]
            x -= alpha * xr
            x[r] = xr
        return x

    def btran(self, c):
        w = np.array(c, dtype=float)
        for r, alpha in reversed(self.etas):
            wr = (w[r] - (alpha @ w - alpha[r] * w[r])) / alpha[r]
            w[r] = wr
        return sla.lu_solve(self.lu, w, trans=1, check_finite=False)

    def update(self, r, alpha):
        self.etas.append((r, alpha.copy()))

    @property
    def stale(self):
        return len(self.etas) >= self.refactor_every


class RevisedSimplex:
    """Two-phase revised simplex with a growing pricing pool.

    Reduced costs are computed over a pool of columns held densely; when the
    pool prices out, the whole source is priced once and the most negative
    columns join the pool. With a small source the pool is everything.
    """

    def __init__(self, source, b, tol=1e-9, piv_tol=1e-9, perturb=1e-6, max_iter=500000,
                 bland_after=50, refactor_every=64, pool_size=None, pool_batch=500):
        self.src = source
        self.m = source.m
        b = np.asarray(b, dtype=float)
        self.flip = np.where(b < 0, -1.0, 1.0)
        self.b = b * self.flip
        self.tol = tol
        self.piv_tol = piv_tol
        self.perturb = perturb
        self._rng = np.random.default_rng(12345)
        self.rhs = self.b
        self.max_iter = max_iter
        self.bland_after = bland_after
        self.refactor_every = refactor_every
        self.pool_batch = pool_batch
        self.iterations = 0
        self.full_pricings = 0
        # basis ids: >= 0 structural, -(r+1) artificial for row r
        self.basis = [-(r + 1) for r in range(self.m)]
        if pool_size is None:
            pool_size = source.N if source.N * self.m <= 4_000_000 else 0
        self.pool = np.zeros(0, dtype=np.int64)
        self._pool_blocks = []
        self._pool_t = None  # sparse pool^T, rebuilt after growth
        if pool_size:
            self._add_pool(np.arange(min(pool_size, source.N)))

    def _add_pool(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            return
        cols = self.src.columns(ids) * self.flip[:, None]
        self.pool = np.concatenate([self.pool, ids])
        self._pool_blocks.append(sp.csr_matrix(cols.T))
        self._pool_t = None

    def _col(self, j):
        if j < 0:
            e = np.zeros(self.m)
            e[-j - 1] = 1.0
            return e
        return self.src.columns([j])[:, 0] * self.flip

    def _bmat(self):
        bm = np.zeros((self.m, self.m))
        struct = [(i, j) for i, j in enumerate(self.basis) if j >= 0]
        if struct:
            pos, ids = zip(*struct)
            bm[:, list(pos)] = self.src.columns(list(ids)) * self.flip[:, None]
        for i, j in enumerate(self.basis):
            if j < 0:
                bm[-j - 1, i] = 1.0
        return bm

    def _refactor(self):
        self.B = _Basis(self._bmat(), self.refactor_every)
        self.xb = self.B.ftran(self.rhs)
        self.xb[np.abs(self.xb) < 1e-13] = 0.0

    def _costs(self, phase):
        if phase == 1:
            return np.array([1.0 if j < 0 else 0.0 for j in self.basis])
        return np.array([0.0 if j < 0 else self.src.c[j] for j in self.basis])

    def _price(self, y, phase, in_basis):
        """Entering candidates (global ids) and their reduced costs."""
        if self.pool.size:
            if self._pool_t is None:
                self._pool_t = sp.vstack(self._pool_blocks, format="csr")
                self._pool_blocks = [self._pool_t]
            d = -(self._pool_t @ y)
            if phase == 2:
                d += self.src.c[self.pool]
            d[in_basis[self.pool]] = 0.0
            cand = np.flatnonzero(d < -self.tol)
            if cand.size or self.pool.size == self.src.N:
                return self.pool[cand], d[cand]
        # full pricing
        self.full_pricings += 1
        d = -self.src.rmatvec(y * self.flip)
        if phase == 2:
            d = d + self.src.c
        d[in_basis] = 0.0
        cand = np.flatnonzero(d < -self.tol)
        if cand.size == 0:
            return cand, d[cand]
        if self.pool.size:
            inpool = np.zeros(self.src.N, dtype=bool)
            inpool[self.pool] = True
            fresh = cand[~inpool[cand]]
        else:
            fresh = cand
        if fresh.size:
            pick = fresh[np.argsort(d[fresh], kind="stable")[:self.pool_batch]]
            self._add_pool(np.sort(pick))
        return cand, d[cand]

    def _perturb(self, phase):
        """Shift the right-hand side so the current basic values get small
        distinct positive offsets. Removes ties in the ratio test, which on
        these polytopes otherwise produce very long degenerate stalls."""
        self.rhs = self.b
        self._refactor()
        if not self.perturb:
            return
        delta = self.perturb * self._rng.uniform(0.5, 1.0, self.m)
        if phase == 2:
            delta[[i for i, j in enumerate(self.basis) if j < 0]] = 0.0
        self.rhs = self.b + self._bmat() @ delta
        self._refactor()

    def _iterate(self, phase):
        self._perturb(phase)
        in_basis = np.zeros(self.src.N, dtype=bool)
        for j in self.basis:
            if j >= 0:
                in_basis[j] = True
        y = self._primal_loop(phase, in_basis)
        if self.rhs is self.b:
            return y
        # restore the true right-hand side and repair with dual pivots
        self.rhs = self.b
        self._refactor()
        if self._dual_cleanup(phase, in_basis):
            y = self._primal_loop(phase, in_basis)
        return y

    def _primal_loop(self, phase, in_basis):
        degenerate = 0
        while True:
            if self.iterations >= self.max_iter:
                raise LPError("iteration limit reached")
            y = self.B.btran(self._costs(phase))
            cand, dc = self._price(y, phase, in_basis)
            if cand.size == 0:
                return y
            bland = degenerate >= self.bland_after
            q = int(cand.min()) if bland else int(cand[np.argmin(dc)])
            alpha = self.B.ftran(self._col(q))
            r, theta = self._ratio_test(alpha, phase, bland)
            degenerate = degenerate + 1 if theta <= 1e-12 else 0
            self._pivot(r, q, theta, alpha, in_basis)

    def _pivot(self, r, q, theta, alpha, in_basis):
        self.xb -= theta * alpha
        self.xb[r] = theta
        self.xb[np.abs(self.xb) < 1e-13] = 0.0
        old = self.basis[r]
        if old >= 0:
            in_basis[old] = False
        self.basis[r] = q
        in_basis[q] = True
        self.B.update(r, alpha)
        self.iterations += 1
        if self.B.stale:
            self._refactor()
            if np.any(self.xb < -1e-6):
                raise LPError("lost primal feasibility")

    def _ratio_test(self, alpha, phase, bland=False):
        """Textbook ratio test; ties go to artificials, then the largest pivot
        (or the smallest variable id under Bland's rule)."""
        if phase == 2:
            # artificials left in the basis must stay at zero
            art = np.array([j < 0 for j in self.basis])
            blk = np.flatnonzero(art & (np.abs(alpha) > self.piv_tol))
            if blk.size:
                return int(blk[np.argmax(np.abs(alpha[blk]))]), 0.0
        rows = np.flatnonzero(alpha > self.piv_tol)
        if rows.size == 0:
            raise LPError("unbounded")
        ratios = np.maximum(self.xb[rows], 0.0) / alpha[rows]
        theta = ratios.min()
        ties = rows[ratios <= theta + 1e-12]
        if ties.size > 1:
            if bland:
                r = int(min(ties, key=lambda i: (self.basis[i] >= 0, self.basis[i])))
            else:
                arts = [i for i in ties if self.basis[i] < 0]
                r = int(arts[0]) if arts else int(ties[np.argmax(alpha[ties])])
        else:
            r = int(ties[0])
        return r, max(self.xb[r], 0.0) / alpha[r]

    def _dual_cleanup(self, phase, in_basis, feas_tol=1e-10):
        """Dual simplex pivots until the basic values are non-negative.
        Returns True if any pivot was made."""
        moved = False
        c = self.src.c if phase == 2 else np.zeros(self.src.N)
        while True:
            r = int(np.argmin(self.xb))
            if self.xb[r] >= -feas_tol:
                self.xb = np.maximum(self.xb, 0.0)
                return moved
            if self.iterations >= self.max_iter:
                raise LPError("iteration limit reached")
            y = self.B.btran(self._costs(phase))
            e = np.zeros(self.m)
            e[r] = 1.0
            rho = self.B.btran(e)
            row = self.src.rmatvec(rho * self.flip)
            d = c - self.src.rmatvec(y * self.flip)
            row[in_basis] = 0.0
            cand = np.flatnonzero(row < -self.piv_tol)
            if cand.size == 0:
                raise LPError("dual cleanup failed")
            ratio = np.maximum(d[cand], 0.0) / -row[cand]
            q = int(cand[np.argmin(ratio)])
            alpha = self.B.ftran(self._col(q))
            self._pivot(r, q, self.xb[r] / alpha[r], alpha, in_basis)
            moved = True

    def _drive_out_artificials(self):
        for r in range(self.m):
            if self.basis[r] >= 0:
                continue
            e = np.zeros(self.m)
            e[r] = 1.0
            rho = self.B.btran(e)
            row = self.src.rmatvec(rho * self.flip)
            for jj in self.basis:
                if jj >= 0:
                    row[jj] = 0.0
            q = int(np.argmax(np.abs(row)))
            if abs(row[q]) > 1e-7:
                alpha = self.B.ftran(self._col(q))
                self.basis[r] = q
                self.B.update(r, alpha)
                self._refactor()

    def solve(self):
        self._iterate(1)
        infeas = sum(self.xb[i] for i, j in enumerate(self.basis) if j < 0)
        if infeas > 1e-8:
            return "infeasible", None
        self._drive_out_artificials()
        y = self._iterate(2)
        return "optimal", y

    def primal(self):
        x = np.zeros(self.src.N)
        for i, j in enumerate(self.basis):
            if j >= 0:
                x[j] = max(self.xb[i], 0.0)
        return x


def solve_simplex(source, b, tol=1e-9, **kw):
    s = RevisedSimplex(source, b, tol=tol, **kw)
    status, y = s.solve()
    if status != "optimal":
        return LPResult(status, np.zeros(source.N), np.zeros(source.m), np.inf, s.iterations, s.basis)
    x = s.primal()
    return LPResult("optimal", x, y * s.flip, float(source.c @ x), s.iterations, list(s.basis))


def _sparse_columns(source, ids, block=1 << 15):
    parts = []
    for s in range(0, len(ids), block):
        parts.append(sp.csc_matrix(source.columns(ids[s:s + block])))
    return sp.hstack(parts, format="csc") if parts else sp.csc_matrix((source.m, 0))


def _linprog(c, a, b):
    from scipy.optimize import linprog

    return linprog(c, A_eq=a, b_eq=b, bounds=(0, None), method="highs")


def solve_highs(source, b, direct_limit=50_000_000, batch=20000, init=20000, tol=1e-9, max_rounds=500, **_):
    """HiGHS on the full matrix, or by column generation when the matrix is large.

    Column generation keeps a restricted master over a column pool plus
    big-M slacks, prices the whole source with the master's duals and adds
    the most negative columns until none price out.
    """
    b = np.asarray(b, dtype=float)
    if source.N * source.m <= direct_limit:
        out = _linprog(source.c, _sparse_columns(source, np.arange(source.N)), b)
        if out.status == 2:
            return LPResult("infeasible", np.zeros(source.N), np.zeros(source.m), np.inf, backend="highs")
        if out.status != 0:
            return LPResult("numerical-failure", np.zeros(source.N), np.zeros(source.m), np.nan, backend="highs")
        return LPResult("optimal", out.x, np.asarray(out.eqlin.marginals), float(out.fun), int(out.nit),
                        backend="highs")
    m = source.m
    big = 1e3 * (1 + np.abs(b).sum())
    slack = sp.hstack([sp.identity(m, format="csc"), -sp.identity(m, format="csc")], format="csc")
    # seed with the columns best aligned with the target
    score = source.rmatvec(b)
    pool = np.sort(np.argsort(-score, kind="stable")[:min(init, source.N)])
    cols = _sparse_columns(source, pool)
    nit = 0
    for _ in range(max_rounds):
        a = sp.hstack([cols, slack], format="csc")
        c = np.concatenate([source.c[pool], np.full(2 * m, big)])
        out = _linprog(c, a, b)
        if out.status != 0:
            return LPResult("numerical-failure", np.zeros(source.N), np.zeros(m), np.nan, nit, backend="highs")
        nit += int(out.nit)
        y = np.asarray(out.eqlin.marginals)
        d = source.c - source.rmatvec(y)
        d[pool] = 0.0
        neg = np.flatnonzero(d < -tol)
        if neg.size == 0:
            break
        pick = np.sort(neg[np.argsort(d[neg], kind="stable")[:batch]])
        pool = np.concatenate([pool, pick])
        cols = sp.hstack([cols, _sparse_columns(source, pick)], format="csc")
    else:
        return LPResult("numerical-failure", np.zeros(source.N), np.zeros(m), np.nan, nit, backend="highs")
    if out.x[pool.size:].sum() > 1e-7:
        return LPResult("infeasible", np.zeros(source.N), y, np.inf, nit, backend="highs")
    x = np.zeros(source.N)
    x[pool] = out.x[:pool.size]
    return LPResult("optimal", x, y, float(source.c @ x), nit, backend="highs")


BACKENDS = {"simplex": solve_simplex, "highs": solve_highs}

# process-wide simplex settings (set by the command line)
SOLVER_OPTIONS: dict = {}


def configure(tol=None, max_iter=None):
    if tol is not None:
        SOLVER_OPTIONS["tol"] = float(tol)
    if max_iter is not None:
        SOLVER_OPTIONS["max_iter"] = int(max_iter)


def solve_lp(source, b, backend="simplex", **kw) -> LPResult:
    if backend not in BACKENDS:
        raise ValueError(f"unknown LP backend {backend!r}")
    if backend == "simplex":
        kw = {**SOLVER_OPTIONS, **kw}
    res = BACKENDS[backend](source, b, **kw)
    res.backend = backend
    return res
