"""Feature selection: orthogonal matching pursuit and cross-validated lasso.

Both operate on standardised design matrices. OMP greedily adds the
column most correlated with the current residual and refits the active
set by least squares; the lasso solves a coordinate-descent path over a
logarithmic grid of penalties and picks the penalty by k-fold
cross-validation on contiguous, time-ordered folds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Method(Enum):
    OMP = "OMP"
    LASSO = "LASSO"


@dataclass
class SelectionResult:
    selected: list[int]
    method: Method
    coefficients: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rank", "index", "coefficient"])
            for rank, idx in enumerate(self.selected):
                writer.writerow([rank, idx, repr(float(self.coefficients[idx]))])


GRAM_CONDITION_LIMIT = 1e12


def omp_select(
    X: np.ndarray,
    y: np.ndarray,
    n_feat: int = 20,
    tol: float = 1e-4,
) -> SelectionResult:
    """Greedy selection by maximal residual correlation with orthogonal refits.

    Stops when the relative residual-sum-of-squares improvement of an
    addition falls to tol or below (the addition is then discarded), or
    when n_feat columns are active. Candidates whose addition makes the
    active Gram matrix numerically singular are skipped.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = X.shape
    if n == 0:
        raise ValueError("empty design matrix")
    if n_feat < 1:
        raise ValueError("n_feat must be at least 1")
    rss = float(y @ y)
    if rss == 0.0:
        return SelectionResult([], Method.OMP, np.zeros(m), {"residual_rss": [0.0]})

    active: list[int] = []
    coef_active = np.zeros(0)
    residual = y.copy()
    trace = [rss]
    skipped: list[int] = []
    while len(active) < min(n_feat, m):
        corr = np.abs(X.T @ residual)
        corr[active] = -np.inf
        order = np.argsort(-corr, kind="stable")
        step = None
        for j in order:
            j = int(j)
            if not np.isfinite(corr[j]) or corr[j] <= 0:
                break
            cols = active + [j]
            Xa = X[:, cols]
            gram = Xa.T @ Xa
            if np.linalg.cond(gram) > GRAM_CONDITION_LIMIT:
                skipped.append(j)
                continue
            w = np.linalg.solve(gram, Xa.T @ y)
            r_new = y - Xa @ w
            step = (j, w, r_new, float(r_new @ r_new))
            break
        if step is None:
            break
        j, coef, r_new, rss_new = step
        if (rss - rss_new) / rss <= tol:
            break
        active.append(j)
        coef_active = coef
        residual = r_new
        rss = rss_new
        trace.append(rss)

    coefficients = np.zeros(m)
    coefficients[active] = coef_active
    return SelectionResult(
        selected=active,
        method=Method.OMP,
        coefficients=coefficients,
        diagnostics={"residual_rss": trace, "skipped_singular": skipped},
    )


def _lasso_path(
    G: np.ndarray,
    b: np.ndarray,
    n: int,
    lambdas: np.ndarray,
    kkt_tol: float = 1e-7,
    max_iter: int = 100,
    max_screen_rounds: int = 8,
    warm: np.ndarray | None = None,
) -> np.ndarray:
    """Coordinate descent on (1/2n)||y - Xw||^2 + lam*||w||_1 via Gram updates.

    G = X'X and b = X'y. Maintains c = b - Gw so every coordinate update
    is one vector operation; candidate coordinates per penalty come from
    the sequential strong rule, re-checked against the full KKT
    conditions. Convergence is declared on the KKT violation itself
    (within kkt_tol on the |X'r/n| scale), which also terminates cleanly
    on collinear designs where coefficient updates wander along flat
    directions; sweep counts are capped, so on severely ill-conditioned
    designs the result can carry a violation above kkt_tol. Returns
    coefficients per lambda, warm-started down the path.
    """
    m = G.shape[0]
    if warm is None:
        w = np.zeros(m)
        c = b.copy()
    else:
        w = warm.copy()
        c = b - G @ w
    diag = np.clip(np.diag(G).copy(), 1e-12, None)
    cols = np.ascontiguousarray(G.T)  # row j = column j of G (G is symmetric)
    out = np.zeros((len(lambdas), m))
    tmp = np.empty(m)

    def full_violation(thr: float) -> np.ndarray:
        # stationarity violation per coordinate on the X'r scale
        active = w != 0.0
        return np.where(
            active,
            np.abs(c - thr * np.sign(w)),
            np.maximum(np.abs(c) - thr, 0.0),
        )

    prev_thr = float(np.max(np.abs(b)))
    for li, lam in enumerate(lambdas):
        thr = lam * n
        edge = thr * (1 + 1e-12)  # rounding guard: lam >= lam_max stays exactly zero
        tol_c = max(kkt_tol * n, thr * 1e-12)
        # sequential strong rule plus whatever is already active
        strong = np.abs(c) >= max(2.0 * thr - prev_thr, 0.0)
        candidates = np.flatnonzero(strong | (w != 0.0))
        for _ in range(max_screen_rounds):
            for _ in range(max_iter):
                for j in candidates:
                    rho_j = c[j] + diag[j] * w[j]
                    if abs(rho_j) <= edge:
                        w_new = 0.0
                    else:
                        w_new = np.sign(rho_j) * (abs(rho_j) - thr) / diag[j]
                    delta = w_new - w[j]
                    if delta != 0.0:
                        np.multiply(cols[j], delta, out=tmp)
                        c -= tmp
                        w[j] = w_new
                cc = c[candidates]
                ww = w[candidates]
                viol_cand = np.where(
                    ww != 0.0,
                    np.abs(cc - thr * np.sign(ww)),
                    np.maximum(np.abs(cc) - thr, 0.0),
                )
                if float(viol_cand.max(initial=0.0)) <= tol_c:
                    break
            # the strong rule can screen out true members: one full pass decides
            viol = full_violation(thr)
            if float(viol.max(initial=0.0)) <= tol_c:
                break
            candidates = np.union1d(candidates, np.flatnonzero(viol > tol_c))
        out[li] = w
        prev_thr = thr
    return out


def _active_set_path(
    G: np.ndarray,
    b: np.ndarray,
    n: int,
    lambdas: np.ndarray,
    max_rounds: int = 8,
) -> np.ndarray:
    """Lasso path by sign-fixed active-set solves (fold-fit work horse).

    On a fixed support with fixed signs the lasso solution is the
    linear solve G_AA w_A = b_A - n*lam*s_A; the support is grown from
    KKT violators and shrunk on sign flips, warm-started down the
    path. Ties between exact duplicates are resolved by the jittered
    solve rather than the coordinate-descent sweep order, which is fine
    for cross-validation where only predictions matter.
    """
    m = G.shape[0]
    w = np.zeros(m)
    out = np.zeros((len(lambdas), m))
    active: list[int] = []
    signs: dict[int, float] = {}
    for li, lam in enumerate(lambdas):
        thr = lam * n
        edge = thr * (1 + 1e-12)
        for _ in range(max_rounds):
            if active:
                idx = np.array(active)
                G_aa = G[np.ix_(idx, idx)]
                rhs = b[idx] - thr * np.array([signs[j] for j in active])
                try:
                    w_a = np.linalg.solve(G_aa + 1e-10 * np.eye(len(idx)), rhs)
                except np.linalg.LinAlgError:
                    w_a = np.linalg.lstsq(G_aa, rhs, rcond=None)[0]
                flipped = [k for k, val in enumerate(w_a) if val * signs[active[k]] < 0]
                if flipped:
                    # drop the worst sign violation and re-solve
                    worst = max(flipped, key=lambda k: abs(w_a[k]))
                    j = active.pop(worst)
                    signs.pop(j)
                    continue
                w = np.zeros(m)
                w[idx] = w_a
                c = b - G[:, idx] @ w_a
            else:
                w = np.zeros(m)
                c = b.copy()
            over = np.abs(c) > edge
            over[active] = False
            if not over.any():
                break
            j = int(np.argmax(np.abs(c) * over))
            active.append(j)
            signs[j] = 1.0 if c[j] > 0 else -1.0
        out[li] = w
    return out


def lasso_select(
    X: np.ndarray,
    y: np.ndarray,
    folds: int = 5,
    n_lambdas: int = 100,
    lambda_min_ratio: float = 1e-3,
    shuffle: bool = False,
    seed: int | None = None,
) -> SelectionResult:
    """Lasso with the penalty chosen by k-fold cross-validation.

    The grid holds n_lambdas logarithmically spaced penalties from
    lambda_max = max_j |X_j'y|/n down to lambda_min_ratio*lambda_max.
    Folds are contiguous blocks in row order unless shuffle is set.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = X.shape
    if n < folds:
        raise ValueError(f"need at least {folds} rows for {folds}-fold CV")
    lam_max = float(np.max(np.abs(X.T @ y)) / n)
    if lam_max == 0.0:
        return SelectionResult([], Method.LASSO, np.zeros(m), {"lambda_max": 0.0})
    lambdas = np.geomspace(lam_max, lam_max * lambda_min_ratio, n_lambdas)

    indices = np.arange(n)
    if shuffle:
        rng = np.random.default_rng(seed)
        rng.shuffle(indices)
    blocks = np.array_split(indices, folds)

    cv_err = np.zeros((folds, len(lambdas)))
    for k, hold in enumerate(blocks):
        train = np.setdiff1d(indices, hold, assume_unique=True)
        Xt, yt = X[train], y[train]
        # fold fits only feed held-out predictions, so the fast
        # active-set solver is enough
        path = _active_set_path(Xt.T @ Xt, Xt.T @ yt, len(train), lambdas)
        preds = X[hold] @ path.T
        cv_err[k] = np.mean((preds - y[hold][:, None]) ** 2, axis=0)
    mean_err = cv_err.mean(axis=0)
    best = int(np.flatnonzero(mean_err == mean_err.min())[0])  # tie: larger penalty

    G, bvec = X.T @ X, X.T @ y
    warm_path = _lasso_path(
        G, bvec, n, lambdas[: best + 1], kkt_tol=1e-5, max_iter=20, max_screen_rounds=3
    )
    # polish at the chosen penalty until the KKT conditions actually hold
    coef = _lasso_path(
        G,
        bvec,
        n,
        lambdas[best : best + 1],
        kkt_tol=1e-7,
        max_iter=5000,
        warm=warm_path[-1],
    )[0].copy()
    coef[np.abs(coef) <= 1e-12] = 0.0
    selected = [int(j) for j in np.flatnonzero(coef)]
    return SelectionResult(
        selected=selected,
        method=Method.LASSO,
        coefficients=coef,
        diagnostics={
            "lambda_path": lambdas.tolist(),
            "cv_curve": mean_err.tolist(),
            "chosen_lambda": float(lambdas[best]),
            "chosen_index": best,
        },
    )


def lasso_coefficients(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Single lasso solve at a fixed penalty (KKT-converged)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    return _lasso_path(X.T @ X, X.T @ y, n, np.array([lam]))[0]
