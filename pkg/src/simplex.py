# -*- coding: utf-8 -*-
"""
simplex.py: 密行列の改訂単体法（2段階法）

min cᵀx  s.t.  A_ub x ≤ b_ub, x ≥ 0 を解く。
基底逆行列 B⁻¹ を明示的に保持し、ピボットごとに eta 更新、一定回数ごとに再分解する。
ピボット規則は Bland（既定、巡回しない）と Dantzig（最小被約費用）の2種類。
"""
import logging
from dataclasses import dataclass

import numpy as np

from .constants import SIMPLEX_REFACTOR_INTERVAL
from .errors import StructuralError, ValidationError

logger = logging.getLogger(__name__)

PIVOT_RULES = ("bland", "dantzig")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class SimplexResult:
    """x は元の変数のみ。objective は cᵀx"""
    x: np.ndarray
    objective: float
    status: str
    iterations: int
    basis: tuple[int, ...]


class RevisedSimplex:
    """
    標準形 M y = r, y ≥ 0 の改訂単体法。
    列の並びは [元の変数 | スラック | 人工変数]。人工変数は一度基底を出たら二度と入らない。
    """

    def __init__(self, c, A_ub, b_ub, rule: str = "bland", tol: float = 1e-9,
                 refactor: int = SIMPLEX_REFACTOR_INTERVAL, max_iter: int | None = None):
        if rule not in PIVOT_RULES:
            raise ValidationError(f"unknown pivot rule {rule!r}; expected one of {PIVOT_RULES}")
        A = np.atleast_2d(np.asarray(A_ub, dtype=float))
        b = np.asarray(b_ub, dtype=float).ravel()
        c = np.asarray(c, dtype=float).ravel()
        m, n = A.shape
        if b.size != m or c.size != n:
            raise ValidationError(f"shape mismatch: A is {m}x{n}, b has {b.size}, c has {c.size}")

        # b < 0 の行は符号を反転し、人工変数で初期基底を作る
        negative = b < 0
        sign = np.where(negative, -1.0, 1.0)
        art_rows = np.flatnonzero(negative)
        self.m, self.n = m, n
        self.n_art = art_rows.size
        self.M = np.hstack([
            A * sign[:, None],
            np.diag(sign),
            np.eye(m)[:, art_rows],
        ])
        self.r = b * sign
        self.c = np.concatenate([c, np.zeros(m + self.n_art)])
        self.first_art = n + m
        self.rule = rule
        self.tol = tol
        self.refactor = max(1, int(refactor))
        self.max_iter = max_iter if max_iter is not None else 50 * (m + n + self.n_art) + 1000

        basis = np.arange(n, n + m)
        basis[art_rows] = self.first_art + np.arange(self.n_art)
        self.basis = basis
        # 初期基底は ±1 の対角（スラックは反転行で -1、人工変数は +1）
        self.B_inv = np.linalg.inv(self.M[:, self.basis])
        self.iterations = 0
        self._since_refactor = 0

    # --- 基底の操作 ---

    def _refactorize(self) -> None:
        self.B_inv = np.linalg.inv(self.M[:, self.basis])
        self._since_refactor = 0

    def _pivot(self, row: int, col: int, w: np.ndarray) -> None:
        """列 col を行 row で基底に入れる（w = B⁻¹ M_col）"""
        pivot = w[row]
        self.B_inv[row] /= pivot
        others = np.arange(self.m) != row
        self.B_inv[others] -= np.outer(w[others], self.B_inv[row])
        self.basis[row] = col
        self.iterations += 1
        self._since_refactor += 1
        if self._since_refactor >= self.refactor:
            self._refactorize()

    def values(self) -> np.ndarray:
        return self.B_inv @ self.r

    def _entering(self, cost: np.ndarray, allowed: np.ndarray):
        duals = cost[self.basis] @ self.B_inv
        reduced = cost[allowed] - duals @ self.M[:, allowed]
        reduced[np.isin(allowed, self.basis)] = 0.0
        candidates = np.flatnonzero(reduced < -self.tol)
        if candidates.size == 0:
            return None
        if self.rule == "bland":
            return int(allowed[candidates[0]])
        return int(allowed[candidates[np.argmin(reduced[candidates])]])

    def _leaving(self, w: np.ndarray, x_B: np.ndarray):
        rows = np.flatnonzero(w > self.tol)
        if rows.size == 0:
            return None
        ratios = np.maximum(x_B[rows], 0.0) / w[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, best)]
        # 同率なら基底変数の番号が最小の行（Bland）
        return int(ties[np.argmin(self.basis[ties])])

    def _run(self, cost: np.ndarray, allowed: np.ndarray) -> str:
        while True:
            if self.iterations >= self.max_iter:
                raise StructuralError(f"simplex did not converge within {self.max_iter} pivots")
            col = self._entering(cost, allowed)
            if col is None:
                return OPTIMAL
            w = self.B_inv @ self.M[:, col]
            row = self._leaving(w, self.values())
            if row is None:
                return UNBOUNDED
            self._pivot(row, col, w)

    def _drive_out_artificials(self, allowed: np.ndarray) -> None:
        """値 0 で基底に残った人工変数を追い出す。追い出せない行は冗長な制約"""
        for row in range(self.m):
            if self.basis[row] < self.first_art:
                continue
            tableau_row = self.B_inv[row] @ self.M[:, allowed]
            tableau_row[np.isin(allowed, self.basis)] = 0.0
            candidates = np.flatnonzero(np.abs(tableau_row) > self.tol)
            if candidates.size == 0:
                logger.debug("row %d is redundant; artificial stays basic at zero", row)
                continue
            col = int(allowed[candidates[0]])
            self._pivot(row, col, self.B_inv @ self.M[:, col])

    # --- 2段階法 ---

    def solve(self) -> SimplexResult:
        allowed = np.arange(self.first_art)
        if self.n_art:
            phase1 = np.zeros_like(self.c)
            phase1[self.first_art:] = 1.0
            self._run(phase1, allowed)
            self._refactorize()
            infeasibility = float(phase1[self.basis] @ self.values())
            logger.debug("phase 1 finished after %d pivots, infeasibility %.3g", self.iterations, infeasibility)
            if infeasibility > self.tol * max(1.0, float(np.abs(self.r).max())):
                return self._result(INFEASIBLE)
            self._drive_out_artificials(allowed)

        status = self._run(self.c, allowed)
        self._refactorize()
        logger.debug("phase 2 finished with status %s after %d pivots", status, self.iterations)
        return self._result(status)

    def _result(self, status: str) -> SimplexResult:
        full = np.zeros(self.M.shape[1])
        full[self.basis] = np.maximum(self.values(), 0.0)
        x = full[:self.n]
        objective = float(self.c[:self.n] @ x)
        return SimplexResult(x, objective, status, self.iterations, tuple(int(b) for b in self.basis))


def revised_simplex(c, A_ub, b_ub, rule: str = "bland", tol: float = 1e-9,
                    refactor: int = SIMPLEX_REFACTOR_INTERVAL, max_iter: int | None = None) -> SimplexResult:
    """min cᵀx s.t. A_ub x ≤ b_ub, x ≥ 0"""
    return RevisedSimplex(c, A_ub, b_ub, rule, tol, refactor, max_iter).solve()
