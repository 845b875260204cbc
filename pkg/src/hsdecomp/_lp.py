"""LP helpers: scipy's HiGHS interface for one-off solves, highspy for warm-started models."""

from __future__ import annotations

import highspy
import numpy as np
from scipy import sparse
from scipy.optimize import linprog


class LPError(RuntimeError):
    pass


def maximize(c, A=None, row_lo=None, row_hi=None, lb=None, ub=None, tag=""):
    """Maximize ``c @ x`` s.t. ``row_lo <= A x <= row_hi`` and ``lb <= x <= ub``.

    Returns ``(value, x, res)``; ``res`` is the raw scipy result.
    """
    c = np.asarray(c, dtype=float)
    A_ub = b_ub = None
    if A is not None and A.shape[0]:
        A = sparse.csr_matrix(A)
        blocks, rhs = [], []
        if row_hi is not None:
            keep = np.isfinite(row_hi)
            blocks.append(A[keep])
            rhs.append(np.asarray(row_hi)[keep])
        if row_lo is not None:
            keep = np.isfinite(row_lo)
            blocks.append(-A[keep])
            rhs.append(-np.asarray(row_lo)[keep])
        A_ub = sparse.vstack(blocks).tocsr()
        b_ub = np.concatenate(rhs)
    bounds = np.column_stack([np.full(len(c), -np.inf) if lb is None else lb,
                              np.full(len(c), np.inf) if ub is None else ub])
    res = linprog(-c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs-ds")
    if res.status != 0:
        raise LPError(f"LP solve failed{(' for ' + tag) if tag else ''}: {res.message}")
    return float(-res.fun), res.x, res


def minimize(c, A_ub=None, b_ub=None, lb=None, ub=None, tag="", options=None):
    res = linprog(np.asarray(c, float), A_ub=A_ub, b_ub=b_ub,
                  bounds=np.column_stack([lb, ub]) if lb is not None else (0, None),
                  method="highs", options=options or {})
    if res.status != 0:
        raise LPError(f"LP solve failed{(' for ' + tag) if tag else ''}: {res.message}")
    return res


class PersistentLP:
    """A maximisation LP ``lo <= A x <= hi``, ``col_lo <= x <= col_hi`` kept alive between solves.

    Costs and bounds are changed in place so HiGHS can warm-start from the last basis.
    """

    def __init__(self, A, row_lo, row_hi, col_lo, col_hi):
        A = sparse.csc_matrix(A)
        self.n_row, self.n_col = A.shape
        self._rows = np.arange(self.n_row, dtype=np.int32)
        self._cols = np.arange(self.n_col, dtype=np.int32)
        lp = highspy.HighsLp()
        lp.num_col_ = self.n_col
        lp.num_row_ = self.n_row
        lp.col_cost_ = np.zeros(self.n_col)
        lp.col_lower_ = np.asarray(col_lo, float)
        lp.col_upper_ = np.asarray(col_hi, float)
        lp.row_lower_ = np.asarray(row_lo, float)
        lp.row_upper_ = np.asarray(row_hi, float)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr.astype(np.int32)
        lp.a_matrix_.index_ = A.indices.astype(np.int32)
        lp.a_matrix_.value_ = A.data.astype(float)
        lp.sense_ = highspy.ObjSense.kMaximize
        self.h = highspy.Highs()
        self.h.setOptionValue("output_flag", False)
        self.h.setOptionValue("presolve", "off")
        self.h.passModel(lp)

    def set_cost(self, c) -> None:
        self.h.changeColsCost(self.n_col, self._cols, np.asarray(c, float))

    def set_col_bounds(self, lo, hi) -> None:
        self.h.changeColsBounds(self.n_col, self._cols, np.asarray(lo, float), np.asarray(hi, float))

    def set_row_bounds(self, lo, hi) -> None:
        self.h.changeRowsBounds(self.n_row, self._rows, np.asarray(lo, float), np.asarray(hi, float))

    def solve(self, tag: str = "") -> tuple[float, np.ndarray]:
        self.h.run()
        status = self.h.getModelStatus()
        if status != highspy.HighsModelStatus.kOptimal:
            # a stale basis occasionally stalls the warm start; retry cold
            self.h.clearSolver()
            self.h.run()
            status = self.h.getModelStatus()
        if status != highspy.HighsModelStatus.kOptimal:
            raise LPError(f"LP solve failed{(' for ' + tag) if tag else ''}: {self.h.modelStatusToString(status)}")
        x = np.asarray(self.h.getSolution().col_value, dtype=float)
        return float(self.h.getInfo().objective_function_value), x
