"""Numerical tolerances shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    sym_tol: float = 1e-10
    eig_tol: float = 1e-10
    # None -> 1e-9 * max(1, max|Lambda|)
    gap_tol: float | None = None
    # None -> 1e-8 * (1 + |lambda|)
    threshold_tol: float | None = None
    rank_tol: float = 1e-10
    singularity_tol: float = 1e-12
    null_tol: float = 1e-7
    refine_tol: float = 1e-12
    det_accept_rel: float = 1e-8
    check_tol: float = 1e-8

    def gap(self, eigenvalues) -> float:
        if self.gap_tol is not None:
            return self.gap_tol
        scale = max((abs(x) for x in eigenvalues), default=0.0)
        return 1e-9 * max(1.0, scale)

    def threshold(self, lam) -> float:
        if self.threshold_tol is not None:
            return self.threshold_tol
        return 1e-8 * (1.0 + abs(lam))

    def override(self, **kwargs) -> "Tolerances":
        return replace(self, **kwargs)

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


DEFAULT_TOLERANCES = Tolerances()
