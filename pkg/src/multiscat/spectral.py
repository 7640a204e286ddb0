"""Channel momenta K_pm on a chosen sheet and the open/closed split at real lambda."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AtThreshold
from .medium import LEFT, RIGHT
from .tolerances import DEFAULT_TOLERANCES, Tolerances


def principal_sqrt(x) -> np.ndarray:
    """Principal square root; a negative real argument maps to +i*sqrt(|x|).

    ``np.sqrt`` returns ``-i`` for arguments with imaginary part ``-0.0``,
    so real inputs are handled explicitly.
    """
    x = np.asarray(x, dtype=complex)
    out = np.atleast_1d(np.sqrt(x))
    on_axis = x.imag == 0
    if np.any(on_axis):
        re = x.real[on_axis]
        out[np.atleast_1d(on_axis)] = np.where(re >= 0, np.sqrt(np.abs(re)) + 0j, 1j * np.sqrt(np.abs(re)))
    return out.reshape(x.shape)


@dataclass(frozen=True)
class SpectralPoint:
    lam: complex
    sheet_left: np.ndarray | None = None
    sheet_right: np.ndarray | None = None

    def sheets(self, n: int):
        left = np.ones(n, dtype=int) if self.sheet_left is None else np.asarray(self.sheet_left, dtype=int)
        right = np.ones(n, dtype=int) if self.sheet_right is None else np.asarray(self.sheet_right, dtype=int)
        return left, right

    def flipped(self, side: str, channel: int, n: int) -> "SpectralPoint":
        left, right = self.sheets(n)
        left, right = left.copy(), right.copy()
        if side == LEFT:
            left[channel] *= -1
        else:
            right[channel] *= -1
        return SpectralPoint(self.lam, left, right)

    @property
    def is_physical(self) -> bool:
        principal = all(s is None or np.all(np.asarray(s) == 1) for s in (self.sheet_left, self.sheet_right))
        return principal and complex(self.lam).imag == 0


@dataclass(frozen=True)
class ChannelMomenta:
    K_left: np.ndarray
    K_right: np.ndarray


def channel_momenta(bases, point: SpectralPoint) -> ChannelMomenta:
    left, right = bases
    s_left, s_right = point.sheets(left.n)
    lam = complex(point.lam)
    return ChannelMomenta(s_left * principal_sqrt(left.thresholds - lam),
                          s_right * principal_sqrt(right.thresholds - lam))


def check_off_threshold(bases, lam, tol: Tolerances = DEFAULT_TOLERANCES) -> None:
    lam = complex(lam)
    limit = tol.threshold(lam)
    for basis in bases:
        for s, thr in enumerate(basis.thresholds):
            if abs(lam - thr) <= limit:
                raise AtThreshold(
                    f"lambda = {lam.real if lam.imag == 0 else lam} is within {limit:.3g} of the "
                    f"{basis.side} threshold of channel {s} (Lambda = {float(thr)!r})",
                    side=basis.side, channel=s, threshold=float(thr))


@dataclass(frozen=True)
class ChannelClassification:
    open_left: np.ndarray
    closed_left: np.ndarray
    open_right: np.ndarray
    closed_right: np.ndarray
    kappa_left: np.ndarray
    kappa_right: np.ndarray

    @property
    def l_o(self) -> int:
        return len(self.open_left)

    @property
    def l_c(self) -> int:
        return len(self.closed_left)

    @property
    def r_o(self) -> int:
        return len(self.open_right)

    @property
    def r_c(self) -> int:
        return len(self.closed_right)

    def indices(self, side: str, kind: str) -> np.ndarray:
        if side == LEFT:
            return self.open_left if kind == "o" else self.closed_left
        return self.open_right if kind == "o" else self.closed_right

    def order(self, side: str) -> np.ndarray:
        """Index map putting open channels before closed ones, ascending Lambda in each group."""
        return np.concatenate([self.indices(side, "o"), self.indices(side, "c")])

    def kappa(self, side: str, kind: str) -> np.ndarray:
        k = self.kappa_left if side == LEFT else self.kappa_right
        return k[self.indices(side, kind)]

    @property
    def all_open(self) -> bool:
        return self.l_c == 0 and self.r_c == 0

    @property
    def all_closed(self) -> bool:
        return self.l_o == 0 and self.r_o == 0

    @property
    def mixed(self) -> bool:
        return not (self.all_open or self.all_closed)


def classify_channels(bases, lam: float, threshold_tol: float | None = None,
                      tol: Tolerances = DEFAULT_TOLERANCES) -> ChannelClassification:
    """Open iff lambda < Lambda_s (real K), closed iff lambda > Lambda_s (K = i kappa)."""
    lam = float(lam)
    if threshold_tol is not None:
        tol = tol.override(threshold_tol=threshold_tol)
    check_off_threshold(bases, lam, tol)
    left, right = bases
    lists = []
    for basis in (left, right):
        thr = basis.thresholds
        lists.append((np.flatnonzero(lam < thr), np.flatnonzero(lam > thr)))
    return ChannelClassification(lists[0][0], lists[0][1], lists[1][0], lists[1][1],
                                 np.sqrt(np.abs(left.thresholds - lam)),
                                 np.sqrt(np.abs(right.thresholds - lam)))


def classify_from_momenta(K_left, K_right) -> ChannelClassification:
    """Split from momenta already computed at a real lambda on the principal sheet."""
    def split(K):
        closed = np.abs(K.imag) > np.abs(K.real)
        return np.flatnonzero(~closed), np.flatnonzero(closed)
    ol, cl = split(np.asarray(K_left))
    orr, cr = split(np.asarray(K_right))
    return ChannelClassification(ol, cl, orr, cr, np.abs(K_left), np.abs(K_right))


__all__ = [
    "LEFT", "RIGHT", "SpectralPoint", "ChannelMomenta", "ChannelClassification",
    "channel_momenta", "classify_channels", "classify_from_momenta", "check_off_threshold",
    "principal_sqrt",
]
