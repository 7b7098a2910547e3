"""Square Gray-coded QAM constellations with unit average energy."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def _is_power_of_four(order: int) -> bool:
    return order >= 4 and (order & (order - 1)) == 0 and int(np.log2(order)) % 2 == 0


class Qam:
    """
    Gray-coded square QAM.

    Bits are consumed in groups of ``log2(order)``; the first half of each
    group selects the in-phase level, the second half the quadrature level.
    Bit value 0 maps to the positive side of each axis, so QPSK ``00`` is
    ``(1 + 1j) / sqrt(2)``.
    """

    def __init__(self, order: int = 4):
        if not _is_power_of_four(int(order)):
            raise ValueError(f"QAM order must be a power of 4, got {order}")
        self.order = int(order)
        self.bits_per_symbol = int(np.log2(self.order))
        self._half = self.bits_per_symbol // 2
        side = int(round(np.sqrt(self.order)))
        self._side = side
        # level index i (binary) -> amplitude, largest amplitude first
        self._levels = (side - 1) - 2.0 * np.arange(side)
        self._norm = np.sqrt(2.0 * (self.order - 1) / 3.0)
        gray = np.arange(side) ^ (np.arange(side) >> 1)
        self._gray_of_index = gray
        self._index_of_gray = np.argsort(gray)
        self._weights = 1 << np.arange(self._half - 1, -1, -1)

    @property
    def points(self) -> np.ndarray:
        """All constellation points ordered by their integer bit label."""
        labels = np.arange(self.order)
        bits = (labels[:, None] >> np.arange(self.bits_per_symbol - 1, -1, -1)) & 1
        return self.modulate(bits.reshape(-1))

    def modulate(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).reshape(-1)
        if bits.size % self.bits_per_symbol:
            raise ValueError(
                f"bit count {bits.size} is not a multiple of {self.bits_per_symbol}"
            )
        if np.any((bits != 0) & (bits != 1)):
            raise ValueError("bits must be 0 or 1")
        groups = bits.reshape(-1, self.bits_per_symbol)
        gi = groups[:, : self._half] @ self._weights
        gq = groups[:, self._half :] @ self._weights
        i = self._levels[self._index_of_gray[gi]]
        q = self._levels[self._index_of_gray[gq]]
        return (i + 1j * q) / self._norm

    def _axis_index(self, values: np.ndarray) -> np.ndarray:
        # nearest level; levels are evenly spaced by 2 starting at side-1
        idx = np.rint(((self._side - 1) - values * self._norm) / 2.0)
        return np.clip(idx, 0, self._side - 1).astype(np.int64)

    def demodulate(self, symbols) -> np.ndarray:
        """Hard nearest-point decisions mapped back to bits."""
        symbols = np.asarray(symbols, dtype=complex).reshape(-1)
        gi = self._gray_of_index[self._axis_index(symbols.real)]
        gq = self._gray_of_index[self._axis_index(symbols.imag)]
        shifts = np.arange(self._half - 1, -1, -1)
        bi = (gi[:, None] >> shifts) & 1
        bq = (gq[:, None] >> shifts) & 1
        return np.concatenate([bi, bq], axis=1).reshape(-1).astype(np.int8)

    def decide(self, symbols) -> np.ndarray:
        """Nearest constellation point for every symbol."""
        symbols = np.asarray(symbols, dtype=complex)
        i = self._levels[self._axis_index(symbols.real)]
        q = self._levels[self._axis_index(symbols.imag)]
        return (i + 1j * q) / self._norm


@lru_cache(maxsize=None)
def qam(order: int) -> Qam:
    return Qam(order)
