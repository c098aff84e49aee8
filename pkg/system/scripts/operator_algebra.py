#!/usr/bin/env python3
"""
Операторы конечного распространения над сечениями решётки.

Оператор хранится как scipy.sparse CSR (обычно) или плотный ndarray (результаты
функционального исчисления). Слой в узле имеет ранг `rank`; индексация (узел, слой).
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from lattice_geometry import Lattice

DEFAULT_DENSE_CAP = 4096

Matrix = Union[sp.spmatrix, np.ndarray]


@dataclass(frozen=True, eq=False)
class FinitePropOperator:
    """Элемент равномерной алгебры Ру на конечной решётке.

    Распространение и оценка коэффициентов вычисляются лениво и кэшируются;
    сам оператор неизменяем.
    """
    lattice: Lattice
    rank: int
    matrix: Matrix

    def __post_init__(self):
        n = self.lattice.n_sites * self.rank
        if self.matrix.shape != (n, n):
            raise ValueError(
                f"FinitePropOperator: форма {self.matrix.shape} не совпадает с ({n}, {n})"
            )
        if sp.issparse(self.matrix):
            object.__setattr__(self, 'matrix', sp.csr_matrix(self.matrix, dtype=complex))
        else:
            object.__setattr__(self, 'matrix', np.asarray(self.matrix, dtype=complex))

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else self.matrix

    def _nonzero_sites(self):
        if self.is_sparse:
            coo = self.matrix.tocoo()
            keep = coo.data != 0
            rows, cols = coo.row[keep], coo.col[keep]
        else:
            rows, cols = np.nonzero(self.matrix)
        return rows // self.rank, cols // self.rank

    @cached_property
    def propagation(self) -> float:
        """Точный максимум расстояния по ненулевым блокам."""
        xs, ys = self._nonzero_sites()
        if xs.size == 0:
            return 0.0
        pairs = np.unique(np.stack([xs, ys], axis=1), axis=0)
        return float(self.lattice.pair_distances(pairs[:, 0], pairs[:, 1]).max())

    @cached_property
    def coefficient_bound(self) -> float:
        """Максимум операторной нормы блока k(x, y)."""
        r = self.rank
        if self.is_sparse:
            blocks = sp.bsr_matrix(self.matrix, blocksize=(r, r)).data
            if blocks.shape[0] == 0:
                return 0.0
            return float(np.linalg.svd(blocks, compute_uv=False)[:, 0].max())

        n = self.lattice.n_sites
        best = 0.0
        chunk = max(1, 65536 // n)
        for start in range(0, n, chunk):
            stop = min(n, start + chunk)
            rows = self.matrix[start * r:stop * r].reshape(stop - start, r, n, r)
            blocks = rows.transpose(0, 2, 1, 3).reshape(-1, r, r)
            best = max(best, float(np.linalg.svd(blocks, compute_uv=False)[:, 0].max()))
        return best

    def _check_compatible(self, other: "FinitePropOperator"):
        if other.lattice is not self.lattice or other.rank != self.rank:
            raise ValueError("Операторы заданы на разных решётках или с разным рангом слоя")

    def _combine(self, other: "FinitePropOperator", op) -> "FinitePropOperator":
        self._check_compatible(other)
        if self.is_sparse and other.is_sparse:
            return FinitePropOperator(self.lattice, self.rank, op(self.matrix, other.matrix))
        return FinitePropOperator(self.lattice, self.rank,
                                  np.asarray(op(self.to_dense(), other.to_dense())))

    def __matmul__(self, other: "FinitePropOperator") -> "FinitePropOperator":
        return self._combine(other, lambda a, b: a @ b)

    def __add__(self, other: "FinitePropOperator") -> "FinitePropOperator":
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other: "FinitePropOperator") -> "FinitePropOperator":
        return self._combine(other, lambda a, b: a - b)

    def __mul__(self, scalar: complex) -> "FinitePropOperator":
        return FinitePropOperator(self.lattice, self.rank, self.matrix * scalar)

    __rmul__ = __mul__

    def adjoint(self) -> "FinitePropOperator":
        if self.is_sparse:
            return FinitePropOperator(self.lattice, self.rank, self.matrix.conj().T.tocsr())
        return FinitePropOperator(self.lattice, self.rank, self.matrix.conj().T.copy())

    def diagonal_blocks(self) -> np.ndarray:
        """Блоки k(x, x), форма (n_sites, rank, rank)."""
        n, r = self.lattice.n_sites, self.rank
        out = np.zeros((n, r, r), dtype=complex)
        for a in range(r):
            for b in range(r):
                if self.is_sparse:
                    out[:, a, b] = self.matrix[np.arange(n) * r + a, np.arange(n) * r + b].A1
                else:
                    out[:, a, b] = self.matrix[np.arange(n) * r + a, np.arange(n) * r + b]
        return out


def identity_operator(lattice: Lattice, rank: int = 1) -> FinitePropOperator:
    return FinitePropOperator(lattice, rank, sp.identity(lattice.n_sites * rank, format='csr'))


def multiplication_operator(f: Sequence[complex], lattice: Lattice, rank: int = 1) -> FinitePropOperator:
    """
    Оператор умножения ρ(f) на функцию узлов.

    Args:
        f: значения на всех узлах (длина n_sites)
        lattice: решётка
        rank: ранг слоя (функция действует скалярно на слой)
    """
    f = np.asarray(f, dtype=complex)
    if f.shape != (lattice.n_sites,):
        raise ValueError(
            f"multiplication_operator: функция задана на {f.shape} узлах, а решётка имеет {lattice.n_sites}"
        )
    return FinitePropOperator(lattice, rank, sp.diags(np.repeat(f, rank), format='csr'))


def shift_operator(lattice: Lattice, axis: int = 0, rank: int = 1) -> FinitePropOperator:
    """Единичный сдвиг (Sψ)(x) = ψ(x + e_axis); на краю окна ψ считается нулём."""
    target = lattice.forward[axis]
    rows = np.nonzero(target >= 0)[0]
    n = lattice.n_sites
    shift = sp.csr_matrix((np.ones(rows.size), (rows, target[rows])), shape=(n, n))
    return FinitePropOperator(lattice, rank, sp.kron(shift, sp.identity(rank), format='csr'))


def commutator(a: FinitePropOperator, b: FinitePropOperator) -> FinitePropOperator:
    """[A, B] = AB − BA."""
    if a.shape != b.shape:
        raise ValueError(f"commutator: несовместимые формы {a.shape} и {b.shape}")
    return a @ b - b @ a


def propagation(a: FinitePropOperator) -> float:
    return a.propagation


def _dense_for_norms(a: FinitePropOperator, dense_cap: int) -> np.ndarray:
    if a.shape[0] > dense_cap:
        raise ValueError(
            f"Оператор размера {a.shape[0]} превышает порог плотного SVD ({dense_cap})"
        )
    return a.to_dense()


def singular_values(a: FinitePropOperator, dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    return np.linalg.svd(_dense_for_norms(a, dense_cap), compute_uv=False)


def schatten_norm(a: FinitePropOperator, p: float, dense_cap: int = DEFAULT_DENSE_CAP) -> float:
    """
    Норма Шаттена (Σ σ_i^p)^{1/p}.

    Raises:
        ValueError: p < 1 или оператор больше dense_cap
    """
    if p < 1:
        raise ValueError(f"schatten_norm: p должно быть ≥ 1, получено {p}")
    sigma = singular_values(a, dense_cap)
    if sigma.size == 0 or sigma.max() == 0:
        return 0.0
    # Масштабирование по максимуму против переполнения при больших p
    top = sigma.max()
    return float(top * np.sum((sigma / top) ** p) ** (1.0 / p))


def operator_norm(a: FinitePropOperator, dense_cap: int = DEFAULT_DENSE_CAP) -> float:
    sigma = singular_values(a, dense_cap)
    return float(sigma.max()) if sigma.size else 0.0


# ---------------------------------------------------------------------------
# Профили суммируемости
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LipschitzTestFamily:
    """
    Детерминированная выборка из L-Lip_R.

    Шатры f = clip(c·L·(R/2 − d(x, ·))_+, −1, 1) с коэффициентом c = 1 во всех узлах x
    и n_random шатров со случайными якорями и c ∈ [−1, 1] (генератор с seed).
    Выборка с меньшим n_random является префиксом выборки с большим.
    """
    lattice: Lattice
    lipschitz: float
    support_diameter: float
    n_random: int = 16
    seed: int = 0
    functions: List[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        if self.lipschitz <= 0 or self.support_diameter <= 0:
            raise ValueError("LipschitzTestFamily: L и R должны быть положительными")
        radius = self.support_diameter / 2.0
        lat = self.lattice
        funcs = []

        def tent(anchor: int, c: float) -> np.ndarray:
            d = lat.distances_from(anchor)
            return np.clip(c * self.lipschitz * np.maximum(radius - d, 0.0), -1.0, 1.0)

        for x in range(lat.n_sites):
            funcs.append(tent(x, 1.0))
        rng = np.random.default_rng(self.seed)
        for _ in range(self.n_random):
            anchor = int(rng.integers(0, lat.n_sites))
            c = float(rng.uniform(-1.0, 1.0))
            funcs.append(tent(anchor, c))
        self.functions = funcs

    def __len__(self) -> int:
        return len(self.functions)

    def verify(self, f: np.ndarray) -> bool:
        """Проверить ‖f‖_∞ ≤ 1, Lip(f) ≤ L, diam(supp f) ≤ R."""
        lat = self.lattice
        if np.max(np.abs(f)) > 1.0:
            return False
        for mu in range(lat.dimension):
            ok = lat.forward[mu] >= 0
            step = np.abs(f[ok] - f[lat.forward[mu][ok]])
            if np.any(step > self.lipschitz * lat.spacing * (1 + 1e-12)):
                return False
        support = np.nonzero(f != 0)[0]
        if support.size > 1:
            a, b = np.meshgrid(support, support, indexing='ij')
            if lat.pair_distances(a.ravel(), b.ravel()).max() > self.support_diameter:
                return False
        return True


@dataclass(frozen=True)
class SummabilityEstimate:
    """Нижняя оценка sup ‖[F, ρ(f)]‖_p по выборке."""
    value: float
    p: float
    sample_count: int
    argmax: int
    lipschitz: float
    support_diameter: float


def summability_profile(F: FinitePropOperator, p: float, family: LipschitzTestFamily,
                        dense_cap: int = DEFAULT_DENSE_CAP) -> SummabilityEstimate:
    """
    max по выборке семейства ‖[F, ρ(f)]‖_p.

    Raises:
        ValueError: пустое семейство
    """
    if len(family) == 0:
        raise ValueError("summability_profile: пустое семейство тестовых функций")

    best, argmax = 0.0, 0
    for i, f in enumerate(family.functions):
        value = schatten_norm(commutator(F, multiplication_operator(f, F.lattice, F.rank)),
                              p, dense_cap)
        if value > best:
            best, argmax = value, i

    logging.info(
        f"Суммируемость p={p}, L={family.lipschitz}, R={family.support_diameter}: "
        f"{best:.6g} по {len(family)} функциям"
    )
    return SummabilityEstimate(best, p, len(family), argmax,
                               family.lipschitz, family.support_diameter)
