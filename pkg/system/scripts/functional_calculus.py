#!/usr/bin/env python3
"""
Функциональное исчисление f(D) для фильтров Шварца.

Методы:
- eigen: точное спектральное разложение U f(Λ) U* (с дисковым кэшем разложений)
- chebyshev: усечённый ряд Чебышёва на [−a, a], трёхчленная рекуррентность

Плюс ядра k(x, y), профили квазилокальности μ(R) и ширина ядра.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.fft import dct
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from operator_algebra import FinitePropOperator

DEFAULT_DENSE_CAP = 8192
DEFAULT_DEGREE_CAP = 2000
DEFAULT_TARGET = 1e-10
DEFAULT_INFLATION = 1.01
# Узлов косинусной квадратуры на одну степень ряда и наименьшая сетка
NODES_PER_DEGREE = 4
MIN_NODES = 64
SELF_ADJOINT_TOL = 1e-10
METHODS = ("eigen", "chebyshev")


class ChebyshevDegreeError(ValueError):
    """Остаток ряда Чебышёва не достиг цели в пределах допустимой степени."""


@dataclass(frozen=True)
class FilterFunction:
    """Фильтр: gaussian{t} → e^{−t x²} или табличная функция (линейная интерполяция)."""
    kind: str
    t: float = 1.0
    table: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]] = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-self.t * x * x)
        if self.kind == "table":
            xs, ys = self.table
            return np.interp(x, xs, ys)
        raise ValueError(f"FilterFunction: неизвестный вид {self.kind!r}")

    @property
    def value_at_zero(self) -> float:
        return float(self(0.0))

    def is_even(self, samples: int = 257, span: float = 16.0) -> bool:
        x = np.linspace(0.0, span, samples)
        return bool(np.max(np.abs(self(x) - self(-x))) <= np.finfo(float).eps)

    def check_index_filter(self):
        """Для индекса фильтр обязан быть чётным с f(0) = 1."""
        if not self.is_even():
            raise ValueError(f"Фильтр {self.describe()} не чётный")
        if abs(self.value_at_zero - 1.0) > np.finfo(float).eps:
            raise ValueError(f"Фильтр {self.describe()}: f(0) = {self.value_at_zero} ≠ 1")

    def describe(self) -> str:
        return f"gaussian{{t={self.t}}}" if self.kind == "gaussian" else "table"


def gaussian(t: float = 1.0) -> FilterFunction:
    if t <= 0:
        raise ValueError(f"gaussian: t должно быть > 0, получено {t}")
    return FilterFunction("gaussian", float(t))


def table_filter(xs: Sequence[float], ys: Sequence[float]) -> FilterFunction:
    xs = tuple(float(v) for v in xs)
    if list(xs) != sorted(xs):
        raise ValueError("table_filter: узлы таблицы должны возрастать")
    return FilterFunction("table", table=(xs, tuple(float(v) for v in ys)))


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Материализованное ядро k_{f(D)}(x, y) с происхождением."""
    operator: FinitePropOperator
    source: str
    method: str
    degree: Optional[int] = None
    residual_bound: float = 0.0

    @property
    def lattice(self):
        return self.operator.lattice


@dataclass
class EigenCache:
    """Дисковый кэш разложений eigh, ключ - sha256 содержимого матрицы."""
    directory: Optional[Path] = None
    hits: int = 0
    misses: int = 0
    memory: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)

    @staticmethod
    def key(matrix: np.ndarray) -> str:
        digest = hashlib.sha256()
        digest.update(str(matrix.shape).encode())
        digest.update(str(matrix.dtype).encode())
        digest.update(np.ascontiguousarray(matrix).tobytes())
        return digest.hexdigest()

    def eigh(self, matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        key = self.key(matrix)
        if key in self.memory:
            self.hits += 1
            return self.memory[key]
        if self.directory is None:
            self.misses += 1
            self.memory[key] = np.linalg.eigh(matrix)
            return self.memory[key]
        directory = Path(self.directory)
        path = directory / f"eigh_{key}.npz"
        if path.exists():
            with np.load(path) as data:
                self.hits += 1
                logging.info(f"Кэш разложений: попадание {path.name}")
                return data['values'], data['vectors']
        values, vectors = np.linalg.eigh(matrix)
        directory.mkdir(parents=True, exist_ok=True)
        np.savez(path, values=values, vectors=vectors)
        self.misses += 1
        return values, vectors


def operator_id(d: FinitePropOperator) -> str:
    dense = d.to_dense()
    return EigenCache.key(dense)[:16]


def _check_self_adjoint(d: FinitePropOperator):
    m = d.matrix
    diff = m - m.conj().T
    defect = np.max(np.abs(diff.toarray() if sp.issparse(diff) else diff), initial=0.0)
    if defect > SELF_ADJOINT_TOL:
        raise ValueError(f"apply_filter: оператор не самосопряжён (дефект {defect:.2e})")


def spectral_enclosure(d: FinitePropOperator, inflation: float = DEFAULT_INFLATION) -> float:
    """a ≥ ‖D‖: крайние собственные значения (Ланцош) с запасом inflation."""
    n = d.shape[0]
    if n <= 64:
        values = np.linalg.eigvalsh(d.to_dense())
        return inflation * float(np.max(np.abs(values)))
    try:
        top = eigsh(d.matrix, k=1, which='LA', return_eigenvectors=False)
        bottom = eigsh(d.matrix, k=1, which='SA', return_eigenvectors=False)
        radius = max(abs(float(top[0])), abs(float(bottom[0])))
    except ArpackNoConvergence:
        logging.warning("eigsh не сошёлся, граница спектра по строчным суммам")
        m = d.matrix
        radius = float(np.max(np.abs(m).sum(axis=1)))
    return inflation * radius


def chebyshev_coefficients(f: Callable, a: float, nodes: int) -> np.ndarray:
    """Коэффициенты Чебышёва f(a·x) по косинусной квадратуре на nodes узлах."""
    j = np.arange(nodes)
    x = np.cos(np.pi * (j + 0.5) / nodes)
    coeffs = dct(f(a * x), type=2) / nodes
    coeffs[0] /= 2.0
    return coeffs


def choose_degree(coeffs: np.ndarray, target: float, cap: int) -> Tuple[int, float]:
    """Наименьшая степень n ≤ cap с Σ_{k>n} |c_k| ≤ target."""
    tails = np.concatenate([np.cumsum(np.abs(coeffs)[::-1])[::-1][1:], [0.0]])
    ok = np.nonzero(tails[: cap + 1] <= target)[0]
    if ok.size == 0:
        raise ChebyshevDegreeError(
            f"Остаток ряда Чебышёва {tails[min(cap, tails.size - 1)]:.2e} > {target:.1e} при степени {cap}"
        )
    degree = int(ok[0])
    return degree, float(tails[degree])


def adaptive_coefficients(f: Callable, a: float, target: float,
                          cap: int) -> Tuple[np.ndarray, int, float]:
    """
    Коэффициенты и наименьшая достаточная степень.

    Узлов берётся NODES_PER_DEGREE на каждую допустимую степень; сетка удваивается,
    пока хвост не опустится до target или допустимая степень не дойдёт до cap.
    """
    nodes = MIN_NODES
    while True:
        coeffs = chebyshev_coefficients(f, a, nodes)
        limit = min(cap, nodes // NODES_PER_DEGREE - 1)
        try:
            degree, residual = choose_degree(coeffs, target, limit)
            return coeffs, degree, residual
        except ChebyshevDegreeError:
            if limit >= cap:
                raise
            nodes *= 2


def _chebyshev_series(d: FinitePropOperator, coeffs: np.ndarray, degree: int, a: float) -> np.ndarray:
    n = d.shape[0]
    x = d.matrix / a
    t_prev = np.eye(n, dtype=complex)
    result = coeffs[0] * t_prev
    if degree == 0:
        return result
    t_curr = x @ t_prev
    result = result + coeffs[1] * t_curr
    for k in range(2, degree + 1):
        t_next = 2.0 * (x @ t_curr) - t_prev
        result = result + coeffs[k] * t_next
        t_prev, t_curr = t_curr, t_next
    return np.asarray(result)


def apply_filter(d: FinitePropOperator, f: FilterFunction, method: str = "eigen",
                 degree: Optional[int] = None, cache: Optional[EigenCache] = None,
                 dense_cap: int = DEFAULT_DENSE_CAP, degree_cap: int = DEFAULT_DEGREE_CAP,
                 target: float = DEFAULT_TARGET, inflation: float = DEFAULT_INFLATION) -> KernelMatrix:
    """
    Вычислить f(D).

    Args:
        d: самосопряжённый оператор
        f: фильтр
        method: 'eigen' | 'chebyshev'
        degree: фиксированная степень Чебышёва (по умолчанию адаптивная)
        cache: кэш разложений для eigen

    Returns:
        KernelMatrix (плотный оператор); для chebyshev - степень и сумма отброшенных |c_k|

    Raises:
        ValueError: несамосопряжённый вход, неизвестный метод, размер больше dense_cap
        ChebyshevDegreeError: степень превысила предел без достижения цели
    """
    if method not in METHODS:
        raise ValueError(f"apply_filter: неизвестный метод {method!r}, ожидается {METHODS}")
    _check_self_adjoint(d)
    if d.shape[0] > dense_cap:
        raise ValueError(f"apply_filter: размер {d.shape[0]} превышает порог {dense_cap}")
    source = operator_id(d)

    if method == "eigen":
        dense = d.to_dense()
        dense = 0.5 * (dense + dense.conj().T)
        values, vectors = (cache or EigenCache()).eigh(dense)
        result = (vectors * f(values)) @ vectors.conj().T
        op = FinitePropOperator(d.lattice, d.rank, result)
        return KernelMatrix(op, source, "eigen")

    a = spectral_enclosure(d, inflation)
    if degree is None:
        coeffs, degree, residual = adaptive_coefficients(f, a, target, degree_cap)
    else:
        degree = int(degree)
        coeffs = chebyshev_coefficients(f, a, max(MIN_NODES, NODES_PER_DEGREE * (degree + 1)))
        residual = float(np.sum(np.abs(coeffs[degree + 1:])))
    result = _chebyshev_series(d, coeffs, degree, a)
    logging.info(f"Чебышёв: a = {a:.4f}, степень {degree}, остаток {residual:.2e}")
    op = FinitePropOperator(d.lattice, d.rank, result)
    return KernelMatrix(op, source, f"chebyshev{{{degree}}}", degree, residual)


def kernel_block(op, x: int, y: int) -> np.ndarray:
    """
    Блок k(x, y) (нулевой, если не хранится).

    Raises:
        ValueError: узел вне решётки
    """
    if isinstance(op, KernelMatrix):
        op = op.operator
    n = op.lattice.n_sites
    if not (0 <= x < n and 0 <= y < n):
        raise ValueError(f"kernel_block: узел ({x}, {y}) вне решётки из {n} узлов")
    r = op.rank
    block = op.matrix[x * r:(x + 1) * r, y * r:(y + 1) * r]
    return block.toarray() if sp.issparse(block) else np.array(block)


@dataclass
class QuasiLocalityProfile:
    radii: List[float]
    values: List[float]
    note: str = "ℓ²-хвост строки ядра (суррогат оценок между пространствами Соболева)"

    def as_pairs(self) -> List[Tuple[float, float]]:
        return list(zip(self.radii, self.values))


def _site_weights(op: FinitePropOperator) -> np.ndarray:
    """B[x, y] = Σ |k(x, y)_{ab}|²."""
    n, r = op.lattice.n_sites, op.rank
    dense = op.to_dense()
    return (np.abs(dense) ** 2).reshape(n, r, n, r).sum(axis=(1, 3))


def quasilocality_profile(op, radii: Sequence[float]) -> QuasiLocalityProfile:
    """
    μ(R) = max_x ‖строка x, ограниченная на d(·, x) > R‖.

    Raises:
        ValueError: радиусы не возрастают строго
    """
    if isinstance(op, KernelMatrix):
        op = op.operator
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii[:-1], radii[1:])):
        raise ValueError("quasilocality_profile: радиусы должны строго возрастать")
    weights = _site_weights(op)
    distances = op.lattice.distance_matrix
    values = []
    for radius in radii:
        tail = np.where(distances > radius, weights, 0.0).sum(axis=1)
        values.append(float(np.sqrt(tail.max())))
    return QuasiLocalityProfile(radii, values)


def kernel_width(op, threshold: float = 1e-6) -> float:
    """Наименьший целый R (в шагах решётки) с μ(R) < threshold."""
    if isinstance(op, KernelMatrix):
        op = op.operator
    lattice = op.lattice
    max_radius = float(lattice.distance_matrix.max())
    steps = np.arange(0.0, max_radius + lattice.spacing, lattice.spacing)
    profile = quasilocality_profile(op, steps)
    for radius, value in profile.as_pairs():
        if value < threshold:
            return radius
    return max_radius
