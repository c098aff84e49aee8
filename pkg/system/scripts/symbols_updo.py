#!/usr/bin/env python3
"""
Символы и равномерные ПДО на решётке.

Режимы частот:
- toroidal: ξ на сетке зоны Бриллюэна (2πk/N) - для сборки операторов;
- asymptotic: ξ на усечённой сетке в ℝ^d до Ξ_max - для оценок символа и эллиптичности;
- sphere: ξ на единичной сфере - для расщепления и склейки.

Квантование Кона–Ниренберга: Op(p)_{xy} = (1/N^d) Σ_ξ e^{i(x−y)·ξ} p(x, ξ).
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.fft import ifftn

from lattice_geometry import ColoredCover, Lattice, PartitionOfUnity
from operator_algebra import FinitePropOperator

REGIMES = ("toroidal", "asymptotic", "sphere")
SINGULAR_TOL = 1e-10
STABILITY_TOL = 0.05
MAX_ORDER = 3


@dataclass(frozen=True, eq=False)
class SymbolField:
    """Матричный символ p_i(x, ξ) по элементам покрытия.

    samples[i] имеет форму (#узлов элемента i, #частот, r, r).
    """
    lattice: Lattice
    regime: str
    order: float
    frequencies: np.ndarray              # (#частот, d)
    patch_sites: Tuple[np.ndarray, ...]
    samples: Tuple[np.ndarray, ...]
    grid_shape: Tuple[int, ...] = ()
    grid_step: float = 1.0

    @property
    def rank(self) -> int:
        return int(self.samples[0].shape[-1])

    def patch_agreement(self) -> float:
        """max расхождения символов соседних элементов на общих узлах."""
        worst = 0.0
        for (i, a), (j, b) in itertools.combinations(enumerate(self.patch_sites), 2):
            shared, ia, jb = np.intersect1d(a, b, return_indices=True)
            if shared.size:
                diff = np.abs(self.samples[i][ia] - self.samples[j][jb])
                worst = max(worst, float(diff.max()))
        return worst

    def adjoint(self) -> "SymbolField":
        return SymbolField(self.lattice, self.regime, self.order, self.frequencies, self.patch_sites,
                           tuple(s.conj().swapaxes(-1, -2) for s in self.samples),
                           self.grid_shape, self.grid_step)


def _frequency_grid(lattice: Lattice, regime: str, xi_max: float, xi_step: float, directions: int):
    d = lattice.dimension
    if regime == "toroidal":
        axes = [2.0 * np.pi * np.arange(n) / n for n in lattice.extent]
        grid = np.array(list(itertools.product(*axes)))
        return grid, tuple(lattice.extent), 2.0 * np.pi / lattice.extent[0]
    if regime == "asymptotic":
        count = int(round(xi_max / xi_step))
        axis = xi_step * np.arange(-count, count + 1)
        grid = np.array(list(itertools.product(*([axis] * d))))
        return grid, (axis.size,) * d, xi_step
    if d == 1:
        return np.array([[-1.0], [1.0]]), (2,), 2.0
    theta = 2.0 * np.pi * np.arange(directions) / directions
    return np.stack([np.cos(theta), np.sin(theta)], axis=1), (directions,), 2.0 * np.pi / directions


def sample_symbol(func: Callable, lattice: Lattice, regime: str = "asymptotic", order: float = 0.0,
                  cover: Optional[ColoredCover] = None, xi_max: float = 64.0, xi_step: float = 0.25,
                  directions: int = 64) -> SymbolField:
    """
    Выборка символа func(x, ξ) по элементам покрытия.

    func получает x формы (n, 1, d) и ξ формы (1, m, d) и возвращает (n, m) или (n, m, r, r).

    Raises:
        ValueError: неизвестный режим
    """
    if regime not in REGIMES:
        raise ValueError(f"sample_symbol: неизвестный режим {regime!r}, ожидается {REGIMES}")
    freqs, grid_shape, step = _frequency_grid(lattice, regime, xi_max, xi_step, directions)
    x = lattice.coords[:, None, :].astype(float)
    raw = np.asarray(func(x, freqs[None, :, :]), dtype=complex)
    if raw.ndim <= 2:
        raw = np.broadcast_to(raw, (lattice.n_sites, freqs.shape[0]))[..., None, None]
    else:
        raw = np.broadcast_to(raw, (lattice.n_sites, freqs.shape[0]) + raw.shape[-2:])
    patches = cover.members if cover is not None else (np.arange(lattice.n_sites),)
    samples = tuple(np.array(raw[p]) for p in patches)
    return SymbolField(lattice, regime, float(order), freqs, tuple(patches), samples, grid_shape, step)


# ---------------------------------------------------------------------------
# Сборка
# ---------------------------------------------------------------------------

def _kohn_nirenberg_rows(symbol: SymbolField, patch: int, rows: np.ndarray) -> np.ndarray:
    """Строки ядра Op(p_i) для узлов rows ⊂ элемента patch: форма (len(rows), n, r, r)."""
    lat = symbol.lattice
    r = symbol.rank
    local = {int(s): k for k, s in enumerate(symbol.patch_sites[patch])}
    values = symbol.samples[patch][[local[int(x)] for x in rows]]
    values = values.reshape((len(rows),) + symbol.grid_shape + (r, r))
    spatial_axes = tuple(range(1, 1 + lat.dimension))
    kernel = ifftn(values, axes=spatial_axes)                      # индекс j = x − y (mod N)
    offsets = (lat.coords[rows][:, None, :] - lat.coords[None, :, :]) % np.asarray(lat.extent)
    index = (np.arange(len(rows))[:, None],) + tuple(offsets[..., mu] for mu in range(lat.dimension))
    return kernel[index]


def assemble_updo(symbol: SymbolField, cover: ColoredCover, pou: PartitionOfUnity) -> FinitePropOperator:
    """
    P = Σ_i ρ(φ_i)·Op_i(p_i)·χ_i (P_{−∞} = 0).

    Raises:
        ValueError: режим не toroidal, решётка не периодическая, несогласованные покрытие и символ
    """
    if symbol.regime != "toroidal":
        raise ValueError(f"assemble_updo: нужен toroidal символ, получен {symbol.regime}")
    lat = symbol.lattice
    if not lat.periodic:
        raise ValueError("assemble_updo: квантование на зоне Бриллюэна требует тора или окружности")
    if cover.lattice is not lat or pou.cover is not cover:
        raise ValueError("assemble_updo: символ, покрытие и разбиение единицы не согласованы")
    if len(symbol.patch_sites) != len(cover.members):
        raise ValueError("assemble_updo: число элементов символа не совпадает с покрытием")

    n, r = lat.n_sites, symbol.rank
    total = np.zeros((n, n, r, r), dtype=complex)
    for i, member in enumerate(cover.members):
        rows = np.nonzero(pou.weights[i] > 0)[0]
        if rows.size == 0:
            continue
        block = _kohn_nirenberg_rows(symbol, i, rows)
        chi = np.zeros(n)
        chi[member] = 1.0
        total[rows] += pou.weights[i][rows][:, None, None, None] * block * chi[None, :, None, None]
    matrix = total.transpose(0, 2, 1, 3).reshape(n * r, n * r)
    logging.info(f"Сборка ПДО: {len(cover.members)} элементов, ранг {r}")
    return FinitePropOperator(lat, r, matrix)


def global_multiplier(symbol: SymbolField) -> FinitePropOperator:
    """Точный глобальный оператор Op(p) по символу первого элемента (для x-независимых p)."""
    lat = symbol.lattice
    rows = np.arange(lat.n_sites)
    single = SymbolField(lat, symbol.regime, symbol.order, symbol.frequencies, (rows,),
                         (np.broadcast_to(symbol.samples[0][:1], (lat.n_sites,) + symbol.samples[0].shape[1:]),),
                         symbol.grid_shape, symbol.grid_step)
    block = _kohn_nirenberg_rows(single, 0, rows)
    n, r = lat.n_sites, symbol.rank
    return FinitePropOperator(lat, r, block.transpose(0, 2, 1, 3).reshape(n * r, n * r))


# ---------------------------------------------------------------------------
# Оценки символа и эллиптичность
# ---------------------------------------------------------------------------

def _central_difference(values: np.ndarray, axis: int, step: float) -> np.ndarray:
    """Центральная разность с шагом в одну клетку; края отрезаются."""
    n = values.shape[axis]
    upper = np.take(values, np.arange(2, n), axis=axis)
    lower = np.take(values, np.arange(0, n - 2), axis=axis)
    return (upper - lower) / (2.0 * step)


def _x_difference(values: np.ndarray, lattice: Lattice, sites: np.ndarray, mu: int):
    """Центральная разность по x внутри элемента; возвращает (значения, узлы)."""
    local = -np.ones(lattice.n_sites, dtype=int)
    local[sites] = np.arange(sites.size)
    fwd = lattice.forward[mu][sites]
    bwd = lattice.backward[mu][sites]
    ok = (fwd >= 0) & (bwd >= 0)
    ok[ok] &= (local[fwd[ok]] >= 0) & (local[bwd[ok]] >= 0)
    keep = np.nonzero(ok)[0]
    diff = (values[local[fwd[keep]]] - values[local[bwd[keep]]]) / (2.0 * lattice.spacing)
    return diff, sites[keep]


def _matrix_norms(values: np.ndarray) -> np.ndarray:
    if values.shape[-1] == 1:
        return np.abs(values[..., 0, 0])
    return np.linalg.norm(values, ord=2, axis=(-2, -1))


def _multi_indices(dimension: int, max_order: int):
    return [idx for idx in itertools.product(range(max_order + 1), repeat=dimension)
            if sum(idx) <= max_order]


def _estimate_table(symbol: SymbolField, k: float, max_alpha: int, max_beta: int,
                    xi_limit: float) -> Dict[Tuple, float]:
    lat = symbol.lattice
    d = lat.dimension
    shape = symbol.grid_shape
    axis_values = [symbol.grid_step * (np.arange(n) - n // 2) for n in shape]
    table = {}
    for alpha in _multi_indices(d, max_alpha):
        for beta in _multi_indices(d, max_beta):
            best = 0.0
            for sites, samples in zip(symbol.patch_sites, symbol.samples):
                values = samples.reshape((sites.size,) + shape + samples.shape[-2:])
                current_sites = sites
                for mu, count in enumerate(alpha):
                    for _ in range(count):
                        values, current_sites = _x_difference(values, lat, current_sites, mu)
                if current_sites.size == 0:
                    continue
                axes = [a.copy() for a in axis_values]
                for mu, count in enumerate(beta):
                    for _ in range(count):
                        values = _central_difference(values, 1 + mu, symbol.grid_step)
                        axes[mu] = axes[mu][1:-1]
                if values.size == 0:
                    continue
                mesh = np.meshgrid(*axes, indexing='ij')
                xi_norm = np.sqrt(sum(m ** 2 for m in mesh))
                inside = np.all([np.abs(m) <= xi_limit + 1e-12 for m in mesh], axis=0)
                weight = (1.0 + xi_norm) ** (k - sum(beta))
                ratio = _matrix_norms(values) / weight[None]
                ratio = np.where(inside[None], ratio, 0.0)
                best = max(best, float(ratio.max()))
            table[(alpha, beta)] = best
    return table


@dataclass
class SymbolEstimate:
    constants: Dict[Tuple, float]
    half_grid_constants: Dict[Tuple, float]
    stable: bool
    growth: Dict[Tuple, float] = field(default_factory=dict)

    def constant(self, alpha, beta) -> float:
        alpha = (alpha,) if isinstance(alpha, int) else tuple(alpha)
        beta = (beta,) if isinstance(beta, int) else tuple(beta)
        return self.constants[(alpha, beta)]


def symbol_estimate(symbol: SymbolField, k: float, max_alpha: int = 1, max_beta: int = 1) -> SymbolEstimate:
    """
    C^{αβ} = max ‖Δ^α_x Δ^β_ξ p‖ / (1 + |ξ|)^{k − |β|} по элементам, узлам и частотам.

    Сравнивает с константами на половинной сетке |ξ| ≤ Ξ_max/2; рост > 5% - нестабильность.
    """
    if symbol.regime != "asymptotic":
        raise ValueError(f"symbol_estimate: нужен asymptotic символ, получен {symbol.regime}")
    if max_alpha > MAX_ORDER or max_beta > MAX_ORDER:
        raise ValueError(f"symbol_estimate: порядки производных ограничены {MAX_ORDER}")
    xi_max = symbol.grid_step * (symbol.grid_shape[0] // 2)
    full = _estimate_table(symbol, k, max_alpha, max_beta, xi_max)
    half = _estimate_table(symbol, k, max_alpha, max_beta, xi_max / 2.0)
    growth = {key: (full[key] - half[key]) / half[key] if half[key] > 0 else 0.0 for key in full}
    stable = all(g <= STABILITY_TOL for g in growth.values())
    if not stable:
        logging.warning(f"symbol_estimate: константы растут при удвоении Ξ_max: {growth}")
    return SymbolEstimate(full, half, stable, growth)


@dataclass
class EllipticityResult:
    elliptic: bool
    constant: float
    witness: Optional[Dict] = None


def ellipticity_check(symbol: SymbolField, k: float, radius: float) -> EllipticityResult:
    """
    Обратимость p(x, ξ) при |ξ| > R и C = sup ‖p⁻¹‖·(1 + |ξ|)^k.

    Свидетель - точка с σ_min < 1e−10 или смена знака det между соседними узлами сетки.
    """
    if symbol.regime != "asymptotic":
        raise ValueError(f"ellipticity_check: нужен asymptotic символ, получен {symbol.regime}")
    xi_max = symbol.grid_step * (symbol.grid_shape[0] // 2)
    if radius >= xi_max / 2:
        raise ValueError(f"ellipticity_check: R = {radius} должно быть < Ξ_max/2 = {xi_max / 2}")

    xi_norm = np.linalg.norm(symbol.frequencies, axis=1)
    outside = xi_norm > radius
    constant = 0.0
    for patch, (sites, samples) in enumerate(zip(symbol.patch_sites, symbol.samples)):
        sv = np.linalg.svd(samples, compute_uv=False)
        smallest = sv[..., -1]
        bad = (smallest < SINGULAR_TOL) & outside[None, :]
        if np.any(bad):
            s, f = np.argwhere(bad)[0]
            witness = {'patch': patch, 'site': int(sites[s]), 'xi': symbol.frequencies[f].tolist(),
                       'reason': 'sigma_min'}
            return EllipticityResult(False, float('inf'), witness)

        if symbol.lattice.dimension == 1:
            det = np.linalg.det(samples)
            real = np.abs(det.imag) <= 1e-12 * np.maximum(1.0, np.abs(det.real))
            both = outside[:-1] & outside[1:]
            flips = (np.sign(det.real[:, :-1]) * np.sign(det.real[:, 1:]) < 0) \
                & real[:, :-1] & real[:, 1:] & both[None, :]
            if np.any(flips):
                s, f = np.argwhere(flips)[0]
                witness = {'patch': patch, 'site': int(sites[s]),
                           'xi': [float(symbol.frequencies[f][0]), float(symbol.frequencies[f + 1][0])],
                           'reason': 'det_sign_change'}
                return EllipticityResult(False, float('inf'), witness)

        weight = (1.0 + xi_norm) ** k
        inverse_norm = 1.0 / smallest
        constant = max(constant, float(np.max(np.where(outside[None, :], inverse_norm * weight[None, :], 0.0))))
    return EllipticityResult(True, constant)


# ---------------------------------------------------------------------------
# Сфера: расщепление и склейка
# ---------------------------------------------------------------------------

@dataclass
class SplittingResult:
    rank_plus: np.ndarray        # (#выборок узлов, #направлений)
    rank_minus: np.ndarray
    projectors: np.ndarray       # P₊ по слоям
    constant_on_components: bool


def symbol_splitting(symbol: SymbolField, tol: float = 1e-8) -> SplittingResult:
    """
    Спектральные проекторы E⁺/E⁻ эрмитова символа на сфере.

    Raises:
        ValueError: не сферический режим, неэрмитов слой или собственное значение в пределах tol от 0
    """
    if symbol.regime != "sphere":
        raise ValueError(f"symbol_splitting: нужен sphere символ, получен {symbol.regime}")
    stacked = np.concatenate(symbol.samples, axis=0)
    sites = np.concatenate(symbol.patch_sites)
    if np.max(np.abs(stacked - stacked.conj().swapaxes(-1, -2))) > 1e-12:
        raise ValueError("symbol_splitting: слои символа не эрмитовы")
    values, vectors = np.linalg.eigh(stacked)
    near = np.abs(values) < tol
    if np.any(near):
        s, f, _ = np.argwhere(near)[0]
        raise ValueError(
            f"symbol_splitting: собственное значение {values[s, f][near[s, f]][0]:.2e} у нуля "
            f"в слое (узел {int(sites[s])}, ξ = {symbol.frequencies[f].tolist()})"
        )
    positive = values > 0
    rank_plus = positive.sum(axis=-1)
    rank_minus = (~positive).sum(axis=-1)
    projectors = np.einsum('sfij,sfj,sfkj->sfik', vectors, positive.astype(float), vectors.conj())

    # В размерности 1 сфера - две точки (две компоненты), иначе связна
    if symbol.lattice.dimension == 1:
        constant = all(np.all(rank_plus[:, f] == rank_plus[0, f]) for f in range(rank_plus.shape[1]))
    else:
        constant = bool(np.all(rank_plus == rank_plus.flat[0]))
    return SplittingResult(rank_plus, rank_minus, projectors, bool(constant))


def clutching_degree(symbol: SymbolField) -> int:
    """
    Степень склейки: намотка det σ(ξ) по единичной окружности (d = 2).

    Raises:
        ValueError: не сферический двумерный символ, det обращается в ноль или намотка зависит от узла
    """
    if symbol.regime != "sphere" or symbol.lattice.dimension != 2:
        raise ValueError("clutching_degree: нужен sphere символ на двумерной решётке")
    stacked = np.concatenate(symbol.samples, axis=0)
    det = np.linalg.det(stacked)
    if np.min(np.abs(det)) < SINGULAR_TOL:
        raise ValueError("clutching_degree: det σ обращается в ноль на сфере")
    steps = np.angle(np.roll(det, -1, axis=1) / det)
    windings = np.rint(steps.sum(axis=1) / (2.0 * np.pi)).astype(int)
    if np.any(windings != windings[0]):
        raise ValueError("clutching_degree: намотка различается по узлам")
    return int(windings[0])
