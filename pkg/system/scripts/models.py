#!/usr/bin/env python3
"""
Модельные операторы верстака.

- GaugeBundle: калибровочные расслоения (унитарные переносы по рёбрам), калибровка Ландау
- GradedOperator: магнитный решёточный оператор Дирака (односторонний или overlap/Wilson)
- FredholmModule: модули Фредгольма (модуль Харди на окружности, случайные модули)
- toeplitz_index, index_oracle: SVD-оракулы индекса

Порядок индексов в слое: (узел, слой расслоения, спин).
Перенос действует обратным образом: (T_mu ψ)(x) = U(x→x+mu)^† ψ(x+mu).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import scipy.sparse as sp
from scipy.stats import unitary_group

from lattice_geometry import Lattice, build_lattice
from operator_algebra import FinitePropOperator

KERNEL_THRESHOLD = 1e-10
SIGN_GAP_GUARD = 1e-8
STENCILS = ("one_sided", "wilson")

# Спиновые матричные единицы: E10 переводит спин 0 в спин 1
E10 = sp.csr_matrix(np.array([[0, 0], [1, 0]], dtype=complex))
E01 = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))
SIGMA_Z = sp.csr_matrix(np.diag([1.0, -1.0]).astype(complex))


# ---------------------------------------------------------------------------
# Калибровочные расслоения
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaugeBundle:
    """Расслоение ранга n: перенос U(x→x+mu) на каждом прямом ребре.

    Обратное ребро несёт U^†; на отсутствующих рёбрах окна хранится единица.
    """
    lattice: Lattice
    rank: int
    links: np.ndarray                      # (d, n_sites, rank, rank)
    descriptor: Dict = field(default_factory=dict)

    def transport(self, mu: int, site: int) -> np.ndarray:
        return self.links[mu, site]

    def unitarity_defect(self) -> float:
        eye = np.eye(self.rank)
        prod = np.einsum('dnij,dnkj->dnik', self.links, self.links.conj())
        return float(np.max(np.abs(prod - eye)))

    def transport_operator(self, mu: int) -> sp.csr_matrix:
        """Разреженный T_mu на сечениях (узел, слой); на краю окна строки нулевые."""
        lat = self.lattice
        target = lat.forward[mu]
        rows = np.nonzero(target >= 0)[0]
        n, r = lat.n_sites, self.rank
        blocks = self.links[mu, rows].conj().transpose(0, 2, 1)
        a, b = np.meshgrid(np.arange(r), np.arange(r), indexing='ij')
        row_idx = (rows[:, None, None] * r + a).ravel()
        col_idx = (target[rows][:, None, None] * r + b).ravel()
        return sp.coo_matrix((blocks.ravel(), (row_idx, col_idx)), shape=(n * r, n * r)).tocsr()

    @property
    def flux_quanta(self) -> Optional[int]:
        return self.descriptor.get('quanta')


def trivial_bundle(lattice: Lattice, rank: int = 1) -> GaugeBundle:
    links = np.broadcast_to(np.eye(rank, dtype=complex),
                            (lattice.dimension, lattice.n_sites, rank, rank)).copy()
    return GaugeBundle(lattice, rank, links, {'type': 'trivial', 'rank': rank, 'flux': 0.0, 'quanta': 0})


def uniform_flux_bundle(lattice: Lattice, flux: Optional[float] = None,
                        quanta: Optional[int] = None) -> GaugeBundle:
    """
    Линейное расслоение с однородным потоком φ на плакету (калибровка Ландау).

    U_y(x, y) = e^{iφx}; на торе шов x = N_x−1 → 0 несёт U_x = e^{−iφ N_x y}.

    Args:
        flux: поток на плакету (радианы)
        quanta: число квантов потока на торе, φ = 2π·quanta / (N_x N_y)

    Raises:
        ValueError: неквантованный поток на торе или неподходящая решётка
    """
    if lattice.dimension != 2:
        raise ValueError("uniform_flux_bundle: нужна двумерная решётка")
    nx_, ny_ = lattice.extent
    if quanta is not None:
        flux = 2.0 * np.pi * quanta / (nx_ * ny_)
    if flux is None:
        raise ValueError("uniform_flux_bundle: нужно задать flux или quanta")
    flux = float(flux)

    if lattice.kind == "torus":
        total = flux * nx_ * ny_ / (2.0 * np.pi)
        if abs(total - round(total)) > 1e-9:
            raise ValueError(
                f"uniform_flux_bundle: поток φ·N² = 2π·{total:.6g} не квантован на торе"
            )
        quanta = int(round(total))
    elif lattice.kind != "plane-window":
        raise ValueError(f"uniform_flux_bundle: неподдерживаемая решётка {lattice.kind}")

    x = lattice.coords[:, 0].astype(float)
    y = lattice.coords[:, 1].astype(float)
    phase_x = np.zeros(lattice.n_sites)
    if lattice.kind == "torus":
        seam = lattice.coords[:, 0] == nx_ - 1
        phase_x[seam] = -flux * nx_ * y[seam]
    phase_y = flux * x

    links = np.empty((2, lattice.n_sites, 1, 1), dtype=complex)
    links[0, :, 0, 0] = np.exp(1j * phase_x)
    links[1, :, 0, 0] = np.exp(1j * phase_y)
    descriptor = {'type': 'uniform_flux', 'rank': 1, 'flux': flux, 'quanta': quanta}
    return GaugeBundle(lattice, 1, links, descriptor)


def direct_sum(e: GaugeBundle, f: GaugeBundle) -> GaugeBundle:
    """E ⊕ F: блочно-диагональные переносы."""
    if e.lattice is not f.lattice:
        raise ValueError("direct_sum: расслоения на разных решётках")
    r = e.rank + f.rank
    links = np.zeros(e.links.shape[:2] + (r, r), dtype=complex)
    links[..., :e.rank, :e.rank] = e.links
    links[..., e.rank:, e.rank:] = f.links
    return GaugeBundle(e.lattice, r, links,
                       {'type': 'direct_sum', 'rank': r, 'parts': [e.descriptor, f.descriptor]})


def tensor_product(e: GaugeBundle, f: GaugeBundle) -> GaugeBundle:
    """E ⊗ F: кронекерово произведение переносов."""
    if e.lattice is not f.lattice:
        raise ValueError("tensor_product: расслоения на разных решётках")
    r = e.rank * f.rank
    links = np.einsum('dnij,dnkl->dnikjl', e.links, f.links).reshape(e.links.shape[:2] + (r, r))
    return GaugeBundle(e.lattice, r, links,
                       {'type': 'tensor', 'rank': r, 'parts': [e.descriptor, f.descriptor]})


def gauge_transform(bundle: GaugeBundle, g: np.ndarray) -> GaugeBundle:
    """U'(x→x+mu) = g(x+mu) U g(x)^†, g: (n_sites, rank, rank) унитарные."""
    lat = bundle.lattice
    links = bundle.links.copy()
    for mu in range(lat.dimension):
        target = np.where(lat.forward[mu] >= 0, lat.forward[mu], np.arange(lat.n_sites))
        links[mu] = g[target] @ bundle.links[mu] @ g.conj().transpose(0, 2, 1)
    return GaugeBundle(lat, bundle.rank, links, dict(bundle.descriptor, gauge='transformed'))


# ---------------------------------------------------------------------------
# Градуированные операторы
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GradedOperator:
    """Самосопряжённый нечётный оператор с градуировкой.

    operator - самосопряжённая модель (D или H = ε·D_ov); grading - вес супершпура
    (ε для одностороннего шаблона, Γ = ε(1 − D_ov/2) для overlap); chirality - ε.
    """
    operator: FinitePropOperator
    grading: FinitePropOperator
    chirality: FinitePropOperator
    bundle: GaugeBundle
    stencil: str
    chiral_block: sp.csr_matrix            # A: спин 0 → спин 1
    local_operator: FinitePropOperator      # D (односторонний) или D_W (Wilson)
    overlap: Optional[np.ndarray] = None
    params: Dict = field(default_factory=dict)

    @property
    def lattice(self) -> Lattice:
        return self.operator.lattice

    def self_adjointness_defect(self) -> float:
        m = self.operator.matrix
        diff = m - m.conj().T
        return float(np.max(np.abs(diff.toarray() if sp.issparse(diff) else diff), initial=0.0))

    def odd_defect(self) -> float:
        """max |Γ·D + D·Γ|."""
        anti = self.grading @ self.operator + self.operator @ self.grading
        dense = anti.to_dense()
        return float(np.max(np.abs(dense), initial=0.0))


def _chiral_assembly(a: sp.spmatrix, b: sp.spmatrix) -> sp.csr_matrix:
    """[[0, b], [a, 0]] в спиновых блоках при порядке (узел, слой, спин)."""
    return (sp.kron(a, E10) + sp.kron(b, E01)).tocsr()


def _matrix_sign(h: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(h)
    if np.min(np.abs(vals)) < SIGN_GAP_GUARD:
        raise ValueError(
            f"Знак H_W не определён: собственное значение {np.min(np.abs(vals)):.2e} у нуля"
        )
    return (vecs * np.sign(vals)) @ vecs.conj().T


def magnetic_dirac(lattice: Lattice, flux: Optional[float] = None, quanta: Optional[int] = None,
                   stencil: str = "wilson", mass: float = 1.0, wilson_r: float = 1.0,
                   bundle: Optional[GaugeBundle] = None) -> GradedOperator:
    """
    Магнитный оператор Дирака на торе или окне плоскости.

    one_sided: A = δ_x + iδ_y, δ_mu = T_mu − 1; D = [[0, A*], [A, 0]].
    wilson: K = i·[[0, A_s*], [A_s, 0]] с ∇_mu = (T_mu − T_mu^†)/2,
    D_W = K + (r/2)·Σ(2 − T − T^†), D_ov = 1 + ε·sign(ε(D_W − m)),
    модель H = ε·D_ov, вес супершпура Γ = ε(1 − D_ov/2).

    Args:
        lattice: torus или plane-window (d = 2)
        flux / quanta: однородный поток (игнорируются, если задан bundle)
        stencil: 'one_sided' | 'wilson'
        bundle: готовое расслоение (для скручиваний)

    Raises:
        ValueError: неквантованный поток, неверный шаблон или решётка
    """
    if stencil not in STENCILS:
        raise ValueError(f"magnetic_dirac: неизвестный шаблон {stencil!r}, ожидается {STENCILS}")
    if lattice.kind not in ("torus", "plane-window") or lattice.dimension != 2:
        raise ValueError(f"magnetic_dirac: нужна двумерная torus/plane-window, получено {lattice.kind}")
    if bundle is None:
        if flux is None and quanta is None:
            bundle = trivial_bundle(lattice)
        else:
            bundle = uniform_flux_bundle(lattice, flux=flux, quanta=quanta)
    elif bundle.lattice is not lattice:
        raise ValueError("magnetic_dirac: расслоение задано на другой решётке")

    r = bundle.rank
    dim = lattice.n_sites * r
    eye = sp.identity(dim, dtype=complex, format='csr')
    tx, ty = bundle.transport_operator(0), bundle.transport_operator(1)
    chirality = FinitePropOperator(lattice, 2 * r, sp.kron(sp.identity(dim), SIGMA_Z, format='csr'))
    params = {'stencil': stencil, 'mass': mass, 'wilson_r': wilson_r}

    if stencil == "one_sided":
        a = ((tx - eye) + 1j * (ty - eye)).tocsr()
        d = FinitePropOperator(lattice, 2 * r, _chiral_assembly(a, a.conj().T))
        logging.info(f"Дирак (односторонний): {2 * dim} степеней свободы")
        return GradedOperator(d, chirality, chirality, bundle, stencil, a, d, None, params)

    a_s = (0.5 * (tx - tx.conj().T) + 0.5j * (ty - ty.conj().T)).tocsr()
    kinetic = 1j * _chiral_assembly(a_s, a_s.conj().T)
    laplace = (4 * eye - tx - tx.conj().T - ty - ty.conj().T)
    d_w = (kinetic + 0.5 * wilson_r * sp.kron(laplace, sp.identity(2))).tocsr()
    # ε диагональна: умножение слева на ε - масштабирование строк
    eps = np.tile(np.array([1.0, -1.0]), dim)

    h_w = eps[:, None] * (d_w.toarray() - mass * np.eye(2 * dim))
    h_w = 0.5 * (h_w + h_w.conj().T)
    sign_h = _matrix_sign(h_w)
    del h_w
    overlap = eps[:, None] * sign_h
    overlap[np.diag_indices_from(overlap)] += 1.0
    h = sign_h.copy()
    h[np.diag_indices_from(h)] += eps
    gamma = -0.5 * sign_h
    gamma[np.diag_indices_from(gamma)] += 0.5 * eps

    model = FinitePropOperator(lattice, 2 * r, 0.5 * (h + h.conj().T))
    grading = FinitePropOperator(lattice, 2 * r, 0.5 * (gamma + gamma.conj().T))
    local = FinitePropOperator(lattice, 2 * r, d_w)
    logging.info(f"Дирак (overlap, m={mass}, r={wilson_r}): {2 * dim} степеней свободы")
    return GradedOperator(model, grading, chirality, bundle, stencil, a_s, local, overlap, params)


def twist_by_bundle(d: GradedOperator, e: GaugeBundle) -> GradedOperator:
    """
    Скручивание D_E: каждый блок ребра умножается на перенос E (тензорно для ранга > 1).

    Raises:
        ValueError: расслоения на разных решётках
    """
    if e.lattice is not d.lattice:
        raise ValueError("twist_by_bundle: расслоение задано на другой решётке")
    twisted = tensor_product(d.bundle, e)
    return magnetic_dirac(d.lattice, stencil=d.stencil, mass=d.params['mass'],
                          wilson_r=d.params['wilson_r'], bundle=twisted)


def _kernel_basis(matrix: np.ndarray, threshold: float) -> np.ndarray:
    _, s, vh = np.linalg.svd(matrix)
    return vh[s < threshold].conj().T


def kernel_dimension(matrix, threshold: float = KERNEL_THRESHOLD) -> int:
    dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
    s = np.linalg.svd(dense, compute_uv=False)
    return int(np.count_nonzero(s < threshold))


def index_oracle(d: GradedOperator, threshold: float = KERNEL_THRESHOLD) -> int:
    """
    SVD-оракул индекса.

    one_sided: dim ker A − dim ker A*; wilson: n₊ − n₋ хиральностей на ker D_ov.
    """
    if d.stencil == "one_sided":
        a = d.chiral_block
        return kernel_dimension(a, threshold) - kernel_dimension(a.conj().T, threshold)
    v0 = _kernel_basis(d.overlap, threshold)
    if v0.shape[1] == 0:
        return 0
    eps = d.chirality.matrix.diagonal()
    return int(round(float(np.einsum("ik,i,ik->", v0.conj(), eps, v0).real)))


# ---------------------------------------------------------------------------
# Модули Фредгольма
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FredholmModule:
    lattice: Lattice
    rank: int
    operator: FinitePropOperator
    grading: Optional[FinitePropOperator] = None
    involutive: bool = True

    @property
    def multidegree(self) -> int:
        return 0 if self.grading is not None else -1

    def involution_defects(self):
        f = self.operator.to_dense()
        square = np.max(np.abs(f @ f - np.eye(f.shape[0])))
        hermitian = np.max(np.abs(f - f.conj().T))
        return float(square), float(hermitian)

    def check(self):
        """Проверить ‖F² − 1‖ ≤ 1e−10 и ‖F − F*‖ ≤ 1e−12 для инволютивного модуля."""
        if not self.involutive:
            raise ValueError("Модуль Фредгольма не помечен как инволютивный")
        square, hermitian = self.involution_defects()
        if square > 1e-10 or hermitian > 1e-12:
            raise ValueError(
                f"Модуль не инволютивен: ‖F²−1‖ = {square:.2e}, ‖F−F*‖ = {hermitian:.2e}"
            )

    def represent(self, f: np.ndarray) -> np.ndarray:
        """Плотная матрица ρ(f)."""
        return np.diag(np.repeat(np.asarray(f, dtype=complex), self.rank))


def fredholm_module(lattice: Lattice, operator: np.ndarray, grading: Optional[np.ndarray] = None,
                    rank: int = 1, involutive: bool = True) -> FredholmModule:
    op = FinitePropOperator(lattice, rank, np.asarray(operator, dtype=complex))
    grad = None if grading is None else FinitePropOperator(lattice, rank, np.asarray(grading, dtype=complex))
    return FredholmModule(lattice, rank, op, grad, involutive)


def fourier_matrix(n: int) -> np.ndarray:
    """Φ[x, k] = e^{2πikx/N}/√N."""
    x = np.arange(n)
    return np.exp(2j * np.pi * np.outer(x, x) / n) / np.sqrt(n)


def hardy_module(lattice: Lattice) -> FredholmModule:
    """
    Модуль Харди: P - проектор на моды 0..N/2−1, F = 2P − 1.

    Raises:
        ValueError: не окружность или N < 8
    """
    if lattice.kind != "circle":
        raise ValueError(f"hardy_module: нужна окружность, получено {lattice.kind}")
    n = lattice.extent[0]
    if n < 8:
        raise ValueError(f"hardy_module: нужно N ≥ 8, получено {n}")
    phi = fourier_matrix(n)
    mask = np.zeros(n)
    mask[: n // 2] = 1.0
    projection = (phi * mask) @ phi.conj().T
    f = 2.0 * projection - np.eye(n)
    return fredholm_module(lattice, 0.5 * (f + f.conj().T))


def hardy_trace_window(lattice: Lattice) -> np.ndarray:
    """Проектор на моды с центрированной частотой в [−N/4, N/4).

    Отсекает второй край проектора Харди у частоты N/2, где вклад противоположного знака.
    """
    n = lattice.extent[0]
    k = np.arange(n)
    centered = np.where(k < n // 2, k, k - n)
    mask = ((centered >= -(n // 4)) & (centered < n // 4)).astype(float)
    phi = fourier_matrix(n)
    return (phi * mask) @ phi.conj().T


def circle_lattice(n: int) -> Lattice:
    """Окружность из N узлов с шагом 2π/N."""
    return build_lattice({'kind': 'circle', 'extent': n, 'spacing': 2.0 * np.pi / n})


@dataclass(frozen=True, eq=False)
class ToeplitzModel:
    """Тёплицева модель: модуль Харди и унимодулярный символ u на узлах окружности."""
    lattice: Lattice
    symbol: np.ndarray

    @property
    def module(self) -> FredholmModule:
        return hardy_module(self.lattice)


def winding_symbol(lattice: Lattice, k: int) -> np.ndarray:
    """u = e^{ikθ} на узлах окружности."""
    theta = 2.0 * np.pi * lattice.coords[:, 0] / lattice.extent[0]
    return np.exp(1j * k * theta)


def winding_number(u: np.ndarray) -> int:
    steps = np.angle(np.roll(u, -1) / u)
    return int(round(float(np.sum(steps)) / (2.0 * np.pi)))


def toeplitz_index(u: np.ndarray, n: Optional[int] = None, threshold: float = KERNEL_THRESHOLD) -> int:
    """
    Индекс прямоугольного сжатия умножения на u между модами Харди.

    C(u): моды [0, N/4) → моды [0, N/2); индекс = dim ker C(u) − dim ker C(ū).

    Raises:
        ValueError: |u| ≠ 1 или N < 4·|winding|
    """
    u = np.asarray(u, dtype=complex)
    n = u.size if n is None else int(n)
    if u.size != n:
        raise ValueError(f"toeplitz_index: символ задан на {u.size} узлах, ожидается {n}")
    if np.max(np.abs(np.abs(u) - 1.0)) > 1e-10:
        raise ValueError("toeplitz_index: символ не унимодулярен")
    w = winding_number(u)
    if n < 4 * abs(w):
        raise ValueError(f"toeplitz_index: N = {n} < 4·|winding| = {4 * abs(w)}")

    phi = fourier_matrix(n)

    def compression(symbol):
        modes = phi.conj().T @ (symbol[:, None] * phi)
        return modes[: n // 2, : n // 4]

    return kernel_dimension(compression(u), threshold) - kernel_dimension(compression(u.conj()), threshold)


def random_involutive_module(seed: int, graded: bool = True, sites: int = 3, rank: int = 2) -> FredholmModule:
    """
    Случайный инволютивный модуль размерности sites·rank.

    graded: ε = +1 на первом слое, −1 на остальных; T = [[0, V*], [V, 0]] в собственном
    базисе ε с унитарным V. ungraded: F = U diag(±1) U^*.
    """
    rng = np.random.default_rng(seed)
    lattice = build_lattice({'kind': 'circle', 'extent': sites})
    dim = sites * rank
    if graded:
        if rank % 2:
            raise ValueError("random_involutive_module: для градуировки нужен чётный ранг")
        signs = np.tile(np.where(np.arange(rank) < rank // 2, 1.0, -1.0), sites)
        plus, minus = np.nonzero(signs > 0)[0], np.nonzero(signs < 0)[0]
        v = unitary_group.rvs(dim // 2, random_state=rng)
        t = np.zeros((dim, dim), dtype=complex)
        t[np.ix_(minus, plus)] = v
        t[np.ix_(plus, minus)] = v.conj().T
        return fredholm_module(lattice, t, np.diag(signs), rank=rank)

    u = unitary_group.rvs(dim, random_state=rng)
    signs = np.where(np.arange(dim) < dim // 2, 1.0, -1.0)
    f = (u * signs) @ u.conj().T
    return fredholm_module(lattice, 0.5 * (f + f.conj().T), rank=rank)
