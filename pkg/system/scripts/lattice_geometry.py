#!/usr/bin/env python3
"""
Дискретные модельные геометрии для index_workbench.

Содержит:
- Lattice: решётки (тор, окно плоскости, окружность, полупрямая) с метрикой и границей
- FolnerSequence: вложенные множества с таблицей дефицитов #∂_rΓ_i / #Γ_i
- ColoredCover: равномерно локально конечные покрытия шарами и их раскраски
- PartitionOfUnity: разбиения единицы с линейным спадом ширины w

Соглашение о границе (проверено по оракулам 0.6 / 0.3 / 0.15 для отрезков 10, 20, 40):
    ∂_rΓ = {γ ∈ Γ_i : d(γ, Γ − Γ_i) ≤ r} ∪ {γ ∉ Γ_i : d(γ, Γ_i) < r}
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

SUPPORTED_KINDS = ("torus", "plane-window", "circle", "half-line")
PERIODIC_KINDS = ("torus", "circle")


@dataclass(frozen=True, eq=False)
class Lattice:
    """Конечная дискретизация модельной геометрии.

    Узлы упорядочены лексикографически по целым координатам. Расстояния
    хранятся в единицах длины: число шагов × spacing.
    """
    kind: str
    dimension: int
    extent: Tuple[int, ...]
    spacing: float
    coords: np.ndarray
    forward: np.ndarray      # (d, n): сосед по +e_mu или -1
    backward: np.ndarray     # (d, n): сосед по -e_mu или -1
    boundary: np.ndarray     # (n,) bool

    @property
    def n_sites(self) -> int:
        return int(self.coords.shape[0])

    @property
    def periodic(self) -> bool:
        return self.kind in PERIODIC_KINDS

    def site_index(self, coord: Sequence[int]) -> int:
        """Индекс узла по координатам (с заворотом для периодических решёток)."""
        coord = tuple(int(c) for c in coord)
        if self.periodic:
            coord = tuple(c % e for c, e in zip(coord, self.extent))
        return int(np.ravel_multi_index(coord, self.extent))

    def degree(self, site: int) -> int:
        """Число единичных шагов из узла (направленных, с учётом совпадений на малом торе)."""
        return int(np.sum(self.forward[:, site] >= 0) + np.sum(self.backward[:, site] >= 0))

    def _axis_hops(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Покоординатные числа шагов между узлами a и b (массивы индексов)."""
        delta = np.abs(self.coords[a] - self.coords[b])
        if self.periodic:
            ext = np.asarray(self.extent)
            delta = np.minimum(delta, ext - delta)
        return delta

    def pair_distances(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Графовые расстояния между парами узлов (векторно)."""
        a = np.asarray(a, dtype=int)
        b = np.asarray(b, dtype=int)
        return self._axis_hops(a, b).sum(axis=-1) * self.spacing

    def distance(self, a: int, b: int) -> float:
        return float(self.pair_distances(np.array([a]), np.array([b]))[0])

    def distances_from(self, site: int) -> np.ndarray:
        everyone = np.arange(self.n_sites)
        return self.pair_distances(np.full(self.n_sites, site), everyone)

    def chebyshev_from(self, site: int) -> np.ndarray:
        """ℓ∞-расстояния от узла (используются для шаров покрытия и коробок)."""
        everyone = np.arange(self.n_sites)
        return self._axis_hops(np.full(self.n_sites, site), everyone).max(axis=-1) * self.spacing

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        idx = np.arange(self.n_sites)
        return self._axis_hops(idx[:, None], idx[None, :]).sum(axis=-1) * self.spacing

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        rows, cols = [], []
        for mu in range(self.dimension):
            ok = self.forward[mu] >= 0
            src = np.nonzero(ok)[0]
            rows.extend(src)
            cols.extend(self.forward[mu][ok])
        n = self.n_sites
        adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
        adj = adj + adj.T
        adj.sum_duplicates()
        adj.data[:] = self.spacing
        return adj

    def distance_to_set(self, sites: Sequence[int]) -> np.ndarray:
        """Расстояние от каждого узла до множества (многоисточниковый Дейкстра)."""
        sites = np.asarray(sites, dtype=int)
        if sites.size == 0:
            return np.full(self.n_sites, np.inf)
        return dijkstra(self.adjacency, directed=False, indices=sites, min_only=True)

    def check_metric(self, n_triples: int = 200, seed: int = 0) -> bool:
        """Выборочная проверка аксиом метрики на случайных тройках."""
        rng = np.random.default_rng(seed)
        a, b, c = rng.integers(0, self.n_sites, size=(3, n_triples))
        dab = self.pair_distances(a, b)
        return bool(
            np.all(dab == self.pair_distances(b, a))
            and np.all(dab <= self.pair_distances(a, c) + self.pair_distances(c, b))
            and np.all(self.pair_distances(a, a) == 0)
        )


def build_lattice(spec: Dict) -> Lattice:
    """
    Построить решётку по описанию геометрии.

    Args:
        spec: {'kind': 'torus'|'plane-window'|'circle'|'half-line',
               'extent': int или список по осям, 'dimension': 1|2 (опционально),
               'spacing': float (по умолчанию 1)}

    Returns:
        Lattice

    Raises:
        ValueError: неподдерживаемый вид, размерность или extent < 2
    """
    kind = spec.get('kind')
    if kind not in SUPPORTED_KINDS:
        raise ValueError(f"geometry.kind: неподдерживаемый вид решётки {kind!r}")

    extent = spec.get('extent')
    if isinstance(extent, (int, np.integer)):
        dimension = int(spec.get('dimension', 1 if kind in ("circle", "half-line") else 2))
        extent = (int(extent),) * dimension
    else:
        extent = tuple(int(e) for e in extent)
        dimension = int(spec.get('dimension', len(extent)))

    if dimension not in (1, 2) or len(extent) != dimension:
        raise ValueError(f"geometry.dimension: ожидается 1 или 2, получено {dimension}")
    if kind in ("circle", "half-line") and dimension != 1:
        raise ValueError(f"geometry.dimension: {kind} бывает только одномерным")
    if min(extent) < 2:
        raise ValueError(f"geometry.extent: нужно ≥ 2 узлов по каждой оси, получено {extent}")

    spacing = float(spec.get('spacing', 1.0))
    if spacing <= 0:
        raise ValueError("geometry.spacing: шаг должен быть положительным")

    coords = np.array(list(itertools.product(*[range(e) for e in extent])), dtype=int)
    n = coords.shape[0]
    periodic = kind in PERIODIC_KINDS

    forward = np.full((dimension, n), -1, dtype=int)
    backward = np.full((dimension, n), -1, dtype=int)
    for mu in range(dimension):
        for step, table in ((1, forward), (-1, backward)):
            shifted = coords.copy()
            shifted[:, mu] += step
            if periodic:
                shifted[:, mu] %= extent[mu]
                table[mu] = np.ravel_multi_index(shifted.T, extent)
            else:
                ok = (shifted[:, mu] >= 0) & (shifted[:, mu] < extent[mu])
                table[mu][ok] = np.ravel_multi_index(shifted[ok].T, extent)

    if kind == "plane-window":
        boundary = np.any(forward < 0, axis=0) | np.any(backward < 0, axis=0)
    elif kind == "half-line":
        # Граница полупрямой - только её начало; правый конец является срезом
        boundary = coords[:, 0] == 0
    else:
        boundary = np.zeros(n, dtype=bool)

    lattice = Lattice(kind, dimension, extent, spacing, coords, forward, backward, boundary)
    logging.info(f"Решётка {kind} {extent}: {n} узлов")
    return lattice


# ---------------------------------------------------------------------------
# Følner-последовательности
# ---------------------------------------------------------------------------

def folner_deficiency(lattice: Lattice, subset: Sequence[int], r: float) -> float:
    """
    Точный дефицит #∂_rΓ / #Γ перебором.

    Raises:
        ValueError: пустое множество или r ≤ 0
    """
    subset = np.unique(np.asarray(subset, dtype=int))
    if subset.size == 0:
        raise ValueError("folner_deficiency: пустое множество")
    if r <= 0:
        raise ValueError(f"folner_deficiency: r должно быть > 0, получено {r}")

    inside = np.zeros(lattice.n_sites, dtype=bool)
    inside[subset] = True
    complement = np.nonzero(~inside)[0]
    if complement.size == 0:
        return 0.0

    to_set = lattice.distance_to_set(subset)
    to_complement = lattice.distance_to_set(complement)
    inner = inside & (to_complement <= r)
    outer = ~inside & (to_set < r)
    return float(np.count_nonzero(inner | outer)) / float(subset.size)


@dataclass(eq=False)
class FolnerSequence:
    """Вложенные конечные множества с кэшированной таблицей дефицитов."""
    lattice: Lattice
    sets: Tuple[np.ndarray, ...]
    sizes: Tuple[int, ...]
    deficiencies: Dict[float, Tuple[float, ...]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sets)

    def deficiency(self, index: int, r: float) -> float:
        if r not in self.deficiencies:
            self.deficiencies[r] = tuple(
                folner_deficiency(self.lattice, s, r) for s in self.sets
            )
        return self.deficiencies[r][index]

    def is_nested(self) -> bool:
        return all(
            np.all(np.isin(a, b)) for a, b in zip(self.sets[:-1], self.sets[1:])
        ) and all(s.size > 0 for s in self.sets)


def whole_space(lattice: Lattice) -> FolnerSequence:
    """Одноэлементная последовательность (весь тор): дефицит 0."""
    everything = np.arange(lattice.n_sites)
    return FolnerSequence(lattice, (everything,), (lattice.n_sites,), {})


def folner_boxes(lattice: Lattice, schedule: Sequence[int],
                 radii: Sequence[float] = (2,), margin: Optional[int] = None) -> FolnerSequence:
    """
    Вложенные центрированные коробки (для полупрямой - отрезки [0, L)).

    Args:
        lattice: plane-window или half-line
        schedule: размеры коробок (в узлах по каждой оси), по возрастанию
        radii: r, для которых заполняется таблица дефицитов
        margin: запас до края окна (по умолчанию max(radii))

    Raises:
        ValueError: неподходящая решётка или коробка не помещается с запасом
    """
    if lattice.kind not in ("plane-window", "half-line"):
        raise ValueError(f"folner_boxes: нужна plane-window или half-line, получено {lattice.kind}")
    if not schedule:
        raise ValueError("folner_boxes: пустое расписание")
    if list(schedule) != sorted(schedule):
        raise ValueError("folner_boxes: размеры коробок должны возрастать")
    if margin is None:
        margin = int(np.ceil(max(radii))) if radii else 0

    sets: List[np.ndarray] = []
    for size in schedule:
        size = int(size)
        mask = np.ones(lattice.n_sites, dtype=bool)
        for mu, ext in enumerate(lattice.extent):
            if lattice.kind == "half-line":
                start = 0
                if start + size + margin > ext:
                    raise ValueError(
                        f"folner_boxes: отрезок {size} не помещается с запасом {margin} в {ext}"
                    )
            else:
                start = ext // 2 - size // 2
                if start < margin or start + size + margin > ext:
                    raise ValueError(
                        f"folner_boxes: коробка {size} не помещается с запасом {margin} в окно {ext}"
                    )
            c = lattice.coords[:, mu]
            mask &= (c >= start) & (c < start + size)
        sets.append(np.nonzero(mask)[0])

    folner = FolnerSequence(lattice, tuple(sets), tuple(int(s.size) for s in sets), {})
    for r in radii:
        for i in range(len(folner)):
            folner.deficiency(i, r)
    logging.info(f"Følner-коробки {list(schedule)}: дефициты {folner.deficiencies}")
    return folner


# ---------------------------------------------------------------------------
# Покрытия, раскраски, разбиения единицы
# ---------------------------------------------------------------------------

def _net_order(G, colors):
    """Стратегия жадной раскраски: детерминированный порядок сети."""
    return sorted(G)


def color_intersection_graph(graph: nx.Graph) -> Dict[int, int]:
    """Жадная раскраска в порядке вершин; использует не более Δ+1 цветов."""
    return nx.greedy_color(graph, strategy=_net_order)


@dataclass(eq=False)
class ColoredCover:
    lattice: Lattice
    net: np.ndarray
    net_spacing: int
    radius: float
    members: Tuple[np.ndarray, ...]
    colors: np.ndarray
    graph: nx.Graph

    @property
    def n_colors(self) -> int:
        return int(self.colors.max()) + 1 if self.colors.size else 0

    @property
    def max_degree(self) -> int:
        return max((d for _, d in self.graph.degree()), default=0)

    @cached_property
    def membership(self) -> np.ndarray:
        mask = np.zeros((len(self.members), self.lattice.n_sites), dtype=bool)
        for i, m in enumerate(self.members):
            mask[i, m] = True
        return mask

    @property
    def multiplicity(self) -> int:
        return int(self.membership.sum(axis=0).max())

    def covers_all(self) -> bool:
        return bool(np.all(self.membership.any(axis=0)))

    def is_proper(self) -> bool:
        return all(self.colors[a] != self.colors[b] for a, b in self.graph.edges())


def build_colored_cover(lattice: Lattice, net_spacing: int, radius: float,
                        require_cover: bool = True) -> ColoredCover:
    """
    Покрытие ℓ∞-шарами радиуса ε с центрами в подрешётке шага s и жадная раскраска.

    Args:
        net_spacing: шаг сети s ≥ 1 (в узлах)
        radius: радиус ε (в единицах длины)
        require_cover: требовать ε ≥ s/2 и покрытие всех узлов (False - упаковка шаров)

    Raises:
        ValueError: нарушено условие покрытия
    """
    s = int(net_spacing)
    if s < 1:
        raise ValueError(f"build_colored_cover: шаг сети должен быть ≥ 1, получено {s}")
    if require_cover and radius < s * lattice.spacing / 2:
        raise ValueError(
            f"build_colored_cover: ε = {radius} < s/2 = {s * lattice.spacing / 2}, шары не покрывают решётку"
        )

    axes = [np.arange(0, ext, s) for ext in lattice.extent]
    net = np.array([lattice.site_index(c) for c in itertools.product(*axes)], dtype=int)
    members = tuple(np.nonzero(lattice.chebyshev_from(x) <= radius + 1e-12)[0] for x in net)

    mask = np.zeros((len(members), lattice.n_sites), dtype=np.int32)
    for i, m in enumerate(members):
        mask[i, m] = 1
    overlap = mask @ mask.T

    graph = nx.Graph()
    graph.add_nodes_from(range(len(members)))
    rows, cols = np.nonzero(np.triu(overlap, k=1))
    graph.add_edges_from(zip(rows.tolist(), cols.tolist()))

    coloring = color_intersection_graph(graph)
    colors = np.array([coloring[i] for i in range(len(members))], dtype=int)
    cover = ColoredCover(lattice, net, s, float(radius), members, colors, graph)

    if require_cover and not cover.covers_all():
        raise ValueError("build_colored_cover: объединение шаров не покрывает все узлы")
    if cover.n_colors > cover.max_degree + 1:
        raise ValueError("build_colored_cover: жадная раскраска превысила Δ+1 цветов")

    logging.info(
        f"Покрытие: {len(members)} шаров, Δ = {cover.max_degree}, цветов {cover.n_colors}"
    )
    return cover


@dataclass(eq=False)
class PartitionOfUnity:
    cover: ColoredCover
    taper: int
    weights: np.ndarray      # (число элементов покрытия, n_sites)

    def sum_deviation(self) -> float:
        return float(np.max(np.abs(self.weights.sum(axis=0) - 1.0)))

    def lipschitz_constants(self) -> np.ndarray:
        """Дискретная константа Липшица каждого веса (по единичным шагам)."""
        lattice = self.cover.lattice
        worst = np.zeros(self.weights.shape[0])
        for mu in range(lattice.dimension):
            ok = lattice.forward[mu] >= 0
            diff = np.abs(self.weights[:, ok] - self.weights[:, lattice.forward[mu][ok]])
            worst = np.maximum(worst, diff.max(axis=1) / lattice.spacing)
        return worst

    def supported_in_members(self) -> bool:
        return bool(np.all((self.weights > 0) <= self.cover.membership))


def _axis_profile(lattice: Lattice, mu: int, center: int, last: int, s: int, w: int) -> np.ndarray:
    """Трапеция: плато 1, линейный спад ширины w; у края окна плато продлевается."""
    y = lattice.coords[:, mu]
    u = y - center
    if lattice.periodic:
        ext = lattice.extent[mu]
        u = (u + ext // 2) % ext - ext // 2
    g = np.clip(((s + w) / 2.0 - np.abs(u)) / w, 0.0, 1.0)
    if not lattice.periodic:
        if center == 0:
            g[u < 0] = 1.0
        if center == last:
            g[u > 0] = 1.0
    return g


def partition_of_unity(cover: ColoredCover, taper: int) -> PartitionOfUnity:
    """
    Разбиение единицы, подчинённое покрытию.

    Профили - произведения одномерных трапеций по осям, затем поузловая нормировка.

    Raises:
        ValueError: w < 1, w > s, тор не делится на шаг сети, или перекрытие тоньше w
    """
    lattice = cover.lattice
    s = cover.net_spacing
    w = int(taper)
    if w < 1:
        raise ValueError(f"partition_of_unity: ширина спада должна быть ≥ 1, получено {w}")
    if w > s:
        raise ValueError(f"partition_of_unity: спад {w} длиннее шага сети {s}")
    if lattice.periodic and any(ext % s for ext in lattice.extent):
        raise ValueError(f"partition_of_unity: extent {lattice.extent} не делится на шаг сети {s}")

    lasts = [((ext - 1) // s) * s for ext in lattice.extent]
    raw = np.ones((len(cover.members), lattice.n_sites))
    for i, x in enumerate(cover.net):
        for mu in range(lattice.dimension):
            raw[i] *= _axis_profile(lattice, mu, int(lattice.coords[x, mu]), lasts[mu], s, w)

    if np.any((raw > 0) & ~cover.membership):
        raise ValueError(
            f"partition_of_unity: перекрытие элементов покрытия тоньше w = {w} (профиль выходит за шар)"
        )
    total = raw.sum(axis=0)
    if np.any(total <= 0):
        raise ValueError("partition_of_unity: есть узлы вне носителей профилей")

    pou = PartitionOfUnity(cover, w, raw / total)
    logging.info(f"Разбиение единицы: w = {w}, отклонение суммы {pou.sum_deviation():.2e}")
    return pou
