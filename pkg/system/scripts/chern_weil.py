#!/usr/bin/env python3
"""
Дискретное исчисление Черна–Вейля на решётках.

Соглашения о носителях:
- 0-формы - на узлах;
- 1-формы - на прямых рёбрах x → x+e_mu, хранятся в узле-начале (обратное ребро = −значение);
- 2-формы - на плакетах, хранятся в левом нижнем узле плакета.
Произведение 0-формы на k-форму берёт значение 0-формы в узле хранения.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np

from folner_trace import LimitPolicy, TraceEstimate, estimate_from_values
from lattice_geometry import FolnerSequence, Lattice, whole_space
from models import GaugeBundle, GradedOperator, ToeplitzModel

BRANCH_GUARD = 1e-8


class BranchAmbiguityError(ValueError):
    """Собственное значение голономии у −1: главная ветвь логарифма неоднозначна."""


# ---------------------------------------------------------------------------
# Формы
# ---------------------------------------------------------------------------

def hop_mask(lattice: Lattice) -> np.ndarray:
    """(d, n): существует ли прямое ребро из узла."""
    return lattice.forward >= 0


def plaquette_mask(lattice: Lattice) -> np.ndarray:
    """(n,): существует ли плакет с левым нижним углом в узле."""
    if lattice.dimension < 2:
        return np.zeros(lattice.n_sites, dtype=bool)
    fx, fy = lattice.forward[0], lattice.forward[1]
    ok = (fx >= 0) & (fy >= 0)
    diag = np.full(lattice.n_sites, -1)
    diag[ok] = fy[fx[ok]]
    return ok & (diag >= 0)


@dataclass(frozen=True, eq=False)
class DiscreteForm:
    lattice: Lattice
    degree: int
    values: np.ndarray

    def __post_init__(self):
        if not 0 <= self.degree <= self.lattice.dimension:
            raise ValueError(
                f"DiscreteForm: степень {self.degree} вне [0, {self.lattice.dimension}]"
            )
        expected = self._shape(self.lattice, self.degree)
        if self.values.shape != expected:
            raise ValueError(f"DiscreteForm: форма значений {self.values.shape}, ожидается {expected}")

    @staticmethod
    def _shape(lattice: Lattice, degree: int):
        if degree == 1:
            return (lattice.dimension, lattice.n_sites)
        return (lattice.n_sites,)

    @property
    def support_mask(self) -> np.ndarray:
        """Где форма имеет носитель (узлы, рёбра или плакеты)."""
        if self.degree == 0:
            return np.ones(self.lattice.n_sites, dtype=bool)
        if self.degree == 1:
            return hop_mask(self.lattice)
        return plaquette_mask(self.lattice)

    def hop_value(self, x: int, y: int) -> complex:
        """Значение 1-формы на направленном ребре x → y."""
        if self.degree != 1:
            raise ValueError("hop_value определено только для 1-форм")
        lat = self.lattice
        for mu in range(lat.dimension):
            if lat.forward[mu, x] == y:
                return self.values[mu, x]
            if lat.forward[mu, y] == x:
                return -self.values[mu, y]
        raise ValueError(f"hop_value: узлы {x} и {y} не соседние")

    def anchor_values(self) -> np.ndarray:
        """Значения по узлам хранения (для 1-форм - сумма по направлениям)."""
        if self.degree == 1:
            return self.values.sum(axis=0)
        return self.values

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values[self.support_mask]), initial=0.0))

    def __add__(self, other: "DiscreteForm") -> "DiscreteForm":
        _check_same(self, other)
        return DiscreteForm(self.lattice, self.degree, self.values + other.values)

    def __mul__(self, scalar) -> "DiscreteForm":
        return DiscreteForm(self.lattice, self.degree, self.values * scalar)

    __rmul__ = __mul__


def _check_same(a: DiscreteForm, b: DiscreteForm):
    if a.lattice is not b.lattice or a.degree != b.degree:
        raise ValueError("Формы разных степеней или на разных решётках")


def zero_form(lattice: Lattice, values) -> DiscreteForm:
    return DiscreteForm(lattice, 0, np.asarray(values))


def volume_form(lattice: Lattice) -> DiscreteForm:
    """Форма объёма: 1 на каждой клетке старшей степени."""
    top = lattice.dimension
    if top == 1:
        return DiscreteForm(lattice, 1, hop_mask(lattice).astype(float))
    return DiscreteForm(lattice, 2, plaquette_mask(lattice).astype(float))


def random_codegree_one_form(lattice: Lattice, rng: np.random.Generator) -> DiscreteForm:
    """Случайная форма степени d−1 со значениями в [−1, 1] (для проверки точных форм dγ)."""
    if lattice.dimension == 1:
        return zero_form(lattice, rng.uniform(-1.0, 1.0, lattice.n_sites))
    values = rng.uniform(-1.0, 1.0, (lattice.dimension, lattice.n_sites)) * hop_mask(lattice)
    return DiscreteForm(lattice, 1, values)


def exterior_derivative(form: DiscreteForm) -> DiscreteForm:
    """Кограничный оператор d."""
    lat = form.lattice
    if form.degree == lat.dimension:
        raise ValueError(f"exterior_derivative: степень {form.degree} уже старшая")
    if form.degree == 0:
        out = np.zeros((lat.dimension, lat.n_sites), dtype=np.result_type(form.values, float))
        for mu in range(lat.dimension):
            ok = lat.forward[mu] >= 0
            out[mu, ok] = form.values[lat.forward[mu][ok]] - form.values[ok]
        return DiscreteForm(lat, 1, out)

    mask = plaquette_mask(lat)
    fx, fy = lat.forward[0], lat.forward[1]
    w = form.values
    out = np.zeros(lat.n_sites, dtype=np.result_type(w, float))
    x = np.nonzero(mask)[0]
    out[x] = w[0, x] + w[1, fx[x]] - w[0, fy[x]] - w[1, x]
    return DiscreteForm(lat, 2, out)


def wedge(a: DiscreteForm, b: DiscreteForm) -> DiscreteForm:
    """Клеточное ∪-произведение; степени выше размерности отбрасываются в ноль."""
    if a.lattice is not b.lattice:
        raise ValueError("wedge: формы на разных решётках")
    lat = a.lattice
    degree = a.degree + b.degree
    if degree > lat.dimension:
        return DiscreteForm(lat, lat.dimension, np.zeros(DiscreteForm._shape(lat, lat.dimension)))
    if a.degree == 0:
        return DiscreteForm(lat, degree, a.values * b.values)
    if b.degree == 0:
        return DiscreteForm(lat, degree, a.values * b.values)

    mask = plaquette_mask(lat)
    x = np.nonzero(mask)[0]
    fx, fy = lat.forward[0], lat.forward[1]
    out = np.zeros(lat.n_sites, dtype=np.result_type(a.values, b.values))
    out[x] = a.values[0, x] * b.values[1, fx[x]] - a.values[1, x] * b.values[0, fy[x]]
    return DiscreteForm(lat, 2, out)


@dataclass(eq=False)
class MixedForm:
    """Неоднородная форма: компоненты по степеням."""
    lattice: Lattice
    parts: Dict[int, DiscreteForm] = field(default_factory=dict)

    def __post_init__(self):
        for degree, form in self.parts.items():
            if form.degree != degree or degree > self.lattice.dimension:
                raise ValueError(f"MixedForm: некорректная компонента степени {degree}")

    def part(self, degree: int) -> DiscreteForm:
        if degree in self.parts:
            return self.parts[degree]
        return DiscreteForm(self.lattice, degree, np.zeros(DiscreteForm._shape(self.lattice, degree)))

    @property
    def degrees(self) -> List[int]:
        return sorted(self.parts)

    def top(self) -> DiscreteForm:
        return self.part(self.lattice.dimension)

    def __add__(self, other: "MixedForm") -> "MixedForm":
        degrees = set(self.parts) | set(other.parts)
        return MixedForm(self.lattice, {k: self.part(k) + other.part(k) for k in sorted(degrees)})

    def wedge(self, other: "MixedForm") -> "MixedForm":
        result: Dict[int, DiscreteForm] = {}
        for p, a in self.parts.items():
            for q, b in other.parts.items():
                if p + q > self.lattice.dimension:
                    continue
                term = wedge(a, b)
                result[p + q] = result[p + q] + term if p + q in result else term
        return MixedForm(self.lattice, result)


# ---------------------------------------------------------------------------
# Кривизна и характеристические формы
# ---------------------------------------------------------------------------

def plaquette_holonomy(e: GaugeBundle) -> np.ndarray:
    """Голономия против часовой стрелки: U_x(x) U_y(x+e_x) U_x(x+e_y)^† U_y(x)^†."""
    lat = e.lattice
    mask = plaquette_mask(lat)
    fx, fy = lat.forward[0], lat.forward[1]
    eye = np.eye(e.rank, dtype=complex)
    hol = np.broadcast_to(eye, (lat.n_sites, e.rank, e.rank)).copy()
    x = np.nonzero(mask)[0]
    ux, uy = e.links[0], e.links[1]
    dag = lambda m: m.conj().transpose(0, 2, 1)
    hol[x] = ux[x] @ uy[fx[x]] @ dag(ux[fy[x]]) @ dag(uy[x])
    return hol


def plaquette_curvature(e: GaugeBundle) -> DiscreteForm:
    """
    F на плакетах: arg голономии (ранг 1) или tr log голономии (ранг n), главная ветвь.

    Raises:
        ValueError: решётка не двумерная
        BranchAmbiguityError: собственное значение голономии в пределах 1e−8 от −1
    """
    lat = e.lattice
    if lat.dimension != 2:
        raise ValueError("plaquette_curvature: нужна двумерная решётка")
    mask = plaquette_mask(lat)
    hol = plaquette_holonomy(e)
    eigenvalues = np.linalg.eigvals(hol[mask])
    near = np.abs(eigenvalues + 1.0) < BRANCH_GUARD
    if np.any(near):
        site = int(np.nonzero(mask)[0][np.nonzero(near.any(axis=1))[0][0]])
        raise BranchAmbiguityError(
            f"plaquette_curvature: голономия у −1 на плакете {site}; уменьшите поток на плакету"
        )
    values = np.zeros(lat.n_sites)
    values[mask] = np.angle(eigenvalues).sum(axis=1)
    return DiscreteForm(lat, 2, values)


def chern_character(e: GaugeBundle) -> MixedForm:
    """
    ch(E) = rank + F/(2π) (в размерности 2 старшие степени исчезают).

    На одномерной решётке плакетов нет: остаётся только ранг.
    """
    lat = e.lattice
    rank = zero_form(lat, np.full(lat.n_sites, float(e.rank)))
    if lat.dimension < 2:
        return MixedForm(lat, {0: rank})
    curvature = plaquette_curvature(e)
    return MixedForm(lat, {0: rank, 2: curvature * (1.0 / (2.0 * np.pi))})


def winding_form(model: ToeplitzModel) -> DiscreteForm:
    """u⁻¹du/(2πi) на рёбрах окружности."""
    u = np.asarray(model.symbol, dtype=complex)
    lat = model.lattice
    nxt = lat.forward[0]
    values = np.zeros((1, lat.n_sites))
    ok = nxt >= 0
    values[0, ok] = np.angle(u[nxt[ok]] / u[ok]) / (2.0 * np.pi)
    return DiscreteForm(lat, 1, values)


def index_form(model: Union[GradedOperator, ToeplitzModel]) -> MixedForm:
    """
    Форма индекса плоской модели.

    Магнитный Дирак (Td ≡ 1): ind = ch(E) расслоения модели.
    Тёплицева модель: плотность намотки степени 1.

    Raises:
        ValueError: неподдерживаемая (искривлённая) модель
    """
    if isinstance(model, GradedOperator):
        return chern_character(model.bundle)
    if isinstance(model, ToeplitzModel):
        return MixedForm(model.lattice, {1: winding_form(model)})
    raise ValueError(f"index_form: неподдерживаемая модель {type(model).__name__} (только плоские)")


def topological_density_form(u: GaugeBundle, model: Union[GradedOperator, ToeplitzModel]) -> DiscreteForm:
    """Старшая компонента ch(u) ∧ ind(model)."""
    if u.lattice is not model.lattice:
        raise ValueError("topological_index_density: расслоение и модель на разных решётках")
    return chern_character(u).wedge(index_form(model)).top()


def topological_index_density(u: GaugeBundle, model: Union[GradedOperator, ToeplitzModel],
                              folner: Optional[FolnerSequence] = None,
                              policy: Optional[LimitPolicy] = None) -> TraceEstimate:
    """
    Фёльнер-среднее старшей компоненты ch(u) ∧ ind(model).

    Без последовательности Фёльнера (тор) - точное среднее по всем плакетам.
    """
    density = topological_density_form(u, model).anchor_values().real
    if folner is None:
        folner = whole_space(u.lattice)
    policy = policy or LimitPolicy()
    values = [float(np.mean(density[s])) for s in folner.sets]
    return estimate_from_values(values, folner, policy)


# ---------------------------------------------------------------------------
# Срезки и спаривания
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class CutoffFamily:
    folner: FolnerSequence
    taper: int
    functions: List[np.ndarray]

    def lipschitz_constants(self) -> List[float]:
        lat = self.folner.lattice
        result = []
        for phi in self.functions:
            worst = 0.0
            for mu in range(lat.dimension):
                ok = lat.forward[mu] >= 0
                worst = max(worst, float(np.max(np.abs(phi[ok] - phi[lat.forward[mu][ok]]))))
            result.append(worst / lat.spacing)
        return result


def build_cutoffs(folner: FolnerSequence, taper: int) -> CutoffFamily:
    """
    φ_i(y) = max(0, 1 − d(y, M_i)/w): ровно 1 на M_i, линейный спад ширины w.

    Raises:
        ValueError: w < 1 или носитель срезки подходит к краю окна ближе чем на шаг
    """
    if taper < 1:
        raise ValueError(f"build_cutoffs: ширина спада должна быть ≥ 1, получено {taper}")
    lat = folner.lattice
    width = taper * lat.spacing
    near_edge = None
    if np.any(lat.boundary):
        near_edge = lat.distance_to_set(np.nonzero(lat.boundary)[0]) <= lat.spacing
    functions = []
    for i, subset in enumerate(folner.sets):
        phi = np.maximum(0.0, 1.0 - lat.distance_to_set(subset) / width)
        if near_edge is not None and np.any(phi[near_edge] > 0):
            raise ValueError(
                f"build_cutoffs: срезка множества {i} касается края окна (нужен запас ≥ w+1)"
            )
        functions.append(phi)
    return CutoffFamily(folner, int(taper), functions)


def exact_form_bound(cutoffs: CutoffFamily, gamma_sup: float, index: int) -> float:
    """Оценка Стокса: |⟨φ_i dγ⟩| ≤ (d/w)·‖γ‖_∞·deficiency(M_i, w+1)."""
    lat = cutoffs.folner.lattice
    w = cutoffs.taper
    return lat.dimension / w * gamma_sup * cutoffs.folner.deficiency(index, (w + 1) * lat.spacing)


def pair_form_current(beta: Union[MixedForm, DiscreteForm], folner: FolnerSequence,
                      cutoffs: CutoffFamily, policy: LimitPolicy) -> TraceEstimate:
    """
    (1/#M_i) Σ φ_i·β по клеткам старшей степени (или по узлам для 0-формы), затем предел.

    Raises:
        ValueError: степень не 0 и не старшая; срезки не от этой последовательности
    """
    if cutoffs.folner is not folner:
        raise ValueError("pair_form_current: срезки построены для другой последовательности")
    lat = folner.lattice
    if isinstance(beta, MixedForm):
        beta = beta.top()
    if beta.degree not in (0, lat.dimension):
        raise ValueError(
            f"pair_form_current: степень {beta.degree} не спаривается с фундаментальным классом"
        )
    density = beta.anchor_values()
    values = []
    for phi, subset, size in zip(cutoffs.functions, folner.sets, folner.sizes):
        values.append(math.fsum(np.real(phi * density)) / size)
    return estimate_from_values(values, folner, policy)


@dataclass(frozen=True)
class PairingCertificate:
    value: float
    ind_sup: float
    phi_l1: float
    bound: float
    rounding_slack: float
    holds: bool

    def as_dict(self):
        return {'value': self.value, 'ind_sup': self.ind_sup, 'phi_l1': self.phi_l1,
                'bound': self.bound, 'rounding_slack': self.rounding_slack, 'holds': self.holds}


def pair_compact(ind: MixedForm, phi: DiscreteForm) -> PairingCertificate:
    """
    ∫ ind ∧ φ для φ с компактным носителем и сертификат |value| ≤ ‖ind‖_∞·‖φ‖_1.

    Raises:
        ValueError: носитель φ касается края окна
    """
    lat = ind.lattice
    if phi.lattice is not lat:
        raise ValueError("pair_compact: формы на разных решётках")
    anchors = phi.anchor_values() if phi.degree != 1 else np.abs(phi.values).sum(axis=0)
    if np.any(lat.boundary) and np.any(anchors[lat.boundary] != 0):
        raise ValueError("pair_compact: носитель φ касается края окна")

    partner = ind.part(lat.dimension - phi.degree)
    product = wedge(partner, phi).anchor_values()
    value = math.fsum(np.real(product))
    ind_sup = partner.sup_norm()
    phi_l1 = math.fsum(np.abs(phi.values).ravel())
    n_terms = int(np.count_nonzero(phi.values))
    bound = float(ind_sup * phi_l1)
    # ошибка округления суммы из n_terms произведений, отдельно от самой оценки
    slack = bound * (n_terms + 2) * float(np.finfo(float).eps)
    certificate = PairingCertificate(float(value), ind_sup, float(phi_l1), bound, slack,
                                     bool(abs(value) <= bound + slack))
    if not certificate.holds:
        logging.error(f"pair_compact: нарушена оценка непрерывности {certificate}")
    return certificate
