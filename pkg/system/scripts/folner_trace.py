#!/usr/bin/env python3
"""
Следы на единицу объёма вдоль последовательностей Фёльнера.

Ультрафильтровый функционал τ заменён оценкой по хвостовому окну (LimitPolicy):
предел сообщается, только если разброс окна не превышает допуск, иначе Divergent.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from functional_calculus import EigenCache, FilterFunction, KernelMatrix, apply_filter
from lattice_geometry import FolnerSequence
from models import GradedOperator
from operator_algebra import FinitePropOperator

DIVERGENCE_POLICIES = ("flag", "raise")


@dataclass(frozen=True)
class LimitPolicy:
    window: int = 3
    tolerance: float = 1e-6
    divergence: str = "flag"

    def __post_init__(self):
        if self.window < 2:
            raise ValueError(f"LimitPolicy.window: нужно ≥ 2, получено {self.window}")
        if self.tolerance <= 0:
            raise ValueError(f"LimitPolicy.tolerance: нужно > 0, получено {self.tolerance}")
        if self.divergence not in DIVERGENCE_POLICIES:
            raise ValueError(f"LimitPolicy.divergence: ожидается {DIVERGENCE_POLICIES}")


@dataclass(frozen=True)
class Divergent:
    """Маркер расходимости с диагностикой хвостового окна."""
    spread: float
    tail: tuple
    tolerance: float

    def __bool__(self):
        return False

    def as_dict(self):
        return {'divergent': True, 'spread': self.spread, 'tail': list(self.tail),
                'tolerance': self.tolerance}


class DivergentSequenceError(ValueError):
    pass


Limit = Union[float, Divergent]


def limit_functional(sequence: Sequence[float], policy: LimitPolicy) -> Limit:
    """
    Среднее хвостового окна, если его разброс ≤ допуска; иначе Divergent.

    Raises:
        ValueError: последовательность короче окна
        DivergentSequenceError: расходимость при policy.divergence == 'raise'
    """
    values = [float(v) for v in sequence]
    if len(values) < policy.window:
        raise ValueError(
            f"limit_functional: длина последовательности {len(values)} меньше окна {policy.window}"
        )
    tail = values[-policy.window:]
    spread = max(tail) - min(tail)
    if spread <= policy.tolerance:
        return float(np.mean(tail))
    if policy.divergence == "raise":
        raise DivergentSequenceError(f"Последовательность не сходится: разброс хвоста {spread:.3g}")
    return Divergent(spread, tuple(tail), policy.tolerance)


@dataclass
class TraceEstimate:
    values: List[float]
    limit: Limit
    spread: float
    last_deficiency: float
    set_sizes: List[int] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return not isinstance(self.limit, Divergent)

    def as_dict(self):
        limit = self.limit.as_dict() if isinstance(self.limit, Divergent) else self.limit
        return {'values': self.values, 'limit': limit, 'spread': self.spread,
                'last_deficiency': self.last_deficiency, 'set_sizes': self.set_sizes}


def _covers_whole_space(folner: FolnerSequence) -> bool:
    return len(folner) == 1 and folner.sizes[-1] == folner.lattice.n_sites


def estimate_from_values(values: Sequence[float], folner: FolnerSequence, policy: LimitPolicy,
                         deficiency_radius: float = 2.0) -> TraceEstimate:
    """Собрать TraceEstimate; весь тор - точное значение без окна."""
    values = [float(v) for v in values]
    if _covers_whole_space(folner):
        return TraceEstimate(values, values[-1], 0.0, 0.0, list(folner.sizes))
    limit = limit_functional(values, policy)
    tail = values[-policy.window:]
    return TraceEstimate(values, limit, max(tail) - min(tail),
                         folner.deficiency(len(folner) - 1, deficiency_radius), list(folner.sizes))


def site_averages(density: np.ndarray, folner: FolnerSequence) -> List[float]:
    """(1/#Γ_i) Σ_{γ∈Γ_i} density(γ) для каждого множества."""
    return [float(np.mean(density[s])) for s in folner.sets]


def diagonal_trace_density(t: FinitePropOperator) -> np.ndarray:
    """tr T(x, x) по узлам."""
    return np.trace(t.diagonal_blocks(), axis1=1, axis2=2).real


def per_set_traces(t: FinitePropOperator, folner: FolnerSequence) -> List[float]:
    if t.lattice is not folner.lattice:
        raise ValueError("roe_trace: оператор и последовательность Фёльнера на разных решётках")
    blocks = t.diagonal_blocks()
    density = np.trace(blocks, axis1=1, axis2=2)
    return [complex(np.mean(density[s])) for s in folner.sets]


def roe_trace(t: FinitePropOperator, folner: FolnerSequence, policy: LimitPolicy,
              deficiency_radius: float = 2.0) -> TraceEstimate:
    """θ(T): средние диагонали по множествам Фёльнера, затем limit_functional."""
    values = [v.real for v in per_set_traces(t, folner)]
    return estimate_from_values(values, folner, policy, deficiency_radius)


def local_index_density(d: GradedOperator, f: FilterFunction, method: str = "eigen",
                        cache: Optional[EigenCache] = None, **calculus) -> np.ndarray:
    """tr_s k_{f(D)}(x, x) = tr(Γ·f(D))(x, x) по узлам."""
    f.check_index_filter()
    kernel = apply_filter(d.operator, f, method=method, cache=cache, **calculus)
    return supertrace_density(d, kernel)


def supertrace_density(d: GradedOperator, kernel) -> np.ndarray:
    """tr(Γ·K)(x, x) по узлам для уже вычисленного ядра K."""
    grading = d.grading
    k = kernel.operator if isinstance(kernel, KernelMatrix) else kernel
    if sp.issparse(grading.matrix):
        return diagonal_trace_density(grading @ k)
    # диагональ Γ·f(D) без полного произведения: Σ_j Γ[i, j] f(D)[j, i]
    diagonal = np.einsum("ij,ji->i", grading.matrix, k.to_dense())
    return diagonal.reshape(d.lattice.n_sites, k.rank).sum(axis=1).real


def analytic_index_density(d: GradedOperator, f: FilterFunction, folner: FolnerSequence,
                           policy: LimitPolicy, method: str = "eigen",
                           cache: Optional[EigenCache] = None,
                           density: Optional[np.ndarray] = None, **calculus) -> TraceEstimate:
    """
    Плотность аналитического индекса: Фёльнер-средние супершпура ядра f(D).

    Raises:
        ValueError: фильтр не чётный или f(0) ≠ 1
    """
    f.check_index_filter()
    if folner.lattice is not d.lattice:
        raise ValueError("analytic_index_density: оператор и последовательность на разных решётках")
    if density is None:
        density = local_index_density(d, f, method=method, cache=cache, **calculus)
    estimate = estimate_from_values(site_averages(density, folner), folner, policy)
    logging.info(f"Аналитическая плотность индекса ({f.describe()}): {estimate.values}")
    return estimate
