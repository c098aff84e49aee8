#!/usr/bin/env python3
"""
Циклические коцепи Черна–Конна на конечных модулях Фредгольма.

    ch^{0,2m}(f_0, …, f_{2m})   = ½ (2πi)^m m! tr(εT[T,f_0]⋯[T,f_{2m}])
    ch^{1,2m−1}(f_0, …, f_{2m−1}) = (2πi)^m ½ (2m−1)!! tr(T[T,f_0]⋯[T,f_{2m−1}])

Аргументы - функции узлов, действующие умножением (скалярно на слой).
"""

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from models import FredholmModule

MAX_ALPHA_DEGREE = 4


@dataclass(frozen=True)
class CyclicCochain:
    """Полилинейный функционал на функциях узлов."""
    arity: int
    evaluator: Callable[..., complex]
    parity: str = "none"
    degree: Optional[int] = None

    def __call__(self, *functions) -> complex:
        if len(functions) != self.arity:
            raise ValueError(f"Коцепь арности {self.arity} получила {len(functions)} аргументов")
        return complex(self.evaluator(*functions))


def even_constant(m: int) -> complex:
    return 0.5 * (2j * np.pi) ** m * math.factorial(m)


def odd_constant(m: int) -> complex:
    double_factorial = math.prod(range(2 * m - 1, 0, -2))
    return (2j * np.pi) ** m * 0.5 * double_factorial


def _commutator_with(t: np.ndarray, rank: int, f) -> np.ndarray:
    """[T, ρ(f)] для диагонального ρ(f)."""
    d = np.repeat(np.asarray(f, dtype=complex), rank)
    return t * d[None, :] - d[:, None] * t


def _chain_product(t: np.ndarray, rank: int, functions: Sequence) -> np.ndarray:
    product = np.eye(t.shape[0], dtype=complex)
    for f in functions:
        product = product @ _commutator_with(t, rank, f)
    return product


def even_cocycle(module: FredholmModule, m: int, *functions) -> complex:
    """
    ch^{0,2m} на градуированном инволютивном модуле.

    Raises:
        ValueError: модуль не градуирован или не инволютивен, неверная арность
    """
    if module.grading is None:
        raise ValueError("even_cocycle: нужен градуированный модуль")
    module.check()
    if len(functions) != 2 * m + 1:
        raise ValueError(f"even_cocycle: для m={m} нужно {2 * m + 1} функций, получено {len(functions)}")
    t = module.operator.to_dense()
    eps = module.grading.to_dense()
    chain = _chain_product(t, module.rank, functions)
    return complex(even_constant(m) * np.trace(eps @ t @ chain))


def odd_cocycle(module: FredholmModule, m: int, *functions, window: Optional[np.ndarray] = None) -> complex:
    """
    ch^{1,2m−1} на неградуированном инволютивном модуле.

    Args:
        window: проектор Q; след заменяется на tr(Q·…) (локализованный след)

    Raises:
        ValueError: модуль градуирован или не инволютивен, m < 1, неверная арность
    """
    if module.grading is not None:
        raise ValueError("odd_cocycle: нужен неградуированный модуль")
    module.check()
    if m < 1:
        raise ValueError(f"odd_cocycle: m должно быть ≥ 1, получено {m}")
    if len(functions) != 2 * m:
        raise ValueError(f"odd_cocycle: для m={m} нужно {2 * m} функций, получено {len(functions)}")
    t = module.operator.to_dense()
    integrand = t @ _chain_product(t, module.rank, functions)
    trace = np.trace(integrand) if window is None else np.trace(window @ integrand)
    return complex(odd_constant(m) * trace)


def even_character(module: FredholmModule, m: int) -> CyclicCochain:
    return CyclicCochain(2 * m + 1, lambda *fs: even_cocycle(module, m, *fs), "even", m)


def odd_character(module: FredholmModule, m: int) -> CyclicCochain:
    return CyclicCochain(2 * m, lambda *fs: odd_cocycle(module, m, *fs), "odd", m)


def cyclic_defect(phi: CyclicCochain, *functions) -> float:
    """|φ(a_n, a_0, …, a_{n−1}) − (−1)^n φ(a_0, …, a_n)|."""
    n = phi.arity - 1
    rotated = (functions[-1],) + tuple(functions[:-1])
    return abs(phi(*rotated) - (-1) ** n * phi(*functions))


def hochschild_b(phi: CyclicCochain, *a) -> complex:
    """
    (bφ)(a_0, …, a_{n+1}) = Σ_{j=0}^{n} (−1)^j φ(…, a_j a_{j+1}, …) + (−1)^{n+1} φ(a_{n+1} a_0, a_1, …, a_n).

    Raises:
        ValueError: число аргументов ≠ арность + 1
    """
    n = phi.arity - 1
    if len(a) != n + 2:
        raise ValueError(f"hochschild_b: нужно {n + 2} аргументов, получено {len(a)}")
    a = [np.asarray(x, dtype=complex) for x in a]
    total = 0j
    for j in range(n + 1):
        merged = a[:j] + [a[j] * a[j + 1]] + a[j + 2:]
        total += (-1) ** j * phi(*merged)
    total += (-1) ** (n + 1) * phi(*([a[n + 1] * a[0]] + a[1:n + 1]))
    return complex(total)


def hochschild_coboundary(phi: CyclicCochain) -> CyclicCochain:
    return CyclicCochain(phi.arity + 1, lambda *a: hochschild_b(phi, *a), "none")


def random_cochain(arity: int, sites: int, seed: int) -> CyclicCochain:
    """Случайная полилинейная коцепь ψ(f_0, …) = Σ C[i_0, …] f_0[i_0]⋯."""
    rng = np.random.default_rng(seed)
    shape = (sites,) * arity
    tensor = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    def evaluate(*functions):
        result = tensor
        for f in functions:
            result = np.tensordot(np.asarray(f, dtype=complex), result, axes=(0, 0))
        return complex(result)

    return CyclicCochain(arity, evaluate, "none")


def _permutation_sign(perm: Sequence[int]) -> int:
    inversions = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inversions % 2 else 1


def alpha_current(phi: CyclicCochain, f0, *fs) -> complex:
    """
    α(φ)(f_0 df_1 ∧ … ∧ df_p) = (1/p!) Σ_σ (−1)^σ φ(f_0, f_σ(1), …, f_σ(p)).

    Raises:
        ValueError: p > 4 или арность φ ≠ p + 1
    """
    p = len(fs)
    if p > MAX_ALPHA_DEGREE:
        raise ValueError(f"alpha_current: p = {p} > {MAX_ALPHA_DEGREE}")
    if phi.arity != p + 1:
        raise ValueError(f"alpha_current: арность {phi.arity} не равна p + 1 = {p + 1}")
    total = 0j
    for perm in itertools.permutations(range(p)):
        total += _permutation_sign(perm) * phi(f0, *[fs[k] for k in perm])
    return complex(total / math.factorial(p))


# ---------------------------------------------------------------------------
# Спаривания с K-теорией
# ---------------------------------------------------------------------------

def even_pairing(module: FredholmModule, projection, m: int) -> complex:
    """⟨[e], ch^{0,2m}⟩ = ch^{0,2m}(e, …, e) для проектора-функции e."""
    return even_cocycle(module, m, *([projection] * (2 * m + 1)))


def periodicity_ratios(module: FredholmModule, projection, max_m: int = 2):
    """Отношения спариваний при соседних m (тень оператора периодичности)."""
    values = [even_pairing(module, projection, m) for m in range(max_m + 1)]
    ratios = [values[k + 1] / values[k] if abs(values[k]) > 1e-300 else None
              for k in range(max_m)]
    return values, ratios


def odd_pairing_raw(module: FredholmModule, u, window: Optional[np.ndarray] = None) -> complex:
    """
    ch^{1,1}(ū, u), собранное из вещественной и мнимой частей u.

    φ(ū, u) = φ(Re, Re) + iφ(Re, Im) − iφ(Im, Re) + φ(Im, Im)
    """
    u = np.asarray(u, dtype=complex)
    re, im = u.real.astype(complex), u.imag.astype(complex)
    phi = lambda a, b: odd_cocycle(module, 1, a, b, window=window)
    return phi(re, re) + 1j * phi(re, im) - 1j * phi(im, re) + phi(im, im)
