"""
Núcleo de B-splines: recursão de Cox-de Boor e avaliação de curvas 2D.

Convenções (usadas por `basis` e `basis_matrix`):
- Grau 0 usa spans semiabertos [t_i, t_{i+1}); o último span não-vazio é
  fechado, para que a partição da unidade valha também no último nó.
- Termos da recursão com denominador zero (nós repetidos) contribuem 0.
- Domínio válido de uma curva com n pontos de controle e grau k:
  [knots[k], knots[n]].
- Toda a aritmética de parâmetro é feita em float64.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from src.errors import ContractError, DomainError, ReefValidationError


@dataclass(frozen=True)
class KnotVector:
    """Sequência não-decrescente de nós t_i."""

    knots: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(k) for k in self.knots)
        object.__setattr__(self, "knots", values)
        if len(values) < 2:
            raise ReefValidationError(f"Vetor de nós precisa de ao menos 2 nós, recebeu {len(values)}")
        if not all(math.isfinite(v) for v in values):
            raise ReefValidationError("Vetor de nós contém valores não-finitos")
        for idx, (a, b) in enumerate(zip(values, values[1:])):
            if b < a:
                raise ReefValidationError(f"Vetor de nós decrescente na posição {idx}: {a} > {b}")
        if values[0] == values[-1]:
            raise ReefValidationError("Vetor de nós sem nenhum span não-vazio")

    def __len__(self) -> int:
        return len(self.knots)

    def __getitem__(self, idx: int) -> float:
        return self.knots[idx]

    @property
    def first(self) -> float:
        return self.knots[0]

    @property
    def last(self) -> float:
        return self.knots[-1]

    @property
    def last_nonempty_span(self) -> int:
        """Índice j do último span [t_j, t_{j+1}) com t_j < t_{j+1}."""
        for j in range(len(self.knots) - 2, -1, -1):
            if self.knots[j] < self.knots[j + 1]:
                return j
        raise AssertionError("unreachable: validado em __post_init__")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.knots, dtype=np.float64)


KnotsLike = Union[KnotVector, Sequence[float]]


def _as_knot_vector(knots: KnotsLike) -> KnotVector:
    if isinstance(knots, KnotVector):
        return knots
    return KnotVector(tuple(knots))


def clamped_knots(n: int, degree: int) -> KnotVector:
    """
    Vetor open-uniform (clamped) em [0, 1] para n pontos de controle.

    Os primeiros e últimos degree+1 nós se repetem, então a curva interpola
    o primeiro e o último ponto de controle.
    """
    if n < degree + 1:
        raise ReefValidationError(f"Curva de grau {degree} precisa de ao menos {degree + 1} pontos, recebeu {n}")
    interior = n - degree - 1
    knots = [0.0] * (degree + 1)
    knots += [i / (interior + 1) for i in range(1, interior + 1)]
    knots += [1.0] * (degree + 1)
    return KnotVector(tuple(knots))


def uniform_knots(n: int, degree: int) -> KnotVector:
    """Vetor uniforme 0, 1, ..., n + degree (sem repetição nas pontas)."""
    if n < degree + 1:
        raise ReefValidationError(f"Curva de grau {degree} precisa de ao menos {degree + 1} pontos, recebeu {n}")
    return KnotVector(tuple(float(i) for i in range(n + degree + 1)))


def _cox_de_boor(i: int, k: int, t: float, u: tuple[float, ...], last_span: int) -> float:
    if k == 0:
        if u[i] <= t < u[i + 1]:
            return 1.0
        if i == last_span and t == u[i + 1]:
            return 1.0
        return 0.0

    value = 0.0
    left_den = u[i + k] - u[i]
    if left_den != 0.0:
        value += (t - u[i]) / left_den * _cox_de_boor(i, k - 1, t, u, last_span)
    right_den = u[i + k + 1] - u[i + 1]
    if right_den != 0.0:
        value += (u[i + k + 1] - t) / right_den * _cox_de_boor(i + 1, k - 1, t, u, last_span)
    return value


def basis(i: int, k: int, t: float, knots: KnotsLike) -> float:
    """
    Função base B_{i,k}(t) pela recursão de Cox-de Boor.

    Args:
        i: Índice da função base.
        k: Grau.
        t: Parâmetro, dentro de [knots[0], knots[-1]].
        knots: Vetor de nós (KnotVector ou sequência de floats).

    Returns:
        B_{i,k}(t) >= 0, nulo fora do suporte [t_i, t_{i+k+1}).

    Raises:
        ContractError: índice ou grau fora do intervalo.
        DomainError: t fora do vetor de nós.
        ReefValidationError: vetor de nós inválido.
    """
    kv = _as_knot_vector(knots)
    if k < 0 or i < 0 or i + k + 1 >= len(kv):
        raise ContractError(f"Índice fora do intervalo: i={i}, k={k}, len(knots)={len(kv)}")
    t = float(t)
    if not kv.first <= t <= kv.last:
        raise DomainError(f"t={t} fora do intervalo de nós [{kv.first}, {kv.last}]")
    return _cox_de_boor(i, k, t, kv.knots, kv.last_nonempty_span)


def basis_matrix(k: int, ts: Sequence[float] | np.ndarray, knots: KnotsLike) -> np.ndarray:
    """
    Avalia todas as funções base de grau k em vários parâmetros de uma vez.

    Constrói a tabela de baixo para cima (indicadores de grau 0, depois
    a recursão elevando o grau), vetorizada sobre `ts`.

    Returns:
        Array (len(ts), len(knots) - k - 1) com B_{i,k}(ts[j]) na posição [j, i].
    """
    kv = _as_knot_vector(knots)
    m = len(kv)
    if k < 0 or k + 1 >= m:
        raise ContractError(f"Grau {k} incompatível com {m} nós")
    u = kv.as_array()
    t = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    if np.any(t < kv.first) or np.any(t > kv.last) or not np.all(np.isfinite(t)):
        raise DomainError(f"Parâmetros fora do intervalo de nós [{kv.first}, {kv.last}]")

    col = t[:, None]
    table = ((col >= u[None, :-1]) & (col < u[None, 1:])).astype(np.float64)
    last = kv.last_nonempty_span
    table[t == u[last + 1], last] = 1.0

    for d in range(1, k + 1):
        nb = m - 1 - d
        ui, ui_d = u[:nb], u[d : d + nb]
        ui_1, ui_d1 = u[1 : nb + 1], u[d + 1 : d + 1 + nb]
        left_den = ui_d - ui
        right_den = ui_d1 - ui_1
        left = np.divide(col - ui, left_den, out=np.zeros((t.size, nb)), where=left_den != 0.0)
        right = np.divide(ui_d1 - col, right_den, out=np.zeros((t.size, nb)), where=right_den != 0.0)
        table = left * table[:, :nb] + right * table[:, 1 : nb + 1]
    return table


@dataclass(frozen=True, eq=False)
class BSplineCurve2D:
    """Curva B-spline paramétrica 2D (pontos em cm no modelo de concha)."""

    control_points: np.ndarray
    degree: int
    knots: KnotVector

    def __post_init__(self) -> None:
        points = np.array(self.control_points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ReefValidationError(f"Pontos de controle devem ter forma (n, 2), recebeu {points.shape}")
        points.setflags(write=False)
        object.__setattr__(self, "control_points", points)
        object.__setattr__(self, "knots", _as_knot_vector(self.knots))
        n = points.shape[0]
        if self.degree < 0:
            raise ReefValidationError(f"Grau negativo: {self.degree}")
        if n < self.degree + 1:
            raise ReefValidationError(f"Grau {self.degree} exige ao menos {self.degree + 1} pontos, recebeu {n}")
        if len(self.knots) != n + self.degree + 1:
            raise ReefValidationError(
                f"len(knots)={len(self.knots)} difere de n + grau + 1 = {n + self.degree + 1}"
            )
        lo, hi = self.domain
        if not lo < hi:
            raise ReefValidationError(f"Domínio vazio [{lo}, {hi}]")

    @classmethod
    def clamped(cls, control_points: Sequence[Sequence[float]], degree: int = 3) -> "BSplineCurve2D":
        return cls(np.asarray(control_points, dtype=np.float64), degree, clamped_knots(len(control_points), degree))

    @classmethod
    def uniform(cls, control_points: Sequence[Sequence[float]], degree: int = 3) -> "BSplineCurve2D":
        return cls(np.asarray(control_points, dtype=np.float64), degree, uniform_knots(len(control_points), degree))

    @property
    def n(self) -> int:
        return int(self.control_points.shape[0])

    @property
    def domain(self) -> tuple[float, float]:
        return self.knots[self.degree], self.knots[self.n]


def eval_curve(curve: BSplineCurve2D, t: float) -> np.ndarray:
    """
    Ponto da curva em t: soma de P_i * B_{i,k}(t).

    Raises:
        DomainError: t fora de [knots[k], knots[n]].
    """
    lo, hi = curve.domain
    if not lo <= t <= hi:
        raise DomainError(f"t={t} fora do domínio válido [{lo}, {hi}]")
    weights = basis_matrix(curve.degree, [t], curve.knots)[0]
    return weights @ curve.control_points


def sample_curve(curve: BSplineCurve2D, m: int) -> np.ndarray:
    """
    Amostra m pontos em parâmetros uniformemente espaçados no domínio.

    As extremidades são exatamente `eval_curve` nos limites do domínio.
    """
    if m < 2:
        raise ReefValidationError(f"sample_curve exige m >= 2, recebeu {m}")
    lo, hi = curve.domain
    ts = np.linspace(lo, hi, m)
    points = basis_matrix(curve.degree, ts, curve.knots) @ curve.control_points
    points[0] = eval_curve(curve, lo)
    points[-1] = eval_curve(curve, hi)
    return points
