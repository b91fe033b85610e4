"""
Linear-optical circuit elements for the C-sign gate analysis app
Handles beamsplitters, mode permutations and photon loss on Fock space.

This module provides functions for:
- 2x2 beamsplitter mode matrices under both sign conventions
- Lifting a mode transformation to Fock space via matrix permanents
- Sparse Fock operators for single elements and whole circuits
- The photon-loss channel, as Kraus operators or as a traced-out ancilla
"""

# Standard library imports
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Union

# Third-party imports
import numpy as np
from scipy import sparse
from thewalrus import perm

# Local application imports
from loqc_app.modules.exceptions import (
    InvalidModeError,
    NonUnitaryError,
    ParameterRangeError,
)
from loqc_app.modules.fock_core import (
    DensityOperator,
    FockBasis,
    enumerate_basis,
    partial_trace_matrix,
)

logger = logging.getLogger(__name__)

UNITARY_TOL = 1e-10


class Convention(Enum):
    """Where a beamsplitter puts its minus sign."""

    SIGN_ON_REFLECTION = "reflection"
    SIGN_ON_TRANSMISSION = "transmission"


class Orientation(Enum):
    """Which coupled mode faces the marked side.

    AB marks the second mode of BeamsplitterSpec.modes, BA the first.
    """

    AB = "AB"
    BA = "BA"


class LossMethod(Enum):
    KRAUS = "kraus"
    ANCILLA_TRACE = "ancilla_trace"


def _check_eta(value, name="eta"):
    if not 0.0 <= value <= 1.0:
        raise ParameterRangeError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class BeamsplitterSpec:
    """Two-mode beamsplitter.

    Attributes:
        eta (float): Reflectivity; a reflected beam stays in its own mode
            with amplitude sqrt(eta).
        modes (tuple): The two coupled mode indices.
        convention (Convention): Sign convention.
        orientation (Orientation): Marked side.
    """

    eta: float
    modes: tuple
    convention: Convention = Convention.SIGN_ON_REFLECTION
    orientation: Orientation = Orientation.AB

    def __post_init__(self):
        _check_eta(self.eta)
        modes = tuple(int(m) for m in self.modes)
        if len(modes) != 2 or modes[0] == modes[1] or min(modes) < 0:
            raise InvalidModeError(f"beamsplitter needs two distinct modes, got {self.modes}")
        object.__setattr__(self, "modes", modes)

    @property
    def touched_modes(self):
        return self.modes


@dataclass(frozen=True)
class LossChannel:
    """Photon loss of the given efficiency on one mode."""

    efficiency: float
    mode: int

    def __post_init__(self):
        _check_eta(self.efficiency, "efficiency")
        if self.mode < 0:
            raise InvalidModeError(f"negative mode index {self.mode}")

    @property
    def touched_modes(self):
        return (self.mode,)


@dataclass(frozen=True)
class Permutation:
    """Mode relabelling: output mode i carries input mode order[i]."""

    order: tuple

    def __post_init__(self):
        order = tuple(int(m) for m in self.order)
        if sorted(order) != list(range(len(order))):
            raise InvalidModeError(f"{self.order} is not a permutation")
        object.__setattr__(self, "order", order)

    @property
    def touched_modes(self):
        return tuple(range(len(self.order)))

    def mode_matrix(self) -> np.ndarray:
        matrix = np.zeros((len(self.order), len(self.order)))
        matrix[np.arange(len(self.order)), self.order] = 1.0
        return matrix


CircuitElement = Union[BeamsplitterSpec, LossChannel, Permutation]


def bs_mode_matrix(spec: BeamsplitterSpec) -> np.ndarray:
    """Return the 2x2 mode matrix M[out, in] over (modes[0], modes[1]).

    Reflection keeps a beam in its own mode, so reflection amplitudes sit on
    the diagonal. The minus sign lands on the marked-side input's reflection
    (SIGN_ON_REFLECTION) or transmission (SIGN_ON_TRANSMISSION).

    Examples:
        eta=0.5, SIGN_ON_REFLECTION, AB gives [[1, 1], [1, -1]] / sqrt(2).
    """
    r = math.sqrt(spec.eta)
    t = math.sqrt(1.0 - spec.eta)
    marked_second = spec.orientation is Orientation.AB
    if spec.convention is Convention.SIGN_ON_REFLECTION:
        if marked_second:
            return np.array([[r, t], [t, -r]])
        return np.array([[-r, t], [t, r]])
    if marked_second:
        return np.array([[r, -t], [t, r]])
    return np.array([[r, t], [-t, r]])


def _check_unitary(matrix):
    identity = np.eye(matrix.shape[0])
    deviation = np.max(np.abs(matrix @ matrix.conj().T - identity))
    if deviation > UNITARY_TOL:
        raise NonUnitaryError(f"mode matrix not unitary (deviation {deviation:.2e})")


def _repeated_indices(occupation):
    return [mode for mode, n in enumerate(occupation) for _ in range(n)]


def lift_unitary(mode_matrix, basis: FockBasis) -> np.ndarray:
    """Lift an M-mode transformation to the Fock space of basis.

    Uses <m|U|n> = per(U[m, n]) / sqrt(prod m_i! prod n_j!), where the
    submatrix repeats row i m_i times and column j n_j times.

    Args:
        mode_matrix (np.ndarray): M x M unitary, M[out, in].
        basis (FockBasis): Basis with mode_count == M.

    Returns:
        np.ndarray: Dense block-diagonal Fock-space unitary.

    Raises:
        NonUnitaryError: If mode_matrix is not unitary to 1e-10.
        InvalidModeError: If the sizes disagree.
    """
    mode_matrix = np.asarray(mode_matrix, dtype=complex)
    if mode_matrix.shape != (basis.mode_count, basis.mode_count):
        raise InvalidModeError(
            f"mode matrix {mode_matrix.shape} does not match {basis.mode_count} modes"
        )
    _check_unitary(mode_matrix)

    lifted = np.zeros((basis.dimension, basis.dimension), dtype=complex)
    norms = np.array([
        math.prod(math.factorial(n) for n in occupation) for occupation in basis.states
    ], dtype=float)
    for total in range(basis.max_total_photons + 1):
        block = np.flatnonzero(basis.photon_numbers == total)
        if total == 0:
            lifted[block, block] = 1.0
            continue
        rows = {i: _repeated_indices(basis.states[i]) for i in block}
        for j in block:
            columns = _repeated_indices(basis.states[j])
            for i in block:
                sub = mode_matrix[np.ix_(rows[i], columns)]
                amplitude = sub[0, 0] if total == 1 else perm(sub)
                lifted[i, j] = amplitude / math.sqrt(norms[i] * norms[j])
    return lifted


@lru_cache(maxsize=256)
def _two_mode_lift(matrix_key, max_total_photons):
    matrix = np.array(matrix_key, dtype=complex).reshape(2, 2)
    sub = enumerate_basis(2, max_total_photons)
    return sub, lift_unitary(matrix, sub)


def _embed_two_mode(lifted_sub, sub, modes, basis):
    i, j = modes
    rows, cols, values = [], [], []
    for col, occupation in enumerate(basis.states):
        local = sub.index((occupation[i], occupation[j]))
        total = occupation[i] + occupation[j]
        for p in range(total + 1):
            amplitude = lifted_sub[sub.index((p, total - p)), local]
            if amplitude == 0:
                continue
            target = list(occupation)
            target[i], target[j] = p, total - p
            rows.append(basis.index(target))
            cols.append(col)
            values.append(amplitude)
    return sparse.csr_matrix((values, (rows, cols)),
                             shape=(basis.dimension, basis.dimension), dtype=complex)


def _permutation_operator(element: Permutation, basis: FockBasis):
    if len(element.order) != basis.mode_count:
        raise InvalidModeError(
            f"permutation over {len(element.order)} modes applied to {basis.mode_count}"
        )
    order = np.array(element.order)
    cols = np.arange(basis.dimension)
    rows = [basis.index(basis.occupations[c][order]) for c in cols]
    return sparse.csr_matrix((np.ones(basis.dimension, dtype=complex), (rows, cols)),
                             shape=(basis.dimension, basis.dimension))


def element_operator(element, basis: FockBasis) -> sparse.csr_matrix:
    """Sparse Fock-space operator of one beamsplitter or permutation.

    A beamsplitter is lifted on the two-mode basis and embedded, leaving the
    other occupations untouched. A permutation only relabels occupations, so
    its lift is the corresponding basis permutation.
    """
    for mode in element.touched_modes:
        basis.check_mode(mode)
    if isinstance(element, BeamsplitterSpec):
        matrix = bs_mode_matrix(element)
        sub, lifted_sub = _two_mode_lift(tuple(matrix.ravel()), basis.max_total_photons)
        return _embed_two_mode(lifted_sub, sub, element.modes, basis)
    if isinstance(element, Permutation):
        return _permutation_operator(element, basis)
    raise TypeError(f"{type(element).__name__} has no unitary operator")


def circuit_operator(elements, basis: FockBasis) -> sparse.csr_matrix:
    """Product of the element operators, first element applied first."""
    operator = sparse.identity(basis.dimension, dtype=complex, format="csr")
    for element in elements:
        operator = element_operator(element, basis) @ operator
    return operator.tocsr()


def loss_kraus(eta: float, max_n: int) -> list:
    """Single-mode Kraus operators of a loss channel with efficiency eta.

    K_k|n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k>. Operators that vanish
    identically are omitted, so eta=1 yields the identity alone.
    """
    _check_eta(eta)
    operators = []
    for k in range(max_n + 1):
        kraus = np.zeros((max_n + 1, max_n + 1))
        for n in range(k, max_n + 1):
            kraus[n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
        if np.any(kraus):
            operators.append(kraus)
    return operators


def mode_kraus_operators(basis: FockBasis, mode: int, eta: float) -> list:
    """loss_kraus embedded on one mode of a multimode basis, as sparse matrices."""
    basis.check_mode(mode)
    _check_eta(eta)
    operators = []
    for k in range(basis.max_total_photons + 1):
        rows, cols, values = [], [], []
        for col, occupation in enumerate(basis.states):
            n = occupation[mode]
            if n < k:
                continue
            value = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
            if value == 0:
                continue
            target = list(occupation)
            target[mode] = n - k
            rows.append(basis.index(target))
            cols.append(col)
            values.append(value)
        if values:
            operators.append(sparse.csr_matrix(
                (values, (rows, cols)), shape=(basis.dimension, basis.dimension)))
    return operators


def _loss_by_kraus(rho, mode, eta):
    matrix = np.zeros_like(rho.matrix)
    for kraus in mode_kraus_operators(rho.basis, mode, eta):
        matrix += kraus @ (kraus @ rho.matrix.conj().T).conj().T
    return DensityOperator(rho.basis, matrix)


def _loss_by_ancilla(rho, mode, eta):
    basis = rho.basis
    extended = enumerate_basis(basis.mode_count + 1, basis.max_total_photons)
    embed = np.array([extended.index(occupation + (0,)) for occupation in basis.states])
    matrix = np.zeros((extended.dimension, extended.dimension), dtype=complex)
    matrix[np.ix_(embed, embed)] = rho.matrix
    coupler = element_operator(BeamsplitterSpec(eta, (mode, basis.mode_count)), extended)
    matrix = coupler @ (coupler @ matrix.conj().T).conj().T
    _, reduced = partial_trace_matrix(matrix, extended, [basis.mode_count])
    return DensityOperator(basis, reduced)


def apply_loss(rho: DensityOperator, mode: int, eta: float,
               method: LossMethod = LossMethod.KRAUS) -> DensityOperator:
    """Apply photon loss of efficiency eta to one mode.

    Args:
        rho (DensityOperator): Input state.
        mode (int): Mode that loses photons.
        eta (float): Survival probability per photon.
        method (LossMethod): KRAUS, or ANCILLA_TRACE which couples a vacuum
            mode through a beamsplitter of reflectivity eta and traces it out.

    Returns:
        DensityOperator: State after loss, on the same basis.
    """
    rho.basis.check_mode(mode)
    _check_eta(eta)
    if eta == 1.0:
        return rho
    if LossMethod(method) is LossMethod.ANCILLA_TRACE:
        return _loss_by_ancilla(rho, mode, eta)
    return _loss_by_kraus(rho, mode, eta)


def apply_elements(rho: DensityOperator, elements,
                   method: LossMethod = LossMethod.KRAUS) -> DensityOperator:
    """Apply circuit elements in list order.

    Beamsplitters and permutations act as U rho U^dagger; loss channels go
    through apply_loss with the given method.
    """
    for element in elements:
        if isinstance(element, LossChannel):
            rho = apply_loss(rho, element.mode, element.efficiency, method)
            continue
        operator = element_operator(element, rho.basis)
        matrix = operator @ (operator @ rho.matrix.conj().T).conj().T
        rho = DensityOperator(rho.basis, matrix)
    return rho
