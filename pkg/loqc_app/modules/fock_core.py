"""
Fock-space state algebra for the C-sign gate analysis app
Exact finite-dimensional linear algebra over truncated multimode Fock space.

This module provides:
- FockBasis: deterministic enumeration of occupation vectors
- PureState / DensityOperator: amplitude vectors and matrices over a basis
- tensor products, partial traces, number-state projection
- fidelity against a pure state and trace normalization

Every circuit element used by the gates conserves total photon number, so
truncating at a total photon bound is exact rather than an approximation.
"""

# Standard library imports
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

# Third-party imports
import numpy as np

# Local application imports
from loqc_app.modules.exceptions import (
    BasisMismatchError,
    DimensionCapError,
    InvalidModeError,
    NearZeroTraceError,
    SimulationError,
    TruncationError,
)

logger = logging.getLogger(__name__)

# Constants
DEFAULT_DIMENSION_CAP = 10 ** 6
TRACE_THRESHOLD = 1e-12
NORM_SLACK = 1e-12
FIDELITY_SLACK = 1e-12


@dataclass(frozen=True)
class FockBasis:
    """Ordered enumeration of occupation vectors with bounded photon number.

    States are sorted lexicographically by occupation vector, so indices are
    reproducible between runs. Two bases are equal when they have the same
    mode count and photon bound.

    Attributes:
        mode_count (int): Number of optical modes.
        max_total_photons (int): Upper bound on the total photon number.
        states (tuple): Occupation vectors, each a tuple of length mode_count.
    """

    mode_count: int
    max_total_photons: int
    states: tuple = field(compare=False, repr=False)

    def __post_init__(self):
        index = {occupation: i for i, occupation in enumerate(self.states)}
        occupations = np.array(self.states, dtype=np.int64).reshape(
            len(self.states), self.mode_count
        )
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "occupations", occupations)
        object.__setattr__(self, "photon_numbers", occupations.sum(axis=1))

    @property
    def dimension(self) -> int:
        """Number of basis states."""
        return len(self.states)

    def index(self, occupation) -> int:
        """Return the index of an occupation vector.

        Args:
            occupation (Sequence[int]): Photon number per mode.

        Returns:
            int: Position of the vector in the basis.

        Raises:
            TruncationError: If the vector is not part of the basis.
        """
        try:
            return self._index[tuple(int(n) for n in occupation)]
        except KeyError:
            raise TruncationError(
                f"occupation {tuple(occupation)} is outside the basis "
                f"({self.mode_count} modes, <= {self.max_total_photons} photons)"
            ) from None

    def contains(self, occupation) -> bool:
        return tuple(int(n) for n in occupation) in self._index

    def occupation(self, index: int) -> tuple:
        return self.states[index]

    def check_mode(self, mode: int):
        if not 0 <= mode < self.mode_count:
            raise InvalidModeError(
                f"mode {mode} outside range 0..{self.mode_count - 1}"
            )

    def sub_basis(self, modes) -> "FockBasis":
        """Basis over a subset of modes with the same photon bound."""
        for mode in modes:
            self.check_mode(mode)
        return enumerate_basis(len(modes), self.max_total_photons)


def _compositions(mode_count, total):
    # first coordinate ascending gives lexicographic order
    if mode_count == 0:
        yield ()
        return
    for n in range(total + 1):
        for rest in _compositions(mode_count - 1, total - n):
            yield (n,) + rest


@lru_cache(maxsize=64)
def enumerate_basis(mode_count: int, max_total_photons: int,
                    dimension_cap: int = DEFAULT_DIMENSION_CAP) -> FockBasis:
    """Enumerate every occupation vector with total photons <= the bound.

    Args:
        mode_count (int): Number of modes, at least 1.
        max_total_photons (int): Non-negative photon bound.
        dimension_cap (int): Largest dimension accepted.

    Returns:
        FockBasis: The ordered basis; its dimension is
            C(max_total_photons + mode_count, mode_count).

    Raises:
        SimulationError: If mode_count < 1 or the photon bound is negative.
        DimensionCapError: If the basis would exceed dimension_cap.
    """
    if mode_count < 1:
        raise SimulationError(f"mode_count must be >= 1, got {mode_count}")
    if max_total_photons < 0:
        raise SimulationError(
            f"max_total_photons must be >= 0, got {max_total_photons}"
        )
    dimension = math.comb(max_total_photons + mode_count, mode_count)
    if dimension > dimension_cap:
        raise DimensionCapError(
            f"basis of {mode_count} modes with <= {max_total_photons} photons "
            f"has dimension {dimension} > cap {dimension_cap}"
        )
    states = tuple(_compositions(mode_count, max_total_photons))
    logger.debug("Enumerated Fock basis: %d modes, <= %d photons, dim %d",
                 mode_count, max_total_photons, dimension)
    return FockBasis(mode_count, max_total_photons, states)


@dataclass(frozen=True)
class PureState:
    """Complex amplitude vector over a FockBasis.

    Sub-normalized vectors are allowed; post-selection produces them.
    """

    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if amplitudes.shape != (self.basis.dimension,):
            raise BasisMismatchError(
                f"expected {self.basis.dimension} amplitudes, got {amplitudes.shape}"
            )
        norm_sq = float(np.vdot(amplitudes, amplitudes).real)
        if norm_sq > 1 + NORM_SLACK:
            raise SimulationError(f"state norm^2 {norm_sq} exceeds 1")
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_occupations(cls, basis: FockBasis, terms: dict) -> "PureState":
        """Build a state from {occupation: amplitude}."""
        amplitudes = np.zeros(basis.dimension, dtype=complex)
        for occupation, amplitude in terms.items():
            amplitudes[basis.index(occupation)] += amplitude
        return cls(basis, amplitudes)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def to_density(self) -> "DensityOperator":
        return DensityOperator(self.basis, np.outer(self.amplitudes,
                                                    self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityOperator:
    """Complex square matrix over a FockBasis."""

    basis: FockBasis
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        dimension = self.basis.dimension
        if matrix.shape != (dimension, dimension):
            raise BasisMismatchError(
                f"expected a {dimension}x{dimension} matrix, got {matrix.shape}"
            )
        object.__setattr__(self, "matrix", matrix)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def validate(self, hermitian_tol=1e-10, eigen_tol=-1e-10, trace_slack=1e-10):
        """Check Hermiticity, positivity and the trace bound.

        Raises:
            SimulationError: Describing the first violated property.
        """
        deviation = np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0)
        if deviation > hermitian_tol:
            raise SimulationError(f"not Hermitian (max deviation {deviation:.2e})")
        smallest = np.linalg.eigvalsh(self.matrix).min()
        if smallest < eigen_tol:
            raise SimulationError(f"not positive semidefinite (eigenvalue {smallest:.2e})")
        trace = self.trace()
        if not -trace_slack <= trace <= 1 + trace_slack:
            raise SimulationError(f"trace {trace} outside [0, 1]")


def tensor(a: PureState, b: PureState, max_total_photons=None) -> PureState:
    """Tensor product of two pure states, modes of a first.

    Args:
        a (PureState): State on the leading modes.
        b (PureState): State on the trailing modes.
        max_total_photons (int, optional): Photon bound of the output basis.
            Defaults to the sum of both bounds, which never truncates.

    Returns:
        PureState: Amplitude of |m,n> is a(m) * b(n).

    Raises:
        TruncationError: If a nonzero amplitude would be dropped.
    """
    if max_total_photons is None:
        max_total_photons = a.basis.max_total_photons + b.basis.max_total_photons
    out_basis = enumerate_basis(a.basis.mode_count + b.basis.mode_count,
                                max_total_photons)
    amplitudes = np.zeros(out_basis.dimension, dtype=complex)
    for i in np.flatnonzero(a.amplitudes):
        for j in np.flatnonzero(b.amplitudes):
            occupation = a.basis.states[i] + b.basis.states[j]
            if not out_basis.contains(occupation):
                raise TruncationError(
                    f"nonzero amplitude on {occupation} exceeds photon bound "
                    f"{max_total_photons}"
                )
            amplitudes[out_basis.index(occupation)] = a.amplitudes[i] * b.amplitudes[j]
    return PureState(out_basis, amplitudes)


def _trace_groups(basis, traced_modes):
    """Group basis indices by traced-mode occupation.

    Returns the reduced basis and a list of (indices, reduced_indices) pairs.
    """
    kept = [m for m in range(basis.mode_count) if m not in traced_modes]
    reduced = enumerate_basis(len(kept), basis.max_total_photons)
    groups = {}
    for i, occupation in enumerate(basis.states):
        key = tuple(occupation[m] for m in traced_modes)
        target = reduced.index(tuple(occupation[m] for m in kept))
        groups.setdefault(key, ([], []))
        groups[key][0].append(i)
        groups[key][1].append(target)
    return reduced, [(np.array(g), np.array(r)) for g, r in groups.values()]


def partial_trace_matrix(matrix, basis: FockBasis, traced_modes):
    """Partial trace on a raw matrix (or a stack of matrices).

    Returns:
        tuple: (reduced basis, reduced matrix or stack)
    """
    traced_modes = sorted(set(int(m) for m in traced_modes))
    for mode in traced_modes:
        basis.check_mode(mode)
    if len(traced_modes) >= basis.mode_count:
        raise InvalidModeError("cannot trace out every mode")
    reduced, groups = _trace_groups(basis, tuple(traced_modes))
    shape = matrix.shape[:-2] + (reduced.dimension, reduced.dimension)
    out = np.zeros(shape, dtype=complex)
    for indices, targets in groups:
        out[..., targets[:, None], targets[None, :]] += matrix[..., indices[:, None], indices[None, :]]
    return reduced, out


def partial_trace(rho: DensityOperator, traced_modes) -> DensityOperator:
    """Trace out a proper subset of modes.

    Args:
        rho (DensityOperator): State over all modes.
        traced_modes (Iterable[int]): Modes to remove.

    Returns:
        DensityOperator: State on the remaining modes, in their original order.

    Raises:
        InvalidModeError: For an out-of-range index or when every mode is traced.
    """
    reduced, matrix = partial_trace_matrix(rho.matrix, rho.basis, traced_modes)
    return DensityOperator(reduced, matrix)


def project_number(rho: DensityOperator, mode: int, n: int):
    """Project one mode onto the number state |n>.

    Args:
        rho (DensityOperator): State to project.
        mode (int): Mode being measured.
        n (int): Photon count accepted.

    Returns:
        tuple: (P rho P unnormalized, probability of the outcome)
    """
    rho.basis.check_mode(mode)
    if n > rho.basis.max_total_photons:
        raise SimulationError(
            f"photon count {n} exceeds basis bound {rho.basis.max_total_photons}"
        )
    mask = (rho.basis.occupations[:, mode] == n).astype(float)
    projected = rho.matrix * np.outer(mask, mask)
    probability = float(np.trace(projected).real)
    return DensityOperator(rho.basis, projected), probability


def drop_mode(rho: DensityOperator, mode: int) -> DensityOperator:
    """Remove a mode left in a definite number state by project_number."""
    return partial_trace(rho, [mode])


def fidelity(rho: DensityOperator, psi: PureState) -> float:
    """Return <psi|rho|psi> for a normalized rho and psi.

    Raises:
        BasisMismatchError: If rho and psi live on different bases.
        SimulationError: If either operand is not normalized.
    """
    if rho.basis != psi.basis:
        raise BasisMismatchError("fidelity operands use different bases")
    trace = rho.trace()
    if abs(trace - 1) > 1e-9:
        raise SimulationError(f"rho must be normalized (trace {trace})")
    norm_sq = psi.norm_squared()
    if abs(norm_sq - 1) > 1e-9:
        raise SimulationError(f"psi must be normalized (norm^2 {norm_sq})")
    value = float(np.vdot(psi.amplitudes, rho.matrix @ psi.amplitudes).real)
    if -FIDELITY_SLACK <= value < 0:
        return 0.0
    if 1 < value <= 1 + FIDELITY_SLACK:
        return 1.0
    return value


def normalize(rho: DensityOperator, threshold: float = TRACE_THRESHOLD) -> DensityOperator:
    """Rescale rho to unit trace.

    Raises:
        NearZeroTraceError: If the trace does not exceed threshold.
    """
    trace = rho.trace()
    if trace <= threshold:
        raise NearZeroTraceError(trace, threshold)
    return DensityOperator(rho.basis, rho.matrix / trace)
