"""Independent brute-force verification layer.

Everything here is deliberately naive and shares only the operator algebra
with the engine: unitary evolution goes through a dense eigendecomposition,
open-system evolution through a hand-rolled scaling-and-squaring exponential
of the vectorized generator, and the teleportation circuit is checked by
exhaustive enumeration of outcome branches and basis inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .errors import VerificationError
from .fockspace import DensityMatrix, FockOperator, SpaceLayout, StateVector
from .gates import (
    CPHASE,
    HADAMARD,
    OUTCOMES,
    CORRECTION_GATES,
    CorrectionTable,
    phases_equal,
)
from .lindblad import LindbladModel

UNITARY_DIM_CAP = 4096
#: Practical cap for the dense superoperator exponential (the generator is
#: dim^2 x dim^2, so memory and cubic cost bound this well below the engine's
#: reach).
LIOUVILLE_DIM_CAP = 64


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    engine_value: object
    oracle_value: object
    metric: str
    distance: float
    tolerance: float

    def __post_init__(self):
        if self.distance < 0:
            raise ValueError("distance must be nonnegative")

    @property
    def passed(self) -> bool:
        return self.distance <= self.tolerance

    def to_json_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "engine_value": _jsonable(self.engine_value),
            "oracle_value": _jsonable(self.oracle_value),
            "metric": self.metric,
            "distance": float(self.distance),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
        }


def _jsonable(v):
    if isinstance(v, (int, float, str, bool)) or v is None:
        return v
    if isinstance(v, complex):
        return [v.real, v.imag]
    return str(v)


# ---------------------------------------------------------------------------
# Exact propagators
# ---------------------------------------------------------------------------

def exact_unitary_evolve(h: FockOperator, psi0: StateVector, t: float) -> StateVector:
    """e^{-i H t} psi0 via dense eigendecomposition of the hermitian generator."""
    if h.dim > UNITARY_DIM_CAP:
        raise ValueError(f"dimension {h.dim} exceeds the oracle cap {UNITARY_DIM_CAP}")
    if h.layout != psi0.layout:
        raise ValueError("Hamiltonian and state layouts differ")
    if not h.is_hermitian(tol=1e-10):
        raise ValueError("generator is not hermitian")
    w, v = np.linalg.eigh(h.matrix)
    amps = v @ (np.exp(-1j * w * t) * (v.conj().T @ psi0.amplitudes))
    err = abs(np.linalg.norm(amps) - 1.0)
    if err > 1e-11:
        raise VerificationError(f"unitarity error {err:.3g} exceeds 1e-11")
    return StateVector(psi0.layout, amps)


def _expm_taylor(a: np.ndarray) -> np.ndarray:
    """Scaling-and-squaring Taylor exponential (independent of scipy.linalg.expm)."""
    norm = np.linalg.norm(a, 1)
    squarings = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0.5 else 0
    x = a / (2 ** squarings)
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, 60):
        term = term @ x / k
        out = out + term
        if np.linalg.norm(term, 1) < 1e-18 * max(np.linalg.norm(out, 1), 1.0):
            break
    for _ in range(squarings):
        out = out @ out
    return out


def exact_liouville_evolve(model: LindbladModel, rho0: DensityMatrix, t: float) -> DensityMatrix:
    """Exponential of the vectorized generator applied to the vectorized state."""
    n = model.layout.dim
    if n > LIOUVILLE_DIM_CAP:
        raise ValueError(f"dimension {n} exceeds the oracle cap {LIOUVILLE_DIM_CAP}")
    if rho0.layout != model.layout:
        raise ValueError("state layout does not match the model")
    L = _build_liouvillian(model)
    v = rho0.matrix.T.reshape(-1)
    vt = _expm_taylor(L * t) @ v
    rho = vt.reshape(n, n).T
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(model.layout, rho, trace_tol=1e-8, herm_tol=1e-8, pos_tol=1e-7)


def _build_liouvillian(model: LindbladModel) -> np.ndarray:
    # Deliberately duplicated from the engine (common-mode bug avoidance).
    n = model.layout.dim
    eye = np.eye(n, dtype=complex)
    h = model.hamiltonian.matrix
    L = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for d in model.dissipators:
        x = d.operator.matrix
        xd = x.conj().T
        xdx = xd @ x
        L = L + d.rate * (2.0 * np.kron(x.conj(), x)
                          - np.kron(eye, xdx) - np.kron(xdx.T, eye))
    return L


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _as_matrix(state) -> np.ndarray:
    """Accept either a DensityMatrix or a bare matrix."""
    return state.matrix if isinstance(state, DensityMatrix) else np.asarray(state, complex)


def _check_layouts(rho, sigma):
    if isinstance(rho, DensityMatrix) and isinstance(sigma, DensityMatrix):
        if rho.layout != sigma.layout:
            raise ValueError("layout mismatch")


def trace_distance(rho, sigma) -> float:
    _check_layouts(rho, sigma)
    diff = _as_matrix(rho) - _as_matrix(sigma)
    w = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.abs(w).sum())


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    _check_layouts(rho, sigma)
    rho, sigma = _as_matrix(rho), _as_matrix(sigma)
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    sqrt_rho = (v * np.sqrt(w)) @ v.conj().T
    inner = sqrt_rho @ sigma @ sqrt_rho
    ev = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    f = np.sqrt(np.clip(ev, 0.0, None)).sum() ** 2
    return float(min(max(f, 0.0), 1.0))


def fidelity_metrics(rho, sigma) -> dict[str, float]:
    return {"trace_distance": trace_distance(rho, sigma),
            "state_fidelity": state_fidelity(rho, sigma)}


# ---------------------------------------------------------------------------
# Teleportation circuit verification
# ---------------------------------------------------------------------------

_BASIS_INPUTS = {
    "|0>": np.array([1.0, 0.0], dtype=complex),
    "|1>": np.array([0.0, 1.0], dtype=complex),
    "|+>": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2),
    "|+i>": np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2),
}

DEFAULT_RESOURCE = np.array([0.0, 1.0, 1.0, 0.0], dtype=complex) / np.sqrt(2)


def default_bell_circuit() -> np.ndarray:
    """Hadamards on both qubits after a controlled-phase: the measurement-basis
    change used by the protocol (acts on the input qubit tensor resource qubit 1)."""
    return np.kron(HADAMARD, HADAMARD) @ CPHASE


def verify_teleportation(bell_circuit: Optional[np.ndarray] = None,
                         resource: Optional[np.ndarray] = None
                         ) -> tuple[OracleReport, Optional[CorrectionTable]]:
    """Exhaustively check the qubit-level teleportation circuit.

    Enumerates the 4 measurement branches for the inputs |0>, |1>, |+>, |+i>
    and searches for the unique local correction (a Pauli, possibly composed with a
    Hadamard) that
    restores the input on every branch.  Returns the report and the table
    (None when no consistent table exists).
    """
    circuit = default_bell_circuit() if bell_circuit is None else np.asarray(bell_circuit, complex)
    res = DEFAULT_RESOURCE if resource is None else np.asarray(resource, complex)
    if circuit.shape != (4, 4):
        raise ValueError("bell_circuit must be 4x4 (input qubit x resource qubit 1)")

    mapping = {}
    worst = 0.0
    consistent = True
    for branch, (b0, b1) in enumerate(product((0, 1), repeat=2)):
        outcome = f"{b0}{b1}"
        candidates = []
        for gate_name, gate in CORRECTION_GATES.items():
            ok = True
            for psi_in in _BASIS_INPUTS.values():
                # full state on (input, r1, r2); circuit acts on (input, r1)
                full = np.kron(psi_in, res)
                full = np.kron(circuit, np.eye(2)) @ full
                # project qubits 0 and 1 onto the outcome bits
                t = full.reshape(2, 2, 2)
                out_state = t[b0, b1, :]
                if np.linalg.norm(out_state) < 1e-12:
                    ok = False
                    break
                out_state = gate @ (out_state / np.linalg.norm(out_state))
                if not phases_equal(psi_in, out_state, tol=1e-9):
                    ok = False
                    break
            if ok:
                candidates.append(gate_name)
        if len(candidates) != 1:
            consistent = False
            break
        mapping[outcome] = candidates[0]

    table = CorrectionTable(mapping) if consistent and len(mapping) == 4 else None
    report = OracleReport(
        quantity="teleportation correction table",
        engine_value=dict(mapping) if table else None,
        oracle_value="unique total table",
        metric="branch consistency",
        distance=0.0 if table else 1.0,
        tolerance=0.0,
    )
    return report, table


# ---------------------------------------------------------------------------
# Batch verification
# ---------------------------------------------------------------------------

def _random_model(rng: np.random.Generator, layout: SpaceLayout,
                  n_diss: int = 2, rate_scale: float = 0.5) -> LindbladModel:
    n = layout.dim
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = FockOperator(layout, 0.5 * (m + m.conj().T))
    diss = []
    for _ in range(n_diss):
        x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        x /= np.linalg.norm(x)
        diss.append(_mk_dissipator(layout, x, float(rng.uniform(0.05, rate_scale))))
    return LindbladModel(h, tuple(diss))


def _mk_dissipator(layout, matrix, rate):
    from .lindblad import Dissipator

    return Dissipator(FockOperator(layout, matrix), rate)


def _random_density(rng: np.random.Generator, layout: SpaceLayout) -> DensityMatrix:
    n = layout.dim
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = m @ m.conj().T
    rho /= np.trace(rho).real
    return DensityMatrix(layout, rho)


def verify_all(seed: int = 0, instances: int = 20) -> list[OracleReport]:
    """Randomized oracle-vs-engine agreement suite.

    Covers open-system evolution, steady states, closed-system consistency of
    the two oracle propagators, metric inequalities, and the teleportation
    table.  Any report failing its tolerance means the build is broken.
    """
    from . import lindblad as engine

    rng = np.random.default_rng(seed)
    reports: list[OracleReport] = []

    # engine evolve vs exact superoperator exponential
    for k in range(instances):
        layout = SpaceLayout.single("m", int(rng.integers(2, 5)))
        model = _random_model(rng, layout)
        rho0 = _random_density(rng, layout)
        t = float(rng.uniform(0.2, 2.0))
        method = "adaptive" if k % 2 else "expm"
        final = engine.evolve(model, rho0, t, num_samples=5, method=method,
                              truncation_threshold=1.1).final()
        ref = exact_liouville_evolve(model, rho0, t)
        reports.append(OracleReport(
            quantity=f"evolve[{method}] vs exact exponential #{k}",
            engine_value=None, oracle_value=None,
            metric="trace_distance", distance=trace_distance(final, ref),
            tolerance=1e-6))

    # engine steady state vs long-time exact evolution and generator residual
    for k in range(5):
        layout = SpaceLayout.single("m", 4)
        nbar = float(rng.uniform(0.0, 1.0))
        gamma = float(rng.uniform(0.3, 1.0))
        from .fockspace import annihilation
        from .lindblad import LindbladModel as LM, thermal_dissipators

        a = annihilation(4, "m")
        h = FockOperator(a.layout, np.diag(rng.uniform(0, 1, 4)).astype(complex))
        model = LM(h, thermal_dissipators(a, gamma, nbar))
        ss = engine.steady_state(model)
        ref = exact_liouville_evolve(model, _random_density(rng, layout), 60.0 / gamma)
        reports.append(OracleReport(
            quantity=f"steady state vs long-time limit #{k}",
            engine_value=None, oracle_value=None,
            metric="trace_distance", distance=trace_distance(ss, ref),
            tolerance=1e-6))

    # oracle self-consistency: closed-system superoperator equals lifted unitary
    for k in range(5):
        layout = SpaceLayout.single("m", 3)
        model = _random_model(rng, layout, n_diss=0)
        psi = _random_density(rng, layout)
        # use a pure state for the unitary reference
        vec = rng.normal(size=3) + 1j * rng.normal(size=3)
        psi0 = StateVector(layout, vec / np.linalg.norm(vec))
        t = float(rng.uniform(0.2, 1.5))
        lifted = exact_liouville_evolve(model, DensityMatrix.from_state(psi0), t)
        unit = exact_unitary_evolve(model.hamiltonian, psi0, t)
        reports.append(OracleReport(
            quantity=f"superoperator vs unitary lift #{k}",
            engine_value=None, oracle_value=None,
            metric="trace_distance",
            distance=trace_distance(lifted, DensityMatrix.from_state(unit)),
            tolerance=1e-10))

    # Fuchs-van de Graaff inequalities on random pairs
    worst = 0.0
    layout = SpaceLayout.single("m", 4)
    for _ in range(100):
        r, s = _random_density(rng, layout), _random_density(rng, layout)
        d = trace_distance(r, s)
        f = state_fidelity(r, s)
        lo, hi = 1.0 - np.sqrt(f), np.sqrt(1.0 - f)
        worst = max(worst, lo - d, d - hi)
    reports.append(OracleReport(
        quantity="Fuchs-van de Graaff bounds (100 random pairs)",
        engine_value=None, oracle_value=None,
        metric="max bound violation", distance=max(worst, 0.0), tolerance=1e-9))

    tele_report, _ = verify_teleportation()
    reports.append(tele_report)
    return reports


def reports_to_json(reports: list[OracleReport]) -> list[dict]:
    return [r.to_json_dict() for r in reports]
