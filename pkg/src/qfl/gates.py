"""Gate catalog shared by the parser, the mutation engine and the simulator.

Multi-qubit matrices are written in the basis |a b c> where ``a`` is the
first operand (most significant) and ``c`` the last.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin, sqrt, pi
from typing import Callable

import numpy as np

UNITARITY_ATOL = 1e-12


@dataclass(frozen=True)
class GateSpec:
    name: str
    arity: int
    param_count: int
    build: Callable[..., np.ndarray]

    def matrix(self, *params: float) -> np.ndarray:
        if len(params) != self.param_count:
            raise ValueError(f"{self.name} takes {self.param_count} parameters, got {len(params)}")
        return self.build(*params)


def _const(m) -> Callable[[], np.ndarray]:
    arr = np.asarray(m, dtype=complex)
    arr.setflags(write=False)
    return lambda: arr


_S2 = 1 / sqrt(2)
_T = np.exp(1j * pi / 4)


def _rx(t):
    return np.array([[cos(t / 2), -1j * sin(t / 2)], [-1j * sin(t / 2), cos(t / 2)]], dtype=complex)


def _ry(t):
    return np.array([[cos(t / 2), -sin(t / 2)], [sin(t / 2), cos(t / 2)]], dtype=complex)


def _rz(t):
    return np.array([[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=complex)


def _p(t):
    return np.array([[1, 0], [0, np.exp(1j * t)]], dtype=complex)


def _controlled(u: np.ndarray, controls: int) -> np.ndarray:
    dim = 2 ** controls * u.shape[0]
    out = np.eye(dim, dtype=complex)
    out[-u.shape[0]:, -u.shape[0]:] = u
    return out


_X = np.array([[0, 1], [1, 0]])
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])

GATES: dict[str, GateSpec] = {
    g.name: g
    for g in (
        GateSpec("id", 1, 0, _const(np.eye(2))),
        GateSpec("x", 1, 0, _const(_X)),
        GateSpec("y", 1, 0, _const([[0, -1j], [1j, 0]])),
        GateSpec("z", 1, 0, _const([[1, 0], [0, -1]])),
        GateSpec("h", 1, 0, _const(np.array([[1, 1], [1, -1]]) * _S2)),
        GateSpec("s", 1, 0, _const([[1, 0], [0, 1j]])),
        GateSpec("sdg", 1, 0, _const([[1, 0], [0, -1j]])),
        GateSpec("t", 1, 0, _const([[1, 0], [0, _T]])),
        GateSpec("tdg", 1, 0, _const([[1, 0], [0, np.conj(_T)]])),
        GateSpec("rx", 1, 1, _rx),
        GateSpec("ry", 1, 1, _ry),
        GateSpec("rz", 1, 1, _rz),
        GateSpec("p", 1, 1, _p),
        GateSpec("cx", 2, 0, _const(_controlled(_X, 1))),
        GateSpec("cz", 2, 0, _const(np.diag([1, 1, 1, -1]))),
        GateSpec("swap", 2, 0, _const(_SWAP)),
        GateSpec("ccx", 3, 0, _const(_controlled(_X, 2))),
        GateSpec("cswap", 3, 0, _const(_controlled(_SWAP, 1))),
    )
}

# Interchangeable gates for replacement mutants: same arity, same parameter count.
GATE_FAMILIES: tuple[tuple[str, ...], ...] = (
    ("id", "x", "y", "z", "h", "s", "sdg", "t", "tdg"),
    ("rx", "ry", "rz", "p"),
    ("cx", "cz", "swap"),
    ("ccx", "cswap"),
)


def family_of(name: str) -> tuple[str, ...]:
    for fam in GATE_FAMILIES:
        if name in fam:
            return fam
    raise KeyError(name)


def check_unitarity(atol: float = UNITARITY_ATOL) -> None:
    """Raise if any catalog matrix is not unitary; parametric gates are probed at a few angles."""
    probes = (0.0, 0.3, pi / 2, pi, 2.5)
    for spec in GATES.values():
        angles = [()] if spec.param_count == 0 else [(a,) for a in probes]
        for args in angles:
            u = spec.matrix(*args)
            if u.shape != (2 ** spec.arity,) * 2:
                raise AssertionError(f"{spec.name}: wrong shape {u.shape}")
            err = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
            if err > atol:
                raise AssertionError(f"{spec.name}{args}: U^dagger U deviates from I by {err:g}")


check_unitarity()
