"""Lossless phasor network and its reduction to device terminals.

Sources with a fixed internal voltage (generator EMFs, the external grid)
are "known" nodes ``K``; every bus is an unknown node ``U``.  Inverters
inject a current at their bus.  Eliminating ``U`` once gives

    V_U = A E_K + C I_U
    I_K = M_KK E_K + M_KU I_U
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Network:
    n_bus: int
    branches: tuple           # (from, to, B) with line admittance -jB
    loads: tuple = ()         # (bus, g, b) shunt admittance g + jb
    external_grid: dict | None = None   # {"bus": k, "x": tie reactance, "v": magnitude}
    names: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_bus < 1:
            raise NetworkError("network needs at least one bus")
        for f, t, B in self.branches:
            if not (0 <= f < self.n_bus and 0 <= t < self.n_bus) or f == t:
                raise NetworkError(f"bad branch ({f}, {t})")
            if not B > 0:
                raise NetworkError(f"branch ({f}, {t}) has non-positive susceptance {B}")
        for bus, _, _ in self.loads:
            if not 0 <= bus < self.n_bus:
                raise NetworkError(f"load at unknown bus {bus}")
        if not self.connected():
            raise NetworkError("network graph is not connected")

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    def connected(self) -> bool:
        adj = [[] for _ in range(self.n_bus)]
        for f, t, _ in self.branches:
            adj[f].append(t)
            adj[t].append(f)
        seen = {0}
        stack = [0]
        while stack:
            k = stack.pop()
            for j in adj[k]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == self.n_bus

    def bus_admittance(self) -> np.ndarray:
        Y = np.zeros((self.n_bus, self.n_bus), dtype=complex)
        for f, t, B in self.branches:
            y = -1j * B
            Y[f, f] += y
            Y[t, t] += y
            Y[f, t] -= y
            Y[t, f] -= y
        for bus, g, b in self.loads:
            Y[bus, bus] += g + 1j * b
        return Y

    def to_dict(self) -> dict:
        return {"n_bus": self.n_bus, "branches": [list(b) for b in self.branches],
                "loads": [list(l) for l in self.loads], "external_grid": self.external_grid}


@dataclass(frozen=True)
class ReducedNetwork:
    """Network seen from the source EMFs and inverter injections.

    Source order: generators (in the order given), then the external grid.
    """

    M_KK: np.ndarray
    M_KI: np.ndarray
    A_I: np.ndarray
    C_II: np.ndarray
    A: np.ndarray            # all buses
    C_UI: np.ndarray         # all buses x inverter injections
    source_bus: np.ndarray   # terminal bus of each source, for bookkeeping
    inverter_bus: np.ndarray
    Y_bus: np.ndarray
    loads: tuple

    def solve(self, E_K: np.ndarray, I_inv: np.ndarray):
        """Source currents and inverter-bus voltages."""
        I_K = self.M_KK @ E_K + self.M_KI @ I_inv
        V_I = self.A_I @ E_K + self.C_II @ I_inv
        return I_K, V_I

    def bus_voltages(self, E_K: np.ndarray, I_inv: np.ndarray) -> np.ndarray:
        return self.A @ E_K + self.C_UI @ I_inv

    def load_power(self, V_bus: np.ndarray) -> float:
        p = 0.0
        for bus, g, _ in self.loads:
            p += g * abs(V_bus[bus]) ** 2
        return p


def reduce(net: Network, gen_buses, gen_xd, inverter_buses) -> ReducedNetwork:
    """Eliminate all buses, keeping generator EMFs, the external grid and
    inverter current injections.  ``gen_xd[i] == 0`` ties the EMF directly
    to the bus."""
    gen_buses = [int(b) for b in gen_buses]
    inverter_buses = [int(b) for b in inverter_buses]
    if len(set(inverter_buses)) != len(inverter_buses):
        raise NetworkError("at most one inverter per bus")
    n = net.n_bus
    extra = []          # (bus, B) internal node behind a reactance
    known_bus = []      # buses that are themselves source nodes
    src_node = []
    sources = list(zip(gen_buses, [float(x) for x in gen_xd]))
    if net.external_grid is not None:
        sources.append((int(net.external_grid["bus"]), float(net.external_grid.get("x", 0.0))))
    for bus, x in sources:
        if not 0 <= bus < n:
            raise NetworkError(f"source at unknown bus {bus}")
        if x > 0:
            src_node.append(n + len(extra))
            extra.append((bus, 1.0 / x))
        else:
            if bus in known_bus:
                raise NetworkError(f"two stiff sources at bus {bus}")
            known_bus.append(bus)
            src_node.append(bus)
    N = n + len(extra)
    Y = np.zeros((N, N), dtype=complex)
    Y[:n, :n] = net.bus_admittance()
    for i, (bus, B) in enumerate(extra):
        k = n + i
        y = -1j * B
        Y[k, k] += y
        Y[bus, bus] += y
        Y[k, bus] -= y
        Y[bus, k] -= y
    K = np.array(src_node, dtype=int)
    U = np.array([k for k in range(n) if k not in known_bus], dtype=int)
    for b in inverter_buses:
        if b in known_bus:
            raise NetworkError(f"inverter at bus {b} which is held by a stiff source")
    pos = {int(b): i for i, b in enumerate(U)}
    Y_UU = Y[np.ix_(U, U)]
    Y_UK = Y[np.ix_(U, K)]
    Y_KU = Y[np.ix_(K, U)]
    Y_KK = Y[np.ix_(K, K)]
    if len(U):
        cond = np.linalg.cond(Y_UU)
        if not np.isfinite(cond) or cond > 1e14:
            raise NetworkError("bus admittance block is singular (island without a source?)")
        Z = np.linalg.inv(Y_UU)
    else:
        Z = np.zeros((0, 0), dtype=complex)
    A_U = -Z @ Y_UK
    rows = np.array([pos[b] for b in inverter_buses], dtype=int)
    C_cols = Z[:, rows]
    # full bus map (stiff buses equal their source EMF)
    A = np.zeros((n, len(K)), dtype=complex)
    C_UI = np.zeros((n, len(rows)), dtype=complex)
    A[U] = A_U
    C_UI[U] = C_cols
    for j, node in enumerate(K):
        if node < n:
            A[node, j] = 1.0
    return ReducedNetwork(
        M_KK=Y_KK + Y_KU @ A_U,
        M_KI=Y_KU @ C_cols,
        A_I=A_U[rows],
        C_II=C_cols[rows],
        A=A,
        C_UI=C_UI,
        source_bus=np.array([b for b, _ in sources], dtype=int),
        inverter_bus=np.array(inverter_buses, dtype=int),
        Y_bus=Y,
        loads=tuple(net.loads),
    )
