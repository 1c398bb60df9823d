"""Problem instances: agent costs, coupling constraint, validation, file I/O.

An instance couples N agents through one affine equality constraint
``A x = b`` (A split into per-agent column blocks) over a communication
graph.  This module also ships the five-agent electricity-market benchmark
(two generating companies minimizing quadratic cost, three users
maximizing quadratic-branch utility, supply equal to demand) and a plain
text file format for instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .functions import (
    Box,
    L1,
    NonsmoothFunction,
    NormPenalty,
    Quadratic,
    SmoothFunction,
    Zero,
)
from .topology import Graph, check_connected

__all__ = [
    "AgentProblem",
    "MarketParams",
    "ProblemInstance",
    "UCParams",
    "UserParams",
    "ValidationCheck",
    "ValidationReport",
    "build_market",
    "load_instance",
    "market_graph",
    "save_instance",
    "validate",
]


class AgentProblem:
    """One agent's private data: costs, feasible set, coupling block.

    ``f`` is the smooth strongly convex part, ``g`` bundles the nonsmooth
    penalty with the feasible-set indicator, ``a_block`` is this agent's
    (B, M) column block of the coupling matrix, and ``kappa`` is the
    agent's share of the constraint offset term (shares sum to one across
    the network).
    """

    def __init__(
        self,
        f: SmoothFunction,
        g: NonsmoothFunction,
        a_block,
        kappa: float,
    ):
        self.f = f
        self.g = g
        a = np.asarray(a_block, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        elif a.ndim == 1:
            a = a.reshape(1, -1)
        if a.shape[1] != f.dim:
            raise ValueError(
                f"coupling block has {a.shape[1]} columns but f lives on R^{f.dim}"
            )
        self.a_block = a
        if kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {kappa}")
        self.kappa = float(kappa)

    @property
    def m(self) -> int:
        return self.f.dim

    @property
    def b_dim(self) -> int:
        return self.a_block.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AgentProblem)
            and self.f == other.f
            and self.g == other.g
            and np.array_equal(self.a_block, other.a_block)
            and self.kappa == other.kappa
        )

    def __repr__(self) -> str:
        return (
            f"AgentProblem(f={self.f!r}, g={self.g!r}, "
            f"a_block={self.a_block.tolist()}, kappa={self.kappa})"
        )


class ProblemInstance:
    """N coupled agents, the constraint offset b, and the network graph."""

    def __init__(self, agents: Sequence[AgentProblem], b, graph: Graph):
        self.agents = list(agents)
        if not self.agents:
            raise ValueError("instance needs at least one agent")
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        if self.b.size == 0:
            raise ValueError(
                "coupling constraint is empty (no multiplier to agree on); "
                "solve the agents independently instead"
            )
        self.graph = graph
        m = self.agents[0].m
        b_dim = self.b.shape[0]
        for idx, a in enumerate(self.agents, start=1):
            if a.m != m:
                raise ValueError(f"agent {idx} has dimension {a.m}, expected {m}")
            if a.b_dim != b_dim:
                raise ValueError(
                    f"agent {idx} coupling block has {a.b_dim} rows, expected {b_dim}"
                )
        if graph.n_vertices != len(self.agents):
            raise ValueError(
                f"graph has {graph.n_vertices} vertices for {len(self.agents)} agents"
            )

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return self.agents[0].m

    @property
    def b_dim(self) -> int:
        return self.b.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        """(N, M, B)."""
        return (self.n_agents, self.m, self.b_dim)

    def kappa_vector(self) -> np.ndarray:
        return np.array([a.kappa for a in self.agents])

    def coupling_matrix(self) -> np.ndarray:
        """Dense (B, N*M) coupling matrix; for reports and tests only."""
        return np.hstack([a.a_block for a in self.agents])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ProblemInstance)
            and self.agents == other.agents
            and np.array_equal(self.b, other.b)
            and self.graph == other.graph
        )


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool | None  # None means "not checked"
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[ValidationCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def failures(self) -> list[ValidationCheck]:
        return [c for c in self.checks if c.passed is False]

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = {True: "ok", False: "FAIL", None: "not checked"}[c.passed]
            lines.append(f"{c.name}: {status} ({c.detail})")
        return "\n".join(lines)


def validate(instance: ProblemInstance) -> ValidationReport:
    """Check an instance against the solvability assumptions.

    Verifies graph connectivity, strong convexity of every smooth part,
    dimension consistency, and that the kappa shares sum to one.  When all
    feasible sets are boxes and M = B = 1, also checks that the coupling
    interval contains b strictly (a computable stand-in for a strictly
    feasible interior point); otherwise that condition is reported as not
    checked.
    """
    checks: list[ValidationCheck] = []

    connected = check_connected(instance.graph)
    checks.append(
        ValidationCheck(
            "graph_connected",
            connected,
            f"{instance.graph.n_vertices} vertices, {instance.graph.n_edges} edges",
        )
    )

    bad_sigma = [
        idx
        for idx, a in enumerate(instance.agents, start=1)
        if not (getattr(a.f, "sigma", 0.0) > 0.0)
    ]
    checks.append(
        ValidationCheck(
            "strong_convexity",
            not bad_sigma,
            "all agents have sigma > 0"
            if not bad_sigma
            else f"agents {bad_sigma} have nonpositive modulus",
        )
    )

    n, m, b_dim = instance.dims
    checks.append(
        ValidationCheck(
            "dimensions",
            True,
            f"N={n}, M={m}, B={b_dim}",
        )
    )

    ksum = float(np.sum(instance.kappa_vector()))
    checks.append(
        ValidationCheck(
            "kappa_sum",
            abs(ksum - 1.0) <= 1e-12,
            f"sum of kappa = {ksum!r}",
        )
    )

    all_box = all(isinstance(a.g, Box) for a in instance.agents)
    if all_box and m == 1 and b_dim == 1:
        lo_sum = 0.0
        hi_sum = 0.0
        for a in instance.agents:
            coeff = float(a.a_block[0, 0])
            lo, hi = float(a.g.lo[0]), float(a.g.hi[0])
            lo_sum += min(coeff * lo, coeff * hi)
            hi_sum += max(coeff * lo, coeff * hi)
        b0 = float(instance.b[0])
        checks.append(
            ValidationCheck(
                "interior_feasibility",
                lo_sum < b0 < hi_sum,
                f"coupling range [{lo_sum}, {hi_sum}] vs b = {b0}",
            )
        )
    else:
        checks.append(
            ValidationCheck(
                "interior_feasibility",
                None,
                "only checked for scalar all-box instances",
            )
        )

    return ValidationReport(tuple(checks))


# --- electricity-market benchmark ---------------------------------------


@dataclass(frozen=True)
class UCParams:
    """Generating company: cost delta*x^2 + varsigma*x + beta on [0, x_max]."""

    delta: float
    varsigma: float
    beta: float
    x_max: float


@dataclass(frozen=True)
class UserParams:
    """Energy user: utility chi*x - pi*x^2 on [0, x_max] (quadratic branch)."""

    chi: float
    pi: float
    x_max: float


@dataclass(frozen=True)
class MarketParams:
    """Parameter rows for the supply-demand benchmark."""

    uc: tuple[UCParams, ...]
    users: tuple[UserParams, ...]

    def __post_init__(self):
        for row in self.uc:
            if row.delta <= 0 or row.x_max <= 0:
                raise ValueError(f"invalid generating-company row {row}")
        for row in self.users:
            if row.pi <= 0 or row.x_max <= 0:
                raise ValueError(f"invalid user row {row}")

    @staticmethod
    def default() -> "MarketParams":
        """Stock two-company, three-user benchmark data."""
        return MarketParams(
            uc=(
                UCParams(0.0031, 8.71, 0.0, 150.0),
                UCParams(0.0074, 3.53, 0.0, 150.0),
            ),
            users=(
                UserParams(17.17, 0.0935, 91.79),
                UserParams(12.28, 0.0417, 147.29),
                UserParams(18.42, 0.1007, 91.41),
            ),
        )


def market_graph() -> Graph:
    """Benchmark communication topology over the five market agents.

    Agents are globally indexed company 1, company 2, then users 1-3.
    """
    return Graph(5, [(1, 2), (1, 3), (2, 3), (3, 4), (4, 5)])


def build_market(
    params: MarketParams | None = None, topology: Graph | None = None
) -> ProblemInstance:
    """Assemble the supply-demand balance benchmark as a problem instance.

    Scalar decisions (M = 1), one balance constraint (B = 1, b = 0) with
    coupling coefficients +1 for companies and -1 for users.  Company i
    minimizes its quadratic cost on [0, x_max]; user j contributes the
    negated quadratic branch of its utility, which keeps every smooth part
    strongly convex because the demand caps sit at the utility's kink.
    Kappa shares are uniform.
    """
    params = params or MarketParams.default()
    n = len(params.uc) + len(params.users)
    if topology is None:
        if n != 5:
            raise ValueError(
                f"default topology is defined for 5 agents, got {n}; pass one explicitly"
            )
        topology = market_graph()
    kappa = 1.0 / n
    agents = []
    for row in params.uc:
        agents.append(
            AgentProblem(
                f=Quadratic(row.delta, row.varsigma, row.beta),
                g=Box(0.0, row.x_max),
                a_block=[[1.0]],
                kappa=kappa,
            )
        )
    for row in params.users:
        agents.append(
            AgentProblem(
                f=Quadratic(row.pi, -row.chi, 0.0),
                g=Box(0.0, row.x_max),
                a_block=[[-1.0]],
                kappa=kappa,
            )
        )
    return ProblemInstance(agents, [0.0], topology)


# --- instance files -------------------------------------------------------


class ParseError(ValueError):
    """Malformed instance file; message carries line context."""


def _fmt_vector(v: np.ndarray) -> str:
    return " ".join(repr(float(x)) for x in np.atleast_1d(v))


def _fmt_matrix(a: np.ndarray) -> str:
    return "; ".join(_fmt_vector(row) for row in np.atleast_2d(a))


def _parse_vector(text: str, where: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split()])
    except ValueError as exc:
        raise ParseError(f"{where}: bad number in {text!r}") from exc


def _parse_matrix(text: str, where: str) -> np.ndarray:
    rows = [_parse_vector(part, where) for part in text.split(";")]
    width = {r.size for r in rows}
    if len(width) != 1:
        raise ParseError(f"{where}: ragged matrix rows in {text!r}")
    return np.vstack(rows)


def save_instance(instance: ProblemInstance, path) -> None:
    """Write an instance to a plain key/value text file.

    Only catalog function kinds (quadratic, l1, box, norm_ball, zero) are
    serializable; oracle-backed custom functions are rejected.
    """
    lines = ["[dims]", f"m = {instance.m}", f"b_dim = {instance.b_dim}", ""]
    lines += ["[graph]", f"n_vertices = {instance.graph.n_vertices}"]
    lines += [f"edge = {i} {j}" for i, j in instance.graph.edges]
    lines += ["", "[b]", f"values = {_fmt_vector(instance.b)}", ""]
    for idx, agent in enumerate(instance.agents, start=1):
        lines.append(f"[agent {idx}]")
        lines.append(f"kappa = {agent.kappa!r}")
        lines.append(f"a_block = {_fmt_matrix(agent.a_block)}")
        f = agent.f
        if isinstance(f, Quadratic):
            lines.append("f = quadratic")
            lines.append(f"f.p = {_fmt_matrix(f.p)}")
            lines.append(f"f.q = {_fmt_vector(f.q)}")
            lines.append(f"f.r = {f.r!r}")
        else:
            raise ValueError(f"agent {idx}: smooth kind {type(f).__name__} "
                             "has no file representation")
        g = agent.g
        if isinstance(g, Zero):
            lines.append("g = zero")
        elif isinstance(g, L1):
            lines.append("g = l1")
            lines.append(f"g.w = {g.weight!r}")
        elif isinstance(g, Box):
            lines.append("g = box")
            lines.append(f"g.lo = {_fmt_vector(g.lo)}")
            lines.append(f"g.hi = {_fmt_vector(g.hi)}")
        elif isinstance(g, NormPenalty):
            lines.append("g = norm_ball")
            lines.append(f"g.e = {g.e}")
        else:
            raise ValueError(f"agent {idx}: nonsmooth kind {type(g).__name__} "
                             "has no file representation")
        lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def _read_sections(path) -> dict[str, list[tuple[int, str, str]]]:
    sections: dict[str, list[tuple[int, str, str]]] = {}
    current: str | None = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                sections.setdefault(current, [])
                continue
            if "=" not in line:
                raise ParseError(f"line {lineno}: expected 'key = value', got {line!r}")
            if current is None:
                raise ParseError(f"line {lineno}: entry before any [section]")
            key, value = (part.strip() for part in line.split("=", 1))
            sections[current].append((lineno, key, value))
    return sections


def _section_map(
    entries: list[tuple[int, str, str]], section: str
) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, key, value in entries:
        if key in out:
            raise ParseError(f"line {lineno}: duplicate key {key!r} in [{section}]")
        out[key] = value
    return out


def _require(mapping: dict[str, str], key: str, section: str) -> str:
    if key not in mapping:
        raise ParseError(f"[{section}]: missing required key {key!r}")
    return mapping[key]


def load_instance(path) -> ProblemInstance:
    """Read an instance file; edges are canonicalized on load.

    Missing kappa entries default to a uniform 1/N split.
    """
    sections = _read_sections(path)
    for required in ("dims", "graph", "b"):
        if required not in sections:
            raise ParseError(f"missing [{required}] section")

    dims = _section_map(sections["dims"], "dims")
    m = int(_require(dims, "m", "dims"))
    b_dim = int(_require(dims, "b_dim", "dims"))

    graph_entries = sections["graph"]
    n_vertices = None
    edges = []
    for lineno, key, value in graph_entries:
        if key == "n_vertices":
            n_vertices = int(value)
        elif key == "edge":
            pair = value.split()
            if len(pair) != 2:
                raise ParseError(f"line {lineno}: edge needs two endpoints, got {value!r}")
            edges.append((int(pair[0]), int(pair[1])))
        else:
            raise ParseError(f"line {lineno}: unknown graph key {key!r}")
    if n_vertices is None:
        raise ParseError("[graph]: missing n_vertices")
    try:
        graph = Graph(n_vertices, edges)
    except ValueError as exc:
        raise ParseError(f"[graph]: {exc}") from exc

    bmap = _section_map(sections["b"], "b")
    b = _parse_vector(_require(bmap, "values", "b"), "[b] values")
    if b.size != b_dim:
        raise ParseError(f"[b]: got {b.size} values, expected b_dim = {b_dim}")

    agent_names = sorted(
        (name for name in sections if name.startswith("agent ")),
        key=lambda s: int(s.split()[1]),
    )
    if not agent_names:
        raise ParseError("no [agent k] sections found")
    expected = [f"agent {k}" for k in range(1, len(agent_names) + 1)]
    if agent_names != expected:
        raise ParseError(f"agent sections must be numbered 1..N; found {agent_names}")

    agents = []
    for name in agent_names:
        amap = _section_map(sections[name], name)
        a_block = _parse_matrix(_require(amap, "a_block", name), f"[{name}] a_block")
        kappa = float(amap["kappa"]) if "kappa" in amap else 1.0 / len(agent_names)

        fkind = _require(amap, "f", name)
        if fkind == "quadratic":
            p = _parse_matrix(_require(amap, "f.p", name), f"[{name}] f.p")
            q = _parse_vector(_require(amap, "f.q", name), f"[{name}] f.q")
            r = float(amap.get("f.r", "0.0"))
            try:
                f: SmoothFunction = Quadratic(p, q, r)
            except ValueError as exc:
                raise ParseError(f"[{name}]: {exc}") from exc
        else:
            raise ParseError(f"[{name}]: unknown smooth kind {fkind!r}")

        gkind = _require(amap, "g", name)
        try:
            if gkind == "zero":
                g: NonsmoothFunction = Zero()
            elif gkind == "l1":
                g = L1(float(_require(amap, "g.w", name)))
            elif gkind == "box":
                g = Box(
                    _parse_vector(_require(amap, "g.lo", name), f"[{name}] g.lo"),
                    _parse_vector(_require(amap, "g.hi", name), f"[{name}] g.hi"),
                )
            elif gkind == "norm_ball":
                g = NormPenalty(int(_require(amap, "g.e", name)))
            else:
                raise ParseError(f"[{name}]: unknown nonsmooth kind {gkind!r}")
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"[{name}]: {exc}") from exc

        try:
            agents.append(AgentProblem(f, g, a_block, kappa))
        except ValueError as exc:
            raise ParseError(f"[{name}]: {exc}") from exc

    for idx, agent in enumerate(agents, start=1):
        if agent.m != m:
            raise ParseError(f"[agent {idx}]: dimension {agent.m} != dims m = {m}")
        if agent.b_dim != b_dim:
            raise ParseError(
                f"[agent {idx}]: a_block rows {agent.b_dim} != dims b_dim = {b_dim}"
            )

    try:
        return ProblemInstance(agents, b, graph)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
