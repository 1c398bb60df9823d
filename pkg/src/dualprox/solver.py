"""Dual proximal gradient iteration with neighbor-local updates.

Each agent keeps a dual pair (theta, mu): theta estimates the network-wide
multiplier of the coupling constraint, mu is the multiplier tying the
agent's primal variable to its feasible-set copy.  Owned edges carry an
extra multiplier xi enforcing agreement of neighboring theta estimates.
One round is a two-phase barrier computation: every agent takes a
prox-gradient step on its dual pair from time-t data, then every edge
owner integrates the new theta difference into xi.  All updates read only
time-t data within a phase, so results are independent of agent processing
order and worker count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .problems import AgentProblem, ProblemInstance, validate
from .topology import Graph, laplacian_spectral_radius

__all__ = [
    "AgentDual",
    "EdgeMultiplier",
    "Residuals",
    "edge_multipliers",
    "RunningAverage",
    "SolveResult",
    "SolverConfig",
    "SolverState",
    "StepSizeError",
    "StepSizes",
    "Trace",
    "ergodic_gap_bound",
    "eval_dual_objective",
    "gap_bound_constant",
    "grad_p",
    "init_state",
    "iterate",
    "lambda_update",
    "lipschitz_h",
    "lyapunov_value",
    "max_lipschitz",
    "primal_recovery",
    "residuals",
    "smooth_dual_value",
    "solve",
    "suggest_step_sizes",
    "validate_step_sizes",
    "xi_update",
]

Array = np.ndarray


@dataclass(frozen=True)
class AgentDual:
    """One agent's dual pair: coupling estimate and slack multiplier."""

    theta: Array
    mu: Array


@dataclass(frozen=True)
class EdgeMultiplier:
    """Multiplier for one edge's agreement constraint, held by the owner."""

    owner: int
    peer: int
    xi: Array

    def __post_init__(self):
        if not self.owner < self.peer:
            raise ValueError(
                f"edge multiplier must be owned by the smaller endpoint, "
                f"got owner {self.owner}, peer {self.peer}"
            )


class StepSizeError(ValueError):
    """Step sizes violate the convergence condition."""


@dataclass(frozen=True)
class StepSizes:
    """Primal-side dual step c and multiplier/stabilization step gamma."""

    c: float
    gamma: float

    def __post_init__(self):
        if self.c <= 0 or self.gamma <= 0:
            raise ValueError(f"step sizes must be positive, got {self}")


def lipschitz_h(a_block, sigma: float) -> float:
    """Gradient Lipschitz constant of an agent's smooth dual term.

    Equals (spectral norm of the agent's dual-to-primal map)^2 / sigma,
    which reduces to (||A_i||_2^2 + 1) / sigma because the map stacks the
    negated coupling block on a negated identity.
    """
    if sigma <= 0:
        raise ValueError(f"strong convexity modulus must be positive, got {sigma}")
    a = np.atleast_2d(np.asarray(a_block, dtype=float))
    spec = float(np.linalg.norm(a, 2)) if a.size else 0.0
    return (spec * spec + 1.0) / sigma


def max_lipschitz(instance: ProblemInstance) -> float:
    """Network-wide constant h = max over agents."""
    return max(lipschitz_h(a.a_block, a.f.sigma) for a in instance.agents)


def validate_step_sizes(h: float, tau_bar: float, c: float, gamma: float) -> None:
    """Accept step sizes iff 1/c >= h + gamma * tau_bar (boundary included).

    A 1e-12 slack absorbs roundoff when c was produced by the suggestion
    formula.  Raises :class:`StepSizeError` on rejection and ValueError on
    nonpositive inputs.
    """
    if h <= 0:
        raise ValueError(f"h must be positive (sigma finite implies h > 0), got {h}")
    if tau_bar < 0 or c <= 0 or gamma <= 0:
        raise ValueError(
            f"step-size inputs must be positive (tau_bar may be zero for an "
            f"edgeless network), got tau_bar={tau_bar}, c={c}, gamma={gamma}"
        )
    required = h + gamma * tau_bar
    if 1.0 / c < required - 1e-12:
        raise StepSizeError(
            f"1/c = {1.0 / c:.6g} is below the required h + gamma*tau = {required:.6g}"
        )


def suggest_step_sizes(h: float, tau_bar: float, gamma: float = 1.0) -> StepSizes:
    """Step sizes exactly at the acceptance boundary: c = 1/(h + gamma*tau)."""
    if h <= 0 or tau_bar < 0 or gamma <= 0:
        raise ValueError(
            f"step-size inputs must be positive (tau_bar may be zero for an "
            f"edgeless network), got h={h}, tau_bar={tau_bar}, gamma={gamma}"
        )
    return StepSizes(c=1.0 / (h + gamma * tau_bar), gamma=gamma)


# --- per-agent kernels ----------------------------------------------------


def _h_apply(agent: AgentProblem, theta: Array, mu: Array) -> Array:
    """The agent's dual-to-primal map: -A_i^T theta - mu."""
    return -(agent.a_block.T @ theta) - mu


def _grad_p_parts(
    agent: AgentProblem, b: Array, theta: Array, mu: Array
) -> tuple[Array, Array, Array]:
    """Gradient blocks of the smooth dual term, plus the primal maximizer."""
    x_hat = agent.f.conjugate_gradient(_h_apply(agent, theta, mu))
    grad_theta = -(agent.a_block @ x_hat) + agent.kappa * b
    grad_mu = -x_hat
    return grad_theta, grad_mu, x_hat


def grad_p(agent: AgentProblem, b, theta, mu) -> Array:
    """Gradient of the agent's smooth dual term, stacked (theta then mu)."""
    theta = np.asarray(theta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    gt, gm, _ = _grad_p_parts(agent, np.asarray(b, dtype=float), theta, mu)
    return np.concatenate([gt, gm])


def smooth_dual_value(agent: AgentProblem, b, theta, mu) -> float:
    """Value of the agent's smooth dual term at (theta, mu)."""
    theta = np.asarray(theta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    v = _h_apply(agent, theta, np.asarray(mu, dtype=float))
    return agent.f.conjugate_value(v) + agent.kappa * float(
        np.asarray(b, dtype=float) @ theta
    )


def lambda_update(
    agent: AgentProblem,
    b: Array,
    theta: Array,
    mu: Array,
    neighbor_thetas: Mapping[int, Array],
    owned_xi: Mapping[int, Array],
    incoming_xi: Mapping[int, Array],
    c: float,
    gamma: float,
) -> tuple[Array, Array, Array]:
    """One agent's dual update from time-t data.

    The coupling estimate takes a plain gradient step (the nonsmooth dual
    term does not depend on it); the slack multiplier takes a prox step on
    the conjugate of the agent's nonsmooth part, computed through the
    Moreau decomposition so the conjugate is never evaluated.

    Parameters
    ----------
    agent : AgentProblem
        The agent's problem data.
    b : ndarray
        Coupling constraint offset (shared constant).
    theta, mu : ndarray
        The agent's dual pair at time t.
    neighbor_thetas : mapping int -> ndarray
        Coupling estimates of all neighbors at time t.
    owned_xi : mapping int -> ndarray
        Multipliers of edges this agent owns, keyed by peer.
    incoming_xi : mapping int -> ndarray
        Multipliers owned by smaller-indexed neighbors, keyed by owner.
    c, gamma : float
        Validated step sizes.

    Returns
    -------
    (theta_new, mu_new, x_hat)
        Updated dual pair and the primal maximizer at the *old* duals
        (a by-product of the gradient computation).

    Sums over neighbors run in ascending index order so results are
    reproducible bit-for-bit regardless of message arrival order.
    """
    grad_theta, grad_mu, x_hat = _grad_p_parts(agent, b, theta, mu)
    pressure = grad_theta.copy()
    for j in sorted(owned_xi):
        pressure += owned_xi[j]
    for j in sorted(incoming_xi):
        pressure -= incoming_xi[j]
    for j in sorted(neighbor_thetas):
        pressure += gamma * (theta - neighbor_thetas[j])
    theta_new = theta - c * pressure
    w = mu - c * grad_mu
    mu_new = agent.g.conjugate_prox(c, w)
    return theta_new, mu_new, x_hat


def xi_update(xi: Array, theta_owner: Array, theta_peer: Array, gamma: float) -> Array:
    """Edge multiplier ascent on the time-(t+1) theta difference."""
    return xi + gamma * (theta_owner - theta_peer)


# --- network state and rounds ----------------------------------------------


@dataclass
class SolverState:
    """Stacked dual state: one row per agent, one xi row per canonical edge."""

    theta: Array  # (N, B)
    mu: Array  # (N, M)
    xi: Array  # (|E|, B)
    t: int = 0

    def agent_dual(self, i: int) -> AgentDual:
        """Dual pair of agent ``i`` (1-indexed), as copies."""
        return AgentDual(self.theta[i - 1].copy(), self.mu[i - 1].copy())

    def copy(self) -> "SolverState":
        return SolverState(self.theta.copy(), self.mu.copy(), self.xi.copy(), self.t)


def init_state(instance: ProblemInstance) -> SolverState:
    """All-zero initialization of duals and edge multipliers."""
    n, m, b_dim = instance.dims
    return SolverState(
        theta=np.zeros((n, b_dim)),
        mu=np.zeros((n, m)),
        xi=np.zeros((instance.graph.n_edges, b_dim)),
        t=0,
    )


def edge_multipliers(graph: Graph, xi: Array) -> list[EdgeMultiplier]:
    """Per-edge multipliers labelled with their owner and peer."""
    return [
        EdgeMultiplier(owner=i, peer=j, xi=xi[k].copy())
        for k, (i, j) in enumerate(graph.edges)
    ]


def _agent_inputs(instance: ProblemInstance, state: SolverState, i: int):
    graph = instance.graph
    nbrs = graph.neighbors(i)
    neighbor_thetas = {j: state.theta[j - 1] for j in nbrs.all}
    owned = {j: state.xi[graph.edge_index[(i, j)]] for j in nbrs.owned}
    incoming = {j: state.xi[graph.edge_index[(j, i)]] for j in nbrs.incoming}
    return neighbor_thetas, owned, incoming


def iterate(
    instance: ProblemInstance,
    state: SolverState,
    steps: StepSizes,
    executor: ThreadPoolExecutor | None = None,
    agent_order: Sequence[int] | None = None,
) -> SolverState:
    """One synchronous round: all dual pairs, then all edge multipliers.

    Every agent update reads only time-t data; every edge update reads the
    freshly computed coupling estimates.  ``agent_order`` permutes the
    processing order without changing the result (useful for testing the
    order-independence property); ``executor`` runs the per-agent and
    per-edge work on a thread pool, again without changing the result.
    """
    n, m, b_dim = instance.dims
    graph = instance.graph
    order = list(agent_order) if agent_order is not None else list(range(1, n + 1))
    if sorted(order) != list(range(1, n + 1)):
        raise ValueError(f"agent order must be a permutation of 1..{n}, got {order}")

    theta_new = np.empty_like(state.theta)
    mu_new = np.empty_like(state.mu)

    def work(i: int):
        neighbor_thetas, owned, incoming = _agent_inputs(instance, state, i)
        return i, lambda_update(
            instance.agents[i - 1],
            instance.b,
            state.theta[i - 1],
            state.mu[i - 1],
            neighbor_thetas,
            owned,
            incoming,
            steps.c,
            steps.gamma,
        )

    if executor is None:
        results = map(work, order)
    else:
        results = executor.map(work, order)
    for i, (th, muv, _) in results:
        theta_new[i - 1] = th
        mu_new[i - 1] = muv

    xi_new = np.empty_like(state.xi)

    def edge_work(k: int):
        i, j = graph.edges[k]
        return k, xi_update(state.xi[k], theta_new[i - 1], theta_new[j - 1], steps.gamma)

    edge_results = (
        map(edge_work, range(graph.n_edges))
        if executor is None
        else executor.map(edge_work, range(graph.n_edges))
    )
    for k, xi in edge_results:
        xi_new[k] = xi

    return SolverState(theta_new, mu_new, xi_new, state.t + 1)


# --- recovery, objective, diagnostics --------------------------------------


def primal_recovery(agent: AgentProblem, theta, mu) -> Array:
    """Unique minimizer of the agent's Lagrangian slice at its duals."""
    return agent.f.conjugate_gradient(
        _h_apply(agent, np.asarray(theta, dtype=float), np.asarray(mu, dtype=float))
    )


def eval_dual_objective(instance: ProblemInstance, theta: Array, mu: Array) -> float:
    """Dual objective at stacked duals; ``math.inf`` marks an infeasible point.

    Sums each agent's smooth dual term and the conjugate of its nonsmooth
    part at mu.  An infinite conjugate value (the dual point left the
    conjugate's domain) propagates as the infeasibility marker.
    """
    total = 0.0
    for idx, agent in enumerate(instance.agents):
        sup = agent.g.support_value(mu[idx])
        if math.isinf(sup):
            return math.inf
        total += smooth_dual_value(agent, instance.b, theta[idx], mu[idx]) + sup
    return total


@dataclass(frozen=True)
class Residuals:
    """Consensus and primal infeasibility plus the dual objective."""

    consensus: float
    primal: float
    dual_value: float


def residuals(instance: ProblemInstance, state: SolverState, inc=None) -> Residuals:
    """Residual triple at the state's duals.

    Consensus is the norm of all per-edge theta differences; primal is the
    coupling-constraint violation of the recovered primal point.  The dual
    objective is evaluated from the same primal maximizers, so each agent
    costs a single conjugate-gradient solve.
    """
    inc = inc or instance.graph.incidence(instance.b_dim)
    consensus = float(np.linalg.norm(inc.apply_m(state.theta)))
    ax = np.zeros(instance.b_dim)
    phi = 0.0
    infeasible = False
    for idx, agent in enumerate(instance.agents):
        v = _h_apply(agent, state.theta[idx], state.mu[idx])
        x_hat = agent.f.conjugate_gradient(v)
        ax += agent.a_block @ x_hat
        if not infeasible:
            sup = agent.g.support_value(state.mu[idx])
            if math.isinf(sup):
                infeasible = True
            else:
                phi += (
                    float(v @ x_hat) - agent.f.value(x_hat)
                    + agent.kappa * float(instance.b @ state.theta[idx])
                    + sup
                )
    primal = float(np.linalg.norm(ax - instance.b))
    return Residuals(consensus, primal, math.inf if infeasible else phi)


class RunningAverage:
    """Incremental mean of the dual trajectory (no history storage)."""

    def __init__(self, n: int, b_dim: int, m: int):
        self.theta = np.zeros((n, b_dim))
        self.mu = np.zeros((n, m))
        self.count = 0

    def update(self, theta: Array, mu: Array) -> None:
        self.count += 1
        self.theta += (theta - self.theta) / self.count
        self.mu += (mu - self.mu) / self.count


def _weighted_sq_distance(
    graph: Graph, b_dim: int, c: float, gamma: float, dtheta: Array, dmu: Array
) -> float:
    """||dlambda||^2 in the norm weighted by (1/2c) I - (gamma/2) M^T M."""
    inc = graph.incidence(b_dim)
    plain = float(np.sum(dtheta * dtheta) + np.sum(dmu * dmu))
    edge = inc.apply_m(dtheta)
    return (0.5 / c) * plain - (0.5 * gamma) * float(np.sum(edge * edge))


def gap_bound_constant(
    graph: Graph,
    c: float,
    gamma: float,
    theta0: Array,
    mu0: Array,
    xi0: Array,
    theta_star: Array,
    mu_star: Array,
    xi_star: Array,
) -> float:
    """Constant bounding (T+1) times the ergodic optimality gap.

    Combines the weighted squared distance from the initialization to the
    saddle duals with scaled squared norms of the saddle and initial edge
    multipliers.  Requires the weighting matrix to be positive
    semidefinite, which holds whenever the step-size rule does; violated
    steps raise :class:`StepSizeError`.
    """
    b_dim = theta0.shape[1]
    tau = laplacian_spectral_radius(graph).value
    if 1.0 / c < gamma * tau - 1e-12:
        raise StepSizeError(
            f"1/c = {1.0 / c:.6g} < gamma*tau = {gamma * tau:.6g}: "
            "the distance weighting is not positive semidefinite"
        )
    dist = _weighted_sq_distance(
        graph, b_dim, c, gamma, theta_star - theta0, mu_star - mu0
    )
    return (
        dist
        + (4.0 / gamma) * float(np.sum(xi_star * xi_star))
        + (1.0 / gamma) * float(np.sum(xi0 * xi0))
    )


def ergodic_gap_bound(
    graph: Graph,
    c: float,
    gamma: float,
    theta0: Array,
    mu0: Array,
    xi0: Array,
    theta_star: Array,
    mu_star: Array,
    xi_star: Array,
    T: int,
) -> float:
    """Right-hand side of the O(1/T) ergodic guarantees after T+1 rounds."""
    if T < 1:
        raise ValueError(f"T must be at least 1, got {T}")
    const = gap_bound_constant(
        graph, c, gamma, theta0, mu0, xi0, theta_star, mu_star, xi_star
    )
    return const / (T + 1)


def lyapunov_value(
    graph: Graph,
    c: float,
    gamma: float,
    state: SolverState,
    theta_star: Array,
    mu_star: Array,
    xi_star: Array,
) -> float:
    """Weighted squared distance to a saddle point; non-increasing per round."""
    b_dim = state.theta.shape[1]
    dist = _weighted_sq_distance(
        graph, b_dim, c, gamma, theta_star - state.theta, mu_star - state.mu
    )
    dxi = xi_star - state.xi
    return dist + (0.5 / gamma) * float(np.sum(dxi * dxi))


# --- the full solve ---------------------------------------------------------


@dataclass
class SolverConfig:
    """Knobs for :func:`solve`.

    Leaving ``c`` unset picks the boundary step from the network constants;
    an explicit value is validated before the first round.  ``trace_state``
    additionally snapshots theta/mu/xi into each trace row.
    """

    c: float | None = None
    gamma: float = 1.0
    max_iter: int = 1_000_000
    tol_consensus: float = 1e-6
    tol_primal: float = 1e-6
    tol_step: float = 1e-8
    trace_every: int = 100
    trace_state: bool = False
    n_workers: int = 1
    seed: int = 0


class Trace:
    """Per-round diagnostics log with optional state snapshots."""

    columns = ("iter", "phi", "consensus_residual", "primal_residual",
               "step_norm", "wall_time")

    def __init__(self, with_state: bool = False):
        self.rows: list[tuple] = []
        self.with_state = with_state
        self.state_rows: list[tuple] = []  # (theta, mu, xi) snapshots

    def record(
        self,
        iteration: int,
        phi: float,
        consensus: float,
        primal: float,
        step_norm: float,
        wall_time: float,
        state: SolverState | None = None,
    ) -> None:
        self.rows.append((iteration, phi, consensus, primal, step_norm, wall_time))
        if self.with_state:
            assert state is not None
            self.state_rows.append(
                (state.theta.copy(), state.mu.copy(), state.xi.copy())
            )

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([row[idx] for row in self.rows])

    def write_csv(self, path, include_wall_time: bool = False) -> None:
        """Write the trace as comma-separated text with one header row.

        Wall time is reproducible-run poison, so it stays out of the file
        unless explicitly requested; all other columns are deterministic
        for a given configuration.
        """
        cols = list(self.columns)
        if not include_wall_time:
            cols.remove("wall_time")
        header = list(cols)
        if self.with_state and self.state_rows:
            theta, mu, xi = self.state_rows[0]
            n, b_dim = theta.shape
            m = mu.shape[1]
            header += [f"theta_{i}_{k}" for i in range(1, n + 1) for k in range(b_dim)]
            header += [f"mu_{i}_{k}" for i in range(1, n + 1) for k in range(m)]
            header += [f"xi_{e}_{k}" for e in range(1, xi.shape[0] + 1) for k in range(b_dim)]
        lines = [",".join(header)]
        for ridx, row in enumerate(self.rows):
            named = dict(zip(self.columns, row))
            vals = [self._fmt(named[c]) for c in cols]
            if self.with_state and self.state_rows:
                theta, mu, xi = self.state_rows[ridx]
                vals += [repr(float(v)) for v in theta.ravel()]
                vals += [repr(float(v)) for v in mu.ravel()]
                vals += [repr(float(v)) for v in xi.ravel()]
            lines.append(",".join(vals))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @staticmethod
    def _fmt(v) -> str:
        if isinstance(v, int):
            return str(v)
        return repr(float(v))


@dataclass
class SolveResult:
    """Final duals, recovered primal, and the run's diagnostics."""

    theta: Array
    mu: Array
    xi: Array
    x: Array
    trace: Trace
    converged: bool
    reason: str
    iterations: int
    ergodic_theta: Array
    ergodic_mu: Array
    steps: StepSizes

    def agent_report(self) -> list[dict]:
        out = []
        for i in range(self.theta.shape[0]):
            out.append(
                {
                    "agent": i + 1,
                    "theta": self.theta[i].tolist(),
                    "mu": self.mu[i].tolist(),
                    "x": self.x[i].tolist(),
                }
            )
        return out


def solve(instance: ProblemInstance, config: SolverConfig | None = None) -> SolveResult:
    """Run the distributed dual iteration until the residual rule fires.

    Convergence requires all three of: consensus residual and primal
    residual at the current duals below their tolerances, and the last
    dual step norm below ``tol_step``.  Exhausting ``max_iter`` returns a
    non-converged result with the full trace rather than raising.
    """
    config = config or SolverConfig()
    report = validate(instance)
    if not report.ok:
        raise ValueError(f"instance failed validation:\n{report}")

    h = max_lipschitz(instance)
    tau = laplacian_spectral_radius(instance.graph, seed=config.seed).value
    if config.c is None:
        steps = suggest_step_sizes(h, tau, config.gamma)
    else:
        steps = StepSizes(config.c, config.gamma)
    validate_step_sizes(h, tau, steps.c, steps.gamma)

    state = init_state(instance)
    trace = Trace(with_state=config.trace_state)
    avg = RunningAverage(*_nmb(instance))
    inc = instance.graph.incidence(instance.b_dim)
    t0 = time.perf_counter()

    res = residuals(instance, state, inc)
    trace.record(0, res.dual_value, res.consensus, res.primal, math.nan,
                 time.perf_counter() - t0, state)

    executor = (
        ThreadPoolExecutor(max_workers=config.n_workers)
        if config.n_workers > 1
        else None
    )
    converged = False
    reason = "max_iter exhausted"
    try:
        while state.t < config.max_iter:
            new_state = iterate(instance, state, steps, executor=executor)
            step_norm = math.sqrt(
                float(np.sum((new_state.theta - state.theta) ** 2))
                + float(np.sum((new_state.mu - state.mu) ** 2))
            )
            state = new_state
            avg.update(state.theta, state.mu)
            res = residuals(instance, state, inc)
            done = (
                res.consensus <= config.tol_consensus
                and res.primal <= config.tol_primal
                and step_norm <= config.tol_step
            )
            if done or state.t % config.trace_every == 0 or state.t == config.max_iter:
                trace.record(state.t, res.dual_value, res.consensus, res.primal,
                             step_norm, time.perf_counter() - t0, state)
            if done:
                converged = True
                reason = "residual tolerances met"
                break
    finally:
        if executor is not None:
            executor.shutdown()

    x = np.vstack(
        [
            primal_recovery(agent, state.theta[idx], state.mu[idx])
            for idx, agent in enumerate(instance.agents)
        ]
    )
    return SolveResult(
        theta=state.theta,
        mu=state.mu,
        xi=state.xi,
        x=x,
        trace=trace,
        converged=converged,
        reason=reason,
        iterations=state.t,
        ergodic_theta=avg.theta,
        ergodic_mu=avg.mu,
        steps=steps,
    )


def _nmb(instance: ProblemInstance) -> tuple[int, int, int]:
    n, m, b_dim = instance.dims
    return n, b_dim, m
