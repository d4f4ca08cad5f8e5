'''
Dependency graphs of training triplets, exact fractional covers and the
generalization bound evaluated on a concrete model and sample.

Triplets of one user form a rook grid: rows are preferred items, columns
non-preferred ones, and two triplets depend on each other when they share
a row or a column. Triplets of different users never do, so every
component is solved on its own and the component covers are stacked.
'''
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp
from scipy.stats import spearmanr

from consts import (
    EXHAUSTIVE_MAX_NODES,
    LP_MAX_NODES,
    MAX_ENUMERATED_SETS,
    MAX_PRICING_ROUNDS,
    PRICING_TOLERANCE,
    CoverMethod,
)
from src import model
from src.dataset import Dataset
from src.model import ModelConfig, ModelParams
from src.objective import Triplet
from src.utils.exceptions import ArgumentError, CapacityError, NumericError, RecNetError
from src.utils.logger import Logger

logger = Logger("[theory]")

COVER_TOLERANCE = 1e-7


@dataclass(frozen=True, eq=False)
class DependencyGraph:
    users: np.ndarray
    items: np.ndarray
    other_items: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    graph: nx.Graph
    caps: Tuple[int, int]
    blocks: Dict[int, Tuple[int, int]] = field(default_factory=dict)

    @property
    def n_nodes(self):
        return len(self.users)

    @property
    def nodes(self) -> List[Triplet]:
        return [Triplet(int(i), int(u), int(j)) for u, i, j in zip(self.users, self.items, self.other_items)]

    @property
    def edges(self):
        return sorted(tuple(sorted(edge)) for edge in self.graph.edges)

    def degree(self, v):
        return self.graph.degree[v]


@dataclass
class CoverResult:
    sets: List[Tuple[int, ...]]
    weights: np.ndarray
    method: str
    graph: DependencyGraph

    @property
    def total_weight(self):
        return float(np.sum(self.weights))

    @property
    def chromatic_value(self):
        return self.total_weight

    def to_text(self):
        lines = [f"method\t{self.method}", f"nodes\t{self.graph.n_nodes}", f"sets\t{len(self.sets)}",
                 f"chromatic_value\t{self.chromatic_value:.6f}"]
        nodes = self.graph.nodes
        for members, weight in zip(self.sets, self.weights):
            triplets = " ".join(f"({nodes[v].i},{nodes[v].u},{nodes[v].i_prime})" for v in members)
            lines.append(f"{weight:.6f}\t{triplets}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class BoundInputs:
    N: int
    n_pos: int
    n_neg: int
    B: float
    r: float
    delta: float
    C: float

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ArgumentError(f"delta must be in (0, 1), got {self.delta}")
        if min(self.N, self.n_pos, self.n_neg) < 1:
            raise ArgumentError(f"N, n_pos and n_neg must be >= 1, got {self.N}, {self.n_pos}, {self.n_neg}")
        if min(self.B, self.r, self.C) < 0:
            raise ArgumentError("B, r and C must be non-negative")

    @property
    def m(self):
        return self.N * self.n_pos * self.n_neg


@dataclass(frozen=True)
class EmpiricalLoss:
    per_user: float          # every user normalised by its own pair count
    worst_case: float        # every pair weighted 1 / (N n_pos n_neg)
    misranking_rate: float   # pooled over all pairs
    n_pairs: int


# ------------------------------------------------------------------ graphs

def _add_grid(graph: nx.Graph, columns, u, pos, neg):
    """Append a |pos| x |neg| rook grid for user u; node ids continue from the graph size."""
    base = graph.number_of_nodes()
    n_pos, n_neg = len(pos), len(neg)
    for r, i in enumerate(pos):
        for c, j in enumerate(neg):
            graph.add_node(base + r * n_neg + c)
            columns["users"].append(u)
            columns["items"].append(i)
            columns["other_items"].append(j)
            columns["rows"].append(r)
            columns["cols"].append(c)
    for r in range(n_pos):
        graph.add_edges_from((base + r * n_neg + a, base + r * n_neg + b) for a, b in combinations(range(n_neg), 2))
    for c in range(n_neg):
        graph.add_edges_from((base + a * n_neg + c, base + b * n_neg + c) for a, b in combinations(range(n_pos), 2))


def _make_graph(grids, caps):
    graph = nx.Graph()
    columns = {name: [] for name in ("users", "items", "other_items", "rows", "cols")}
    blocks = {}
    for u, pos, neg in grids:
        if len(pos) and len(neg):
            _add_grid(graph, columns, u, pos, neg)
            blocks[u] = (len(pos), len(neg))
    arrays = {name: np.asarray(values, dtype=np.int64) for name, values in columns.items()}
    return DependencyGraph(graph=graph, caps=tuple(caps), blocks=blocks, **arrays)


def rook_graph(n_pos, n_neg) -> DependencyGraph:
    """A single user preferring items 0..n_pos-1 over items n_pos..n_pos+n_neg-1."""
    if n_pos < 1 or n_neg < 1:
        raise ArgumentError(f"grid sizes must be >= 1, got ({n_pos}, {n_neg})")
    return _make_graph([(0, np.arange(n_pos), np.arange(n_pos, n_pos + n_neg))], (n_pos, n_neg))


def min_counts(ds: Dataset, users=None):
    """(n_pos*, n_neg*) over the given users, the eligible users by default."""
    users = ds.eligible_users if users is None else np.asarray(users, dtype=np.int64)
    if len(users) == 0:
        raise ArgumentError("no user with both preferred and non-preferred training items")
    return int(ds.pos_counts[users].min()), int(ds.neg_counts[users].min())


def build_dependency_graph(ds: Dataset, users=None, caps=None) -> DependencyGraph:
    """
    One node per triplet built from the first n_pos preferred and first n_neg
    non-preferred training items of each user (ascending item index). A user
    with fewer items keeps a smaller grid.
    """
    users = ds.eligible_users if users is None else np.asarray(users, dtype=np.int64)
    caps = min_counts(ds, users) if caps is None else tuple(int(c) for c in caps)
    if min(caps) < 1:
        raise ArgumentError(f"caps must be >= 1, got {caps}")
    grids = [(int(u), ds.pos_items(u)[:caps[0]], ds.neg_items(u)[:caps[1]]) for u in users]
    graph = _make_graph(grids, caps)
    logger.debug(f"Dependency graph: {graph.n_nodes} triplets, {graph.graph.number_of_edges()} edges, "
                 f"{len(graph.blocks)} users")
    return graph


# ---------------------------------------------------------- independent sets

def maximal_independent_sets(graph: nx.Graph, limit=MAX_ENUMERATED_SETS):
    """Every maximal independent set, as the maximal cliques of the complement."""
    sets = []
    for clique in nx.find_cliques(nx.complement(graph)):
        sets.append(tuple(sorted(clique)))
        if len(sets) > limit:
            raise CapacityError(f"more than {limit} maximal independent sets")
    return sorted(sets)


def _extend(graph: nx.Graph, members):
    """Grow an independent set to a maximal one, adding nodes in ascending order."""
    chosen = set(members)
    blocked = set().union(*(graph.adj[v] for v in chosen))
    for v in sorted(graph.nodes):
        if v not in chosen and v not in blocked:
            chosen.add(v)
            blocked.update(graph.adj[v])
    return tuple(sorted(chosen))


def heaviest_independent_set(graph: nx.Graph, weights, cliques=None):
    """
    Independent set of maximum total node weight (nodes 0..n-1), solved as a
    0/1 program with one packing row per maximal clique of the graph.
    """
    n = graph.number_of_nodes()
    cliques = [tuple(c) for c in nx.find_cliques(graph)] if cliques is None else cliques
    packing = _incidence(range(n), cliques).T
    result = milp(
        -np.asarray(weights, dtype=np.float64),
        constraints=LinearConstraint(packing, -np.inf, 1.0),
        integrality=np.ones(n),
        bounds=Bounds(0.0, 1.0),
        options={"mip_rel_gap": 1e-9},
    )
    if not result.success:
        raise RecNetError(f"independent set program failed: {result.message}")
    chosen = np.flatnonzero(result.x > 0.5)
    return tuple(chosen.tolist()), float(np.sum(np.asarray(weights)[chosen]))


# ------------------------------------------------------------------ covers

def _incidence(nodes, sets):
    position = {v: k for k, v in enumerate(nodes)}
    rows = [position[v] for members in sets for v in members]
    cols = [j for j, members in enumerate(sets) for _ in members]
    return sparse.csc_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(position), len(sets)))


def _solve_covering(matrix):
    """min sum(w) subject to matrix @ w >= 1, w >= 0; returns (weights, node duals)."""
    n_nodes, n_sets = matrix.shape
    result = linprog(np.ones(n_sets), A_ub=-matrix, b_ub=-np.ones(n_nodes), bounds=(0, None), method="highs")
    if result.status != 0:
        raise RecNetError(f"cover linear program failed: {result.message}")
    return np.clip(result.x, 0.0, None), np.clip(-result.ineqlin.marginals, 0.0, None)


def _generate_columns(sub: nx.Graph):
    """
    Covering LP over a growing family of maximal independent sets: start from
    a greedy colouring, then add the heaviest independent set under the node
    duals while its weight exceeds 1.
    """
    cliques = [tuple(c) for c in nx.find_cliques(sub)]
    classes = {}
    for v, colour in nx.greedy_color(sub, strategy="largest_first").items():
        classes.setdefault(colour, []).append(v)
    sets = sorted({_extend(sub, members) for members in classes.values()})
    known = set(sets)
    nodes = sorted(sub.nodes)

    for _ in range(MAX_PRICING_ROUNDS):
        weights, duals = _solve_covering(_incidence(nodes, sets))
        members, value = heaviest_independent_set(sub, duals, cliques)
        members = _extend(sub, members)
        if value <= 1.0 + PRICING_TOLERANCE or members in known:
            return sets, weights
        sets.append(members)
        known.add(members)
    raise CapacityError(f"cover did not converge within {MAX_PRICING_ROUNDS} pricing rounds")


def _peel(sets, weights, nodes):
    """Turn a covering (>= 1) into an exact cover by removing over-covered nodes from split-off copies."""
    entries = [[set(members), float(w)] for members, w in zip(sets, weights) if w > COVER_TOLERANCE * 1e-3]
    coverage = {v: 0.0 for v in nodes}
    for members, w in entries:
        for v in members:
            coverage[v] += w

    for v in nodes:
        excess = coverage[v] - 1.0
        k = 0
        while excess > 1e-12 and k < len(entries):
            members, w = entries[k]
            if v in members and w > 0:
                taken = min(w, excess)
                entries[k][1] = w - taken
                entries.append([members - {v}, taken])
                excess -= taken
            k += 1

    merged: Dict[Tuple[int, ...], float] = {}
    for members, w in entries:
        if members and w > 0:
            key = tuple(sorted(members))
            merged[key] = merged.get(key, 0.0) + w
    keys = sorted(merged)
    return keys, np.array([merged[key] for key in keys])


def _component_cover(sub: nx.Graph, method: CoverMethod):
    nodes = sorted(sub.nodes)
    if len(nodes) == 1:
        return [(nodes[0],)], np.ones(1)

    if method == CoverMethod.EXHAUSTIVE:
        if len(nodes) > EXHAUSTIVE_MAX_NODES:
            raise CapacityError(f"exhaustive cover limited to {EXHAUSTIVE_MAX_NODES} nodes per component, "
                                f"got {len(nodes)}")
        sets = maximal_independent_sets(sub)
        weights, _ = _solve_covering(_incidence(nodes, sets))
        return _peel(sets, weights, nodes)

    if len(nodes) > LP_MAX_NODES:
        raise CapacityError(f"lp cover limited to {LP_MAX_NODES} nodes per component, got {len(nodes)}")
    sets, weights = _generate_columns(sub)
    return _peel(sets, weights, nodes)


def _stack_covers(parts):
    """
    Union of covers of disjoint, mutually non-adjacent components: every
    part is laid out along [0, its total weight] and the sets active at the
    same position are merged. Total weight is the largest part total.
    """
    cumulative = [np.round(np.cumsum(weights), 12) for _, weights in parts]
    total = max(c[-1] for c in cumulative)
    points = np.unique(np.concatenate([[0.0], *cumulative]))
    points = points[points <= total]

    merged: Dict[Tuple[int, ...], float] = {}
    for lo, hi in zip(points[:-1], points[1:]):
        middle = 0.5 * (lo + hi)
        members = []
        for (sets, _), cum in zip(parts, cumulative):
            j = int(np.searchsorted(cum, middle, side="right"))
            if j < len(sets):
                members.extend(sets[j])
        if members:
            key = tuple(sorted(members))
            merged[key] = merged.get(key, 0.0) + (hi - lo)
    keys = sorted(merged)
    return keys, np.array([merged[key] for key in keys])


def _relabelled_key(sub: nx.Graph):
    nodes = sorted(sub.nodes)
    local = {v: k for k, v in enumerate(nodes)}
    return len(nodes), tuple(sorted(tuple(sorted((local[a], local[b]))) for a, b in sub.edges))


def fractional_chromatic(graph: DependencyGraph, method=CoverMethod.LP) -> CoverResult:
    """Minimum-weight exact proper fractional cover; its weight is the fractional chromatic number."""
    method = CoverMethod(method)
    if graph.n_nodes == 0:
        raise ArgumentError("dependency graph has no triplet")

    solved: Dict[tuple, tuple] = {}
    parts = []
    for component in sorted(nx.connected_components(graph.graph), key=min):
        sub = graph.graph.subgraph(component)
        key = _relabelled_key(sub)
        if key not in solved:
            solved[key] = _component_cover(nx.convert_node_labels_to_integers(sub, ordering="sorted"), method)
        local_sets, weights = solved[key]
        nodes = sorted(component)
        parts.append(([tuple(nodes[v] for v in members) for members in local_sets], weights))

    sets, weights = _stack_covers(parts)
    cover = CoverResult(sets=sets, weights=weights, method=method.value, graph=graph)
    logger.debug(f"{method.value} cover: {len(sets)} sets, weight {cover.total_weight:.6f}")
    return cover


def diagonal_cover(graph: DependencyGraph) -> CoverResult:
    """
    Closed-form exact cover of a union of rook grids: in an a x b grid with
    m = max(a, b), the cells with (col - row) mod m == j form an independent
    set, and the m sets of weight 1 cover every cell once.
    """
    if graph.n_nodes == 0:
        raise ArgumentError("dependency graph has no triplet")
    parts = []
    for u in sorted(graph.blocks):
        n_pos, n_neg = graph.blocks[u]
        width = max(n_pos, n_neg)
        nodes = np.flatnonzero(graph.users == u)
        diagonal = (graph.cols[nodes] - graph.rows[nodes]) % width
        sets = [tuple(nodes[diagonal == j].tolist()) for j in range(width)]
        parts.append((sets, np.ones(width)))
    sets, weights = _stack_covers(parts)
    return CoverResult(sets=sets, weights=weights, method="diagonal", graph=graph)


def validate_cover(cover: CoverResult, tolerance=COVER_TOLERANCE):
    """Violations of independence, weight range and exact coverage; empty when the cover is valid."""
    problems = []
    graph = cover.graph.graph
    coverage = np.zeros(cover.graph.n_nodes)
    for j, (members, weight) in enumerate(zip(cover.sets, cover.weights)):
        if not -tolerance <= weight <= 1.0 + tolerance:
            problems.append(f"set {j} has weight {weight} outside [0, 1]")
        for a, b in graph.subgraph(members).edges:
            problems.append(f"set {j} holds adjacent nodes {a} and {b}")
        coverage[list(members)] += weight
    for v in np.flatnonzero(np.abs(coverage - 1.0) > tolerance):
        problems.append(f"node {v} covered with total weight {coverage[v]}")
    return problems


# ------------------------------------------------------------------ bound

def self_distances(params: ModelParams, graph: DependencyGraph):
    """||Phi(u,i) - Phi(u,i')||^2 per triplet, the linear-kernel d(z, z)."""
    diff = params.U[graph.users] * (params.V[graph.items] - params.V[graph.other_items])
    return np.einsum("nk,nk->n", diff, diff)


def complexity_term(params: ModelParams, ds: Optional[Dataset], cover: CoverResult, kernel="linear", check=True):
    if kernel != "linear":
        raise ArgumentError(f"only the linear kernel is supported, got {kernel!r}")
    if ds is not None and (params.n_users != ds.n_users or params.n_items != ds.n_items):
        raise ArgumentError("model and dataset disagree on the number of users or items")
    if check:
        problems = validate_cover(cover)
        if problems:
            raise ArgumentError(f"invalid cover: {problems[0]}")

    d = self_distances(params, cover.graph)
    weighted = sum(w * d[list(members)].sum() for members, w in zip(cover.sets, cover.weights))
    return float(np.sqrt(max(weighted, 0.0) / cover.graph.caps[1]))


def generalization_bound(inputs: BoundInputs, empirical_loss):
    """
    L*(f, S) + 2BC/(N n_pos) + 5/2 (sqrt(2BC/(N n_pos)) + sqrt(r/2)) sqrt(log(1/delta)/n_pos)
    + 25/48 log(1/delta)/n_pos
    """
    if not 0.0 < inputs.delta < 1.0:
        raise ArgumentError(f"delta must be in (0, 1), got {inputs.delta}")
    capacity = 2.0 * inputs.B * inputs.C / (inputs.N * inputs.n_pos)
    confidence = np.log(1.0 / inputs.delta) / inputs.n_pos
    return float(empirical_loss + capacity
                 + 2.5 * (np.sqrt(capacity) + np.sqrt(inputs.r / 2.0)) * np.sqrt(confidence)
                 + 25.0 / 48.0 * confidence)


def worst_case_empirical_loss(params: ModelParams, ds: Dataset, caps=None, half_credit=False) -> EmpiricalLoss:
    """
    Misranking losses over every (preferred, non-preferred) training pair of
    the eligible users. A pair counts as an error when g(i) < g(i') strictly;
    with half_credit a tie counts 0.5.
    """
    users = ds.eligible_users
    n_pos, n_neg = min_counts(ds, users)
    if caps is not None:
        if caps[0] > n_pos or caps[1] > n_neg or min(caps) < 1:
            raise ArgumentError(f"caps {tuple(caps)} must lie in [1, ({n_pos}, {n_neg})]")
        n_pos, n_neg = caps

    per_user = 0.0
    errors_total = 0.0
    pairs_total = 0
    for u in users.tolist():
        g_pos = model.score_items(params, u, ds.pos_items(u))
        g_neg = np.sort(model.score_items(params, u, ds.neg_items(u)))
        above = len(g_neg) - np.searchsorted(g_neg, g_pos, side="right")
        errors = float(above.sum())
        if half_credit:
            ties = np.searchsorted(g_neg, g_pos, side="right") - np.searchsorted(g_neg, g_pos, side="left")
            errors += 0.5 * float(ties.sum())
        pairs = len(g_pos) * len(g_neg)
        per_user += errors / pairs
        errors_total += errors
        pairs_total += pairs

    N = len(users)
    loss = EmpiricalLoss(
        per_user=per_user / N,
        worst_case=errors_total / (N * n_pos * n_neg),
        misranking_rate=errors_total / pairs_total,
        n_pairs=pairs_total,
    )
    if loss.per_user > loss.worst_case + 1e-12:
        raise NumericError(f"per-user loss {loss.per_user} exceeds worst-case loss {loss.worst_case}")
    return loss


def weight_norm_proxy(params: ModelParams):
    """||w2|| times the spectral norm of W1; a heuristic stand-in for B on the non-linear scorer."""
    return float(np.linalg.norm(params.w2) * np.linalg.norm(params.W1, 2))


def misranking_variance(params: ModelParams, ds: Dataset, losses: Optional[EmpiricalLoss] = None, half_credit=False):
    """Variance p(1 - p) of the 0/1 misranking loss, p the pooled misranking rate."""
    losses = losses if losses is not None else worst_case_empirical_loss(params, ds, half_credit=half_credit)
    rate = losses.misranking_rate
    return rate * (1.0 - rate)


def bound_report(params: ModelParams, ds: Dataset, delta, caps=None, half_credit=False, cover=None):
    if not 0.0 < delta < 1.0:
        raise ArgumentError(f"delta must be in (0, 1), got {delta}")
    graph = cover.graph if cover is not None else build_dependency_graph(ds, caps=caps)
    cover = cover if cover is not None else diagonal_cover(graph)
    n_pos, n_neg = graph.caps

    losses = worst_case_empirical_loss(params, ds, caps=(n_pos, n_neg), half_credit=half_credit)
    inputs = BoundInputs(
        N=len(ds.eligible_users),
        n_pos=n_pos,
        n_neg=n_neg,
        B=weight_norm_proxy(params),
        r=misranking_variance(params, ds, losses),
        delta=delta,
        C=complexity_term(params, ds, cover),
    )
    report = {
        "N": inputs.N,
        "n_pos": inputs.n_pos,
        "n_neg": inputs.n_neg,
        "m": inputs.m,
        "B": inputs.B,
        "r": inputs.r,
        "delta": inputs.delta,
        "C": inputs.C,
        "chromatic_value": cover.chromatic_value,
        "L_hat": losses.per_user,
        "L_star": losses.worst_case,
        "bound": generalization_bound(inputs, losses.worst_case),
        "B_is_heuristic": True,
    }
    logger.info(f"bound={report['bound']:.6f} L*={report['L_star']:.6f} C={report['C']:.6f} B={report['B']:.6f}")
    return report


def format_report(report: dict):
    return "".join(f"{key}\t{value!r}\n" for key, value in report.items())


def complexity_curve(ds: Dataset, ks: Sequence[int] = range(1, 21), trials=5, seed=0, init_scale=1.0,
                     hidden_units=32, cover: Optional[CoverResult] = None):
    """Mean C over `trials` random models for every embedding size in `ks`."""
    cover = cover if cover is not None else diagonal_cover(build_dependency_graph(ds))
    problems = validate_cover(cover)
    if problems:
        raise ArgumentError(f"invalid cover: {problems[0]}")
    children = np.random.SeedSequence(seed).spawn(len(ks) * trials)
    rows = []
    for position, k in enumerate(ks):
        values = []
        for trial in range(trials):
            child_seed = int(children[position * trials + trial].generate_state(1)[0])
            config = ModelConfig(embed_dim=k, hidden_units=hidden_units, init_scale=init_scale, seed=child_seed)
            params = model.init(config, ds.n_users, ds.n_items)
            values.append(complexity_term(params, ds, cover, check=False))
        rows.append((int(k), float(np.mean(values))))
        logger.progress(f"k={k}: mean C={rows[-1][1]:.6f}")
    return rows


def curve_trend(rows):
    """Spearman correlation between k and the measured complexity."""
    ks, values = zip(*rows)
    return float(spearmanr(ks, values).correlation)
