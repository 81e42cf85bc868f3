"""Synthetic graphs, cascade simulation and missingness scenarios.

Propagation runs against the follow direction: an edge ``i -> j`` means i
follows j, so an infection of j can reach i.
"""
import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .model import CascadeSet, ObservedNetwork


def planted_partition_graph(n_nodes, n_communities, p_in, p_out, seed):
    """Directed planted-partition graph and its community labels.

    Nodes are split into contiguous, near-equal communities. Each ordered
    pair gets an edge independently with probability ``p_in`` inside a
    community and ``p_out`` across.
    """
    if not 0 <= p_out < p_in <= 1 and not (p_in == p_out == 0):
        raise ConfigError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if n_nodes < 1 or not 1 <= n_communities <= n_nodes:
        raise ConfigError("need n_nodes >= 1 and 1 <= n_communities <= n_nodes")
    rng = np.random.default_rng(seed)
    labels = (np.arange(n_nodes) * n_communities) // n_nodes
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    adj = (rng.random((n_nodes, n_nodes)) < prob).astype(np.uint8)
    np.fill_diagonal(adj, 0)
    return ObservedNetwork.fully_observed(adj), labels


@dataclass(frozen=True)
class CascadeSimConfig:
    n_cascades: int
    window: float = 1.0
    transmission_rate: float = 1.0
    transmission_prob: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.transmission_rate <= 0:
            raise ConfigError("transmission_rate must be positive")
        if not 0.0 < self.transmission_prob <= 1.0:
            raise ConfigError("transmission_prob must lie in (0, 1]")
        if self.window <= 0:
            raise ConfigError("window must be positive")
        if self.n_cascades < 1:
            raise ConfigError("n_cascades must be positive")


def _one_cascade(followers, n_nodes, rate, prob, window, rng):
    source = int(rng.integers(n_nodes))
    times = np.full(n_nodes, np.inf)
    done = np.zeros(n_nodes, dtype=bool)
    times[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        t, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        targets = followers[u]
        if not targets.size:
            continue
        arrival = t + rng.exponential(1.0 / rate, size=targets.size)
        fires = rng.random(targets.size) < prob
        for node, t_new, ok in zip(targets, arrival, fires):
            if ok and not done[node] and t_new <= window and t_new < times[node]:
                times[node] = t_new
                heapq.heappush(heap, (t_new, int(node)))
    return times


def simulate_cascades(graph, cfg):
    """Independent-cascade simulation with exponential transmission delays.

    Each cascade starts at a uniformly drawn source at t = 0. An infected
    node gets one chance per follower to pass the item on, succeeding with
    ``transmission_prob`` after an exponential delay; a node's time is its
    earliest successful arrival, and anything later than the
    window stays uninfected. Cascade ``j`` uses its own substream of
    ``cfg.seed`` so cascades are reproducible independently.
    """
    n = graph.n_nodes
    if n == 0 or not graph.adjacency.any():
        raise DataError("cascade simulation needs a non-empty graph")
    # followers[u]: nodes i with an edge i -> u
    followers = [np.flatnonzero(graph.adjacency[:, u]) for u in range(n)]
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_cascades)
    times = np.zeros((n, cfg.n_cascades))
    infected = np.zeros((n, cfg.n_cascades), dtype=bool)
    for j, ss in enumerate(streams):
        t = _one_cascade(followers, n, cfg.transmission_rate, cfg.transmission_prob, cfg.window, np.random.default_rng(ss))
        hit = np.isfinite(t)
        infected[:, j] = hit
        times[hit, j] = t[hit]
    return CascadeSet(times, infected, cfg.window)


@dataclass(frozen=True)
class MissingnessSpec:
    """How data are hidden.

    ``mode`` is 'random' (each candidate removed with probability ``rate``)
    or 'nonrandom' (candidates restricted to links whose source has
    out-degree above ``degree_floor`` and to activities of nodes with more
    than ``activity_floor`` infections). ``target`` picks links, activities
    or both. ``private_users`` lose their whole activity row regardless.
    """

    mode: str = "random"
    rate: float = 0.0
    target: str = "both"
    degree_floor: int = 5
    activity_floor: int = 5
    private_users: tuple = ()
    link_rate: float = None
    activity_rate: float = None

    def __post_init__(self):
        if self.mode not in ("random", "nonrandom"):
            raise ConfigError(f"mode must be 'random' or 'nonrandom', got {self.mode!r}")
        if self.target not in ("links", "activities", "both"):
            raise ConfigError(f"target must be 'links', 'activities' or 'both', got {self.target!r}")
        for name in ("rate", "link_rate", "activity_rate"):
            val = getattr(self, name)
            if val is not None and not 0.0 <= val <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {val}")
        if self.degree_floor < 0 or self.activity_floor < 0:
            raise ConfigError("floors must be non-negative")
        object.__setattr__(self, "private_users", tuple(int(u) for u in self.private_users))

    @property
    def links_rate(self):
        return self.rate if self.link_rate is None else self.link_rate

    @property
    def activities_rate(self):
        return self.rate if self.activity_rate is None else self.activity_rate


@dataclass
class MissingnessResult:
    network: ObservedNetwork
    cascades: CascadeSet
    truth_network: ObservedNetwork
    truth_cascades: CascadeSet
    removed_links: list = field(default_factory=list)
    removed_activities: list = field(default_factory=list)


def link_candidates(network, spec):
    """Existing links eligible for removal, in row-major order."""
    adj = network.adjacency
    cand = adj == 1
    if spec.mode == "nonrandom":
        cand &= (network.out_degree() > spec.degree_floor)[:, None]
    return np.argwhere(cand)


def activity_candidates(cascades, spec):
    """Infected (node, cascade) cells eligible for removal, in row-major order."""
    cand = cascades.observed.copy()
    if spec.mode == "nonrandom":
        cand &= (cascades.observed.sum(axis=1) > spec.activity_floor)[:, None]
    return np.argwhere(cand)


def apply_missingness(network, cascades, spec, seed):
    """Hide part of the ground truth according to ``spec``.

    Candidate links are visited first, then candidate activities, each with
    one uniform draw; a cell is removed when its draw falls below the rate.
    """
    if network.n_nodes != cascades.n_nodes:
        raise DataError("network and cascades disagree on the number of nodes")
    rng = np.random.default_rng(seed)
    removed_links = []
    removed_acts = []
    if spec.target in ("links", "both"):
        cand = link_candidates(network, spec)
        tau = rng.random(len(cand))
        removed_links = [tuple(map(int, c)) for c in cand[tau < spec.links_rate]]
    if spec.target in ("activities", "both"):
        cand = activity_candidates(cascades, spec)
        tau = rng.random(len(cand))
        removed_acts = [tuple(map(int, c)) for c in cand[tau < spec.activities_rate]]
    if spec.private_users:
        already = set(removed_acts)
        for node in spec.private_users:
            if not 0 <= node < cascades.n_nodes:
                raise ConfigError(f"private user {node} outside [0, {cascades.n_nodes})")
            for j in np.flatnonzero(cascades.observed[node]):
                if (node, int(j)) not in already:
                    removed_acts.append((node, int(j)))
        removed_acts.sort()
    observed_net, observed_cas = replay_missingness(network, cascades, removed_links, removed_acts)
    return MissingnessResult(observed_net, observed_cas, network, cascades, removed_links, removed_acts)


def replay_missingness(network, cascades, removed_links, removed_activities):
    """Rebuild the observed data from ground truth and explicit removal lists."""
    adj = network.adjacency.copy()
    for i, j in removed_links:
        if adj[i, j] != 1:
            raise DataError(f"removed link ({i}, {j}) is not a ground-truth link")
        adj[i, j] = 0
    obs = cascades.observed.copy()
    for i, j in removed_activities:
        if not obs[i, j]:
            raise DataError(f"removed activity ({i}, {j}) is not a ground-truth infection")
        obs[i, j] = False
    return ObservedNetwork(adj), CascadeSet(cascades.times, obs, cascades.window)
