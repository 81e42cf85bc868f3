"""Dataset and estimate directories, and the end-to-end steps the CLI drives.

A dataset directory holds the ground-truth graph and cascades, community
labels and a manifest. The manifest lists every removed link and activity,
so the observed training data are rebuilt by replaying those removals; no
second copy of the data is stored. Directories from external sources set
``ground_truth = false`` and then hold the observed data directly.
"""
import os
from dataclasses import dataclass

import numpy as np

from . import __version__, baselines, io, metrics, predictor, priors, synth
from .errors import ConfigError, DataError, ShapeMismatchError
from .model import CascadeSet, ObservedNetwork, SamplerConfig
from .sampler import TRACE_FIELDS, GibbsSampler, PosteriorEstimate

GRAPH_FILE = "graph.tsv"
CASCADE_FILE = "cascades.tsv"
LABEL_FILE = "communities.tsv"
MANIFEST_FILE = "manifest.txt"

# generate: key -> (parser, default)
GENERATE_KEYS = {
    "n_nodes": (int, 100),
    "n_communities": (int, 4),
    "p_in": (float, 0.74),
    "p_out": (float, 0.026),
    "n_cascades": (int, 200),
    "window": (float, 1.0),
    "transmission_rate": (float, 1.0),
    "transmission_prob": (float, 1.0),
    "missing_mode": (str, "random"),
    "missing_target": (str, "both"),
    "missing_rate": (float, 0.0),
    "missing_link_rate": (float, None),
    "missing_activity_rate": (float, None),
    "degree_floor": (int, 5),
    "activity_floor": (int, 5),
    "private_users": (io.parse_int_list, ()),
}

INFER_KEYS = {
    "prior": (str, "identity"),
    "ridge": (float, priors.DEFAULT_RIDGE),
    "D": (int, 8),
    "sigma2_C": (float, 1.0),
    "sigma2_R": (float, 1.0),
    "alpha1": (float, 0.2),
    "alpha2": (float, 0.3),
    "n_iter": (int, 1000),
    "burn_in": (int, 900),
    "thinning": (int, 1),
    "r_variance": (str, "unit"),
    "chains": (int, 1),
}

PREDICT_KEYS = {
    "delta_G": (float, predictor.DEFAULT_DELTA_G),
    "delta_C": (float, None),
    "normalize_rows": (io.parse_bool, False),
}

# keys a manifest carries that are not configuration; ignored when a
# manifest is fed back in as a config file
MANIFEST_META = {
    "command", "diffstru_version", "numpy_version", "seed", "ground_truth",
    "removed_links", "removed_activities", "dataset", "estimate", "chain_seeds",
    "n_retained", "backend",
}


def resolve_config(keys, file_values=None, overrides=None):
    """Merge defaults, file values (raw strings) and CLI overrides (typed)."""
    file_values = dict(file_values or {})
    unknown = sorted(k for k in file_values if k not in keys and k not in MANIFEST_META)
    if unknown:
        raise ConfigError(f"unknown config key(s) {unknown}; valid keys: {sorted(keys)}")
    cfg = {}
    for key, (parse, default) in keys.items():
        raw = file_values.get(key)
        if raw is None or raw == "":
            cfg[key] = default
        else:
            try:
                cfg[key] = parse(raw)
            except ValueError:
                raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    return cfg


def base_manifest(command, seed):
    return {
        "command": command,
        "diffstru_version": __version__,
        "numpy_version": np.__version__,
        "seed": int(seed),
    }


def derive_seeds(seed, n):
    """``n`` independent 63-bit seeds from one master seed."""
    return [int(s.generate_state(1, np.uint64)[0] >> np.uint64(1)) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass
class Dataset:
    network: object
    cascades: CascadeSet
    truth_network: object = None
    truth_cascades: CascadeSet = None
    labels: np.ndarray = None
    manifest: dict = None

    @property
    def has_truth(self):
        return self.truth_network is not None


def missingness_spec(cfg):
    return synth.MissingnessSpec(
        mode=cfg["missing_mode"],
        rate=cfg["missing_rate"],
        target=cfg["missing_target"],
        degree_floor=cfg["degree_floor"],
        activity_floor=cfg["activity_floor"],
        private_users=tuple(cfg["private_users"]),
        link_rate=cfg["missing_link_rate"],
        activity_rate=cfg["missing_activity_rate"],
    )


def generate_dataset(cfg, seed):
    """Planted-partition graph, simulated cascades and a missingness scenario."""
    s_graph, s_casc, s_miss = derive_seeds(seed, 3)
    spec = missingness_spec(cfg)
    graph, labels = synth.planted_partition_graph(
        cfg["n_nodes"], cfg["n_communities"], cfg["p_in"], cfg["p_out"], s_graph
    )
    sim = synth.CascadeSimConfig(
        n_cascades=cfg["n_cascades"], window=cfg["window"],
        transmission_rate=cfg["transmission_rate"], transmission_prob=cfg["transmission_prob"], seed=s_casc,
    )
    cascades = synth.simulate_cascades(graph, sim)
    res = synth.apply_missingness(graph, cascades, spec, s_miss)
    manifest = base_manifest("generate", seed)
    manifest.update(cfg)
    manifest["ground_truth"] = True
    manifest["removed_links"] = res.removed_links
    manifest["removed_activities"] = res.removed_activities
    return Dataset(res.network, res.cascades, graph, cascades, labels, manifest)


def write_dataset(path, ds):
    io.ensure_dir(path)
    net = ds.truth_network if ds.has_truth else ds.network
    cas = ds.truth_cascades if ds.has_truth else ds.cascades
    io.write_edges(os.path.join(path, GRAPH_FILE), net)
    io.write_cascades(os.path.join(path, CASCADE_FILE), cas)
    labels = ds.labels if ds.labels is not None else np.zeros(net.n_nodes, dtype=np.int64)
    io.write_labels(os.path.join(path, LABEL_FILE), labels)
    io.write_kv(os.path.join(path, MANIFEST_FILE), ds.manifest)


def _max_ids(path, columns, skip_header):
    top = -1
    with open(path, encoding="utf-8") as fh:
        if skip_header:
            fh.readline()
        for line in fh:
            parts = line.split("\t")
            if len(parts) > max(columns):
                try:
                    top = max(top, *(int(parts[c]) for c in columns))
                except ValueError:
                    continue
    return top


def load_dataset(path):
    """Read a dataset directory and rebuild the observed split from its manifest."""
    gpath, cpath = os.path.join(path, GRAPH_FILE), os.path.join(path, CASCADE_FILE)
    for p in (gpath, cpath):
        if not os.path.isfile(p):
            raise DataError(f"dataset file missing: {p}")
    mpath = os.path.join(path, MANIFEST_FILE)
    manifest = io.read_kv(mpath) if os.path.isfile(mpath) else {}
    g_top = _max_ids(gpath, (0, 1), False)
    c_top = _max_ids(cpath, (1,), True)
    if "n_nodes" in manifest:
        n = int(manifest["n_nodes"])
        if g_top >= n or c_top >= n:
            raise DataError(
                f"shape mismatch in {path}: manifest says n_nodes={n}, {GRAPH_FILE} uses node ids up to "
                f"{g_top}, {CASCADE_FILE} uses node ids up to {c_top}"
            )
    else:
        n = max(g_top, c_top) + 1
    m = int(manifest["n_cascades"]) if "n_cascades" in manifest else _max_ids(cpath, (0,), True) + 1
    window = float(manifest.get("window", "1.0"))
    network = io.read_edges(gpath, n)
    cascades = io.read_cascades(cpath, n, m, window)
    lpath = os.path.join(path, LABEL_FILE)
    labels = io.read_labels(lpath) if os.path.isfile(lpath) else None
    if io.parse_bool(manifest.get("ground_truth", "false")):
        obs_net, obs_cas = synth.replay_missingness(
            network, cascades,
            io.parse_pairs(manifest.get("removed_links", "")),
            io.parse_pairs(manifest.get("removed_activities", "")),
        )
        truth = ObservedNetwork.fully_observed(network.adjacency)
        return Dataset(obs_net, obs_cas, truth, cascades, labels, manifest)
    return Dataset(network, cascades, None, None, labels, manifest)


# -- inference -----------------------------------------------------------------

def make_prior(ds, cfg):
    hyper = {k: cfg[k] for k in ("sigma2_C", "sigma2_R", "alpha1", "alpha2", "D")}
    return priors.build_prior(ds.network, ds.cascades, cfg["prior"], ridge=cfg["ridge"], **hyper)


def sampler_config(cfg, rng_seed):
    return SamplerConfig(
        n_iter=cfg["n_iter"], burn_in=cfg["burn_in"], thinning=cfg["thinning"],
        rng_seed=rng_seed, r_variance=cfg["r_variance"],
    )


def write_estimate(path, est, manifest):
    io.ensure_dir(path)
    io.write_matrix(os.path.join(path, "X.tsv"), est.X_bar)
    io.write_matrix(os.path.join(path, "Y.tsv"), est.Y_bar)
    io.write_matrix(os.path.join(path, "U.tsv"), est.U_bar)
    io.write_matrix(os.path.join(path, "Xi.tsv"), est.Xi_bar)
    io.write_rows(
        os.path.join(path, "trace.tsv"), TRACE_FIELDS,
        [[row[k] if k in ("iteration", "retained") else float(row[k]) for k in TRACE_FIELDS] for row in est.trace],
    )
    io.write_kv(os.path.join(path, MANIFEST_FILE), manifest)


def read_estimate(path, chain=0):
    sub = os.path.join(path, f"chain_{chain}")
    if os.path.isdir(sub):
        path = sub
    files = [os.path.join(path, f) for f in ("X.tsv", "Y.tsv", "U.tsv", "Xi.tsv")]
    for f in files:
        if not os.path.isfile(f):
            raise DataError(f"estimate file missing: {f}")
    X, Y, U, Xi = (io.read_matrix(f) for f in files)
    mpath = os.path.join(path, MANIFEST_FILE)
    n_ret = int(io.read_kv(mpath).get("n_retained", "0")) if os.path.isfile(mpath) else 0
    return PosteriorEstimate(X, Y, U, Xi, n_ret)


def run_chain(ds, prior, scfg, backend=None, checkpoint=None, checkpoint_every=None, resume=None, stop_at=None):
    sampler = GibbsSampler.from_data(ds.network, ds.cascades, prior, scfg, backend)
    if resume:
        if not os.path.isfile(resume):
            raise ConfigError(f"checkpoint not found: {resume}")
        sampler.load_checkpoint(resume)
    sampler.run(until=stop_at, checkpoint_path=checkpoint, checkpoint_every=checkpoint_every)
    if checkpoint:
        sampler.save_checkpoint(checkpoint)
    return sampler


def check_estimate(est, ds):
    n, m = ds.network.n_nodes, ds.cascades.n_cascades
    if est.X_bar.shape[1] != n or est.U_bar.shape[1] != n or est.Xi_bar.shape != (n, n):
        raise ShapeMismatchError("estimate vs dataset", "X", est.X_bar.shape, "network", (n, n))
    if est.Y_bar.shape[1] != m:
        raise ShapeMismatchError("estimate vs dataset", "Y", est.Y_bar.shape, "cascades", (n, m))


# -- evaluation ----------------------------------------------------------------

def _fmt_metric(v):
    return float(v) if not isinstance(v, bool) else int(v)


def evaluate(ds, est, cfg, with_baselines=False, backend=None):
    """Link and cascade metrics on held-out cells.

    Returns ``(metric_rows, pr_rows, rmse_rows)``: ``(method, metric, value)``,
    ``(method, threshold, precision, recall)`` and ``(method, partition, value)``.
    """
    if not ds.has_truth:
        raise DataError(
            "evaluation requires ground truth: use a synthetic dataset or one whose "
            "manifest replays removals from ground-truth files (ground_truth = true)"
        )
    check_estimate(est, ds)
    G, G_obs = ds.truth_network.adjacency, ds.network.adjacency
    cells = metrics.heldout_link_cells(G_obs)
    res = predictor.predict(est, ds.network, ds.cascades, cfg["delta_G"], cfg["delta_C"], cfg["normalize_rows"], backend)

    metric_rows, pr_rows, rmse_rows = [], [], []

    def link_block(method, g_hat, scores):
        report = metrics.link_report(G, G_obs, g_hat, scores)
        for key, val in report.items():
            metric_rows.append((method, key.lstrip("_"), _fmt_metric(val)))
        for t, p, r in metrics.pr_curve(G[cells], scores[cells]):
            pr_rows.append((method, float(t), float(p), float(r)))

    link_block("DiffStru", res.G_hat, res.G_score)
    metric_rows.append(("DiffStru", "delta_C", float(res.delta_C)))
    recon = est.X_bar.T @ est.Y_bar
    parts = metrics.cascade_rmse_partitions(ds.truth_cascades, ds.cascades, res.C_times, res.C_infected, recon)
    for name, val in parts.items():
        rmse_rows.append(("DiffStru", name, "skipped" if val is None else float(val)))

    if with_baselines:
        for method in baselines.LINK_METHODS:
            scores = baselines.score_links(ds.network, method)
            thr, _ = metrics.best_f_threshold(G[cells], scores[cells])
            g_hat = np.where(cells, scores >= thr, G_obs).astype(np.uint8)
            link_block(method, g_hat, scores)
            metric_rows.append((method, "threshold", float(thr)))
        for degree in (1, 2):
            preds = baselines.regression_predictions(ds.truth_cascades, ds.cascades, degree)
            name = f"Reg-{degree}"
            if preds:
                keys = sorted(preds)
                truth_t = [ds.truth_cascades.times[k] for k in keys]
                rmse_rows.append((name, "test_infected", metrics.rmse(truth_t, [preds[k] for k in keys])))
            else:
                rmse_rows.append((name, "test_infected", "skipped"))
    return metric_rows, pr_rows, rmse_rows


def embedding_rows(est, labels):
    d = est.X_bar.shape[0]
    n = est.X_bar.shape[1]
    labels = np.zeros(n, dtype=np.int64) if labels is None else labels
    node_header = ["node_id", "community"] + [f"x{k}" for k in range(d)] + [f"u{k}" for k in range(d)]
    node_rows = [
        [i, int(labels[i])] + [float(v) for v in est.X_bar[:, i]] + [float(v) for v in est.U_bar[:, i]]
        for i in range(n)
    ]
    casc_header = ["cascade_id"] + [f"y{k}" for k in range(d)]
    casc_rows = [[j] + [float(v) for v in est.Y_bar[:, j]] for j in range(est.Y_bar.shape[1])]
    return (node_header, node_rows), (casc_header, casc_rows)
