"""Command-line entry point: generate, infer, predict, evaluate, embed-export.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
Every command writes ``manifest.txt`` next to its outputs; feeding that
manifest back through ``--config`` (with the same ``--seed``) reproduces the
outputs byte for byte.
"""
import argparse
import logging
import os
import sys

import numpy as np

from . import io, kernels, pipeline, predictor
from .errors import ConfigError, DiffStruError

logger = logging.getLogger("diffstru")


def _config_file(args):
    return io.read_kv(args.config) if args.config else {}


def _seed(args, file_values):
    if args.seed is not None:
        return args.seed
    if "seed" in file_values:
        try:
            return int(file_values["seed"])
        except ValueError:
            raise ConfigError(f"seed must be an integer, got {file_values['seed']!r}") from None
    return 0


def _require_out(args):
    if not args.out:
        raise ConfigError(f"{args.command}: --out is required")
    return io.ensure_dir(args.out)


def cmd_generate(args):
    file_values = _config_file(args)
    seed = _seed(args, file_values)
    cfg = pipeline.resolve_config(pipeline.GENERATE_KEYS, file_values)
    out = _require_out(args)
    ds = pipeline.generate_dataset(cfg, seed)
    pipeline.write_dataset(out, ds)
    logger.info("wrote dataset to %s (%d links removed, %d activities removed)",
                out, len(ds.manifest["removed_links"]), len(ds.manifest["removed_activities"]))
    return 0


def cmd_infer(args):
    file_values = _config_file(args)
    seed = _seed(args, file_values)
    overrides = {
        "prior": args.prior, "n_iter": args.n_iter, "burn_in": args.burn_in, "thinning": args.thinning,
        "r_variance": args.r_variance, "chains": args.chains, "ridge": args.ridge, "D": args.latent_dim,
    }
    cfg = pipeline.resolve_config(pipeline.INFER_KEYS, file_values, overrides)
    if cfg["chains"] < 1:
        raise ConfigError("chains must be positive")
    if (args.resume or args.stop_at) and cfg["chains"] != 1:
        raise ConfigError("checkpoint/resume works on a single chain")
    ds = pipeline.load_dataset(args.dataset)
    out = _require_out(args)
    prior = pipeline.make_prior(ds, cfg)
    if args.dump_priors:
        for name in ("inv_W_X", "inv_W_U", "inv_W_Y"):
            io.write_matrix(os.path.join(out, f"{name}.tsv"), getattr(prior, name))

    chain_seeds = [seed] if cfg["chains"] == 1 else pipeline.derive_seeds(seed, cfg["chains"])
    manifest = pipeline.base_manifest("infer", seed)
    manifest["dataset"] = args.dataset
    manifest.update(cfg)
    manifest["backend"] = kernels.get_backend(args.backend).BACKEND
    manifest["chain_seeds"] = chain_seeds

    for c, chain_seed in enumerate(chain_seeds):
        scfg = pipeline.sampler_config(cfg, chain_seed)
        sampler = pipeline.run_chain(
            ds, prior, scfg, args.backend,
            checkpoint=args.checkpoint, checkpoint_every=args.checkpoint_every,
            resume=args.resume, stop_at=args.stop_at,
        )
        if sampler.iteration < scfg.n_iter:
            logger.info("stopped at iteration %d; checkpoint in %s", sampler.iteration, args.checkpoint)
            return 0
        est = sampler.estimate()
        chain_manifest = dict(manifest, n_retained=est.n_retained)
        target = out if cfg["chains"] == 1 else os.path.join(out, f"chain_{c}")
        pipeline.write_estimate(target, est, chain_manifest)
    if cfg["chains"] > 1:
        io.write_kv(os.path.join(out, pipeline.MANIFEST_FILE), manifest)
    return 0


def _flag(args, file_values, name):
    """A boolean switch given on the command line or carried by a replayed manifest."""
    raw = file_values.pop(name, "")
    return bool(getattr(args, name)) or (raw != "" and io.parse_bool(raw))


def _predict_cfg(args, file_values):
    overrides = {"delta_G": args.delta_G, "delta_C": args.delta_C}
    if args.normalize_rows:
        overrides["normalize_rows"] = True
    return pipeline.resolve_config(pipeline.PREDICT_KEYS, file_values, overrides)


def cmd_predict(args):
    file_values = _config_file(args)
    seed = _seed(args, file_values)
    dump_pa = _flag(args, file_values, "dump_pa")
    cfg = _predict_cfg(args, file_values)
    ds = pipeline.load_dataset(args.dataset)
    est = pipeline.read_estimate(args.estimate, args.chain)
    pipeline.check_estimate(est, ds)
    out = _require_out(args)
    res = predictor.predict(est, ds.network, ds.cascades, cfg["delta_G"], cfg["delta_C"],
                            cfg["normalize_rows"], args.backend)
    g_net = np.asarray(res.G_hat)
    with open(os.path.join(out, "links.tsv"), "w", encoding="utf-8") as fh:
        fh.write("src\tdst\tscore\n")
        for i, j in np.argwhere(g_net == 1):
            fh.write(f"{i}\t{j}\t{float(res.G_score[i, j])!r}\n")
    with open(os.path.join(out, "cascades.tsv"), "w", encoding="utf-8") as fh:
        fh.write(io.CASCADE_HEADER + "\n")
        for j in range(res.C_times.shape[1]):
            for i in np.flatnonzero(res.C_infected[:, j]):
                fh.write(f"{j}\t{i}\t{float(res.C_times[i, j])!r}\n")
    if dump_pa:
        io.write_matrix(os.path.join(out, "P.tsv"), res.P)
        io.write_matrix(os.path.join(out, "A.tsv"), res.A)
    manifest = pipeline.base_manifest("predict", seed)
    manifest.update({"dataset": args.dataset, "estimate": args.estimate})
    manifest.update(cfg)
    manifest["delta_C"] = float(res.delta_C)
    manifest["dump_pa"] = dump_pa
    io.write_kv(os.path.join(out, pipeline.MANIFEST_FILE), manifest)
    return 0


def cmd_evaluate(args):
    file_values = _config_file(args)
    seed = _seed(args, file_values)
    with_baselines = _flag(args, file_values, "with_baselines")
    cfg = _predict_cfg(args, file_values)
    ds = pipeline.load_dataset(args.dataset)
    est = pipeline.read_estimate(args.estimate, args.chain)
    out = _require_out(args)
    metric_rows, pr_rows, rmse_rows = pipeline.evaluate(ds, est, cfg, with_baselines, args.backend)
    io.write_rows(os.path.join(out, "metrics.tsv"), ("method", "metric", "value"), metric_rows)
    io.write_rows(os.path.join(out, "pr_curve.tsv"), ("method", "threshold", "precision", "recall"), pr_rows)
    io.write_rows(os.path.join(out, "rmse.tsv"), ("method", "partition", "value"), rmse_rows)
    summary = {f"{m}.{k}": v for m, k, v in metric_rows}
    summary.update({f"{m}.rmse_{p}": v for m, p, v in rmse_rows})
    io.write_kv(os.path.join(out, "summary.txt"), summary)
    manifest = pipeline.base_manifest("evaluate", seed)
    manifest.update({"dataset": args.dataset, "estimate": args.estimate})
    manifest.update(cfg)
    manifest["with_baselines"] = with_baselines
    io.write_kv(os.path.join(out, pipeline.MANIFEST_FILE), manifest)
    return 0


def cmd_embed_export(args):
    file_values = _config_file(args)
    seed = _seed(args, file_values)
    ds = pipeline.load_dataset(args.dataset)
    est = pipeline.read_estimate(args.estimate, args.chain)
    pipeline.check_estimate(est, ds)
    out = _require_out(args)
    (nh, nr), (ch, cr) = pipeline.embedding_rows(est, ds.labels)
    io.write_rows(os.path.join(out, "node_embedding.tsv"), nh, nr)
    io.write_rows(os.path.join(out, "cascade_embedding.tsv"), ch, cr)
    manifest = pipeline.base_manifest("embed-export", seed)
    manifest.update({"dataset": args.dataset, "estimate": args.estimate})
    io.write_kv(os.path.join(out, pipeline.MANIFEST_FILE), manifest)
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default: config value or 0)")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--config", default=None, help="flat 'key = value' config file; a manifest works too")
    common.add_argument("--backend", choices=("cython", "python"), default=None,
                        help="kernel backend (default: compiled when available)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="diffstru", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="synthetic dataset with a missingness scenario")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("infer", parents=[common], help="run the Gibbs sampler on a dataset")
    p.add_argument("dataset")
    p.add_argument("--prior", choices=("identity", "laplacian"))
    p.add_argument("--ridge", type=float)
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--n-iter", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--thinning", type=int)
    p.add_argument("--r-variance", choices=("unit", "derived"))
    p.add_argument("--chains", type=int)
    p.add_argument("--checkpoint", help="checkpoint file (.npz) written periodically and at the end")
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--resume", help="continue from this checkpoint")
    p.add_argument("--stop-at", type=int, help="stop after this iteration (requires --checkpoint)")
    p.add_argument("--dump-priors", action="store_true")
    p.set_defaults(func=cmd_infer)

    for name, func, helptext in (
        ("predict", cmd_predict, "recover links and cascade times from an estimate"),
        ("evaluate", cmd_evaluate, "score an estimate against ground truth"),
        ("embed-export", cmd_embed_export, "export latent vectors with community labels"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("dataset")
        p.add_argument("estimate")
        p.add_argument("--chain", type=int, default=0, help="chain index for multi-chain estimates")
        if name != "embed-export":
            p.add_argument("--delta-G", dest="delta_G", type=float)
            p.add_argument("--delta-C", dest="delta_C", type=float)
            p.add_argument("--normalize-rows", action="store_true")
        if name == "predict":
            p.add_argument("--dump-pa", action="store_true", help="also write P and A matrices")
        if name == "evaluate":
            p.add_argument("--with-baselines", action="store_true")
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "stop_at", None) and not args.checkpoint:
        print("error: --stop-at needs --checkpoint", file=sys.stderr)
        return ConfigError.exit_code
    try:
        return args.func(args)
    except DiffStruError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
