"""descentgen command line: synth / ingest / fit / sample / evaluate / sweep."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import dataio, latent, metrics, pipeline, synth
from .config import RunConfig, load_run_config
from .errors import DescentGenError, GenerationStalledError, SpecInvalidError
from .fpca import FpcaBasis
from .generator import PlausibilityBounds, generate, read_trajectories, start_levels, write_trajectories

log = logging.getLogger("descentgen")

EXIT_CONFIG = 2
EXIT_CODES = {"synth": 10, "ingest": 11, "fit": 12, "sample": 13, "evaluate": 14, "sweep": 15}

FILES = {
    "blips": "blips.csv", "truth": "truth.json", "clean": "clean.csv", "ingest": "ingest_report.json",
    "split": "split.json", "basis_drag": "basis_drag.json", "basis_cas": "basis_cas.json",
    "model": "model.json", "bounds": "bounds.json", "fit_report": "fit_report.json",
    "generated": "generated.csv", "gen_report": "generation_report.json",
    "metrics": "metrics.json", "metrics_csv": "metrics.csv", "curves": "curves.csv", "sweep": "sweep.csv",
}


def _out(run: RunConfig, key: str) -> Path:
    d = run.path("out")
    d.mkdir(parents=True, exist_ok=True)
    return d / FILES[key]


def _load_clean(run: RunConfig):
    ds = dataio.read_blips(run.path("dataset"))
    return dataio.clean_descents(ds, run.min_rocd_fpm, run.const_run, run.const_tol_fpm)


def cmd_synth(run: RunConfig) -> int:
    cfg = run.aircraft_config()
    s = run.synth
    spec = synth.default_truth_spec(cfg, s.n_trajectories, run.seed, s.top_fl, s.noise_ias, s.noise_rocd,
                                    s.complete_frac, s.max_truncation, s.bimodal)
    ds, truth = synth.synth_generate(spec, cfg)
    dataio.write_blips(_out(run, "blips"), ds)
    payload = {"spec": spec.to_dict(), "weights": truth.weights, "component": truth.component,
               "top_index": truth.top_index}
    dataio.save_artifact(_out(run, "truth"), "synth-truth", payload)
    print(f"wrote {len(ds)} trajectories to {_out(run, 'blips')}")
    return 0


def cmd_ingest(run: RunConfig) -> int:
    raw = dataio.read_blips(run.path("dataset"))
    clean = dataio.clean_descents(raw, run.min_rocd_fpm, run.const_run, run.const_tol_fpm)
    dataio.write_blips(_out(run, "clean"), clean)
    report = {"read": len(raw) + len(raw.quarantined), "quarantined": [list(q) for q in raw.quarantined],
              "kept_after_cleaning": len(clean), "min_rocd_fpm": run.min_rocd_fpm}
    dataio.save_artifact(_out(run, "ingest"), "ingest-report", report)
    print(f"kept {len(clean)} of {report['read']} trajectories ({len(raw.quarantined)} quarantined)")
    return 0


def cmd_fit(run: RunConfig) -> int:
    cfg = run.aircraft_config()
    clean = _load_clean(run)
    train, test = dataio.split(clean, run.train_frac, run.seed)
    fit = pipeline.fit_training_set(train, cfg, run.explained_variance, run.model, run.seed,
                                    run.coverage_frac, gmm_cfg=run.gmm, nf_cfg=run.nf)
    dataio.save_artifact(_out(run, "split"), "split",
                         {"seed": run.seed, "train": train.ids, "test": test.ids})
    dataio.save_artifact(_out(run, "basis_drag"), "fpca-basis", fit.basis_drag.to_dict())
    dataio.save_artifact(_out(run, "basis_cas"), "fpca-basis", fit.basis_cas.to_dict())
    latent.save_model(_out(run, "model"), fit.model, fit.report)
    dataio.save_artifact(_out(run, "bounds"), "bounds", fit.bounds.to_dict())
    summary = {"aircraft_type": cfg.type_code, "n_train": len(train), "n_test": len(test),
               "n_levels": len(fit.grid), "h_f": fit.grid.h_f,
               "n_alpha": fit.basis_drag.n_modes, "n_beta": fit.basis_cas.n_modes,
               "fpca_iterations": [fit.fpca_drag.iterations, fit.fpca_cas.iterations],
               "explained_variance": run.explained_variance, "latent": fit.report.to_dict()}
    dataio.save_artifact(_out(run, "fit_report"), "fit-report", summary)
    extra = f", n_m={fit.model.n_m}" if fit.report.model_kind == "gmm" else ""
    print(f"fit {fit.report.model_kind}{extra} on {len(train)} trajectories: "
          f"n_alpha={fit.basis_drag.n_modes}, n_beta={fit.basis_cas.n_modes}, n_p={fit.report.n_p}")
    return 0


def _load_fit(run: RunConfig):
    out = run.path("out")
    basis_D = FpcaBasis.from_dict(dataio.load_artifact(out / FILES["basis_drag"], "fpca-basis"))
    basis_V = FpcaBasis.from_dict(dataio.load_artifact(out / FILES["basis_cas"], "fpca-basis"))
    model, _ = latent.load_model(out / FILES["model"])
    bounds = PlausibilityBounds.from_dict(dataio.load_artifact(out / FILES["bounds"], "bounds"))
    split = dataio.load_artifact(out / FILES["split"], "split")
    return basis_D, basis_V, model, bounds, split


def cmd_sample(run: RunConfig) -> int:
    cfg = run.aircraft_config()
    basis_D, basis_V, model, bounds, split = _load_fit(run)
    test = _load_clean(run).select(split["test"])
    starts = start_levels(test, bounds.grid)
    trajs, report = generate(model, basis_D, basis_V, bounds, starts, run.count, run.seed, cfg)
    write_trajectories(_out(run, "generated"), trajs)
    dataio.save_artifact(_out(run, "gen_report"), "generation-report", report.to_dict())
    print(f"generated {report.accepted} trajectories, resample rate {report.resample_rate:.4f}")
    return 0


def cmd_evaluate(run: RunConfig) -> int:
    cfg = run.aircraft_config()
    _, _, _, bounds, split = _load_fit(run)
    test = _load_clean(run).select(split["test"])
    gen = read_trajectories(_out(run, "generated"))
    rep = pipeline.evaluate(test, gen, bounds.grid, cfg)
    dataio.save_artifact(_out(run, "metrics"), "metrics-report", rep.to_dict())
    metrics.write_report_csv(_out(run, "metrics_csv"), [rep])
    t_ttb = [metrics.descent_time(tr, bounds.grid) for tr in test if metrics.spans_grid(tr, bounds.grid)]
    g_ttb = [metrics.descent_time(tr, bounds.grid) for tr in gen if metrics.spans_grid(tr, bounds.grid)]
    if t_ttb and g_ttb:
        metrics.write_curves_csv(_out(run, "curves"), metrics.curve_rows(t_ttb, g_ttb))
    if rep.time_to_bottom is not None:
        print(f"time to bottom: KS {rep.time_to_bottom.ks:.4f}, MAE {rep.time_to_bottom.mae:.2f} s "
              f"(nominal baseline MAE {rep.ttb_bada_mae:.2f} s)")
    return 0


def cmd_sweep(run: RunConfig) -> int:
    cfg = run.aircraft_config()
    train, _ = dataio.split(_load_clean(run), run.train_frac, run.seed)
    rows = pipeline.explained_variance_sweep(train, cfg, run.sweep_variances, run.folds, run.seed,
                                             run.model, run.sweep_count, run.coverage_frac, run.gmm, run.nf)
    with open(_out(run, "sweep"), "w", newline="") as fh:
        w = csv.DictWriter(fh, pipeline.SWEEP_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({**r, "variance": repr(r["variance"]), "value": repr(r["value"])})
    print(f"wrote {len(rows)} sweep rows")
    return 0


COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "fit": cmd_fit, "sample": cmd_sample,
            "evaluate": cmd_evaluate, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration YAML")
    common.add_argument("--seed", type=int)
    common.add_argument("--model", choices=latent.MODEL_KINDS)
    common.add_argument("--count", type=int, help="number of trajectories to generate")
    common.add_argument("--explained-variance", type=float, dest="explained_variance")
    common.add_argument("--out", help="output directory")
    common.add_argument("--dataset", help="blip CSV to read")
    common.add_argument("--aircraft", help="aircraft config YAML")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="descentgen", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("synth", "fit", "sample", "evaluate"):
        sub.add_parser(name, parents=[common])
    ing = sub.add_parser("ingest", parents=[common])
    ing.add_argument("--min-rocd-fpm", type=float, dest="min_rocd_fpm",
                     help="descent-rate threshold in ft/min (default 500)")
    sw = sub.add_parser("sweep", parents=[common])
    sw.add_argument("--variances", help="comma-separated explained-variance values")
    sw.add_argument("--folds", type=int)
    return p


def _run_config(args) -> RunConfig:
    run = load_run_config(args.config) if args.config else RunConfig()
    over = {k: getattr(args, k, None) for k in
            ("seed", "model", "count", "explained_variance", "out", "dataset", "aircraft",
             "min_rocd_fpm", "folds")}
    if getattr(args, "variances", None):
        try:
            over["sweep_variances"] = tuple(float(v) for v in args.variances.split(","))
        except ValueError:
            raise SpecInvalidError(f"bad --variances value {args.variances!r}") from None
    for k in ("out", "dataset", "aircraft"):
        if over.get(k) is not None:
            over[k] = str(Path(over[k]).resolve())
    return run.with_overrides(**over)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        run = _run_config(args)
    except (DescentGenError, ValueError, TypeError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](run)
    except GenerationStalledError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        print(json.dumps(exc.diagnostics, sort_keys=True, default=str), file=sys.stderr)
        return EXIT_CODES[args.command]
    except (DescentGenError, ValueError, OSError) as exc:
        print(f"error [{args.command}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CODES[args.command]


if __name__ == "__main__":
    sys.exit(main())
