"""Command-line entry point: validate, stats, eval, synth, rho-sweep, encoder-check.

Exit codes: 0 success, 1 domain failure (validation findings, eval errors),
2 usage or I/O error.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import baselines, dataset, encoder, evaluate

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def cmd_validate(args) -> int:
    try:
        seqs = dataset.load_manifest(args.root)
    except (FileNotFoundError, dataset.DatasetFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    findings = []
    for s in seqs:
        findings.extend(dataset.validate_sequence(s))
    for f in findings:
        print(f)
    return EXIT_OK if not findings else EXIT_DOMAIN


def cmd_stats(args) -> int:
    try:
        seqs = dataset.load_manifest(args.root, load_frames=False)
    except (FileNotFoundError, dataset.DatasetFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if not seqs:
        print("error: empty dataset", file=sys.stderr)
        return EXIT_DOMAIN
    stats = dataset.compute_stats(seqs, bin_width=args.bin_width)
    if args.format == "json":
        print(json.dumps(stats.as_dict(), indent=2, sort_keys=True))
    elif args.format == "csv":
        print("field,value")
        for k in ("num_videos", "min_frames", "max_frames",
                  "total_frames", "avg_frames", "frame_range"):
            print(f"{k},{getattr(stats, k)}")
        for lo, width, count in stats.histogram:
            print(f"hist_{lo}_{lo + width},{count}")
    else:
        print(f"num_videos   {stats.num_videos}")
        print(f"min_frames   {stats.min_frames}")
        print(f"max_frames   {stats.max_frames}")
        print(f"total_frames {stats.total_frames}")
        print(f"avg_frames   {stats.avg_frames}")
        print(f"frame_range  {stats.frame_range}")
        print("histogram:")
        for lo, width, count in stats.histogram:
            print(f"  [{lo},{lo + width}) {count}")
    return EXIT_OK


def _evaluate_tracker(name: str, seqs, outputs, pooled: bool):
    per_seq = {s.name: evaluate.frame_scores(outputs[s.name], s) for s in seqs}
    return evaluate.aggregate(name, seqs, per_seq, pooled=pooled)


def cmd_eval(args) -> int:
    try:
        need_frames = args.tracker is not None
        seqs = dataset.load_manifest(args.root, load_frames=need_frames)
    except (FileNotFoundError, dataset.DatasetFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    pooled = args.average == "pooled"
    reports = []
    try:
        if args.tracker is not None:
            outputs = {}
            for s in seqs:
                tracker = baselines.make_tracker(args.tracker)
                outputs[s.name] = evaluate.run_ope(tracker, s)
            reports.append(_evaluate_tracker(args.tracker, seqs, outputs, pooled))
            if args.out:
                evaluate.save_results(outputs, os.path.join(args.out, "results", args.tracker))
        for results_dir in args.results or []:
            name = os.path.basename(os.path.normpath(results_dir))
            outputs = evaluate.load_results(results_dir, seqs)
            reports.append(_evaluate_tracker(name, seqs, outputs, pooled))
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN

    if not reports:
        print("error: no tracker or results directory given", file=sys.stderr)
        return EXIT_USAGE

    ranked = evaluate.rank(reports)
    print(f"{'rank':<5}{'tracker':<16}{'AUC':>8}{'PRC20':>8}")
    for i, r in enumerate(ranked, 1):
        print(f"{i:<5}{r.tracker:<16}{r.auc:>8.4f}{r.prc20:>8.4f}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"report.{args.format}")
        with open(path, "wb") as f:
            f.write(evaluate.emit_report(ranked, args.format))
        print(f"wrote {path}")
        if not args.no_plots:
            from .plots import render_ope_plots

            for p in render_ope_plots(ranked, args.out):
                print(f"wrote {p}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        with open(args.spec) as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    specs = payload if isinstance(payload, list) else [payload]
    names = []
    try:
        for d in specs:
            seq = baselines.generate(baselines.SynthSpec(**d))
            dataset.write_sequence(seq, args.out)
            names.append(seq.name)
    except (TypeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    dataset.write_manifest(args.out, names)
    print(f"wrote {len(names)} sequence(s) under {args.out}")
    return EXIT_OK


def _parse_rho_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_rho_sweep(args) -> int:
    rhos = args.rho if args.rho else [round(0.1 * k, 1) for k in range(1, 11)]
    if any(r < 0.0 or r > 1.0 for r in rhos):
        print("error: rho values must lie in [0, 1]", file=sys.stderr)
        return EXIT_USAGE

    cfg = encoder.EncoderConfig(seed=args.seed)
    params = encoder.init_params(cfg)
    rng = np.random.default_rng(args.seed + 1)
    template, search = encoder._random_inputs(cfg, rng)

    h0 = encoder.embed(template, search, params, cfg)
    pruned, mask = encoder.ce_chain(h0, params, cfg)
    restored = encoder.pad_restore(pruned, mask, h0.n_search)
    f0 = encoder.encoder_forward(template, search, params, cfg, rho=0.0)
    f1 = encoder.encoder_forward(template, search, params, cfg, rho=1.0)

    print(f"{'rho':>5} {'reduction_resid':>16} {'affinity_resid':>15} {'feature_norm':>13}")
    for r in rhos:
        fr = encoder.encoder_forward(template, search, params, cfg, rho=r)
        if r < 1.0:
            # linear extrapolation of F(rho) back to rho = 0
            extrap = (fr.tokens - r * f1.tokens) / (1.0 - r)
        else:
            extrap = f0.tokens
        reduction = float(np.max(np.abs(extrap - restored.tokens)))
        affinity = float(np.max(np.abs(fr.tokens - ((1 - r) * f0.tokens + r * f1.tokens))))
        norm = float(np.linalg.norm(fr.tokens))
        print(f"{r:>5.2f} {reduction:>16.3e} {affinity:>15.3e} {norm:>13.6f}")
    return EXIT_OK


def cmd_encoder_check(args) -> int:
    pad_fill = 1.0 if args.inject_pad_fault else 0.0
    results = encoder.run_invariant_checks(seed=args.seed, pad_fill=pad_fill)
    ok = True
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok = ok and passed
    if args.dump_json:
        cfg = encoder.EncoderConfig(seed=args.seed, rho=args.rho)
        params = encoder.init_params(cfg)
        rng = np.random.default_rng(args.seed + 1)
        template, search = encoder._random_inputs(cfg, rng)
        f = encoder.encoder_forward(template, search, params, cfg)
        with open(args.dump_json, "w") as fh:
            json.dump({"rho": args.rho, "seed": args.seed,
                       "tokens": f.tokens.tolist()}, fh)
        print(f"wrote {args.dump_json}")
    return EXIT_OK if ok else EXIT_DOMAIN


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reflectbench",
                                description="Tracking benchmark toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="check dataset consistency")
    sp.add_argument("--root", required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("stats", help="dataset statistics and length histogram")
    sp.add_argument("--root", required=True)
    sp.add_argument("--bin-width", type=int, default=100)
    sp.add_argument("--format", choices=["csv", "json", "text"], default="text")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("eval", help="run one-pass evaluation and write reports")
    sp.add_argument("--root", required=True)
    sp.add_argument("--tracker", choices=sorted(baselines.TRACKERS))
    sp.add_argument("--results", action="append",
                    help="per-tracker results directory (repeatable)")
    sp.add_argument("--out")
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.add_argument("--average", choices=["pooled", "per-seq"], default="pooled")
    sp.add_argument("--no-plots", action="store_true",
                    help="skip rendering precision/success figures")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("synth", help="generate synthetic sequences from a JSON spec")
    sp.add_argument("spec", help="JSON spec file (object or list of objects)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("rho-sweep", help="encoder diagnostics across rho values")
    sp.add_argument("--rho", type=_parse_rho_list,
                    help="comma-separated rho values (default 0.1..1.0)")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_rho_sweep)

    sp = sub.add_parser("encoder-check", help="run the encoder invariant suite")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--rho", type=float, default=0.3)
    sp.add_argument("--dump-json", help="write the aggregated feature as JSON")
    sp.add_argument("--inject-pad-fault", action="store_true",
                    help=argparse.SUPPRESS)  # negative control for the check suite
    sp.set_defaults(func=cmd_encoder_check)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
