"""Batch command-line interface for reproducible decoding experiments.

Subcommands: construct, sample-autos, collect-dataset, optimize-sigma,
simulate, oracle-stats, metric-boxplot.  Every command echoes its resolved
configuration (including the master seed and a config digest) and writes that
metadata next to each output file, so emitted data is reproducible
byte-for-byte from the command line alone.

Exit codes: 0 success, 2 usage/configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys

import numpy as np

from . import autos, codes, ensemble, sim, thresholds

USAGE_ERROR = 2
RUNTIME_ERROR = 3


class UsageError(Exception):
    pass


def parse_code(spec: str) -> codes.CodeSpec:
    """Accept rm:n,r | polar:n,K[,design_snr_db] | path to an info-set file."""
    if spec.startswith("rm:"):
        n, r = (int(v) for v in spec[3:].split(","))
        return codes.CodeSpec.reed_muller(n, r)
    if spec.startswith("polar:"):
        parts = spec[6:].split(",")
        if len(parts) == 2:
            n, K = int(parts[0]), int(parts[1])
            return codes.CodeSpec.polar(n, K, design_snr_db=2.0)
        n, K, snr = int(parts[0]), int(parts[1]), float(parts[2])
        return codes.CodeSpec.polar(n, K, design_snr_db=snr)
    if os.path.exists(spec):
        return codes.load_info_set(spec)
    raise UsageError(f"cannot interpret code spec {spec!r} (not rm:/polar:/existing file)")


def parse_profile(text: str, n: int) -> autos.BltaProfile:
    if text == "full":
        return autos.BltaProfile.full(n)
    if text == "lta":
        return autos.BltaProfile.lta(n)
    return autos.BltaProfile([int(v) for v in text.split(",")])


def atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def resolved_config(args, skip=("func",)) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in skip and not k.startswith("_")}
    return cfg


def echo_and_digest(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, default=str)
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    print(json.dumps({"resolved_config": cfg, "config_digest": digest}, sort_keys=True, default=str))
    return digest


def write_sidecar(out_path: str, cfg: dict, digest: str, extra: dict | None = None) -> None:
    meta = {"config": cfg, "config_digest": digest, "seed": cfg.get("seed")}
    if extra:
        meta.update(extra)
    atomic_write(out_path + ".meta.json", json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def _load_ensemble_for(code: codes.CodeSpec, path: str) -> list:
    perms = autos.load_ensemble(path)
    if any(p.N != code.N for p in perms):
        raise UsageError(f"ensemble {path} acts on a different code length than {code.label()}")
    return perms


def cmd_construct(args) -> int:
    if args.rm:
        n, r = (int(v) for v in args.rm.split(","))
        code = codes.CodeSpec.reed_muller(n, r)
    elif args.polar:
        n, K = (int(v) for v in args.polar.split(","))
        if args.blta_profile:
            profile = [int(v) for v in args.blta_profile.split(",")]
            info = codes.blta_symmetric_info_set(n, K, profile, args.design_snr_db)
            code = codes.CodeSpec(n=n, info_set=info, family=f"polar-blta{args.blta_profile}")
        else:
            code = codes.CodeSpec.polar(n, K, args.design_snr_db)
    else:
        raise UsageError("construct requires --rm n,r or --polar n,K")
    cfg = resolved_config(args)
    digest = echo_and_digest(cfg)
    codes.save_info_set(code, args.out + ".tmp")
    os.replace(args.out + ".tmp", args.out)
    write_sidecar(args.out, cfg, digest, {"code": code.label(), "K": code.K, "N": code.N})
    print(f"wrote {args.out}: {code.label()}")
    return 0


def cmd_sample_autos(args) -> int:
    code = parse_code(args.code)
    profile = parse_profile(args.profile, code.n)
    cfg = resolved_config(args)
    digest = echo_and_digest(cfg)
    rng = np.random.default_rng(args.seed)
    perms = autos.sample_ensemble(args.num, profile, code, rng)
    text = "".join(p.to_line() + "\n" for p in perms)
    atomic_write(args.out, text)
    write_sidecar(args.out, cfg, digest, {"code": code.label(), "M": args.num})
    print(f"wrote {args.out}: {args.num} automorphisms, profile {profile.block_sizes}")
    return 0


def cmd_collect_dataset(args) -> int:
    code = parse_code(args.code)
    perms = _load_ensemble_for(code, args.ensemble)
    cfg = resolved_config(args)
    digest = echo_and_digest(cfg)
    ds, _, xi = thresholds.collect_dataset(
        code, perms, snr_db=args.snr_db, num_vectors=args.num_vectors,
        seed=args.seed, workers=args.workers, backend=args.backend,
        ensemble_id=os.path.basename(args.ensemble),
    )
    tmp = args.out + ".tmp.npz"
    ds.save(tmp)
    os.replace(tmp, args.out)
    write_sidecar(args.out, cfg, digest, {"xi": xi, "code": code.label()})
    print(f"wrote {args.out}: {len(ds)} traces, measured xi={xi:.6g}")
    return 0


def cmd_optimize_sigma(args) -> int:
    cfg = resolved_config(args)
    digest = echo_and_digest(cfg)
    if args.dataset:
        ds = thresholds.TraceDataset.load(args.dataset)
    else:
        if not (args.code and args.ensemble and args.snr_db is not None):
            raise UsageError("optimize-sigma needs --dataset, or --code/--ensemble/--snr-db to collect one")
        code = parse_code(args.code)
        perms = _load_ensemble_for(code, args.ensemble)
        ds, _, _ = thresholds.collect_dataset(
            code, perms, snr_db=args.snr_db, num_vectors=args.num_vectors,
            seed=args.seed, workers=args.workers, backend=args.backend,
            ensemble_id=os.path.basename(args.ensemble),
        )
        if args.save_dataset:
            tmp = args.save_dataset + ".tmp.npz"
            ds.save(tmp)
            os.replace(tmp, args.save_dataset)
    epsilon = args.epsilon if args.epsilon is not None else ds.xi * args.epsilon_frac
    sigma, alloc, log = thresholds.optimize_sigma(
        ds, epsilon=epsilon, kappa=args.kappa, T_max=args.t_max,
    )
    for it in log.iterations:
        print(json.dumps({"iteration": it}, sort_keys=True))
    atomic_write(args.out, sigma.to_json() + "\n")
    write_sidecar(
        args.out, cfg, digest,
        {
            "iterations": log.iterations,
            "converged": log.converged,
            "initial_m_bar": log.initial_m_bar,
            "final_m_bar": log.final_m_bar,
            "allocation": alloc.e.tolist(),
            "budget": alloc.budget,
        },
    )
    print(
        f"wrote {args.out}: m_bar {log.initial_m_bar:.4f} -> {log.final_m_bar:.4f} "
        f"in {len(log.iterations) - 1} iterations (converged={log.converged})"
    )
    return 0


def cmd_simulate(args) -> int:
    code = parse_code(args.code)
    perms = None
    if args.decoder != "sc":
        if not args.ensemble:
            raise UsageError(f"decoder {args.decoder} requires --ensemble")
        perms = _load_ensemble_for(code, args.ensemble)
    sigma = None
    if args.decoder in ("dae", "pdae"):
        if not args.sigma:
            raise UsageError(f"decoder {args.decoder} requires --sigma")
        sigma = ensemble.SigmaParams.load(args.sigma)
        if perms is not None and sigma.M != len(perms):
            raise UsageError(f"sigma has M={sigma.M} but ensemble has M={len(perms)}")
    cfg = resolved_config(args)
    digest = echo_and_digest(cfg)
    snrs = list(args.snr_db or [])
    if args.target_bler is not None:
        snrs.append(
            sim.find_snr_at_bler(
                code, perms, args.decoder, args.target_bler, tolerance=args.tolerance,
                sigma=sigma, seed=args.seed, workers=args.workers, backend=args.backend,
            )
        )
    if not snrs:
        raise UsageError("simulate needs --snr-db values or --target-bler")
    rows = []
    for i, snr in enumerate(snrs):
        st = sim.run_trials(
            code, perms, args.decoder, sigma=sigma,
            cfg=sim.ChannelConfig(snr_db=snr, rate=code.rate, convention=args.snr_convention),
            stop_rule=sim.StopRule(min_errors=args.min_errors, max_trials=args.max_trials),
            seed=args.seed + 1000003 * i, workers=args.workers, backend=args.backend,
        )
        rows.append(
            [fmt(v) for v in (
                st.snr_db, st.trials, st.block_errors, st.bler, st.mean_invoked,
                st.mean_sc_equiv, st.stderr_bler, st.stderr_invoked, st.stderr_sc_equiv,
            )]
        )
        print(f"snr={snr:.4f} dB bler={st.bler:.6g} m_bar={st.mean_invoked:.4f} "
              f"sc_equiv={st.mean_sc_equiv:.4f} ({st.trials} trials)")
    header = ["snr_db", "trials", "block_errors", "bler", "mean_invoked",
              "mean_sc_equiv", "stderr_bler", "stderr_invoked", "stderr_sc_equiv"]
    atomic_write(args.out, csv_text(header, rows))
    write_sidecar(args.out, cfg, digest, {
        "code": code.label(),
        "ensemble_file": args.ensemble,
        "sigma_file": args.sigma,
        "snr_convention": args.snr_convention,
    })
    print(f"wrote {args.out}")
    return 0


def cmd_oracle_stats(args) -> int:
    code = parse_code(args.code)
    perms = _load_ensemble_for(code, args.ensemble)
    cfg = resolved_config(args)
    digest = echo_and_digest(cfg)
    snr = args.snr_db
    if snr is None:
        if args.target_bler is None:
            raise UsageError("oracle-stats needs --snr-db or --target-bler")
        snr = sim.find_snr_at_bler(
            code, perms, "ae", args.target_bler, tolerance=args.tolerance,
            seed=args.seed, workers=args.workers, backend=args.backend,
        )
    dist, _ = sim.ndec_distribution(
        code, perms, sim.ChannelConfig(snr_db=snr, rate=code.rate),
        num_trials=args.trials, seed=args.seed, backend=args.backend,
    )
    ro = ensemble.ro_complexity(dist)
    fo = ensemble.fo_complexity(dist, len(perms))
    rows = [[k + 1, fmt(p)] for k, p in enumerate(dist)]
    atomic_write(args.out, csv_text(["n_dec", "probability"], rows))
    write_sidecar(args.out, cfg, digest, {
        "code": code.label(), "snr_db": snr, "ro_complexity": ro, "fo_complexity": fo,
    })
    print(f"snr={snr:.4f} dB P(n_dec=1)={dist[0]:.4f} ro={ro:.4f} fo={fo:.4f}")
    print(f"wrote {args.out}")
    return 0


def _five_number(values: np.ndarray):
    q = np.percentile(values, [0, 25, 50, 75, 100])
    return [fmt(v) for v in q]


def cmd_metric_boxplot(args) -> int:
    code = parse_code(args.code)
    perms = _load_ensemble_for(code, args.ensemble)
    cfg = resolved_config(args)
    digest = echo_and_digest(cfg)
    snr = args.snr_db
    if snr is None:
        if args.target_bler is None:
            raise UsageError("metric-boxplot needs --snr-db or --target-bler")
        snr = sim.find_snr_at_bler(
            code, perms, "ae", args.target_bler, tolerance=args.tolerance,
            seed=args.seed, workers=args.workers, backend=args.backend,
        )
    raw = sim.metric_rows(
        code, perms, sim.ChannelConfig(snr_db=snr, rate=code.rate),
        num_trials=args.trials, seed=args.seed, backend=args.backend,
    )
    M = len(perms)
    rows = []
    for idx in range(raw.shape[0]):
        pm, lsm_val, correct = raw[idx]
        t, j = divmod(idx, M)
        rows.append([t, j + 1, "pm", fmt(pm), int(correct)])
        rows.append([t, j + 1, "lsm", fmt(lsm_val), int(correct)])
    atomic_write(args.out, csv_text(["trial", "attempt", "metric", "value", "correct"], rows))

    summary_rows = []
    for metric, col in (("pm", 0), ("lsm", 1)):
        for correct in (0, 1):
            sel = raw[raw[:, 2] == correct][:, col]
            if len(sel):
                summary_rows.append([metric, correct, len(sel)] + _five_number(sel))
    summary_path = os.path.splitext(args.out)[0] + ".summary.csv"
    atomic_write(
        summary_path,
        csv_text(["metric", "correct", "count", "min", "q1", "median", "q3", "max"], summary_rows),
    )
    write_sidecar(args.out, cfg, digest, {"code": code.label(), "snr_db": snr,
                                          "summary_file": summary_path})
    print(f"wrote {args.out} and {summary_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="polarae",
        description="Automorphism-ensemble SC decoding experiments",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--seed", type=int, default=1, help="master seed (default 1)")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--backend", default="auto", choices=["auto", "cython", "python"])
        p.add_argument("--config", default=None, help="JSON file with flag defaults")
        if needs_out:
            p.add_argument("--out", required=True)

    p = sub.add_parser("construct", help="build a code and write its info-set file")
    common(p)
    p.add_argument("--rm", help="n,r for a Reed-Muller code")
    p.add_argument("--polar", help="n,K for a reliability-ranked polar code")
    p.add_argument("--design-snr-db", type=float, default=2.0)
    p.add_argument("--blta-profile", help="block profile (e.g. 3,4) for a block-symmetric polar set")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("sample-autos", help="sample an ensemble of inequivalent automorphisms")
    common(p)
    p.add_argument("--code", required=True)
    p.add_argument("--num", "-M", type=int, required=True)
    p.add_argument("--profile", default="full", help="'full', 'lta', or sizes like 3,4")
    p.set_defaults(func=cmd_sample_autos)

    p = sub.add_parser("collect-dataset", help="record full-ensemble decoding traces")
    common(p)
    p.add_argument("--code", required=True)
    p.add_argument("--ensemble", required=True)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--num-vectors", type=int, required=True)
    p.set_defaults(func=cmd_collect_dataset)

    p = sub.add_parser("optimize-sigma", help="search stopping thresholds on a trace dataset")
    common(p)
    p.add_argument("--dataset", help="existing dataset file (skips collection)")
    p.add_argument("--code")
    p.add_argument("--ensemble")
    p.add_argument("--snr-db", type=float)
    p.add_argument("--num-vectors", type=int, default=500_000)
    p.add_argument("--save-dataset", help="also store the collected dataset here")
    p.add_argument("--epsilon", type=float, help="absolute BLER degradation budget")
    p.add_argument("--epsilon-frac", type=float, default=0.1,
                   help="budget as a fraction of measured xi (default 0.1)")
    p.add_argument("--kappa", type=int, default=5)
    p.add_argument("--t-max", type=int, default=200)
    p.set_defaults(func=cmd_optimize_sigma)

    p = sub.add_parser("simulate", help="Monte-Carlo BLER/complexity estimation")
    common(p)
    p.add_argument("--code", required=True)
    p.add_argument("--ensemble")
    p.add_argument("--decoder", required=True, choices=list(sim.DECODER_KINDS))
    p.add_argument("--sigma")
    p.add_argument("--snr-db", type=float, nargs="*", help="Eb/N0 points to simulate")
    p.add_argument("--snr-convention", default="ebn0", choices=["ebn0", "esn0"])
    p.add_argument("--target-bler", type=float, help="search for this BLER and simulate there")
    p.add_argument("--tolerance", type=float, default=0.15)
    p.add_argument("--min-errors", type=int, default=200)
    p.add_argument("--max-trials", type=int, default=2_000_000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle-stats", help="required-subset-size distribution and oracle complexities")
    common(p)
    p.add_argument("--code", required=True)
    p.add_argument("--ensemble", required=True)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--target-bler", type=float)
    p.add_argument("--tolerance", type=float, default=0.15)
    p.add_argument("--trials", type=int, default=100_000)
    p.set_defaults(func=cmd_oracle_stats)

    p = sub.add_parser("metric-boxplot", help="per-attempt PM/LSM rows conditioned on correctness")
    common(p)
    p.add_argument("--code", required=True)
    p.add_argument("--ensemble", required=True)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--target-bler", type=float)
    p.add_argument("--tolerance", type=float, default=0.15)
    p.add_argument("--trials", type=int, default=20_000)
    p.set_defaults(func=cmd_metric_boxplot)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # Config files supply defaults; explicit flags win.
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        try:
            with open(cfg_path) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {cfg_path}: {exc}", file=sys.stderr)
            return USAGE_ERROR
        for action in ap._subparsers._group_actions[0].choices.values():
            known = {a.dest for a in action._actions}
            action.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ValueError, OSError, codes.ConstructionError, autos.SamplingError,
            sim.SearchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
