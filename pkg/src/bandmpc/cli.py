"""Command-line interface.

Subcommands: ``make-defaults``, ``design-filters``, ``stability``,
``freq-response`` and ``track``. Every subcommand accepts ``--config``,
``--out``, ``--seed`` and repeated ``--set key=value`` overrides.

Exit codes: 0 success, 1 invalid input, 2 unstable controller, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import config as cfgmod
from .experiment import controller_design, control_model, run_tracking, write_metrics, write_trace
from .filters import design_band_split
from .linsys import frequency_response
from .mpc import UnstableDesignError, error_response, stability_search

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_UNSTABLE = 2
EXIT_NUMERIC = 3


class UsageError(ValueError):
    pass


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment configuration JSON")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("--seed", type=int, help="random seed (overrides seed)")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a config field by dotted path, e.g. mpc.rho=0.5",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bandmpc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-defaults", help="write the default configuration")
    _common(p)

    p = sub.add_parser("design-filters", help="design the band-split filters")
    _common(p)

    p = sub.add_parser("stability", help="scan horizons for closed-loop stability")
    _common(p)
    p.add_argument("--np-range", help="START:STOP[:STEP], inclusive")
    p.add_argument("--nc", help="comma-separated control horizons")
    p.add_argument("--nc-offset", help="comma-separated offsets d for Nc = Np - d")
    p.add_argument("--early-exit", action="store_true", help="stop each series at its first stable Np")
    p.add_argument("--no-bandwidth", action="store_true", help="skip the error-bandwidth column")

    p = sub.add_parser("freq-response", help="tracking-error frequency response")
    _common(p)
    p.add_argument("--method", choices=["direct", "simulated", "auto"], default="auto")

    p = sub.add_parser("track", help="run a closed-loop tracking experiment")
    _common(p)
    return parser


def _load_config(args) -> cfgmod.ExperimentConfig:
    overrides = list(args.overrides)
    if args.out is not None:
        overrides.append(f"output_dir={json.dumps(args.out)}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return cfgmod.load(args.config, overrides)


def _out_dir(cfg: cfgmod.ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_range(text: str) -> List[int]:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise UsageError(f"--np-range must be START:STOP[:STEP], got {text!r}")
    try:
        start, stop = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
    except ValueError as exc:
        raise UsageError(f"--np-range: {exc}") from exc
    if step < 1 or stop < start or start < 1:
        raise UsageError(f"--np-range {text!r} is empty")
    return list(range(start, stop + 1, step))


def _parse_ints(text: Optional[str]) -> List[int]:
    if text is None or text.strip() == "":
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def cmd_make_defaults(cfg: cfgmod.ExperimentConfig) -> int:
    out = _out_dir(cfg)
    path = out / "config.json"
    path.write_text(cfg.to_json() + "\n")
    print(path)
    return EXIT_OK


def cmd_design_filters(cfg: cfgmod.ExperimentConfig) -> int:
    out = _out_dir(cfg)
    split = cfg.band_split_spec()
    lpf, bpf = design_band_split(split)
    for name, spec, model in (("lpf", split.lowpass_spec(), lpf), ("bpf", split.bandpass_spec(), bpf)):
        record = {"spec": spec.to_dict(), "state_space": model.to_dict()}
        (out / f"{name}.json").write_text(json.dumps(record, indent=1) + "\n")
    freqs = np.geomspace(cfg.frequency.f_min, cfg.frequency.f_max, cfg.frequency.points)
    hl = frequency_response(lpf, freqs).values
    hb = frequency_response(bpf, freqs).values
    db = lambda h: 20 * np.log10(np.abs(h))  # noqa: E731
    rows = [[_fmt(f), _fmt(a), _fmt(b), _fmt(c)] for f, a, b, c in zip(freqs, db(hl), db(hb), db(hl + hb))]
    _write_csv(out / "filters_response.csv", ["freq_hz", "lpf_db", "bpf_db", "sum_db"], rows)
    print(f"wrote {out / 'lpf.json'}, {out / 'bpf.json'}, {out / 'filters_response.csv'}")
    return EXIT_OK


def cmd_stability(cfg: cfgmod.ExperimentConfig, np_range: List[int], nc_list: List[int],
                  nc_offsets: List[int], early_exit: bool = False, bandwidth: bool = True) -> int:
    if not np_range:
        raise UsageError("empty prediction-horizon range")
    if not nc_list and not nc_offsets:
        raise UsageError("give at least one control horizon (--nc) or offset (--nc-offset)")
    model = control_model(cfg)
    rows = stability_search(
        model.state_space, nc_list, np_range, cfg.mpc.rho, nc_offsets=nc_offsets,
        early_exit=early_exit, bandwidth=bandwidth,
    )
    out = _out_dir(cfg)
    _write_csv(
        out / "stability.csv",
        ["np", "nc", "rho", "spectral_radius", "bandwidth_hz", "stable"],
        [[r.n_p, r.n_c, _fmt(r.rho), _fmt(r.spectral_radius), _fmt(r.bandwidth_hz), int(r.stable)] for r in rows],
    )
    for nc in nc_list:
        stable = [r.n_p for r in rows if r.n_c == nc and r.stable]
        print(f"Nc={nc}: " + (f"minimal stable Np={min(stable)}" if stable else "no stable Np in range"))
    for off in nc_offsets:
        stable = [r.n_p for r in rows if r.n_c == r.n_p - off and r.stable]
        print(f"Nc=Np-{off}: " + (f"minimal stable Np={min(stable)}" if stable else "no stable Np in range"))
    print(f"{sum(r.stable for r in rows)} of {len(rows)} designs stable; wrote {out / 'stability.csv'}")
    return EXIT_OK


def cmd_freq_response(cfg: cfgmod.ExperimentConfig, method: str = "auto") -> int:
    _, _, cl = controller_design(cfg)
    sr = cl.spectral_radius
    if sr >= 1.0:
        raise UnstableDesignError(f"controller is unstable (spectral radius {sr:.6f})")
    freqs = np.geomspace(cfg.frequency.f_min, cfg.frequency.f_max, cfg.frequency.points)
    resp = error_response(cl, cfg.mpc_config(), freqs, method=method)
    out = _out_dir(cfg)
    rows = [[_fmt(f), _fmt(m), _fmt(p)] for f, m, p in zip(freqs, resp.magnitude_db, resp.phase)]
    _write_csv(out / "error_response.csv", ["freq_hz", "magnitude_db", "phase_rad"], rows)
    print(f"spectral radius {sr:.6f}; wrote {out / 'error_response.csv'}")
    return EXIT_OK


def cmd_track(cfg: cfgmod.ExperimentConfig) -> int:
    run = run_tracking(cfg)
    out = _out_dir(cfg)
    write_trace(run, out / "trace.csv")
    extra = {"use_composition": cfg.use_composition, "seed": cfg.seed}
    write_metrics(run, out / "metrics.json", extra)
    (out / "config.json").write_text(cfg.to_json() + "\n")
    m = run.metrics
    print(f"E_rms={m.e_rms:.4f}% E_max={m.e_max:.4f}% spectral radius {run.spectral_radius:.6f}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "make-defaults":
            return cmd_make_defaults(cfg)
        if args.command == "design-filters":
            return cmd_design_filters(cfg)
        if args.command == "stability":
            st = cfg.stability
            nps = _parse_range(args.np_range) if args.np_range else list(range(st.np_min, st.np_max + 1, st.np_step))
            ncs = _parse_ints(args.nc) if args.nc is not None else list(st.nc_list)
            offs = _parse_ints(args.nc_offset) if args.nc_offset is not None else list(st.nc_offsets)
            return cmd_stability(cfg, nps, ncs, offs, args.early_exit, not args.no_bandwidth)
        if args.command == "freq-response":
            return cmd_freq_response(cfg, args.method)
        if args.command == "track":
            return cmd_track(cfg)
    except UnstableDesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (FloatingPointError, np.linalg.LinAlgError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    parser.error(f"unknown command {args.command!r}")
    return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
