"""
Command-line entry point.

Subcommands ``run``, ``sweep-k``, ``sweep-b``, ``sweep-g`` write campaign
summaries, ``asymptotic`` writes the high-SNR ratio experiment and
``selftest`` runs a quick invariant suite.

Exit codes: 0 ok, 1 selftest failure, 2 bad flags, 3 invalid
configuration, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from . import decomposition
from .channel_model import ConfigurationError, build_H, freq_channels
from .engine import (AsymptoticResult, SimConfig, ThroughputSummary,
                     asymptotic_experiment, random_channel, run_campaign,
                     run_trial)
from .feedback import SchemeId

SCHEMA_VERSION = 1
CSV_COLUMNS = ("scheme", "sweep_param", "sweep_value", "snr_db", "K", "B", "G",
               "Q", "trials", "seed", "mean_tput_bps_hz", "std_tput",
               "ci95_halfwidth")
ASYMPTOTIC_COLUMNS = ("rho", "samples", "seed", "Q", "M", "N", "L",
                      "median_abs_dev", "q05", "q25", "q50", "q75", "q95")

EXIT_OK, EXIT_SELFTEST, EXIT_USAGE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3, 4

DEFAULT_SWEEPS = {
    "sweep-k": ("K", "1,2,3,4,5,6,7,8,9,10"),
    "sweep-b": ("B", "2,4,6,8,inf"),
    "sweep-g": ("G", "4,8,16,32,128"),
}

# flag name -> SimConfig field
_FLAG_FIELDS = {
    "subcarriers": "Q", "tx_antennas": "M", "rx_antennas": "N", "taps": "L",
    "cp_length": "N_g", "num_mts": "K", "codebook_bits": "B",
    "clusters": "G", "snr_db": "snr_db", "trials": "trials", "seed": "seed",
    "scheme": "schemes",
}



@dataclass(frozen=True)
class CliInvocation:
    subcommand: str
    config_path: str | None
    output: str
    fmt: str
    values: tuple
    workers: int = 1
    rhos: tuple = ()
    channels: int | None = None
    min_singular: float = 0.1


def _bits(text: str):
    if text.lower() in ("inf", "exact"):
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'inf', got {text!r}")


def _scheme_list(text: str):
    try:
        return tuple(SchemeId(s.strip().upper().replace("-", "_"))
                     for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    d = SimConfig()
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration (flags override --config)")
    g.argument_default = argparse.SUPPRESS
    g.add_argument("--config", help="JSON file with SimConfig field names")
    g.add_argument("--subcarriers", type=int, help=f"Q (default {d.Q})")
    g.add_argument("--tx-antennas", type=int, help=f"M (default {d.M})")
    g.add_argument("--rx-antennas", type=int, help=f"N (default {d.N})")
    g.add_argument("--taps", type=int, help=f"channel length L (default {d.L})")
    g.add_argument("--cp-length", type=int, help=f"N_g, informational (default {d.N_g})")
    g.add_argument("--num-mts", type=int, help=f"K (default {d.K})")
    g.add_argument("--codebook-bits", type=_bits,
                   help=f"B, or 'inf' for exact BFMs (default {d.B})")
    g.add_argument("--clusters", type=int, help=f"G (default {d.G})")
    g.add_argument("--snr-db", type=float, help=f"SNR in dB (default {d.snr_db:g})")
    g.add_argument("--trials", type=int, help=f"Monte Carlo slots (default {d.trials})")
    g.add_argument("--seed", type=int, help=f"campaign seed (default {d.seed})")
    g.add_argument("--scheme", type=_scheme_list,
                   help="comma-separated subset of "
                        + ",".join(s.value for s in SchemeId) + " (default all)")
    o = common.add_argument_group("output")
    o.add_argument("--output", default="-", help="output file, '-' for stdout")
    o.add_argument("--format", choices=("csv", "json"), default="csv")
    o.add_argument("--workers", type=int, default=1,
                   help="worker processes (results do not depend on it)")

    parser = argparse.ArgumentParser(
        prog="mimo-ofdma",
        description="MIMO-OFDMA opportunistic scheduling and beamforming simulator")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("run", parents=[common], help="one campaign at the configured point")
    for name, (field_name, default) in DEFAULT_SWEEPS.items():
        p = sub.add_parser(name, parents=[common], help=f"sweep {field_name}")
        p.add_argument("--values", default=default,
                       help=f"comma-separated {field_name} values (default {default})")
    p = sub.add_parser("asymptotic", parents=[common],
                       help="ratio of exact RF to EB throughput versus rho")
    p.add_argument("--rhos", default="1e1,1e2,1e3,1e4,1e5,1e6",
                   help="comma-separated linear SNR values")
    p.add_argument("--channels", type=int,
                   help="channel realizations (default: --trials)")
    p.add_argument("--min-singular", type=float, default=0.1,
                   help="drop subcarriers whose smallest singular value is below this")
    sub.add_parser("selftest", help="fast invariant checks")
    return parser


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a JSON object")
    if data.get("B") in ("inf", "exact"):
        data["B"] = None
    return data


def parse_invocation(argv=None) -> tuple[SimConfig, CliInvocation]:
    """Resolve flags, config file and defaults into a validated config.

    Raises ``SystemExit(2)`` on malformed flags and
    :class:`ConfigurationError` when the resolved config breaks a rule.
    """
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.subcommand == "selftest":
        return SimConfig(), CliInvocation("selftest", None, "-", "csv", ())
    config_path = getattr(ns, "config", None)
    data = _load_config_file(config_path) if config_path else {}
    for flag, name in _FLAG_FIELDS.items():
        if hasattr(ns, flag):
            data[name] = getattr(ns, flag)
    config = SimConfig.from_dict(data).validate()

    values: tuple = ()
    if ns.subcommand in DEFAULT_SWEEPS:
        field_name = DEFAULT_SWEEPS[ns.subcommand][0]
        parse = _bits if field_name == "B" else int
        try:
            values = tuple(parse(v) for v in ns.values.split(",") if v.strip())
        except (ValueError, argparse.ArgumentTypeError):
            parser.error(f"bad --values for {field_name}: {ns.values!r}")
        if not values:
            parser.error("--values is empty")
        for v in values:
            replace(config, **{field_name: v}).validate()
    rhos: tuple = ()
    if ns.subcommand == "asymptotic":
        try:
            rhos = tuple(float(v) for v in ns.rhos.split(","))
        except ValueError:
            parser.error(f"bad --rhos: {ns.rhos!r}")
        if any(not r > 0 for r in rhos):
            raise ConfigurationError("rho values must be positive")
    if ns.workers < 1:
        parser.error("--workers must be >= 1")
    inv = CliInvocation(subcommand=ns.subcommand, config_path=config_path,
                        output=ns.output, fmt=ns.format, values=values,
                        workers=ns.workers, rhos=rhos,
                        channels=getattr(ns, "channels", None),
                        min_singular=getattr(ns, "min_singular", 0.1))
    return config, inv


def fmt_number(x) -> str:
    """Shortest round-trip text for a number; None and infinity become 'inf'."""
    if x is None:
        return "inf"
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return repr(x)


def _sort_value(v):
    return math.inf if v is None else float(v)


def summary_records(summary: ThroughputSummary) -> list[dict]:
    rows = sorted(summary.rows(),
                  key=lambda r: (r.scheme.value, _sort_value(r.sweep_value)))
    out = []
    for r in rows:
        c = r.config
        out.append({
            "scheme": r.scheme.value, "sweep_param": summary.sweep_param,
            "sweep_value": r.sweep_value, "snr_db": c.snr_db, "K": c.K,
            "B": c.B, "G": c.G, "Q": c.Q, "trials": r.trials, "seed": c.seed,
            "mean_tput_bps_hz": r.mean, "std_tput": r.std,
            "ci95_halfwidth": r.ci95,
        })
    return out


def asymptotic_records(result: AsymptoticResult, config: SimConfig) -> list[dict]:
    mad = result.median_abs_deviation()
    quant = result.quantiles()
    out = []
    for i, rho in enumerate(result.rhos):
        rec = {"rho": float(rho), "samples": result.num_samples,
               "seed": config.seed, "Q": config.Q, "M": config.M,
               "N": config.N, "L": config.L, "median_abs_dev": float(mad[i])}
        for name, v in zip(ASYMPTOTIC_COLUMNS[-5:], quant[i]):
            rec[name] = float(v)
        out.append(rec)
    return out


def render(records: list[dict], columns, fmt: str) -> str:
    if fmt == "json":
        def conv(v):
            if v is None:
                return "inf"
            if isinstance(v, float) and not math.isfinite(v):
                return fmt_number(v)
            return v
        payload = {"schema_version": SCHEMA_VERSION,
                   "rows": [{k: conv(rec[k]) for k in columns} for rec in records]}
        return json.dumps(payload, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([v if isinstance(v, str) else fmt_number(v)
                         for v in (rec[k] for k in columns)])
    return buf.getvalue()


def write_atomic(text: str, path: str):
    """Write via a temporary file in the target directory, then rename."""
    if path in ("-", None):
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_results(summary: ThroughputSummary, fmt: str = "csv", path: str = "-"):
    write_atomic(render(summary_records(summary), CSV_COLUMNS, fmt), path)


def emit_asymptotic(result: AsymptoticResult, config: SimConfig,
                    fmt: str = "csv", path: str = "-"):
    write_atomic(render(asymptotic_records(result, config), ASYMPTOTIC_COLUMNS, fmt),
                 path)


def selftest(out=None, channels: int = 100, seed: int = 12345) -> int:
    """Run the fast invariant suite, one PASS/FAIL line per check."""
    out = out or sys.stdout
    failures = 0

    def report(name, ok, detail=""):
        nonlocal failures
        failures += not ok
        status = "PASS" if ok else "FAIL"
        out.write(f"{status} {name}{': ' + detail if detail else ''}\n")

    cfg = SimConfig(Q=64, K=3, trials=4, seed=seed)
    for p in range(channels):
        ch = build_H(random_channel(cfg, p, 0))
        joint = decomposition.joint_decompose(ch, cfg.Q)
        eb = decomposition.eb_decompose(ch, cfg.Q)
        G = freq_channels(ch, cfg.Q)
        recon = joint.qr.Qf @ joint.qr.R @ np.conj(np.swapaxes(joint.V, -1, -2))
        rec_err = np.max(np.linalg.norm(recon - G, axis=(1, 2))
                         / np.linalg.norm(G, axis=(1, 2)))
        lam = eb.singular_values
        rprod = np.prod(joint.r_diagonals(), axis=1)
        lprod = np.prod(lam, axis=1)
        ok = lam[:, -1] > 1e-8
        det_err = float(np.max(np.abs(rprod - lprod)[ok] / lprod[ok])) if ok.any() else 0.0
        good = rec_err <= 1e-9 and det_err <= 1e-9
        report(f"determinant-identity channel {p}", good,
               f"reconstruction {rec_err:.1e}, determinant {det_err:.1e}")

    ch = build_H(random_channel(cfg, 0, 0))
    joint = decomposition.joint_decompose(ch, cfg.Q)
    eye = np.eye(cfg.M)
    unit_err = max(np.max(np.abs(np.conj(np.swapaxes(joint.qr.Qf, -1, -2))
                                 @ joint.qr.Qf - eye)),
                   np.max(np.abs(np.conj(joint.V.T) @ joint.V - eye)))
    report("unitarity", unit_err <= 1e-10, f"{unit_err:.1e}")

    for label, c in (("U=1", replace(cfg, G=cfg.Q)),
                     ("L=1", replace(cfg, L=1, G=8))):
        for trial in range(2):
            t = run_trial(c, trial)
            dev = max(abs(t[SchemeId.PS_RF_OS] - t[SchemeId.PC_RF_OS]),
                      abs(t[SchemeId.PS_EB_OS] - t[SchemeId.PC_EB_OS]))
            report(f"clustering-degeneracy {label} trial {trial}", dev <= 1e-12,
                   f"{dev:.1e}")
    return EXIT_OK if failures == 0 else EXIT_SELFTEST


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config, inv = parse_invocation(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigurationError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TypeError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    if inv.subcommand == "selftest":
        return selftest()
    try:
        if inv.subcommand == "asymptotic":
            result = asymptotic_experiment(config, inv.rhos, inv.channels,
                                           inv.min_singular)
            text = render(asymptotic_records(result, config),
                          ASYMPTOTIC_COLUMNS, inv.fmt)
        else:
            if inv.subcommand == "run":
                summary = run_campaign(config, "snr_db", workers=inv.workers)
            else:
                param = DEFAULT_SWEEPS[inv.subcommand][0]
                summary = run_campaign(config, param, inv.values,
                                       workers=inv.workers)
            text = render(summary_records(summary), CSV_COLUMNS, inv.fmt)
    except ConfigurationError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        write_atomic(text, inv.output)
    except OSError as exc:
        print(f"error: cannot write {inv.output}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
