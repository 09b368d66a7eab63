"""Command-line surface: delay scans, BER scans, bit generation, unbiasing
and randomness testing.

Exit codes are a stable contract: 0 success / suite pass, 1 randomness
test failure, 2 usage error, 3 purity-monitor alarm, 4 I/O failure.
Every command honors --seed and writes a manifest next to its outputs;
rerunning a manifest reproduces every output file byte for byte.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__, bitpipe, statskit, timetag
from .bitpipe import BitStream, ClockConfig
from .manifest import RunManifest, utc_now
from .optics import DEFAULT_COHERENCE_TIME_FS, DetectorBank, InterferometerConfig
from .timetag import (
    CoincidenceStream,
    MonitorStatus,
    PairLabel,
    SourceConfig,
    TimingConfig,
)

EXIT_OK = 0
EXIT_TEST_FAIL = 1
EXIT_USAGE = 2
EXIT_ALARM = 3
EXIT_IO = 4

OUTDIR_ENV = "QRNGSIM_OUTDIR"


class MonitorAlarm(RuntimeError):
    """Cross-arm coincidences exceeded the monitor threshold mid-run."""


def _resolve(path: str) -> str:
    outdir = os.environ.get(OUTDIR_ENV)
    if outdir and not os.path.isabs(path):
        return os.path.join(outdir, path)
    return path


def _physics_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("physics")
    group.add_argument("--delay", type=float, default=0.0,
                       help="photon arrival-time offset in fs (default 0)")
    group.add_argument("--coherence-time", type=float, default=DEFAULT_COHERENCE_TIME_FS,
                       help="Gaussian dip 1/e half-width in fs (default %(default)s)")
    group.add_argument("--visibility-ceiling", type=float, default=1.0,
                       help="cap on interference visibility (default 1.0)")
    group.add_argument("--efficiency", type=float, default=1.0,
                       help="detector efficiency (default 1.0)")
    group.add_argument("--dark-rate", type=float, default=0.0,
                       help="dark counts per detector in Hz (default 0)")
    group.add_argument("--jitter", type=float, default=300.0,
                       help="per-click timing jitter sigma in ps (default 300)")
    group.add_argument("--dead-time", type=float, default=50.0,
                       help="detector dead time in ns (default 50)")
    group.add_argument("--window", type=float, default=3.0,
                       help="coincidence window in ns (default 3)")


def _configs_from_args(args, delay_fs: float):
    interf = InterferometerConfig(
        delay_fs=delay_fs,
        coherence_time_fs=args.coherence_time,
        visibility_ceiling=args.visibility_ceiling,
    )
    bank = DetectorBank(efficiency=args.efficiency, dark_rate_hz=args.dark_rate)
    timing = TimingConfig(
        jitter_sigma_ps=args.jitter,
        dead_time_ns=args.dead_time,
        coincidence_window_ns=args.window,
    )
    return interf, bank, timing


def _collect_params(args, keys) -> dict:
    return {key: getattr(args, key) for key in keys}


def _start_manifest(command: str, args, keys) -> RunManifest:
    manifest = RunManifest(
        command=command,
        parameters=_collect_params(args, keys),
        seed=args.seed,
        started_utc=utc_now(),
    )
    return manifest


# --------------------------------------------------------------- scan-delay

_SCAN_KEYS = (
    "delay_from", "delay_to", "steps", "pairs_per_point", "point_duration",
    "seed", "out", "fit", "coherence_time", "visibility_ceiling",
    "efficiency", "dark_rate", "jitter", "dead_time", "window",
)


def cmd_scan_delay(args) -> int:
    if args.steps < 2:
        print("scan-delay: --steps must be at least 2", file=sys.stderr)
        return EXIT_USAGE
    if args.pairs_per_point <= 0 or args.point_duration <= 0:
        print("scan-delay: pair budget and point duration must be positive",
              file=sys.stderr)
        return EXIT_USAGE

    manifest = _start_manifest("scan-delay", args, _SCAN_KEYS)
    delays = np.linspace(args.delay_from, args.delay_to, args.steps)
    source = SourceConfig(
        pair_rate_hz=args.pairs_per_point / args.point_duration,
        duration_s=args.point_duration,
        seed=args.seed,
    )
    interf, bank, timing = _configs_from_args(args, 0.0)
    points = timetag.scan_delay(delays, source, interf, bank, timing)

    out = _resolve(args.out)
    timetag.write_scan_csv(points, out)
    manifest.add_output("scan_csv", out)

    if args.fit:
        cross_rates = [p.cross_arm.rate_hz for p in points]
        cross_sigmas = [p.cross_arm.sigma_hz for p in points]
        fit = timetag.fit_dip_visibility(delays, cross_rates, cross_sigmas)
        manifest.metadata["fitted_visibility"] = fit.visibility
        manifest.metadata["fitted_visibility_err"] = fit.visibility_err
        manifest.metadata["fitted_width_fs"] = fit.width_fs
        print(f"fitted visibility: {fit.visibility:.4f} +/- {fit.visibility_err:.4f}")
        print(f"fitted dip width: {fit.width_fs:.1f} fs, "
              f"baseline {fit.baseline_hz:.3f} Hz")

    manifest.finished_utc = utc_now()
    manifest.save(out + ".manifest.json")
    print(f"wrote {out} ({args.steps} delay points, 6 pair labels)")
    return EXIT_OK


# ----------------------------------------------------------------- ber-scan

_BER_KEYS = ("rate", "freqs", "duration", "seed", "out")


def cmd_ber_scan(args) -> int:
    try:
        freqs = [float(f) for f in args.freqs.split(",") if f.strip()]
    except ValueError:
        print(f"ber-scan: cannot parse --freqs {args.freqs!r}", file=sys.stderr)
        return EXIT_USAGE
    if not freqs or args.rate < 0 or args.duration <= 0:
        print("ber-scan: need a frequency list, rate >= 0 and duration > 0",
              file=sys.stderr)
        return EXIT_USAGE

    rows = []
    for i, f in enumerate(freqs):
        clock = ClockConfig(frequency_hz=f)
        try:
            model = bitpipe.ber_model(args.rate, clock)
        except bitpipe.ModelOutOfRange as exc:
            print(f"ber-scan: frequency {f} Hz: {exc}", file=sys.stderr)
            return EXIT_USAGE
        stream = timetag.synthetic_coincidences(
            args.rate, args.duration, seed=timetag.point_seed(args.seed, i)
        )
        records = bitpipe.extract_bits(stream, clock)
        empirical = bitpipe.empirical_ber(records)
        n = len(records)
        sigma = math.sqrt(empirical * (1.0 - empirical) / n) if n else 0.0
        rows.append((f, model, empirical, sigma))

    manifest = _start_manifest("ber-scan", args, _BER_KEYS)
    out = _resolve(args.out)
    with open(out, "w", encoding="ascii", newline="\n") as fh:
        fh.write("frequency_hz,model_ber,empirical_ber,sigma\n")
        for f, model, empirical, sigma in rows:
            fh.write(f"{f!r},{model!r},{empirical!r},{sigma!r}\n")
    manifest.add_output("ber_csv", out)
    manifest.finished_utc = utc_now()
    manifest.save(out + ".manifest.json")

    for f, model, empirical, sigma in rows:
        print(f"f={f:>10.0f} Hz  model={model:.6f}  empirical={empirical:.6f}"
              f"  sigma={sigma:.6f}")
    return EXIT_OK


# ----------------------------------------------------------------- generate

_GENERATE_KEYS = (
    "clock", "duration", "pair_rate", "seed", "format", "out", "error_log",
    "manifest", "monitor_threshold", "dump_events", "delay", "coherence_time",
    "visibility_ceiling", "efficiency", "dark_rate", "jitter", "dead_time",
    "window",
)


@dataclass
class GenerationResult:
    events: timetag.EventStream
    coincidences: CoincidenceStream
    monitor: timetag.MonitorReport
    records: bitpipe.BitRecordStream
    bits: BitStream
    qualifying: CoincidenceStream


def run_generation(
    source: SourceConfig,
    interf: InterferometerConfig,
    bank: DetectorBank,
    timing: TimingConfig,
    clock: ClockConfig,
    monitor_threshold: int = 0,
) -> GenerationResult:
    """Full chain: simulate, pair, monitor, and clock out bits.

    Raises MonitorAlarm when the cross-arm budget is exceeded; monitoring
    runs on the same coincidence stream that feeds the bit recorder.
    """
    events = timetag.simulate(source, interf, bank, timing)
    coincidences = timetag.coincidence_filter(events, timing)
    monitor = timetag.purity_monitor(coincidences, threshold=monitor_threshold)
    if monitor.status is MonitorStatus.ALARM:
        raise MonitorAlarm(
            f"{monitor.cross_arm_count} cross-arm coincidences exceed "
            f"threshold {monitor_threshold}"
        )
    qualifying = coincidences.select((PairLabel.D1D2, PairLabel.D3D4))
    records = bitpipe.extract_bits(qualifying, clock)
    bits = bitpipe.records_to_stream(records)
    return GenerationResult(
        events=events,
        coincidences=coincidences,
        monitor=monitor,
        records=records,
        bits=bits,
        qualifying=qualifying,
    )


def cmd_generate(args) -> int:
    if args.format not in ("ascii", "packed"):
        print(f"generate: unknown --format {args.format!r}", file=sys.stderr)
        return EXIT_USAGE
    manifest = _start_manifest("generate", args, _GENERATE_KEYS)
    source = SourceConfig(pair_rate_hz=args.pair_rate, duration_s=args.duration,
                          seed=args.seed)
    interf, bank, timing = _configs_from_args(args, args.delay)
    clock = ClockConfig(frequency_hz=args.clock)

    result = run_generation(source, interf, bank, timing, clock,
                            monitor_threshold=args.monitor_threshold)

    out = _resolve(args.out)
    bitpipe.write_bit_file(result.bits, out, fmt=args.format)
    manifest.add_output("bits", out)

    error_log = _resolve(args.error_log or args.out + ".errors.csv")
    bitpipe.write_error_log(error_log, result.records, result.qualifying, clock)
    manifest.add_output("error_log", error_log)

    if args.dump_events:
        dump = _resolve(args.dump_events)
        timetag.write_events_csv(result.events, dump)
        manifest.add_output("events", dump)

    counts = result.records.counts()
    label_counts = result.coincidences.label_counts()
    measured_rate = len(result.qualifying) / source.duration_s
    try:
        model_ber = bitpipe.ber_model(measured_rate, clock)
    except bitpipe.ModelOutOfRange:
        model_ber = None
    manifest.metadata.update(
        {
            "n_events": len(result.events),
            "n_coincidences": len(result.coincidences),
            "label_counts": {l.name: c for l, c in label_counts.items()},
            "cross_arm_count": result.monitor.cross_arm_count,
            "multi_click_clusters": result.coincidences.n_multi_click_clusters,
            "bits_recorded": len(result.bits),
            "error_records": counts[bitpipe.Symbol.ERROR],
            "empirical_ber": bitpipe.empirical_ber(result.records),
            "measured_coincidence_rate_hz": measured_rate,
            "model_ber": model_ber,
        }
    )
    manifest.finished_utc = utc_now()
    manifest.save(_resolve(args.manifest or args.out + ".manifest.json"))

    print(f"events: {len(result.events)}  coincidences: {len(result.coincidences)}"
          f"  cross-arm: {result.monitor.cross_arm_count}")
    print(f"bits: {len(result.bits)}  errors: {counts[bitpipe.Symbol.ERROR]}"
          f"  empirical BER: {bitpipe.empirical_ber(result.records):.3e}")
    print(f"wrote {out}")
    return EXIT_OK


# ------------------------------------------------------------------- unbias

_UNBIAS_KEYS = ("infile", "out", "in_format", "out_format", "seed")


def cmd_unbias(args) -> int:
    stream = bitpipe.read_bit_file(args.infile, fmt=args.in_format)
    unbiased = bitpipe.von_neumann(stream)
    out = _resolve(args.out)
    bitpipe.write_bit_file(unbiased, out, fmt=args.out_format)

    manifest = _start_manifest("unbias", args, _UNBIAS_KEYS)
    manifest.add_output("bits", out)
    manifest.metadata["input_bits"] = stream.n
    manifest.metadata["output_bits"] = unbiased.n

    print(f"input bits: {stream.n}")
    print(f"output bits: {unbiased.n}")
    if stream.n:
        print(f"yield: {unbiased.n / stream.n:.4f}")
    else:
        print("yield: n/a")
    if unbiased.n:
        p_one, err = bitpipe.bias_estimate(unbiased)
        manifest.metadata["output_ones_fraction"] = p_one
        print(f"output ones fraction: {p_one:.5f} +/- {err:.5f}")
    manifest.finished_utc = utc_now()
    manifest.save(out + ".manifest.json")
    return EXIT_OK


# --------------------------------------------------------------------- test

_TEST_KEYS = ("infile", "alpha", "report", "sequence_id", "block_m",
              "apen_m", "serial_m", "seed")


def cmd_test(args) -> int:
    stream = bitpipe.read_bit_file(args.infile)
    config = statskit.SuiteConfig(
        alpha=args.alpha,
        block_frequency_m=args.block_m,
        approx_entropy_m=args.apen_m,
        serial_m=args.serial_m,
    )
    sequence_id = args.sequence_id or os.path.basename(args.infile)
    report = statskit.run_suite(stream, config, sequence_id=sequence_id)

    out = _resolve(args.report or args.infile + ".report.json")
    with open(out, "w", encoding="ascii", newline="\n") as fh:
        fh.write(report.to_json())
        fh.write("\n")

    manifest = _start_manifest("test", args, _TEST_KEYS)
    manifest.add_output("report", out)
    manifest.metadata["overall_pass"] = report.overall_pass
    manifest.finished_utc = utc_now()
    manifest.save(out + ".manifest.json")

    print(f"sequence: {sequence_id}  bits: {report.n_bits}  alpha: {report.alpha}")
    print(f"{'test':<22}{'p-value(s)':<24}result")
    for t in report.tests:
        if not t.applicable:
            verdict = "not applicable"
            pvals = "-"
        else:
            verdict = "pass" if t.passed else "FAIL"
            pvals = " ".join(f"{p:.5f}" for p in t.p_values)
        print(f"{t.test_name:<22}{pvals:<24}{verdict}")
    print(f"overall: {'PASS' if report.overall_pass else 'FAIL'}")
    return EXIT_OK if report.overall_pass else EXIT_TEST_FAIL


# -------------------------------------------------------------------- rerun

# output-path parameters a rerun may redirect; inputs stay in place
_PATH_KEYS = ("out", "error_log", "dump_events", "report", "manifest")


def cmd_rerun(args) -> int:
    manifest = RunManifest.load(args.manifest_file)
    params = dict(manifest.parameters)
    if args.outdir:
        os.makedirs(args.outdir, exist_ok=True)
        for key in _PATH_KEYS:
            value = params.get(key)
            if isinstance(value, str) and value:
                params[key] = os.path.join(args.outdir, os.path.basename(value))
    handler = _COMMANDS.get(manifest.command)
    if handler is None:
        print(f"rerun: manifest names unknown command {manifest.command!r}",
              file=sys.stderr)
        return EXIT_USAGE
    return handler(argparse.Namespace(**params))


_COMMANDS = {
    "scan-delay": cmd_scan_delay,
    "ber-scan": cmd_ber_scan,
    "generate": cmd_generate,
    "unbias": cmd_unbias,
    "test": cmd_test,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrngsim",
        description="Simulate a two-photon interference quantum random "
                    "number generator end to end.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan-delay", help="coincidence rates vs photon delay")
    p.add_argument("--from", dest="delay_from", type=float, required=True,
                   help="first delay in fs")
    p.add_argument("--to", dest="delay_to", type=float, required=True,
                   help="last delay in fs")
    p.add_argument("--steps", type=int, required=True, help="number of delay points")
    p.add_argument("--pairs-per-point", type=float, default=2e5,
                   help="mean emitted pairs per point (default 2e5)")
    p.add_argument("--point-duration", type=float, default=1.0,
                   help="simulated seconds per point (default 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--fit", dest="fit", action="store_true", default=True,
                   help="fit the cross-arm dip (default)")
    p.add_argument("--no-fit", dest="fit", action="store_false")
    _physics_flags(p)
    p.set_defaults(func=cmd_scan_delay)

    p = sub.add_parser("ber-scan", help="bit error rate vs clock frequency")
    p.add_argument("--rate", type=float, required=True,
                   help="coincidence (bit generation) rate in Hz")
    p.add_argument("--freqs", required=True,
                   help="comma-separated clock frequencies in Hz")
    p.add_argument("--duration", type=float, default=100.0,
                   help="simulated seconds per frequency (default 100)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_ber_scan)

    p = sub.add_parser("generate", help="record a random bit sequence")
    p.add_argument("--clock", type=float, default=500_000.0,
                   help="counting clock frequency in Hz (default 500000)")
    p.add_argument("--duration", type=float, required=True,
                   help="simulated seconds")
    p.add_argument("--pair-rate", type=float, default=1336.0,
                   help="mean detected pair rate in Hz (default 1336)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", default="ascii", choices=("ascii", "packed"))
    p.add_argument("--out", required=True, help="bit file path")
    p.add_argument("--error-log", dest="error_log", default=None,
                   help="error-record CSV (default OUT.errors.csv)")
    p.add_argument("--manifest", default=None,
                   help="manifest path (default OUT.manifest.json)")
    p.add_argument("--monitor-threshold", type=int, default=0,
                   help="allowed cross-arm coincidences before alarm (default 0)")
    p.add_argument("--dump-events", default=None,
                   help="optional raw event CSV for debugging")
    _physics_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("unbias", help="von Neumann unbiasing of a bit file")
    p.add_argument("infile", help="input bit file (ascii or packed)")
    p.add_argument("--in-format", dest="in_format", default="auto",
                   choices=("auto", "ascii", "packed"))
    p.add_argument("--out", required=True)
    p.add_argument("--out-format", dest="out_format", default="ascii",
                   choices=("ascii", "packed"))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_unbias)

    p = sub.add_parser("test", help="run the randomness test battery")
    p.add_argument("infile", help="bit file (ascii or packed)")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--report", default=None,
                   help="JSON report path (default INFILE.report.json)")
    p.add_argument("--sequence-id", dest="sequence_id", default=None)
    p.add_argument("--block-m", dest="block_m", type=int, default=128,
                   help="block frequency block length (default 128)")
    p.add_argument("--apen-m", dest="apen_m", type=int, default=2,
                   help="approximate entropy pattern length (default 2)")
    p.add_argument("--serial-m", dest="serial_m", type=int, default=None,
                   help="serial pattern length (default: scaled to n)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("rerun", help="replay a recorded manifest")
    p.add_argument("--manifest", dest="manifest_file", required=True)
    p.add_argument("--outdir", default=None,
                   help="redirect output files into this directory")
    p.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except MonitorAlarm as exc:
        print(f"purity monitor alarm: {exc}", file=sys.stderr)
        return EXIT_ALARM
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, bitpipe.ModelOutOfRange) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry_point() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry_point()
