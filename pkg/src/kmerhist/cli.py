"""Command-line front end.

Exit codes: 0 success, 1 usage/configuration error, 2 I/O or parse error,
3 estimation or fit failure.
"""

from __future__ import annotations

import argparse
import json
import resource
import sys
import time
from pathlib import Path

from . import __version__
from .errors import (
    CapacityError,
    ConfigurationError,
    EstimationError,
    FitError,
    MergeError,
    ParseError,
    SketchFormatError,
)
from .histogram import AbundanceHistogram
from .ingest import DEFAULT_BATCH_BASES, ingest, stream_kmer_codes
from .models import PeakConfig, estimate_genome_size_consistency, fit_model
from .oracle import ExactCounter, compare, exact_histogram
from .serialize import MAGIC, load, save
from .sketch import DEFAULT_LOG2R, DEFAULT_T, AbundanceSketch, SketchParams, log2r_for_budget, merge_all
from .synth import GenomeSpec, ReadSpec, generate_genome, generate_reads, truth_record, write_fastq, write_truth

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_ESTIMATION = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_size(text: str) -> int:
    """``"500M"`` -> bytes. Suffixes K, M, G (powers of 1024), optional trailing B."""
    s = text.strip().upper().removesuffix("B")
    mult = 1
    for suffix, m in (("K", 1 << 10), ("M", 1 << 20), ("G", 1 << 30)):
        if s.endswith(suffix):
            s, mult = s[:-1], m
            break
    try:
        value = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid size {text!r}") from None
    return int(value * mult)


def _add_kmer_args(p: argparse.ArgumentParser, k_required: bool = True) -> None:
    p.add_argument("-k", type=int, required=k_required, help="k-mer length (1-1024)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--canonical", dest="canonical", action="store_true", default=True,
                       help="count k-mers strand-independently (default)")
    group.add_argument("--raw", dest="canonical", action="store_false", help="count k-mers as read")


def _add_sketch_args(p: argparse.ArgumentParser) -> None:
    # -k may be omitted when the input is a saved sketch (it records k)
    _add_kmer_args(p, k_required=False)
    p.add_argument("--log2-counters", type=int, default=None, help=f"log2 of counters per level (default {DEFAULT_LOG2R})")
    p.add_argument("--mem-budget", type=parse_size, default=None,
                   help="pick the largest --log2-counters fitting this many bytes (e.g. 500M)")
    p.add_argument("--instances", type=int, default=DEFAULT_T, help="independent instances t, odd (default 7)")
    p.add_argument("--aux-bits", type=int, default=16, help="bits of the collision label, u = 2^bits (3-16)")
    p.add_argument("--threads", type=int, default=1, help="ingestion worker threads")
    p.add_argument("--seed", type=int, default=1, help="master seed")


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("-o", "--output", default="-", help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kmerhist", description="Approximate k-mer abundance histograms in sublinear memory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("hist", help="estimate the abundance histogram of reads (or of a saved sketch)")
    p.add_argument("inputs", nargs="+", help="FASTA/FASTQ files (gzip ok, '-' = stdin) or one sketch file")
    _add_sketch_args(p)
    p.add_argument("--max-count", type=int, default=256, help="largest multiplicity reported")
    _add_output_args(p)
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("sketch", help="build a sketch file from reads")
    p.add_argument("inputs", nargs="+")
    _add_sketch_args(p)
    p.add_argument("-o", "--output", required=True, help="sketch file to write")
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("exact", help="exact abundance histogram (desk-scale inputs)")
    p.add_argument("inputs", nargs="+")
    _add_kmer_args(p)
    p.add_argument("--max-distinct", type=int, default=1 << 28, help="refuse to track more distinct k-mers")
    _add_output_args(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("compare", help="relative errors of an estimated histogram against an exact one")
    p.add_argument("estimated", nargs="+", help="one or more estimated histograms (trials)")
    p.add_argument("--exact", required=True, help="exact histogram")
    p.add_argument("--max-count", type=int, default=None)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fit", help="fit the repeat/error model to a histogram")
    p.add_argument("histogram")
    p.add_argument("-l", "--read-length", type=int, required=True)
    p.add_argument("-k", type=int, default=None, help="k (defaults to the value recorded in the histogram)")
    p.add_argument("-c", "--coverage", type=float, default=None, help="known coverage for the second size route")
    p.add_argument("--reference-length", type=float, default=None, help="known genome length")
    p.add_argument("--error-cutoff", type=int, default=None, help="override the detected error region end")
    p.add_argument("--smoothing-window", type=int, default=5)
    p.add_argument("--min-peak-fraction", type=float, default=0.005)
    p.add_argument("--order-tolerance", type=float, default=0.25)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="generate a synthetic genome, reads and ground truth")
    p.add_argument("--genome-length", type=int, required=True)
    p.add_argument("--repeat", action="append", default=[], metavar="LEN:COPIES",
                   help="planted repeat block (repeatable)")
    p.add_argument("--coverage", type=float, default=0.0)
    p.add_argument("--read-length", type=int, default=100)
    p.add_argument("--error-rate", type=float, default=0.0)
    p.add_argument("-k", type=int, default=None, help="k for the ground-truth g_m table")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--prefix", required=True, help="writes PREFIX.fa, PREFIX.fq, PREFIX.truth.json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("merge", help="merge sketch files built with identical parameters")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_merge)
    return parser


# ---- helpers ----------------------------------------------------------------


def _params(args) -> SketchParams:
    if args.mem_budget is not None and args.log2_counters is not None:
        raise UsageError("--mem-budget and --log2-counters are mutually exclusive")
    if args.mem_budget is not None:
        log2r = log2r_for_budget(args.mem_budget, args.instances)
    else:
        log2r = args.log2_counters if args.log2_counters is not None else DEFAULT_LOG2R
    if not 3 <= args.aux_bits <= 16:
        raise UsageError("--aux-bits must be in [3, 16]")
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return SketchParams.create(
        t=args.instances, log2r=log2r, u=1 << args.aux_bits, seed=args.seed, k=args.k, canonical=args.canonical
    )


def _is_sketch_file(path: str) -> bool:
    if path == "-":
        return False
    try:
        with open(path, "rb") as fh:
            return fh.read(4) == MAGIC
    except OSError:
        return False


def _write_text(text: str, output: str) -> None:
    if output == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(output).write_text(text)


def _peak_rss_mb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _summary(N: int, f0: float | None, elapsed: float) -> None:
    rate = N / elapsed if elapsed > 0 else 0.0
    print(f"N\t{N}", file=sys.stderr)
    if f0 is not None:
        print(f"F0\t{f0:.6g}", file=sys.stderr)
    print(f"time_s\t{elapsed:.3f}", file=sys.stderr)
    print(f"peak_rss_mb\t{_peak_rss_mb():.1f}", file=sys.stderr)
    print(f"kmers_per_s\t{rate:.4g}", file=sys.stderr)


def _build_sketch(args) -> tuple[AbundanceSketch, int]:
    if len(args.inputs) == 1 and _is_sketch_file(args.inputs[0]):
        sk = load(args.inputs[0])
        if args.k is not None and sk.params.k and args.k != sk.params.k:
            raise UsageError(f"-k {args.k} does not match the sketch file (k={sk.params.k})")
        return sk, sk.total_updates
    if args.k is None:
        raise UsageError("-k is required when reading sequence files")
    params = _params(args)
    sk, stats = ingest(args.inputs, args.k, params, args.canonical, args.threads, DEFAULT_BATCH_BASES)
    if stats.skipped:
        print(f"skipped_windows\t{stats.skipped}", file=sys.stderr)
    return sk, stats.N


# ---- subcommands --------------------------------------------------------------


def cmd_hist(args) -> int:
    if args.max_count < 1:
        raise UsageError("--max-count must be >= 1")
    start = time.perf_counter()
    sk, N = _build_sketch(args)
    hist = sk.estimate_histogram(args.max_count)
    elapsed = time.perf_counter() - start
    text = hist.to_tsv() if args.format == "tsv" else hist.to_json()
    _write_text(text, args.output)
    _summary(N, hist.f0, elapsed)
    return 0


def cmd_sketch(args) -> int:
    start = time.perf_counter()
    sk, N = _build_sketch(args)
    save(sk, args.output)
    _summary(N, None, time.perf_counter() - start)
    return 0


def cmd_exact(args) -> int:
    start = time.perf_counter()
    counter = ExactCounter(args.k, max_distinct=args.max_distinct)
    for codes in stream_kmer_codes(args.inputs, args.k, args.canonical):
        counter.add(codes)
    hist = exact_histogram(counter.result())
    elapsed = time.perf_counter() - start
    text = hist.to_tsv() if args.format == "tsv" else hist.to_json()
    _write_text(text, args.output)
    _summary(hist.total_kmers, hist.f0, elapsed)
    return 0


def cmd_compare(args) -> int:
    exact = AbundanceHistogram.read(args.exact)
    if exact.source != "exact":
        raise UsageError(f"{args.exact} is not an exact histogram")
    trials = [AbundanceHistogram.read(p) for p in args.estimated]
    report = compare(trials, exact, args.max_count)
    _write_text(json.dumps(report.to_json_dict(), indent=2) + "\n", args.output)
    return 0


def cmd_fit(args) -> int:
    hist = AbundanceHistogram.read(args.histogram)
    config = PeakConfig(
        smoothing_window=args.smoothing_window,
        min_peak_fraction=args.min_peak_fraction,
        order_tolerance=args.order_tolerance,
    )
    fit = fit_model(hist, None, args.read_length, args.k, args.error_cutoff, config)
    sizes = estimate_genome_size_consistency(fit, args.coverage, args.reference_length)
    out = fit.to_json_dict()
    out["genome_size_consistency"] = sizes.to_json_dict()
    _write_text(json.dumps(out, indent=2) + "\n", args.output)
    print(
        f"lambda'={fit.lambda_prime:.4g} lambda_e={fit.lambda_e:.4g} coverage={fit.coverage:.4g} "
        f"g={fit.genome_size:.6g} F0'={fit.true_distinct:.6g}",
        file=sys.stderr,
    )
    return 0


def _parse_repeat(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise UsageError(f"--repeat expects LEN:COPIES, got {text!r}") from None


def cmd_synth(args) -> int:
    spec = GenomeSpec(args.genome_length, [_parse_repeat(r) for r in args.repeat], args.seed)
    genome = generate_genome(spec, args.k)
    prefix = args.prefix
    genome.write_fasta(f"{prefix}.fa")
    reads = None
    if args.coverage > 0:
        # offset the read seed so genome and reads draw independent streams
        reads = generate_reads(genome, ReadSpec(args.coverage, args.read_length, args.error_rate, args.seed + 1))
        write_fastq(reads, f"{prefix}.fq")
    write_truth(truth_record(genome, reads, args.k), f"{prefix}.truth.json")
    if reads is not None:
        print(f"reads\t{reads.truth.n}\nsubstitutions\t{reads.truth.substitutions}", file=sys.stderr)
    return 0


def cmd_merge(args) -> int:
    sketches = [load(p) for p in args.inputs]
    save(merge_all(sketches), args.output)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigurationError, MergeError) as exc:
        print(f"kmerhist: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ParseError, SketchFormatError, ValueError) as exc:
        print(f"kmerhist: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EstimationError, FitError, CapacityError) as exc:
        print(f"kmerhist: error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
