"""``bgprel`` command line.

Exit status: 0 ok, 1 usage or configuration error, 2 data error, 3 internal
error.  Failures print a single ``bgprel: error: <kind>: <message>`` line on
stderr and leave no partial output file behind.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

from . import __version__
from .config import RunConfig, load_config
from .dictionary import Dictionary, load_dictionary
from .errors import BgprelError, ConfigError, DataError, InfeasibleQuota
from .fusion import (
    STAT_KEYS, RelationshipDb, db_from_json, db_to_json, export, fuse, stats, validate_paths,
)
from .pipeline import accumulate_corpus, corpus_files, infer, load_rs_dumps, run_locprf
from .engine import CommunitiesResult
from .synth import GroundTruth, SynthParams, emit_corpus, generate, score

log = logging.getLogger("bgprel")


class UsageError(BgprelError):
    pass


@contextmanager
def atomic_output(path: str | os.PathLike | None) -> Iterator:
    """Text handle that replaces ``path`` only on success; ``None`` means stdout."""
    if path is None or str(path) == "-":
        yield sys.stdout
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            yield fh
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _read_db(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    return db_from_json(text)


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    overrides = {}
    for key in ("dictionary", "output", "rejected_asns", "min_votes", "backup_max_run_days",
                "prepend_threshold", "dominance_ratio", "proximity_abs", "proximity_rel",
                "sanity_min_links", "sanity_max_contradiction", "workers", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "corpus", None):
        overrides["corpus"] = args.corpus
    if getattr(args, "rs", None):
        overrides["rs_dumps"] = args.rs
    try:
        return cfg.replace(**overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _dictionary(cfg: RunConfig) -> Dictionary:
    if not cfg.dictionary:
        raise UsageError("a community dictionary is required (--dictionary)")
    try:
        return load_dictionary(Path(cfg.dictionary))
    except OSError as exc:
        raise DataError(f"cannot read dictionary {cfg.dictionary}: {exc.strerror}") from None


def _require_corpus(cfg: RunConfig) -> None:
    if not cfg.corpus:
        raise UsageError("no corpus given (--corpus)")


# -------------------------------------------------------------- commands

def cmd_ingest_stats(args) -> int:
    cfg = _config(args)
    _require_corpus(cfg)
    evidence, st = accumulate_corpus(corpus_files(cfg.corpus), Dictionary(), cfg.rejected, cfg.workers)
    rows = [("files", st.files), ("records", st.records), ("mrt_records", st.mrt_records),
            ("withdrawals", st.withdrawals), ("skipped_unsupported", st.skipped_unsupported),
            ("skipped_malformed", st.skipped_malformed), ("skipped_empty_path", st.skipped_empty_path),
            ("rejected_text", st.rejected_text), ("errors", st.errors)]
    rows += [(f"rejected_{reason.value.lower()}", n) for reason, n in sorted(evidence.rejections.items())]
    rows += [("accepted_messages", evidence.messages), ("paths", len(evidence.paths)),
             ("links", len(evidence.links)), ("ases", len(evidence.ases)),
             ("days", len(evidence.days))]
    with atomic_output(cfg.output) as out:
        for key, value in rows:
            out.write(f"{key}\t{value}\n")
        for name in st.unreadable_files:
            out.write(f"unreadable\t{name}\n")
    return 0


def cmd_infer(args) -> int:
    cfg = _config(args)
    _require_corpus(cfg)
    result = infer(cfg, _dictionary(cfg))
    header = result.header(cfg)
    for line in result.sanity.lines():
        log.warning("sanity: %s", line)
    for link, why in sorted(result.db.excluded.items()):
        log.info("excluded %s: %s", link, why)
    with atomic_output(cfg.output) as out:
        out.write(db_to_json(result.db, header))
    if args.export:
        with atomic_output(args.export) as out:
            out.write(export(result.db, header))
    log.info("%d links inferred, %d excluded", len(result.db), len(result.db.excluded))
    return 0


def cmd_profile_locprf(args) -> int:
    cfg = _config(args)
    if not cfg.rs_dumps:
        raise UsageError("no route-server dumps given (--rs)")
    observations, dumps = load_rs_dumps(cfg.rs_dumps, cfg.rejected)
    labels_db = _read_db(args.labels)[0] if args.labels else None
    comm = CommunitiesResult(dict(labels_db.links) if labels_db else {}, {}, set())
    merged, profiles = run_locprf(observations, comm, cfg)
    with atomic_output(cfg.output) as out:
        for observer, profile in profiles.items():
            out.write(f"observer AS{observer}\n")
            if not profile.usable:
                out.write("  no dominant LocPrf values\n")
                continue
            for value, cls in profile.defaults:
                out.write(f"  default {value}\t{cls.value}\tlinks={profile.link_count[value]}"
                          f"\tpaths={profile.path_count[value]}\n")
            for value, cls in sorted(profile.extended.items()):
                out.write(f"  near-default {value}\t{cls.value} (reduced preference)\n")
            for value, why in profile.exceptions:
                out.write(f"  exception {value}\t{why}\n")
            for value in profile.dropped:
                out.write(f"  dropped {value}\n")
    if args.db:
        db = RelationshipDb(dict(sorted(merged.items())), sources={"locprf": merged})
        with atomic_output(args.db) as out:
            out.write(db_to_json(db, {"config-hash": cfg.config_hash()}))
    return 0


def cmd_fuse(args) -> int:
    comm, meta = _read_db(args.communities)
    lp, _ = _read_db(args.locprf)
    db = fuse(comm.links, lp.links, comm.pairs)
    for link, why in sorted(db.excluded.items()):
        log.warning("excluded %s: %s", link, why)
    with atomic_output(args.output) as out:
        out.write(db_to_json(db, meta))
    return 0


def cmd_validate_paths(args) -> int:
    cfg = _config(args)
    _require_corpus(cfg)
    db, _ = _read_db(args.db)
    evidence, _ = accumulate_corpus(corpus_files(cfg.corpus), Dictionary(), cfg.rejected, cfg.workers)
    report = validate_paths(evidence.paths, db)
    with atomic_output(cfg.output) as out:
        out.write(f"checked\t{report.checked}\nvalid\t{report.valid}\n"
                  f"unknown\t{report.unknown}\nviolations\t{len(report.violations)}\n")
        for check in report.violations:
            out.write(f"violation\t{' '.join(map(str, check.hops))}\tstep {check.violation}\n")
    return 0


def cmd_stats(args) -> int:
    cfg = _config(args)
    db, _ = _read_db(args.db)
    evidence = None
    if cfg.corpus:
        evidence, _ = accumulate_corpus(corpus_files(cfg.corpus), Dictionary(), cfg.rejected,
                                        cfg.workers)
    s = stats(db, evidence)
    with atomic_output(cfg.output) as out:
        for key in STAT_KEYS:
            out.write(f"{key}\t{s[key]}\n")
    return 0


def cmd_export(args) -> int:
    db, meta = _read_db(args.db)
    header = {k: str(v) for k, v in meta.items()}
    with atomic_output(args.output) as out:
        out.write(export(db, header))
    return 0


def cmd_synth(args) -> int:
    if not args.output:
        raise UsageError("synth needs an output directory (-o)")
    params = SynthParams(n_ases=args.n_ases, seed=args.seed, noise=args.noise, days=args.days)
    truth = generate(params)
    out = Path(args.output)
    corpus = emit_corpus(truth)
    tmp = Path(tempfile.mkdtemp(dir=out.parent if out.parent.exists() else None, prefix=".synth."))
    try:
        corpus.write(tmp)
        out.mkdir(parents=True, exist_ok=True)
        for rel in sorted(corpus.files):
            dest = out / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(tmp / rel, dest)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    log.info("wrote %d files to %s", len(corpus.files), out)
    return 0


def cmd_score(args) -> int:
    db, _ = _read_db(args.db)
    try:
        truth = GroundTruth.from_json(Path(args.truth).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {args.truth}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"bad truth file: {exc}") from None
    result = score(db, truth)
    with atomic_output(args.output) as out:
        out.write(result.summary() + "\n")
    return 0


# ---------------------------------------------------------------- parser

def _add_thresholds(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("thresholds")
    g.add_argument("--rejected-asns", help="ASNs dropped from paths, e.g. 23456,56320-65535")
    g.add_argument("--min-votes", type=int)
    g.add_argument("--backup-max-run-days", type=int)
    g.add_argument("--prepend-threshold", type=int)
    g.add_argument("--dominance-ratio", type=float)
    g.add_argument("--proximity-abs", type=int)
    g.add_argument("--proximity-rel", type=float)
    g.add_argument("--sanity-min-links", type=int)
    g.add_argument("--sanity-max-contradiction", type=float)


def _add_inputs(p: argparse.ArgumentParser, dictionary: bool = False, rs: bool = False) -> None:
    p.add_argument("--config", help="key = value config file (default: $BGPREL_CONFIG)")
    p.add_argument("--corpus", nargs="+", help="corpus files or directories")
    if dictionary:
        p.add_argument("--dictionary", help="community dictionary TSV")
    if rs:
        p.add_argument("--rs", nargs="+", help="route-server dump files or directories")
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bgprel", description="AS relationship inference from BGP Communities and LocPrf")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ingest-stats", help="decode a corpus and report counts")
    _add_inputs(p)
    _add_thresholds(p)
    p.set_defaults(func=cmd_ingest_stats)

    p = sub.add_parser("infer", help="run the full inference pipeline")
    _add_inputs(p, dictionary=True, rs=True)
    _add_thresholds(p)
    p.add_argument("--export", help="also write the pipe-separated relationship file")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("profile-locprf", help="profile route-server LocPrf values")
    _add_inputs(p, rs=True)
    _add_thresholds(p)
    p.add_argument("--labels", help="relationship db whose links label neighbours")
    p.add_argument("--db", help="write LocPrf inferences as a relationship db")
    p.set_defaults(func=cmd_profile_locprf)

    p = sub.add_parser("fuse", help="fuse a Communities db with a LocPrf db")
    p.add_argument("--communities", required=True)
    p.add_argument("--locprf", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("validate-paths", help="check corpus paths against the valley-free rule")
    _add_inputs(p)
    _add_thresholds(p)
    p.add_argument("--db", required=True)
    p.set_defaults(func=cmd_validate_paths)

    p = sub.add_parser("stats", help="summary counts of a relationship db")
    _add_inputs(p)
    _add_thresholds(p)
    p.add_argument("--db", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("export", help="write a relationship db as a pipe-separated file")
    p.add_argument("--db", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n-ases", type=int, default=200)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--days", type=int, default=10)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="score a relationship db against synthetic truth")
    p.add_argument("--db", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_score)
    return parser


def _fail(kind: str, message: str, status: int) -> int:
    first = " ".join(str(message).split())
    print(f"bgprel: error: {kind}: {first}", file=sys.stderr)
    return status


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        return _fail("usage", str(exc), 1)
    except InfeasibleQuota as exc:
        return _fail("infeasible", str(exc), 2)
    except (DataError, FileNotFoundError) as exc:
        return _fail("data", str(exc), 2)
    except BgprelError as exc:
        return _fail("data", str(exc), 2)
    except Exception as exc:  # noqa: BLE001
        return _fail("internal", f"{type(exc).__name__}: {exc}", 3)


if __name__ == "__main__":
    sys.exit(main())
