"""End-to-end inference: corpus, evidence, Communities, LocPrf, checks, fusion."""

from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .config import RunConfig
from .dictionary import Dictionary, load_dictionary
from .engine import CommunitiesResult, Evidence, accumulate_records, infer_communities
from .fusion import RelationshipDb, SanityReport, fuse, ordering_only_locprf, sanity_check
from .ingest import CorpusFile, DecodeStats, classify_corpus_file, discover_corpus, read_corpus_file
from .locprf import (
    LocPrfObservation, LocPrfProfile, RsDump, labels_for, merge_observer_inferences,
    parse_rs_dump, profile_observer,
)
from .paths import AsnFilter

log = logging.getLogger(__name__)

RS_SUFFIXES = (".rs", ".txt", ".dump")


def corpus_files(paths: Iterable[str | Path]) -> list[CorpusFile]:
    files: list[CorpusFile] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(discover_corpus(p))
        elif p.is_file():
            cf = classify_corpus_file(p.parent, p)
            if cf is not None:
                files.append(cf)
        else:
            raise FileNotFoundError(f"corpus path {p} does not exist")
    return sorted(set(files))


def _accumulate_file(job: tuple[CorpusFile, Dictionary, AsnFilter]) -> tuple[Evidence, DecodeStats]:
    cf, dictionary, rejected = job
    stats = DecodeStats()
    evidence = accumulate_records(read_corpus_file(cf, stats), dictionary, rejected)
    return evidence, stats


def accumulate_corpus(files: Sequence[CorpusFile], dictionary: Dictionary,
                      rejected: AsnFilter, workers: int = 1) -> tuple[Evidence, DecodeStats]:
    """Per-file partial evidence, merged in file order whatever the worker count."""
    jobs = [(cf, dictionary, rejected) for cf in files]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            parts = list(pool.map(_accumulate_file, jobs))
    else:
        parts = [_accumulate_file(job) for job in jobs]
    evidence, stats = Evidence(), DecodeStats()
    for ev, st in parts:
        evidence.merge(ev)
        stats.merge(st)
    return evidence, stats


def rs_dump_files(paths: Iterable[str | Path]) -> list[Path]:
    out: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(q for q in sorted(p.rglob("*")) if q.is_file() and q.suffix in RS_SUFFIXES)
        elif p.is_file():
            out.append(p)
        else:
            raise FileNotFoundError(f"route-server dump {p} does not exist")
    return out


def load_rs_dumps(paths: Iterable[str | Path], rejected: AsnFilter
                  ) -> tuple[dict[int, list[LocPrfObservation]], list[RsDump]]:
    by_observer: dict[int, list[LocPrfObservation]] = defaultdict(list)
    dumps = []
    for path in rs_dump_files(paths):
        dump = parse_rs_dump(path, rejected)
        if dump.skipped:
            log.info("%s: %d rows skipped", path, dump.skipped)
        dumps.append(dump)
        if dump.observations:
            by_observer[dump.observer_asn].extend(dump.observations)
    return dict(sorted(by_observer.items())), dumps


@dataclass
class InferResult:
    db: RelationshipDb
    evidence: Evidence
    stats: DecodeStats
    communities: CommunitiesResult
    profiles: dict[int, LocPrfProfile] = field(default_factory=dict)
    sanity: SanityReport = field(default_factory=SanityReport)

    def header(self, config: RunConfig) -> dict[str, str]:
        days = sorted(self.evidence.days)
        span = f"{days[0]}..{days[-1]}" if days else "none"
        return {"corpus-dates": span, "config-hash": config.config_hash()}


def run_locprf(observations: dict[int, list[LocPrfObservation]], communities: CommunitiesResult,
               config: RunConfig) -> tuple[dict, dict[int, LocPrfProfile]]:
    profiles = {}
    per_observer = []
    for observer, obs in observations.items():
        labels = labels_for(observer, communities.inferences)
        profile, infs = profile_observer(obs, labels, config.dominance_ratio,
                                         config.proximity_abs, config.proximity_rel)
        profiles[observer] = profile
        per_observer.append(infs)
    merged, conflicts = merge_observer_inferences(per_observer)
    for link in sorted(conflicts):
        log.info("%s: route-server observers disagree, no LocPrf verdict", link)
    return merged, profiles


def infer(config: RunConfig, dictionary: Dictionary | None = None) -> InferResult:
    if dictionary is None:
        if not config.dictionary:
            raise FileNotFoundError("no community dictionary configured")
        dictionary = load_dictionary(Path(config.dictionary))
    rejected = config.rejected
    files = corpus_files(config.corpus)
    evidence, stats = accumulate_corpus(files, dictionary, rejected, config.workers)

    def communities(exclude: Iterable[int] = ()) -> CommunitiesResult:
        return infer_communities(evidence, config.min_votes, config.backup_max_run_days,
                                 config.prepend_threshold, exclude)

    comm = communities()
    observations, _ = load_rs_dumps(config.rs_dumps, rejected)
    report = SanityReport()
    if observations:
        view = ordering_only_locprf(observations, config.dominance_ratio)
        report = sanity_check(evidence, view, config.sanity_min_links,
                              config.sanity_max_contradiction)
        if report.suspicious_owners:
            log.warning("ignoring Communities of %s",
                        ", ".join(f"AS{a}" for a in sorted(report.suspicious_owners)))
            comm = communities(report.suspicious_owners)
    else:
        report = sanity_check(evidence, {}, config.sanity_min_links, config.sanity_max_contradiction)

    locprf, profiles = run_locprf(observations, comm, config)
    db = fuse(comm.inferences, locprf, comm.pairs)
    for link, why in sorted(report.two_sided.items()):
        db.exclude(link, f"endpoints disagree: {why}")
    return InferResult(db, evidence, stats, comm, profiles, report)
