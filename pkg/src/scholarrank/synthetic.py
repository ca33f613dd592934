"""Seeded synthetic datasets for demos, the CLI pipeline, and tests.

The generated data is fictional: 20 departments observed in two snapshots
with departures, moves, promotions and new hires between them, plus score
tables and a small scholar-page fixture store for the faculty whose t10 is
left uncollected.
"""

from __future__ import annotations

import datetime as dt
import json
import math
import random
from dataclasses import replace
from pathlib import Path

from .harvest import derive_t10, query_hash, render_profile_page, render_search_page, search_query
from .metrics import CUMULATIVE_LEVELS, MetricVector, compute_metric_table, serialize_metrics
from .model import PUBLISHED_MODEL
from .roster import (
    CollectionMethod,
    FacultyRecord,
    Rank,
    ScoreSource,
    ScoreTable,
    Snapshot,
    build_snapshot,
    save_snapshot,
    serialize_score_table,
)

UNIVERSITIES = (
    "Alder State University", "Birchwood Institute of Technology", "Cedar Valley University",
    "Dunmore College", "Elm Harbor University", "Fairhaven Tech", "Glenrock University",
    "Hollis Polytechnic", "Ironwood University", "Juniper Bay College", "Kestrel University",
    "Larkspur State", "Maple Ridge University", "Northgate Institute", "Oakhurst University",
    "Pinecrest College", "Quarry Hill University", "Redfern Institute", "Silverlake University",
    "Tamarack State University",
)
FIRST = (
    "Ada", "Bo", "Carmen", "Dmitri", "Elena", "Farid", "Grace", "Hiro", "Ines", "Jonas", "Kavya",
    "Luis", "Mei", "Nadia", "Omar", "Priya", "Quinn", "Rosa", "Sven", "Tariq", "Uma", "Viktor",
    "Wen", "Ximena", "Yusuf", "Zoe", "José", "Zoë", "Søren", "Anaïs",
)
LAST = (
    "Abbott", "Baptiste", "Chen", "Dubois", "Eriksen", "Fischer", "Garcia", "Haddad", "Ito",
    "Jovanovic", "Kim", "Lindqvist", "Moreau", "Nakamura", "Okafor", "Petrov", "Quintero",
    "Rossi", "Sato", "Tanaka", "Ueda", "Varga", "Wang", "Xu", "Yilmaz", "Zhang", "Núñez",
    "O'Brien", "Müller", "Van Dyke",
)

NOISELESS_BETA = (0.5, 0.25)
NOISELESS_PAIR = ("m10", 40)


def _names(rng: random.Random):
    pool = [f"{f} {l}" for f in FIRST for l in LAST]
    rng.shuffle(pool)
    return iter(pool)


def _t10(rng: random.Random, quality: float, rank: Rank) -> int:
    mu = math.log(40) + 1.6 * quality + (0.0 if rank.senior else -1.0)
    if rng.random() < 0.02:
        return 0
    return int(rng.lognormvariate(mu, 0.8))


def _rank(rng: random.Random) -> Rank:
    u = rng.random()
    return Rank.ASSISTANT if u < 0.28 else Rank.ASSOCIATE if u < 0.55 else Rank.FULL


def _display_name(rng: random.Random, name: str) -> str:
    if rng.random() < 0.15:
        first, last = name.split(" ", 1)
        return f"{last.upper()}, {first}"
    return name


def generate_snapshots(seed: int = 0) -> tuple[Snapshot, Snapshot, dict[str, float]]:
    """Two snapshots of the same 20 departments, plus each department's quality."""
    rng = random.Random(seed)
    names = _names(rng)
    quality = {u: rng.random() for u in UNIVERSITIES}

    early = []
    counter = 0
    for univ in UNIVERSITIES:
        size = 3 + int(quality[univ] * 30 + rng.random() * 8)
        for _ in range(size):
            counter += 1
            rank = _rank(rng)
            has_profile = rng.random() < 0.85
            early.append(FacultyRecord(
                faculty_id=f"A{counter:04d}",
                name_raw=next(names),
                university=univ,
                department="Computer Science",
                rank=rank,
                scholar_profile_id=f"SP{counter:04d}" if has_profile else None,
                t10=None if rng.random() < 0.01 else _t10(rng, quality[univ], rank),
                collection_method=CollectionMethod.AUTO if has_profile else CollectionMethod.MANUAL,
            ))

    late = []
    counter = 0
    for f in early:
        u = rng.random()
        if u < 0.08:
            continue  # departed
        counter += 1
        univ = f.university
        if u < 0.13:
            univ = rng.choice([x for x in UNIVERSITIES if x != f.university])
        rank = f.rank
        if rank is Rank.ASSISTANT and rng.random() < 0.3:
            rank = Rank.ASSOCIATE
        elif rank is Rank.ASSOCIATE and rng.random() < 0.2:
            rank = Rank.FULL
        t10 = None if f.t10 is None else int(f.t10 * rng.uniform(1.1, 1.6))
        late.append(replace(
            f, faculty_id=f"B{counter:04d}", name_raw=_display_name(rng, f.name_raw),
            university=univ, rank=rank, t10=t10,
        ))
    for univ in UNIVERSITIES:
        for _ in range(1 + int(rng.random() * 5)):
            counter += 1
            rank = Rank.ASSISTANT if rng.random() < 0.75 else _rank(rng)
            has_profile = rng.random() < 0.9
            late.append(FacultyRecord(
                faculty_id=f"B{counter:04d}",
                name_raw=next(names),
                university=univ,
                department="Computer Science",
                rank=rank,
                scholar_profile_id=f"SQ{counter:04d}" if has_profile else None,
                t10=None if rng.random() < 0.01 else _t10(rng, quality[univ], rank),
            ))
    late.sort(key=lambda f: (f.university, f.faculty_id))
    return (
        build_snapshot(early, "2017", dt.date(2016, 12, 1)),
        build_snapshot(late, "2022", dt.date(2021, 12, 1)),
        quality,
    )


def usn_scores(snapshot: Snapshot, rng: random.Random, year: int) -> ScoreTable:
    entries = {}
    for v in compute_metric_table(snapshot):
        s = PUBLISHED_MODEL.predict(v) + rng.gauss(0.0, 0.25)
        entries[v.university] = round(min(5.0, max(1.0, s)), 1)
    return ScoreTable(ScoreSource.USN, year, entries)


def csrankings_scores(usn: ScoreTable, rng: random.Random) -> ScoreTable:
    entries = {u: round(math.exp(1.4 * s + rng.gauss(0.0, 0.35)), 2) for u, s in usn.entries.items()}
    return ScoreTable(ScoreSource.CSRANKINGS, usn.year, entries)


def noiseless_fit_data(seed: int = 0, n: int = 20,
                       beta: tuple[float, float] = NOISELESS_BETA) -> tuple[list[MetricVector], ScoreTable]:
    """Metric vectors whose USN score is exactly 1 + b1*sqrt(m10) + b2*sqrt(c40)."""
    rng = random.Random(seed)
    metrics = []
    entries = {}
    for i in range(n):
        m10 = float(rng.randint(1, 20) ** 2 / 100 * rng.choice([1, 4]))
        c = sorted((rng.randint(0, 16) for _ in CUMULATIVE_LEVELS), reverse=True)
        cmap = dict(zip(CUMULATIVE_LEVELS, c))
        univ = f"Fit University {i + 1:02d}"
        metrics.append(MetricVector(univ, m10, 1.0 + m10, 50.0, cmap, 10, 20))
        entries[univ] = 1.0 + beta[0] * math.sqrt(m10) + beta[1] * math.sqrt(cmap[40])
    return metrics, ScoreTable(ScoreSource.USN, 2022, entries)


def _strip_for_harvest(snapshot: Snapshot, rng: random.Random, count: int):
    """Blank t10 for a few senior faculty and build fixture pages for them.

    Returns the stripped snapshot, the pages keyed by fixture-relative path,
    and the ground truth those pages must parse back to.
    """
    seniors = [f for f in snapshot.faculty if f.senior and f.t10 is not None]
    with_profile = [f for f in seniors if f.has_scholar_profile]
    without = [f for f in seniors if not f.has_scholar_profile]
    n_search = min(len(without), max(1, count // 3))
    chosen = {f.faculty_id for f in rng.sample(with_profile, count - n_search) + rng.sample(without, n_search)}
    pages: dict[str, str] = {}
    truth: dict = {"pages": {}, "profiles": {}, "search": {}}
    updated = []
    for f in snapshot.faculty:
        if f.faculty_id not in chosen:
            updated.append(f)
            continue
        n_pubs = rng.randint(6, 45)
        cites = sorted((int(rng.lognormvariate(math.log(f.t10 + 1), 1.0)) for _ in range(n_pubs)),
                       reverse=True)
        pubs = [(f"Paper {k + 1} by {f.name_canonical}", c) for k, c in enumerate(cites)]
        if f.scholar_profile_id:
            hidx = sum(1 for k, c in enumerate(cites, start=1) if c >= k)
            i10 = sum(1 for c in cites if c > 10)
            chunks = [pubs[i:i + 20] for i in range(0, len(pubs), 20)]
            for k, chunk in enumerate(chunks, start=1):
                rel = f"{f.scholar_profile_id}/page-{k}.html"
                pages[rel] = render_profile_page(
                    f.scholar_profile_id, [(t, f"{c:,}") for t, c in chunk],
                    h_index=hidx, i10=i10, has_more=k < len(chunks),
                )
                truth["pages"][rel] = {
                    "profile_id": f.scholar_profile_id, "h_index": hidx, "i10": i10,
                    "has_more": k < len(chunks),
                    "publications": [{"title": t, "citations": c} for t, c in chunk],
                }
            truth["profiles"][f.scholar_profile_id] = {
                "n_publications": n_pubs, "t10": derive_t10(cites), "h_index": hidx, "i10": i10,
            }
        else:
            query = search_query(f)
            rel = f"search/{query_hash(query)}.html"
            pages[rel] = render_search_page((), pubs)
            truth["search"][query] = {
                "file": rel, "candidates": [],
                "publications": [{"title": t, "citations": c} for t, c in pubs],
                "t10": derive_t10(cites),
            }
        updated.append(replace(f, t10=None, h_index=None, i10=None))
    return snapshot.with_faculty(updated), pages, truth


def write_dataset(out: str | Path, seed: int = 0) -> list[Path]:
    """Write the bundled dataset layout under *out*; returns written paths."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed + 1)
    early, late, _ = generate_snapshots(seed)
    usn17 = usn_scores(early, rng, 2017)
    usn22 = usn_scores(late, rng, 2022)
    csr = csrankings_scores(usn22, rng)
    late_missing, pages, truth = _strip_for_harvest(late, rng, 6)

    written = []
    for name, snap in (("roster_2017", early), ("roster_2022", late_missing)):
        path = save_snapshot(replace(snap, label=name.split("_")[1]), out)
        written.append(path)
    for name, table in (("usn_2017.csv", usn17), ("usn_2022.csv", usn22), ("csrankings.csv", csr)):
        (out / name).write_bytes(serialize_score_table(table))
        written.append(out / name)
    fit_metrics, fit_usn = noiseless_fit_data(seed)
    (out / "fit_metrics.csv").write_bytes(serialize_metrics(fit_metrics))
    (out / "fit_usn.csv").write_bytes(serialize_score_table(fit_usn))
    written += [out / "fit_metrics.csv", out / "fit_usn.csv"]
    for rel, text in sorted(pages.items()):
        path = out / "fixtures" / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        written.append(path)
    truth_path = out / "fixtures" / "expected.json"
    truth_path.write_text(json.dumps(truth, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                          encoding="utf-8")
    written.append(truth_path)
    return written


def bundled_dataset_dir() -> Path:
    return Path(__file__).parent / "data" / "synthetic"
