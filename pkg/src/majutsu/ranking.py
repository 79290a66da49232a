"""Pairwise comparison scheduling, TrueSkill rating updates, and leaderboards.

The AQS path averages 1-10 judge scores per (method, dimension); the RDR path
folds win/loss comparison records per dimension through TrueSkill and ranks
methods by the conservative score mu - 3*sigma.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyScores, TooFewMethods

DIMENSIONS = ("SVC", "SRC", "MTF", "LA")

MU_0 = 25.0
SIGMA_0 = 25.0 / 3.0
BETA = 25.0 / 6.0
TAU = 25.0 / 300.0

# reported RDR score is (mu - 3*sigma) + RDR_OFFSET; the offset keeps scores
# positive for near-prior ratings and never changes the ordering
RDR_OFFSET = SIGMA_0

MIN_PARTICIPATION = 10


@dataclass(frozen=True)
class Rating:
    mu: float = MU_0
    sigma: float = SIGMA_0
    beta: float = BETA
    tau: float = TAU

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")

    def conservative(self) -> float:
        return self.mu - 3.0 * self.sigma


@dataclass(frozen=True)
class ScoreSheet:
    method: str
    dimension: str
    scores: tuple[float, ...]

    def __post_init__(self):
        scores = tuple(float(s) for s in self.scores)
        for s in scores:
            if not 1.0 <= s <= 10.0:
                raise ValueError(f"score {s} outside [1, 10]")
        object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class ComparisonRecord:
    dimension: str
    image_a: str
    image_b: str
    method_a: str
    method_b: str
    winner: str  # "A" | "B"
    judge: str = ""
    timestamp: float = 0.0

    def __post_init__(self):
        if self.image_a == self.image_b:
            raise ValueError("a comparison needs two distinct images")
        if self.method_a == self.method_b:
            raise ValueError("a comparison needs two distinct methods")
        if self.winner not in ("A", "B"):
            raise ValueError("winner must be 'A' or 'B'")

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "image_a": self.image_a,
            "image_b": self.image_b,
            "method_a": self.method_a,
            "method_b": self.method_b,
            "winner": self.winner,
            "judge": self.judge,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_dict(obj: dict) -> "ComparisonRecord":
        return ComparisonRecord(**{k: obj[k] for k in obj if k in (
            "dimension", "image_a", "image_b", "method_a", "method_b", "winner", "judge", "timestamp"
        )})


def records_to_jsonl(records: list[ComparisonRecord]) -> str:
    return "\n".join(json.dumps(r.to_dict(), sort_keys=True) for r in records) + ("\n" if records else "")


def records_from_jsonl(text: str) -> list[ComparisonRecord]:
    return [
        ComparisonRecord.from_dict(json.loads(line))
        for line in text.splitlines()
        if line.strip()
    ]


# -- AQS ---------------------------------------------------------------------------


def aggregate_aqs(sheets: list[ScoreSheet]) -> dict[tuple[str, str], float]:
    """Mean judge score per (method, dimension)."""
    if not sheets:
        raise EmptyScores("no score sheets")
    buckets: dict[tuple[str, str], list[float]] = {}
    for sheet in sheets:
        if not sheet.scores:
            raise EmptyScores(f"empty sheet for {sheet.method}/{sheet.dimension}")
        buckets.setdefault((sheet.method, sheet.dimension), []).extend(sheet.scores)
    return {key: float(np.mean(vals)) for key, vals in sorted(buckets.items())}


def format_aqs_table(table: dict[tuple[str, str], float]) -> str:
    methods = sorted({m for m, _ in table})
    dims = [d for d in DIMENSIONS if any(k[1] == d for k in table)]
    lines = ["method," + ",".join(dims)]
    for m in methods:
        cells = [f"{table.get((m, d), float('nan')):.2f}" for d in dims]
        lines.append(m + "," + ",".join(cells))
    return "\n".join(lines)


# -- scheduling ----------------------------------------------------------------------


def schedule_comparisons(
    images_per_method: dict[str, list[str]],
    dimension: str,
    seed: int = 0,
    min_participation: int = MIN_PARTICIPATION,
) -> list[dict]:
    """Cross-method image pairs with every image in >= min_participation pairs.

    Method pairs rotate round-robin (full cycles, so per-method-pair counts
    stay equal); within a pair the least-compared image goes next, with a
    seeded shuffle breaking ties. Deterministic per seed.
    """
    methods = sorted(images_per_method)
    if len(methods) < 2:
        raise TooFewMethods(f"need >= 2 methods, got {len(methods)}")
    for m in methods:
        if not images_per_method[m]:
            raise ValueError(f"method {m!r} has no images")

    rng = np.random.default_rng(seed)
    tiebreak: dict[tuple[str, str], int] = {}
    for m in methods:
        order = list(images_per_method[m])
        rng.shuffle(order)
        for rank, img in enumerate(order):
            tiebreak[(m, img)] = rank

    participation = {
        (m, img): 0 for m in methods for img in images_per_method[m]
    }
    method_pairs = [
        (methods[i], methods[j])
        for i in range(len(methods))
        for j in range(i + 1, len(methods))
    ]

    def pick(method: str) -> str:
        return min(
            images_per_method[method],
            key=lambda img: (participation[(method, img)], tiebreak[(method, img)]),
        )

    schedule: list[dict] = []
    while min(participation.values()) < min_participation:
        for ma, mb in method_pairs:
            img_a = pick(ma)
            img_b = pick(mb)
            participation[(ma, img_a)] += 1
            participation[(mb, img_b)] += 1
            schedule.append(
                {
                    "index": len(schedule),
                    "dimension": dimension,
                    "method_a": ma,
                    "image_a": img_a,
                    "method_b": mb,
                    "image_b": img_b,
                }
            )
    return schedule


# -- TrueSkill -------------------------------------------------------------------------


def _phi(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def trueskill_update_pair(winner: Rating, loser: Rating) -> tuple[Rating, Rating]:
    """One win/loss update (eps = 0, no draws).

    Dynamics tau^2 is added to both variances first; then with
    c^2 = 2 beta^2 + s_w^2 + s_l^2 and t = (mu_w - mu_l)/c, the truncation
    moments v = phi(t)/Phi(t) and w = v (v + t) shift the means by
    (s^2/c) v and shrink each variance by its (s^2/c^2) w share.
    """
    var_w = winner.sigma**2 + winner.tau**2
    var_l = loser.sigma**2 + loser.tau**2
    c2 = 2.0 * winner.beta**2 + var_w + var_l
    c = math.sqrt(c2)
    t = (winner.mu - loser.mu) / c
    denom = _cdf(t)
    if denom < 1e-300:
        v = -t  # deep-tail limit of phi(t)/Phi(t)
    else:
        v = _phi(t) / denom
    w = v * (v + t)
    new_winner = replace(
        winner,
        mu=winner.mu + (var_w / c) * v,
        sigma=math.sqrt(var_w * (1.0 - (var_w / c2) * w)),
    )
    new_loser = replace(
        loser,
        mu=loser.mu - (var_l / c) * v,
        sigma=math.sqrt(var_l * (1.0 - (var_l / c2) * w)),
    )
    return new_winner, new_loser


# -- leaderboards -----------------------------------------------------------------------


@dataclass
class LeaderboardRow:
    method: str
    mu: float
    sigma: float
    wins: int = 0
    losses: int = 0

    @property
    def conservative(self) -> float:
        return self.mu - 3.0 * self.sigma

    @property
    def rdr_score(self) -> float:
        return self.conservative + RDR_OFFSET

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mu": self.mu,
            "sigma": self.sigma,
            "wins": self.wins,
            "losses": self.losses,
            "rdr_score": self.rdr_score,
        }


def rank_methods(
    records: list[ComparisonRecord],
    methods: list[str] | None = None,
    rating_params: Rating | None = None,
) -> dict[str, list[LeaderboardRow]]:
    """Timestamp-ordered TrueSkill fold per dimension.

    Rows sort by the conservative score mu - 3*sigma (descending), ties
    alphabetical. Methods without records sit at the prior.
    """
    params = rating_params or Rating()
    known = set(methods or [])
    for r in records:
        known.add(r.method_a)
        known.add(r.method_b)
    dims = sorted({r.dimension for r in records} | (set(DIMENSIONS) if methods else set()))

    boards: dict[str, list[LeaderboardRow]] = {}
    for dim in dims:
        ratings = {m: params for m in known}
        tallies = {m: [0, 0] for m in known}
        dim_records = sorted(
            (r for r in records if r.dimension == dim),
            key=lambda r: r.timestamp,
        )
        for rec in dim_records:
            win_method = rec.method_a if rec.winner == "A" else rec.method_b
            lose_method = rec.method_b if rec.winner == "A" else rec.method_a
            new_w, new_l = trueskill_update_pair(ratings[win_method], ratings[lose_method])
            ratings[win_method] = new_w
            ratings[lose_method] = new_l
            tallies[win_method][0] += 1
            tallies[lose_method][1] += 1
        rows = [
            LeaderboardRow(
                method=m,
                mu=ratings[m].mu,
                sigma=ratings[m].sigma,
                wins=tallies[m][0],
                losses=tallies[m][1],
            )
            for m in sorted(known)
        ]
        rows.sort(key=lambda r: (-r.conservative, r.method))
        boards[dim] = rows
    return boards
