"""Statistical procedures for the reading-study evaluation.

Implements the study's full battery over CSV inputs: inter-rater
reliability (Krippendorff's alpha via the coincidence matrix), rank
comparisons (Mann-Whitney U with midrank ties, exact distribution for
small problems, tie-corrected normal approximation otherwise),
proportions (Pearson chi-square), family-wise correction (Bonferroni),
equivalence (Welch two one-sided t-tests), and the paragraph-distance
grouping. Everything is a pure function; nothing touches global state.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from scipy.stats import t as t_dist

from .errors import DegenerateTable, EmptySample, InsufficientData

DISTANCE_GROUPS = ("within_caption", "2P", "3P", "4P", "very_far")


@dataclass(frozen=True)
class CorrectionInfo:
    method: str
    family_size: int
    adjusted_p: float


@dataclass(frozen=True)
class StatReport:
    test_name: str
    statistic: float
    p_value: float
    effect_size: float | None = None
    n_per_group: tuple[int, int] | None = None
    correction: CorrectionInfo | None = None
    method: str | None = None

    def to_dict(self) -> dict:
        out = {
            "test": self.test_name,
            "statistic": self.statistic,
            "p_value": self.p_value,
        }
        if self.effect_size is not None:
            out["effect_size"] = self.effect_size
        if self.n_per_group is not None:
            out["n_per_group"] = list(self.n_per_group)
        if self.method is not None:
            out["method"] = self.method
        if self.correction is not None:
            out["correction"] = {
                "method": self.correction.method,
                "family_size": self.correction.family_size,
                "adjusted_p": self.correction.adjusted_p,
            }
        return out


# --- Krippendorff's alpha ------------------------------------------------------

def _delta_squared(level: str, categories: list[float],
                   margins: dict[float, float]):
    """Difference metric per level of measurement, squared."""
    if level == "nominal":
        return lambda c, k: 0.0 if c == k else 1.0
    if level == "interval":
        return lambda c, k: (c - k) ** 2
    if level == "ordinal":
        order = {c: i for i, c in enumerate(categories)}

        def ordinal(c, k):
            lo, hi = sorted((order[c], order[k]))
            between = sum(margins[categories[g]] for g in range(lo, hi + 1))
            return (between - (margins[c] + margins[k]) / 2.0) ** 2

        return ordinal
    raise ValueError(f"unknown level {level!r}")


def krippendorff_alpha(
    ratings: list[list[float | None]], level: str = "nominal"
) -> float:
    """Agreement coefficient over a units-by-raters matrix with missing cells.

    Rows are units, columns raters, None marks a missing rating. Units
    with fewer than two ratings cannot disagree and are excluded. With no
    observed variation the coefficient is 1.0 by convention.
    """
    if not ratings or max((len(row) for row in ratings), default=0) < 2:
        raise InsufficientData("need at least two raters")
    units = [
        [v for v in row if v is not None]
        for row in ratings
    ]
    pairable = [u for u in units if len(u) >= 2]
    if not pairable:
        raise InsufficientData("no unit carries two or more ratings")

    categories = sorted({v for u in pairable for v in u})
    margins = {c: 0.0 for c in categories}
    coincidence = {c: {k: 0.0 for k in categories} for c in categories}
    for unit in pairable:
        m_u = len(unit)
        for i, c in enumerate(unit):
            for j, k in enumerate(unit):
                if i != j:
                    coincidence[c][k] += 1.0 / (m_u - 1)
    for c in categories:
        margins[c] = sum(coincidence[c].values())
    n = sum(margins.values())

    delta = _delta_squared(level, categories, margins)
    observed = sum(
        coincidence[c][k] * delta(c, k)
        for c in categories for k in categories
    ) / n
    expected = sum(
        margins[c] * margins[k] * delta(c, k)
        for c in categories for k in categories
    ) / (n * (n - 1))
    if expected == 0.0:
        return 1.0
    return 1.0 - observed / expected


# --- Mann-Whitney U ---------------------------------------------------------------

def _midranks(pooled: list[float]) -> list[float]:
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        midrank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = midrank
        i = j + 1
    return ranks


def _exact_two_sided_p(ranks: list[float], n: int, u_observed: float) -> float:
    """Exact permutation p over all size-n subsets, via a subset-sum count.

    Midranks are doubled so every weight is an integer; the distribution
    of U is symmetric about nm/2, so extremes are counted on both sides.
    """
    total = len(ranks)
    m = total - n
    weights = [int(round(2 * r)) for r in ranks]
    max_sum = sum(weights)
    # counts[k][s] = number of size-k subsets with doubled rank sum s
    counts = [[0] * (max_sum + 1) for _ in range(n + 1)]
    counts[0][0] = 1
    for w in weights:
        for k in range(n, 0, -1):
            row_prev = counts[k - 1]
            row = counts[k]
            for s in range(max_sum - w, -1, -1):
                if row_prev[s]:
                    row[s + w] += row_prev[s]
    # doubled U = doubled rank sum - n(n+1)
    shift = n * (n + 1)
    u2_observed = int(round(2 * u_observed))
    u2_max = 2 * n * m
    hi = max(u2_observed, u2_max - u2_observed)
    lo = u2_max - hi
    extreme = 0
    total_count = 0
    for s, c in enumerate(counts[n]):
        if not c:
            continue
        u2 = s - shift
        total_count += c
        if u2 >= hi or u2 <= lo:
            extreme += c
    return min(1.0, extreme / total_count)


def _normal_two_sided_p(ranks: list[float], n: int, m: int, u: float) -> float:
    pooled_n = n + m
    mu = n * m / 2.0
    tie_counts: dict[float, int] = {}
    for r in ranks:
        tie_counts[r] = tie_counts.get(r, 0) + 1
    tie_term = sum(c ** 3 - c for c in tie_counts.values())
    variance = (n * m / 12.0) * (
        (pooled_n + 1) - tie_term / (pooled_n * (pooled_n - 1))
    )
    if variance <= 0:
        return 1.0
    diff = u - mu
    if diff > 0:
        diff -= 0.5
    elif diff < 0:
        diff += 0.5
    z = diff / math.sqrt(variance)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def mann_whitney_u(
    a: list[float], b: list[float], method: str = "auto"
) -> StatReport:
    """Two-sided Mann-Whitney U with midrank ties.

    The statistic is U of the first sample; the rank-biserial effect is
    r = 1 - 2U/(nm), so r is negative when the first sample is
    stochastically larger. ``method`` is "auto" (exact when nm <= 400),
    "exact", or "normal".
    """
    if not a or not b:
        raise EmptySample("both samples must be non-empty")
    n, m = len(a), len(b)
    pooled = list(a) + list(b)
    ranks = _midranks(pooled)
    rank_sum_a = sum(ranks[:n])
    u = rank_sum_a - n * (n + 1) / 2.0
    r = 1.0 - 2.0 * u / (n * m)

    if method == "auto":
        method = "exact" if n * m <= 400 else "normal"
    if method == "exact":
        p = _exact_two_sided_p(ranks, n, u)
    elif method == "normal":
        p = _normal_two_sided_p(ranks, n, m, u)
    else:
        raise ValueError(f"unknown method {method!r}")
    return StatReport(
        test_name="mann_whitney_u",
        statistic=u,
        p_value=p,
        effect_size=r,
        n_per_group=(n, m),
        method=method,
    )


# --- chi-square on a 2x2 table ------------------------------------------------------

def chi_square_proportions(table: list[list[float]]) -> StatReport:
    """Pearson chi-square with 1 dof, no continuity correction."""
    if len(table) != 2 or any(len(row) != 2 for row in table):
        raise DegenerateTable("expected a 2x2 table")
    rows = [sum(row) for row in table]
    cols = [table[0][j] + table[1][j] for j in range(2)]
    total = sum(rows)
    if total <= 0 or any(r <= 0 for r in rows) or any(c <= 0 for c in cols):
        raise DegenerateTable("every expected cell count must be positive")
    statistic = 0.0
    for i in range(2):
        for j in range(2):
            expected = rows[i] * cols[j] / total
            statistic += (table[i][j] - expected) ** 2 / expected
    # chi-square survival with 1 dof
    p = math.erfc(math.sqrt(statistic / 2.0))
    return StatReport(
        test_name="chi_square_1dof",
        statistic=statistic,
        p_value=p,
        n_per_group=(int(rows[0]), int(rows[1])),
    )


# --- Bonferroni --------------------------------------------------------------------

def bonferroni_adjust(p_values: list[float], family_size: int) -> list[float]:
    """min(1, p * m) per value; m must cover the whole family."""
    if family_size < len(p_values):
        raise ValueError("family size smaller than the number of p-values")
    return [min(1.0, p * family_size) for p in p_values]


# --- TOST equivalence ----------------------------------------------------------------

def _welch(a: list[float], b: list[float]) -> tuple[float, float, float]:
    na, nb = len(a), len(b)
    ma = sum(a) / na
    mb = sum(b) / nb
    va = sum((x - ma) ** 2 for x in a) / (na - 1)
    vb = sum((x - mb) ** 2 for x in b) / (nb - 1)
    se_sq = va / na + vb / nb
    if se_sq == 0.0:
        return ma - mb, 0.0, float(na + nb - 2)
    df = se_sq ** 2 / (
        (va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)
    )
    return ma - mb, math.sqrt(se_sq), df


def tost_equivalence(a: list[float], b: list[float], margin: float) -> StatReport:
    """Welch two one-sided tests against a symmetric equivalence margin.

    Reported p is the larger of the two one-sided p-values; small p means
    the mean difference is demonstrably inside (-margin, +margin).
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    if len(a) < 2 or len(b) < 2:
        raise InsufficientData("need at least two observations per sample")
    diff, se, df = _welch(a, b)
    if se == 0.0:
        p = 0.0 if abs(diff) < margin else 1.0
        return StatReport("tost_welch", statistic=0.0, p_value=p,
                          n_per_group=(len(a), len(b)))
    t_lower = (diff + margin) / se        # H0: diff <= -margin
    t_upper = (diff - margin) / se        # H0: diff >= +margin
    p_lower = float(t_dist.sf(t_lower, df))
    p_upper = float(t_dist.cdf(t_upper, df))
    if p_lower >= p_upper:
        statistic, p = t_lower, p_lower
    else:
        statistic, p = t_upper, p_upper
    return StatReport(
        test_name="tost_welch",
        statistic=statistic,
        p_value=p,
        n_per_group=(len(a), len(b)),
    )


# --- score tables and distance groups --------------------------------------------------

CONDITIONS = ("baseline", "experimental")


@dataclass(frozen=True)
class ScoreRow:
    participant: str
    condition: str
    question: int
    score: int
    annotator: str | None = None


@dataclass
class ScoreTable:
    """Flat score observations; rows with missing scores never enter."""

    rows: list[ScoreRow] = field(default_factory=list)

    @classmethod
    def from_csv(cls, path: str | Path) -> "ScoreTable":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for i, raw in enumerate(csv.DictReader(fh)):
                score_text = (raw.get("score") or "").strip()
                if not score_text:
                    continue  # ran out of time: removed from analysis
                condition = raw["condition"].strip()
                if condition not in CONDITIONS:
                    raise ValueError(
                        f"row {i}: condition must be one of {CONDITIONS}"
                    )
                score = int(score_text)
                if score not in (0, 1, 2):
                    raise ValueError(f"row {i}: score must be 0, 1, or 2")
                rows.append(ScoreRow(
                    participant=raw["participant"].strip(),
                    condition=condition,
                    question=int(raw["question"]),
                    score=score,
                    annotator=(raw.get("annotator") or "").strip() or None,
                ))
        return cls(rows)

    def questions(self) -> list[int]:
        return sorted({r.question for r in self.rows})

    def scores(self, condition: str, questions: set[int] | None = None) -> list[float]:
        return [
            float(r.score) for r in self.rows
            if r.condition == condition
            and (questions is None or r.question in questions)
        ]

    def reliability_matrix(self) -> list[list[float | None]]:
        """Units-by-raters matrix for inter-annotator agreement."""
        annotators = sorted({r.annotator for r in self.rows if r.annotator})
        if len(annotators) < 2:
            raise InsufficientData("need scores from at least two annotators")
        units: dict[tuple[str, str, int], dict[str, int]] = {}
        for r in self.rows:
            if r.annotator is None:
                continue
            units.setdefault(
                (r.participant, r.condition, r.question), {}
            )[r.annotator] = r.score
        return [
            [float(cell[a]) if a in cell else None for a in annotators]
            for _, cell in sorted(units.items())
        ]


@dataclass(frozen=True)
class DistanceGroupMap:
    """Question -> paragraph-distance group, a partition of the quiz."""

    question_to_group: dict[int, str]

    @classmethod
    def from_file(cls, path: str | Path) -> "DistanceGroupMap":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        mapping: dict[int, str] = {}
        for group, questions in data.items():
            if group not in DISTANCE_GROUPS:
                raise ValueError(
                    f"unknown distance group {group!r}; expected one of "
                    f"{DISTANCE_GROUPS}"
                )
            for q in questions:
                q = int(q)
                if q in mapping:
                    raise ValueError(f"question {q} assigned to two groups")
                mapping[q] = group
        return cls(mapping)

    def questions_in(self, group: str) -> set[int]:
        return {q for q, g in self.question_to_group.items() if g == group}


def distance_group_report(
    scores: ScoreTable, group_map: DistanceGroupMap
) -> dict[str, StatReport]:
    """Per-group rank test (experimental first) with Bonferroni over groups.

    The map must partition exactly the questions present in the table.
    """
    questions = set(scores.questions())
    mapped = set(group_map.question_to_group)
    if mapped != questions:
        missing = sorted(questions - mapped)
        stray = sorted(mapped - questions)
        raise ValueError(
            f"distance map must partition the questions exactly "
            f"(unmapped: {missing}, unknown: {stray})"
        )
    groups = [g for g in DISTANCE_GROUPS if group_map.questions_in(g)]
    raw: dict[str, StatReport] = {}
    for group in groups:
        qs = group_map.questions_in(group)
        raw[group] = mann_whitney_u(
            scores.scores("experimental", qs), scores.scores("baseline", qs)
        )
    adjusted = bonferroni_adjust([raw[g].p_value for g in groups], len(groups))
    out = {}
    for group, adj in zip(groups, adjusted):
        base = raw[group]
        out[group] = StatReport(
            test_name=base.test_name,
            statistic=base.statistic,
            p_value=base.p_value,
            effect_size=base.effect_size,
            n_per_group=base.n_per_group,
            method=base.method,
            correction=CorrectionInfo("bonferroni", len(groups), adj),
        )
    return out


# --- timing and workload tables ---------------------------------------------------------

@dataclass
class TimesTable:
    rows: list[tuple[str, str, int, float]] = field(default_factory=list)

    @classmethod
    def from_csv(cls, path: str | Path) -> "TimesTable":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for raw in csv.DictReader(fh):
                seconds_text = (raw.get("seconds") or "").strip()
                if not seconds_text:
                    continue
                rows.append((
                    raw["participant"].strip(),
                    raw["condition"].strip(),
                    int(raw["question"]),
                    float(seconds_text),
                ))
        return cls(rows)

    def seconds(self, condition: str, questions: set[int] | None = None) -> list[float]:
        return [
            s for _, c, q, s in self.rows
            if c == condition and (questions is None or q in questions)
        ]


TLX_DIMENSIONS = (
    "mental_demand", "physical_demand", "time_pressure",
    "performance", "effort", "frustration",
)


@dataclass
class TlxTable:
    rows: list[dict] = field(default_factory=list)

    @classmethod
    def from_csv(cls, path: str | Path) -> "TlxTable":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for raw in csv.DictReader(fh):
                row = {
                    "participant": raw["participant"].strip(),
                    "condition": raw["condition"].strip(),
                }
                for dim in TLX_DIMENSIONS:
                    row[dim] = float(raw[dim])
                rows.append(row)
        return cls(rows)

    def ratings(self, condition: str, dimension: str) -> list[float]:
        return [r[dimension] for r in self.rows if r["condition"] == condition]


# --- full study report --------------------------------------------------------------------

def build_study_report(
    scores: ScoreTable,
    group_map: DistanceGroupMap,
    times: TimesTable | None = None,
    tlx: TlxTable | None = None,
    *,
    alpha_level: str = "ordinal",
    tost_margin_seconds: float = 20.0,
) -> dict:
    """Run the whole battery and return a JSON-ready report."""
    report: dict = {"inputs": {
        "questions": scores.questions(),
        "alpha_level": alpha_level,
        "tost_margin_seconds": tost_margin_seconds,
    }}

    try:
        matrix = scores.reliability_matrix()
        report["reliability"] = {
            "krippendorff_alpha": krippendorff_alpha(matrix, level=alpha_level),
            "level": alpha_level,
        }
    except InsufficientData as exc:
        report["reliability"] = {"skipped": str(exc)}

    report["quality_overall"] = mann_whitney_u(
        scores.scores("experimental"), scores.scores("baseline")
    ).to_dict()

    questions = scores.questions()
    per_question = {}
    raw_reports = {
        q: mann_whitney_u(
            scores.scores("experimental", {q}), scores.scores("baseline", {q})
        )
        for q in questions
    }
    adjusted = bonferroni_adjust(
        [raw_reports[q].p_value for q in questions], len(questions)
    )
    for q, adj in zip(questions, adjusted):
        base = raw_reports[q]
        per_question[str(q)] = StatReport(
            test_name=base.test_name, statistic=base.statistic,
            p_value=base.p_value, effect_size=base.effect_size,
            n_per_group=base.n_per_group, method=base.method,
            correction=CorrectionInfo("bonferroni", len(questions), adj),
        ).to_dict()
    report["quality_per_question"] = per_question

    report["quality_by_distance"] = {
        group: rep.to_dict()
        for group, rep in distance_group_report(scores, group_map).items()
    }

    if times is not None:
        exp_all = times.seconds("experimental")
        base_all = times.seconds("baseline")
        report["time_overall"] = mann_whitney_u(exp_all, base_all).to_dict()
        report["time_equivalence"] = tost_equivalence(
            exp_all, base_all, tost_margin_seconds
        ).to_dict()
        by_group = {}
        for group in DISTANCE_GROUPS:
            qs = group_map.questions_in(group)
            if not qs:
                continue
            by_group[group] = mann_whitney_u(
                times.seconds("experimental", qs), times.seconds("baseline", qs)
            ).to_dict()
        report["time_by_distance"] = by_group

    if tlx is not None:
        tlx_out = {}
        for dim in TLX_DIMENSIONS:
            exp = tlx.ratings("experimental", dim)
            base = tlx.ratings("baseline", dim)
            tlx_out[dim] = {
                "comparison": mann_whitney_u(exp, base).to_dict(),
                "equivalence": tost_equivalence(exp, base, 1.0).to_dict(),
            }
        report["workload"] = tlx_out

    return report


def format_report_table(report: dict) -> str:
    """Aligned plain-text rendering of the headline numbers."""
    lines: list[str] = []

    def add(section: str, name: str, rep: dict) -> None:
        stat = rep.get("statistic")
        p = rep.get("p_value")
        r = rep.get("effect_size")
        adj = (rep.get("correction") or {}).get("adjusted_p")
        lines.append(
            f"{section:<22}{name:<16}"
            f"{stat:>10.3f}{p:>12.5g}"
            + (f"{r:>9.3f}" if r is not None else " " * 9)
            + (f"{adj:>12.5g}" if adj is not None else "")
        )

    lines.append(f"{'section':<22}{'case':<16}{'statistic':>10}{'p':>12}"
                 f"{'r':>9}{'p_adj':>12}")
    if "quality_overall" in report:
        add("quality", "overall", report["quality_overall"])
    for q, rep in report.get("quality_per_question", {}).items():
        add("quality/question", q, rep)
    for group, rep in report.get("quality_by_distance", {}).items():
        add("quality/distance", group, rep)
    if "time_overall" in report:
        add("time", "overall", report["time_overall"])
        add("time", "tost", report["time_equivalence"])
    for group, rep in report.get("time_by_distance", {}).items():
        add("time/distance", group, rep)
    for dim, pair in report.get("workload", {}).items():
        add("workload", dim, pair["comparison"])
        add("workload/tost", dim, pair["equivalence"])
    rel = report.get("reliability", {})
    if "krippendorff_alpha" in rel:
        lines.append(
            f"{'reliability':<22}{'alpha(' + rel['level'] + ')':<16}"
            f"{rel['krippendorff_alpha']:>10.3f}"
        )
    return "\n".join(lines)
