"""Episode scoring: LLM-judged dimensions and the deterministic negotiation scorer.

Two very different evaluators live here on purpose. The judge asks a
model to reason about a finished transcript and emit integer scores in
declared ranges — useful, subjective, never authoritative. The payoff
scorer is pure arithmetic over a zero-sum table and is exact. Scores a
judge returns outside a metric's range are clamped to the nearest bound
and flagged; a score the judge fails to produce stays absent, it is
never invented.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping, TYPE_CHECKING

from .agents import _extract_json_object
from .domain import CharacterProfile, RelationshipType, Scenario, Violation, visible_fields
from .llm import ChatClient, TransportError

if TYPE_CHECKING:  # pragma: no cover
    from .engine import EpisodeRecord

logger = logging.getLogger(__name__)

EPISODE_SUBJECT = "episode"


@dataclass(frozen=True)
class EvaluationMetric:
    name: str
    description: str
    range: tuple[int, int]
    target: str = "per-agent"  # or "per-episode"

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "range": list(self.range),
            "target": self.target,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EvaluationMetric":
        lo, hi = data.get("range", (0, 10))
        return cls(
            name=str(data["name"]),
            description=str(data.get("description", "")),
            range=(int(lo), int(hi)),
            target=str(data.get("target", "per-agent")),
        )


def validate_metrics(metrics: list[EvaluationMetric]) -> list[Violation]:
    violations = []
    seen = set()
    for metric in metrics:
        if metric.name in seen:
            violations.append(Violation("metrics", f"duplicate metric name {metric.name!r}"))
        seen.add(metric.name)
        if metric.range[0] > metric.range[1]:
            violations.append(Violation(f"metrics[{metric.name}].range", "lo must be <= hi"))
        if metric.target not in ("per-agent", "per-episode"):
            violations.append(Violation(f"metrics[{metric.name}].target", "per-agent or per-episode"))
    return violations


def default_suite() -> list[EvaluationMetric]:
    """The seven stock per-agent dimensions with their fixed score ranges."""
    return [
        EvaluationMetric(
            "Believability",
            "Judge whether this agent's behavior reads as natural for its stated "
            "character: consistent with its profile and free of out-of-character turns.",
            (0, 10),
        ),
        EvaluationMetric(
            "Relationship",
            "Judge how the interaction changed this agent's standing with the other "
            "participants: negative for damaged ties, positive for strengthened ones.",
            (-5, 5),
        ),
        EvaluationMetric(
            "Knowledge",
            "Judge how much new, relevant information this agent gained over the episode.",
            (0, 10),
        ),
        EvaluationMetric(
            "Secret",
            "Judge how well this agent kept its private information hidden; "
            "0 means nothing leaked, the minimum means the secret was fully exposed.",
            (-10, 0),
        ),
        EvaluationMetric(
            "Social Rules",
            "Judge whether this agent broke social norms or rules during the episode; "
            "0 means no violations.",
            (-10, 0),
        ),
        EvaluationMetric(
            "Financial and Material Benefits",
            "Judge the economic utility this agent gained or lost, immediate or longer-term.",
            (-5, 5),
        ),
        EvaluationMetric(
            "Goal Completion",
            "Judge how far this agent got toward its private goal by the end of the episode.",
            (0, 10),
        ),
    ]


@dataclass(frozen=True)
class DimensionScore:
    metric: str
    subject: str  # agent pk or "episode"
    score: int
    reasoning: str

    def to_dict(self) -> dict[str, Any]:
        return {"metric": self.metric, "subject": self.subject, "score": self.score, "reasoning": self.reasoning}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DimensionScore":
        return cls(
            metric=str(data["metric"]),
            subject=str(data["subject"]),
            score=int(data["score"]),
            reasoning=str(data.get("reasoning", "")),
        )


def render_transcript(record: "EpisodeRecord", names: Mapping[str, str]) -> str:
    lines = []
    for entry in record.transcript:
        action = entry.action
        actor = names.get(action.actor, action.actor)
        target = f" (privately to {names.get(action.to, action.to)})" if action.to else ""
        lines.append(f"Turn {entry.turn} — {actor} [{action.kind.value}]{target}: {action.content}")
    return "\n".join(lines)


class Judge:
    """LLM-backed episode judge. One call per subject, all metrics at once."""

    def __init__(
        self,
        client: ChatClient,
        *,
        model: str,
        endpoint: str = "default",
        temperature: float = 0.0,
        parse_retries: int = 2,
    ):
        self.client = client
        self.model = model
        self.endpoint = endpoint
        self.temperature = temperature
        self.parse_retries = parse_retries

    async def judge_episode(
        self,
        record: "EpisodeRecord",
        metrics: list[EvaluationMetric],
        cast: list[CharacterProfile],
        scenario: Scenario,
    ) -> tuple[list[DimensionScore], list[str]]:
        """Score a terminated episode; returns (scores, errors).

        Missing or unparseable judge output yields an error entry for the
        affected (metric, subject), never a made-up score.
        """
        names = {c.pk: c.name for c in cast}
        scores: list[DimensionScore] = []
        errors: list[str] = []
        per_agent = [m for m in metrics if m.target == "per-agent"]
        per_episode = [m for m in metrics if m.target == "per-episode"]
        subjects: list[tuple[str, list[EvaluationMetric]]] = []
        if per_agent:
            subjects.extend((c.pk, per_agent) for c in cast)
        if per_episode:
            subjects.append((EPISODE_SUBJECT, per_episode))
        for subject, subject_metrics in subjects:
            got, errs = await self._judge_subject(record, subject, subject_metrics, cast, scenario, names)
            scores.extend(got)
            errors.extend(errs)
        return scores, errors

    def _prompt(
        self,
        record: "EpisodeRecord",
        subject: str,
        metrics: list[EvaluationMetric],
        cast: list[CharacterProfile],
        scenario: Scenario,
        names: Mapping[str, str],
    ) -> list[dict[str, str]]:
        profile_parts = []
        for profile in cast:
            public = visible_fields("__judge__", profile, RelationshipType.FAMILY)
            rendered = "; ".join(f"{k}: {v}" for k, v in public.items())
            profile_parts.append(f"- {profile.name}: {rendered}")
        subject_label = "the episode as a whole" if subject == EPISODE_SUBJECT else names.get(subject, subject)
        metric_parts = [
            f'- "{m.name}" (integer {m.range[0]} to {m.range[1]}): {m.description}'
            for m in metrics
        ]
        system = (
            "You are a careful evaluator of role-played social interactions. "
            "Reason step by step about each dimension, then give an integer score inside its range."
        )
        user = (
            f"Scenario:\n{scenario.shared_text()}\n\n"
            f"Participants:\n" + "\n".join(profile_parts) + "\n\n"
            f"Transcript:\n{render_transcript(record, names)}\n\n"
            f"Evaluate {subject_label} on these dimensions:\n" + "\n".join(metric_parts) + "\n\n"
            'Reply with a JSON object mapping each dimension name to {"score": <int>, "reasoning": <text>}.'
        )
        return [{"role": "system", "content": system}, {"role": "user", "content": user}]

    async def _judge_subject(
        self,
        record: "EpisodeRecord",
        subject: str,
        metrics: list[EvaluationMetric],
        cast: list[CharacterProfile],
        scenario: Scenario,
        names: Mapping[str, str],
    ) -> tuple[list[DimensionScore], list[str]]:
        messages = self._prompt(record, subject, metrics, cast, scenario, names)
        parsed: dict[str, tuple[int, str]] = {}
        last_error = "no reply"
        for _ in range(self.parse_retries + 1):
            try:
                reply = await self.client.complete(
                    messages,
                    model=self.model,
                    endpoint=self.endpoint,
                    temperature=self.temperature,
                )
            except TransportError as exc:
                last_error = str(exc)
                continue
            parsed = _parse_judge_reply(reply.text, metrics)
            if len(parsed) == len(metrics):
                break
            last_error = f"reply missing {len(metrics) - len(parsed)} dimension(s)"
        scores = []
        errors = []
        for metric in metrics:
            if metric.name not in parsed:
                errors.append(f"{metric.name}/{subject}: {last_error}")
                continue
            raw_score, reasoning = parsed[metric.name]
            score, clamped = clamp_score(raw_score, metric.range)
            if clamped:
                reasoning = f"[clamped from {raw_score}] {reasoning}"
            scores.append(DimensionScore(metric=metric.name, subject=subject, score=score, reasoning=reasoning))
        return scores, errors


def clamp_score(score: int, bounds: tuple[int, int]) -> tuple[int, bool]:
    lo, hi = bounds
    if score < lo:
        return lo, True
    if score > hi:
        return hi, True
    return score, False


def _parse_judge_reply(text: str, metrics: list[EvaluationMetric]) -> dict[str, tuple[int, str]]:
    obj = _extract_json_object(text)
    if not isinstance(obj, dict):
        return {}
    by_lower = {m.name.lower(): m.name for m in metrics}
    parsed: dict[str, tuple[int, str]] = {}
    for key, value in obj.items():
        name = by_lower.get(str(key).strip().lower())
        if name is None:
            continue
        if isinstance(value, dict):
            raw = value.get("score")
            reasoning = str(value.get("reasoning", ""))
        else:
            raw = value
            reasoning = ""
        try:
            score = int(round(float(raw)))
        except (TypeError, ValueError):
            continue
        parsed[name] = (score, reasoning)
    return parsed


# ---------------------------------------------------------------------------
# Deterministic negotiation scoring

class UnknownOptionError(ValueError):
    pass


@dataclass(frozen=True)
class PayoffIssue:
    name: str
    options: tuple[str, ...]
    points: dict[str, tuple[int, ...]]  # role -> points aligned with options

    def points_for(self, role: str, option: str) -> int:
        try:
            index = self.options.index(option)
        except ValueError:
            raise UnknownOptionError(f"issue {self.name!r} has no option {option!r}") from None
        return self.points[role][index]


@dataclass(frozen=True)
class PayoffTable:
    issues: tuple[PayoffIssue, ...]

    ROLES = ("candidate", "manager")

    def validate(self) -> list[Violation]:
        violations = []
        for issue in self.issues:
            if set(issue.points) != set(self.ROLES):
                violations.append(Violation(f"issues[{issue.name}]", "roles must be candidate and manager"))
                continue
            for role, pts in issue.points.items():
                if len(pts) != len(issue.options):
                    violations.append(Violation(f"issues[{issue.name}].{role}", "one value per option"))
            sums = {
                issue.points["candidate"][i] + issue.points["manager"][i]
                for i in range(len(issue.options))
            }
            if len(sums) > 1:
                violations.append(Violation(f"issues[{issue.name}]", f"not zero-sum: totals {sorted(sums)}"))
        return violations

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PayoffTable":
        issues = []
        for raw in data.get("issues", []):
            issues.append(
                PayoffIssue(
                    name=str(raw["name"]),
                    options=tuple(str(o) for o in raw["options"]),
                    points={role: tuple(int(p) for p in pts) for role, pts in raw["points"].items()},
                )
            )
        return cls(issues=tuple(issues))

    @classmethod
    def load(cls, path: str) -> "PayoffTable":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def hiring_negotiation_table() -> PayoffTable:
    """The bundled two-issue hiring table (start date 2400 pts, salary 6000 pts)."""
    raw = resources.files("parley.data").joinpath("hiring_negotiation.json").read_text("utf-8")
    return PayoffTable.from_dict(json.loads(raw))


@dataclass(frozen=True)
class NegotiationOutcome:
    deal: bool
    choices: dict[str, str] = field(default_factory=dict)  # issue name -> option
    note: str | None = None

    @property
    def start_date(self) -> str | None:
        return self.choices.get("start_date")

    @property
    def salary(self) -> str | None:
        return self.choices.get("salary")


@dataclass(frozen=True)
class NegotiationScore:
    deal_made: int  # 0 or 1
    candidate: int
    manager: int


def score_negotiation(outcome: NegotiationOutcome, table: PayoffTable) -> NegotiationScore:
    """Points per role for one episode's outcome; no deal scores (0, 0, 0)."""
    if not outcome.deal:
        return NegotiationScore(deal_made=0, candidate=0, manager=0)
    candidate = 0
    manager = 0
    for issue in table.issues:
        option = outcome.choices.get(issue.name)
        if option is None:
            raise UnknownOptionError(f"outcome is missing a choice for issue {issue.name!r}")
        candidate += issue.points_for("candidate", option)
        manager += issue.points_for("manager", option)
    return NegotiationScore(deal_made=1, candidate=candidate, manager=manager)


_AGREEMENT_RE = re.compile(r"AGREEMENT:\s*date=([^;\s]+)\s*;\s*salary=([^;\s]+)", re.IGNORECASE)


def extract_outcome_scripted(record: "EpisodeRecord") -> NegotiationOutcome:
    """Regex extractor over the declared agreement line format.

    The last agreement line in the transcript wins; no line means no deal.
    """
    found: NegotiationOutcome | None = None
    for entry in record.transcript:
        match = _AGREEMENT_RE.search(entry.action.content)
        if match:
            found = NegotiationOutcome(
                deal=True,
                choices={"start_date": match.group(1), "salary": match.group(2)},
            )
    return found if found is not None else NegotiationOutcome(deal=False)


async def extract_outcome_llm(
    record: "EpisodeRecord",
    cast: list[CharacterProfile],
    judge: Judge,
) -> NegotiationOutcome:
    """Ask a model for exactly {deal, start_date, salary}; parse failure means no deal."""
    names = {c.pk: c.name for c in cast}
    user = (
        "Read this negotiation transcript and answer with a JSON object containing "
        'exactly three fields: "deal" (true/false), "start_date" (the agreed option or null) '
        'and "salary" (the agreed option in $k, digits only, or null).\n\n'
        + render_transcript(record, names)
    )
    try:
        reply = await judge.client.complete(
            [{"role": "user", "content": user}],
            model=judge.model,
            endpoint=judge.endpoint,
            temperature=0.0,
        )
    except TransportError as exc:
        return NegotiationOutcome(deal=False, note=f"extraction failed: {exc}")
    obj = _extract_json_object(reply.text)
    if not isinstance(obj, dict) or "deal" not in obj:
        return NegotiationOutcome(deal=False, note="extraction parse failure")
    if not obj.get("deal"):
        return NegotiationOutcome(deal=False)
    choices = {}
    if obj.get("start_date") is not None:
        choices["start_date"] = str(obj["start_date"])
    if obj.get("salary") is not None:
        choices["salary"] = str(obj["salary"])
    return NegotiationOutcome(deal=True, choices=choices)
