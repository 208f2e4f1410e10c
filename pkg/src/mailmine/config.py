"""Pipeline configuration: JSON file format with strict unknown-key rejection.

Every tunable the paper leaves to "experimental sensitivity analysis" lives
here: field weights per phase, the subject boost, cut targets, the k sweep.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

from .cluster.distance import DistanceSpec
from .errors import ConfigError
from .pipeline import CutTarget
from .textprep import BoostConfig, CleansingConfig, default_stopwords, load_stopwords


def _take(raw: dict, allowed: dict[str, object], where: str) -> dict:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key '{where}.{unknown[0]}'" if where else f"unknown key '{unknown[0]}'")
    merged = dict(allowed)
    merged.update(raw)
    return merged


def _distance_from_dict(raw: dict, where: str, defaults: dict) -> DistanceSpec:
    merged = _take(raw, defaults, where)
    return DistanceSpec(
        w_subject=float(merged["w_subject"]),
        w_body=float(merged["w_body"]),
        w_time=float(merged["w_time"]),
        t_max=timedelta(days=float(merged["t_max_days"])),
        use_synonyms=bool(merged["use_synonyms"]),
        w_participants=float(merged["w_participants"]),
    )


def _distance_to_dict(spec: DistanceSpec) -> dict:
    return {
        "w_subject": spec.w_subject,
        "w_body": spec.w_body,
        "w_time": spec.w_time,
        "t_max_days": spec.t_max.total_seconds() / 86400.0,
        "use_synonyms": spec.use_synonyms,
        "w_participants": spec.w_participants,
    }


def _cut_from_dict(raw: dict, where: str) -> CutTarget:
    merged = _take(raw, {"k": None, "height": None}, where)
    return CutTarget(
        k=None if merged["k"] is None else int(merged["k"]),
        height=None if merged["height"] is None else float(merged["height"]),
    )


def _cut_to_dict(target: CutTarget) -> dict:
    return {"k": target.k, "height": target.height}


TOPIC_DISTANCE_DEFAULTS = {
    "w_subject": 0.05,
    "w_body": 0.95,
    "w_time": 0.0,
    "t_max_days": 14.0,
    "use_synonyms": False,
    "w_participants": 0.0,
}
INSTANCE_DISTANCE_DEFAULTS = {
    "w_subject": 0.2,
    "w_body": 0.4,
    "w_time": 0.4,
    "t_max_days": 14.0,
    "use_synonyms": False,
    "w_participants": 0.0,
}
ACTIVITY_DISTANCE_DEFAULTS = {
    "w_subject": 0.3,
    "w_body": 0.7,
    "w_time": 0.0,
    "t_max_days": 14.0,
    "use_synonyms": True,
    "w_participants": 0.0,
}


@dataclass(frozen=True)
class PipelineConfig:
    cleansing: CleansingConfig = field(default_factory=CleansingConfig)
    stopwords_path: str | None = None
    boost: BoostConfig = field(default_factory=BoostConfig)
    topic_distance: DistanceSpec = field(
        default_factory=lambda: _distance_from_dict({}, "topic_distance", TOPIC_DISTANCE_DEFAULTS)
    )
    instance_distance: DistanceSpec = field(
        default_factory=lambda: _distance_from_dict({}, "instance_distance", INSTANCE_DISTANCE_DEFAULTS)
    )
    activity_distance: DistanceSpec = field(
        default_factory=lambda: _distance_from_dict({}, "activity_distance", ACTIVITY_DISTANCE_DEFAULTS)
    )
    topic_cut: CutTarget = field(default_factory=CutTarget)
    instance_cut: CutTarget = field(default_factory=CutTarget)
    k_sweep_radius: int = 2
    activity_k: int | None = None
    seed_instance: int | None = None
    synonyms_path: str | None = None
    receiver_delimiter: str = ";"

    def to_dict(self) -> dict:
        return {
            "cleansing": {
                "stopwords_path": self.stopwords_path,
                "remove_numbers": self.cleansing.remove_numbers,
                "remove_punctuation": self.cleansing.remove_punctuation,
                "lowercase": self.cleansing.lowercase,
                "min_token_length": self.cleansing.min_token_length,
            },
            "boost": {"subject_term_weight": self.boost.subject_term_weight},
            "topic_distance": _distance_to_dict(self.topic_distance),
            "instance_distance": _distance_to_dict(self.instance_distance),
            "activity_distance": _distance_to_dict(self.activity_distance),
            "topic_cut": _cut_to_dict(self.topic_cut),
            "instance_cut": _cut_to_dict(self.instance_cut),
            "k_sweep_radius": self.k_sweep_radius,
            "activity_k": self.activity_k,
            "seed_instance": self.seed_instance,
            "synonyms_path": self.synonyms_path,
            "receiver_delimiter": self.receiver_delimiter,
        }

    @staticmethod
    def from_dict(raw: dict) -> "PipelineConfig":
        top_defaults = {
            "cleansing": {},
            "boost": {},
            "topic_distance": {},
            "instance_distance": {},
            "activity_distance": {},
            "topic_cut": {},
            "instance_cut": {},
            "k_sweep_radius": 2,
            "activity_k": None,
            "seed_instance": None,
            "synonyms_path": None,
            "receiver_delimiter": ";",
        }
        merged = _take(raw, top_defaults, "")

        cdefaults = {
            "stopwords_path": None,
            "remove_numbers": True,
            "remove_punctuation": True,
            "lowercase": True,
            "min_token_length": 2,
        }
        craw = _take(merged["cleansing"], cdefaults, "cleansing")
        stopwords = (
            load_stopwords(craw["stopwords_path"])
            if craw["stopwords_path"]
            else default_stopwords()
        )
        cleansing = CleansingConfig(
            stopwords=stopwords,
            remove_numbers=bool(craw["remove_numbers"]),
            remove_punctuation=bool(craw["remove_punctuation"]),
            lowercase=bool(craw["lowercase"]),
            min_token_length=int(craw["min_token_length"]),
        )
        braw = _take(merged["boost"], {"subject_term_weight": 2.0}, "boost")
        return PipelineConfig(
            cleansing=cleansing,
            stopwords_path=craw["stopwords_path"],
            boost=BoostConfig(subject_term_weight=float(braw["subject_term_weight"])),
            topic_distance=_distance_from_dict(
                merged["topic_distance"], "topic_distance", TOPIC_DISTANCE_DEFAULTS
            ),
            instance_distance=_distance_from_dict(
                merged["instance_distance"], "instance_distance", INSTANCE_DISTANCE_DEFAULTS
            ),
            activity_distance=_distance_from_dict(
                merged["activity_distance"], "activity_distance", ACTIVITY_DISTANCE_DEFAULTS
            ),
            topic_cut=_cut_from_dict(merged["topic_cut"], "topic_cut"),
            instance_cut=_cut_from_dict(merged["instance_cut"], "instance_cut"),
            k_sweep_radius=int(merged["k_sweep_radius"]),
            activity_k=None if merged["activity_k"] is None else int(merged["activity_k"]),
            seed_instance=None if merged["seed_instance"] is None else int(merged["seed_instance"]),
            synonyms_path=merged["synonyms_path"],
            receiver_delimiter=str(merged["receiver_delimiter"]),
        )

    @staticmethod
    def load(path: str | Path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        return PipelineConfig.from_dict(raw)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")
