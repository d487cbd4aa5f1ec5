"""Run configuration. Every knob lives in a pydantic model; a flat text file
of `key=value` lines overrides the defaults, with dotted keys reaching into
nested models (`grpo.group_size=8`)."""
import hashlib
import json
import pathlib
import typing as t

import pydantic

from genloop import errors
from genloop import generator as generator_
from genloop import gradecorpus
from genloop import policy as policy_
from genloop import rewardmodel
from genloop import trainers
from genloop.synthworld import splits


class HarnessConfig(pydantic.BaseModel):
    """Settings of the experiment suite."""
    model_config = pydantic.ConfigDict(frozen=True)

    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    top_k: tuple[int, ...] = (500, 1000, 2000, 4000)
    pool_size: int = pydantic.Field(default=11000, gt=0)
    """Generated pool the TopK and RandK subsets are drawn from."""
    taus: tuple[float, ...] = (-2.0, 0.0, 2.0, 4.0, 6.0, 8.0)
    transfer_axis: t.Literal['task', 'modality'] = 'task'
    transfer_size: int = pydantic.Field(default=400, gt=0)
    """Training samples per source domain."""
    ladder_size: int = pydantic.Field(default=1000, gt=0)
    """Training budget of every rung of the ablation ladder."""
    strategy_samples: int = pydantic.Field(default=2000, gt=0)

    @pydantic.field_validator('seeds')
    @classmethod
    def _check_seeds(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if len(value) < 3:
            raise ValueError('at least three seeds per condition')
        if len(set(value)) != len(value):
            raise ValueError('seeds must be distinct')
        return value

    @pydantic.field_validator('top_k')
    @classmethod
    def _check_top_k(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value or any(k <= 0 for k in value):
            raise ValueError('K values must be positive')
        return value


class LoopConfig(pydantic.BaseModel):
    """The closed loop and every stage it runs."""
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')

    name: str = 'default'
    """Run directory name under the output root."""
    seed: int = pydantic.Field(default=0, ge=0)
    """Master seed every stage seed is derived from."""
    iterations: int = pydantic.Field(default=3, ge=1)
    candidates: int = pydantic.Field(default=4000, gt=0)
    tau: float = 4.0
    """Admission threshold; a candidate needs a score strictly above it."""
    allow_overlap: bool = False
    seed_size: int = pydantic.Field(default=500, gt=0)
    pref_size: int = pydantic.Field(default=1000, ge=0)
    sft_from_scratch: bool = False

    split: splits.SplitConfig = splits.SplitConfig()
    grade: gradecorpus.GradeConfig = gradecorpus.GradeConfig()
    generator: generator_.GeneratorConfig = generator_.GeneratorConfig()
    reward: rewardmodel.RewardConfig = rewardmodel.RewardConfig()
    policy: policy_.PolicyConfig = policy_.PolicyConfig()
    sft: trainers.SftConfig = trainers.SftConfig()
    grpo: trainers.GrpoConfig = trainers.GrpoConfig()
    harness: HarnessConfig = HarnessConfig()

    @pydantic.field_validator('tau')
    @classmethod
    def _check_tau(cls, value: float) -> float:
        if not rewardmodel.SCORE_LOW <= value < rewardmodel.SCORE_HIGH:
            raise ValueError('tau must lie in [-6, 10)')
        return value

    @pydantic.field_validator('name')
    @classmethod
    def _check_name(cls, value: str) -> str:
        if not value or '/' in value or value.startswith('.'):
            raise ValueError(f'invalid run name {value!r}')
        return value

    @pydantic.model_validator(mode='after')
    def _check(self) -> 'LoopConfig':
        if self.seed_size > self.split.train:
            raise ValueError('seed_size exceeds the train split')
        if sum(self.grade.counts) > self.split.train:
            raise ValueError('graded corpus exceeds the train split')
        return self


def _field_model(
    model: type[pydantic.BaseModel],
    name: str,
) -> type[pydantic.BaseModel] | type[dict] | None:
    field = model.model_fields.get(name)
    if field is None:
        return None
    annotation = field.annotation
    if isinstance(annotation, type) and issubclass(
            annotation, pydantic.BaseModel):
        return annotation
    if t.get_origin(annotation) is dict:
        return dict
    return None


def _check_key(model: type[pydantic.BaseModel], key: str) -> None:
    parts = key.split('.')
    current: t.Any = model
    for depth, part in enumerate(parts):
        if current is dict:
            if depth != len(parts) - 1:
                raise errors.ConfigError(f'unknown config key {key!r}')
            return
        if part not in current.model_fields:
            raise errors.ConfigError(f'unknown config key {key!r}')
        nested = _field_model(current, part)
        if nested is None and depth != len(parts) - 1:
            raise errors.ConfigError(f'unknown config key {key!r}')
        current = nested


def _parse_value(raw: str) -> t.Any:
    raw = raw.strip()
    if raw[:1] in ('[', '{'):
        try:
            return json.loads(raw)
        except json.JSONDecodeError as ex:
            raise errors.ConfigError(f'invalid JSON value {raw!r}') from ex
    if ',' in raw:
        return [part.strip() for part in raw.split(',') if part.strip()]
    return raw


def parse_overrides(lines: t.Iterable[str]) -> dict[str, t.Any]:
    """Turn `key=value` lines into a nested mapping.

    Blank lines and everything after `#` are ignored. Comma separated values
    become lists; values starting with `[` or `{` are read as JSON.

    Raises:
        errors.ConfigError: on a line without `=`, an unknown key or a key
            given twice.
    """
    nested: dict[str, t.Any] = {}
    seen: set[str] = set()
    for number, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise errors.ConfigError(f'line {number}: expected key=value')
        key, raw = (part.strip() for part in line.split('=', 1))
        _check_key(LoopConfig, key)
        if key in seen:
            raise errors.ConfigError(f'line {number}: duplicate key {key!r}')
        seen.add(key)
        target = nested
        *parents, leaf = key.split('.')
        for parent in parents:
            target = target.setdefault(parent, {})
        target[leaf] = _parse_value(raw)
    return nested


def _merge(base: dict[str, t.Any], update: dict[str, t.Any]) -> None:
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value


def build_config(
    overrides: t.Mapping[str, t.Any] | None = None,
    base: LoopConfig | None = None,
) -> LoopConfig:
    """Apply nested overrides to `base` (the defaults when None).

    Mixture mappings are replaced as a whole, not merged.

    Raises:
        errors.ConfigError: when validation fails.
    """
    data = (base or LoopConfig()).model_dump(mode='python')
    for key, value in (overrides or {}).items():
        if key == 'split' and isinstance(value, dict) and 'mixture' in value:
            data['split'].pop('mixture', None)
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            _merge(data[key], value)
        else:
            data[key] = value
    try:
        return LoopConfig.model_validate(data)
    except pydantic.ValidationError as ex:
        raise errors.ConfigError(str(ex)) from ex


def load_config(path: str | pathlib.Path | None = None) -> LoopConfig:
    """Read a flat configuration file. Without a path the defaults apply.

    Raises:
        errors.ConfigError: when the file is unreadable or invalid.
    """
    if path is None:
        return LoopConfig()
    try:
        text = pathlib.Path(path).read_text(encoding='utf-8')
    except OSError as ex:
        raise errors.ConfigError(f'cannot read config {path}') from ex
    return build_config(parse_overrides(text.splitlines()))


def config_hash(
    config: pydantic.BaseModel,
    exclude: t.AbstractSet[str] = frozenset(),
) -> str:
    """sha256 of the canonical JSON form of a configuration, leaving out
    the top level fields in `exclude`."""
    canonical = json.dumps(
        config.model_dump(mode='json', exclude=set(exclude)), sort_keys=True,
        separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
