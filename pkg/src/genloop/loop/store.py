"""The run directory. Each committed iteration is a directory of record
files, checkpoints, the generator state and the metrics so far; the
manifest holds the config hash and a sha256 checksum of every file."""
import hashlib
import json
import logging
import os
import pathlib
import shutil
import typing as t

import pydantic

from genloop import config as config_
from genloop import errors
from genloop import generator
from genloop import policy as policy_
from genloop import rewardmodel
from genloop import synthworld
from genloop.harness import output
from genloop.loop import state as state_

logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'
JOURNAL = 'events.jsonl'
FILES = (
    'dgen.records', 'dhigh.records', 'dpref.records',
    'policy.ckpt', 'rm.ckpt', 'gen.state', 'metrics.csv',
)
METRIC_FIELDS = tuple(state_.MetricsRow.model_fields)
EXTENSIBLE = frozenset({'iterations', 'harness'})
"""Config fields a run may change between sessions; a longer run extends
a shorter one."""


def sha256_file(path: pathlib.Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def iteration_dir(root: pathlib.Path, iteration: int) -> pathlib.Path:
    return root / f'iter_{iteration}'


def write_preferences(
    path: pathlib.Path,
    prefs: t.Iterable[rewardmodel.PreferenceRecord],
) -> None:
    synthworld.write_records(path, (
        synthworld.TripletRecord.from_triplet(
            p.triplet.model_copy(update={'iteration': p.iteration}),
            target_score=p.target_score)
        for p in prefs))


def read_preferences(
    path: pathlib.Path,
) -> list[rewardmodel.PreferenceRecord]:
    prefs = []
    for record in synthworld.read_records(path):
        if record.target_score is None:
            raise errors.DataError(f'{path}: preference without target')
        prefs.append(rewardmodel.PreferenceRecord(
            triplet=record.to_triplet(),
            target_score=record.target_score,
            iteration=record.iteration or 0,
        ))
    return prefs


def read_metrics(path: pathlib.Path) -> list[state_.MetricsRow]:
    try:
        return [state_.MetricsRow.model_validate(row)
                for row in output.read_csv(path)]
    except pydantic.ValidationError as ex:
        raise errors.DataError(f'{path}: {ex}') from ex


class RunStore:
    """Persists loop states under `<root>/<config.name>`."""

    def __init__(
        self,
        root: str | pathlib.Path,
        config: config_.LoopConfig,
    ) -> None:
        self.root = pathlib.Path(root) / config.name
        self.config = config
        self.config_hash = config_.config_hash(config, EXTENSIBLE)

    def __repr__(self) -> str:
        return f'<RunStore {self.root}>'

    @property
    def journal(self) -> pathlib.Path:
        return self.root / JOURNAL

    def _read_manifest(self) -> dict[str, t.Any]:
        path = self.root / MANIFEST
        try:
            return json.loads(path.read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError) as ex:
            raise errors.DataError(f'cannot read manifest {path}') from ex

    def _write_manifest(self, manifest: dict[str, t.Any]) -> None:
        path = self.root / MANIFEST
        tmp = path.with_suffix('.tmp')
        tmp.write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + '\n',
            encoding='utf-8')
        os.replace(tmp, path)

    def open(self) -> None:
        """Create the run directory, or check that an existing one belongs
        to the same configuration.

        Raises:
            errors.ConfigError: when the stored config hash differs.
        """
        self.root.mkdir(parents=True, exist_ok=True)
        if not (self.root / MANIFEST).exists():
            self._write_manifest({
                'config_hash': self.config_hash,
                'config': self.config.model_dump(mode='json'),
                'iterations': {},
            })
            return
        stored = self._read_manifest().get('config_hash')
        if stored != self.config_hash:
            raise errors.ConfigError(
                f'{self.root} was created with another configuration')

    def committed(self) -> list[int]:
        if not (self.root / MANIFEST).exists():
            return []
        return sorted(int(k) for k in self._read_manifest()['iterations'])

    def latest(self) -> int | None:
        done = self.committed()
        return done[-1] if done else None

    def commit(self, state: state_.LoopState) -> pathlib.Path:
        """Write every artifact of `state` and record their checksums.

        Files go to a partial directory first, which replaces the
        iteration directory once complete.
        """
        final = iteration_dir(self.root, state.iteration)
        partial = final.with_name(final.name + '.partial')
        shutil.rmtree(partial, ignore_errors=True)
        partial.mkdir(parents=True)
        try:
            synthworld.write_triplets(partial / 'dgen.records', state.d_gen)
            synthworld.write_triplets(
                partial / 'dhigh.records', state.d_high)
            write_preferences(partial / 'dpref.records', state.d_pref)
            state.policy.save(partial / 'policy.ckpt')
            state.rm.save(partial / 'rm.ckpt')
            (partial / 'gen.state').write_text(
                state.gen.model_dump_json() + '\n', encoding='utf-8')
            output.write_csv(
                partial / 'metrics.csv', state.history, METRIC_FIELDS)
            checksums = {
                name: sha256_file(partial / name) for name in FILES}
        except Exception:
            shutil.rmtree(partial, ignore_errors=True)
            raise
        shutil.rmtree(final, ignore_errors=True)
        os.replace(partial, final)
        manifest = self._read_manifest()
        manifest['iterations'][str(state.iteration)] = checksums
        self._write_manifest(manifest)
        logger.info('committed iteration %d to %s', state.iteration, final)
        return final

    def discard(self, iteration: int) -> None:
        """Remove what an aborted iteration left behind."""
        final = iteration_dir(self.root, iteration)
        shutil.rmtree(final.with_name(final.name + '.partial'),
                      ignore_errors=True)
        if iteration not in self.committed():
            shutil.rmtree(final, ignore_errors=True)

    def verify(self, iteration: int) -> pathlib.Path:
        """Check every file of a committed iteration against the manifest.

        Raises:
            errors.DataError: when the iteration was never committed.
            errors.IntegrityError: on a missing file or checksum mismatch.
        """
        checksums = self._read_manifest()['iterations'].get(str(iteration))
        if checksums is None:
            raise errors.DataError(f'iteration {iteration} not committed')
        directory = iteration_dir(self.root, iteration)
        for name, expected in checksums.items():
            path = directory / name
            if not path.exists():
                raise errors.IntegrityError(f'{path} is missing')
            if sha256_file(path) != expected:
                raise errors.IntegrityError(f'checksum mismatch for {path}')
        return directory

    def load(self, iteration: int) -> state_.LoopState:
        """Rebuild the state committed for `iteration`.

        Raises:
            errors.IntegrityError: when a file does not match its checksum.
            errors.DataError: when a file cannot be parsed.
        """
        directory = self.verify(iteration)
        seed_dir = self.verify(0)
        try:
            gen = generator.GenState.model_validate_json(
                (directory / 'gen.state').read_text(encoding='utf-8'))
        except pydantic.ValidationError as ex:
            raise errors.DataError(f'invalid generator state: {ex}') from ex
        return state_.LoopState(
            iteration=iteration,
            d_seed=tuple(synthworld.read_triplets(
                seed_dir / 'dgen.records')),
            d_gen=tuple(synthworld.read_triplets(directory / 'dgen.records')),
            d_high=tuple(synthworld.read_triplets(
                directory / 'dhigh.records')),
            d_pref=tuple(read_preferences(directory / 'dpref.records')),
            policy=policy_.PolicyNet.load(directory / 'policy.ckpt'),
            rm=rewardmodel.RewardNet.load(
                directory / 'rm.ckpt', self.config.reward),
            gen=gen,
            history=tuple(read_metrics(directory / 'metrics.csv')),
        )
